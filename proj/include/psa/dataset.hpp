#pragma once

#include <string>
#include <vector>

#include "psa/quantize.hpp"
#include "psa/rng.hpp"

namespace psa {

/// Inputs are columns of X, one label per column.  All features live in
/// [0,1] so the attack domain clamp never eats into the perturbation budget.
struct Dataset {
  Matrix X;                // dim x samples
  std::vector<int> y;      // labels in [0, classes)
  int classes = 2;

  std::int64_t size() const { return X.cols(); }
  std::int64_t dim() const { return X.rows(); }

  Dataset slice(std::int64_t begin, std::int64_t count) const;
};

/// Gaussian blobs: class centers on the diagonal of the unit cube, spanning
/// `spread` per coordinate, samples clipped into [0,1].  Round-robin labels
/// keep classes balanced.  With signal_dims > 0 only the first signal_dims
/// coordinates separate the classes; the rest are pure noise around 0.5.
Dataset make_blobs(int dim, int samples, int classes, double sigma, Rng& rng,
                   double spread = 0.4, int signal_dims = 0);

/// Two concentric rings in the first two feature dimensions, radii r0 < r1
/// around (0.5, 0.5).
Dataset make_rings(int dim, int samples, double noise, Rng& rng,
                   double r0 = 0.15, double r1 = 0.35);

/// IDX-format loader (big-endian dims; magic 0x00000803 for ubyte images,
/// 0x00000801 for ubyte labels).  Pixels are scaled to [0,1] by /255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

}  // namespace psa
