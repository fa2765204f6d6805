#include "psa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace psa {

Dataset Dataset::slice(std::int64_t begin, std::int64_t count) const {
  Dataset out;
  out.classes = classes;
  out.X = X.middleCols(begin, count);
  out.y.assign(y.begin() + begin, y.begin() + begin + count);
  return out;
}

namespace {

double clip01(double v) { return std::min(1.0, std::max(0.0, v)); }

}  // namespace

Dataset make_blobs(int dim, int samples, int classes, double sigma, Rng& rng,
                   double spread, int signal_dims) {
  if (dim < 1 || samples < 1 || classes < 2)
    throw std::invalid_argument("make_blobs: bad shape");
  if (spread <= 0.0 || spread > 0.9)
    throw std::invalid_argument("make_blobs: spread must be in (0,0.9]");
  if (signal_dims < 0 || signal_dims > dim)
    throw std::invalid_argument("make_blobs: signal_dims out of range");
  if (signal_dims == 0) signal_dims = dim;
  Dataset d;
  d.classes = classes;
  d.X.resize(dim, samples);
  d.y.resize(samples);
  // Centers spaced along the main diagonal, kept away from the walls.
  std::vector<double> center(classes);
  for (int c = 0; c < classes; ++c)
    center[c] = 0.5 - spread / 2 + spread * c / (classes - 1);
  for (int i = 0; i < samples; ++i) {
    const int c = i % classes;
    d.y[i] = c;
    for (int j = 0; j < dim; ++j) {
      const double mu = j < signal_dims ? center[c] : 0.5;
      d.X(j, i) = clip01(mu + sigma * rng.normal());
    }
  }
  return d;
}

Dataset make_rings(int dim, int samples, double noise, Rng& rng, double r0,
                   double r1) {
  if (dim < 2 || samples < 1)
    throw std::invalid_argument("make_rings: need dim >= 2");
  if (!(0.0 < r0 && r0 < r1 && r1 <= 0.5))
    throw std::invalid_argument("make_rings: need 0 < r0 < r1 <= 0.5");
  Dataset d;
  d.classes = 2;
  d.X.resize(dim, samples);
  d.y.resize(samples);
  for (int i = 0; i < samples; ++i) {
    const int c = i % 2;
    d.y[i] = c;
    const double r = (c == 0 ? r0 : r1) + noise * rng.normal();
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    d.X(0, i) = clip01(0.5 + r * std::cos(phi));
    d.X(1, i) = clip01(0.5 + r * std::sin(phi));
    for (int j = 2; j < dim; ++j)
      d.X(j, i) = clip01(0.5 + noise * rng.normal());
  }
  return d;
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("idx: truncated header in " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("cannot open " + images_path);
  if (read_be32(img, images_path) != 0x00000803u)
    throw std::runtime_error("idx: bad image magic in " + images_path);
  const std::uint32_t count = read_be32(img, images_path);
  const std::uint32_t rows = read_be32(img, images_path);
  const std::uint32_t cols = read_be32(img, images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("cannot open " + labels_path);
  if (read_be32(lab, labels_path) != 0x00000801u)
    throw std::runtime_error("idx: bad label magic in " + labels_path);
  const std::uint32_t lcount = read_be32(lab, labels_path);
  if (lcount != count)
    throw std::runtime_error("idx: image/label count mismatch");

  Dataset d;
  const std::int64_t dim = std::int64_t(rows) * cols;
  d.X.resize(dim, count);
  d.y.resize(count);
  std::vector<unsigned char> buf(dim);
  int max_label = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), dim))
      throw std::runtime_error("idx: truncated image data");
    for (std::int64_t j = 0; j < dim; ++j)
      d.X(j, i) = static_cast<double>(buf[j]) / 255.0;
    char lb;
    if (!lab.read(&lb, 1)) throw std::runtime_error("idx: truncated labels");
    d.y[i] = static_cast<unsigned char>(lb);
    max_label = std::max(max_label, d.y[i]);
  }
  d.classes = max_label + 1;
  return d;
}

}  // namespace psa
