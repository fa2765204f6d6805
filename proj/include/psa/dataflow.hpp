#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "psa/hw_config.hpp"
#include "psa/mac_model.hpp"
#include "psa/workload.hpp"

namespace psa {

/// Loop-nest dimensions, Eyeriss naming.  The array order is also the
/// canonical serialization order.
enum class Dim : int { N = 0, K, C, E, F, R, S };
constexpr int kNumDims = 7;
const char* dim_name(Dim d);
Dim dim_from_name(char c);
std::int64_t layer_dim(const LayerShape& layer, Dim d);

enum class Tensor : int { weights = 0, inputs, outputs };
constexpr int kNumTensors = 3;
const char* tensor_name(Tensor t);
/// Whether a loop over dim d addresses tensor t.
bool dim_relevant(Tensor t, Dim d);

/// Temporal loops of one memory level: a full permutation of the 7 dims
/// (outermost first) and a tiling factor per dim.
struct LevelTiling {
  std::array<Dim, kNumDims> order = {Dim::N, Dim::K, Dim::C, Dim::E,
                                     Dim::F, Dim::R, Dim::S};
  std::array<std::int64_t, kNumDims> factors = {1, 1, 1, 1, 1, 1, 1};

  std::int64_t factor(Dim d) const {
    return factors[static_cast<int>(d)];
  }
  std::int64_t& factor(Dim d) { return factors[static_cast<int>(d)]; }
};

/// Mapping of the two physical array axes onto loop dims.
struct SpatialMap {
  Dim row_dim = Dim::N;
  std::int64_t row_factor = 1;
  Dim col_dim = Dim::K;
  std::int64_t col_factor = 1;

  std::int64_t factor(Dim d) const {
    std::int64_t f = 1;
    if (d == row_dim) f *= row_factor;
    if (d == col_dim) f *= col_factor;
    return f;
  }
};

/// Reduction work carried inside one MAC unit (the n partial sums).
struct IntraTiling {
  std::int64_t r = 1, s = 1, c = 1;
  std::int64_t product() const { return r * s * c; }
  std::int64_t factor(Dim d) const {
    switch (d) {
      case Dim::R: return r;
      case Dim::S: return s;
      case Dim::C: return c;
      default: return 1;
    }
  }
};

/// The search genome: per-memory-level loop order + tiling factors, the
/// spatial mapping, and the intra-unit reduction tiling.
struct Dataflow {
  std::vector<LevelTiling> levels;  // one per hw memory level, outer->inner
  SpatialMap spatial;
  IntraTiling intra;

  /// Product of every factor of dim d (temporal, spatial, intra).  Must
  /// cover the layer dim (ceiling padding).
  std::int64_t total_factor(Dim d) const;

  /// Product of the memory-level factors only (= temporal issue count).
  std::int64_t temporal_iterations() const;

  std::string serialize(const HardwareConfig& hw) const;
  static Dataflow parse(const std::string& text, const HardwareConfig& hw);
  std::uint64_t hash(const HardwareConfig& hw) const;

  /// The degenerate always-valid dataflow: full dims at the outermost
  /// level, everything else 1.
  static Dataflow all_at_outer(const LayerShape& layer,
                               const HardwareConfig& hw);
};

struct Violation {
  std::string code;
  std::string message;
};

/// Structural validity: full permutations, positive factors, coverage of
/// every dim, reduction-only intra tiling within the unit capacity, spatial
/// mapping within the array.  Buffer capacity is the refresh derivation's
/// job, not checked here.
std::vector<Violation> validate_dataflow(const Dataflow& df,
                                         const LayerShape& layer,
                                         const HardwareConfig& hw,
                                         const MacArchitecture& arch,
                                         const Precision& q);

/// Refresh location of one tensor at one buffered level: the tile stays
/// resident across the level's loops at positions >= position; loops at
/// positions < position (and every outer level) cycle it.
struct RefreshEntry {
  int position = 0;            // in [0, 7]
  std::int64_t tile_words = 0;
};

struct RefreshAssignment {
  // Indexed by buffered level (hw level 1..L-1 -> index 0..L-2), tensor.
  std::vector<std::array<RefreshEntry, kNumTensors>> per_level;
  std::int64_t occupancy(std::size_t buffered_idx) const;
};

struct RefreshInfeasible {
  std::string level_name;
  std::int64_t needed_words = 0;
  std::int64_t capacity_words = 0;
};

using RefreshResult = std::variant<RefreshAssignment, RefreshInfeasible>;

/// Per buffered level, jointly choose the outermost refresh positions whose
/// tiles fit the shared capacity, maximizing occupancy ("the one occupying
/// the most memory size without causing overflow").  Exhaustive over the
/// 8^3 position combinations per level; ties prefer outer positions in
/// tensor order weights, inputs, outputs.
RefreshResult derive_refresh(const Dataflow& df, const LayerShape& layer,
                             const HardwareConfig& hw);

/// Traffic of one tensor across one boundary (between levels b and b+1).
struct TrafficCell {
  std::int64_t tile_loads = 0;     // load events into the inner level
  std::int64_t first_touches = 0;  // distinct tiles (outputs: fresh tiles)
  std::int64_t words_down = 0;     // outer -> inner
  std::int64_t words_up = 0;       // inner -> outer (output writebacks)
  std::int64_t total_words() const { return words_down + words_up; }
};

struct TrafficTable {
  // cells[boundary][tensor]; boundary b sits between hw levels b and b+1.
  std::vector<std::array<TrafficCell, kNumTensors>> cells;
};

/// Analytic reuse model under single-tile-per-tensor-per-level buffering.
/// Must agree integer-exactly with oracle_access_counts.
TrafficTable access_counts(const Dataflow& df, const LayerShape& layer,
                           const HardwareConfig& hw,
                           const RefreshAssignment& refresh);

/// Ground truth: executes the concrete tiled loop nest, keeping one tile
/// per (level, tensor) keyed by tile coordinates and counting every
/// load/evict/writeback event.  Refuses layers whose temporal iteration
/// count exceeds the guard.
TrafficTable oracle_access_counts(const Dataflow& df, const LayerShape& layer,
                                  const HardwareConfig& hw,
                                  const RefreshAssignment& refresh,
                                  std::int64_t max_iterations = 2'000'000);

/// Full latency/energy report.
struct CostReport {
  std::string arch;
  Precision precision{8, 8};
  std::string layer_name;
  std::uint64_t dataflow_hash = 0;

  double compute_cycles = 0.0;
  double stall_cycles = 0.0;
  double total_cycles = 0.0;
  double utilization = 0.0;

  std::int64_t true_macs = 0;
  std::int64_t padded_macs = 0;

  double mac_energy_total = 0.0;
  double traffic_energy_total = 0.0;
  double energy_total = 0.0;

  struct TrafficRow {
    std::string boundary;  // "DRAM<->GlobalBuffer"
    std::string tensor;
    std::int64_t words = 0;
    double energy = 0.0;
  };
  std::vector<TrafficRow> traffic;
  MacAreaBreakdown area;
  bool defaulted_hw_tables = false;

  double edp() const { return energy_total * total_cycles; }
  double fitness(const std::string& kind) const;  // energy | latency | edp

  std::string to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
  std::uint64_t hash() const;
};

/// Evaluate one (dataflow, layer, arch, precision) point.  Throws
/// RefreshInfeasibleError on dataflows with no feasible refresh location.
struct RefreshInfeasibleError : std::runtime_error {
  explicit RefreshInfeasibleError(const RefreshInfeasible& info);
  RefreshInfeasible info;
};

CostReport evaluate(const Dataflow& df, const LayerShape& layer,
                    const HardwareConfig& hw, const MacArchitecture& arch,
                    const Precision& q, bool pack_bits = false);

/// FNV-1a, used for report and genome hashing.
std::uint64_t fnv1a(const void* data, std::size_t len,
                    std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t fnv1a(const std::string& s);

}  // namespace psa
