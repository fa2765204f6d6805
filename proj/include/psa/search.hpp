#pragma once

#include <map>

#include "psa/dataflow.hpp"
#include "psa/rng.hpp"

namespace psa {

struct SearchConfig {
  int population_size = 20;
  int total_cycles = 20;             // evolution cycles
  double survivor_fraction = 0.30;   // fixed by the algorithm
  std::string fitness = "edp";       // energy | latency | edp
  std::uint64_t seed = 1;

  void validate() const {
    if (population_size < 4)
      throw std::invalid_argument("population_size must be >= 4");
    if (total_cycles < 0)
      throw std::invalid_argument("total_cycles must be >= 0");
    if (fitness != "energy" && fitness != "latency" && fitness != "edp")
      throw std::invalid_argument("fitness must be energy|latency|edp");
  }
};

/// Push trip-1 loops innermost (in dim order) at every level and default the
/// spatial dims of factor-1 axes; equivalent genomes get one spelling.
void canonicalize(Dataflow& df);

/// Uniformly sampled valid dataflow: random loop orders, spatial/intra
/// mapping within bounds, and exact divisor factorizations of each
/// ceiling-padded dim across the memory levels.  Falls back to the
/// everything-at-the-outer-level dataflow after bounded retries.
Dataflow random_dataflow(const LayerShape& layer, const HardwareConfig& hw,
                         const MacArchitecture& arch, const Precision& q,
                         Rng& rng);

/// Child = a with either one level's loop order (the spatial block counts
/// as a level) or one dim's tiling-factor column taken from b.  May be
/// invalid; callers filter.
Dataflow crossover(const Dataflow& a, const Dataflow& b, Rng& rng);

/// Exactly one edit: re-permute one level's loop order, resample one dim's
/// factor column, or resample the spatial/intra block.  May be invalid;
/// callers filter.
Dataflow mutate(const Dataflow& a, const LayerShape& layer,
                const HardwareConfig& hw, const MacArchitecture& arch,
                const Precision& q, Rng& rng);

struct SearchResult {
  Dataflow best;
  CostReport best_report;
  double best_fitness = 0.0;
  std::vector<double> history;  // best-so-far after init and each cycle
  std::int64_t evaluations = 0;
  int survivors_per_cycle = 0;  // floor(survivor_fraction * population)
};

/// Evolutionary dataflow search: keep the top 30%, refill with alternating
/// validity-filtered crossover and mutation until the population is full,
/// repeat for total_cycles.  Infeasible-refresh dataflows score +inf.
SearchResult search_dataflow(const LayerShape& layer, const HardwareConfig& hw,
                             const MacArchitecture& arch, const Precision& q,
                             const SearchConfig& cfg);

/// Discrete design-space menu for the micro-architecture search mode.
struct ArchMenu {
  HardwareConfig base;
  struct ArrayChoice {
    std::int64_t rows, cols;
  };
  std::vector<ArrayChoice> array_choices;
  // Per level name, alternative (capacity, bandwidth, energies) entries.
  std::vector<std::pair<std::string, std::vector<MemLevel>>> level_choices;

  void validate() const;
  std::size_t genome_size() const { return 1 + level_choices.size(); }
  std::vector<std::size_t> choice_counts() const;
  HardwareConfig build(const std::vector<int>& genome) const;

  static ArchMenu parse(const std::string& path);
  static ArchMenu parse_text(const std::string& text);
};

struct ArchSearchResult {
  std::vector<int> best_genome;
  HardwareConfig best_hw;
  double best_fitness = 0.0;
  // Optimized dataflow per (layer name, precision) under the best config.
  std::map<std::pair<std::string, std::string>, Dataflow> dataflows;
  std::vector<double> history;
  std::int64_t inner_searches = 0;
};

/// Outer evolutionary loop over menu index tuples; a genome's fitness is
/// the mean inner search_dataflow fitness over every workload layer and
/// precision (inner budget halved).
ArchSearchResult search_arch(const ArchMenu& menu,
                             const std::vector<Network>& workloads,
                             const PrecisionSet& precision_set,
                             const MacArchitecture& arch,
                             const SearchConfig& cfg);

bool operator==(const LevelTiling& a, const LevelTiling& b);
bool operator==(const SpatialMap& a, const SpatialMap& b);
bool operator==(const IntraTiling& a, const IntraTiling& b);
bool operator==(const Dataflow& a, const Dataflow& b);

}  // namespace psa
