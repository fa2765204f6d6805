#include "psa/search.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace psa {

bool operator==(const LevelTiling& a, const LevelTiling& b) {
  return a.order == b.order && a.factors == b.factors;
}
bool operator==(const SpatialMap& a, const SpatialMap& b) {
  return a.row_dim == b.row_dim && a.row_factor == b.row_factor &&
         a.col_dim == b.col_dim && a.col_factor == b.col_factor;
}
bool operator==(const IntraTiling& a, const IntraTiling& b) {
  return a.r == b.r && a.s == b.s && a.c == b.c;
}
bool operator==(const Dataflow& a, const Dataflow& b) {
  return a.levels == b.levels && a.spatial == b.spatial && a.intra == b.intra;
}

void canonicalize(Dataflow& df) {
  for (auto& lv : df.levels) {
    std::array<Dim, kNumDims> next;
    int n = 0;
    for (int p = 0; p < kNumDims; ++p)
      if (lv.factor(lv.order[p]) > 1) next[n++] = lv.order[p];
    for (int d = 0; d < kNumDims; ++d)
      if (lv.factor(static_cast<Dim>(d)) <= 1) next[n++] = static_cast<Dim>(d);
    lv.order = next;
  }
  if (df.spatial.row_factor == 1) df.spatial.row_dim = Dim::N;
  if (df.spatial.col_factor == 1) df.spatial.col_dim = Dim::K;
  if (df.spatial.row_dim == df.spatial.col_dim) df.spatial.col_dim = Dim::K;
  if (df.spatial.row_dim == Dim::K && df.spatial.col_dim == Dim::K)
    df.spatial.col_dim = Dim::C;
}

namespace {

std::vector<std::int64_t> divisors(std::int64_t n) {
  std::vector<std::int64_t> out;
  for (std::int64_t d = 1; d * d <= n; ++d) {
    if (n % d == 0) {
      out.push_back(d);
      if (d != n / d) out.push_back(n / d);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  return (a + b - 1) / b;
}

/// Random ordered factorization of t into `slots` divisor parts whose
/// product is exactly t.
std::vector<std::int64_t> random_factorization(std::int64_t t, int slots,
                                               Rng& rng) {
  std::vector<std::int64_t> out(slots, 1);
  std::int64_t rem = t;
  for (int i = 0; i + 1 < slots; ++i) {
    auto divs = divisors(rem);
    out[i] = divs[rng.uniform_int(static_cast<std::uint64_t>(divs.size()))];
    rem /= out[i];
  }
  out[slots - 1] = rem;
  return out;
}

std::vector<Dim> effective_dims(const LayerShape& layer) {
  std::vector<Dim> out;
  for (int i = 0; i < kNumDims; ++i)
    if (layer_dim(layer, static_cast<Dim>(i)) > 1)
      out.push_back(static_cast<Dim>(i));
  return out;
}

void sample_spatial_intra(Dataflow& df, const LayerShape& layer,
                          const HardwareConfig& hw,
                          const MacArchitecture& arch, const Precision& q,
                          Rng& rng) {
  const std::vector<Dim> eff = effective_dims(layer);
  auto sample_axis = [&](std::int64_t bound, Dim avoid, bool use_avoid) {
    const Dim d =
        eff.empty()
            ? Dim::N
            : eff[rng.uniform_int(static_cast<std::uint64_t>(eff.size()))];
    std::vector<std::int64_t> cand;
    for (std::int64_t f : divisors(layer_dim(layer, d)))
      if (f <= bound && (!use_avoid || d != avoid || f == 1)) cand.push_back(f);
    const std::int64_t f =
        cand[rng.uniform_int(static_cast<std::uint64_t>(cand.size()))];
    return std::make_pair(d, f);
  };
  auto [rd, rf] = sample_axis(hw.array_rows, Dim::N, false);
  df.spatial.row_dim = rd;
  df.spatial.row_factor = rf;
  auto [cd, cf] = sample_axis(hw.array_cols, rd, true);
  df.spatial.col_dim = cd;
  df.spatial.col_factor = cf;

  std::int64_t cap = intra_unit_capacity(arch, q.weight_bits, q.act_bits);
  df.intra = IntraTiling{};
  // Visit the reduction dims in random order so none is favored.
  std::array<Dim, 3> red = {Dim::R, Dim::S, Dim::C};
  rng.shuffle(red);
  for (Dim d : red) {
    std::vector<std::int64_t> cand;
    for (std::int64_t f : divisors(layer_dim(layer, d)))
      if (f <= cap) cand.push_back(f);
    const std::int64_t f =
        cand[rng.uniform_int(static_cast<std::uint64_t>(cand.size()))];
    if (d == Dim::R)
      df.intra.r = f;
    else if (d == Dim::S)
      df.intra.s = f;
    else
      df.intra.c = f;
    cap /= f;
  }
}

void resample_column(Dataflow& df, const LayerShape& layer, Dim d, Rng& rng) {
  const std::int64_t outside = df.spatial.factor(d) * df.intra.factor(d);
  const std::int64_t target =
      std::max<std::int64_t>(1, ceil_div(layer_dim(layer, d), outside));
  auto parts =
      random_factorization(target, static_cast<int>(df.levels.size()), rng);
  for (std::size_t l = 0; l < df.levels.size(); ++l)
    df.levels[l].factor(d) = parts[l];
}

}  // namespace

Dataflow random_dataflow(const LayerShape& layer, const HardwareConfig& hw,
                         const MacArchitecture& arch, const Precision& q,
                         Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Dataflow df;
    df.levels.resize(hw.levels.size());
    for (auto& lv : df.levels) {
      std::array<Dim, kNumDims> perm = {Dim::N, Dim::K, Dim::C, Dim::E,
                                        Dim::F, Dim::R, Dim::S};
      rng.shuffle(perm);
      lv.order = perm;
    }
    sample_spatial_intra(df, layer, hw, arch, q, rng);
    for (int i = 0; i < kNumDims; ++i)
      resample_column(df, layer, static_cast<Dim>(i), rng);
    canonicalize(df);
    if (validate_dataflow(df, layer, hw, arch, q).empty()) return df;
  }
  Dataflow fallback = Dataflow::all_at_outer(layer, hw);
  canonicalize(fallback);
  return fallback;
}

Dataflow crossover(const Dataflow& a, const Dataflow& b, Rng& rng) {
  if (a.levels.size() != b.levels.size())
    throw std::invalid_argument("crossover: mismatched level counts");
  Dataflow child = a;
  if (rng.uniform_int(std::uint64_t{2}) == 0) {
    // Transplant one level's loop order; the spatial/intra block counts as
    // the innermost level.
    const std::size_t idx =
        rng.uniform_int(static_cast<std::uint64_t>(a.levels.size() + 1));
    if (idx < a.levels.size()) {
      child.levels[idx].order = b.levels[idx].order;
    } else {
      child.spatial = b.spatial;
      child.intra = b.intra;
    }
  } else {
    const Dim d = static_cast<Dim>(rng.uniform_int(std::uint64_t{kNumDims}));
    for (std::size_t l = 0; l < child.levels.size(); ++l)
      child.levels[l].factor(d) = b.levels[l].factor(d);
    if (d == Dim::R) child.intra.r = b.intra.r;
    if (d == Dim::S) child.intra.s = b.intra.s;
    if (d == Dim::C) child.intra.c = b.intra.c;
  }
  canonicalize(child);
  return child;
}

Dataflow mutate(const Dataflow& a, const LayerShape& layer,
                const HardwareConfig& hw, const MacArchitecture& arch,
                const Precision& q, Rng& rng) {
  // "To another choice": retry until the canonical genome actually moved.
  // A genome space with no alternatives maps to itself.
  const std::vector<Dim> eff = effective_dims(layer);
  for (int attempt = 0; attempt < 30; ++attempt) {
    Dataflow child = a;
    switch (rng.uniform_int(std::uint64_t{3})) {
      case 0: {
        const std::size_t idx =
            rng.uniform_int(static_cast<std::uint64_t>(a.levels.size()));
        std::array<Dim, kNumDims> perm = child.levels[idx].order;
        rng.shuffle(perm);
        child.levels[idx].order = perm;
        break;
      }
      case 1: {
        if (eff.empty()) continue;
        const Dim d =
            eff[rng.uniform_int(static_cast<std::uint64_t>(eff.size()))];
        resample_column(child, layer, d, rng);
        break;
      }
      default:
        sample_spatial_intra(child, layer, hw, arch, q, rng);
        break;
    }
    canonicalize(child);
    if (!(child == a)) return child;
  }
  return a;
}

namespace {

struct Individual {
  Dataflow df;
  double fitness = std::numeric_limits<double>::infinity();
  bool feasible = false;
  CostReport report;
};

}  // namespace

SearchResult search_dataflow(const LayerShape& layer, const HardwareConfig& hw,
                             const MacArchitecture& arch, const Precision& q,
                             const SearchConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SearchResult result;

  auto make_individual = [&](Dataflow df) {
    Individual ind;
    ind.df = std::move(df);
    ++result.evaluations;
    try {
      ind.report = evaluate(ind.df, layer, hw, arch, q);
      ind.fitness = ind.report.fitness(cfg.fitness);
      ind.feasible = true;
    } catch (const RefreshInfeasibleError&) {
      ind.fitness = std::numeric_limits<double>::infinity();
    }
    return ind;
  };

  std::vector<Individual> pop;
  pop.reserve(cfg.population_size);
  for (int i = 0; i < cfg.population_size; ++i)
    pop.push_back(make_individual(random_dataflow(layer, hw, arch, q, rng)));

  auto best_of = [&]() {
    std::size_t bi = 0;
    for (std::size_t i = 1; i < pop.size(); ++i)
      if (pop[i].fitness < pop[bi].fitness) bi = i;
    return bi;
  };
  result.history.push_back(pop[best_of()].fitness);

  const int survivors =
      std::max(1, static_cast<int>(cfg.survivor_fraction * cfg.population_size));
  result.survivors_per_cycle = survivors;

  for (int cycle = 0; cycle < cfg.total_cycles; ++cycle) {
    std::stable_sort(pop.begin(), pop.end(),
                     [](const Individual& x, const Individual& y) {
                       return x.fitness < y.fitness;
                     });
    pop.resize(std::min<std::size_t>(survivors, pop.size()));
    const std::size_t n_survivors = pop.size();

    auto pick = [&]() -> const Dataflow& {
      return pop[rng.uniform_int(static_cast<std::uint64_t>(n_survivors))].df;
    };
    auto try_append = [&](auto&& gen) {
      for (int attempt = 0; attempt < 100; ++attempt) {
        Dataflow child = gen();
        if (validate_dataflow(child, layer, hw, arch, q).empty()) {
          pop.push_back(make_individual(std::move(child)));
          return true;
        }
      }
      return false;  // skipped after the retry bound
    };

    while (pop.size() < static_cast<std::size_t>(cfg.population_size)) {
      bool grew = try_append([&] { return crossover(pick(), pick(), rng); });
      if (pop.size() < static_cast<std::size_t>(cfg.population_size))
        grew |= try_append(
            [&] { return mutate(pick(), layer, hw, arch, q, rng); });
      if (!grew) break;  // both operators exhausted their retries
    }
    result.history.push_back(pop[best_of()].fitness);
  }

  Individual& best = pop[best_of()];
  if (!best.feasible)
    throw RefreshInfeasibleError(
        {"search", 0, 0});  // every candidate infeasible: degenerate hw
  result.best = best.df;
  result.best_report = best.report;
  result.best_fitness = best.fitness;
  return result;
}

void ArchMenu::validate() const {
  if (array_choices.empty() && level_choices.empty())
    throw std::invalid_argument("arch menu has no choices");
  for (const auto& [name, entries] : level_choices) {
    bool found = false;
    for (const auto& l : base.levels) found |= (l.name == name);
    if (!found)
      throw std::invalid_argument("menu level '" + name +
                                  "' not in the base config");
    if (entries.empty())
      throw std::invalid_argument("menu level '" + name + "' has no entries");
  }
  // Every combination must be a valid config.
  std::vector<int> genome(genome_size(), 0);
  const auto counts = choice_counts();
  bool done = false;
  while (!done) {
    build(genome).validate();
    std::size_t i = 0;
    for (; i < genome.size(); ++i) {
      if (++genome[i] < static_cast<int>(counts[i])) break;
      genome[i] = 0;
    }
    done = (i == genome.size());
  }
}

std::vector<std::size_t> ArchMenu::choice_counts() const {
  std::vector<std::size_t> counts;
  counts.push_back(std::max<std::size_t>(1, array_choices.size()));
  for (const auto& [name, entries] : level_choices)
    counts.push_back(entries.size());
  return counts;
}

HardwareConfig ArchMenu::build(const std::vector<int>& genome) const {
  if (genome.size() != genome_size())
    throw std::invalid_argument("arch genome size mismatch");
  HardwareConfig hw = base;
  if (!array_choices.empty()) {
    const auto& a = array_choices.at(genome[0]);
    hw.array_rows = a.rows;
    hw.array_cols = a.cols;
  }
  for (std::size_t i = 0; i < level_choices.size(); ++i) {
    const auto& [name, entries] = level_choices[i];
    const MemLevel& chosen = entries.at(genome[i + 1]);
    for (auto& l : hw.levels)
      if (l.name == name) {
        l.capacity_words = chosen.capacity_words;
        l.bandwidth_words_per_cycle = chosen.bandwidth_words_per_cycle;
        l.energy_per_word_read = chosen.energy_per_word_read;
        l.energy_per_word_write = chosen.energy_per_word_write;
      }
  }
  return hw;
}

ArchMenu ArchMenu::parse_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("arch menu parse error: ") + e.what());
  }
  ArchMenu menu;
  if (!j.contains("base"))
    throw std::runtime_error("arch menu: missing 'base' hardware config");
  menu.base = parse_hw_config_text(j["base"].dump());
  if (j.contains("array_choices"))
    for (const auto& ja : j["array_choices"])
      menu.array_choices.push_back(
          {ja.at("rows").get<std::int64_t>(), ja.at("cols").get<std::int64_t>()});
  if (j.contains("level_choices")) {
    for (auto it = j["level_choices"].begin(); it != j["level_choices"].end();
         ++it) {
      std::vector<MemLevel> entries;
      for (const auto& je : it.value()) {
        MemLevel l;
        l.name = it.key();
        l.capacity_words = je.at("capacity_words").get<std::int64_t>();
        l.bandwidth_words_per_cycle = je.at("bandwidth").get<double>();
        l.energy_per_word_read = je.at("e_read").get<double>();
        l.energy_per_word_write = je.at("e_write").get<double>();
        entries.push_back(l);
      }
      menu.level_choices.emplace_back(it.key(), std::move(entries));
    }
  }
  menu.validate();
  return menu;
}

ArchMenu ArchMenu::parse(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open arch menu: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

namespace {

std::uint64_t genome_key(const std::vector<int>& g) {
  return fnv1a(g.data(), g.size() * sizeof(int));
}

}  // namespace

ArchSearchResult search_arch(const ArchMenu& menu,
                             const std::vector<Network>& workloads,
                             const PrecisionSet& precision_set,
                             const MacArchitecture& arch,
                             const SearchConfig& cfg) {
  cfg.validate();
  if (workloads.empty())
    throw std::invalid_argument("search_arch: no workloads");
  menu.validate();

  const auto counts = menu.choice_counts();
  Rng rng(cfg.seed ^ 0xa5c3ull);
  ArchSearchResult result;

  SearchConfig inner = cfg;
  inner.population_size = std::max(4, cfg.population_size / 2);
  inner.total_cycles = std::max(1, cfg.total_cycles / 2);

  struct Entry {
    double fitness;
    std::map<std::pair<std::string, std::string>, Dataflow> dataflows;
  };
  std::map<std::uint64_t, Entry> cache;

  auto fitness_of = [&](const std::vector<int>& genome) -> const Entry& {
    const std::uint64_t key = genome_key(genome);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    Entry e;
    const HardwareConfig hw = menu.build(genome);
    // Inner seeds derive from the built config, not the menu indices, so
    // identical configs get identical inner searches however they are
    // spelled in the menu.
    const std::uint64_t hw_key = fnv1a(serialize_hw_config(hw));
    double sum = 0.0;
    std::int64_t n = 0;
    for (std::size_t w = 0; w < workloads.size(); ++w) {
      for (std::size_t li = 0; li < workloads[w].layers.size(); ++li) {
        const LayerShape& layer = workloads[w].layers[li];
        for (const auto& q : precision_set.members()) {
          SearchConfig one = inner;
          const std::string tag = q.str() + "/" + layer.name;
          one.seed = fnv1a(tag.data(), tag.size(),
                           hw_key ^ (cfg.seed * 0x9e3779b97f4a7c15ull));
          auto r = search_dataflow(layer, hw, arch, q, one);
          ++result.inner_searches;
          sum += r.best_fitness;
          ++n;
          e.dataflows[{layer.name, q.str()}] = r.best;
        }
      }
    }
    e.fitness = sum / static_cast<double>(n);
    return cache.emplace(key, std::move(e)).first->second;
  };

  auto random_genome = [&]() {
    std::vector<int> g(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
      g[i] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(counts[i])));
    return g;
  };

  struct Ind {
    std::vector<int> genome;
    double fitness;
  };
  std::vector<Ind> pop;
  for (int i = 0; i < cfg.population_size; ++i) {
    auto g = random_genome();
    pop.push_back({g, fitness_of(g).fitness});
  }
  auto best_of = [&]() {
    std::size_t bi = 0;
    for (std::size_t i = 1; i < pop.size(); ++i)
      if (pop[i].fitness < pop[bi].fitness) bi = i;
    return bi;
  };
  result.history.push_back(pop[best_of()].fitness);

  const int survivors =
      std::max(1, static_cast<int>(cfg.survivor_fraction * cfg.population_size));
  for (int cycle = 0; cycle < cfg.total_cycles; ++cycle) {
    std::stable_sort(pop.begin(), pop.end(), [](const Ind& a, const Ind& b) {
      return a.fitness < b.fitness;
    });
    pop.resize(std::min<std::size_t>(survivors, pop.size()));
    const std::size_t ns = pop.size();
    auto pick = [&]() -> const std::vector<int>& {
      return pop[rng.uniform_int(static_cast<std::uint64_t>(ns))].genome;
    };
    while (pop.size() < static_cast<std::size_t>(cfg.population_size)) {
      // Crossover: per-position uniform mix of two survivors.
      const auto &a = pick(), &b = pick();
      std::vector<int> child(counts.size());
      for (std::size_t i = 0; i < counts.size(); ++i)
        child[i] = rng.uniform_int(std::uint64_t{2}) ? a[i] : b[i];
      pop.push_back({child, fitness_of(child).fitness});
      if (pop.size() >= static_cast<std::size_t>(cfg.population_size)) break;
      // Mutation: one position to a fresh choice.
      std::vector<int> m = pick();
      const std::size_t pos =
          rng.uniform_int(static_cast<std::uint64_t>(counts.size()));
      m[pos] = static_cast<int>(
          rng.uniform_int(static_cast<std::uint64_t>(counts[pos])));
      pop.push_back({m, fitness_of(m).fitness});
    }
    result.history.push_back(pop[best_of()].fitness);
  }

  const Ind& best = pop[best_of()];
  result.best_genome = best.genome;
  result.best_hw = menu.build(best.genome);
  result.best_fitness = best.fitness;
  result.dataflows = fitness_of(best.genome).dataflows;
  return result;
}

}  // namespace psa
