#include "psa/dataflow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace psa {

const char* dim_name(Dim d) {
  static const char* names[] = {"N", "K", "C", "E", "F", "R", "S"};
  return names[static_cast<int>(d)];
}

Dim dim_from_name(char c) {
  switch (c) {
    case 'N': return Dim::N;
    case 'K': return Dim::K;
    case 'C': return Dim::C;
    case 'E': return Dim::E;
    case 'F': return Dim::F;
    case 'R': return Dim::R;
    case 'S': return Dim::S;
  }
  throw std::invalid_argument(std::string("unknown dim '") + c + "'");
}

std::int64_t layer_dim(const LayerShape& layer, Dim d) {
  switch (d) {
    case Dim::N: return layer.N;
    case Dim::K: return layer.K;
    case Dim::C: return layer.C;
    case Dim::E: return layer.E;
    case Dim::F: return layer.F;
    case Dim::R: return layer.R;
    case Dim::S: return layer.S;
  }
  return 1;
}

const char* tensor_name(Tensor t) {
  static const char* names[] = {"weights", "inputs", "outputs"};
  return names[static_cast<int>(t)];
}

bool dim_relevant(Tensor t, Dim d) {
  switch (t) {
    case Tensor::weights:
      return d == Dim::K || d == Dim::C || d == Dim::R || d == Dim::S;
    case Tensor::inputs:
      // E/F/R/S address the input through the sliding window.
      return d != Dim::K;
    case Tensor::outputs:
      return d == Dim::N || d == Dim::K || d == Dim::E || d == Dim::F;
  }
  return false;
}

std::int64_t Dataflow::total_factor(Dim d) const {
  std::int64_t p = spatial.factor(d) * intra.factor(d);
  for (const auto& lv : levels) p *= lv.factor(d);
  return p;
}

std::int64_t Dataflow::temporal_iterations() const {
  std::int64_t p = 1;
  for (const auto& lv : levels)
    for (int i = 0; i < kNumDims; ++i) p *= lv.factors[i];
  return p;
}

Dataflow Dataflow::all_at_outer(const LayerShape& layer,
                                const HardwareConfig& hw) {
  Dataflow df;
  df.levels.resize(hw.levels.size());
  for (int i = 0; i < kNumDims; ++i)
    df.levels[0].factors[i] = layer_dim(layer, static_cast<Dim>(i));
  return df;
}

std::string Dataflow::serialize(const HardwareConfig& hw) const {
  if (levels.size() != hw.levels.size())
    throw std::invalid_argument("dataflow/hw level count mismatch");
  std::ostringstream out;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    out << "level " << hw.levels[l].name << " order=";
    for (int i = 0; i < kNumDims; ++i) {
      if (i) out << ",";
      out << dim_name(levels[l].order[i]);
    }
    out << " factors=";
    for (int i = 0; i < kNumDims; ++i) {
      if (i) out << ",";
      out << dim_name(static_cast<Dim>(i)) << ":" << levels[l].factors[i];
    }
    out << "\n";
  }
  out << "spatial rows=" << dim_name(spatial.row_dim) << ":"
      << spatial.row_factor << " cols=" << dim_name(spatial.col_dim) << ":"
      << spatial.col_factor << "\n";
  out << "intra R:" << intra.r << ",S:" << intra.s << ",C:" << intra.c << "\n";
  return out.str();
}

namespace {

std::pair<Dim, std::int64_t> parse_dim_factor(const std::string& tok) {
  auto colon = tok.find(':');
  if (colon == std::string::npos || colon == 0)
    throw std::runtime_error("dataflow parse: expected DIM:factor, got '" +
                             tok + "'");
  const Dim d = dim_from_name(tok[0]);
  return {d, std::stoll(tok.substr(colon + 1))};
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

}  // namespace

Dataflow Dataflow::parse(const std::string& text, const HardwareConfig& hw) {
  Dataflow df;
  df.levels.resize(hw.levels.size());
  std::size_t level_idx = 0;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto toks = split(line, ' ');
    const std::string locus = "dataflow line " + std::to_string(lineno);
    if (toks[0] == "level") {
      if (toks.size() != 4)
        throw std::runtime_error(locus + ": expected 'level NAME order=.. factors=..'");
      if (level_idx >= hw.levels.size())
        throw std::runtime_error(locus + ": more levels than the hw config");
      if (toks[1] != hw.levels[level_idx].name)
        throw std::runtime_error(locus + ": level name '" + toks[1] +
                                 "' does not match hw level '" +
                                 hw.levels[level_idx].name + "'");
      LevelTiling& lv = df.levels[level_idx];
      if (toks[2].rfind("order=", 0) != 0 || toks[3].rfind("factors=", 0) != 0)
        throw std::runtime_error(locus + ": bad level fields");
      auto dims = split(toks[2].substr(6), ',');
      if (dims.size() != kNumDims)
        throw std::runtime_error(locus + ": order needs all 7 dims");
      for (int i = 0; i < kNumDims; ++i) lv.order[i] = dim_from_name(dims[i][0]);
      for (const auto& tok : split(toks[3].substr(8), ',')) {
        auto [d, f] = parse_dim_factor(tok);
        lv.factor(d) = f;
      }
      ++level_idx;
    } else if (toks[0] == "spatial") {
      if (toks.size() != 3 || toks[1].rfind("rows=", 0) != 0 ||
          toks[2].rfind("cols=", 0) != 0)
        throw std::runtime_error(locus + ": expected 'spatial rows=D:f cols=D:f'");
      auto [rd, rf] = parse_dim_factor(toks[1].substr(5));
      auto [cd, cf] = parse_dim_factor(toks[2].substr(5));
      df.spatial = {rd, rf, cd, cf};
    } else if (toks[0] == "intra") {
      for (const auto& tok : split(toks[1], ',')) {
        auto [d, f] = parse_dim_factor(tok);
        if (d == Dim::R)
          df.intra.r = f;
        else if (d == Dim::S)
          df.intra.s = f;
        else if (d == Dim::C)
          df.intra.c = f;
        else
          throw std::runtime_error(locus + ": intra tiling is over R,S,C only");
      }
    } else {
      throw std::runtime_error(locus + ": unknown record '" + toks[0] + "'");
    }
  }
  if (level_idx != hw.levels.size())
    throw std::runtime_error("dataflow parse: expected " +
                             std::to_string(hw.levels.size()) + " levels, got " +
                             std::to_string(level_idx));
  return df;
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::uint64_t Dataflow::hash(const HardwareConfig& hw) const {
  return fnv1a(serialize(hw));
}

std::vector<Violation> validate_dataflow(const Dataflow& df,
                                         const LayerShape& layer,
                                         const HardwareConfig& hw,
                                         const MacArchitecture& arch,
                                         const Precision& q) {
  std::vector<Violation> v;
  if (df.levels.size() != hw.levels.size()) {
    v.push_back({"levels", "dataflow has " + std::to_string(df.levels.size()) +
                               " levels, hw has " +
                               std::to_string(hw.levels.size())});
    return v;
  }
  for (std::size_t l = 0; l < df.levels.size(); ++l) {
    std::array<int, kNumDims> seen{};
    for (int i = 0; i < kNumDims; ++i)
      seen[static_cast<int>(df.levels[l].order[i])]++;
    for (int i = 0; i < kNumDims; ++i)
      if (seen[i] != 1) {
        v.push_back({"order", "level " + hw.levels[l].name +
                                  ": loop order is not a permutation"});
        break;
      }
    for (int i = 0; i < kNumDims; ++i)
      if (df.levels[l].factors[i] < 1)
        v.push_back({"factor", "level " + hw.levels[l].name + ": factor of " +
                                   dim_name(static_cast<Dim>(i)) + " is < 1"});
  }
  for (int i = 0; i < kNumDims; ++i) {
    const Dim d = static_cast<Dim>(i);
    if (df.total_factor(d) < layer_dim(layer, d))
      v.push_back({"coverage",
                   std::string("factors of ") + dim_name(d) + " cover " +
                       std::to_string(df.total_factor(d)) + " < dim " +
                       std::to_string(layer_dim(layer, d))});
  }
  if (df.spatial.row_factor < 1 || df.spatial.col_factor < 1)
    v.push_back({"spatial", "spatial factors must be >= 1"});
  if (df.spatial.row_factor > hw.array_rows ||
      df.spatial.col_factor > hw.array_cols)
    v.push_back({"spatial", "spatial mapping exceeds the " +
                                std::to_string(hw.array_rows) + "x" +
                                std::to_string(hw.array_cols) + " array"});
  if (df.spatial.row_dim == df.spatial.col_dim &&
      df.spatial.row_factor > 1 && df.spatial.col_factor > 1)
    v.push_back({"spatial", "rows and cols map the same dim"});
  if (df.intra.r < 1 || df.intra.s < 1 || df.intra.c < 1)
    v.push_back({"intra", "intra factors must be >= 1"});
  const std::int64_t cap =
      intra_unit_capacity(arch, q.weight_bits, q.act_bits);
  if (df.intra.product() > cap)
    v.push_back({"intra", "intra reduction tiling " +
                              std::to_string(df.intra.product()) +
                              " exceeds the unit capacity " +
                              std::to_string(cap)});
  return v;
}

namespace {

/// Per-dim extent of the resident tile of (level l, position q): factors at
/// positions >= q of level l, everything at inner levels, spatial and intra.
struct ExtentCalc {
  const Dataflow& df;
  // inner_ext[l][d]: product of d's factors strictly inside level l.
  std::vector<std::array<std::int64_t, kNumDims>> inner;

  explicit ExtentCalc(const Dataflow& df_) : df(df_) {
    const std::size_t L = df.levels.size();
    inner.resize(L);
    for (int i = 0; i < kNumDims; ++i) {
      const Dim d = static_cast<Dim>(i);
      std::int64_t p = df.spatial.factor(d) * df.intra.factor(d);
      for (std::size_t l = L; l-- > 0;) {
        inner[l][i] = p;
        p *= df.levels[l].factor(d);
      }
    }
  }

  std::int64_t extent(std::size_t l, int position, Dim d) const {
    std::int64_t e = inner[l][static_cast<int>(d)];
    for (int p = position; p < kNumDims; ++p)
      if (df.levels[l].order[p] == d) e *= df.levels[l].factor(d);
    return e;
  }
};

std::int64_t tile_words(const ExtentCalc& ext, std::size_t l, int position,
                        Tensor t, const LayerShape& layer) {
  auto e = [&](Dim d) { return ext.extent(l, position, d); };
  switch (t) {
    case Tensor::weights:
      return e(Dim::K) * e(Dim::C) * e(Dim::R) * e(Dim::S);
    case Tensor::outputs:
      return e(Dim::N) * e(Dim::K) * e(Dim::E) * e(Dim::F);
    case Tensor::inputs: {
      const std::int64_t h = (e(Dim::E) - 1) * layer.stride + e(Dim::R);
      const std::int64_t w = (e(Dim::F) - 1) * layer.stride + e(Dim::S);
      return e(Dim::N) * e(Dim::C) * h * w;
    }
  }
  return 0;
}

}  // namespace

std::int64_t RefreshAssignment::occupancy(std::size_t buffered_idx) const {
  std::int64_t s = 0;
  for (const auto& e : per_level[buffered_idx]) s += e.tile_words;
  return s;
}

RefreshResult derive_refresh(const Dataflow& df, const LayerShape& layer,
                             const HardwareConfig& hw) {
  ExtentCalc ext(df);
  RefreshAssignment out;
  out.per_level.resize(hw.levels.size() - 1);

  for (std::size_t l = 1; l < hw.levels.size(); ++l) {
    // Tile words per tensor and position; non-increasing in position.
    std::array<std::array<std::int64_t, kNumDims + 1>, kNumTensors> words;
    for (int t = 0; t < kNumTensors; ++t)
      for (int q = 0; q <= kNumDims; ++q)
        words[t][q] = tile_words(ext, l, q, static_cast<Tensor>(t), layer);

    const std::int64_t cap = hw.levels[l].capacity_words;
    std::int64_t best_occ = -1;
    std::array<int, kNumTensors> best_q{};
    for (int qw = 0; qw <= kNumDims; ++qw)
      for (int qi = 0; qi <= kNumDims; ++qi)
        for (int qo = 0; qo <= kNumDims; ++qo) {
          const std::int64_t occ = words[0][qw] + words[1][qi] + words[2][qo];
          if (occ <= cap && occ > best_occ) {
            best_occ = occ;
            best_q = {qw, qi, qo};
          }
          // Lexicographic preference on equal occupancy comes for free:
          // the scan visits smaller (qw,qi,qo) first and replaces only on
          // strict improvement.
        }
    if (best_occ < 0) {
      const std::int64_t needed =
          words[0][kNumDims] + words[1][kNumDims] + words[2][kNumDims];
      return RefreshInfeasible{hw.levels[l].name, needed, cap};
    }
    for (int t = 0; t < kNumTensors; ++t)
      out.per_level[l - 1][t] = {best_q[t], words[t][best_q[t]]};
  }
  return out;
}

namespace {

struct Loop {
  Dim dim;
  std::int64_t trip;
};

/// Flattened temporal loops, outermost first.
std::vector<Loop> flatten_loops(const Dataflow& df) {
  std::vector<Loop> loops;
  loops.reserve(df.levels.size() * kNumDims);
  for (const auto& lv : df.levels)
    for (int p = 0; p < kNumDims; ++p)
      loops.push_back({lv.order[p], lv.factor(lv.order[p])});
  return loops;
}

}  // namespace

TrafficTable access_counts(const Dataflow& df, const LayerShape& layer,
                           const HardwareConfig& hw,
                           const RefreshAssignment& refresh) {
  ExtentCalc ext(df);
  const std::vector<Loop> loops = flatten_loops(df);
  TrafficTable table;
  table.cells.resize(hw.levels.size() - 1);

  for (std::size_t l = 1; l < hw.levels.size(); ++l) {
    for (int t = 0; t < kNumTensors; ++t) {
      const Tensor tensor = static_cast<Tensor>(t);
      const RefreshEntry& entry = refresh.per_level[l - 1][t];
      const std::size_t cutoff = l * kNumDims + entry.position;

      // Load events = product of relevant effective trips in the prefix,
      // times each irrelevant effective trip that has a relevant effective
      // loop strictly inside it (advancing it resets that loop's tiles).
      std::int64_t first_touches = 1;
      std::int64_t loads = 1;
      bool relevant_inside = false;  // scans from innermost prefix loop out
      for (std::size_t i = cutoff; i-- > 0;) {
        if (loops[i].trip <= 1) continue;
        if (dim_relevant(tensor, loops[i].dim)) {
          first_touches *= loops[i].trip;
          loads *= loops[i].trip;
          relevant_inside = true;
        } else if (relevant_inside) {
          loads *= loops[i].trip;
        }
      }

      TrafficCell& cell = table.cells[l - 1][t];
      cell.tile_loads = loads;
      if (tensor == Tensor::outputs) {
        // Fresh tiles materialize zero-initialized; every residency ends in
        // a writeback, revisits of spilled partial tiles read them back.
        cell.first_touches = first_touches;
        cell.words_up = loads * entry.tile_words;
        cell.words_down = (loads - first_touches) * entry.tile_words;
      } else {
        cell.words_down = loads * entry.tile_words;
      }
    }
  }
  return table;
}

RefreshInfeasibleError::RefreshInfeasibleError(const RefreshInfeasible& i)
    : std::runtime_error("no feasible refresh location at level " +
                         i.level_name + ": minimal tiles need " +
                         std::to_string(i.needed_words) + " words, capacity " +
                         std::to_string(i.capacity_words)),
      info(i) {}

double CostReport::fitness(const std::string& kind) const {
  if (kind == "energy") return energy_total;
  if (kind == "latency") return total_cycles;
  if (kind == "edp") return edp();
  throw std::invalid_argument("unknown fitness '" + kind + "'");
}

CostReport evaluate(const Dataflow& df, const LayerShape& layer,
                    const HardwareConfig& hw, const MacArchitecture& arch,
                    const Precision& q, bool pack_bits) {
  {
    auto violations = validate_dataflow(df, layer, hw, arch, q);
    if (!violations.empty()) {
      std::string msg = "invalid dataflow:";
      for (const auto& v : violations) msg += " [" + v.code + "] " + v.message;
      throw std::invalid_argument(msg);
    }
  }
  RefreshResult rr = derive_refresh(df, layer, hw);
  if (std::holds_alternative<RefreshInfeasible>(rr))
    throw RefreshInfeasibleError(std::get<RefreshInfeasible>(rr));
  const RefreshAssignment& refresh = std::get<RefreshAssignment>(rr);
  const TrafficTable traffic = access_counts(df, layer, hw, refresh);

  CostReport rep;
  rep.arch = arch.name();
  rep.precision = q;
  rep.layer_name = layer.name;
  rep.dataflow_hash = df.hash(hw);
  rep.defaulted_hw_tables = hw.defaulted_mac_energy || hw.defaulted_unit_area;

  const MacIssue issue = mac_cycles(arch, q.weight_bits, q.act_bits);
  const std::int64_t temporal_iters = df.temporal_iterations();
  rep.compute_cycles =
      static_cast<double>(temporal_iters) * static_cast<double>(issue.cycles);

  rep.true_macs = layer.mac_count();
  rep.padded_macs = 1;
  for (int i = 0; i < kNumDims; ++i)
    rep.padded_macs *= df.total_factor(static_cast<Dim>(i));

  // Traffic: per boundary, both directions share the narrower port; with
  // --pack-bits the dispatcher packs operand words at their bit width
  // inside 16-bit containers.
  const double w_scale = pack_bits ? q.weight_bits / 16.0 : 1.0;
  const double a_scale = pack_bits ? q.act_bits / 16.0 : 1.0;
  double worst_transfer = 0.0;
  for (std::size_t b = 0; b + 1 < hw.levels.size(); ++b) {
    const double bw = std::min(hw.levels[b].bandwidth_words_per_cycle,
                               hw.levels[b + 1].bandwidth_words_per_cycle);
    double boundary_words = 0.0;
    for (int t = 0; t < kNumTensors; ++t) {
      const TrafficCell& cell = traffic.cells[b][t];
      const double scale = t == static_cast<int>(Tensor::weights) ? w_scale
                           : t == static_cast<int>(Tensor::inputs) ? a_scale
                                                                   : 1.0;
      const double down = scale * static_cast<double>(cell.words_down);
      const double up = scale * static_cast<double>(cell.words_up);
      boundary_words += down + up;

      CostReport::TrafficRow row;
      row.boundary = hw.levels[b].name + "<->" + hw.levels[b + 1].name;
      row.tensor = tensor_name(static_cast<Tensor>(t));
      row.words = cell.total_words();
      row.energy = down * (hw.levels[b].energy_per_word_read +
                           hw.levels[b + 1].energy_per_word_write) +
                   up * (hw.levels[b + 1].energy_per_word_read +
                         hw.levels[b].energy_per_word_write);
      rep.traffic_energy_total += row.energy;
      rep.traffic.push_back(row);
    }
    worst_transfer = std::max(worst_transfer, boundary_words / bw);
  }

  // Double buffering at every boundary: compute and transfers overlap, the
  // slowest stream paces the machine.
  rep.total_cycles = std::max(rep.compute_cycles, worst_transfer);
  rep.stall_cycles = rep.total_cycles - rep.compute_cycles;

  const double peak_per_unit = issue.macs_per_cycle();
  const double ideal_cycles =
      static_cast<double>(rep.true_macs) /
      (static_cast<double>(hw.array_rows * hw.array_cols) * peak_per_unit);
  rep.utilization = ideal_cycles / rep.total_cycles;

  rep.mac_energy_total =
      static_cast<double>(rep.padded_macs) *
      mac_energy(arch, q.weight_bits, q.act_bits, hw.mac_energy);
  rep.energy_total = rep.mac_energy_total + rep.traffic_energy_total;
  rep.area = mac_area(arch, hw.unit_area);
  return rep;
}

}  // namespace psa
