#include <unordered_set>

#include "psa/dataflow.hpp"

namespace psa {

namespace {

struct OracleLoop {
  Dim dim;
  std::int64_t trip;
};

/// Resident-tile extent of dim d for (level l, refresh position), computed
/// directly from the nest structure.
std::int64_t oracle_extent(const Dataflow& df, std::size_t l, int position,
                           Dim d) {
  std::int64_t e = 1;
  for (int p = position; p < kNumDims; ++p)
    if (df.levels[l].order[p] == d) e *= df.levels[l].factor(d);
  for (std::size_t l2 = l + 1; l2 < df.levels.size(); ++l2)
    e *= df.levels[l2].factor(d);
  if (df.spatial.row_dim == d) e *= df.spatial.row_factor;
  if (df.spatial.col_dim == d) e *= df.spatial.col_factor;
  e *= df.intra.factor(d);
  return e;
}

std::int64_t oracle_tile_words(const Dataflow& df, std::size_t l, int position,
                               Tensor t, const LayerShape& layer) {
  auto e = [&](Dim d) { return oracle_extent(df, l, position, d); };
  switch (t) {
    case Tensor::weights:
      return e(Dim::K) * e(Dim::C) * e(Dim::R) * e(Dim::S);
    case Tensor::outputs:
      return e(Dim::N) * e(Dim::K) * e(Dim::E) * e(Dim::F);
    case Tensor::inputs:
      return e(Dim::N) * e(Dim::C) *
             ((e(Dim::E) - 1) * layer.stride + e(Dim::R)) *
             ((e(Dim::F) - 1) * layer.stride + e(Dim::S));
  }
  return 0;
}

/// One (level, tensor) buffer slot in the walk.
struct Slot {
  std::vector<std::size_t> key_positions;  // relevant loops outer to refresh
  std::vector<std::int64_t> key_strides;   // mixed-radix encoding
  std::int64_t current_key = -1;           // -1 = empty buffer
  std::int64_t loads = 0;
  std::int64_t reads_down = 0;   // outputs: reload of a spilled partial tile
  std::int64_t writes_up = 0;    // outputs: evictions (always dirty)
  std::int64_t first_touches = 0;
  std::int64_t tile_words = 0;
  std::unordered_set<std::int64_t> seen;
};

}  // namespace

TrafficTable oracle_access_counts(const Dataflow& df, const LayerShape& layer,
                                  const HardwareConfig& hw,
                                  const RefreshAssignment& refresh,
                                  std::int64_t max_iterations) {
  // Flatten the temporal nest, outermost first.
  std::vector<OracleLoop> loops;
  for (const auto& lv : df.levels)
    for (int p = 0; p < kNumDims; ++p)
      loops.push_back({lv.order[p], lv.factor(lv.order[p])});

  std::int64_t total = 1;
  for (const auto& lp : loops) {
    total *= lp.trip;
    if (total > max_iterations)
      throw std::runtime_error(
          "oracle_access_counts: temporal iteration count exceeds the guard (" +
          std::to_string(max_iterations) + ")");
  }

  const std::size_t L = hw.levels.size();
  std::vector<std::array<Slot, kNumTensors>> slots(L - 1);
  for (std::size_t l = 1; l < L; ++l) {
    for (int t = 0; t < kNumTensors; ++t) {
      Slot& slot = slots[l - 1][t];
      const int position = refresh.per_level[l - 1][t].position;
      const std::size_t cutoff = l * kNumDims + position;
      for (std::size_t i = 0; i < cutoff; ++i)
        if (loops[i].trip > 1 &&
            dim_relevant(static_cast<Tensor>(t), loops[i].dim))
          slot.key_positions.push_back(i);
      slot.key_strides.resize(slot.key_positions.size());
      std::int64_t stride = 1;
      for (std::size_t k = slot.key_positions.size(); k-- > 0;) {
        slot.key_strides[k] = stride;
        stride *= loops[slot.key_positions[k]].trip;
      }
      slot.tile_words = oracle_tile_words(
          df, l, position, static_cast<Tensor>(t), layer);
    }
  }

  // Walk every iteration of the temporal nest as a mixed-radix counter.
  std::vector<std::int64_t> idx(loops.size(), 0);
  for (std::int64_t step = 0; step < total; ++step) {
    for (std::size_t li = 1; li < L; ++li) {
      for (int t = 0; t < kNumTensors; ++t) {
        Slot& slot = slots[li - 1][t];
        std::int64_t key = 0;
        for (std::size_t k = 0; k < slot.key_positions.size(); ++k)
          key += idx[slot.key_positions[k]] * slot.key_strides[k];
        if (key == slot.current_key) continue;
        // Evict whatever is resident, then load the new tile.
        if (t == static_cast<int>(Tensor::outputs)) {
          if (slot.current_key >= 0) ++slot.writes_up;
          if (slot.seen.count(key)) {
            ++slot.reads_down;  // spilled partial comes back
          } else {
            ++slot.first_touches;  // fresh accumulator tile, zero-filled
            slot.seen.insert(key);
          }
        }
        ++slot.loads;
        slot.current_key = key;
      }
    }
    // Advance the counter (skip after the last step).
    for (std::size_t i = loops.size(); i-- > 0;) {
      if (++idx[i] < loops[i].trip) break;
      idx[i] = 0;
    }
  }
  // Final flush of resident output tiles.
  for (std::size_t li = 1; li < L; ++li) {
    Slot& slot = slots[li - 1][static_cast<int>(Tensor::outputs)];
    if (slot.current_key >= 0) ++slot.writes_up;
  }

  TrafficTable table;
  table.cells.resize(L - 1);
  for (std::size_t li = 1; li < L; ++li) {
    for (int t = 0; t < kNumTensors; ++t) {
      Slot& slot = slots[li - 1][t];
      TrafficCell& cell = table.cells[li - 1][t];
      cell.tile_loads = slot.loads;
      if (t == static_cast<int>(Tensor::outputs)) {
        cell.first_touches = slot.first_touches;
        cell.words_up = slot.writes_up * slot.tile_words;
        cell.words_down = slot.reads_down * slot.tile_words;
      } else {
        cell.words_down = slot.loads * slot.tile_words;
      }
    }
  }
  return table;
}

}  // namespace psa
