#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psa/hw_config.hpp"
#include "psa/workload.hpp"

namespace psa {

/// The three modeled MAC-unit families.
///
/// Temporal:        one bit-serial unit, activation-serial, sized for
///                  max_bits (Stripes-style).
/// Spatial:         one fusion unit of 16 composable 2x2 bricks supporting
///                  {2,4,8,16}-bit operands (Bit-Fusion-style).
/// SpatialTemporal: 4 magnitude groups of n bit-serial units (up to 4x4
///                  each), composing up to 8x8 spatially and >8 bit
///                  temporally.
struct MacArchitecture {
  enum class Kind { temporal, spatial, spatial_temporal };
  Kind kind = Kind::spatial_temporal;

  int max_bits = 16;       // temporal: widest supported operand
  int brick_bits = 2;      // spatial: brick operand width
  int bricks_per_unit = 16;
  int unit_max_bits = 4;   // spatial_temporal: bit-serial unit width
  int groups = 4;          // spatial_temporal: magnitude groups (HH,HL,LH,LL)
  std::int64_t n = 4;      // spatial_temporal: partial sums per MAC unit

  static MacArchitecture temporal(int max_bits = 16);
  static MacArchitecture spatial();
  static MacArchitecture spatial_temporal(std::int64_t n = 4);
  static MacArchitecture parse(const std::string& name, std::int64_t n = 4,
                               int max_bits = 16);

  std::string name() const;
  void validate() const;
};

/// Result of issuing one MAC-unit pass at a given precision.
struct MacIssue {
  std::int64_t cycles = 1;
  std::int64_t macs_completed = 1;          // per MAC unit per issue
  double active_units_fraction = 1.0;       // <1 flags wasted hardware
  int exec_weight_bits = 0;                 // executed (possibly padded)
  int exec_act_bits = 0;

  double macs_per_cycle() const {
    return static_cast<double>(macs_completed) / static_cast<double>(cycles);
  }
};

/// Shifter/accumulator census for one MAC unit.
struct ShifterCensus {
  std::int64_t cross_unit_shifters = 0;
  std::int64_t within_unit_shifters = 0;
  std::int64_t group_shift_adds = 0;
  std::int64_t accumulators = 0;
};

enum class ShiftOrganization { naive_per_partial_sum, reorganized, reorganized_fused };

/// Absolute and fractional area breakdown of one MAC unit.
struct MacAreaBreakdown {
  double multipliers = 0.0;
  double shift_add = 0.0;
  double accumulators = 0.0;
  double other = 0.0;
  double total() const { return multipliers + shift_add + accumulators + other; }
  double shift_add_fraction() const { return shift_add / total(); }
};

/// Split an operand of p<=8 bits into bit-serial-unit slices:
/// p<=4 -> {p}; p in 5..8 -> {ceil(p/2), floor(p/2)}.
std::vector<int> split_precision(int p);

/// Decompose p in 9..16 into the four sequentially executed sub-products of
/// ceil(p/2) x ceil(p/2) obtained by halving both operands.
struct HighPrecisionDecomposition {
  int sub_bits = 0;          // ceil(p/2)
  int sub_products = 4;      // hi*hi, hi*lo, lo*hi, lo*lo
};
HighPrecisionDecomposition decompose_high_precision(int p);

/// Cycle/throughput model for one MAC unit at (weight_bits, act_bits).
MacIssue mac_cycles(const MacArchitecture& arch, int weight_bits, int act_bits);

/// Shifter census per MAC unit.  Organization variants only apply to the
/// spatial-temporal design; the other two return their fixed censuses.
ShifterCensus shifter_counts(const MacArchitecture& arch,
                             ShiftOrganization organization);

/// Area of one MAC unit from component counts and per-bit unit areas.
MacAreaBreakdown mac_area(const MacArchitecture& arch,
                          const UnitAreaTable& table,
                          ShiftOrganization organization =
                              ShiftOrganization::reorganized_fused);

/// Energy per completed MAC: base unit-cycle cost x active cycles x active
/// units / MACs completed.  Non-decreasing in each operand width.
double mac_energy(const MacArchitecture& arch, int weight_bits, int act_bits,
                  const std::map<std::string, MacEnergyEntry>& table);

/// MACs a single MAC unit can complete per issue; the intra-unit reduction
/// tiling of a dataflow must fit inside this.
std::int64_t intra_unit_capacity(const MacArchitecture& arch, int weight_bits,
                                 int act_bits);

}  // namespace psa
