#include "psa/mac_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace psa {

namespace {

int ceil_log2(std::int64_t v) {
  int s = 0;
  std::int64_t p = 1;
  while (p < v) {
    p <<= 1;
    ++s;
  }
  return s;
}

void check_bits(int pw, int pa) {
  if (pw < 1 || pw > 16 || pa < 1 || pa > 16)
    throw std::invalid_argument("operand bits must be in [1,16]");
}

/// Round up to the nearest Bit-Fusion-supported width {2,4,8,16}.
int round_up_supported(int p) {
  for (int s : {2, 4, 8, 16})
    if (p <= s) return s;
  return 16;
}

}  // namespace

MacArchitecture MacArchitecture::temporal(int max_bits) {
  MacArchitecture a;
  a.kind = Kind::temporal;
  a.max_bits = max_bits;
  a.validate();
  return a;
}

MacArchitecture MacArchitecture::spatial() {
  MacArchitecture a;
  a.kind = Kind::spatial;
  a.validate();
  return a;
}

MacArchitecture MacArchitecture::spatial_temporal(std::int64_t n) {
  MacArchitecture a;
  a.kind = Kind::spatial_temporal;
  a.n = n;
  a.validate();
  return a;
}

MacArchitecture MacArchitecture::parse(const std::string& name, std::int64_t n,
                                       int max_bits) {
  if (name == "temporal") return temporal(max_bits);
  if (name == "spatial") return spatial();
  if (name == "spatial-temporal" || name == "spatial_temporal")
    return spatial_temporal(n);
  throw std::invalid_argument("unknown MAC architecture '" + name + "'");
}

std::string MacArchitecture::name() const {
  switch (kind) {
    case Kind::temporal:
      return "temporal";
    case Kind::spatial:
      return "spatial";
    case Kind::spatial_temporal:
      return "spatial_temporal";
  }
  return "?";
}

void MacArchitecture::validate() const {
  if (kind == Kind::temporal && (max_bits < 1 || max_bits > 64))
    throw std::invalid_argument("temporal max_bits out of range");
  if (kind == Kind::spatial_temporal) {
    if (groups != 4)
      throw std::invalid_argument(
          "spatial_temporal requires exactly 4 magnitude groups");
    if (n < 1) throw std::invalid_argument("n_partial_sums must be >=1");
  }
}

std::vector<int> split_precision(int p) {
  if (p < 1 || p > 8)
    throw std::invalid_argument("split_precision expects p in [1,8]");
  if (p <= 4) return {p};
  return {(p + 1) / 2, p / 2};  // 5->(3,2) 6->(3,3) 7->(4,3) 8->(4,4)
}

HighPrecisionDecomposition decompose_high_precision(int p) {
  if (p < 9 || p > 16)
    throw std::invalid_argument("decompose_high_precision expects p in [9,16]");
  return {(p + 1) / 2, 4};
}

MacIssue mac_cycles(const MacArchitecture& arch, int pw, int pa) {
  check_bits(pw, pa);
  MacIssue issue;
  switch (arch.kind) {
    case MacArchitecture::Kind::temporal: {
      if (std::max(pw, pa) > arch.max_bits)
        throw std::invalid_argument("precision exceeds temporal max_bits");
      // Activation-serial: one activation bit per cycle against the full
      // parallel weight.
      issue.cycles = pa;
      issue.macs_completed = 1;
      issue.active_units_fraction = 1.0;
      issue.exec_weight_bits = pw;
      issue.exec_act_bits = pa;
      return issue;
    }
    case MacArchitecture::Kind::spatial: {
      const int ew = round_up_supported(pw);
      const int ea = round_up_supported(pa);
      const std::int64_t bricks_per_mac =
          static_cast<std::int64_t>(ew / arch.brick_bits) *
          (ea / arch.brick_bits);
      // >8-bit runs as four sequential passes of the whole fusion unit.
      issue.cycles = (std::max(ew, ea) > 8) ? 4 : 1;
      issue.macs_completed = arch.bricks_per_unit * issue.cycles / bricks_per_mac;
      issue.active_units_fraction =
          static_cast<double>(pw * pa) / static_cast<double>(ew * ea);
      issue.exec_weight_bits = ew;
      issue.exec_act_bits = ea;
      return issue;
    }
    case MacArchitecture::Kind::spatial_temporal: {
      const std::int64_t units = arch.groups * arch.n;
      const int mx = std::max(pw, pa);
      if (mx <= arch.unit_max_bits) {
        // Every bit-serial unit computes an independent partial sum; the
        // narrower operand is the serial one.
        issue.cycles = std::min(pw, pa);
        issue.macs_completed = units;
        issue.active_units_fraction = 1.0;
        issue.exec_weight_bits = pw;
        issue.exec_act_bits = pa;
      } else if (mx <= 2 * arch.unit_max_bits) {
        // Operands above the unit width split into (hi,lo) slices mapped
        // to the magnitude groups; the issue is paced by the widest
        // serialized slice.  With one operand at <=4 bit only the two
        // matching magnitude groups have work.
        issue.cycles = (mx + 1) / 2;
        issue.macs_completed = arch.n;
        issue.active_units_fraction =
            (std::min(pw, pa) > arch.unit_max_bits) ? 1.0 : 0.5;
        issue.exec_weight_bits = pw;
        issue.exec_act_bits = pa;
      } else {
        // >8 bit: halve both operands and run the four magnitude
        // sub-products sequentially through the whole MAC unit.
        const int sw = (pw + 1) / 2;
        const int sa = (pa + 1) / 2;
        const int sub_cycles = (std::max(sw, sa) + 1) / 2;
        issue.cycles = 4 * sub_cycles;
        issue.macs_completed = arch.n;
        issue.active_units_fraction =
            (std::min(sw, sa) > arch.unit_max_bits) ? 1.0 : 0.5;
        issue.exec_weight_bits = 2 * sw;
        issue.exec_act_bits = 2 * sa;
      }
      // Fold bit-padding waste (odd widths executed as even) into the flag.
      issue.active_units_fraction *=
          static_cast<double>(pw * pa) /
          static_cast<double>(issue.exec_weight_bits * issue.exec_act_bits);
      return issue;
    }
  }
  throw std::logic_error("unreachable");
}

ShifterCensus shifter_counts(const MacArchitecture& arch,
                             ShiftOrganization organization) {
  ShifterCensus c;
  switch (arch.kind) {
    case MacArchitecture::Kind::temporal:
      c.within_unit_shifters = 1;
      c.accumulators = 1;
      return c;
    case MacArchitecture::Kind::spatial:
      c.cross_unit_shifters = arch.bricks_per_unit;
      c.accumulators = 1;
      return c;
    case MacArchitecture::Kind::spatial_temporal: {
      const std::int64_t units = arch.groups * arch.n;
      switch (organization) {
        case ShiftOrganization::naive_per_partial_sum:
          c.cross_unit_shifters = units;   // 4n
          c.within_unit_shifters = units;  // 4n
          c.accumulators = arch.n;
          return c;
        case ShiftOrganization::reorganized:
          c.cross_unit_shifters = arch.groups;  // 4, one per magnitude group
          c.within_unit_shifters = units;
          c.accumulators = 1;
          return c;
        case ShiftOrganization::reorganized_fused:
          c.cross_unit_shifters = arch.groups;
          c.within_unit_shifters = 0;
          c.group_shift_adds = arch.groups;
          c.accumulators = 1;
          return c;
      }
    }
  }
  throw std::logic_error("unreachable");
}

MacAreaBreakdown mac_area(const MacArchitecture& arch,
                          const UnitAreaTable& t,
                          ShiftOrganization organization) {
  // Width model: a barrel shifter of width W with K distinct shift settings
  // costs W*ceil(log2(K)) shifter-bits; adders/registers cost their width.
  MacAreaBreakdown a;
  const ShifterCensus census = shifter_counts(arch, organization);

  switch (arch.kind) {
    case MacArchitecture::Kind::temporal: {
      const int M = arch.max_bits;
      const double prod_w = 2.0 * M;
      const double shifter = prod_w * ceil_log2(M);
      a.multipliers = M * t.multiplier_bit;  // AND row
      a.shift_add = census.within_unit_shifters *
                    (shifter * t.shifter_bit + prod_w * t.adder_bit);
      a.accumulators = (prod_w + 8) * (t.adder_bit + t.register_bit);
      a.other = M * t.register_bit;  // operand register
      return a;
    }
    case MacArchitecture::Kind::spatial: {
      const int bricks = arch.bricks_per_unit;
      const int b = arch.brick_bits;
      const double compose_w = 16.0;  // width of the composed 8x8 product
      const double shifter = compose_w * 3;  // shift settings {0,2,..,14}
      a.multipliers = bricks * b * b * t.multiplier_bit;
      a.shift_add = census.cross_unit_shifters *
                    (shifter * t.shifter_bit + compose_w * t.adder_bit);
      a.accumulators = (2 * 16 + 8) * (t.adder_bit + t.register_bit);
      a.other = bricks * (2.0 * b) * t.register_bit;  // operand registers
      return a;
    }
    case MacArchitecture::Kind::spatial_temporal: {
      const int m = arch.unit_max_bits;          // 4
      const std::int64_t units = arch.groups * arch.n;
      const double unit_prod_w = 2.0 * m;        // 8
      const double group_w = unit_prod_w + ceil_log2(arch.n);
      const bool fused = organization == ShiftOrganization::reorganized_fused;

      a.multipliers = units * m * t.multiplier_bit;

      // Within-unit shift-add (absent once fused into the group).
      a.shift_add = census.within_unit_shifters *
                    (unit_prod_w * ceil_log2(m) * t.shifter_bit +
                     unit_prod_w * t.adder_bit);
      // Cross-unit composition: naive shifts every unit output; the
      // reorganized forms shift one summed output per group.
      const double cross_w =
          organization == ShiftOrganization::naive_per_partial_sum ? unit_prod_w
                                                                   : group_w;
      a.shift_add += census.cross_unit_shifters *
                     (cross_w * 3 * t.shifter_bit + cross_w * t.adder_bit);
      // Fused group shift-add, serial over the activation slices.
      a.shift_add += census.group_shift_adds *
                     (group_w * ceil_log2(m) * t.shifter_bit +
                      group_w * t.adder_bit);

      const double acc_w = 4.0 * m + ceil_log2(arch.n) + 4;
      a.accumulators = census.accumulators * acc_w * (t.adder_bit + t.register_bit);
      if (organization != ShiftOrganization::naive_per_partial_sum) {
        // Per-group reduction tree: same-magnitude unit outputs sum with no
        // shifting at all.
        a.accumulators +=
            arch.groups * (arch.n - 1) * unit_prod_w * t.adder_bit;
      }

      a.other = units * (m + 1) * t.register_bit;  // operand registers
      if (!fused)
        a.other += units * unit_prod_w * t.register_bit;  // unit product regs
      return a;
    }
  }
  throw std::logic_error("unreachable");
}

double mac_energy(const MacArchitecture& arch, int pw, int pa,
                  const std::map<std::string, MacEnergyEntry>& table) {
  const MacIssue issue = mac_cycles(arch, pw, pa);
  auto it = table.find(arch.name());
  if (it == table.end())
    throw std::invalid_argument("no mac_energy entry for arch '" +
                                arch.name() + "'");
  const MacEnergyEntry& e = it->second;

  const int emax = std::max(issue.exec_weight_bits, issue.exec_act_bits);
  double cls = e.gt8;
  if (emax <= 4)
    cls = e.le4;
  else if (emax <= 8)
    cls = e.le8;

  // Count of units switching during the issue; idle magnitude groups are
  // gated off.
  double active_units = 1.0;
  switch (arch.kind) {
    case MacArchitecture::Kind::temporal:
      active_units = 1.0;
      break;
    case MacArchitecture::Kind::spatial:
      active_units = arch.bricks_per_unit;
      break;
    case MacArchitecture::Kind::spatial_temporal: {
      int ew = issue.exec_weight_bits;
      int ea = issue.exec_act_bits;
      if (std::max(ew, ea) > 2 * arch.unit_max_bits) {
        ew /= 2;  // >8-bit issues run as sub-products of the halves
        ea /= 2;
      }
      active_units = static_cast<double>(arch.groups * arch.n);
      if (std::max(ew, ea) > arch.unit_max_bits &&
          std::min(ew, ea) <= arch.unit_max_bits)
        active_units /= 2.0;  // only two magnitude groups have work
      break;
    }
  }

  return e.base * cls * static_cast<double>(issue.cycles) * active_units /
         static_cast<double>(issue.macs_completed);
}

std::int64_t intra_unit_capacity(const MacArchitecture& arch, int pw, int pa) {
  return mac_cycles(arch, pw, pa).macs_completed;
}

}  // namespace psa
