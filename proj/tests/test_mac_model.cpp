#include "psa/mac_model.hpp"

#include <cmath>

#include "doctest.h"
#include "psa/hw_config.hpp"

using namespace psa;

// Independent bit-product bookkeeping: total useful bit-products executed by
// the active units of one issue, recomputed from the slice structure rather
// than from the model's own cycle math.
namespace {

std::int64_t bit_products_from_slices(const MacArchitecture& arch, int pw,
                                      int pa) {
  switch (arch.kind) {
    case MacArchitecture::Kind::temporal:
      return static_cast<std::int64_t>(pw) * pa;
    case MacArchitecture::Kind::spatial: {
      auto round_up = [](int p) {
        for (int s : {2, 4, 8, 16})
          if (p <= s) return s;
        return 16;
      };
      return static_cast<std::int64_t>(round_up(pw)) * round_up(pa);
    }
    case MacArchitecture::Kind::spatial_temporal: {
      // Sum of slice-product work over the magnitude groups, recursing for
      // the >8-bit temporal decomposition.
      std::int64_t total = 0;
      int w = pw, a = pa;
      int passes = 1;
      if (std::max(w, a) > 8) {
        w = (w + 1) / 2;
        a = (a + 1) / 2;
        passes = 4;
      }
      auto slices = [](int p) { return split_precision(p); };
      for (int ws : slices(w))
        for (int as : slices(a)) total += ws * as;
      return total * passes;
    }
  }
  return 0;
}

}  // namespace

TEST_SUITE("mac_model") {

TEST_CASE("split_precision slices") {
  CHECK(split_precision(5) == std::vector<int>{3, 2});
  CHECK(split_precision(6) == std::vector<int>{3, 3});
  CHECK(split_precision(7) == std::vector<int>{4, 3});
  CHECK(split_precision(8) == std::vector<int>{4, 4});
  CHECK(split_precision(3) == std::vector<int>{3});
  CHECK(split_precision(1) == std::vector<int>{1});
  CHECK_THROWS(split_precision(9));
  CHECK_THROWS(split_precision(0));
}

TEST_CASE("high precision decomposition") {
  auto d12 = decompose_high_precision(12);
  CHECK(d12.sub_bits == 6);
  CHECK(d12.sub_products == 4);
  auto d16 = decompose_high_precision(16);
  CHECK(d16.sub_bits == 8);
  auto d9 = decompose_high_precision(9);
  CHECK(d9.sub_bits == 5);
  CHECK_THROWS(decompose_high_precision(8));
  CHECK_THROWS(decompose_high_precision(17));
}

TEST_CASE("cycle anchors at 8x8") {
  auto t = MacArchitecture::temporal(16);
  auto s = MacArchitecture::spatial();
  auto st = MacArchitecture::spatial_temporal(4);
  CHECK(mac_cycles(t, 8, 8).cycles == 8);
  CHECK(mac_cycles(s, 8, 8).cycles == 1);
  CHECK(mac_cycles(st, 8, 8).cycles == 4);
  CHECK(mac_cycles(st, 8, 8).macs_completed == 4);  // n partial sums
}

TEST_CASE("spatial-temporal odd and asymmetric precisions") {
  auto st = MacArchitecture::spatial_temporal(4);
  CHECK(mac_cycles(st, 6, 6).cycles == 3);
  CHECK(mac_cycles(st, 6, 6).macs_completed == 4);
  CHECK(mac_cycles(st, 4, 2).cycles == 2);
  CHECK(mac_cycles(st, 4, 2).macs_completed == 16);  // 4n independent units
  CHECK(mac_cycles(st, 12, 12).cycles == 12);        // four 6x6 sub-issues
  CHECK(mac_cycles(st, 12, 12).macs_completed == 4);
  CHECK(mac_cycles(st, 16, 16).cycles == 16);
  CHECK(mac_cycles(st, 5, 5).cycles == 3);  // (3+2)x(3+2)
  CHECK(mac_cycles(st, 7, 7).cycles == 4);  // (4+3)x(4+3)
}

TEST_CASE("spatial rounds unsupported precisions up") {
  auto s = MacArchitecture::spatial();
  auto i55 = mac_cycles(s, 5, 5);
  auto i88 = mac_cycles(s, 8, 8);
  CHECK(i55.cycles == i88.cycles);
  CHECK(i55.macs_completed == i88.macs_completed);
  CHECK(i55.exec_weight_bits == 8);
  CHECK(i55.active_units_fraction < 1.0);
  CHECK(i88.active_units_fraction == 1.0);

  auto i22 = mac_cycles(s, 2, 2);
  CHECK(i22.macs_completed == 16);  // all bricks independent
  auto i1616 = mac_cycles(s, 16, 16);
  CHECK(i1616.cycles == 4);
  CHECK(i1616.macs_completed == 1);
}

TEST_CASE("temporal is activation-serial and bounded by max_bits") {
  auto t = MacArchitecture::temporal(16);
  CHECK(mac_cycles(t, 16, 3).cycles == 3);
  CHECK(mac_cycles(t, 3, 16).cycles == 16);
  CHECK(mac_cycles(t, 1, 1).cycles == 1);
  auto t8 = MacArchitecture::temporal(8);
  CHECK_THROWS(mac_cycles(t8, 9, 4));
}

TEST_CASE("throughput shape properties") {
  auto st = MacArchitecture::spatial_temporal(4);
  auto t = MacArchitecture::temporal(16);
  auto s = MacArchitecture::spatial();

  // Spatial-temporal MACs/cycle never increases with symmetric precision.
  double prev = mac_cycles(st, 1, 1).macs_per_cycle();
  for (int p = 2; p <= 16; ++p) {
    double cur = mac_cycles(st, p, p).macs_per_cycle();
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }

  // Spatial throughput steps: constant on (4,8] and on (8,16].
  for (int p = 5; p <= 8; ++p)
    CHECK(mac_cycles(s, p, p).macs_per_cycle() ==
          mac_cycles(s, 8, 8).macs_per_cycle());
  for (int p = 9; p <= 16; ++p)
    CHECK(mac_cycles(s, p, p).macs_per_cycle() ==
          mac_cycles(s, 16, 16).macs_per_cycle());

  // Per MAC unit the spatial-temporal design strictly beats temporal at
  // every symmetric precision <= 8, and its cycles are the temporal cycles
  // divided (ceiling) by the number of serialized slices.
  for (int p = 1; p <= 8; ++p) {
    auto ist = mac_cycles(st, p, p);
    auto it = mac_cycles(t, p, p);
    CHECK(ist.macs_per_cycle() > it.macs_per_cycle());
    const std::int64_t slices = split_precision(p).size();
    CHECK(ist.cycles == (it.cycles + slices - 1) / slices);
  }
}

TEST_CASE("work conservation against slice bookkeeping") {
  for (auto arch : {MacArchitecture::temporal(16), MacArchitecture::spatial(),
                    MacArchitecture::spatial_temporal(1),
                    MacArchitecture::spatial_temporal(4),
                    MacArchitecture::spatial_temporal(8)}) {
    for (int pw = 1; pw <= 16; ++pw) {
      for (int pa = 1; pa <= 16; ++pa) {
        auto issue = mac_cycles(arch, pw, pa);
        // Executed bit-products per MAC equal the slice-level bookkeeping.
        const std::int64_t per_mac =
            static_cast<std::int64_t>(issue.exec_weight_bits) *
            issue.exec_act_bits;
        CHECK(per_mac == bit_products_from_slices(arch, pw, pa));
        CHECK(issue.cycles >= 1);
        CHECK(issue.macs_completed >= 1);
        CHECK(issue.active_units_fraction > 0.0);
        CHECK(issue.active_units_fraction <= 1.0);
      }
    }
  }
}

TEST_CASE("shifter census identities") {
  for (std::int64_t n : {1, 2, 4, 8}) {
    auto st = MacArchitecture::spatial_temporal(n);
    auto naive = shifter_counts(st, ShiftOrganization::naive_per_partial_sum);
    auto reorg = shifter_counts(st, ShiftOrganization::reorganized);
    auto fused = shifter_counts(st, ShiftOrganization::reorganized_fused);
    CHECK(naive.cross_unit_shifters == 4 * n);
    CHECK(reorg.cross_unit_shifters == 4);
    CHECK(reorg.cross_unit_shifters * n == naive.cross_unit_shifters);
    CHECK(fused.within_unit_shifters == 0);
    CHECK(fused.group_shift_adds == 4);
    CHECK(naive.within_unit_shifters == 4 * n);
    CHECK(reorg.within_unit_shifters == 4 * n);
  }
  auto t = shifter_counts(MacArchitecture::temporal(16),
                          ShiftOrganization::reorganized);
  CHECK(t.within_unit_shifters == 1);
  CHECK(t.cross_unit_shifters == 0);
  auto s = shifter_counts(MacArchitecture::spatial(),
                          ShiftOrganization::reorganized);
  CHECK(s.cross_unit_shifters == 16);
}

TEST_CASE("area model") {
  UnitAreaTable table;  // shipped defaults

  auto st = MacArchitecture::spatial_temporal(4);
  auto t = MacArchitecture::temporal(16);
  auto s = MacArchitecture::spatial();

  auto a_st = mac_area(st, table, ShiftOrganization::reorganized_fused);
  auto a_t = mac_area(t, table);
  auto a_s = mac_area(s, table);

  // Fusing the shift-add logic pushes its area share below both baselines.
  CHECK(a_st.shift_add_fraction() < a_t.shift_add_fraction());
  CHECK(a_st.shift_add_fraction() < a_s.shift_add_fraction());

  // Homogeneity: scaling every unit area scales totals, not fractions.
  UnitAreaTable scaled = table;
  scaled.multiplier_bit *= 3.0;
  scaled.shifter_bit *= 3.0;
  scaled.adder_bit *= 3.0;
  scaled.register_bit *= 3.0;
  auto a_scaled = mac_area(st, scaled, ShiftOrganization::reorganized_fused);
  CHECK(a_scaled.total() == doctest::Approx(3.0 * a_st.total()));
  CHECK(a_scaled.shift_add_fraction() ==
        doctest::Approx(a_st.shift_add_fraction()));

  // n=1: reorganization is a no-op, census and area identical.
  auto st1 = MacArchitecture::spatial_temporal(1);
  auto naive1 = mac_area(st1, table, ShiftOrganization::naive_per_partial_sum);
  auto reorg1 = mac_area(st1, table, ShiftOrganization::reorganized);
  CHECK(naive1.multipliers == reorg1.multipliers);
  CHECK(naive1.shift_add == doctest::Approx(reorg1.shift_add));
  CHECK(naive1.accumulators == doctest::Approx(reorg1.accumulators));
  CHECK(naive1.total() == doctest::Approx(reorg1.total()));
}

TEST_CASE("mac energy monotone in each operand width") {
  auto table = HardwareConfig::defaults().mac_energy;
  for (auto arch : {MacArchitecture::temporal(16), MacArchitecture::spatial(),
                    MacArchitecture::spatial_temporal(4)}) {
    for (int pw = 1; pw <= 16; ++pw)
      for (int pa = 1; pa <= 16; ++pa) {
        const double e = mac_energy(arch, pw, pa, table);
        if (pw > 1)
          CHECK(e >= mac_energy(arch, pw - 1, pa, table) - 1e-12);
        if (pa > 1)
          CHECK(e >= mac_energy(arch, pw, pa - 1, table) - 1e-12);
      }
    // (1,1) is the floor.
    const double floor = mac_energy(arch, 1, 1, table);
    CHECK(floor <= mac_energy(arch, 8, 8, table));
  }

  // Rounded execution: spatial 5x5 pays the full 8x8 energy.
  auto s = MacArchitecture::spatial();
  CHECK(mac_energy(s, 5, 5, table) == mac_energy(s, 8, 8, table));

  // Linearity in the base cost.
  auto scaled = table;
  for (auto& [k, e] : scaled) e.base *= 2.0;
  CHECK(mac_energy(s, 6, 6, scaled) ==
        doctest::Approx(2.0 * mac_energy(s, 6, 6, table)));
}

}  // TEST_SUITE
