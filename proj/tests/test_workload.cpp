#include "psa/workload.hpp"

#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "psa/hw_config.hpp"
#include "psa/rng.hpp"

using namespace psa;

TEST_SUITE("workload") {

TEST_CASE("conv layer mac count") {
  const char* doc = R"({
    "name": "one-conv",
    "layers": [
      {"kind":"conv","N":1,"K":64,"C":3,"R":3,"S":3,"E":32,"F":32,"stride":1}
    ]
  })";
  Network net = parse_workload_text(doc);
  REQUIRE(net.layers.size() == 1);
  CHECK(net.layers[0].mac_count() == 1769472);  // 64*3*3*3*32*32
}

TEST_CASE("fc layer degenerates") {
  Network net = parse_workload_text(
      R"({"name":"fc","layers":[{"kind":"fc","K":10,"C":256}]})");
  const auto& l = net.layers[0];
  CHECK(l.K == 10);
  CHECK(l.C == 256);
  CHECK(l.R == 1);
  CHECK(l.S == 1);
  CHECK(l.E == 1);
  CHECK(l.F == 1);
  CHECK(l.N == 1);
}

TEST_CASE("zero dimension rejected") {
  CHECK_THROWS_WITH_AS(
      parse_workload_text(
          R"({"name":"bad","layers":[{"kind":"fc","K":0,"C":4}]})"),
      doctest::Contains("must be >=1"), std::runtime_error);
}

TEST_CASE("workload round trip") {
  const char* doc = R"({
    "name": "mix",
    "layers": [
      {"kind":"conv","N":2,"K":8,"C":4,"R":3,"S":3,"E":6,"F":6,"stride":2},
      {"kind":"fc","K":10,"C":288}
    ]
  })";
  Network a = parse_workload_text(doc);
  Network b = parse_workload_text(serialize_workload(a));
  CHECK(serialize_workload(a) == serialize_workload(b));
  CHECK(b.layers[0].stride == 2);
}

TEST_CASE("mac count equals explicit loop nest on random small layers") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    LayerShape l;
    l.N = rng.uniform_int(1, 6);
    l.K = rng.uniform_int(1, 6);
    l.C = rng.uniform_int(1, 6);
    l.R = rng.uniform_int(1, 6);
    l.S = rng.uniform_int(1, 6);
    l.E = rng.uniform_int(1, 6);
    l.F = rng.uniform_int(1, 6);
    std::int64_t count = 0;
    for (std::int64_t n = 0; n < l.N; ++n)
      for (std::int64_t k = 0; k < l.K; ++k)
        for (std::int64_t c = 0; c < l.C; ++c)
          for (std::int64_t r = 0; r < l.R; ++r)
            for (std::int64_t s = 0; s < l.S; ++s)
              for (std::int64_t e = 0; e < l.E; ++e)
                for (std::int64_t f = 0; f < l.F; ++f) ++count;
    CHECK(count == l.mac_count());
  }
}

TEST_CASE("precision parsing and validation") {
  CHECK(Precision::parse("w4a8") == Precision(4, 8));
  CHECK(Precision::parse("6") == Precision::sym(6));
  CHECK_THROWS(Precision(0, 4));
  CHECK_THROWS(Precision(4, 17));
  CHECK(Precision(4, 8).str() == "w4a8");
}

TEST_CASE("precision set rejects duplicates and empties") {
  CHECK_THROWS(PrecisionSet(std::vector<Precision>{}));
  CHECK_THROWS(
      PrecisionSet(std::vector<Precision>{Precision::sym(4), Precision::sym(4)}));
  auto set = PrecisionSet::parse("4,6,8,16");
  CHECK(set.size() == 4);
  CHECK(set.contains(Precision::sym(6)));
  CHECK(!set.contains(Precision(6, 8)));
}

TEST_CASE("seeded rng reproducibility") {
  Rng a(0), b(0), c(1);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    auto xa = a.next_u64();
    auto xb = b.next_u64();
    if (xa != xb) all_equal = false;
    if (xa != c.next_u64()) any_diff = true;
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform draw over a precision set is uniform") {
  auto set = PrecisionSet::parse("2,4,6,8,16");
  Rng rng(42);
  std::vector<int> counts(set.size(), 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const Precision& p = set.sample(rng);
    for (std::size_t j = 0; j < set.size(); ++j)
      if (set[j] == p) ++counts[j];
  }
  for (int c : counts) {
    double freq = static_cast<double>(c) / draws;
    CHECK(std::abs(freq - 0.2) < 5e-3);
  }
}

TEST_CASE("hw config defaults and validation") {
  HardwareConfig hw = parse_hw_config_text(R"({
    "array": {"rows": 8, "cols": 8, "n_partial_sums": 2},
    "levels": [
      {"name":"DRAM","capacity_words":1000000,"bandwidth":2,"e_read":100,"e_write":100},
      {"name":"GlobalBuffer","capacity_words":4096,"bandwidth":8,"e_read":4,"e_write":4},
      {"name":"RF","capacity_words":64,"bandwidth":32,"e_read":1,"e_write":1}
    ]
  })");
  CHECK(hw.levels.size() == 3);
  CHECK(hw.levels.front().name == "DRAM");
  CHECK(hw.levels.back().name == "RF");
  CHECK(hw.defaulted_mac_energy);  // table omitted -> defaults flagged
  CHECK(hw.defaulted_unit_area);
  CHECK(hw.energy_entry("temporal").base > 0);

  CHECK_THROWS(parse_hw_config_text(R"({
    "levels": [
      {"name":"DRAM","capacity_words":100,"bandwidth":0,"e_read":1,"e_write":1},
      {"name":"RF","capacity_words":10,"bandwidth":1,"e_read":1,"e_write":1}
    ]
  })"));
}

TEST_CASE("hw config round trip") {
  HardwareConfig hw = HardwareConfig::defaults();
  HardwareConfig back = parse_hw_config_text(serialize_hw_config(hw));
  CHECK(serialize_hw_config(back) == serialize_hw_config(hw));
  CHECK(!back.defaulted_mac_energy);
}

}  // TEST_SUITE
