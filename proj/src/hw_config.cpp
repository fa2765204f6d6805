#include "psa/hw_config.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace psa {

using nlohmann::json;

namespace {

std::map<std::string, MacEnergyEntry> default_mac_energy() {
  // Relative switching cost per active unit-cycle.  A spatial brick is a
  // 2x2 combinational multiplier, a bit-serial unit cycle is one AND-row
  // plus shift-add activity; the temporal unit carries the widest logic.
  return {
      {"temporal", {1.6, 1.0, 1.0, 1.0}},
      {"spatial", {1.0, 1.0, 1.0, 1.0}},
      {"spatial_temporal", {0.9, 1.0, 1.0, 1.0}},
  };
}

}  // namespace

HardwareConfig HardwareConfig::defaults() {
  HardwareConfig hw;
  hw.array_rows = 16;
  hw.array_cols = 16;
  hw.n_partial_sums = 4;
  hw.levels = {
      {"DRAM", 1LL << 40, 4.0, 200.0, 200.0},
      {"GlobalBuffer", 128 * 1024, 16.0, 6.0, 6.0},
      {"RF", 512, 64.0, 1.0, 1.0},
  };
  hw.mac_energy = default_mac_energy();
  hw.unit_area = UnitAreaTable{};
  return hw;
}

void HardwareConfig::validate() const {
  if (array_rows < 1 || array_cols < 1)
    throw std::invalid_argument("array dimensions must be >=1");
  if (n_partial_sums < 1)
    throw std::invalid_argument("n_partial_sums must be >=1");
  if (levels.size() < 2)
    throw std::invalid_argument("need at least two memory levels");
  for (const auto& l : levels) {
    if (l.capacity_words <= 0)
      throw std::invalid_argument("level '" + l.name +
                                  "': capacity must be >0");
    if (l.bandwidth_words_per_cycle <= 0)
      throw std::invalid_argument("level '" + l.name +
                                  "': bandwidth must be >0");
    if (l.energy_per_word_read <= 0 || l.energy_per_word_write <= 0)
      throw std::invalid_argument("level '" + l.name +
                                  "': energies must be >0");
  }
  for (const auto& [k, e] : mac_energy) {
    if (e.base <= 0 || e.le4 <= 0 || e.le8 <= 0 || e.gt8 <= 0)
      throw std::invalid_argument("mac_energy '" + k + "': must be >0");
  }
  if (unit_area.multiplier_bit <= 0 || unit_area.shifter_bit <= 0 ||
      unit_area.adder_bit <= 0 || unit_area.register_bit <= 0)
    throw std::invalid_argument("unit areas must be >0");
}

const MacEnergyEntry& HardwareConfig::energy_entry(
    const std::string& arch) const {
  auto it = mac_energy.find(arch);
  if (it == mac_energy.end())
    throw std::invalid_argument("no mac_energy entry for arch '" + arch + "'");
  return it->second;
}

namespace {

void warn_unknown_keys(const json& j, const std::vector<std::string>& known,
                       const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool found = false;
    for (const auto& k : known)
      if (it.key() == k) {
        found = true;
        break;
      }
    if (!found)
      std::cerr << "warning: unknown key '" << it.key() << "' in " << where
                << " (ignored)\n";
  }
}

}  // namespace

HardwareConfig parse_hw_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("hw config parse error: ") + e.what());
  }
  HardwareConfig hw = HardwareConfig::defaults();
  warn_unknown_keys(j, {"array", "levels", "mac_energy", "unit_area"},
                    "hw config");

  if (j.contains("array")) {
    const auto& ja = j["array"];
    warn_unknown_keys(ja, {"rows", "cols", "n_partial_sums"}, "array");
    hw.array_rows = ja.value("rows", hw.array_rows);
    hw.array_cols = ja.value("cols", hw.array_cols);
    hw.n_partial_sums = ja.value("n_partial_sums", hw.n_partial_sums);
  }

  if (j.contains("levels")) {
    hw.levels.clear();
    for (const auto& jl : j["levels"]) {
      warn_unknown_keys(jl, {"name", "capacity_words", "bandwidth", "e_read",
                             "e_write"},
                        "level");
      MemLevel l;
      l.name = jl.value("name", "level" + std::to_string(hw.levels.size()));
      if (!jl.contains("capacity_words"))
        throw std::runtime_error("level '" + l.name +
                                 "': missing capacity_words");
      l.capacity_words = jl["capacity_words"].get<std::int64_t>();
      if (!jl.contains("bandwidth"))
        throw std::runtime_error("level '" + l.name + "': missing bandwidth");
      l.bandwidth_words_per_cycle = jl["bandwidth"].get<double>();
      l.energy_per_word_read = jl.value("e_read", 1.0);
      l.energy_per_word_write = jl.value("e_write", 1.0);
      hw.levels.push_back(l);
    }
  }

  hw.defaulted_mac_energy = !j.contains("mac_energy");
  if (j.contains("mac_energy")) {
    hw.mac_energy.clear();
    for (auto it = j["mac_energy"].begin(); it != j["mac_energy"].end(); ++it) {
      MacEnergyEntry e;
      if (it.value().is_number()) {
        e.base = it.value().get<double>();
      } else {
        warn_unknown_keys(it.value(), {"base", "le4", "le8", "gt8"},
                          "mac_energy." + it.key());
        e.base = it.value().value("base", 1.0);
        e.le4 = it.value().value("le4", 1.0);
        e.le8 = it.value().value("le8", 1.0);
        e.gt8 = it.value().value("gt8", 1.0);
      }
      hw.mac_energy[it.key()] = e;
    }
  }

  hw.defaulted_unit_area = !j.contains("unit_area");
  if (j.contains("unit_area")) {
    const auto& ju = j["unit_area"];
    warn_unknown_keys(
        ju, {"multiplier_bit", "shifter_bit", "adder_bit", "register_bit"},
        "unit_area");
    hw.unit_area.multiplier_bit =
        ju.value("multiplier_bit", hw.unit_area.multiplier_bit);
    hw.unit_area.shifter_bit = ju.value("shifter_bit", hw.unit_area.shifter_bit);
    hw.unit_area.adder_bit = ju.value("adder_bit", hw.unit_area.adder_bit);
    hw.unit_area.register_bit =
        ju.value("register_bit", hw.unit_area.register_bit);
  }

  hw.validate();
  return hw;
}

HardwareConfig parse_hw_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open hw config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_hw_config_text(ss.str());
}

std::string serialize_hw_config(const HardwareConfig& hw) {
  json j;
  j["array"] = {{"rows", hw.array_rows},
                {"cols", hw.array_cols},
                {"n_partial_sums", hw.n_partial_sums}};
  j["levels"] = json::array();
  for (const auto& l : hw.levels) {
    j["levels"].push_back({{"name", l.name},
                           {"capacity_words", l.capacity_words},
                           {"bandwidth", l.bandwidth_words_per_cycle},
                           {"e_read", l.energy_per_word_read},
                           {"e_write", l.energy_per_word_write}});
  }
  json je;
  for (const auto& [k, e] : hw.mac_energy)
    je[k] = {{"base", e.base}, {"le4", e.le4}, {"le8", e.le8}, {"gt8", e.gt8}};
  j["mac_energy"] = je;
  j["unit_area"] = {{"multiplier_bit", hw.unit_area.multiplier_bit},
                    {"shifter_bit", hw.unit_area.shifter_bit},
                    {"adder_bit", hw.unit_area.adder_bit},
                    {"register_bit", hw.unit_area.register_bit}};
  return j.dump(2) + "\n";
}

}  // namespace psa
