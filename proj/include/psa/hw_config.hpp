#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace psa {

/// One memory level; levels are ordered outermost (DRAM) to innermost (RF).
struct MemLevel {
  std::string name;
  std::int64_t capacity_words = 0;
  double bandwidth_words_per_cycle = 0.0;
  double energy_per_word_read = 0.0;
  double energy_per_word_write = 0.0;
};

/// Per-architecture MAC issue energy: base cost per active unit-cycle with
/// optional multipliers per executed-precision class.
struct MacEnergyEntry {
  double base = 1.0;
  double le4 = 1.0;   // both executed operands <= 4 bit
  double le8 = 1.0;   // max executed operand in (4,8]
  double gt8 = 1.0;   // max executed operand > 8
};

/// Per-bit component areas used by the MAC area model.
struct UnitAreaTable {
  double multiplier_bit = 1.0;
  double shifter_bit = 0.6;
  double adder_bit = 0.8;
  double register_bit = 0.5;
};

struct HardwareConfig {
  std::int64_t array_rows = 16;
  std::int64_t array_cols = 16;
  std::int64_t n_partial_sums = 4;  // n in the grouped MAC unit
  std::vector<MemLevel> levels;     // outer -> inner
  std::map<std::string, MacEnergyEntry> mac_energy;  // keyed by arch name
  UnitAreaTable unit_area;
  bool defaulted_mac_energy = false;  // true when the table was filled in
  bool defaulted_unit_area = false;

  void validate() const;

  const MacEnergyEntry& energy_entry(const std::string& arch) const;

  static HardwareConfig defaults();
};

/// Parse a hardware config document (JSON, schema in README).  Missing
/// mac_energy/unit_area sections fall back to shipped defaults and are
/// flagged in the config.  Unknown keys produce warnings on stderr, not
/// errors.
HardwareConfig parse_hw_config(const std::string& path);
HardwareConfig parse_hw_config_text(const std::string& text);

std::string serialize_hw_config(const HardwareConfig& hw);

}  // namespace psa
