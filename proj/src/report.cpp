#include <charconv>

#include "json.hpp"
#include "psa/dataflow.hpp"

namespace psa {

namespace {

/// Shortest round-trip decimal form; locale-free and platform-stable for
/// byte-exact golden outputs.
std::string fmt(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

}  // namespace

std::string CostReport::to_json() const {
  nlohmann::json j;
  j["arch"] = arch;
  j["precision"] = precision.str();
  j["layer"] = layer_name;
  j["dataflow_hash"] = dataflow_hash;
  j["compute_cycles"] = compute_cycles;
  j["stall_cycles"] = stall_cycles;
  j["total_cycles"] = total_cycles;
  j["utilization"] = utilization;
  j["true_macs"] = true_macs;
  j["padded_macs"] = padded_macs;
  j["mac_energy_total"] = mac_energy_total;
  j["traffic_energy_total"] = traffic_energy_total;
  j["energy_total"] = energy_total;
  j["defaulted_hw_tables"] = defaulted_hw_tables;
  j["traffic"] = nlohmann::json::array();
  for (const auto& row : traffic)
    j["traffic"].push_back({{"boundary", row.boundary},
                            {"tensor", row.tensor},
                            {"words", row.words},
                            {"energy", row.energy}});
  j["area"] = {{"multipliers", area.multipliers},
               {"shift_add", area.shift_add},
               {"accumulators", area.accumulators},
               {"other", area.other},
               {"total", area.total()}};
  return j.dump(2) + "\n";
}

std::string CostReport::csv_header() {
  return "layer,arch,weight_bits,act_bits,total_cycles,compute_cycles,"
         "stall_cycles,utilization,energy_total,mac_energy,traffic_energy,"
         "true_macs,padded_macs,dataflow_hash";
}

std::string CostReport::csv_row() const {
  std::string out;
  out += layer_name + "," + arch + ",";
  out += std::to_string(precision.weight_bits) + ",";
  out += std::to_string(precision.act_bits) + ",";
  out += fmt(total_cycles) + "," + fmt(compute_cycles) + ",";
  out += fmt(stall_cycles) + "," + fmt(utilization) + ",";
  out += fmt(energy_total) + "," + fmt(mac_energy_total) + ",";
  out += fmt(traffic_energy_total) + ",";
  out += std::to_string(true_macs) + "," + std::to_string(padded_macs) + ",";
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(dataflow_hash));
  out += buf;
  return out;
}

std::uint64_t CostReport::hash() const { return fnv1a(to_json()); }

}  // namespace psa
