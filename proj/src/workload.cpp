#include "psa/workload.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace psa {

using nlohmann::json;

Precision Precision::parse(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty precision string");
  if (s[0] == 'w') {
    auto a = s.find('a');
    if (a == std::string::npos)
      throw std::invalid_argument("bad precision '" + s + "', expected wNaM");
    return Precision(std::stoi(s.substr(1, a - 1)), std::stoi(s.substr(a + 1)));
  }
  return Precision::sym(std::stoi(s));
}

PrecisionSet PrecisionSet::parse(const std::string& s) {
  std::vector<Precision> members;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) members.push_back(Precision::parse(tok));
  }
  return PrecisionSet(std::move(members));
}

std::string PrecisionSet::str() const {
  std::string out;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (i) out += ",";
    out += members_[i].str();
  }
  return out;
}

void LayerShape::validate() const {
  auto check = [&](std::int64_t v, const char* field) {
    if (v < 1)
      throw std::invalid_argument("layer '" + name + "': dimension " + field +
                                  " must be >=1");
  };
  check(N, "N");
  check(K, "K");
  check(C, "C");
  check(R, "R");
  check(S, "S");
  check(E, "E");
  check(F, "F");
  check(stride, "stride");
  if (kind == Kind::fc && (R != 1 || S != 1 || E != 1 || F != 1))
    throw std::invalid_argument("layer '" + name +
                                "': fc layers must have R=S=E=F=1");
}

namespace {

std::int64_t require_dim(const json& j, const char* key, std::int64_t def,
                         bool required, const std::string& locus) {
  if (!j.contains(key)) {
    if (required)
      throw std::runtime_error(locus + ": missing field '" + key + "'");
    return def;
  }
  if (!j[key].is_number_integer())
    throw std::runtime_error(locus + ": field '" + key +
                             "' must be an integer");
  return j[key].get<std::int64_t>();
}

LayerShape parse_layer(const json& j, std::size_t idx) {
  const std::string locus = "layers[" + std::to_string(idx) + "]";
  LayerShape l;
  l.name = j.value("name", "layer" + std::to_string(idx));
  const std::string kind = j.value("kind", "conv");
  if (kind == "conv") {
    l.kind = LayerShape::Kind::conv;
    l.N = require_dim(j, "N", 1, false, locus);
    l.K = require_dim(j, "K", 0, true, locus);
    l.C = require_dim(j, "C", 0, true, locus);
    l.R = require_dim(j, "R", 0, true, locus);
    l.S = require_dim(j, "S", 0, true, locus);
    l.E = require_dim(j, "E", 0, true, locus);
    l.F = require_dim(j, "F", 0, true, locus);
    l.stride = require_dim(j, "stride", 1, false, locus);
  } else if (kind == "fc") {
    l.kind = LayerShape::Kind::fc;
    l.K = require_dim(j, "K", 0, true, locus);
    l.C = require_dim(j, "C", 0, true, locus);
    l.N = require_dim(j, "N", 1, false, locus);
    l.R = l.S = l.E = l.F = 1;
    l.stride = 1;
  } else {
    throw std::runtime_error(locus + ": unknown kind '" + kind + "'");
  }
  try {
    l.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(locus + ": " + e.what());
  }
  return l;
}

}  // namespace

Network parse_workload_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("workload parse error: ") + e.what());
  }
  Network net;
  net.name = j.value("name", "unnamed");
  if (!j.contains("layers") || !j["layers"].is_array())
    throw std::runtime_error("workload: missing 'layers' array");
  std::size_t idx = 0;
  for (const auto& jl : j["layers"]) net.layers.push_back(parse_layer(jl, idx++));
  net.validate();
  return net;
}

Network parse_workload(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open workload file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_workload_text(ss.str());
}

std::string serialize_workload(const Network& net) {
  json j;
  j["name"] = net.name;
  j["layers"] = json::array();
  for (const auto& l : net.layers) {
    json jl;
    jl["name"] = l.name;
    if (l.kind == LayerShape::Kind::fc) {
      jl["kind"] = "fc";
      jl["K"] = l.K;
      jl["C"] = l.C;
      jl["N"] = l.N;
    } else {
      jl["kind"] = "conv";
      jl["N"] = l.N;
      jl["K"] = l.K;
      jl["C"] = l.C;
      jl["R"] = l.R;
      jl["S"] = l.S;
      jl["E"] = l.E;
      jl["F"] = l.F;
      jl["stride"] = l.stride;
    }
    j["layers"].push_back(jl);
  }
  return j.dump(2) + "\n";
}

}  // namespace psa
