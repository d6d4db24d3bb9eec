#include "config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "isp/error.hpp"

namespace ispcli {

namespace {

struct Default {
  const char* key;
  const char* value;
};

// key, default
const Default kDefaults[] = {
    {"activation", "halfspace:0"},
    {"eta", "0"},
    {"alpha", "0.01"},
    {"alphas", "0.001,0.005,0.01,0.05"},
    {"etas", ""},
    {"quad_order", "201"},
    {"q_max", "0.04"},
    {"rs_tol", "1e-12"},
    {"scan_points", "400"},
    {"t_max", "200"},
    {"eps_conv", "1e-8"},
    {"N", "4000"},
    {"t", "6"},
    {"seed", "1"},
    {"threads", "0"},
    {"parallel", "true"},
    {"const_mode", "empirical"},
    {"c0", "5"},
    {"c1", "1"},
    {"x_max", "6"},
    {"x_step", "0.5"},
    {"c_lo", "0.5"},
    {"c_hi", "2"},
    {"c_step", "0.1"},
    {"p_max", "8"},
    {"eps_bar", "auto"},
    {"radius", "auto"},
    {"L_cap", "auto"},
    {"samples", "10000"},
    {"lambda_max", "0.8"},
    {"lambda_steps", "17"},
    {"enum_N", "12"},
    {"enum_M", "-1"},
    {"enum_cap", "26"},
    {"force_log", "false"},
    {"Ns", ""},
    {"enum_samples", "200"},
    {"trunc_per_spin", "0.69314718055994531"},
    {"dump_matrices", "false"},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config::Config() {
  for (const auto& d : kDefaults) values_[d.key] = d.value;
}

void Config::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw isp::UsageError("unknown config key '" + key + "'");
  it->second = value;
}

void Config::set_pair(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw isp::UsageError("expected key=value, got '" + kv + "'");
  set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw isp::UsageError("cannot open config file " + path);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      set_pair(line);
    } catch (const isp::UsageError& e) {
      throw isp::UsageError(path + ":" + std::to_string(no) + ": " + e.what());
    }
  }
}

std::string Config::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw isp::UsageError("unknown config key '" + key + "'");
  return it->second;
}

double Config::num(const std::string& key) const {
  const std::string v = str(key);
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw isp::UsageError("config key '" + key + "' needs a number, got '" + v + "'");
  }
}

int Config::integer(const std::string& key) const {
  const std::string v = str(key);
  int out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw isp::UsageError("config key '" + key + "' needs an integer, got '" + v + "'");
  return out;
}

std::uint64_t Config::u64(const std::string& key) const {
  const std::string v = str(key);
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw isp::UsageError("config key '" + key + "' needs a non-negative integer, got '" + v + "'");
  return out;
}

bool Config::flag(const std::string& key) const {
  const std::string v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw isp::UsageError("config key '" + key + "' needs true/false, got '" + v + "'");
}

std::vector<double> Config::list(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(str(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw isp::UsageError("config key '" + key + "' has a bad list entry '" + item + "'");
    }
  }
  return out;
}

std::vector<int> Config::int_list(const std::string& key) const {
  std::vector<int> out;
  for (double d : list(key)) {
    if (d != static_cast<int>(d)) throw isp::UsageError("config key '" + key + "' needs integers");
    out.push_back(static_cast<int>(d));
  }
  return out;
}

std::string Config::effective() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

isp::ActivationSpec Config::activation() const {
  isp::ActivationSpec spec = isp::parse_activation(str("activation"));
  spec.quad_order = integer("quad_order");
  const double eta = num("eta");
  if (eta < 0) throw isp::UsageError("eta must be >= 0");
  if (eta > 0) spec = isp::smooth(spec, eta);
  return spec;
}

isp::RsOptions Config::rs_options() const {
  isp::RsOptions o;
  o.q_max = num("q_max");
  o.tol = num("rs_tol");
  o.scan_points = integer("scan_points");
  o.quad_order = integer("quad_order");
  return o;
}

isp::GridConfig Config::grid() const {
  isp::GridConfig g;
  g.x_max = num("x_max");
  g.x_step = num("x_step");
  g.c_lo = num("c_lo");
  g.c_hi = num("c_hi");
  g.c_step = num("c_step");
  g.p_max = integer("p_max");
  g.abs_c0 = num("c0");
  g.abs_c1 = num("c1");
  return g;
}

}  // namespace ispcli
