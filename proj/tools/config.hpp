#pragma once

#include <map>
#include <string>
#include <vector>

#include "isp/activation.hpp"
#include "isp/rs.hpp"

namespace ispcli {

// Flat key=value configuration. Every key has a default; unknown keys are rejected.
class Config {
 public:
  Config();

  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  void set_pair(const std::string& kv);  // "key=value"

  std::string str(const std::string& key) const;
  double num(const std::string& key) const;
  int integer(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> list(const std::string& key) const;
  std::vector<int> int_list(const std::string& key) const;

  // Resolved values, one key=value per line in key order.
  std::string effective() const;

  isp::ActivationSpec activation() const;
  isp::RsOptions rs_options() const;
  isp::GridConfig grid() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ispcli
