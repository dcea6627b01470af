#pragma once

#include <map>
#include <string>
#include <vector>

namespace oswitch {

/// Outcome of a structural or numerical validator. Failing reports carry one
/// message per violation; metrics hold the computed quantities by name.
struct ValidationReport {
  bool ok = true;
  std::vector<std::string> issues;
  std::map<std::string, double> metrics;

  void fail(std::string msg) {
    ok = false;
    issues.push_back(std::move(msg));
  }
  std::string summary() const {
    if (ok) return "ok";
    std::string s;
    for (const auto& m : issues) {
      if (!s.empty()) s += "; ";
      s += m;
    }
    return s;
  }
};

}  // namespace oswitch
