#pragma once

#include <functional>
#include <string>
#include <vector>

#include "neurmap/diff/gradcheck.hpp"
#include "neurmap/nets/networks.hpp"

namespace neurmap::eval {

struct GradcheckCase {
  std::string name;
  double threshold;  // max relative error allowed
  std::function<diff::GradcheckResult()> run;
};

struct GradcheckOutcome {
  std::string name;
  double threshold;
  diff::GradcheckResult result;
  bool passed() const { return result.max_rel_error < threshold; }
};

/// Architecture of the networks the objective checks run on.
nets::ArchConfig gradcheck_arch();

/// Every differentiable operation of the engine, the image operators, and
/// the assembled objectives on tiny 64-bit networks with 16x16 inputs.
std::vector<GradcheckCase> gradcheck_suite();

std::vector<GradcheckOutcome> run_gradcheck_suite(const std::function<void(const GradcheckOutcome&)>& on_result = {});

}  // namespace neurmap::eval
