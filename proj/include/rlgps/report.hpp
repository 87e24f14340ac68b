#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rlgps/config.hpp"
#include "rlgps/experiment.hpp"

namespace rlgps {

/// Self-contained 800x500 SVG: per group a shaded +-1 SEM band, a solid mean
/// line and a dotted median line. Colors depend only on the group name.
void write_regret_svg(std::ostream& out, const std::vector<AggregateResult>& groups, const std::string& title = "");

/// Stable palette entry for a group name.
std::string group_color(const std::string& group);

struct CheckLine {
  std::string name;
  bool pass = false;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
};

/// `CHECK <name> PASS|FAIL lhs=<..> rhs=<..> margin=<..>`
std::string format_check(const CheckLine& line);

/// Potential-inequality, composed-bound and value-coverage checks at the scale given by
/// `verify.sequences` / `verify.trials`, using the kernel family, lengthscale,
/// noise, delta and beta_scale of `cfg`.
std::vector<CheckLine> run_verification(const ExperimentConfig& cfg);

}  // namespace rlgps
