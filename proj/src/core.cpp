#include "pdd/core.hpp"

#include <numeric>

namespace pdd {

std::string to_string(Mode m) { return m == Mode::Pdd ? "pdd" : "ipdd"; }

std::string to_string(InnerStop s) {
  switch (s) {
    case InnerStop::ObjectiveProgress: return "objective-progress";
    case InnerStop::Residual: return "residual";
    case InnerStop::IterationCap: return "iteration-cap";
  }
  return "?";
}

std::string to_string(BlockOrder o) { return o == BlockOrder::Randomized ? "randomized" : "cyclic"; }

std::string to_string(Branch b) { return b == Branch::DualUpdate ? "dual" : "penalty"; }

Mode parse_mode(const std::string& s) {
  if (s == "pdd") return Mode::Pdd;
  if (s == "ipdd") return Mode::Ipdd;
  throw InvalidInput("unknown mode '" + s + "' (expected pdd|ipdd)");
}

InnerStop parse_inner_stop(const std::string& s) {
  if (s == "objective-progress") return InnerStop::ObjectiveProgress;
  if (s == "residual") return InnerStop::Residual;
  if (s == "iteration-cap") return InnerStop::IterationCap;
  throw InvalidInput("unknown inner stop rule '" + s + "'");
}

BlockOrder parse_block_order(const std::string& s) {
  if (s == "randomized") return BlockOrder::Randomized;
  if (s == "cyclic") return BlockOrder::Cyclic;
  throw InvalidInput("unknown block order '" + s + "'");
}

void PddConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidInput(std::string("PddConfig: ") + what);
  };
  require(rho0 > 0.0 && std::isfinite(rho0), "rho0 must be positive");
  require(c > 0.0 && c < 1.0, "c must lie in (0, 1)");
  require(tau > 0.0 && tau < 1.0, "tau must lie in (0, 1)");
  require(std::isfinite(eta0), "eta0 must be finite");
  require(eps0 > 0.0, "eps0 must be positive");
  require(eps_shrink <= 0.0 || eps_shrink < 1.0, "eps_shrink must lie in (0, 1)");
  require(max_outer >= 1, "max_outer must be at least 1");
  require(max_inner >= 1, "max_inner must be at least 1");
  require(eps_outer > 0.0, "eps_outer must be positive");
  require(rho_min_ratio >= 0.0 && rho_min_ratio < 1.0, "rho_min_ratio must lie in [0, 1)");
}

std::vector<std::size_t> rbsum_order(std::size_t num_blocks, std::size_t lead) {
  if (lead >= num_blocks) throw InvalidInput("rbsum_order: lead block out of range");
  std::vector<std::size_t> order;
  order.reserve(num_blocks);
  order.push_back(lead);
  for (std::size_t i = 0; i < num_blocks; ++i) {
    if (i != lead) order.push_back(i);
  }
  return order;
}

}  // namespace pdd
