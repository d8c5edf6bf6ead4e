#include "geocast/dp.hpp"

#include <algorithm>
#include <cmath>

namespace geocast {

namespace {
// Slack so that budgets consumed exactly (sum == total) are not rejected for
// accumulated rounding.
constexpr double kBudgetSlack = 1e-9;
}  // namespace

void BudgetLedger::charge(const BudgetCharge& c) {
  if (c.epsilon < 0.0)
    throw std::invalid_argument("BudgetLedger::charge: negative epsilon");
  double new_sequential = sequential_;
  double new_parallel = parallel_max_sum_;
  if (c.parallel_group) {
    auto it = std::find_if(group_max_.begin(), group_max_.end(),
                           [&](const auto& g) { return g.first == *c.parallel_group; });
    double prev = it == group_max_.end() ? 0.0 : it->second;
    if (c.epsilon > prev) new_parallel += c.epsilon - prev;
  } else {
    new_sequential += c.epsilon;
  }
  if (new_sequential + new_parallel > epsilon_total_ + kBudgetSlack)
    throw BudgetExceededError("privacy budget exceeded: " + c.label);
  sequential_ = new_sequential;
  parallel_max_sum_ = new_parallel;
  if (c.parallel_group) {
    auto it = std::find_if(group_max_.begin(), group_max_.end(),
                           [&](const auto& g) { return g.first == *c.parallel_group; });
    if (it == group_max_.end())
      group_max_.emplace_back(*c.parallel_group, c.epsilon);
    else
      it->second = std::max(it->second, c.epsilon);
  }
  charges_.push_back(c);
}

double laplace_from_uniform(double scale, double u) {
  // Inverse CDF, symmetric about u = 0.5.
  if (u < 0.5) return scale * std::log(2.0 * u);
  return -scale * std::log(2.0 * (1.0 - u));
}

double laplace_sample(double scale, RandomStream& rng) {
  return laplace_from_uniform(scale, rng.uniform());
}

double laplace_scale(double sensitivity, double epsilon) {
  if (epsilon <= 0.0)
    throw std::invalid_argument("laplace_scale: epsilon must be positive");
  return sensitivity / epsilon;
}

double noisy_value(double true_value, double sensitivity, const BudgetCharge& charge,
                   BudgetLedger& ledger, RandomStream& rng, bool noise) {
  ledger.charge(charge);
  if (!noise) return true_value;
  return true_value + laplace_sample(laplace_scale(sensitivity, charge.epsilon), rng);
}

}  // namespace geocast
