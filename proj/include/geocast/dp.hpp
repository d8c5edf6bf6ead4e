#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "geocast/random.hpp"

namespace geocast {

struct PrivacyBudget {
  double epsilon_total = 0.5;
  // Fraction spent on the total-count query; the rest goes to leaf counts.
  double beta = 0.04;
};

/// One recorded expenditure. Charges sharing a parallel_group apply to
/// disjoint data partitions, so only the max within a group counts toward
/// the total (parallel composition); ungrouped charges add up (sequential).
struct BudgetCharge {
  std::string label;
  double epsilon = 0.0;
  std::optional<int> parallel_group;
};

class BudgetExceededError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BudgetLedger {
 public:
  explicit BudgetLedger(double epsilon_total) : epsilon_total_(epsilon_total) {}

  /// Records the charge; throws BudgetExceededError if it would push
  /// consumed() past the total (with a small fp slack so exact totals pass).
  void charge(const BudgetCharge& c);

  double consumed() const { return sequential_ + parallel_max_sum_; }
  double budget() const { return epsilon_total_; }
  double remaining() const { return epsilon_total_ - consumed(); }
  const std::vector<BudgetCharge>& charges() const { return charges_; }

 private:
  double epsilon_total_;
  double sequential_ = 0.0;
  double parallel_max_sum_ = 0.0;
  std::vector<BudgetCharge> charges_;
  std::vector<std::pair<int, double>> group_max_;  // group id -> max epsilon
};

/// Laplace(0, scale) via inverse CDF from a single uniform; u = 0.5 maps to 0.
double laplace_from_uniform(double scale, double u);

double laplace_sample(double scale, RandomStream& rng);

/// Noise scale for the Laplace mechanism: sensitivity / epsilon.
/// Throws std::invalid_argument if epsilon <= 0.
double laplace_scale(double sensitivity, double epsilon);

/// Charges the ledger, then returns true_value + Laplace noise calibrated to
/// sensitivity / charge.epsilon. Drawing can be disabled (noise-off runs)
/// while keeping the accounting identical.
double noisy_value(double true_value, double sensitivity, const BudgetCharge& charge,
                   BudgetLedger& ledger, RandomStream& rng, bool noise = true);

}  // namespace geocast
