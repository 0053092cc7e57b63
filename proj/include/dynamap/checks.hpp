#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dynamap::checks {

struct CheckResult {
  std::string name;
  bool pass = false;
  double worst = 0;  // worst error (or the measured statistic) across cases
  int cases = 0;
  std::string detail;
};

// Batched PHD weight update vs the sequential scalar oracle, randomized
// pools and clouds, relative tolerance 1e-9.
CheckResult check_filter_oracle(int instances, uint64_t seed);

// Closed-form obstacle covariance vs the recursive propagation with Q = 0,
// random block-diagonal initializations, relative tolerance 1e-10.
CheckResult check_covariance_oracle(int instances, int horizon, uint64_t seed);

// Pyramid/voxel grouping vs a brute-force stable group-by, and Hungarian
// matching vs permutation enumeration.
CheckResult check_assignment_oracle(int pools, uint64_t seed);

// Analytic Jacobian vs central finite differences (1e-5) and FK vs closed-form
// oracles for both robots (1e-10).
CheckResult check_kinematics(int samples, uint64_t seed);

// Planner invariants: eta normalization and shift invariance, covariance PSD
// under repeated updates, softmax bounds, warm-start shift, free-space
// equilibrium.
CheckResult check_planner_invariants(uint64_t seed);

// The three oracle equivalence suites, fixed sizes.
std::vector<CheckResult> run_oracle_checks(uint64_t seed);

}  // namespace dynamap::checks
