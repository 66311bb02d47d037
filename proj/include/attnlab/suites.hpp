#pragma once

#include <cstdint>
#include <vector>

#include "attnlab/report.hpp"

namespace attnlab {

// Reusable check suites shared by the CLI and the acceptance gate. Each run_*
// returns one CheckResult per verified inequality; a criterion passes when
// all of its checks do.

// Boltzmann gap lower bound over randomized separated pairs.
std::vector<CheckResult> run_boltz_separation_suite(std::uint64_t seed, int pairs);

// Finite-difference match and sign structure of the Boltzmann derivative and
// curvature, plus the value/log-partition/entropy identity and mask
// consistency.
std::vector<CheckResult> run_boltz_calculus_suite(std::uint64_t seed, int points);

// Closed-form-scale contextual maps on small separated datasets: both
// contextual-mapping conditions across several seeds.
std::vector<CheckResult> run_cm_closed_form_suite(std::uint64_t seed, int num_seeds);

// Tuned-scale contextual maps on shared-vocabulary datasets: bounded outputs
// and strictly positive distinct-context gaps across several seeds.
std::vector<CheckResult> run_cm_scaled_suite(std::uint64_t seed, int num_seeds);

// Hardmax collision demonstration plus softmax separation of the same pairs.
std::vector<CheckResult> run_hardmax_suite(std::uint64_t seed, int trials);

// End-to-end memorization: fresh-token dataset, duplicate-token dataset with
// positional encoding, parameter budget, and exactness.
std::vector<CheckResult> run_memorization_suite(std::uint64_t seed);

// Grid approximator: key exactness within 2/R and dist_1 decreasing in D.
std::vector<CheckResult> run_approximation_suite(std::uint64_t seed);

// Analytic vs finite-difference gradients of the trainable model.
std::vector<CheckResult> run_grad_check_suite(std::uint64_t seed, int configs);

// Synthetic-task training: depth 1 reaches the accuracy bar within the epoch
// budget, depth 3 reaches it in strictly fewer epochs (medians over seeds).
std::vector<CheckResult> run_training_suite(std::uint64_t seed);

}  // namespace attnlab
