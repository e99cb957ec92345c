#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gae/tensor.hpp"

namespace gae {

struct GradCheckResult {
    std::string op;
    double max_rel_err = 0.0;
    int instances = 0;
};

// Builds a scalar loss from differentiable leaf inputs. Called repeatedly by
// the finite-difference driver, so it must be a pure function of the inputs.
using LossBuilder = std::function<TensorPtr(const std::vector<TensorPtr>&)>;

// Central finite differences (step 1e-5) against the analytic backward pass.
// Returns the worst relative error over all elements of all inputs.
double finite_difference_check(const LossBuilder& build, std::vector<TensorPtr> inputs, double step = 1e-5);

// The full per-op suite: >=5 random instances per differentiable op.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed);

bool gradcheck_all_pass(const std::vector<GradCheckResult>& results, double tol = 1e-4);

} // namespace gae
