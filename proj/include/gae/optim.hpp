#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gae/tensor.hpp"

namespace gae {

struct Parameter {
    std::string name;
    TensorPtr tensor;
};

using ParameterList = std::vector<Parameter>;

// Adam with bias correction. Moment buffers are keyed by parameter order, so
// the same ParameterList must be passed to every step.
class AdamOptimizer {
public:
    explicit AdamOptimizer(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // Applies one update and zeroes gradients. Throws NumericError naming the
    // parameter if any gradient is non-finite.
    void step(ParameterList& params);

    void zero_grad(ParameterList& params);

    std::int64_t step_count() const { return step_count_; }
    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

    // Binary state round-trip for exact training resume.
    void save_state(std::ostream& os) const;
    void load_state(std::istream& is, const ParameterList& params);

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t step_count_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

} // namespace gae
