#pragma once

#include <cstdint>
#include <string>

#include "gae/optim.hpp"
#include "gae/rng.hpp"
#include "gae/tensor.hpp"

namespace gae {

// Kaiming-uniform fan-in init for the weights, zero bias.
struct Conv2dLayer {
    TensorPtr weight;  // [Cout, Cin, k, k]
    TensorPtr bias;    // [Cout]
    int stride = 1;
    int padding = 1;

    static Conv2dLayer make(std::int64_t c_in, std::int64_t c_out, std::int64_t k, int stride, int padding,
                            Rng& rng);
    TensorPtr forward(const TensorPtr& x) const { return conv2d(x, weight, bias, stride, padding); }
    void register_params(ParameterList& out, const std::string& prefix) const;
};

struct LinearLayer {
    TensorPtr weight;  // [M, N]
    TensorPtr bias;    // [M]

    static LinearLayer make(std::int64_t n_in, std::int64_t n_out, Rng& rng);
    TensorPtr forward(const TensorPtr& x) const { return fully_connected(x, weight, bias); }
    void register_params(ParameterList& out, const std::string& prefix) const;
};

std::int64_t param_count(const ParameterList& params);

} // namespace gae
