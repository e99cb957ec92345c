#include "gae/nn.hpp"

#include <cmath>

namespace gae {

namespace {

std::vector<double> kaiming_uniform(std::int64_t n, std::int64_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<double> w(static_cast<std::size_t>(n));
    for (auto& v : w) {
        v = rng.uniform(-bound, bound);
    }
    return w;
}

} // namespace

Conv2dLayer Conv2dLayer::make(std::int64_t c_in, std::int64_t c_out, std::int64_t k, int stride, int padding,
                              Rng& rng) {
    Conv2dLayer layer;
    layer.weight = Tensor::from_data({c_out, c_in, k, k}, kaiming_uniform(c_out * c_in * k * k, c_in * k * k, rng),
                                     true);
    layer.bias = Tensor::zeros({c_out}, true);
    layer.stride = stride;
    layer.padding = padding;
    return layer;
}

void Conv2dLayer::register_params(ParameterList& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

LinearLayer LinearLayer::make(std::int64_t n_in, std::int64_t n_out, Rng& rng) {
    LinearLayer layer;
    layer.weight = Tensor::from_data({n_out, n_in}, kaiming_uniform(n_out * n_in, n_in, rng), true);
    layer.bias = Tensor::zeros({n_out}, true);
    return layer;
}

void LinearLayer::register_params(ParameterList& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

std::int64_t param_count(const ParameterList& params) {
    std::int64_t n = 0;
    for (const auto& p : params) {
        n += p.tensor->numel();
    }
    return n;
}

} // namespace gae
