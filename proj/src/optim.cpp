#include "gae/optim.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "gae/error.hpp"

namespace gae {

void AdamOptimizer::step(ParameterList& params) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i].tensor->data.size(), 0.0);
            v_[i].assign(params[i].tensor->data.size(), 0.0);
        }
    }
    if (m_.size() != params.size()) {
        throw ConfigError("AdamOptimizer: parameter list changed between steps");
    }

    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& t = *params[i].tensor;
        t.ensure_grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < t.data.size(); ++j) {
            const double g = t.grad[j];
            if (!std::isfinite(g)) {
                throw NumericError("non-finite gradient in parameter '" + params[i].name + "'");
            }
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            t.data[j] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
        }
        t.zero_grad();
    }
}

void AdamOptimizer::zero_grad(ParameterList& params) {
    for (auto& p : params) {
        p.tensor->ensure_grad();
        p.tensor->zero_grad();
    }
}

void AdamOptimizer::save_state(std::ostream& os) const {
    const std::int64_t n = static_cast<std::int64_t>(m_.size());
    os.write(reinterpret_cast<const char*>(&step_count_), sizeof(step_count_));
    os.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (std::size_t i = 0; i < m_.size(); ++i) {
        const std::int64_t len = static_cast<std::int64_t>(m_[i].size());
        os.write(reinterpret_cast<const char*>(&len), sizeof(len));
        os.write(reinterpret_cast<const char*>(m_[i].data()), static_cast<std::streamsize>(len * 8));
        os.write(reinterpret_cast<const char*>(v_[i].data()), static_cast<std::streamsize>(len * 8));
    }
}

void AdamOptimizer::load_state(std::istream& is, const ParameterList& params) {
    std::int64_t n = 0;
    is.read(reinterpret_cast<char*>(&step_count_), sizeof(step_count_));
    is.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!is || n != static_cast<std::int64_t>(params.size())) {
        throw IoError("optimizer state does not match the model's parameter list");
    }
    m_.assign(params.size(), {});
    v_.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::int64_t len = 0;
        is.read(reinterpret_cast<char*>(&len), sizeof(len));
        if (!is || len != params[i].tensor->numel()) {
            throw IoError("optimizer state size mismatch for parameter '" + params[i].name + "'");
        }
        m_[i].resize(static_cast<std::size_t>(len));
        v_[i].resize(static_cast<std::size_t>(len));
        is.read(reinterpret_cast<char*>(m_[i].data()), static_cast<std::streamsize>(len * 8));
        is.read(reinterpret_cast<char*>(v_[i].data()), static_cast<std::streamsize>(len * 8));
    }
    if (!is) {
        throw IoError("truncated optimizer state");
    }
}

} // namespace gae
