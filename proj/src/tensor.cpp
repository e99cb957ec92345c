#include "gae/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <unordered_set>

#include "gae/error.hpp"

namespace gae {

namespace {

thread_local bool g_grad_enabled = true;
thread_local std::int64_t g_alloc_elements = 0;

// Scratch buffers reused across conv calls on this thread.
thread_local std::vector<double> g_col_buf;
thread_local std::vector<double> g_dcol_buf;

// C[M,N] += A[M,K] * B[K,N], row-major contiguous.
void gemm_acc(const double* a, const double* b, double* c, std::int64_t m_rows, std::int64_t k_inner,
              std::int64_t n_cols) {
    for (std::int64_t m = 0; m < m_rows; ++m) {
        double* crow = c + m * n_cols;
        const double* arow = a + m * k_inner;
        for (std::int64_t k = 0; k < k_inner; ++k) {
            const double av = arow[k];
            if (av == 0.0) {
                continue;
            }
            const double* brow = b + k * n_cols;
            for (std::int64_t n = 0; n < n_cols; ++n) {
                crow[n] += av * brow[n];
            }
        }
    }
}

// C[M,N] += A[M,K] * B[N,K]^T : dot products of contiguous rows.
void gemm_abt_acc(const double* a, const double* b, double* c, std::int64_t m_rows, std::int64_t k_inner,
                  std::int64_t n_cols) {
    for (std::int64_t m = 0; m < m_rows; ++m) {
        const double* arow = a + m * k_inner;
        double* crow = c + m * n_cols;
        for (std::int64_t n = 0; n < n_cols; ++n) {
            const double* brow = b + n * k_inner;
            double acc = 0.0;
            for (std::int64_t k = 0; k < k_inner; ++k) {
                acc += arow[k] * brow[k];
            }
            crow[n] += acc;
        }
    }
}

// C[K,N] += A[M,K]^T * B[M,N].
void gemm_atb_acc(const double* a, const double* b, double* c, std::int64_t m_rows, std::int64_t k_inner,
                  std::int64_t n_cols) {
    for (std::int64_t m = 0; m < m_rows; ++m) {
        const double* arow = a + m * k_inner;
        const double* brow = b + m * n_cols;
        for (std::int64_t k = 0; k < k_inner; ++k) {
            const double av = arow[k];
            if (av == 0.0) {
                continue;
            }
            double* crow = c + k * n_cols;
            for (std::int64_t n = 0; n < n_cols; ++n) {
                crow[n] += av * brow[n];
            }
        }
    }
}

struct ConvDims {
    std::int64_t batch, c_in, h, w;
    std::int64_t c_out, k;
    std::int64_t h_out, w_out;
    std::int64_t patch;  // c_in * k * k
    std::int64_t out_px; // h_out * w_out
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int padding) {
    if (x.shape.size() != 4 || w.shape.size() != 4) {
        throw ConfigError("conv2d expects input [B,C,H,W] and weight [Cout,Cin,k,k]");
    }
    ConvDims d;
    d.batch = x.shape[0];
    d.c_in = x.shape[1];
    d.h = x.shape[2];
    d.w = x.shape[3];
    d.c_out = w.shape[0];
    d.k = w.shape[2];
    if (w.shape[1] != d.c_in || w.shape[3] != d.k) {
        throw ConfigError("conv2d weight shape does not match input channels/kernel");
    }
    if (d.k % 2 == 0) {
        throw ConfigError("conv2d kernel size must be odd");
    }
    if (stride <= 0 || padding < 0) {
        throw ConfigError("conv2d stride must be positive and padding non-negative");
    }
    d.h_out = (d.h + 2 * padding - d.k) / stride + 1;
    d.w_out = (d.w + 2 * padding - d.k) / stride + 1;
    if (d.h_out < 1 || d.w_out < 1) {
        throw ConfigError("conv2d output size would be empty");
    }
    d.patch = d.c_in * d.k * d.k;
    d.out_px = d.h_out * d.w_out;
    return d;
}

// col[(ci*k+kh)*k+kw][ho*Wout+wo] = x[ci][ho*s-p+kh][wo*s-p+kw] (0 outside).
void im2col(const double* x, const ConvDims& d, int stride, int padding, double* col) {
    for (std::int64_t ci = 0; ci < d.c_in; ++ci) {
        for (std::int64_t kh = 0; kh < d.k; ++kh) {
            for (std::int64_t kw = 0; kw < d.k; ++kw) {
                double* row = col + ((ci * d.k + kh) * d.k + kw) * d.out_px;
                for (std::int64_t ho = 0; ho < d.h_out; ++ho) {
                    const std::int64_t hi = ho * stride - padding + kh;
                    double* dst = row + ho * d.w_out;
                    if (hi < 0 || hi >= d.h) {
                        std::fill(dst, dst + d.w_out, 0.0);
                        continue;
                    }
                    const double* src = x + (ci * d.h + hi) * d.w;
                    for (std::int64_t wo = 0; wo < d.w_out; ++wo) {
                        const std::int64_t wi = wo * stride - padding + kw;
                        dst[wo] = (wi >= 0 && wi < d.w) ? src[wi] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_acc(const double* col, const ConvDims& d, int stride, int padding, double* dx) {
    for (std::int64_t ci = 0; ci < d.c_in; ++ci) {
        for (std::int64_t kh = 0; kh < d.k; ++kh) {
            for (std::int64_t kw = 0; kw < d.k; ++kw) {
                const double* row = col + ((ci * d.k + kh) * d.k + kw) * d.out_px;
                for (std::int64_t ho = 0; ho < d.h_out; ++ho) {
                    const std::int64_t hi = ho * stride - padding + kh;
                    if (hi < 0 || hi >= d.h) {
                        continue;
                    }
                    double* dst = dx + (ci * d.h + hi) * d.w;
                    const double* src = row + ho * d.w_out;
                    for (std::int64_t wo = 0; wo < d.w_out; ++wo) {
                        const std::int64_t wi = wo * stride - padding + kw;
                        if (wi >= 0 && wi < d.w) {
                            dst[wi] += src[wo];
                        }
                    }
                }
            }
        }
    }
}

bool recording(const TensorPtr& a) { return g_grad_enabled && a->requires_grad; }
bool recording(const TensorPtr& a, const TensorPtr& b) {
    return g_grad_enabled && (a->requires_grad || b->requires_grad);
}

TensorPtr make_out(std::vector<std::int64_t> shape, std::vector<double> data, bool rec) {
    return std::make_shared<Tensor>(std::move(shape), std::move(data), rec);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape) {
        throw ConfigError(std::string(op) + ": shape mismatch");
    }
}

} // namespace

std::int64_t numel_of(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (const std::int64_t d : shape) {
        if (d < 0) {
            throw ConfigError("negative dimension in tensor shape");
        }
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<std::int64_t> s, std::vector<double> d, bool req_grad)
    : shape(std::move(s)), data(std::move(d)), requires_grad(req_grad) {
    if (numel_of(shape) != static_cast<std::int64_t>(data.size())) {
        throw ConfigError("tensor data length does not match shape");
    }
    g_alloc_elements += static_cast<std::int64_t>(data.size());
}

double Tensor::item() const {
    if (data.size() != 1) {
        throw NumericError("item() requires a scalar tensor");
    }
    return data[0];
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) {
        grad.assign(data.size(), 0.0);
    }
}

void Tensor::zero_grad() {
    std::fill(grad.begin(), grad.end(), 0.0);
}

void Tensor::accumulate_grad(const double* g, std::int64_t n) {
    if (!requires_grad) {
        return;
    }
    if (n != numel()) {
        throw NumericError("gradient size mismatch");
    }
    ensure_grad();
    for (std::int64_t i = 0; i < n; ++i) {
        grad[static_cast<std::size_t>(i)] += g[i];
    }
}

void Tensor::backward() {
    if (numel() != 1) {
        throw NumericError("backward() requires a scalar loss");
    }
    ensure_grad();
    grad[0] += 1.0;

    // Post-order DFS (iterative), then replay reversed: each node runs after
    // all of its consumers. The order vector holds shared ownership so that
    // releasing graph edges below cannot free a node that is still pending.
    std::vector<TensorPtr> order;
    std::unordered_set<Tensor*> visited;
    std::vector<std::pair<TensorPtr, std::size_t>> stack;
    stack.emplace_back(shared_from_this(), 0);
    visited.insert(this);
    while (!stack.empty()) {
        auto& top = stack.back();
        if (top.second < top.first->parents.size()) {
            TensorPtr p = top.first->parents[top.second];
            ++top.second;
            if (visited.insert(p.get()).second) {
                stack.emplace_back(std::move(p), 0);
            }
        } else {
            order.push_back(std::move(top.first));
            stack.pop_back();
        }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor* node = it->get();
        if (node->backward_fn && !node->grad.empty()) {
            node->backward_fn(*node);
        }
        // Release graph edges as we go; a second backward is not supported.
        node->backward_fn = nullptr;
        node->parents.clear();
    }
}

TensorPtr Tensor::zeros(const std::vector<std::int64_t>& shape, bool requires_grad) {
    return std::make_shared<Tensor>(shape, std::vector<double>(static_cast<std::size_t>(numel_of(shape)), 0.0),
                                    requires_grad);
}

TensorPtr Tensor::full(const std::vector<std::int64_t>& shape, double value, bool requires_grad) {
    return std::make_shared<Tensor>(shape, std::vector<double>(static_cast<std::size_t>(numel_of(shape)), value),
                                    requires_grad);
}

TensorPtr Tensor::from_data(const std::vector<std::int64_t>& shape, std::vector<double> values, bool requires_grad) {
    return std::make_shared<Tensor>(shape, std::move(values), requires_grad);
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
    return std::make_shared<Tensor>(std::vector<std::int64_t>{}, std::vector<double>{value}, requires_grad);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

std::int64_t tensor_alloc_elements() { return g_alloc_elements; }
void reset_tensor_alloc_counter() { g_alloc_elements = 0; }

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(*a, *b, "add");
    std::vector<double> d(a->data.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = a->data[i] + b->data[i];
    }
    const bool rec = recording(a, b);
    auto out = make_out(a->shape, std::move(d), rec);
    if (rec) {
        out->parents = {a, b};
        out->backward_fn = [a, b](Tensor& o) {
            a->accumulate_grad(o.grad.data(), o.numel());
            b->accumulate_grad(o.grad.data(), o.numel());
        };
    }
    return out;
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(*a, *b, "sub");
    std::vector<double> d(a->data.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = a->data[i] - b->data[i];
    }
    const bool rec = recording(a, b);
    auto out = make_out(a->shape, std::move(d), rec);
    if (rec) {
        out->parents = {a, b};
        out->backward_fn = [a, b](Tensor& o) {
            a->accumulate_grad(o.grad.data(), o.numel());
            if (b->requires_grad) {
                std::vector<double> gb(o.grad.size());
                for (std::size_t i = 0; i < gb.size(); ++i) {
                    gb[i] = -o.grad[i];
                }
                b->accumulate_grad(gb.data(), o.numel());
            }
        };
    }
    return out;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(*a, *b, "mul");
    std::vector<double> d(a->data.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = a->data[i] * b->data[i];
    }
    const bool rec = recording(a, b);
    auto out = make_out(a->shape, std::move(d), rec);
    if (rec) {
        out->parents = {a, b};
        out->backward_fn = [a, b](Tensor& o) {
            const std::size_t n = o.grad.size();
            if (a->requires_grad) {
                std::vector<double> ga(n);
                for (std::size_t i = 0; i < n; ++i) {
                    ga[i] = b->data[i] * o.grad[i];
                }
                a->accumulate_grad(ga.data(), o.numel());
            }
            if (b->requires_grad) {
                std::vector<double> gb(n);
                for (std::size_t i = 0; i < n; ++i) {
                    gb[i] = a->data[i] * o.grad[i];
                }
                b->accumulate_grad(gb.data(), o.numel());
            }
        };
    }
    return out;
}

TensorPtr scale(const TensorPtr& a, double c) {
    std::vector<double> d(a->data.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = c * a->data[i];
    }
    const bool rec = recording(a);
    auto out = make_out(a->shape, std::move(d), rec);
    if (rec) {
        out->parents = {a};
        out->backward_fn = [a, c](Tensor& o) {
            std::vector<double> ga(o.grad.size());
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] = c * o.grad[i];
            }
            a->accumulate_grad(ga.data(), o.numel());
        };
    }
    return out;
}

TensorPtr sum_all(const TensorPtr& a) {
    double s = 0.0;
    for (const double v : a->data) {
        s += v;
    }
    const bool rec = recording(a);
    auto out = make_out({}, {s}, rec);
    if (rec) {
        out->parents = {a};
        out->backward_fn = [a](Tensor& o) {
            std::vector<double> ga(a->data.size(), o.grad[0]);
            a->accumulate_grad(ga.data(), a->numel());
        };
    }
    return out;
}

TensorPtr mean_all(const TensorPtr& a) {
    if (a->data.empty()) {
        throw ConfigError("mean_all on empty tensor");
    }
    return scale(sum_all(a), 1.0 / static_cast<double>(a->data.size()));
}

TensorPtr relu(const TensorPtr& a) {
    std::vector<double> d(a->data.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = a->data[i] > 0.0 ? a->data[i] : 0.0;
    }
    const bool rec = recording(a);
    auto out = make_out(a->shape, std::move(d), rec);
    if (rec) {
        out->parents = {a};
        out->backward_fn = [a](Tensor& o) {
            std::vector<double> ga(o.grad.size());
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] = a->data[i] > 0.0 ? o.grad[i] : 0.0;
            }
            a->accumulate_grad(ga.data(), o.numel());
        };
    }
    return out;
}

TensorPtr reshape(const TensorPtr& a, const std::vector<std::int64_t>& new_shape) {
    if (numel_of(new_shape) != a->numel()) {
        throw ConfigError("reshape: element count mismatch");
    }
    const bool rec = recording(a);
    auto out = make_out(new_shape, a->data, rec);
    if (rec) {
        out->parents = {a};
        out->backward_fn = [a](Tensor& o) { a->accumulate_grad(o.grad.data(), o.numel()); };
    }
    return out;
}

TensorPtr stop_gradient(const TensorPtr& a) {
    // Forward identity, backward leaf: not recorded, never requires grad.
    return make_out(a->shape, a->data, false);
}

TensorPtr conv2d(const TensorPtr& input, const TensorPtr& weight, const TensorPtr& bias, int stride, int padding) {
    const ConvDims d = conv_dims(*input, *weight, stride, padding);
    if (bias->shape != std::vector<std::int64_t>{d.c_out}) {
        throw ConfigError("conv2d bias must have shape [Cout]");
    }

    std::vector<double> out_data(static_cast<std::size_t>(d.batch * d.c_out * d.out_px));
    if (g_col_buf.size() < static_cast<std::size_t>(d.patch * d.out_px)) {
        g_col_buf.resize(static_cast<std::size_t>(d.patch * d.out_px));
    }
    for (std::int64_t n = 0; n < d.batch; ++n) {
        const double* xn = input->data.data() + n * d.c_in * d.h * d.w;
        double* on = out_data.data() + n * d.c_out * d.out_px;
        im2col(xn, d, stride, padding, g_col_buf.data());
        for (std::int64_t co = 0; co < d.c_out; ++co) {
            std::fill(on + co * d.out_px, on + (co + 1) * d.out_px, bias->data[static_cast<std::size_t>(co)]);
        }
        gemm_acc(weight->data.data(), g_col_buf.data(), on, d.c_out, d.patch, d.out_px);
    }

    const bool rec = g_grad_enabled && (input->requires_grad || weight->requires_grad || bias->requires_grad);
    auto out = make_out({d.batch, d.c_out, d.h_out, d.w_out}, std::move(out_data), rec);
    if (rec) {
        out->parents = {input, weight, bias};
        out->backward_fn = [input, weight, bias, d, stride, padding](Tensor& o) {
            const std::size_t col_sz = static_cast<std::size_t>(d.patch * d.out_px);
            if (g_col_buf.size() < col_sz) {
                g_col_buf.resize(col_sz);
            }
            std::vector<double> dw(weight->requires_grad ? weight->data.size() : 0, 0.0);
            std::vector<double> dx(input->requires_grad ? input->data.size() : 0, 0.0);
            std::vector<double> db(bias->requires_grad ? bias->data.size() : 0, 0.0);
            for (std::int64_t n = 0; n < d.batch; ++n) {
                const double* go = o.grad.data() + n * d.c_out * d.out_px;
                if (weight->requires_grad || input->requires_grad) {
                    // col is recomputed instead of cached across steps.
                    im2col(input->data.data() + n * d.c_in * d.h * d.w, d, stride, padding, g_col_buf.data());
                }
                if (weight->requires_grad) {
                    gemm_abt_acc(go, g_col_buf.data(), dw.data(), d.c_out, d.out_px, d.patch);
                }
                if (input->requires_grad) {
                    if (g_dcol_buf.size() < col_sz) {
                        g_dcol_buf.resize(col_sz);
                    }
                    std::fill(g_dcol_buf.begin(), g_dcol_buf.begin() + static_cast<std::int64_t>(col_sz), 0.0);
                    gemm_atb_acc(weight->data.data(), go, g_dcol_buf.data(), d.c_out, d.patch, d.out_px);
                    col2im_acc(g_dcol_buf.data(), d, stride, padding, dx.data() + n * d.c_in * d.h * d.w);
                }
                if (bias->requires_grad) {
                    for (std::int64_t co = 0; co < d.c_out; ++co) {
                        double s = 0.0;
                        const double* row = go + co * d.out_px;
                        for (std::int64_t p = 0; p < d.out_px; ++p) {
                            s += row[p];
                        }
                        db[static_cast<std::size_t>(co)] += s;
                    }
                }
            }
            if (weight->requires_grad) {
                weight->accumulate_grad(dw.data(), weight->numel());
            }
            if (input->requires_grad) {
                input->accumulate_grad(dx.data(), input->numel());
            }
            if (bias->requires_grad) {
                bias->accumulate_grad(db.data(), bias->numel());
            }
        };
    }
    return out;
}

TensorPtr fully_connected(const TensorPtr& input, const TensorPtr& weight, const TensorPtr& bias) {
    if (input->shape.size() != 2 || weight->shape.size() != 2) {
        throw ConfigError("fully_connected expects input [B,N] and weight [M,N]");
    }
    const std::int64_t batch = input->shape[0];
    const std::int64_t n_in = input->shape[1];
    const std::int64_t m_out = weight->shape[0];
    if (weight->shape[1] != n_in || bias->shape != std::vector<std::int64_t>{m_out}) {
        throw ConfigError("fully_connected weight/bias shapes do not match input");
    }

    std::vector<double> out_data(static_cast<std::size_t>(batch * m_out));
    for (std::int64_t b = 0; b < batch; ++b) {
        for (std::int64_t m = 0; m < m_out; ++m) {
            out_data[static_cast<std::size_t>(b * m_out + m)] = bias->data[static_cast<std::size_t>(m)];
        }
    }
    gemm_abt_acc(input->data.data(), weight->data.data(), out_data.data(), batch, n_in, m_out);

    const bool rec = g_grad_enabled && (input->requires_grad || weight->requires_grad || bias->requires_grad);
    auto out = make_out({batch, m_out}, std::move(out_data), rec);
    if (rec) {
        out->parents = {input, weight, bias};
        out->backward_fn = [input, weight, bias, batch, n_in, m_out](Tensor& o) {
            if (input->requires_grad) {
                std::vector<double> dx(input->data.size(), 0.0);
                gemm_acc(o.grad.data(), weight->data.data(), dx.data(), batch, m_out, n_in);
                input->accumulate_grad(dx.data(), input->numel());
            }
            if (weight->requires_grad) {
                std::vector<double> dw(weight->data.size(), 0.0);
                gemm_atb_acc(o.grad.data(), input->data.data(), dw.data(), batch, m_out, n_in);
                weight->accumulate_grad(dw.data(), weight->numel());
            }
            if (bias->requires_grad) {
                std::vector<double> db(bias->data.size(), 0.0);
                for (std::int64_t b = 0; b < batch; ++b) {
                    for (std::int64_t m = 0; m < m_out; ++m) {
                        db[static_cast<std::size_t>(m)] += o.grad[static_cast<std::size_t>(b * m_out + m)];
                    }
                }
                bias->accumulate_grad(db.data(), bias->numel());
            }
        };
    }
    return out;
}

TensorPtr upsample_nearest2x(const TensorPtr& input) {
    if (input->shape.size() != 4) {
        throw ConfigError("upsample_nearest2x expects [B,C,H,W]");
    }
    const std::int64_t batch = input->shape[0], ch = input->shape[1], h = input->shape[2], w = input->shape[3];
    std::vector<double> d(static_cast<std::size_t>(batch * ch * 4 * h * w));
    const std::int64_t w2 = 2 * w;
    for (std::int64_t bc = 0; bc < batch * ch; ++bc) {
        const double* src = input->data.data() + bc * h * w;
        double* dst = d.data() + bc * 4 * h * w;
        for (std::int64_t r = 0; r < h; ++r) {
            double* row0 = dst + (2 * r) * w2;
            double* row1 = dst + (2 * r + 1) * w2;
            for (std::int64_t c = 0; c < w; ++c) {
                const double v = src[r * w + c];
                row0[2 * c] = v;
                row0[2 * c + 1] = v;
                row1[2 * c] = v;
                row1[2 * c + 1] = v;
            }
        }
    }
    const bool rec = recording(input);
    auto out = make_out({batch, ch, 2 * h, 2 * w}, std::move(d), rec);
    if (rec) {
        out->parents = {input};
        out->backward_fn = [input, batch, ch, h, w, w2](Tensor& o) {
            std::vector<double> gi(input->data.size());
            for (std::int64_t bc = 0; bc < batch * ch; ++bc) {
                const double* g = o.grad.data() + bc * 4 * h * w;
                double* dst = gi.data() + bc * h * w;
                for (std::int64_t r = 0; r < h; ++r) {
                    const double* row0 = g + (2 * r) * w2;
                    const double* row1 = g + (2 * r + 1) * w2;
                    for (std::int64_t c = 0; c < w; ++c) {
                        dst[r * w + c] = row0[2 * c] + row0[2 * c + 1] + row1[2 * c] + row1[2 * c + 1];
                    }
                }
            }
            input->accumulate_grad(gi.data(), input->numel());
        };
    }
    return out;
}

TensorPtr avg_pool2x2(const TensorPtr& input) {
    if (input->shape.size() != 4 || input->shape[2] % 2 != 0 || input->shape[3] % 2 != 0) {
        throw ConfigError("avg_pool2x2 expects [B,C,H,W] with even H and W");
    }
    const std::int64_t batch = input->shape[0], ch = input->shape[1], h = input->shape[2] / 2,
                       w = input->shape[3] / 2;
    const std::int64_t w2 = 2 * w;
    std::vector<double> d(static_cast<std::size_t>(batch * ch * h * w));
    for (std::int64_t bc = 0; bc < batch * ch; ++bc) {
        const double* src = input->data.data() + bc * 4 * h * w;
        double* dst = d.data() + bc * h * w;
        for (std::int64_t r = 0; r < h; ++r) {
            const double* row0 = src + (2 * r) * w2;
            const double* row1 = src + (2 * r + 1) * w2;
            for (std::int64_t c = 0; c < w; ++c) {
                dst[r * w + c] = 0.25 * (row0[2 * c] + row0[2 * c + 1] + row1[2 * c] + row1[2 * c + 1]);
            }
        }
    }
    const bool rec = recording(input);
    auto out = make_out({batch, ch, h, w}, std::move(d), rec);
    if (rec) {
        out->parents = {input};
        out->backward_fn = [input, batch, ch, h, w, w2](Tensor& o) {
            std::vector<double> gi(input->data.size());
            for (std::int64_t bc = 0; bc < batch * ch; ++bc) {
                const double* g = o.grad.data() + bc * h * w;
                double* dst = gi.data() + bc * 4 * h * w;
                for (std::int64_t r = 0; r < h; ++r) {
                    double* row0 = dst + (2 * r) * w2;
                    double* row1 = dst + (2 * r + 1) * w2;
                    for (std::int64_t c = 0; c < w; ++c) {
                        const double v = 0.25 * g[r * w + c];
                        row0[2 * c] = v;
                        row0[2 * c + 1] = v;
                        row1[2 * c] = v;
                        row1[2 * c + 1] = v;
                    }
                }
            }
            input->accumulate_grad(gi.data(), input->numel());
        };
    }
    return out;
}

TensorPtr global_avg_pool(const TensorPtr& input) {
    if (input->shape.size() != 4) {
        throw ConfigError("global_avg_pool expects [B,C,H,W]");
    }
    const std::int64_t batch = input->shape[0], ch = input->shape[1];
    const std::int64_t px = input->shape[2] * input->shape[3];
    std::vector<double> d(static_cast<std::size_t>(batch * ch));
    for (std::int64_t bc = 0; bc < batch * ch; ++bc) {
        const double* src = input->data.data() + bc * px;
        double s = 0.0;
        for (std::int64_t i = 0; i < px; ++i) {
            s += src[i];
        }
        d[static_cast<std::size_t>(bc)] = s / static_cast<double>(px);
    }
    const bool rec = recording(input);
    auto out = make_out({batch, ch}, std::move(d), rec);
    if (rec) {
        out->parents = {input};
        out->backward_fn = [input, batch, ch, px](Tensor& o) {
            std::vector<double> gi(input->data.size());
            const double inv = 1.0 / static_cast<double>(px);
            for (std::int64_t bc = 0; bc < batch * ch; ++bc) {
                const double g = o.grad[static_cast<std::size_t>(bc)] * inv;
                double* dst = gi.data() + bc * px;
                for (std::int64_t i = 0; i < px; ++i) {
                    dst[i] = g;
                }
            }
            input->accumulate_grad(gi.data(), input->numel());
        };
    }
    return out;
}

TensorPtr concat_channels(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape.size() != 4 || b->shape.size() != 4 || a->shape[0] != b->shape[0] || a->shape[2] != b->shape[2] ||
        a->shape[3] != b->shape[3]) {
        throw ConfigError("concat_channels: batch/spatial shapes must match");
    }
    const std::int64_t batch = a->shape[0], ca = a->shape[1], cb = b->shape[1];
    const std::int64_t px = a->shape[2] * a->shape[3];
    std::vector<double> d(static_cast<std::size_t>(batch * (ca + cb) * px));
    for (std::int64_t n = 0; n < batch; ++n) {
        std::copy(a->data.begin() + n * ca * px, a->data.begin() + (n + 1) * ca * px,
                  d.begin() + n * (ca + cb) * px);
        std::copy(b->data.begin() + n * cb * px, b->data.begin() + (n + 1) * cb * px,
                  d.begin() + n * (ca + cb) * px + ca * px);
    }
    const bool rec = recording(a, b);
    auto out = make_out({batch, ca + cb, a->shape[2], a->shape[3]}, std::move(d), rec);
    if (rec) {
        out->parents = {a, b};
        out->backward_fn = [a, b, batch, ca, cb, px](Tensor& o) {
            if (a->requires_grad) {
                std::vector<double> ga(a->data.size());
                for (std::int64_t n = 0; n < batch; ++n) {
                    std::copy(o.grad.begin() + n * (ca + cb) * px, o.grad.begin() + n * (ca + cb) * px + ca * px,
                              ga.begin() + n * ca * px);
                }
                a->accumulate_grad(ga.data(), a->numel());
            }
            if (b->requires_grad) {
                std::vector<double> gb(b->data.size());
                for (std::int64_t n = 0; n < batch; ++n) {
                    std::copy(o.grad.begin() + n * (ca + cb) * px + ca * px,
                              o.grad.begin() + (n + 1) * (ca + cb) * px, gb.begin() + n * cb * px);
                }
                b->accumulate_grad(gb.data(), b->numel());
            }
        };
    }
    return out;
}

TensorPtr slice_channels(const TensorPtr& x, std::int64_t begin, std::int64_t end) {
    if (x->shape.size() != 4 || begin < 0 || end > x->shape[1] || begin >= end) {
        throw ConfigError("slice_channels: invalid channel range");
    }
    const std::int64_t batch = x->shape[0], ch = x->shape[1];
    const std::int64_t px = x->shape[2] * x->shape[3];
    const std::int64_t out_ch = end - begin;
    std::vector<double> d(static_cast<std::size_t>(batch * out_ch * px));
    for (std::int64_t n = 0; n < batch; ++n) {
        std::copy(x->data.begin() + (n * ch + begin) * px, x->data.begin() + (n * ch + end) * px,
                  d.begin() + n * out_ch * px);
    }
    const bool rec = recording(x);
    auto out = make_out({batch, out_ch, x->shape[2], x->shape[3]}, std::move(d), rec);
    if (rec) {
        out->parents = {x};
        out->backward_fn = [x, batch, ch, px, begin, out_ch](Tensor& o) {
            std::vector<double> gx(x->data.size(), 0.0);
            for (std::int64_t n = 0; n < batch; ++n) {
                std::copy(o.grad.begin() + n * out_ch * px, o.grad.begin() + (n + 1) * out_ch * px,
                          gx.begin() + (n * ch + begin) * px);
            }
            x->accumulate_grad(gx.data(), x->numel());
        };
    }
    return out;
}

TensorPtr elementwise_mul_broadcast(const TensorPtr& features, const TensorPtr& map) {
    if (features->shape.size() != 4 || map->shape.size() != 4 || map->shape[1] != 1 ||
        features->shape[0] != map->shape[0] || features->shape[2] != map->shape[2] ||
        features->shape[3] != map->shape[3]) {
        throw ConfigError("elementwise_mul_broadcast expects features [B,C,H,W] and map [B,1,H,W]");
    }
    const std::int64_t batch = features->shape[0], ch = features->shape[1];
    const std::int64_t px = features->shape[2] * features->shape[3];
    std::vector<double> d(features->data.size());
    for (std::int64_t n = 0; n < batch; ++n) {
        const double* m = map->data.data() + n * px;
        for (std::int64_t c = 0; c < ch; ++c) {
            const double* f = features->data.data() + (n * ch + c) * px;
            double* dst = d.data() + (n * ch + c) * px;
            for (std::int64_t i = 0; i < px; ++i) {
                dst[i] = f[i] * m[i];
            }
        }
    }
    const bool rec = recording(features, map);
    auto out = make_out(features->shape, std::move(d), rec);
    if (rec) {
        out->parents = {features, map};
        out->backward_fn = [features, map, batch, ch, px](Tensor& o) {
            if (features->requires_grad) {
                std::vector<double> gf(features->data.size());
                for (std::int64_t n = 0; n < batch; ++n) {
                    const double* m = map->data.data() + n * px;
                    for (std::int64_t c = 0; c < ch; ++c) {
                        const double* g = o.grad.data() + (n * ch + c) * px;
                        double* dst = gf.data() + (n * ch + c) * px;
                        for (std::int64_t i = 0; i < px; ++i) {
                            dst[i] = g[i] * m[i];
                        }
                    }
                }
                features->accumulate_grad(gf.data(), features->numel());
            }
            if (map->requires_grad) {
                std::vector<double> gm(map->data.size(), 0.0);
                for (std::int64_t n = 0; n < batch; ++n) {
                    double* dst = gm.data() + n * px;
                    for (std::int64_t c = 0; c < ch; ++c) {
                        const double* g = o.grad.data() + (n * ch + c) * px;
                        const double* f = features->data.data() + (n * ch + c) * px;
                        for (std::int64_t i = 0; i < px; ++i) {
                            dst[i] += g[i] * f[i];
                        }
                    }
                }
                map->accumulate_grad(gm.data(), map->numel());
            }
        };
    }
    return out;
}

TensorPtr write_block(const TensorPtr& bank, const TensorPtr& block, std::int64_t row0, std::int64_t col0) {
    if (bank->shape.size() != 4 || block->shape.size() != 4 || bank->shape[0] != block->shape[0] ||
        bank->shape[1] != block->shape[1]) {
        throw ConfigError("write_block: bank and block must share batch and channels");
    }
    const std::int64_t batch = bank->shape[0], ch = bank->shape[1];
    const std::int64_t bank_h = bank->shape[2], bank_w = bank->shape[3];
    const std::int64_t blk_h = block->shape[2], blk_w = block->shape[3];
    if (row0 < 0 || col0 < 0 || row0 + blk_h > bank_h || col0 + blk_w > bank_w) {
        throw std::logic_error("write_block: block offset out of range");
    }
    std::vector<double> d = bank->data;
    for (std::int64_t nc = 0; nc < batch * ch; ++nc) {
        const double* src = block->data.data() + nc * blk_h * blk_w;
        double* dst = d.data() + nc * bank_h * bank_w;
        for (std::int64_t r = 0; r < blk_h; ++r) {
            std::copy(src + r * blk_w, src + (r + 1) * blk_w, dst + (row0 + r) * bank_w + col0);
        }
    }
    const bool rec = recording(bank, block);
    auto out = make_out(bank->shape, std::move(d), rec);
    if (rec) {
        out->parents = {bank, block};
        out->backward_fn = [bank, block, batch, ch, bank_h, bank_w, blk_h, blk_w, row0, col0](Tensor& o) {
            if (block->requires_grad) {
                std::vector<double> gb(block->data.size());
                for (std::int64_t nc = 0; nc < batch * ch; ++nc) {
                    const double* g = o.grad.data() + nc * bank_h * bank_w;
                    double* dst = gb.data() + nc * blk_h * blk_w;
                    for (std::int64_t r = 0; r < blk_h; ++r) {
                        std::copy(g + (row0 + r) * bank_w + col0, g + (row0 + r) * bank_w + col0 + blk_w,
                                  dst + r * blk_w);
                    }
                }
                block->accumulate_grad(gb.data(), block->numel());
            }
            if (bank->requires_grad) {
                std::vector<double> ga = o.grad;
                for (std::int64_t nc = 0; nc < batch * ch; ++nc) {
                    double* g = ga.data() + nc * bank_h * bank_w;
                    for (std::int64_t r = 0; r < blk_h; ++r) {
                        std::fill(g + (row0 + r) * bank_w + col0, g + (row0 + r) * bank_w + col0 + blk_w, 0.0);
                    }
                }
                bank->accumulate_grad(ga.data(), bank->numel());
            }
        };
    }
    return out;
}

std::vector<double> read_block(const Tensor& bank, std::int64_t channels, std::int64_t row0, std::int64_t col0,
                               std::int64_t rows, std::int64_t cols) {
    const std::int64_t bank_h = bank.shape[2], bank_w = bank.shape[3];
    std::vector<double> out(static_cast<std::size_t>(bank.shape[0] * channels * rows * cols));
    for (std::int64_t nc = 0; nc < bank.shape[0] * channels; ++nc) {
        const double* src = bank.data.data() + nc * bank_h * bank_w;
        double* dst = out.data() + nc * rows * cols;
        for (std::int64_t r = 0; r < rows; ++r) {
            std::copy(src + (row0 + r) * bank_w + col0, src + (row0 + r) * bank_w + col0 + cols, dst + r * cols);
        }
    }
    return out;
}

TensorPtr cosine_similarity(const TensorPtr& a, const TensorPtr& b) {
    if (a->numel() != b->numel()) {
        throw ConfigError("cosine_similarity: operand lengths differ");
    }
    const std::int64_t n = a->numel();
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double av = a->data[static_cast<std::size_t>(i)];
        const double bv = b->data[static_cast<std::size_t>(i)];
        dot += av * bv;
        na2 += av * av;
        nb2 += bv * bv;
    }
    const double na = std::sqrt(na2);
    const double nb = std::sqrt(nb2);
    if (na < 1e-12 || nb < 1e-12) {
        std::fprintf(stderr, "warning: cosine_similarity on degenerate (near-zero) features, returning 0\n");
        return Tensor::scalar(0.0, false);
    }
    const double sim = dot / (na * nb);
    const bool rec = recording(a, b);
    auto out = make_out({}, {sim}, rec);
    if (rec) {
        out->parents = {a, b};
        out->backward_fn = [a, b, n, na, nb, sim](Tensor& o) {
            const double g = o.grad[0];
            if (a->requires_grad) {
                std::vector<double> ga(static_cast<std::size_t>(n));
                const double inv = 1.0 / (na * nb);
                const double ca = sim / (na * na);
                for (std::int64_t i = 0; i < n; ++i) {
                    ga[static_cast<std::size_t>(i)] =
                        g * (b->data[static_cast<std::size_t>(i)] * inv - ca * a->data[static_cast<std::size_t>(i)]);
                }
                a->accumulate_grad(ga.data(), n);
            }
            if (b->requires_grad) {
                std::vector<double> gb(static_cast<std::size_t>(n));
                const double inv = 1.0 / (na * nb);
                const double cb = sim / (nb * nb);
                for (std::int64_t i = 0; i < n; ++i) {
                    gb[static_cast<std::size_t>(i)] =
                        g * (a->data[static_cast<std::size_t>(i)] * inv - cb * b->data[static_cast<std::size_t>(i)]);
                }
                b->accumulate_grad(gb.data(), n);
            }
        };
    }
    return out;
}

TensorPtr mse_loss(const TensorPtr& pred, const TensorPtr& target) {
    check_same_shape(*pred, *target, "mse_loss");
    const std::int64_t n = pred->numel();
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double diff = pred->data[static_cast<std::size_t>(i)] - target->data[static_cast<std::size_t>(i)];
        s += diff * diff;
    }
    const double loss = s / static_cast<double>(n);
    const bool rec = recording(pred, target);
    auto out = make_out({}, {loss}, rec);
    if (rec) {
        out->parents = {pred, target};
        out->backward_fn = [pred, target, n](Tensor& o) {
            const double g = o.grad[0] * 2.0 / static_cast<double>(n);
            if (pred->requires_grad) {
                std::vector<double> gp(static_cast<std::size_t>(n));
                for (std::int64_t i = 0; i < n; ++i) {
                    gp[static_cast<std::size_t>(i)] =
                        g * (pred->data[static_cast<std::size_t>(i)] - target->data[static_cast<std::size_t>(i)]);
                }
                pred->accumulate_grad(gp.data(), n);
            }
            if (target->requires_grad) {
                std::vector<double> gt(static_cast<std::size_t>(n));
                for (std::int64_t i = 0; i < n; ++i) {
                    gt[static_cast<std::size_t>(i)] =
                        g * (target->data[static_cast<std::size_t>(i)] - pred->data[static_cast<std::size_t>(i)]);
                }
                target->accumulate_grad(gt.data(), n);
            }
        };
    }
    return out;
}

namespace {

// Shared stable-softmax CE over rows of length K laid out with stride 1
// (logits gathered per row by the callers).
double ce_row(const double* z, std::int64_t k, std::int64_t target, double* probs) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::int64_t c = 0; c < k; ++c) {
        m = std::max(m, z[c]);
    }
    double sum = 0.0;
    for (std::int64_t c = 0; c < k; ++c) {
        probs[c] = std::exp(z[c] - m);
        sum += probs[c];
    }
    const double inv = 1.0 / sum;
    for (std::int64_t c = 0; c < k; ++c) {
        probs[c] *= inv;
    }
    return std::log(sum) + m - z[target];
}

} // namespace

TensorPtr softmax_cross_entropy(const TensorPtr& logits, const std::vector<std::int64_t>& targets) {
    if (logits->shape.size() != 2) {
        throw ConfigError("softmax_cross_entropy expects logits [B,K]");
    }
    const std::int64_t batch = logits->shape[0], k = logits->shape[1];
    if (static_cast<std::int64_t>(targets.size()) != batch) {
        throw DataError("softmax_cross_entropy: targets length must equal batch");
    }
    std::vector<double> probs(static_cast<std::size_t>(batch * k));
    double loss = 0.0;
    for (std::int64_t b = 0; b < batch; ++b) {
        const std::int64_t t = targets[static_cast<std::size_t>(b)];
        if (t < 0 || t >= k) {
            throw DataError("softmax_cross_entropy: target class out of range");
        }
        loss += ce_row(logits->data.data() + b * k, k, t, probs.data() + b * k);
    }
    loss /= static_cast<double>(batch);
    const bool rec = recording(logits);
    auto out = make_out({}, {loss}, rec);
    if (rec) {
        out->parents = {logits};
        out->backward_fn = [logits, targets, batch, k, probs = std::move(probs)](Tensor& o) {
            const double g = o.grad[0] / static_cast<double>(batch);
            std::vector<double> gl(logits->data.size());
            for (std::int64_t b = 0; b < batch; ++b) {
                const std::int64_t t = targets[static_cast<std::size_t>(b)];
                for (std::int64_t c = 0; c < k; ++c) {
                    const double y = (c == t) ? 1.0 : 0.0;
                    gl[static_cast<std::size_t>(b * k + c)] = g * (probs[static_cast<std::size_t>(b * k + c)] - y);
                }
            }
            logits->accumulate_grad(gl.data(), logits->numel());
        };
    }
    return out;
}

TensorPtr softmax_cross_entropy_spatial(const TensorPtr& logits, const std::vector<std::int64_t>& targets) {
    if (logits->shape.size() != 4) {
        throw ConfigError("softmax_cross_entropy_spatial expects logits [B,K,H,W]");
    }
    const std::int64_t batch = logits->shape[0], k = logits->shape[1];
    const std::int64_t px = logits->shape[2] * logits->shape[3];
    if (static_cast<std::int64_t>(targets.size()) != batch * px) {
        throw DataError("softmax_cross_entropy_spatial: targets length must equal B*H*W");
    }
    // probs stored [B,K,H,W] alongside the logits layout.
    std::vector<double> probs(logits->data.size());
    std::vector<double> row(static_cast<std::size_t>(k));
    std::vector<double> prow(static_cast<std::size_t>(k));
    double loss = 0.0;
    for (std::int64_t b = 0; b < batch; ++b) {
        const double* zb = logits->data.data() + b * k * px;
        double* pb = probs.data() + b * k * px;
        for (std::int64_t i = 0; i < px; ++i) {
            const std::int64_t t = targets[static_cast<std::size_t>(b * px + i)];
            if (t < 0 || t >= k) {
                throw DataError("softmax_cross_entropy_spatial: label out of range");
            }
            for (std::int64_t c = 0; c < k; ++c) {
                row[static_cast<std::size_t>(c)] = zb[c * px + i];
            }
            loss += ce_row(row.data(), k, t, prow.data());
            for (std::int64_t c = 0; c < k; ++c) {
                pb[c * px + i] = prow[static_cast<std::size_t>(c)];
            }
        }
    }
    loss /= static_cast<double>(batch * px);
    const bool rec = recording(logits);
    auto out = make_out({}, {loss}, rec);
    if (rec) {
        out->parents = {logits};
        out->backward_fn = [logits, targets, batch, k, px, probs = std::move(probs)](Tensor& o) {
            const double g = o.grad[0] / static_cast<double>(batch * px);
            std::vector<double> gl(logits->data.size());
            for (std::int64_t b = 0; b < batch; ++b) {
                const double* pb = probs.data() + b * k * px;
                double* gb = gl.data() + b * k * px;
                for (std::int64_t i = 0; i < px; ++i) {
                    const std::int64_t t = targets[static_cast<std::size_t>(b * px + i)];
                    for (std::int64_t c = 0; c < k; ++c) {
                        const double y = (c == t) ? 1.0 : 0.0;
                        gb[c * px + i] = g * (pb[c * px + i] - y);
                    }
                }
            }
            logits->accumulate_grad(gl.data(), logits->numel());
        };
    }
    return out;
}

} // namespace gae
