#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace gae {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major f64 tensor with reverse-mode autodiff. Ops record a
// backward closure on their output; Tensor::backward() replays the graph in
// reverse topological order, accumulating gradients additively across fan-out.
class Tensor : public std::enable_shared_from_this<Tensor> {
public:
    std::vector<std::int64_t> shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized lazily; same length as data when present
    bool requires_grad = false;

    std::vector<TensorPtr> parents;
    std::function<void(Tensor&)> backward_fn;

    Tensor(std::vector<std::int64_t> s, std::vector<double> d, bool req_grad);

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    std::int64_t dim(std::size_t i) const { return shape.at(i); }
    double item() const;

    void ensure_grad();
    void zero_grad();
    void accumulate_grad(const double* g, std::int64_t n);

    // Reverse pass from this (scalar) tensor; seeds d(this)/d(this) = 1.
    void backward();

    static TensorPtr zeros(const std::vector<std::int64_t>& shape, bool requires_grad = false);
    static TensorPtr full(const std::vector<std::int64_t>& shape, double value, bool requires_grad = false);
    static TensorPtr from_data(const std::vector<std::int64_t>& shape, std::vector<double> values,
                               bool requires_grad = false);
    static TensorPtr scalar(double value, bool requires_grad = false);
};

std::int64_t numel_of(const std::vector<std::int64_t>& shape);

// Thread-local switch: when disabled, ops run forward-only (no graph, no
// requires_grad propagation). Used for evaluation and detached teachers.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Counts elements of every tensor constructed on this thread; reset/read to
// measure the allocation footprint of a forward pass.
std::int64_t tensor_alloc_elements();
void reset_tensor_alloc_counter();

// ---- elementwise / reduction ----
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& a, double c);
TensorPtr sum_all(const TensorPtr& a);
TensorPtr mean_all(const TensorPtr& a);
TensorPtr relu(const TensorPtr& a);
TensorPtr reshape(const TensorPtr& a, const std::vector<std::int64_t>& new_shape);
TensorPtr stop_gradient(const TensorPtr& a);

// ---- neural-net ops ----
TensorPtr conv2d(const TensorPtr& input, const TensorPtr& weight, const TensorPtr& bias,
                 int stride, int padding);
TensorPtr fully_connected(const TensorPtr& input, const TensorPtr& weight, const TensorPtr& bias);
TensorPtr upsample_nearest2x(const TensorPtr& input);
TensorPtr avg_pool2x2(const TensorPtr& input);
TensorPtr global_avg_pool(const TensorPtr& input);
TensorPtr concat_channels(const TensorPtr& a, const TensorPtr& b);
TensorPtr slice_channels(const TensorPtr& x, std::int64_t begin, std::int64_t end);
TensorPtr elementwise_mul_broadcast(const TensorPtr& features, const TensorPtr& map);

// Overwrite a spatial block of `bank` ([B,C,H,W]) with `block` ([B,C,h,w]) at
// offset (row0, col0). Backward routes the block region's gradient to `block`
// and the remainder to `bank` (overwritten entries contribute nothing).
TensorPtr write_block(const TensorPtr& bank, const TensorPtr& block, std::int64_t row0, std::int64_t col0);

// Forward-only block read, for inspection and tests.
std::vector<double> read_block(const Tensor& bank, std::int64_t channels, std::int64_t row0, std::int64_t col0,
                               std::int64_t rows, std::int64_t cols);

// ---- losses ----
TensorPtr cosine_similarity(const TensorPtr& a, const TensorPtr& b);
TensorPtr mse_loss(const TensorPtr& pred, const TensorPtr& target);
TensorPtr softmax_cross_entropy(const TensorPtr& logits, const std::vector<std::int64_t>& targets);
TensorPtr softmax_cross_entropy_spatial(const TensorPtr& logits, const std::vector<std::int64_t>& targets);

} // namespace gae
