#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ecgad::ad {

// Reverse-mode autodiff over dense 64-bit tensors, sized for desk-scale
// training. Rank <= 3, row-major storage. Elementwise binary ops require
// equal shapes or a scalar operand; row-vector broadcast exists only via
// add_rowvec. Gradients accumulate additively across graph fan-out and
// across backward() calls on parameter leaves; call zero_grad between steps.

using Array = Eigen::ArrayXd;

struct Node {
    std::vector<int> shape;
    Array value;
    Array grad;  // empty until backward touches it
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    int numel() const { return static_cast<int>(value.size()); }
    void accumulate(const Array& g);
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor constant(std::vector<int> shape, Array values);
    static Tensor scalar(double v);
    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double v);
    // Leaf that participates in backward.
    static Tensor variable(std::vector<int> shape, Array values);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int numel() const { return node_->numel(); }
    Array& value() { return node_->value; }
    const Array& value() const { return node_->value; }
    Array& grad() { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }
    double item() const;

    std::shared_ptr<Node> node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

// Disables graph recording within scope (inference/evaluation).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool saved_;
};

bool grad_enabled();

// --- elementwise ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor sigmoid(const Tensor& a);  // input clamped to +-30 so outputs stay in (0,1)
Tensor softplus(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor square(const Tensor& a);
Tensor pow_scalar(const Tensor& a, double p);  // a >= 0 expected for fractional p

// --- reductions ---
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor mean_axis0(const Tensor& a);  // (T,E) -> (E)

// --- structure ---
Tensor reshape(const Tensor& a, std::vector<int> shape);
Tensor transpose(const Tensor& a);                              // 2-D
Tensor concat(const std::vector<Tensor>& parts, int axis);       // rank <= 2
Tensor slice(const Tensor& a, int axis, int start, int len);     // rank <= 2
Tensor add_rowvec(const Tensor& a, const Tensor& b);             // (T,E) + (E)

// --- linear algebra / nn ---
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax(const Tensor& a);  // last axis
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
// x (C_in, L), w (C_out, C_in, K), optional bias (C_out); output (C_out, L_out).
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding);
Tensor upsample_nn(const Tensor& x, int factor);  // (C, L) -> (C, L*factor)

// Scaled dot-product attention with per-head softmax; q,k,v are (T, E),
// E divisible by heads.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }

// Reverse sweep from a scalar loss; fills grads of every reachable node
// with requires_grad.
void backward(const Tensor& loss);

// --- optimizer ---
struct Parameter {
    std::string name;
    Tensor tensor;
};

double cosine_lr(int step, int total_steps, double lr0);

// AdamW with decoupled weight decay and bias-corrected moments.
class AdamW {
public:
    AdamW(std::vector<Parameter> params, double weight_decay,
          double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(double lr);
    void zero_grad();
    int64_t step_count() const { return t_; }
    const std::vector<Parameter>& params() const { return params_; }

private:
    std::vector<Parameter> params_;
    std::vector<Array> m_, v_;
    double weight_decay_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

}  // namespace ecgad::ad
