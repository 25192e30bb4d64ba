#include "ecgad/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "ecgad/errors.hpp"

namespace ecgad::ad {

namespace {

thread_local bool g_grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;

int numel_of(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<int>& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
}

std::shared_ptr<Node> make_node(std::vector<int> shape, Array value) {
    auto n = std::make_shared<Node>();
    require(numel_of(shape) == static_cast<int>(value.size()), "tensor value/shape mismatch");
    n->shape = std::move(shape);
    n->value = std::move(value);
    return n;
}

// Wires the node into the graph only while gradients are enabled and some
// input needs them.
Tensor finish(std::shared_ptr<Node> node, std::initializer_list<Tensor> inputs,
              std::function<void(Node&)> backward) {
    bool need = false;
    if (g_grad_enabled)
        for (const auto& t : inputs) need = need || t.requires_grad();
    if (need) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (const auto& t : inputs) node->inputs.push_back(t.node());
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

Tensor finish(std::shared_ptr<Node> node, const std::vector<Tensor>& inputs,
              std::function<void(Node&)> backward) {
    bool need = false;
    if (g_grad_enabled)
        for (const auto& t : inputs) need = need || t.requires_grad();
    if (need) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (const auto& t : inputs) node->inputs.push_back(t.node());
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

}  // namespace

void Node::accumulate(const Array& g) {
    if (!requires_grad) return;
    if (grad.size() == 0)
        grad = g;
    else
        grad += g;
}

Tensor Tensor::constant(std::vector<int> shape, Array values) {
    return Tensor(make_node(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double v) {
    Array a(1);
    a[0] = v;
    return constant({1}, std::move(a));
}

Tensor Tensor::zeros(std::vector<int> shape) {
    int n = numel_of(shape);
    return constant(std::move(shape), Array::Zero(n));
}

Tensor Tensor::full(std::vector<int> shape, double v) {
    int n = numel_of(shape);
    return constant(std::move(shape), Array::Constant(n, v));
}

Tensor Tensor::variable(std::vector<int> shape, Array values) {
    Tensor t = constant(std::move(shape), std::move(values));
    t.set_requires_grad(true);
    return t;
}

double Tensor::item() const {
    require(numel() == 1, "item(): tensor is not scalar");
    return value()[0];
}

NoGradGuard::NoGradGuard() : saved_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = saved_; }
bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// Elementwise binary
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.numel() == 1 && b.numel() != 1) return add(b, a);
    if (b.numel() == 1 && a.numel() != 1) {
        auto node = make_node(a.shape(), a.value() + b.value()[0]);
        auto an = a.node(), bn = b.node();
        return finish(node, {a, b}, [an, bn](Node& self) {
            an->accumulate(self.grad);
            if (bn->requires_grad) {
                Array g(1);
                g[0] = self.grad.sum();
                bn->accumulate(g);
            }
        });
    }
    check_same_shape(a, b, "add");
    auto node = make_node(a.shape(), a.value() + b.value());
    auto an = a.node(), bn = b.node();
    return finish(node, {a, b}, [an, bn](Node& self) {
        an->accumulate(self.grad);
        bn->accumulate(self.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    auto node = make_node(a.shape(), a.value() - b.value());
    auto an = a.node(), bn = b.node();
    return finish(node, {a, b}, [an, bn](Node& self) {
        an->accumulate(self.grad);
        bn->accumulate(-self.grad);
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.numel() == 1 && b.numel() != 1) return mul(b, a);
    if (b.numel() == 1 && a.numel() != 1) {
        auto node = make_node(a.shape(), a.value() * b.value()[0]);
        auto an = a.node(), bn = b.node();
        return finish(node, {a, b}, [an, bn](Node& self) {
            an->accumulate(self.grad * bn->value[0]);
            if (bn->requires_grad) {
                Array g(1);
                g[0] = (self.grad * an->value).sum();
                bn->accumulate(g);
            }
        });
    }
    check_same_shape(a, b, "mul");
    auto node = make_node(a.shape(), a.value() * b.value());
    auto an = a.node(), bn = b.node();
    return finish(node, {a, b}, [an, bn](Node& self) {
        an->accumulate(self.grad * bn->value);
        bn->accumulate(self.grad * an->value);
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "div");
    auto node = make_node(a.shape(), a.value() / b.value());
    auto an = a.node(), bn = b.node();
    return finish(node, {a, b}, [an, bn](Node& self) {
        an->accumulate(self.grad / bn->value);
        bn->accumulate(-self.grad * an->value / (bn->value * bn->value));
    });
}

// ---------------------------------------------------------------------------
// Elementwise unary
// ---------------------------------------------------------------------------

Tensor neg(const Tensor& a) {
    auto node = make_node(a.shape(), -a.value());
    auto an = a.node();
    return finish(node, {a}, [an](Node& self) { an->accumulate(-self.grad); });
}

Tensor scale(const Tensor& a, double c) {
    auto node = make_node(a.shape(), a.value() * c);
    auto an = a.node();
    return finish(node, {a}, [an, c](Node& self) { an->accumulate(self.grad * c); });
}

Tensor add_scalar(const Tensor& a, double c) {
    auto node = make_node(a.shape(), a.value() + c);
    auto an = a.node();
    return finish(node, {a}, [an](Node& self) { an->accumulate(self.grad); });
}

Tensor relu(const Tensor& a) {
    auto node = make_node(a.shape(), a.value().max(0.0));
    auto an = a.node();
    return finish(node, {a}, [an](Node& self) {
        // subgradient 0 at x <= 0
        an->accumulate(self.grad * (an->value > 0.0).cast<double>());
    });
}

Tensor gelu(const Tensor& a) {
    // Exact form x * Phi(x).
    const Array& x = a.value();
    Array phi(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) phi[i] = 0.5 * (1.0 + std::erf(x[i] / std::sqrt(2.0)));
    auto node = make_node(a.shape(), x * phi);
    auto an = a.node();
    return finish(node, {a}, [an, phi](Node& self) {
        static const double inv_sqrt2pi = 0.3989422804014327;
        Array dens = (-0.5 * an->value.square()).exp() * inv_sqrt2pi;
        an->accumulate(self.grad * (phi + an->value * dens));
    });
}

Tensor sigmoid(const Tensor& a) {
    Array clamped = a.value().min(30.0).max(-30.0);
    Array s = 1.0 / (1.0 + (-clamped).exp());
    auto node = make_node(a.shape(), s);
    auto an = a.node();
    return finish(node, {a}, [an, s](Node& self) { an->accumulate(self.grad * s * (1.0 - s)); });
}

Tensor softplus(const Tensor& a) {
    const Array& x = a.value();
    // log1p(exp(x)) with large-|x| guards
    Array y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] > 30.0)
            y[i] = x[i];
        else if (x[i] < -30.0)
            y[i] = std::exp(x[i]);
        else
            y[i] = std::log1p(std::exp(x[i]));
    }
    auto node = make_node(a.shape(), std::move(y));
    auto an = a.node();
    return finish(node, {a}, [an](Node& self) {
        Array clamped = an->value.min(30.0).max(-30.0);
        Array s = 1.0 / (1.0 + (-clamped).exp());
        an->accumulate(self.grad * s);
    });
}

Tensor log(const Tensor& a) {
    auto node = make_node(a.shape(), a.value().log());
    auto an = a.node();
    return finish(node, {a}, [an](Node& self) { an->accumulate(self.grad / an->value); });
}

Tensor exp(const Tensor& a) {
    Array e = a.value().exp();
    auto node = make_node(a.shape(), e);
    auto an = a.node();
    return finish(node, {a}, [an, e](Node& self) { an->accumulate(self.grad * e); });
}

Tensor square(const Tensor& a) {
    auto node = make_node(a.shape(), a.value().square());
    auto an = a.node();
    return finish(node, {a}, [an](Node& self) { an->accumulate(self.grad * 2.0 * an->value); });
}

Tensor pow_scalar(const Tensor& a, double p) {
    if (p == 0.0) {
        // x^0 == 1 everywhere (including 0) with zero gradient.
        auto node = make_node(a.shape(), Array::Constant(a.numel(), 1.0));
        auto an = a.node();
        return finish(node, {a}, [an](Node& self) {
            an->accumulate(Array::Zero(self.grad.size()));
        });
    }
    Array y = a.value().pow(p);
    auto node = make_node(a.shape(), y);
    auto an = a.node();
    return finish(node, {a}, [an, p](Node& self) {
        Array d(an->value.size());
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            const double x = an->value[i];
            d[i] = (x == 0.0 && p >= 1.0) ? (p == 1.0 ? 1.0 : 0.0) : p * std::pow(x, p - 1.0);
        }
        an->accumulate(self.grad * d);
    });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

Tensor sum(const Tensor& a) {
    Array s(1);
    s[0] = a.value().sum();
    auto node = make_node({1}, std::move(s));
    auto an = a.node();
    return finish(node, {a}, [an](Node& self) {
        an->accumulate(Array::Constant(an->value.size(), self.grad[0]));
    });
}

Tensor mean(const Tensor& a) {
    Array s(1);
    s[0] = a.value().mean();
    auto node = make_node({1}, std::move(s));
    auto an = a.node();
    return finish(node, {a}, [an](Node& self) {
        an->accumulate(Array::Constant(an->value.size(), self.grad[0] / an->value.size()));
    });
}

Tensor mean_axis0(const Tensor& a) {
    require(a.shape().size() == 2, "mean_axis0: rank-2 tensor expected");
    const int rows = a.shape()[0], cols = a.shape()[1];
    CMatMap m(a.value().data(), rows, cols);
    Array out(cols);
    MatMap(out.data(), 1, cols) = m.colwise().mean();
    auto node = make_node({cols}, std::move(out));
    auto an = a.node();
    return finish(node, {a}, [an, rows, cols](Node& self) {
        Array g(static_cast<Eigen::Index>(rows) * cols);
        MatMap gm(g.data(), rows, cols);
        CMatMap sg(self.grad.data(), 1, cols);
        gm = (sg / static_cast<double>(rows)).replicate(rows, 1);
        an->accumulate(g);
    });
}

// ---------------------------------------------------------------------------
// Structure
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& a, std::vector<int> shape) {
    require(numel_of(shape) == a.numel(), "reshape: element count mismatch");
    auto node = make_node(std::move(shape), a.value());
    auto an = a.node();
    return finish(node, {a}, [an](Node& self) { an->accumulate(self.grad); });
}

Tensor transpose(const Tensor& a) {
    require(a.shape().size() == 2, "transpose: rank-2 tensor expected");
    const int rows = a.shape()[0], cols = a.shape()[1];
    Array out(a.numel());
    MatMap(out.data(), cols, rows) = CMatMap(a.value().data(), rows, cols).transpose();
    auto node = make_node({cols, rows}, std::move(out));
    auto an = a.node();
    return finish(node, {a}, [an, rows, cols](Node& self) {
        Array g(an->value.size());
        MatMap(g.data(), rows, cols) = CMatMap(self.grad.data(), cols, rows).transpose();
        an->accumulate(g);
    });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    require(!parts.empty(), "concat: no inputs");
    const auto& s0 = parts[0].shape();
    const int rank = static_cast<int>(s0.size());
    require(rank >= 1 && rank <= 2, "concat: rank <= 2 only");
    require(axis >= 0 && axis < rank, "concat: bad axis");

    std::vector<int> out_shape = s0;
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        require(static_cast<int>(p.shape().size()) == rank, "concat: rank mismatch");
        for (int d = 0; d < rank; ++d)
            if (d != axis)
                require(p.shape()[d] == s0[d], "concat: shape mismatch off the concat axis");
        out_shape[axis] += p.shape()[axis];
    }

    Array out(numel_of(out_shape));
    if (rank == 1 || axis == 0) {
        Eigen::Index off = 0;
        for (const auto& p : parts) {
            out.segment(off, p.numel()) = p.value();
            off += p.numel();
        }
    } else {  // rank 2, axis 1
        const int rows = s0[0];
        MatMap om(out.data(), rows, out_shape[1]);
        int coff = 0;
        for (const auto& p : parts) {
            const int pc = p.shape()[1];
            om.block(0, coff, rows, pc) = CMatMap(p.value().data(), rows, pc);
            coff += pc;
        }
    }

    auto node = make_node(out_shape, std::move(out));
    std::vector<std::shared_ptr<Node>> in_nodes;
    for (const auto& p : parts) in_nodes.push_back(p.node());
    return finish(node, parts, [in_nodes, axis, out_shape](Node& self) {
        const int rank = static_cast<int>(out_shape.size());
        if (rank == 1 || axis == 0) {
            Eigen::Index off = 0;
            for (auto& in : in_nodes) {
                in->accumulate(self.grad.segment(off, in->value.size()));
                off += in->value.size();
            }
        } else {
            const int rows = out_shape[0];
            CMatMap gm(self.grad.data(), rows, out_shape[1]);
            int coff = 0;
            for (auto& in : in_nodes) {
                const int pc = in->shape[1];
                Array g(in->value.size());
                MatMap(g.data(), rows, pc) = gm.block(0, coff, rows, pc);
                in->accumulate(g);
                coff += pc;
            }
        }
    });
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
    const auto& s = a.shape();
    const int rank = static_cast<int>(s.size());
    require(rank >= 1 && rank <= 2, "slice: rank <= 2 only");
    require(axis >= 0 && axis < rank, "slice: bad axis");
    require(start >= 0 && len >= 0 && start + len <= s[axis], "slice: range out of bounds");

    std::vector<int> out_shape = s;
    out_shape[axis] = len;
    Array out(numel_of(out_shape));
    if (rank == 1) {
        out = a.value().segment(start, len);
    } else if (axis == 0) {
        out = a.value().segment(static_cast<Eigen::Index>(start) * s[1],
                                static_cast<Eigen::Index>(len) * s[1]);
    } else {
        MatMap(out.data(), s[0], len) = CMatMap(a.value().data(), s[0], s[1]).block(0, start, s[0], len);
    }

    auto node = make_node(out_shape, std::move(out));
    auto an = a.node();
    auto in_shape = s;
    return finish(node, {a}, [an, in_shape, axis, start, len](Node& self) {
        Array g = Array::Zero(an->value.size());
        const int rank = static_cast<int>(in_shape.size());
        if (rank == 1) {
            g.segment(start, len) = self.grad;
        } else if (axis == 0) {
            g.segment(static_cast<Eigen::Index>(start) * in_shape[1],
                      static_cast<Eigen::Index>(len) * in_shape[1]) = self.grad;
        } else {
            MatMap(g.data(), in_shape[0], in_shape[1]).block(0, start, in_shape[0], len) =
                CMatMap(self.grad.data(), in_shape[0], len);
        }
        an->accumulate(g);
    });
}

Tensor add_rowvec(const Tensor& a, const Tensor& b) {
    require(a.shape().size() == 2 && b.shape().size() == 1, "add_rowvec: (T,E) + (E) expected");
    const int rows = a.shape()[0], cols = a.shape()[1];
    if (b.shape()[0] != cols)
        throw ContractError("add_rowvec: shape mismatch " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
    Array out(a.numel());
    MatMap om(out.data(), rows, cols);
    om = CMatMap(a.value().data(), rows, cols);
    om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.value().data(), cols);
    auto node = make_node(a.shape(), std::move(out));
    auto an = a.node(), bn = b.node();
    return finish(node, {a, b}, [an, bn, rows, cols](Node& self) {
        an->accumulate(self.grad);
        if (bn->requires_grad) {
            Array g(cols);
            Eigen::Map<Eigen::RowVectorXd>(g.data(), cols) =
                CMatMap(self.grad.data(), rows, cols).colwise().sum();
            bn->accumulate(g);
        }
    });
}

// ---------------------------------------------------------------------------
// Linear algebra / NN
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.shape().size() == 2 && b.shape().size() == 2, "matmul: rank-2 tensors expected");
    const int m = a.shape()[0], k = a.shape()[1];
    const int k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2)
        throw ContractError("matmul: shape mismatch " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
    Array out(static_cast<Eigen::Index>(m) * n);
    MatMap(out.data(), m, n).noalias() =
        CMatMap(a.value().data(), m, k) * CMatMap(b.value().data(), k, n);
    auto node = make_node({m, n}, std::move(out));
    auto an = a.node(), bn = b.node();
    return finish(node, {a, b}, [an, bn, m, k, n](Node& self) {
        CMatMap g(self.grad.data(), m, n);
        if (an->requires_grad) {
            Array ga(static_cast<Eigen::Index>(m) * k);
            MatMap(ga.data(), m, k).noalias() = g * CMatMap(bn->value.data(), k, n).transpose();
            an->accumulate(ga);
        }
        if (bn->requires_grad) {
            Array gb(static_cast<Eigen::Index>(k) * n);
            MatMap(gb.data(), k, n).noalias() = CMatMap(an->value.data(), m, k).transpose() * g;
            bn->accumulate(gb);
        }
    });
}

Tensor softmax(const Tensor& a) {
    const auto& s = a.shape();
    const int rank = static_cast<int>(s.size());
    require(rank >= 1 && rank <= 2, "softmax: rank <= 2 only");
    const int rows = rank == 1 ? 1 : s[0];
    const int cols = rank == 1 ? s[0] : s[1];
    Array out(a.numel());
    CMatMap x(a.value().data(), rows, cols);
    MatMap y(out.data(), rows, cols);
    for (int r = 0; r < rows; ++r) {
        const double mx = x.row(r).maxCoeff();
        y.row(r) = (x.row(r).array() - mx).exp().matrix();
        y.row(r) /= y.row(r).sum();
    }
    auto node = make_node(s, std::move(out));
    auto an = a.node();
    return finish(node, {a}, [an, rows, cols](Node& self) {
        CMatMap y(self.value.data(), rows, cols);
        CMatMap g(self.grad.data(), rows, cols);
        Array ga(self.value.size());
        MatMap gm(ga.data(), rows, cols);
        for (int r = 0; r < rows; ++r) {
            const double dot = g.row(r).cwiseProduct(y.row(r)).sum();
            gm.row(r) = ((g.row(r).array() - dot) * y.row(r).array()).matrix();
        }
        an->accumulate(ga);
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const auto& s = x.shape();
    const int rank = static_cast<int>(s.size());
    require(rank >= 1 && rank <= 2, "layer_norm: rank <= 2 only");
    const int rows = rank == 1 ? 1 : s[0];
    const int cols = rank == 1 ? s[0] : s[1];
    require(gamma.shape() == std::vector<int>{cols} && beta.shape() == std::vector<int>{cols},
            "layer_norm: gamma/beta must match the normalized axis");

    Array out(x.numel()), xhat(x.numel()), inv_std(rows);
    CMatMap xm(x.value().data(), rows, cols);
    MatMap om(out.data(), rows, cols), hm(xhat.data(), rows, cols);
    Eigen::Map<const Eigen::RowVectorXd> gv(gamma.value().data(), cols);
    Eigen::Map<const Eigen::RowVectorXd> bv(beta.value().data(), cols);
    for (int r = 0; r < rows; ++r) {
        const double mu = xm.row(r).mean();
        const double var = (xm.row(r).array() - mu).square().mean();
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        hm.row(r) = ((xm.row(r).array() - mu) * inv_std[r]).matrix();
        om.row(r) = hm.row(r).cwiseProduct(gv) + bv;
    }
    auto node = make_node(s, std::move(out));
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    return finish(node, {x, gamma, beta}, [xn, gn, bn, xhat, inv_std, rows, cols](Node& self) {
        CMatMap g(self.grad.data(), rows, cols);
        CMatMap h(xhat.data(), rows, cols);
        Eigen::Map<const Eigen::RowVectorXd> gv(gn->value.data(), cols);
        if (gn->requires_grad) {
            Array gg(cols);
            Eigen::Map<Eigen::RowVectorXd>(gg.data(), cols) = g.cwiseProduct(h).colwise().sum();
            gn->accumulate(gg);
        }
        if (bn->requires_grad) {
            Array gb(cols);
            Eigen::Map<Eigen::RowVectorXd>(gb.data(), cols) = g.colwise().sum();
            bn->accumulate(gb);
        }
        if (xn->requires_grad) {
            Array gx(self.value.size());
            MatMap gm(gx.data(), rows, cols);
            for (int r = 0; r < rows; ++r) {
                Eigen::RowVectorXd gy = g.row(r).cwiseProduct(gv);
                const double m1 = gy.mean();
                const double m2 = gy.cwiseProduct(h.row(r)).mean();
                gm.row(r) = (((gy.array() - m1) - h.row(r).array() * m2) * inv_std[r]).matrix();
            }
            xn->accumulate(gx);
        }
    });
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding) {
    require(x.shape().size() == 2, "conv1d: input must be (C_in, L)");
    require(w.shape().size() == 3, "conv1d: weight must be (C_out, C_in, K)");
    require(stride >= 1 && padding >= 0, "conv1d: bad stride/padding");
    const int c_in = x.shape()[0], len = x.shape()[1];
    const int c_out = w.shape()[0], k = w.shape()[2];
    if (w.shape()[1] != c_in)
        throw ContractError("conv1d: shape mismatch " + shape_str(x.shape()) + " vs " +
                            shape_str(w.shape()));
    const int l_out = (len + 2 * padding - k) / stride + 1;
    require(l_out >= 1, "conv1d: output length would be empty");

    // im2col, then one GEMM
    Array col(static_cast<Eigen::Index>(c_in) * k * l_out);
    MatMap cm(col.data(), c_in * k, l_out);
    CMatMap xm(x.value().data(), c_in, len);
    for (int ci = 0; ci < c_in; ++ci)
        for (int kk = 0; kk < k; ++kk) {
            const int row = ci * k + kk;
            for (int t = 0; t < l_out; ++t) {
                const int src = t * stride + kk - padding;
                cm(row, t) = (src >= 0 && src < len) ? xm(ci, src) : 0.0;
            }
        }

    Array out(static_cast<Eigen::Index>(c_out) * l_out);
    MatMap om(out.data(), c_out, l_out);
    om.noalias() = CMatMap(w.value().data(), c_out, c_in * k) * cm;
    const bool has_bias = bias.defined();
    if (has_bias) {
        require(bias.shape() == std::vector<int>{c_out}, "conv1d: bias must be (C_out)");
        om.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.value().data(), c_out);
    }

    auto node = make_node({c_out, l_out}, std::move(out));
    auto xn = x.node(), wn = w.node();
    auto bn = has_bias ? bias.node() : nullptr;
    std::vector<Tensor> inputs{x, w};
    if (has_bias) inputs.push_back(bias);
    return finish(node, inputs,
                  [xn, wn, bn, col, c_in, len, c_out, k, l_out, stride, padding](Node& self) {
        CMatMap g(self.grad.data(), c_out, l_out);
        if (wn->requires_grad) {
            Array gw(static_cast<Eigen::Index>(c_out) * c_in * k);
            MatMap(gw.data(), c_out, c_in * k).noalias() =
                g * CMatMap(col.data(), c_in * k, l_out).transpose();
            wn->accumulate(gw);
        }
        if (bn && bn->requires_grad) {
            Array gb(c_out);
            Eigen::Map<Eigen::VectorXd>(gb.data(), c_out) = g.rowwise().sum();
            bn->accumulate(gb);
        }
        if (xn->requires_grad) {
            RowMat dcol = CMatMap(wn->value.data(), c_out, c_in * k).transpose() * g;
            Array gx = Array::Zero(static_cast<Eigen::Index>(c_in) * len);
            MatMap gxm(gx.data(), c_in, len);
            for (int ci = 0; ci < c_in; ++ci)
                for (int kk = 0; kk < k; ++kk) {
                    const int row = ci * k + kk;
                    for (int t = 0; t < l_out; ++t) {
                        const int src = t * stride + kk - padding;
                        if (src >= 0 && src < len) gxm(ci, src) += dcol(row, t);
                    }
                }
            xn->accumulate(gx);
        }
    });
}

Tensor upsample_nn(const Tensor& x, int factor) {
    require(x.shape().size() == 2, "upsample_nn: input must be (C, L)");
    require(factor >= 1, "upsample_nn: factor must be >= 1");
    const int c = x.shape()[0], len = x.shape()[1];
    Array out(static_cast<Eigen::Index>(c) * len * factor);
    MatMap om(out.data(), c, len * factor);
    CMatMap xm(x.value().data(), c, len);
    for (int i = 0; i < len * factor; ++i) om.col(i) = xm.col(i / factor);
    auto node = make_node({c, len * factor}, std::move(out));
    auto xn = x.node();
    return finish(node, {x}, [xn, c, len, factor](Node& self) {
        CMatMap g(self.grad.data(), c, len * factor);
        Array gx = Array::Zero(static_cast<Eigen::Index>(c) * len);
        MatMap gxm(gx.data(), c, len);
        for (int i = 0; i < len * factor; ++i) gxm.col(i / factor) += g.col(i);
        xn->accumulate(gx);
    });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads) {
    require(q.shape().size() == 2 && k.shape().size() == 2 && v.shape().size() == 2,
            "attention: rank-2 tensors expected");
    const int e = q.shape()[1];
    if (k.shape()[1] != e || v.shape()[1] != e || k.shape()[0] != v.shape()[0])
        throw ContractError("attention: shape mismatch q" + shape_str(q.shape()) + " k" +
                            shape_str(k.shape()) + " v" + shape_str(v.shape()));
    require(heads >= 1 && e % heads == 0, "attention: embedding dim not divisible by heads");
    const int dh = e / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<Tensor> outs;
    outs.reserve(heads);
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice(q, 1, h * dh, dh);
        Tensor kh = slice(k, 1, h * dh, dh);
        Tensor vh = slice(v, 1, h * dh, dh);
        Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
        Tensor attn = softmax(scores);
        outs.push_back(matmul(attn, vh));
    }
    return heads == 1 ? outs[0] : concat(outs, 1);
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

void backward(const Tensor& loss) {
    require(loss.defined() && loss.numel() == 1, "backward: loss must be a scalar tensor");
    if (!loss.requires_grad()) return;

    // Iterative postorder topological sort.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* node;
        size_t next_child;
    };
    std::vector<Frame> stack{{loss.node().get(), 0}};
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_child < f.node->inputs.size()) {
            Node* child = f.node->inputs[f.next_child++].get();
            if (child->requires_grad && !visited.count(child)) {
                visited.insert(child);
                stack.push_back({child, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    Array seed(1);
    seed[0] = 1.0;
    loss.node()->grad = seed;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && n->grad.size() > 0) n->backward(*n);
    }
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

double cosine_lr(int step, int total_steps, double lr0) {
    require(total_steps >= 1 && step >= 0 && step <= total_steps, "cosine_lr: bad step");
    return lr0 * 0.5 * (1.0 + std::cos(3.14159265358979323846 * step / total_steps));
}

AdamW::AdamW(std::vector<Parameter> params, double weight_decay, double beta1, double beta2,
             double eps)
    : params_(std::move(params)),
      weight_decay_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.push_back(Array::Zero(p.tensor.numel()));
        v_.push_back(Array::Zero(p.tensor.numel()));
    }
}

void AdamW::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        auto node = params_[i].tensor.node();
        if (node->grad.size() == 0) node->grad = Array::Zero(node->value.size());
        const Array& g = node->grad;
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.square();
        Array m_hat = m_[i] / bc1;
        Array v_hat = v_[i] / bc2;
        // Decoupled decay acts on the weights, not the gradient.
        node->value -= lr * (m_hat / (v_hat.sqrt() + eps_) + weight_decay_ * node->value);
    }
}

void AdamW::zero_grad() {
    for (auto& p : params_) p.tensor.grad() = Array();
}

}  // namespace ecgad::ad
