#include "ganlab/autodiff.hpp"

#include <cmath>
#include <string>

namespace ganlab {

const char* op_name(Op op) {
    switch (op) {
        case Op::Input: return "input";
        case Op::Parameter: return "parameter";
        case Op::MatMul: return "matmul";
        case Op::Add: return "add";
        case Op::Mul: return "mul";
        case Op::Affine: return "affine";
        case Op::LeakyRelu: return "leaky_relu";
        case Op::Tanh: return "tanh";
        case Op::Sigmoid: return "sigmoid";
        case Op::Log: return "log";
        case Op::Clamp: return "clamp";
        case Op::Mean: return "mean";
        case Op::Reshape: return "reshape";
        case Op::SpectralDiv: return "spectral_div";
    }
    return "?";
}

template <typename T>
void Graph<T>::check_id(NodeId id) const {
    if (id.index >= nodes_.size()) throw GraphError("node id " + std::to_string(id.index) + " out of range");
}

template <typename T>
NodeId Graph<T>::push(Node<T> node) {
    for (std::size_t i = 0; i < node.arity; ++i) {
        check_id(node.inputs[i]);
        node.requires_grad = node.requires_grad || nodes_[node.inputs[i].index].requires_grad;
    }
    nodes_.push_back(std::move(node));
    forwarded_ = false;
    return NodeId{nodes_.size() - 1};
}

template <typename T>
NodeId Graph<T>::input(const std::string& name) {
    Node<T> n;
    n.op = Op::Input;
    n.name = name;
    return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::parameter(const std::string& name) {
    Node<T> n;
    n.op = Op::Parameter;
    n.name = name;
    n.requires_grad = true;
    return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::unary(Op op, NodeId x, T a, T b) {
    Node<T> n;
    n.op = op;
    n.inputs[0] = x;
    n.arity = 1;
    n.a = a;
    n.b = b;
    return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::matmul(NodeId a, NodeId b) {
    Node<T> n;
    n.op = Op::MatMul;
    n.inputs = {a, b, NodeId{}};
    n.arity = 2;
    return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::add(NodeId a, NodeId b) {
    Node<T> n;
    n.op = Op::Add;
    n.inputs = {a, b, NodeId{}};
    n.arity = 2;
    return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::mul(NodeId a, NodeId b) {
    Node<T> n;
    n.op = Op::Mul;
    n.inputs = {a, b, NodeId{}};
    n.arity = 2;
    return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::affine(NodeId x, T scale, T shift) {
    return unary(Op::Affine, x, scale, shift);
}

template <typename T>
NodeId Graph<T>::leaky_relu(NodeId x, T slope) {
    return unary(Op::LeakyRelu, x, slope);
}

template <typename T>
NodeId Graph<T>::tanh(NodeId x) {
    return unary(Op::Tanh, x);
}

template <typename T>
NodeId Graph<T>::sigmoid(NodeId x) {
    return unary(Op::Sigmoid, x);
}

template <typename T>
NodeId Graph<T>::log(NodeId x) {
    return unary(Op::Log, x);
}

template <typename T>
NodeId Graph<T>::clamp(NodeId x, T lo, T hi) {
    if (!(lo < hi)) throw GraphError("clamp bounds must satisfy lo < hi");
    return unary(Op::Clamp, x, lo, hi);
}

template <typename T>
NodeId Graph<T>::mean(NodeId x) {
    return unary(Op::Mean, x);
}

template <typename T>
NodeId Graph<T>::reshape(NodeId x, Shape shape) {
    Node<T> n;
    n.op = Op::Reshape;
    n.inputs[0] = x;
    n.arity = 1;
    n.shape_attr = std::move(shape);
    return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::spectral_div(NodeId weight, NodeId u, NodeId v) {
    Node<T> n;
    n.op = Op::SpectralDiv;
    n.inputs = {weight, u, v};
    n.arity = 3;
    return push(std::move(n));
}

template <typename T>
void Graph<T>::set_root(NodeId id) {
    check_id(id);
    root_ = id.index;
    has_root_ = true;
}

template <typename T>
NodeId Graph<T>::root() const {
    if (nodes_.empty()) throw GraphError("empty graph has no root");
    return NodeId{has_root_ ? root_ : nodes_.size() - 1};
}

template <typename T>
const Tensor<T>& Graph<T>::value(NodeId id) const {
    check_id(id);
    if (!forwarded_) throw GraphError("value() before forward()");
    return nodes_[id.index].value;
}

template <typename T>
std::vector<std::string> Graph<T>::parameter_names() const {
    std::vector<std::string> names;
    for (const auto& n : nodes_)
        if (n.op == Op::Parameter) names.push_back(n.name);
    return names;
}

template <typename T>
std::vector<std::string> Graph<T>::input_names() const {
    std::vector<std::string> names;
    for (const auto& n : nodes_)
        if (n.op == Op::Input) names.push_back(n.name);
    return names;
}

namespace {

template <typename T>
T sigmoid_scalar(T x) {
    // Split by sign so exp never overflows.
    if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
    const T e = std::exp(x);
    return e / (T{1} + e);
}

template <typename T, typename F>
Tensor<T> map_unary(const Tensor<T>& x, F f) {
    Tensor<T> out(x.shape());
    auto in = x.data();
    auto o = out.data();
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
    return out;
}

bool is_row_broadcast(const Shape& a, const Shape& b) {
    return a.size() == 2 && b.size() == 2 && b[0] == 1 && b[1] == a[1] && a[0] != 1;
}

template <typename T>
T bilinear(const Tensor<T>& u, const Tensor<T>& w, const Tensor<T>& v) {
    const std::size_t r = w.rows(), c = w.cols();
    if (u.numel() != r || v.numel() != c)
        throw ShapeError("spectral_div: u/v lengths " + std::to_string(u.numel()) + "/" +
                         std::to_string(v.numel()) + " do not match weight " + shape_str(w.shape()));
    T sigma{0};
    for (std::size_t i = 0; i < r; ++i) {
        T wv{0};
        for (std::size_t j = 0; j < c; ++j) wv += w(i, j) * v[j];
        sigma += u[i] * wv;
    }
    return sigma;
}

}  // namespace

template <typename T>
void Graph<T>::eval(Node<T>& n) {
    auto in = [&](std::size_t i) -> const Tensor<T>& { return nodes_[n.inputs[i].index].value; };
    switch (n.op) {
        case Op::Input:
        case Op::Parameter:
            return;  // bound by forward()
        case Op::MatMul:
            n.value = kernels::matmul(in(0), in(1));
            return;
        case Op::Add: {
            const auto& a = in(0);
            const auto& b = in(1);
            if (a.shape() == b.shape()) {
                n.value = a;
                kernels::add_inplace(n.value, b);
            } else if (is_row_broadcast(a.shape(), b.shape())) {
                n.value = a;
                const std::size_t rows = a.rows(), cols = a.cols();
                for (std::size_t r = 0; r < rows; ++r) {
                    auto out = n.value.row(r);
                    for (std::size_t c = 0; c < cols; ++c) out[c] += b[c];
                }
            } else {
                throw ShapeError("add: " + shape_str(a.shape()) + " + " + shape_str(b.shape()));
            }
            return;
        }
        case Op::Mul: {
            const auto& a = in(0);
            const auto& b = in(1);
            kernels::require_same_shape(a, b, "mul");
            n.value = a;
            auto o = n.value.data();
            auto bd = b.data();
            for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
            return;
        }
        case Op::Affine: {
            const T s = n.a, t = n.b;
            n.value = map_unary(in(0), [s, t](T x) { return s * x + t; });
            return;
        }
        case Op::LeakyRelu: {
            const T slope = n.a;
            n.value = map_unary(in(0), [slope](T x) { return x > T{0} ? x : slope * x; });
            return;
        }
        case Op::Tanh:
            n.value = map_unary(in(0), [](T x) { return std::tanh(x); });
            return;
        case Op::Sigmoid:
            n.value = map_unary(in(0), [](T x) { return sigmoid_scalar(x); });
            return;
        case Op::Log:
            for (T x : in(0).data())
                if (!(x > T{0})) throw NumericError("log of non-positive value " + std::to_string(x));
            n.value = map_unary(in(0), [](T x) { return std::log(x); });
            return;
        case Op::Clamp: {
            const T lo = n.a, hi = n.b;
            n.value = map_unary(in(0), [lo, hi](T x) { return std::min(std::max(x, lo), hi); });
            return;
        }
        case Op::Mean: {
            const auto& x = in(0);
            n.value = Tensor<T>::scalar(kernels::sum(x.data()) / static_cast<T>(x.numel()));
            return;
        }
        case Op::Reshape:
            n.value = in(0).reshaped(n.shape_attr);
            return;
        case Op::SpectralDiv: {
            const auto& w = in(0);
            const T sigma = bilinear(in(1), w, in(2));
            if (!(sigma > T{1e-12}))
                throw DegenerateWeightError("spectral_div: non-positive spectral estimate " + std::to_string(sigma));
            const T inv = T{1} / sigma;
            n.value = map_unary(w, [inv](T x) { return x * inv; });
            return;
        }
    }
}

template <typename T>
const Tensor<T>& Graph<T>::forward(const Bindings<T>& bindings) {
    if (nodes_.empty()) throw GraphError("forward() on empty graph");
    forwarded_ = false;
    for (auto& n : nodes_) {
        if (n.op == Op::Input || n.op == Op::Parameter) {
            auto it = bindings.find(n.name);
            if (it == bindings.end()) throw GraphError("unbound " + std::string(op_name(n.op)) + " '" + n.name + "'");
            if (it->second.empty()) throw GraphError("binding '" + n.name + "' is an empty tensor");
            n.value = it->second;
        } else {
            eval(n);
        }
        if (!n.value.all_finite())
            throw NumericError(std::string("non-finite value produced by ") + op_name(n.op) +
                               (n.name.empty() ? "" : " '" + n.name + "'"));
    }
    forwarded_ = true;
    return nodes_[root().index].value;
}

template <typename T>
void Graph<T>::propagate(Node<T>& n) {
    const Tensor<T>& g = n.grad;
    auto input = [&](std::size_t i) -> Node<T>& { return nodes_[n.inputs[i].index]; };

    // Elementwise chain rule into input 0: grad_in += g * local(x, y).
    auto accumulate_elementwise = [&](auto local) {
        Node<T>& x = input(0);
        if (!x.requires_grad) return;
        auto gx = x.grad.data();
        auto xv = x.value.data();
        auto yv = n.value.data();
        auto gd = g.data();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gd[i] * local(xv[i], yv[i]);
    };

    switch (n.op) {
        case Op::Input:
        case Op::Parameter:
            return;
        case Op::MatMul: {
            Node<T>& a = input(0);
            Node<T>& b = input(1);
            if (a.requires_grad) kernels::add_inplace(a.grad, kernels::matmul_nt(g, b.value));
            if (b.requires_grad) kernels::add_inplace(b.grad, kernels::matmul_tn(a.value, g));
            return;
        }
        case Op::Add: {
            Node<T>& a = input(0);
            Node<T>& b = input(1);
            if (a.requires_grad) kernels::add_inplace(a.grad, g);
            if (b.requires_grad) {
                if (b.value.shape() == g.shape()) {
                    kernels::add_inplace(b.grad, g);
                } else {
                    auto gb = b.grad.data();
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                        auto grow = g.row(r);
                        for (std::size_t c = 0; c < grow.size(); ++c) gb[c] += grow[c];
                    }
                }
            }
            return;
        }
        case Op::Mul: {
            Node<T>& a = input(0);
            Node<T>& b = input(1);
            auto gd = g.data();
            if (a.requires_grad) {
                auto ga = a.grad.data();
                auto bv = b.value.data();
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gd[i] * bv[i];
            }
            if (b.requires_grad) {
                auto gb = b.grad.data();
                auto av = a.value.data();
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gd[i] * av[i];
            }
            return;
        }
        case Op::Affine: {
            const T s = n.a;
            accumulate_elementwise([s](T, T) { return s; });
            return;
        }
        case Op::LeakyRelu: {
            const T slope = n.a;
            accumulate_elementwise([slope](T x, T) { return x > T{0} ? T{1} : slope; });
            return;
        }
        case Op::Tanh:
            accumulate_elementwise([](T, T y) { return T{1} - y * y; });
            return;
        case Op::Sigmoid:
            accumulate_elementwise([](T, T y) { return y * (T{1} - y); });
            return;
        case Op::Log:
            accumulate_elementwise([](T x, T) { return T{1} / x; });
            return;
        case Op::Clamp: {
            const T lo = n.a, hi = n.b;
            accumulate_elementwise([lo, hi](T x, T) { return (x > lo && x < hi) ? T{1} : T{0}; });
            return;
        }
        case Op::Mean: {
            Node<T>& x = input(0);
            if (!x.requires_grad) return;
            const T share = g[0] / static_cast<T>(x.value.numel());
            for (T& v : x.grad.data()) v += share;
            return;
        }
        case Op::Reshape: {
            Node<T>& x = input(0);
            if (!x.requires_grad) return;
            auto gx = x.grad.data();
            auto gd = g.data();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gd[i];
            return;
        }
        case Op::SpectralDiv: {
            // out = W / sigma, sigma = u^T W v:
            // dW = G / sigma - (<G, W> / sigma^2) u v^T
            Node<T>& w = input(0);
            if (!w.requires_grad) return;
            const Tensor<T>& u = input(1).value;
            const Tensor<T>& v = input(2).value;
            const T sigma = bilinear(u, w.value, v);
            const T inv = T{1} / sigma;
            const T coupling = kernels::dot<T>(g.data(), w.value.data()) * inv * inv;
            const std::size_t rows = w.value.rows(), cols = w.value.cols();
            for (std::size_t i = 0; i < rows; ++i) {
                auto gw = w.grad.row(i);
                auto grow = g.row(i);
                const T ui = coupling * u[i];
                for (std::size_t j = 0; j < cols; ++j) gw[j] += grow[j] * inv - ui * v[j];
            }
            return;
        }
    }
}

template <typename T>
Gradients<T> Graph<T>::backward() {
    if (!forwarded_) throw GraphError("backward() before forward()");
    const std::size_t r = root().index;
    if (nodes_[r].value.numel() != 1)
        throw GraphError("backward() needs a scalar root, got shape " + shape_str(nodes_[r].value.shape()));

    for (auto& n : nodes_) {
        if (n.requires_grad)
            n.grad = Tensor<T>(n.value.shape());
        else
            n.grad = Tensor<T>();
    }
    if (nodes_[r].requires_grad) nodes_[r].grad[0] = T{1};

    for (std::size_t i = r + 1; i-- > 0;) {
        Node<T>& n = nodes_[i];
        if (n.requires_grad && n.arity > 0) propagate(n);
    }

    Gradients<T> grads;
    for (const auto& n : nodes_) {
        if (n.op != Op::Parameter) continue;
        auto [it, inserted] = grads.emplace(n.name, n.grad);
        // The same name bound twice shares one parameter; sum both leaves.
        if (!inserted) kernels::add_inplace(it->second, n.grad);
    }
    return grads;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace ganlab
