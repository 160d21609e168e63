#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "ganlab/tensor.hpp"

namespace ganlab {

inline constexpr double kLeakySlope = 0.2;

enum class Op {
    Input,
    Parameter,
    MatMul,
    Add,
    Mul,
    Affine,
    LeakyRelu,
    Tanh,
    Sigmoid,
    Log,
    Clamp,
    Mean,
    Reshape,
    SpectralDiv,
};

const char* op_name(Op op);

struct NodeId {
    std::size_t index = 0;
    friend bool operator==(NodeId, NodeId) = default;
};

template <typename T>
struct Node {
    Op op = Op::Input;
    std::array<NodeId, 3> inputs{};
    std::size_t arity = 0;
    std::string name;  // leaves only
    T a{0}, b{0};      // op attributes: affine scale/shift, leaky slope, clamp bounds
    Shape shape_attr;  // reshape target
    bool requires_grad = false;
    Tensor<T> value;
    Tensor<T> grad;
};

template <typename T>
using Bindings = std::map<std::string, Tensor<T>>;

template <typename T>
using Gradients = std::map<std::string, Tensor<T>>;

// Static computation graph with reverse-mode differentiation.
//
// Nodes are appended in construction order and may only reference earlier
// nodes, so the graph is acyclic and insertion order is a topological order.
// The root is the most recently added node unless set_root() says otherwise.
// Leaves are either inputs (constants, no gradient) or parameters; both are
// bound by name on every forward().
template <typename T>
class Graph {
public:
    NodeId input(const std::string& name);
    NodeId parameter(const std::string& name);

    NodeId matmul(NodeId a, NodeId b);
    // Same shapes, or `b` of shape (1, cols) broadcast over the rows of `a`.
    NodeId add(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    // scale * x + shift, elementwise.
    NodeId affine(NodeId x, T scale, T shift);
    NodeId leaky_relu(NodeId x, T slope = static_cast<T>(kLeakySlope));
    NodeId tanh(NodeId x);
    NodeId sigmoid(NodeId x);
    NodeId log(NodeId x);
    // Gradient passes only where lo < x < hi.
    NodeId clamp(NodeId x, T lo, T hi);
    // Mean over every element; for a (batch, 1) tensor this is the batch mean.
    NodeId mean(NodeId x);
    NodeId reshape(NodeId x, Shape shape);
    // W / sigma with sigma = u^T W v, u and v treated as constants.
    NodeId spectral_div(NodeId weight, NodeId u, NodeId v);

    void set_root(NodeId id);
    NodeId root() const;

    const Tensor<T>& forward(const Bindings<T>& bindings);
    // Gradients of the scalar root with respect to every parameter leaf.
    Gradients<T> backward();

    const Tensor<T>& value(NodeId id) const;
    const Node<T>& node(NodeId id) const { return nodes_.at(id.index); }
    std::size_t size() const { return nodes_.size(); }
    std::vector<std::string> parameter_names() const;
    std::vector<std::string> input_names() const;

private:
    NodeId push(Node<T> node);
    NodeId unary(Op op, NodeId x, T a = T{0}, T b = T{0});
    void check_id(NodeId id) const;
    void eval(Node<T>& node);
    void propagate(Node<T>& node);

    std::vector<Node<T>> nodes_;
    std::size_t root_ = 0;
    bool has_root_ = false;
    bool forwarded_ = false;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace ganlab
