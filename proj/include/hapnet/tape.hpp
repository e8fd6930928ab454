#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hapnet/param_store.hpp"

namespace hapnet {

// Handle to a tape node. Scalars are dim-1 nodes.
struct Var {
    int32_t id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode accumulation over a small fixed op set. The graph is built
// eagerly per forward pass (its shape depends on the subject's event
// cluster) and values live in a bump arena that is recycled between
// records. Parameter gradients accumulate into an external flat buffer the
// caller owns; node gradients are zeroed on every backward() call, the
// parameter buffer is not.
class Tape {
public:
    Tape() = default;
    Tape(const ParamStore* params, double* param_grad) : pstore_(params), pgrad_(param_grad) {}

    void bind(const ParamStore* params, double* param_grad) {
        pstore_ = params;
        pgrad_ = param_grad;
    }

    // drop all nodes, keep arena capacity
    void reset();

    Var input(std::span<const double> x);
    Var input_scalar(double x);
    Var param(const ParamRef& p); // leaf; gradient accumulates into the param buffer

    Var matvec(const ParamRef& W, Var x);     // y = W x
    Var add_param(Var x, const ParamRef& b);  // y = x + b
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b); // elementwise
    Var scale(Var a, double c);
    Var sum(std::span<const Var> vs);
    // y = sum_i coeff[i] * vecs[i], coeffs are dim-1 nodes
    Var weighted_sum(std::span<const Var> coeffs, std::span<const Var> vecs);
    Var tanh_(Var a);
    Var elu(Var a);
    Var leaky_relu(Var a, double slope);
    Var squash(Var a);
    Var softmax(Var a);
    Var dot(Var a, Var b);       // dim-1
    Var pick(Var a, int index);  // dim-1, a[index]
    Var pack(std::span<const Var> scalars);
    Var concat(std::span<const Var> vs);
    Var norm(Var a);            // dim-1
    Var cosine(Var a, Var b);   // dim-1; 0 when either side is the zero vector

    int dim(Var v) const { return nodes_[static_cast<size_t>(v.id)].dim; }
    std::span<const double> value(Var v) const;
    double scalar(Var v) const;
    std::span<const double> grad(Var v) const; // valid after backward()

    // root must be scalar; seeds d(root)/d(root) = seed
    void backward(Var root, double seed = 1.0);

    size_t node_count() const { return nodes_.size(); }

private:
    enum class Op : uint8_t {
        input, param, matvec, add_param, add, sub, mul, scale, sum, wsum,
        tanh_, elu, leaky, squash, softmax, dot, pick, pack, concat, norm, cosine
    };

    struct Node {
        Op op;
        int32_t dim = 0;
        int32_t a = -1, b = -1;    // binary inputs
        int32_t args = -1, nargs = 0; // n-ary input list in args_ arena
        int64_t poff = -1;         // parameter offset (matvec / add_param / param)
        int32_t rows = 0, cols = 0; // matvec shape; pick index in rows
        int32_t val = -1;          // offset into vals_/grads_
        double aux = 0.0;          // scale factor / slope / cached norm
    };

    int32_t push(Op op, int dim);
    double* vptr(int32_t node) { return vals_.data() + nodes_[static_cast<size_t>(node)].val; }
    const double* vptr(int32_t node) const { return vals_.data() + nodes_[static_cast<size_t>(node)].val; }
    const Node& node(Var v) const;
    Var check(Var v) const;

    const ParamStore* pstore_ = nullptr;
    double* pgrad_ = nullptr;
    std::vector<Node> nodes_;
    std::vector<double> vals_;
    std::vector<double> grads_;
    std::vector<int32_t> args_;
};

} // namespace hapnet
