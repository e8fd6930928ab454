#include "hapnet/tape.hpp"

#include <cmath>

#include "hapnet/errors.hpp"
#include "hapnet/kernels.hpp"

namespace hapnet {

void Tape::reset() {
    nodes_.clear();
    vals_.clear();
    grads_.clear();
    args_.clear();
}

const Tape::Node& Tape::node(Var v) const {
    if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size())
        throw ContractError("tape: var does not belong to this tape");
    return nodes_[static_cast<size_t>(v.id)];
}

Var Tape::check(Var v) const {
    (void)node(v);
    return v;
}

int32_t Tape::push(Op op, int dim) {
    if (dim <= 0) throw ShapeError("tape: node dimension must be positive");
    Node n;
    n.op = op;
    n.dim = dim;
    n.val = static_cast<int32_t>(vals_.size());
    vals_.resize(vals_.size() + static_cast<size_t>(dim), 0.0);
    nodes_.push_back(n);
    return static_cast<int32_t>(nodes_.size()) - 1;
}

std::span<const double> Tape::value(Var v) const {
    const Node& n = node(v);
    return {vals_.data() + n.val, static_cast<size_t>(n.dim)};
}

double Tape::scalar(Var v) const {
    const Node& n = node(v);
    if (n.dim != 1) throw ShapeError("tape: scalar() on a non-scalar node");
    return vals_[static_cast<size_t>(n.val)];
}

std::span<const double> Tape::grad(Var v) const {
    const Node& n = node(v);
    if (grads_.size() != vals_.size()) throw ContractError("tape: grad() before backward()");
    return {grads_.data() + n.val, static_cast<size_t>(n.dim)};
}

Var Tape::input(std::span<const double> x) {
    if (x.empty()) throw ShapeError("tape: empty input");
    int32_t id = push(Op::input, static_cast<int>(x.size()));
    double* y = vptr(id);
    for (size_t i = 0; i < x.size(); ++i) y[i] = x[i];
    return {id};
}

Var Tape::input_scalar(double x) { return input(std::span<const double>(&x, 1)); }

Var Tape::param(const ParamRef& p) {
    if (!p.valid()) throw ContractError("tape: invalid param ref");
    int32_t id = push(Op::param, static_cast<int>(p.size()));
    nodes_.back().poff = p.off;
    const double* src = pstore_->data() + p.off;
    double* y = vptr(id);
    for (int64_t i = 0; i < p.size(); ++i) y[i] = src[i];
    return {id};
}

Var Tape::matvec(const ParamRef& W, Var x) {
    check(x);
    if (!W.valid()) throw ContractError("tape: invalid param ref");
    if (W.cols != dim(x)) throw ShapeError("tape: matvec shape mismatch");
    int32_t id = push(Op::matvec, W.rows);
    Node& n = nodes_.back();
    n.a = x.id;
    n.poff = W.off;
    n.rows = W.rows;
    n.cols = W.cols;
    kernels::matvec(pstore_->data() + W.off, W.rows, W.cols, vptr(x.id), vptr(id));
    return {id};
}

Var Tape::add_param(Var x, const ParamRef& b) {
    check(x);
    if (!b.valid()) throw ContractError("tape: invalid param ref");
    if (static_cast<int64_t>(dim(x)) != b.size()) throw ShapeError("tape: add_param shape mismatch");
    int32_t id = push(Op::add_param, dim(x));
    Node& n = nodes_.back();
    n.a = x.id;
    n.poff = b.off;
    const double* xa = vptr(x.id);
    const double* bp = pstore_->data() + b.off;
    double* y = vptr(id);
    for (int i = 0; i < n.dim; ++i) y[i] = xa[i] + bp[i];
    return {id};
}

Var Tape::add(Var a, Var b) {
    check(a);
    check(b);
    if (dim(a) != dim(b)) throw ShapeError("tape: add shape mismatch");
    int32_t id = push(Op::add, dim(a));
    nodes_.back().a = a.id;
    nodes_.back().b = b.id;
    const double* xa = vptr(a.id);
    const double* xb = vptr(b.id);
    double* y = vptr(id);
    for (int i = 0; i < dim(a); ++i) y[i] = xa[i] + xb[i];
    return {id};
}

Var Tape::sub(Var a, Var b) {
    check(a);
    check(b);
    if (dim(a) != dim(b)) throw ShapeError("tape: sub shape mismatch");
    int32_t id = push(Op::sub, dim(a));
    nodes_.back().a = a.id;
    nodes_.back().b = b.id;
    const double* xa = vptr(a.id);
    const double* xb = vptr(b.id);
    double* y = vptr(id);
    for (int i = 0; i < dim(a); ++i) y[i] = xa[i] - xb[i];
    return {id};
}

Var Tape::mul(Var a, Var b) {
    check(a);
    check(b);
    if (dim(a) != dim(b)) throw ShapeError("tape: mul shape mismatch");
    int32_t id = push(Op::mul, dim(a));
    nodes_.back().a = a.id;
    nodes_.back().b = b.id;
    const double* xa = vptr(a.id);
    const double* xb = vptr(b.id);
    double* y = vptr(id);
    for (int i = 0; i < dim(a); ++i) y[i] = xa[i] * xb[i];
    return {id};
}

Var Tape::scale(Var a, double c) {
    check(a);
    int32_t id = push(Op::scale, dim(a));
    nodes_.back().a = a.id;
    nodes_.back().aux = c;
    const double* xa = vptr(a.id);
    double* y = vptr(id);
    for (int i = 0; i < dim(a); ++i) y[i] = c * xa[i];
    return {id};
}

Var Tape::sum(std::span<const Var> vs) {
    if (vs.empty()) throw ShapeError("tape: sum of nothing");
    int d = dim(check(vs[0]));
    for (Var v : vs)
        if (dim(check(v)) != d) throw ShapeError("tape: sum shape mismatch");
    int32_t id = push(Op::sum, d);
    Node& n = nodes_.back();
    n.args = static_cast<int32_t>(args_.size());
    n.nargs = static_cast<int32_t>(vs.size());
    for (Var v : vs) args_.push_back(v.id);
    double* y = vptr(id);
    for (Var v : vs) {
        const double* xa = vptr(v.id);
        for (int i = 0; i < d; ++i) y[i] += xa[i];
    }
    return {id};
}

Var Tape::weighted_sum(std::span<const Var> coeffs, std::span<const Var> vecs) {
    if (coeffs.empty() || coeffs.size() != vecs.size())
        throw ShapeError("tape: weighted_sum needs matching coeff/vec lists");
    int d = dim(check(vecs[0]));
    for (Var v : vecs)
        if (dim(check(v)) != d) throw ShapeError("tape: weighted_sum vec shape mismatch");
    for (Var c : coeffs)
        if (dim(check(c)) != 1) throw ShapeError("tape: weighted_sum coeffs must be scalar");
    int32_t id = push(Op::wsum, d);
    Node& n = nodes_.back();
    n.args = static_cast<int32_t>(args_.size());
    n.nargs = static_cast<int32_t>(2 * coeffs.size());
    for (Var c : coeffs) args_.push_back(c.id);
    for (Var v : vecs) args_.push_back(v.id);
    double* y = vptr(id);
    for (size_t k = 0; k < coeffs.size(); ++k) {
        double c = vals_[static_cast<size_t>(nodes_[static_cast<size_t>(coeffs[k].id)].val)];
        const double* xv = vptr(vecs[k].id);
        for (int i = 0; i < d; ++i) y[i] += c * xv[i];
    }
    return {id};
}

Var Tape::tanh_(Var a) {
    check(a);
    int32_t id = push(Op::tanh_, dim(a));
    nodes_.back().a = a.id;
    const double* xa = vptr(a.id);
    double* y = vptr(id);
    for (int i = 0; i < dim(a); ++i) y[i] = std::tanh(xa[i]);
    return {id};
}

Var Tape::elu(Var a) {
    check(a);
    int32_t id = push(Op::elu, dim(a));
    nodes_.back().a = a.id;
    const double* xa = vptr(a.id);
    double* y = vptr(id);
    for (int i = 0; i < dim(a); ++i) y[i] = kernels::elu(xa[i]);
    return {id};
}

Var Tape::leaky_relu(Var a, double slope) {
    check(a);
    int32_t id = push(Op::leaky, dim(a));
    nodes_.back().a = a.id;
    nodes_.back().aux = slope;
    const double* xa = vptr(a.id);
    double* y = vptr(id);
    for (int i = 0; i < dim(a); ++i) y[i] = kernels::leaky_relu(xa[i], slope);
    return {id};
}

Var Tape::squash(Var a) {
    check(a);
    int32_t id = push(Op::squash, dim(a));
    nodes_.back().a = a.id;
    nodes_.back().aux = kernels::squash(vptr(a.id), dim(a), vptr(id));
    return {id};
}

Var Tape::softmax(Var a) {
    check(a);
    int32_t id = push(Op::softmax, dim(a));
    nodes_.back().a = a.id;
    kernels::softmax(vptr(a.id), dim(a), vptr(id));
    return {id};
}

Var Tape::dot(Var a, Var b) {
    check(a);
    check(b);
    if (dim(a) != dim(b)) throw ShapeError("tape: dot shape mismatch");
    int32_t id = push(Op::dot, 1);
    nodes_.back().a = a.id;
    nodes_.back().b = b.id;
    vals_[static_cast<size_t>(nodes_.back().val)] = kernels::dot(vptr(a.id), vptr(b.id), dim(a));
    return {id};
}

Var Tape::pick(Var a, int index) {
    check(a);
    if (index < 0 || index >= dim(a)) throw ShapeError("tape: pick index out of range");
    int32_t id = push(Op::pick, 1);
    nodes_.back().a = a.id;
    nodes_.back().rows = index;
    vals_[static_cast<size_t>(nodes_.back().val)] = vptr(a.id)[index];
    return {id};
}

Var Tape::pack(std::span<const Var> scalars) {
    if (scalars.empty()) throw ShapeError("tape: pack of nothing");
    for (Var v : scalars)
        if (dim(check(v)) != 1) throw ShapeError("tape: pack takes scalar nodes");
    int32_t id = push(Op::pack, static_cast<int>(scalars.size()));
    Node& n = nodes_.back();
    n.args = static_cast<int32_t>(args_.size());
    n.nargs = static_cast<int32_t>(scalars.size());
    for (Var v : scalars) args_.push_back(v.id);
    double* y = vptr(id);
    for (size_t i = 0; i < scalars.size(); ++i)
        y[i] = vals_[static_cast<size_t>(nodes_[static_cast<size_t>(scalars[i].id)].val)];
    return {id};
}

Var Tape::concat(std::span<const Var> vs) {
    if (vs.empty()) throw ShapeError("tape: concat of nothing");
    int total = 0;
    for (Var v : vs) total += dim(check(v));
    int32_t id = push(Op::concat, total);
    Node& n = nodes_.back();
    n.args = static_cast<int32_t>(args_.size());
    n.nargs = static_cast<int32_t>(vs.size());
    for (Var v : vs) args_.push_back(v.id);
    double* y = vptr(id);
    int at = 0;
    for (Var v : vs) {
        const double* xa = vptr(v.id);
        for (int i = 0; i < dim(v); ++i) y[at++] = xa[i];
    }
    return {id};
}

Var Tape::norm(Var a) {
    check(a);
    int32_t id = push(Op::norm, 1);
    nodes_.back().a = a.id;
    vals_[static_cast<size_t>(nodes_.back().val)] = kernels::norm(vptr(a.id), dim(a));
    return {id};
}

Var Tape::cosine(Var a, Var b) {
    check(a);
    check(b);
    if (dim(a) != dim(b)) throw ShapeError("tape: cosine shape mismatch");
    int32_t id = push(Op::cosine, 1);
    nodes_.back().a = a.id;
    nodes_.back().b = b.id;
    vals_[static_cast<size_t>(nodes_.back().val)] = kernels::cosine(vptr(a.id), vptr(b.id), dim(a));
    return {id};
}

void Tape::backward(Var root, double seed) {
    const Node& r = node(root);
    if (r.dim != 1) throw ContractError("tape: backward from a non-scalar node");
    grads_.assign(vals_.size(), 0.0);
    grads_[static_cast<size_t>(r.val)] = seed;

    for (int32_t ni = static_cast<int32_t>(nodes_.size()) - 1; ni >= 0; --ni) {
        const Node& n = nodes_[static_cast<size_t>(ni)];
        const double* g = grads_.data() + n.val;
        switch (n.op) {
        case Op::input:
            break;
        case Op::param: {
            if (pgrad_ == nullptr) break;
            double* pg = pgrad_ + n.poff;
            for (int i = 0; i < n.dim; ++i) pg[i] += g[i];
            break;
        }
        case Op::matvec: {
            const Node& x = nodes_[static_cast<size_t>(n.a)];
            const double* xv = vals_.data() + x.val;
            double* xg = grads_.data() + x.val;
            const double* W = pstore_->data() + n.poff;
            double* Wg = (pgrad_ != nullptr) ? pgrad_ + n.poff : nullptr;
            for (int rr = 0; rr < n.rows; ++rr) {
                double gr = g[rr];
                if (gr == 0.0) continue;
                const double* wrow = W + static_cast<int64_t>(rr) * n.cols;
                for (int c = 0; c < n.cols; ++c) xg[c] += wrow[c] * gr;
                if (Wg != nullptr) {
                    double* wgrow = Wg + static_cast<int64_t>(rr) * n.cols;
                    for (int c = 0; c < n.cols; ++c) wgrow[c] += gr * xv[c];
                }
            }
            break;
        }
        case Op::add_param: {
            double* xg = grads_.data() + nodes_[static_cast<size_t>(n.a)].val;
            for (int i = 0; i < n.dim; ++i) xg[i] += g[i];
            if (pgrad_ != nullptr) {
                double* bg = pgrad_ + n.poff;
                for (int i = 0; i < n.dim; ++i) bg[i] += g[i];
            }
            break;
        }
        case Op::add: {
            double* ag = grads_.data() + nodes_[static_cast<size_t>(n.a)].val;
            double* bg = grads_.data() + nodes_[static_cast<size_t>(n.b)].val;
            for (int i = 0; i < n.dim; ++i) {
                ag[i] += g[i];
                bg[i] += g[i];
            }
            break;
        }
        case Op::sub: {
            double* ag = grads_.data() + nodes_[static_cast<size_t>(n.a)].val;
            double* bg = grads_.data() + nodes_[static_cast<size_t>(n.b)].val;
            for (int i = 0; i < n.dim; ++i) {
                ag[i] += g[i];
                bg[i] -= g[i];
            }
            break;
        }
        case Op::mul: {
            const Node& a = nodes_[static_cast<size_t>(n.a)];
            const Node& b = nodes_[static_cast<size_t>(n.b)];
            const double* av = vals_.data() + a.val;
            const double* bv = vals_.data() + b.val;
            double* ag = grads_.data() + a.val;
            double* bg = grads_.data() + b.val;
            for (int i = 0; i < n.dim; ++i) {
                ag[i] += g[i] * bv[i];
                bg[i] += g[i] * av[i];
            }
            break;
        }
        case Op::scale: {
            double* ag = grads_.data() + nodes_[static_cast<size_t>(n.a)].val;
            for (int i = 0; i < n.dim; ++i) ag[i] += n.aux * g[i];
            break;
        }
        case Op::sum: {
            for (int32_t k = 0; k < n.nargs; ++k) {
                double* ag = grads_.data() + nodes_[static_cast<size_t>(args_[static_cast<size_t>(n.args + k)])].val;
                for (int i = 0; i < n.dim; ++i) ag[i] += g[i];
            }
            break;
        }
        case Op::wsum: {
            int32_t k = n.nargs / 2;
            for (int32_t j = 0; j < k; ++j) {
                const Node& c = nodes_[static_cast<size_t>(args_[static_cast<size_t>(n.args + j)])];
                const Node& v = nodes_[static_cast<size_t>(args_[static_cast<size_t>(n.args + k + j)])];
                double cv = vals_[static_cast<size_t>(c.val)];
                const double* vv = vals_.data() + v.val;
                double* cg = grads_.data() + c.val;
                double* vg = grads_.data() + v.val;
                double acc = 0.0;
                for (int i = 0; i < n.dim; ++i) {
                    vg[i] += cv * g[i];
                    acc += vv[i] * g[i];
                }
                cg[0] += acc;
            }
            break;
        }
        case Op::tanh_: {
            const double* y = vals_.data() + n.val;
            double* ag = grads_.data() + nodes_[static_cast<size_t>(n.a)].val;
            for (int i = 0; i < n.dim; ++i) ag[i] += g[i] * (1.0 - y[i] * y[i]);
            break;
        }
        case Op::elu: {
            const Node& a = nodes_[static_cast<size_t>(n.a)];
            const double* xv = vals_.data() + a.val;
            const double* y = vals_.data() + n.val;
            double* ag = grads_.data() + a.val;
            // for x <= 0, d/dx expm1(x) = exp(x) = y + 1
            for (int i = 0; i < n.dim; ++i) ag[i] += g[i] * (xv[i] > 0.0 ? 1.0 : y[i] + 1.0);
            break;
        }
        case Op::leaky: {
            const double* xv = vals_.data() + nodes_[static_cast<size_t>(n.a)].val;
            double* ag = grads_.data() + nodes_[static_cast<size_t>(n.a)].val;
            for (int i = 0; i < n.dim; ++i) ag[i] += g[i] * (xv[i] >= 0.0 ? 1.0 : n.aux);
            break;
        }
        case Op::squash: {
            // y = k(n) x with k = n / (1 + n^2); dx = k g + (k'(n)/n) (x.g) x
            double nn = n.aux;
            if (nn == 0.0) break;
            const Node& a = nodes_[static_cast<size_t>(n.a)];
            const double* xv = vals_.data() + a.val;
            double* ag = grads_.data() + a.val;
            double k = nn / (1.0 + nn * nn);
            double kp = (1.0 - nn * nn) / ((1.0 + nn * nn) * (1.0 + nn * nn));
            double xg = 0.0;
            for (int i = 0; i < n.dim; ++i) xg += xv[i] * g[i];
            double c = kp / nn * xg;
            for (int i = 0; i < n.dim; ++i) ag[i] += k * g[i] + c * xv[i];
            break;
        }
        case Op::softmax: {
            const double* y = vals_.data() + n.val;
            double* ag = grads_.data() + nodes_[static_cast<size_t>(n.a)].val;
            double s = 0.0;
            for (int i = 0; i < n.dim; ++i) s += g[i] * y[i];
            for (int i = 0; i < n.dim; ++i) ag[i] += y[i] * (g[i] - s);
            break;
        }
        case Op::dot: {
            const Node& a = nodes_[static_cast<size_t>(n.a)];
            const Node& b = nodes_[static_cast<size_t>(n.b)];
            const double* av = vals_.data() + a.val;
            const double* bv = vals_.data() + b.val;
            double* ag = grads_.data() + a.val;
            double* bg = grads_.data() + b.val;
            double g0 = g[0];
            for (int i = 0; i < a.dim; ++i) {
                ag[i] += g0 * bv[i];
                bg[i] += g0 * av[i];
            }
            break;
        }
        case Op::pick: {
            grads_[static_cast<size_t>(nodes_[static_cast<size_t>(n.a)].val) + static_cast<size_t>(n.rows)] += g[0];
            break;
        }
        case Op::pack: {
            for (int32_t k = 0; k < n.nargs; ++k)
                grads_[static_cast<size_t>(nodes_[static_cast<size_t>(args_[static_cast<size_t>(n.args + k)])].val)] += g[k];
            break;
        }
        case Op::concat: {
            int at = 0;
            for (int32_t k = 0; k < n.nargs; ++k) {
                const Node& a = nodes_[static_cast<size_t>(args_[static_cast<size_t>(n.args + k)])];
                double* ag = grads_.data() + a.val;
                for (int i = 0; i < a.dim; ++i) ag[i] += g[at++];
            }
            break;
        }
        case Op::norm: {
            double nn = vals_[static_cast<size_t>(n.val)];
            if (nn == 0.0) break;
            const Node& a = nodes_[static_cast<size_t>(n.a)];
            const double* xv = vals_.data() + a.val;
            double* ag = grads_.data() + a.val;
            double c = g[0] / nn;
            for (int i = 0; i < a.dim; ++i) ag[i] += c * xv[i];
            break;
        }
        case Op::cosine: {
            const Node& a = nodes_[static_cast<size_t>(n.a)];
            const Node& b = nodes_[static_cast<size_t>(n.b)];
            const double* av = vals_.data() + a.val;
            const double* bv = vals_.data() + b.val;
            double na = kernels::norm(av, a.dim);
            double nb = kernels::norm(bv, b.dim);
            if (na == 0.0 || nb == 0.0) break;
            double cv = vals_[static_cast<size_t>(n.val)];
            double* ag = grads_.data() + a.val;
            double* bg = grads_.data() + b.val;
            double g0 = g[0];
            double inv = 1.0 / (na * nb);
            for (int i = 0; i < a.dim; ++i) {
                ag[i] += g0 * (bv[i] * inv - cv * av[i] / (na * na));
                bg[i] += g0 * (av[i] * inv - cv * bv[i] / (nb * nb));
            }
            break;
        }
        }
    }
}

} // namespace hapnet
