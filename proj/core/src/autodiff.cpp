#include "ptbox/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <cstring>

#include "ptbox/errors.hpp"

namespace ptbox {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

// log(softplus(x)). Below -33 softplus(x) = e^x to machine precision, so
// the log is just x; this avoids log(0) for strongly negative inputs.
double log_softplus_val(double x) {
    if (x < -33.0) return x;
    return std::log(softplus(x));
}

double log_softplus_grad(double x) {
    if (x < -33.0) return 1.0;
    return sigmoid(x) / softplus(x);
}

double log1mexp_val(double x) {
    // log(1 - e^x) for x < 0; the two branches keep precision on both sides
    // of x = -log 2.
    if (x > -0.6931471805599453) return std::log(-std::expm1(x));
    return std::log1p(-std::exp(x));
}

}  // namespace

const char* Tape::op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Const: return "const";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::LogSumExp2: return "logsumexp2";
        case Op::MaxEw: return "max";
        case Op::Neg: return "neg";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Inv: return "inv";
        case Op::Sqrt: return "sqrt";
        case Op::AddConst: return "add_const";
        case Op::ScaleConst: return "scale_const";
        case Op::Clamp: return "clamp";
        case Op::LogSoftplus: return "log_softplus";
        case Op::Log1mExp: return "log1mexp";
        case Op::Dot: return "dot";
        case Op::Sum: return "sum";
        case Op::ScaleVS: return "scale_vs";
        case Op::BasisCombine: return "basis_combine";
    }
    return "?";
}

Tape::NodeId Tape::push(Node n) {
    n.adj_off = static_cast<std::uint32_t>(adj_len_);
    adj_len_ += n.len;
    nodes_.push_back(n);
    return static_cast<NodeId>(nodes_.size() - 1);
}

double* Tape::alloc_values(std::uint32_t len, std::uint32_t& off) {
    off = static_cast<std::uint32_t>(values_.size());
    values_.resize(values_.size() + len);
    return values_.data() + off;
}

void Tape::check_finite(NodeId id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    const double* v = values_of(n);
    for (std::uint32_t i = 0; i < n.len; ++i) {
        if (!std::isfinite(v[i])) {
            throw NumericError(std::string("non-finite value produced by op '") +
                               op_name(n.op) + "'");
        }
    }
}

Tape::NodeId Tape::leaf(Param& p, std::size_t offset, std::size_t len) {
    assert(offset + len <= p.size());
    Node n;
    n.op = Op::Leaf;
    n.len = static_cast<std::uint32_t>(len);
    n.external = true;
    n.param = &p;
    n.param_off = static_cast<std::uint32_t>(offset);
    return push(n);
}

Tape::NodeId Tape::constant(std::span<const double> v) {
    Node n;
    n.op = Op::Const;
    n.len = static_cast<std::uint32_t>(v.size());
    double* out = alloc_values(n.len, n.val_off);
    std::memcpy(out, v.data(), v.size() * sizeof(double));
    return push(n);
}

Tape::NodeId Tape::constant(double v) { return constant(std::span<const double>(&v, 1)); }

// alloc_values may grow values_ and so must run before any values_of call:
// operand pointers taken earlier would dangle after the resize.
#define PTBOX_BINARY_PROLOGUE(ida, idb)                                     \
    Node n;                                                                 \
    n.a = ida;                                                              \
    n.b = idb;                                                              \
    n.len = nodes_[static_cast<std::size_t>(ida)].len;                      \
    assert(n.len == nodes_[static_cast<std::size_t>(idb)].len);             \
    double* out = alloc_values(n.len, n.val_off);                           \
    const double* va = values_of(nodes_[static_cast<std::size_t>(ida)]);    \
    const double* vb = values_of(nodes_[static_cast<std::size_t>(idb)]);

#define PTBOX_UNARY_PROLOGUE(ida)                                           \
    Node n;                                                                 \
    n.a = ida;                                                              \
    n.len = nodes_[static_cast<std::size_t>(ida)].len;                      \
    double* out = alloc_values(n.len, n.val_off);                           \
    const double* va = values_of(nodes_[static_cast<std::size_t>(ida)]);

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    PTBOX_BINARY_PROLOGUE(a, b)
    n.op = Op::Add;
    for (std::uint32_t i = 0; i < n.len; ++i) out[i] = va[i] + vb[i];
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
    PTBOX_BINARY_PROLOGUE(a, b)
    n.op = Op::Sub;
    for (std::uint32_t i = 0; i < n.len; ++i) out[i] = va[i] - vb[i];
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    PTBOX_BINARY_PROLOGUE(a, b)
    n.op = Op::Mul;
    for (std::uint32_t i = 0; i < n.len; ++i) out[i] = va[i] * vb[i];
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::logsumexp2(NodeId a, NodeId b) {
    PTBOX_BINARY_PROLOGUE(a, b)
    n.op = Op::LogSumExp2;
    for (std::uint32_t i = 0; i < n.len; ++i) {
        const double m = va[i] > vb[i] ? va[i] : vb[i];
        const double d = va[i] > vb[i] ? vb[i] - va[i] : va[i] - vb[i];
        out[i] = m + std::log1p(std::exp(d));
    }
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::max_ew(NodeId a, NodeId b) {
    PTBOX_BINARY_PROLOGUE(a, b)
    n.op = Op::MaxEw;
    for (std::uint32_t i = 0; i < n.len; ++i) out[i] = va[i] > vb[i] ? va[i] : vb[i];
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::neg(NodeId a) {
    PTBOX_UNARY_PROLOGUE(a)
    n.op = Op::Neg;
    for (std::uint32_t i = 0; i < n.len; ++i) out[i] = -va[i];
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::exp_ew(NodeId a) {
    PTBOX_UNARY_PROLOGUE(a)
    n.op = Op::Exp;
    for (std::uint32_t i = 0; i < n.len; ++i) out[i] = std::exp(va[i]);
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::log_ew(NodeId a) {
    PTBOX_UNARY_PROLOGUE(a)
    n.op = Op::Log;
    for (std::uint32_t i = 0; i < n.len; ++i) out[i] = std::log(va[i]);
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::inv(NodeId a) {
    PTBOX_UNARY_PROLOGUE(a)
    n.op = Op::Inv;
    for (std::uint32_t i = 0; i < n.len; ++i) out[i] = 1.0 / va[i];
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::sqrt_ew(NodeId a) {
    PTBOX_UNARY_PROLOGUE(a)
    n.op = Op::Sqrt;
    for (std::uint32_t i = 0; i < n.len; ++i) out[i] = std::sqrt(va[i]);
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::add_const(NodeId a, double c) {
    PTBOX_UNARY_PROLOGUE(a)
    n.op = Op::AddConst;
    n.c0 = c;
    for (std::uint32_t i = 0; i < n.len; ++i) out[i] = va[i] + c;
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::scale_const(NodeId a, double c) {
    PTBOX_UNARY_PROLOGUE(a)
    n.op = Op::ScaleConst;
    n.c0 = c;
    for (std::uint32_t i = 0; i < n.len; ++i) out[i] = va[i] * c;
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::clamp(NodeId a, double lo, double hi) {
    PTBOX_UNARY_PROLOGUE(a)
    n.op = Op::Clamp;
    n.c0 = lo;
    n.c1 = hi;
    for (std::uint32_t i = 0; i < n.len; ++i)
        out[i] = va[i] < lo ? lo : (va[i] > hi ? hi : va[i]);
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::log_softplus(NodeId a) {
    PTBOX_UNARY_PROLOGUE(a)
    n.op = Op::LogSoftplus;
    for (std::uint32_t i = 0; i < n.len; ++i) out[i] = log_softplus_val(va[i]);
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::log1mexp(NodeId a) {
    PTBOX_UNARY_PROLOGUE(a)
    n.op = Op::Log1mExp;
    for (std::uint32_t i = 0; i < n.len; ++i) out[i] = log1mexp_val(va[i]);
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::dot(NodeId a, NodeId b) {
    Node n;
    n.op = Op::Dot;
    n.a = a;
    n.b = b;
    n.len = 1;
    double* out = alloc_values(1, n.val_off);
    const Node& na = nodes_[static_cast<std::size_t>(a)];
    const Node& nb = nodes_[static_cast<std::size_t>(b)];
    assert(na.len == nb.len);
    const double* va = values_of(na);
    const double* vb = values_of(nb);
    double acc = 0.0;
    for (std::uint32_t i = 0; i < na.len; ++i) acc += va[i] * vb[i];
    out[0] = acc;
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::sum(NodeId a) {
    Node n;
    n.op = Op::Sum;
    n.a = a;
    n.len = 1;
    double* out = alloc_values(1, n.val_off);
    const Node& na = nodes_[static_cast<std::size_t>(a)];
    const double* va = values_of(na);
    double acc = 0.0;
    for (std::uint32_t i = 0; i < na.len; ++i) acc += va[i];
    out[0] = acc;
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::scale_vs(NodeId v, NodeId s) {
    Node n;
    n.op = Op::ScaleVS;
    n.a = v;
    n.b = s;
    n.len = nodes_[static_cast<std::size_t>(v)].len;
    assert(nodes_[static_cast<std::size_t>(s)].len == 1);
    double* out = alloc_values(n.len, n.val_off);
    const double* vv = values_of(nodes_[static_cast<std::size_t>(v)]);
    const double sv = values_of(nodes_[static_cast<std::size_t>(s)])[0];
    for (std::uint32_t i = 0; i < n.len; ++i) out[i] = vv[i] * sv;
    NodeId id = push(n);
    check_finite(id);
    return id;
}

Tape::NodeId Tape::basis_combine(NodeId x, std::span<const double> w, int d) {
    const int k = static_cast<int>(w.size());
    Node n;
    n.op = Op::BasisCombine;
    n.a = x;
    n.len = static_cast<std::uint32_t>(d);
    assert(nodes_[static_cast<std::size_t>(x)].len ==
           static_cast<std::uint32_t>(k * d));
    n.aux = static_cast<std::uint32_t>(aux_.size());
    aux_.insert(aux_.end(), w.begin(), w.end());
    n.c0 = static_cast<double>(k);
    double* out = alloc_values(n.len, n.val_off);
    const double* vx = values_of(nodes_[static_cast<std::size_t>(x)]);
    for (int j = 0; j < d; ++j) out[j] = 0.0;
    for (int r = 0; r < k; ++r) {
        const double wr = w[static_cast<std::size_t>(r)];
        if (wr == 0.0) continue;
        const double* row = vx + static_cast<std::size_t>(r) * d;
        for (int j = 0; j < d; ++j) out[j] += wr * row[j];
    }
    NodeId id = push(n);
    check_finite(id);
    return id;
}

std::span<const double> Tape::value(NodeId id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return {values_of(n), n.len};
}

double Tape::scalar(NodeId id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    assert(n.len == 1);
    return values_of(n)[0];
}

std::size_t Tape::length(NodeId id) const {
    return nodes_[static_cast<std::size_t>(id)].len;
}

void Tape::backward(NodeId root, double seed, const GradSinks* sinks) {
    if (nodes_.empty() || root < 0 ||
        root >= static_cast<NodeId>(nodes_.size())) {
        throw NumericError("backward called without a recorded forward pass");
    }
    const Node& r = nodes_[static_cast<std::size_t>(root)];
    if (r.len != 1) throw NumericError("backward root must be a scalar node");
    adjoints_.assign(adj_len_, 0.0);
    adjoints_[r.adj_off] = seed;

    for (std::size_t idx = nodes_.size(); idx-- > 0;) {
        const Node& n = nodes_[idx];
        const double* g = adjoints_.data() + n.adj_off;
        switch (n.op) {
            case Op::Leaf: {
                if (n.param) {
                    double* base = nullptr;
                    if (sinks) base = sinks->find(n.param);
                    if (!base) base = n.param->grad.data();
                    double* dst = base + n.param_off;
                    for (std::uint32_t i = 0; i < n.len; ++i) dst[i] += g[i];
                }
                break;
            }
            case Op::Const:
                break;
            case Op::Add: {
                double* ga = adjoints_.data() + nodes_[static_cast<std::size_t>(n.a)].adj_off;
                double* gb = adjoints_.data() + nodes_[static_cast<std::size_t>(n.b)].adj_off;
                for (std::uint32_t i = 0; i < n.len; ++i) {
                    ga[i] += g[i];
                    gb[i] += g[i];
                }
                break;
            }
            case Op::Sub: {
                double* ga = adjoints_.data() + nodes_[static_cast<std::size_t>(n.a)].adj_off;
                double* gb = adjoints_.data() + nodes_[static_cast<std::size_t>(n.b)].adj_off;
                for (std::uint32_t i = 0; i < n.len; ++i) {
                    ga[i] += g[i];
                    gb[i] -= g[i];
                }
                break;
            }
            case Op::Mul: {
                const Node& na = nodes_[static_cast<std::size_t>(n.a)];
                const Node& nb = nodes_[static_cast<std::size_t>(n.b)];
                const double* va = values_of(na);
                const double* vb = values_of(nb);
                double* ga = adjoints_.data() + na.adj_off;
                double* gb = adjoints_.data() + nb.adj_off;
                for (std::uint32_t i = 0; i < n.len; ++i) {
                    ga[i] += g[i] * vb[i];
                    gb[i] += g[i] * va[i];
                }
                break;
            }
            case Op::LogSumExp2: {
                const Node& na = nodes_[static_cast<std::size_t>(n.a)];
                const Node& nb = nodes_[static_cast<std::size_t>(n.b)];
                const double* va = values_of(na);
                const double* vb = values_of(nb);
                double* ga = adjoints_.data() + na.adj_off;
                double* gb = adjoints_.data() + nb.adj_off;
                for (std::uint32_t i = 0; i < n.len; ++i) {
                    const double wa = sigmoid(va[i] - vb[i]);
                    ga[i] += g[i] * wa;
                    gb[i] += g[i] * (1.0 - wa);
                }
                break;
            }
            case Op::MaxEw: {
                const Node& na = nodes_[static_cast<std::size_t>(n.a)];
                const Node& nb = nodes_[static_cast<std::size_t>(n.b)];
                const double* va = values_of(na);
                const double* vb = values_of(nb);
                double* ga = adjoints_.data() + na.adj_off;
                double* gb = adjoints_.data() + nb.adj_off;
                for (std::uint32_t i = 0; i < n.len; ++i) {
                    // exact ties split the adjoint evenly
                    const double wa = va[i] > vb[i] ? 1.0 : (va[i] < vb[i] ? 0.0 : 0.5);
                    ga[i] += g[i] * wa;
                    gb[i] += g[i] * (1.0 - wa);
                }
                break;
            }
            case Op::Neg: {
                double* ga = adjoints_.data() + nodes_[static_cast<std::size_t>(n.a)].adj_off;
                for (std::uint32_t i = 0; i < n.len; ++i) ga[i] -= g[i];
                break;
            }
            case Op::Exp: {
                const double* out = values_of(n);
                double* ga = adjoints_.data() + nodes_[static_cast<std::size_t>(n.a)].adj_off;
                for (std::uint32_t i = 0; i < n.len; ++i) ga[i] += g[i] * out[i];
                break;
            }
            case Op::Log: {
                const Node& na = nodes_[static_cast<std::size_t>(n.a)];
                const double* va = values_of(na);
                double* ga = adjoints_.data() + na.adj_off;
                for (std::uint32_t i = 0; i < n.len; ++i) ga[i] += g[i] / va[i];
                break;
            }
            case Op::Inv: {
                const double* out = values_of(n);
                double* ga = adjoints_.data() + nodes_[static_cast<std::size_t>(n.a)].adj_off;
                for (std::uint32_t i = 0; i < n.len; ++i) ga[i] -= g[i] * out[i] * out[i];
                break;
            }
            case Op::Sqrt: {
                const double* out = values_of(n);
                double* ga = adjoints_.data() + nodes_[static_cast<std::size_t>(n.a)].adj_off;
                for (std::uint32_t i = 0; i < n.len; ++i) ga[i] += g[i] * 0.5 / out[i];
                break;
            }
            case Op::AddConst: {
                double* ga = adjoints_.data() + nodes_[static_cast<std::size_t>(n.a)].adj_off;
                for (std::uint32_t i = 0; i < n.len; ++i) ga[i] += g[i];
                break;
            }
            case Op::ScaleConst: {
                double* ga = adjoints_.data() + nodes_[static_cast<std::size_t>(n.a)].adj_off;
                for (std::uint32_t i = 0; i < n.len; ++i) ga[i] += g[i] * n.c0;
                break;
            }
            case Op::Clamp: {
                const Node& na = nodes_[static_cast<std::size_t>(n.a)];
                const double* va = values_of(na);
                double* ga = adjoints_.data() + na.adj_off;
                for (std::uint32_t i = 0; i < n.len; ++i) {
                    if (va[i] >= n.c0 && va[i] <= n.c1) ga[i] += g[i];
                }
                break;
            }
            case Op::LogSoftplus: {
                const Node& na = nodes_[static_cast<std::size_t>(n.a)];
                const double* va = values_of(na);
                double* ga = adjoints_.data() + na.adj_off;
                for (std::uint32_t i = 0; i < n.len; ++i)
                    ga[i] += g[i] * log_softplus_grad(va[i]);
                break;
            }
            case Op::Log1mExp: {
                const Node& na = nodes_[static_cast<std::size_t>(n.a)];
                const double* va = values_of(na);
                const double* out = values_of(n);
                double* ga = adjoints_.data() + na.adj_off;
                // d/dx log(1 - e^x) = -e^(x - out)
                for (std::uint32_t i = 0; i < n.len; ++i)
                    ga[i] -= g[i] * std::exp(va[i] - out[i]);
                break;
            }
            case Op::Dot: {
                const Node& na = nodes_[static_cast<std::size_t>(n.a)];
                const Node& nb = nodes_[static_cast<std::size_t>(n.b)];
                const double* va = values_of(na);
                const double* vb = values_of(nb);
                double* ga = adjoints_.data() + na.adj_off;
                double* gb = adjoints_.data() + nb.adj_off;
                const double g0 = g[0];
                for (std::uint32_t i = 0; i < na.len; ++i) {
                    ga[i] += g0 * vb[i];
                    gb[i] += g0 * va[i];
                }
                break;
            }
            case Op::Sum: {
                const Node& na = nodes_[static_cast<std::size_t>(n.a)];
                double* ga = adjoints_.data() + na.adj_off;
                const double g0 = g[0];
                for (std::uint32_t i = 0; i < na.len; ++i) ga[i] += g0;
                break;
            }
            case Op::ScaleVS: {
                const Node& na = nodes_[static_cast<std::size_t>(n.a)];
                const Node& nb = nodes_[static_cast<std::size_t>(n.b)];
                const double* va = values_of(na);
                const double sv = values_of(nb)[0];
                double* ga = adjoints_.data() + na.adj_off;
                double* gs = adjoints_.data() + nb.adj_off;
                double acc = 0.0;
                for (std::uint32_t i = 0; i < n.len; ++i) {
                    ga[i] += g[i] * sv;
                    acc += g[i] * va[i];
                }
                gs[0] += acc;
                break;
            }
            case Op::BasisCombine: {
                const Node& na = nodes_[static_cast<std::size_t>(n.a)];
                double* ga = adjoints_.data() + na.adj_off;
                const int k = static_cast<int>(n.c0);
                const int d = static_cast<int>(n.len);
                const double* w = aux_.data() + n.aux;
                for (int r = 0; r < k; ++r) {
                    const double wr = w[r];
                    if (wr == 0.0) continue;
                    double* row = ga + static_cast<std::size_t>(r) * d;
                    for (int j = 0; j < d; ++j) row[j] += wr * g[j];
                }
                break;
            }
        }
    }
}

void Tape::clear() {
    nodes_.clear();
    values_.clear();
    adjoints_.clear();
    aux_.clear();
    adj_len_ = 0;
}

}  // namespace ptbox
