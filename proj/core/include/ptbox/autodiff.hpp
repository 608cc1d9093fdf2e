#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ptbox {

// A trainable tensor: flat values plus an accumulated gradient of the same
// shape. Tapes reference Param storage directly, so values must stay put
// while a tape built over them is alive.
struct Param {
    std::string name;
    std::vector<double> value;
    std::vector<double> grad;

    Param() = default;
    Param(std::string n, std::size_t size, double init = 0.0)
        : name(std::move(n)), value(size, init), grad(size, 0.0) {}

    std::size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

// Reverse-mode tape over dense real vectors. Nodes are vector-valued
// (scalars are length-1 nodes); operations evaluate eagerly as they are
// recorded, so any forward value can be branched on while building.
// backward() accumulates into Param::grad and may be called repeatedly;
// clear() resets the tape while keeping its allocations for reuse.
class Tape {
  public:
    using NodeId = std::int32_t;

    // --- leaves -----------------------------------------------------------
    NodeId leaf(Param& p) { return leaf(p, 0, p.size()); }
    NodeId leaf(Param& p, std::size_t offset, std::size_t len);
    NodeId constant(std::span<const double> v);
    NodeId constant(double v);

    // --- elementwise, equal lengths ---------------------------------------
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);  // Hadamard
    NodeId logsumexp2(NodeId a, NodeId b);
    NodeId max_ew(NodeId a, NodeId b);

    // --- elementwise, unary -----------------------------------------------
    NodeId neg(NodeId a);
    NodeId exp_ew(NodeId a);
    NodeId log_ew(NodeId a);
    NodeId inv(NodeId a);
    NodeId sqrt_ew(NodeId a);
    NodeId add_const(NodeId a, double c);
    NodeId scale_const(NodeId a, double c);
    NodeId clamp(NodeId a, double lo, double hi);
    NodeId log_softplus(NodeId a);  // log(log(1 + e^x)), stable for all x
    NodeId log1mexp(NodeId a);      // log(1 - e^x) for x < 0

    // --- reductions and vector-scalar forms -------------------------------
    NodeId dot(NodeId a, NodeId b);       // length-1 result
    NodeId sum(NodeId a);                 // length-1 result
    NodeId scale_vs(NodeId v, NodeId s);  // vector times length-1 node

    // out[j] = sum_k w[k] * x[k*d + j]; gradient of x is the outer product
    // of w and the upstream adjoint.
    NodeId basis_combine(NodeId x, std::span<const double> w, int d);

    // --- inspection ---------------------------------------------------------
    std::span<const double> value(NodeId id) const;
    double scalar(NodeId id) const;
    std::size_t length(NodeId id) const;
    std::size_t num_nodes() const { return nodes_.size(); }

    // Redirects leaf gradient writes from Param::grad into caller-owned
    // buffers (same shape as the Param), so worker threads can accumulate
    // privately and merge deterministically. Unlisted Params keep Param::grad.
    struct GradSinks {
        struct Entry {
            const Param* param = nullptr;
            double* grad = nullptr;
        };
        std::vector<Entry> entries;

        double* find(const Param* p) const {
            for (const auto& e : entries)
                if (e.param == p) return e.grad;
            return nullptr;
        }
    };

    // Seeds the root adjoint and propagates in reverse topological order.
    // Root must be a length-1 node and the tape non-empty.
    void backward(NodeId root, double seed = 1.0,
                  const GradSinks* sinks = nullptr);

    void clear();

  private:
    enum class Op : std::uint8_t {
        Leaf, Const, Add, Sub, Mul, LogSumExp2, MaxEw,
        Neg, Exp, Log, Inv, Sqrt, AddConst, ScaleConst, Clamp,
        LogSoftplus, Log1mExp, Dot, Sum, ScaleVS, BasisCombine,
    };
    static const char* op_name(Op op);

    struct Node {
        Op op;
        NodeId a = -1;
        NodeId b = -1;
        std::uint32_t len = 0;
        std::uint32_t val_off = 0;   // into values_, unless external
        std::uint32_t adj_off = 0;   // into adjoints_
        std::uint32_t aux = 0;       // into aux_ (weights for BasisCombine)
        bool external = false;       // value lives in a Param
        Param* param = nullptr;      // Leaf only
        std::uint32_t param_off = 0;
        double c0 = 0.0, c1 = 0.0;   // op constants (AddConst, Clamp bounds)
    };

    const double* values_of(const Node& n) const {
        return n.external ? n.param->value.data() + n.param_off
                          : values_.data() + n.val_off;
    }
    NodeId push(Node n);
    double* alloc_values(std::uint32_t len, std::uint32_t& off);
    void check_finite(NodeId id);

    std::vector<Node> nodes_;
    std::vector<double> values_;
    std::vector<double> adjoints_;
    std::vector<double> aux_;
    std::size_t adj_len_ = 0;
};

}  // namespace ptbox
