#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "chive/errors.hpp"
#include "chive/params.hpp"

namespace chive {

using NodeId = std::uint32_t;

// std::vector that leaves new doubles uninitialized on resize; every arena
// slot is written by the op that allocates it.
template <class T>
struct uninitialized_allocator : std::allocator<T> {
    template <class U>
    struct rebind {
        using other = uninitialized_allocator<U>;
    };
    using std::allocator<T>::allocator;
    template <class U>
    void construct(U* /*p*/) noexcept {}
    template <class U, class... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
};

using ValueArena = std::vector<double, uninitialized_allocator<double>>;

// Reverse-mode tape over rank <= 2 tensors. Ops evaluate eagerly as the
// graph is built, so later layout decisions (free-running unroll lengths)
// can read values computed earlier in the same graph. One tape corresponds
// to one utterance forward pass; backward() runs at most once.
class Tape {
public:
    Tape() { reserve(1 << 12); }

    void reserve(std::size_t nodes);

    // --- leaves ---------------------------------------------------------
    NodeId leaf(std::span<const double> values);
    NodeId leaf_matrix(std::uint32_t rows, std::uint32_t cols, std::span<const double> values);
    NodeId scalar_leaf(double value);
    // shared all-zero vector, cached per length
    NodeId zeros(std::uint32_t len);
    // parameter leaf; one node per parameter, cached per tape
    NodeId param(const ParameterStore& store, std::size_t param_index);

    // --- ops --------------------------------------------------------------
    NodeId affine(NodeId w, NodeId x, NodeId b);  // W*x + b
    NodeId matvec(NodeId w, NodeId x);            // W*x
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);  // elementwise
    NodeId concat(std::span<const NodeId> parts);
    NodeId slice(NodeId x, std::uint32_t offset, std::uint32_t len);
    NodeId tanh(NodeId x);
    NodeId sigmoid(NodeId x);
    NodeId exp(NodeId x);
    NodeId square(NodeId x);
    NodeId scale_shift(NodeId x, double scale, double shift);  // scale*x + shift
    NodeId sum(NodeId x);                                      // reduce to scalar

    // --- access -----------------------------------------------------------
    std::span<const double> value(NodeId id) const;
    double scalar(NodeId id) const;
    std::uint32_t length(NodeId id) const;
    std::size_t node_count() const { return nodes_.size(); }

    // --- reverse pass -----------------------------------------------------
    void backward(NodeId loss);  // seeds d(loss)/d(loss) = 1
    std::span<const double> grad(NodeId id) const;
    // adds every parameter leaf's gradient into flat (ParameterStore layout)
    void accumulate_param_grads(std::span<double> flat) const;

private:
    enum class OpKind : std::uint8_t {
        kLeaf,
        kAffine,
        kMatvec,
        kAdd,
        kSub,
        kMul,
        kConcat,
        kSlice,
        kTanh,
        kSigmoid,
        kExp,
        kSquare,
        kScaleShift,
        kSum,
    };

    struct Node {
        OpKind op;
        NodeId a = 0, b = 0, c = 0;  // inputs; for concat b = part count
        std::uint32_t aux = 0;       // concat list start / slice offset / scalar pair index
        std::uint32_t off = 0;       // values/grads arena offset
        std::uint32_t len = 0;
        std::uint32_t rows = 0, cols = 0;  // rank-2 leaves only
    };

    NodeId push(OpKind op, std::uint32_t len, NodeId a = 0, NodeId b = 0, NodeId c = 0,
                std::uint32_t aux = 0);
    double* data(NodeId id) { return values_.data() + nodes_[id].off; }
    const double* data(NodeId id) const { return values_.data() + nodes_[id].off; }

    std::vector<Node> nodes_;
    ValueArena values_;
    std::vector<double> grads_;
    bool has_grads_ = false;
    std::vector<NodeId> concat_parts_;
    std::vector<double> scalar_pairs_;  // (scale, shift) pairs for kScaleShift
    std::unordered_map<std::uint32_t, NodeId> zero_cache_;
    std::vector<std::pair<std::size_t, NodeId>> param_leaves_;  // (store offset, node)
    std::unordered_map<std::size_t, NodeId> param_cache_;       // param index -> node
};

}  // namespace chive
