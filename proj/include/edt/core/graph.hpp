#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "edt/core/tensor.hpp"

namespace edt::ad {

class Graph;

/// Handle to a node on a Graph's tape. Cheap to copy; valid for the
/// lifetime of the graph it came from.
struct Var {
    Graph* g = nullptr;
    std::size_t id = 0;

    const Tensor& val() const;
    const Shape& shape() const;
    std::size_t size() const;
};

/// Context handed to a node's backward closure: the incoming gradient plus
/// accessors for input values and input gradient accumulators.
class BackCtx {
public:
    BackCtx(Graph& g, std::size_t node, std::vector<Tensor>& grads);

    const Tensor& out_grad() const { return *out_grad_; }
    const Tensor& out_val() const;
    const Tensor& in(std::size_t k) const;
    Tensor& grad(std::size_t k);  // lazily allocated zero tensor, shape of input k

private:
    Graph& g_;
    std::size_t node_;
    std::vector<Tensor>& grads_;
    const Tensor* out_grad_;
};

using BackwardFn = std::function<void(BackCtx&)>;

/// Append-only tape. Inputs always precede outputs, so a single reverse
/// sweep implements reverse-mode accumulation. Rebuilt per forward pass;
/// confined to one execution context during construction and backward.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = delete;
    Graph& operator=(Graph&&) = delete;

    /// Non-trainable leaf.
    Var input(Tensor v) {
        v.require_finite("graph input");
        return append(std::move(v), {}, nullptr, false);
    }

    /// Trainable leaf; recorded in the parameter set.
    Var param(Tensor v) {
        v.require_finite("graph parameter");
        Var r = append(std::move(v), {}, nullptr, true);
        params_.push_back(r.id);
        return r;
    }

    /// Append an op result. Every output is checked finite: NaN/Inf is an
    /// error surfaced at the op that produced it, never propagated.
    Var emit(Tensor out, std::vector<std::size_t> inputs, BackwardFn backward) {
        out.require_finite("op output");
        return append(std::move(out), std::move(inputs), std::move(backward), false);
    }

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    const std::vector<std::size_t>& inputs_of(std::size_t id) const { return nodes_[id].inputs; }
    std::size_t num_nodes() const { return nodes_.size(); }
    const std::vector<std::size_t>& params() const { return params_; }
    bool trainable(std::size_t id) const { return nodes_[id].trainable; }

    /// Reverse-topological accumulation from a scalar loss. Gradients are
    /// retained on the graph until the next backward() call. Parameters not
    /// reached by the sweep get an explicit zero gradient.
    void backward(Var loss) {
        if (loss.g != this) throw std::invalid_argument("backward: loss from another graph");
        if (value(loss.id).size() != 1)
            throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                        shape_str(value(loss.id).shape()));
        grads_.assign(nodes_.size(), Tensor());
        grads_[loss.id] = Tensor::ones(value(loss.id).shape());
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            if (grads_[i].empty() || !nodes_[i].backward) continue;
            BackCtx ctx(*this, i, grads_);
            nodes_[i].backward(ctx);
        }
        for (std::size_t p : params_)
            if (grads_[p].empty()) grads_[p] = Tensor::zeros(value(p).shape());
    }

    /// Gradient of the last backward()'s loss w.r.t. a node. Nodes the
    /// sweep never reached read as zeros.
    Tensor grad(Var v) const {
        if (v.g != this) throw std::invalid_argument("grad: node from another graph");
        if (grads_.empty()) throw std::logic_error("grad: backward() has not been run");
        if (grads_[v.id].empty()) return Tensor::zeros(value(v.id).shape());
        return grads_[v.id];
    }

private:
    friend class BackCtx;

    struct Node {
        Tensor value;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        bool trainable = false;
    };

    Var append(Tensor v, std::vector<std::size_t> inputs, BackwardFn fn, bool trainable) {
        nodes_.push_back(Node{std::move(v), std::move(inputs), std::move(fn), trainable});
        return Var{this, nodes_.size() - 1};
    }

    std::vector<Node> nodes_;
    std::vector<std::size_t> params_;
    std::vector<Tensor> grads_;
};

inline const Tensor& Var::val() const { return g->value(id); }
inline const Shape& Var::shape() const { return g->value(id).shape(); }
inline std::size_t Var::size() const { return g->value(id).size(); }

inline BackCtx::BackCtx(Graph& g, std::size_t node, std::vector<Tensor>& grads)
    : g_(g), node_(node), grads_(grads), out_grad_(&grads[node]) {}

inline const Tensor& BackCtx::out_val() const { return g_.value(node_); }

inline const Tensor& BackCtx::in(std::size_t k) const {
    return g_.value(g_.nodes_[node_].inputs[k]);
}

inline Tensor& BackCtx::grad(std::size_t k) {
    std::size_t id = g_.nodes_[node_].inputs[k];
    if (grads_[id].empty()) grads_[id] = Tensor::zeros(g_.value(id).shape());
    return grads_[id];
}

}  // namespace edt::ad
