#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "umss/nn/tensor.hpp"

namespace umss::nn {

struct Node;
using Var = std::shared_ptr<Node>;

// One node of the dynamic compute graph. Ops allocate a node, fill `value`,
// record parents and a closure that scatters `grad` back into them.
struct Node {
    Tensor value;
    Tensor grad;                 // allocated on demand, same shape as value
    bool requires_grad = false;
    const char* op = "leaf";     // label used by structural graph audits
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.empty()) grad = Tensor::zeros(value.shape());
    }
};

// Leaf that participates in optimization.
Var make_param(Tensor value);
// Leaf that carries data only; no gradient is accumulated into it.
Var make_constant(Tensor value);

Var make_op(Tensor value, std::vector<Var> parents, const char* op,
            std::function<void(Node&)> backward_fn);

// Reverse-mode sweep from a scalar root (seed gradient 1).
void backward(const Var& root);

// Depth-first ancestor walk. `visit` returns false to stop descending
// below a node (its parents are not explored). Used for graph audits.
void walk_ancestors(const Var& root, const std::function<bool(const Node&)>& visit);

} // namespace umss::nn
