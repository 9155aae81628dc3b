#include "umss/nn/graph.hpp"

#include <unordered_set>

namespace umss::nn {

Var make_param(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->op = "param";
    return n;
}

Var make_constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = false;
    n->op = "const";
    return n;
}

Var make_op(Tensor value, std::vector<Var> parents, const char* op,
            std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->op = op;
    n->parents = std::move(parents);
    for (const auto& p : n->parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    if (n->requires_grad) n->backward_fn = std::move(backward_fn);
    return n;
}

namespace {

void topo_sort(const Var& root, std::vector<Node*>& order) {
    // Iterative DFS; graphs can be deep for long loss chains.
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* parent = node->parents[idx].get();
            ++idx;
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
}

} // namespace

void backward(const Var& root) {
    require(root->value.size() == 1, "backward requires a scalar root");
    if (!root->requires_grad) return;
    std::vector<Node*> order;
    topo_sort(root, order);
    root->ensure_grad();
    root->grad[0] = 1.0;
    // order is parents-first; run it reversed so each node's grad is complete
    // before its backward_fn scatters into parents.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (!node->backward_fn || node->grad.empty()) continue;
        for (auto& p : node->parents)
            if (p->requires_grad) p->ensure_grad();
        node->backward_fn(*node);
    }
}

void walk_ancestors(const Var& root, const std::function<bool(const Node&)>& visit) {
    std::unordered_set<const Node*> seen;
    std::vector<const Node*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        const Node* n = stack.back();
        stack.pop_back();
        if (!visit(*n)) continue;
        for (const auto& p : n->parents) {
            if (!seen.count(p.get())) {
                seen.insert(p.get());
                stack.push_back(p.get());
            }
        }
    }
}

} // namespace umss::nn
