#include "pumpwatch/nn/tensor.hpp"

#include <unordered_set>

#include "pumpwatch/errors.hpp"

namespace pumpwatch::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

Tensor Tensor::zeros(std::int64_t rows, std::int64_t cols, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->value.assign(static_cast<std::size_t>(rows * cols), 0.0);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from_values(std::int64_t rows, std::int64_t cols,
                           std::vector<double> values, bool requires_grad) {
    if (static_cast<std::int64_t>(values.size()) != rows * cols)
        throw ShapeMismatch("from_values: got " + std::to_string(values.size()) +
                            " values for " + std::to_string(rows) + "x" +
                            std::to_string(cols));
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return from_values(1, 1, {v}); }

double Tensor::item() const {
    if (!node_ || node_->rows != 1 || node_->cols != 1)
        throw NonScalarLoss("item() requires a 1x1 tensor");
    return node_->value[0];
}

const std::vector<double>& Tensor::grad() const {
    if (!node_ || node_->grad.size() != node_->value.size())
        throw MissingGrad("gradient not populated; call backward() first");
    return node_->grad;
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1)
        throw NonScalarLoss("backward() requires a 1x1 loss tensor");

    // Depth-first topological order (iterative; graphs can be deep).
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order) n->ensure_grad();
    loss.node()->grad[0] += 1.0;

    // `order` holds parents before children, so walk it backwards.
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn();
}

}  // namespace pumpwatch::nn
