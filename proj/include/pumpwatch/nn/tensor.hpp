#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace pumpwatch::nn {

// Define-by-run reverse-mode autodiff over dense double matrices.
//
// A Tensor is a cheap handle to a shared Node. Every op allocates a fresh
// output node that remembers its parents and a closure that scatters the
// output gradient back into them. backward() topologically sorts the graph
// reachable from a scalar loss and runs the closures in reverse order.
// Gradients accumulate: repeated backward() calls without zero_grad() add up.

struct Node;
using NodeRef = std::shared_ptr<Node>;

struct Node {
    std::vector<double> value;
    std::vector<double> grad;   // allocated lazily, same length as value
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<NodeRef> parents;
    std::function<void()> backward_fn;  // reads this->grad, adds into parents

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodeRef n) : node_(std::move(n)) {}

    // Fresh leaf tensors -------------------------------------------------
    static Tensor zeros(std::int64_t rows, std::int64_t cols, bool requires_grad = false);
    static Tensor from_values(std::int64_t rows, std::int64_t cols,
                              std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return node_ != nullptr; }
    std::int64_t rows() const { return node_->rows; }
    std::int64_t cols() const { return node_->cols; }
    std::int64_t size() const { return node_->rows * node_->cols; }

    double* data() { return node_->value.data(); }
    const double* data() const { return node_->value.data(); }
    std::vector<double>& values() { return node_->value; }
    const std::vector<double>& values() const { return node_->value; }

    double at(std::int64_t r, std::int64_t c) const {
        return node_->value[static_cast<std::size_t>(r * node_->cols + c)];
    }
    double item() const;  // throws NonScalarLoss unless 1x1

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }

    const std::vector<double>& grad() const;  // throws MissingGrad if absent
    bool has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }
    void zero_grad() { if (node_) node_->grad.assign(node_->value.size(), 0.0); }

    NodeRef node() const { return node_; }

private:
    NodeRef node_;
};

// Run reverse-mode accumulation from a scalar loss. Throws NonScalarLoss if
// the tensor is not 1x1.
void backward(const Tensor& loss);

// Thread-local switch: when false, ops run eagerly but record no parents or
// closures (cheap inference mode).
bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
    NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
    ~NoGradGuard() { set_grad_enabled(prev_); }
private:
    bool prev_;
};

}  // namespace pumpwatch::nn
