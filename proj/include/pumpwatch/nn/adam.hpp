#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "pumpwatch/nn/tensor.hpp"

namespace pumpwatch::nn {

// Named trainable tensors with a stable iteration order (insertion order),
// which makes optimizer steps, snapshots and checkpoints deterministic.
class ParamStore {
public:
    Tensor add(const std::string& name, std::int64_t rows, std::int64_t cols);
    Tensor add(const std::string& name, std::int64_t rows, std::int64_t cols,
               std::vector<double> values);

    bool contains(const std::string& name) const;
    Tensor get(const std::string& name) const;  // throws Error if missing

    const std::vector<std::string>& names() const { return names_; }
    std::int64_t total_count() const;

    void zero_grads();

    // Deep copies of the parameter values (used to keep the best epoch).
    std::map<std::string, std::vector<double>> snapshot() const;
    void restore(const std::map<std::string, std::vector<double>>& snap);

private:
    std::vector<std::string> names_;
    std::map<std::string, Tensor> params_;
};

// Adam with bias correction. Moment buffers are keyed by parameter name and
// created lazily on the first step.
class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // Applies one update from the gradients currently on the parameters.
    // Throws MissingGrad if any parameter has no gradient buffer.
    void step(ParamStore& params);

    std::int64_t step_count() const { return t_; }
    double lr() const { return lr_; }

    // Exposed for checkpointing optimizer state.
    std::map<std::string, std::vector<double>>& moments_m() { return m_; }
    std::map<std::string, std::vector<double>>& moments_v() { return v_; }
    void set_step_count(std::int64_t t) { t_ = t; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

// Weight initializers.
void fill_uniform(Tensor& t, double lo, double hi, std::mt19937_64& rng);
void fill_normal(Tensor& t, double mean, double stddev, std::mt19937_64& rng);
void fill_glorot(Tensor& t, std::int64_t fan_in, std::int64_t fan_out,
                 std::mt19937_64& rng);

}  // namespace pumpwatch::nn
