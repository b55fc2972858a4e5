#include "pumpwatch/nn/adam.hpp"

#include <cmath>

#include "pumpwatch/errors.hpp"

namespace pumpwatch::nn {

Tensor ParamStore::add(const std::string& name, std::int64_t rows, std::int64_t cols) {
    return add(name, rows, cols,
               std::vector<double>(static_cast<std::size_t>(rows * cols), 0.0));
}

Tensor ParamStore::add(const std::string& name, std::int64_t rows, std::int64_t cols,
                       std::vector<double> values) {
    if (params_.count(name))
        throw Error("duplicate parameter name '" + name + "'");
    Tensor t = Tensor::from_values(rows, cols, std::move(values), /*requires_grad=*/true);
    names_.push_back(name);
    params_.emplace(name, t);
    return t;
}

bool ParamStore::contains(const std::string& name) const { return params_.count(name) > 0; }

Tensor ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
    return it->second;
}

std::int64_t ParamStore::total_count() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : params_) n += t.size();
    return n;
}

void ParamStore::zero_grads() {
    for (const std::string& n : names_) params_.at(n).zero_grad();
}

std::map<std::string, std::vector<double>> ParamStore::snapshot() const {
    std::map<std::string, std::vector<double>> snap;
    for (const auto& [name, t] : params_) snap.emplace(name, t.values());
    return snap;
}

void ParamStore::restore(const std::map<std::string, std::vector<double>>& snap) {
    for (auto& [name, values] : snap) {
        Tensor t = get(name);
        if (t.values().size() != values.size())
            throw ShapeMismatch("restore: size mismatch for '" + name + "'");
        t.values() = values;
    }
}

void Adam::step(ParamStore& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const std::string& name : params.names()) {
        Tensor p = params.get(name);
        if (!p.has_grad())
            throw MissingGrad("adam: no gradient for parameter '" + name + "'");
        const std::vector<double>& g = p.grad();
        auto& m = m_[name];
        auto& v = v_[name];
        if (m.size() != g.size()) m.assign(g.size(), 0.0);
        if (v.size() != g.size()) v.assign(g.size(), 0.0);
        auto& w = p.values();
        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            w[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
        }
    }
}

void fill_uniform(Tensor& t, double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.values()) v = dist(rng);
}

void fill_normal(Tensor& t, double mean, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(mean, stddev);
    for (double& v : t.values()) v = dist(rng);
}

void fill_glorot(Tensor& t, std::int64_t fan_in, std::int64_t fan_out,
                 std::mt19937_64& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    fill_uniform(t, -bound, bound, rng);
}

}  // namespace pumpwatch::nn
