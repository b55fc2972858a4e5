#include "pumpwatch/nn/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "pumpwatch/errors.hpp"

namespace pumpwatch::nn {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EMat>;
using CMap = Eigen::Map<const EMat>;

CMap as_mat(const NodeRef& n) { return CMap(n->value.data(), n->rows, n->cols); }
Map grad_mat(const NodeRef& n) { return Map(n->grad.data(), n->rows, n->cols); }

std::string shape_of(const Tensor& t) {
    return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

Tensor make_out(std::int64_t rows, std::int64_t cols, const char* op,
                std::initializer_list<Tensor> inputs) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->value.assign(static_cast<std::size_t>(rows * cols), 0.0);
    n->op = op;
    if (grad_enabled()) {
        for (const Tensor& t : inputs)
            if (t.requires_grad()) {
                n->requires_grad = true;
                n->parents.push_back(t.node());
            }
    }
    return Tensor(std::move(n));
}

// Attach the backward closure only when something upstream wants gradients.
template <typename Fn>
void attach(Tensor& out, Fn&& fn) {
    if (out.node()->requires_grad) out.node()->backward_fn = std::forward<Fn>(fn);
}

bool wants(const NodeRef& n) { return n->requires_grad; }

double softplus(double x) {
    // max(x,0) + log1p(exp(-|x|)) never overflows.
    return (x > 0 ? x : 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid_scalar(double x) {
    if (x >= 0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

// Eigen routes products with a unit output dimension through its
// matrix-vector kernels, which split each dot product into a scalar head and
// a SIMD body depending on the buffer address; the two halves round
// differently, so repeated runs could differ by an ulp as the heap layout
// shifts.  Products that are vector-shaped on either output side therefore
// go through plain loops with a fixed summation order; genuine matrix-matrix
// products use Eigen's packed GEMM, whose accumulation order depends only on
// the operand shapes.
void loop_product(const double* a, const double* b, double* out, std::int64_t m,
                  std::int64_t k, std::int64_t n, bool trans_a, bool trans_b) {
    for (std::int64_t r = 0; r < m; ++r)
        for (std::int64_t c = 0; c < n; ++c) {
            double s = 0.0;
            for (std::int64_t j = 0; j < k; ++j)
                s += a[trans_a ? j * m + r : r * k + j] *
                     b[trans_b ? c * k + j : j * n + c];
            out[r * n + c] += s;
        }
}

}  // namespace

/* ---- linear algebra ------------------------------------------------- */

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw ShapeMismatch("matmul: " + shape_of(a) + " * " + shape_of(b));
    const std::int64_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = make_out(m, n, "matmul", {a, b});
    if (m == 1 || n == 1)
        loop_product(a.data(), b.data(), out.data(), m, k, n, false, false);
    else
        Map(out.data(), m, n).noalias() = as_mat(a.node()) * as_mat(b.node());
    attach(out, [an = a.node(), bn = b.node(), on = out.node().get()] {
        CMap g(on->grad.data(), on->rows, on->cols);
        const std::int64_t m = on->rows, n = on->cols, k = an->cols;
        if (wants(an)) {
            if (m == 1 || k == 1)
                loop_product(on->grad.data(), bn->value.data(), an->grad.data(),
                             m, n, k, false, true);
            else
                grad_mat(an).noalias() += g * as_mat(bn).transpose();
        }
        if (wants(bn)) {
            if (k == 1 || n == 1)
                loop_product(an->value.data(), on->grad.data(), bn->grad.data(),
                             k, m, n, true, false);
            else
                grad_mat(bn).noalias() += as_mat(an).transpose() * g;
        }
    });
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    const bool bias = b.rows() == 1 && a.cols() == b.cols() && a.rows() != 1;
    if (!bias && (a.rows() != b.rows() || a.cols() != b.cols()))
        throw ShapeMismatch("add: " + shape_of(a) + " + " + shape_of(b));
    Tensor out = make_out(a.rows(), a.cols(), "add", {a, b});
    if (bias)
        Map(out.data(), out.rows(), out.cols()) =
            as_mat(a.node()).rowwise() + Eigen::RowVectorXd::Map(b.data(), b.cols());
    else
        Map(out.data(), out.rows(), out.cols()) = as_mat(a.node()) + as_mat(b.node());
    attach(out, [an = a.node(), bn = b.node(), on = out.node().get(), bias] {
        CMap g(on->grad.data(), on->rows, on->cols);
        if (wants(an)) grad_mat(an) += g;
        if (wants(bn)) {
            if (bias) {
                // Column sums in fixed row order; Eigen's partial redux picks
                // its grouping by buffer address, which would make the bias
                // gradient drift by an ulp as the heap layout shifts.
                const std::int64_t cols = on->cols;
                for (std::int64_t r = 0; r < on->rows; ++r)
                    for (std::int64_t c = 0; c < cols; ++c)
                        bn->grad[static_cast<std::size_t>(c)] +=
                            on->grad[static_cast<std::size_t>(r * cols + c)];
            } else {
                grad_mat(bn) += g;
            }
        }
    });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeMismatch("mul: " + shape_of(a) + " * " + shape_of(b));
    Tensor out = make_out(a.rows(), a.cols(), "mul", {a, b});
    Map(out.data(), out.rows(), out.cols()) =
        as_mat(a.node()).cwiseProduct(as_mat(b.node()));
    attach(out, [an = a.node(), bn = b.node(), on = out.node().get()] {
        CMap g(on->grad.data(), on->rows, on->cols);
        if (wants(an)) grad_mat(an) += g.cwiseProduct(as_mat(bn));
        if (wants(bn)) grad_mat(bn) += g.cwiseProduct(as_mat(an));
    });
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = make_out(a.rows(), a.cols(), "scale", {a});
    Map(out.data(), out.rows(), out.cols()) = as_mat(a.node()) * c;
    attach(out, [an = a.node(), on = out.node().get(), c] {
        if (wants(an)) grad_mat(an) += CMap(on->grad.data(), on->rows, on->cols) * c;
    });
    return out;
}

Tensor relu(const Tensor& a) {
    Tensor out = make_out(a.rows(), a.cols(), "relu", {a});
    const auto& x = a.values();
    auto& y = out.values();
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0 ? x[i] : 0.0;
    attach(out, [an = a.node(), on = out.node().get()] {
        if (!wants(an)) return;
        for (std::size_t i = 0; i < an->value.size(); ++i)
            if (an->value[i] > 0) an->grad[i] += on->grad[i];
    });
    return out;
}

Tensor sigmoid(const Tensor& a) {
    Tensor out = make_out(a.rows(), a.cols(), "sigmoid", {a});
    const auto& x = a.values();
    auto& y = out.values();
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid_scalar(x[i]);
    attach(out, [an = a.node(), on = out.node().get()] {
        if (!wants(an)) return;
        for (std::size_t i = 0; i < on->value.size(); ++i) {
            double s = on->value[i];
            an->grad[i] += on->grad[i] * s * (1.0 - s);
        }
    });
    return out;
}

Tensor transpose(const Tensor& a) {
    Tensor out = make_out(a.cols(), a.rows(), "transpose", {a});
    Map(out.data(), out.rows(), out.cols()) = as_mat(a.node()).transpose();
    attach(out, [an = a.node(), on = out.node().get()] {
        if (wants(an))
            grad_mat(an) += CMap(on->grad.data(), on->rows, on->cols).transpose();
    });
    return out;
}

/* ---- softmax family -------------------------------------------------- */

Tensor row_softmax(const Tensor& a) {
    Tensor out = make_out(a.rows(), a.cols(), "row_softmax", {a});
    const std::int64_t n = a.rows(), c = a.cols();
    for (std::int64_t r = 0; r < n; ++r) {
        const double* x = a.data() + r * c;
        double* y = out.data() + r * c;
        double mx = x[0];
        for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (std::int64_t j = 0; j < c; ++j) sum += (y[j] = std::exp(x[j] - mx));
        for (std::int64_t j = 0; j < c; ++j) y[j] /= sum;
    }
    attach(out, [an = a.node(), on = out.node().get()] {
        if (!wants(an)) return;
        const std::int64_t n = on->rows, c = on->cols;
        for (std::int64_t r = 0; r < n; ++r) {
            const double* y = on->value.data() + r * c;
            const double* gy = on->grad.data() + r * c;
            double dot = 0.0;
            for (std::int64_t j = 0; j < c; ++j) dot += y[j] * gy[j];
            double* gx = an->grad.data() + r * c;
            for (std::int64_t j = 0; j < c; ++j) gx[j] += y[j] * (gy[j] - dot);
        }
    });
    return out;
}

Tensor segment_softmax(const Tensor& logits, const std::vector<std::int64_t>& segment,
                       std::int64_t n_segments) {
    const std::int64_t e = logits.rows(), h = logits.cols();
    if (static_cast<std::int64_t>(segment.size()) != e)
        throw ShapeMismatch("segment_softmax: " + std::to_string(segment.size()) +
                            " ids for " + std::to_string(e) + " rows");
    for (std::int64_t i = 0; i < e; ++i)
        if (segment[i] < 0 || segment[i] >= n_segments)
            throw BadEdgeIndex("segment_softmax: id " + std::to_string(segment[i]) +
                               " outside [0," + std::to_string(n_segments) + ")");
    Tensor out = make_out(e, h, "segment_softmax", {logits});

    // Two scatter passes per column: per-segment max, then exp-sum.
    std::vector<double> mx(static_cast<std::size_t>(n_segments * h),
                           -std::numeric_limits<double>::infinity());
    for (std::int64_t i = 0; i < e; ++i)
        for (std::int64_t j = 0; j < h; ++j) {
            double& m = mx[segment[i] * h + j];
            m = std::max(m, logits.at(i, j));
        }
    std::vector<double> denom(static_cast<std::size_t>(n_segments * h), 0.0);
    for (std::int64_t i = 0; i < e; ++i)
        for (std::int64_t j = 0; j < h; ++j) {
            double v = std::exp(logits.at(i, j) - mx[segment[i] * h + j]);
            out.data()[i * h + j] = v;
            denom[segment[i] * h + j] += v;
        }
    for (std::int64_t i = 0; i < e; ++i)
        for (std::int64_t j = 0; j < h; ++j)
            out.data()[i * h + j] /= denom[segment[i] * h + j];

    attach(out, [ln = logits.node(), on = out.node().get(), segment, n_segments] {
        if (!wants(ln)) return;
        const std::int64_t e = on->rows, h = on->cols;
        std::vector<double> dot(static_cast<std::size_t>(n_segments * h), 0.0);
        for (std::int64_t i = 0; i < e; ++i)
            for (std::int64_t j = 0; j < h; ++j)
                dot[segment[i] * h + j] += on->value[i * h + j] * on->grad[i * h + j];
        for (std::int64_t i = 0; i < e; ++i)
            for (std::int64_t j = 0; j < h; ++j)
                ln->grad[i * h + j] += on->value[i * h + j] *
                                       (on->grad[i * h + j] - dot[segment[i] * h + j]);
    });
    return out;
}

/* ---- normalization & regularization ---------------------------------- */

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const std::int64_t n = x.rows(), d = x.cols();
    if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d)
        throw ShapeMismatch("layer_norm: x " + shape_of(x) + ", gamma " + shape_of(gamma) +
                            ", beta " + shape_of(beta));
    Tensor out = make_out(n, d, "layer_norm", {x, gamma, beta});
    // Stash per-row inverse stddev and normalized values for the backward pass.
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
    auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n * d));
    for (std::int64_t r = 0; r < n; ++r) {
        const double* xr = x.data() + r * d;
        double mean = 0.0;
        for (std::int64_t j = 0; j < d; ++j) mean += xr[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::int64_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= static_cast<double>(d);
        double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        double* yr = out.data() + r * d;
        for (std::int64_t j = 0; j < d; ++j) {
            double xh = (xr[j] - mean) * is;
            (*xhat)[r * d + j] = xh;
            yr[j] = xh * gamma.data()[j] + beta.data()[j];
        }
    }
    attach(out, [xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node().get(),
                 inv_std, xhat] {
        const std::int64_t n = on->rows, d = on->cols;
        for (std::int64_t r = 0; r < n; ++r) {
            const double* gy = on->grad.data() + r * d;
            const double* xh = xhat->data() + r * d;
            if (wants(gn) || wants(bn))
                for (std::int64_t j = 0; j < d; ++j) {
                    if (wants(gn)) gn->grad[j] += gy[j] * xh[j];
                    if (wants(bn)) bn->grad[j] += gy[j];
                }
            if (!wants(xn)) continue;
            // dx = (g*gy - mean(g*gy) - xhat * mean(g*gy*xhat)) * inv_std
            double m1 = 0.0, m2 = 0.0;
            for (std::int64_t j = 0; j < d; ++j) {
                double t = gn->value[j] * gy[j];
                m1 += t;
                m2 += t * xh[j];
            }
            m1 /= static_cast<double>(d);
            m2 /= static_cast<double>(d);
            double* gx = xn->grad.data() + r * d;
            for (std::int64_t j = 0; j < d; ++j)
                gx[j] += (gn->value[j] * gy[j] - m1 - xh[j] * m2) * (*inv_std)[r];
        }
    });
    return out;
}

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng, bool training) {
    if (p < 0.0 || p >= 1.0) {
        if (p != 0.0) throw ConfigError("dropout probability must be in [0,1), got " +
                                        std::to_string(p));
    }
    if (!training || p == 0.0) return x;
    Tensor out = make_out(x.rows(), x.cols(), "dropout", {x});
    auto mask = std::make_shared<std::vector<double>>(x.values().size());
    std::bernoulli_distribution keep(1.0 - p);
    const double inv_keep = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < mask->size(); ++i) {
        (*mask)[i] = keep(rng) ? inv_keep : 0.0;
        out.values()[i] = x.values()[i] * (*mask)[i];
    }
    attach(out, [xn = x.node(), on = out.node().get(), mask] {
        if (!wants(xn)) return;
        for (std::size_t i = 0; i < mask->size(); ++i)
            xn->grad[i] += on->grad[i] * (*mask)[i];
    });
    return out;
}

/* ---- shape plumbing --------------------------------------------------- */

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols())
        throw ShapeMismatch("concat_rows: " + shape_of(a) + " | " + shape_of(b));
    Tensor out = make_out(a.rows() + b.rows(), a.cols(), "concat_rows", {a, b});
    std::copy(a.values().begin(), a.values().end(), out.values().begin());
    std::copy(b.values().begin(), b.values().end(),
              out.values().begin() + a.values().size());
    attach(out, [an = a.node(), bn = b.node(), on = out.node().get()] {
        std::size_t na = an->value.size();
        if (wants(an))
            for (std::size_t i = 0; i < na; ++i) an->grad[i] += on->grad[i];
        if (wants(bn))
            for (std::size_t i = 0; i < bn->value.size(); ++i)
                bn->grad[i] += on->grad[na + i];
    });
    return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows())
        throw ShapeMismatch("concat_cols: " + shape_of(a) + " | " + shape_of(b));
    Tensor out = make_out(a.rows(), a.cols() + b.cols(), "concat_cols", {a, b});
    const std::int64_t ca = a.cols(), cb = b.cols();
    for (std::int64_t r = 0; r < a.rows(); ++r) {
        std::copy_n(a.data() + r * ca, ca, out.data() + r * (ca + cb));
        std::copy_n(b.data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
    }
    attach(out, [an = a.node(), bn = b.node(), on = out.node().get()] {
        const std::int64_t ca = an->cols, cb = bn->cols;
        for (std::int64_t r = 0; r < an->rows; ++r) {
            if (wants(an))
                for (std::int64_t j = 0; j < ca; ++j)
                    an->grad[r * ca + j] += on->grad[r * (ca + cb) + j];
            if (wants(bn))
                for (std::int64_t j = 0; j < cb; ++j)
                    bn->grad[r * cb + j] += on->grad[r * (ca + cb) + ca + j];
        }
    });
    return out;
}

Tensor slice(const Tensor& a, std::int64_t r0, std::int64_t r1, std::int64_t c0,
             std::int64_t c1) {
    if (r0 < 0 || r1 > a.rows() || c0 < 0 || c1 > a.cols() || r0 >= r1 || c0 >= c1)
        throw ShapeMismatch("slice: [" + std::to_string(r0) + "," + std::to_string(r1) +
                            ")x[" + std::to_string(c0) + "," + std::to_string(c1) +
                            ") of " + shape_of(a));
    Tensor out = make_out(r1 - r0, c1 - c0, "slice", {a});
    for (std::int64_t r = 0; r < out.rows(); ++r)
        std::copy_n(a.data() + (r0 + r) * a.cols() + c0, out.cols(),
                    out.data() + r * out.cols());
    attach(out, [an = a.node(), on = out.node().get(), r0, c0] {
        if (!wants(an)) return;
        for (std::int64_t r = 0; r < on->rows; ++r)
            for (std::int64_t j = 0; j < on->cols; ++j)
                an->grad[(r0 + r) * an->cols + c0 + j] += on->grad[r * on->cols + j];
    });
    return out;
}

Tensor reduce_sum(const Tensor& a) {
    Tensor out = make_out(1, 1, "reduce_sum", {a});
    double s = 0.0;
    for (double v : a.values()) s += v;
    out.values()[0] = s;
    attach(out, [an = a.node(), on = out.node().get()] {
        if (!wants(an)) return;
        for (double& g : an->grad) g += on->grad[0];
    });
    return out;
}

Tensor reduce_mean(const Tensor& a) {
    Tensor out = make_out(1, 1, "reduce_mean", {a});
    double s = 0.0;
    for (double v : a.values()) s += v;
    const double inv = 1.0 / static_cast<double>(a.size());
    out.values()[0] = s * inv;
    attach(out, [an = a.node(), on = out.node().get(), inv] {
        if (!wants(an)) return;
        for (double& g : an->grad) g += on->grad[0] * inv;
    });
    return out;
}

/* ---- gather / scatter ------------------------------------------------- */

namespace {
void check_row_index(const std::vector<std::int64_t>& idx, std::int64_t n_rows,
                     const char* op) {
    for (std::int64_t i : idx)
        if (i < 0 || i >= n_rows)
            throw BadEdgeIndex(std::string(op) + ": row " + std::to_string(i) +
                               " outside [0," + std::to_string(n_rows) + ")");
}
}  // namespace

Tensor gather_rows(const Tensor& a, const std::vector<std::int64_t>& idx) {
    check_row_index(idx, a.rows(), "gather_rows");
    const std::int64_t c = a.cols();
    Tensor out = make_out(static_cast<std::int64_t>(idx.size()), c, "gather_rows", {a});
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy_n(a.data() + idx[r] * c, c, out.data() + static_cast<std::int64_t>(r) * c);
    attach(out, [an = a.node(), on = out.node().get(), idx] {
        if (!wants(an)) return;
        const std::int64_t c = an->cols;
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const double* g = on->grad.data() + static_cast<std::int64_t>(r) * c;
            double* dst = an->grad.data() + idx[r] * c;
            for (std::int64_t j = 0; j < c; ++j) dst[j] += g[j];
        }
    });
    return out;
}

Tensor scatter_add_rows(const Tensor& a, const std::vector<std::int64_t>& idx,
                        std::int64_t n_rows) {
    if (static_cast<std::int64_t>(idx.size()) != a.rows())
        throw ShapeMismatch("scatter_add_rows: " + std::to_string(idx.size()) +
                            " ids for " + std::to_string(a.rows()) + " rows");
    check_row_index(idx, n_rows, "scatter_add_rows");
    const std::int64_t c = a.cols();
    Tensor out = make_out(n_rows, c, "scatter_add_rows", {a});
    for (std::int64_t r = 0; r < a.rows(); ++r) {
        const double* src = a.data() + r * c;
        double* dst = out.data() + idx[static_cast<std::size_t>(r)] * c;
        for (std::int64_t j = 0; j < c; ++j) dst[j] += src[j];
    }
    attach(out, [an = a.node(), on = out.node().get(), idx] {
        if (!wants(an)) return;
        const std::int64_t c = an->cols;
        for (std::int64_t r = 0; r < an->rows; ++r) {
            const double* g = on->grad.data() + idx[static_cast<std::size_t>(r)] * c;
            double* dst = an->grad.data() + r * c;
            for (std::int64_t j = 0; j < c; ++j) dst[j] += g[j];
        }
    });
    return out;
}

Tensor gather_elements(const Tensor& a, const std::vector<std::int64_t>& flat_idx) {
    const std::int64_t n = a.size();
    for (std::int64_t i : flat_idx)
        if (i < 0 || i >= n)
            throw BadEdgeIndex("gather_elements: index " + std::to_string(i) +
                               " outside [0," + std::to_string(n) + ")");
    Tensor out = make_out(static_cast<std::int64_t>(flat_idx.size()), 1,
                          "gather_elements", {a});
    for (std::size_t r = 0; r < flat_idx.size(); ++r)
        out.values()[r] = a.values()[static_cast<std::size_t>(flat_idx[r])];
    attach(out, [an = a.node(), on = out.node().get(), flat_idx] {
        if (!wants(an)) return;
        for (std::size_t r = 0; r < flat_idx.size(); ++r)
            an->grad[static_cast<std::size_t>(flat_idx[r])] += on->grad[r];
    });
    return out;
}

/* ---- head-layout helpers ---------------------------------------------- */

Tensor block_rowsum(const Tensor& a, std::int64_t blocks) {
    if (blocks <= 0 || a.cols() % blocks != 0)
        throw ShapeMismatch("block_rowsum: " + std::to_string(blocks) +
                            " blocks over " + shape_of(a));
    const std::int64_t w = a.cols() / blocks;
    Tensor out = make_out(a.rows(), blocks, "block_rowsum", {a});
    for (std::int64_t r = 0; r < a.rows(); ++r)
        for (std::int64_t b = 0; b < blocks; ++b) {
            double s = 0.0;
            const double* src = a.data() + r * a.cols() + b * w;
            for (std::int64_t t = 0; t < w; ++t) s += src[t];
            out.data()[r * blocks + b] = s;
        }
    attach(out, [an = a.node(), on = out.node().get(), w] {
        if (!wants(an)) return;
        const std::int64_t blocks = on->cols;
        for (std::int64_t r = 0; r < on->rows; ++r)
            for (std::int64_t b = 0; b < blocks; ++b) {
                double g = on->grad[r * blocks + b];
                double* dst = an->grad.data() + r * an->cols + b * w;
                for (std::int64_t t = 0; t < w; ++t) dst[t] += g;
            }
    });
    return out;
}

Tensor expand_cols(const Tensor& a, std::int64_t w) {
    if (w <= 0) throw ShapeMismatch("expand_cols: width " + std::to_string(w));
    const std::int64_t h = a.cols();
    Tensor out = make_out(a.rows(), h * w, "expand_cols", {a});
    for (std::int64_t r = 0; r < a.rows(); ++r)
        for (std::int64_t b = 0; b < h; ++b) {
            double v = a.data()[r * h + b];
            double* dst = out.data() + r * h * w + b * w;
            for (std::int64_t t = 0; t < w; ++t) dst[t] = v;
        }
    attach(out, [an = a.node(), on = out.node().get(), w] {
        if (!wants(an)) return;
        const std::int64_t h = an->cols;
        for (std::int64_t r = 0; r < an->rows; ++r)
            for (std::int64_t b = 0; b < h; ++b) {
                double s = 0.0;
                const double* g = on->grad.data() + r * h * w + b * w;
                for (std::int64_t t = 0; t < w; ++t) s += g[t];
                an->grad[r * h + b] += s;
            }
    });
    return out;
}

Tensor tile_rows(const Tensor& a, std::int64_t reps) {
    if (reps <= 0) throw ShapeMismatch("tile_rows: reps " + std::to_string(reps));
    Tensor out = make_out(a.rows() * reps, a.cols(), "tile_rows", {a});
    const std::size_t block = a.values().size();
    for (std::int64_t r = 0; r < reps; ++r)
        std::copy_n(a.values().begin(), block, out.values().begin() + r * block);
    attach(out, [an = a.node(), on = out.node().get(), reps] {
        if (!wants(an)) return;
        const std::size_t block = an->value.size();
        for (std::int64_t r = 0; r < reps; ++r)
            for (std::size_t i = 0; i < block; ++i)
                an->grad[i] += on->grad[r * block + i];
    });
    return out;
}

/* ---- windowed multi-head attention ------------------------------------ */

Tensor window_mha(const Tensor& q, const Tensor& k, const Tensor& v,
                  std::int64_t win, std::int64_t heads) {
    const std::int64_t rows = q.rows(), d = q.cols();
    if (k.rows() != rows || v.rows() != rows || k.cols() != d || v.cols() != d)
        throw ShapeMismatch("window_mha: q " + shape_of(q) + ", k " + shape_of(k) +
                            ", v " + shape_of(v));
    if (win <= 0 || rows % win != 0)
        throw ShapeMismatch("window_mha: " + std::to_string(rows) + " rows not a multiple of window " +
                            std::to_string(win));
    if (heads <= 0 || d % heads != 0)
        throw ShapeMismatch("window_mha: " + std::to_string(d) + " cols not a multiple of heads " +
                            std::to_string(heads));
    const std::int64_t seqs = rows / win;
    const std::int64_t dh = d / heads;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor out = make_out(rows, d, "window_mha", {q, k, v});
    // Keep attention probabilities for the backward pass: [seq][head][u][u'].
    auto alpha = std::make_shared<std::vector<double>>(
        static_cast<std::size_t>(seqs * heads * win * win));

    std::vector<double> logits(static_cast<std::size_t>(win));
    for (std::int64_t s = 0; s < seqs; ++s)
        for (std::int64_t hh = 0; hh < heads; ++hh) {
            const std::int64_t col0 = hh * dh;
            for (std::int64_t u = 0; u < win; ++u) {
                const double* qrow = q.data() + (s * win + u) * d + col0;
                double mx = -std::numeric_limits<double>::infinity();
                for (std::int64_t t = 0; t < win; ++t) {
                    const double* krow = k.data() + (s * win + t) * d + col0;
                    double dot = 0.0;
                    for (std::int64_t j = 0; j < dh; ++j) dot += qrow[j] * krow[j];
                    logits[static_cast<std::size_t>(t)] = dot * inv_scale;
                    mx = std::max(mx, logits[static_cast<std::size_t>(t)]);
                }
                double sum = 0.0;
                double* arow = alpha->data() + ((s * heads + hh) * win + u) * win;
                for (std::int64_t t = 0; t < win; ++t)
                    sum += (arow[t] = std::exp(logits[static_cast<std::size_t>(t)] - mx));
                for (std::int64_t t = 0; t < win; ++t) arow[t] /= sum;
                double* orow = out.data() + (s * win + u) * d + col0;
                for (std::int64_t t = 0; t < win; ++t) {
                    const double* vrow = v.data() + (s * win + t) * d + col0;
                    for (std::int64_t j = 0; j < dh; ++j) orow[j] += arow[t] * vrow[j];
                }
            }
        }

    attach(out, [qn = q.node(), kn = k.node(), vn = v.node(), on = out.node().get(), alpha,
                 win, heads, dh, inv_scale] {
        const std::int64_t d = on->cols;
        const std::int64_t seqs = on->rows / win;
        std::vector<double> dalpha(static_cast<std::size_t>(win));
        std::vector<double> dlogit(static_cast<std::size_t>(win));
        for (std::int64_t s = 0; s < seqs; ++s)
            for (std::int64_t hh = 0; hh < heads; ++hh) {
                const std::int64_t col0 = hh * dh;
                for (std::int64_t u = 0; u < win; ++u) {
                    const double* gout = on->grad.data() + (s * win + u) * d + col0;
                    const double* arow = alpha->data() + ((s * heads + hh) * win + u) * win;
                    double dot = 0.0;
                    for (std::int64_t t = 0; t < win; ++t) {
                        const double* vrow = vn->value.data() + (s * win + t) * d + col0;
                        double da = 0.0;
                        for (std::int64_t j = 0; j < dh; ++j) da += gout[j] * vrow[j];
                        dalpha[static_cast<std::size_t>(t)] = da;
                        dot += arow[t] * da;
                        if (wants(vn)) {
                            double* gv = vn->grad.data() + (s * win + t) * d + col0;
                            for (std::int64_t j = 0; j < dh; ++j)
                                gv[j] += arow[t] * gout[j];
                        }
                    }
                    for (std::int64_t t = 0; t < win; ++t)
                        dlogit[static_cast<std::size_t>(t)] =
                            arow[t] * (dalpha[static_cast<std::size_t>(t)] - dot) * inv_scale;
                    const double* qrow = qn->value.data() + (s * win + u) * d + col0;
                    double* gq = wants(qn) ? qn->grad.data() + (s * win + u) * d + col0
                                           : nullptr;
                    for (std::int64_t t = 0; t < win; ++t) {
                        const double* krow = kn->value.data() + (s * win + t) * d + col0;
                        if (gq)
                            for (std::int64_t j = 0; j < dh; ++j)
                                gq[j] += dlogit[static_cast<std::size_t>(t)] * krow[j];
                        if (wants(kn)) {
                            double* gk = kn->grad.data() + (s * win + t) * d + col0;
                            for (std::int64_t j = 0; j < dh; ++j)
                                gk[j] += dlogit[static_cast<std::size_t>(t)] * qrow[j];
                        }
                    }
                }
            }
    });
    return out;
}

/* ---- loss -------------------------------------------------------------- */

Tensor weighted_bce_with_logits(const Tensor& logits, const std::vector<double>& targets,
                                const std::vector<double>& cell_weight, double pos_weight) {
    const std::int64_t n = logits.size();
    if (static_cast<std::int64_t>(targets.size()) != n ||
        static_cast<std::int64_t>(cell_weight.size()) != n)
        throw ShapeMismatch("weighted_bce_with_logits: " + std::to_string(n) +
                            " logits, " + std::to_string(targets.size()) + " targets, " +
                            std::to_string(cell_weight.size()) + " weights");
    double wsum = 0.0;
    for (double w : cell_weight) wsum += w;
    if (wsum <= 0.0) throw EmptyBatch("weighted_bce_with_logits: all cell weights zero");

    Tensor out = make_out(1, 1, "weighted_bce_with_logits", {logits});
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        if (cell_weight[static_cast<std::size_t>(i)] == 0.0) continue;
        double z = logits.values()[static_cast<std::size_t>(i)];
        double y = targets[static_cast<std::size_t>(i)];
        acc += cell_weight[static_cast<std::size_t>(i)] *
               (pos_weight * y * softplus(-z) + (1.0 - y) * softplus(z));
    }
    out.values()[0] = acc / wsum;

    attach(out, [ln = logits.node(), on = out.node().get(), targets, cell_weight, pos_weight,
                 wsum] {
        if (!wants(ln)) return;
        double g = on->grad[0] / wsum;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            if (cell_weight[i] == 0.0) continue;
            double z = ln->value[i];
            double y = targets[i];
            double s = sigmoid_scalar(z);
            ln->grad[i] += g * cell_weight[i] *
                           (pos_weight * y * (s - 1.0) + (1.0 - y) * s);
        }
    });
    return out;
}

}  // namespace pumpwatch::nn
