#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pumpwatch/nn/tensor.hpp"

namespace pumpwatch::nn {

// Dense kernels with reverse-mode closures. All matrices are row-major.
// Ops validate shapes eagerly and throw ShapeMismatch / BadEdgeIndex with
// the offending dimensions in the message.

Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise add; also accepts b as a 1 x cols row vector (bias broadcast).
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor transpose(const Tensor& a);

Tensor row_softmax(const Tensor& a);

// Column-wise softmax over groups of rows sharing a segment id. Used for
// attention over the incoming edges of each destination node: one segment
// per destination, one column per head. Segment ids need not be sorted.
Tensor segment_softmax(const Tensor& logits, const std::vector<std::int64_t>& segment,
                       std::int64_t n_segments);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// Inverted dropout: zeroes with probability p and scales survivors by
// 1/(1-p) so eval needs no rescaling. Identity when !training or p == 0.
Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng, bool training);

Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice(const Tensor& a, std::int64_t r0, std::int64_t r1, std::int64_t c0,
             std::int64_t c1);

Tensor reduce_sum(const Tensor& a);   // -> 1x1
Tensor reduce_mean(const Tensor& a);  // -> 1x1

Tensor gather_rows(const Tensor& a, const std::vector<std::int64_t>& idx);
Tensor scatter_add_rows(const Tensor& a, const std::vector<std::int64_t>& idx,
                        std::int64_t n_rows);
Tensor gather_elements(const Tensor& a, const std::vector<std::int64_t>& flat_idx);

// m x (blocks*w) -> m x blocks, summing each contiguous group of w columns.
Tensor block_rowsum(const Tensor& a, std::int64_t blocks);
// m x h -> m x (h*w), replicating each column w times (inverse layout of
// block_rowsum, used to broadcast per-head attention weights over head dims).
Tensor expand_cols(const Tensor& a, std::int64_t w);
// m x c -> (reps*m) x c, repeating the whole block `reps` times.
Tensor tile_rows(const Tensor& a, std::int64_t reps);

// Multi-head self-attention over fixed-length windows: rows are grouped as
// `win` consecutive rows per sequence, columns as `heads` blocks of d/heads.
// Attends within each sequence only.
Tensor window_mha(const Tensor& q, const Tensor& k, const Tensor& v,
                  std::int64_t win, std::int64_t heads);

// Numerically stable weighted binary cross-entropy on pre-sigmoid logits.
// cell_weight masks invalid cells (0 drops the cell); result is the mean of
//   pos_weight * y * softplus(-z) + (1-y) * softplus(z)
// over cells with weight > 0. Throws EmptyBatch if every weight is zero.
Tensor weighted_bce_with_logits(const Tensor& logits, const std::vector<double>& targets,
                                const std::vector<double>& cell_weight, double pos_weight);

}  // namespace pumpwatch::nn
