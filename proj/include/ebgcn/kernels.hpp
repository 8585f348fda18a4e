#pragma once

#include <utility>
#include <vector>

#include "ebgcn/tensor.hpp"

namespace ebgcn::num {

using EdgeList = std::vector<std::pair<int, int>>;

// Floor applied before every log so downstream losses never see -inf.
inline constexpr double kLogFloor = 1e-12;

// Primary kernels. Inner loops are OpenMP-parallel over independent output
// rows/elements; each output element is accumulated in a fixed serial order,
// so results are bitwise identical at any thread count and match the `ref`
// implementations exactly.
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> add_row_broadcast(const Tensor<T>& a, const Tensor<T>& bias);
template <typename T> Tensor<T> add_const(const Tensor<T>& a, T c);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> softplus(const Tensor<T>& a);
template <typename T> Tensor<T> elem_sqrt(const Tensor<T>& a);
template <typename T> Tensor<T> rsqrt(const Tensor<T>& a);
template <typename T> Tensor<T> log_floored(const Tensor<T>& a);
template <typename T> Tensor<T> row_softmax(const Tensor<T>& a);
template <typename T> Tensor<T> mean_rows(const Tensor<T>& a);
template <typename T> Tensor<T> sum_all(const Tensor<T>& a);
template <typename T> Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T c);
template <typename T> Tensor<T> transpose(const Tensor<T>& a);

// Gathers |h_i - h_j| into one row per edge.
template <typename T> Tensor<T> edge_abs_diff(const Tensor<T>& h, const EdgeList& edges);

// A_new[i,j] = gate[e] * A_prev[i,j] on the edge support; zero elsewhere.
// Reweights existing connections only, never creates new ones.
template <typename T>
Tensor<T> edge_scale_adjacency(const Tensor<T>& gate, const Tensor<T>& a_prev, const EdgeList& edges);

// Straight serial implementations kept as the test oracle for the parallel
// kernels above, and as the baseline side of the kernel benchmark.
namespace ref {
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> row_softmax(const Tensor<T>& a);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> edge_abs_diff(const Tensor<T>& h, const EdgeList& edges);
}  // namespace ref

}  // namespace ebgcn::num
