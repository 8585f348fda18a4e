#include "ebgcn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ebgcn::num {

namespace {

// Work threshold below which spawning a parallel region costs more than it
// saves. Graphs here are tiny; only feature-dim matmuls clear this.
constexpr std::size_t kParGrain = 16 * 1024;

void require(bool cond, const std::string& msg) {
  if (!cond) throw NumericError("kernel: " + msg);
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.cols() == b.rows(), "matmul shape mismatch " + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()));
  const int n = a.rows(), k = a.cols(), m = b.cols();
  Tensor<T> out(n, m);
  const std::size_t work = static_cast<std::size_t>(n) * k * m;
#pragma omp parallel for schedule(static) if (work >= kParGrain)
  for (int i = 0; i < n; ++i) {
    T* orow = out.data() + static_cast<std::size_t>(i) * m;
    const T* arow = a.data() + static_cast<std::size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const T av = arow[kk];
      const T* brow = b.data() + static_cast<std::size_t>(kk) * m;
      for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.same_shape(b), "add shape mismatch");
  Tensor<T> out(a.rows(), a.cols());
  const std::size_t n = a.size();
#pragma omp parallel for schedule(static) if (n >= kParGrain)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    out.at_flat(i) = a.at_flat(i) + b.at_flat(i);
  return out;
}

template <typename T>
Tensor<T> add_row_broadcast(const Tensor<T>& a, const Tensor<T>& bias) {
  require(bias.rows() == 1 && bias.cols() == a.cols(), "row-broadcast bias shape mismatch");
  Tensor<T> out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) + bias(0, j);
  return out;
}

template <typename T>
Tensor<T> add_const(const Tensor<T>& a, T c) {
  Tensor<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.at_flat(i) = a.at_flat(i) + c;
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.same_shape(b), "elementwise-multiply shape mismatch");
  Tensor<T> out(a.rows(), a.cols());
  const std::size_t n = a.size();
#pragma omp parallel for schedule(static) if (n >= kParGrain)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    out.at_flat(i) = a.at_flat(i) * b.at_flat(i);
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  Tensor<T> out(a.rows(), a.cols());
  const std::size_t n = a.size();
#pragma omp parallel for schedule(static) if (n >= kParGrain)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    out.at_flat(i) = T(1) / (T(1) + std::exp(-a.at_flat(i)));
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  Tensor<T> out(a.rows(), a.cols());
  const std::size_t n = a.size();
#pragma omp parallel for schedule(static) if (n >= kParGrain)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    out.at_flat(i) = a.at_flat(i) > T(0) ? a.at_flat(i) : T(0);
  return out;
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& a) {
  Tensor<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T x = a.at_flat(i);
    // Overflow-safe: softplus(x) = max(x,0) + log1p(exp(-|x|)).
    out.at_flat(i) = std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
  }
  return out;
}

template <typename T>
Tensor<T> elem_sqrt(const Tensor<T>& a) {
  Tensor<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(a.at_flat(i) >= T(0), "sqrt of negative entry");
    out.at_flat(i) = std::sqrt(a.at_flat(i));
  }
  return out;
}

template <typename T>
Tensor<T> rsqrt(const Tensor<T>& a) {
  Tensor<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(a.at_flat(i) > T(0), "rsqrt of non-positive entry");
    out.at_flat(i) = T(1) / std::sqrt(a.at_flat(i));
  }
  return out;
}

template <typename T>
Tensor<T> log_floored(const Tensor<T>& a) {
  Tensor<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i)
    out.at_flat(i) = std::log(std::max(a.at_flat(i), static_cast<T>(kLogFloor)));
  return out;
}

template <typename T>
Tensor<T> row_softmax(const Tensor<T>& a) {
  require(a.cols() >= 1, "row_softmax on empty rows");
  Tensor<T> out(a.rows(), a.cols());
  const int n = a.rows(), m = a.cols();
#pragma omp parallel for schedule(static) if (static_cast<std::size_t>(n) * m >= kParGrain)
  for (int i = 0; i < n; ++i) {
    T mx = a(i, 0);
    for (int j = 1; j < m; ++j) mx = std::max(mx, a(i, j));
    T sum = T(0);
    for (int j = 0; j < m; ++j) {
      out(i, j) = std::exp(a(i, j) - mx);
      sum += out(i, j);
    }
    for (int j = 0; j < m; ++j) out(i, j) /= sum;
  }
  return out;
}

template <typename T>
Tensor<T> mean_rows(const Tensor<T>& a) {
  require(a.rows() >= 1, "mean_rows of empty tensor");
  Tensor<T> out(1, a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(0, j) += a(i, j);
  const T inv = T(1) / static_cast<T>(a.rows());
  for (int j = 0; j < a.cols(); ++j) out(0, j) *= inv;
  return out;
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  Tensor<T> out(1, 1);
  T s = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a.at_flat(i);
  out(0, 0) = s;
  return out;
}

template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rows() == b.rows(), "concat_cols row mismatch");
  Tensor<T> out(a.rows(), a.cols() + b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    for (int j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  Tensor<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.at_flat(i) = c * a.at_flat(i);
  return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  Tensor<T> out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

template <typename T>
Tensor<T> edge_abs_diff(const Tensor<T>& h, const EdgeList& edges) {
  Tensor<T> out(static_cast<int>(edges.size()), h.cols());
  const int m = h.cols();
  const std::ptrdiff_t ne = static_cast<std::ptrdiff_t>(edges.size());
#pragma omp parallel for schedule(static) if (static_cast<std::size_t>(ne) * m >= kParGrain)
  for (std::ptrdiff_t e = 0; e < ne; ++e) {
    const auto [i, j] = edges[e];
    for (int c = 0; c < m; ++c) out(static_cast<int>(e), c) = std::abs(h(i, c) - h(j, c));
  }
  return out;
}

template <typename T>
Tensor<T> edge_scale_adjacency(const Tensor<T>& gate, const Tensor<T>& a_prev, const EdgeList& edges) {
  require(gate.rows() == static_cast<int>(edges.size()) && gate.cols() == 1, "gate must be |E|x1");
  require(a_prev.rows() == a_prev.cols(), "adjacency must be square");
  Tensor<T> out(a_prev.rows(), a_prev.cols());
  std::vector<char> touched(a_prev.size(), 0);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges[e];
    require(i >= 0 && i < a_prev.rows() && j >= 0 && j < a_prev.cols(), "edge outside the adjacency");
    char& seen = touched[static_cast<std::size_t>(i) * a_prev.cols() + j];
    require(!seen, "duplicate edge in support list");
    seen = 1;
    out(i, j) = gate(static_cast<int>(e), 0) * a_prev(i, j);
  }
  return out;
}

namespace ref {

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) throw NumericError("ref matmul shape mismatch");
  Tensor<T> out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) {
      T acc = T(0);
      for (int k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

template <typename T>
Tensor<T> row_softmax(const Tensor<T>& a) {
  Tensor<T> out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    T mx = a(i, 0);
    for (int j = 1; j < a.cols(); ++j) mx = std::max(mx, a(i, j));
    T sum = T(0);
    for (int j = 0; j < a.cols(); ++j) {
      out(i, j) = std::exp(a(i, j) - mx);
      sum += out(i, j);
    }
    for (int j = 0; j < a.cols(); ++j) out(i, j) /= sum;
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  Tensor<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.at_flat(i) = T(1) / (T(1) + std::exp(-a.at_flat(i)));
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  Tensor<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.at_flat(i) = std::max(a.at_flat(i), T(0));
  return out;
}

template <typename T>
Tensor<T> edge_abs_diff(const Tensor<T>& h, const EdgeList& edges) {
  Tensor<T> out(static_cast<int>(edges.size()), h.cols());
  for (std::size_t e = 0; e < edges.size(); ++e)
    for (int c = 0; c < h.cols(); ++c)
      out(static_cast<int>(e), c) = std::abs(h(edges[e].first, c) - h(edges[e].second, c));
  return out;
}

#define EBGCN_INSTANTIATE_REF(T)                                     \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> row_softmax(const Tensor<T>&);                  \
  template Tensor<T> sigmoid(const Tensor<T>&);                      \
  template Tensor<T> relu(const Tensor<T>&);                         \
  template Tensor<T> edge_abs_diff(const Tensor<T>&, const EdgeList&);

EBGCN_INSTANTIATE_REF(float)
EBGCN_INSTANTIATE_REF(double)
#undef EBGCN_INSTANTIATE_REF

}  // namespace ref

#define EBGCN_INSTANTIATE_KERNELS(T)                                                     \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> add_row_broadcast(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> add_const(const Tensor<T>&, T);                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> sigmoid(const Tensor<T>&);                                          \
  template Tensor<T> relu(const Tensor<T>&);                                             \
  template Tensor<T> softplus(const Tensor<T>&);                                         \
  template Tensor<T> elem_sqrt(const Tensor<T>&);                                        \
  template Tensor<T> rsqrt(const Tensor<T>&);                                            \
  template Tensor<T> log_floored(const Tensor<T>&);                                      \
  template Tensor<T> row_softmax(const Tensor<T>&);                                      \
  template Tensor<T> mean_rows(const Tensor<T>&);                                        \
  template Tensor<T> sum_all(const Tensor<T>&);                                          \
  template Tensor<T> concat_cols(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> scale(const Tensor<T>&, T);                                         \
  template Tensor<T> transpose(const Tensor<T>&);                                        \
  template Tensor<T> edge_abs_diff(const Tensor<T>&, const EdgeList&);                   \
  template Tensor<T> edge_scale_adjacency(const Tensor<T>&, const Tensor<T>&, const EdgeList&);

EBGCN_INSTANTIATE_KERNELS(float)
EBGCN_INSTANTIATE_KERNELS(double)
#undef EBGCN_INSTANTIATE_KERNELS

}  // namespace ebgcn::num
