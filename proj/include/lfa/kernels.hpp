// Dense kernels used by the loss, Sinkhorn and evaluation code.
//
// Each kernel exists twice: a serial reference in `kernels::serial` and an
// OpenMP version in `kernels::parallel`. The parallel version splits work over
// output rows only and every output element is accumulated in the same order
// as the reference, so the two agree bitwise regardless of thread count.
// The unqualified `kernels::` entry points dispatch to the parallel version.
#pragma once

#include "lfa/core.hpp"

namespace lfa::kernels {

namespace serial {
/// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
/// a^T * b, accumulating over rows of a and b in ascending order
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
/// a * b^T
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);
/// out(i, j) = ||a_i - b_j||_2
Matrix pairwise_distances(const Matrix& a, const Matrix& b);

template <class Body>
void for_each_row(Index rows, Body&& body) {
    for (Index i = 0; i < rows; ++i) {
        body(i);
    }
}
}  // namespace serial

namespace parallel {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);
Matrix pairwise_distances(const Matrix& a, const Matrix& b);

/// Runs body(i) for every row; bodies must only write row-private state.
template <class Body>
void for_each_row(Index rows, Body&& body) {
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < rows; ++i) {
        body(i);
    }
}
}  // namespace parallel

inline Matrix matmul(const Matrix& a, const Matrix& b) { return parallel::matmul(a, b); }
inline Matrix matmul_at_b(const Matrix& a, const Matrix& b) { return parallel::matmul_at_b(a, b); }
inline Matrix matmul_a_bt(const Matrix& a, const Matrix& b) { return parallel::matmul_a_bt(a, b); }
inline Matrix pairwise_distances(const Matrix& a, const Matrix& b) { return parallel::pairwise_distances(a, b); }
using parallel::for_each_row;

/// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace lfa::kernels
