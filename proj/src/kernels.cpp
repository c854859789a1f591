#include "lfa/kernels.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lfa::kernels {

namespace {

// Row bodies shared by both drivers; the summation order lives here only.

inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& out, Index i) {
    const Index inner = a.cols();
    const Index cols = b.cols();
    double* dst = out.data() + i * cols;
    for (Index c = 0; c < cols; ++c) {
        dst[c] = 0.0;
    }
    const double* arow = a.data() + i * inner;
    for (Index k = 0; k < inner; ++k) {
        const double aik = arow[k];
        const double* brow = b.data() + k * cols;
        for (Index c = 0; c < cols; ++c) {
            dst[c] += aik * brow[c];
        }
    }
}

// Row r of a^T b is sum_i a(i, r) * b(i, :).
inline void matmul_at_b_row(const Matrix& a, const Matrix& b, Matrix& out, Index r) {
    const Index n = a.rows();
    const Index acols = a.cols();
    const Index cols = b.cols();
    double* dst = out.data() + r * cols;
    for (Index c = 0; c < cols; ++c) {
        dst[c] = 0.0;
    }
    for (Index i = 0; i < n; ++i) {
        const double air = a.data()[i * acols + r];
        if (air == 0.0) {
            continue;
        }
        const double* brow = b.data() + i * cols;
        for (Index c = 0; c < cols; ++c) {
            dst[c] += air * brow[c];
        }
    }
}

inline void matmul_a_bt_row(const Matrix& a, const Matrix& b, Matrix& out, Index i) {
    const Index inner = a.cols();
    const double* arow = a.data() + i * inner;
    for (Index j = 0; j < b.rows(); ++j) {
        const double* brow = b.data() + j * inner;
        double s = 0.0;
        for (Index k = 0; k < inner; ++k) {
            s += arow[k] * brow[k];
        }
        out(i, j) = s;
    }
}

inline void distance_row(const Matrix& a, const Matrix& b, Matrix& out, Index i) {
    const Index inner = a.cols();
    const double* arow = a.data() + i * inner;
    for (Index j = 0; j < b.rows(); ++j) {
        const double* brow = b.data() + j * inner;
        double s = 0.0;
        for (Index k = 0; k < inner; ++k) {
            const double diff = arow[k] - brow[k];
            s += diff * diff;
        }
        out(i, j) = std::sqrt(s);
    }
}

template <class Body>
void for_rows_serial(Index rows, Body&& body) {
    for (Index i = 0; i < rows; ++i) {
        body(i);
    }
}

template <class Body>
void for_rows_parallel(Index rows, Body&& body) {
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < rows; ++i) {
        body(i);
    }
}

}  // namespace

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
    require_shape(a.cols() == b.rows(), "matmul inner dimensions differ");
    Matrix out(a.rows(), b.cols());
    for_rows_serial(a.rows(), [&](Index i) { matmul_row(a, b, out, i); });
    return out;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    require_shape(a.rows() == b.rows(), "matmul_at_b row counts differ");
    Matrix out(a.cols(), b.cols());
    for_rows_serial(a.cols(), [&](Index r) { matmul_at_b_row(a, b, out, r); });
    return out;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    require_shape(a.cols() == b.cols(), "matmul_a_bt column counts differ");
    Matrix out(a.rows(), b.rows());
    for_rows_serial(a.rows(), [&](Index i) { matmul_a_bt_row(a, b, out, i); });
    return out;
}

Matrix pairwise_distances(const Matrix& a, const Matrix& b) {
    require_shape(a.cols() == b.cols(), "pairwise_distances column counts differ");
    Matrix out(a.rows(), b.rows());
    for_rows_serial(a.rows(), [&](Index i) { distance_row(a, b, out, i); });
    return out;
}

}  // namespace serial

namespace parallel {

Matrix matmul(const Matrix& a, const Matrix& b) {
    require_shape(a.cols() == b.rows(), "matmul inner dimensions differ");
    Matrix out(a.rows(), b.cols());
    for_rows_parallel(a.rows(), [&](Index i) { matmul_row(a, b, out, i); });
    return out;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    require_shape(a.rows() == b.rows(), "matmul_at_b row counts differ");
    Matrix out(a.cols(), b.cols());
    for_rows_parallel(a.cols(), [&](Index r) { matmul_at_b_row(a, b, out, r); });
    return out;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    require_shape(a.cols() == b.cols(), "matmul_a_bt column counts differ");
    Matrix out(a.rows(), b.rows());
    for_rows_parallel(a.rows(), [&](Index i) { matmul_a_bt_row(a, b, out, i); });
    return out;
}

Matrix pairwise_distances(const Matrix& a, const Matrix& b) {
    require_shape(a.cols() == b.cols(), "pairwise_distances column counts differ");
    Matrix out(a.rows(), b.rows());
    for_rows_parallel(a.rows(), [&](Index i) { distance_row(a, b, out, i); });
    return out;
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace lfa::kernels
