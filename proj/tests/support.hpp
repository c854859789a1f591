// Helpers shared by the unit and acceptance tests.
#pragma once

#include "lfa/core.hpp"
#include "lfa/losses.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <unistd.h>

namespace lfa::test {

inline Matrix random_unit_rows(Index rows, Index cols, Rng& rng) {
    return l2_normalize_rows(gaussian_matrix(rows, cols, 1.0, rng));
}

inline std::vector<int> random_labels(Index n, Index classes, Rng& rng) {
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& l : labels) {
        l = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    }
    return labels;
}

/// Central differences of f at every entry of w.
inline Matrix central_differences(const std::function<double(const Matrix&)>& f, const Matrix& w, double h) {
    Matrix g(w.rows(), w.cols());
    Matrix probe = w;
    for (Index i = 0; i < w.rows(); ++i) {
        for (Index j = 0; j < w.cols(); ++j) {
            probe(i, j) = w(i, j) + h;
            const double up = f(probe);
            probe(i, j) = w(i, j) - h;
            const double down = f(probe);
            probe(i, j) = w(i, j);
            g(i, j) = (up - down) / (2.0 * h);
        }
    }
    return g;
}

inline double relative_error(const Matrix& a, const Matrix& b) {
    const double scale = std::max({a.norm(), b.norm(), 1e-12});
    return (a - b).norm() / scale;
}

/// Smallest gap between two sorted neighbours at position `k` (between the
/// k-th and (k+1)-th entry), or +inf when there is no such boundary.
inline double boundary_gap(std::vector<double> values, std::size_t k) {
    if (k == 0 || k >= values.size()) {
        return std::numeric_limits<double>::infinity();
    }
    std::nth_element(values.begin(), values.begin() + static_cast<long>(k), values.end());
    const double next = values[k];
    const double last = *std::max_element(values.begin(), values.begin() + static_cast<long>(k));
    return next - last;
}

/// True when no hinge sits within `tol` of its kink and no mined neighbour
/// set is within `tol` of changing, so finite differences see a smooth loss.
inline bool smooth_at(LossKind kind, const Matrix& x, const std::vector<int>& labels, const Matrix& w,
                      const PrototypeMatrix& y, const LossParams& params, double tol) {
    const Matrix z = x * w;
    const Index n = z.rows();
    const Index classes = y.classes();
    if (kind == LossKind::arerank || kind == LossKind::triplet) {
        const std::size_t k_eff = static_cast<std::size_t>(std::min<Index>(params.k, classes - 1));
        for (Index i = 0; i < n; ++i) {
            const int gt = labels[static_cast<std::size_t>(i)];
            const double d_ii = (z.row(i) - y.data().row(gt)).norm();
            std::vector<double> others;
            for (Index j = 0; j < classes; ++j) {
                if (j == gt) continue;
                const double d_ij = (z.row(i) - y.data().row(j)).norm();
                others.push_back(d_ij);
                const double margin = kind == LossKind::arerank
                                          ? (1.0 - y.data().row(gt).dot(y.data().row(j))) / params.s
                                          : params.triplet_margin;
                if (std::abs(d_ii - d_ij + margin) < tol) return false;
            }
            if (boundary_gap(others, k_eff) < tol) return false;
        }
    }
    if (kind == LossKind::csls) {
        const std::size_t k_eff = static_cast<std::size_t>(std::min<Index>(params.k, n));
        for (Index j = 0; j < classes; ++j) {
            std::vector<double> neg_cos;
            for (Index i = 0; i < n; ++i) {
                neg_cos.push_back(-z.row(i).dot(y.data().row(j)) / z.row(i).norm());
            }
            if (boundary_gap(neg_cos, k_eff) < tol) return false;
        }
    }
    return true;
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("lfa_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::filesystem::path path_;
};

}  // namespace lfa::test
