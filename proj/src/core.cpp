#include "lfa/core.hpp"

#include <cmath>
#include <numbers>
#include <set>

namespace lfa {

void require_shape(bool ok, const std::string& what) {
    if (!ok) {
        throw Error("ShapeMismatch", what);
    }
}

std::string_view to_string(MapKind kind) {
    switch (kind) {
        case MapKind::identity: return "identity";
        case MapKind::least_squares: return "least_squares";
        case MapKind::orthogonal: return "orthogonal";
        case MapKind::beta: return "beta";
        case MapKind::refined: return "refined";
        case MapKind::ema: return "ema";
    }
    return "unknown";
}

Matrix l2_normalize_rows(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (Index i = 0; i < m.rows(); ++i) {
        const double norm = m.row(i).norm();
        if (!(norm >= kZeroNormTol)) {
            throw Error("ZeroRow", "row " + std::to_string(i) + " has norm " + std::to_string(norm));
        }
        out.row(i) = m.row(i) / norm;
    }
    return out;
}

FeatureMatrix FeatureMatrix::from_raw(const Matrix& raw, std::optional<std::vector<std::int64_t>> group_ids) {
    require_shape(raw.rows() >= 1, "feature matrix needs at least one row");
    require_shape(raw.cols() >= 2, "feature dimension must be at least 2");
    if (group_ids) {
        require_shape(static_cast<Index>(group_ids->size()) == raw.rows(),
                      "group_ids length " + std::to_string(group_ids->size()) + " != rows " +
                          std::to_string(raw.rows()));
    }
    return FeatureMatrix(l2_normalize_rows(raw), std::move(group_ids));
}

FeatureMatrix FeatureMatrix::from_unit_rows(Matrix rows, std::optional<std::vector<std::int64_t>> group_ids) {
    require_shape(rows.rows() >= 1, "feature matrix needs at least one row");
    require_shape(rows.cols() >= 2, "feature dimension must be at least 2");
    if (group_ids) {
        require_shape(static_cast<Index>(group_ids->size()) == rows.rows(), "group_ids length differs from rows");
    }
    for (Index i = 0; i < rows.rows(); ++i) {
        if (!(std::abs(rows.row(i).norm() - 1.0) < 1e-12)) {
            throw Error("ShapeMismatch", "row " + std::to_string(i) + " is not unit norm");
        }
    }
    return FeatureMatrix(std::move(rows), std::move(group_ids));
}

FeatureMatrix FeatureMatrix::select(const std::vector<Index>& rows) const {
    Matrix out(static_cast<Index>(rows.size()), data_.cols());
    std::optional<std::vector<std::int64_t>> groups;
    if (group_ids_) {
        groups.emplace();
        groups->reserve(rows.size());
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.row(static_cast<Index>(r)) = data_.row(rows[r]);
        if (groups) {
            groups->push_back((*group_ids_)[static_cast<std::size_t>(rows[r])]);
        }
    }
    return FeatureMatrix(std::move(out), std::move(groups));
}

PrototypeMatrix PrototypeMatrix::from_raw(const Matrix& raw, std::vector<std::string> class_names) {
    require_shape(raw.rows() >= 2, "need at least two class prototypes");
    require_shape(raw.cols() >= 2, "prototype dimension must be at least 2");
    if (class_names.empty()) {
        for (Index c = 0; c < raw.rows(); ++c) {
            class_names.push_back("class_" + std::to_string(c));
        }
    }
    require_shape(static_cast<Index>(class_names.size()) == raw.rows(), "class_names length != prototype rows");
    std::set<std::string> unique(class_names.begin(), class_names.end());
    if (unique.size() != class_names.size()) {
        throw Error("DuplicateClassName", "class names must be unique");
    }
    return PrototypeMatrix(l2_normalize_rows(raw), std::move(class_names));
}

Matrix PrototypeMatrix::gather(const std::vector<int>& labels) const {
    Matrix out(static_cast<Index>(labels.size()), data_.cols());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out.row(static_cast<Index>(i)) = data_.row(labels[i]);
    }
    return out;
}

AssignmentMatrix AssignmentMatrix::one_hot(const std::vector<int>& labels, Index classes) {
    AssignmentMatrix p{Matrix::Zero(static_cast<Index>(labels.size()), classes), AssignmentMode::hard};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        p.data(static_cast<Index>(i), labels[i]) = 1.0;
    }
    return p;
}

void LabeledFeatures::validate(Index classes) const {
    require_shape(static_cast<Index>(labels.size()) == features.rows(),
                  "labels length " + std::to_string(labels.size()) + " != rows " +
                      std::to_string(features.rows()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= classes) {
            throw Error("LabelOutOfRange", "label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                                               " outside [0, " + std::to_string(classes) + ")");
        }
    }
}

LabeledFeatures LabeledFeatures::select(const std::vector<Index>& rows) const {
    std::vector<int> picked;
    picked.reserve(rows.size());
    for (Index r : rows) {
        picked.push_back(labels[static_cast<std::size_t>(r)]);
    }
    return {features.select(rows), std::move(picked)};
}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (spare_) {
        const double v = *spare_;
        spare_.reset();
        return v;
    }
    // 1 - uniform() lies in (0, 1], so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n <= 1) {
        return 0;
    }
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = engine_();
    while (x >= limit) {
        x = engine_();
    }
    return x % n;
}

Matrix gaussian_matrix(Index rows, Index cols, double stddev, Rng& rng) {
    Matrix g(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            g(i, j) = stddev * rng.normal();
        }
    }
    return g;
}

Svd svd(const Matrix& m) {
    require_shape(m.rows() == m.cols(), "svd expects a square matrix");
    if (!m.allFinite()) {
        throw Error("NonFiniteInput", "svd input has non-finite entries");
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> solver(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (solver.info() != Eigen::Success || !solver.matrixU().allFinite() || !solver.matrixV().allFinite()) {
        throw Error("ConvergenceFailure", "Jacobi SVD did not converge");
    }
    return {solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

Matrix pseudo_inverse(const Matrix& m, double rel_cutoff) {
    Eigen::JacobiSVD<Eigen::MatrixXd> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (solver.info() != Eigen::Success) {
        throw Error("ConvergenceFailure", "Jacobi SVD did not converge");
    }
    const Vector& s = solver.singularValues();
    const double cutoff = s.size() > 0 ? rel_cutoff * s(0) : 0.0;
    Vector inv = Vector::Zero(s.size());
    for (Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff) {
            inv(i) = 1.0 / s(i);
        }
    }
    return solver.matrixV() * inv.asDiagonal() * solver.matrixU().transpose();
}

Matrix random_orthogonal(Index d, Rng& rng) {
    const Matrix g = gaussian_matrix(d, d, 1.0, rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Matrix q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    // Sign fix makes the distribution Haar rather than QR-implementation dependent.
    for (Index j = 0; j < d; ++j) {
        if (r(j, j) < 0) {
            q.col(j) *= -1.0;
        }
    }
    return q;
}

}  // namespace lfa
