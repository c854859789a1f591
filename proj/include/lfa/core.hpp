// Domain types shared by every stage of the alignment pipeline.
//
// All matrices are dense, row-major, 64-bit. Rows are samples (or classes),
// columns are embedding coordinates, and a mapping is applied on the right:
// the aligned embedding of row x is x * W.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lfa {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

// Every failure surfaces as an lfa::Error carrying a stable, machine-readable
// name (e.g. "ZeroRow", "ShapeMismatch"). The CLI prints this name verbatim.
class Error : public std::runtime_error {
public:
    Error(std::string name, const std::string& detail)
        : std::runtime_error(name + ": " + detail), name_(std::move(name)) {}

    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

// Row norms below this are treated as zero.
inline constexpr double kZeroNormTol = 1e-12;

/// N x d embeddings with unit-norm rows. Only constructible through
/// normalization, so the unit-norm invariant always holds.
class FeatureMatrix {
public:
    /// Normalizes every row of `raw`. Throws ZeroRow(i) for a vanishing row.
    static FeatureMatrix from_raw(const Matrix& raw,
                                  std::optional<std::vector<std::int64_t>> group_ids = std::nullopt);

    /// Takes rows that are already unit norm (within 1e-12) without rescaling,
    /// so they are kept bit for bit.
    static FeatureMatrix from_unit_rows(Matrix rows,
                                        std::optional<std::vector<std::int64_t>> group_ids = std::nullopt);

    const Matrix& data() const noexcept { return data_; }
    Index rows() const noexcept { return data_.rows(); }
    Index dim() const noexcept { return data_.cols(); }
    const std::optional<std::vector<std::int64_t>>& group_ids() const noexcept { return group_ids_; }

    /// Rows selected by index, in the given order (group ids follow along).
    FeatureMatrix select(const std::vector<Index>& rows) const;

private:
    FeatureMatrix(Matrix data, std::optional<std::vector<std::int64_t>> groups)
        : data_(std::move(data)), group_ids_(std::move(groups)) {}

    Matrix data_;
    std::optional<std::vector<std::int64_t>> group_ids_;
};

/// C x d class prototypes with unit-norm rows and unique class names.
class PrototypeMatrix {
public:
    /// Normalizes rows. When `class_names` is empty, names "class_0".. are generated.
    static PrototypeMatrix from_raw(const Matrix& raw, std::vector<std::string> class_names = {});

    const Matrix& data() const noexcept { return data_; }
    Index classes() const noexcept { return data_.rows(); }
    Index dim() const noexcept { return data_.cols(); }
    const std::vector<std::string>& class_names() const noexcept { return names_; }

    /// Prototype row of every label, i.e. the stacked product P * Y for one-hot P.
    Matrix gather(const std::vector<int>& labels) const;

private:
    PrototypeMatrix(Matrix data, std::vector<std::string> names)
        : data_(std::move(data)), names_(std::move(names)) {}

    Matrix data_;
    std::vector<std::string> names_;
};

enum class MapKind { identity, least_squares, orthogonal, beta, refined, ema };

std::string_view to_string(MapKind kind);

/// A d x d alignment map together with the stage that produced it.
struct LinearMap {
    Matrix data;
    MapKind kind = MapKind::identity;

    static LinearMap identity(Index d) { return {Matrix::Identity(d, d), MapKind::identity}; }
    Index dim() const noexcept { return data.rows(); }
};

enum class AssignmentMode { hard, soft };

/// N x C sample-to-class coupling.
struct AssignmentMatrix {
    Matrix data;
    AssignmentMode mode = AssignmentMode::hard;

    /// One-hot rows for the given labels.
    static AssignmentMatrix one_hot(const std::vector<int>& labels, Index classes);
};

/// Features paired with class indices.
struct LabeledFeatures {
    FeatureMatrix features;
    std::vector<int> labels;

    /// Throws ShapeMismatch or LabelOutOfRange when labels do not fit.
    void validate(Index classes) const;
    LabeledFeatures select(const std::vector<Index>& rows) const;
};

/// Seeded random stream. The bit generator is std::mt19937_64, whose output
/// sequence is fixed by the C++ standard; the real-valued conversions below are
/// implemented here rather than taken from <random> distributions, which are
/// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Standard normal (Box-Muller; the second variate is cached).
    double normal();
    /// Uniform integer in [0, n) without modulo bias.
    std::uint64_t below(std::uint64_t n);
    /// Independent child stream; does not disturb determinism of the parent beyond one draw.
    Rng split() { return Rng(next_u64()); }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

/// Matrix of i.i.d. N(0, stddev^2) entries drawn in row-major order.
Matrix gaussian_matrix(Index rows, Index cols, double stddev, Rng& rng);

/// Row-wise l2 normalization of an arbitrary matrix. Throws ZeroRow(i).
Matrix l2_normalize_rows(const Matrix& m);

struct Svd {
    Matrix u;
    Vector singular_values;  // nonincreasing
    Matrix v;
};

/// Full SVD of a square matrix: m = u * diag(s) * v^T.
Svd svd(const Matrix& m);

/// Moore-Penrose pseudoinverse with singular values below rel_cutoff * s_max dropped.
Matrix pseudo_inverse(const Matrix& m, double rel_cutoff = 1e-10);

/// Haar-distributed random orthogonal matrix (QR of a Gaussian matrix with sign fix).
Matrix random_orthogonal(Index d, Rng& rng);

void require_shape(bool ok, const std::string& what);

}  // namespace lfa
