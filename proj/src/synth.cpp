#include "lfa/synth.hpp"

#include <cmath>

namespace lfa {

PlantedMap parse_planted_map(std::string_view name) {
    if (name == "identity") return PlantedMap::identity;
    if (name == "random_orthogonal") return PlantedMap::random_orthogonal;
    if (name == "random_invertible") return PlantedMap::random_invertible;
    throw Error("InvalidConfig", "unknown planted map '" + std::string(name) + "'");
}

std::string_view to_string(PlantedMap map) {
    switch (map) {
        case PlantedMap::identity: return "identity";
        case PlantedMap::random_orthogonal: return "random_orthogonal";
        case PlantedMap::random_invertible: return "random_invertible";
    }
    return "identity";
}

void SynthSpec::validate() const {
    if (classes < 2) throw Error("InvalidConfig", "synthetic data needs C >= 2");
    if (dim < 2) throw Error("InvalidConfig", "synthetic data needs d >= 2");
    if (shots_per_class < 1) throw Error("InvalidConfig", "shots_per_class must be >= 1");
    if (test_per_class < 0) throw Error("InvalidConfig", "test_per_class must be >= 0");
    if (!(noise_std >= 0.0)) throw Error("InvalidConfig", "noise_std must be >= 0");
    if (rotation_scale && !(*rotation_scale >= 0.0)) throw Error("InvalidConfig", "rotation_scale must be >= 0");
}

namespace {

Matrix separated_prototypes(Index classes, Index dim, Rng& rng) {
    constexpr int kMaxAttempts = 10000;
    Matrix y(classes, dim);
    for (Index c = 0; c < classes; ++c) {
        int attempts = 0;
        while (true) {
            RowVector v(dim);
            for (Index j = 0; j < dim; ++j) {
                v(j) = rng.normal();
            }
            const double norm = v.norm();
            if (norm >= kZeroNormTol) {
                v /= norm;
                bool separated = true;
                for (Index p = 0; p < c && separated; ++p) {
                    separated = y.row(p).dot(v) < kMaxPrototypeCosine;
                }
                if (separated) {
                    y.row(c) = v;
                    break;
                }
            }
            if (++attempts >= kMaxAttempts) {
                throw Error("RejectionOverflow", "cannot place prototype " + std::to_string(c) +
                                                     " with pairwise cosine < 0.8");
            }
        }
    }
    return y;
}

Matrix cayley_rotation(Index d, double scale, Rng& rng) {
    const Matrix g = gaussian_matrix(d, d, 1.0, rng);
    const Matrix a = scale * (g - g.transpose()) / std::sqrt(2.0 * static_cast<double>(d));
    const Matrix id = Matrix::Identity(d, d);
    return (id - a).partialPivLu().solve(id + a);
}

Matrix planted(const SynthSpec& spec, Rng& rng) {
    const Index d = spec.dim;
    switch (spec.planted_map) {
        case PlantedMap::identity: return Matrix::Identity(d, d);
        case PlantedMap::random_orthogonal:
            return spec.rotation_scale ? cayley_rotation(d, *spec.rotation_scale, rng) : random_orthogonal(d, rng);
        case PlantedMap::random_invertible: {
            const Matrix left = random_orthogonal(d, rng);
            const Matrix right = random_orthogonal(d, rng);
            Vector scales(d);
            for (Index i = 0; i < d; ++i) {
                scales(i) = 0.5 + rng.uniform();
            }
            return left * scales.asDiagonal() * right;
        }
    }
    return Matrix::Identity(d, d);
}

LabeledFeatures draw_samples(const Matrix& y, const Matrix& source_map, int per_class, double noise_std, Rng& rng) {
    const Index classes = y.rows();
    const Index d = y.cols();
    const Index n = classes * per_class;
    Matrix raw(n, d);
    std::vector<int> labels(static_cast<std::size_t>(n));
    Index row = 0;
    for (Index c = 0; c < classes; ++c) {
        const RowVector base = y.row(c) * source_map;
        for (int s = 0; s < per_class; ++s, ++row) {
            raw.row(row) = base;
            if (noise_std > 0.0) {
                for (Index j = 0; j < d; ++j) {
                    raw(row, j) += noise_std * rng.normal();
                }
            }
            labels[static_cast<std::size_t>(row)] = static_cast<int>(c);
        }
    }
    return {FeatureMatrix::from_raw(raw), std::move(labels)};
}

}  // namespace

SynthData synth_generate(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const Matrix y = separated_prototypes(spec.classes, spec.dim, rng);
    const Matrix q = planted(spec, rng);
    const Matrix source_map =
        spec.planted_map == PlantedMap::random_invertible ? Matrix(q.inverse()) : Matrix(q.transpose());

    LabeledFeatures train = draw_samples(y, source_map, spec.shots_per_class, spec.noise_std, rng);
    std::optional<LabeledFeatures> test;
    if (spec.test_per_class > 0) {
        test = draw_samples(y, source_map, spec.test_per_class, spec.noise_std, rng);
    }
    const MapKind kind = spec.planted_map == PlantedMap::identity          ? MapKind::identity
                         : spec.planted_map == PlantedMap::random_orthogonal ? MapKind::orthogonal
                                                                             : MapKind::least_squares;
    return {std::move(train), std::move(test), PrototypeMatrix::from_raw(y), LinearMap{q, kind}};
}

PrototypeMatrix induce_hub(const PrototypeMatrix& y, Index hub, const RowVector& point, double strength) {
    require_shape(hub >= 0 && hub < y.classes(), "hub index out of range");
    require_shape(point.size() == y.dim(), "hub target differs in dimension");
    Matrix moved = y.data();
    moved.row(hub) = (1.0 - strength) * y.data().row(hub) + strength * point;
    return PrototypeMatrix::from_raw(moved, y.class_names());
}

}  // namespace lfa
