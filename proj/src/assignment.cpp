#include "lfa/assignment.hpp"

#include "lfa/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lfa {

void SinkhornConfig::validate(Index classes) const {
    if (!(epsilon > 0.0)) {
        throw Error("InvalidConfig", "sinkhorn epsilon must be positive");
    }
    if (iters < 1) {
        throw Error("InvalidConfig", "sinkhorn iters must be >= 1");
    }
    if (!col_weights.empty()) {
        require_shape(static_cast<Index>(col_weights.size()) == classes, "col_weights length differs from C");
        for (double v : col_weights) {
            if (!(v > 0.0)) {
                throw Error("InvalidConfig", "col_weights must be positive");
            }
        }
    }
}

namespace {

double log_sum_exp(const double* v, Index n, Index stride) {
    double peak = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i) {
        peak = std::max(peak, v[i * stride]);
    }
    if (!std::isfinite(peak)) {
        return peak;
    }
    double s = 0.0;
    for (Index i = 0; i < n; ++i) {
        s += std::exp(v[i * stride] - peak);
    }
    return peak + std::log(s);
}

}  // namespace

SinkhornResult sinkhorn_from_cost(const Matrix& cost, const SinkhornConfig& cfg) {
    const Index n = cost.rows();
    const Index classes = cost.cols();
    require_shape(n >= 1 && classes >= 1, "empty cost matrix");
    cfg.validate(classes);
    if (!cost.allFinite()) {
        throw Error("NonFiniteInput", "sinkhorn cost has non-finite entries");
    }

    Vector log_b(classes);
    if (cfg.col_weights.empty()) {
        log_b.setConstant(std::log(static_cast<double>(n) / static_cast<double>(classes)));
    } else {
        double total = 0.0;
        for (double v : cfg.col_weights) total += v;
        for (Index j = 0; j < classes; ++j) {
            log_b(j) = std::log(cfg.col_weights[static_cast<std::size_t>(j)] * static_cast<double>(n) / total);
        }
    }

    const Matrix log_k = -cost / cfg.epsilon;
    Vector f = Vector::Zero(n);
    Vector g = Vector::Zero(classes);
    Matrix scratch(n, classes);
    SinkhornResult out;
    out.col_residuals.reserve(static_cast<std::size_t>(cfg.iters));

    for (int it = 0; it < cfg.iters; ++it) {
        // Column update: g_j = log b_j - LSE_i(log K_ij + f_i).
        for (Index i = 0; i < n; ++i) {
            scratch.row(i) = log_k.row(i).array() + f(i);
        }
        kernels::for_each_row(classes, [&](Index j) {
            g(j) = log_b(j) - log_sum_exp(scratch.data() + j, n, classes);
        });
        // Row update: f_i = -LSE_j(log K_ij + g_j), unit row mass.
        kernels::for_each_row(n, [&](Index i) {
            for (Index j = 0; j < classes; ++j) {
                scratch(i, j) = log_k(i, j) + g(j);
            }
            f(i) = -log_sum_exp(scratch.data() + i * classes, classes, 1);
        });
        if (!f.allFinite() || !g.allFinite()) {
            throw Error("NumericalUnderflow", "sinkhorn potentials became non-finite; epsilon too small?");
        }
        double worst = 0.0;
        for (Index j = 0; j < classes; ++j) {
            double col = 0.0;
            for (Index i = 0; i < n; ++i) {
                col += std::exp(log_k(i, j) + f(i) + g(j));
            }
            worst = std::max(worst, std::abs(col - std::exp(log_b(j))));
        }
        out.col_residuals.push_back(worst);
    }

    Matrix plan(n, classes);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < classes; ++j) {
            plan(i, j) = std::exp(log_k(i, j) + f(i) + g(j));
        }
    }
    if (!plan.allFinite() || plan.rowwise().sum().minCoeff() <= 0.0) {
        throw Error("NumericalUnderflow", "transport plan underflowed");
    }
    out.plan = {std::move(plan), AssignmentMode::soft};
    return out;
}

Matrix cosine_cost(const Matrix& x, const Matrix& w, const PrototypeMatrix& y) {
    require_shape(x.cols() == w.rows() && w.cols() == y.dim(), "features, map and prototypes differ in dimension");
    const Matrix z = kernels::matmul(x, w);
    Matrix cost = kernels::matmul_a_bt(z, y.data());
    for (Index i = 0; i < z.rows(); ++i) {
        const double norm = z.row(i).norm();
        if (norm < kZeroNormTol) {
            throw Error("ZeroRow", "mapped row " + std::to_string(i) + " vanishes");
        }
        cost.row(i) = (1.0 - cost.row(i).array() / norm).matrix();
    }
    return cost;
}

AssignmentMatrix sinkhorn(const FeatureMatrix& x, const LinearMap& w, const PrototypeMatrix& y,
                          const SinkhornConfig& cfg) {
    return sinkhorn_from_cost(cosine_cost(x.data(), w.data, y), cfg).plan;
}

Hardened harden(const AssignmentMatrix& p) {
    const Index n = p.data.rows();
    Hardened out{AssignmentMatrix{Matrix::Zero(n, p.data.cols()), AssignmentMode::hard}, {}};
    out.labels.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        Index best = 0;
        for (Index j = 1; j < p.data.cols(); ++j) {
            if (p.data(i, j) > p.data(i, best)) {
                best = j;
            }
        }
        out.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
        out.plan.data(i, best) = 1.0;
    }
    return out;
}

UlfaResult ulfa(const FeatureMatrix& x, const PrototypeMatrix& y, int rounds, BetaParam beta,
                const RefineConfig& refine_cfg, const SinkhornConfig& sk_cfg) {
    if (rounds < 0) {
        throw Error("InvalidConfig", "U-LFA rounds must be >= 0");
    }
    require_shape(x.dim() == y.dim(), "features and prototypes differ in dimension");
    const Index d = x.dim();

    const AssignmentMatrix initial = sinkhorn(x, LinearMap::identity(d), y, sk_cfg);
    const Matrix target = initial.data * y.data();
    LinearMap w = beta_procrustes(orthogonal_procrustes(x, target), beta);

    for (int r = 0; r < rounds; ++r) {
        const Hardened pseudo = harden(sinkhorn(x, w, y, sk_cfg));
        RefineConfig cfg = refine_cfg;
        cfg.seed = refine_cfg.seed + static_cast<std::uint64_t>(r);
        w = refine(w, LabeledFeatures{x, pseudo.labels}, y, cfg).w;
    }
    AssignmentMatrix final_plan = sinkhorn(x, w, y, sk_cfg);
    return {std::move(w), initial, std::move(final_plan)};
}

double label_entropy(const std::vector<int>& labels, Index classes) {
    if (labels.empty()) {
        return 0.0;
    }
    std::vector<double> counts(static_cast<std::size_t>(classes), 0.0);
    for (int l : labels) {
        counts[static_cast<std::size_t>(l)] += 1.0;
    }
    double h = 0.0;
    for (double c : counts) {
        if (c > 0.0) {
            const double p = c / static_cast<double>(labels.size());
            h -= p * std::log(p);
        }
    }
    return h;
}

double mean_row_entropy(const AssignmentMatrix& p) {
    double total = 0.0;
    for (Index i = 0; i < p.data.rows(); ++i) {
        const double mass = p.data.row(i).sum();
        for (Index j = 0; j < p.data.cols(); ++j) {
            const double q = p.data(i, j) / mass;
            if (q > 0.0) {
                total -= q * std::log(q);
            }
        }
    }
    return p.data.rows() > 0 ? total / static_cast<double>(p.data.rows()) : 0.0;
}

}  // namespace lfa
