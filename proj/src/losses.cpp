#include "lfa/losses.hpp"

#include "lfa/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lfa {

std::string_view to_string(LossKind kind) {
    switch (kind) {
        case LossKind::arerank: return "arerank";
        case LossKind::contrastive: return "contrastive";
        case LossKind::triplet: return "triplet";
        case LossKind::csls: return "csls";
    }
    return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
    if (name == "arerank") return LossKind::arerank;
    if (name == "contrastive") return LossKind::contrastive;
    if (name == "triplet") return LossKind::triplet;
    if (name == "csls") return LossKind::csls;
    throw Error("UnsupportedVariant", "unknown loss '" + std::string(name) + "'");
}

double adaptive_margin(const PrototypeMatrix& y, Index gt_class, Index other_class, double s) {
    const double cosine = y.data().row(gt_class).dot(y.data().row(other_class));
    return (1.0 - cosine) / s;
}

std::vector<Index> nearest_incorrect(const double* distances, Index classes, Index gt_class, int k) {
    std::vector<Index> candidates;
    candidates.reserve(static_cast<std::size_t>(classes));
    for (Index j = 0; j < classes; ++j) {
        if (j != gt_class) {
            candidates.push_back(j);
        }
    }
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 1)), candidates.size());
    const auto closer = [distances](Index a, Index b) {
        return distances[a] < distances[b] || (distances[a] == distances[b] && a < b);
    };
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(),
                      closer);
    candidates.resize(take);
    return candidates;
}

std::vector<Index> nearest_prototypes(const RowVector& xw, const PrototypeMatrix& y, Index gt_class, int k) {
    require_shape(xw.size() == y.dim(), "mapped embedding and prototypes differ in dimension");
    std::vector<double> dist(static_cast<std::size_t>(y.classes()));
    for (Index j = 0; j < y.classes(); ++j) {
        dist[static_cast<std::size_t>(j)] = (xw - y.data().row(j)).norm();
    }
    return nearest_incorrect(dist.data(), y.classes(), gt_class, k);
}

namespace {

void check_inputs(const Matrix& x, const std::vector<int>& labels, const Matrix& w, const PrototypeMatrix& y) {
    require_shape(w.rows() == w.cols(), "map must be square");
    require_shape(x.cols() == w.rows(), "features and map differ in dimension");
    require_shape(y.dim() == w.cols(), "prototypes and map differ in dimension");
    require_shape(static_cast<Index>(labels.size()) == x.rows(), "labels length differs from sample count");
    for (int label : labels) {
        if (label < 0 || label >= y.classes()) {
            throw Error("LabelOutOfRange", "label " + std::to_string(label));
        }
    }
}

// Sum of a per-sample vector in index order.
double ordered_sum(const std::vector<double>& v) {
    double total = 0.0;
    for (double x : v) {
        total += x;
    }
    return total;
}

// Hinge-on-distance losses: ARerank (adaptive margin) and triplet (fixed margin).
LossValue hinge_loss(const Matrix& x, const std::vector<int>& labels, const Matrix& w, const PrototypeMatrix& y,
                     int k, bool adaptive, double s, double fixed_margin) {
    check_inputs(x, labels, w, y);
    const Index n = x.rows();
    const Index d = w.cols();
    const Index classes = y.classes();
    const int k_eff = static_cast<int>(std::min<Index>(std::max(k, 1), classes - 1));

    const Matrix z = kernels::matmul(x, w);
    const Matrix dist = kernels::pairwise_distances(z, y.data());
    const Matrix& proto = y.data();

    std::vector<double> per_sample(static_cast<std::size_t>(n), 0.0);
    Matrix coeff = Matrix::Zero(n, d);

    kernels::for_each_row(n, [&](Index i) {
        const Index gt = labels[static_cast<std::size_t>(i)];
        const double* drow = dist.data() + i * classes;
        const double d_ii = drow[gt];
        double acc = 0.0;
        for (Index j : nearest_incorrect(drow, classes, gt, k_eff)) {
            const double margin = adaptive ? adaptive_margin(y, gt, j, s) : fixed_margin;
            const double hinge = d_ii - drow[j] + margin;
            if (hinge <= 0.0) {
                continue;
            }
            acc += hinge;
            if (d_ii >= kZeroNormTol) {
                coeff.row(i) += (z.row(i) - proto.row(gt)) / d_ii;
            }
            if (drow[j] >= kZeroNormTol) {
                coeff.row(i) -= (z.row(i) - proto.row(j)) / drow[j];
            }
        }
        per_sample[static_cast<std::size_t>(i)] = acc;
    });

    const double scale = 1.0 / (static_cast<double>(k_eff) * static_cast<double>(n));
    LossValue out;
    out.loss = ordered_sum(per_sample) * scale;
    out.grad = kernels::matmul_at_b(x, coeff) * scale;
    return out;
}

// Row i of the cosine table is (z_i . y_j) / ||z_i|| for unit-norm prototypes.
struct CosineTable {
    Matrix cosine;        // N x C
    Vector inv_norm;      // 1 / ||z_i||, 0 for vanishing rows
};

CosineTable cosine_table(const Matrix& z, const Matrix& proto) {
    CosineTable t{kernels::matmul_a_bt(z, proto), Vector::Zero(z.rows())};
    for (Index i = 0; i < z.rows(); ++i) {
        const double norm = z.row(i).norm();
        t.inv_norm(i) = norm >= kZeroNormTol ? 1.0 / norm : 0.0;
        t.cosine.row(i) *= t.inv_norm(i);
    }
    return t;
}

// Converts dL/dcos(z_i, y_j) into dL/dz_i for one sample:
// dcos/dz = y_j / ||z|| - cos * z / ||z||^2.
void cosine_backward(const Matrix& z, const Matrix& proto, const CosineTable& t, const Matrix& dcos, Matrix& coeff,
                     Index i) {
    const double inv = t.inv_norm(i);
    if (inv == 0.0) {
        return;
    }
    double radial = 0.0;
    for (Index j = 0; j < proto.rows(); ++j) {
        const double a = dcos(i, j);
        if (a == 0.0) {
            continue;
        }
        coeff.row(i) += (a * inv) * proto.row(j);
        radial += a * t.cosine(i, j);
    }
    coeff.row(i) -= (radial * inv * inv) * z.row(i);
}

// Cross-entropy over logits(i, :) / T; writes dL_i/dlogits into `dlogits` row i
// (unscaled by batch) and returns the per-sample loss.
double softmax_xent_row(const Matrix& logits, Index i, int label, double temperature, Matrix& dlogits) {
    const Index classes = logits.cols();
    double peak = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < classes; ++j) {
        peak = std::max(peak, logits(i, j) / temperature);
    }
    double denom = 0.0;
    for (Index j = 0; j < classes; ++j) {
        denom += std::exp(logits(i, j) / temperature - peak);
    }
    const double log_denom = std::log(denom) + peak;
    for (Index j = 0; j < classes; ++j) {
        const double p = std::exp(logits(i, j) / temperature - log_denom);
        dlogits(i, j) = (p - (j == label ? 1.0 : 0.0)) / temperature;
    }
    return log_denom - logits(i, label) / temperature;
}

LossValue contrastive_loss(const Matrix& x, const std::vector<int>& labels, const Matrix& w,
                           const PrototypeMatrix& y, double temperature) {
    check_inputs(x, labels, w, y);
    const Index n = x.rows();
    const Matrix z = kernels::matmul(x, w);
    const CosineTable t = cosine_table(z, y.data());

    std::vector<double> per_sample(static_cast<std::size_t>(n), 0.0);
    Matrix dcos(n, y.classes());
    Matrix coeff = Matrix::Zero(n, w.cols());
    kernels::for_each_row(n, [&](Index i) {
        per_sample[static_cast<std::size_t>(i)] =
            softmax_xent_row(t.cosine, i, labels[static_cast<std::size_t>(i)], temperature, dcos);
        cosine_backward(z, y.data(), t, dcos, coeff, i);
    });

    const double scale = 1.0 / static_cast<double>(n);
    return {ordered_sum(per_sample) * scale, kernels::matmul_at_b(x, coeff) * scale};
}

LossValue csls_loss(const Matrix& x, const std::vector<int>& labels, const Matrix& w, const PrototypeMatrix& y,
                    int k, double temperature) {
    check_inputs(x, labels, w, y);
    const Index n = x.rows();
    const Index classes = y.classes();
    const Index k_eff = std::min<Index>(std::max(k, 1), n);
    const Matrix z = kernels::matmul(x, w);
    const CosineTable t = cosine_table(z, y.data());

    // Neighbourhood of each prototype among the mapped samples.
    std::vector<std::vector<Index>> neighbours(static_cast<std::size_t>(classes));
    Vector r(classes);
    for (Index j = 0; j < classes; ++j) {
        std::vector<Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Index{0});
        std::partial_sort(order.begin(), order.begin() + k_eff, order.end(), [&](Index a, Index b) {
            return t.cosine(a, j) > t.cosine(b, j) || (t.cosine(a, j) == t.cosine(b, j) && a < b);
        });
        order.resize(static_cast<std::size_t>(k_eff));
        double sum = 0.0;
        for (Index i : order) {
            sum += t.cosine(i, j);
        }
        r(j) = sum / static_cast<double>(k_eff);
        neighbours[static_cast<std::size_t>(j)] = std::move(order);
    }

    Matrix scores = 2.0 * t.cosine;
    scores.rowwise() -= r.transpose();

    std::vector<double> per_sample(static_cast<std::size_t>(n), 0.0);
    Matrix dscores(n, classes);
    kernels::for_each_row(n, [&](Index i) {
        per_sample[static_cast<std::size_t>(i)] =
            softmax_xent_row(scores, i, labels[static_cast<std::size_t>(i)], temperature, dscores);
    });

    // dL/dcos = 2 dL/dscore directly, plus the path through r_j, whose
    // derivative -sum_i dL/dscore_ij is spread evenly over j's neighbours.
    Matrix dcos = 2.0 * dscores;
    for (Index j = 0; j < classes; ++j) {
        double dr = 0.0;
        for (Index i = 0; i < n; ++i) {
            dr -= dscores(i, j);
        }
        for (Index i : neighbours[static_cast<std::size_t>(j)]) {
            dcos(i, j) += dr / static_cast<double>(k_eff);
        }
    }

    Matrix coeff = Matrix::Zero(n, w.cols());
    kernels::for_each_row(n, [&](Index i) { cosine_backward(z, y.data(), t, dcos, coeff, i); });

    const double scale = 1.0 / static_cast<double>(n);
    return {ordered_sum(per_sample) * scale, kernels::matmul_at_b(x, coeff) * scale};
}

}  // namespace

double arerank_loss(const Matrix& x, const std::vector<int>& labels, const Matrix& w, const PrototypeMatrix& y,
                    int k, double s) {
    return hinge_loss(x, labels, w, y, k, true, s, 0.0).loss;
}

Matrix arerank_grad(const Matrix& x, const std::vector<int>& labels, const Matrix& w, const PrototypeMatrix& y,
                    int k, double s) {
    return hinge_loss(x, labels, w, y, k, true, s, 0.0).grad;
}

LossValue baseline_loss(LossKind kind, const Matrix& x, const std::vector<int>& labels, const Matrix& w,
                        const PrototypeMatrix& y, const LossParams& params) {
    switch (kind) {
        case LossKind::contrastive: return contrastive_loss(x, labels, w, y, params.temperature);
        case LossKind::triplet: return hinge_loss(x, labels, w, y, params.k, false, 0.0, params.triplet_margin);
        case LossKind::csls: return csls_loss(x, labels, w, y, params.k, params.temperature);
        case LossKind::arerank: break;
    }
    throw Error("UnsupportedVariant", "'" + std::string(to_string(kind)) + "' is not a baseline loss");
}

LossValue evaluate_loss(LossKind kind, const Matrix& x, const std::vector<int>& labels, const Matrix& w,
                        const PrototypeMatrix& y, const LossParams& params) {
    if (kind == LossKind::arerank) {
        return hinge_loss(x, labels, w, y, params.k, true, params.s, 0.0);
    }
    return baseline_loss(kind, x, labels, w, y, params);
}

}  // namespace lfa
