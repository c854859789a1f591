#include "lfa/eval.hpp"

#include "lfa/kernels.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace lfa {

Classification classify(const FeatureMatrix& x, const LinearMap& w, const PrototypeMatrix& y, double tau) {
    if (!(tau > 0.0)) {
        throw Error("InvalidConfig", "temperature must be positive");
    }
    require_shape(x.dim() == w.dim() && y.dim() == w.dim(), "features, map and prototypes differ in dimension");
    const Index n = x.rows();
    const Index classes = y.classes();
    const Matrix logits = kernels::matmul_a_bt(kernels::matmul(x.data(), w.data), y.data());

    Classification out{Matrix(n, classes), std::vector<int>(static_cast<std::size_t>(n))};
    kernels::for_each_row(n, [&](Index i) {
        Index best = 0;
        for (Index j = 1; j < classes; ++j) {
            if (logits(i, j) > logits(i, best)) {
                best = j;
            }
        }
        out.predictions[static_cast<std::size_t>(i)] = static_cast<int>(best);
        const double peak = logits(i, best) / tau;
        double denom = 0.0;
        for (Index j = 0; j < classes; ++j) {
            out.probabilities(i, j) = std::exp(logits(i, j) / tau - peak);
            denom += out.probabilities(i, j);
        }
        out.probabilities.row(i) /= denom;
    });
    return out;
}

double top1_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) {
        throw Error("LengthMismatch", std::to_string(predictions.size()) + " predictions vs " +
                                          std::to_string(labels.size()) + " labels");
    }
    if (labels.empty()) {
        return 0.0;
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        correct += predictions[i] == labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::vector<int> gt_rank(const FeatureMatrix& x, const LinearMap& w, const PrototypeMatrix& y,
                         const std::vector<int>& labels) {
    LabeledFeatures{x, labels}.validate(y.classes());
    const Matrix dist = kernels::pairwise_distances(kernels::matmul(x.data(), w.data), y.data());
    std::vector<int> ranks(labels.size());
    kernels::for_each_row(x.rows(), [&](Index i) {
        const int gt = labels[static_cast<std::size_t>(i)];
        int rank = 1;
        for (Index j = 0; j < y.classes(); ++j) {
            if (j != gt && dist(i, j) < dist(i, gt)) {
                ++rank;
            }
        }
        ranks[static_cast<std::size_t>(i)] = rank;
    });
    return ranks;
}

double modality_gap(const Matrix& x, const Matrix& matched_prototypes) {
    require_shape(x.rows() == matched_prototypes.rows() && x.cols() == matched_prototypes.cols(),
                  "features and matched prototypes differ in shape");
    require_shape(x.rows() >= 1, "modality gap needs at least one row");
    return (x.colwise().mean() - matched_prototypes.colwise().mean()).norm();
}

PcaProjection pca_project(const Matrix& points, Index out_dim) {
    require_shape(points.rows() >= 2, "PCA needs at least two points");
    require_shape(out_dim >= 1 && out_dim <= points.cols(), "PCA output dimension out of range");
    PcaProjection out;
    out.mean = points.colwise().mean();
    const Matrix centered = points.rowwise() - out.mean;
    Eigen::JacobiSVD<Eigen::MatrixXd> solver(centered, Eigen::ComputeThinV);
    out.components = solver.matrixV().leftCols(out_dim).transpose();
    out.coords = centered * out.components.transpose();
    const double m = static_cast<double>(points.rows());
    out.variances = (solver.singularValues().head(out_dim).array().square() / m).matrix();
    return out;
}

std::vector<int> knn_baseline(const LabeledFeatures& train, const FeatureMatrix& test, int k) {
    const Index n_train = train.features.rows();
    if (k < 1 || k > n_train) {
        throw Error("InvalidConfig", "k must lie in [1, N_train]");
    }
    require_shape(train.features.dim() == test.dim(), "train and test features differ in dimension");
    const int classes = train.labels.empty() ? 0 : *std::max_element(train.labels.begin(), train.labels.end()) + 1;
    const Matrix sim = kernels::matmul_a_bt(test.data(), train.features.data());

    std::vector<int> preds(static_cast<std::size_t>(test.rows()));
    kernels::for_each_row(test.rows(), [&](Index i) {
        std::vector<Index> order(static_cast<std::size_t>(n_train));
        std::iota(order.begin(), order.end(), Index{0});
        std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index a, Index b) {
            return sim(i, a) > sim(i, b) || (sim(i, a) == sim(i, b) && a < b);
        });
        std::vector<int> votes(static_cast<std::size_t>(classes), 0);
        for (int r = 0; r < k; ++r) {
            ++votes[static_cast<std::size_t>(train.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])])];
        }
        const int top = *std::max_element(votes.begin(), votes.end());
        // Neighbours are sorted nearest first, so the first one in a tied class wins.
        for (int r = 0; r < k; ++r) {
            const int label = train.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])];
            if (votes[static_cast<std::size_t>(label)] == top) {
                preds[static_cast<std::size_t>(i)] = label;
                break;
            }
        }
    });
    return preds;
}

double cross_interference(const FeatureMatrix& x, const LinearMap& w, const PrototypeMatrix& y,
                          const std::vector<int>& labels) {
    const Matrix z = kernels::matmul(x.data(), w.data);
    const Matrix sim = kernels::matmul_a_bt(z, y.data());
    double total = 0.0;
    long count = 0;
    for (Index i = 0; i < z.rows(); ++i) {
        const double norm = z.row(i).norm();
        if (norm < kZeroNormTol) {
            continue;
        }
        for (Index j = 0; j < y.classes(); ++j) {
            if (j != labels[static_cast<std::size_t>(i)]) {
                total += sim(i, j) / norm;
                ++count;
            }
        }
    }
    return count > 0 ? total / static_cast<double>(count) : 0.0;
}

EvalReport evaluate(const FeatureMatrix& x, const LinearMap& w, const PrototypeMatrix& y,
                    const std::vector<int>& labels, double tau) {
    LabeledFeatures{x, labels}.validate(y.classes());
    const Classification cls = classify(x, w, y, tau);
    const std::vector<int> ranks = gt_rank(x, w, y, labels);

    EvalReport report;
    report.samples = static_cast<long>(labels.size());
    report.top1 = top1_accuracy(cls.predictions, labels);

    std::vector<double> hits(static_cast<std::size_t>(y.classes()), 0.0);
    std::vector<double> totals(static_cast<std::size_t>(y.classes()), 0.0);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        totals[c] += 1.0;
        hits[c] += cls.predictions[i] == labels[i] ? 1.0 : 0.0;
        rank_sum += ranks[i];
        report.rank_histogram[ranks[i]] += 1;
    }
    for (std::size_t c = 0; c < totals.size(); ++c) {
        report.per_class_acc.push_back(totals[c] > 0 ? hits[c] / totals[c] : std::numeric_limits<double>::quiet_NaN());
    }
    report.mean_gt_rank = labels.empty() ? 1.0 : rank_sum / static_cast<double>(labels.size());
    report.modality_gap = modality_gap(kernels::matmul(x.data(), w.data), y.gather(labels));
    report.cross_interference = cross_interference(x, w, y, labels);
    return report;
}

std::string report_to_json(const EvalReport& report, const std::vector<std::string>& class_names) {
    nlohmann::ordered_json j;
    j["top1"] = report.top1;
    j["samples"] = report.samples;
    j["mean_gt_rank"] = report.mean_gt_rank;
    j["modality_gap"] = report.modality_gap;
    j["cross_interference"] = report.cross_interference;
    nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < report.per_class_acc.size(); ++c) {
        const std::string key = c < class_names.size() ? class_names[c] : std::to_string(c);
        const double v = report.per_class_acc[c];
        per_class[key] = std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v);
    }
    j["per_class_acc"] = per_class;
    nlohmann::ordered_json hist = nlohmann::ordered_json::object();
    for (const auto& [rank, count] : report.rank_histogram) {
        hist[std::to_string(rank)] = count;
    }
    j["rank_histogram"] = hist;
    return j.dump(2);
}

void write_rank_histogram_csv(std::ostream& out, const std::map<int, long>& histogram) {
    out << "rank,count\n";
    for (const auto& [rank, count] : histogram) {
        out << rank << ',' << count << '\n';
    }
}

}  // namespace lfa
