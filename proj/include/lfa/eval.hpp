// Classification with a learned map and the diagnostics used to inspect it:
// ground-truth prototype ranks (hubness), the image/prototype centroid gap,
// a 2-D PCA export, and a kNN baseline on the unmapped features.
#pragma once

#include "lfa/core.hpp"

#include <iosfwd>
#include <map>
#include <vector>

namespace lfa {

struct Classification {
    Matrix probabilities;      // N x C, rows sum to 1
    std::vector<int> predictions;
};

/// softmax(x W Y^T / tau) row-wise; argmax ties go to the lower class index.
Classification classify(const FeatureMatrix& x, const LinearMap& w, const PrototypeMatrix& y, double tau = 0.01);

/// Fraction of positions where predictions == labels. Throws LengthMismatch.
double top1_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

/// 1 + number of incorrect prototypes strictly closer (l2) to x_i W than the
/// sample's own prototype.
std::vector<int> gt_rank(const FeatureMatrix& x, const LinearMap& w, const PrototypeMatrix& y,
                         const std::vector<int>& labels);

/// l2 distance between the centroid of `x` rows and the centroid of the
/// matched prototype rows.
double modality_gap(const Matrix& x, const Matrix& matched_prototypes);

/// Projection of centered points onto their top `out_dim` principal axes,
/// ordered by decreasing variance.
struct PcaProjection {
    Matrix coords;       // M x out_dim
    Matrix components;   // out_dim x d, orthonormal rows
    Vector variances;    // per component, population variance of coords
    RowVector mean;
};
PcaProjection pca_project(const Matrix& points, Index out_dim = 2);

/// Majority vote among the k most cosine-similar training rows; a tied vote is
/// settled by the class of the single nearest neighbour among the tied classes.
std::vector<int> knn_baseline(const LabeledFeatures& train, const FeatureMatrix& test, int k);

/// Mean cosine between each prototype and the mapped samples of other classes.
double cross_interference(const FeatureMatrix& x, const LinearMap& w, const PrototypeMatrix& y,
                          const std::vector<int>& labels);

struct EvalReport {
    double top1 = 0.0;
    std::vector<double> per_class_acc;  // NaN for classes absent from the labels
    double mean_gt_rank = 1.0;
    std::map<int, long> rank_histogram;  // rank -> count
    double modality_gap = 0.0;
    double cross_interference = 0.0;
    long samples = 0;
};

EvalReport evaluate(const FeatureMatrix& x, const LinearMap& w, const PrototypeMatrix& y,
                    const std::vector<int>& labels, double tau = 0.01);

/// JSON object with the EvalReport fields (class names key per_class_acc).
std::string report_to_json(const EvalReport& report, const std::vector<std::string>& class_names);
/// CSV "rank,count".
void write_rank_histogram_csv(std::ostream& out, const std::map<int, long>& histogram);

}  // namespace lfa
