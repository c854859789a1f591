// Supervised alignment end to end, and cross-validated selection of beta.
#pragma once

#include "lfa/core.hpp"
#include "lfa/procrustes.hpp"
#include "lfa/refine.hpp"

#include <iosfwd>
#include <vector>

namespace lfa {

struct FitTimings {
    double procrustes_seconds = 0.0;
    double refine_seconds = 0.0;
};

struct FitResult {
    LinearMap w_op;
    LinearMap w_beta;
    RefineResult refined;
    FitTimings timings;
};

/// Orthogonal Procrustes on (x, P Y) -> beta-Procrustes -> refine.
FitResult fit_lfa(const LabeledFeatures& data, const PrototypeMatrix& y, BetaParam beta, const RefineConfig& cfg);

struct SweepConfig {
    std::vector<double> grid;  // empty: 0.00, 0.05, ..., 1.00
    int folds = 3;
    double val_fraction = 0.2;
    double train_fraction = 0.7;
    std::uint64_t seed = 0;

    std::vector<double> betas() const;
};

/// Row indices of one fold. The three sets are disjoint and together cover
/// every row of the pool.
struct FoldSplit {
    std::vector<Index> train;
    std::vector<Index> val;
    std::vector<Index> unused;
};

struct SweepRow {
    double beta = 0.0;
    int fold = 0;
    double val_acc = 0.0;
};

struct SweepResult {
    double best_beta = 0.0;
    std::vector<SweepRow> table;      // beta-major, then fold
    std::vector<double> mean_val_acc; // per grid entry
    std::vector<FoldSplit> splits;
};

/// Stratified per-class split of the pool for each fold; fold f uses seed
/// cfg.seed + f and never depends on beta. With group ids a whole group lands
/// in one side. Per class: round(val_fraction * n) validation items,
/// round(train_fraction * n) training items (at least one each), rest unused.
std::vector<FoldSplit> make_folds(const LabeledFeatures& data, Index classes, const SweepConfig& cfg);

/// For every beta and fold: fit beta-Procrustes + refine on the training part,
/// score top-1 on the validation part. The best beta maximizes the mean
/// validation accuracy; ties go to the smaller beta. Throws InsufficientSamples.
SweepResult beta_sweep(const LabeledFeatures& data, const PrototypeMatrix& y, const RefineConfig& cfg,
                       const SweepConfig& sweep = {});

/// CSV "beta,fold,val_acc".
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& table);

}  // namespace lfa
