// Unsupervised alignment: entropic optimal transport between mapped samples
// and class prototypes, and the alternating Sinkhorn / Procrustes / refine loop.
#pragma once

#include "lfa/core.hpp"
#include "lfa/procrustes.hpp"
#include "lfa/refine.hpp"

#include <vector>

namespace lfa {

struct SinkhornConfig {
    double epsilon = 0.05;
    int iters = 100;
    /// Empty: every class receives N / C. Otherwise C positive weights,
    /// rescaled to total mass N.
    std::vector<double> col_weights;

    void validate(Index classes) const;
};

struct SinkhornResult {
    AssignmentMatrix plan;              // soft; rows sum to 1
    std::vector<double> col_residuals;  // max |col sum - target| after each sweep
};

/// Log-domain Sinkhorn on an explicit N x C cost with unit row mass. Each sweep
/// rescales columns then rows, so rows are exact after every sweep.
SinkhornResult sinkhorn_from_cost(const Matrix& cost, const SinkhornConfig& cfg);

/// Cost 1 - cos(x_i W, y_j).
Matrix cosine_cost(const Matrix& x, const Matrix& w, const PrototypeMatrix& y);

AssignmentMatrix sinkhorn(const FeatureMatrix& x, const LinearMap& w, const PrototypeMatrix& y,
                          const SinkhornConfig& cfg);

struct Hardened {
    AssignmentMatrix plan;  // one-hot
    std::vector<int> labels;
};

/// Row-wise argmax, ties to the lower class index.
Hardened harden(const AssignmentMatrix& p);

struct UlfaResult {
    LinearMap w;
    AssignmentMatrix initial_plan;  // Sinkhorn on the raw features
    AssignmentMatrix final_plan;    // Sinkhorn on x * w
};

/// Sinkhorn -> orthogonal Procrustes on the soft P * Y -> beta-Procrustes,
/// then `rounds` times {Sinkhorn on x W -> refine with hardened pseudo-labels}.
/// Round r refines with seed refine_cfg.seed + r.
UlfaResult ulfa(const FeatureMatrix& x, const PrototypeMatrix& y, int rounds, BetaParam beta,
                const RefineConfig& refine_cfg, const SinkhornConfig& sk_cfg);

/// Shannon entropy (nats) of the class histogram of hardened labels.
double label_entropy(const std::vector<int>& labels, Index classes);
/// Mean Shannon entropy (nats) of the rows of a soft plan.
double mean_row_entropy(const AssignmentMatrix& p);

}  // namespace lfa
