// Iterative refinement of an alignment map: AdamW on one of the losses in
// losses.hpp, a cosine learning-rate schedule, Gaussian-noise plus dropout
// perturbation of the inputs, and an optional EMA copy of the map that starts
// from the identity and stops tracking halfway through.
#pragma once

#include "lfa/core.hpp"
#include "lfa/losses.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace lfa {

struct RefineConfig {
    LossKind loss = LossKind::arerank;
    int k = 3;
    double s = 4.0;
    int steps = 200;
    double lr = 5e-4;
    double lr_min = 1e-7;
    double weight_decay = 5e-4;
    double noise_std = 3.5e-2;
    double dropout_p = 2.5e-2;
    bool ema = false;
    std::uint64_t seed = 0;
    std::optional<int> batch;  // absent: full batch

    /// Throws InvalidConfig describing the first violated constraint.
    void validate() const;
    LossParams loss_params() const;
};

struct OptimizerState {
    Matrix first_moment;
    Matrix second_moment;
    long step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static OptimizerState zeros(Index d);
};

/// One AdamW update in place:
///   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
///   w -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * w)
/// Throws NonFiniteGradient before touching any state.
void optimizer_step(OptimizerState& state, Matrix& w, const Matrix& grad, double lr, double weight_decay);

/// lr_min + (lr0 - lr_min) * (1 + cos(pi t / total)) / 2
double cosine_lr(int t, int total, double lr0, double lr_min);

/// dropout(x + noise) / (1 - dropout_p). Noise is drawn for every entry in
/// row-major order, then the dropout mask; draws are skipped entirely when the
/// corresponding parameter is zero. Rows are not renormalized.
Matrix perturb(const Matrix& x, double noise_std, double dropout_p, Rng& rng);

/// EMA momentum: 0.9 at t = 0, rising as log(1 + t) to 1.0 at floor(total / 2)
/// and staying there.
double alpha_schedule(int t, int total);

struct EmaState {
    LinearMap w_tt;
    int t = 0;
    int total_steps = 0;

    static EmaState start(Index d, int total_steps);
};

/// w_tt = alpha * w_tt + (1 - alpha) * w with alpha = alpha_schedule(t, total); t += 1.
void ema_update(EmaState& state, const Matrix& w);
/// Same with an explicit momentum.
void ema_update(EmaState& state, const Matrix& w, double alpha);

/// (w + w_tt) / 2
LinearMap average_maps(const LinearMap& w, const LinearMap& w_tt);

struct TraceEntry {
    int step = 0;
    double lr = 0.0;
    double loss = 0.0;
    double alpha = 0.0;  // NaN when the EMA branch is off
};

struct RefineResult {
    LinearMap w;
    std::optional<LinearMap> w_tt;
    std::vector<TraceEntry> trace;
};

/// Runs cfg.steps iterations of perturb -> loss/grad -> AdamW (cosine lr) ->
/// optional EMA. The loss in the trace is measured on the perturbed batch.
RefineResult refine(const LinearMap& w0, const LabeledFeatures& data, const PrototypeMatrix& y,
                    const RefineConfig& cfg);

/// CSV with header "step,lr,loss,alpha".
void write_trace_csv(std::ostream& out, const std::vector<TraceEntry>& trace);

}  // namespace lfa
