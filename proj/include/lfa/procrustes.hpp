// Closed-form mapping solvers.
#pragma once

#include "lfa/core.hpp"

namespace lfa {

/// Interpolation weight toward the identity map, validated to lie in [0, 1].
class BetaParam {
public:
    explicit BetaParam(double beta);
    double value() const noexcept { return beta_; }

private:
    double beta_;
};

/// argmin_W ||source * W - target||_F^2 via the truncated-SVD pseudoinverse
/// (singular values below 1e-10 * s_max dropped), so rank-deficient or
/// N < d problems return the minimum-norm solution.
LinearMap least_squares_map(const Matrix& source, const Matrix& target);

/// Orthogonal W minimizing ||x * W - target||_F^2, i.e. W = U V^T with
/// U S V^T = svd(x^T target). `target` is the stacked P * Y, so hard labels
/// and soft assignments use the same entry point.
/// Throws DegenerateCross when ||x^T target||_F < 1e-12.
LinearMap orthogonal_procrustes(const FeatureMatrix& x, const Matrix& target);
LinearMap orthogonal_procrustes(const Matrix& x, const Matrix& target);

/// W_op - beta * (W_op - I). Requires w_op.kind == orthogonal.
LinearMap beta_procrustes(const LinearMap& w_op, BetaParam beta);

/// Gradient of (beta / 2) * ||W - I||_F^2, i.e. beta * (W - I).
Matrix identity_regularizer_grad(const Matrix& w, BetaParam beta);

}  // namespace lfa
