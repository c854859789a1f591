#include "lfa/refine.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>

namespace lfa {

namespace {

void invalid(const std::string& what) { throw Error("InvalidConfig", what); }

}  // namespace

void RefineConfig::validate() const {
    if (k < 1) invalid("k must be >= 1");
    if (!(s > 0.0)) invalid("s must be positive");
    if (steps < 0) invalid("steps must be >= 0");
    if (!(lr > 0.0)) invalid("lr must be positive");
    if (!(lr_min > 0.0) || lr_min > lr) invalid("lr_min must lie in (0, lr]");
    if (!(weight_decay >= 0.0)) invalid("weight_decay must be >= 0");
    if (!(noise_std >= 0.0)) invalid("noise_std must be >= 0");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) invalid("dropout_p must lie in [0, 1)");
    if (batch && *batch < 1) invalid("batch must be positive");
}

LossParams RefineConfig::loss_params() const {
    LossParams p;
    p.k = k;
    p.s = s;
    return p;
}

OptimizerState OptimizerState::zeros(Index d) {
    OptimizerState s;
    s.first_moment = Matrix::Zero(d, d);
    s.second_moment = Matrix::Zero(d, d);
    return s;
}

void optimizer_step(OptimizerState& state, Matrix& w, const Matrix& grad, double lr, double weight_decay) {
    require_shape(grad.rows() == w.rows() && grad.cols() == w.cols(), "gradient and map differ in shape");
    require_shape(state.first_moment.rows() == w.rows() && state.first_moment.cols() == w.cols(),
                  "optimizer state and map differ in shape");
    if (!grad.allFinite()) {
        throw Error("NonFiniteGradient", "gradient has NaN or infinite entries");
    }
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bias1 = 1.0 - std::pow(state.beta1, t);
    const double bias2 = 1.0 - std::pow(state.beta2, t);

    state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
    state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad.cwiseProduct(grad);

    for (Index i = 0; i < w.rows(); ++i) {
        for (Index j = 0; j < w.cols(); ++j) {
            const double m_hat = state.first_moment(i, j) / bias1;
            const double v_hat = state.second_moment(i, j) / bias2;
            w(i, j) -= lr * (m_hat / (std::sqrt(v_hat) + state.eps) + weight_decay * w(i, j));
        }
    }
}

double cosine_lr(int t, int total, double lr0, double lr_min) {
    if (total <= 0) {
        return lr0;
    }
    const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(total);
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(phase));
}

Matrix perturb(const Matrix& x, double noise_std, double dropout_p, Rng& rng) {
    Matrix out = x;
    if (noise_std > 0.0) {
        for (Index i = 0; i < out.rows(); ++i) {
            for (Index j = 0; j < out.cols(); ++j) {
                out(i, j) += noise_std * rng.normal();
            }
        }
    }
    if (dropout_p > 0.0) {
        const double keep_scale = 1.0 / (1.0 - dropout_p);
        for (Index i = 0; i < out.rows(); ++i) {
            for (Index j = 0; j < out.cols(); ++j) {
                out(i, j) = rng.uniform() < dropout_p ? 0.0 : out(i, j) * keep_scale;
            }
        }
    }
    return out;
}

double alpha_schedule(int t, int total) {
    const int half = total / 2;
    if (half <= 0 || t >= half) {
        return 1.0;
    }
    return 0.9 + 0.1 * std::log1p(static_cast<double>(t)) / std::log1p(static_cast<double>(half));
}

EmaState EmaState::start(Index d, int total_steps) {
    return {LinearMap{Matrix::Identity(d, d), MapKind::ema}, 0, total_steps};
}

void ema_update(EmaState& state, const Matrix& w, double alpha) {
    require_shape(w.rows() == state.w_tt.data.rows() && w.cols() == state.w_tt.data.cols(),
                  "EMA map and update differ in shape");
    state.w_tt.data = alpha * state.w_tt.data + (1.0 - alpha) * w;
    state.w_tt.kind = MapKind::ema;
    state.t += 1;
}

void ema_update(EmaState& state, const Matrix& w) {
    ema_update(state, w, alpha_schedule(state.t, state.total_steps));
}

LinearMap average_maps(const LinearMap& w, const LinearMap& w_tt) {
    require_shape(w.data.rows() == w_tt.data.rows() && w.data.cols() == w_tt.data.cols(),
                  "maps differ in shape");
    return {(w.data + w_tt.data) / 2.0, MapKind::refined};
}

RefineResult refine(const LinearMap& w0, const LabeledFeatures& data, const PrototypeMatrix& y,
                    const RefineConfig& cfg) {
    cfg.validate();
    data.validate(y.classes());
    require_shape(w0.dim() == data.features.dim() && y.dim() == w0.dim(), "map, features and prototypes differ in dimension");

    RefineResult result{w0, std::nullopt, {}};
    if (cfg.steps == 0) {
        return result;
    }

    const Index n = data.features.rows();
    const Index d = w0.dim();
    const LossParams params = cfg.loss_params();
    const Matrix& x = data.features.data();

    Rng rng(cfg.seed);
    Matrix w = w0.data;
    OptimizerState opt = OptimizerState::zeros(d);
    std::optional<EmaState> ema;
    if (cfg.ema) {
        ema = EmaState::start(d, cfg.steps);
    }

    const bool minibatch = cfg.batch && *cfg.batch < n;
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::size_t cursor = order.size();

    result.trace.reserve(static_cast<std::size_t>(cfg.steps));
    for (int t = 0; t < cfg.steps; ++t) {
        Matrix xb;
        std::vector<int> yb;
        if (minibatch) {
            const auto b = static_cast<std::size_t>(*cfg.batch);
            if (cursor + b > order.size()) {
                rng.shuffle(order);
                cursor = 0;
            }
            xb.resize(static_cast<Index>(b), d);
            yb.resize(b);
            for (std::size_t r = 0; r < b; ++r) {
                xb.row(static_cast<Index>(r)) = x.row(order[cursor + r]);
                yb[r] = data.labels[static_cast<std::size_t>(order[cursor + r])];
            }
            cursor += b;
            xb = perturb(xb, cfg.noise_std, cfg.dropout_p, rng);
        } else {
            xb = perturb(x, cfg.noise_std, cfg.dropout_p, rng);
        }
        const std::vector<int>& labels = minibatch ? yb : data.labels;

        const LossValue lv = evaluate_loss(cfg.loss, xb, labels, w, y, params);
        const double lr = cosine_lr(t, cfg.steps, cfg.lr, cfg.lr_min);
        optimizer_step(opt, w, lv.grad, lr, cfg.weight_decay);

        double alpha = std::numeric_limits<double>::quiet_NaN();
        if (ema) {
            alpha = alpha_schedule(ema->t, ema->total_steps);
            ema_update(*ema, w, alpha);
        }
        result.trace.push_back({t, lr, lv.loss, alpha});
    }

    result.w = {std::move(w), MapKind::refined};
    if (ema) {
        result.w_tt = ema->w_tt;
    }
    return result;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceEntry>& trace) {
    out << "step,lr,loss,alpha\n";
    const auto old_precision = out.precision(17);
    for (const auto& e : trace) {
        out << e.step << ',' << e.lr << ',' << e.loss << ',';
        if (!std::isnan(e.alpha)) {
            out << e.alpha;
        }
        out << '\n';
    }
    out.precision(old_precision);
}

}  // namespace lfa
