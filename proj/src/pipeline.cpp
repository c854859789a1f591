#include "lfa/pipeline.hpp"

#include "lfa/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <ostream>

namespace lfa {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

FitResult fit_lfa(const LabeledFeatures& data, const PrototypeMatrix& y, BetaParam beta, const RefineConfig& cfg) {
    data.validate(y.classes());
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    LinearMap w_op = orthogonal_procrustes(data.features, y.gather(data.labels));
    LinearMap w_beta = beta_procrustes(w_op, beta);
    FitTimings timings;
    timings.procrustes_seconds = seconds_since(t0);

    const auto t1 = std::chrono::steady_clock::now();
    RefineResult refined = refine(w_beta, data, y, cfg);
    timings.refine_seconds = seconds_since(t1);
    return {std::move(w_op), std::move(w_beta), std::move(refined), timings};
}

std::vector<double> SweepConfig::betas() const {
    if (!grid.empty()) {
        return grid;
    }
    std::vector<double> out;
    for (int i = 0; i <= 20; ++i) {
        out.push_back(i / 20.0);
    }
    return out;
}

std::vector<FoldSplit> make_folds(const LabeledFeatures& data, Index classes, const SweepConfig& cfg) {
    data.validate(classes);
    if (cfg.folds < 1) {
        throw Error("InvalidConfig", "folds must be >= 1");
    }
    if (!(cfg.val_fraction > 0.0 && cfg.train_fraction > 0.0 && cfg.val_fraction + cfg.train_fraction <= 1.0 + 1e-12)) {
        throw Error("InvalidConfig", "split fractions must be positive and sum to at most 1");
    }

    // Items are rows, or whole groups when group ids are present.
    std::vector<std::vector<Index>> item_rows;
    std::vector<std::vector<std::size_t>> items_of_class(static_cast<std::size_t>(classes));
    {
        std::map<std::int64_t, std::size_t> slot;
        const auto& groups = data.features.group_ids();
        for (Index i = 0; i < data.features.rows(); ++i) {
            std::size_t item = item_rows.size();
            bool fresh = true;
            if (groups) {
                auto [it, inserted] = slot.try_emplace((*groups)[static_cast<std::size_t>(i)], item_rows.size());
                item = it->second;
                fresh = inserted;
            }
            if (fresh) {
                item_rows.emplace_back();
                items_of_class[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])].push_back(item);
            }
            item_rows[item].push_back(i);
        }
    }

    for (Index c = 0; c < classes; ++c) {
        if (items_of_class[static_cast<std::size_t>(c)].size() < 2) {
            throw Error("InsufficientSamples", "class " + std::to_string(c) + " needs at least 2 items for a split");
        }
    }

    std::vector<FoldSplit> splits;
    for (int f = 0; f < cfg.folds; ++f) {
        Rng rng(cfg.seed + static_cast<std::uint64_t>(f));
        FoldSplit split;
        for (Index c = 0; c < classes; ++c) {
            std::vector<std::size_t> pool = items_of_class[static_cast<std::size_t>(c)];
            rng.shuffle(pool);
            const auto n = static_cast<double>(pool.size());
            auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.val_fraction * n)));
            auto n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.train_fraction * n)));
            if (n_val + n_train > pool.size()) {
                n_train = pool.size() - n_val;
            }
            for (std::size_t r = 0; r < pool.size(); ++r) {
                auto& dst = r < n_val ? split.val : (r < n_val + n_train ? split.train : split.unused);
                for (Index row : item_rows[pool[r]]) {
                    dst.push_back(row);
                }
            }
        }
        splits.push_back(std::move(split));
    }
    return splits;
}

SweepResult beta_sweep(const LabeledFeatures& data, const PrototypeMatrix& y, const RefineConfig& cfg,
                       const SweepConfig& sweep) {
    cfg.validate();
    std::vector<double> betas = sweep.betas();
    std::sort(betas.begin(), betas.end());
    for (double b : betas) {
        BetaParam{b};
    }
    SweepResult result;
    result.splits = make_folds(data, y.classes(), sweep);
    const auto folds = static_cast<int>(result.splits.size());

    // Procrustes depends on the fold only.
    std::vector<LinearMap> w_ops;
    std::vector<LabeledFeatures> train_sets;
    std::vector<LabeledFeatures> val_sets;
    for (const auto& split : result.splits) {
        train_sets.push_back(data.select(split.train));
        val_sets.push_back(data.select(split.val));
        w_ops.push_back(orthogonal_procrustes(train_sets.back().features, y.gather(train_sets.back().labels)));
    }

    const auto jobs = static_cast<long>(betas.size()) * folds;
    result.table.resize(static_cast<std::size_t>(jobs));
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(jobs));
    // Independent jobs; each writes its own slot, so the table is ordered by index.
#pragma omp parallel for schedule(dynamic)
    for (long job = 0; job < jobs; ++job) {
        try {
            const auto b = static_cast<std::size_t>(job / folds);
            const auto f = static_cast<std::size_t>(job % folds);
            const LinearMap w_beta = beta_procrustes(w_ops[f], BetaParam{betas[b]});
            const LinearMap w = refine(w_beta, train_sets[f], y, cfg).w;
            const auto preds = classify(val_sets[f].features, w, y).predictions;
            result.table[static_cast<std::size_t>(job)] = {betas[b], static_cast<int>(f),
                                                            top1_accuracy(preds, val_sets[f].labels)};
        } catch (...) {
            failures[static_cast<std::size_t>(job)] = std::current_exception();
        }
    }
    for (const auto& failure : failures) {
        if (failure) {
            std::rethrow_exception(failure);
        }
    }

    double best = -1.0;
    for (std::size_t b = 0; b < betas.size(); ++b) {
        double sum = 0.0;
        for (int f = 0; f < folds; ++f) {
            sum += result.table[b * static_cast<std::size_t>(folds) + static_cast<std::size_t>(f)].val_acc;
        }
        const double mean = sum / folds;
        result.mean_val_acc.push_back(mean);
        if (mean > best) {
            best = mean;
            result.best_beta = betas[b];
        }
    }
    return result;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& table) {
    out << "beta,fold,val_acc\n";
    const auto old_precision = out.precision(17);
    for (const auto& row : table) {
        out << row.beta << ',' << row.fold << ',' << row.val_acc << '\n';
    }
    out.precision(old_precision);
}

}  // namespace lfa
