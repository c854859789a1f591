#include "cli.hpp"

#include "lfa/assignment.hpp"
#include "lfa/data.hpp"
#include "lfa/eval.hpp"
#include "lfa/npy.hpp"
#include "lfa/pipeline.hpp"
#include "lfa/synth.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#ifndef LFA_PRESETS_PATH
#define LFA_PRESETS_PATH "share/presets.json"
#endif

namespace lfa::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string default_presets_path() { return LFA_PRESETS_PATH; }

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::uint64_t default_seed() {
    if (const char* env = std::getenv("LFA_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw Error("InvalidConfig", std::string("LFA_SEED is not an unsigned integer: ") + env);
        }
    }
    return 0;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        throw Error("IoFailure", "cannot write " + path.string());
    }
}

json map_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

GroupMode parse_group_mode(const std::string& s) {
    if (s == "max") return GroupMode::max;
    if (s == "mean") return GroupMode::mean;
    if (s == "expand") return GroupMode::expand;
    throw Error("InvalidConfig", "unknown aggregate mode '" + s + "'");
}

// Refinement flags shared by fit, fit-unsup and sweep-beta. Optional fields
// distinguish "given on the command line" from "take the preset/default".
struct RefineFlags {
    std::optional<std::string> loss;
    std::optional<int> k;
    std::optional<double> s;
    std::optional<int> steps;
    std::optional<double> lr;
    std::optional<double> lr_min;
    std::optional<double> weight_decay;
    std::optional<double> noise;
    std::optional<double> dropout;
    std::optional<int> batch;
    bool ema = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> preset;
    std::string presets_file = LFA_PRESETS_PATH;
    std::optional<std::string> aggregate;

    void attach(CLI::App& app, bool with_ema) {
        app.add_option("--loss", loss, "Refinement loss: arerank, contrastive, triplet, csls");
        app.add_option("--k", k, "Mined neighbours per sample (default 3)");
        app.add_option("--s", s, "Adaptive margin divisor (default 4)");
        app.add_option("--steps", steps, "Refinement steps (default 200)");
        app.add_option("--lr", lr, "Peak learning rate (default 5e-4)");
        app.add_option("--lr-min", lr_min, "Final cosine learning rate (default 1e-7)");
        app.add_option("--wd", weight_decay, "Decoupled weight decay (default 5e-4)");
        app.add_option("--noise", noise, "Gaussian input noise std (default 3.5e-2)");
        app.add_option("--dropout", dropout, "Input dropout probability (default 2.5e-2)");
        app.add_option("--batch", batch, "Mini-batch size (default: full batch)");
        if (with_ema) {
            app.add_flag("--ema", ema, "Also track the EMA map W_tt");
        }
        app.add_option("--seed", seed, "Random seed (default: $LFA_SEED or 0)");
        app.add_option("--preset", preset, "Named defaults from the presets file");
        app.add_option("--presets-file", presets_file, "Presets JSON")->capture_default_str();
        app.add_option("--aggregate", aggregate, "Group handling: expand (default), max, mean");
    }

    json load_preset() const {
        if (!preset) {
            return json::object();
        }
        std::ifstream in(presets_file);
        if (!in) {
            throw Error("ArchiveNotFound", presets_file);
        }
        json all;
        try {
            all = json::parse(in);
        } catch (const json::exception& e) {
            throw Error("HeaderParse", std::string("presets: ") + e.what());
        }
        const auto& table = all.at("presets");
        if (!table.contains(*preset)) {
            throw Error("UnknownPreset", *preset);
        }
        return table.at(*preset);
    }

    RefineConfig resolve(const json& p) const {
        RefineConfig cfg;
        cfg.loss = parse_loss_kind(loss.value_or(p.value("loss", std::string("arerank"))));
        cfg.k = k.value_or(p.value("k", cfg.k));
        cfg.s = s.value_or(p.value("s", cfg.s));
        cfg.steps = steps.value_or(p.value("steps", cfg.steps));
        cfg.lr = lr.value_or(p.value("lr", cfg.lr));
        cfg.lr_min = lr_min.value_or(p.value("lr_min", cfg.lr_min));
        cfg.weight_decay = weight_decay.value_or(p.value("weight_decay", cfg.weight_decay));
        cfg.noise_std = noise.value_or(p.value("noise_std", cfg.noise_std));
        cfg.dropout_p = dropout.value_or(p.value("dropout_p", cfg.dropout_p));
        cfg.ema = ema || p.value("ema", false);
        cfg.seed = seed.value_or(default_seed());
        if (batch) cfg.batch = *batch;
        cfg.validate();
        return cfg;
    }

    GroupMode group_mode(const json& p) const {
        return parse_group_mode(aggregate.value_or(p.value("aggregate", std::string("expand"))));
    }
};

json config_json(const RefineConfig& cfg) {
    json j;
    j["loss"] = std::string(to_string(cfg.loss));
    j["k"] = cfg.k;
    j["s"] = cfg.s;
    j["steps"] = cfg.steps;
    j["lr"] = cfg.lr;
    j["lr_min"] = cfg.lr_min;
    j["weight_decay"] = cfg.weight_decay;
    j["noise_std"] = cfg.noise_std;
    j["dropout_p"] = cfg.dropout_p;
    j["ema"] = cfg.ema;
    j["seed"] = cfg.seed;
    j["batch"] = cfg.batch ? json(*cfg.batch) : json(nullptr);
    return j;
}

void check_dims(Index a, Index b, const std::string& what) {
    if (a != b) {
        throw Error("DimensionMismatch", what + ": " + std::to_string(a) + " vs " + std::to_string(b));
    }
}

LinearMap load_map(const fs::path& path, Index d) {
    Matrix m = npy::load(path);
    check_dims(m.rows(), d, "mapping rows vs feature dimension");
    check_dims(m.cols(), d, "mapping columns vs feature dimension");
    return {std::move(m), MapKind::refined};
}

void write_map(const fs::path& path, const LinearMap& w) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    npy::save(path, w.data, npy::Dtype::f8);
}

json record_base(const std::vector<std::string>& args) {
    json j;
    j["command_line"] = args;
    return j;
}

// ---- fit -------------------------------------------------------------------

struct FitArgs {
    std::string train;
    std::string prototypes;
    std::string beta = "auto";
    std::string out;
    RefineFlags refine;
};

int cmd_fit(const FitArgs& a, const std::vector<std::string>& args, std::ostream& out) {
    const auto t_load = Clock::now();
    const json preset = a.refine.load_preset();
    const PrototypeMatrix y = read_prototypes(a.prototypes);
    const Archive archive = read_archive(a.train);
    const LabeledFeatures data = group_aggregate(archive.labeled(), a.refine.group_mode(preset));
    check_dims(data.features.dim(), y.dim(), "feature vs prototype dimension");
    const double load_seconds = seconds_since(t_load);

    const RefineConfig cfg = a.refine.resolve(preset);
    std::string beta_arg = a.beta;
    if (a.beta == "auto" && preset.contains("beta") && preset.at("beta").is_number()) {
        beta_arg = std::to_string(preset.at("beta").get<double>());
    }

    json record = record_base(args);
    double sweep_seconds = 0.0;
    double beta = 0.0;
    if (beta_arg == "auto") {
        const auto t = Clock::now();
        SweepConfig sc;
        sc.seed = cfg.seed;
        const SweepResult sweep = beta_sweep(data, y, cfg, sc);
        sweep_seconds = seconds_since(t);
        beta = sweep.best_beta;
        std::ostringstream csv;
        write_sweep_csv(csv, sweep.table);
        write_text(fs::path(a.out) / "sweep.csv", csv.str());
        record["beta_selection"] = "cross_validation";
    } else {
        try {
            beta = std::stod(beta_arg);
        } catch (const std::exception&) {
            throw Error("InvalidBeta", "--beta must be 'auto' or a number, got '" + beta_arg + "'");
        }
        record["beta_selection"] = "fixed";
    }

    const FitResult fit = fit_lfa(data, y, BetaParam{beta}, cfg);
    write_map(fs::path(a.out) / "W.npy", fit.refined.w);
    if (fit.refined.w_tt) {
        write_map(fs::path(a.out) / "W_tt.npy", *fit.refined.w_tt);
    }
    std::ostringstream trace;
    write_trace_csv(trace, fit.refined.trace);
    write_text(fs::path(a.out) / "trace.csv", trace.str());

    const auto preds = classify(data.features, fit.refined.w, y).predictions;
    const auto beta_preds = classify(data.features, fit.w_beta, y).predictions;

    json config = config_json(cfg);
    config["beta"] = beta;
    config["preset"] = a.refine.preset ? json(*a.refine.preset) : json(nullptr);
    record["config"] = config;
    record["seed"] = cfg.seed;
    record["timings"] = {{"feature_load", load_seconds},
                         {"beta_sweep", sweep_seconds},
                         {"procrustes_init", fit.timings.procrustes_seconds},
                         {"refinement", fit.timings.refine_seconds}};
    record["metrics"] = {{"train_top1", top1_accuracy(preds, data.labels)},
                         {"train_top1_beta_procrustes", top1_accuracy(beta_preds, data.labels)},
                         {"final_loss", fit.refined.trace.empty() ? json(nullptr) : json(fit.refined.trace.back().loss)},
                         {"samples", data.features.rows()},
                         {"classes", y.classes()},
                         {"dim", y.dim()}};
    record["outputs"] = {{"w", (fs::path(a.out) / "W.npy").string()},
                         {"w_tt", fit.refined.w_tt ? json((fs::path(a.out) / "W_tt.npy").string()) : json(nullptr)}};
    write_text(fs::path(a.out) / "run.json", record.dump(2) + "\n");
    out << record.dump(2) << "\n";
    return 0;
}

// ---- fit-unsup -------------------------------------------------------------

struct UnsupArgs {
    std::string train;
    std::string prototypes;
    double beta = 0.9;
    int rounds = 1;
    double epsilon = 0.05;
    int sinkhorn_iters = 100;
    std::string out;
    RefineFlags refine;
};

int cmd_fit_unsup(const UnsupArgs& a, const std::vector<std::string>& args, std::ostream& out) {
    const auto t_load = Clock::now();
    const json preset = a.refine.load_preset();
    const PrototypeMatrix y = read_prototypes(a.prototypes);
    Archive archive = read_archive(a.train);
    check_dims(archive.features.dim(), y.dim(), "feature vs prototype dimension");
    const GroupMode mode = a.refine.group_mode(preset);
    std::optional<std::vector<int>> score_labels;
    FeatureMatrix x = archive.features;
    if (archive.manifest.labels) {
        const LabeledFeatures agg = group_aggregate(archive.labeled(), mode);
        x = agg.features;
        score_labels = agg.labels;
    } else {
        x = group_aggregate(archive.features, mode);
    }
    const double load_seconds = seconds_since(t_load);

    const RefineConfig cfg = a.refine.resolve(preset);
    SinkhornConfig sk;
    sk.epsilon = a.epsilon;
    sk.iters = a.sinkhorn_iters;

    const auto t_fit = Clock::now();
    const UlfaResult res = ulfa(x, y, a.rounds, BetaParam{a.beta}, cfg, sk);
    const double fit_seconds = seconds_since(t_fit);
    write_map(fs::path(a.out) / "W.npy", res.w);

    const Hardened initial = harden(res.initial_plan);
    const Hardened final_assign = harden(res.final_plan);
    json metrics;
    metrics["label_entropy"] = label_entropy(final_assign.labels, y.classes());
    metrics["mean_row_entropy"] = mean_row_entropy(res.final_plan);
    if (score_labels) {
        metrics["initial_assignment_accuracy"] = top1_accuracy(initial.labels, *score_labels);
        metrics["assignment_accuracy"] = top1_accuracy(final_assign.labels, *score_labels);
    }
    metrics["samples"] = x.rows();

    json record = record_base(args);
    json config = config_json(cfg);
    config["beta"] = a.beta;
    config["rounds"] = a.rounds;
    config["epsilon"] = a.epsilon;
    config["sinkhorn_iters"] = a.sinkhorn_iters;
    record["config"] = config;
    record["seed"] = cfg.seed;
    record["timings"] = {{"feature_load", load_seconds}, {"alignment", fit_seconds}};
    record["metrics"] = metrics;
    record["outputs"] = {{"w", (fs::path(a.out) / "W.npy").string()}};
    write_text(fs::path(a.out) / "run.json", record.dump(2) + "\n");
    out << record.dump(2) << "\n";
    return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
    std::string test;
    std::string prototypes;
    std::string mapping;
    std::optional<std::string> mapping_tt;
    std::string which = "w";
    double tau = 0.01;
    std::optional<std::string> out;
    std::optional<std::string> hist_out;
    std::string aggregate = "expand";
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const PrototypeMatrix y = read_prototypes(a.prototypes);
    const LabeledFeatures data = group_aggregate(read_archive(a.test).labeled(), parse_group_mode(a.aggregate));
    check_dims(data.features.dim(), y.dim(), "feature vs prototype dimension");
    const Index d = y.dim();

    LinearMap w;
    if (a.which == "w") {
        w = load_map(a.mapping, d);
    } else if (a.which == "w_tt" || a.which == "average") {
        const fs::path tt = a.mapping_tt ? fs::path(*a.mapping_tt) : fs::path(a.mapping).parent_path() / "W_tt.npy";
        const LinearMap w_tt = load_map(tt, d);
        w = a.which == "w_tt" ? w_tt : average_maps(load_map(a.mapping, d), w_tt);
    } else {
        throw Error("InvalidConfig", "--which must be w, w_tt or average");
    }

    const EvalReport report = evaluate(data.features, w, y, data.labels, a.tau);
    const std::string text = report_to_json(report, y.class_names());
    if (a.out) {
        write_text(*a.out, text + "\n");
    }
    if (a.hist_out) {
        std::ostringstream csv;
        write_rank_histogram_csv(csv, report.rank_histogram);
        write_text(*a.hist_out, csv.str());
    }
    out << text << "\n";
    return 0;
}

// ---- sweep-beta ------------------------------------------------------------

struct SweepArgs {
    std::string train;
    std::string prototypes;
    std::string out;
    int folds = 3;
    double val_fraction = 0.2;
    double train_fraction = 0.7;
    std::vector<double> grid;
    RefineFlags refine;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
    const json preset = a.refine.load_preset();
    const PrototypeMatrix y = read_prototypes(a.prototypes);
    const LabeledFeatures data = group_aggregate(read_archive(a.train).labeled(), a.refine.group_mode(preset));
    check_dims(data.features.dim(), y.dim(), "feature vs prototype dimension");
    const RefineConfig cfg = a.refine.resolve(preset);
    SweepConfig sc;
    sc.folds = a.folds;
    sc.val_fraction = a.val_fraction;
    sc.train_fraction = a.train_fraction;
    sc.grid = a.grid;
    sc.seed = cfg.seed;
    const SweepResult res = beta_sweep(data, y, cfg, sc);
    std::ostringstream csv;
    write_sweep_csv(csv, res.table);
    write_text(a.out, csv.str());
    json j;
    j["best_beta"] = res.best_beta;
    json means = json::array();
    std::vector<double> betas = sc.betas();
    std::sort(betas.begin(), betas.end());
    for (std::size_t b = 0; b < betas.size(); ++b) {
        means.push_back({{"beta", betas[b]}, {"mean_val_acc", res.mean_val_acc[b]}});
    }
    j["mean_val_acc"] = means;
    out << j.dump(2) << "\n";
    return 0;
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
    SynthSpec spec;
    std::string planted = "random_orthogonal";
    std::optional<double> rotation_scale;
    std::optional<std::uint64_t> seed;
    bool unlabeled = false;
    std::string out;
};

int cmd_synth(SynthArgs a, std::ostream& out) {
    a.spec.planted_map = parse_planted_map(a.planted);
    a.spec.rotation_scale = a.rotation_scale;
    a.spec.seed = a.seed.value_or(default_seed());
    const SynthData data = synth_generate(a.spec);
    const fs::path dir(a.out);
    fs::create_directories(dir);

    auto manifest_for = [&](const LabeledFeatures& lf, Split split, bool with_labels) {
        Manifest m;
        if (with_labels) m.labels = lf.labels;
        m.class_names = data.prototypes.class_names();
        m.split = split;
        m.source_model = "synthetic";
        return m;
    };
    write_archive(dir / "train", data.train.features.data(), manifest_for(data.train, Split::train, !a.unlabeled));
    if (data.test) {
        write_archive(dir / "test", data.test->features.data(), manifest_for(*data.test, Split::test, true));
    }
    write_prototypes(dir / "prototypes", data.prototypes, "synthetic");
    write_map(dir / "planted.npy", data.planted);

    json j;
    j["train"] = (dir / "train").string();
    j["test"] = data.test ? json((dir / "test").string()) : json(nullptr);
    j["prototypes"] = (dir / "prototypes").string();
    j["planted"] = (dir / "planted.npy").string();
    j["seed"] = a.spec.seed;
    out << j.dump(2) << "\n";
    return 0;
}

// ---- hubness / gap ---------------------------------------------------------

struct DiagArgs {
    std::string archive;
    std::string prototypes;
    std::optional<std::string> mapping;
    std::string out;
};

struct Loaded {
    LabeledFeatures data;
    PrototypeMatrix y;
    LinearMap w;
};

Loaded load_diag(const DiagArgs& a) {
    PrototypeMatrix y = read_prototypes(a.prototypes);
    LabeledFeatures data = read_archive(a.archive).labeled();
    check_dims(data.features.dim(), y.dim(), "feature vs prototype dimension");
    LinearMap w = a.mapping ? load_map(*a.mapping, y.dim()) : LinearMap::identity(y.dim());
    return {std::move(data), std::move(y), std::move(w)};
}

int cmd_hubness(const DiagArgs& a, std::ostream& out) {
    const Loaded l = load_diag(a);
    const std::vector<int> ranks = gt_rank(l.data.features, l.w, l.y, l.data.labels);
    std::map<int, long> hist;
    double sum = 0.0;
    for (int r : ranks) {
        hist[r] += 1;
        sum += r;
    }
    std::ostringstream csv;
    write_rank_histogram_csv(csv, hist);
    write_text(a.out, csv.str());
    json j;
    j["mean_gt_rank"] = ranks.empty() ? 1.0 : sum / static_cast<double>(ranks.size());
    j["rank1_fraction"] = ranks.empty() ? 0.0 : static_cast<double>(hist[1]) / static_cast<double>(ranks.size());
    j["samples"] = ranks.size();
    out << j.dump(2) << "\n";
    return 0;
}

int cmd_gap(const DiagArgs& a, std::ostream& out) {
    const Loaded l = load_diag(a);
    const Matrix mapped = l.data.features.data() * l.w.data;
    const Matrix matched = l.y.gather(l.data.labels);
    const double gap = modality_gap(mapped, matched);

    const Index n = mapped.rows();
    Matrix points(n + l.y.classes(), mapped.cols());
    points << mapped, l.y.data();
    const PcaProjection pca = pca_project(points, 2);
    std::ostringstream csv;
    csv.precision(17);
    csv << "kind,index,label,pc1,pc2\n";
    for (Index i = 0; i < points.rows(); ++i) {
        const bool image = i < n;
        const Index idx = image ? i : i - n;
        const int label = image ? l.data.labels[static_cast<std::size_t>(idx)] : static_cast<int>(idx);
        csv << (image ? "image" : "prototype") << ',' << idx << ',' << label << ',' << pca.coords(i, 0) << ','
            << pca.coords(i, 1) << '\n';
    }
    write_text(a.out, csv.str());
    json j;
    j["modality_gap"] = gap;
    j["pca_variances"] = {pca.variances(0), pca.variances(1)};
    out << j.dump(2) << "\n";
    return 0;
}

// ---- approx-prompts --------------------------------------------------------

struct ApproxArgs {
    std::string source;
    std::string target;
    std::string out;
};

int cmd_approx(const ApproxArgs& a, std::ostream& out) {
    const PrototypeMatrix src = read_prototypes(a.source);
    const PrototypeMatrix dst = read_prototypes(a.target);
    check_dims(src.classes(), dst.classes(), "prototype counts");
    check_dims(src.dim(), dst.dim(), "prototype dimension");
    const LinearMap w = least_squares_map(src.data(), dst.data());
    write_map(a.out, w);
    const Matrix approx = src.data() * w.data;
    // Does Y W pick the same class as Y' for each target prototype row?
    Index agree = 0;
    for (Index i = 0; i < dst.classes(); ++i) {
        Index a_best = 0;
        Index b_best = 0;
        const RowVector sa = dst.data().row(i) * approx.transpose();
        const RowVector sb = dst.data().row(i) * dst.data().transpose();
        sa.maxCoeff(&a_best);
        sb.maxCoeff(&b_best);
        agree += a_best == b_best ? 1 : 0;
    }
    json j;
    j["residual_fro"] = (approx - dst.data()).norm();
    j["relative_residual"] = (approx - dst.data()).norm() / dst.data().norm();
    j["argmax_agreement"] = static_cast<double>(agree) / static_cast<double>(dst.classes());
    j["output"] = a.out;
    out << j.dump(2) << "\n";
    return 0;
}

// ---- knn -------------------------------------------------------------------

struct KnnArgs {
    std::string train;
    std::string test;
    int k = 16;
};

int cmd_knn(const KnnArgs& a, std::ostream& out) {
    const LabeledFeatures train = read_archive(a.train).labeled();
    const LabeledFeatures test = read_archive(a.test).labeled();
    check_dims(train.features.dim(), test.features.dim(), "train vs test dimension");
    const auto preds = knn_baseline(train, test.features, a.k);
    json j;
    j["k"] = a.k;
    j["top1"] = top1_accuracy(preds, test.labels);
    out << j.dump(2) << "\n";
    return 0;
}

void emit_error(std::ostream& err, const std::string& name, const std::string& detail) {
    json j;
    j["error"] = name;
    j["detail"] = detail;
    err << j.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Linear feature alignment of frozen embeddings to class prototypes", "lfa"};
    app.require_subcommand(1);

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Supervised alignment: Procrustes -> beta -> refine");
    fit_cmd->add_option("--train", fit.train, "Labeled training archive")->required();
    fit_cmd->add_option("--prototypes", fit.prototypes, "Prototype archive")->required();
    fit_cmd->add_option("--beta", fit.beta, "'auto' (3-fold CV) or a value in [0, 1]")->capture_default_str();
    fit_cmd->add_option("--out", fit.out, "Output directory")->required();
    fit.refine.attach(*fit_cmd, true);

    UnsupArgs unsup;
    auto* unsup_cmd = app.add_subcommand("fit-unsup", "Unsupervised alignment with Sinkhorn assignments");
    unsup_cmd->add_option("--train", unsup.train, "Training archive (labels optional, used only for scoring)")->required();
    unsup_cmd->add_option("--prototypes", unsup.prototypes, "Prototype archive")->required();
    unsup_cmd->add_option("--beta", unsup.beta, "beta in [0, 1]")->capture_default_str();
    unsup_cmd->add_option("--n", unsup.rounds, "Sinkhorn/refine rounds")->capture_default_str();
    unsup_cmd->add_option("--epsilon", unsup.epsilon, "Sinkhorn entropic regularization")->capture_default_str();
    unsup_cmd->add_option("--sinkhorn-iters", unsup.sinkhorn_iters, "Sinkhorn sweeps")->capture_default_str();
    unsup_cmd->add_option("--out", unsup.out, "Output directory")->required();
    unsup.refine.attach(*unsup_cmd, false);

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a mapping on a labeled archive");
    eval_cmd->add_option("--test", ev.test, "Labeled test archive")->required();
    eval_cmd->add_option("--prototypes", ev.prototypes, "Prototype archive")->required();
    eval_cmd->add_option("--mapping", ev.mapping, "W.npy written by fit")->required();
    eval_cmd->add_option("--mapping-tt", ev.mapping_tt, "W_tt.npy (default: next to --mapping)");
    eval_cmd->add_option("--which", ev.which, "w, w_tt or average")->capture_default_str();
    eval_cmd->add_option("--tau", ev.tau, "Softmax temperature")->capture_default_str();
    eval_cmd->add_option("--out", ev.out, "Write the report JSON here as well");
    eval_cmd->add_option("--hist-out", ev.hist_out, "Write the rank histogram CSV here");
    eval_cmd->add_option("--aggregate", ev.aggregate, "expand, max or mean")->capture_default_str();

    SweepArgs sw;
    auto* sweep_cmd = app.add_subcommand("sweep-beta", "Cross-validate beta on a training archive");
    sweep_cmd->add_option("--train", sw.train, "Labeled training archive")->required();
    sweep_cmd->add_option("--prototypes", sw.prototypes, "Prototype archive")->required();
    sweep_cmd->add_option("--out", sw.out, "CSV output (beta,fold,val_acc)")->required();
    sweep_cmd->add_option("--folds", sw.folds, "Folds")->capture_default_str();
    sweep_cmd->add_option("--val-frac", sw.val_fraction, "Validation fraction per fold")->capture_default_str();
    sweep_cmd->add_option("--train-frac", sw.train_fraction, "Training fraction per fold")->capture_default_str();
    sweep_cmd->add_option("--grid", sw.grid, "Explicit beta values (default 0:0.05:1)");
    sw.refine.attach(*sweep_cmd, false);

    SynthArgs sy;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic problem with a planted map");
    synth_cmd->add_option("--C", sy.spec.classes, "Classes")->capture_default_str();
    synth_cmd->add_option("--d", sy.spec.dim, "Dimension")->capture_default_str();
    synth_cmd->add_option("--shots", sy.spec.shots_per_class, "Training samples per class")->capture_default_str();
    synth_cmd->add_option("--test-shots", sy.spec.test_per_class, "Held-out samples per class")->capture_default_str();
    synth_cmd->add_option("--noise", sy.spec.noise_std, "Noise std")->capture_default_str();
    synth_cmd->add_option("--map", sy.planted, "identity, random_orthogonal, random_invertible")->capture_default_str();
    synth_cmd->add_option("--rotation-scale", sy.rotation_scale, "Mild rotation strength (default: Haar random)");
    synth_cmd->add_option("--seed", sy.seed, "Seed (default: $LFA_SEED or 0)");
    synth_cmd->add_flag("--unlabeled", sy.unlabeled, "Omit labels from the training manifest");
    synth_cmd->add_option("--out", sy.out, "Output directory")->required();

    DiagArgs hub;
    auto* hub_cmd = app.add_subcommand("hubness", "Ground-truth prototype rank histogram");
    hub_cmd->add_option("--archive", hub.archive, "Labeled archive")->required();
    hub_cmd->add_option("--prototypes", hub.prototypes, "Prototype archive")->required();
    hub_cmd->add_option("--mapping", hub.mapping, "Mapping (default identity)");
    hub_cmd->add_option("--out", hub.out, "CSV output (rank,count)")->required();

    DiagArgs gap;
    auto* gap_cmd = app.add_subcommand("gap", "Modality gap and 2-D PCA export");
    gap_cmd->add_option("--archive", gap.archive, "Labeled archive")->required();
    gap_cmd->add_option("--prototypes", gap.prototypes, "Prototype archive")->required();
    gap_cmd->add_option("--mapping", gap.mapping, "Mapping (default identity)");
    gap_cmd->add_option("--out", gap.out, "CSV output of PCA coordinates")->required();

    ApproxArgs ap;
    auto* approx_cmd = app.add_subcommand("approx-prompts", "Least-squares map between two prototype sets");
    approx_cmd->add_option("--source", ap.source, "Prototype archive Y")->required();
    approx_cmd->add_option("--target", ap.target, "Prototype archive Y'")->required();
    approx_cmd->add_option("--out", ap.out, "Mapping output (.npy)")->required();

    KnnArgs kn;
    auto* knn_cmd = app.add_subcommand("knn", "kNN baseline on unmapped features");
    knn_cmd->add_option("--train", kn.train, "Labeled training archive")->required();
    knn_cmd->add_option("--test", kn.test, "Labeled test archive")->required();
    knn_cmd->add_option("--k", kn.k, "Neighbours")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) {
        reversed.pop_back();  // program name
    }
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        emit_error(err, "UsageError", e.what());
        return 2;
    }

    try {
        if (*fit_cmd) return cmd_fit(fit, args, out);
        if (*unsup_cmd) return cmd_fit_unsup(unsup, args, out);
        if (*eval_cmd) return cmd_eval(ev, out);
        if (*sweep_cmd) return cmd_sweep(sw, out);
        if (*synth_cmd) return cmd_synth(sy, out);
        if (*hub_cmd) return cmd_hubness(hub, out);
        if (*gap_cmd) return cmd_gap(gap, out);
        if (*approx_cmd) return cmd_approx(ap, out);
        if (*knn_cmd) return cmd_knn(kn, out);
    } catch (const Error& e) {
        emit_error(err, e.name(), e.what());
        return 1;
    } catch (const fs::filesystem_error& e) {
        emit_error(err, "IoFailure", e.what());
        return 1;
    }
    return 2;
}

}  // namespace lfa::cli
