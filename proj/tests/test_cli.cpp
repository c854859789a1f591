#include "cli.hpp"

#include "lfa/assignment.hpp"
#include "lfa/data.hpp"
#include "lfa/npy.hpp"

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

using namespace lfa;
using lfa::test::TempDir;
using json = nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "lfa");
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string s(const std::filesystem::path& p) { return p.string(); }

// Small problem so the default beta sweep stays quick.
void small_synth(const TempDir& dir, const std::string& name, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"synth", "--C", "6", "--d", "8", "--shots", "6", "--test-shots", "4",
                                  "--seed", "3", "--out", s(dir / name)};
    args.insert(args.end(), extra.begin(), extra.end());
    const Run r = run(args);
    REQUIRE(r.code == 0);
}

}  // namespace

TEST_CASE("fit with defaults writes a mapping and a run record") {
    TempDir dir("cli_fit");
    small_synth(dir, "data");
    const Run r = run({"fit", "--train", s(dir / "data/train"), "--prototypes", s(dir / "data/prototypes"), "--steps",
                       "20", "--out", s(dir / "run")});
    REQUIRE(r.code == 0);
    CHECK(std::filesystem::exists(dir / "run/W.npy"));
    CHECK(std::filesystem::exists(dir / "run/trace.csv"));
    CHECK(std::filesystem::exists(dir / "run/sweep.csv"));
    const json rec = json::parse(slurp(dir / "run/run.json"));
    CHECK(rec.at("metrics").contains("train_top1"));
    CHECK(rec.at("beta_selection") == "cross_validation");
    CHECK(rec.at("timings").contains("procrustes_init"));
    CHECK(rec.at("command_line").size() == 10);
    CHECK(npy::load(dir / "run/W.npy").rows() == 8);
}

TEST_CASE("fit with zero steps and beta 1 writes the identity") {
    TempDir dir("cli_identity");
    small_synth(dir, "data");
    const Run r = run({"fit", "--train", s(dir / "data/train"), "--prototypes", s(dir / "data/prototypes"), "--steps",
                       "0", "--beta", "1.0", "--out", s(dir / "run")});
    REQUIRE(r.code == 0);
    CHECK((npy::load(dir / "run/W.npy") - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_FALSE(std::filesystem::exists(dir / "run/sweep.csv"));
}

TEST_CASE("fit errors are reported by name") {
    TempDir dir("cli_err");
    small_synth(dir, "data");
    Run r = run({"fit", "--train", s(dir / "data/train"), "--prototypes", s(dir / "nowhere"), "--out", s(dir / "run")});
    CHECK(r.code != 0);
    CHECK(json::parse(r.err).at("error") == "ArchiveNotFound");

    r = run({"fit", "--train", s(dir / "data/train"), "--prototypes", s(dir / "data/prototypes"), "--beta", "2",
             "--out", s(dir / "run")});
    CHECK(r.code == 1);
    CHECK(json::parse(r.err).at("error") == "InvalidBeta");

    r = run({"fit", "--train", s(dir / "data/train"), "--prototypes", s(dir / "data/prototypes"), "--preset", "nope",
             "--out", s(dir / "run")});
    CHECK(json::parse(r.err).at("error") == "UnknownPreset");

    r = run({"fit", "--train", s(dir / "data/train"), "--prototypes", s(dir / "data/prototypes"), "--loss", "focal",
             "--out", s(dir / "run")});
    CHECK(json::parse(r.err).at("error") == "UnsupportedVariant");

    r = run({"fit", "--bogus"});
    CHECK(r.code == 2);
    r = run({});
    CHECK(r.code == 2);
    r = run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("fit-unsup") != std::string::npos);
}

TEST_CASE("presets fill in defaults and explicit flags win") {
    TempDir dir("cli_preset");
    small_synth(dir, "data");
    const Run r = run({"fit", "--train", s(dir / "data/train"), "--prototypes", s(dir / "data/prototypes"), "--preset",
                       "b2n/imagenet", "--steps", "3", "--out", s(dir / "run")});
    REQUIRE(r.code == 0);
    const json cfg = json::parse(slurp(dir / "run/run.json")).at("config");
    CHECK(cfg.at("steps") == 3);
    CHECK(cfg.at("beta") == 0.9);
    CHECK(cfg.at("ema") == true);
    CHECK(std::filesystem::exists(dir / "run/W_tt.npy"));

    // Frame-level presets aggregate groups, which this archive does not carry.
    const Run g = run({"fit", "--train", s(dir / "data/train"), "--prototypes", s(dir / "data/prototypes"),
                       "--preset", "action/ucf101", "--out", s(dir / "run2")});
    CHECK(json::parse(g.err).at("error") == "MissingGroups");
}

TEST_CASE("LFA_SEED sets the default seed") {
    TempDir dir("cli_seed");
    small_synth(dir, "data");
    ::setenv("LFA_SEED", "17", 1);
    const Run r = run({"fit", "--train", s(dir / "data/train"), "--prototypes", s(dir / "data/prototypes"), "--steps",
                       "2", "--beta", "0.5", "--out", s(dir / "run")});
    ::unsetenv("LFA_SEED");
    REQUIRE(r.code == 0);
    CHECK(json::parse(slurp(dir / "run/run.json")).at("seed") == 17);
}

TEST_CASE("fit-unsup recovers labels and ignores them for fitting") {
    TempDir dir("cli_unsup");
    const std::vector<std::string> common{"synth", "--C", "20", "--d", "32", "--shots", "16", "--rotation-scale",
                                          "0.7", "--seed", "6"};
    auto with_out = [&](const std::string& name, bool unlabeled) {
        std::vector<std::string> a = common;
        a.push_back("--out");
        a.push_back(s(dir / name));
        if (unlabeled) a.push_back("--unlabeled");
        REQUIRE(run(a).code == 0);
    };
    with_out("labeled", false);
    with_out("unlabeled", true);

    const Run a = run({"fit-unsup", "--train", s(dir / "labeled/train"), "--prototypes", s(dir / "labeled/prototypes"),
                       "--n", "1", "--beta", "0.5", "--seed", "6", "--out", s(dir / "a")});
    REQUIRE(a.code == 0);
    const json metrics = json::parse(a.out).at("metrics");
    CHECK(metrics.at("assignment_accuracy").get<double>() >= 0.9);

    const Run b = run({"fit-unsup", "--train", s(dir / "unlabeled/train"), "--prototypes",
                       s(dir / "unlabeled/prototypes"), "--n", "1", "--beta", "0.5", "--seed", "6", "--out",
                       s(dir / "b")});
    REQUIRE(b.code == 0);
    CHECK_FALSE(json::parse(b.out).at("metrics").contains("assignment_accuracy"));
    CHECK(slurp(dir / "a/W.npy") == slurp(dir / "b/W.npy"));
}

TEST_CASE("fit-unsup with zero rounds writes beta-Procrustes of the Sinkhorn solution") {
    TempDir dir("cli_unsup0");
    small_synth(dir, "data", {"--rotation-scale", "0.5"});
    const Run r = run({"fit-unsup", "--train", s(dir / "data/train"), "--prototypes", s(dir / "data/prototypes"),
                       "--n", "0", "--beta", "0.3", "--out", s(dir / "run")});
    REQUIRE(r.code == 0);
    const Archive train = read_archive(dir / "data/train");
    const PrototypeMatrix y = read_prototypes(dir / "data/prototypes");
    const AssignmentMatrix p = sinkhorn(train.features, LinearMap::identity(8), y, SinkhornConfig{});
    const Matrix expected =
        beta_procrustes(orthogonal_procrustes(train.features, p.data * y.data()), BetaParam{0.3}).data;
    CHECK(npy::load(dir / "run/W.npy") == expected);
}

TEST_CASE("eval reports, map selection and dimension checks") {
    TempDir dir("cli_eval");
    small_synth(dir, "data", {"--map", "identity", "--noise", "0"});
    npy::save(dir / "I.npy", Matrix::Identity(8, 8), npy::Dtype::f8);
    Run r = run({"eval", "--test", s(dir / "data/test"), "--prototypes", s(dir / "data/prototypes"), "--mapping",
                 s(dir / "I.npy"), "--out", s(dir / "report.json"), "--hist-out", s(dir / "hist.csv")});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).at("top1") == 1.0);
    CHECK(slurp(dir / "report.json") == r.out);
    CHECK(slurp(dir / "hist.csv") == "rank,count\n1,24\n");

    Rng rng(5);
    npy::save(dir / "W.npy", gaussian_matrix(8, 8, 1.0, rng), npy::Dtype::f8);
    std::filesystem::copy_file(dir / "W.npy", dir / "W_tt.npy");
    const Run w = run({"eval", "--test", s(dir / "data/test"), "--prototypes", s(dir / "data/prototypes"),
                       "--mapping", s(dir / "W.npy")});
    const Run avg = run({"eval", "--test", s(dir / "data/test"), "--prototypes", s(dir / "data/prototypes"),
                         "--mapping", s(dir / "W.npy"), "--which", "average"});
    REQUIRE(avg.code == 0);
    CHECK(avg.out == w.out);

    npy::save(dir / "small.npy", Matrix::Identity(4, 4), npy::Dtype::f8);
    r = run({"eval", "--test", s(dir / "data/test"), "--prototypes", s(dir / "data/prototypes"), "--mapping",
             s(dir / "small.npy")});
    CHECK(json::parse(r.err).at("error") == "DimensionMismatch");
}

TEST_CASE("synth, approx-prompts, hubness, gap, sweep-beta and knn") {
    TempDir dir("cli_misc");
    REQUIRE(run({"synth", "--C", "20", "--d", "32", "--shots", "16", "--out", s(dir / "data")}).code == 0);
    const Archive train = read_archive(dir / "data/train");
    CHECK(train.features.rows() == 320);
    CHECK(train.manifest.source_model == "synthetic");

    // With C >= d the prototypes span the space and Y W = Y forces W = I.
    REQUIRE(run({"synth", "--C", "40", "--d", "16", "--shots", "1", "--out", s(dir / "wide")}).code == 0);
    Run r = run({"approx-prompts", "--source", s(dir / "wide/prototypes"), "--target", s(dir / "wide/prototypes"),
                 "--out", s(dir / "A.npy")});
    REQUIRE(r.code == 0);
    CHECK((npy::load(dir / "A.npy") - Matrix::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(json::parse(r.out).at("argmax_agreement") == 1.0);

    // With C < d the minimum-norm answer is the projector onto the prototype span.
    r = run({"approx-prompts", "--source", s(dir / "data/prototypes"), "--target", s(dir / "data/prototypes"),
             "--out", s(dir / "P.npy")});
    REQUIRE(r.code == 0);
    const Matrix proj = npy::load(dir / "P.npy");
    CHECK((proj * proj - proj).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((proj - proj.transpose()).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(json::parse(r.out).at("relative_residual").get<double>() < 1e-6);

    // Perfect alignment: the planted map sends every noiseless sample onto its prototype.
    REQUIRE(run({"synth", "--C", "5", "--d", "8", "--shots", "4", "--noise", "0", "--out", s(dir / "clean")}).code == 0);
    r = run({"hubness", "--archive", s(dir / "clean/train"), "--prototypes", s(dir / "clean/prototypes"), "--mapping",
             s(dir / "clean/planted.npy"), "--out", s(dir / "hub.csv")});
    REQUIRE(r.code == 0);
    CHECK(slurp(dir / "hub.csv") == "rank,count\n1,20\n");
    CHECK(json::parse(r.out).at("mean_gt_rank") == 1.0);

    r = run({"gap", "--archive", s(dir / "clean/train"), "--prototypes", s(dir / "clean/prototypes"), "--mapping",
             s(dir / "clean/planted.npy"), "--out", s(dir / "pca.csv")});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).at("modality_gap").get<double>() < 1e-6);
    CHECK(slurp(dir / "pca.csv").rfind("kind,index,label,pc1,pc2\n", 0) == 0);

    small_synth(dir, "sm");
    r = run({"sweep-beta", "--train", s(dir / "sm/train"), "--prototypes", s(dir / "sm/prototypes"), "--grid", "0",
             "0.5", "1", "--steps", "2", "--out", s(dir / "sweep.csv")});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).at("mean_val_acc").size() == 3);
    CHECK(slurp(dir / "sweep.csv").rfind("beta,fold,val_acc\n", 0) == 0);

    r = run({"knn", "--train", s(dir / "sm/train"), "--test", s(dir / "sm/test"), "--k", "3"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).contains("top1"));
}

TEST_CASE("equal seeds give byte-identical mappings") {
    TempDir dir("cli_det");
    small_synth(dir, "data");
    for (const char* name : {"a", "b"}) {
        REQUIRE(run({"fit", "--train", s(dir / "data/train"), "--prototypes", s(dir / "data/prototypes"), "--steps",
                     "15", "--ema", "--seed", "4", "--out", s(dir / name)})
                    .code == 0);
    }
    CHECK(slurp(dir / "a/W.npy") == slurp(dir / "b/W.npy"));
    CHECK(slurp(dir / "a/W_tt.npy") == slurp(dir / "b/W_tt.npy"));
    CHECK(slurp(dir / "a/sweep.csv") == slurp(dir / "b/sweep.csv"));
}
