// Serial reference vs OpenMP kernels: wall time and bitwise agreement.
#include "lfa/kernels.hpp"
#include "lfa/losses.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <functional>

namespace {

using lfa::Matrix;

double best_of(int reps, const std::function<Matrix()>& fn, Matrix& result) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        result = fn();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void row(const char* name, int reps, const std::function<Matrix()>& serial, const std::function<Matrix()>& parallel) {
    Matrix a;
    Matrix b;
    const double ts = best_of(reps, serial, a);
    const double tp = best_of(reps, parallel, b);
    const bool same = a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
    std::printf("%-22s %12.6f %12.6f %8.2fx  %s\n", name, ts, tp, ts / tp, same ? "bitwise-equal" : "DIFFERENT");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel benchmark", "lfa_bench"};
    long n = 4096;
    long d = 512;
    long c = 1000;
    int reps = 3;
    app.add_option("--n", n, "Samples")->capture_default_str();
    app.add_option("--d", d, "Dimension")->capture_default_str();
    app.add_option("--c", c, "Classes")->capture_default_str();
    app.add_option("--reps", reps, "Repetitions (best time kept)")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    lfa::Rng rng(7);
    const Matrix x = lfa::l2_normalize_rows(lfa::gaussian_matrix(n, d, 1.0, rng));
    const Matrix w = lfa::random_orthogonal(d, rng);
    const Matrix yraw = lfa::l2_normalize_rows(lfa::gaussian_matrix(c, d, 1.0, rng));
    const Matrix xw = x * w;

    std::printf("threads=%d n=%ld d=%ld C=%ld\n", lfa::kernels::max_threads(), n, d, c);
    std::printf("%-22s %12s %12s %9s\n", "kernel", "serial[s]", "parallel[s]", "speedup");
    namespace ks = lfa::kernels::serial;
    namespace kp = lfa::kernels::parallel;
    row("matmul X*W", reps, [&] { return ks::matmul(x, w); }, [&] { return kp::matmul(x, w); });
    row("matmul_at_b X^T*XW", reps, [&] { return ks::matmul_at_b(x, xw); }, [&] { return kp::matmul_at_b(x, xw); });
    row("matmul_a_bt XW*Y^T", reps, [&] { return ks::matmul_a_bt(xw, yraw); },
        [&] { return kp::matmul_a_bt(xw, yraw); });
    row("pairwise_distances", reps, [&] { return ks::pairwise_distances(xw, yraw); },
        [&] { return kp::pairwise_distances(xw, yraw); });

    const auto y = lfa::PrototypeMatrix::from_raw(yraw);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % c);
    const auto t0 = std::chrono::steady_clock::now();
    const auto value = lfa::evaluate_loss(lfa::LossKind::arerank, x, labels, w, y, lfa::LossParams{});
    std::printf("%-22s %12.6f (loss %.6f)\n", "arerank loss+grad",
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), value.loss);
    return 0;
}
