// Serial reference vs OpenMP kernels. Range argument is the number of states.

#include "cmdp/kernels.hpp"
#include "cmdp/rng.hpp"

#include <benchmark/benchmark.h>

using Eigen::MatrixXd;
using Eigen::VectorXd;
using cmdp::kernels::Exec;

namespace {

constexpr int kActions = 8;

MatrixXd random_rows(int rows, int cols, std::uint64_t seed) {
    cmdp::Rng rng(seed);
    MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) m.row(i) = rng.dirichlet(cols).transpose();
    return m;
}

template <Exec E>
void BM_Backup(benchmark::State& st) {
    const int S = static_cast<int>(st.range(0));
    const MatrixXd P = random_rows(S * kActions, S, 1);
    const MatrixXd stage = MatrixXd::Random(S, kActions);
    const VectorXd v = VectorXd::Random(S);
    MatrixXd q;
    for (auto _ : st) {
        cmdp::kernels::backup(E, P, stage, v, q);
        benchmark::DoNotOptimize(q.data());
    }
    st.SetItemsProcessed(st.iterations() * S * kActions * S);
}

template <Exec E>
void BM_PolicyAverage(benchmark::State& st) {
    const int S = static_cast<int>(st.range(0));
    const MatrixXd q = MatrixXd::Random(S, kActions);
    const MatrixXd pi = random_rows(S, kActions, 2);
    VectorXd v;
    for (auto _ : st) {
        cmdp::kernels::policy_average(E, q, pi, v);
        benchmark::DoNotOptimize(v.data());
    }
    st.SetItemsProcessed(st.iterations() * S * kActions);
}

template <Exec E>
void BM_MirrorStep(benchmark::State& st) {
    const int S = static_cast<int>(st.range(0));
    const MatrixXd base = random_rows(S, kActions, 3);
    const MatrixXd qr = MatrixXd::Random(S, kActions), qg = MatrixXd::Random(S, kActions);
    MatrixXd out;
    for (auto _ : st) {
        cmdp::kernels::mirror_step(E, base, qr, qg, 0.7, 0.3, out);
        benchmark::DoNotOptimize(out.data());
    }
    st.SetItemsProcessed(st.iterations() * S * kActions);
}

template <Exec E>
void BM_QuadraticForms(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    const int d = 32;
    const MatrixXd G = MatrixXd::Random(d, d);
    const MatrixXd gram = G * G.transpose() + MatrixXd::Identity(d, d);
    const MatrixXd L = gram.llt().matrixL();
    const MatrixXd rows = MatrixXd::Random(n, d);
    VectorXd out;
    for (auto _ : st) {
        cmdp::kernels::quadratic_forms(E, L, rows, out);
        benchmark::DoNotOptimize(out.data());
    }
    st.SetItemsProcessed(st.iterations() * n);
}

} // namespace

BENCHMARK(BM_Backup<Exec::kSerial>)->RangeMultiplier(4)->Range(16, 1024);
BENCHMARK(BM_Backup<Exec::kParallel>)->RangeMultiplier(4)->Range(16, 1024)->UseRealTime();
BENCHMARK(BM_PolicyAverage<Exec::kSerial>)->RangeMultiplier(8)->Range(64, 32768);
BENCHMARK(BM_PolicyAverage<Exec::kParallel>)->RangeMultiplier(8)->Range(64, 32768)->UseRealTime();
BENCHMARK(BM_MirrorStep<Exec::kSerial>)->RangeMultiplier(8)->Range(64, 32768);
BENCHMARK(BM_MirrorStep<Exec::kParallel>)->RangeMultiplier(8)->Range(64, 32768)->UseRealTime();
BENCHMARK(BM_QuadraticForms<Exec::kSerial>)->RangeMultiplier(8)->Range(64, 32768);
BENCHMARK(BM_QuadraticForms<Exec::kParallel>)->RangeMultiplier(8)->Range(64, 32768)->UseRealTime();

BENCHMARK_MAIN();
