// Serial reference vs OpenMP kernels. Run with --benchmark_filter to pick a
// family; OMP_NUM_THREADS controls the parallel side.

#include <benchmark/benchmark.h>

#include "mffnc/features.hpp"
#include "mffnc/kernels.hpp"
#include "mffnc/rng.hpp"
#include "mffnc/synth.hpp"
#include "mffnc/train.hpp"

using namespace mffnc;

namespace {

Matrix random(std::size_t r, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(r, c);
    for (double& v : m.data) v = rng.uniform(-1, 1);
    return m;
}

using MatmulFn = void (*)(const Matrix&, const Matrix&, Matrix&, bool);

template <MatmulFn Fn>
void bm_matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random(n, n, 1);
    const Matrix b = random(n, n, 2);
    Matrix c(n, n);
    for (auto _ : state) {
        Fn(a, b, c, false);
        benchmark::DoNotOptimize(c.data.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

template <void (*Fn)(const Matrix&, Matrix&)>
void bm_softmax(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix x = random(n, n, 3);
    Matrix y(n, n);
    for (auto _ : state) {
        Fn(x, y);
        benchmark::DoNotOptimize(y.data.data());
    }
}

const std::vector<UserRecord>& users() {
    static const std::vector<UserRecord> u = [] {
        SynthDatasetSpec spec;
        spec.n_per_class = 500;
        return generate_dataset(spec);
    }();
    return u;
}

void bm_extract_serial(benchmark::State& state) {
    const LexiconScorer scorer;
    for (auto _ : state) benchmark::DoNotOptimize(serial::extract_all(users(), scorer));
}

void bm_extract_parallel(benchmark::State& state) {
    const LexiconScorer scorer;
    for (auto _ : state) benchmark::DoNotOptimize(parallel::extract_all(users(), scorer));
}

void bm_forward(benchmark::State& state) {
    kernels::set_backend(state.range(0) ? kernels::Backend::parallel : kernels::Backend::serial);
    ModelConfig c;
    c.vocab_size = 200;
    c.refine_layers = 2;
    const FusionModel m = FusionModel::init(c, 1);
    Rng rng(4);
    std::vector<Example> set(64);
    for (auto& e : set) {
        TokenSequence s;
        s.ids.resize(c.max_len);
        for (auto& id : s.ids) id = 4 + rng.below(196);
        s.true_len = c.max_len;
        e.input.text = s;
    }
    for (auto _ : state) benchmark::DoNotOptimize(predict_logits(m, set));
    kernels::set_backend(kernels::Backend::parallel);
}

}  // namespace

BENCHMARK(bm_matmul<kernels::serial::matmul>)->Name("matmul/serial")->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(bm_matmul<kernels::parallel::matmul>)->Name("matmul/parallel")->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(bm_matmul<kernels::serial::matmul_nt>)->Name("matmul_nt/serial")->Arg(256)->Arg(512);
BENCHMARK(bm_matmul<kernels::parallel::matmul_nt>)->Name("matmul_nt/parallel")->Arg(256)->Arg(512);
BENCHMARK(bm_matmul<kernels::serial::matmul_tn>)->Name("matmul_tn/serial")->Arg(256)->Arg(512);
BENCHMARK(bm_matmul<kernels::parallel::matmul_tn>)->Name("matmul_tn/parallel")->Arg(256)->Arg(512);
BENCHMARK(bm_softmax<kernels::serial::softmax_rows>)->Name("softmax/serial")->Arg(256)->Arg(1024);
BENCHMARK(bm_softmax<kernels::parallel::softmax_rows>)->Name("softmax/parallel")->Arg(256)->Arg(1024);
BENCHMARK(bm_extract_serial)->Name("extract_all/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(bm_extract_parallel)->Name("extract_all/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(bm_forward)->Name("predict_64_users/serial_kernels")->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_forward)->Name("predict_64_users/parallel_kernels")->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
