// Serial reference vs OpenMP for the two batch kernels.
//   ./bench_kernels --benchmark_filter=score
// OMP_NUM_THREADS controls the parallel side.

#include <benchmark/benchmark.h>

#include <map>
#include <memory>

#include "deptex/kernels.hpp"
#include "support.hpp"

using namespace deptex;

namespace {

struct SliceBatch {
    graph::OrgGraph g;
    std::vector<reach::SliceReport> slices;
    std::vector<kernels::ScoreJob> jobs;

    explicit SliceBatch(int n)
    {
        std::mt19937_64 rng(11);
        for (int i = 0; i < 16; ++i) {
            g.add_node(graph::NodeKind::Signal, {{"id", "CVE-" + std::to_string(i)},
                                                  {"external_id", "CVE-" + std::to_string(i)},
                                                  {"severity", testing_support::uniform(rng, 0.0, 10.0)}});
        }
        slices.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            slices.push_back(testing_support::random_slice(rng, "asset-" + std::to_string(i),
                                                           "CVE-" + std::to_string(i % 16), 60));
        }
        for (const auto& s : slices) {
            jobs.push_back({&g.node(s.signal_ref), &s});
        }
    }
};

const SliceBatch& slice_batch(int n)
{
    static std::map<int, std::unique_ptr<SliceBatch>> cache;
    auto& slot = cache[n];
    if (!slot) {
        slot = std::make_unique<SliceBatch>(n);
    }
    return *slot;
}

// Largest of a few seeded random organizations.
const graph::OrgGraph& big_org()
{
    static const graph::OrgGraph g = [] {
        std::mt19937_64 rng(5);
        graph::OrgGraph best;
        for (int i = 0; i < 8; ++i) {
            auto candidate = testing_support::random_graph(rng, 1200);
            if (candidate.node_count() > best.node_count()) {
                best = std::move(candidate);
            }
        }
        return best;
    }();
    return g;
}

template <bool Parallel>
void BM_score_slices(benchmark::State& state)
{
    const auto& batch = slice_batch(static_cast<int>(state.range(0)));
    const reach::EpdParams params;
    const reach::RuleBasedVerifier verifier;
    for (auto _ : state) {
        auto out = Parallel ? kernels::score_slices(batch.jobs, params, verifier)
                            : kernels::score_slices_serial(batch.jobs, params, verifier);
        benchmark::DoNotOptimize(out);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
    state.counters["threads"] = Parallel ? kernels::thread_count() : 1;
}

template <bool Parallel>
void BM_signal_rows(benchmark::State& state)
{
    const auto& g = big_org();
    const auto org = g.nodes_of_kind(graph::NodeKind::Org).front();
    const risk::RiskEngine engine(g);
    const auto signals = g.nodes_of_kind(graph::NodeKind::Signal);
    const auto units = g.units_of(org);
    for (auto _ : state) {
        auto rows = Parallel ? kernels::signal_rows(engine, signals, units, risk::AggMode::Sum)
                             : kernels::signal_rows_serial(engine, signals, units, risk::AggMode::Sum);
        benchmark::DoNotOptimize(rows);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(signals.size()));
    state.counters["nodes"] = static_cast<double>(g.node_count());
}

} // namespace

BENCHMARK(BM_score_slices<false>)->Name("score_slices/serial")->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_score_slices<true>)->Name("score_slices/openmp")->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_signal_rows<false>)->Name("signal_rows/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_signal_rows<true>)->Name("signal_rows/openmp")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
