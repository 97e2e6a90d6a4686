#include "deptex/kernels.hpp"

#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace deptex::kernels {

namespace {

// Exceptions may not cross an OpenMP region; park them per index and rethrow
// the first one afterwards so failures stay deterministic.
template <typename Out, typename Fn>
std::vector<Out> parallel_map(std::size_t n, Fn&& fn)
{
    std::vector<Out> out(n);
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 4)
    for (long long i = 0; i < count; ++i) {
        try {
            out[i] = fn(static_cast<std::size_t>(i));
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return out;
}

} // namespace

int thread_count() noexcept
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

std::vector<reach::DepscoreResult> score_slices(std::span<const ScoreJob> jobs, const reach::EpdParams& params,
                                                const reach::Verifier& verifier)
{
    return parallel_map<reach::DepscoreResult>(jobs.size(), [&](std::size_t i) {
        return reach::depscore(*jobs[i].signal, *jobs[i].slice, params, verifier);
    });
}

std::vector<reach::DepscoreResult> score_slices_serial(std::span<const ScoreJob> jobs, const reach::EpdParams& params,
                                                       const reach::Verifier& verifier)
{
    std::vector<reach::DepscoreResult> out;
    out.reserve(jobs.size());
    for (const auto& job : jobs) {
        out.push_back(reach::depscore(*job.signal, *job.slice, params, verifier));
    }
    return out;
}

std::vector<risk::LeaderboardRow> signal_rows(const risk::RiskEngine& engine, std::span<const graph::NodeId> signals,
                                              const graph::NodeSet& units, risk::AggMode mode)
{
    return parallel_map<risk::LeaderboardRow>(signals.size(), [&](std::size_t i) {
        return engine.signal_row(signals[i], units, mode);
    });
}

std::vector<risk::LeaderboardRow> signal_rows_serial(const risk::RiskEngine& engine,
                                                     std::span<const graph::NodeId> signals,
                                                     const graph::NodeSet& units, risk::AggMode mode)
{
    std::vector<risk::LeaderboardRow> out;
    out.reserve(signals.size());
    for (const auto& s : signals) {
        out.push_back(engine.signal_row(s, units, mode));
    }
    return out;
}

} // namespace deptex::kernels
