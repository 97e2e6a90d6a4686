#pragma once

#include <span>
#include <vector>

#include "deptex/reachability.hpp"
#include "deptex/risk.hpp"

// Data-parallel batch kernels. Each has an OpenMP version and a serial
// reference with identical results; tests and bench/ compare the two.
namespace deptex::kernels {

struct ScoreJob {
    const graph::Node* signal = nullptr;
    const reach::SliceReport* slice = nullptr;
};

std::vector<reach::DepscoreResult> score_slices(std::span<const ScoreJob> jobs, const reach::EpdParams& params,
                                                const reach::Verifier& verifier);
std::vector<reach::DepscoreResult> score_slices_serial(std::span<const ScoreJob> jobs, const reach::EpdParams& params,
                                                       const reach::Verifier& verifier);

std::vector<risk::LeaderboardRow> signal_rows(const risk::RiskEngine& engine, std::span<const graph::NodeId> signals,
                                              const graph::NodeSet& units, risk::AggMode mode);
std::vector<risk::LeaderboardRow> signal_rows_serial(const risk::RiskEngine& engine,
                                                     std::span<const graph::NodeId> signals,
                                                     const graph::NodeSet& units, risk::AggMode mode);

/// Number of worker threads the parallel kernels will use.
int thread_count() noexcept;

} // namespace deptex::kernels
