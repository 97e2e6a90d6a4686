#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "deptex/graph.hpp"
#include "deptex/reachability.hpp"

namespace deptex::risk {

using json = nlohmann::json;
using graph::NodeId;
using graph::NodeSet;

struct ContribInputs {
    double sev = 0.0;
    double conf = 1.0;
    bool direct = true;
    graph::Scope scope = graph::Scope::Runtime;
    double exposure = 1.0;
    bool critical = false;
    bool ownership_gap = false;
    double tier_importance = 1.0;
    std::optional<double> epd;
};

// Factor tables of the product-form contribution.
inline constexpr double kTransitiveFactor = 0.8;
inline constexpr double kNonRuntimeScopeFactor = 0.3;
inline constexpr double kCriticalFactor = 1.25;
inline constexpr double kOwnershipGapFactor = 1.25;

/// (sev/10) * conf * tier * E * D * S * C * G where E is the EPD when known and
/// the asset's static exposure otherwise. Throws RangeViolation.
double contrib(const ContribInputs& in);
void validate(const ContribInputs& in);

enum class AggMode { Sum, Max, Mean };

std::string_view to_string(AggMode mode) noexcept;
AggMode parse_agg_mode(std::string_view text);
double aggregate(std::span<const double> values, AggMode mode);

using DepscoreKey = std::pair<NodeId, NodeId>;  // (signal, asset)
using DepscoreTable = std::map<DepscoreKey, reach::DepscoreResult>;
using TierOverrides = std::map<NodeId, std::string>;  // asset -> tier_id

struct AssetContribution {
    NodeId asset;
    double contrib = 0.0;
    std::optional<int> depscore;
};

struct LeaderboardRow {
    NodeId signal;
    std::string external_id;
    double org_risk = 0.0;
    std::size_t asset_count = 0;
    std::size_t unit_count = 0;
    std::size_t gap_count = 0;

    bool operator==(const LeaderboardRow&) const = default;
};

struct UnitRow {
    NodeId unit;
    std::string name;
    double risk = 0.0;
    std::size_t affected_assets = 0;

    bool operator==(const UnitRow&) const = default;
};

/// Read-only risk evaluator over a graph snapshot. Safe to share across
/// threads as long as the graph is not mutated.
class RiskEngine {
public:
    explicit RiskEngine(const graph::OrgGraph& g, const DepscoreTable* depscores = nullptr,
                        TierOverrides overrides = {});

    [[nodiscard]] const graph::OrgGraph& graph() const noexcept { return graph_; }

    /// Inputs of the strongest dependency path from `asset` to a component
    /// affected by `signal`; nullopt when the asset is outside the blast radius.
    [[nodiscard]] std::optional<ContribInputs> inputs(const NodeId& signal, const NodeId& asset) const;
    [[nodiscard]] double contrib(const NodeId& signal, const NodeId& asset) const;
    [[nodiscard]] std::vector<AssetContribution> asset_contributions(const NodeId& signal) const;

    [[nodiscard]] double unit_risk(const NodeId& signal, const NodeId& unit, AggMode mode) const;
    /// Aggregates over every Unit in the graph.
    [[nodiscard]] double org_risk(const NodeId& signal, AggMode mode) const;
    /// Aggregates over the units contained by `org`.
    [[nodiscard]] double org_risk(const NodeId& signal, const NodeId& org, AggMode mode) const;

    [[nodiscard]] LeaderboardRow signal_row(const NodeId& signal, const NodeSet& units, AggMode mode) const;

    /// Signals ranked by org risk (desc), then asset count (desc), then
    /// external id (asc). Rows are computed in parallel.
    [[nodiscard]] std::vector<LeaderboardRow> leaderboard(const NodeId& org, AggMode mode) const;
    /// Single-threaded reference for leaderboard().
    [[nodiscard]] std::vector<LeaderboardRow> leaderboard_serial(const NodeId& org, AggMode mode) const;

    /// Units of `org` ranked by aggregated risk over all signals.
    [[nodiscard]] std::vector<UnitRow> unit_leaderboard(const NodeId& org, AggMode mode) const;

private:
    [[nodiscard]] double tier_importance(const NodeId& asset) const;
    [[nodiscard]] double aggregate_units(const NodeId& signal, const NodeSet& units, AggMode mode) const;
    /// contrib() for every affected asset in one pass over the signal's edges.
    [[nodiscard]] std::map<NodeId, double> contrib_map(const NodeId& signal) const;

    const graph::OrgGraph& graph_;
    const DepscoreTable* depscores_;
    TierOverrides overrides_;
};

void sort_leaderboard(std::vector<LeaderboardRow>& rows);

json leaderboard_to_json(const std::vector<LeaderboardRow>& rows);
std::string leaderboard_to_csv(const std::vector<LeaderboardRow>& rows);
json unit_leaderboard_to_json(const std::vector<UnitRow>& rows);

} // namespace deptex::risk
