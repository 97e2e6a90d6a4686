#include "deptex/risk.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>

#include "deptex/error.hpp"
#include "deptex/kernels.hpp"

namespace deptex::risk {

namespace {

void check_range(double v, double lo, double hi, const char* name)
{
    if (!(v >= lo && v <= hi)) {
        throw Error(ErrorCode::RangeViolation, std::string(name) + " = " + std::to_string(v) + " outside [" +
                                                   std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
}

double scope_factor(graph::Scope s)
{
    return s == graph::Scope::Runtime ? 1.0 : kNonRuntimeScopeFactor;
}

std::string shortest(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace

void validate(const ContribInputs& in)
{
    check_range(in.sev, 0.0, 10.0, "sev");
    check_range(in.conf, 0.0, 1.0, "conf");
    check_range(in.exposure, 0.0, 1.0, "exposure");
    if (!(in.tier_importance > 0.0)) {
        throw Error(ErrorCode::RangeViolation, "tier_importance must be > 0");
    }
    if (in.epd) {
        check_range(*in.epd, 0.0, 1.0, "epd");
    }
}

double contrib(const ContribInputs& in)
{
    validate(in);
    const double exposure = in.epd.value_or(in.exposure);
    const double directness = in.direct ? 1.0 : kTransitiveFactor;
    const double criticality = in.critical ? kCriticalFactor : 1.0;
    const double gap = in.ownership_gap ? kOwnershipGapFactor : 1.0;
    return (in.sev / 10.0) * in.conf * in.tier_importance * exposure * directness * scope_factor(in.scope) *
           criticality * gap;
}

std::string_view to_string(AggMode mode) noexcept
{
    switch (mode) {
    case AggMode::Sum: return "sum";
    case AggMode::Max: return "max";
    case AggMode::Mean: return "mean";
    }
    return "?";
}

AggMode parse_agg_mode(std::string_view text)
{
    for (auto m : {AggMode::Sum, AggMode::Max, AggMode::Mean}) {
        if (to_string(m) == text) {
            return m;
        }
    }
    throw Error(ErrorCode::Validation, "unknown aggregation mode '" + std::string(text) + "'");
}

double aggregate(std::span<const double> values, AggMode mode)
{
    if (values.empty()) {
        return 0.0;
    }
    switch (mode) {
    case AggMode::Sum: return std::accumulate(values.begin(), values.end(), 0.0);
    case AggMode::Max: return *std::max_element(values.begin(), values.end());
    case AggMode::Mean: return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    }
    return 0.0;
}

RiskEngine::RiskEngine(const graph::OrgGraph& g, const DepscoreTable* depscores, TierOverrides overrides)
    : graph_(g), depscores_(depscores), overrides_(std::move(overrides))
{
    for (const auto& [asset, tier] : overrides_) {
        (void)graph_.node(asset, graph::NodeKind::Asset);
        (void)graph_.tier(tier);
    }
}

double RiskEngine::tier_importance(const NodeId& asset) const
{
    if (auto it = overrides_.find(asset); it != overrides_.end()) {
        return graph_.tier(it->second).importance;
    }
    return graph_.tier(graph_.node(asset).asset().tier).importance;
}

std::optional<ContribInputs> RiskEngine::inputs(const NodeId& signal, const NodeId& asset) const
{
    const auto& sig = graph_.node(signal, graph::NodeKind::Signal).signal();
    const auto& node = graph_.node(asset, graph::NodeKind::Asset);
    const auto& data = node.asset();

    ContribInputs base;
    base.sev = sig.severity;
    base.conf = sig.confidence;
    base.exposure = data.exposure;
    base.critical = data.critical;
    base.ownership_gap = graph_.ownership_gap(asset);
    base.tier_importance = tier_importance(asset);
    if (depscores_ != nullptr) {
        if (auto it = depscores_->find({signal, asset}); it != depscores_->end()) {
            base.epd = it->second.epd;
        }
    }

    // Several affected components may sit in the asset's tree; the strongest
    // dependency edge (direct beats transitive, runtime beats dev/test) wins.
    std::optional<ContribInputs> best;
    double best_value = -1.0;
    for (const NodeId& comp : graph_.affected_components(signal)) {
        const graph::Edge* e = graph_.find_edge(asset, comp, graph::EdgeKind::DependsOn);
        if (e == nullptr) {
            continue;
        }
        const auto dep = e->dependency();
        ContribInputs cand = base;
        cand.direct = dep.direct;
        cand.scope = dep.scope;
        const double v = risk::contrib(cand);
        if (v > best_value) {
            best_value = v;
            best = cand;
        }
    }
    return best;
}

double RiskEngine::contrib(const NodeId& signal, const NodeId& asset) const
{
    auto in = inputs(signal, asset);
    return in ? risk::contrib(*in) : 0.0;
}

std::vector<AssetContribution> RiskEngine::asset_contributions(const NodeId& signal) const
{
    std::vector<AssetContribution> out;
    for (const NodeId& a : graph_.affected_assets(signal)) {
        AssetContribution c{a, contrib(signal, a), std::nullopt};
        if (depscores_ != nullptr) {
            if (auto it = depscores_->find({signal, a}); it != depscores_->end()) {
                c.depscore = it->second.depscore;
            }
        }
        out.push_back(std::move(c));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const AssetContribution& x, const AssetContribution& y) { return x.contrib > y.contrib; });
    return out;
}

double RiskEngine::unit_risk(const NodeId& signal, const NodeId& unit, AggMode mode) const
{
    (void)graph_.node(unit, graph::NodeKind::Unit);
    const NodeSet affected = graph_.affected_assets(signal);
    std::vector<double> contribs;
    for (const NodeId& a : graph_.owned_assets(unit)) {
        if (affected.contains(a)) {
            contribs.push_back(contrib(signal, a));
        }
    }
    return aggregate(contribs, mode);
}

std::map<NodeId, double> RiskEngine::contrib_map(const NodeId& signal) const
{
    const auto& sig = graph_.node(signal, graph::NodeKind::Signal).signal();
    std::map<NodeId, double> out;
    std::map<NodeId, ContribInputs> base;
    for (const NodeId& comp : graph_.affected_components(signal)) {
        for (const graph::Edge* e : graph_.in_edges(comp, graph::EdgeKind::DependsOn)) {
            auto [it, fresh] = base.try_emplace(e->src);
            if (fresh) {
                const auto& data = graph_.node(e->src).asset();
                ContribInputs& in = it->second;
                in.sev = sig.severity;
                in.conf = sig.confidence;
                in.exposure = data.exposure;
                in.critical = data.critical;
                in.ownership_gap = graph_.ownership_gap(e->src);
                in.tier_importance = tier_importance(e->src);
                if (depscores_ != nullptr) {
                    if (auto d = depscores_->find({signal, e->src}); d != depscores_->end()) {
                        in.epd = d->second.epd;
                    }
                }
            }
            ContribInputs cand = it->second;
            const auto dep = e->dependency();
            cand.direct = dep.direct;
            cand.scope = dep.scope;
            const double v = risk::contrib(cand);
            auto [slot, added] = out.try_emplace(e->src, v);
            if (!added && v > slot->second) {
                slot->second = v;
            }
        }
    }
    return out;
}

double RiskEngine::aggregate_units(const NodeId& signal, const NodeSet& units, AggMode mode) const
{
    const auto contribs = contrib_map(signal);
    std::vector<double> per_unit;
    per_unit.reserve(units.size());
    std::vector<double> xs;
    for (const NodeId& u : units) {
        (void)graph_.node(u, graph::NodeKind::Unit);
        xs.clear();
        for (const NodeId& a : graph_.owned_assets(u)) {
            if (auto it = contribs.find(a); it != contribs.end()) {
                xs.push_back(it->second);
            }
        }
        per_unit.push_back(aggregate(xs, mode));
    }
    return aggregate(per_unit, mode);
}

double RiskEngine::org_risk(const NodeId& signal, AggMode mode) const
{
    const auto units = graph_.nodes_of_kind(graph::NodeKind::Unit);
    return aggregate_units(signal, NodeSet(units.begin(), units.end()), mode);
}

double RiskEngine::org_risk(const NodeId& signal, const NodeId& org, AggMode mode) const
{
    return aggregate_units(signal, graph_.units_of(org), mode);
}

LeaderboardRow RiskEngine::signal_row(const NodeId& signal, const NodeSet& units, AggMode mode) const
{
    const auto& node = graph_.node(signal, graph::NodeKind::Signal);
    const auto metrics = graph_.governance_metrics(signal);
    LeaderboardRow row;
    row.signal = signal;
    row.external_id = node.signal().external_id.empty() ? signal.str() : node.signal().external_id;
    row.org_risk = aggregate_units(signal, units, mode);
    row.asset_count = metrics.asset_count;
    row.unit_count = metrics.unit_count;
    row.gap_count = metrics.gap_assets.size();
    return row;
}

void sort_leaderboard(std::vector<LeaderboardRow>& rows)
{
    std::sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
        if (a.org_risk != b.org_risk) {
            return a.org_risk > b.org_risk;
        }
        if (a.asset_count != b.asset_count) {
            return a.asset_count > b.asset_count;
        }
        if (a.external_id != b.external_id) {
            return a.external_id < b.external_id;
        }
        return a.signal < b.signal;
    });
}

std::vector<LeaderboardRow> RiskEngine::leaderboard(const NodeId& org, AggMode mode) const
{
    const NodeSet units = graph_.units_of(org);
    const auto signals = graph_.nodes_of_kind(graph::NodeKind::Signal);
    auto rows = kernels::signal_rows(*this, signals, units, mode);
    sort_leaderboard(rows);
    return rows;
}

std::vector<LeaderboardRow> RiskEngine::leaderboard_serial(const NodeId& org, AggMode mode) const
{
    const NodeSet units = graph_.units_of(org);
    const auto signals = graph_.nodes_of_kind(graph::NodeKind::Signal);
    auto rows = kernels::signal_rows_serial(*this, signals, units, mode);
    sort_leaderboard(rows);
    return rows;
}

std::vector<UnitRow> RiskEngine::unit_leaderboard(const NodeId& org, AggMode mode) const
{
    const auto signals = graph_.nodes_of_kind(graph::NodeKind::Signal);
    std::vector<UnitRow> rows;
    for (const NodeId& u : graph_.units_of(org)) {
        UnitRow row;
        row.unit = u;
        row.name = graph_.node(u).name;
        std::vector<double> per_signal;
        NodeSet touched;
        const NodeSet owned = graph_.owned_assets(u);
        for (const NodeId& s : signals) {
            per_signal.push_back(unit_risk(s, u, mode));
            for (const NodeId& a : graph_.affected_assets(s)) {
                if (owned.contains(a)) {
                    touched.insert(a);
                }
            }
        }
        row.risk = aggregate(per_signal, mode);
        row.affected_assets = touched.size();
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const UnitRow& a, const UnitRow& b) { return a.risk > b.risk; });
    return rows;
}

json leaderboard_to_json(const std::vector<LeaderboardRow>& rows)
{
    json out = json::array();
    for (const auto& r : rows) {
        out.push_back({{"signal", r.signal.str()},
                       {"external_id", r.external_id},
                       {"org_risk", r.org_risk},
                       {"asset_count", r.asset_count},
                       {"unit_count", r.unit_count},
                       {"gap_count", r.gap_count}});
    }
    return out;
}

std::string leaderboard_to_csv(const std::vector<LeaderboardRow>& rows)
{
    std::string out = "external_id,org_risk,asset_count,unit_count,gap_count\n";
    for (const auto& r : rows) {
        std::string id = r.external_id;
        if (id.find_first_of(",\"\n") != std::string::npos) {
            std::string quoted = "\"";
            for (char c : id) {
                quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
            }
            id = quoted + "\"";
        }
        out += id + "," + shortest(r.org_risk) + "," + std::to_string(r.asset_count) + "," +
               std::to_string(r.unit_count) + "," + std::to_string(r.gap_count) + "\n";
    }
    return out;
}

json unit_leaderboard_to_json(const std::vector<UnitRow>& rows)
{
    json out = json::array();
    for (const auto& r : rows) {
        out.push_back({{"unit", r.unit.str()}, {"name", r.name}, {"risk", r.risk}, {"affected_assets", r.affected_assets}});
    }
    return out;
}

} // namespace deptex::risk
