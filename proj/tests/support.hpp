#pragma once

// Generators and brute-force reference implementations shared by the unit
// tests and the acceptance binary.

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "deptex/graph.hpp"
#include "deptex/reachability.hpp"
#include "deptex/risk.hpp"

namespace testing_support {

using deptex::graph::Edge;
using deptex::graph::EdgeKind;
using deptex::graph::NodeId;
using deptex::graph::NodeKind;
using deptex::graph::NodeSet;
using deptex::graph::OrgGraph;
using json = nlohmann::json;

inline std::string pick(std::mt19937_64& rng, const std::vector<std::string>& xs)
{
    return xs[std::uniform_int_distribution<std::size_t>(0, xs.size() - 1)(rng)];
}

inline double uniform(std::mt19937_64& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline bool coin(std::mt19937_64& rng, double p = 0.5)
{
    return std::bernoulli_distribution(p)(rng);
}

/// Random well-typed graph with at most `max_nodes` nodes. Assets may be
/// owned by several units or none; components may be shared.
inline OrgGraph random_graph(std::mt19937_64& rng, int max_nodes = 50)
{
    OrgGraph g;
    g.add_tier({"tier-1", "Tier 1", 2.0});
    g.add_tier({"tier-3", "Tier 3", 0.5});
    const std::vector<std::string> tiers{"default", "tier-1", "tier-3"};

    const int budget = std::uniform_int_distribution<int>(6, max_nodes)(rng);
    const int orgs = 1 + (budget > 30 ? 1 : 0);
    const int units = std::max(1, budget / 8);
    const int assets = std::max(1, budget / 4);
    const int signals = std::max(1, budget / 8);
    const int comps = std::max(1, budget - orgs - units - assets - signals);

    std::vector<NodeId> org_ids, unit_ids, asset_ids, comp_ids, signal_ids;
    for (int i = 0; i < orgs; ++i) {
        org_ids.push_back(g.add_node(NodeKind::Org, {{"id", "org-" + std::to_string(i)}, {"name", "Org " + std::to_string(i)}}));
    }
    for (int i = 0; i < units; ++i) {
        const auto u = g.add_node(NodeKind::Unit, {{"id", "unit-" + std::to_string(i)}, {"name", "Unit " + std::to_string(i)}});
        unit_ids.push_back(u);
        g.add_edge({org_ids[static_cast<std::size_t>(i) % org_ids.size()], u, EdgeKind::Contains, json::object()});
    }
    for (int i = 0; i < assets; ++i) {
        const auto a = g.add_node(NodeKind::Asset, {{"id", "asset-" + std::to_string(i)},
                                                     {"name", "Asset " + std::to_string(i)},
                                                     {"tier", pick(rng, tiers)},
                                                     {"exposure", uniform(rng, 0.0, 1.0)},
                                                     {"critical", coin(rng, 0.3)}});
        asset_ids.push_back(a);
        for (const auto& u : unit_ids) {
            if (coin(rng, 1.2 / static_cast<double>(unit_ids.size()))) {
                g.add_edge({u, a, EdgeKind::Owns, json::object()});
            }
        }
    }
    for (int i = 0; i < comps; ++i) {
        const std::string purl = "pkg:npm/lib" + std::to_string(i) + "@1.0." + std::to_string(i % 3);
        comp_ids.push_back(g.add_node(NodeKind::Comp, {{"purl", purl}, {"version", "1.0." + std::to_string(i % 3)}}));
    }
    for (const auto& a : asset_ids) {
        for (const auto& c : comp_ids) {
            if (coin(rng, 0.25)) {
                const bool direct = coin(rng);
                g.add_edge({a, c, EdgeKind::DependsOn,
                            {{"direct", direct},
                             {"scope", pick(rng, {"runtime", "dev", "test"})},
                             {"depth", direct ? 1 : std::uniform_int_distribution<int>(2, 5)(rng)}}});
            }
        }
    }
    for (int i = 0; i < signals; ++i) {
        const auto s = g.add_node(NodeKind::Signal, {{"id", "CVE-" + std::to_string(1000 + i)},
                                                      {"external_id", "CVE-" + std::to_string(1000 + i)},
                                                      {"severity", std::round(uniform(rng, 0.0, 10.0) * 10) / 10},
                                                      {"confidence", uniform(rng, 0.1, 1.0)}});
        signal_ids.push_back(s);
        for (const auto& c : comp_ids) {
            if (coin(rng, 0.2)) {
                g.add_edge({s, c, EdgeKind::Affects, json::object()});
            }
        }
    }
    return g;
}

// ---- oracles straight from the definitions, scanning raw edge lists ----

inline NodeSet oracle_affected_assets(const OrgGraph& g, const NodeId& signal)
{
    NodeSet out;
    const auto edges = g.edges();
    for (const auto* dep : edges) {
        if (dep->kind != EdgeKind::DependsOn) {
            continue;
        }
        for (const auto* aff : edges) {
            if (aff->kind == EdgeKind::Affects && aff->src == signal && aff->dst == dep->dst) {
                out.insert(dep->src);
            }
        }
    }
    return out;
}

inline NodeSet oracle_affected_units(const OrgGraph& g, const NodeId& signal)
{
    const NodeSet assets = oracle_affected_assets(g, signal);
    NodeSet out;
    for (const auto* e : g.edges()) {
        if (e->kind == EdgeKind::Owns && assets.contains(e->dst)) {
            out.insert(e->src);
        }
    }
    return out;
}

inline bool oracle_gap(const OrgGraph& g, const NodeId& asset)
{
    for (const auto* e : g.edges()) {
        if (e->kind == EdgeKind::Owns && e->dst == asset) {
            return false;
        }
    }
    return true;
}

/// Contribution written out factor by factor, maximized over the asset's
/// dependency edges onto components the signal affects.
inline double oracle_contrib(const OrgGraph& g, const NodeId& signal, const NodeId& asset,
                             const deptex::risk::DepscoreTable* depscores = nullptr)
{
    const auto& sig = g.node(signal).signal();
    const auto& a = g.node(asset).asset();
    double exposure = a.exposure;
    if (depscores != nullptr) {
        if (auto it = depscores->find({signal, asset}); it != depscores->end()) {
            exposure = it->second.epd;
        }
    }
    double best = 0.0;
    bool any = false;
    const auto edges = g.edges();
    for (const auto* dep : edges) {
        if (dep->kind != EdgeKind::DependsOn || dep->src != asset) {
            continue;
        }
        bool hit = false;
        for (const auto* aff : edges) {
            hit = hit || (aff->kind == EdgeKind::Affects && aff->src == signal && aff->dst == dep->dst);
        }
        if (!hit) {
            continue;
        }
        const bool direct = dep->attrs.at("direct").get<bool>();
        const bool runtime = dep->attrs.at("scope").get<std::string>() == "runtime";
        double v = sig.severity / 10.0;
        v *= sig.confidence;
        v *= g.tier(a.tier).importance;
        v *= exposure;
        v *= direct ? 1.0 : 0.8;
        v *= runtime ? 1.0 : 0.3;
        v *= a.critical ? 1.25 : 1.0;
        v *= oracle_gap(g, asset) ? 1.25 : 1.0;
        best = any ? std::max(best, v) : v;
        any = true;
    }
    return best;
}

inline double oracle_agg(const std::vector<double>& xs, deptex::risk::AggMode mode)
{
    if (xs.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    double mx = xs.front();
    for (double x : xs) {
        sum += x;
        mx = std::max(mx, x);
    }
    switch (mode) {
    case deptex::risk::AggMode::Sum: return sum;
    case deptex::risk::AggMode::Max: return mx;
    case deptex::risk::AggMode::Mean: return sum / static_cast<double>(xs.size());
    }
    return 0.0;
}

inline double oracle_unit_risk(const OrgGraph& g, const NodeId& signal, const NodeId& unit, deptex::risk::AggMode mode)
{
    const NodeSet affected = oracle_affected_assets(g, signal);
    std::vector<double> xs;
    for (const auto* e : g.edges()) {
        if (e->kind == EdgeKind::Owns && e->src == unit && affected.contains(e->dst)) {
            xs.push_back(oracle_contrib(g, signal, e->dst));
        }
    }
    return oracle_agg(xs, mode);
}

inline double oracle_org_risk(const OrgGraph& g, const NodeId& signal, const NodeId& org, deptex::risk::AggMode mode)
{
    std::vector<double> xs;
    for (const auto* e : g.edges()) {
        if (e->kind == EdgeKind::Contains && e->src == org) {
            xs.push_back(oracle_unit_risk(g, signal, e->dst, mode));
        }
    }
    return oracle_agg(xs, mode);
}

// ---- slices ----

/// Linear chain entry -> f1 -> ... -> sink of `d` hops.
inline deptex::reach::SliceReport chain_slice(const std::string& asset, const std::string& signal, int d,
                                              deptex::reach::EntryKind kind, bool sanitized = false)
{
    deptex::reach::SliceReport s;
    s.asset_ref = NodeId(asset);
    s.signal_ref = NodeId(signal);
    for (int i = 0; i <= d; ++i) {
        deptex::reach::SliceFunction f;
        f.fn_id = "f" + std::to_string(i);
        f.name = f.fn_id;
        f.file = "src/app.js";
        if (i == 0) {
            f.entry_kind = kind;
        }
        f.sanitizer = sanitized && i == (d + 1) / 2 && d > 0;
        s.functions.push_back(f);
        if (i > 0) {
            s.edges.push_back({"f" + std::to_string(i - 1), f.fn_id, deptex::reach::FlowKind::Call});
        }
    }
    if (sanitized && d == 0) {
        s.functions.front().sanitizer = true;
    }
    s.entry_points = {"f0"};
    s.sink = "f" + std::to_string(d);
    return s;
}

/// Random DAG-ish slice over n functions with several entry points.
inline deptex::reach::SliceReport random_slice(std::mt19937_64& rng, const std::string& asset, const std::string& signal,
                                               int n)
{
    using deptex::reach::EntryKind;
    const std::vector<EntryKind> kinds{EntryKind::PublicHttp, EntryKind::AuthenticatedHttp, EntryKind::InternalRpc,
                                       EntryKind::Cli, EntryKind::BackgroundJob};
    deptex::reach::SliceReport s;
    s.asset_ref = NodeId(asset);
    s.signal_ref = NodeId(signal);
    for (int i = 0; i < n; ++i) {
        deptex::reach::SliceFunction f;
        f.fn_id = "fn" + std::to_string(i);
        f.name = f.fn_id;
        f.file = "src/m" + std::to_string(i % 4) + ".py";
        f.sanitizer = coin(rng, 0.15);
        s.functions.push_back(f);
    }
    const int entries = std::uniform_int_distribution<int>(1, std::max(1, n / 3))(rng);
    for (int i = 0; i < entries; ++i) {
        s.functions[static_cast<std::size_t>(i)].entry_kind =
            kinds[std::uniform_int_distribution<std::size_t>(0, kinds.size() - 1)(rng)];
        s.entry_points.push_back(s.functions[static_cast<std::size_t>(i)].fn_id);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i != j && coin(rng, 2.0 / n)) {
                s.edges.push_back({"fn" + std::to_string(i), "fn" + std::to_string(j),
                                   coin(rng) ? deptex::reach::FlowKind::Call : deptex::reach::FlowKind::Dataflow});
            }
        }
    }
    s.sink = "fn" + std::to_string(n - 1);
    return s;
}

} // namespace testing_support
