#include "doctest.h"
#include "support.hpp"

#include "deptex/error.hpp"

using namespace deptex;
using namespace deptex::graph;
using testing_support::json;

namespace {

ErrorCode code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::Validation;
}

OrgGraph small_org()
{
    OrgGraph g;
    g.add_node(NodeKind::Org, {{"id", "acme"}, {"name", "Acme"}});
    g.add_node(NodeKind::Unit, {{"id", "payments"}, {"name", "Payments"}});
    g.add_node(NodeKind::Unit, {{"id", "search"}, {"name", "Search"}});
    g.add_edge({NodeId("acme"), NodeId("payments"), EdgeKind::Contains, json::object()});
    g.add_edge({NodeId("acme"), NodeId("search"), EdgeKind::Contains, json::object()});
    g.add_node(NodeKind::Asset, {{"id", "checkout"}, {"name", "checkout-api"}});
    g.add_node(NodeKind::Asset, {{"id", "orphan"}, {"name", "legacy-batch"}});
    g.add_edge({NodeId("payments"), NodeId("checkout"), EdgeKind::Owns, json::object()});
    g.add_node(NodeKind::Comp, {{"purl", "pkg:npm/lodash@4.17.20"}, {"version", "4.17.20"}});
    g.add_edge({NodeId("checkout"), NodeId("pkg:npm/lodash@4.17.20"), EdgeKind::DependsOn, json::object()});
    g.add_edge({NodeId("orphan"), NodeId("pkg:npm/lodash@4.17.20"), EdgeKind::DependsOn,
                {{"direct", false}, {"depth", 3}, {"scope", "dev"}}});
    g.add_node(NodeKind::Signal, {{"id", "CVE-2021-23337"}, {"external_id", "CVE-2021-23337"}, {"severity", 7.2}});
    g.add_edge({NodeId("CVE-2021-23337"), NodeId("pkg:npm/lodash@4.17.20"), EdgeKind::Affects, json::object()});
    return g;
}

} // namespace

TEST_CASE("node creation validates fields and ids")
{
    OrgGraph g;
    const auto a = g.add_node(NodeKind::Asset, {{"name", "svc"}});
    CHECK(a.str().starts_with("asset-"));
    CHECK(g.node(a).asset().tier == "default");
    CHECK(g.node(a).asset().compliance_status == "unreviewed");

    CHECK(code_of([&] { g.add_node(NodeKind::Asset, {{"id", a.str()}}); }) == ErrorCode::DuplicateId);
    CHECK(code_of([&] { g.add_node(NodeKind::Asset, {{"colour", "red"}}); }) == ErrorCode::InvalidField);
    CHECK(code_of([&] { g.add_node(NodeKind::Asset, {{"exposure", 1.5}}); }) == ErrorCode::InvalidField);
    CHECK(code_of([&] { g.add_node(NodeKind::Signal, {{"severity", 11}}); }) == ErrorCode::InvalidField);
    CHECK(code_of([&] { g.add_node(NodeKind::Asset, {{"tier", "gold"}}); }) == ErrorCode::InvalidField);

    const auto c = g.add_node(NodeKind::Comp, {{"purl", "pkg:pypi/requests@2.31.0"}});
    CHECK(c.str() == "pkg:pypi/requests@2.31.0");
}

TEST_CASE("edge typing table is enforced")
{
    auto g = small_org();
    CHECK(code_of([&] { g.add_edge({NodeId("checkout"), NodeId("payments"), EdgeKind::Owns, json::object()}); }) ==
          ErrorCode::TypeViolation);
    CHECK(code_of([&] { g.add_edge({NodeId("acme"), NodeId("nope"), EdgeKind::Contains, json::object()}); }) ==
          ErrorCode::MissingEndpoint);
    CHECK(code_of([&] { g.add_edge({NodeId("payments"), NodeId("checkout"), EdgeKind::Owns, json::object()}); }) ==
          ErrorCode::DuplicateEdge);
    // depth 1 iff direct
    CHECK_THROWS_AS(g.add_edge({NodeId("orphan"), NodeId("pkg:npm/lodash@4.17.20"), EdgeKind::DependsOn,
                                {{"direct", true}, {"depth", 2}}}),
                    Error);

    for (auto sk : {NodeKind::Org, NodeKind::Unit, NodeKind::Asset, NodeKind::Comp, NodeKind::Actor, NodeKind::Signal}) {
        for (auto dk : {NodeKind::Org, NodeKind::Unit, NodeKind::Asset, NodeKind::Comp, NodeKind::Actor, NodeKind::Signal}) {
            int admitted = 0;
            for (auto ek : {EdgeKind::Contains, EdgeKind::Owns, EdgeKind::DependsOn, EdgeKind::Affects, EdgeKind::Maintains}) {
                admitted += edge_admitted(sk, ek, dk) ? 1 : 0;
            }
            CHECK(admitted <= 1);
        }
    }
}

TEST_CASE("ownership gap and blast radius")
{
    const auto g = small_org();
    CHECK_FALSE(g.ownership_gap(NodeId("checkout")));
    CHECK(g.ownership_gap(NodeId("orphan")));
    const auto assets = g.affected_assets(NodeId("CVE-2021-23337"));
    CHECK(assets == NodeSet{NodeId("checkout"), NodeId("orphan")});
    CHECK(g.affected_units(NodeId("CVE-2021-23337")) == NodeSet{NodeId("payments")});
    const auto m = g.governance_metrics(NodeId("CVE-2021-23337"));
    CHECK(m.asset_count == 2);
    CHECK(m.unit_count == 1);
    CHECK(m.gap_assets == NodeSet{NodeId("orphan")});
    CHECK(code_of([&] { (void)g.affected_assets(NodeId("checkout")); }) == ErrorCode::WrongKind);
    CHECK(code_of([&] { (void)g.affected_assets(NodeId("CVE-0")); }) == ErrorCode::NotFound);
}

TEST_CASE("blast radius matches the edge-scan oracle on random graphs")
{
    std::mt19937_64 rng(7);
    for (int round = 0; round < 40; ++round) {
        const auto g = testing_support::random_graph(rng);
        for (const auto& s : g.nodes_of_kind(NodeKind::Signal)) {
            CHECK(g.affected_assets(s) == testing_support::oracle_affected_assets(g, s));
            CHECK(g.affected_units(s) == testing_support::oracle_affected_units(g, s));
        }
        for (const auto& a : g.nodes_of_kind(NodeKind::Asset)) {
            CHECK(g.ownership_gap(a) == testing_support::oracle_gap(g, a));
        }
    }
}

TEST_CASE("removing a node cascades its edges")
{
    auto g = small_org();
    const auto before = g.edge_count();
    g.remove_node(NodeId("pkg:npm/lodash@4.17.20"));
    CHECK(g.edge_count() == before - 3);
    CHECK(g.affected_assets(NodeId("CVE-2021-23337")).empty());
    CHECK(g.audit().empty());
}

TEST_CASE("tiers and statuses")
{
    auto g = small_org();
    CHECK(code_of([&] { g.set_asset_tier(NodeId("checkout"), "tier-1"); }) == ErrorCode::UnknownTier);
    g.add_tier({"tier-1", "Crown jewels", 3.0});
    g.set_asset_tier(NodeId("checkout"), "tier-1");
    CHECK(g.node(NodeId("checkout")).asset().tier == "tier-1");
    CHECK(code_of([&] { g.set_compliance_status(NodeId("checkout"), "Quarantined"); }) == ErrorCode::UnknownStatus);
    g.add_status({"Quarantined", "Quarantined", "red"});
    g.set_compliance_status(NodeId("checkout"), "Quarantined");
    CHECK(g.node(NodeId("checkout")).asset().compliance_status == "Quarantined");
    CHECK(g.has_status("unreviewed"));
}

TEST_CASE("json round trip preserves the graph")
{
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        const auto g = testing_support::random_graph(rng);
        const auto back = OrgGraph::from_json(json::parse(g.to_json().dump()));
        CHECK(back == g);
        CHECK(back.audit().empty());
    }
}

TEST_CASE("from_json rejects documents that break invariants")
{
    auto doc = small_org().to_json();
    doc["edges"].push_back({{"src", "checkout"}, {"dst", "acme"}, {"kind", "contains"}, {"attrs", json::object()}});
    CHECK_THROWS_AS(OrgGraph::from_json(doc), Error);
}

TEST_CASE("copies keep an independent reverse index")
{
    std::mt19937_64 rng(61);
    auto g = testing_support::random_graph(rng, 40);
    const graph::OrgGraph copy = g;
    graph::OrgGraph assigned;
    assigned = g;
    const auto comps = g.nodes_of_kind(graph::NodeKind::Comp);
    std::map<graph::NodeId, std::size_t> before;
    for (const auto& c : comps) {
        before[c] = copy.in_edges(c, graph::EdgeKind::DependsOn).size();
    }
    for (const auto& a : g.nodes_of_kind(graph::NodeKind::Asset)) {
        g.remove_node(a);
    }
    g = graph::OrgGraph{};
    for (const auto& c : comps) {
        CHECK(copy.in_edges(c, graph::EdgeKind::DependsOn).size() == before[c]);
        for (const auto* e : assigned.in_edges(c, graph::EdgeKind::DependsOn)) {
            CHECK(e->dst == c);
        }
    }
    CHECK(copy.audit().empty());
    CHECK(assigned == copy);
}
