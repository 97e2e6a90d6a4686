#include "doctest.h"
#include "support.hpp"

#include "deptex/error.hpp"
#include "deptex/kernels.hpp"

using namespace deptex;
using namespace deptex::risk;
using testing_support::json;
using testing_support::uniform;

namespace {

ContribInputs random_inputs(std::mt19937_64& rng)
{
    ContribInputs in;
    in.sev = uniform(rng, 0.0, 10.0);
    in.conf = uniform(rng, 0.0, 1.0);
    in.direct = testing_support::coin(rng);
    in.scope = testing_support::coin(rng) ? graph::Scope::Runtime : graph::Scope::Dev;
    in.exposure = uniform(rng, 0.0, 1.0);
    in.critical = testing_support::coin(rng);
    in.ownership_gap = testing_support::coin(rng);
    in.tier_importance = uniform(rng, 0.1, 3.0);
    if (testing_support::coin(rng)) {
        in.epd = uniform(rng, 0.0, 1.0);
    }
    return in;
}

// Push one input in the risk-increasing direction.
ContribInputs worsen(std::mt19937_64& rng, ContribInputs in)
{
    switch (std::uniform_int_distribution<int>(0, 8)(rng)) {
    case 0: in.sev = uniform(rng, in.sev, 10.0); break;
    case 1: in.conf = uniform(rng, in.conf, 1.0); break;
    case 2: in.direct = true; break;
    case 3: in.scope = graph::Scope::Runtime; break;
    case 4: in.exposure = uniform(rng, in.exposure, 1.0); break;
    case 5: in.critical = true; break;
    case 6: in.ownership_gap = true; break;
    case 7: in.tier_importance = uniform(rng, in.tier_importance, 5.0); break;
    default:
        if (in.epd) {
            in.epd = uniform(rng, *in.epd, 1.0);
        } else {
            in.exposure = 1.0;
        }
        break;
    }
    return in;
}

graph::NodeId first_org(const graph::OrgGraph& g)
{
    return g.nodes_of_kind(graph::NodeKind::Org).front();
}

} // namespace

TEST_CASE("contrib factor table")
{
    ContribInputs in;
    in.sev = 10.0;
    CHECK(contrib(in) == 1.0);
    in.direct = false;
    CHECK(contrib(in) == doctest::Approx(0.8));
    in.scope = graph::Scope::Test;
    CHECK(contrib(in) == doctest::Approx(0.24));
    in.critical = true;
    in.ownership_gap = true;
    CHECK(contrib(in) == doctest::Approx(0.24 * 1.5625));
    in.exposure = 0.5;
    in.epd = 0.0;
    CHECK(contrib(in) == 0.0);  // epd replaces exposure

    ContribInputs bad;
    bad.sev = 10.5;
    CHECK_THROWS_AS(contrib(bad), Error);
    bad.sev = 5.0;
    bad.conf = -0.1;
    CHECK_THROWS_AS(contrib(bad), Error);
    bad.conf = 1.0;
    bad.tier_importance = 0.0;
    CHECK_THROWS_AS(contrib(bad), Error);
}

TEST_CASE("contrib is monotone and scale covariant")
{
    std::mt19937_64 rng(31);
    int violations = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto in = random_inputs(rng);
        const auto worse = worsen(rng, in);
        if (contrib(worse) < contrib(in)) {
            ++violations;
        }
        auto scaled = in;
        scaled.tier_importance *= 2.0;
        CHECK(contrib(scaled) == doctest::Approx(2.0 * contrib(in)));
        auto zero = in;
        zero.sev = 0.0;
        CHECK(contrib(zero) == 0.0);
    }
    CHECK(violations == 0);
}

TEST_CASE("aggregation modes")
{
    const std::vector<double> xs{1.0, 4.0, 2.5};
    CHECK(aggregate(xs, AggMode::Sum) == 7.5);
    CHECK(aggregate(xs, AggMode::Max) == 4.0);
    CHECK(aggregate(xs, AggMode::Mean) == 2.5);
    CHECK(aggregate(std::vector<double>{}, AggMode::Mean) == 0.0);
    CHECK(parse_agg_mode("max") == AggMode::Max);
    CHECK_THROWS_AS(parse_agg_mode("median"), Error);
}

TEST_CASE("engine agrees with the factor-by-factor oracle")
{
    std::mt19937_64 rng(37);
    for (int round = 0; round < 60; ++round) {
        const auto g = testing_support::random_graph(rng);
        DepscoreTable table;
        for (const auto& s : g.nodes_of_kind(graph::NodeKind::Signal)) {
            for (const auto& a : g.affected_assets(s)) {
                if (testing_support::coin(rng, 0.4)) {
                    reach::DepscoreResult r;
                    r.reachable = true;
                    r.epd = uniform(rng, 0.0, 1.0);
                    table[{s, a}] = r;
                }
            }
        }
        const bool use_table = round % 2 == 0;
        const RiskEngine engine(g, use_table ? &table : nullptr);
        const DepscoreTable* oracle_table = use_table ? &table : nullptr;
        for (const auto& s : g.nodes_of_kind(graph::NodeKind::Signal)) {
            for (const auto& a : g.nodes_of_kind(graph::NodeKind::Asset)) {
                CHECK(engine.contrib(s, a) ==
                      doctest::Approx(testing_support::oracle_contrib(g, s, a, oracle_table)).epsilon(1e-12));
            }
            if (use_table) {
                continue;  // the unit/org oracles read static exposure
            }
            for (auto mode : {AggMode::Sum, AggMode::Max, AggMode::Mean}) {
                for (const auto& u : g.nodes_of_kind(graph::NodeKind::Unit)) {
                    CHECK(engine.unit_risk(s, u, mode) ==
                          doctest::Approx(testing_support::oracle_unit_risk(g, s, u, mode)).epsilon(1e-12));
                }
                for (const auto& o : g.nodes_of_kind(graph::NodeKind::Org)) {
                    CHECK(engine.org_risk(s, o, mode) ==
                          doctest::Approx(testing_support::oracle_org_risk(g, s, o, mode)).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("leaderboard ordering and content")
{
    std::mt19937_64 rng(41);
    for (int round = 0; round < 30; ++round) {
        const auto g = testing_support::random_graph(rng);
        const auto org = first_org(g);
        const RiskEngine engine(g);
        const auto rows = engine.leaderboard(org, AggMode::Sum);
        CHECK(rows.size() == g.nodes_of_kind(graph::NodeKind::Signal).size());
        for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
            const auto& x = rows[i];
            const auto& y = rows[i + 1];
            const bool ordered = x.org_risk > y.org_risk ||
                                 (x.org_risk == y.org_risk &&
                                  (x.asset_count > y.asset_count ||
                                   (x.asset_count == y.asset_count && x.external_id < y.external_id)));
            CHECK(ordered);
        }
        for (const auto& r : rows) {
            CHECK(r.org_risk == doctest::Approx(testing_support::oracle_org_risk(g, r.signal, org, AggMode::Sum)));
            CHECK(r.asset_count == testing_support::oracle_affected_assets(g, r.signal).size());
            CHECK(r.unit_count == testing_support::oracle_affected_units(g, r.signal).size());
        }
    }
}

TEST_CASE("tier overrides behave like a reassigned tier")
{
    std::mt19937_64 rng(43);
    for (int round = 0; round < 20; ++round) {
        auto g = testing_support::random_graph(rng);
        const auto org = first_org(g);
        const auto asset = g.nodes_of_kind(graph::NodeKind::Asset).front();
        const RiskEngine what_if(g, nullptr, {{asset, "tier-1"}});
        const auto hypothetical = what_if.leaderboard(org, AggMode::Max);
        auto moved = g;
        moved.set_asset_tier(asset, "tier-1");
        const RiskEngine real(moved);
        const auto actual = real.leaderboard(org, AggMode::Max);
        REQUIRE(hypothetical.size() == actual.size());
        for (std::size_t i = 0; i < actual.size(); ++i) {
            CHECK(hypothetical[i].signal == actual[i].signal);
            CHECK(hypothetical[i].org_risk == doctest::Approx(actual[i].org_risk));
        }
    }
    const auto g = testing_support::random_graph(rng);
    CHECK_THROWS_AS(RiskEngine(g, nullptr, {{g.nodes_of_kind(graph::NodeKind::Asset).front(), "gold"}}), Error);
}

TEST_CASE("csv rendering")
{
    std::vector<LeaderboardRow> rows{{graph::NodeId("CVE-1"), "CVE-1", 1.5, 3, 2, 1},
                                     {graph::NodeId("x"), "weird,\"id\"", 0.0, 0, 0, 0}};
    CHECK(leaderboard_to_csv(rows) ==
          "external_id,org_risk,asset_count,unit_count,gap_count\nCVE-1,1.5,3,2,1\n\"weird,\"\"id\"\"\",0,0,0,0\n");
    const auto j = leaderboard_to_json(rows);
    CHECK(j.size() == 2);
    CHECK(j[0]["external_id"] == "CVE-1");
}
