#include "doctest.h"
#include "scenario.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "deptex/error.hpp"
#include "deptex/server.hpp"
#include "httplib.h"

using namespace deptex;
using namespace deptex::service;
using scenario::json;
using graph::NodeId;

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

std::filesystem::path temp_path(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("deptex-test-" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir / name;
}

void load_slices(Store& s)
{
    using reach::EntryKind;
    s.ingest_slices(json::array(
        {reach::slice_to_json(testing_support::chain_slice("checkout", "CVE-2021-44228", 0, EntryKind::PublicHttp)),
         reach::slice_to_json(testing_support::chain_slice("batch", "CVE-2021-44228", 6, EntryKind::BackgroundJob))}));
}

json gate_request(const std::string& license)
{
    const json base = scenario::sbom({scenario::cdx_component("express", "4.18.2", "MIT")});
    const json head = scenario::sbom(
        {scenario::cdx_component("express", "4.18.2", "MIT"), scenario::cdx_component("fancy-chart", "2.0.0", license)});
    return {{"asset_ref", "checkout"}, {"base_sbom", base}, {"head_sbom", head}, {"pr_meta", {{"number", 7}}}};
}

std::string run_cli(const std::string& args)
{
    const std::string cmd = std::string(DEPTEX_CLI) + " " + args + " 2>&1";
    std::string out;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) {
        out += buf.data();
    }
    ::pclose(pipe);
    return out;
}

} // namespace

TEST_CASE("ingestion, blast radius and depscores")
{
    scenario::Harness h;
    h.build_org();
    const json fed = h.store->ingest_feed(scenario::log4shell_feed(), false);
    CHECK(fed.at("signals").size() == 1);

    const json blast = h.store->blast_radius(NodeId("CVE-2021-44228"));
    CHECK(blast.at("asset_count") == 2);
    CHECK(blast.at("unit_count") == 2);
    CHECK(blast.at("severity") == 9.8);

    load_slices(*h.store);
    const json scores = h.store->depscores(NodeId("checkout"));
    REQUIRE(scores.size() == 1);
    CHECK(scores[0].at("depscore") == 98);
    CHECK(h.store->depscores(NodeId("batch"))[0].at("depscore") == 4);

    // upgrading past the fixed version drops the match and its depscore
    h.store->ingest_sbom(NodeId("batch"),
                         scenario::sbom({scenario::cdx_component("org.apache.logging.log4j/log4j-core", "2.17.1",
                                                                 "Apache-2.0")}));
    CHECK(h.store->blast_radius(NodeId("CVE-2021-44228")).at("asset_count") == 1);
    CHECK(h.store->depscores(NodeId("batch")).empty());
    h.store->ingest_sbom(NodeId("batch"),
                         scenario::sbom({scenario::cdx_component("org.apache.logging.log4j/log4j-core", "2.14.1",
                                                                 "Apache-2.0")}));
    REQUIRE(h.store->depscores(NodeId("batch")).size() == 1);
    CHECK(h.store->depscores(NodeId("batch"))[0].at("depscore") == 4);

    CHECK(code_of([&] { h.store->ingest_sbom(NodeId("nope"), scenario::sbom({})); }) == ErrorCode::NotFound);
    CHECK(code_of([&] { (void)h.store->blast_radius(NodeId("checkout")); }) == ErrorCode::WrongKind);
}

TEST_CASE("slices outside the blast radius wait for the dependency")
{
    scenario::Harness h;
    h.build_org();
    h.store->ingest_feed(scenario::log4shell_feed(), false);
    h.store->create_asset({{"id", "reports"}, {"name", "reports"}, {"tier", "tier-3"}, {"unit", "data"}});
    const json out = h.store->ingest_slices(reach::slice_to_json(
        testing_support::chain_slice("reports", "CVE-2021-44228", 1, reach::EntryKind::Cli)));
    REQUIRE(out.size() == 1);
    CHECK(out[0].at("depscore").is_null());
    CHECK(out[0].at("in_blast_radius") == false);
    CHECK(h.store->depscores(NodeId("reports")).empty());

    h.store->ingest_sbom(NodeId("reports"),
                         scenario::sbom({scenario::cdx_component("org.apache.logging.log4j/log4j-core", "2.14.1",
                                                                 "Apache-2.0")}));
    const json revived = h.store->depscores(NodeId("reports"));
    REQUIRE(revived.size() == 1);
    CHECK(revived[0].at("depscore") == 21);  // 9.8 * 0.25 * 0.85
}

TEST_CASE("leaderboard with overrides and csv")
{
    scenario::Harness h;
    h.build_org();
    h.store->ingest_feed(scenario::log4shell_feed(), false);
    load_slices(*h.store);
    const json board = h.store->leaderboard(NodeId("acme"), risk::AggMode::Sum, {});
    REQUIRE(board.size() == 1);
    const double base = board[0].at("org_risk").get<double>();
    CHECK(base > 0.0);
    const json what_if = h.store->leaderboard(NodeId("acme"), risk::AggMode::Sum, parse_overrides({"checkout:tier-3"}));
    CHECK(what_if[0].at("org_risk").get<double>() < base);
    // the preview leaves the stored tier alone
    CHECK(h.store->get_node(NodeId("checkout")).at("tier") == "tier-1");
    CHECK(h.store->leaderboard_csv(NodeId("acme"), risk::AggMode::Sum, {}).starts_with("external_id,org_risk"));
    CHECK(code_of([&] { (void)parse_overrides({"checkout"}); }) == ErrorCode::Validation);

    const json units = h.store->unit_leaderboard(NodeId("acme"), risk::AggMode::Sum);
    REQUIRE(units.size() == 2);
    CHECK(units[0].at("unit") == "payments");
}

TEST_CASE("pr gate with a mocked legal api")
{
    scenario::Harness h;
    h.build_org();
    h.store->create_policy({{"policy_id", "legal"}, {"context", "pr"}, {"source", scenario::kLegalPolicy}});

    h.legal_verdict = "Unapproved";
    const json blocked = h.store->gate_pr(gate_request("BUSL-1.1"));
    CHECK(blocked.at("decision") == "block");
    CHECK(blocked.at("comment") == "Legal review rejected fancy-chart: license not on the approved list");
    REQUIRE(h.legal_calls.size() == 1);
    CHECK(json::parse(h.legal_calls[0].body).at("purl") == "pkg:npm/fancy-chart@2.0.0");

    h.legal_verdict = "Approved";
    const json allowed = h.store->gate_pr(gate_request("MIT"));
    CHECK(allowed.at("decision") == "allow");
    CHECK(allowed.at("comment") == "legal review passed");

    h.store->create_policy({{"policy_id", "undecided"}, {"context", "pr"}, {"source", "log(\"thinking\");"}});
    const json closed = h.store->gate_pr(gate_request("MIT"));
    CHECK(closed.at("decision") == "block");
    CHECK(closed.at("comment").get<std::string>().find("MissingVerdict") != std::string::npos);

    const json audit = h.store->audit_log();
    int gates = 0;
    for (const auto& r : audit) {
        gates += r.at("action") == "gate_pr" ? 1 : 0;
    }
    CHECK(gates == 3);
}

TEST_CASE("notification routing and webhook delivery")
{
    scenario::Harness h;
    h.build_org();
    h.store->create_policy({{"policy_id", "route"}, {"context", "notification"}, {"source", scenario::kRoutingPolicy}});
    h.store->ingest_feed(scenario::log4shell_feed(), false);
    load_slices(*h.store);

    const json out = h.store->notify(NodeId("CVE-2021-44228"), false);
    CHECK(out.at("reports").size() == 2);
    const auto pager = h.hooks_to(scenario::kPagerUrl);
    const auto tickets = h.hooks_to(scenario::kTicketUrl);
    REQUIRE(pager.size() == 1);
    REQUIRE(tickets.size() == 1);
    const json page = json::parse(pager[0].body);
    CHECK(page.at("asset") == "checkout");
    CHECK(page.at("tier") == "tier-1");
    CHECK(page.at("depscore") == 98);
    CHECK(page.at("event") == "signal.alert");
    CHECK(pager[0].headers.at("X-Deptex-Signature") == "sha256=" + dispatch::hmac_sha256_hex("s3cret", pager[0].body));
    CHECK_FALSE(tickets[0].headers.contains("X-Deptex-Signature"));
    CHECK(json::parse(tickets[0].body).at("asset") == "batch");
}

TEST_CASE("webhook retries")
{
    scenario::Harness h;
    h.build_org();
    h.store->create_policy({{"policy_id", "route"}, {"context", "notification"}, {"source", scenario::kRoutingPolicy}});
    h.store->ingest_feed(scenario::log4shell_feed(), false);
    load_slices(*h.store);

    h.webhook_failures = 2;
    dispatch::Dispatcher d(*h.transport, h.store->config().retry);
    const dispatch::ChannelDef pager{"pager", "webhook", scenario::kPagerUrl, std::nullopt, ""};
    auto r = d.deliver(pager, json{{"x", 1}});
    CHECK(r.status == "delivered");
    CHECK(r.attempts == 3);

    h.webhook_failures = 100;
    r = d.deliver(pager, json{{"x", 2}});
    CHECK(r.status == "failed");
    CHECK(r.attempts == 4);
    CHECK(r.http_status == 503);

    h.webhook_failures = 0;
    h.store->notify(NodeId("CVE-2021-44228"), true);
    h.store->drain_dispatches();
    CHECK(h.store->dispatch_history().size() == 2);
}

TEST_CASE("status policies: first policy id wins and both are audited")
{
    scenario::Harness h;
    h.build_org();
    h.store->create_status({{"status_id", "Watch"}});
    h.store->create_asset({{"id", "orphan"}, {"name", "legacy"}});
    h.store->create_policy({{"policy_id", "b-watch"}, {"context", "status"},
                            {"source", "if risk_summary.gap_assets > 0 { transition(\"Watch\"); }"}});
    h.store->create_policy({{"policy_id", "a-quarantine"}, {"context", "status"},
                            {"source", "if risk_summary.gap_assets > 0 { transition(\"Quarantined\"); }"}});
    const json r = h.store->run_status_policies(NodeId("orphan"));
    CHECK(h.store->get_node(NodeId("orphan")).at("compliance_status") == "Quarantined");
    CHECK(r.at("evaluations").size() == 2);

    int evaluated = 0;
    for (const auto& rec : h.store->audit_log()) {
        if (rec.at("subject") == "orphan" && rec.at("action").get<std::string>().find("status") != std::string::npos) {
            ++evaluated;
        }
    }
    CHECK(evaluated >= 2);

    // owned asset: no transition
    h.store->run_status_policies(NodeId("checkout"));
    CHECK(h.store->get_node(NodeId("checkout")).at("compliance_status") == "unreviewed");

    h.store->create_policy({{"policy_id", "0-bad"}, {"context", "status"}, {"source", "transition(\"Nope\");"}});
    CHECK(code_of([&] { h.store->run_status_policies(NodeId("orphan")); }) == ErrorCode::UnknownStatus);
}

TEST_CASE("component policies")
{
    scenario::Harness h;
    h.build_org();
    h.store->create_policy({{"policy_id", "licenses"}, {"context", "policy"},
                            {"source", "if \"MIT\" in component.licenses { violation(\"MIT needs attribution\"); }"}});
    const json r = h.store->run_component_policies(NodeId("checkout"));
    const std::string dumped = r.dump();
    CHECK(dumped.find("MIT needs attribution") != std::string::npos);
    CHECK(dumped.find("pkg:npm/express@4.18.2") != std::string::npos);
}

TEST_CASE("snapshot persistence")
{
    const auto path = temp_path("store.json");
    std::filesystem::remove(path);
    json before;
    {
        scenario::Harness h;
        h.store->open(path);
        h.build_org();
        h.store->ingest_feed(scenario::log4shell_feed(), false);
        load_slices(*h.store);
        before = h.store->snapshot();
    }
    {
        scenario::Harness h;
        h.store->open(path);
        CHECK(h.store->snapshot() == before);
        CHECK(h.store->depscores(NodeId("checkout"))[0].at("depscore") == 98);
    }

    // flip one character inside the checksummed body
    std::string text;
    {
        std::ifstream in(path);
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    const auto pos = text.find("checkout-api");
    REQUIRE(pos != std::string::npos);
    text[pos] = 'C';
    const auto bad = temp_path("corrupt.json");
    std::ofstream(bad) << text;
    {
        scenario::Harness h;
        CHECK(code_of([&] { h.store->open(bad); }) == ErrorCode::CorruptSnapshot);
    }
    std::ofstream(bad) << text.substr(0, text.size() / 2);
    {
        scenario::Harness h;
        CHECK(code_of([&] { h.store->open(bad); }) == ErrorCode::CorruptSnapshot);
    }
    CHECK(code_of([&] { (void)SnapshotFile::unwrap(json{{"format", "other"}}); }) == ErrorCode::CorruptSnapshot);
}

TEST_CASE("error mapping")
{
    CHECK(http_status_for(ErrorCode::NotFound) == 404);
    CHECK(http_status_for(ErrorCode::DuplicateId) == 409);
    CHECK(http_status_for(ErrorCode::SyntaxError) == 422);
    CHECK(http_status_for(ErrorCode::Unauthorized) == 401);
    CHECK(http_status_for(ErrorCode::CorruptSnapshot) == 503);
    const json body = error_body(SourceError(ErrorCode::SyntaxError, 1, 9, "expected expression"));
    CHECK(body.at("error").at("line") == 1);
    CHECK(body.at("error").at("column") == 9);
}

TEST_CASE("rest api routes")
{
    scenario::Harness h;
    h.build_org();
    h.store->ingest_feed(scenario::log4shell_feed(), false);
    load_slices(*h.store);
    Server server(*h.store, ServerOptions{std::string("tok"), std::nullopt});
    const int port = server.start();
    httplib::Client cli("127.0.0.1", port);
    const httplib::Headers auth{{"Authorization", "Bearer tok"}};

    auto health = cli.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);

    auto denied = cli.Get("/api/v1/orgs/acme/leaderboard");
    REQUIRE(denied);
    CHECK(denied->status == 401);

    auto board = cli.Get("/api/v1/orgs/acme/leaderboard", auth);
    REQUIRE(board);
    CHECK(board->status == 200);
    CHECK(board->body == render(h.store->leaderboard(NodeId("acme"), risk::AggMode::Sum, {})));

    auto comp = cli.Get("/api/v1/nodes/pkg:npm%2Fexpress@4.18.2", auth);
    REQUIRE(comp);
    CHECK(comp->status == 200);
    CHECK(json::parse(comp->body).at("purl") == "pkg:npm/express@4.18.2");

    auto preview = cli.Get("/api/v1/orgs/acme/leaderboard?override_tier=checkout:tier-3&agg=max", auth);
    REQUIRE(preview);
    CHECK(preview->body ==
          render(h.store->leaderboard(NodeId("acme"), risk::AggMode::Max, parse_overrides({"checkout:tier-3"}))));

    auto csv = cli.Get("/api/v1/orgs/acme/leaderboard?format=csv", auth);
    REQUIRE(csv);
    CHECK(csv->get_header_value("Content-Type") == "text/csv");

    auto missing = cli.Get("/api/v1/signals/CVE-0/blast-radius", auth);
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body).at("error").at("code") == "NotFound");

    auto created = cli.Post("/api/v1/policies", auth,
                            json{{"policy_id", "p1"}, {"context", "pr"}, {"source", "allow;"}}.dump(),
                            "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    auto dup = cli.Post("/api/v1/policies", auth, json{{"policy_id", "p1"}, {"context", "pr"}, {"source", "allow;"}}.dump(),
                        "application/json");
    REQUIRE(dup);
    CHECK(dup->status == 409);

    auto bad_policy = cli.Post("/api/v1/policies", auth,
                               json{{"policy_id", "p2"}, {"context", "pr"}, {"source", "let x = ;"}}.dump(),
                               "application/json");
    REQUIRE(bad_policy);
    CHECK(bad_policy->status == 422);
    CHECK(json::parse(bad_policy->body).at("error").at("column") == 9);

    h.legal_verdict = "Unapproved";
    json dry_body = gate_request("GPL-3.0");
    dry_body["source"] = scenario::kLegalPolicy;
    dry_body["budget"] = {{"http_allowlist", {"https://legal.example/"}}};
    auto dry = cli.Post("/api/v1/policies/p1/dry-run", auth, dry_body.dump(), "application/json");
    REQUIRE(dry);
    INFO(dry->body);
    CHECK(dry->status == 200);
    const json trace = json::parse(dry->body);
    CHECK(trace.at("outcome").at("decision") == "block");
    CHECK(trace.at("http_log").size() == 1);
    CHECK_FALSE(trace.at("trace").empty());
    h.legal_verdict = "Approved";

    auto gate = cli.Post("/api/v1/gate/pr", auth, gate_request("MIT").dump(), "application/json");
    REQUIRE(gate);
    CHECK(json::parse(gate->body).at("decision") == "allow");

    auto garbage = cli.Post("/api/v1/orgs", auth, "{not json", "application/json");
    REQUIRE(garbage);
    CHECK(garbage->status == 400);
    server.stop();
}

TEST_CASE("cli and api render the same bytes")
{
    const auto path = temp_path("parity.json");
    std::filesystem::remove(path);
    scenario::Harness h;
    h.store->open(path);
    h.build_org();
    h.store->ingest_feed(scenario::log4shell_feed(), false);
    load_slices(*h.store);

    Server server(*h.store, ServerOptions{});
    const int port = server.start();
    httplib::Client cli("127.0.0.1", port);
    auto api = cli.Get("/api/v1/orgs/acme/leaderboard?override_tier=batch:tier-1");
    REQUIRE(api);
    CHECK(run_cli("score --store " + path.string() + " --org acme --override-tier batch:tier-1") == api->body);
    auto blast = cli.Get("/api/v1/signals/CVE-2021-44228/blast-radius");
    REQUIRE(blast);
    CHECK(run_cli("blast-radius --store " + path.string() + " CVE-2021-44228") == blast->body);
    server.stop();
}
