// deptex command line: every read command prints the same JSON the REST API
// returns for the same store.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "deptex/error.hpp"
#include "deptex/log.hpp"
#include "deptex/server.hpp"
#include "deptex/store.hpp"

namespace {

using deptex::Error;
using deptex::ErrorCode;
using deptex::graph::NodeId;
using deptex::service::json;
using deptex::service::render;

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::NotFound, "cannot read " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json read_json(const std::string& path)
{
    json doc = json::parse(read_file(path), nullptr, false);
    if (doc.is_discarded()) {
        throw Error(ErrorCode::MalformedDocument, path + " is not valid JSON");
    }
    return doc;
}

json inline_or_file(const std::string& text, const std::string& file)
{
    if (!file.empty()) {
        return read_json(file);
    }
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) {
        throw Error(ErrorCode::MalformedDocument, "--json is not valid JSON");
    }
    return doc;
}

// Answers requests whose URL starts with a registered prefix from a file;
// anything else is a transport failure.
struct Mocks {
    std::vector<std::pair<std::string, std::string>> routes;  // prefix, body

    deptex::http::Response answer(const deptex::http::Request& req) const
    {
        for (const auto& [prefix, body] : routes) {
            if (req.url.starts_with(prefix)) {
                return {200, body, "application/json"};
            }
        }
        throw Error(ErrorCode::HttpFailure, "no mock registered for " + req.url);
    }
};

struct Cli {
    std::string store_path = "deptex-store.json";
    std::unique_ptr<deptex::http::Transport> transport = std::make_unique<deptex::http::NetworkTransport>();
    std::unique_ptr<deptex::service::Store> store;

    deptex::service::Store& open()
    {
        if (!store) {
            store = std::make_unique<deptex::service::Store>(deptex::service::Config::from_env(), *transport);
            store->open(store_path);
        }
        return *store;
    }
};

void print(const json& value)
{
    std::cout << render(value);
}

deptex::service::Server* g_server = nullptr;

void on_signal(int)
{
    if (g_server != nullptr) {
        g_server->stop();
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"deptex: organization-first dependency risk governance"};
    app.require_subcommand(1);
    Cli cli;
    if (const char* env = std::getenv("DEPTEX_STORE"); env != nullptr && *env != '\0') {
        cli.store_path = env;
    }
    auto add_store = [&](CLI::App* cmd) { cmd->add_option("--store", cli.store_path, "snapshot file"); };
    add_store(&app);
    int exit_code = 0;

    // ---- serve ----
    auto* serve = app.add_subcommand("serve", "run the REST API");
    add_store(serve);
    std::string listen = "127.0.0.1:8080";
    std::string ui_dir;
    serve->add_option("--listen", listen, "host:port");
    serve->add_option("--ui", ui_dir, "static dashboard bundle to serve at /");
    serve->callback([&] {
        auto& store = cli.open();
        store.set_actor("api");
        const auto colon = listen.rfind(':');
        if (colon == std::string::npos) {
            throw Error(ErrorCode::Validation, "--listen expects host:port");
        }
        deptex::service::ServerOptions opts;
        if (const char* tok = std::getenv("DEPTEX_TOKEN"); tok != nullptr && *tok != '\0') {
            opts.token = tok;
        } else {
            deptex::log::warn("DEPTEX_TOKEN is not set; the API is unauthenticated");
        }
        if (!ui_dir.empty()) {
            opts.ui_dir = ui_dir;
        }
        deptex::service::Server server(store, opts);
        g_server = &server;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        server.listen(listen.substr(0, colon), std::stoi(listen.substr(colon + 1)));
        g_server = nullptr;
        store.drain_dispatches();
    });

    // ---- ingest ----
    auto* ingest = app.add_subcommand("ingest", "ingest SBOMs, vulnerability feeds and slices");
    ingest->require_subcommand(1);
    std::string asset_id;
    std::string file;
    bool notify = false;
    auto* sbom = ingest->add_subcommand("sbom", "reconcile an asset's dependencies with a CycloneDX SBOM");
    add_store(sbom);
    sbom->add_option("--asset", asset_id)->required();
    sbom->add_option("file", file)->required();
    sbom->callback([&] { print(cli.open().ingest_sbom(NodeId(asset_id), read_json(file))); });
    auto* vulns = ingest->add_subcommand("vulns", "ingest an OSV feed and match it against stored components");
    add_store(vulns);
    vulns->add_option("file", file)->required();
    vulns->add_flag("--notify", notify, "run notification policies for changed signals and send webhooks");
    vulns->callback([&] {
        auto& store = cli.open();
        print(store.ingest_feed(read_json(file), notify));
        store.drain_dispatches();
    });
    auto* slice = ingest->add_subcommand("slice", "ingest reachability slices and compute depscores");
    add_store(slice);
    slice->add_option("file", file)->required();
    slice->callback([&] { print(cli.open().ingest_slices(read_json(file))); });

    // ---- score ----
    auto* score = app.add_subcommand("score", "signal leaderboard for an organization");
    add_store(score);
    std::string org_id;
    std::string agg = "sum";
    std::string format = "json";
    std::vector<std::string> overrides;
    bool by_unit = false;
    score->add_option("--org", org_id)->required();
    score->add_option("--agg", agg)->check(CLI::IsMember({"sum", "max", "mean"}));
    score->add_option("--override-tier", overrides, "what-if override asset:tier (repeatable)");
    score->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}));
    score->add_flag("--units", by_unit, "rank units instead of signals");
    score->callback([&] {
        auto& store = cli.open();
        const auto mode = deptex::risk::parse_agg_mode(agg);
        if (by_unit) {
            print(store.unit_leaderboard(NodeId(org_id), mode));
        } else if (format == "csv") {
            std::cout << store.leaderboard_csv(NodeId(org_id), mode, deptex::service::parse_overrides(overrides));
        } else {
            print(store.leaderboard(NodeId(org_id), mode, deptex::service::parse_overrides(overrides)));
        }
    });

    // ---- reads ----
    std::string id;
    auto* blast = app.add_subcommand("blast-radius", "assets and units affected by a signal");
    add_store(blast);
    blast->add_option("signal", id)->required();
    blast->callback([&] { print(cli.open().blast_radius(NodeId(id))); });
    auto* scores = app.add_subcommand("depscores", "depscores of an asset");
    add_store(scores);
    scores->add_option("asset", id)->required();
    scores->callback([&] { print(cli.open().depscores(NodeId(id))); });
    auto* audit = app.add_subcommand("audit", "print the audit log");
    add_store(audit);
    audit->callback([&] { print(cli.open().audit_log()); });
    auto* show = app.add_subcommand("show", "print one node");
    add_store(show);
    show->add_option("id", id)->required();
    show->callback([&] { print(cli.open().get_node(NodeId(id))); });

    // ---- add ----
    auto* add = app.add_subcommand("add", "create orgs, units, assets, actors, edges, channels, tiers, statuses");
    add->require_subcommand(1);
    std::string body_text = "{}";
    std::string body_file;
    auto add_kind = [&](const std::string& name, auto fn) {
        auto* cmd = add->add_subcommand(name, std::string("create ") + (std::string_view("aeiou").find(name[0]) != std::string_view::npos ? "an " : "a ") + name);
        add_store(cmd);
        cmd->add_option("--json", body_text, "inline JSON body");
        cmd->add_option("--file", body_file, "JSON body file");
        cmd->callback([&, fn] { print((cli.open().*fn)(inline_or_file(body_text, body_file))); });
    };
    using S = deptex::service::Store;
    add_kind("org", &S::create_org);
    add_kind("unit", &S::create_unit);
    add_kind("asset", &S::create_asset);
    add_kind("actor", &S::create_actor);
    add_kind("edge", &S::create_edge);
    add_kind("channel", &S::create_channel);
    add_kind("tier", &S::create_tier);
    add_kind("status", &S::create_status);

    auto* set_tier = app.add_subcommand("set-tier", "move an asset to another tier");
    add_store(set_tier);
    std::string tier_id;
    set_tier->add_option("asset", id)->required();
    set_tier->add_option("tier", tier_id)->required();
    set_tier->callback([&] { print(cli.open().set_asset_tier(NodeId(id), tier_id)); });

    // ---- policy ----
    auto* pol = app.add_subcommand("policy", "author, test and store PolicyLang scripts");
    pol->require_subcommand(1);
    std::string context = "pr";
    std::string binding_file;
    std::string policy_id = "adhoc";
    std::vector<std::string> allow;
    std::vector<std::string> mocks;
    deptex::policy::SandboxBudget budget;
    auto* test = pol->add_subcommand("test", "dry-run a script against a binding fixture");
    test->add_option("--context", context)->check(CLI::IsMember({"status", "policy", "pr", "notification"}));
    test->add_option("--binding", binding_file)->required();
    test->add_option("--id", policy_id);
    test->add_option("--allow", allow, "URL prefix the script may call (repeatable)");
    test->add_option("--mock", mocks, "PREFIX=FILE: answer requests under PREFIX with FILE (repeatable)");
    test->add_option("--max-steps", budget.max_steps);
    test->add_option("--max-http", budget.max_http_calls);
    test->add_option("--timeout-ms", budget.timeout_ms);
    test->add_option("file", file)->required();
    test->callback([&] {
        Mocks table;
        for (const auto& m : mocks) {
            const auto eq = m.find('=');
            if (eq == std::string::npos) {
                throw Error(ErrorCode::Validation, "--mock expects PREFIX=FILE");
            }
            table.routes.emplace_back(m.substr(0, eq), read_file(m.substr(eq + 1)));
        }
        deptex::http::StubTransport stub([&](const deptex::http::Request& r) { return table.answer(r); });
        deptex::http::Transport& transport = mocks.empty() ? *cli.transport : stub;
        budget.http_allowlist = allow;
        const auto ctx = deptex::policy::parse_context(context);
        const auto script = deptex::policy::PolicyScript::create(policy_id, ctx, read_file(file));
        const auto run = deptex::policy::dry_run(script, {ctx, read_json(binding_file)}, budget, transport);
        print(deptex::policy::to_json(run));
        exit_code = run.error ? 1 : 0;
    });
    auto* parse = pol->add_subcommand("parse", "print the AST of a script");
    parse->add_option("file", file)->required();
    parse->callback([&] { std::cout << deptex::policy::dump_ast(*deptex::policy::parse_policy(read_file(file))); });
    auto* pol_add = pol->add_subcommand("add", "store a policy");
    add_store(pol_add);
    bool replace = false;
    pol_add->add_option("--id", policy_id)->required();
    pol_add->add_option("--context", context)->required();
    pol_add->add_flag("--replace", replace);
    pol_add->add_option("file", file)->required();
    pol_add->callback([&] {
        print(cli.open().create_policy({{"policy_id", policy_id}, {"context", context}, {"source", read_file(file)}},
                                       replace));
    });
    auto* pol_list = pol->add_subcommand("list", "list stored policies");
    add_store(pol_list);
    pol_list->callback([&] { print(cli.open().list_policies()); });
    auto* run_status = pol->add_subcommand("run-status", "evaluate status policies for an asset");
    add_store(run_status);
    run_status->add_option("asset", id)->required();
    run_status->callback([&] { print(cli.open().run_status_policies(NodeId(id))); });
    auto* run_checks = pol->add_subcommand("check-components", "evaluate component policies");
    add_store(run_checks);
    std::string check_asset;
    run_checks->add_option("--asset", check_asset);
    run_checks->callback([&] {
        std::optional<NodeId> a;
        if (!check_asset.empty()) {
            a = NodeId(check_asset);
        }
        print(cli.open().run_component_policies(a));
    });
    auto* notify_cmd = pol->add_subcommand("notify", "run notification policies for a signal and send webhooks");
    add_store(notify_cmd);
    notify_cmd->add_option("signal", id)->required();
    notify_cmd->callback([&] { print(cli.open().notify(NodeId(id), false)); });

    // ---- gate ----
    auto* gate = app.add_subcommand("gate", "evaluate pr policies on the delta between two SBOMs");
    add_store(gate);
    std::string base_file;
    std::string head_file;
    std::string pr_meta = "{}";
    gate->add_option("--asset", asset_id)->required();
    gate->add_option("--base", base_file)->required();
    gate->add_option("--head", head_file)->required();
    gate->add_option("--pr-meta", pr_meta, "JSON {repo, number, author}");
    gate->callback([&] {
        const json req{{"asset_ref", asset_id},
                       {"base_sbom", read_json(base_file)},
                       {"head_sbom", read_json(head_file)},
                       {"pr_meta", inline_or_file(pr_meta, "")}};
        const json out = cli.open().gate_pr(req);
        print(out);
        exit_code = out["decision"] == "allow" ? 0 : 2;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error: " << deptex::to_string(e.code()) << ": " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}
