#include "deptex/server.hpp"

#include <thread>

#include "deptex/log.hpp"
#include "httplib.h"

namespace deptex::service {

namespace {

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

json parse_body(const httplib::Request& req)
{
    json doc = json::parse(req.body, nullptr, false);
    if (doc.is_discarded()) {
        throw Error(ErrorCode::MalformedDocument, "request body is not valid JSON");
    }
    return doc;
}

void send_json(httplib::Response& res, const json& body, int status = 200)
{
    res.status = status;
    res.set_content(render(body), "application/json");
}

std::vector<std::string> params(const httplib::Request& req, const std::string& key)
{
    std::vector<std::string> out;
    const auto range = req.params.equal_range(key);
    for (auto it = range.first; it != range.second; ++it) {
        out.push_back(it->second);
    }
    return out;
}

risk::AggMode agg_param(const httplib::Request& req)
{
    return req.has_param("agg") ? risk::parse_agg_mode(req.get_param_value("agg")) : risk::AggMode::Sum;
}

} // namespace

struct Server::Impl {
    Store& store;
    ServerOptions options;
    httplib::Server http;
    std::thread thread;

    Impl(Store& s, ServerOptions o) : store(s), options(std::move(o)) { routes(); }

    Handler guarded(Handler inner)
    {
        return [this, inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
            try {
                if (options.token && req.get_header_value("Authorization") != "Bearer " + *options.token) {
                    throw Error(ErrorCode::Unauthorized, "missing or invalid bearer token");
                }
                inner(req, res);
            } catch (const Error& e) {
                send_json(res, error_body(e), http_status_for(e.code()));
            } catch (const json::exception& e) {
                send_json(res, error_body(Error(ErrorCode::MalformedDocument, e.what())), 400);
            } catch (const std::exception& e) {
                log::error(std::string("unhandled error on ") + req.method + " " + req.path + ": " + e.what());
                send_json(res, json{{"error", {{"code", "Internal"}, {"message", e.what()}}}}, 500);
            }
        };
    }

    void post(const std::string& pattern, Handler h) { http.Post(pattern, guarded(std::move(h))); }
    void put(const std::string& pattern, Handler h) { http.Put(pattern, guarded(std::move(h))); }
    void get(const std::string& pattern, Handler h) { http.Get(pattern, guarded(std::move(h))); }

    void routes()
    {
        using R = const httplib::Request&;
        using W = httplib::Response&;
        const std::string api = "/api/v1";

        http.Get("/healthz", [](R, W res) { res.set_content("ok\n", "text/plain"); });

        post(api + "/orgs", [this](R req, W res) { send_json(res, store.create_org(parse_body(req)), 201); });
        post(api + "/units", [this](R req, W res) { send_json(res, store.create_unit(parse_body(req)), 201); });
        post(api + "/assets", [this](R req, W res) { send_json(res, store.create_asset(parse_body(req)), 201); });
        post(api + "/actors", [this](R req, W res) { send_json(res, store.create_actor(parse_body(req)), 201); });
        post(api + "/edges", [this](R req, W res) { send_json(res, store.create_edge(parse_body(req)), 201); });
        post(api + "/channels", [this](R req, W res) { send_json(res, store.create_channel(parse_body(req)), 201); });
        post(api + "/tiers", [this](R req, W res) { send_json(res, store.create_tier(parse_body(req)), 201); });
        post(api + "/statuses", [this](R req, W res) { send_json(res, store.create_status(parse_body(req)), 201); });
        post(api + "/policies", [this](R req, W res) { send_json(res, store.create_policy(parse_body(req)), 201); });

        put(api + R"(/tiers/([^/]+))", [this](R req, W res) {
            json body = parse_body(req);
            body["tier_id"] = req.matches[1].str();
            send_json(res, store.upsert_tier(body));
        });
        put(api + R"(/policies/([^/]+))", [this](R req, W res) {
            json body = parse_body(req);
            body["policy_id"] = req.matches[1].str();
            send_json(res, store.create_policy(body, true));
        });
        put(api + R"(/assets/([^/]+)/tier)", [this](R req, W res) {
            const json body = parse_body(req);
            if (!body.contains("tier") || !body.at("tier").is_string()) {
                throw Error(ErrorCode::MissingField, "tier");
            }
            send_json(res, store.set_asset_tier(NodeId(req.matches[1].str()), body.at("tier").get<std::string>()));
        });

        get(api + "/tiers", [this](R, W res) { send_json(res, store.list_tiers()); });
        get(api + "/statuses", [this](R, W res) { send_json(res, store.list_statuses()); });
        get(api + "/statuses/distribution", [this](R, W res) { send_json(res, store.status_distribution()); });
        get(api + "/policies", [this](R, W res) { send_json(res, store.list_policies()); });
        get(api + "/channels", [this](R, W res) { send_json(res, store.list_channels()); });
        get(api + "/audit", [this](R, W res) { send_json(res, store.audit_log()); });
        get(api + "/dispatches", [this](R, W res) { send_json(res, store.dispatch_history()); });
        get(api + R"(/nodes/(.+))", [this](R req, W res) { send_json(res, store.get_node(NodeId(req.matches[1].str()))); });

        post(api + R"(/assets/([^/]+)/sbom)", [this](R req, W res) {
            send_json(res, store.ingest_sbom(NodeId(req.matches[1].str()), parse_body(req)));
        });
        post(api + "/signals/feed", [this](R req, W res) {
            const bool notify = !req.has_param("notify") || req.get_param_value("notify") != "false";
            send_json(res, store.ingest_feed(parse_body(req), notify));
        });
        post(api + "/slices", [this](R req, W res) { send_json(res, store.ingest_slices(parse_body(req))); });

        get(api + R"(/signals/([^/]+)/blast-radius)", [this](R req, W res) {
            send_json(res, store.blast_radius(NodeId(req.matches[1].str())));
        });
        post(api + R"(/signals/([^/]+)/notify)", [this](R req, W res) {
            send_json(res, store.notify(NodeId(req.matches[1].str()), true));
        });
        get(api + R"(/orgs/([^/]+)/leaderboard)", [this](R req, W res) {
            const NodeId org(req.matches[1].str());
            const auto overrides = parse_overrides(params(req, "override_tier"));
            if (req.has_param("format") && req.get_param_value("format") == "csv") {
                res.set_content(store.leaderboard_csv(org, agg_param(req), overrides), "text/csv");
                return;
            }
            send_json(res, store.leaderboard(org, agg_param(req), overrides));
        });
        get(api + R"(/orgs/([^/]+)/units/leaderboard)", [this](R req, W res) {
            send_json(res, store.unit_leaderboard(NodeId(req.matches[1].str()), agg_param(req)));
        });
        get(api + R"(/assets/([^/]+)/depscores)", [this](R req, W res) {
            send_json(res, store.depscores(NodeId(req.matches[1].str())));
        });
        post(api + R"(/assets/([^/]+)/status-policies/run)", [this](R req, W res) {
            send_json(res, store.run_status_policies(NodeId(req.matches[1].str())));
        });
        post(api + "/policy-checks", [this](R req, W res) {
            std::optional<NodeId> asset;
            if (req.has_param("asset")) {
                asset = NodeId(req.get_param_value("asset"));
            }
            send_json(res, store.run_component_policies(asset));
        });
        post(api + "/gate/pr", [this](R req, W res) { send_json(res, store.gate_pr(parse_body(req))); });
        post(api + R"(/policies/([^/]+)/dry-run)", [this](R req, W res) {
            send_json(res, store.dry_run(req.matches[1].str(), parse_body(req)));
        });

        if (options.ui_dir) {
            if (!http.set_mount_point("/", options.ui_dir->string())) {
                throw Error(ErrorCode::Validation, "ui directory not found: " + options.ui_dir->string());
            }
        }
    }
};

Server::Server(Store& store, ServerOptions options) : impl_(std::make_unique<Impl>(store, std::move(options))) {}

Server::~Server()
{
    stop();
}

void Server::listen(const std::string& host, int port)
{
    log::info("listening on " + host + ":" + std::to_string(port));
    if (!impl_->http.listen(host, port)) {
        throw Error(ErrorCode::StoreUnavailable, "cannot listen on " + host + ":" + std::to_string(port));
    }
}

int Server::start(const std::string& host)
{
    const int port = impl_->http.bind_to_any_port(host);
    if (port < 0) {
        throw Error(ErrorCode::StoreUnavailable, "cannot bind " + host);
    }
    impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
    impl_->http.wait_until_ready();
    return port;
}

void Server::stop()
{
    impl_->http.stop();
    if (impl_->thread.joinable()) {
        impl_->thread.join();
    }
}

} // namespace deptex::service
