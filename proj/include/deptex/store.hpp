#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deptex/dispatch.hpp"
#include "deptex/graph.hpp"
#include "deptex/http.hpp"
#include "deptex/ingest.hpp"
#include "deptex/policy.hpp"
#include "deptex/reachability.hpp"
#include "deptex/risk.hpp"

namespace deptex::service {

using json = nlohmann::json;
using graph::NodeId;

struct AuditRecord {
    std::string timestamp;  // RFC 3339, UTC
    std::string actor;
    std::string action;
    std::string subject;
    json detail;
};

json to_json(const AuditRecord& r);
AuditRecord audit_from_json(const json& doc);

struct StoredPolicy {
    policy::PolicyScript script;
    std::optional<policy::SandboxBudget> budget;  // falls back to the store default
};

struct Config {
    reach::EpdParams epd;
    std::optional<std::string> verifier_url;
    policy::SandboxBudget sandbox;
    dispatch::RetryPolicy retry;

    /// Reads DEPTEX_ALPHA and DEPTEX_VERIFIER_URL.
    static Config from_env();
};

struct SnapshotFile {
    /// Serialized store; `sha256` guards the body when present.
    static json wrap(const json& body);
    static json unwrap(const json& doc);
};

/// The service's state and every domain operation on it. Reads take a shared
/// lock; mutations are serialized through one writer and, when a snapshot
/// path is set, persisted atomically before the call returns.
class Store {
public:
    Store(Config config, http::Transport& transport);
    ~Store();

    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    // ---- persistence ----
    void open(const std::filesystem::path& path);  // loads if the file exists
    void persist() const;
    [[nodiscard]] json snapshot() const;
    void restore(const json& snapshot);

    void set_actor(std::string actor) { actor_ = std::move(actor); }
    [[nodiscard]] const Config& config() const noexcept { return config_; }

    // ---- creation (POST /api/v1/<collection>) ----
    json create_org(const json& body);
    json create_unit(const json& body);
    json create_asset(const json& body);
    json create_actor(const json& body);
    json create_edge(const json& body);
    json create_channel(const json& body);
    json create_tier(const json& body);
    json create_status(const json& body);
    json create_policy(const json& body, bool replace = false);
    json upsert_tier(const json& body);
    json set_asset_tier(const NodeId& asset, const std::string& tier_id);

    // ---- ingestion ----
    json ingest_sbom(const NodeId& asset, const json& sbom);
    /// `notify` runs notification policies for every signal whose match set
    /// changed and queues the resulting webhooks.
    json ingest_feed(const json& feed, bool notify);
    json ingest_slices(const json& body);

    // ---- reads ----
    [[nodiscard]] json get_node(const NodeId& id) const;
    [[nodiscard]] json list_policies() const;
    [[nodiscard]] json list_channels() const;
    [[nodiscard]] json list_tiers() const;
    [[nodiscard]] json list_statuses() const;
    [[nodiscard]] json blast_radius(const NodeId& signal) const;
    [[nodiscard]] json leaderboard(const NodeId& org, risk::AggMode mode, const risk::TierOverrides& overrides) const;
    [[nodiscard]] std::string leaderboard_csv(const NodeId& org, risk::AggMode mode,
                                              const risk::TierOverrides& overrides) const;
    [[nodiscard]] json unit_leaderboard(const NodeId& org, risk::AggMode mode) const;
    [[nodiscard]] json depscores(const NodeId& asset) const;
    [[nodiscard]] json audit_log() const;
    [[nodiscard]] json status_distribution() const;
    [[nodiscard]] json dispatch_history() const;

    // ---- policy evaluation ----
    json gate_pr(const json& request);
    json dry_run(const std::string& policy_id, const json& body);
    json run_status_policies(const NodeId& asset);
    json run_component_policies(const std::optional<NodeId>& asset);
    /// Evaluates notification policies for `signal` and delivers the
    /// dispatches synchronously (tests, CLI) or via the background queue.
    json notify(const NodeId& signal, bool background);

    // ---- bindings (exposed for fixtures and tests) ----
    [[nodiscard]] json pr_binding(const NodeId& asset, const ingest::DependencyDelta& delta, const json& pr_meta) const;
    [[nodiscard]] json status_binding(const NodeId& asset) const;
    [[nodiscard]] json policy_binding(const NodeId& component) const;
    [[nodiscard]] json notification_binding(const NodeId& signal) const;

    void drain_dispatches();

    [[nodiscard]] graph::OrgGraph graph_copy() const;

private:
    struct State;

    json create_node(graph::NodeKind kind, json body, const std::vector<std::pair<std::string, std::string>>& links);
    void audit(const std::string& action, const std::string& subject, json detail);
    void committed();
    void rematch_advisories();
    void rescore(const std::vector<risk::DepscoreKey>& keys);
    void drop_stale_depscores();
    [[nodiscard]] json snapshot_locked() const;
    json notify_locked(const NodeId& signal, std::vector<std::pair<dispatch::ChannelDef, json>>& sends,
                       std::vector<dispatch::DeliveryReport>& unresolved);
    [[nodiscard]] const reach::Verifier& verifier() const;
    [[nodiscard]] policy::SandboxBudget budget_for(const StoredPolicy& p) const;
    [[nodiscard]] std::vector<const StoredPolicy*> policies_in(policy::Context c) const;
    [[nodiscard]] json asset_record(const NodeId& asset) const;
    [[nodiscard]] json tier_record(const std::string& tier_id) const;

    Config config_;
    http::Transport& transport_;
    std::unique_ptr<reach::Verifier> verifier_;
    std::unique_ptr<dispatch::Dispatcher> dispatcher_;
    std::unique_ptr<State> state_;
    std::optional<std::filesystem::path> path_;
    std::string actor_ = "cli";
    mutable std::shared_mutex mutex_;
};

/// Maps an error code to the HTTP status the API answers with.
int http_status_for(ErrorCode code) noexcept;
json error_body(const Error& e);

} // namespace deptex::service

namespace deptex::service {

/// Canonical JSON rendering shared by the API and the CLI.
std::string render(const json& value);

/// Parses "asset:tier" pairs (comma separated, split at the last ':').
risk::TierOverrides parse_overrides(const std::vector<std::string>& specs);

} // namespace deptex::service
