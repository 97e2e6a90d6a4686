#include "deptex/store.hpp"

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>
#include <unistd.h>

#include "deptex/kernels.hpp"
#include "deptex/log.hpp"

namespace deptex::service {

namespace {

constexpr const char* kFormat = "deptex-snapshot";
constexpr int kFormatVersion = 1;

std::string now_rfc3339()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

std::string sha256_hex(const std::string& data)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

const std::string& require_string(const json& body, const char* key)
{
    if (!body.is_object() || !body.contains(key)) {
        throw Error(ErrorCode::MissingField, key);
    }
    const json& v = body.at(key);
    if (!v.is_string() || v.get_ref<const std::string&>().empty()) {
        throw Error(ErrorCode::Validation, std::string(key) + " must be a non-empty string");
    }
    return v.get_ref<const std::string&>();
}

policy::SandboxBudget budget_from_json(const json& doc, const policy::SandboxBudget& defaults)
{
    if (!doc.is_object()) {
        throw Error(ErrorCode::Validation, "budget must be an object");
    }
    policy::SandboxBudget b = defaults;
    for (const auto& [key, value] : doc.items()) {
        if (key == "max_steps" && value.is_number_integer()) {
            b.max_steps = value.get<long long>();
        } else if (key == "max_http_calls" && value.is_number_integer()) {
            b.max_http_calls = value.get<int>();
        } else if (key == "timeout_ms" && value.is_number_integer()) {
            b.timeout_ms = value.get<long long>();
        } else if (key == "http_allowlist" && value.is_array()) {
            b.http_allowlist.clear();
            for (const auto& p : value) {
                if (!p.is_string()) {
                    throw Error(ErrorCode::Validation, "http_allowlist entries must be strings");
                }
                b.http_allowlist.push_back(p.get<std::string>());
            }
        } else {
            throw Error(ErrorCode::InvalidField, "bad budget field '" + key + "'");
        }
    }
    b.validate();
    return b;
}

json budget_to_json(const policy::SandboxBudget& b)
{
    return json{{"max_steps", b.max_steps},
                {"max_http_calls", b.max_http_calls},
                {"timeout_ms", b.timeout_ms},
                {"http_allowlist", b.http_allowlist}};
}

json policy_to_json(const StoredPolicy& p)
{
    json out{{"policy_id", p.script.policy_id},
             {"context", policy::to_string(p.script.context)},
             {"source", p.script.source}};
    if (p.budget) {
        out["budget"] = budget_to_json(*p.budget);
    }
    return out;
}

StoredPolicy policy_from_json(const json& body, const policy::SandboxBudget& defaults)
{
    for (const auto& [key, value] : body.items()) {
        if (key != "policy_id" && key != "context" && key != "source" && key != "budget") {
            throw Error(ErrorCode::InvalidField, "unknown policy field '" + key + "'");
        }
    }
    StoredPolicy p;
    const auto context = policy::parse_context(require_string(body, "context"));
    if (!body.contains("source") || !body.at("source").is_string()) {
        throw Error(ErrorCode::MissingField, "source");
    }
    p.script = policy::PolicyScript::create(require_string(body, "policy_id"), context, body.at("source").get<std::string>());
    if (body.contains("budget") && !body.at("budget").is_null()) {
        p.budget = budget_from_json(body.at("budget"), defaults);
    }
    return p;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep)
{
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) {
            out += sep;
        }
        out += p;
    }
    return out;
}

json failure_json(const Error& e)
{
    json out{{"code", to_string(e.code())}, {"message", e.what()}};
    if (const auto* se = dynamic_cast<const SourceError*>(&e)) {
        out["message"] = se->detail();
        out["line"] = se->line();
        out["column"] = se->column();
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------

struct Store::State {
    graph::OrgGraph graph;
    std::map<std::string, StoredPolicy> policies;
    std::map<std::string, dispatch::ChannelDef> channels;
    std::map<std::string, ingest::VulnFeedEntry> advisories;  // by external id
    std::map<risk::DepscoreKey, reach::SliceReport> slices;
    risk::DepscoreTable depscores;
    std::vector<AuditRecord> audit;
};

json to_json(const AuditRecord& r)
{
    return json{{"timestamp", r.timestamp},
                {"actor", r.actor},
                {"action", r.action},
                {"subject", r.subject},
                {"detail", r.detail}};
}

AuditRecord audit_from_json(const json& doc)
{
    AuditRecord r;
    r.timestamp = doc.at("timestamp").get<std::string>();
    r.actor = doc.at("actor").get<std::string>();
    r.action = doc.at("action").get<std::string>();
    r.subject = doc.at("subject").get<std::string>();
    r.detail = doc.value("detail", json(nullptr));
    return r;
}

Config Config::from_env()
{
    Config c;
    if (const char* alpha = std::getenv("DEPTEX_ALPHA"); alpha != nullptr && *alpha != '\0') {
        char* end = nullptr;
        const double v = std::strtod(alpha, &end);
        if (end == alpha || *end != '\0') {
            throw Error(ErrorCode::Validation, "DEPTEX_ALPHA is not a number: '" + std::string(alpha) + "'");
        }
        c.epd.alpha = v;
        c.epd.validate();
    }
    if (const char* url = std::getenv("DEPTEX_VERIFIER_URL"); url != nullptr && *url != '\0') {
        c.verifier_url = url;
    }
    if (const char* allow = std::getenv("DEPTEX_HTTP_ALLOWLIST"); allow != nullptr) {
        std::stringstream ss(allow);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) {
                c.sandbox.http_allowlist.push_back(item);
            }
        }
    }
    return c;
}

json SnapshotFile::wrap(const json& body)
{
    return json{{"format", kFormat}, {"version", kFormatVersion}, {"sha256", sha256_hex(body.dump())}, {"body", body}};
}

json SnapshotFile::unwrap(const json& doc)
{
    if (!doc.is_object() || doc.value("format", "") != kFormat) {
        throw Error(ErrorCode::CorruptSnapshot, "not a deptex snapshot");
    }
    if (doc.value("version", 0) != kFormatVersion) {
        throw Error(ErrorCode::CorruptSnapshot, "unsupported snapshot version");
    }
    if (!doc.contains("body") || !doc.at("body").is_object()) {
        throw Error(ErrorCode::CorruptSnapshot, "snapshot has no body");
    }
    if (doc.contains("sha256")) {
        if (!doc.at("sha256").is_string() || doc.at("sha256").get<std::string>() != sha256_hex(doc.at("body").dump())) {
            throw Error(ErrorCode::CorruptSnapshot, "checksum mismatch");
        }
    }
    return doc.at("body");
}

Store::Store(Config config, http::Transport& transport)
    : config_(std::move(config)), transport_(transport), state_(std::make_unique<State>())
{
    config_.epd.validate();
    config_.sandbox.validate();
    if (config_.verifier_url) {
        verifier_ = std::make_unique<reach::ExternalVerifier>(*config_.verifier_url, transport_);
    } else {
        verifier_ = std::make_unique<reach::RuleBasedVerifier>();
    }
    dispatcher_ = std::make_unique<dispatch::Dispatcher>(transport_, config_.retry);
}

Store::~Store() = default;

const reach::Verifier& Store::verifier() const
{
    return *verifier_;
}

// ---- persistence -----------------------------------------------------------

json Store::snapshot() const
{
    std::shared_lock lock(mutex_);
    return snapshot_locked();
}

json Store::snapshot_locked() const
{
    const State& s = *state_;
    json body;
    body["graph"] = s.graph.to_json();
    json policies = json::array();
    for (const auto& [id, p] : s.policies) {
        policies.push_back(policy_to_json(p));
    }
    body["policies"] = std::move(policies);
    json channels = json::array();
    for (const auto& [id, c] : s.channels) {
        channels.push_back(dispatch::channel_to_json(c, true));
    }
    body["channels"] = std::move(channels);
    json advisories = json::array();
    for (const auto& [id, a] : s.advisories) {
        advisories.push_back(ingest::serialize_osv_record(a));
    }
    body["advisories"] = std::move(advisories);
    json slices = json::array();
    for (const auto& [key, slice] : s.slices) {
        slices.push_back(reach::slice_to_json(slice));
    }
    body["slices"] = std::move(slices);
    json scores = json::array();
    for (const auto& [key, r] : s.depscores) {
        scores.push_back({{"signal", key.first.str()}, {"asset", key.second.str()}, {"result", reach::to_json(r)}});
    }
    body["depscores"] = std::move(scores);
    json audit = json::array();
    for (const auto& r : s.audit) {
        audit.push_back(to_json(r));
    }
    body["audit"] = std::move(audit);
    return body;
}

void Store::restore(const json& body)
{
    auto next = std::make_unique<State>();
    try {
        next->graph = graph::OrgGraph::from_json(body.at("graph"));
        for (const auto& p : body.value("policies", json::array())) {
            StoredPolicy sp = policy_from_json(p, config_.sandbox);
            next->policies.emplace(sp.script.policy_id, std::move(sp));
        }
        for (const auto& c : body.value("channels", json::array())) {
            auto def = dispatch::channel_from_json(c);
            next->channels.emplace(def.channel_id, std::move(def));
        }
        for (const auto& a : body.value("advisories", json::array())) {
            auto entry = ingest::parse_osv_record(a);
            next->advisories.emplace(entry.external_id, std::move(entry));
        }
        for (const auto& sj : body.value("slices", json::array())) {
            auto slice = reach::parse_slice(sj);
            next->slices.emplace(risk::DepscoreKey{slice.signal_ref, slice.asset_ref}, std::move(slice));
        }
        for (const auto& d : body.value("depscores", json::array())) {
            const NodeId sig(d.at("signal").get<std::string>());
            const NodeId asset(d.at("asset").get<std::string>());
            (void)next->graph.node(sig, graph::NodeKind::Signal);
            (void)next->graph.node(asset, graph::NodeKind::Asset);
            next->depscores.emplace(risk::DepscoreKey{sig, asset}, reach::depscore_from_json(d.at("result")));
        }
        for (const auto& r : body.value("audit", json::array())) {
            next->audit.push_back(audit_from_json(r));
        }
    } catch (const Error& e) {
        throw Error(ErrorCode::CorruptSnapshot, std::string(to_string(e.code())) + ": " + e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorCode::CorruptSnapshot, e.what());
    }
    std::unique_lock lock(mutex_);
    state_ = std::move(next);
}

namespace {

void write_atomically(const std::filesystem::path& path, const std::string& data)
{
    const auto tmp = path.string() + ".tmp";
    FILE* f = std::fopen(tmp.c_str(), "wb");
    if (f == nullptr) {
        throw Error(ErrorCode::StoreUnavailable, "cannot write " + tmp);
    }
    const bool ok = std::fwrite(data.data(), 1, data.size(), f) == data.size() && std::fflush(f) == 0 &&
                    ::fsync(fileno(f)) == 0;
    std::fclose(f);
    if (!ok) {
        std::remove(tmp.c_str());
        throw Error(ErrorCode::StoreUnavailable, "short write to " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::remove(tmp.c_str());
        throw Error(ErrorCode::StoreUnavailable, "cannot replace " + path.string() + ": " + ec.message());
    }
}

} // namespace

void Store::open(const std::filesystem::path& path)
{
    path_ = path;
    if (!std::filesystem::exists(path)) {
        persist();
        return;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::StoreUnavailable, "cannot read " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    json doc = json::parse(buf.str(), nullptr, false);
    if (doc.is_discarded()) {
        throw Error(ErrorCode::CorruptSnapshot, path.string() + " is not valid JSON (truncated?)");
    }
    restore(SnapshotFile::unwrap(doc));
}

void Store::persist() const
{
    if (!path_) {
        return;
    }
    std::shared_lock lock(mutex_);
    write_atomically(*path_, SnapshotFile::wrap(snapshot_locked()).dump(1) + "\n");
}

// Called with the writer lock held.
void Store::committed()
{
    if (path_) {
        write_atomically(*path_, SnapshotFile::wrap(snapshot_locked()).dump(1) + "\n");
    }
}

void Store::audit(const std::string& action, const std::string& subject, json detail)
{
    state_->audit.push_back(AuditRecord{now_rfc3339(), actor_, action, subject, std::move(detail)});
}

graph::OrgGraph Store::graph_copy() const
{
    std::shared_lock lock(mutex_);
    return state_->graph;
}

// ---- creation --------------------------------------------------------------

json Store::create_node(graph::NodeKind kind, json body, const std::vector<std::pair<std::string, std::string>>& links)
{
    if (!body.is_object()) {
        throw Error(ErrorCode::Validation, "request body must be a JSON object");
    }
    // Link fields name parents or targets; they become edges, not node fields.
    struct Link {
        NodeId other;
        graph::EdgeKind kind;
        bool outgoing;
    };
    std::vector<Link> edges;
    std::unique_lock lock(mutex_);
    graph::OrgGraph& g = state_->graph;
    for (const auto& [field, spec] : links) {
        if (!body.contains(field)) {
            continue;
        }
        json value = body.at(field);
        body.erase(field);
        if (value.is_string()) {
            value = json::array({value});
        }
        if (!value.is_array()) {
            throw Error(ErrorCode::Validation, field + " must be a string or a list of strings");
        }
        for (const auto& v : value) {
            if (!v.is_string()) {
                throw Error(ErrorCode::Validation, field + " must be a string or a list of strings");
            }
            const NodeId other(v.get<std::string>());
            if (spec == "org") {
                (void)g.node(other, graph::NodeKind::Org);
                edges.push_back({other, graph::EdgeKind::Contains, false});
            } else if (spec == "unit") {
                (void)g.node(other, graph::NodeKind::Unit);
                edges.push_back({other, graph::EdgeKind::Owns, false});
            } else if (spec == "comp") {
                (void)g.node(other, graph::NodeKind::Comp);
                edges.push_back({other, graph::EdgeKind::Maintains, true});
            }
        }
    }
    const NodeId id = g.add_node(kind, body);
    try {
        for (const auto& l : edges) {
            graph::Edge e;
            e.kind = l.kind;
            e.src = l.outgoing ? id : l.other;
            e.dst = l.outgoing ? l.other : id;
            g.add_edge(std::move(e));
        }
    } catch (...) {
        g.remove_node(id);
        throw;
    }
    json out = graph::node_to_json(g.node(id));
    audit("create_" + std::string(graph::to_string(kind)), id.str(), out);
    committed();
    return out;
}

json Store::create_org(const json& body)
{
    return create_node(graph::NodeKind::Org, body, {});
}

json Store::create_unit(const json& body)
{
    return create_node(graph::NodeKind::Unit, body, {{"org", "org"}});
}

json Store::create_asset(const json& body)
{
    return create_node(graph::NodeKind::Asset, body, {{"unit", "unit"}, {"units", "unit"}});
}

json Store::create_actor(const json& body)
{
    return create_node(graph::NodeKind::Actor, body, {{"maintains", "comp"}});
}

json Store::create_edge(const json& body)
{
    graph::Edge e = graph::edge_from_json(body);
    std::unique_lock lock(mutex_);
    state_->graph.add_edge(e);
    json out = graph::edge_to_json(*state_->graph.find_edge(e.src, e.dst, e.kind));
    audit("create_edge", e.src.str(), out);
    committed();
    return out;
}

json Store::create_channel(const json& body)
{
    auto c = dispatch::channel_from_json(body);
    std::unique_lock lock(mutex_);
    if (state_->channels.contains(c.channel_id)) {
        throw Error(ErrorCode::DuplicateId, "channel '" + c.channel_id + "' already exists");
    }
    json out = dispatch::channel_to_json(c);
    state_->channels.emplace(c.channel_id, std::move(c));
    audit("create_channel", out["channel_id"], out);
    committed();
    return out;
}

json Store::create_tier(const json& body)
{
    auto t = graph::tier_from_json(body);
    std::unique_lock lock(mutex_);
    state_->graph.add_tier(t);
    json out = graph::tier_to_json(t);
    audit("create_tier", t.tier_id, out);
    committed();
    return out;
}

json Store::upsert_tier(const json& body)
{
    auto t = graph::tier_from_json(body);
    std::unique_lock lock(mutex_);
    state_->graph.upsert_tier(t);
    json out = graph::tier_to_json(t);
    audit("upsert_tier", t.tier_id, out);
    committed();
    return out;
}

json Store::create_status(const json& body)
{
    auto s = graph::status_from_json(body);
    std::unique_lock lock(mutex_);
    state_->graph.add_status(s);
    json out = graph::status_to_json(s);
    audit("create_status", s.status_id, out);
    committed();
    return out;
}

json Store::create_policy(const json& body, bool replace)
{
    if (!body.is_object()) {
        throw Error(ErrorCode::Validation, "request body must be a JSON object");
    }
    StoredPolicy p = policy_from_json(body, config_.sandbox);
    std::unique_lock lock(mutex_);
    const std::string id = p.script.policy_id;
    if (!replace && state_->policies.contains(id)) {
        throw Error(ErrorCode::DuplicateId, "policy '" + id + "' already exists");
    }
    json out = policy_to_json(p);
    state_->policies.insert_or_assign(id, std::move(p));
    audit(replace ? "replace_policy" : "create_policy", id,
          {{"context", out["context"]}, {"source_sha256", sha256_hex(out["source"].get<std::string>())}});
    committed();
    return out;
}

json Store::set_asset_tier(const NodeId& asset, const std::string& tier_id)
{
    std::unique_lock lock(mutex_);
    const std::string before = state_->graph.node(asset, graph::NodeKind::Asset).asset().tier;
    state_->graph.set_asset_tier(asset, tier_id);
    audit("set_tier", asset.str(), {{"from", before}, {"to", tier_id}});
    committed();
    return graph::node_to_json(state_->graph.node(asset));
}

// ---- ingestion -------------------------------------------------------------

void Store::rematch_advisories()
{
    std::vector<ingest::VulnFeedEntry> entries;
    for (const auto& [id, e] : state_->advisories) {
        entries.push_back(e);
    }
    if (!entries.empty()) {
        (void)ingest::match_vulnerabilities(state_->graph, entries);
    }
}

void Store::drop_stale_depscores()
{
    const auto& g = state_->graph;
    auto stale = [&](const risk::DepscoreKey& k) {
        const auto* s = g.find(k.first);
        const auto* a = g.find(k.second);
        return s == nullptr || s->kind() != graph::NodeKind::Signal || a == nullptr ||
               a->kind() != graph::NodeKind::Asset;
    };
    std::erase_if(state_->slices, [&](const auto& kv) { return stale(kv.first); });
    // A depscore only stands while its asset is in the signal's blast radius;
    // the slice is kept so the score returns if the dependency does.
    std::map<NodeId, graph::NodeSet> affected;
    auto in_blast = [&](const risk::DepscoreKey& k) {
        auto it = affected.find(k.first);
        if (it == affected.end()) {
            it = affected.emplace(k.first, g.affected_assets(k.first)).first;
        }
        return it->second.contains(k.second);
    };
    std::erase_if(state_->depscores, [&](const auto& kv) { return stale(kv.first) || !in_blast(kv.first); });
    std::vector<risk::DepscoreKey> revived;
    for (const auto& [k, slice] : state_->slices) {
        if (!state_->depscores.contains(k) && in_blast(k)) {
            revived.push_back(k);
        }
    }
    if (!revived.empty()) {
        rescore(revived);
    }
}

void Store::rescore(const std::vector<risk::DepscoreKey>& keys)
{
    std::vector<kernels::ScoreJob> jobs;
    std::vector<risk::DepscoreKey> used;
    for (const auto& k : keys) {
        auto it = state_->slices.find(k);
        const auto* sig = state_->graph.find(k.first);
        if (it == state_->slices.end() || sig == nullptr) {
            continue;
        }
        jobs.push_back({sig, &it->second});
        used.push_back(k);
    }
    const auto results = kernels::score_slices(jobs, config_.epd, verifier());
    for (std::size_t i = 0; i < used.size(); ++i) {
        state_->depscores.insert_or_assign(used[i], results[i]);
    }
}

json Store::ingest_sbom(const NodeId& asset, const json& sbom)
{
    const auto doc = ingest::parse_sbom(sbom);
    std::unique_lock lock(mutex_);
    (void)state_->graph.node(asset, graph::NodeKind::Asset);
    const auto result = ingest::apply_sbom(state_->graph, doc, asset);
    rematch_advisories();
    drop_stale_depscores();
    json out{{"added", result.added}, {"removed", result.removed}};
    audit("ingest_sbom", asset.str(), {{"added", result.added}, {"removed", result.removed},
                                       {"components", doc.components.size()}});
    committed();
    return out;
}

json Store::ingest_feed(const json& feed, bool notify)
{
    const auto entries = ingest::parse_vuln_feed(feed);
    std::unique_lock lock(mutex_);
    State& s = *state_;

    std::map<NodeId, graph::NodeSet> before;
    for (const auto& e : entries) {
        const NodeId id(e.external_id);
        if (const auto* n = s.graph.find(id); n != nullptr && n->kind() == graph::NodeKind::Signal) {
            before[id] = s.graph.affected_components(id);
        }
    }
    for (const auto& e : entries) {
        s.advisories.insert_or_assign(e.external_id, e);
    }
    const auto matches = ingest::match_vulnerabilities(s.graph, entries);
    drop_stale_depscores();

    std::vector<risk::DepscoreKey> keys;
    for (const auto& [k, slice] : s.slices) {
        for (const auto& e : entries) {
            if (k.first.str() == e.external_id) {
                keys.push_back(k);
            }
        }
    }
    rescore(keys);

    json signals = json::array();
    std::vector<NodeId> changed;
    for (const auto& m : matches) {
        signals.push_back({{"signal", m.signal.str()}, {"components", graph::to_json(m.components)}});
        auto it = before.find(m.signal);
        if (it == before.end() || it->second != m.components) {
            changed.push_back(m.signal);
        }
    }
    json unmatched = json::array();
    for (const auto& e : entries) {
        if (std::none_of(matches.begin(), matches.end(), [&](const auto& m) { return m.signal.str() == e.external_id; })) {
            unmatched.push_back(e.external_id);
        }
    }
    audit("ingest_feed", "signals", {{"entries", entries.size()}, {"matched", matches.size()}});

    json out{{"signals", std::move(signals)}, {"unmatched", std::move(unmatched)}};
    std::vector<std::pair<dispatch::ChannelDef, json>> sends;
    if (notify) {
        json notices = json::array();
        std::vector<dispatch::DeliveryReport> unresolved;
        for (const auto& sig : changed) {
            notices.push_back(notify_locked(sig, sends, unresolved));
        }
        out["notifications"] = std::move(notices);
    }
    committed();
    lock.unlock();
    if (!sends.empty()) {
        dispatcher_->enqueue(std::move(sends));
    }
    return out;
}

json Store::ingest_slices(const json& body)
{
    json list = body;
    if (body.is_object() && body.contains("slices")) {
        list = body.at("slices");
    } else if (body.is_object()) {
        list = json::array({body});
    }
    if (!list.is_array()) {
        throw Error(ErrorCode::MalformedDocument, "expected a slice object or a list of slices");
    }
    std::vector<reach::SliceReport> parsed;
    for (const auto& sj : list) {
        parsed.push_back(reach::parse_slice(sj));
    }
    std::unique_lock lock(mutex_);
    State& s = *state_;
    for (const auto& slice : parsed) {
        (void)s.graph.node(slice.signal_ref, graph::NodeKind::Signal);
        (void)s.graph.node(slice.asset_ref, graph::NodeKind::Asset);
    }
    std::vector<risk::DepscoreKey> keys;
    for (auto& slice : parsed) {
        risk::DepscoreKey k{slice.signal_ref, slice.asset_ref};
        s.slices.insert_or_assign(k, std::move(slice));
        keys.push_back(k);
    }
    rescore(keys);
    // same rule as after an SBOM change: no depscore outside the blast radius
    drop_stale_depscores();
    json out = json::array();
    for (const auto& k : keys) {
        json row{{"signal", k.first.str()}, {"asset", k.second.str()}};
        if (auto it = s.depscores.find(k); it != s.depscores.end()) {
            row.update(reach::to_json(it->second));
        } else {
            row["depscore"] = nullptr;
            row["in_blast_radius"] = false;
        }
        out.push_back(std::move(row));
    }
    audit("ingest_slices", "slices", {{"count", keys.size()}});
    committed();
    return out;
}

// ---- reads -----------------------------------------------------------------

json Store::asset_record(const NodeId& asset) const
{
    const auto& g = state_->graph;
    const auto& n = g.node(asset, graph::NodeKind::Asset);
    return json{{"id", n.id.str()},
                {"name", n.name},
                {"tier", n.asset().tier},
                {"compliance_status", n.asset().compliance_status},
                {"exposure", n.asset().exposure},
                {"critical", n.asset().critical},
                {"attrs", n.attrs},
                {"units", graph::to_json(g.owners(asset))},
                {"ownership_gap", g.ownership_gap(asset)}};
}

json Store::tier_record(const std::string& tier_id) const
{
    return graph::tier_to_json(state_->graph.tier(tier_id));
}

json Store::get_node(const NodeId& id) const
{
    std::shared_lock lock(mutex_);
    const auto& n = state_->graph.node(id);
    json out = graph::node_to_json(n);
    if (n.kind() == graph::NodeKind::Asset) {
        out["units"] = graph::to_json(state_->graph.owners(id));
        out["ownership_gap"] = state_->graph.ownership_gap(id);
    }
    return out;
}

json Store::list_policies() const
{
    std::shared_lock lock(mutex_);
    json out = json::array();
    for (const auto& [id, p] : state_->policies) {
        out.push_back(policy_to_json(p));
    }
    return out;
}

json Store::list_channels() const
{
    std::shared_lock lock(mutex_);
    json out = json::array();
    for (const auto& [id, c] : state_->channels) {
        out.push_back(dispatch::channel_to_json(c));
    }
    return out;
}

json Store::list_tiers() const
{
    std::shared_lock lock(mutex_);
    json out = json::array();
    for (const auto& [id, t] : state_->graph.tiers()) {
        out.push_back(graph::tier_to_json(t));
    }
    return out;
}

json Store::list_statuses() const
{
    std::shared_lock lock(mutex_);
    json out = json::array();
    for (const auto& [id, s] : state_->graph.statuses()) {
        out.push_back(graph::status_to_json(s));
    }
    return out;
}

json Store::blast_radius(const NodeId& signal) const
{
    std::shared_lock lock(mutex_);
    const auto& g = state_->graph;
    const auto& sig = g.node(signal, graph::NodeKind::Signal);
    const risk::RiskEngine engine(g, &state_->depscores);
    const auto metrics = g.governance_metrics(signal);

    json assets = json::array();
    for (const auto& c : engine.asset_contributions(signal)) {
        const auto& n = g.node(c.asset);
        assets.push_back({{"asset", c.asset.str()},
                          {"name", n.name},
                          {"tier", n.asset().tier},
                          {"units", graph::to_json(g.owners(c.asset))},
                          {"ownership_gap", g.ownership_gap(c.asset)},
                          {"contrib", c.contrib},
                          {"depscore", c.depscore ? json(*c.depscore) : json(nullptr)}});
    }
    const graph::NodeSet affected = g.affected_assets(signal);
    json units = json::array();
    for (const auto& u : g.affected_units(signal)) {
        graph::NodeSet owned;
        for (const auto& a : g.owned_assets(u)) {
            if (affected.contains(a)) {
                owned.insert(a);
            }
        }
        units.push_back({{"unit", u.str()}, {"name", g.node(u).name}, {"assets", graph::to_json(owned)}});
    }
    return json{{"signal", signal.str()},
                {"external_id", sig.signal().external_id},
                {"severity", sig.signal().severity},
                {"components", graph::to_json(g.affected_components(signal))},
                {"assets", std::move(assets)},
                {"units", std::move(units)},
                {"asset_count", metrics.asset_count},
                {"unit_count", metrics.unit_count},
                {"gap_assets", graph::to_json(metrics.gap_assets)}};
}

json Store::leaderboard(const NodeId& org, risk::AggMode mode, const risk::TierOverrides& overrides) const
{
    std::shared_lock lock(mutex_);
    (void)state_->graph.node(org, graph::NodeKind::Org);
    const risk::RiskEngine engine(state_->graph, &state_->depscores, overrides);
    return risk::leaderboard_to_json(engine.leaderboard(org, mode));
}

std::string Store::leaderboard_csv(const NodeId& org, risk::AggMode mode, const risk::TierOverrides& overrides) const
{
    std::shared_lock lock(mutex_);
    (void)state_->graph.node(org, graph::NodeKind::Org);
    const risk::RiskEngine engine(state_->graph, &state_->depscores, overrides);
    return risk::leaderboard_to_csv(engine.leaderboard(org, mode));
}

json Store::unit_leaderboard(const NodeId& org, risk::AggMode mode) const
{
    std::shared_lock lock(mutex_);
    (void)state_->graph.node(org, graph::NodeKind::Org);
    const risk::RiskEngine engine(state_->graph, &state_->depscores);
    return risk::unit_leaderboard_to_json(engine.unit_leaderboard(org, mode));
}

json Store::depscores(const NodeId& asset) const
{
    std::shared_lock lock(mutex_);
    const auto& g = state_->graph;
    (void)g.node(asset, graph::NodeKind::Asset);
    std::vector<std::pair<risk::DepscoreKey, const reach::DepscoreResult*>> rows;
    for (const auto& [k, r] : state_->depscores) {
        if (k.second == asset) {
            rows.emplace_back(k, &r);
        }
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.second->depscore > b.second->depscore; });
    json out = json::array();
    for (const auto& [k, r] : rows) {
        json row{{"signal", k.first.str()}, {"external_id", g.node(k.first).signal().external_id}};
        row.update(reach::to_json(*r));
        out.push_back(std::move(row));
    }
    return out;
}

json Store::audit_log() const
{
    std::shared_lock lock(mutex_);
    json out = json::array();
    for (const auto& r : state_->audit) {
        out.push_back(to_json(r));
    }
    return out;
}

json Store::status_distribution() const
{
    std::shared_lock lock(mutex_);
    json out = json::object();
    for (const auto& [id, s] : state_->graph.statuses()) {
        out[id] = 0;
    }
    for (const auto& a : state_->graph.nodes_of_kind(graph::NodeKind::Asset)) {
        const auto& status = state_->graph.node(a).asset().compliance_status;
        out[status] = out.value(status, 0) + 1;
    }
    return out;
}

json Store::dispatch_history() const
{
    json out = json::array();
    for (const auto& r : dispatcher_->history()) {
        out.push_back(dispatch::to_json(r));
    }
    return out;
}

void Store::drain_dispatches()
{
    dispatcher_->drain();
}

// ---- bindings --------------------------------------------------------------

json Store::pr_binding(const NodeId& asset, const ingest::DependencyDelta& delta, const json& pr_meta) const
{
    const json rec = asset_record(asset);
    return json{{"asset", rec},
                {"delta", ingest::delta_to_json(delta)},
                {"tier", tier_record(rec["tier"].get<std::string>())},
                {"pr", pr_meta.is_object() ? pr_meta : json::object()}};
}

json Store::status_binding(const NodeId& asset) const
{
    const auto& g = state_->graph;
    const json rec = asset_record(asset);
    const risk::RiskEngine engine(g, &state_->depscores);
    int signal_count = 0;
    int reachable = 0;
    double max_severity = 0.0;
    double total_contrib = 0.0;
    std::optional<int> max_depscore;
    for (const auto& s : g.nodes_of_kind(graph::NodeKind::Signal)) {
        if (!g.affected_assets(s).contains(asset)) {
            continue;
        }
        ++signal_count;
        max_severity = std::max(max_severity, g.node(s).signal().severity);
        total_contrib += engine.contrib(s, asset);
        if (auto it = state_->depscores.find({s, asset}); it != state_->depscores.end()) {
            max_depscore = std::max(max_depscore.value_or(0), it->second.depscore);
            reachable += it->second.reachable ? 1 : 0;
        }
    }
    const bool gap = g.ownership_gap(asset);
    return json{{"asset", rec},
                {"tier", tier_record(rec["tier"].get<std::string>())},
                {"attrs", rec["attrs"]},
                {"current_status", rec["compliance_status"]},
                {"risk_summary",
                 {{"signal_count", signal_count},
                  {"reachable_signals", reachable},
                  {"max_severity", max_severity},
                  {"max_depscore", max_depscore ? json(*max_depscore) : json(nullptr)},
                  {"total_contrib", total_contrib},
                  {"ownership_gap", gap},
                  {"gap_assets", gap ? 1 : 0}}}};
}

json Store::policy_binding(const NodeId& component) const
{
    const auto& g = state_->graph;
    const auto& n = g.node(component, graph::NodeKind::Comp);
    json maintainers = json::array();
    for (const auto* e : g.in_edges(component, graph::EdgeKind::Maintains)) {
        maintainers.push_back(e->src.str());
    }
    std::size_t dependents = g.in_edges(component, graph::EdgeKind::DependsOn).size();
    return json{{"component",
                 {{"id", n.id.str()},
                  {"purl", n.component().purl},
                  {"name", n.name},
                  {"version", n.component().version},
                  {"licenses", n.component().licenses},
                  {"maintainer_count", maintainers.size()},
                  {"maintainers", maintainers},
                  {"dependents", dependents},
                  {"attrs", n.attrs}}}};
}

json Store::notification_binding(const NodeId& signal) const
{
    const auto& g = state_->graph;
    const auto& sig = g.node(signal, graph::NodeKind::Signal);
    const auto metrics = g.governance_metrics(signal);
    const risk::RiskEngine engine(g, &state_->depscores);
    json assets = json::array();
    for (const auto& a : g.affected_assets(signal)) {
        const auto& n = g.node(a);
        const auto it = state_->depscores.find({signal, a});
        const bool scored = it != state_->depscores.end();
        assets.push_back({{"asset", a.str()},
                          {"name", n.name},
                          {"tier", n.asset().tier},
                          {"importance", g.tier(n.asset().tier).importance},
                          {"critical", n.asset().critical},
                          {"ownership_gap", g.ownership_gap(a)},
                          {"units", graph::to_json(g.owners(a))},
                          {"contrib", engine.contrib(signal, a)},
                          {"depscore", scored ? json(it->second.depscore) : json(nullptr)},
                          {"epd", scored ? json(it->second.epd) : json(nullptr)},
                          {"reachable", scored ? json(it->second.reachable) : json(nullptr)}});
    }
    return json{{"signal",
                 {{"id", signal.str()},
                  {"external_id", sig.signal().external_id},
                  {"severity", sig.signal().severity},
                  {"confidence", sig.signal().confidence},
                  {"description", sig.signal().description}}},
                {"blast",
                 {{"asset_count", metrics.asset_count},
                  {"unit_count", metrics.unit_count},
                  {"gap_assets", metrics.gap_assets.size()},
                  {"gap_asset_ids", graph::to_json(metrics.gap_assets)}}},
                {"assets", std::move(assets)}};
}

// ---- policy evaluation -----------------------------------------------------

policy::SandboxBudget Store::budget_for(const StoredPolicy& p) const
{
    return p.budget.value_or(config_.sandbox);
}

std::vector<const StoredPolicy*> Store::policies_in(policy::Context c) const
{
    std::vector<const StoredPolicy*> out;
    for (const auto& [id, p] : state_->policies) {
        if (p.script.context == c) {
            out.push_back(&p);
        }
    }
    return out;
}

json Store::gate_pr(const json& request)
{
    if (!request.is_object()) {
        throw Error(ErrorCode::Validation, "gate request must be a JSON object");
    }
    const NodeId asset(require_string(request, "asset_ref"));
    for (const char* key : {"base_sbom", "head_sbom"}) {
        if (!request.contains(key)) {
            throw Error(ErrorCode::MissingField, key);
        }
    }
    const auto base = ingest::parse_sbom(request.at("base_sbom"));
    const auto head = ingest::parse_sbom(request.at("head_sbom"));
    const auto delta = ingest::dependency_delta(base, head);

    json result;
    {
        std::shared_lock lock(mutex_);
        const json binding = pr_binding(asset, delta, request.value("pr_meta", json::object()));
        const auto policies = policies_in(policy::Context::Pr);

        json evaluations = json::array();
        std::vector<std::string> allow_comments;
        std::vector<std::string> block_comments;
        for (const auto* p : policies) {
            json ev{{"policy_id", p->script.policy_id}};
            try {
                const auto outcome = policy::evaluate(p->script, {policy::Context::Pr, binding}, budget_for(*p), transport_);
                const auto& pr = std::get<policy::PrOutcome>(outcome.value);
                const bool allow = pr.decision == policy::Decision::Allow;
                ev["decision"] = allow ? "allow" : "block";
                ev["comment"] = pr.comment;
                if (!pr.comment.empty()) {
                    (allow ? allow_comments : block_comments).push_back(pr.comment);
                }
            } catch (const Error& e) {
                // Fail closed: a broken or verdict-less policy blocks the PR.
                ev["decision"] = "block";
                const std::string msg = "policy '" + p->script.policy_id + "' failed: " +
                                        std::string(to_string(e.code())) + ": " + e.what();
                ev["comment"] = msg;
                ev["error"] = failure_json(e);
                block_comments.push_back(msg);
            }
            evaluations.push_back(std::move(ev));
        }
        const bool blocked = std::any_of(evaluations.begin(), evaluations.end(),
                                         [](const json& ev) { return ev["decision"] == "block"; });
        result["decision"] = blocked ? "block" : "allow";
        if (policies.empty()) {
            result["comment"] = "no pr policies configured";
        } else {
            result["comment"] = join(blocked ? block_comments : allow_comments, "\n");
        }
        result["evaluations"] = std::move(evaluations);
        result["delta"] = binding["delta"];
    }
    std::unique_lock lock(mutex_);
    json detail{{"decision", result["decision"]}, {"pr", request.value("pr_meta", json::object())}};
    json evs = json::array();
    for (const auto& ev : result["evaluations"]) {
        evs.push_back({{"policy_id", ev["policy_id"]}, {"decision", ev["decision"]}});
    }
    detail["evaluations"] = std::move(evs);
    audit("gate_pr", asset.str(), std::move(detail));
    committed();
    return result;
}

json Store::dry_run(const std::string& policy_id, const json& body)
{
    if (!body.is_object()) {
        throw Error(ErrorCode::Validation, "request body must be a JSON object");
    }
    std::shared_lock lock(mutex_);
    std::optional<StoredPolicy> adhoc;
    const StoredPolicy* p = nullptr;
    if (body.contains("source")) {
        json spec{{"policy_id", policy_id}, {"source", body.at("source")}};
        if (body.contains("context")) {
            spec["context"] = body.at("context");
        } else if (auto it = state_->policies.find(policy_id); it != state_->policies.end()) {
            spec["context"] = policy::to_string(it->second.script.context);
        } else {
            throw Error(ErrorCode::MissingField, "context");
        }
        if (body.contains("budget")) {
            spec["budget"] = body.at("budget");
        }
        adhoc = policy_from_json(spec, config_.sandbox);
        p = &*adhoc;
    } else {
        auto it = state_->policies.find(policy_id);
        if (it == state_->policies.end()) {
            throw Error(ErrorCode::NotFound, "policy '" + policy_id + "' not found");
        }
        p = &it->second;
    }

    const auto ctx = p->script.context;
    json binding;
    if (body.contains("binding")) {
        binding = body.at("binding");
    } else if (ctx == policy::Context::Pr && body.contains("head_sbom")) {
        // same request shape as the gate
        const NodeId asset(require_string(body, "asset_ref"));
        const auto head = ingest::parse_sbom(body.at("head_sbom"));
        const auto base = body.contains("base_sbom") ? ingest::parse_sbom(body.at("base_sbom")) : ingest::SbomDocument{};
        binding = pr_binding(asset, ingest::dependency_delta(base, head), body.value("pr_meta", json::object()));
    } else if (body.contains("subject")) {
        const NodeId subject(body.at("subject").get<std::string>());
        switch (ctx) {
        case policy::Context::Status: binding = status_binding(subject); break;
        case policy::Context::Policy: binding = policy_binding(subject); break;
        case policy::Context::Pr: binding = pr_binding(subject, {}, json::object()); break;
        case policy::Context::Notification: binding = notification_binding(subject); break;
        }
    } else {
        throw Error(ErrorCode::MissingField, "binding");
    }
    const auto run = policy::dry_run(p->script, {ctx, binding}, budget_for(*p), transport_);
    json out = policy::to_json(run);
    out["policy_id"] = policy_id;
    out["context"] = policy::to_string(ctx);
    return out;
}

json Store::run_status_policies(const NodeId& asset)
{
    std::unique_lock lock(mutex_);
    auto& g = state_->graph;
    const std::string current = g.node(asset, graph::NodeKind::Asset).asset().compliance_status;
    const json binding = status_binding(asset);

    json evaluations = json::array();
    std::optional<std::pair<std::string, std::string>> winner;  // policy, target
    for (const auto* p : policies_in(policy::Context::Status)) {
        json ev{{"policy_id", p->script.policy_id}};
        try {
            const auto outcome =
                policy::evaluate(p->script, {policy::Context::Status, binding}, budget_for(*p), transport_);
            const auto& st = std::get<policy::StatusOutcome>(outcome.value);
            ev["transition_to"] = st.transition_to ? json(*st.transition_to) : json(nullptr);
            if (st.transition_to && !winner) {
                winner.emplace(p->script.policy_id, *st.transition_to);
            }
        } catch (const Error& e) {
            ev["error"] = failure_json(e);
        }
        audit("status_policy_eval", asset.str(), ev);
        evaluations.push_back(std::move(ev));
    }

    json out{{"asset", asset.str()}, {"from", current}, {"evaluations", evaluations}, {"transition", nullptr}};
    if (winner) {
        if (!g.has_status(winner->second)) {
            committed();
            throw Error(ErrorCode::UnknownStatus, "policy '" + winner->first + "' targets unknown status '" +
                                                      winner->second + "'");
        }
        g.set_compliance_status(asset, winner->second);
        json t{{"policy_id", winner->first}, {"from", current}, {"to", winner->second}};
        audit("status_transition", asset.str(), t);
        out["transition"] = std::move(t);
    }
    committed();
    return out;
}

json Store::run_component_policies(const std::optional<NodeId>& asset)
{
    std::unique_lock lock(mutex_);
    const auto& g = state_->graph;
    std::vector<NodeId> comps;
    if (asset) {
        (void)g.node(*asset, graph::NodeKind::Asset);
        for (const auto* e : g.out_edges(*asset, graph::EdgeKind::DependsOn)) {
            comps.push_back(e->dst);
        }
    } else {
        comps = g.nodes_of_kind(graph::NodeKind::Comp);
    }
    json results = json::array();
    std::size_t total = 0;
    for (const auto* p : policies_in(policy::Context::Policy)) {
        for (const auto& c : comps) {
            json row{{"policy_id", p->script.policy_id}, {"component", c.str()}};
            try {
                const auto outcome =
                    policy::evaluate(p->script, {policy::Context::Policy, policy_binding(c)}, budget_for(*p), transport_);
                const auto& pc = std::get<policy::PolicyCheckOutcome>(outcome.value);
                row["pass"] = pc.pass;
                row["violations"] = pc.violations;
                total += pc.violations.size();
            } catch (const Error& e) {
                row["pass"] = false;
                row["violations"] = json::array();
                row["error"] = failure_json(e);
            }
            results.push_back(std::move(row));
        }
    }
    json out{{"results", std::move(results)}, {"violation_count", total}};
    audit("component_policy_run", asset ? asset->str() : std::string("*"),
          {{"components", comps.size()}, {"violations", total}});
    committed();
    return out;
}

json Store::notify_locked(const NodeId& signal, std::vector<std::pair<dispatch::ChannelDef, json>>& sends,
                          std::vector<dispatch::DeliveryReport>& unresolved)
{
    const auto& g = state_->graph;
    const auto& sig = g.node(signal, graph::NodeKind::Signal);
    const json binding = notification_binding(signal);

    json evaluations = json::array();
    json dispatches = json::array();
    for (const auto* p : policies_in(policy::Context::Notification)) {
        json ev{{"policy_id", p->script.policy_id}};
        try {
            const auto outcome =
                policy::evaluate(p->script, {policy::Context::Notification, binding}, budget_for(*p), transport_);
            json mine = json::array();
            for (const auto& d : std::get<policy::NotificationOutcome>(outcome.value).dispatches) {
                // Normalize whatever the script passed into the webhook envelope.
                json payload{{"event", "signal.alert"},
                             {"signal", sig.signal().external_id.empty() ? signal.str() : sig.signal().external_id},
                             {"asset", nullptr},
                             {"depscore", nullptr},
                             {"tier", nullptr}};
                if (d.payload.is_object()) {
                    for (const char* k : {"event", "asset", "depscore", "tier"}) {
                        if (d.payload.contains(k)) {
                            payload[k] = d.payload.at(k);
                        }
                    }
                } else if (d.payload.is_string()) {
                    payload["asset"] = d.payload;
                }
                if (payload["asset"].is_string()) {
                    const NodeId a(payload["asset"].get<std::string>());
                    if (const auto* n = g.find(a); n != nullptr && n->kind() == graph::NodeKind::Asset) {
                        if (payload["tier"].is_null()) {
                            payload["tier"] = n->asset().tier;
                        }
                        if (payload["depscore"].is_null()) {
                            if (auto it = state_->depscores.find({signal, a}); it != state_->depscores.end()) {
                                payload["depscore"] = it->second.depscore;
                            }
                        }
                    }
                }
                json entry{{"channel_id", d.channel_id}, {"payload", payload}};
                if (auto it = state_->channels.find(d.channel_id); it != state_->channels.end()) {
                    sends.emplace_back(it->second, payload);
                } else {
                    entry["error"] = "UnknownChannel";
                    unresolved.push_back(
                        {d.channel_id, "", "failed", 0, 0, "unknown channel '" + d.channel_id + "'"});
                }
                mine.push_back(entry);
                dispatches.push_back(std::move(entry));
            }
            ev["dispatches"] = std::move(mine);
        } catch (const Error& e) {
            ev["error"] = failure_json(e);
        }
        evaluations.push_back(std::move(ev));
    }
    audit("notify", signal.str(), {{"evaluations", evaluations}});
    return json{{"signal", signal.str()}, {"evaluations", std::move(evaluations)}, {"dispatches", std::move(dispatches)}};
}

json Store::notify(const NodeId& signal, bool background)
{
    std::vector<std::pair<dispatch::ChannelDef, json>> sends;
    std::vector<dispatch::DeliveryReport> unresolved;
    json out;
    {
        std::unique_lock lock(mutex_);
        out = notify_locked(signal, sends, unresolved);
        committed();
    }
    json reports = json::array();
    for (const auto& r : unresolved) {
        reports.push_back(dispatch::to_json(r));
    }
    if (background) {
        dispatcher_->enqueue(std::move(sends));
        out["queued"] = true;
    } else {
        for (const auto& [channel, payload] : sends) {
            reports.push_back(dispatch::to_json(dispatcher_->deliver(channel, payload)));
        }
        out["queued"] = false;
    }
    out["reports"] = std::move(reports);
    return out;
}

// ---- errors ----------------------------------------------------------------

int http_status_for(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::NotFound:
    case ErrorCode::UnknownTier:
    case ErrorCode::UnknownStatus:
    case ErrorCode::UnknownChannel:
    case ErrorCode::MissingEndpoint: return 404;
    case ErrorCode::DuplicateId:
    case ErrorCode::DuplicateEdge: return 409;
    case ErrorCode::WrongKind:
    case ErrorCode::TypeViolation:
    case ErrorCode::SyntaxError:
    case ErrorCode::RuntimeTypeError:
    case ErrorCode::MissingVerdict:
    case ErrorCode::BudgetExceeded:
    case ErrorCode::HttpDenied:
    case ErrorCode::SliceMismatch:
    case ErrorCode::UnknownEntry: return 422;
    case ErrorCode::Unauthorized: return 401;
    case ErrorCode::HttpFailure: return 502;
    case ErrorCode::StoreUnavailable:
    case ErrorCode::CorruptSnapshot: return 503;
    case ErrorCode::InvalidField:
    case ErrorCode::MalformedDocument:
    case ErrorCode::MissingField:
    case ErrorCode::InvariantViolation:
    case ErrorCode::MalformedRange:
    case ErrorCode::RangeViolation:
    case ErrorCode::Validation: return 400;
    }
    return 500;
}

json error_body(const Error& e)
{
    return json{{"error", failure_json(e)}};
}

} // namespace deptex::service

namespace deptex::service {

std::string render(const json& value)
{
    return value.dump(2) + "\n";
}

risk::TierOverrides parse_overrides(const std::vector<std::string>& specs)
{
    risk::TierOverrides out;
    for (const auto& spec : specs) {
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) {
                continue;
            }
            const auto colon = item.rfind(':');
            if (colon == std::string::npos || colon == 0 || colon + 1 == item.size()) {
                throw Error(ErrorCode::Validation, "override_tier expects asset:tier, got '" + item + "'");
            }
            out[NodeId(item.substr(0, colon))] = item.substr(colon + 1);
        }
    }
    return out;
}

} // namespace deptex::service
