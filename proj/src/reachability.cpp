#include "deptex/reachability.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <unordered_map>

#include "deptex/error.hpp"
#include "deptex/log.hpp"

namespace deptex::reach {

namespace {

[[noreturn]] void malformed(const std::string& msg)
{
    throw Error(ErrorCode::MalformedDocument, msg);
}

[[noreturn]] void broken(const std::string& msg)
{
    throw Error(ErrorCode::InvariantViolation, msg);
}

const json& required(const json& obj, const char* key, const std::string& path)
{
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw Error(ErrorCode::MissingField, path + key);
    }
    return *it;
}

std::string required_string(const json& obj, const char* key, const std::string& path)
{
    const json& v = required(obj, key, path);
    if (!v.is_string()) {
        malformed(path + key + " must be a string");
    }
    return v.get<std::string>();
}

std::string fmt2(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

/// Dense adjacency view of a slice.
struct SliceIndex {
    std::unordered_map<std::string_view, int> ids;
    std::vector<std::vector<int>> fwd;
    std::vector<std::vector<int>> rev;
    int sink = -1;

    explicit SliceIndex(const SliceReport& s)
        : fwd(s.functions.size()), rev(s.functions.size())
    {
        for (std::size_t i = 0; i < s.functions.size(); ++i) {
            ids.emplace(s.functions[i].fn_id, static_cast<int>(i));
        }
        for (const auto& e : s.edges) {
            const int a = ids.at(e.from);
            const int b = ids.at(e.to);
            fwd[a].push_back(b);
            rev[b].push_back(a);
        }
        sink = ids.at(s.sink);
    }

    [[nodiscard]] int index(std::string_view fn_id) const
    {
        auto it = ids.find(fn_id);
        if (it == ids.end()) {
            throw Error(ErrorCode::UnknownEntry, "unknown entry '" + std::string(fn_id) + "'");
        }
        return it->second;
    }

    static std::vector<int> bfs(const std::vector<std::vector<int>>& adj, int start)
    {
        std::vector<int> dist(adj.size(), -1);
        std::deque<int> queue{start};
        dist[start] = 0;
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            for (int v : adj[u]) {
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        return dist;
    }
};

int checked_entry(const SliceReport& slice, const SliceIndex& idx, std::string_view entry)
{
    const int e = idx.index(entry);
    if (std::find(slice.entry_points.begin(), slice.entry_points.end(), entry) == slice.entry_points.end()) {
        throw Error(ErrorCode::UnknownEntry, "'" + std::string(entry) + "' is not a declared entry point");
    }
    return e;
}

/// Nodes lying on at least one shortest entry->sink path, or empty when the
/// sink is unreachable.
std::vector<bool> shortest_path_nodes(const SliceIndex& idx, int entry, int& depth_out)
{
    const auto from_entry = SliceIndex::bfs(idx.fwd, entry);
    const auto to_sink = SliceIndex::bfs(idx.rev, idx.sink);
    depth_out = from_entry[idx.sink];
    std::vector<bool> on_path(idx.fwd.size(), false);
    if (depth_out < 0) {
        return on_path;
    }
    for (std::size_t v = 0; v < on_path.size(); ++v) {
        on_path[v] = from_entry[v] >= 0 && to_sink[v] >= 0 && from_entry[v] + to_sink[v] == depth_out;
    }
    return on_path;
}

} // namespace

std::string_view to_string(EntryKind kind) noexcept
{
    switch (kind) {
    case EntryKind::PublicHttp: return "public_http";
    case EntryKind::AuthenticatedHttp: return "authenticated_http";
    case EntryKind::InternalRpc: return "internal_rpc";
    case EntryKind::Cli: return "cli";
    case EntryKind::BackgroundJob: return "background_job";
    }
    return "?";
}

EntryKind parse_entry_kind(std::string_view text)
{
    for (auto k : {EntryKind::PublicHttp, EntryKind::AuthenticatedHttp, EntryKind::InternalRpc, EntryKind::Cli,
                   EntryKind::BackgroundJob}) {
        if (to_string(k) == text) {
            return k;
        }
    }
    malformed("unknown entry_kind '" + std::string(text) + "'");
}

const SliceFunction* SliceReport::function(std::string_view fn_id) const
{
    for (const auto& f : functions) {
        if (f.fn_id == fn_id) {
            return &f;
        }
    }
    return nullptr;
}

SliceReport parse_slice(std::string_view text)
{
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) {
        malformed("slice is not well-formed JSON");
    }
    return parse_slice(doc);
}

SliceReport parse_slice(const json& doc)
{
    if (!doc.is_object()) {
        malformed("slice must be a JSON object");
    }
    SliceReport s;
    s.asset_ref = graph::NodeId(required_string(doc, "asset_ref", ""));
    s.signal_ref = graph::NodeId(required_string(doc, "signal_ref", ""));
    s.sink = required_string(doc, "sink", "");

    const json& fns = required(doc, "functions", "");
    if (!fns.is_array()) {
        malformed("functions must be an array");
    }
    std::unordered_map<std::string, int> seen;
    for (std::size_t i = 0; i < fns.size(); ++i) {
        const json& f = fns[i];
        const std::string path = "functions[" + std::to_string(i) + "].";
        if (!f.is_object()) {
            malformed(path + " must be an object");
        }
        SliceFunction fn;
        fn.fn_id = required_string(f, "fn_id", path);
        fn.name = f.contains("name") ? required_string(f, "name", path) : fn.fn_id;
        fn.file = f.contains("file") ? required_string(f, "file", path) : "";
        fn.snippet = f.contains("snippet") ? required_string(f, "snippet", path) : "";
        if (auto it = f.find("entry_kind"); it != f.end() && !it->is_null()) {
            if (!it->is_string()) {
                malformed(path + "entry_kind must be a string");
            }
            fn.entry_kind = parse_entry_kind(it->get<std::string>());
        }
        if (auto it = f.find("sanitizer"); it != f.end()) {
            if (!it->is_boolean()) {
                malformed(path + "sanitizer must be a boolean");
            }
            fn.sanitizer = it->get<bool>();
        }
        if (fn.fn_id.empty()) {
            broken(path + "fn_id must be non-empty");
        }
        if (!seen.emplace(fn.fn_id, 1).second) {
            broken("duplicate fn_id '" + fn.fn_id + "'");
        }
        s.functions.push_back(std::move(fn));
    }

    if (auto it = doc.find("edges"); it != doc.end()) {
        if (!it->is_array()) {
            malformed("edges must be an array");
        }
        for (std::size_t i = 0; i < it->size(); ++i) {
            const json& e = (*it)[i];
            const std::string path = "edges[" + std::to_string(i) + "].";
            if (!e.is_object()) {
                malformed(path + " must be an object");
            }
            SliceEdge edge;
            edge.from = required_string(e, "from", path);
            edge.to = required_string(e, "to", path);
            const std::string kind = e.contains("kind") ? required_string(e, "kind", path) : "call";
            if (kind == "call") {
                edge.kind = FlowKind::Call;
            } else if (kind == "dataflow") {
                edge.kind = FlowKind::Dataflow;
            } else {
                malformed(path + "kind must be call or dataflow");
            }
            if (!seen.contains(edge.from) || !seen.contains(edge.to)) {
                broken(path + " references an undeclared function");
            }
            s.edges.push_back(std::move(edge));
        }
    }

    const json& entries = required(doc, "entry_points", "");
    if (!entries.is_array()) {
        malformed("entry_points must be an array");
    }
    for (const auto& e : entries) {
        if (!e.is_string()) {
            malformed("entry_points[] must be strings");
        }
        if (!seen.contains(e.get<std::string>())) {
            broken("entry point '" + e.get<std::string>() + "' is not a declared function");
        }
        s.entry_points.push_back(e.get<std::string>());
    }
    if (s.entry_points.empty()) {
        broken("entry_points must be non-empty");
    }
    if (!seen.contains(s.sink)) {
        broken("sink '" + s.sink + "' is not a declared function");
    }
    return s;
}

json slice_to_json(const SliceReport& s)
{
    json fns = json::array();
    for (const auto& f : s.functions) {
        fns.push_back({{"fn_id", f.fn_id},
                       {"name", f.name},
                       {"file", f.file},
                       {"entry_kind", f.entry_kind ? json(to_string(*f.entry_kind)) : json(nullptr)},
                       {"sanitizer", f.sanitizer},
                       {"snippet", f.snippet}});
    }
    json edges = json::array();
    for (const auto& e : s.edges) {
        edges.push_back({{"from", e.from}, {"to", e.to}, {"kind", e.kind == FlowKind::Call ? "call" : "dataflow"}});
    }
    return json{{"asset_ref", s.asset_ref.str()}, {"signal_ref", s.signal_ref.str()}, {"functions", fns},
                {"edges", edges}, {"entry_points", s.entry_points}, {"sink", s.sink}};
}

std::map<EntryKind, double> EpdParams::default_entry_weights()
{
    return {
        {EntryKind::PublicHttp, 1.0},
        {EntryKind::AuthenticatedHttp, 0.6},
        {EntryKind::InternalRpc, 0.4},
        {EntryKind::Cli, 0.25},
        {EntryKind::BackgroundJob, 0.1},
    };
}

void EpdParams::validate() const
{
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw Error(ErrorCode::RangeViolation, "alpha must lie in (0, 1]");
    }
    for (const auto& [kind, w] : entry_weights) {
        if (!(w >= 0.0 && w <= 1.0)) {
            throw Error(ErrorCode::RangeViolation, "entry weight for " + std::string(to_string(kind)) + " outside [0, 1]");
        }
    }
    if (!(unknown_entry_weight >= 0.0 && unknown_entry_weight <= 1.0)) {
        throw Error(ErrorCode::RangeViolation, "unknown entry weight outside [0, 1]");
    }
}

json to_json(const DepscoreResult& r)
{
    return json{{"reachable", r.reachable}, {"d", r.d},       {"entry_point", r.entry_point},
                {"w_entry", r.w_entry},     {"is_sanitized", r.is_sanitized}, {"epd", r.epd},
                {"depscore", r.depscore},   {"rationale", r.rationale}};
}

DepscoreResult depscore_from_json(const json& doc)
{
    DepscoreResult r;
    r.reachable = doc.at("reachable").get<bool>();
    r.d = doc.at("d").get<int>();
    r.entry_point = doc.at("entry_point").get<std::string>();
    r.w_entry = doc.at("w_entry").get<double>();
    r.is_sanitized = doc.at("is_sanitized").get<bool>();
    r.epd = doc.at("epd").get<double>();
    r.depscore = doc.at("depscore").get<int>();
    r.rationale = doc.at("rationale").get<std::string>();
    return r;
}

json to_json(const VerifierVerdict& v)
{
    return json{{"w_entry", v.w_entry}, {"is_sanitized", v.is_sanitized}, {"rationale", v.rationale}};
}

std::optional<int> path_depth(const SliceReport& slice, std::string_view entry)
{
    const SliceIndex idx(slice);
    const int e = checked_entry(slice, idx, entry);
    const int d = SliceIndex::bfs(idx.fwd, e)[idx.sink];
    if (d < 0) {
        return std::nullopt;
    }
    return d;
}

VerifierVerdict rule_based_verify(const SliceReport& slice, std::string_view entry, const EpdParams& params)
{
    const SliceIndex idx(slice);
    const int e = checked_entry(slice, idx, entry);
    const SliceFunction& fn = slice.functions[e];

    VerifierVerdict v;
    std::string kind_label = "unclassified";
    if (fn.entry_kind) {
        kind_label = std::string(to_string(*fn.entry_kind));
        auto it = params.entry_weights.find(*fn.entry_kind);
        v.w_entry = it != params.entry_weights.end() ? it->second : params.unknown_entry_weight;
    } else {
        v.w_entry = params.unknown_entry_weight;
    }

    int depth = -1;
    const auto on_path = shortest_path_nodes(idx, e, depth);
    if (depth < 0) {
        v.is_sanitized = false;
        v.rationale = "entry " + fn.fn_id + " (" + kind_label + ", w=" + fmt2(v.w_entry) + ") does not reach the sink";
        return v;
    }

    // A shortest path escapes sanitization iff the sink is reachable from the
    // entry through the shortest-path DAG without touching a sanitizer.
    std::vector<int> level = SliceIndex::bfs(idx.fwd, e);
    std::vector<bool> clean(on_path.size(), false);
    if (!slice.functions[e].sanitizer) {
        std::deque<int> queue{e};
        clean[e] = true;
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            for (int w : idx.fwd[u]) {
                if (on_path[w] && level[w] == level[u] + 1 && !clean[w] && !slice.functions[w].sanitizer) {
                    clean[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    v.is_sanitized = !clean[idx.sink];
    v.rationale = "entry " + fn.fn_id + " (" + kind_label + ", w=" + fmt2(v.w_entry) + ") reaches sink " + slice.sink +
                  " in " + std::to_string(depth) + " hop(s); " +
                  (v.is_sanitized ? "every shortest path passes a sanitizer" : "an unsanitized shortest path exists");
    return v;
}

double compute_epd(int d, const VerifierVerdict& verdict, const EpdParams& params)
{
    if (d < 0) {
        throw Error(ErrorCode::RangeViolation, "path depth must be >= 0");
    }
    if (verdict.is_sanitized) {
        return 0.0;
    }
    return verdict.w_entry * std::pow(params.alpha, d);
}

int depscore_value(double severity, double epd)
{
    const double raw = 100.0 * (severity / 10.0) * epd;
    const double rounded = std::floor(raw + 0.5);
    return static_cast<int>(std::clamp(rounded, 0.0, 100.0));
}

VerifierVerdict RuleBasedVerifier::verify(const SliceReport& slice, std::string_view entry, const EpdParams& params) const
{
    return rule_based_verify(slice, entry, params);
}

json verifier_request(const SliceReport& slice, std::string_view entry)
{
    const SliceIndex idx(slice);
    const int e = checked_entry(slice, idx, entry);
    int depth = -1;
    const auto on_path = shortest_path_nodes(idx, e, depth);
    json snippets = json::array();
    for (std::size_t i = 0; i < slice.functions.size(); ++i) {
        if (depth < 0 || on_path[i]) {
            const auto& f = slice.functions[i];
            snippets.push_back({{"fn_id", f.fn_id}, {"name", f.name}, {"snippet", f.snippet}});
        }
    }
    const auto& fn = slice.functions[e];
    return json{{"snippets", snippets},
                {"entry", {{"fn_id", fn.fn_id}, {"entry_kind", fn.entry_kind ? json(to_string(*fn.entry_kind)) : json(nullptr)}}},
                {"sink", {{"fn_id", slice.sink}}}};
}

VerifierVerdict parse_verifier_response(const json& doc)
{
    auto fail = [](const std::string& m) { throw Error(ErrorCode::Validation, "verifier response: " + m); };
    if (!doc.is_object()) {
        fail("must be an object");
    }
    for (const auto& [key, value] : doc.items()) {
        if (key != "w_entry" && key != "is_sanitized" && key != "rationale") {
            fail("unexpected field '" + key + "'");
        }
    }
    if (!doc.contains("w_entry") || !doc.at("w_entry").is_number()) {
        fail("w_entry must be a number");
    }
    if (!doc.contains("is_sanitized") || !doc.at("is_sanitized").is_boolean()) {
        fail("is_sanitized must be a boolean");
    }
    if (!doc.contains("rationale") || !doc.at("rationale").is_string()) {
        fail("rationale must be a string");
    }
    VerifierVerdict v;
    v.w_entry = doc.at("w_entry").get<double>();
    if (!(v.w_entry >= 0.0 && v.w_entry <= 1.0)) {
        fail("w_entry outside [0, 1]");
    }
    v.is_sanitized = doc.at("is_sanitized").get<bool>();
    v.rationale = doc.at("rationale").get<std::string>();
    return v;
}

VerifierVerdict external_verify(const SliceReport& slice, std::string_view entry, const std::string& endpoint,
                                http::Transport& transport, const EpdParams& params)
{
    return ExternalVerifier(endpoint, transport).verify(slice, entry, params);
}

VerifierVerdict ExternalVerifier::verify(const SliceReport& slice, std::string_view entry, const EpdParams& params) const
{
    http::Request req;
    req.method = "POST";
    req.url = endpoint_;
    req.headers["Content-Type"] = "application/json";
    req.body = verifier_request(slice, entry).dump();
    req.timeout = timeout_;
    try {
        const http::Response res = transport_.send(req);
        if (res.status < 200 || res.status >= 300) {
            throw Error(ErrorCode::HttpFailure, "verifier returned HTTP " + std::to_string(res.status));
        }
        json doc = json::parse(res.body, nullptr, false);
        if (doc.is_discarded()) {
            throw Error(ErrorCode::Validation, "verifier response is not JSON");
        }
        return parse_verifier_response(doc);
    } catch (const Error& e) {
        log::warn(std::string("external verifier unavailable, using rule-based verdict: ") + e.what());
        VerifierVerdict fallback = rule_based_verify(slice, entry, params);
        fallback.rationale = "fallback (" + std::string(deptex::to_string(e.code())) + "): " + fallback.rationale;
        return fallback;
    }
}

DepscoreResult depscore(const graph::Node& signal, const SliceReport& slice, const EpdParams& params,
                        const Verifier& verifier)
{
    if (signal.kind() != graph::NodeKind::Signal) {
        throw Error(ErrorCode::WrongKind, "depscore requires a Signal node");
    }
    if (slice.signal_ref != signal.id) {
        throw Error(ErrorCode::SliceMismatch,
                    "slice targets signal '" + slice.signal_ref.str() + "', not '" + signal.id.str() + "'");
    }
    params.validate();

    std::optional<DepscoreResult> best;
    for (const std::string& entry : slice.entry_points) {
        const auto d = path_depth(slice, entry);
        if (!d) {
            continue;
        }
        const VerifierVerdict verdict = verifier.verify(slice, entry, params);
        DepscoreResult cand;
        cand.reachable = true;
        cand.d = *d;
        cand.entry_point = entry;
        cand.w_entry = verdict.w_entry;
        cand.is_sanitized = verdict.is_sanitized;
        cand.epd = compute_epd(*d, verdict, params);
        cand.rationale = verdict.rationale;
        if (!best || cand.epd > best->epd || (cand.epd == best->epd && cand.d < best->d)) {
            best = std::move(cand);
        }
    }
    if (!best) {
        DepscoreResult none;
        none.rationale = "no entry point reaches sink " + slice.sink;
        return none;
    }
    best->depscore = best->is_sanitized ? 0 : depscore_value(signal.signal().severity, best->epd);
    return *best;
}

DepscoreResult depscore(const graph::Node& signal, const SliceReport& slice, const EpdParams& params)
{
    return depscore(signal, slice, params, RuleBasedVerifier{});
}

} // namespace deptex::reach
