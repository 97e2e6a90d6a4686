#include "deptex/graph.hpp"

#include <algorithm>
#include <array>

#include "deptex/error.hpp"

namespace deptex::graph {

namespace {

struct TypingRow {
    NodeKind src;
    EdgeKind kind;
    NodeKind dst;
};

constexpr std::array<TypingRow, 5> kTypingTable{{
    {NodeKind::Org, EdgeKind::Contains, NodeKind::Unit},
    {NodeKind::Unit, EdgeKind::Owns, NodeKind::Asset},
    {NodeKind::Asset, EdgeKind::DependsOn, NodeKind::Comp},
    {NodeKind::Signal, EdgeKind::Affects, NodeKind::Comp},
    {NodeKind::Actor, EdgeKind::Maintains, NodeKind::Comp},
}};

[[noreturn]] void invalid(const std::string& msg)
{
    throw Error(ErrorCode::InvalidField, msg);
}

double number_in(const json& v, const char* field, double lo, double hi)
{
    if (!v.is_number()) {
        invalid(std::string(field) + " must be a number");
    }
    const double x = v.get<double>();
    if (!(x >= lo && x <= hi)) {
        invalid(std::string(field) + " out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return x;
}

std::string string_field(const json& v, const char* field)
{
    if (!v.is_string()) {
        invalid(std::string(field) + " must be a string");
    }
    return v.get<std::string>();
}

bool bool_field(const json& v, const char* field)
{
    if (!v.is_boolean()) {
        invalid(std::string(field) + " must be a boolean");
    }
    return v.get<bool>();
}

std::string_view id_prefix(NodeKind kind)
{
    switch (kind) {
    case NodeKind::Org: return "org";
    case NodeKind::Unit: return "unit";
    case NodeKind::Asset: return "asset";
    case NodeKind::Comp: return "comp";
    case NodeKind::Actor: return "actor";
    case NodeKind::Signal: return "signal";
    }
    return "node";
}

Node node_from_fields(NodeKind kind, const json& fields)
{
    if (!fields.is_object()) {
        invalid("node fields must be a JSON object");
    }
    Node node;
    switch (kind) {
    case NodeKind::Org: node.data = OrgData{}; break;
    case NodeKind::Unit: node.data = UnitData{}; break;
    case NodeKind::Asset: node.data = AssetData{}; break;
    case NodeKind::Comp: node.data = ComponentData{}; break;
    case NodeKind::Actor: node.data = ActorData{}; break;
    case NodeKind::Signal: node.data = SignalData{}; break;
    }

    for (const auto& [key, value] : fields.items()) {
        if (key == "id") {
            node.id = NodeId(string_field(value, "id"));
            if (node.id.empty()) {
                invalid("id must be non-empty");
            }
        } else if (key == "kind") {
            if (parse_node_kind(string_field(value, "kind")) != kind) {
                invalid("kind mismatch");
            }
        } else if (key == "name") {
            node.name = string_field(value, "name");
        } else if (key == "attrs") {
            if (!value.is_object()) {
                invalid("attrs must be an object");
            }
            node.attrs = value;
        } else if (auto* asset = std::get_if<AssetData>(&node.data)) {
            if (key == "tier") {
                asset->tier = string_field(value, "tier");
            } else if (key == "compliance_status") {
                asset->compliance_status = string_field(value, "compliance_status");
            } else if (key == "exposure") {
                asset->exposure = number_in(value, "exposure", 0.0, 1.0);
            } else if (key == "critical") {
                asset->critical = bool_field(value, "critical");
            } else {
                invalid("unknown Asset field '" + key + "'");
            }
        } else if (auto* comp = std::get_if<ComponentData>(&node.data)) {
            if (key == "purl") {
                comp->purl = string_field(value, "purl");
            } else if (key == "version") {
                comp->version = string_field(value, "version");
            } else if (key == "licenses") {
                if (!value.is_array()) {
                    invalid("licenses must be an array");
                }
                for (const auto& l : value) {
                    comp->licenses.push_back(string_field(l, "licenses[]"));
                }
            } else {
                invalid("unknown Comp field '" + key + "'");
            }
        } else if (auto* sig = std::get_if<SignalData>(&node.data)) {
            if (key == "external_id") {
                sig->external_id = string_field(value, "external_id");
            } else if (key == "severity") {
                sig->severity = number_in(value, "severity", 0.0, 10.0);
            } else if (key == "confidence") {
                sig->confidence = number_in(value, "confidence", 0.0, 1.0);
            } else if (key == "description") {
                sig->description = string_field(value, "description");
            } else {
                invalid("unknown Signal field '" + key + "'");
            }
        } else {
            invalid("unknown " + std::string(to_string(kind)) + " field '" + key + "'");
        }
    }
    return node;
}

} // namespace

std::string_view to_string(NodeKind kind) noexcept
{
    switch (kind) {
    case NodeKind::Org: return "Org";
    case NodeKind::Unit: return "Unit";
    case NodeKind::Asset: return "Asset";
    case NodeKind::Comp: return "Comp";
    case NodeKind::Actor: return "Actor";
    case NodeKind::Signal: return "Signal";
    }
    return "?";
}

std::string_view to_string(EdgeKind kind) noexcept
{
    switch (kind) {
    case EdgeKind::Contains: return "contains";
    case EdgeKind::Owns: return "owns";
    case EdgeKind::DependsOn: return "depends_on";
    case EdgeKind::Affects: return "affects";
    case EdgeKind::Maintains: return "maintains";
    }
    return "?";
}

std::string_view to_string(Scope scope) noexcept
{
    switch (scope) {
    case Scope::Runtime: return "runtime";
    case Scope::Dev: return "dev";
    case Scope::Test: return "test";
    }
    return "?";
}

NodeKind parse_node_kind(std::string_view text)
{
    for (auto k : {NodeKind::Org, NodeKind::Unit, NodeKind::Asset, NodeKind::Comp, NodeKind::Actor,
                   NodeKind::Signal}) {
        if (to_string(k) == text) {
            return k;
        }
    }
    invalid("unknown node kind '" + std::string(text) + "'");
}

EdgeKind parse_edge_kind(std::string_view text)
{
    for (auto k : {EdgeKind::Contains, EdgeKind::Owns, EdgeKind::DependsOn, EdgeKind::Affects,
                   EdgeKind::Maintains}) {
        if (to_string(k) == text) {
            return k;
        }
    }
    invalid("unknown edge kind '" + std::string(text) + "'");
}

Scope parse_scope(std::string_view text)
{
    for (auto s : {Scope::Runtime, Scope::Dev, Scope::Test}) {
        if (to_string(s) == text) {
            return s;
        }
    }
    invalid("unknown scope '" + std::string(text) + "'");
}

bool edge_admitted(NodeKind src, EdgeKind kind, NodeKind dst) noexcept
{
    return std::any_of(kTypingTable.begin(), kTypingTable.end(), [&](const TypingRow& row) {
        return row.src == src && row.kind == kind && row.dst == dst;
    });
}

DependencyAttrs Edge::dependency() const
{
    DependencyAttrs out;
    if (auto it = attrs.find("direct"); it != attrs.end() && it->is_boolean()) {
        out.direct = it->get<bool>();
    }
    if (auto it = attrs.find("scope"); it != attrs.end() && it->is_string()) {
        out.scope = parse_scope(it->get<std::string>());
    }
    if (auto it = attrs.find("depth"); it != attrs.end() && it->is_number_integer()) {
        out.depth = it->get<int>();
    }
    return out;
}

OrgGraph::OrgGraph()
{
    tiers_.emplace(std::string(kDefaultTier), TierDef{std::string(kDefaultTier), "Default", 1.0});
    statuses_.emplace(std::string(kDefaultStatus), StatusDef{std::string(kDefaultStatus), "Unreviewed", "gray"});
}

OrgGraph::OrgGraph(const OrgGraph& other)
    : nodes_(other.nodes_),
      edges_(other.edges_),
      tiers_(other.tiers_),
      statuses_(other.statuses_),
      next_seq_(other.next_seq_)
{
    // the reverse index holds pointers, so it is rebuilt against our edges
    for (const auto& [key, edge] : edges_) {
        reverse_.emplace(EdgeKey{edge.dst, edge.kind, edge.src}, &edge);
    }
}

OrgGraph& OrgGraph::operator=(const OrgGraph& other)
{
    if (this != &other) {
        OrgGraph copy(other);
        *this = std::move(copy);
    }
    return *this;
}

NodeId OrgGraph::fresh_id(NodeKind kind)
{
    for (;;) {
        NodeId id(std::string(id_prefix(kind)) + "-" + std::to_string(next_seq_++));
        if (!nodes_.contains(id)) {
            return id;
        }
    }
}

void OrgGraph::validate_node(const Node& node) const
{
    if (node.id.empty()) {
        invalid("id must be non-empty");
    }
    if (const auto* asset = std::get_if<AssetData>(&node.data)) {
        if (!(asset->exposure >= 0.0 && asset->exposure <= 1.0)) {
            invalid("exposure out of range [0, 1]");
        }
        if (!tiers_.contains(asset->tier)) {
            invalid("unknown tier '" + asset->tier + "'");
        }
        if (!statuses_.contains(asset->compliance_status)) {
            invalid("unknown compliance status '" + asset->compliance_status + "'");
        }
    } else if (const auto* sig = std::get_if<SignalData>(&node.data)) {
        if (!(sig->severity >= 0.0 && sig->severity <= 10.0)) {
            invalid("severity out of range [0, 10]");
        }
        if (!(sig->confidence >= 0.0 && sig->confidence <= 1.0)) {
            invalid("confidence out of range [0, 1]");
        }
    }
}

NodeId OrgGraph::add_node(NodeKind kind, const json& fields)
{
    Node node = node_from_fields(kind, fields);
    if (node.id.empty()) {
        if (const auto* comp = std::get_if<ComponentData>(&node.data); comp && !comp->purl.empty()) {
            node.id = NodeId(comp->purl);
        } else {
            node.id = fresh_id(kind);
        }
    }
    return add_node(std::move(node));
}

NodeId OrgGraph::add_node(Node node)
{
    validate_node(node);
    if (nodes_.contains(node.id)) {
        throw Error(ErrorCode::DuplicateId, "node '" + node.id.str() + "' already exists");
    }
    NodeId id = node.id;
    nodes_.emplace(id, std::move(node));
    return id;
}

void OrgGraph::remove_node(const NodeId& id)
{
    if (!nodes_.contains(id)) {
        throw Error(ErrorCode::NotFound, "node '" + id.str() + "' not found");
    }
    std::vector<EdgeKey> doomed;
    for (const auto& [key, edge] : edges_) {
        if (edge.src == id || edge.dst == id) {
            doomed.push_back(key);
        }
    }
    for (const auto& key : doomed) {
        const auto& [src, kind, dst] = key;
        reverse_.erase({dst, kind, src});
        edges_.erase(key);
    }
    nodes_.erase(id);
}

json OrgGraph::normalize_edge_attrs(EdgeKind kind, const json& attrs)
{
    json out = attrs.is_null() ? json::object() : attrs;
    if (!out.is_object()) {
        invalid("edge attrs must be an object");
    }
    if (kind == EdgeKind::DependsOn) {
        bool direct = true;
        if (auto it = out.find("direct"); it != out.end()) {
            direct = bool_field(*it, "direct");
        }
        std::string scope = "runtime";
        if (auto it = out.find("scope"); it != out.end()) {
            scope = string_field(*it, "scope");
            (void)parse_scope(scope);
        }
        int depth = direct ? 1 : 2;
        if (auto it = out.find("depth"); it != out.end()) {
            if (!it->is_number_integer() || it->get<long long>() < 1) {
                invalid("depth must be an integer >= 1");
            }
            depth = it->get<int>();
        }
        if ((depth == 1) != direct) {
            invalid("depth must be 1 exactly when direct is true");
        }
        out["direct"] = direct;
        out["scope"] = scope;
        out["depth"] = depth;
    } else if (kind == EdgeKind::Affects) {
        if (auto it = out.find("confidence"); it != out.end()) {
            (void)number_in(*it, "confidence", 0.0, 1.0);
        }
    }
    return out;
}

void OrgGraph::add_edge(Edge edge)
{
    const Node* src = find(edge.src);
    const Node* dst = find(edge.dst);
    if (src == nullptr || dst == nullptr) {
        throw Error(ErrorCode::MissingEndpoint, "edge endpoint '" + (src ? edge.dst : edge.src).str() + "' does not exist");
    }
    if (!edge_admitted(src->kind(), edge.kind, dst->kind())) {
        throw Error(ErrorCode::TypeViolation, std::string(to_string(src->kind())) + " -" +
                                                  std::string(to_string(edge.kind)) + "-> " +
                                                  std::string(to_string(dst->kind())) + " is not admitted");
    }
    EdgeKey key{edge.src, edge.kind, edge.dst};
    if (edges_.contains(key)) {
        throw Error(ErrorCode::DuplicateEdge, "edge " + edge.src.str() + " -" + std::string(to_string(edge.kind)) +
                                                  "-> " + edge.dst.str() + " already exists");
    }
    edge.attrs = normalize_edge_attrs(edge.kind, edge.attrs);
    EdgeKey back{edge.dst, edge.kind, edge.src};
    const auto it = edges_.emplace(std::move(key), std::move(edge)).first;
    reverse_.emplace(std::move(back), &it->second);
}

bool OrgGraph::remove_edge(const NodeId& src, const NodeId& dst, EdgeKind kind)
{
    if (edges_.erase({src, kind, dst}) == 0) {
        return false;
    }
    reverse_.erase({dst, kind, src});
    return true;
}

bool OrgGraph::has_edge(const NodeId& src, const NodeId& dst, EdgeKind kind) const
{
    return edges_.contains({src, kind, dst});
}

const Edge* OrgGraph::find_edge(const NodeId& src, const NodeId& dst, EdgeKind kind) const
{
    auto it = edges_.find({src, kind, dst});
    return it == edges_.end() ? nullptr : &it->second;
}

void OrgGraph::set_edge_attrs(const NodeId& src, const NodeId& dst, EdgeKind kind, json attrs)
{
    auto it = edges_.find({src, kind, dst});
    if (it == edges_.end()) {
        throw Error(ErrorCode::NotFound, "edge not found");
    }
    it->second.attrs = normalize_edge_attrs(kind, attrs);
}

const Node* OrgGraph::find(const NodeId& id) const
{
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
}

const Node& OrgGraph::node(const NodeId& id) const
{
    const Node* n = find(id);
    if (n == nullptr) {
        throw Error(ErrorCode::NotFound, "node '" + id.str() + "' not found");
    }
    return *n;
}

const Node& OrgGraph::node(const NodeId& id, NodeKind expected) const
{
    const Node& n = node(id);
    if (n.kind() != expected) {
        throw Error(ErrorCode::WrongKind, "node '" + id.str() + "' is " + std::string(to_string(n.kind())) +
                                              ", expected " + std::string(to_string(expected)));
    }
    return n;
}

std::vector<NodeId> OrgGraph::nodes_of_kind(NodeKind kind) const
{
    std::vector<NodeId> out;
    for (const auto& [id, n] : nodes_) {
        if (n.kind() == kind) {
            out.push_back(id);
        }
    }
    return out;
}

std::vector<const Edge*> OrgGraph::edges() const
{
    std::vector<const Edge*> out;
    out.reserve(edges_.size());
    for (const auto& [key, e] : edges_) {
        out.push_back(&e);
    }
    return out;
}

std::vector<const Edge*> OrgGraph::out_edges(const NodeId& src, EdgeKind kind) const
{
    std::vector<const Edge*> out;
    for (auto it = edges_.lower_bound({src, kind, NodeId{}});
         it != edges_.end() && std::get<0>(it->first) == src && std::get<1>(it->first) == kind; ++it) {
        out.push_back(&it->second);
    }
    return out;
}

std::vector<const Edge*> OrgGraph::in_edges(const NodeId& dst, EdgeKind kind) const
{
    std::vector<const Edge*> out;
    for (auto it = reverse_.lower_bound({dst, kind, NodeId{}});
         it != reverse_.end() && std::get<0>(it->first) == dst && std::get<1>(it->first) == kind; ++it) {
        out.push_back(it->second);
    }
    return out;
}

void OrgGraph::set_compliance_status(const NodeId& asset, const std::string& status_id)
{
    (void)node(asset, NodeKind::Asset);
    if (!statuses_.contains(status_id)) {
        throw Error(ErrorCode::UnknownStatus, "unknown status '" + status_id + "'");
    }
    std::get<AssetData>(nodes_.at(asset).data).compliance_status = status_id;
}

void OrgGraph::set_asset_tier(const NodeId& asset, const std::string& tier_id)
{
    (void)node(asset, NodeKind::Asset);
    if (!tiers_.contains(tier_id)) {
        throw Error(ErrorCode::UnknownTier, "unknown tier '" + tier_id + "'");
    }
    std::get<AssetData>(nodes_.at(asset).data).tier = tier_id;
}

void OrgGraph::update_signal(const NodeId& signal, SignalData data)
{
    (void)node(signal, NodeKind::Signal);
    Node candidate = nodes_.at(signal);
    candidate.data = std::move(data);
    validate_node(candidate);
    nodes_.at(signal) = std::move(candidate);
}

void OrgGraph::add_tier(TierDef tier)
{
    if (tier.tier_id.empty()) {
        invalid("tier_id must be non-empty");
    }
    if (!(tier.importance > 0.0)) {
        invalid("tier importance must be > 0");
    }
    if (tiers_.contains(tier.tier_id)) {
        throw Error(ErrorCode::DuplicateId, "tier '" + tier.tier_id + "' already exists");
    }
    std::string key = tier.tier_id;
    tiers_.emplace(std::move(key), std::move(tier));
}

void OrgGraph::upsert_tier(TierDef tier)
{
    if (tier.tier_id.empty()) {
        invalid("tier_id must be non-empty");
    }
    if (!(tier.importance > 0.0)) {
        invalid("tier importance must be > 0");
    }
    tiers_[tier.tier_id] = std::move(tier);
}

const TierDef& OrgGraph::tier(const std::string& tier_id) const
{
    auto it = tiers_.find(tier_id);
    if (it == tiers_.end()) {
        throw Error(ErrorCode::UnknownTier, "unknown tier '" + tier_id + "'");
    }
    return it->second;
}

void OrgGraph::add_status(StatusDef status)
{
    if (status.status_id.empty()) {
        invalid("status_id must be non-empty");
    }
    if (statuses_.contains(status.status_id)) {
        throw Error(ErrorCode::DuplicateId, "status '" + status.status_id + "' already exists");
    }
    std::string key = status.status_id;
    statuses_.emplace(std::move(key), std::move(status));
}

bool OrgGraph::ownership_gap(const NodeId& asset) const
{
    (void)node(asset, NodeKind::Asset);
    return in_edges(asset, EdgeKind::Owns).empty();
}

NodeSet OrgGraph::owners(const NodeId& asset) const
{
    NodeSet out;
    for (const Edge* e : in_edges(asset, EdgeKind::Owns)) {
        out.insert(e->src);
    }
    return out;
}

NodeSet OrgGraph::owned_assets(const NodeId& unit) const
{
    NodeSet out;
    for (const Edge* e : out_edges(unit, EdgeKind::Owns)) {
        out.insert(e->dst);
    }
    return out;
}

NodeSet OrgGraph::units_of(const NodeId& org) const
{
    (void)node(org, NodeKind::Org);
    NodeSet out;
    for (const Edge* e : out_edges(org, EdgeKind::Contains)) {
        out.insert(e->dst);
    }
    return out;
}

NodeSet OrgGraph::affected_components(const NodeId& signal) const
{
    (void)node(signal, NodeKind::Signal);
    NodeSet out;
    for (const Edge* e : out_edges(signal, EdgeKind::Affects)) {
        out.insert(e->dst);
    }
    return out;
}

NodeSet OrgGraph::affected_assets(const NodeId& signal) const
{
    NodeSet out;
    for (const NodeId& comp : affected_components(signal)) {
        for (const Edge* e : in_edges(comp, EdgeKind::DependsOn)) {
            out.insert(e->src);
        }
    }
    return out;
}

NodeSet OrgGraph::affected_units(const NodeId& signal) const
{
    NodeSet out;
    for (const NodeId& asset : affected_assets(signal)) {
        out.merge(owners(asset));
    }
    return out;
}

GovernanceMetrics OrgGraph::governance_metrics(const NodeId& signal) const
{
    GovernanceMetrics m;
    const NodeSet assets = affected_assets(signal);
    m.asset_count = assets.size();
    m.unit_count = affected_units(signal).size();
    for (const NodeId& a : assets) {
        if (ownership_gap(a)) {
            m.gap_assets.insert(a);
        }
    }
    return m;
}

std::vector<std::string> OrgGraph::audit() const
{
    std::vector<std::string> violations;
    for (const auto& [id, n] : nodes_) {
        if (n.id != id) {
            violations.push_back("node key/id mismatch for '" + id.str() + "'");
        }
        try {
            validate_node(n);
        } catch (const Error& e) {
            violations.push_back("node '" + id.str() + "': " + e.what());
        }
    }
    for (const auto& [key, e] : edges_) {
        const Node* src = find(e.src);
        const Node* dst = find(e.dst);
        if (src == nullptr || dst == nullptr) {
            violations.push_back("dangling edge " + e.src.str() + " -> " + e.dst.str());
            continue;
        }
        if (!edge_admitted(src->kind(), e.kind, dst->kind())) {
            violations.push_back("edge " + e.src.str() + " -" + std::string(to_string(e.kind)) + "-> " + e.dst.str() +
                                 " violates the typing table");
        }
        if (!reverse_.contains({e.dst, e.kind, e.src})) {
            violations.push_back("edge " + e.src.str() + " -> " + e.dst.str() + " missing from reverse index");
        }
        try {
            if (normalize_edge_attrs(e.kind, e.attrs) != e.attrs) {
                violations.push_back("edge " + e.src.str() + " -> " + e.dst.str() + " has unnormalized attrs");
            }
        } catch (const Error& err) {
            violations.push_back("edge " + e.src.str() + " -> " + e.dst.str() + ": " + err.what());
        }
    }
    if (reverse_.size() != edges_.size()) {
        violations.push_back("reverse index size mismatch");
    }
    if (!tiers_.contains(std::string(kDefaultTier))) {
        violations.push_back("default tier missing");
    }
    if (!statuses_.contains(std::string(kDefaultStatus))) {
        violations.push_back("reserved status 'unreviewed' missing");
    }
    return violations;
}

bool OrgGraph::operator==(const OrgGraph& other) const
{
    return nodes_ == other.nodes_ && edges_ == other.edges_ && tiers_ == other.tiers_ &&
           statuses_ == other.statuses_;
}

json node_to_json(const Node& node)
{
    json j;
    j["id"] = node.id.str();
    j["kind"] = to_string(node.kind());
    j["name"] = node.name;
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, AssetData>) {
                j["tier"] = d.tier;
                j["compliance_status"] = d.compliance_status;
                j["exposure"] = d.exposure;
                j["critical"] = d.critical;
            } else if constexpr (std::is_same_v<T, ComponentData>) {
                j["purl"] = d.purl;
                j["version"] = d.version;
                j["licenses"] = d.licenses;
            } else if constexpr (std::is_same_v<T, SignalData>) {
                j["external_id"] = d.external_id;
                j["severity"] = d.severity;
                j["confidence"] = d.confidence;
                j["description"] = d.description;
            }
        },
        node.data);
    j["attrs"] = node.attrs;
    return j;
}

Node node_from_json(const json& doc)
{
    if (!doc.is_object() || !doc.contains("kind") || !doc.contains("id")) {
        invalid("node record requires 'id' and 'kind'");
    }
    return node_from_fields(parse_node_kind(string_field(doc.at("kind"), "kind")), doc);
}

json edge_to_json(const Edge& edge)
{
    return json{{"src", edge.src.str()}, {"dst", edge.dst.str()}, {"kind", to_string(edge.kind)}, {"attrs", edge.attrs}};
}

Edge edge_from_json(const json& doc)
{
    if (!doc.is_object()) {
        invalid("edge must be an object");
    }
    for (const char* f : {"src", "dst", "kind"}) {
        if (!doc.contains(f)) {
            throw Error(ErrorCode::MissingField, std::string("edge.") + f);
        }
    }
    Edge e;
    e.src = NodeId(string_field(doc.at("src"), "src"));
    e.dst = NodeId(string_field(doc.at("dst"), "dst"));
    e.kind = parse_edge_kind(string_field(doc.at("kind"), "kind"));
    e.attrs = doc.value("attrs", json::object());
    return e;
}

json tier_to_json(const TierDef& tier)
{
    return json{{"tier_id", tier.tier_id}, {"name", tier.name}, {"importance", tier.importance}};
}

TierDef tier_from_json(const json& doc)
{
    if (!doc.is_object() || !doc.contains("tier_id")) {
        throw Error(ErrorCode::MissingField, "tier_id");
    }
    TierDef t;
    t.tier_id = string_field(doc.at("tier_id"), "tier_id");
    t.name = doc.contains("name") ? string_field(doc.at("name"), "name") : t.tier_id;
    if (doc.contains("importance")) {
        if (!doc.at("importance").is_number()) {
            invalid("importance must be a number");
        }
        t.importance = doc.at("importance").get<double>();
    }
    return t;
}

json status_to_json(const StatusDef& status)
{
    return json{{"status_id", status.status_id}, {"name", status.name}, {"color_hint", status.color_hint}};
}

StatusDef status_from_json(const json& doc)
{
    if (!doc.is_object() || !doc.contains("status_id")) {
        throw Error(ErrorCode::MissingField, "status_id");
    }
    StatusDef s;
    s.status_id = string_field(doc.at("status_id"), "status_id");
    s.name = doc.contains("name") ? string_field(doc.at("name"), "name") : s.status_id;
    s.color_hint = doc.contains("color_hint") ? string_field(doc.at("color_hint"), "color_hint") : "";
    return s;
}

json to_json(const NodeSet& set)
{
    json arr = json::array();
    for (const auto& id : set) {
        arr.push_back(id.str());
    }
    return arr;
}

json OrgGraph::to_json() const
{
    json doc;
    doc["next_seq"] = next_seq_;
    json nodes = json::array();
    for (const auto& [id, n] : nodes_) {
        nodes.push_back(node_to_json(n));
    }
    json edges = json::array();
    for (const auto& [key, e] : edges_) {
        edges.push_back(edge_to_json(e));
    }
    json tiers = json::array();
    for (const auto& [id, t] : tiers_) {
        tiers.push_back(tier_to_json(t));
    }
    json statuses = json::array();
    for (const auto& [id, s] : statuses_) {
        statuses.push_back(status_to_json(s));
    }
    doc["nodes"] = std::move(nodes);
    doc["edges"] = std::move(edges);
    doc["tiers"] = std::move(tiers);
    doc["statuses"] = std::move(statuses);
    return doc;
}

OrgGraph OrgGraph::from_json(const json& doc)
{
    if (!doc.is_object()) {
        invalid("graph snapshot must be an object");
    }
    for (const char* f : {"nodes", "edges", "tiers", "statuses"}) {
        if (!doc.contains(f) || !doc.at(f).is_array()) {
            throw Error(ErrorCode::MissingField, f);
        }
    }
    OrgGraph g;
    for (const auto& t : doc.at("tiers")) {
        g.upsert_tier(tier_from_json(t));
    }
    for (const auto& s : doc.at("statuses")) {
        StatusDef def = status_from_json(s);
        g.statuses_[def.status_id] = std::move(def);
    }
    for (const auto& n : doc.at("nodes")) {
        g.add_node(node_from_json(n));
    }
    for (const auto& e : doc.at("edges")) {
        g.add_edge(edge_from_json(e));
    }
    if (auto it = doc.find("next_seq"); it != doc.end() && it->is_number_unsigned()) {
        g.next_seq_ = it->get<std::uint64_t>();
    }
    if (auto violations = g.audit(); !violations.empty()) {
        invalid(violations.front());
    }
    return g;
}

} // namespace deptex::graph
