#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace deptex::graph {

using json = nlohmann::json;

struct NodeId {
    std::string value;

    NodeId() = default;
    explicit NodeId(std::string v) : value(std::move(v)) {}

    [[nodiscard]] bool empty() const noexcept { return value.empty(); }
    [[nodiscard]] const std::string& str() const noexcept { return value; }

    auto operator<=>(const NodeId&) const = default;
    bool operator==(const NodeId&) const = default;
};

using NodeSet = std::set<NodeId>;

enum class NodeKind { Org, Unit, Asset, Comp, Actor, Signal };
enum class EdgeKind { Contains, Owns, DependsOn, Affects, Maintains };
enum class Scope { Runtime, Dev, Test };

std::string_view to_string(NodeKind kind) noexcept;
std::string_view to_string(EdgeKind kind) noexcept;
std::string_view to_string(Scope scope) noexcept;
NodeKind parse_node_kind(std::string_view text);
EdgeKind parse_edge_kind(std::string_view text);
Scope parse_scope(std::string_view text);

struct OrgData {
    bool operator==(const OrgData&) const = default;
};
struct UnitData {
    bool operator==(const UnitData&) const = default;
};
struct ActorData {
    bool operator==(const ActorData&) const = default;
};

struct AssetData {
    std::string tier = "default";
    std::string compliance_status = "unreviewed";
    double exposure = 1.0;
    bool critical = false;

    bool operator==(const AssetData&) const = default;
};

struct ComponentData {
    std::string purl;
    std::string version;
    std::vector<std::string> licenses;

    bool operator==(const ComponentData&) const = default;
};

struct SignalData {
    std::string external_id;
    double severity = 0.0;
    double confidence = 1.0;
    std::string description;

    bool operator==(const SignalData&) const = default;
};

// Alternative order mirrors NodeKind so index() doubles as the kind tag.
using NodePayload = std::variant<OrgData, UnitData, AssetData, ComponentData, ActorData, SignalData>;

struct Node {
    NodeId id;
    std::string name;
    json attrs = json::object();
    NodePayload data;

    [[nodiscard]] NodeKind kind() const noexcept { return static_cast<NodeKind>(data.index()); }

    [[nodiscard]] const AssetData& asset() const { return std::get<AssetData>(data); }
    [[nodiscard]] const ComponentData& component() const { return std::get<ComponentData>(data); }
    [[nodiscard]] const SignalData& signal() const { return std::get<SignalData>(data); }

    bool operator==(const Node&) const = default;
};

struct DependencyAttrs {
    bool direct = true;
    Scope scope = Scope::Runtime;
    int depth = 1;
};

struct Edge {
    NodeId src;
    NodeId dst;
    EdgeKind kind = EdgeKind::Contains;
    json attrs = json::object();

    /// Typed view of a depends_on edge's attributes.
    [[nodiscard]] DependencyAttrs dependency() const;

    bool operator==(const Edge&) const = default;
};

struct TierDef {
    std::string tier_id;
    std::string name;
    double importance = 1.0;

    bool operator==(const TierDef&) const = default;
};

struct StatusDef {
    std::string status_id;
    std::string name;
    std::string color_hint;

    bool operator==(const StatusDef&) const = default;
};

struct GovernanceMetrics {
    std::size_t asset_count = 0;
    std::size_t unit_count = 0;
    NodeSet gap_assets;
};

inline constexpr std::string_view kDefaultTier = "default";
inline constexpr std::string_view kDefaultStatus = "unreviewed";

/// Allowed (source kind, edge kind, destination kind) rows.
bool edge_admitted(NodeKind src, EdgeKind kind, NodeKind dst) noexcept;

/// In-memory typed property graph of an organization. Not internally
/// synchronized; callers serialize writers (see service::Store).
class OrgGraph {
public:
    OrgGraph();
    OrgGraph(const OrgGraph& other);
    OrgGraph& operator=(const OrgGraph& other);
    OrgGraph(OrgGraph&&) noexcept = default;
    OrgGraph& operator=(OrgGraph&&) noexcept = default;

    // Creates a node from a JSON field map. `id` is optional; components
    // default their id to the purl, everything else gets a generated id.
    NodeId add_node(NodeKind kind, const json& fields);
    NodeId add_node(Node node);
    void remove_node(const NodeId& id);

    void add_edge(Edge edge);
    bool remove_edge(const NodeId& src, const NodeId& dst, EdgeKind kind);
    [[nodiscard]] bool has_edge(const NodeId& src, const NodeId& dst, EdgeKind kind) const;
    [[nodiscard]] const Edge* find_edge(const NodeId& src, const NodeId& dst, EdgeKind kind) const;
    void set_edge_attrs(const NodeId& src, const NodeId& dst, EdgeKind kind, json attrs);

    [[nodiscard]] bool contains(const NodeId& id) const { return nodes_.contains(id); }
    [[nodiscard]] const Node& node(const NodeId& id) const;
    [[nodiscard]] const Node& node(const NodeId& id, NodeKind expected) const;
    [[nodiscard]] const Node* find(const NodeId& id) const;
    [[nodiscard]] std::vector<NodeId> nodes_of_kind(NodeKind kind) const;
    [[nodiscard]] std::size_t node_count() const noexcept { return nodes_.size(); }
    [[nodiscard]] std::size_t edge_count() const noexcept { return edges_.size(); }
    [[nodiscard]] const std::map<NodeId, Node>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] std::vector<const Edge*> edges() const;

    [[nodiscard]] std::vector<const Edge*> out_edges(const NodeId& src, EdgeKind kind) const;
    [[nodiscard]] std::vector<const Edge*> in_edges(const NodeId& dst, EdgeKind kind) const;

    void set_compliance_status(const NodeId& asset, const std::string& status_id);
    void set_asset_tier(const NodeId& asset, const std::string& tier_id);
    void update_signal(const NodeId& signal, SignalData data);

    void add_tier(TierDef tier);
    void upsert_tier(TierDef tier);
    [[nodiscard]] const TierDef& tier(const std::string& tier_id) const;
    [[nodiscard]] const std::map<std::string, TierDef>& tiers() const noexcept { return tiers_; }
    void add_status(StatusDef status);
    [[nodiscard]] bool has_status(const std::string& status_id) const { return statuses_.contains(status_id); }
    [[nodiscard]] const std::map<std::string, StatusDef>& statuses() const noexcept { return statuses_; }

    // Governance queries.
    [[nodiscard]] bool ownership_gap(const NodeId& asset) const;
    [[nodiscard]] NodeSet owners(const NodeId& asset) const;
    [[nodiscard]] NodeSet owned_assets(const NodeId& unit) const;
    [[nodiscard]] NodeSet units_of(const NodeId& org) const;
    [[nodiscard]] NodeSet affected_components(const NodeId& signal) const;
    [[nodiscard]] NodeSet affected_assets(const NodeId& signal) const;
    [[nodiscard]] NodeSet affected_units(const NodeId& signal) const;
    [[nodiscard]] GovernanceMetrics governance_metrics(const NodeId& signal) const;

    /// Full-graph integrity audit; returns one message per violation.
    [[nodiscard]] std::vector<std::string> audit() const;

    [[nodiscard]] json to_json() const;
    static OrgGraph from_json(const json& doc);

    bool operator==(const OrgGraph& other) const;

private:
    using EdgeKey = std::tuple<NodeId, EdgeKind, NodeId>;

    NodeId fresh_id(NodeKind kind);
    void validate_node(const Node& node) const;
    static json normalize_edge_attrs(EdgeKind kind, const json& attrs);

    std::map<NodeId, Node> nodes_;
    std::map<EdgeKey, Edge> edges_;    // (src, kind, dst)
    std::map<EdgeKey, const Edge*> reverse_;  // (dst, kind, src), points into edges_
    std::map<std::string, TierDef> tiers_;
    std::map<std::string, StatusDef> statuses_;
    std::uint64_t next_seq_ = 1;
};

json node_to_json(const Node& node);
Node node_from_json(const json& doc);
json edge_to_json(const Edge& edge);
Edge edge_from_json(const json& doc);
json tier_to_json(const TierDef& tier);
TierDef tier_from_json(const json& doc);
json status_to_json(const StatusDef& status);
StatusDef status_from_json(const json& doc);
json to_json(const NodeSet& set);

} // namespace deptex::graph

template <>
struct std::hash<deptex::graph::NodeId> {
    std::size_t operator()(const deptex::graph::NodeId& id) const noexcept
    {
        return std::hash<std::string>{}(id.value);
    }
};
