#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "deptex/graph.hpp"
#include "deptex/semver.hpp"

namespace deptex::ingest {

using json = nlohmann::json;
using graph::NodeId;
using graph::Scope;

// ---------------------------------------------------------------------------
// Package URLs

struct Purl {
    std::string type;
    std::string namespace_;
    std::string name;
    std::string version;
    std::string qualifiers;
    std::string subpath;

    static Purl parse(std::string_view text);

    /// `pkg:type/namespace/name` without version, qualifiers or subpath.
    [[nodiscard]] std::string base() const;
};

/// Purl base of `text`, or `text` unchanged when it is not a package URL.
std::string purl_base(std::string_view text);

// ---------------------------------------------------------------------------
// CVSS

/// Base score of a CVSS v3.0/v3.1 vector string ("CVSS:3.1/AV:N/...").
double cvss3_base_score(std::string_view vector);

// ---------------------------------------------------------------------------
// SBOM (CycloneDX subset with deptex:* properties)

struct SbomComponent {
    std::string purl;
    std::string name;
    std::string version;
    std::vector<std::string> licenses;
    bool direct = true;
    Scope scope = Scope::Runtime;
    int depth = 1;

    bool operator==(const SbomComponent&) const = default;
};

struct SbomDocument {
    std::string asset_ref;
    std::vector<SbomComponent> components;

    bool operator==(const SbomDocument&) const = default;
};

SbomDocument parse_sbom(std::string_view text);
SbomDocument parse_sbom(const json& doc);
json serialize_sbom(const SbomDocument& doc);

struct ApplyResult {
    int added = 0;
    int removed = 0;
};

/// Reconciles the asset's depends_on edges so they mirror `doc` exactly,
/// creating component nodes (keyed by purl) on demand.
ApplyResult apply_sbom(graph::OrgGraph& g, const SbomDocument& doc, const NodeId& asset);

struct Upgrade {
    std::string package;  // purl base
    std::string name;
    std::string from;
    std::string to;
    SbomComponent component;  // the head-side component
};

struct DependencyDelta {
    std::vector<SbomComponent> added;
    std::vector<SbomComponent> removed;
    std::vector<Upgrade> upgraded;

    [[nodiscard]] bool empty() const noexcept { return added.empty() && removed.empty() && upgraded.empty(); }
};

/// Keyed by purl base: same package at a different version is an upgrade.
DependencyDelta dependency_delta(const SbomDocument& base, const SbomDocument& head);
json delta_to_json(const DependencyDelta& delta);
json component_to_json(const SbomComponent& c);

// ---------------------------------------------------------------------------
// Vulnerability feed (OSV subset)

struct VersionRange {
    std::optional<std::string> introduced;
    std::optional<std::string> fixed;
    std::optional<std::string> last_affected;

    [[nodiscard]] bool contains(const Version& v) const;
    bool operator==(const VersionRange&) const = default;
};

struct AffectedPackage {
    std::string purl;
    std::vector<VersionRange> ranges;
    std::vector<std::string> versions;

    /// No ranges and no explicit versions means every version is affected.
    [[nodiscard]] bool matches(const std::string& version) const;
    bool operator==(const AffectedPackage&) const = default;
};

struct VulnFeedEntry {
    std::string external_id;
    double severity_cvss = 0.0;
    double confidence = 1.0;
    std::string description;
    std::vector<AffectedPackage> affected_purls;

    bool operator==(const VulnFeedEntry&) const = default;
};

/// Accepts a single OSV record, an array of them, or {"vulns": [...]}.
std::vector<VulnFeedEntry> parse_vuln_feed(std::string_view text);
std::vector<VulnFeedEntry> parse_vuln_feed(const json& doc);
VulnFeedEntry parse_osv_record(const json& record);
json serialize_osv_record(const VulnFeedEntry& entry);

/// Validates range invariants; throws MalformedRange.
void validate_entry(const VulnFeedEntry& entry);

struct SignalMatch {
    NodeId signal;
    graph::NodeSet components;
};

/// Creates or refreshes a Signal node per entry that matches at least one
/// stored component, with affects edges reconciled to the matched set.
std::vector<SignalMatch> match_vulnerabilities(graph::OrgGraph& g, const std::vector<VulnFeedEntry>& entries);

} // namespace deptex::ingest
