#include <algorithm>
#include <charconv>
#include <map>

#include "deptex/error.hpp"
#include "deptex/ingest.hpp"

namespace deptex::ingest {

namespace {

[[noreturn]] void malformed(const std::string& msg)
{
    throw Error(ErrorCode::MalformedDocument, msg);
}

[[noreturn]] void bad_range(const std::string& msg)
{
    throw Error(ErrorCode::MalformedRange, msg);
}

const std::map<std::string, std::string>& ecosystem_types()
{
    static const std::map<std::string, std::string> table{
        {"npm", "npm"},         {"PyPI", "pypi"},     {"crates.io", "cargo"}, {"Maven", "maven"},
        {"Go", "golang"},       {"RubyGems", "gem"},  {"NuGet", "nuget"},     {"Packagist", "composer"},
        {"Hex", "hex"},         {"Pub", "pub"},       {"ConanCenter", "conan"}, {"vcpkg", "vcpkg"},
    };
    return table;
}

std::optional<double> score_value(const json& score)
{
    if (score.is_number()) {
        return score.get<double>();
    }
    if (!score.is_string()) {
        return std::nullopt;
    }
    const std::string s = score.get<std::string>();
    if (s.starts_with("CVSS:3.")) {
        return cvss3_base_score(s);
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc{} && ptr == s.data() + s.size()) {
        return v;
    }
    return std::nullopt;
}

std::optional<std::string> event_version(const json& ev, const char* key)
{
    auto it = ev.find(key);
    if (it == ev.end()) {
        return std::nullopt;
    }
    if (!it->is_string() || it->get<std::string>().empty()) {
        bad_range(std::string("range event '") + key + "' must be a non-empty string");
    }
    return it->get<std::string>();
}

std::vector<VersionRange> parse_events(const json& events)
{
    if (!events.is_array()) {
        bad_range("ranges[].events must be an array");
    }
    std::vector<VersionRange> out;
    std::optional<VersionRange> open;
    for (const auto& ev : events) {
        if (!ev.is_object()) {
            bad_range("range event must be an object");
        }
        if (auto intro = event_version(ev, "introduced")) {
            if (open) {
                out.push_back(*open);
            }
            open = VersionRange{};
            if (*intro != "0") {
                open->introduced = *intro;
            }
        } else if (auto fixed = event_version(ev, "fixed")) {
            if (!open) {
                open = VersionRange{};
            }
            open->fixed = *fixed;
            out.push_back(*open);
            open.reset();
        } else if (auto last = event_version(ev, "last_affected")) {
            if (!open) {
                open = VersionRange{};
            }
            open->last_affected = *last;
            out.push_back(*open);
            open.reset();
        }
    }
    if (open) {
        out.push_back(*open);
    }
    return out;
}

} // namespace

bool VersionRange::contains(const Version& v) const
{
    if (introduced && v < Version::parse(*introduced)) {
        return false;
    }
    if (fixed && !(v < Version::parse(*fixed))) {
        return false;
    }
    if (last_affected && Version::parse(*last_affected) < v) {
        return false;
    }
    return true;
}

bool AffectedPackage::matches(const std::string& version) const
{
    if (ranges.empty() && versions.empty()) {
        return true;
    }
    if (std::find(versions.begin(), versions.end(), version) != versions.end()) {
        return true;
    }
    if (ranges.empty()) {
        return false;
    }
    const Version v = Version::parse(version);
    return std::any_of(ranges.begin(), ranges.end(), [&](const VersionRange& r) { return r.contains(v); });
}

void validate_entry(const VulnFeedEntry& entry)
{
    if (entry.affected_purls.empty()) {
        bad_range("advisory '" + entry.external_id + "' lists no affected packages");
    }
    for (const auto& pkg : entry.affected_purls) {
        if (pkg.purl.empty()) {
            bad_range("advisory '" + entry.external_id + "' has an affected package without purl");
        }
        for (const auto& r : pkg.ranges) {
            if (r.introduced && r.fixed && !(Version::parse(*r.introduced) < Version::parse(*r.fixed))) {
                bad_range("range introduced " + *r.introduced + " is not below fixed " + *r.fixed);
            }
            if (r.introduced && r.last_affected && Version::parse(*r.last_affected) < Version::parse(*r.introduced)) {
                bad_range("range last_affected " + *r.last_affected + " is below introduced " + *r.introduced);
            }
        }
    }
}

VulnFeedEntry parse_osv_record(const json& record)
{
    if (!record.is_object()) {
        malformed("OSV record must be an object");
    }
    VulnFeedEntry e;
    auto id = record.find("id");
    if (id == record.end()) {
        throw Error(ErrorCode::MissingField, "id");
    }
    if (!id->is_string() || id->get<std::string>().empty()) {
        malformed("id must be a non-empty string");
    }
    e.external_id = id->get<std::string>();
    if (auto s = record.find("summary"); s != record.end() && s->is_string()) {
        e.description = s->get<std::string>();
    } else if (auto d = record.find("details"); d != record.end() && d->is_string()) {
        e.description = d->get<std::string>();
    }

    std::optional<double> severity;
    if (auto sev = record.find("severity"); sev != record.end()) {
        if (!sev->is_array()) {
            malformed(e.external_id + ": severity must be an array");
        }
        for (const auto& s : *sev) {
            if (!s.is_object() || !s.contains("score")) {
                malformed(e.external_id + ": severity[] entries need a score");
            }
            auto v = score_value(s.at("score"));
            if (!v) {
                malformed(e.external_id + ": unsupported severity score " + s.at("score").dump());
            }
            severity = std::max(severity.value_or(0.0), *v);
        }
    }
    const json* db = nullptr;
    if (auto it = record.find("database_specific"); it != record.end() && it->is_object()) {
        db = &*it;
    }
    if (!severity && db != nullptr && db->contains("cvss_score")) {
        severity = score_value(db->at("cvss_score"));
    }
    if (!severity) {
        throw Error(ErrorCode::MissingField, e.external_id + ": severity");
    }
    if (!(*severity >= 0.0 && *severity <= 10.0)) {
        malformed(e.external_id + ": severity outside [0, 10]");
    }
    e.severity_cvss = *severity;
    if (db != nullptr && db->contains("confidence")) {
        const json& c = db->at("confidence");
        if (!c.is_number() || c.get<double>() < 0.0 || c.get<double>() > 1.0) {
            malformed(e.external_id + ": confidence must be a number in [0, 1]");
        }
        e.confidence = c.get<double>();
    }

    if (auto affected = record.find("affected"); affected != record.end()) {
        if (!affected->is_array()) {
            malformed(e.external_id + ": affected must be an array");
        }
        for (const auto& a : *affected) {
            if (!a.is_object()) {
                malformed(e.external_id + ": affected[] must be objects");
            }
            AffectedPackage pkg;
            const json pkg_doc = a.value("package", json::object());
            std::string purl;
            if (auto p = pkg_doc.find("purl"); p != pkg_doc.end() && p->is_string()) {
                purl = p->get<std::string>();
            } else if (pkg_doc.contains("ecosystem") && pkg_doc.contains("name")) {
                const auto eco = pkg_doc.at("ecosystem").get<std::string>();
                auto t = ecosystem_types().find(eco);
                if (t == ecosystem_types().end()) {
                    continue;  // ecosystem we cannot express as a purl
                }
                std::string name = pkg_doc.at("name").get<std::string>();
                if (t->second == "maven") {
                    // group:artifact
                    std::replace(name.begin(), name.end(), ':', '/');
                }
                purl = "pkg:" + t->second + "/" + name;
            }
            if (purl.empty()) {
                bad_range(e.external_id + ": affected package lacks a purl");
            }
            std::string pinned;
            try {
                Purl parsed = Purl::parse(purl);
                pinned = parsed.version;
                pkg.purl = parsed.base();
            } catch (const Error&) {
                bad_range(e.external_id + ": affected purl '" + purl + "' is malformed");
            }
            if (auto ranges = a.find("ranges"); ranges != a.end()) {
                if (!ranges->is_array()) {
                    bad_range(e.external_id + ": ranges must be an array");
                }
                for (const auto& r : *ranges) {
                    if (r.value("type", "") == "GIT") {
                        continue;
                    }
                    if (!r.contains("events")) {
                        bad_range(e.external_id + ": range without events");
                    }
                    auto parsed = parse_events(r.at("events"));
                    pkg.ranges.insert(pkg.ranges.end(), parsed.begin(), parsed.end());
                }
            }
            if (auto versions = a.find("versions"); versions != a.end() && versions->is_array()) {
                for (const auto& v : *versions) {
                    if (v.is_string()) {
                        pkg.versions.push_back(v.get<std::string>());
                    }
                }
            }
            if (!pinned.empty() && pkg.ranges.empty() && pkg.versions.empty()) {
                pkg.versions.push_back(pinned);
            }
            e.affected_purls.push_back(std::move(pkg));
        }
    }
    validate_entry(e);
    return e;
}

std::vector<VulnFeedEntry> parse_vuln_feed(const json& doc)
{
    const json* list = &doc;
    if (doc.is_object() && doc.contains("vulns")) {
        list = &doc.at("vulns");
    }
    std::vector<VulnFeedEntry> out;
    if (list->is_array()) {
        for (const auto& r : *list) {
            out.push_back(parse_osv_record(r));
        }
    } else if (list->is_object()) {
        out.push_back(parse_osv_record(*list));
    } else {
        malformed("vulnerability feed must be an object or array");
    }
    return out;
}

std::vector<VulnFeedEntry> parse_vuln_feed(std::string_view text)
{
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) {
        malformed("vulnerability feed is not well-formed JSON");
    }
    return parse_vuln_feed(doc);
}

json serialize_osv_record(const VulnFeedEntry& entry)
{
    json affected = json::array();
    for (const auto& pkg : entry.affected_purls) {
        json ranges = json::array();
        for (const auto& r : pkg.ranges) {
            json events = json::array();
            events.push_back({{"introduced", r.introduced.value_or("0")}});
            if (r.fixed) {
                events.push_back({{"fixed", *r.fixed}});
            }
            if (r.last_affected) {
                events.push_back({{"last_affected", *r.last_affected}});
            }
            ranges.push_back({{"type", "ECOSYSTEM"}, {"events", events}});
        }
        json a{{"package", {{"purl", pkg.purl}}}, {"ranges", ranges}};
        if (!pkg.versions.empty()) {
            a["versions"] = pkg.versions;
        }
        affected.push_back(std::move(a));
    }
    return json{{"id", entry.external_id},
                {"summary", entry.description},
                {"severity", json::array({{{"type", "CVSS_SCORE"}, {"score", entry.severity_cvss}}})},
                {"database_specific", {{"confidence", entry.confidence}}},
                {"affected", affected}};
}

std::vector<SignalMatch> match_vulnerabilities(graph::OrgGraph& g, const std::vector<VulnFeedEntry>& entries)
{
    for (const auto& e : entries) {
        validate_entry(e);
    }

    struct Candidate {
        NodeId id;
        std::string version;
    };
    std::map<std::string, std::vector<Candidate>> by_package;
    for (const NodeId& id : g.nodes_of_kind(graph::NodeKind::Comp)) {
        const auto& comp = g.node(id).component();
        const std::string& purl = comp.purl.empty() ? id.str() : comp.purl;
        std::string version = comp.version;
        if (version.empty()) {
            try {
                version = Purl::parse(purl).version;
            } catch (const Error&) {
            }
        }
        by_package[purl_base(purl)].push_back({id, version});
    }

    std::vector<SignalMatch> out;
    for (const auto& e : entries) {
        graph::NodeSet matched;
        for (const auto& pkg : e.affected_purls) {
            auto it = by_package.find(pkg.purl);
            if (it == by_package.end()) {
                continue;
            }
            for (const auto& cand : it->second) {
                if (pkg.matches(cand.version)) {
                    matched.insert(cand.id);
                }
            }
        }

        const NodeId sid(e.external_id);
        const graph::Node* existing = g.find(sid);
        if (existing != nullptr && existing->kind() != graph::NodeKind::Signal) {
            throw Error(ErrorCode::DuplicateId, "id '" + sid.str() + "' is taken by a non-signal node");
        }
        if (matched.empty()) {
            if (existing != nullptr) {
                g.remove_node(sid);
            }
            continue;
        }
        graph::SignalData data{e.external_id, e.severity_cvss, e.confidence, e.description};
        if (existing != nullptr) {
            g.update_signal(sid, data);
            for (const graph::Edge* edge : g.out_edges(sid, graph::EdgeKind::Affects)) {
                if (!matched.contains(edge->dst)) {
                    const NodeId dst = edge->dst;
                    g.remove_edge(sid, dst, graph::EdgeKind::Affects);
                }
            }
        } else {
            graph::Node node;
            node.id = sid;
            node.name = e.external_id;
            node.data = data;
            g.add_node(std::move(node));
        }
        for (const NodeId& comp : matched) {
            json attrs{{"confidence", e.confidence}};
            if (const graph::Edge* edge = g.find_edge(sid, comp, graph::EdgeKind::Affects)) {
                if (edge->attrs != attrs) {
                    g.set_edge_attrs(sid, comp, graph::EdgeKind::Affects, attrs);
                }
            } else {
                g.add_edge(graph::Edge{sid, comp, graph::EdgeKind::Affects, attrs});
            }
        }
        out.push_back(SignalMatch{sid, std::move(matched)});
    }
    return out;
}

} // namespace deptex::ingest
