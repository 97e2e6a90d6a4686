#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include "deptex/error.hpp"
#include "deptex/ingest.hpp"

namespace deptex::ingest {

namespace {

[[noreturn]] void malformed(const std::string& msg)
{
    throw Error(ErrorCode::MalformedDocument, msg);
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string property_text(const json& v)
{
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_boolean()) {
        return v.get<bool>() ? "true" : "false";
    }
    if (v.is_number_integer()) {
        return std::to_string(v.get<long long>());
    }
    malformed("property value must be a string");
}

} // namespace

Purl Purl::parse(std::string_view text)
{
    if (text.size() < 4 || lower(std::string(text.substr(0, 4))) != "pkg:") {
        malformed("not a package URL: '" + std::string(text) + "'");
    }
    std::string_view rest = text.substr(4);
    while (!rest.empty() && rest.front() == '/') {
        rest.remove_prefix(1);
    }
    Purl p;
    if (auto hash = rest.find('#'); hash != std::string_view::npos) {
        p.subpath = std::string(rest.substr(hash + 1));
        rest = rest.substr(0, hash);
    }
    if (auto q = rest.find('?'); q != std::string_view::npos) {
        p.qualifiers = std::string(rest.substr(q + 1));
        rest = rest.substr(0, q);
    }
    const auto slash = rest.find('/');
    if (slash == std::string_view::npos || slash == 0) {
        malformed("package URL lacks a type: '" + std::string(text) + "'");
    }
    p.type = lower(std::string(rest.substr(0, slash)));
    std::string_view path = rest.substr(slash + 1);
    const auto last_slash = path.rfind('/');
    const auto at = path.rfind('@');
    if (at != std::string_view::npos && (last_slash == std::string_view::npos || at > last_slash)) {
        p.version = std::string(path.substr(at + 1));
        path = path.substr(0, at);
    }
    if (const auto ns_end = path.rfind('/'); ns_end != std::string_view::npos) {
        p.namespace_ = std::string(path.substr(0, ns_end));
        p.name = std::string(path.substr(ns_end + 1));
    } else {
        p.name = std::string(path);
    }
    if (p.name.empty()) {
        malformed("package URL lacks a name: '" + std::string(text) + "'");
    }
    return p;
}

std::string Purl::base() const
{
    std::string out = "pkg:" + type + "/";
    if (!namespace_.empty()) {
        out += namespace_ + "/";
    }
    return out + name;
}

std::string purl_base(std::string_view text)
{
    try {
        return Purl::parse(text).base();
    } catch (const Error&) {
        return std::string(text);
    }
}

double cvss3_base_score(std::string_view vector)
{
    if (!vector.starts_with("CVSS:3.")) {
        malformed("unsupported CVSS vector '" + std::string(vector) + "'");
    }
    std::map<std::string, std::string> metrics;
    std::size_t start = vector.find('/');
    while (start != std::string_view::npos) {
        const auto end = vector.find('/', start + 1);
        const auto part = vector.substr(start + 1, end == std::string_view::npos ? std::string_view::npos : end - start - 1);
        const auto colon = part.find(':');
        if (colon == std::string_view::npos) {
            malformed("bad CVSS metric '" + std::string(part) + "'");
        }
        metrics[std::string(part.substr(0, colon))] = std::string(part.substr(colon + 1));
        start = end;
    }
    auto get = [&](const char* key) -> const std::string& {
        auto it = metrics.find(key);
        if (it == metrics.end()) {
            malformed(std::string("CVSS vector lacks metric ") + key);
        }
        return it->second;
    };
    auto pick = [&](const char* key, std::initializer_list<std::pair<const char*, double>> table) {
        const std::string& v = get(key);
        for (const auto& [name, weight] : table) {
            if (v == name) {
                return weight;
            }
        }
        malformed(std::string("bad CVSS value ") + key + ":" + v);
    };

    const bool changed = pick("S", {{"U", 0.0}, {"C", 1.0}}) > 0.5;
    const double av = pick("AV", {{"N", 0.85}, {"A", 0.62}, {"L", 0.55}, {"P", 0.2}});
    const double ac = pick("AC", {{"L", 0.77}, {"H", 0.44}});
    const double pr = changed ? pick("PR", {{"N", 0.85}, {"L", 0.68}, {"H", 0.5}})
                              : pick("PR", {{"N", 0.85}, {"L", 0.62}, {"H", 0.27}});
    const double ui = pick("UI", {{"N", 0.85}, {"R", 0.62}});
    const double c = pick("C", {{"H", 0.56}, {"L", 0.22}, {"N", 0.0}});
    const double i = pick("I", {{"H", 0.56}, {"L", 0.22}, {"N", 0.0}});
    const double a = pick("A", {{"H", 0.56}, {"L", 0.22}, {"N", 0.0}});

    const double iss = 1.0 - (1.0 - c) * (1.0 - i) * (1.0 - a);
    const double impact = changed ? 7.52 * (iss - 0.029) - 3.25 * std::pow(iss - 0.02, 15) : 6.42 * iss;
    const double exploitability = 8.22 * av * ac * pr * ui;
    if (impact <= 0.0) {
        return 0.0;
    }
    const double raw = changed ? std::min(1.08 * (impact + exploitability), 10.0) : std::min(impact + exploitability, 10.0);
    // Round up to one decimal, working in integers to dodge float noise.
    const auto scaled = static_cast<long long>(std::llround(raw * 100000.0));
    if (scaled % 10000 == 0) {
        return static_cast<double>(scaled) / 100000.0;
    }
    return (static_cast<double>(scaled / 10000) + 1.0) / 10.0;
}

SbomDocument parse_sbom(std::string_view text)
{
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) {
        malformed("SBOM is not well-formed JSON");
    }
    return parse_sbom(doc);
}

SbomDocument parse_sbom(const json& doc)
{
    if (!doc.is_object()) {
        malformed("SBOM root must be an object");
    }
    SbomDocument out;
    if (auto meta = doc.find("metadata"); meta != doc.end() && meta->is_object()) {
        if (auto comp = meta->find("component"); comp != meta->end() && comp->is_object()) {
            if (auto ref = comp->find("bom-ref"); ref != comp->end() && ref->is_string()) {
                out.asset_ref = ref->get<std::string>();
            } else if (auto name = comp->find("name"); name != comp->end() && name->is_string()) {
                out.asset_ref = name->get<std::string>();
            }
        }
    }
    auto comps = doc.find("components");
    if (comps == doc.end()) {
        return out;
    }
    if (!comps->is_array()) {
        malformed("components must be an array");
    }
    std::set<std::string> seen;
    for (std::size_t idx = 0; idx < comps->size(); ++idx) {
        const json& c = (*comps)[idx];
        const std::string path = "components[" + std::to_string(idx) + "]";
        if (!c.is_object()) {
            malformed(path + " must be an object");
        }
        SbomComponent sc;
        auto purl = c.find("purl");
        if (purl == c.end()) {
            throw Error(ErrorCode::MissingField, path + ".purl");
        }
        if (!purl->is_string()) {
            malformed(path + ".purl must be a string");
        }
        sc.purl = purl->get<std::string>();
        if (sc.purl.empty()) {
            throw Error(ErrorCode::InvariantViolation, path + ".purl must be non-empty");
        }
        if (!seen.insert(sc.purl).second) {
            throw Error(ErrorCode::InvariantViolation, path + ".purl '" + sc.purl + "' is duplicated");
        }
        std::optional<Purl> parsed;
        try {
            parsed = Purl::parse(sc.purl);
        } catch (const Error&) {
        }
        if (auto name = c.find("name"); name != c.end()) {
            if (!name->is_string()) {
                malformed(path + ".name must be a string");
            }
            sc.name = name->get<std::string>();
        } else if (parsed) {
            sc.name = parsed->name;
        } else {
            throw Error(ErrorCode::MissingField, path + ".name");
        }
        if (auto version = c.find("version"); version != c.end()) {
            if (!version->is_string()) {
                malformed(path + ".version must be a string");
            }
            sc.version = version->get<std::string>();
        } else if (parsed && !parsed->version.empty()) {
            sc.version = parsed->version;
        } else {
            throw Error(ErrorCode::MissingField, path + ".version");
        }
        if (auto licenses = c.find("licenses"); licenses != c.end()) {
            if (!licenses->is_array()) {
                malformed(path + ".licenses must be an array");
            }
            for (const auto& l : *licenses) {
                if (auto lic = l.find("license"); lic != l.end() && lic->is_object()) {
                    if (auto id = lic->find("id"); id != lic->end() && id->is_string()) {
                        sc.licenses.push_back(id->get<std::string>());
                    } else if (auto nm = lic->find("name"); nm != lic->end() && nm->is_string()) {
                        sc.licenses.push_back(nm->get<std::string>());
                    }
                } else if (auto expr = l.find("expression"); expr != l.end() && expr->is_string()) {
                    sc.licenses.push_back(expr->get<std::string>());
                }
            }
        }
        std::optional<bool> direct;
        std::optional<int> depth;
        if (auto props = c.find("properties"); props != c.end()) {
            if (!props->is_array()) {
                malformed(path + ".properties must be an array");
            }
            for (const auto& p : *props) {
                if (!p.is_object() || !p.contains("name") || !p.at("name").is_string()) {
                    continue;
                }
                const std::string key = p.at("name").get<std::string>();
                if (!key.starts_with("deptex:")) {
                    continue;
                }
                if (!p.contains("value")) {
                    throw Error(ErrorCode::MissingField, path + ".properties." + key);
                }
                const std::string value = property_text(p.at("value"));
                if (key == "deptex:direct") {
                    if (value != "true" && value != "false") {
                        malformed(path + ": deptex:direct must be true or false");
                    }
                    direct = value == "true";
                } else if (key == "deptex:scope") {
                    try {
                        sc.scope = graph::parse_scope(value);
                    } catch (const Error&) {
                        malformed(path + ": unknown deptex:scope '" + value + "'");
                    }
                } else if (key == "deptex:depth") {
                    int d = 0;
                    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), d);
                    if (ec != std::errc{} || ptr != value.data() + value.size() || d < 1) {
                        throw Error(ErrorCode::InvariantViolation, path + ": deptex:depth must be an integer >= 1");
                    }
                    depth = d;
                }
            }
        }
        sc.direct = direct.value_or(depth ? *depth == 1 : true);
        sc.depth = depth.value_or(sc.direct ? 1 : 2);
        if ((sc.depth == 1) != sc.direct) {
            throw Error(ErrorCode::InvariantViolation,
                        path + ": depth " + std::to_string(sc.depth) + " contradicts direct=" + (sc.direct ? "true" : "false"));
        }
        out.components.push_back(std::move(sc));
    }
    return out;
}

json component_to_json(const SbomComponent& c)
{
    return json{{"purl", c.purl},         {"name", c.name},   {"version", c.version},
                {"licenses", c.licenses}, {"direct", c.direct}, {"scope", graph::to_string(c.scope)},
                {"depth", c.depth}};
}

json serialize_sbom(const SbomDocument& doc)
{
    json comps = json::array();
    for (const auto& c : doc.components) {
        json licenses = json::array();
        for (const auto& l : c.licenses) {
            licenses.push_back({{"license", {{"id", l}}}});
        }
        comps.push_back({
            {"type", "library"},
            {"name", c.name},
            {"version", c.version},
            {"purl", c.purl},
            {"licenses", licenses},
            {"properties",
             json::array({{{"name", "deptex:direct"}, {"value", c.direct ? "true" : "false"}},
                          {{"name", "deptex:scope"}, {"value", graph::to_string(c.scope)}},
                          {{"name", "deptex:depth"}, {"value", std::to_string(c.depth)}}})},
        });
    }
    json out{{"bomFormat", "CycloneDX"}, {"specVersion", "1.5"}, {"components", comps}};
    if (!doc.asset_ref.empty()) {
        out["metadata"] = {{"component", {{"bom-ref", doc.asset_ref}, {"name", doc.asset_ref}}}};
    }
    return out;
}

ApplyResult apply_sbom(graph::OrgGraph& g, const SbomDocument& doc, const NodeId& asset)
{
    (void)g.node(asset, graph::NodeKind::Asset);

    std::map<NodeId, const SbomComponent*> wanted;
    for (const auto& c : doc.components) {
        if (c.purl.empty() || !wanted.emplace(NodeId(c.purl), &c).second) {
            throw Error(ErrorCode::InvariantViolation, "SBOM component purls must be non-empty and unique");
        }
        if ((c.depth == 1) != c.direct || c.depth < 1) {
            throw Error(ErrorCode::InvariantViolation, "component '" + c.purl + "' violates depth/direct rule");
        }
    }

    ApplyResult result;
    for (const graph::Edge* e : g.out_edges(asset, graph::EdgeKind::DependsOn)) {
        if (!wanted.contains(e->dst)) {
            // remove_edge invalidates e, so copy the key first.
            const NodeId dst = e->dst;
            g.remove_edge(asset, dst, graph::EdgeKind::DependsOn);
            ++result.removed;
        }
    }
    for (const auto& [comp_id, c] : wanted) {
        if (!g.contains(comp_id)) {
            g.add_node(graph::NodeKind::Comp,
                       json{{"id", c->purl}, {"name", c->name}, {"purl", c->purl}, {"version", c->version},
                            {"licenses", c->licenses}});
        } else {
            (void)g.node(comp_id, graph::NodeKind::Comp);
        }
        json attrs{{"direct", c->direct}, {"scope", graph::to_string(c->scope)}, {"depth", c->depth}};
        if (const graph::Edge* existing = g.find_edge(asset, comp_id, graph::EdgeKind::DependsOn)) {
            if (existing->attrs != attrs) {
                g.set_edge_attrs(asset, comp_id, graph::EdgeKind::DependsOn, attrs);
            }
        } else {
            g.add_edge(graph::Edge{asset, comp_id, graph::EdgeKind::DependsOn, attrs});
            ++result.added;
        }
    }
    return result;
}

DependencyDelta dependency_delta(const SbomDocument& base, const SbomDocument& head)
{
    std::map<std::string, const SbomComponent*> old_by_purl;
    std::map<std::string, const SbomComponent*> new_by_purl;
    for (const auto& c : base.components) {
        old_by_purl.emplace(c.purl, &c);
    }
    for (const auto& c : head.components) {
        new_by_purl.emplace(c.purl, &c);
    }

    // Group the purls that did not survive verbatim by package identity.
    std::map<std::string, std::vector<const SbomComponent*>> gone;
    std::map<std::string, std::vector<const SbomComponent*>> fresh;
    for (const auto& [purl, c] : old_by_purl) {
        if (!new_by_purl.contains(purl)) {
            gone[purl_base(purl)].push_back(c);
        }
    }
    for (const auto& [purl, c] : new_by_purl) {
        if (!old_by_purl.contains(purl)) {
            fresh[purl_base(purl)].push_back(c);
        }
    }

    auto by_version = [](const SbomComponent* a, const SbomComponent* b) {
        return Version::parse(a->version) < Version::parse(b->version);
    };

    DependencyDelta delta;
    for (auto& [pkg, olds] : gone) {
        auto it = fresh.find(pkg);
        if (it == fresh.end()) {
            for (const auto* c : olds) {
                delta.removed.push_back(*c);
            }
            continue;
        }
        auto& news = it->second;
        std::stable_sort(olds.begin(), olds.end(), by_version);
        std::stable_sort(news.begin(), news.end(), by_version);
        const std::size_t paired = std::min(olds.size(), news.size());
        for (std::size_t i = 0; i < paired; ++i) {
            delta.upgraded.push_back(Upgrade{pkg, news[i]->name, olds[i]->version, news[i]->version, *news[i]});
        }
        for (std::size_t i = paired; i < olds.size(); ++i) {
            delta.removed.push_back(*olds[i]);
        }
        for (std::size_t i = paired; i < news.size(); ++i) {
            delta.added.push_back(*news[i]);
        }
        fresh.erase(it);
    }
    for (const auto& [pkg, news] : fresh) {
        for (const auto* c : news) {
            delta.added.push_back(*c);
        }
    }
    auto by_purl = [](const SbomComponent& a, const SbomComponent& b) { return a.purl < b.purl; };
    std::sort(delta.added.begin(), delta.added.end(), by_purl);
    std::sort(delta.removed.begin(), delta.removed.end(), by_purl);
    return delta;
}

json delta_to_json(const DependencyDelta& delta)
{
    json added = json::array();
    json removed = json::array();
    json upgraded = json::array();
    std::set<std::string> added_licenses;
    for (const auto& c : delta.added) {
        added.push_back(component_to_json(c));
        added_licenses.insert(c.licenses.begin(), c.licenses.end());
    }
    for (const auto& c : delta.removed) {
        removed.push_back(component_to_json(c));
    }
    for (const auto& u : delta.upgraded) {
        json j = component_to_json(u.component);
        j["package"] = u.package;
        j["from"] = u.from;
        j["to"] = u.to;
        upgraded.push_back(std::move(j));
        added_licenses.insert(u.component.licenses.begin(), u.component.licenses.end());
    }
    return json{{"added", added},
                {"removed", removed},
                {"upgraded", upgraded},
                {"added_licenses", json(std::vector<std::string>(added_licenses.begin(), added_licenses.end()))}};
}

} // namespace deptex::ingest
