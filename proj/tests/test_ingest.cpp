#include "doctest.h"
#include "support.hpp"

#include <algorithm>

#include "deptex/error.hpp"
#include "deptex/ingest.hpp"
#include "deptex/semver.hpp"

using namespace deptex;
using namespace deptex::ingest;
using testing_support::json;

namespace {

// Independent precedence check: numeric triple first, then the prerelease
// rules (absent > present, numeric < alphanumeric, shorter prefix first).
int oracle_compare(const std::string& a, const std::string& b)
{
    auto split = [](const std::string& v) {
        std::string core = v;
        std::string pre;
        if (auto plus = core.find('+'); plus != std::string::npos) {
            core = core.substr(0, plus);
        }
        if (auto dash = core.find('-'); dash != std::string::npos) {
            pre = core.substr(dash + 1);
            core = core.substr(0, dash);
        }
        std::vector<unsigned long long> nums;
        std::stringstream ss(core);
        std::string part;
        while (std::getline(ss, part, '.')) {
            nums.push_back(std::stoull(part));
        }
        std::vector<std::string> ids;
        if (!pre.empty()) {
            std::stringstream ps(pre);
            while (std::getline(ps, part, '.')) {
                ids.push_back(part);
            }
        }
        return std::pair{nums, ids};
    };
    const auto [na, pa] = split(a);
    const auto [nb, pb] = split(b);
    if (na != nb) {
        return na < nb ? -1 : 1;
    }
    if (pa.empty() || pb.empty()) {
        return pa.empty() == pb.empty() ? 0 : (pa.empty() ? 1 : -1);
    }
    for (std::size_t i = 0; i < std::min(pa.size(), pb.size()); ++i) {
        const bool da = std::all_of(pa[i].begin(), pa[i].end(), ::isdigit);
        const bool db = std::all_of(pb[i].begin(), pb[i].end(), ::isdigit);
        if (da && db) {
            const auto x = std::stoull(pa[i]);
            const auto y = std::stoull(pb[i]);
            if (x != y) {
                return x < y ? -1 : 1;
            }
        } else if (da != db) {
            return da ? -1 : 1;
        } else if (pa[i] != pb[i]) {
            return pa[i] < pb[i] ? -1 : 1;
        }
    }
    if (pa.size() == pb.size()) {
        return 0;
    }
    return pa.size() < pb.size() ? -1 : 1;
}

std::string random_version(std::mt19937_64& rng)
{
    auto n = [&](int hi) { return std::to_string(std::uniform_int_distribution<int>(0, hi)(rng)); };
    std::string v = n(3) + "." + n(3) + "." + n(3);
    if (testing_support::coin(rng, 0.5)) {
        const std::vector<std::string> ids{"alpha", "beta", "rc", "1", "2", "11", "x-y"};
        v += "-" + testing_support::pick(rng, ids);
        if (testing_support::coin(rng, 0.5)) {
            v += "." + testing_support::pick(rng, ids);
        }
    }
    if (testing_support::coin(rng, 0.2)) {
        v += "+build." + n(9);
    }
    return v;
}

int sign(std::weak_ordering o)
{
    return o < 0 ? -1 : (o > 0 ? 1 : 0);
}

json cdx_component(const std::string& purl, bool direct = true, const std::string& scope = "runtime",
                   std::vector<std::string> licenses = {})
{
    json lic = json::array();
    for (const auto& l : licenses) {
        lic.push_back({{"license", {{"id", l}}}});
    }
    const auto p = Purl::parse(purl);
    return {{"type", "library"},
            {"name", p.name},
            {"version", p.version},
            {"purl", purl},
            {"licenses", lic},
            {"properties",
             {{{"name", "deptex:direct"}, {"value", direct ? "true" : "false"}},
              {{"name", "deptex:scope"}, {"value", scope}},
              {{"name", "deptex:depth"}, {"value", direct ? "1" : "2"}}}}};
}

json cdx(std::vector<json> comps)
{
    return {{"bomFormat", "CycloneDX"}, {"specVersion", "1.5"}, {"components", comps}};
}

} // namespace

TEST_CASE("purl parsing")
{
    const auto p = Purl::parse("pkg:maven/org.apache.logging.log4j/log4j-core@2.14.1?type=jar#src");
    CHECK(p.type == "maven");
    CHECK(p.namespace_ == "org.apache.logging.log4j");
    CHECK(p.name == "log4j-core");
    CHECK(p.version == "2.14.1");
    CHECK(p.base() == "pkg:maven/org.apache.logging.log4j/log4j-core");
    CHECK(purl_base("pkg:npm/lodash@4.17.21") == "pkg:npm/lodash");
    CHECK_THROWS_AS(Purl::parse("npm/lodash"), Error);
}

TEST_CASE("cvss 3.x base scores")
{
    CHECK(cvss3_base_score("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H") == doctest::Approx(9.8));
    CHECK(cvss3_base_score("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:C/C:H/I:H/A:H") == doctest::Approx(10.0));
    CHECK(cvss3_base_score("CVSS:3.0/AV:L/AC:L/PR:L/UI:N/S:U/C:H/I:H/A:H") == doctest::Approx(7.8));
    CHECK(cvss3_base_score("CVSS:3.1/AV:N/AC:L/PR:N/UI:R/S:C/C:L/I:L/A:N") == doctest::Approx(6.1));
    CHECK(cvss3_base_score("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:N/I:N/A:N") == doctest::Approx(0.0));
}

TEST_CASE("semver precedence chain")
{
    const std::vector<std::string> chain{"1.0.0-alpha",  "1.0.0-alpha.1", "1.0.0-alpha.beta", "1.0.0-beta",
                                         "1.0.0-beta.2", "1.0.0-beta.11", "1.0.0-rc.1",       "1.0.0",
                                         "1.0.1",        "1.1.0",         "2.0.0"};
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
        CHECK(Version::parse(chain[i]) < Version::parse(chain[i + 1]));
    }
    CHECK(Version::parse("1.0.0+build.5") == Version::parse("1.0.0"));
    CHECK(Version::parse("v1.2.3") == Version::parse("1.2.3"));
    CHECK_FALSE(Version::parse("2023-07-01").is_semver());
}

TEST_CASE("semver ordering agrees with an independent comparator")
{
    std::mt19937_64 rng(3);
    for (int i = 0; i < 3000; ++i) {
        const auto a = random_version(rng);
        const auto b = random_version(rng);
        INFO(a << " vs " << b);
        CHECK(sign(Version::parse(a) <=> Version::parse(b)) == oracle_compare(a, b));
    }
}

TEST_CASE("version ranges")
{
    VersionRange r{std::nullopt, "2.17.0", std::nullopt};
    CHECK(r.contains(Version::parse("2.14.1")));
    CHECK_FALSE(r.contains(Version::parse("2.17.0")));
    VersionRange last{"1.0.0", std::nullopt, "1.4.2"};
    CHECK(last.contains(Version::parse("1.4.2")));
    CHECK_FALSE(last.contains(Version::parse("1.4.3")));
    CHECK_FALSE(last.contains(Version::parse("0.9.9")));
    AffectedPackage pinned{"pkg:npm/x", {}, {"1.0.0"}};
    CHECK(pinned.matches("1.0.0"));
    CHECK_FALSE(pinned.matches("1.0.1"));
}

TEST_CASE("sbom parsing and errors")
{
    const auto doc = parse_sbom(cdx({cdx_component("pkg:npm/express@4.18.2", true, "runtime", {"MIT"}),
                                     cdx_component("pkg:npm/jest@29.0.0", false, "dev")}));
    REQUIRE(doc.components.size() == 2);
    CHECK(doc.components[0].licenses == std::vector<std::string>{"MIT"});
    CHECK(doc.components[1].scope == graph::Scope::Dev);
    CHECK_FALSE(doc.components[1].direct);

    json missing = cdx({cdx_component("pkg:npm/a@1.0.0")});
    missing["components"][0].erase("purl");
    CHECK_THROWS_WITH_AS(parse_sbom(missing), doctest::Contains("purl"), Error);

    const json dup = cdx({cdx_component("pkg:npm/a@1.0.0"), cdx_component("pkg:npm/a@1.0.0")});
    try {
        parse_sbom(dup);
        FAIL("duplicate purls accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvariantViolation);
    }
    CHECK_THROWS_AS(parse_sbom(std::string_view("{\"components\": [")), Error);
}

TEST_CASE("sbom serialize/parse round trip")
{
    std::mt19937_64 rng(5);
    for (int round = 0; round < 200; ++round) {
        SbomDocument doc;
        doc.asset_ref = "svc-" + std::to_string(round);
        const int n = std::uniform_int_distribution<int>(0, 12)(rng);
        for (int i = 0; i < n; ++i) {
            SbomComponent c;
            c.version = random_version(rng);
            c.name = "lib" + std::to_string(i);
            c.purl = "pkg:npm/" + c.name + "@" + c.version;
            c.direct = testing_support::coin(rng);
            c.depth = c.direct ? 1 : std::uniform_int_distribution<int>(2, 6)(rng);
            c.scope = testing_support::coin(rng) ? graph::Scope::Runtime : graph::Scope::Test;
            if (testing_support::coin(rng)) {
                c.licenses = {"Apache-2.0"};
            }
            doc.components.push_back(c);
        }
        CHECK(parse_sbom(json::parse(serialize_sbom(doc).dump())) == doc);
    }
}

TEST_CASE("apply_sbom reconciles and is idempotent")
{
    graph::OrgGraph g;
    const auto asset = g.add_node(graph::NodeKind::Asset, {{"id", "svc"}});
    const auto v1 = parse_sbom(cdx({cdx_component("pkg:npm/a@1.0.0"), cdx_component("pkg:npm/b@1.0.0", false)}));
    auto r = apply_sbom(g, v1, asset);
    CHECK(r.added == 2);
    CHECK(r.removed == 0);
    const auto snapshot = g;
    r = apply_sbom(g, v1, asset);
    CHECK(r.added == 0);
    CHECK(r.removed == 0);
    CHECK(g == snapshot);

    const auto v2 = parse_sbom(cdx({cdx_component("pkg:npm/a@1.0.0"), cdx_component("pkg:npm/c@3.0.0")}));
    r = apply_sbom(g, v2, asset);
    CHECK(r.added == 1);
    CHECK(r.removed == 1);
    CHECK(g.out_edges(asset, graph::EdgeKind::DependsOn).size() == 2);
}

TEST_CASE("dependency delta pairs upgrades by package")
{
    const auto base = parse_sbom(cdx({cdx_component("pkg:npm/a@1.0.0"), cdx_component("pkg:npm/b@1.0.0"),
                                      cdx_component("pkg:npm/c@1.0.0")}));
    const auto head = parse_sbom(cdx({cdx_component("pkg:npm/a@1.0.0"), cdx_component("pkg:npm/b@2.0.0"),
                                      cdx_component("pkg:npm/d@1.0.0", true, "runtime", {"GPL-3.0"})}));
    const auto d = dependency_delta(base, head);
    REQUIRE(d.added.size() == 1);
    CHECK(d.added[0].purl == "pkg:npm/d@1.0.0");
    REQUIRE(d.removed.size() == 1);
    CHECK(d.removed[0].purl == "pkg:npm/c@1.0.0");
    REQUIRE(d.upgraded.size() == 1);
    CHECK(d.upgraded[0].from == "1.0.0");
    CHECK(d.upgraded[0].to == "2.0.0");
    const json j = delta_to_json(d);
    CHECK(j["added_licenses"] == json::array({"GPL-3.0"}));
    CHECK(dependency_delta(head, head).empty());
}

TEST_CASE("osv records parse with computed severity")
{
    const json rec{{"id", "GHSA-jfh8-c2jp-5v3q"},
                   {"summary", "Log4Shell"},
                   {"severity", {{{"type", "CVSS_V3"}, {"score", "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:C/C:H/I:H/A:H"}}}},
                   {"affected",
                    {{{"package", {{"ecosystem", "Maven"}, {"name", "org.apache.logging.log4j:log4j-core"}}},
                      {"ranges", {{{"type", "ECOSYSTEM"}, {"events", {{{"introduced", "2.0.0"}}, {{"fixed", "2.15.0"}}}}}}}}}}};
    const auto e = parse_osv_record(rec);
    CHECK(e.external_id == "GHSA-jfh8-c2jp-5v3q");
    CHECK(e.severity_cvss == doctest::Approx(10.0));
    REQUIRE(e.affected_purls.size() == 1);
    CHECK(e.affected_purls[0].purl == "pkg:maven/org.apache.logging.log4j/log4j-core");
    CHECK(e.affected_purls[0].matches("2.14.1"));
    CHECK_FALSE(e.affected_purls[0].matches("2.15.0"));
    CHECK(parse_osv_record(serialize_osv_record(e)) == e);

    json no_sev = rec;
    no_sev.erase("severity");
    CHECK_THROWS_AS(parse_osv_record(no_sev), Error);
    json empty = rec;
    empty["affected"] = json::array();
    try {
        parse_osv_record(empty);
        FAIL("empty affected accepted");
    } catch (const Error& err) {
        CHECK(err.code() == ErrorCode::MalformedRange);
    }
}

TEST_CASE("vulnerability matching agrees with a quadratic scan")
{
    std::mt19937_64 rng(9);
    for (int round = 0; round < 30; ++round) {
        graph::OrgGraph g;
        const auto asset = g.add_node(graph::NodeKind::Asset, {{"id", "svc"}});
        std::vector<std::pair<std::string, std::string>> comps;  // purl, version
        for (int i = 0; i < 15; ++i) {
            const std::string name = "pkg" + std::to_string(i % 5);
            const std::string version = random_version(rng);
            const std::string purl = "pkg:npm/" + name + "@" + version;
            if (g.contains(graph::NodeId(purl))) {
                continue;
            }
            g.add_node(graph::NodeKind::Comp, {{"purl", purl}, {"version", version}});
            g.add_edge({asset, graph::NodeId(purl), graph::EdgeKind::DependsOn, json::object()});
            comps.emplace_back(purl, version);
        }
        std::vector<VulnFeedEntry> entries;
        for (int k = 0; k < 4; ++k) {
            VulnFeedEntry e;
            e.external_id = "OSV-" + std::to_string(round) + "-" + std::to_string(k);
            e.severity_cvss = 5.0;
            AffectedPackage p;
            p.purl = "pkg:npm/pkg" + std::to_string(k);
            VersionRange r;
            r.fixed = random_version(rng);
            p.ranges.push_back(r);
            e.affected_purls.push_back(p);
            entries.push_back(e);
        }
        const auto matches = match_vulnerabilities(g, entries);
        for (const auto& e : entries) {
            graph::NodeSet expected;
            for (const auto& [purl, version] : comps) {
                for (const auto& p : e.affected_purls) {
                    if (purl_base(purl) == p.purl && p.matches(version)) {
                        expected.insert(graph::NodeId(purl));
                    }
                }
            }
            const graph::NodeId sig(e.external_id);
            if (expected.empty()) {
                CHECK_FALSE(g.contains(sig));
            } else {
                REQUIRE(g.contains(sig));
                CHECK(g.affected_components(sig) == expected);
            }
        }
        CHECK(g.audit().empty());
    }
}
