#include "deptex/semver.hpp"

#include <charconv>
#include <optional>

#include "deptex/log.hpp"

namespace deptex::ingest {

namespace {

bool all_digits(std::string_view s)
{
    return !s.empty() && s.find_first_not_of("0123456789") == std::string_view::npos;
}

std::optional<std::uint64_t> numeric_part(std::string_view s)
{
    if (!all_digits(s) || (s.size() > 1 && s.front() == '0')) {
        return std::nullopt;
    }
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

bool identifier_chars(std::string_view s)
{
    if (s.empty()) {
        return false;
    }
    for (char c : s) {
        const bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '-';
        if (!ok) {
            return false;
        }
    }
    return true;
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            return out;
        }
        start = pos + 1;
    }
}

struct Parsed {
    std::uint64_t major = 0, minor = 0, patch = 0;
    std::vector<Version::Identifier> pre;
};

std::optional<Parsed> parse_semver(std::string_view text)
{
    if (!text.empty() && (text.front() == 'v' || text.front() == 'V')) {
        text.remove_prefix(1);
    }
    if (const auto plus = text.find('+'); plus != std::string_view::npos) {
        for (auto id : split(text.substr(plus + 1), '.')) {
            if (!identifier_chars(id)) {
                return std::nullopt;
            }
        }
        text = text.substr(0, plus);
    }
    std::string_view pre;
    if (const auto dash = text.find('-'); dash != std::string_view::npos) {
        pre = text.substr(dash + 1);
        text = text.substr(0, dash);
        if (pre.empty()) {
            return std::nullopt;
        }
    }
    const auto core = split(text, '.');
    if (core.size() != 3) {
        return std::nullopt;
    }
    Parsed p;
    auto major = numeric_part(core[0]);
    auto minor = numeric_part(core[1]);
    auto patch = numeric_part(core[2]);
    if (!major || !minor || !patch) {
        return std::nullopt;
    }
    p.major = *major;
    p.minor = *minor;
    p.patch = *patch;
    if (!pre.empty()) {
        for (auto id : split(pre, '.')) {
            if (!identifier_chars(id)) {
                return std::nullopt;
            }
            if (all_digits(id)) {
                auto n = numeric_part(id);
                if (!n) {
                    return std::nullopt;
                }
                p.pre.emplace_back(*n);
            } else {
                p.pre.emplace_back(std::string(id));
            }
        }
    }
    return p;
}

std::weak_ordering compare_identifiers(const Version::Identifier& a, const Version::Identifier& b)
{
    const auto* na = std::get_if<std::uint64_t>(&a);
    const auto* nb = std::get_if<std::uint64_t>(&b);
    if (na && nb) {
        return *na <=> *nb;
    }
    if (na) {
        return std::weak_ordering::less;
    }
    if (nb) {
        return std::weak_ordering::greater;
    }
    const int c = std::get<std::string>(a).compare(std::get<std::string>(b));
    return c < 0 ? std::weak_ordering::less : c > 0 ? std::weak_ordering::greater : std::weak_ordering::equivalent;
}

} // namespace

bool is_semver(std::string_view text)
{
    return parse_semver(text).has_value();
}

Version Version::parse(std::string_view text)
{
    Version v;
    v.raw_ = std::string(text);
    if (auto p = parse_semver(text)) {
        v.semver_ = true;
        v.major_ = p->major;
        v.minor_ = p->minor;
        v.patch_ = p->patch;
        v.pre_ = std::move(p->pre);
    } else {
        log::warn("version '" + v.raw_ + "' is not a semantic version; comparing lexicographically");
    }
    return v;
}

std::weak_ordering Version::operator<=>(const Version& other) const
{
    if (!semver_ || !other.semver_) {
        const int c = raw_.compare(other.raw_);
        return c < 0 ? std::weak_ordering::less : c > 0 ? std::weak_ordering::greater : std::weak_ordering::equivalent;
    }
    if (auto c = major_ <=> other.major_; c != 0) {
        return c;
    }
    if (auto c = minor_ <=> other.minor_; c != 0) {
        return c;
    }
    if (auto c = patch_ <=> other.patch_; c != 0) {
        return c;
    }
    if (pre_.empty() || other.pre_.empty()) {
        // A release outranks any of its prereleases.
        return pre_.empty() <=> other.pre_.empty();
    }
    const std::size_t n = std::min(pre_.size(), other.pre_.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (auto c = compare_identifiers(pre_[i], other.pre_[i]); c != 0) {
            return c;
        }
    }
    return pre_.size() <=> other.pre_.size();
}

} // namespace deptex::ingest
