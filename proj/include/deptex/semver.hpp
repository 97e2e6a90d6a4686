#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace deptex::ingest {

/// A package version. Strings that parse as semantic versions (an optional
/// leading 'v' is tolerated) order by the semver precedence rules; anything
/// else falls back to plain lexicographic ordering of the raw text.
class Version {
public:
    using Identifier = std::variant<std::uint64_t, std::string>;

    static Version parse(std::string_view text);

    [[nodiscard]] bool is_semver() const noexcept { return semver_; }
    [[nodiscard]] const std::string& raw() const noexcept { return raw_; }
    [[nodiscard]] std::uint64_t major() const noexcept { return major_; }
    [[nodiscard]] std::uint64_t minor() const noexcept { return minor_; }
    [[nodiscard]] std::uint64_t patch() const noexcept { return patch_; }
    [[nodiscard]] const std::vector<Identifier>& prerelease() const noexcept { return pre_; }

    std::weak_ordering operator<=>(const Version& other) const;
    bool operator==(const Version& other) const { return (*this <=> other) == std::weak_ordering::equivalent; }

private:
    std::string raw_;
    bool semver_ = false;
    std::uint64_t major_ = 0;
    std::uint64_t minor_ = 0;
    std::uint64_t patch_ = 0;
    std::vector<Identifier> pre_;
};

/// True when `text` is a strict semantic version (after an optional 'v').
bool is_semver(std::string_view text);

} // namespace deptex::ingest
