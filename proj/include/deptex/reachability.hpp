#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "deptex/graph.hpp"
#include "deptex/http.hpp"

namespace deptex::reach {

using json = nlohmann::json;

enum class EntryKind { PublicHttp, AuthenticatedHttp, InternalRpc, Cli, BackgroundJob };
enum class FlowKind { Call, Dataflow };

std::string_view to_string(EntryKind kind) noexcept;
EntryKind parse_entry_kind(std::string_view text);

struct SliceFunction {
    std::string fn_id;
    std::string name;
    std::string file;
    std::optional<EntryKind> entry_kind;
    bool sanitizer = false;
    std::string snippet;

    bool operator==(const SliceFunction&) const = default;
};

struct SliceEdge {
    std::string from;
    std::string to;
    FlowKind kind = FlowKind::Call;

    bool operator==(const SliceEdge&) const = default;
};

/// One code-property-graph slice connecting an asset's entry points to the
/// vulnerable sink of a signal.
struct SliceReport {
    graph::NodeId asset_ref;
    graph::NodeId signal_ref;
    std::vector<SliceFunction> functions;
    std::vector<SliceEdge> edges;
    std::vector<std::string> entry_points;
    std::string sink;

    [[nodiscard]] const SliceFunction* function(std::string_view fn_id) const;
    bool operator==(const SliceReport&) const = default;
};

SliceReport parse_slice(std::string_view text);
SliceReport parse_slice(const json& doc);
json slice_to_json(const SliceReport& slice);

struct VerifierVerdict {
    double w_entry = 1.0;
    bool is_sanitized = false;
    std::string rationale;

    bool operator==(const VerifierVerdict&) const = default;
};

struct EpdParams {
    double alpha = 0.85;
    std::map<EntryKind, double> entry_weights = default_entry_weights();
    /// Weight used when a function carries no entry_kind.
    double unknown_entry_weight = 1.0;

    static std::map<EntryKind, double> default_entry_weights();
    void validate() const;
};

struct DepscoreResult {
    bool reachable = false;
    int d = 0;
    std::string entry_point;
    double w_entry = 0.0;
    bool is_sanitized = false;
    double epd = 0.0;
    int depscore = 0;
    std::string rationale;

    bool operator==(const DepscoreResult&) const = default;
};

json to_json(const DepscoreResult& r);
DepscoreResult depscore_from_json(const json& doc);
json to_json(const VerifierVerdict& v);

/// Shortest entry->sink hop count over call and dataflow edges; nullopt when
/// the sink is unreachable from `entry`.
std::optional<int> path_depth(const SliceReport& slice, std::string_view entry);

VerifierVerdict rule_based_verify(const SliceReport& slice, std::string_view entry, const EpdParams& params);

/// EPD = w_entry * alpha^d, forced to exactly 0.0 for sanitized paths.
double compute_epd(int d, const VerifierVerdict& verdict, const EpdParams& params);

/// round(100 * severity/10 * epd), half-up.
int depscore_value(double severity, double epd);

class Verifier {
public:
    virtual ~Verifier() = default;
    virtual VerifierVerdict verify(const SliceReport& slice, std::string_view entry, const EpdParams& params) const = 0;
};

class RuleBasedVerifier final : public Verifier {
public:
    VerifierVerdict verify(const SliceReport& slice, std::string_view entry, const EpdParams& params) const override;
};

/// Sends the slice's snippets to an external semantic verifier and validates
/// the typed JSON reply. Transport failures and schema violations fall back
/// to the rule-based verdict with a logged warning.
class ExternalVerifier final : public Verifier {
public:
    ExternalVerifier(std::string endpoint, http::Transport& transport,
                     std::chrono::milliseconds timeout = std::chrono::seconds(10))
        : endpoint_(std::move(endpoint)), transport_(transport), timeout_(timeout) {}

    VerifierVerdict verify(const SliceReport& slice, std::string_view entry, const EpdParams& params) const override;

private:
    std::string endpoint_;
    http::Transport& transport_;
    std::chrono::milliseconds timeout_;
};

json verifier_request(const SliceReport& slice, std::string_view entry);

/// Strict schema check of a verifier reply; throws Error(Validation).
VerifierVerdict parse_verifier_response(const json& doc);

VerifierVerdict external_verify(const SliceReport& slice, std::string_view entry, const std::string& endpoint,
                                http::Transport& transport, const EpdParams& params);

/// Scores every entry point of the slice and keeps the dominant one
/// (maximal EPD; ties go to the shorter path, then declaration order).
DepscoreResult depscore(const graph::Node& signal, const SliceReport& slice, const EpdParams& params,
                        const Verifier& verifier);
DepscoreResult depscore(const graph::Node& signal, const SliceReport& slice, const EpdParams& params);

} // namespace deptex::reach
