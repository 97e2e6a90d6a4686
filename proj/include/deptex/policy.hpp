#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "deptex/error.hpp"
#include "deptex/http.hpp"

namespace deptex::policy {

using json = nlohmann::json;

enum class Context { Status, Policy, Pr, Notification };

std::string_view to_string(Context c) noexcept;
Context parse_context(std::string_view text);

// ---------------------------------------------------------------------------
// AST

struct Pos {
    int line = 1;
    int column = 1;
};

struct Expr;
struct Stmt;
using ExprPtr = std::unique_ptr<Expr>;
using StmtPtr = std::unique_ptr<Stmt>;
using Block = std::vector<StmtPtr>;

struct Literal {
    json value;
};
struct Identifier {
    std::string name;
};
struct Member {
    ExprPtr object;
    std::string field;
};
struct Index {
    ExprPtr object;
    ExprPtr index;
};
struct Call {
    std::string callee;
    std::vector<ExprPtr> args;
};
struct Unary {
    std::string op;  // "-" or "not"
    ExprPtr operand;
};
struct Binary {
    std::string op;
    ExprPtr lhs;
    ExprPtr rhs;
};
struct ListLiteral {
    std::vector<ExprPtr> items;
};
struct RecordLiteral {
    std::vector<std::pair<std::string, ExprPtr>> fields;
};

struct Expr {
    Pos pos;
    std::variant<Literal, Identifier, Member, Index, Call, Unary, Binary, ListLiteral, RecordLiteral> node;
};

struct Let {
    std::string name;
    ExprPtr value;
};
struct If {
    ExprPtr condition;
    Block then_branch;
    Block else_branch;
};
struct For {
    std::string var;
    ExprPtr iterable;
    Block body;
};
struct ExprStmt {
    ExprPtr expr;  // always a Call
};

struct Stmt {
    Pos pos;
    std::variant<Let, If, For, ExprStmt> node;
};

struct Program {
    Block statements;
    std::optional<Context> declared_context;  // from a `#context: <name>` header
};

/// Parses PolicyLang source. Throws SourceError(SyntaxError).
std::shared_ptr<const Program> parse_policy(std::string_view source);

/// Canonical s-expression rendering of the AST, used for snapshot tests.
std::string dump_ast(const Program& program);

/// Actions callable in the given context (besides the context-free host calls).
const std::vector<std::string>& actions_for(Context c);

// ---------------------------------------------------------------------------
// Scripts, bindings, budgets, outcomes

struct PolicyScript {
    std::string policy_id;
    Context context = Context::Pr;
    std::string source;
    std::shared_ptr<const Program> compiled;

    /// Parses and checks that every action belongs to `context`.
    static PolicyScript create(std::string policy_id, Context context, std::string source);
};

struct SandboxBudget {
    long long max_steps = 100000;
    int max_http_calls = 2;
    long long timeout_ms = 5000;
    std::vector<std::string> http_allowlist;

    void validate() const;
};

/// The immutable input record of one evaluation. Its top-level keys become
/// read-only variables inside the script.
struct ContextBinding {
    Context context = Context::Pr;
    json record = json::object();
};

/// Checks the record carries the keys its context requires.
void validate_binding(const ContextBinding& binding);

enum class Decision { Allow, Block };

struct StatusOutcome {
    std::optional<std::string> transition_to;
    bool operator==(const StatusOutcome&) const = default;
};
struct PolicyCheckOutcome {
    bool pass = true;
    std::vector<std::string> violations;
    bool operator==(const PolicyCheckOutcome&) const = default;
};
struct PrOutcome {
    Decision decision = Decision::Block;
    std::string comment;
    bool operator==(const PrOutcome&) const = default;
};
struct Dispatch {
    std::string channel_id;
    json payload;
    bool operator==(const Dispatch&) const = default;
};
struct NotificationOutcome {
    std::vector<Dispatch> dispatches;
    bool operator==(const NotificationOutcome&) const = default;
};

struct PolicyOutcome {
    std::variant<StatusOutcome, PolicyCheckOutcome, PrOutcome, NotificationOutcome> value;

    [[nodiscard]] Context context() const noexcept { return static_cast<Context>(value.index()); }
    /// True for the default result of a context (no transition, pass, no dispatch).
    [[nodiscard]] bool neutral() const;
    bool operator==(const PolicyOutcome&) const = default;
};

json to_json(const PolicyOutcome& outcome);

PolicyOutcome evaluate(const PolicyScript& script, const ContextBinding& binding, const SandboxBudget& budget,
                       http::Transport& transport);

struct TraceEntry {
    long long step = 0;
    int line = 0;
    std::string statement;
    json values;
};

struct EvalFailure {
    ErrorCode code = ErrorCode::RuntimeTypeError;
    std::string message;
    int line = 0;
    int column = 0;
};

struct DryRun {
    std::optional<PolicyOutcome> outcome;
    std::optional<EvalFailure> error;
    std::vector<TraceEntry> trace;
    bool trace_truncated = false;  // statements ran past kTraceCap
    std::vector<http::Exchange> http_log;
    std::vector<std::string> logs;
    long long steps = 0;
};

inline constexpr std::size_t kTraceCap = 1000;

/// Evaluates like evaluate() while recording a step trace (capped at
/// kTraceCap entries) and every HTTP exchange. Evaluation errors are
/// reported in the result instead of thrown.
DryRun dry_run(const PolicyScript& script, const ContextBinding& binding, const SandboxBudget& budget,
               http::Transport& transport);

json to_json(const DryRun& run);

} // namespace deptex::policy
