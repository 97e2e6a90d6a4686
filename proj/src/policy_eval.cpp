#include <algorithm>
#include <map>
#include <regex>
#include <sstream>

#include "deptex/policy.hpp"

namespace deptex::policy {

namespace {

using Clock = std::chrono::steady_clock;

struct Halt {};

[[noreturn]] void fail(ErrorCode code, Pos pos, const std::string& msg)
{
    throw SourceError(code, pos.line, pos.column, msg);
}

[[noreturn]] void type_error(Pos pos, const std::string& msg)
{
    fail(ErrorCode::RuntimeTypeError, pos, msg);
}

std::string type_name(const json& v)
{
    switch (v.type()) {
    case json::value_t::null: return "null";
    case json::value_t::boolean: return "bool";
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
    case json::value_t::number_float: return "number";
    case json::value_t::string: return "string";
    case json::value_t::array: return "list";
    case json::value_t::object: return "record";
    default: return "value";
    }
}

bool is_int(const json& v)
{
    return v.is_number_integer();
}

// Integral doubles come back as integers so that 4/2 == 2 prints as "2".
json normalize(double d)
{
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9.0e15) {
        return static_cast<long long>(d);
    }
    return d;
}

std::string stringify(const json& v)
{
    return v.is_string() ? v.get<std::string>() : v.dump();
}

std::string source_line(std::string_view source, int line)
{
    int cur = 1;
    std::size_t start = 0;
    while (cur < line) {
        const auto nl = source.find('\n', start);
        if (nl == std::string_view::npos) {
            return {};
        }
        start = nl + 1;
        ++cur;
    }
    auto end = source.find('\n', start);
    std::string_view text = source.substr(start, end == std::string_view::npos ? source.size() - start : end - start);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) {
        text.remove_prefix(1);
    }
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) {
        text.remove_suffix(1);
    }
    return std::string(text);
}

class Interpreter {
public:
    Interpreter(const PolicyScript& script, const ContextBinding& binding, const SandboxBudget& budget,
                http::Transport& transport, std::vector<TraceEntry>* trace)
        : script_(script), budget_(budget), transport_(transport), trace_(trace), start_(Clock::now())
    {
        scopes_.emplace_back();
        for (const auto& [k, v] : binding.record.items()) {
            scopes_.front()[k] = v;
        }
        scopes_.emplace_back();  // script globals
        switch (script.context) {
        case Context::Status: outcome_.value = StatusOutcome{}; break;
        case Context::Policy: outcome_.value = PolicyCheckOutcome{}; break;
        case Context::Pr: outcome_.value = PrOutcome{}; break;
        case Context::Notification: outcome_.value = NotificationOutcome{}; break;
        }
    }

    PolicyOutcome run()
    {
        try {
            exec_block(script_.compiled->statements, false);
        } catch (const Halt&) {
            return outcome_;
        }
        if (script_.context == Context::Pr) {
            throw Error(ErrorCode::MissingVerdict, "pr policy '" + script_.policy_id + "' ended without allow or block");
        }
        if (auto* p = std::get_if<PolicyCheckOutcome>(&outcome_.value)) {
            p->pass = p->violations.empty();
        }
        return outcome_;
    }

    [[nodiscard]] long long steps() const noexcept { return steps_; }
    [[nodiscard]] bool trace_truncated() const noexcept { return truncated_; }
    [[nodiscard]] const std::vector<std::string>& logs() const noexcept { return logs_; }

private:
    using Scope = std::map<std::string, json, std::less<>>;

    void step(Pos pos)
    {
        if (steps_ >= budget_.max_steps) {
            fail(ErrorCode::BudgetExceeded, pos, "steps: exceeded max_steps=" + std::to_string(budget_.max_steps));
        }
        ++steps_;
        if ((steps_ & 0x7f) == 0) {
            check_time(pos);
        }
    }

    void check_time(Pos pos) const
    {
        if (elapsed_ms() > budget_.timeout_ms) {
            fail(ErrorCode::BudgetExceeded, pos, "time: exceeded timeout_ms=" + std::to_string(budget_.timeout_ms));
        }
    }

    [[nodiscard]] long long elapsed_ms() const
    {
        return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start_).count();
    }

    // ---- scopes ------------------------------------------------------------

    const json* lookup(std::string_view name) const
    {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
            if (auto f = it->find(name); f != it->end()) {
                return &f->second;
            }
        }
        return nullptr;
    }

    // `let` rebinds a variable already declared in an enclosing block, which
    // is how loops accumulate; otherwise it declares in the innermost block.
    void bind(const std::string& name, json value, Pos pos)
    {
        if (scopes_.front().contains(name)) {
            type_error(pos, "cannot rebind read-only input '" + name + "'");
        }
        for (std::size_t i = scopes_.size(); i-- > 1;) {
            if (auto f = scopes_[i].find(name); f != scopes_[i].end()) {
                f->second = std::move(value);
                return;
            }
        }
        scopes_.back()[name] = std::move(value);
    }

    struct ScopeGuard {
        explicit ScopeGuard(std::vector<Scope>& s) : scopes(s) { scopes.emplace_back(); }
        ~ScopeGuard() { scopes.pop_back(); }
        ScopeGuard(const ScopeGuard&) = delete;
        ScopeGuard& operator=(const ScopeGuard&) = delete;
        std::vector<Scope>& scopes;
    };

    // ---- trace -------------------------------------------------------------

    std::optional<std::size_t> open_trace(const Stmt& s)
    {
        if (trace_ == nullptr) {
            return std::nullopt;
        }
        if (trace_->size() >= kTraceCap) {
            truncated_ = true;
            return std::nullopt;
        }
        trace_->push_back(TraceEntry{steps_, s.pos.line, source_line(script_.source, s.pos.line), json::object()});
        return trace_->size() - 1;
    }

    void note(std::optional<std::size_t> idx, const char* key, const json& value)
    {
        if (idx) {
            (*trace_)[*idx].values[key] = value;
        }
    }

    // ---- statements --------------------------------------------------------

    void exec_block(const Block& block, bool new_scope)
    {
        if (!new_scope) {
            for (const auto& s : block) {
                exec(*s);
            }
            return;
        }
        ScopeGuard guard(scopes_);
        for (const auto& s : block) {
            exec(*s);
        }
    }

    void exec(const Stmt& s)
    {
        step(s.pos);
        const auto idx = open_trace(s);
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Let>) {
                    json v = eval(*n.value);
                    note(idx, n.name.c_str(), v);
                    bind(n.name, std::move(v), s.pos);
                } else if constexpr (std::is_same_v<T, If>) {
                    const json c = eval(*n.condition);
                    if (!c.is_boolean()) {
                        type_error(n.condition->pos, "condition must be bool, got " + type_name(c));
                    }
                    note(idx, "condition", c);
                    exec_block(c.get<bool>() ? n.then_branch : n.else_branch, true);
                } else if constexpr (std::is_same_v<T, For>) {
                    const json list = eval(*n.iterable);
                    if (!list.is_array()) {
                        type_error(n.iterable->pos, "for-in expects a list, got " + type_name(list));
                    }
                    if (scopes_.front().contains(n.var)) {
                        type_error(s.pos, "cannot rebind read-only input '" + n.var + "'");
                    }
                    note(idx, "iterations", list.size());
                    for (const json& item : list) {
                        step(s.pos);
                        ScopeGuard guard(scopes_);
                        scopes_.back()[n.var] = item;
                        exec_block(n.body, false);
                    }
                } else if constexpr (std::is_same_v<T, ExprStmt>) {
                    const auto& call = std::get<Call>(n.expr->node);
                    step(n.expr->pos);
                    json args = eval_args(call);
                    note(idx, "args", args);
                    json result = invoke(call.callee, std::move(args), n.expr->pos);
                    if (!result.is_null()) {
                        note(idx, "result", result);
                    }
                }
            },
            s.node);
    }

    // ---- expressions -------------------------------------------------------

    json eval_args(const Call& call)
    {
        json args = json::array();
        for (const auto& a : call.args) {
            args.push_back(eval(*a));
        }
        return args;
    }

    json eval(const Expr& e)
    {
        step(e.pos);
        return std::visit(
            [&](const auto& n) -> json {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Literal>) {
                    return n.value;
                } else if constexpr (std::is_same_v<T, Identifier>) {
                    const json* v = lookup(n.name);
                    if (v == nullptr) {
                        type_error(e.pos, "undefined variable '" + n.name + "'");
                    }
                    return *v;
                } else if constexpr (std::is_same_v<T, Member>) {
                    const json obj = eval(*n.object);
                    if (!obj.is_object()) {
                        type_error(e.pos, "cannot read field '" + n.field + "' of " + type_name(obj));
                    }
                    auto it = obj.find(n.field);
                    return it == obj.end() ? json(nullptr) : *it;
                } else if constexpr (std::is_same_v<T, Index>) {
                    return index(eval(*n.object), eval(*n.index), e.pos);
                } else if constexpr (std::is_same_v<T, Call>) {
                    return invoke(n.callee, eval_args(n), e.pos);
                } else if constexpr (std::is_same_v<T, Unary>) {
                    return unary(n, e.pos);
                } else if constexpr (std::is_same_v<T, Binary>) {
                    return binary(n, e.pos);
                } else if constexpr (std::is_same_v<T, ListLiteral>) {
                    json out = json::array();
                    for (const auto& item : n.items) {
                        out.push_back(eval(*item));
                    }
                    return out;
                } else if constexpr (std::is_same_v<T, RecordLiteral>) {
                    json out = json::object();
                    for (const auto& [k, v] : n.fields) {
                        out[k] = eval(*v);
                    }
                    return out;
                }
            },
            e.node);
    }

    static json index(const json& obj, const json& idx, Pos pos)
    {
        if (obj.is_array()) {
            if (!is_int(idx)) {
                type_error(pos, "list index must be an integer, got " + type_name(idx));
            }
            const auto i = idx.get<long long>();
            if (i < 0 || static_cast<std::size_t>(i) >= obj.size()) {
                type_error(pos, "list index " + std::to_string(i) + " out of range (length " +
                                    std::to_string(obj.size()) + ")");
            }
            return obj[static_cast<std::size_t>(i)];
        }
        if (obj.is_object()) {
            if (!idx.is_string()) {
                type_error(pos, "record key must be a string, got " + type_name(idx));
            }
            auto it = obj.find(idx.get<std::string>());
            return it == obj.end() ? json(nullptr) : *it;
        }
        type_error(pos, "cannot index " + type_name(obj));
    }

    json unary(const Unary& n, Pos pos)
    {
        const json v = eval(*n.operand);
        if (n.op == "not") {
            if (!v.is_boolean()) {
                type_error(pos, "'not' expects bool, got " + type_name(v));
            }
            return !v.get<bool>();
        }
        if (is_int(v)) {
            const auto i = v.get<long long>();
            if (i == std::numeric_limits<long long>::min()) {
                type_error(pos, "integer overflow");
            }
            return -i;
        }
        if (v.is_number()) {
            return normalize(-v.get<double>());
        }
        type_error(pos, "unary '-' expects a number, got " + type_name(v));
    }

    json binary(const Binary& n, Pos pos)
    {
        if (n.op == "and" || n.op == "or") {
            const json l = eval(*n.lhs);
            if (!l.is_boolean()) {
                type_error(pos, "'" + n.op + "' expects bool operands, got " + type_name(l));
            }
            if ((n.op == "and") != l.get<bool>()) {
                return l;  // short circuit
            }
            const json r = eval(*n.rhs);
            if (!r.is_boolean()) {
                type_error(pos, "'" + n.op + "' expects bool operands, got " + type_name(r));
            }
            return r;
        }
        const json l = eval(*n.lhs);
        const json r = eval(*n.rhs);
        if (n.op == "==") {
            return l == r;
        }
        if (n.op == "!=") {
            return l != r;
        }
        if (n.op == "<" || n.op == "<=" || n.op == ">" || n.op == ">=") {
            return compare(n.op, l, r, pos);
        }
        if (n.op == "in") {
            return membership(l, r, pos);
        }
        return arithmetic(n.op, l, r, pos);
    }

    static json compare(const std::string& op, const json& l, const json& r, Pos pos)
    {
        int c = 0;
        if (l.is_number() && r.is_number()) {
            if (is_int(l) && is_int(r)) {
                const auto a = l.get<long long>();
                const auto b = r.get<long long>();
                c = a < b ? -1 : (a > b ? 1 : 0);
            } else {
                const double a = l.get<double>();
                const double b = r.get<double>();
                c = a < b ? -1 : (a > b ? 1 : 0);
            }
        } else if (l.is_string() && r.is_string()) {
            c = l.get<std::string>().compare(r.get<std::string>());
            c = c < 0 ? -1 : (c > 0 ? 1 : 0);
        } else {
            type_error(pos, "cannot compare " + type_name(l) + " " + op + " " + type_name(r));
        }
        if (op == "<") return c < 0;
        if (op == "<=") return c <= 0;
        if (op == ">") return c > 0;
        return c >= 0;
    }

    static json membership(const json& needle, const json& hay, Pos pos)
    {
        if (hay.is_array()) {
            return std::any_of(hay.begin(), hay.end(), [&](const json& x) { return x == needle; });
        }
        if (hay.is_string() && needle.is_string()) {
            return hay.get<std::string>().find(needle.get<std::string>()) != std::string::npos;
        }
        if (hay.is_object() && needle.is_string()) {
            return hay.contains(needle.get<std::string>());
        }
        type_error(pos, "cannot test " + type_name(needle) + " in " + type_name(hay));
    }

    static json arithmetic(const std::string& op, const json& l, const json& r, Pos pos)
    {
        if (op == "+") {
            if (l.is_string() || r.is_string()) {
                return stringify(l) + stringify(r);
            }
            if (l.is_array() && r.is_array()) {
                json out = l;
                out.insert(out.end(), r.begin(), r.end());
                return out;
            }
        }
        if (!l.is_number() || !r.is_number()) {
            type_error(pos, "'" + op + "' not defined for " + type_name(l) + " and " + type_name(r));
        }
        if (op == "/") {
            const double d = r.get<double>();
            if (d == 0.0) {
                type_error(pos, "division by zero");
            }
            const double q = l.get<double>() / d;
            return is_int(l) && is_int(r) ? normalize(q) : json(q);
        }
        if (is_int(l) && is_int(r)) {
            const auto a = l.get<long long>();
            const auto b = r.get<long long>();
            long long out = 0;
            const bool overflow = op == "+"   ? __builtin_add_overflow(a, b, &out)
                                  : op == "-" ? __builtin_sub_overflow(a, b, &out)
                                              : __builtin_mul_overflow(a, b, &out);
            if (overflow) {
                type_error(pos, "integer overflow");
            }
            return out;
        }
        const double a = l.get<double>();
        const double b = r.get<double>();
        return op == "+" ? a + b : op == "-" ? a - b : a * b;
    }

    // ---- calls -------------------------------------------------------------

    static void arity(const std::string& name, const json& args, std::size_t lo, std::size_t hi, Pos pos)
    {
        if (args.size() < lo || args.size() > hi) {
            const std::string want = lo == hi ? std::to_string(lo) : std::to_string(lo) + ".." + std::to_string(hi);
            type_error(pos, name + "() takes " + want + " argument(s), got " + std::to_string(args.size()));
        }
    }

    static const std::string& want_string(const std::string& name, const json& v, Pos pos)
    {
        if (!v.is_string()) {
            type_error(pos, name + "() expects a string, got " + type_name(v));
        }
        return v.get_ref<const std::string&>();
    }

    json invoke(const std::string& name, json args, Pos pos)
    {
        if (name == "len") {
            arity(name, args, 1, 1, pos);
            const json& v = args[0];
            if (v.is_string()) {
                return v.get_ref<const std::string&>().size();
            }
            if (v.is_array() || v.is_object()) {
                return v.size();
            }
            type_error(pos, "len() expects a string, list or record, got " + type_name(v));
        }
        if (name == "log") {
            arity(name, args, 1, 1, pos);
            logs_.push_back(stringify(args[0]));
            return nullptr;
        }
        if (name == "regex_match") {
            arity(name, args, 2, 2, pos);
            const auto& pattern = want_string(name, args[0], pos);
            const auto& subject = want_string(name, args[1], pos);
            try {
                return std::regex_search(subject, std::regex(pattern, std::regex::ECMAScript));
            } catch (const std::regex_error& e) {
                type_error(pos, "invalid regex '" + pattern + "': " + e.what());
            }
        }
        if (name == "http_get" || name == "http_post") {
            const bool post = name == "http_post";
            arity(name, args, post ? 2 : 1, post ? 2 : 1, pos);
            return http_call(want_string(name, args[0], pos), post ? std::optional<json>(args[1]) : std::nullopt, pos);
        }
        return action(name, std::move(args), pos);
    }

    json http_call(const std::string& url, const std::optional<json>& body, Pos pos)
    {
        const bool allowed = std::any_of(budget_.http_allowlist.begin(), budget_.http_allowlist.end(),
                                         [&](const std::string& prefix) { return url.starts_with(prefix); });
        if (!allowed) {
            fail(ErrorCode::HttpDenied, pos, "url '" + url + "' is not in the allowlist");
        }
        if (http_calls_ >= budget_.max_http_calls) {
            fail(ErrorCode::BudgetExceeded, pos, "http: exceeded max_http_calls=" + std::to_string(budget_.max_http_calls));
        }
        check_time(pos);
        ++http_calls_;
        http::Request req;
        req.method = body ? "POST" : "GET";
        req.url = url;
        if (body) {
            req.body = body->dump();
            req.headers["Content-Type"] = "application/json";
        }
        const long long remaining = std::max<long long>(1, budget_.timeout_ms - elapsed_ms());
        req.timeout = std::chrono::milliseconds(std::min<long long>(remaining, 10000));
        http::Response resp;
        try {
            resp = transport_.send(req);
        } catch (const SourceError&) {
            throw;
        } catch (const Error& e) {
            fail(e.code(), pos, e.what());
        }
        check_time(pos);
        json parsed = json::parse(resp.body, nullptr, false);
        if (parsed.is_discarded()) {
            return json{{"raw", resp.body}, {"status", resp.status}};
        }
        return parsed;
    }

    json action(const std::string& name, json args, Pos pos)
    {
        const auto& allowed = actions_for(script_.context);
        if (std::find(allowed.begin(), allowed.end(), name) == allowed.end()) {
            type_error(pos, "unknown function '" + name + "'");
        }
        if (name == "allow" || name == "block") {
            arity(name, args, 0, 1, pos);
            auto& pr = std::get<PrOutcome>(outcome_.value);
            pr.decision = name == "allow" ? Decision::Allow : Decision::Block;
            pr.comment = args.empty() ? std::string() : stringify(args[0]);
            throw Halt{};
        }
        if (name == "transition") {
            arity(name, args, 1, 1, pos);
            std::get<StatusOutcome>(outcome_.value).transition_to = want_string(name, args[0], pos);
            throw Halt{};
        }
        if (name == "violation") {
            arity(name, args, 1, 1, pos);
            auto& p = std::get<PolicyCheckOutcome>(outcome_.value);
            p.violations.push_back(stringify(args[0]));
            p.pass = false;
            return nullptr;
        }
        // dispatch
        arity(name, args, 1, 2, pos);
        auto& n = std::get<NotificationOutcome>(outcome_.value);
        n.dispatches.push_back(Dispatch{want_string(name, args[0], pos), args.size() > 1 ? args[1] : json(nullptr)});
        return nullptr;
    }

    const PolicyScript& script_;
    const SandboxBudget& budget_;
    http::Transport& transport_;
    std::vector<TraceEntry>* trace_;
    bool truncated_ = false;
    Clock::time_point start_;
    std::vector<Scope> scopes_;
    PolicyOutcome outcome_;
    long long steps_ = 0;
    int http_calls_ = 0;
    std::vector<std::string> logs_;
};

void check_preconditions(const PolicyScript& script, const ContextBinding& binding, const SandboxBudget& budget)
{
    if (!script.compiled) {
        throw Error(ErrorCode::Validation, "policy '" + script.policy_id + "' is not compiled");
    }
    if (binding.context != script.context) {
        throw Error(ErrorCode::Validation, "binding context '" + std::string(to_string(binding.context)) +
                                               "' does not match script context '" +
                                               std::string(to_string(script.context)) + "'");
    }
    validate_binding(binding);
    budget.validate();
}

} // namespace

void SandboxBudget::validate() const
{
    if (max_steps <= 0 || max_http_calls <= 0 || timeout_ms <= 0) {
        throw Error(ErrorCode::Validation, "sandbox budget values must be positive");
    }
}

void validate_binding(const ContextBinding& binding)
{
    static const std::map<Context, std::vector<std::string>> required{
        {Context::Status, {"asset", "tier", "attrs", "current_status", "risk_summary"}},
        {Context::Policy, {"component"}},
        {Context::Pr, {"asset", "delta", "tier"}},
        {Context::Notification, {"signal", "blast", "assets"}},
    };
    if (!binding.record.is_object()) {
        throw Error(ErrorCode::Validation, "binding record must be an object");
    }
    for (const auto& key : required.at(binding.context)) {
        if (!binding.record.contains(key)) {
            throw Error(ErrorCode::Validation, std::string(to_string(binding.context)) + " binding is missing '" + key + "'");
        }
    }
}

bool PolicyOutcome::neutral() const
{
    return std::visit(
        [](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, StatusOutcome>) {
                return !v.transition_to.has_value();
            } else if constexpr (std::is_same_v<T, PolicyCheckOutcome>) {
                return v.violations.empty();
            } else if constexpr (std::is_same_v<T, PrOutcome>) {
                return v.decision == Decision::Allow;
            } else {
                return v.dispatches.empty();
            }
        },
        value);
}

json to_json(const PolicyOutcome& outcome)
{
    json out{{"context", to_string(outcome.context())}};
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, StatusOutcome>) {
                out["transition_to"] = v.transition_to ? json(*v.transition_to) : json(nullptr);
            } else if constexpr (std::is_same_v<T, PolicyCheckOutcome>) {
                out["pass"] = v.pass;
                out["violations"] = v.violations;
            } else if constexpr (std::is_same_v<T, PrOutcome>) {
                out["decision"] = v.decision == Decision::Allow ? "allow" : "block";
                out["comment"] = v.comment;
            } else {
                json list = json::array();
                for (const auto& d : v.dispatches) {
                    list.push_back({{"channel_id", d.channel_id}, {"payload", d.payload}});
                }
                out["dispatches"] = std::move(list);
            }
        },
        outcome.value);
    return out;
}

PolicyOutcome evaluate(const PolicyScript& script, const ContextBinding& binding, const SandboxBudget& budget,
                       http::Transport& transport)
{
    check_preconditions(script, binding, budget);
    Interpreter interp(script, binding, budget, transport, nullptr);
    return interp.run();
}

DryRun dry_run(const PolicyScript& script, const ContextBinding& binding, const SandboxBudget& budget,
               http::Transport& transport)
{
    DryRun out;
    http::RecordingTransport recorder(transport);
    try {
        check_preconditions(script, binding, budget);
        Interpreter interp(script, binding, budget, recorder, &out.trace);
        try {
            out.outcome = interp.run();
        } catch (...) {
            out.steps = interp.steps();
            out.logs = interp.logs();
            out.trace_truncated = interp.trace_truncated();
            throw;
        }
        out.steps = interp.steps();
        out.logs = interp.logs();
        out.trace_truncated = interp.trace_truncated();
    } catch (const SourceError& e) {
        out.error = EvalFailure{e.code(), e.detail(), e.line(), e.column()};
    } catch (const Error& e) {
        out.error = EvalFailure{e.code(), e.what(), 0, 0};
    }
    out.http_log = recorder.log();
    return out;
}

json to_json(const DryRun& run)
{
    json out;
    out["outcome"] = run.outcome ? to_json(*run.outcome) : json(nullptr);
    if (run.error) {
        out["error"] = {{"code", to_string(run.error->code)},
                        {"message", run.error->message},
                        {"line", run.error->line},
                        {"column", run.error->column}};
    } else {
        out["error"] = nullptr;
    }
    json trace = json::array();
    for (const auto& t : run.trace) {
        trace.push_back({{"step", t.step}, {"line", t.line}, {"statement", t.statement}, {"values", t.values}});
    }
    out["trace"] = std::move(trace);
    out["trace_truncated"] = run.trace_truncated;
    json http_log = json::array();
    for (const auto& x : run.http_log) {
        json entry{{"method", x.request.method}, {"url", x.request.url}, {"status", x.status}};
        if (!x.request.body.empty()) {
            entry["request_body"] = x.request.body;
        }
        entry["response_body"] = x.response_body;
        if (!x.error.empty()) {
            entry["error"] = x.error;
        }
        http_log.push_back(std::move(entry));
    }
    out["http_log"] = std::move(http_log);
    out["logs"] = run.logs;
    out["steps"] = run.steps;
    return out;
}

} // namespace deptex::policy
