#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "deptex/policy.hpp"

namespace deptex::policy {

namespace {

enum class Tok { Ident, Keyword, Number, String, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    json number;
    Pos pos;
};

const std::set<std::string, std::less<>>& keywords()
{
    static const std::set<std::string, std::less<>> k{"let", "if",  "else", "for",   "in",
                                                      "and", "or",  "not",  "true",  "false", "null"};
    return k;
}

[[noreturn]] void syntax(Pos pos, const std::string& msg)
{
    throw SourceError(ErrorCode::SyntaxError, pos.line, pos.column, msg);
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run()
    {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token t;
            t.pos = {line_, col_};
            if (at_end()) {
                t.kind = Tok::End;
                out.push_back(std::move(t));
                return out;
            }
            const char c = peek();
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::string word;
                while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
                    word += advance();
                }
                t.kind = keywords().contains(word) ? Tok::Keyword : Tok::Ident;
                t.text = std::move(word);
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                lex_number(t);
            } else if (c == '"') {
                lex_string(t);
            } else {
                lex_punct(t);
            }
            out.push_back(std::move(t));
        }
    }

private:
    [[nodiscard]] bool at_end() const { return i_ >= src_.size(); }
    [[nodiscard]] char peek(std::size_t ahead = 0) const { return i_ + ahead < src_.size() ? src_[i_ + ahead] : '\0'; }

    char advance()
    {
        const char c = src_[i_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_space()
    {
        while (!at_end()) {
            const char c = peek();
            if (c == '#') {
                while (!at_end() && peek() != '\n') {
                    advance();
                }
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                return;
            }
        }
    }

    void lex_number(Token& t)
    {
        std::string digits;
        bool fractional = false;
        while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) {
            digits += advance();
        }
        if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
            fractional = true;
            digits += advance();
            while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) {
                digits += advance();
            }
        }
        t.kind = Tok::Number;
        t.text = digits;
        if (fractional) {
            double v = 0;
            std::from_chars(digits.data(), digits.data() + digits.size(), v);
            t.number = v;
        } else {
            long long v = 0;
            auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
            if (ec != std::errc{}) {
                syntax(t.pos, "integer literal out of range");
            }
            t.number = v;
        }
    }

    void lex_string(Token& t)
    {
        advance();  // opening quote
        std::string out;
        for (;;) {
            if (at_end() || peek() == '\n') {
                syntax(t.pos, "unterminated string literal");
            }
            const char c = advance();
            if (c == '"') {
                break;
            }
            if (c != '\\') {
                out += c;
                continue;
            }
            if (at_end()) {
                syntax(t.pos, "unterminated string literal");
            }
            const Pos esc_pos{line_, col_};
            switch (const char e = advance()) {
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            default: syntax(esc_pos, std::string("unknown escape '\\") + e + "'");
            }
        }
        t.kind = Tok::String;
        t.text = std::move(out);
    }

    void lex_punct(Token& t)
    {
        static const std::vector<std::string> two{"==", "!=", "<=", ">="};
        const std::string pair{peek(), peek(1)};
        if (std::find(two.begin(), two.end(), pair) != two.end()) {
            advance();
            advance();
            t.kind = Tok::Punct;
            t.text = pair;
            return;
        }
        const char c = peek();
        if (std::string_view("{}()[];,.=<>+-*/:").find(c) == std::string_view::npos) {
            syntax(t.pos, std::string("unexpected character '") + c + "'");
        }
        advance();
        t.kind = Tok::Punct;
        t.text = std::string(1, c);
    }

    std::string_view src_;
    std::size_t i_ = 0;
    int line_ = 1;
    int col_ = 1;
};

template <typename T>
ExprPtr make_expr(Pos pos, T node)
{
    auto e = std::make_unique<Expr>();
    e->pos = pos;
    e->node = std::move(node);
    return e;
}

template <typename T>
StmtPtr make_stmt(Pos pos, T node)
{
    auto s = std::make_unique<Stmt>();
    s->pos = pos;
    s->node = std::move(node);
    return s;
}

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    Block program()
    {
        Block out;
        while (cur().kind != Tok::End) {
            out.push_back(statement());
        }
        return out;
    }

private:
    [[nodiscard]] const Token& cur() const { return toks_[i_]; }
    [[nodiscard]] const Token& next() const { return toks_[std::min(i_ + 1, toks_.size() - 1)]; }

    [[nodiscard]] bool is(Tok kind, std::string_view text) const { return cur().kind == kind && cur().text == text; }
    [[nodiscard]] bool is_punct(std::string_view p) const { return is(Tok::Punct, p); }
    [[nodiscard]] bool is_kw(std::string_view k) const { return is(Tok::Keyword, k); }

    Token take() { return toks_[i_ < toks_.size() - 1 ? i_++ : i_]; }

    [[noreturn]] void unexpected(const std::string& wanted) const
    {
        const Token& t = cur();
        std::string got = t.kind == Tok::End      ? "end of input"
                          : t.kind == Tok::String ? "string literal"
                                                  : "'" + t.text + "'";
        syntax(t.pos, "expected " + wanted + ", found " + got);
    }

    void expect_punct(std::string_view p)
    {
        if (!is_punct(p)) {
            unexpected("'" + std::string(p) + "'");
        }
        take();
    }

    std::string expect_ident(const std::string& what)
    {
        if (cur().kind != Tok::Ident) {
            unexpected(what);
        }
        return take().text;
    }

    Block block()
    {
        expect_punct("{");
        Block out;
        while (!is_punct("}")) {
            if (cur().kind == Tok::End) {
                unexpected("'}'");
            }
            out.push_back(statement());
        }
        take();
        return out;
    }

    StmtPtr statement()
    {
        const Pos pos = cur().pos;
        if (is_kw("let")) {
            take();
            Let let;
            let.name = expect_ident("identifier after 'let'");
            expect_punct("=");
            let.value = expression();
            expect_punct(";");
            return make_stmt(pos, std::move(let));
        }
        if (is_kw("if")) {
            return if_statement();
        }
        if (is_kw("for")) {
            take();
            For loop;
            loop.var = expect_ident("loop variable");
            if (!is_kw("in")) {
                unexpected("'in'");
            }
            take();
            loop.iterable = expression();
            loop.body = block();
            return make_stmt(pos, std::move(loop));
        }
        // Bare action name: `allow;`
        if (cur().kind == Tok::Ident && next().kind == Tok::Punct && next().text == ";") {
            Call call;
            call.callee = take().text;
            take();
            return make_stmt(pos, ExprStmt{make_expr(pos, std::move(call))});
        }
        ExprPtr e = expression();
        if (!std::holds_alternative<Call>(e->node)) {
            syntax(pos, "only calls may be used as statements");
        }
        expect_punct(";");
        return make_stmt(pos, ExprStmt{std::move(e)});
    }

    StmtPtr if_statement()
    {
        const Pos pos = take().pos;
        If node;
        node.condition = expression();
        node.then_branch = block();
        if (is_kw("else")) {
            take();
            if (is_kw("if")) {
                node.else_branch.push_back(if_statement());
            } else {
                node.else_branch = block();
            }
        }
        return make_stmt(pos, std::move(node));
    }

    ExprPtr expression() { return or_expr(); }

    ExprPtr or_expr()
    {
        ExprPtr lhs = and_expr();
        while (is_kw("or")) {
            const Pos pos = take().pos;
            lhs = make_expr(pos, Binary{"or", std::move(lhs), and_expr()});
        }
        return lhs;
    }

    ExprPtr and_expr()
    {
        ExprPtr lhs = not_expr();
        while (is_kw("and")) {
            const Pos pos = take().pos;
            lhs = make_expr(pos, Binary{"and", std::move(lhs), not_expr()});
        }
        return lhs;
    }

    ExprPtr not_expr()
    {
        if (is_kw("not")) {
            const Pos pos = take().pos;
            return make_expr(pos, Unary{"not", not_expr()});
        }
        return comparison();
    }

    ExprPtr comparison()
    {
        ExprPtr lhs = additive();
        static const std::vector<std::string> ops{"==", "!=", "<", "<=", ">", ">="};
        if (cur().kind == Tok::Punct && std::find(ops.begin(), ops.end(), cur().text) != ops.end()) {
            const Token op = take();
            return make_expr(op.pos, Binary{op.text, std::move(lhs), additive()});
        }
        if (is_kw("in")) {
            const Pos pos = take().pos;
            return make_expr(pos, Binary{"in", std::move(lhs), additive()});
        }
        if (is_kw("not") && next().kind == Tok::Keyword && next().text == "in") {
            const Pos pos = take().pos;
            take();
            return make_expr(pos, Unary{"not", make_expr(pos, Binary{"in", std::move(lhs), additive()})});
        }
        return lhs;
    }

    ExprPtr additive()
    {
        ExprPtr lhs = multiplicative();
        while (is_punct("+") || is_punct("-")) {
            const Token op = take();
            lhs = make_expr(op.pos, Binary{op.text, std::move(lhs), multiplicative()});
        }
        return lhs;
    }

    ExprPtr multiplicative()
    {
        ExprPtr lhs = unary();
        while (is_punct("*") || is_punct("/")) {
            const Token op = take();
            lhs = make_expr(op.pos, Binary{op.text, std::move(lhs), unary()});
        }
        return lhs;
    }

    ExprPtr unary()
    {
        if (is_punct("-")) {
            const Pos pos = take().pos;
            return make_expr(pos, Unary{"-", unary()});
        }
        return postfix();
    }

    ExprPtr postfix()
    {
        ExprPtr e = primary();
        for (;;) {
            if (is_punct(".")) {
                const Pos pos = take().pos;
                std::string field = expect_ident("field name after '.'");
                e = make_expr(pos, Member{std::move(e), std::move(field)});
            } else if (is_punct("[")) {
                const Pos pos = take().pos;
                ExprPtr idx = expression();
                expect_punct("]");
                e = make_expr(pos, Index{std::move(e), std::move(idx)});
            } else if (is_punct("(")) {
                auto* callee = std::get_if<Identifier>(&e->node);
                if (callee == nullptr) {
                    syntax(cur().pos, "only named functions can be called");
                }
                take();
                Call call;
                call.callee = callee->name;
                if (!is_punct(")")) {
                    for (;;) {
                        call.args.push_back(expression());
                        if (is_punct(",")) {
                            take();
                            continue;
                        }
                        break;
                    }
                }
                expect_punct(")");
                const Pos pos = e->pos;
                e = make_expr(pos, std::move(call));
            } else {
                return e;
            }
        }
    }

    ExprPtr primary()
    {
        const Token& t = cur();
        const Pos pos = t.pos;
        switch (t.kind) {
        case Tok::Number: {
            json v = t.number;
            take();
            return make_expr(pos, Literal{std::move(v)});
        }
        case Tok::String: {
            std::string s = t.text;
            take();
            return make_expr(pos, Literal{json(std::move(s))});
        }
        case Tok::Ident: {
            std::string name = t.text;
            take();
            return make_expr(pos, Identifier{std::move(name)});
        }
        case Tok::Keyword:
            if (t.text == "true" || t.text == "false") {
                const bool b = t.text == "true";
                take();
                return make_expr(pos, Literal{json(b)});
            }
            if (t.text == "null") {
                take();
                return make_expr(pos, Literal{json(nullptr)});
            }
            break;
        case Tok::Punct:
            if (t.text == "(") {
                take();
                ExprPtr inner = expression();
                expect_punct(")");
                return inner;
            }
            if (t.text == "[") {
                take();
                ListLiteral list;
                while (!is_punct("]")) {
                    list.items.push_back(expression());
                    if (!is_punct(",")) {
                        break;
                    }
                    take();
                }
                expect_punct("]");
                return make_expr(pos, std::move(list));
            }
            if (t.text == "{") {
                take();
                RecordLiteral rec;
                std::set<std::string> keys;
                while (!is_punct("}")) {
                    const Pos key_pos = cur().pos;
                    std::string key;
                    if (cur().kind == Tok::Ident || cur().kind == Tok::String) {
                        key = take().text;
                    } else {
                        unexpected("record key");
                    }
                    if (!keys.insert(key).second) {
                        syntax(key_pos, "duplicate record key '" + key + "'");
                    }
                    expect_punct(":");
                    rec.fields.emplace_back(std::move(key), expression());
                    if (!is_punct(",")) {
                        break;
                    }
                    take();
                }
                expect_punct("}");
                return make_expr(pos, std::move(rec));
            }
            break;
        case Tok::End:
            break;
        }
        unexpected("expression");
    }

    std::vector<Token> toks_;
    std::size_t i_ = 0;
};

std::optional<Context> header_context(std::string_view source)
{
    std::istringstream in{std::string(source)};
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) {
            continue;
        }
        if (line[first] != '#') {
            return std::nullopt;
        }
        std::string_view body = std::string_view(line).substr(first + 1);
        while (!body.empty() && body.front() == ' ') {
            body.remove_prefix(1);
        }
        if (body.starts_with("context:")) {
            body.remove_prefix(8);
            while (!body.empty() && body.front() == ' ') {
                body.remove_prefix(1);
            }
            while (!body.empty() && (body.back() == ' ' || body.back() == '\r')) {
                body.remove_suffix(1);
            }
            try {
                return parse_context(body);
            } catch (const Error&) {
                syntax(Pos{1, 1}, "unknown context '" + std::string(body) + "' in header");
            }
        }
    }
    return std::nullopt;
}

// ---- AST dump -------------------------------------------------------------

void dump(std::ostream& os, const Expr& e);

void dump_block(std::ostream& os, const Block& b, int indent);

void dump(std::ostream& os, const Expr& e)
{
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Literal>) {
                os << n.value.dump();
            } else if constexpr (std::is_same_v<T, Identifier>) {
                os << n.name;
            } else if constexpr (std::is_same_v<T, Member>) {
                os << "(. ";
                dump(os, *n.object);
                os << ' ' << n.field << ')';
            } else if constexpr (std::is_same_v<T, Index>) {
                os << "([] ";
                dump(os, *n.object);
                os << ' ';
                dump(os, *n.index);
                os << ')';
            } else if constexpr (std::is_same_v<T, Call>) {
                os << "(call " << n.callee;
                for (const auto& a : n.args) {
                    os << ' ';
                    dump(os, *a);
                }
                os << ')';
            } else if constexpr (std::is_same_v<T, Unary>) {
                os << '(' << n.op << ' ';
                dump(os, *n.operand);
                os << ')';
            } else if constexpr (std::is_same_v<T, Binary>) {
                os << '(' << n.op << ' ';
                dump(os, *n.lhs);
                os << ' ';
                dump(os, *n.rhs);
                os << ')';
            } else if constexpr (std::is_same_v<T, ListLiteral>) {
                os << "(list";
                for (const auto& a : n.items) {
                    os << ' ';
                    dump(os, *a);
                }
                os << ')';
            } else if constexpr (std::is_same_v<T, RecordLiteral>) {
                os << "(record";
                for (const auto& [k, v] : n.fields) {
                    os << " (" << json(k).dump() << ' ';
                    dump(os, *v);
                    os << ')';
                }
                os << ')';
            }
        },
        e.node);
}

void dump_stmt(std::ostream& os, const Stmt& s, int indent)
{
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    os << pad << '@' << s.pos.line << ':' << s.pos.column << ' ';
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Let>) {
                os << "(let " << n.name << ' ';
                dump(os, *n.value);
                os << ")\n";
            } else if constexpr (std::is_same_v<T, If>) {
                os << "(if ";
                dump(os, *n.condition);
                os << '\n';
                dump_block(os, n.then_branch, indent + 1);
                if (!n.else_branch.empty()) {
                    os << pad << " else\n";
                    dump_block(os, n.else_branch, indent + 1);
                }
                os << pad << ")\n";
            } else if constexpr (std::is_same_v<T, For>) {
                os << "(for " << n.var << ' ';
                dump(os, *n.iterable);
                os << '\n';
                dump_block(os, n.body, indent + 1);
                os << pad << ")\n";
            } else if constexpr (std::is_same_v<T, ExprStmt>) {
                dump(os, *n.expr);
                os << '\n';
            }
        },
        s.node);
}

void dump_block(std::ostream& os, const Block& b, int indent)
{
    for (const auto& s : b) {
        dump_stmt(os, *s, indent);
    }
}

void check_actions(const Block& block, Context context);

void check_expr_actions(const Expr& e, Context context)
{
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Call>) {
                static const std::set<std::string> host{"http_get", "http_post", "regex_match", "len", "log"};
                const auto& acts = actions_for(context);
                const bool known = host.contains(n.callee) ||
                                   std::find(acts.begin(), acts.end(), n.callee) != acts.end();
                if (!known) {
                    bool elsewhere = false;
                    for (auto c : {Context::Status, Context::Policy, Context::Pr, Context::Notification}) {
                        const auto& other = actions_for(c);
                        elsewhere = elsewhere || std::find(other.begin(), other.end(), n.callee) != other.end();
                    }
                    syntax(e.pos, elsewhere ? "action '" + n.callee + "' is not available in " +
                                                  std::string(to_string(context)) + " context"
                                            : "unknown function '" + n.callee + "'");
                }
                for (const auto& a : n.args) {
                    check_expr_actions(*a, context);
                }
            } else if constexpr (std::is_same_v<T, Member>) {
                check_expr_actions(*n.object, context);
            } else if constexpr (std::is_same_v<T, Index>) {
                check_expr_actions(*n.object, context);
                check_expr_actions(*n.index, context);
            } else if constexpr (std::is_same_v<T, Unary>) {
                check_expr_actions(*n.operand, context);
            } else if constexpr (std::is_same_v<T, Binary>) {
                check_expr_actions(*n.lhs, context);
                check_expr_actions(*n.rhs, context);
            } else if constexpr (std::is_same_v<T, ListLiteral>) {
                for (const auto& a : n.items) {
                    check_expr_actions(*a, context);
                }
            } else if constexpr (std::is_same_v<T, RecordLiteral>) {
                for (const auto& [k, v] : n.fields) {
                    check_expr_actions(*v, context);
                }
            }
        },
        e.node);
}

void check_actions(const Block& block, Context context)
{
    for (const auto& s : block) {
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Let>) {
                    check_expr_actions(*n.value, context);
                } else if constexpr (std::is_same_v<T, If>) {
                    check_expr_actions(*n.condition, context);
                    check_actions(n.then_branch, context);
                    check_actions(n.else_branch, context);
                } else if constexpr (std::is_same_v<T, For>) {
                    check_expr_actions(*n.iterable, context);
                    check_actions(n.body, context);
                } else if constexpr (std::is_same_v<T, ExprStmt>) {
                    check_expr_actions(*n.expr, context);
                }
            },
            s->node);
    }
}

} // namespace

std::string_view to_string(Context c) noexcept
{
    switch (c) {
    case Context::Status: return "status";
    case Context::Policy: return "policy";
    case Context::Pr: return "pr";
    case Context::Notification: return "notification";
    }
    return "?";
}

Context parse_context(std::string_view text)
{
    for (auto c : {Context::Status, Context::Policy, Context::Pr, Context::Notification}) {
        if (to_string(c) == text) {
            return c;
        }
    }
    throw Error(ErrorCode::Validation, "unknown policy context '" + std::string(text) + "'");
}

const std::vector<std::string>& actions_for(Context c)
{
    static const std::vector<std::string> status{"transition"};
    static const std::vector<std::string> policy{"violation"};
    static const std::vector<std::string> pr{"allow", "block"};
    static const std::vector<std::string> notification{"dispatch"};
    switch (c) {
    case Context::Status: return status;
    case Context::Policy: return policy;
    case Context::Pr: return pr;
    case Context::Notification: return notification;
    }
    return pr;
}

std::shared_ptr<const Program> parse_policy(std::string_view source)
{
    auto program = std::make_shared<Program>();
    program->declared_context = header_context(source);
    Parser parser(Lexer(source).run());
    program->statements = parser.program();
    return program;
}

std::string dump_ast(const Program& program)
{
    std::ostringstream os;
    if (program.declared_context) {
        os << "#context " << to_string(*program.declared_context) << '\n';
    }
    dump_block(os, program.statements, 0);
    return os.str();
}

PolicyScript PolicyScript::create(std::string policy_id, Context context, std::string source)
{
    if (policy_id.empty()) {
        throw Error(ErrorCode::Validation, "policy_id must be non-empty");
    }
    PolicyScript s;
    s.policy_id = std::move(policy_id);
    s.context = context;
    s.source = std::move(source);
    s.compiled = parse_policy(s.source);
    if (s.compiled->declared_context && *s.compiled->declared_context != context) {
        syntax(Pos{1, 1}, "header declares context '" + std::string(to_string(*s.compiled->declared_context)) +
                              "' but the policy is bound to '" + std::string(to_string(context)) + "'");
    }
    check_actions(s.compiled->statements, context);
    return s;
}

} // namespace deptex::policy
