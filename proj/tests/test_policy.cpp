#include "doctest.h"
#include "policy_support.hpp"

using namespace policy_support;

namespace {

const std::filesystem::path kCorpus = std::filesystem::path(DEPTEX_TEST_DATA) / "policies";

ContextBinding pr_binding()
{
    return corpus_binding(kCorpus, Context::Pr, "pr_gpl");
}

} // namespace

TEST_CASE("golden corpus outcomes")
{
    const auto report = run_corpus(kCorpus);
    for (const auto& f : report.failures) {
        FAIL_CHECK(f);
    }
    CHECK(report.files >= 30);
    CHECK(report.budget_cases >= 1);
    CHECK(report.denied_cases >= 1);
}

TEST_CASE("fifty statement corpus has a stable ast snapshot")
{
    const auto source = slurp(kCorpus / "corpus50.dpx");
    const auto program = parse_policy(source);
    CHECK(program->statements.size() == 50);
    CHECK(program->declared_context == Context::Pr);
    const auto dumped = dump_ast(*program);
    CHECK(dumped == slurp(kCorpus / "corpus50.ast"));
    CHECK(dump_ast(*parse_policy(source)) == dumped);

    SandboxBudget budget;
    http::StubTransport none([](const http::Request&) { return http::Response{404, "{}"}; });
    const auto outcome = evaluate(PolicyScript::create("corpus50", Context::Pr, source), pr_binding(), budget, none);
    CHECK(to_json(outcome) == json{{"context", "pr"}, {"decision", "block"}, {"comment", "critical change needs review"}});
}

TEST_CASE("parser basics")
{
    CHECK(parse_policy("allow;")->statements.size() == 1);
    try {
        parse_policy("let x = ;");
        FAIL("accepted");
    } catch (const SourceError& e) {
        CHECK(e.code() == ErrorCode::SyntaxError);
        CHECK(e.line() == 1);
        CHECK(e.column() == 9);
    }
    CHECK_THROWS_AS(parse_policy("while true { allow; }"), SourceError);
    CHECK_THROWS_AS(parse_policy("fn f() { }"), SourceError);
    CHECK_THROWS_AS(PolicyScript::create("", Context::Pr, "allow;"), Error);
    CHECK(actions_for(Context::Pr) == std::vector<std::string>{"allow", "block"});
}

TEST_CASE("dry run traces")
{
    http::StubTransport none([](const http::Request&) { return http::Response{404, "{}"}; });
    SandboxBudget budget;
    const auto run = dry_run(PolicyScript::create("p", Context::Pr, "allow;"), pr_binding(), budget, none);
    REQUIRE(run.outcome);
    CHECK(run.trace.size() == 1);

    std::string ten;
    for (int i = 0; i < 9; ++i) {
        ten += "log(\"s" + std::to_string(i) + "\");\n";
    }
    ten += "allow;\n";
    budget.max_steps = 3;
    const auto cut = dry_run(PolicyScript::create("p", Context::Pr, ten), pr_binding(), budget, none);
    REQUIRE(cut.error);
    CHECK(cut.error->code == ErrorCode::BudgetExceeded);
    CHECK_FALSE(cut.trace.empty());
    CHECK(cut.trace.size() < 10);
    CHECK(cut.steps <= 3);

    std::string big = "let xs = [";
    for (int i = 0; i < 1500; ++i) {
        big += (i ? ", " : "") + std::to_string(i);
    }
    big += "];\nfor x in xs { log(\"x\"); }\nallow;\n";
    budget.max_steps = 100000;
    const auto capped = dry_run(PolicyScript::create("p", Context::Pr, big), pr_binding(), budget, none);
    REQUIRE(capped.outcome);
    CHECK(capped.trace.size() == kTraceCap);
    CHECK(to_json(capped).at("trace_truncated") == true);
    CHECK(to_json(run).at("trace_truncated") == false);

    // exactly kTraceCap statements fill the trace without truncating it
    std::string exact;
    for (std::size_t i = 0; i + 1 < kTraceCap; ++i) {
        exact += "log(\"s\");\n";
    }
    exact += "allow;\n";
    const auto full = dry_run(PolicyScript::create("p", Context::Pr, exact), pr_binding(), budget, none);
    REQUIRE(full.outcome);
    CHECK(full.trace.size() == kTraceCap);
    CHECK_FALSE(full.trace_truncated);
    CHECK(capped.trace_truncated);
}

TEST_CASE("budget and binding validation")
{
    SandboxBudget b;
    b.max_steps = 0;
    CHECK_THROWS_AS(b.validate(), Error);
    b = SandboxBudget{};
    b.max_http_calls = 0;
    CHECK_THROWS_AS(b.validate(), Error);
    CHECK_THROWS_AS(validate_binding({Context::Pr, json{{"asset", json::object()}}}), Error);
    CHECK_THROWS_AS(validate_binding({Context::Notification, json::object()}), Error);

    http::StubTransport none([](const http::Request&) { return http::Response{404, "{}"}; });
    const auto script = PolicyScript::create("p", Context::Pr, "allow;");
    CHECK_THROWS_AS(evaluate(script, {Context::Status, json::object()}, SandboxBudget{}, none), Error);
}

TEST_CASE("dry run and evaluate agree on generated scripts")
{
    const auto report = run_differential(59, 200, pr_binding());
    for (const auto& d : report.details) {
        FAIL_CHECK(d);
    }
    CHECK(report.scripts == 200);
    CHECK(report.divergences == 0);
    CHECK(report.budget_violations == 0);
    // the generator should reach both outcomes and failures
    CHECK(report.errors > 10);
    CHECK(report.errors < 190);
}
