#include <doctest.h>

#include <json.hpp>

#include "agentforest/core.hpp"
#include "agentforest/rng.hpp"

using namespace agentforest;

TEST_CASE("canonical_rational reduces, fixes signs, rejects zero denominators") {
    CHECK(canonical_rational(2, 4).num == 1);
    CHECK(canonical_rational(2, 4).den == 2);
    CHECK(canonical_rational(-3, -6).num == 1);
    CHECK(canonical_rational(-3, -6).den == 2);
    CHECK(canonical_rational(5, 1).num == 5);
    CHECK(canonical_rational(5, 1).den == 1);
    CHECK(canonical_rational(3, -9).num == -1);
    CHECK(canonical_rational(3, -9).den == 3);
    CHECK_THROWS_AS(canonical_rational(1, 0), std::invalid_argument);
}

TEST_CASE("canonical_rational is idempotent on random inputs") {
    Xoshiro256ss rng(99);
    for (int i = 0; i < 2000; ++i) {
        const long long n = rng.uniform_int(-1000, 1000);
        long long d = rng.uniform_int(-1000, 1000);
        if (d == 0) d = 1;
        const auto r = canonical_rational(n, d);
        const auto again = canonical_rational(r.num, r.den);
        CHECK(again.num == r.num);
        CHECK(again.den == r.den);
    }
}

TEST_CASE("rational equality matches cross-multiplication") {
    Xoshiro256ss rng(123);
    for (int i = 0; i < 2000; ++i) {
        const long long a = rng.uniform_int(-50, 50);
        const long long b = rng.uniform_int(1, 50);
        const long long c = rng.uniform_int(-50, 50);
        const long long d = rng.uniform_int(1, 50);
        const bool cross = a * d == c * b;
        CHECK((Rational::make(a, b) == Rational::make(c, d)) == cross);
    }
    CHECK(Rational::make(1, 2) == *Rational::parse("0.5"));
}

TEST_CASE("rational parsing accepts integers, decimals and fractions") {
    CHECK(Rational::parse("42")->num == 42);
    CHECK(Rational::parse("-3")->num == -3);
    CHECK(*Rational::parse("1/2") == Rational::make(1, 2));
    CHECK(*Rational::parse("-3/6") == Rational::make(-1, 2));
    CHECK(*Rational::parse("0.25") == Rational::make(1, 4));
    CHECK(*Rational::parse("2.5") == Rational::make(5, 2));
    CHECK(*Rational::parse(" 7 ") == Rational::make(7, 1));
    CHECK_FALSE(Rational::parse("abc"));
    CHECK_FALSE(Rational::parse("1/0"));
    CHECK_FALSE(Rational::parse(""));
    CHECK_FALSE(Rational::parse("1.2.3"));
    CHECK_FALSE(Rational::parse("1/2/3"));
}

TEST_CASE("rational addition") {
    CHECK(Rational::make(1, 2) + Rational::make(1, 3) == Rational::make(5, 6));
    CHECK(Rational::make(-1, 2) + Rational::make(1, 2) == Rational::make(0, 1));
}

namespace {

Task categorical_task() {
    Task t;
    t.id = "t1";
    t.prompt = "pick one";
    t.kind = AnswerKind::categorical;
    t.option_labels = {"A", "B", "C", "D"};
    t.gold = Answer::of_label("B");
    return t;
}

}  // namespace

TEST_CASE("validate_task accepts a well-formed categorical task") {
    CHECK_NOTHROW(validate_task(categorical_task()));
}

TEST_CASE("validate_task rejects missing options") {
    auto t = categorical_task();
    t.option_labels.clear();
    t.gold.reset();
    CHECK_THROWS_WITH_AS(validate_task(t), doctest::Contains("options required"),
                         validation_error);
}

TEST_CASE("validate_task rejects duplicate options") {
    auto t = categorical_task();
    t.option_labels = {"A", "B", "A"};
    CHECK_THROWS_WITH_AS(validate_task(t), doctest::Contains("duplicate option"),
                         validation_error);
}

TEST_CASE("validate_task rejects gold kind mismatch") {
    Task t;
    t.id = "t2";
    t.prompt = "compute";
    t.kind = AnswerKind::numeric;
    t.gold = Answer::of_text("oops");
    CHECK_THROWS_WITH_AS(validate_task(t), doctest::Contains("gold kind mismatch"),
                         validation_error);
}

TEST_CASE("validate_task rejects empty ids and off-list gold labels") {
    auto t = categorical_task();
    t.id = "";
    CHECK_THROWS_AS(validate_task(t), validation_error);
    t = categorical_task();
    t.gold = Answer::of_label("Z");
    CHECK_THROWS_AS(validate_task(t), validation_error);
}

TEST_CASE("sampling params validation") {
    SamplingParams p;
    CHECK_NOTHROW(p.validate());
    p.n = 0;
    CHECK_THROWS_AS(p.validate(), validation_error);
    p = SamplingParams{};
    p.top_p = 0.0;
    CHECK_THROWS_AS(p.validate(), validation_error);
    p = SamplingParams{};
    p.temperature = -0.1;
    CHECK_THROWS_AS(p.validate(), validation_error);
}

TEST_CASE("task json round-trip") {
    auto t = categorical_task();
    t.steps = {"step one", "step two"};
    t.stages = {8, 32};
    const nlohmann::json j = t;
    const auto back = j.get<Task>();
    CHECK(back == t);

    Task num;
    num.id = "n1";
    num.prompt = "compute";
    num.kind = AnswerKind::numeric;
    num.gold = Answer::of_number(Rational::make(1, 2));
    const auto back2 = nlohmann::json(num).get<Task>();
    CHECK(back2 == num);
    CHECK(nlohmann::json(num)["gold"] == "1/2");
}

TEST_CASE("record json round-trip preserves every field") {
    Xoshiro256ss rng(5);
    for (int iter = 0; iter < 50; ++iter) {
        RunRecord r;
        r.run_id = "run" + std::to_string(rng.bounded(10));
        r.task_id = "task" + std::to_string(rng.bounded(10));
        r.params.n = 1 + static_cast<int>(rng.bounded(40));
        r.params.temperature = rng.next_double() * 2;
        r.params.top_p = 0.5 + rng.next_double() / 2;
        r.params.max_in_flight = 1 + static_cast<int>(rng.bounded(8));
        r.params.seed = rng.next();
        const int ns = 1 + static_cast<int>(rng.bounded(5));
        for (int i = 0; i < ns; ++i) {
            Sample s;
            s.index = i;
            s.raw_text = "raw " + std::to_string(i);
            switch (rng.bounded(4)) {
                case 0: s.answer = Answer::of_label("B"); break;
                case 1:
                    s.answer = Answer::of_number(Rational::make(
                        rng.uniform_int(-20, 20), 1 + static_cast<long long>(rng.bounded(9))));
                    break;
                case 2: s.answer = Answer::of_text("print(1)"); break;
                default: break;  // extraction failure
            }
            s.prompt_tokens = static_cast<long>(rng.bounded(500));
            s.completion_tokens = static_cast<long>(rng.bounded(500));
            s.latency_ms = static_cast<long>(rng.bounded(2000));
            s.backend_id = "sim";
            r.per_sample.push_back(std::move(s));
        }
        for (int m = 1; m <= ns; ++m) {
            CurveEntry e;
            e.m = m;
            if (rng.bounded(2)) e.answer = Answer::of_label("B");
            if (rng.bounded(2)) e.correct = rng.bounded(2) == 0;
            r.vote_curve.push_back(e);
        }
        if (rng.bounded(2)) r.correct_at_full = rng.bounded(2) == 0;
        r.wall_ms = static_cast<long>(rng.bounded(100000));

        const std::string line = nlohmann::json(r).dump();
        const auto back = nlohmann::json::parse(line).get<RunRecord>();
        CHECK(back == r);
    }
}

TEST_CASE("parse_gold handles all three kinds") {
    CHECK(parse_gold("B", AnswerKind::categorical) == Answer::of_label("B"));
    CHECK(parse_gold("3/4", AnswerKind::numeric) == Answer::of_number(Rational::make(3, 4)));
    CHECK(parse_gold("x = 1", AnswerKind::text) == Answer::of_text("x = 1"));
    CHECK_THROWS_AS(parse_gold("not a number", AnswerKind::numeric), validation_error);
}

TEST_CASE("answers of different kinds never compare equal") {
    CHECK(Answer::of_label("1") != Answer::of_number(Rational::make(1, 1)));
    CHECK(Answer::of_text("1/2") != Answer::of_number(Rational::make(1, 2)));
}
