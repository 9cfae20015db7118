#include "doctest.h"

#include "hytc/ast.hpp"
#include "hytc/eval.hpp"
#include "hytc/surface.hpp"

using namespace hytc;

namespace {
// A divergent boolean: (fix (fun f => fun x => f x)) 0 unrolls forever.
TermPtr omega() {
  TypePtr fty =
      mk_arrow("x", mk_base_raw(BaseId::Int), mk_base_raw(BaseId::Bool));
  TermPtr f = mk_lam("f", fty,
                     mk_lam("x", mk_base_raw(BaseId::Int),
                            mk_app(mk_var("f"), mk_var("x"))));
  return mk_app(mk_app(mk_prim("fix"), f), mk_int(0));
}
}  // namespace

TEST_CASE("beta reduction: (fun (x:Int) => x + 1) 4 steps to 5") {
  TermPtr e = parse_term("(fun (x:Int) => x + 1) 4");
  StepOut s1 = step(e);
  REQUIRE(s1.kind == StepOut::Stepped);
  CHECK(alpha_eq(s1.term, parse_term("4 + 1")));
  StepOut s2 = step(s1.term);
  REQUIRE(s2.kind == StepOut::Stepped);
  CHECK(alpha_eq(s2.term, mk_int(5)));
}

TEST_CASE("delta rules for primitives") {
  CHECK(alpha_eq(evaluate(parse_term("3 + 7")).value, mk_int(10)));
  CHECK(alpha_eq(evaluate(parse_term("10 - 4")).value, mk_int(6)));
  CHECK(alpha_eq(evaluate(parse_term("6 * 7")).value, mk_int(42)));
  CHECK(is_true(evaluate(parse_term("2 < 3")).value));
  CHECK(is_false(evaluate(parse_term("3 < 2")).value));
  CHECK(is_true(evaluate(parse_term("4 = 4")).value));
  CHECK(is_true(evaluate(parse_term("not false")).value));
  // Arbitrary precision.
  CHECK(alpha_eq(evaluate(parse_term(
                     "1000000000000000000 * 1000000000000000000")).value,
                 mk_int(Int("1000000000000000000000000000000000000"))));
}

TEST_CASE("if selects the matching branch") {
  CHECK(alpha_eq(evaluate(parse_term("if true then 1 else 2")).value,
                 mk_int(1)));
  CHECK(alpha_eq(evaluate(parse_term("if false then 1 else 2")).value,
                 mk_int(2)));
}

TEST_CASE("fix unrolls: factorial of 3 is 6") {
  TermPtr e = parse_term(
      "let fact : x:Int -> Int ="
      "  fix (fun (f : x:Int -> Int) => fun (x:Int) =>"
      "    if x < 1 then 1 else x * f (x - 1)) in"
      " fact 3");
  EvalResult r = evaluate(e);
  REQUIRE(r.status == EvalResult::Value);
  CHECK(alpha_eq(r.value, mk_int(6)));
}

TEST_CASE("base casts unfold into an in-progress check") {
  TermPtr ok = mk_app(mk_cast(mk_base_raw(BaseId::Int),
                              parse_type("{x:Int | 0 < x}")),
                      mk_int(5));
  // First step: the cast unfolds to <<T, p[x:=5], 5>>.
  StepOut s = step(ok);
  REQUIRE(s.kind == StepOut::Stepped);
  REQUIRE(s.term->kind == TermKind::Checking);
  CHECK(alpha_eq(s.term->b, mk_int(5)));
  CHECK(alpha_eq(s.term->a, parse_term("0 < 5")));
  EvalResult r = evaluate(ok);
  REQUIRE(r.status == EvalResult::Value);
  CHECK(alpha_eq(r.value, mk_int(5)));
}

TEST_CASE("a failing base cast reports the subject and target") {
  TermPtr bad = mk_app(mk_cast(mk_base_raw(BaseId::Int),
                               parse_type("{x:Int | 0 < x}")),
                       mk_int(0));
  EvalResult r = evaluate(bad);
  REQUIRE(r.status == EvalResult::FailedCast);
  CHECK(alpha_eq(r.fail.subject, mk_int(0)));
  CHECK(alpha_eq(r.fail.target, parse_type("{x:Int | 0 < x}")));
  REQUIRE(r.fail.source != nullptr);
  CHECK(alpha_eq(r.fail.source, mk_base_raw(BaseId::Int)));
}

TEST_CASE("function casts distribute over application") {
  // (<(x:Int -> {y:Int|0<y}) => (x:{n:Int|5<n} -> {y:Int|1<y})> (fun x => x+1)) 9
  TypePtr s = parse_type("x:Int -> {y:Int | 0 < y}");
  TypePtr t = parse_type("x:{n:Int | 5 < n} -> {y:Int | 1 < y}");
  TermPtr f = parse_term("fun (x:Int) => x + 1");
  TermPtr app = mk_app(mk_app(mk_cast(s, t), f), mk_int(9));
  // One step of E-Cast-F: the wrapper casts the argument down and the
  // result up.
  StepOut st = step(app);
  REQUIRE(st.kind == StepOut::Stepped);
  REQUIRE(st.term->kind == TermKind::App);      // <S2=>T2> (f (<T1=>S1> 9))
  CHECK(st.term->a->kind == TermKind::Cast);
  EvalResult r = evaluate(app);
  REQUIRE(r.status == EvalResult::Value);
  CHECK(alpha_eq(r.value, mk_int(10)));
}

TEST_CASE("casts into Dynamic are erased") {
  TermPtr e = mk_app(mk_cast(mk_base_raw(BaseId::Int), mk_dynamic()),
                     mk_int(3));
  EvalResult r = evaluate(e);
  REQUIRE(r.status == EvalResult::Value);
  CHECK(alpha_eq(r.value, mk_int(3)));
}

TEST_CASE("case passes constructor arguments then the scrutinee value") {
  TermPtr e = parse_term(
      "case cons(5, nil) of nil(s) => 0 | cons(h, t, s) => h");
  EvalResult r = evaluate(e);
  REQUIRE(r.status == EvalResult::Value);
  CHECK(alpha_eq(r.value, mk_int(5)));

  // The trailing pattern name receives the whole scrutinee.
  TermPtr e2 = parse_term(
      "case cons(5, nil) of nil(s) => s | cons(h, t, s) => s");
  EvalResult r2 = evaluate(e2);
  REQUIRE(r2.status == EvalResult::Value);
  CHECK(alpha_eq(r2.value, parse_term("cons(5, nil)")));
}

TEST_CASE("parallel or is fair on both sides") {
  TermPtr l = mk_por(mk_true(), omega());
  TermPtr r = mk_por(omega(), mk_true());
  EvalResult rl = evaluate(l);
  REQUIRE(rl.status == EvalResult::Value);
  CHECK(is_true(rl.value));
  CHECK(rl.steps <= 4);
  EvalResult rr = evaluate(r);
  REQUIRE(rr.status == EvalResult::Value);
  CHECK(is_true(rr.value));
  CHECK(rr.steps <= 4);
}

TEST_CASE("parallel and short circuits on false fairly") {
  EvalResult rl = evaluate(mk_pand(mk_false(), omega()));
  REQUIRE(rl.status == EvalResult::Value);
  CHECK(is_false(rl.value));
  EvalResult rr = evaluate(mk_pand(omega(), mk_false()));
  REQUIRE(rr.status == EvalResult::Value);
  CHECK(is_false(rr.value));
  CHECK(is_true(evaluate(mk_pand(mk_true(), mk_true())).value));
}

TEST_CASE("divergence exhausts fuel") {
  EvalResult r = evaluate(omega(), 200);
  CHECK(r.status == EvalResult::OutOfFuel);
  CHECK(r.steps == 200);
}

TEST_CASE("an existential at runtime is an error, not a crash") {
  TermPtr e = mk_exists("w", mk_base_raw(BaseId::Int),
                        mk_lt(mk_var("w"), mk_int(3)));
  EvalResult r = evaluate(e);
  CHECK(r.status == EvalResult::Error);
}

TEST_CASE("value_eq is structural on values") {
  CHECK(value_eq(mk_int(3), mk_int(3)));
  CHECK_FALSE(value_eq(mk_int(3), mk_int(4)));
  CHECK(value_eq(parse_term("cons(1, nil)"), parse_term("cons(1, nil)")));
  CHECK_FALSE(value_eq(parse_term("cons(1, nil)"), parse_term("nil")));
  CHECK(value_eq(mk_ctor("unit"), mk_ctor("unit")));
}
