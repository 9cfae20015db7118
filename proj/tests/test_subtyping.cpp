#include "doctest.h"

#include <cstdio>

#include "hytc/ast.hpp"
#include "hytc/cexdb.hpp"
#include "hytc/subtyping.hpp"
#include "hytc/surface.hpp"

using namespace hytc;

namespace {
Certainty sub(const char* s, const char* t, SubCtx ctx = {}) {
  ParseOptions po;
  po.allow_exists = true;
  return subtype(Env{}, parse_type(s, po), parse_type(t, po), ctx).certainty;
}
}  // namespace

TEST_CASE("base subtyping reduces to refinement implication") {
  CHECK(sub("{x:Int | 7 < x}", "{x:Int | 0 < x}") == Certainty::Yes);
  CHECK(sub("{x:Int | 0 < x}", "{x:Int | 7 < x}") == Certainty::No);
  CHECK(sub("Int", "Int") == Certainty::Yes);
  // Binder names are irrelevant.
  CHECK(sub("{x:Int | 7 < x}", "{q:Int | 0 < q}") == Certainty::Yes);
}

TEST_CASE("Dynamic accepts everything and promises nothing") {
  CHECK(sub("Int", "Dynamic") == Certainty::Yes);
  CHECK(sub("x:Int -> Int", "Dynamic") == Certainty::Yes);
  CHECK(sub("Dynamic", "Dynamic") == Certainty::Yes);
  CHECK(sub("Dynamic", "Int") == Certainty::Maybe);
  CHECK(sub("Dynamic", "x:Int -> Int") == Certainty::Maybe);
}

TEST_CASE("incompatible shapes are refuted") {
  CHECK(sub("{x:Bool | x}", "{x:Int | 0 < x}") == Certainty::No);
  CHECK(sub("x:Int -> Int", "Int") == Certainty::No);
  CHECK(sub("Int", "x:Int -> Int") == Certainty::No);
}

TEST_CASE("arrows are contravariant in the domain, covariant in the codomain") {
  CHECK(sub("x:Int -> {y:Int | 7 < y}", "x:{x:Int | 0 < x} -> {y:Int | 0 < y}") ==
        Certainty::Yes);
  // Domain in the wrong direction.
  CHECK(sub("x:{x:Int | 0 < x} -> Int", "x:Int -> Int") == Certainty::No);
  // Codomain in the wrong direction.
  CHECK(sub("x:Int -> {y:Int | 0 < y}", "x:Int -> {y:Int | 7 < y}") ==
        Certainty::No);
  // The certainty is the meet of the two sides.
  SubCtx off;
  off.prover.enabled = false;
  CHECK(sub("x:{x:Int | 0 < x} -> Int", "x:{x:Int | 7 < x} -> Int", off) ==
        Certainty::Maybe);
}

TEST_CASE("dependent codomains use the supertype's domain binding") {
  // x:{x:Int|5<x} -> {y:Int|x<y}  <:  x:{x:Int|7<x} -> {y:Int|5<y}
  // needs 7 < x (the *supertype* bound) while checking the codomain.
  CHECK(sub("x:{x:Int | 5 < x} -> {y:Int | x < y}",
            "x:{x:Int | 7 < x} -> {y:Int | 5 < y}") == Certainty::Yes);
}

TEST_CASE("existentials on the left peel into the environment") {
  CHECK(sub("exists x:{x:Int | 0 < x}. {y:Int | y = x}", "{y:Int | 0 < y}") ==
        Certainty::Yes);
  CHECK(sub("exists x:{x:Int | 0 < x}. {y:Int | y = x}", "{y:Int | 7 < y}") ==
        Certainty::No);
  // Nested peeling: the x - x = 0 configuration.
  CHECK(sub("exists w:{w:Int | w = 5}. exists y:{y:Int | y = w}."
            " {z:Int | z = w - y}",
            "{z:Int | z = 0}") == Certainty::Yes);
}

TEST_CASE("an existential on the right is Maybe, or an error when forbidden") {
  ParseOptions po;
  po.allow_exists = true;
  TypePtr l = parse_type("{y:Int | y = 1}");
  TypePtr r = parse_type("exists x:Int. {y:Int | y = x}", po);
  SubCtx ctx;
  CHECK(subtype(Env{}, l, r, ctx).certainty == Certainty::Maybe);
  ctx.error_on_right_exists = true;
  CHECK_THROWS_AS((void)subtype(Env{}, l, r, ctx), ExistentialOnRight);
}

TEST_CASE("refutations carry validated witnesses") {
  SubResult r = subtype(Env{}, parse_type("{x:Int | 0 < x}"),
                        parse_type("{x:Int | 7 < x}"), SubCtx{});
  REQUIRE(r.certainty == Certainty::No);
  CHECK(!r.witness.empty());
}

TEST_CASE("a stored counterexample refutes before any structural reasoning") {
  std::string path = "subtyping_db_test.jsonl";
  std::remove(path.c_str());
  CexStore db(path);
  TypePtr s = mk_dynamic();
  TypePtr t = parse_type("{x:Int | 0 < x}");
  // Dynamic <: {x:Int|0<x} is ordinarily Maybe...
  SubCtx ctx;
  ctx.db = &db;
  CHECK(subtype(Env{}, s, t, ctx).certainty == Certainty::Maybe);
  // ...until a run-time failure is recorded for the same key.
  REQUIRE(db.record_cex(Env{}, s, t, mk_int(0), "prog1"));
  CHECK(subtype(Env{}, s, t, ctx).certainty == Certainty::No);
  std::remove(path.c_str());
}

TEST_CASE("reflexivity holds on fragment types") {
  for (const char* s :
       {"Int", "Bool", "{x:Int | 3 <= x && x < 10}",
        "x:{x:Int | 0 < x} -> {y:Int | x < y}",
        "v:Int -> t:BST -> {u:BST | lower u = min v (lower t)}"}) {
    CHECK(sub(s, s) == Certainty::Yes);
  }
}

TEST_CASE("transitivity of Yes on sample fragment chains") {
  const char* chain[] = {"{x:Int | 10 < x}", "{x:Int | 5 < x}",
                         "{x:Int | 0 < x}"};
  CHECK(sub(chain[0], chain[1]) == Certainty::Yes);
  CHECK(sub(chain[1], chain[2]) == Certainty::Yes);
  CHECK(sub(chain[0], chain[2]) == Certainty::Yes);
}

TEST_CASE("No is stable under instantiating Dynamic") {
  // {x:Bool|x} <: {x:Int|p} is No for shape reasons no matter what Dynamic
  // elsewhere in the env means.
  Env e;
  e.push("d", mk_dynamic());
  SubResult r = subtype(e, parse_type("{x:Bool | x}"),
                        parse_type("{x:Int | 0 < x}"), SubCtx{});
  CHECK(r.certainty == Certainty::No);
  Env e2;
  e2.push("d", mk_base_raw(BaseId::Int));
  CHECK(subtype(e2, parse_type("{x:Bool | x}"),
                parse_type("{x:Int | 0 < x}"), SubCtx{}).certainty ==
        Certainty::No);
}
