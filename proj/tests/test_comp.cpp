#include "doctest.h"

#include <fstream>
#include <sstream>

#include "hytc/comp.hpp"
#include "hytc/htc.hpp"
#include "hytc/subtyping.hpp"
#include "hytc/surface.hpp"

using namespace hytc;

namespace {
std::string slurp(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string corpus_dir() {
  const char* d = getenv("HYTC_CORPUS");
  return d ? d : "../corpus";
}

CompReport comp_file(const std::string& name) {
  return comp_check(parse(slurp(corpus_dir() + "/" + name)));
}

// Both-ways provable subtyping between two types under env.
bool equiv(const Env& env, const TypePtr& a, const TypePtr& b) {
  SubCtx ctx;
  return subtype(env, a, b, ctx).certainty == Certainty::Yes &&
         subtype(env, b, a, ctx).certainty == Certainty::Yes;
}
}  // namespace

TEST_CASE("selfify strengthens base types with the identity") {
  Env e;
  e.push("x", mk_base_raw(BaseId::Int));
  // self(Int, x) = {y:Int | y = x}
  TypePtr s1 = selfify(mk_base_raw(BaseId::Int), mk_var("x"));
  CHECK(equiv(e, s1, parse_type("{y:Int | y = x}")));
  // self({y:Int|y>0}, x) = {y:Int | y>0 && y=x}
  TypePtr s2 = selfify(parse_type("{y:Int | 0 < y}"), mk_var("x"));
  CHECK(equiv(e, s2, parse_type("{y:Int | 0 < y && y = x}")));
}

TEST_CASE("selfify pushes into existential bodies and arrow codomains") {
  ParseOptions po;
  po.allow_exists = true;
  TypePtr ex = parse_type("exists z:{z:Int | 0 < z}. {y:Int | z <= y}", po);
  TypePtr s = selfify(ex, mk_var("x"));
  REQUIRE(s->kind == TypeKind::ExistsTy);
  CHECK(free_vars(s).count("x") == 1);

  TypePtr arr = parse_type("a:Int -> {y:Int | a < y}");
  TypePtr sa = selfify(arr, mk_var("f"));
  REQUIRE(sa->kind == TypeKind::Arrow);
  // The codomain records the identity of the application f a.
  CHECK(free_vars(sa->cod).count("f") == 1);
}

TEST_CASE("x - x has type zero, compositionally") {
  Env e;
  e.push("x", mk_base_raw(BaseId::Int));
  CompCtx ctx;
  TypePtr t = atype(e, parse_term("x - x"), ctx);
  CHECK(asubtype(e, t, parse_type("{z:Int | z = 0}"), ctx) == Certainty::Yes);
}

TEST_CASE("existential packaging instead of substitution") {
  // f : x:Pos -> {y:Int | y = x} applied to a positive gives a type from
  // which positivity of the result is still derivable.
  Env e;
  e.push("f", parse_type("x:{x:Int | 0 < x} -> {y:Int | y = x}"));
  e.push("p", parse_type("{p:Int | 0 < p}"));
  CompCtx ctx;
  TypePtr t = atype(e, parse_term("f p"), ctx);
  CHECK(t->kind == TypeKind::ExistsTy);
  CHECK(asubtype(e, t, parse_type("{y:Int | 0 < y}"), ctx) == Certainty::Yes);
}

TEST_CASE("exists x:Pos. {y:Int|y=x} is a subtype of Pos") {
  ParseOptions po;
  po.allow_exists = true;
  CompCtx ctx;
  CHECK(asubtype(Env{},
                 parse_type("exists x:{x:Int | 0 < x}. {y:Int | y = x}", po),
                 parse_type("{y:Int | 0 < y}"), ctx) == Certainty::Yes);
}

TEST_CASE("the fragment admits linear atoms and rejects the rest") {
  CHECK(in_fragment_pred(parse_term("x + 2 * y <= 3")));
  CHECK(in_fragment_pred(parse_term("min v (lower t) <= upper u")));
  CHECK(in_fragment_pred(parse_term("length a = length b && 0 < n")));
  CHECK_FALSE(in_fragment_pred(parse_term("x * y = 6")));
  CHECK_FALSE(in_fragment_pred(parse_term("a mod b = 0")));
  CHECK(in_fragment_type(parse_type("v:Int -> {u:BST | lower u = v}")));
  CHECK_FALSE(in_fragment_type(parse_type("{x:Int | x * x = 4}")));
}

TEST_CASE("case on a non-variable scrutinee falls back with a rewrite hint") {
  SourceProgram p = parse(
      "case 1 < 2 of true(s) => 1 | false(s) => 0");
  CompReport r = comp_check(p);
  CHECK(r.verdict == CompVerdict::Fallback);
  CHECK(r.note.find("let") != std::string::npos);
}

TEST_CASE("the search tree insert checks with only definite verdicts") {
  CompReport r = comp_file("bst.lh");
  CHECK(r.verdict == CompVerdict::Accept);
  CHECK(r.in_fragment);
  CHECK(r.maybe == 0);
  CHECK(r.no == 0);
  CHECK(r.yes > 0);
  for (const CompObligation& o : r.obligations)
    CHECK(o.certainty != Certainty::Maybe);
}

TEST_CASE("the flipped-comparison mutant is rejected with a witness") {
  CompReport r = comp_file("bst_mutant.lh");
  CHECK(r.verdict == CompVerdict::Reject);
  CHECK(r.no >= 1);
  CHECK(r.maybe == 0);
  CHECK(!r.witness.empty());
  for (const auto& [n, v] : r.witness) CHECK(v != nullptr);
}

TEST_CASE("out-of-fragment programs fall back to hybrid checking") {
  CompReport r = comp_file("gcd.lh");
  CHECK(r.verdict == CompVerdict::Fallback);
  CHECK_FALSE(r.in_fragment);
}

TEST_CASE("comp acceptance implies cast-free hybrid compilation") {
  CompReport r = comp_file("bst.lh");
  REQUIRE(r.verdict == CompVerdict::Accept);
  HtcCtx ctx;
  CompileReport h = compile(parse(slurp(corpus_dir() + "/bst.lh")), ctx);
  CHECK(h.casts_inserted == 0);
}

TEST_CASE("substituting a subterm typed at the same type keeps the verdict") {
  // Two programs differing only in a let-bound body with identical
  // annotations get identical verdicts.
  const char* a =
      "let one : {y:Int | 0 < y} = 1 in"
      " let f : x:{x:Int | 0 < x} -> {y:Int | 0 < y} ="
      "   fun (x:{x:Int | 0 < x}) => x in"
      " f one";
  const char* b =
      "let one : {y:Int | 0 < y} = 2 in"
      " let f : x:{x:Int | 0 < x} -> {y:Int | 0 < y} ="
      "   fun (x:{x:Int | 0 < x}) => one in"
      " f one";
  CHECK(comp_check(parse(a)).verdict == comp_check(parse(b)).verdict);
}
