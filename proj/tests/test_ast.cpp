#include "doctest.h"

#include "hytc/ast.hpp"
#include "hytc/surface.hpp"

using namespace hytc;

TEST_CASE("substitution replaces free occurrences only") {
  // (fun (x:Int) => x + y) with [y := 3]
  TermPtr e = mk_lam("x", mk_base_raw(BaseId::Int),
                     mk_app2(mk_prim("+"), mk_var("x"), mk_var("y")));
  TermPtr r = subst1(e, "y", mk_int(3));
  CHECK(free_vars(r).count("y") == 0);
  CHECK(free_vars(r).empty());
  // x is bound: substituting for x is a no-op.
  TermPtr s = subst1(e, "x", mk_int(7));
  CHECK(alpha_eq(s, e));
}

TEST_CASE("substitution is capture avoiding") {
  // (fun (x:Int) => x + y)[y := x] must not capture the free x.
  TermPtr e = mk_lam("x", mk_base_raw(BaseId::Int),
                     mk_app2(mk_prim("+"), mk_var("x"), mk_var("y")));
  TermPtr r = subst1(e, "y", mk_var("x"));
  CHECK(r->kind == TermKind::Lam);
  CHECK(free_vars(r).count("x") == 1);  // the substituted x stays free
  CHECK_FALSE(alpha_eq(r, mk_lam("x", mk_base_raw(BaseId::Int),
                                 mk_app2(mk_prim("+"), mk_var("x"),
                                         mk_var("x")))));
}

TEST_CASE("substitution on type variables is delayed sequentially") {
  // (theta . alpha)[x:=e]  ==>  (([x:=e] o theta) . alpha): the new entry is
  // appended after the existing delayed entries.
  SubstMap theta = {{"y", mk_int(1), mk_base_raw(BaseId::Int)}};
  TypePtr a = mk_tyvar("alpha1", theta);
  TypePtr r = subst1(a, "x", mk_int(2), mk_base_raw(BaseId::Int));
  REQUIRE(r->kind == TypeKind::TyVar);
  REQUIRE(r->delayed.size() == 2);
  CHECK(r->delayed[0].name == "y");
  CHECK(r->delayed[1].name == "x");
  CHECK(alpha_eq(r->delayed[1].value, mk_int(2)));
}

TEST_CASE("substitution on refinement placeholders is delayed") {
  TermPtr psi = mk_predvar("psi1");
  TermPtr r = subst1(psi, "n", mk_int(5));
  REQUIRE(r->kind == TermKind::PredVar);
  REQUIRE(r->delayed.size() == 1);
  CHECK(r->delayed[0].name == "n");
}

TEST_CASE("shape_of erases refinements") {
  TypePtr t = parse_type("{x:Int | x > 0}");
  ShapePtr s = shape_of(t);
  CHECK(shape_eq(s, shape_base(BaseId::Int)));

  TypePtr arr = parse_type("x:{x:Int | x > 0} -> {y:Bool | y}");
  CHECK(shape_eq(shape_of(arr),
                 shape_arrow(shape_base(BaseId::Int), shape_base(BaseId::Bool))));

  // The shape of an existential is the shape of its body.
  TypePtr ex = mk_exists_ty("w", parse_type("{x:Int | x > 0}"), t);
  CHECK(shape_eq(shape_of(ex), shape_base(BaseId::Int)));

  CHECK(shape_eq(shape_of(mk_dynamic()), shape_dyn()));
  CHECK_THROWS_AS((void)shape_of(mk_tyvar("a")), ShapeUndefined);
}

TEST_CASE("free_vars of terms and types") {
  CHECK(free_vars(mk_app2(mk_prim("+"), mk_var("x"), mk_var("y"))) ==
        std::set<std::string>{"x", "y"});
  TypePtr t = parse_type("{x:Int | lo <= x && x < hi}");
  CHECK(free_vars(t) == std::set<std::string>{"lo", "hi"});
  // Binder of an arrow domain scopes over the codomain.
  TypePtr arr = parse_type("n:Int -> {y:Int | n < y}");
  CHECK(free_vars(arr).empty());
}

TEST_CASE("alpha equivalence via canonical printing") {
  TermPtr a = mk_lam("x", mk_base_raw(BaseId::Int), mk_var("x"));
  TermPtr b = mk_lam("y", mk_base_raw(BaseId::Int), mk_var("y"));
  CHECK(alpha_eq(a, b));
  CHECK(canon(a) == canon(b));
  CHECK_FALSE(alpha_eq(a, mk_lam("x", mk_base_raw(BaseId::Int), mk_int(1))));

  TypePtr s = parse_type("{x:Int | x > 0}");
  TypePtr t = parse_type("{z:Int | z > 0}");
  CHECK(alpha_eq(s, t));
}

TEST_CASE("canon_key is alpha invariant and env sensitive") {
  TypePtr s1 = parse_type("{x:Int | a < x}");
  TypePtr t1 = parse_type("{x:Int | 0 < x}");
  Env e1;
  e1.push("a", mk_base_raw(BaseId::Int));
  e1.push("unused", mk_base_raw(BaseId::Bool));

  TypePtr s2 = parse_type("{q:Int | b < q}");
  Env e2;
  e2.push("b", mk_base_raw(BaseId::Int));

  // Unused bindings are restricted away; binder names do not matter; but the
  // env variable name appears free in S so renaming it changes nothing after
  // canonicalization.
  CHECK(canon_key(e1, s1, t1) == canon_key(e2, s2, t1));

  // A different refinement on the kept binding changes the key.
  Env e3;
  e3.push("a", parse_type("{a:Int | 5 < a}"));
  CHECK(canon_key(e1, s1, t1) != canon_key(e3, s1, t1));
}

TEST_CASE("fresh names never collide") {
  std::set<std::string> seen;
  for (int i = 0; i < 100; i++) CHECK(seen.insert(fresh("x")).second);
}

TEST_CASE("content hashes are stable and discriminating") {
  CHECK(content_hash("abc") == content_hash("abc"));
  CHECK(content_hash("abc") != content_hash("abd"));
}
