// Core term/type representation for the refinement-type checker.
//
// Terms and types are immutable trees shared via shared_ptr.  Binders carry
// their source names for printing; all comparisons (alpha-equivalence, the
// counterexample-database keys, content hashes) go through the canonical
// de-Bruijn form produced by canon().
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace hytc {

using Int = boost::multiprecision::cpp_int;

struct Term;
struct Type;
using TermPtr = std::shared_ptr<const Term>;
using TypePtr = std::shared_ptr<const Type>;

// ---------------------------------------------------------------------------
// Substitution maps
//
// A SubstMap is a *sequential* composition of single-variable substitutions:
// entry 0 is applied first.  Each entry carries the type annotation of the
// substituted term, which delayed substitutions on type variables and
// refinement placeholders need to remember ("[x:=e,T]").
struct SubstEntry {
  std::string name;
  TermPtr value;
  TypePtr annot;  // may be null for plain term-level substitution
};
using SubstMap = std::vector<SubstEntry>;

// ---------------------------------------------------------------------------
// Terms

enum class TermKind {
  Var,       // variable reference
  Prim,      // primitive function (+, <, not, length, fix, ...)
  IntLit,    // integer literal (a nullary "constructor" family)
  Ctor,      // data constructor, possibly partially applied
  Lam,       // fun (x:T) => e
  App,       // f e
  Cast,      // <S => T>, a first-class coercion value
  Checking,  // <<T, residual, subject>> : base cast in progress
  Case,      // case e of c(x..,self) => e' | ...
  POr,       // parallel disjunction
  PAnd,      // parallel conjunction
  Exists,    // exists x:T. p  (static predicate artifact, never evaluated)
  PredVar,   // refinement placeholder psi with delayed substitution (recon)
};

struct CaseBranch {
  std::string ctor;
  TermPtr handler;  // a Lam chain binding the ctor args plus the scrutinee
};

struct Term {
  TermKind kind;
  std::string name;      // Var/Prim/Ctor/Lam binder/Exists binder/PredVar id
  Int intval;            // IntLit
  std::vector<TermPtr> args;  // Ctor arguments collected so far
  TypePtr annot;         // Lam/Exists binder annotation; Checking target
  TypePtr annot2;        // Checking: originating cast source (provenance)
  TypePtr cast_src, cast_tgt;  // Cast
  TermPtr a, b;          // App fun/arg; POr/PAnd sides; Checking residual(a)/subject(b)
  TermPtr body;          // Lam/Exists body; Case scrutinee
  std::vector<CaseBranch> branches;  // Case
  SubstMap delayed;      // PredVar delayed substitution
  int fair = 0;          // POr/PAnd fairness counter
};

TermPtr mk_var(const std::string& n);
TermPtr mk_prim(const std::string& n);
TermPtr mk_int(const Int& v);
TermPtr mk_ctor(const std::string& n, std::vector<TermPtr> args = {});
TermPtr mk_lam(const std::string& x, TypePtr t, TermPtr body);
TermPtr mk_app(TermPtr f, TermPtr e);
TermPtr mk_cast(TypePtr s, TypePtr t);
TermPtr mk_checking(TypePtr target, TermPtr residual, TermPtr subject, TypePtr source);
TermPtr mk_case(TermPtr scrut, std::vector<CaseBranch> branches);
TermPtr mk_por(TermPtr l, TermPtr r, int fair = 0);
TermPtr mk_pand(TermPtr l, TermPtr r, int fair = 0);
TermPtr mk_exists(const std::string& x, TypePtr t, TermPtr body);
TermPtr mk_predvar(const std::string& psi, SubstMap delayed = {});

// Convenience builders for predicates.
TermPtr mk_app2(TermPtr f, TermPtr x, TermPtr y);
TermPtr mk_eq(TermPtr l, TermPtr r);
TermPtr mk_lt(TermPtr l, TermPtr r);
TermPtr mk_le(TermPtr l, TermPtr r);
TermPtr mk_and(TermPtr l, TermPtr r);   // PAnd
TermPtr mk_true();
TermPtr mk_false();

bool is_true(const TermPtr& e);
bool is_false(const TermPtr& e);

// ---------------------------------------------------------------------------
// Types

enum class BaseId { Bool, Int, Unit, IntList, BST };
const char* base_name(BaseId b);
std::optional<BaseId> base_from_name(const std::string& s);

enum class TypeKind {
  Base,      // {x:B | p}
  Arrow,     // x:S -> T
  ExistsTy,  // exists x:S. T
  TyVar,     // alpha with delayed substitution (recon)
  Dynamic,
};

struct Type {
  TypeKind kind;
  std::string binder;   // Base/Arrow/ExistsTy
  BaseId base = BaseId::Int;
  TermPtr refine;       // Base refinement predicate
  TypePtr dom, cod;     // Arrow domain/codomain; ExistsTy witness/body
  std::string var;      // TyVar id
  SubstMap delayed;     // TyVar delayed substitution
};

TypePtr mk_base(const std::string& x, BaseId b, TermPtr refine);
TypePtr mk_base_raw(BaseId b);  // {_:B | true}
TypePtr mk_arrow(const std::string& x, TypePtr dom, TypePtr cod);
TypePtr mk_exists_ty(const std::string& x, TypePtr wit, TypePtr body);
TypePtr mk_tyvar(const std::string& a, SubstMap delayed = {});
TypePtr mk_dynamic();

// ---------------------------------------------------------------------------
// Environments: ordered (name, type) bindings.

struct Env {
  std::vector<std::pair<std::string, TypePtr>> bindings;

  void push(const std::string& n, TypePtr t) { bindings.emplace_back(n, t); }
  const TypePtr* lookup(const std::string& n) const {
    for (auto it = bindings.rbegin(); it != bindings.rend(); ++it)
      if (it->first == n) return &it->second;
    return nullptr;
  }
  bool contains(const std::string& n) const { return lookup(n) != nullptr; }
};

// ---------------------------------------------------------------------------
// Operations

// Fresh name generation; fresh("x") yields x', x'', ... with a global counter.
std::string fresh(const std::string& hint);

// Capture-avoiding substitution.  The map is applied as a simultaneous
// substitution of its entries (callers compose sequentially where needed);
// TyVar and PredVar nodes delay the map instead.
TermPtr substitute(const TermPtr& e, const SubstMap& m);
TypePtr substitute(const TypePtr& t, const SubstMap& m);
TermPtr subst1(const TermPtr& e, const std::string& x, const TermPtr& v);
TypePtr subst1(const TypePtr& t, const std::string& x, const TermPtr& v,
               TypePtr annot = nullptr);

std::set<std::string> free_vars(const TermPtr& e);
std::set<std::string> free_vars(const TypePtr& t);

// Simple shapes: refinement-erased types.
struct Shape;
using ShapePtr = std::shared_ptr<const Shape>;
struct Shape {
  enum Kind { B, Arrow, Dyn } kind;
  BaseId base = BaseId::Int;
  ShapePtr dom, cod;
};
ShapePtr shape_base(BaseId b);
ShapePtr shape_arrow(ShapePtr d, ShapePtr c);
ShapePtr shape_dyn();
bool shape_eq(const ShapePtr& a, const ShapePtr& b);
std::string shape_str(const ShapePtr& s);

struct ShapeUndefined {
  std::string what;
};
// shape_of throws ShapeUndefined on TyVar; Dynamic maps to the Dyn shape.
ShapePtr shape_of(const TypePtr& t);

// Canonical de-Bruijn printing: stable under alpha-renaming.  Used for
// alpha-equivalence, database keys and content hashes.
std::string canon(const TermPtr& e);
std::string canon(const TypePtr& t);
bool alpha_eq(const TermPtr& a, const TermPtr& b);
bool alpha_eq(const TypePtr& a, const TypePtr& b);

// Environment restricted to the free variables of S and T (transitively
// through the types of the kept bindings), canonicalized for database keys.
Env restrict_env(const Env& env, const TypePtr& S, const TypePtr& T);
std::string canon_key(const Env& env, const TypePtr& S, const TypePtr& T);

// FNV-1a content hash rendered as hex; used for program ids and SMT file
// names.
std::string content_hash(const std::string& s);

}  // namespace hytc
