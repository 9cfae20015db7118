#include "hytc/htc.hpp"

#include <algorithm>

#include "hytc/builtins.hpp"

namespace hytc {

namespace {

bool contains_tyvar_term(const TermPtr& e);

bool is_bare_tyvar(const TypePtr& t) {
  return t->kind == TypeKind::TyVar && t->delayed.empty();
}

[[noreturn]] void type_error(const Env& env, std::string msg,
                             TypePtr s = nullptr, TypePtr t = nullptr,
                             std::map<std::string, TermPtr> w = {}) {
  throw StaticTypeError{std::move(msg), env, std::move(s), std::move(t),
                        std::move(w)};
}

// Inserts a cast when subtyping is undecided; rejects on No.
TermPtr coerce(const Env& env, TermPtr e, const TypePtr& S, const TypePtr& T,
               HtcCtx& ctx) {
  if (T->kind == TypeKind::ExistsTy || contains_tyvar(T))
    type_error(env, "cannot cast into a type with existentials or unsolved "
                    "type variables: " + print(T), S, T);
  // A variable occurrence is checked together with its identity: the value
  // flowing into T is x itself, not an arbitrary inhabitant of Gamma(x).
  // (Synthesis still returns Gamma(x) unchanged; this strengthens only the
  // subtyping query and leaves the inserted cast's source type alone.)
  TypePtr Sq = S;
  if (e->kind == TermKind::Var && S->kind == TypeKind::Base) {
    std::string y = S->binder == e->name ? fresh(S->binder) : S->binder;
    TermPtr p = S->binder == e->name ? subst1(S->refine, S->binder, mk_var(y))
                                     : S->refine;
    Sq = mk_base(y, S->base, mk_and(p, mk_eq(mk_var(y), e)));
  }
  SubResult r = subtype(env, Sq, T, ctx.sub);
  ctx.obligations.push_back({env, S, T, r.certainty,
                             r.certainty == Certainty::Maybe});
  switch (r.certainty) {
    case Certainty::Yes:
      return e;
    case Certainty::No: {
      std::string msg = "type error: " + print(S) + " is not a subtype of " +
                        print(T);
      if (!r.witness.empty()) {
        msg += "; counterexample:";
        for (const auto& [v, val] : r.witness)
          msg += " " + v + " = " + print(val);
      }
      type_error(env, msg, S, T, std::move(r.witness));
    }
    case Certainty::Maybe:
      if (ctx.sub.db) ctx.sub.db->record_maybe(env, S, T, ctx.program_id);
      return mk_app(mk_cast(S, T), std::move(e));
  }
  return e;  // unreachable
}

// Weakens a type whose refinements mention out-of-scope names (pattern
// variables escaping their case branch) to its shape.
TypePtr weaken_escaping(const TypePtr& t, const std::set<std::string>& names) {
  std::set<std::string> fv = free_vars(t);
  bool escapes = std::any_of(names.begin(), names.end(),
                             [&](const std::string& n) { return fv.count(n); });
  if (!escapes) return t;
  switch (t->kind) {
    case TypeKind::Base:
      return mk_base_raw(t->base);
    case TypeKind::Arrow:
      return mk_arrow(t->binder, weaken_escaping(t->dom, names),
                      weaken_escaping(t->cod, names));
    default:
      return t;
  }
}

struct BranchPieces {
  const CtorInfo* ci;
  std::vector<std::string> names;  // pattern vars then self
  TermPtr body;
  std::vector<TypePtr> arg_tys;
  TypePtr self_ty;
  TermPtr fact;  // refutable path fact about a variable scrutinee (may null)
};

// Decomposes a case branch and computes the binder types: constructor
// argument telescope instantiated at the pattern variables, and the self
// binder refined by the constructor's result refinement, the scrutinee's
// refinement and (for a variable scrutinee) equality with it.
BranchPieces branch_pieces(const Env& env, const CaseBranch& br,
                           const TypePtr& scrut_ty, const TermPtr& scrut) {
  BranchPieces p;
  p.ci = ctor_info(br.ctor);
  if (!p.ci) type_error(env, "unknown constructor in case: " + br.ctor);
  size_t arity = p.ci->args.size();
  TermPtr h = br.handler;
  for (size_t i = 0; i <= arity; ++i) {
    if (h->kind != TermKind::Lam)
      type_error(env, "malformed case branch for " + br.ctor);
    p.names.push_back(h->name);
    h = h->body;
  }
  p.body = h;
  SubstMap inst;
  for (size_t i = 0; i < arity; ++i) {
    SubstMap pre(inst.begin(), inst.end());
    p.arg_tys.push_back(substitute(p.ci->args[i].second, pre));
    inst.push_back({p.ci->args[i].first, mk_var(p.names[i]), nullptr});
  }
  const std::string& self = p.names[arity];
  TermPtr refine = subst1(substitute(p.ci->result_refine, inst),
                          p.ci->result_binder, mk_var(self));
  refine = mk_and(refine,
                  subst1(scrut_ty->refine, scrut_ty->binder, mk_var(self)));
  if (scrut->kind == TermKind::Var) {
    refine = mk_and(refine, mk_eq(mk_var(self), scrut));
    // A separate fact the prover can use on paths through this branch:
    // the scrutinee variable itself satisfies the branch refinement.
    p.fact = subst1(substitute(p.ci->result_refine, inst),
                    p.ci->result_binder, scrut);
  }
  p.self_ty = mk_base(self, p.ci->result_base, refine);
  return p;
}

void check_coverage(const Env& env, const TermPtr& e, BaseId base) {
  const std::vector<std::string>& ctors = ctors_of_base(base);
  if (ctors.empty())
    type_error(env, std::string("cannot case over ") + base_name(base));
  std::vector<std::string> seen;
  for (const CaseBranch& br : e->branches) {
    if (std::find(ctors.begin(), ctors.end(), br.ctor) == ctors.end())
      type_error(env, "constructor " + br.ctor + " does not belong to " +
                          base_name(base));
    if (std::find(seen.begin(), seen.end(), br.ctor) != seen.end())
      type_error(env, "duplicate case branch for " + br.ctor);
    seen.push_back(br.ctor);
  }
  for (const std::string& c : ctors)
    if (std::find(seen.begin(), seen.end(), c) == seen.end())
      type_error(env, std::string("non-exhaustive case over ") +
                          base_name(base) + ": missing " + c);
}

// Compiles a case either in checking mode (expected != null: every branch
// body is checked against it) or in synthesis mode (the first branch's type
// is the result; later branches coerce to it).
TermPtr compile_case(const Env& env, const TermPtr& e, const TypePtr* expected,
                     HtcCtx& ctx, TypePtr& ty) {
  TypePtr sty;
  TermPtr scrut = synthesize(env, e->body, ctx, sty);
  if (sty->kind == TypeKind::Dynamic)
    type_error(env, "case scrutinee has type Dynamic; annotate it");
  if (sty->kind != TypeKind::Base)
    type_error(env, "case scrutinee is not of base type");
  check_coverage(env, e, sty->base);

  std::vector<CaseBranch> out;
  TypePtr result = expected ? *expected : nullptr;
  for (const CaseBranch& br : e->branches) {
    BranchPieces p = branch_pieces(env, br, sty, e->body);
    Env benv = env;
    std::set<std::string> bound;
    for (size_t i = 0; i < p.arg_tys.size(); ++i) {
      benv.push(p.names[i], p.arg_tys[i]);
      bound.insert(p.names[i]);
    }
    benv.push(p.names.back(), p.self_ty);
    bound.insert(p.names.back());
    if (p.fact) {
      std::string f = fresh("fact");
      benv.push(f, mk_base("u%", BaseId::Unit, p.fact));
      bound.insert(f);
    }
    TermPtr body;
    if (result) {
      body = check_against(benv, p.body, result, ctx);
    } else {
      TypePtr bty;
      body = synthesize(benv, p.body, ctx, bty);
      result = weaken_escaping(bty, bound);
    }
    // Rebuild the handler with its original annotations: the strengthened
    // binder types exist only in the checking environment, so a cast-free
    // compilation stays the identity.
    std::vector<TypePtr> orig;
    TermPtr oh = br.handler;
    for (size_t i = 0; i < p.names.size(); ++i) {
      orig.push_back(oh->annot);
      oh = oh->body;
    }
    TermPtr h = body;
    for (size_t i = p.names.size(); i-- > 0;)
      h = mk_lam(p.names[i], orig[i], h);
    out.push_back({br.ctor, h});
  }
  ty = result;
  return mk_case(scrut, std::move(out));
}

// The exact polymorphic type of equality is resolved from its first
// argument's base type.
TermPtr compile_eq(const Env& env, const TermPtr& e, HtcCtx& ctx, TypePtr& ty) {
  TypePtr at;
  TermPtr a = synthesize(env, e->a->b, ctx, at);
  if (at->kind != TypeKind::Base)
    type_error(env, "= compares base-type values only");
  TermPtr b = check_against(env, e->b, mk_base_raw(at->base), ctx);
  TermPtr cmp = mk_eq(a, b);
  ty = mk_base("b%", BaseId::Bool, mk_eq(mk_var("b%"), cmp));
  return cmp;
}

}  // namespace

bool contains_tyvar(const TypePtr& t) {
  switch (t->kind) {
    case TypeKind::TyVar:
      return true;
    case TypeKind::Base:
      return contains_tyvar_term(t->refine);
    case TypeKind::Arrow:
    case TypeKind::ExistsTy:
      return contains_tyvar(t->dom) || contains_tyvar(t->cod);
    case TypeKind::Dynamic:
      return false;
  }
  return false;
}

namespace {
bool contains_tyvar_term(const TermPtr& e) {
  if (e->kind == TermKind::PredVar) return true;
  if (e->annot && contains_tyvar(e->annot)) return true;
  if (e->cast_src && contains_tyvar(e->cast_src)) return true;
  if (e->cast_tgt && contains_tyvar(e->cast_tgt)) return true;
  if (e->a && contains_tyvar_term(e->a)) return true;
  if (e->b && contains_tyvar_term(e->b)) return true;
  if (e->body && contains_tyvar_term(e->body)) return true;
  for (const TermPtr& a : e->args)
    if (contains_tyvar_term(a)) return true;
  for (const CaseBranch& br : e->branches)
    if (contains_tyvar_term(br.handler)) return true;
  return false;
}
}  // namespace

TermPtr synthesize(const Env& env, const TermPtr& e, HtcCtx& ctx, TypePtr& ty) {
  switch (e->kind) {
    case TermKind::Var: {
      const TypePtr* t = env.lookup(e->name);
      if (!t) type_error(env, "unbound variable: " + e->name);
      ty = *t;
      return e;
    }
    case TermKind::IntLit:
      ty = ty_int(e->intval);
      return e;
    case TermKind::Prim: {
      const PrimInfo* pi = prim_info(e->name);
      if (!pi) type_error(env, "unknown primitive: " + e->name);
      if (e->name == "fix")
        type_error(env, "fix must be applied to a function");
      ty = pi->ty ? pi->ty : ty_eq(BaseId::Int);
      return e;
    }
    case TermKind::Ctor: {
      const CtorInfo* ci = ctor_info(e->name);
      SubstMap inst;
      std::vector<TermPtr> args;
      for (size_t i = 0; i < e->args.size(); ++i) {
        if (i >= ci->args.size())
          type_error(env, "constructor " + e->name + " over-applied");
        TypePtr want = substitute(ci->args[i].second, inst);
        TermPtr a = check_against(env, e->args[i], want, ctx);
        inst.push_back({ci->args[i].first, a, nullptr});
        args.push_back(a);
      }
      if (e->args.size() < ci->args.size()) {
        // Partially applied constructor: the remaining telescope as an arrow.
        TypePtr t = mk_base(ci->result_binder, ci->result_base,
                            substitute(ci->result_refine, inst));
        for (size_t i = ci->args.size(); i-- > e->args.size();)
          t = mk_arrow(ci->args[i].first,
                       substitute(ci->args[i].second, inst), t);
        ty = t;
      } else {
        ty = mk_base(ci->result_binder, ci->result_base,
                     substitute(ci->result_refine, inst));
      }
      return mk_ctor(e->name, std::move(args));
    }
    case TermKind::Lam: {
      if (contains_tyvar(e->annot))
        type_error(env, "unsolved type variable in annotation of " + e->name +
                            "; run type reconstruction first");
      Env benv = env;
      benv.push(e->name, e->annot);
      TypePtr bty;
      TermPtr body = synthesize(benv, e->body, ctx, bty);
      ty = mk_arrow(e->name, e->annot, bty);
      return mk_lam(e->name, e->annot, body);
    }
    case TermKind::Cast: {
      if (e->cast_tgt->kind == TypeKind::ExistsTy ||
          e->cast_src->kind == TypeKind::ExistsTy)
        type_error(env, "casts cannot mention existential types");
      if (contains_tyvar(e->cast_src) || contains_tyvar(e->cast_tgt))
        type_error(env, "casts cannot mention unsolved type variables");
      ty = mk_arrow(fresh("x"), e->cast_src, e->cast_tgt);
      return e;
    }
    case TermKind::App: {
      // let x [: T] = d in b
      if (e->a->kind == TermKind::Lam) {
        const TermPtr& lam = e->a;
        TermPtr d;
        TypePtr dty;
        if (is_bare_tyvar(lam->annot)) {
          d = synthesize(env, e->b, ctx, dty);
        } else {
          dty = lam->annot;
          d = check_against(env, e->b, dty, ctx);
        }
        Env benv = env;
        benv.push(lam->name, dty);
        TypePtr bty;
        TermPtr body = synthesize(benv, lam->body, ctx, bty);
        ty = subst1(bty, lam->name, d);
        return mk_app(mk_lam(lam->name, dty, body), d);
      }
      // fix g
      if (e->a->kind == TermKind::Prim && e->a->name == "fix") {
        TypePtr gty;
        TermPtr g = synthesize(env, e->b, ctx, gty);
        if (gty->kind != TypeKind::Arrow)
          type_error(env, "fix expects a function of functions");
        TypePtr want = mk_arrow(gty->binder, gty->dom, gty->dom);
        g = coerce(env, g, gty, want, ctx);
        ty = gty->dom;
        return mk_app(e->a, g);
      }
      // polymorphic equality
      if (e->a->kind == TermKind::App && e->a->a->kind == TermKind::Prim &&
          e->a->a->name == "=")
        return compile_eq(env, e, ctx, ty);

      TypePtr fty;
      TermPtr f = synthesize(env, e->a, ctx, fty);
      if (fty->kind == TypeKind::Dynamic) {
        // A dynamically typed function: guard the application with a cast
        // to a dynamic arrow.
        TypePtr want = mk_arrow(fresh("x"), mk_dynamic(), mk_dynamic());
        f = coerce(env, f, fty, want, ctx);
        fty = want;
      }
      if (fty->kind != TypeKind::Arrow)
        type_error(env, "application of a non-function of type " + print(fty));
      TermPtr a = check_against(env, e->b, fty->dom, ctx);
      ty = subst1(fty->cod, fty->binder, a);
      return mk_app(f, a);
    }
    case TermKind::Case: {
      return compile_case(env, e, nullptr, ctx, ty);
    }
    case TermKind::POr:
    case TermKind::PAnd: {
      TermPtr l = check_against(env, e->a, mk_base_raw(BaseId::Bool), ctx);
      TermPtr r = check_against(env, e->b, mk_base_raw(BaseId::Bool), ctx);
      ty = mk_base_raw(BaseId::Bool);
      return e->kind == TermKind::POr ? mk_por(l, r) : mk_pand(l, r);
    }
    case TermKind::Checking:
      type_error(env, "checking form in source program");
    case TermKind::Exists:
      type_error(env, "existential predicate in executable position");
    case TermKind::PredVar:
      type_error(env, "refinement placeholder in executable position; run "
                      "type reconstruction first");
  }
  type_error(env, "cannot type term");
}

TermPtr check_against(const Env& env, const TermPtr& e, const TypePtr& T,
                      HtcCtx& ctx) {
  // let-redex: check the body against the expectation.
  if (e->kind == TermKind::App && e->a->kind == TermKind::Lam) {
    const TermPtr& lam = e->a;
    TermPtr d;
    TypePtr dty;
    if (is_bare_tyvar(lam->annot)) {
      d = synthesize(env, e->b, ctx, dty);
    } else {
      dty = lam->annot;
      d = check_against(env, e->b, dty, ctx);
    }
    Env benv = env;
    benv.push(lam->name, dty);
    TermPtr body = check_against(benv, lam->body, T, ctx);
    return mk_app(mk_lam(lam->name, dty, body), d);
  }
  // fix against an expected recursive type.
  if (e->kind == TermKind::App && e->a->kind == TermKind::Prim &&
      e->a->name == "fix" && !contains_tyvar(T)) {
    TypePtr want = mk_arrow(fresh("f"), T, T);
    TermPtr g = check_against(env, e->b, want, ctx);
    return mk_app(e->a, g);
  }
  // Push the expectation into case branches for path sensitivity.
  if (e->kind == TermKind::Case && !contains_tyvar(T)) {
    TypePtr ty;
    return compile_case(env, e, &T, ctx, ty);
  }
  // Push into a lambda when the domains are known compatible.
  if (e->kind == TermKind::Lam && T->kind == TypeKind::Arrow &&
      !contains_tyvar(e->annot)) {
    SubResult dom = subtype(env, T->dom, e->annot, ctx.sub);
    if (dom.certainty == Certainty::Yes) {
      // Entering through T, the argument additionally satisfies T's domain.
      Env tenv = env;
      tenv.push(e->name, T->dom);
      TermPtr body = check_against(
          tenv, e->body, subst1(T->cod, T->binder, mk_var(e->name)), ctx);
      return mk_lam(e->name, e->annot, body);
    }
  }
  TypePtr S;
  TermPtr c = synthesize(env, e, ctx, S);
  return coerce(env, std::move(c), S, T, ctx);
}

CompileReport compile(const SourceProgram& prog, HtcCtx& ctx) {
  CompileReport rep;
  Env env;
  for (const Binding& b : prog.bindings) {
    Binding out;
    out.name = b.name;
    out.annot = b.annot;
    TypePtr t;
    if (b.annot && !contains_tyvar(b.annot)) {
      t = b.annot;
      out.term = check_against(env, b.term, t, ctx);
    } else if (b.annot) {
      type_error(env, "binding " + b.name + " has unsolved type variables; "
                      "run type reconstruction first");
    } else {
      out.term = synthesize(env, b.term, ctx, t);
      out.annot = t;
    }
    env.push(b.name, t);
    rep.compiled.bindings.push_back(std::move(out));
  }
  rep.compiled.main = synthesize(env, prog.main, ctx, rep.main_ty);
  rep.obligations = ctx.obligations;
  for (const Obligation& o : rep.obligations)
    if (o.cast_inserted) ++rep.casts_inserted;
  return rep;
}

}  // namespace hytc
