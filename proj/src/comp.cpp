#include "hytc/comp.hpp"

#include <algorithm>

#include "hytc/builtins.hpp"

namespace hytc {

namespace {

[[noreturn]] void comp_fallback(const std::string& msg) {
  throw CompFallback{msg};
}

bool contains_exists(const TypePtr& t) {
  switch (t->kind) {
    case TypeKind::ExistsTy:
      return true;
    case TypeKind::Arrow:
      return contains_exists(t->dom) || contains_exists(t->cod);
    default:
      return false;
  }
}

bool contains_tyvar_shallow(const TypePtr& t) {
  switch (t->kind) {
    case TypeKind::TyVar:
      return true;
    case TypeKind::Arrow:
      return contains_tyvar_shallow(t->dom) || contains_tyvar_shallow(t->cod);
    case TypeKind::ExistsTy:
      return contains_tyvar_shallow(t->dom) || contains_tyvar_shallow(t->cod);
    default:
      return false;
  }
}

// ---------------------------------------------------------------------------
// Restricted predicate fragment

bool is_measure(const std::string& n) {
  return n == "length" || n == "lower" || n == "upper";
}

// Linear integer term: constants, variables, +, -, constant multiples,
// min/max, and measures applied to variables.
bool lin(const TermPtr& e) {
  switch (e->kind) {
    case TermKind::IntLit:
    case TermKind::Var:
      return true;
    case TermKind::App: {
      // binary k a b
      if (e->a->kind == TermKind::App &&
          e->a->a->kind == TermKind::Prim) {
        const std::string& k = e->a->a->name;
        const TermPtr& x = e->a->b;
        const TermPtr& y = e->b;
        if (k == "+" || k == "-" || k == "min" || k == "max")
          return lin(x) && lin(y);
        if (k == "*")
          return (x->kind == TermKind::IntLit && lin(y)) ||
                 (y->kind == TermKind::IntLit && lin(x));
        return false;
      }
      // measure applied to a variable
      if (e->a->kind == TermKind::Prim && is_measure(e->a->name))
        return e->b->kind == TermKind::Var;
      return false;
    }
    default:
      return false;
  }
}

bool atom(const TermPtr& e);

bool cmp_atom(const TermPtr& e) {
  if (e->kind != TermKind::App || e->a->kind != TermKind::App ||
      e->a->a->kind != TermKind::Prim)
    return false;
  const std::string& k = e->a->a->name;
  if (k == "<" || k == "<=" || k == ">" || k == ">=")
    return lin(e->a->b) && lin(e->b);
  if (k == "=")
    return (lin(e->a->b) && lin(e->b)) || (atom(e->a->b) && atom(e->b));
  return false;
}

bool atom(const TermPtr& e) {
  switch (e->kind) {
    case TermKind::Var:
      return true;  // boolean variable
    case TermKind::Ctor:
      return e->args.empty() && (e->name == "true" || e->name == "false");
    case TermKind::App:
      if (e->a->kind == TermKind::Prim && e->a->name == "not")
        return atom(e->b);
      return cmp_atom(e);
    default:
      return false;
  }
}

}  // namespace

bool in_fragment_pred(const TermPtr& p) {
  switch (p->kind) {
    case TermKind::PAnd:
      return in_fragment_pred(p->a) && in_fragment_pred(p->b);
    case TermKind::Case: {
      if (p->body->kind != TermKind::Var) return false;
      for (const CaseBranch& br : p->branches) {
        TermPtr h = br.handler;
        while (h->kind == TermKind::Lam) h = h->body;
        if (!in_fragment_pred(h)) return false;
      }
      return true;
    }
    default:
      return atom(p);
  }
}

bool in_fragment_type(const TypePtr& t) {
  switch (t->kind) {
    case TypeKind::Base:
      return in_fragment_pred(t->refine);
    case TypeKind::Arrow:
      return in_fragment_type(t->dom) && in_fragment_type(t->cod);
    default:
      return false;  // Dynamic, TyVar, ExistsTy are outside the fragment
  }
}

// ---------------------------------------------------------------------------
// Self types

TypePtr selfify(const TypePtr& T, const TermPtr& e) {
  switch (T->kind) {
    case TypeKind::Base: {
      std::string y = T->binder;
      TermPtr p = T->refine;
      if (free_vars(e).count(y)) {
        y = fresh(T->binder);
        p = subst1(p, T->binder, mk_var(y));
      }
      return mk_base(y, T->base, mk_and(p, mk_eq(mk_var(y), e)));
    }
    case TypeKind::Arrow: {
      std::string x = T->binder;
      TypePtr cod = T->cod;
      if (free_vars(e).count(x)) {
        x = fresh(T->binder);
        cod = subst1(cod, T->binder, mk_var(x));
      }
      return mk_arrow(x, T->dom, selfify(cod, mk_app(e, mk_var(x))));
    }
    case TypeKind::ExistsTy: {
      std::string z = T->binder;
      TypePtr body = T->cod;
      if (free_vars(e).count(z)) {
        z = fresh(T->binder);
        body = subst1(body, T->binder, mk_var(z));
      }
      return mk_exists_ty(z, T->dom, selfify(body, e));
    }
    default:
      return T;  // Dynamic / TyVar: nothing sensible to strengthen
  }
}

// ---------------------------------------------------------------------------
// Algorithmic typing

Certainty asubtype(const Env& env, const TypePtr& E, const TypePtr& R,
                   CompCtx& ctx) {
  SubResult r = subtype(env, E, R, ctx.sub);
  ctx.obligations.push_back({env, E, R, r.certainty, r.witness});
  return r.certainty;
}

namespace {

// Peels outer existentials of E into the environment.
TypePtr peel(Env& env, TypePtr E) {
  while (E->kind == TypeKind::ExistsTy) {
    std::string w = fresh(E->binder);
    env.push(w, E->dom);
    E = subst1(E->cod, E->binder, mk_var(w));
  }
  return E;
}

struct Atyper {
  CompCtx& ctx;

  // Validates a programmer-supplied annotation and tracks the fragment.
  void annotation(const TypePtr& R) {
    if (contains_tyvar_shallow(R))
      comp_fallback("compositional checking needs full type annotations "
                    "(found a type hole)");
    if (contains_exists(R))
      comp_fallback("existential types cannot appear in annotations");
    if (!in_fragment_type(R)) ctx.in_fragment = false;
  }

  // A-App: peel existentials around F, check the argument against the
  // domain, and package the codomain under exists x:E2.
  TypePtr apply_one(const Env& env, const TypePtr& F, const TermPtr& arg) {
    Env e2 = env;
    std::vector<std::pair<std::string, TypePtr>> peeled;
    TypePtr G = F;
    while (G->kind == TypeKind::ExistsTy) {
      std::string w = fresh(G->binder);
      e2.push(w, G->dom);
      peeled.push_back({w, G->dom});
      G = subst1(G->cod, G->binder, mk_var(w));
    }
    if (G->kind == TypeKind::Dynamic)
      comp_fallback("cannot check an application of a Dynamic function "
                    "compositionally");
    if (G->kind != TypeKind::Arrow)
      comp_fallback("application of a non-function");
    TypePtr E2 = atype(e2, arg, ctx);
    asubtype(e2, E2, G->dom, ctx);
    TypePtr out = mk_exists_ty(G->binder, E2, G->cod);
    for (auto it = peeled.rbegin(); it != peeled.rend(); ++it)
      out = mk_exists_ty(it->first, it->second, out);
    return out;
  }

  TypePtr case_type(const Env& env, const TermPtr& e) {
    if (e->body->kind != TermKind::Var)
      comp_fallback("case inspects a non-variable; rewrite it as "
                    "`let y = e in case y of ...`");
    const TermPtr& scrut = e->body;
    const TypePtr* st = env.lookup(scrut->name);
    if (!st) comp_fallback("unbound variable: " + scrut->name);
    Env env0 = env;
    TypePtr sty = peel(env0, *st);
    if (sty->kind != TypeKind::Base)
      comp_fallback("case over a non-base value");
    const std::vector<std::string>& ctors = ctors_of_base(sty->base);
    if (ctors.empty())
      comp_fallback(std::string("cannot case over ") + base_name(sty->base));
    std::vector<std::string> seen;
    for (const CaseBranch& br : e->branches) seen.push_back(br.ctor);
    for (const std::string& c : ctors)
      if (std::find(seen.begin(), seen.end(), c) == seen.end())
        comp_fallback(std::string("non-exhaustive case over ") +
                      base_name(sty->base) + ": missing " + c);

    struct Piece {
      std::vector<std::pair<std::string, TypePtr>> binders;  // args + self
      TypePtr ty;  // branch result, existentials peeled into binders
    };
    std::vector<Piece> pieces;
    for (const CaseBranch& br : e->branches) {
      const CtorInfo* ci = ctor_info(br.ctor);
      if (!ci || std::find(ctors.begin(), ctors.end(), br.ctor) == ctors.end())
        comp_fallback("constructor " + br.ctor + " does not belong to " +
                      base_name(sty->base));
      size_t arity = ci->args.size();
      TermPtr h = br.handler;
      std::vector<std::string> names;
      for (size_t i = 0; i <= arity; ++i) {
        if (h->kind != TermKind::Lam)
          comp_fallback("malformed case branch for " + br.ctor);
        names.push_back(h->name);
        h = h->body;
      }
      Piece pc;
      Env benv = env0;
      SubstMap inst;
      for (size_t i = 0; i < arity; ++i) {
        SubstMap pre(inst.begin(), inst.end());
        TypePtr at = substitute(ci->args[i].second, pre);
        benv.push(names[i], at);
        pc.binders.push_back({names[i], at});
        inst.push_back({ci->args[i].first, mk_var(names[i]), nullptr});
      }
      const std::string& self = names[arity];
      TermPtr refine = subst1(substitute(ci->result_refine, inst),
                              ci->result_binder, mk_var(self));
      refine = mk_and(refine, subst1(sty->refine, sty->binder, mk_var(self)));
      refine = mk_and(refine, mk_eq(mk_var(self), scrut));
      TypePtr self_ty = mk_base(self, ci->result_base, refine);
      benv.push(self, self_ty);
      pc.binders.push_back({self, self_ty});
      // The scrutinee variable itself satisfies the branch refinement.
      TermPtr fact = subst1(substitute(ci->result_refine, inst),
                            ci->result_binder, scrut);
      if (!is_true(fact)) {
        std::string fn = fresh("fact");
        TypePtr fty = mk_base("u%", BaseId::Unit, fact);
        benv.push(fn, fty);
        pc.binders.push_back({fn, fty});
      }
      TypePtr bty = atype(benv, h, ctx);
      while (bty->kind == TypeKind::ExistsTy) {
        std::string w = fresh(bty->binder);
        pc.binders.push_back({w, bty->dom});
        bty = subst1(bty->cod, bty->binder, mk_var(w));
      }
      pc.ty = bty;
      pieces.push_back(std::move(pc));
    }

    // Function-typed branches must agree exactly; base-typed branches merge
    // into a disjunction of existentially closed branch refinements.
    if (pieces[0].ty->kind != TypeKind::Base) {
      for (const Piece& pc : pieces)
        if (!alpha_eq(pc.ty, pieces[0].ty))
          comp_fallback("case branches of function type must agree");
      return pieces[0].ty;
    }
    BaseId base = pieces[0].ty->base;
    std::string v = fresh(pieces[0].ty->binder);
    TermPtr merged = nullptr;
    for (const Piece& pc : pieces) {
      if (pc.ty->kind != TypeKind::Base || pc.ty->base != base)
        comp_fallback("case branches disagree on their result shape");
      TermPtr q = subst1(pc.ty->refine, pc.ty->binder, mk_var(v));
      // Close over the whole binder chain: the guard facts live in the
      // self binder's refinement, not necessarily in q itself.
      for (auto it = pc.binders.rbegin(); it != pc.binders.rend(); ++it)
        q = mk_exists(it->first, it->second, q);
      merged = merged ? mk_por(merged, q) : q;
    }
    return mk_base(v, base, merged);
  }
};

}  // namespace

TypePtr atype(const Env& env, const TermPtr& e, CompCtx& ctx) {
  Atyper A{ctx};
  switch (e->kind) {
    case TermKind::Var: {
      const TypePtr* t = env.lookup(e->name);
      if (!t) comp_fallback("unbound variable: " + e->name);
      return selfify(*t, e);
    }
    case TermKind::IntLit:
      return ty_int(e->intval);
    case TermKind::Prim: {
      const PrimInfo* pi = prim_info(e->name);
      if (!pi) comp_fallback("unknown primitive: " + e->name);
      if (e->name == "fix")
        comp_fallback("fix must be applied to an annotated function");
      return pi->ty ? pi->ty : ty_eq(BaseId::Int);
    }
    case TermKind::Ctor: {
      if (!ctor_info(e->name))
        comp_fallback("unknown constructor: " + e->name);
      TypePtr t = ty_ctor(e->name);
      for (const TermPtr& arg : e->args) t = A.apply_one(env, t, arg);
      return t;
    }
    case TermKind::Lam: {
      A.annotation(e->annot);
      Env benv = env;
      benv.push(e->name, e->annot);
      return mk_arrow(e->name, e->annot, atype(benv, e->body, ctx));
    }
    case TermKind::App: {
      // let x [: R] = d in b
      if (e->a->kind == TermKind::Lam) {
        const TermPtr& lam = e->a;
        TypePtr E2 = atype(env, e->b, ctx);
        TypePtr bound = E2;
        if (lam->annot->kind != TypeKind::TyVar) {
          A.annotation(lam->annot);
          asubtype(env, E2, lam->annot, ctx);
          bound = lam->annot;
        }
        Env benv = env;
        benv.push(lam->name, bound);
        TypePtr E1 = atype(benv, lam->body, ctx);
        // Package under the annotation when there is one: the subtyping
        // obligation above justifies the weakening, and it keeps the
        // existential witness types inside the restricted fragment.
        return mk_exists_ty(lam->name, bound, E1);
      }
      // fix (fun (rec : R) => g)
      if (e->a->kind == TermKind::Prim && e->a->name == "fix") {
        if (e->b->kind != TermKind::Lam)
          comp_fallback("fix expects an immediate annotated function");
        A.annotation(e->b->annot);
        if (e->b->annot->kind != TypeKind::Arrow)
          comp_fallback("fix needs a function type annotation");
        Env benv = env;
        benv.push(e->b->name, e->b->annot);
        TypePtr body_ty = atype(benv, e->b->body, ctx);
        asubtype(benv, body_ty, e->b->annot, ctx);
        return e->b->annot;
      }
      // polymorphic equality: resolve the base from the first operand
      if (e->a->kind == TermKind::App && e->a->a->kind == TermKind::Prim &&
          e->a->a->name == "=") {
        Env e2 = env;
        TypePtr at = peel(e2, atype(e2, e->a->b, ctx));
        if (at->kind != TypeKind::Base)
          comp_fallback("= compares non-base values");
        TypePtr t = ty_eq(at->base);
        t = A.apply_one(env, t, e->a->b);
        return A.apply_one(env, t, e->b);
      }
      TypePtr F = atype(env, e->a, ctx);
      return A.apply_one(env, F, e->b);
    }
    case TermKind::Case:
      return A.case_type(env, e);
    case TermKind::POr:
    case TermKind::PAnd: {
      TypePtr b = mk_base_raw(BaseId::Bool);
      asubtype(env, atype(env, e->a, ctx), b, ctx);
      asubtype(env, atype(env, e->b, ctx), b, ctx);
      return b;
    }
    case TermKind::Cast:
      comp_fallback("casts are not part of compositional source programs");
    case TermKind::Checking:
      comp_fallback("a cast-in-progress cannot appear in source");
    case TermKind::Exists:
      comp_fallback("existential predicates cannot appear in source terms");
    case TermKind::PredVar:
      comp_fallback("unsolved refinement placeholder");
  }
  comp_fallback("unhandled term form");
}

const char* comp_verdict_name(CompVerdict v) {
  switch (v) {
    case CompVerdict::Accept:
      return "Accept";
    case CompVerdict::Reject:
      return "Reject";
    default:
      return "Fallback";
  }
}

CompReport comp_check(const SourceProgram& prog, const SubCtx& sub) {
  CompReport rep;
  CompCtx ctx;
  ctx.sub = sub;
  ctx.sub.error_on_right_exists = true;
  try {
    rep.main_ty = atype(Env{}, prog.as_term(), ctx);
  } catch (const CompFallback& f) {
    rep.obligations = std::move(ctx.obligations);
    rep.in_fragment = ctx.in_fragment;
    rep.note = f.msg;
    rep.verdict = CompVerdict::Fallback;
    return rep;
  }
  rep.obligations = std::move(ctx.obligations);
  rep.in_fragment = ctx.in_fragment;
  const CompObligation* refuted = nullptr;
  for (const CompObligation& o : rep.obligations) {
    if (o.certainty == Certainty::Yes) rep.yes++;
    if (o.certainty == Certainty::Maybe) rep.maybe++;
    if (o.certainty == Certainty::No) {
      rep.no++;
      if (!refuted) refuted = &o;
    }
  }
  if (rep.no == 0 && rep.maybe == 0) {
    rep.verdict = CompVerdict::Accept;
  } else if (rep.in_fragment && refuted) {
    rep.verdict = CompVerdict::Reject;
    rep.witness = refuted->witness;
    rep.note = "refuted obligation: " + print(refuted->lhs) +
               " is not a subtype of " + print(refuted->rhs);
  } else {
    rep.verdict = CompVerdict::Fallback;
    rep.note = rep.maybe ? "undecided obligations outside the restricted "
                           "fragment"
                         : "refutation found outside the restricted fragment";
  }
  return rep;
}

}  // namespace hytc
