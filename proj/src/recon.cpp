#include "hytc/recon.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <set>

#include "hytc/builtins.hpp"

namespace hytc {

namespace {

[[noreturn]] void recon_error(std::string msg) {
  throw ReconError{std::move(msg)};
}

bool is_bare_tyvar(const TypePtr& t) {
  return t->kind == TypeKind::TyVar && t->delayed.empty();
}

// ---------------------------------------------------------------------------
// Simplification

bool is_var(const TermPtr& e, const std::string& n) {
  return e->kind == TermKind::Var && e->name == n;
}

bool is_eq_atom(const TermPtr& e, TermPtr& l, TermPtr& r) {
  if (e->kind == TermKind::App && e->a->kind == TermKind::App &&
      e->a->a->kind == TermKind::Prim && e->a->a->name == "=") {
    l = e->a->b;
    r = e->b;
    return true;
  }
  return false;
}

// A conjunct of the form x = e or e = x with x not free in e defines x.
TermPtr definition_of(const TermPtr& conj, const std::string& x) {
  TermPtr l, r;
  if (!is_eq_atom(conj, l, r)) return nullptr;
  if (is_var(l, x) && !free_vars(r).count(x)) return r;
  if (is_var(r, x) && !free_vars(l).count(x)) return l;
  return nullptr;
}

void collect_conjuncts(const TermPtr& e, std::vector<TermPtr>& out) {
  if (e->kind == TermKind::PAnd) {
    collect_conjuncts(e->a, out);
    collect_conjuncts(e->b, out);
  } else {
    out.push_back(e);
  }
}

void collect_disjuncts(const TermPtr& e, std::vector<TermPtr>& out) {
  if (e->kind == TermKind::POr) {
    collect_disjuncts(e->a, out);
    collect_disjuncts(e->b, out);
  } else {
    out.push_back(e);
  }
}

TermPtr simp(const TermPtr& p, bool full);
TypePtr simp_ty(const TypePtr& t, bool full);

TermPtr simp_exists(const TermPtr& p, bool full) {
  TermPtr body = simp(p->body, full);
  TypePtr T = simp_ty(p->annot, full);
  if (is_false(body)) return mk_false();
  // Singleton annotation {n:B | n = k}: the witness is forced.
  if (full && T->kind == TypeKind::Base) {
    TermPtr def = definition_of(T->refine, T->binder);
    if (def) return simp(subst1(body, p->name, def), full);
  }
  // A conjunct of the body that pins the witness down: substitute it away
  // (the annotation's constraint is kept as a residual conjunct).
  std::vector<TermPtr> cs;
  collect_conjuncts(body, cs);
  for (size_t i = 0; i < cs.size(); ++i) {
    TermPtr def = definition_of(cs[i], p->name);
    if (!def) continue;
    TermPtr rest = mk_true();
    for (size_t j = 0; j < cs.size(); ++j)
      if (j != i) rest = mk_and(rest, cs[j]);
    rest = subst1(rest, p->name, def);
    if (T->kind == TypeKind::Base)
      rest = mk_and(subst1(T->refine, T->binder, def), rest);
    return simp(rest, full);
  }
  if (!free_vars(body).count(p->name)) {
    // Every type of the language is inhabited once its refinement is
    // trivial; an unused witness of such a type can be dropped.
    if (T->kind != TypeKind::Base || is_true(T->refine)) return body;
  }
  return mk_exists(p->name, T, body);
}

TermPtr simp(const TermPtr& p, bool full) {
  switch (p->kind) {
    case TermKind::PAnd: {
      std::vector<TermPtr> cs;
      collect_conjuncts(p, cs);
      std::vector<TermPtr> out;
      std::set<std::string> seen;
      for (const TermPtr& c : cs) {
        TermPtr s = simp(c, full);
        if (is_true(s)) continue;
        if (is_false(s)) return mk_false();
        if (seen.insert(canon(s)).second) out.push_back(s);
      }
      if (out.empty()) return mk_true();
      TermPtr r = out.back();
      for (size_t i = out.size() - 1; i-- > 0;) r = mk_and(out[i], r);
      return r;
    }
    case TermKind::POr: {
      std::vector<TermPtr> ds;
      collect_disjuncts(p, ds);
      std::vector<TermPtr> out;
      std::set<std::string> seen;
      for (const TermPtr& d : ds) {
        TermPtr s = simp(d, full);
        if (is_false(s)) continue;
        if (is_true(s)) return mk_true();
        if (seen.insert(canon(s)).second) out.push_back(s);
      }
      if (out.empty()) return mk_false();
      TermPtr r = out.back();
      for (size_t i = out.size() - 1; i-- > 0;) r = mk_por(out[i], r);
      return r;
    }
    case TermKind::Exists:
      return simp_exists(p, full);
    default:
      return fold_constants(p);
  }
}

TypePtr simp_ty(const TypePtr& t, bool full) {
  switch (t->kind) {
    case TypeKind::Base:
      return mk_base(t->binder, t->base, simp(t->refine, full));
    case TypeKind::Arrow:
      return mk_arrow(t->binder, simp_ty(t->dom, full), simp_ty(t->cod, full));
    case TypeKind::ExistsTy:
      return mk_exists_ty(t->binder, simp_ty(t->dom, full),
                          simp_ty(t->cod, full));
    default:
      return t;
  }
}

// ---------------------------------------------------------------------------
// Generic structure-preserving term rewriting, parameterized by what happens
// at PredVar nodes and at embedded types.

struct Rewriter {
  std::function<TermPtr(const TermPtr&)> on_predvar;  // may be null
  std::function<TypePtr(const TypePtr&)> on_type;     // applied to all types

  TypePtr ty(const TypePtr& t) const { return on_type ? on_type(t) : t; }

  TermPtr term(const TermPtr& e) const {
    switch (e->kind) {
      case TermKind::Var:
      case TermKind::Prim:
      case TermKind::IntLit:
        return e;
      case TermKind::Ctor: {
        std::vector<TermPtr> args;
        for (const TermPtr& a : e->args) args.push_back(term(a));
        return mk_ctor(e->name, std::move(args));
      }
      case TermKind::Lam:
        return mk_lam(e->name, ty(e->annot), term(e->body));
      case TermKind::App:
        return mk_app(term(e->a), term(e->b));
      case TermKind::Cast:
        return mk_cast(ty(e->cast_src), ty(e->cast_tgt));
      case TermKind::Checking:
        return mk_checking(ty(e->annot), term(e->a), term(e->b),
                           ty(e->annot2));
      case TermKind::Case: {
        std::vector<CaseBranch> brs;
        for (const CaseBranch& br : e->branches)
          brs.push_back({br.ctor, term(br.handler)});
        return mk_case(term(e->body), std::move(brs));
      }
      case TermKind::POr:
        return mk_por(term(e->a), term(e->b), e->fair);
      case TermKind::PAnd:
        return mk_pand(term(e->a), term(e->b), e->fair);
      case TermKind::Exists:
        return mk_exists(e->name, ty(e->annot), term(e->body));
      case TermKind::PredVar: {
        if (on_predvar) {
          TermPtr r = on_predvar(e);
          if (r) return r;
        }
        SubstMap m;
        for (const SubstEntry& se : e->delayed)
          m.push_back({se.name, term(se.value),
                       se.annot ? ty(se.annot) : nullptr});
        return mk_predvar(e->name, std::move(m));
      }
    }
    return e;
  }
};

// Refinement-erased executable skeleton of a type (for the annotations of
// the fix-encoded recursive placeholders).
TypePtr raw_of(const TypePtr& t) {
  switch (t->kind) {
    case TypeKind::Base:
      return mk_base_raw(t->base);
    case TypeKind::Arrow:
      return mk_arrow(t->binder, raw_of(t->dom), raw_of(t->cod));
    case TypeKind::ExistsTy:
      return raw_of(t->cod);
    default:
      return mk_dynamic();
  }
}

// ---------------------------------------------------------------------------
// The reconstruction engine

struct PsiInfo {
  std::string binder;
  BaseId base = BaseId::Int;
  Env env;  // Gamma_psi: the environment the placeholder may mention
};

struct Bound {
  Env env;        // constraint environment
  TermPtr lhs;    // hypothesis (may mention other placeholders)
  SubstMap theta; // delayed substitution on the placeholder occurrence
  // Binders whose refinements carry path information (case pattern/self
  // binders): existentially included in the bound even when the hypothesis
  // does not mention them.
  std::set<std::string> forced;
};

struct SubC {
  Env env;
  TypePtr S, T;
  std::set<std::string> forced;
};

struct ImpC {
  Env env;
  TermPtr lhs, rhs;
  std::set<std::string> forced;
};

struct Recon {
  ProverOptions popts;

  std::vector<SubC> subs;
  struct TvInfo {
    Env env;
  };
  std::map<std::string, TvInfo> tvs;        // registered type variables
  std::map<std::string, std::string> uf;    // union-find over their names
  std::map<std::string, TypePtr> tmpl;      // shape template per class root
  std::map<std::string, TypePtr> solution;  // materialized shapes
  std::map<std::string, TypePtr> inferred;  // bare let-binder type variables
  std::set<std::string> in_progress;

  std::map<std::string, PsiInfo> psis;
  std::map<std::string, std::vector<Bound>> bounds;
  std::map<std::string, TermPtr> sr;  // solved strongest refinements
  std::vector<ImpC> imps;

  // ---- constraint generation ----

  const std::string& find(const std::string& a) {
    std::string* p = &uf[a];
    if (p->empty() || *p == a) {
      if (p->empty()) *p = a;
      return uf[a];
    }
    const std::string& r = find(*p);
    uf[a] = r;
    return uf[a];
  }

  void register_tyvars(const TypePtr& t, const Env& env) {
    switch (t->kind) {
      case TypeKind::TyVar:
        if (!tvs.count(t->var)) {
          tvs[t->var] = {env};
          find(t->var);
        }
        for (const SubstEntry& se : t->delayed)
          if (se.annot) register_tyvars(se.annot, env);
        return;
      case TypeKind::Arrow: {
        register_tyvars(t->dom, env);
        Env e2 = env;
        e2.push(t->binder, t->dom);
        register_tyvars(t->cod, e2);
        return;
      }
      case TypeKind::ExistsTy: {
        register_tyvars(t->dom, env);
        Env e2 = env;
        e2.push(t->binder, t->dom);
        register_tyvars(t->cod, e2);
        return;
      }
      default:
        return;
    }
  }

  void sub(const Env& env, TypePtr S, TypePtr T,
           std::set<std::string> forced = {}) {
    subs.push_back({env, std::move(S), std::move(T), std::move(forced)});
  }

  TypePtr mint(const Env& env) {
    std::string a = fresh("alpha");
    tvs[a] = {env};
    find(a);
    return mk_tyvar(a);
  }

  TypePtr cgen(const Env& env, const TermPtr& e);
  void ccheck(const Env& env, const TermPtr& e, const TypePtr& T);

  // Emits the subtyping constraint for a value of type S flowing into T,
  // strengthening a variable occurrence with its identity (mirroring the
  // hybrid checker's treatment of checking sites).
  void sub_val(const Env& env, const TermPtr& e, TypePtr S, const TypePtr& T,
               std::set<std::string> forced = {}) {
    if (e->kind == TermKind::Var && S->kind == TypeKind::Base) {
      std::string y = S->binder == e->name ? fresh(S->binder) : S->binder;
      TermPtr p = S->binder == e->name
                      ? subst1(S->refine, S->binder, mk_var(y))
                      : S->refine;
      S = mk_base(y, S->base, mk_and(p, mk_eq(mk_var(y), e)));
    }
    sub(env, std::move(S), T, std::move(forced));
  }

  // Shared per-branch environment setup for case terms.
  struct BranchEnv {
    Env env;
    TermPtr body;
    std::set<std::string> introduced;
  };
  std::vector<BranchEnv> case_branches(const Env& env, const TermPtr& e,
                                       const TypePtr& sty) {
    const std::vector<std::string>& ctors = ctors_of_base(sty->base);
    if (ctors.empty())
      recon_error(std::string("cannot case over ") + base_name(sty->base));
    std::vector<BranchEnv> out;
    for (const CaseBranch& br : e->branches) {
      const CtorInfo* ci = ctor_info(br.ctor);
      if (!ci) recon_error("unknown constructor in case: " + br.ctor);
      size_t arity = ci->args.size();
      TermPtr h = br.handler;
      std::vector<std::string> names;
      for (size_t i = 0; i <= arity; ++i) {
        if (h->kind != TermKind::Lam)
          recon_error("malformed case branch for " + br.ctor);
        names.push_back(h->name);
        h = h->body;
      }
      Env benv = env;
      SubstMap inst;
      for (size_t i = 0; i < arity; ++i) {
        benv.push(names[i], substitute(ci->args[i].second, inst));
        inst.push_back({ci->args[i].first, mk_var(names[i]), nullptr});
      }
      TermPtr refine = subst1(substitute(ci->result_refine, inst),
                              ci->result_binder, mk_var(names[arity]));
      refine = mk_and(refine, subst1(sty->refine, sty->binder,
                                     mk_var(names[arity])));
      std::set<std::string> intro(names.begin(), names.end());
      if (e->body->kind == TermKind::Var) {
        refine = mk_and(refine, mk_eq(mk_var(names[arity]), e->body));
        TermPtr fact = subst1(substitute(ci->result_refine, inst),
                              ci->result_binder, e->body);
        benv.push(names[arity], mk_base(names[arity], ci->result_base,
                                        refine));
        std::string fn = fresh("fact");
        benv.push(fn, mk_base("u%", BaseId::Unit, fact));
        intro.insert(fn);
      } else {
        benv.push(names[arity], mk_base(names[arity], ci->result_base,
                                        refine));
      }
      out.push_back({std::move(benv), h, std::move(intro)});
    }
    return out;
  }

  TypePtr case_scrut(const Env& env, const TermPtr& e) {
    TypePtr sty = cgen(env, e->body);
    if (sty->kind == TypeKind::TyVar)
      recon_error("cannot reconstruct the type of a case scrutinee; "
                  "annotate it");
    if (sty->kind != TypeKind::Base)
      recon_error("case scrutinee is not of base type");
    return sty;
  }

  TypePtr cgen_case(const Env& env, const TermPtr& e) {
    TypePtr sty = case_scrut(env, e);
    TypePtr result = mint(env);
    for (BranchEnv& be : case_branches(env, e, sty)) {
      TypePtr bty = cgen(be.env, be.body);
      sub_val(be.env, be.body, bty, result, be.introduced);
    }
    return result;
  }
};

void Recon::ccheck(const Env& env, const TermPtr& e, const TypePtr& T) {
  // let x [: T'] = d in b
  if (e->kind == TermKind::App && e->a->kind == TermKind::Lam) {
    const TermPtr& lam = e->a;
    TypePtr dty;
    if (is_bare_tyvar(lam->annot)) {
      dty = cgen(env, e->b);
      inferred[lam->annot->var] = dty;
    } else {
      register_tyvars(lam->annot, env);
      dty = lam->annot;
      ccheck(env, e->b, dty);
    }
    Env benv = env;
    benv.push(lam->name, dty);
    ccheck(benv, lam->body, T);
    return;
  }
  // fix against the expected recursive type
  if (e->kind == TermKind::App && e->a->kind == TermKind::Prim &&
      e->a->name == "fix") {
    ccheck(env, e->b, mk_arrow(fresh("f"), T, T));
    return;
  }
  // push an expected arrow into the function body
  if (e->kind == TermKind::Lam && T->kind == TypeKind::Arrow) {
    if (is_bare_tyvar(e->annot)) {
      inferred[e->annot->var] = T->dom;
    } else {
      register_tyvars(e->annot, env);
      sub(env, T->dom, e->annot);
    }
    Env benv = env;
    benv.push(e->name, T->dom);
    ccheck(benv, e->body, subst1(T->cod, T->binder, mk_var(e->name)));
    return;
  }
  // push the expectation into case branches for path sensitivity
  if (e->kind == TermKind::Case) {
    TypePtr sty = case_scrut(env, e);
    for (BranchEnv& be : case_branches(env, e, sty))
      ccheck(be.env, be.body, T);
    return;
  }
  TypePtr S = cgen(env, e);
  sub_val(env, e, S, T);
}

TypePtr Recon::cgen(const Env& env, const TermPtr& e) {
  switch (e->kind) {
    case TermKind::Var: {
      const TypePtr* t = env.lookup(e->name);
      if (!t) recon_error("unbound variable: " + e->name);
      return *t;
    }
    case TermKind::IntLit:
      return ty_int(e->intval);
    case TermKind::Prim: {
      const PrimInfo* pi = prim_info(e->name);
      if (!pi) recon_error("unknown primitive: " + e->name);
      if (e->name == "fix") recon_error("fix must be applied to a function");
      return pi->ty ? pi->ty : ty_eq(BaseId::Int);
    }
    case TermKind::Ctor: {
      const CtorInfo* ci = ctor_info(e->name);
      if (!ci) recon_error("unknown constructor: " + e->name);
      SubstMap inst;
      for (size_t i = 0; i < e->args.size(); ++i) {
        if (i >= ci->args.size())
          recon_error("constructor " + e->name + " over-applied");
        ccheck(env, e->args[i], substitute(ci->args[i].second, inst));
        inst.push_back({ci->args[i].first, e->args[i], nullptr});
      }
      TypePtr t = mk_base(ci->result_binder, ci->result_base,
                          substitute(ci->result_refine, inst));
      for (size_t i = ci->args.size(); i-- > e->args.size();)
        t = mk_arrow(ci->args[i].first, substitute(ci->args[i].second, inst),
                     t);
      return t;
    }
    case TermKind::Lam: {
      register_tyvars(e->annot, env);
      Env benv = env;
      benv.push(e->name, e->annot);
      return mk_arrow(e->name, e->annot, cgen(benv, e->body));
    }
    case TermKind::Cast: {
      register_tyvars(e->cast_src, env);
      register_tyvars(e->cast_tgt, env);
      return mk_arrow(fresh("x"), e->cast_src, e->cast_tgt);
    }
    case TermKind::App: {
      // let x [: T] = d in b
      if (e->a->kind == TermKind::Lam) {
        const TermPtr& lam = e->a;
        TypePtr dty;
        if (is_bare_tyvar(lam->annot)) {
          dty = cgen(env, e->b);
          inferred[lam->annot->var] = dty;
        } else {
          register_tyvars(lam->annot, env);
          dty = lam->annot;
          ccheck(env, e->b, dty);
        }
        Env benv = env;
        benv.push(lam->name, dty);
        return subst1(cgen(benv, lam->body), lam->name, e->b);
      }
      // fix g
      if (e->a->kind == TermKind::Prim && e->a->name == "fix") {
        TypePtr G = cgen(env, e->b);
        if (G->kind != TypeKind::Arrow)
          recon_error("fix expects a function of functions; annotate it");
        sub(env, G, mk_arrow(G->binder, G->dom, G->dom));
        return G->dom;
      }
      // polymorphic equality
      if (e->a->kind == TermKind::App && e->a->a->kind == TermKind::Prim &&
          e->a->a->name == "=") {
        TypePtr at = cgen(env, e->a->b);
        if (at->kind != TypeKind::Base)
          recon_error("cannot reconstruct the base type compared by =; "
                      "annotate the operands");
        ccheck(env, e->b, mk_base_raw(at->base));
        TermPtr cmp = mk_eq(e->a->b, e->b);
        return mk_base("b%", BaseId::Bool, mk_eq(mk_var("b%"), cmp));
      }
      TypePtr F = cgen(env, e->a);
      if (F->kind == TypeKind::Dynamic) {
        cgen(env, e->b);
        return mk_dynamic();
      }
      if (F->kind == TypeKind::Arrow) {
        ccheck(env, e->b, F->dom);
        return subst1(F->cod, F->binder, e->b);
      }
      // Unknown function: mint a fresh result type variable and remember
      // the argument in its delayed substitution.
      TypePtr A = cgen(env, e->b);
      std::string x = fresh("x");
      Env aenv = env;
      aenv.push(x, A);
      TypePtr alpha = mint(aenv);
      sub(env, F, mk_arrow(x, A, alpha));
      SubstMap d{{x, e->b, A}};
      return substitute(alpha, d);
    }
    case TermKind::Case:
      return cgen_case(env, e);
    case TermKind::POr:
    case TermKind::PAnd: {
      ccheck(env, e->a, mk_base_raw(BaseId::Bool));
      ccheck(env, e->b, mk_base_raw(BaseId::Bool));
      return mk_base_raw(BaseId::Bool);
    }
    case TermKind::Checking:
      recon_error("checking form in source program");
    case TermKind::Exists:
      recon_error("existential predicate in executable position");
    case TermKind::PredVar:
      recon_error("refinement placeholder in executable position");
  }
  recon_error("cannot reconstruct term");
}

// ---------------------------------------------------------------------------
// Shape reconstruction

struct Shaper {
  Recon& R;

  void unite(const std::string& a, const std::string& b,
             std::deque<std::pair<TypePtr, TypePtr>>& wl) {
    std::string ra = R.find(a), rb = R.find(b);
    if (ra == rb) return;
    TypePtr ta = R.tmpl.count(ra) ? R.tmpl[ra] : nullptr;
    TypePtr tb = R.tmpl.count(rb) ? R.tmpl[rb] : nullptr;
    R.uf[ra] = rb;
    if (ta && tb)
      wl.emplace_back(ta, tb);
    else if (ta)
      R.tmpl[rb] = ta;
  }

  bool occurs(const std::string& root, const TypePtr& t,
              std::set<std::string>& visited) {
    switch (t->kind) {
      case TypeKind::TyVar: {
        std::string r = R.find(t->var);
        if (r == root) return true;
        if (!visited.insert(r).second) return false;
        return R.tmpl.count(r) && occurs(root, R.tmpl[r], visited);
      }
      case TypeKind::Arrow:
      case TypeKind::ExistsTy:
        return occurs(root, t->dom, visited) || occurs(root, t->cod, visited);
      default:
        return false;
    }
  }

  void bind(const std::string& a, const TypePtr& t,
            std::deque<std::pair<TypePtr, TypePtr>>& wl) {
    std::string r = R.find(a);
    std::set<std::string> visited{r};
    if (occurs(r, t, visited))
      recon_error("occurs check: the type of " + a +
                  " would be infinite (" + print(t) + ")");
    if (R.tmpl.count(r))
      wl.emplace_back(R.tmpl[r], t);
    else
      R.tmpl[r] = t;
  }

  void solve() {
    std::deque<std::pair<TypePtr, TypePtr>> wl;
    for (const SubC& s : R.subs) wl.emplace_back(s.S, s.T);
    size_t steps = 0, limit = 10000 + 100 * wl.size();
    while (!wl.empty()) {
      if (++steps > limit)
        recon_error("shape reconstruction did not terminate");
      auto [s, t] = wl.front();
      wl.pop_front();
      while (s->kind == TypeKind::ExistsTy) s = s->cod;
      while (t->kind == TypeKind::ExistsTy) t = t->cod;
      if (s->kind == TypeKind::Dynamic || t->kind == TypeKind::Dynamic)
        continue;
      if (s->kind == TypeKind::TyVar && t->kind == TypeKind::TyVar) {
        unite(s->var, t->var, wl);
      } else if (s->kind == TypeKind::TyVar) {
        bind(s->var, t, wl);
      } else if (t->kind == TypeKind::TyVar) {
        bind(t->var, s, wl);
      } else if (s->kind == TypeKind::Base && t->kind == TypeKind::Base) {
        if (s->base != t->base)
          recon_error(std::string("shape mismatch: ") + base_name(s->base) +
                      " vs " + base_name(t->base));
      } else if (s->kind == TypeKind::Arrow && t->kind == TypeKind::Arrow) {
        wl.emplace_back(s->dom, t->dom);
        wl.emplace_back(s->cod, t->cod);
      } else {
        recon_error("shape mismatch: " + print(s) + " vs " + print(t));
      }
    }
  }

  TypePtr materialize(const std::string& a);

  TypePtr from_shape(const TypePtr& t, const Env& env) {
    switch (t->kind) {
      case TypeKind::TyVar:
        return materialize(t->var);
      case TypeKind::Base: {
        std::string n = fresh("n");
        std::string psi = fresh("psi");
        R.psis[psi] = {n, t->base, env};
        return mk_base(n, t->base, mk_predvar(psi));
      }
      case TypeKind::Arrow: {
        TypePtr dom = from_shape(t->dom, env);
        Env e2 = env;
        e2.push(t->binder, dom);
        return mk_arrow(t->binder, dom, from_shape(t->cod, e2));
      }
      case TypeKind::ExistsTy:
        return from_shape(t->cod, env);
      case TypeKind::Dynamic:
        return mk_dynamic();
    }
    return mk_dynamic();
  }
};

TypePtr Shaper::materialize(const std::string& a) {
  auto it = R.solution.find(a);
  if (it != R.solution.end()) return it->second;
  if (!R.in_progress.insert(a).second)
    recon_error("cyclic shape for type variable " + a);
  const Env& env = R.tvs.at(a).env;
  std::string r = R.find(a);
  TypePtr res;
  if (!R.tmpl.count(r)) {
    // Unconstrained: default to a refined integer.
    std::string n = fresh("n");
    std::string psi = fresh("psi");
    R.psis[psi] = {n, BaseId::Int, env};
    res = mk_base(n, BaseId::Int, mk_predvar(psi));
  } else {
    res = from_shape(R.tmpl[r], env);
  }
  R.in_progress.erase(a);
  R.solution[a] = res;
  return res;
}

}  // namespace

TermPtr simplify_pred(const TermPtr& p) { return simp(p, true); }
TypePtr simplify_type(const TypePtr& t) { return simp_ty(t, true); }

namespace {

// ---------------------------------------------------------------------------
// The solver driver

struct Solver {
  explicit Solver(Recon& r) : R(r) {}
  Recon& R;

  // ---- eliminating type variables (zonk) ----

  TypePtr zonk_ty(const TypePtr& t) {
    switch (t->kind) {
      case TypeKind::TyVar: {
        TypePtr base;
        auto inf = R.inferred.find(t->var);
        if (inf != R.inferred.end())
          base = zonk_ty(inf->second);
        else if (R.solution.count(t->var))
          base = R.solution.at(t->var);
        else
          recon_error("unsolved type variable " + t->var);
        TypePtr res = base;
        for (const SubstEntry& se : t->delayed) {
          // Sequential application of the delayed substitution.
          res = subst1(res, se.name, zonk_term(se.value),
                       se.annot ? zonk_ty(se.annot) : nullptr);
        }
        return res;
      }
      case TypeKind::Base:
        return mk_base(t->binder, t->base, zonk_term(t->refine));
      case TypeKind::Arrow:
        return mk_arrow(t->binder, zonk_ty(t->dom), zonk_ty(t->cod));
      case TypeKind::ExistsTy:
        return mk_exists_ty(t->binder, zonk_ty(t->dom), zonk_ty(t->cod));
      case TypeKind::Dynamic:
        return t;
    }
    return t;
  }

  TermPtr zonk_term(const TermPtr& e) {
    Rewriter rw;
    rw.on_type = [this](const TypePtr& t) { return zonk_ty(t); };
    return rw.term(e);
  }

  Env zonk_env(const Env& env) {
    Env out;
    for (const auto& [n, t] : env.bindings) out.push(n, zonk_ty(t));
    return out;
  }

  // ---- substituting solved placeholders ----

  // `extra` overlays R.sr (used during the fixpoint rounds for the members
  // of the strongly connected component being solved).
  TermPtr apply_sr(const TermPtr& e,
                   const std::map<std::string, TermPtr>* extra) {
    Rewriter rw;
    rw.on_type = [&](const TypePtr& t) { return apply_sr_ty(t, extra); };
    rw.on_predvar = [&](const TermPtr& pv) -> TermPtr {
      const TermPtr* s = nullptr;
      if (extra) {
        auto it = extra->find(pv->name);
        if (it != extra->end()) s = &it->second;
      }
      if (!s) {
        auto it = R.sr.find(pv->name);
        if (it != R.sr.end()) s = &it->second;
      }
      if (!s) return nullptr;  // leave the placeholder in place
      TermPtr r = *s;
      for (const SubstEntry& se : pv->delayed)
        r = subst1(r, se.name, apply_sr(se.value, extra));
      return r;
    };
    return rw.term(e);
  }

  TypePtr apply_sr_ty(const TypePtr& t, const std::map<std::string, TermPtr>* extra) {
    switch (t->kind) {
      case TypeKind::Base:
        return mk_base(t->binder, t->base, apply_sr(t->refine, extra));
      case TypeKind::Arrow:
        return mk_arrow(t->binder, apply_sr_ty(t->dom, extra),
                        apply_sr_ty(t->cod, extra));
      case TypeKind::ExistsTy:
        return mk_exists_ty(t->binder, apply_sr_ty(t->dom, extra),
                            apply_sr_ty(t->cod, extra));
      default:
        return t;
    }
  }

  // ---- decomposing subtyping constraints into implications ----

  void decompose(Env env, TypePtr S, TypePtr T,
                 const std::set<std::string>& forced) {
    while (S->kind == TypeKind::ExistsTy) {
      std::string w = fresh(S->binder);
      env.push(w, S->dom);
      TypePtr body = subst1(S->cod, S->binder, mk_var(w));
      S = body;
    }
    if (T->kind == TypeKind::ExistsTy)
      recon_error("existential on the right of a reconstruction constraint: " +
                  print(T));
    if (S->kind == TypeKind::Dynamic || T->kind == TypeKind::Dynamic) return;
    if (S->kind == TypeKind::Base && T->kind == TypeKind::Base) {
      std::string v = fresh(T->binder);
      Env e2 = env;
      e2.push(v, mk_base_raw(S->base));
      R.imps.push_back({e2, subst1(S->refine, S->binder, mk_var(v)),
                        subst1(T->refine, T->binder, mk_var(v)), forced});
      return;
    }
    if (S->kind == TypeKind::Arrow && T->kind == TypeKind::Arrow) {
      decompose(env, T->dom, S->dom, forced);
      std::string x = fresh(T->binder);
      Env e2 = env;
      e2.push(x, T->dom);
      decompose(e2, subst1(S->cod, S->binder, mk_var(x)),
                subst1(T->cod, T->binder, mk_var(x)), forced);
      return;
    }
    recon_error("shape mismatch after reconstruction: " + print(S) + " vs " +
                print(T));
  }

  // ---- bounds ----

  void collect_bounds() {
    for (const ImpC& c : R.imps) {
      if (c.rhs->kind != TermKind::PredVar) continue;
      R.bounds[c.rhs->name].push_back(
          {c.env, c.lhs, c.rhs->delayed, c.forced});
    }
  }

  // The delayed substitution on a placeholder occurrence, rendered as
  // simultaneous equations over the placeholder's own names.  Sequential
  // semantics: later entries are first applied into earlier values; only
  // the first entry per name binds it.
  std::vector<std::pair<std::string, TermPtr>> theta_equations(
      const SubstMap& th, const std::set<std::string>& keep) {
    std::vector<std::pair<std::string, TermPtr>> out;
    std::set<std::string> seen;
    for (size_t i = 0; i < th.size(); ++i) {
      TermPtr v = th[i].value;
      for (size_t j = i + 1; j < th.size(); ++j)
        v = subst1(v, th[j].name, th[j].value);
      if (!seen.insert(th[i].name).second) continue;
      if (!keep.count(th[i].name)) continue;
      if (is_var(v, th[i].name)) continue;
      out.push_back({th[i].name, v});
    }
    return out;
  }

  TermPtr theta_image(const SubstMap& th, const std::string& x) {
    TermPtr v = mk_var(x);
    for (const SubstEntry& se : th) v = subst1(v, se.name, se.value);
    return v;
  }

  // Existentially closes P over every constraint-environment variable the
  // placeholder may not mention, innermost (rightmost binding) first.
  TermPtr close_over(const Env& benv, const std::set<std::string>& keep,
                     const std::set<std::string>& forced, TermPtr P,
                     const std::map<std::string, TermPtr>* extra) {
    for (auto it = benv.bindings.rbegin(); it != benv.bindings.rend(); ++it) {
      if (keep.count(it->first)) continue;
      if (!free_vars(P).count(it->first) && !forced.count(it->first))
        continue;
      TypePtr t = apply_sr_ty(it->second, extra);
      // A witness annotation that still mentions an unsolved placeholder is
      // weakened to its shape: the disjunct only gets weaker, and the
      // residual verification decides what that costs.
      std::set<std::string> left;
      predvars_in_ty(t, left);
      if (!left.empty()) t = raw_of(t);
      P = mk_exists(it->first, t, P);
    }
    return P;
  }

  std::set<std::string> keep_set(const PsiInfo& pi) {
    std::set<std::string> keep{pi.binder};
    for (const auto& [n, t] : pi.env.bindings) keep.insert(n);
    return keep;
  }

  TermPtr bound_pred(const std::string& psi, const Bound& b,
                     const std::map<std::string, TermPtr>* extra) {
    const PsiInfo& pi = R.psis.at(psi);
    std::set<std::string> keep = keep_set(pi);
    TermPtr P = apply_sr(b.lhs, extra);
    for (auto& [x, v] : theta_equations(b.theta, keep))
      P = mk_and(mk_eq(mk_var(x), v), P);
    return close_over(b.env, keep, b.forced, P, extra);
  }

  // ---- dependency graph and strongly connected components ----

  void predvars_in(const TermPtr& e, std::set<std::string>& out) {
    if (e->kind == TermKind::PredVar && R.psis.count(e->name))
      out.insert(e->name);
    if (e->a) predvars_in(e->a, out);
    if (e->b) predvars_in(e->b, out);
    if (e->body) predvars_in(e->body, out);
    if (e->annot) predvars_in_ty(e->annot, out);
    if (e->annot2) predvars_in_ty(e->annot2, out);
    if (e->cast_src) predvars_in_ty(e->cast_src, out);
    if (e->cast_tgt) predvars_in_ty(e->cast_tgt, out);
    for (const TermPtr& a : e->args) predvars_in(a, out);
    for (const CaseBranch& br : e->branches) predvars_in(br.handler, out);
    for (const SubstEntry& se : e->delayed) {
      predvars_in(se.value, out);
      if (se.annot) predvars_in_ty(se.annot, out);
    }
  }

  std::map<std::string, std::set<std::string>> adj;
  std::map<std::string, int> index_of, low;
  std::vector<std::string> stack;
  std::set<std::string> on_stack;
  int next_index = 0;
  std::vector<std::vector<std::string>> sccs;

  void tarjan(const std::string& v) {
    index_of[v] = low[v] = next_index++;
    stack.push_back(v);
    on_stack.insert(v);
    for (const std::string& w : adj[v]) {
      if (!index_of.count(w)) {
        tarjan(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack.count(w)) {
        low[v] = std::min(low[v], index_of[w]);
      }
    }
    if (low[v] == index_of[v]) {
      std::vector<std::string> scc;
      while (true) {
        std::string w = stack.back();
        stack.pop_back();
        on_stack.erase(w);
        scc.push_back(w);
        if (w == v) break;
      }
      sccs.push_back(std::move(scc));
    }
  }

  // ---- solving one component ----

  // A new disjunct is absorbed when the current solution already entails
  // it; the prover certifying that entailment is what licenses dropping the
  // bound from the disjunction (it is re-verified residually at the end
  // regardless).
  bool entailed(const std::string& psi, const TermPtr& d, const TermPtr& cur,
                const std::map<std::string, TermPtr>* extra) {
    const PsiInfo& pi = R.psis.at(psi);
    Env env;
    for (const auto& [n, t] : pi.env.bindings)
      env.push(n, apply_sr_ty(t, extra));
    env.push(pi.binder, mk_base_raw(pi.base));
    return implies(env, d, cur, R.popts).certainty == Certainty::Yes;
  }

  // Kleene iteration from `false`.  Cycles of pure renamings (the alias
  // chains left behind by delayed-substitution elimination) contribute
  // disjuncts the accumulated solution already entails, so iteration
  // stabilizes; only genuinely recursive placeholders exhaust the round
  // budget and fall to the fixpoint encoding.
  bool kleene(const std::vector<std::string>& scc) {
    std::map<std::string, TermPtr> cur;
    for (const std::string& p : scc) cur[p] = mk_false();
    const int kMaxRounds = 8;
    for (int round = 0; round < kMaxRounds; ++round) {
      bool changed = false;
      for (const std::string& p : scc) {
        for (const Bound& b : R.bounds[p]) {
          TermPtr d = simp(bound_pred(p, b, &cur), false);
          if (is_false(d)) continue;
          if (!is_false(cur[p]) && entailed(p, d, cur[p], &cur)) continue;
          cur[p] = simp(mk_por(cur[p], d), false);
          changed = true;
        }
      }
      if (!changed) {
        for (const std::string& p : scc) R.sr[p] = cur[p];
        return true;
      }
    }
    return false;
  }

  // Genuinely recursive placeholders: an executable fixpoint predicate.
  // The prover treats the resulting application as opaque, so obligations
  // involving it stay undecided and fall to hybrid checking casts.
  std::vector<std::string> params_of(const std::string& psi) {
    const PsiInfo& pi = R.psis.at(psi);
    std::vector<std::string> out;
    for (const auto& [n, t] : pi.env.bindings) out.push_back(n);
    out.push_back(pi.binder);
    return out;
  }

  TermPtr fix_function(const std::string& psi,
                       const std::set<std::string>& scc,
                       std::map<std::string, TermPtr> fvars) {
    const PsiInfo& pi = R.psis.at(psi);
    std::string F = fresh("F");
    fvars[psi] = mk_var(F);
    std::vector<TermPtr> djs;
    for (const Bound& b : R.bounds[psi]) {
      Rewriter rw;
      rw.on_type = [&](const TypePtr& t) { return apply_sr_ty(t, nullptr); };
      rw.on_predvar = [&](const TermPtr& pv) -> TermPtr {
        if (scc.count(pv->name)) {
          TermPtr head = fvars.count(pv->name)
                             ? fvars.at(pv->name)
                             : fix_function(pv->name, scc, fvars);
          for (const std::string& x : params_of(pv->name))
            head = mk_app(head, theta_image(pv->delayed, x));
          return head;
        }
        auto it = R.sr.find(pv->name);
        if (it == R.sr.end()) return nullptr;
        TermPtr r = it->second;
        for (const SubstEntry& se : pv->delayed)
          r = subst1(r, se.name, se.value);
        return r;
      };
      TermPtr L = rw.term(b.lhs);
      std::set<std::string> keep = keep_set(pi);
      for (auto& [x, v] : theta_equations(b.theta, keep))
        L = mk_and(mk_eq(mk_var(x), v), L);
      djs.push_back(close_over(b.env, keep, b.forced, L, nullptr));
    }
    TermPtr body = mk_false();
    for (size_t i = djs.size(); i-- > 0;) body = mk_por(djs[i], body);
    TypePtr fty = mk_base_raw(BaseId::Bool);
    TermPtr lam = body;
    std::vector<std::string> ps = params_of(psi);
    for (size_t i = ps.size(); i-- > 0;) {
      TypePtr at = i + 1 == ps.size()
                       ? mk_base_raw(pi.base)
                       : raw_of(zonk_ty(pi.env.bindings[i].second));
      lam = mk_lam(ps[i], at, lam);
      fty = mk_arrow(ps[i], at, fty);
    }
    return mk_app(mk_prim("fix"),
                  mk_lam(F, mk_arrow(fresh("f"), fty, fty), lam));
  }

  void fix_encode(const std::vector<std::string>& scc_v) {
    std::set<std::string> scc(scc_v.begin(), scc_v.end());
    for (const std::string& p : scc_v) {
      TermPtr f = fix_function(p, scc, {});
      TermPtr app = f;
      for (const std::string& x : params_of(p)) app = mk_app(app, mk_var(x));
      R.sr[p] = app;
    }
  }

  void solve_psis() {
    for (auto& [p, pi] : R.psis) {
      std::set<std::string> deps;
      for (const Bound& b : R.bounds[p]) {
        predvars_in(b.lhs, deps);
        for (const auto& [n, t] : b.env.bindings) {
          std::set<std::string> tdeps;
          predvars_in_ty(t, tdeps);
          for (const std::string& d : tdeps) deps.insert(d);
        }
      }
      deps.erase(p);
      adj[p] = deps;
      // Self edges are handled inside the component solver.
      for (const Bound& b : R.bounds[p]) {
        std::set<std::string> self;
        predvars_in(b.lhs, self);
        if (self.count(p)) adj[p].insert(p);
      }
    }
    for (const auto& [p, pi] : R.psis)
      if (!index_of.count(p)) tarjan(p);
    // Tarjan emits components with their dependencies already emitted.
    for (const std::vector<std::string>& scc : sccs) {
      bool self_loop = scc.size() > 1 ||
                       (adj[scc[0]].count(scc[0]) > 0);
      if (!self_loop) {
        std::vector<TermPtr> djs;
        for (const Bound& b : R.bounds[scc[0]])
          djs.push_back(bound_pred(scc[0], b, nullptr));
        TermPtr s = mk_false();
        for (size_t i = djs.size(); i-- > 0;) s = mk_por(djs[i], s);
        R.sr[scc[0]] = simp(s, false);
      } else if (!kleene(scc)) {
        fix_encode(scc);
      }
    }
    // No solved refinement may still contain a placeholder.
    for (const auto& [p, s] : R.sr) {
      std::set<std::string> left;
      predvars_in(s, left);
      if (!left.empty())
        recon_error("unsupported recursive placeholder structure at " + p);
    }
  }

  void predvars_in_ty(const TypePtr& t, std::set<std::string>& out) {
    switch (t->kind) {
      case TypeKind::Base:
        predvars_in(t->refine, out);
        return;
      case TypeKind::Arrow:
      case TypeKind::ExistsTy:
        predvars_in_ty(t->dom, out);
        predvars_in_ty(t->cod, out);
        return;
      default:
        return;
    }
  }
};

}  // namespace

ReconResult reconstruct(const SourceProgram& prog, const ProverOptions& popts) {
  Recon R;
  R.popts = popts;
  Solver S{R};

  // 1. Constraint generation over the binding chain.
  Env env;
  std::vector<TypePtr> binding_tys;
  for (const Binding& b : prog.bindings) {
    TypePtr bt;
    if (b.annot && !is_bare_tyvar(b.annot)) {
      R.register_tyvars(b.annot, env);
      R.ccheck(env, b.term, b.annot);
      bt = b.annot;
    } else {
      bt = R.cgen(env, b.term);
    }
    binding_tys.push_back(bt);
    env.push(b.name, bt);
  }
  R.cgen(env, prog.main);

  // 2. Shape reconstruction.
  Shaper shaper{R};
  shaper.solve();
  for (const auto& [a, info] : R.tvs) shaper.materialize(a);
  // Placeholder environments mention type variables; resolve them now.
  for (auto& [p, pi] : R.psis) pi.env = S.zonk_env(pi.env);

  // 3. Implications, bounds, strongest refinements.
  for (const SubC& c : R.subs)
    S.decompose(S.zonk_env(c.env), S.zonk_ty(c.S), S.zonk_ty(c.T), c.forced);
  S.collect_bounds();
  S.solve_psis();

  // 4. Residual verification of every constraint under the solution.
  ReconResult res;
  for (const ImpC& c : R.imps) {
    Env fe;
    for (const auto& [n, t] : c.env.bindings)
      fe.push(n, S.apply_sr_ty(t, nullptr));
    TermPtr p = simp(S.apply_sr(c.lhs, nullptr), true);
    TermPtr q = simp(S.apply_sr(c.rhs, nullptr), true);
    if (alpha_eq(p, q)) continue;
    ProverResult r = implies(fe, p, q, popts);
    if (r.certainty == Certainty::No) {
      std::string msg = "reconstruction rejected the program: " + print(p) +
                        " does not imply " + print(q);
      if (!r.witness.empty()) {
        msg += "; counterexample:";
        for (const auto& [v, val] : r.witness)
          msg += " " + v + " = " + print(val);
      }
      recon_error(msg);
    }
    if (r.certainty != Certainty::Yes) {
      res.residuals.push_back({r.certainty, fe, p, q});
      res.any_maybe = true;
    }
  }

  // 5. Assemble the annotated output program.
  auto final_ty = [&](const TypePtr& t) {
    return simplify_type(S.apply_sr_ty(S.zonk_ty(t), nullptr));
  };
  auto final_term = [&](const TermPtr& e) {
    Rewriter rw;
    rw.on_type = [&](const TypePtr& t) { return final_ty(t); };
    return rw.term(e);
  };
  for (size_t i = 0; i < prog.bindings.size(); ++i) {
    Binding ob;
    ob.name = prog.bindings[i].name;
    ob.annot = final_ty(binding_tys[i]);
    ob.term = final_term(prog.bindings[i].term);
    res.output.bindings.push_back(std::move(ob));
  }
  res.output.main = final_term(prog.main);

  for (const auto& [a, t] : R.solution) res.tyvar_shapes[a] = t;
  for (const auto& [p, pi] : R.psis) {
    PsiSolution ps;
    ps.predicate = R.sr.count(p) ? R.sr.at(p) : mk_false();
    ps.binder = pi.binder;
    ps.base = pi.base;
    Env pe;
    for (const auto& [n, t] : pi.env.bindings)
      pe.push(n, S.apply_sr_ty(t, nullptr));
    ps.env = pe;
    res.psi_solutions[p] = ps;
  }
  // Note alias relationships: solutions that are alpha-equal once their
  // binders are identified.
  for (auto& [p, ps] : res.psi_solutions) {
    TermPtr pp = subst1(ps.predicate, ps.binder, mk_var("?self"));
    for (const auto& [q, qs] : res.psi_solutions) {
      if (q == p) break;
      if (qs.base == ps.base &&
          alpha_eq(subst1(qs.predicate, qs.binder, mk_var("?self")), pp)) {
        ps.alias = q;
        break;
      }
    }
  }
  return res;
}

}  // namespace hytc
