#include "hytc/prover.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "hytc/builtins.hpp"
#include "hytc/eval.hpp"
#include "hytc/surface.hpp"

namespace hytc {

const char* certainty_name(Certainty c) {
  switch (c) {
    case Certainty::No:
      return "no";
    case Certainty::Maybe:
      return "maybe";
    case Certainty::Yes:
      return "yes";
  }
  return "?";
}

Certainty meet(Certainty a, Certainty b) { return a < b ? a : b; }

namespace {

using Rat = boost::multiprecision::cpp_rational;

Int rat_floor(const Rat& r) {
  Int n = numerator(r), d = denominator(r);  // d > 0 by construction
  if (n >= 0) return n / d;
  return -((-n + d - 1) / d);
}
Int rat_ceil(const Rat& r) { return -rat_floor(-r); }

// ---------------------------------------------------------------------------
// Sorts

enum class Sort { IntS, BoolS, ListS, BstS, UnitS, FunS, UnkS };

Sort sort_of_base(BaseId b) {
  switch (b) {
    case BaseId::Int:
      return Sort::IntS;
    case BaseId::Bool:
      return Sort::BoolS;
    case BaseId::IntList:
      return Sort::ListS;
    case BaseId::BST:
      return Sort::BstS;
    case BaseId::Unit:
      return Sort::UnitS;
  }
  return Sort::UnkS;
}

using SortMap = std::map<std::string, Sort>;

Sort sort_of(const TermPtr& e, const SortMap& sorts) {
  switch (e->kind) {
    case TermKind::IntLit:
      return Sort::IntS;
    case TermKind::Var: {
      auto it = sorts.find(e->name);
      return it == sorts.end() ? Sort::UnkS : it->second;
    }
    case TermKind::Ctor:
      return sort_of_base(ctor_info(e->name)->result_base);
    case TermKind::POr:
    case TermKind::PAnd:
    case TermKind::Exists:
    case TermKind::PredVar:
      return Sort::BoolS;
    case TermKind::Lam:
      return Sort::FunS;
    case TermKind::App: {
      TermPtr h = e;
      while (h->kind == TermKind::App) h = h->a;
      if (h->kind == TermKind::Prim) {
        const std::string& n = h->name;
        if (n == "=" || n == "<" || n == "<=" || n == "not") return Sort::BoolS;
        if (n == "fix") return Sort::UnkS;
        return Sort::IntS;
      }
      return Sort::UnkS;
    }
    default:
      return Sort::UnkS;
  }
}

// Matches an application spine (prim a b) / (prim a).
const Term* prim_spine(const TermPtr& e, const std::string& name, int arity,
                       std::vector<TermPtr>& args) {
  TermPtr h = e;
  args.clear();
  while (h->kind == TermKind::App) {
    args.insert(args.begin(), h->b);
    h = h->a;
  }
  if (h->kind != TermKind::Prim || h->name != name) return nullptr;
  if (static_cast<int>(args.size()) != arity) return nullptr;
  return h.get();
}

// ---------------------------------------------------------------------------
// Goal construction: peel the environment into hypotheses

struct Goal {
  std::vector<TermPtr> hyps;
  TermPtr concl;
  Env flat;  // existentials peeled away; only Base / Arrow / Dynamic remain
};

void push_binding(Goal& g, const std::string& x, const TypePtr& T);

void add_hyp(Goal& g, const TermPtr& h) {
  // Flatten conjunctions and peel term-level existentials into fresh
  // bindings: they are hypotheses about *some* value, which a fresh constant
  // names.
  if (h->kind == TermKind::PAnd) {
    add_hyp(g, h->a);
    add_hyp(g, h->b);
    return;
  }
  if (h->kind == TermKind::Exists) {
    std::string w = fresh(h->name);
    push_binding(g, w, h->annot);
    add_hyp(g, subst1(h->body, h->name, mk_var(w)));
    return;
  }
  if (is_true(h)) return;
  g.hyps.push_back(h);
}

void push_binding(Goal& g, const std::string& x, const TypePtr& T) {
  if (T->kind == TypeKind::ExistsTy) {
    std::string w = fresh(T->binder);
    push_binding(g, w, T->dom);
    push_binding(g, x, subst1(T->cod, T->binder, mk_var(w)));
    return;
  }
  g.flat.push(x, T);
  if (T->kind == TypeKind::Base)
    add_hyp(g, subst1(T->refine, T->binder, mk_var(x)));
}

// exists x:{y:B | y = k}. T  is the type of exactly one value; substitute it.
TermPtr strip_singleton_exists(TermPtr q) {
  for (;;) {
    if (q->kind != TermKind::Exists || q->annot->kind != TypeKind::Base)
      return q;
    const TypePtr& S = q->annot;
    std::vector<TermPtr> ab;
    if (!prim_spine(S->refine, "=", 2, ab)) return q;
    TermPtr val;
    if (ab[0]->kind == TermKind::Var && ab[0]->name == S->binder &&
        !free_vars(ab[1]).count(S->binder))
      val = ab[1];
    else if (ab[1]->kind == TermKind::Var && ab[1]->name == S->binder &&
             !free_vars(ab[0]).count(S->binder))
      val = ab[0];
    else
      return q;
    q = subst1(q->body, q->name, val);
  }
}

Goal build_goal(const Env& env, const TermPtr& p, const TermPtr& q) {
  Goal g;
  for (const auto& [x, T] : env.bindings) push_binding(g, x, T);
  add_hyp(g, p);
  g.concl = strip_singleton_exists(q);
  return g;
}

// Unit propagation: hypotheses of the form x = c (constant) or x = y
// (variable) are substituted away.  This collapses the boolean-equality
// chains that case-branch environments produce and keeps the DNF small.
void propagate_units(Goal& g) {
  for (int round = 0; round < 32; ++round) {
    std::string var;
    TermPtr val;
    size_t at = g.hyps.size();
    for (size_t i = 0; i < g.hyps.size() && at == g.hyps.size(); ++i) {
      std::vector<TermPtr> ab;
      if (!prim_spine(g.hyps[i], "=", 2, ab)) continue;
      for (int side = 0; side < 2; ++side) {
        const TermPtr& l = ab[side], &r = ab[1 - side];
        bool unit = r->kind == TermKind::IntLit ||
                    (r->kind == TermKind::Ctor && r->args.empty()) ||
                    r->kind == TermKind::Var;
        if (l->kind == TermKind::Var && unit &&
            !(r->kind == TermKind::Var && r->name == l->name)) {
          var = l->name;
          val = r;
          at = i;
          break;
        }
      }
    }
    if (at == g.hyps.size()) return;
    std::vector<TermPtr> hyps;
    for (size_t i = 0; i < g.hyps.size(); ++i) {
      if (i == at) continue;
      TermPtr h = fold_constants(subst1(g.hyps[i], var, val), 16);
      if (!is_true(h)) hyps.push_back(h);
    }
    g.hyps = std::move(hyps);
    g.concl = fold_constants(subst1(g.concl, var, val), 16);
  }
}

// ---------------------------------------------------------------------------
// DNF of hypotheses /\ not conclusion

struct Lit {
  TermPtr atom;
  bool pos;
};
using Cube = std::vector<Lit>;

struct DnfCtx {
  SortMap& sorts;  // extended with skolem constants minted during conversion
  int cap;
  bool overflow = false;
};

// Facts contributed by a skolem constant x standing for "some value of type
// T": its refinement, plus those of any nested existential witnesses.  The
// constant's sort is registered so later elimination stages recognize it.
TermPtr skolem_facts(const TypePtr& T, const std::string& x, SortMap& sorts) {
  switch (T->kind) {
    case TypeKind::Base:
      sorts[x] = sort_of_base(T->base);
      return subst1(T->refine, T->binder, mk_var(x));
    case TypeKind::ExistsTy: {
      std::string w = fresh(T->binder);
      TermPtr inner = skolem_facts(T->dom, w, sorts);
      TermPtr outer = skolem_facts(subst1(T->cod, T->binder, mk_var(w)), x,
                                   sorts);
      return mk_pand(inner, outer);
    }
    case TypeKind::Arrow:
      sorts[x] = Sort::FunS;
      return mk_true();
    default:
      sorts[x] = Sort::UnkS;
      return mk_true();
  }
}

std::vector<Cube> dnf(const TermPtr& e, bool pos, DnfCtx& ctx);

std::vector<Cube> dnf_combine(std::vector<Cube> a, const std::vector<Cube>& b,
                              DnfCtx& ctx) {
  std::vector<Cube> out;
  for (const Cube& x : a)
    for (const Cube& y : b) {
      if (static_cast<int>(out.size()) >= ctx.cap) {
        ctx.overflow = true;
        return out;
      }
      Cube c = x;
      c.insert(c.end(), y.begin(), y.end());
      out.push_back(std::move(c));
    }
  return out;
}

std::vector<Cube> dnf(const TermPtr& e, bool pos, DnfCtx& ctx) {
  std::vector<TermPtr> args;
  if (e->kind == TermKind::PAnd || e->kind == TermKind::POr) {
    bool conj = (e->kind == TermKind::PAnd) == pos;
    auto l = dnf(e->a, pos, ctx);
    auto r = dnf(e->b, pos, ctx);
    if (conj) return dnf_combine(std::move(l), r, ctx);
    l.insert(l.end(), r.begin(), r.end());
    if (static_cast<int>(l.size()) > ctx.cap) ctx.overflow = true;
    return l;
  }
  if (e->kind == TermKind::Exists && pos) {
    // A positive existential hypothesis: skolemize the witness.  (Negative
    // occurrences stay opaque literals, conservatively.)
    std::string w = fresh(e->name);
    TermPtr facts = skolem_facts(e->annot, w, ctx.sorts);
    return dnf(mk_pand(facts, subst1(e->body, e->name, mk_var(w))), true,
               ctx);
  }
  if (prim_spine(e, "not", 1, args)) return dnf(args[0], !pos, ctx);
  if (prim_spine(e, "=", 2, args)) {
    Sort sl = sort_of(args[0], ctx.sorts), sr = sort_of(args[1], ctx.sorts);
    if (sl == Sort::BoolS || sr == Sort::BoolS) {
      // Boolean equality: a = b  <=>  (a /\ b) \/ (~a /\ ~b).
      const TermPtr& a = args[0];
      const TermPtr& b = args[1];
      TermPtr na = mk_app(mk_prim("not"), a), nb = mk_app(mk_prim("not"), b);
      TermPtr expanded = pos ? mk_por(mk_pand(a, b), mk_pand(na, nb))
                             : mk_por(mk_pand(a, nb), mk_pand(na, b));
      return dnf(expanded, true, ctx);
    }
  }
  if (e->kind == TermKind::Ctor && e->name == "true")
    return pos ? std::vector<Cube>{{}} : std::vector<Cube>{};
  if (e->kind == TermKind::Ctor && e->name == "false")
    return pos ? std::vector<Cube>{} : std::vector<Cube>{{}};
  return {{Lit{e, pos}}};
}

// ---------------------------------------------------------------------------
// min/max elimination by case splitting

TermPtr replace_subterm(const TermPtr& e, const std::string& key,
                        const TermPtr& repl) {
  if (canon(e) == key) return repl;
  Term t = *e;
  if (t.a) t.a = replace_subterm(t.a, key, repl);
  if (t.b) t.b = replace_subterm(t.b, key, repl);
  if (t.body) t.body = replace_subterm(t.body, key, repl);
  for (TermPtr& a : t.args) a = replace_subterm(a, key, repl);
  for (CaseBranch& br : t.branches)
    br.handler = replace_subterm(br.handler, key, repl);
  return std::make_shared<Term>(std::move(t));
}

TermPtr find_minmax(const TermPtr& e, bool& is_min) {
  std::vector<TermPtr> args;
  if (prim_spine(e, "min", 2, args)) {
    is_min = true;
    return e;
  }
  if (prim_spine(e, "max", 2, args)) {
    is_min = false;
    return e;
  }
  if (e->a)
    if (TermPtr r = find_minmax(e->a, is_min)) return r;
  if (e->b)
    if (TermPtr r = find_minmax(e->b, is_min)) return r;
  if (e->body)
    if (TermPtr r = find_minmax(e->body, is_min)) return r;
  for (const TermPtr& a : e->args)
    if (TermPtr r = find_minmax(a, is_min)) return r;
  return nullptr;
}

// Expands every min/max occurrence in the cube into the two defining cases.
std::vector<Cube> expand_minmax(Cube cube, int cap, bool& overflow) {
  std::vector<Cube> work = {std::move(cube)}, done;
  while (!work.empty()) {
    Cube c = std::move(work.back());
    work.pop_back();
    TermPtr mm;
    bool is_min = false;
    for (const Lit& l : c)
      if ((mm = find_minmax(l.atom, is_min))) break;
    if (!mm) {
      done.push_back(std::move(c));
      continue;
    }
    if (static_cast<int>(work.size() + done.size()) > cap) {
      overflow = true;
      done.push_back(std::move(c));  // left unexpanded: abstraction kicks in
      continue;
    }
    std::string key = canon(mm);
    TermPtr m = mk_var(fresh("mm"));
    TermPtr a = mm->a->b;  // ((min a) b): a
    TermPtr b = mm->b;
    Cube base;
    for (const Lit& l : c) base.push_back({replace_subterm(l.atom, key, m), l.pos});
    Cube c1 = base, c2 = base;
    c1.push_back({mk_eq(m, a), true});
    c2.push_back({mk_eq(m, b), true});
    if (is_min) {
      c1.push_back({mk_le(a, b), true});
      c2.push_back({mk_le(b, a), true});
    } else {
      c1.push_back({mk_le(b, a), true});
      c2.push_back({mk_le(a, b), true});
    }
    work.push_back(std::move(c1));
    work.push_back(std::move(c2));
  }
  return done;
}

// ---------------------------------------------------------------------------
// Linear constraints and Fourier-Motzkin

struct Lin {
  std::map<std::string, Rat> c;
  Rat k;
};

Lin lin_add(Lin a, const Lin& b, const Rat& scale) {
  for (const auto& [v, x] : b.c) {
    a.c[v] += x * scale;
    if (a.c[v] == 0) a.c.erase(v);
  }
  a.k += b.k * scale;
  return a;
}

enum class Rel { Le, Eq };  // strict < is tightened away at construction

struct Con {
  Lin lin;  // lin REL 0
  Rel rel;
};

struct FmVar {
  Sort sort = Sort::IntS;
  bool abstracted = false;  // outside the decidable fragment
  TermPtr term;             // original term, for witness materialization
};

struct LinCtx {
  const SortMap& sorts;
  std::map<std::string, FmVar> vars;
  // Fresh case-split variables (from min/max) are integer and in-fragment.
  std::set<std::string> splitvars;
};

std::string intern(LinCtx& ctx, const std::string& key, Sort s, bool abstracted,
                   const TermPtr& t) {
  auto& v = ctx.vars[key];
  v.sort = s;
  v.abstracted = v.abstracted || abstracted;
  if (!v.term) v.term = t;
  return key;
}

// Is a term a concrete first-order value / variable that a measure may be
// applied to while staying in the fragment?
bool measurable_arg(const TermPtr& e, const SortMap& sorts) {
  if (e->kind == TermKind::Var) {
    Sort s = sort_of(e, sorts);
    return s == Sort::ListS || s == Sort::BstS;
  }
  if (e->kind == TermKind::Ctor) {
    for (const TermPtr& a : e->args)
      if (!measurable_arg(a, sorts) && a->kind != TermKind::IntLit) return false;
    return true;
  }
  return false;
}

Lin linearize(const TermPtr& e, LinCtx& ctx, bool& used_abstraction);

Lin lin_opaque(const TermPtr& e, LinCtx& ctx, bool& used_abstraction) {
  used_abstraction = true;
  std::string key = intern(ctx, "o!" + canon(e), Sort::IntS, true, e);
  Lin l;
  l.c[key] = 1;
  return l;
}

Lin linearize(const TermPtr& e, LinCtx& ctx, bool& used_abstraction) {
  std::vector<TermPtr> args;
  switch (e->kind) {
    case TermKind::IntLit: {
      Lin l;
      l.k = Rat(e->intval);
      return l;
    }
    case TermKind::Var: {
      Sort s = sort_of(e, ctx.sorts);
      if (s == Sort::IntS || ctx.splitvars.count(e->name)) {
        Lin l;
        l.c[intern(ctx, "v!" + e->name, Sort::IntS, false, e)] = 1;
        return l;
      }
      return lin_opaque(e, ctx, used_abstraction);
    }
    case TermKind::App: {
      if (prim_spine(e, "+", 2, args))
        return lin_add(linearize(args[0], ctx, used_abstraction),
                       linearize(args[1], ctx, used_abstraction), 1);
      if (prim_spine(e, "-", 2, args))
        return lin_add(linearize(args[0], ctx, used_abstraction),
                       linearize(args[1], ctx, used_abstraction), -1);
      if (prim_spine(e, "*", 2, args)) {
        bool dummy = false;
        Lin l = linearize(args[0], ctx, dummy);
        Lin r = linearize(args[1], ctx, dummy);
        if (l.c.empty() || r.c.empty()) {
          // one side is constant: still linear
          bool da = false;
          Lin vl = l.c.empty() ? linearize(args[1], ctx, da)
                               : linearize(args[0], ctx, da);
          used_abstraction = used_abstraction || da;
          Rat s = l.c.empty() ? l.k : r.k;
          Lin out;
          return lin_add(out, vl, s);
        }
        return lin_opaque(e, ctx, used_abstraction);  // non-linear product
      }
      for (const char* msr : {"length", "lower", "upper"}) {
        if (prim_spine(e, msr, 1, args)) {
          bool frag = measurable_arg(args[0], ctx.sorts);
          std::string key =
              intern(ctx, "m!" + canon(e), Sort::IntS, !frag, e);
          if (!frag) used_abstraction = true;
          Lin l;
          l.c[key] = 1;
          return l;
        }
      }
      return lin_opaque(e, ctx, used_abstraction);  // mod, unknown apps, ...
    }
    default:
      return lin_opaque(e, ctx, used_abstraction);
  }
}

// Clears denominators and tightens a strict inequality over integers:
// lin < 0 with integral coefficients becomes lin + 1 <= 0.
Con make_con(Lin lin, bool strict, bool eq) {
  Int lcm = 1;
  auto fold_den = [&lcm](const Rat& r) {
    Int d = denominator(r);
    lcm = lcm / boost::multiprecision::gcd(lcm, d) * d;
  };
  for (const auto& [v, x] : lin.c) fold_den(x);
  fold_den(lin.k);
  if (lcm != 1) {
    for (auto& [v, x] : lin.c) x *= lcm;
    lin.k *= lcm;
  }
  if (eq) return {std::move(lin), Rel::Eq};
  if (strict) lin.k += 1;
  return {std::move(lin), Rel::Le};
}

struct FmStep {
  std::string var;
  // Bounds with the variable solved out:  var >= lin  /  var <= lin, plus
  // equality definitions var = lin.
  std::vector<Lin> lowers, uppers;
  std::optional<Lin> def;
};

struct FmResult {
  bool sat;
  std::map<std::string, Rat> sample;  // only on sat
};

Rat lin_eval(const Lin& l, const std::map<std::string, Rat>& sample) {
  Rat v = l.k;
  for (const auto& [var, c] : l.c) {
    auto it = sample.find(var);
    if (it != sample.end()) v += c * it->second;
  }
  return v;
}

FmResult fm_solve(std::vector<Con> cons) {
  std::vector<FmStep> steps;
  for (;;) {
    // Ground checks.
    std::vector<Con> next;
    for (const Con& c : cons) {
      if (!c.lin.c.empty()) {
        next.push_back(c);
        continue;
      }
      if (c.rel == Rel::Eq ? (c.lin.k != 0) : (c.lin.k > 0))
        return {false, {}};
    }
    cons = std::move(next);
    if (cons.empty()) break;

    // Prefer substituting an equality.
    int eq_idx = -1;
    for (size_t i = 0; i < cons.size(); ++i)
      if (cons[i].rel == Rel::Eq) {
        eq_idx = static_cast<int>(i);
        break;
      }
    std::string var;
    FmStep step;
    std::vector<Con> rest;
    if (eq_idx >= 0) {
      Con e = cons[eq_idx];
      var = e.lin.c.begin()->first;
      Rat coef = e.lin.c.begin()->second;
      Lin def = e.lin;
      def.c.erase(var);
      for (auto& [v, x] : def.c) x = -x / coef;
      def.k = -e.lin.k / coef;
      step.var = var;
      step.def = def;
      for (size_t i = 0; i < cons.size(); ++i) {
        if (static_cast<int>(i) == eq_idx) continue;
        Con c = cons[i];
        auto it = c.lin.c.find(var);
        if (it != c.lin.c.end()) {
          Rat cv = it->second;
          c.lin.c.erase(var);
          c.lin = lin_add(c.lin, def, cv);
          c = make_con(c.lin, false, c.rel == Rel::Eq);
        }
        rest.push_back(std::move(c));
      }
    } else {
      // Pick the variable with the fewest lower*upper combinations.
      std::map<std::string, std::pair<int, int>> occ;
      for (const Con& c : cons)
        for (const auto& [v, x] : c.lin.c)
          (x > 0 ? occ[v].second : occ[v].first)++;  // x>0: upper bound on v
      long best = -1;
      for (const auto& [v, lu] : occ) {
        long cost = static_cast<long>(lu.first) * lu.second;
        if (best < 0 || cost < best) {
          best = cost;
          var = v;
        }
      }
      step.var = var;
      std::vector<Con> lows, ups;
      for (const Con& c : cons) {
        auto it = c.lin.c.find(var);
        if (it == c.lin.c.end()) {
          rest.push_back(c);
          continue;
        }
        Rat cv = it->second;
        Lin solved = c.lin;  // cv*var + rest <= 0
        solved.c.erase(var);
        for (auto& [v, x] : solved.c) x = -x / cv;
        solved.k = -solved.k / cv;
        if (cv > 0) {  // var <= solved
          step.uppers.push_back(solved);
          ups.push_back(c);
        } else {  // var >= solved
          step.lowers.push_back(solved);
          lows.push_back(c);
        }
      }
      // Combine every lower with every upper:  lower <= var <= upper.
      for (const Lin& lo : step.lowers)
        for (const Lin& up : step.uppers) {
          Lin comb = lin_add(lo, up, -1);  // lo - up <= 0
          rest.push_back(make_con(comb, false, false));
        }
    }
    steps.push_back(std::move(step));
    cons = std::move(rest);
    if (steps.size() > 64) return {true, {}};  // give up on a sample
  }
  // Back-substitute a sample point.
  std::map<std::string, Rat> sample;
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    if (it->def) {
      sample[it->var] = lin_eval(*it->def, sample);
      continue;
    }
    bool has_lo = !it->lowers.empty(), has_up = !it->uppers.empty();
    Rat lo, up;
    bool first = true;
    for (const Lin& l : it->lowers) {
      Rat v = lin_eval(l, sample);
      if (first || v > lo) lo = v;
      first = false;
    }
    first = true;
    for (const Lin& l : it->uppers) {
      Rat v = lin_eval(l, sample);
      if (first || v < up) up = v;
      first = false;
    }
    Rat pick = 0;
    if (has_lo && has_up) {
      Rat c = Rat(rat_ceil(lo));
      pick = (c <= up) ? c : lo;
      if (lo <= 0 && 0 <= up) pick = 0;
    } else if (has_lo) {
      pick = lo <= 0 ? Rat(0) : Rat(rat_ceil(lo));
    } else if (has_up) {
      pick = up >= 0 ? Rat(0) : Rat(rat_floor(up));
    }
    sample[it->var] = pick;
  }
  return {true, std::move(sample)};
}

// ---------------------------------------------------------------------------
// Cube -> constraints

struct CubeOutcome {
  bool unsat = false;
  bool in_fragment = false;            // no abstracted variable involved
  std::map<std::string, Rat> sample;   // FM sample when sat
  LinCtx* ctx = nullptr;
};

struct CubeData {
  std::vector<Con> cons;
  bool abstracted = false;
  std::set<std::string> bool_bounded;
};

void add_bool_atom(CubeData& d, LinCtx& ctx, const TermPtr& t, bool pos) {
  Sort s = sort_of(t, ctx.sorts);
  bool frag = t->kind == TermKind::Var && s == Sort::BoolS;
  std::string key = intern(ctx, "b!" + canon(t), Sort::BoolS, !frag, t);
  if (!frag) d.abstracted = true;
  if (!d.bool_bounded.count(key)) {
    d.bool_bounded.insert(key);
    Lin lo, hi;  // 0 <= key <= 1
    lo.c[key] = -1;
    hi.c[key] = 1;
    hi.k = -1;
    d.cons.push_back({lo, Rel::Le});
    d.cons.push_back({hi, Rel::Le});
  }
  Lin l;
  l.c[key] = 1;
  l.k = pos ? -1 : 0;  // key = 1 / key = 0
  d.cons.push_back({l, Rel::Eq});
}

// Turns one literal into constraints; integer disequalities are returned
// separately for case splitting.
void add_literal(CubeData& d, LinCtx& ctx, const Lit& lit,
                 std::vector<std::pair<TermPtr, TermPtr>>& diseqs) {
  std::vector<TermPtr> args;
  const TermPtr& t = lit.atom;
  auto linrel = [&](const TermPtr& l, const TermPtr& r, bool strict) {
    bool abs = false;
    Lin lin = lin_add(linearize(l, ctx, abs), linearize(r, ctx, abs), -1);
    d.abstracted = d.abstracted || abs;
    d.cons.push_back(make_con(std::move(lin), strict, false));
  };
  if (prim_spine(t, "<", 2, args)) {
    if (lit.pos)
      linrel(args[0], args[1], true);  // l - r < 0
    else
      linrel(args[1], args[0], false);  // r <= l
    return;
  }
  if (prim_spine(t, "<=", 2, args)) {
    if (lit.pos)
      linrel(args[0], args[1], false);
    else
      linrel(args[1], args[0], true);
    return;
  }
  if (prim_spine(t, "=", 2, args)) {
    Sort sl = sort_of(args[0], ctx.sorts), sr = sort_of(args[1], ctx.sorts);
    bool intish = (sl == Sort::IntS || sl == Sort::UnkS) &&
                  (sr == Sort::IntS || sr == Sort::UnkS);
    if (intish) {
      if (lit.pos) {
        bool abs = false;
        Lin lin = lin_add(linearize(args[0], ctx, abs),
                          linearize(args[1], ctx, abs), -1);
        d.abstracted = d.abstracted || abs;
        d.cons.push_back(make_con(std::move(lin), false, true));
      } else {
        diseqs.emplace_back(args[0], args[1]);
      }
      return;
    }
    if (sl == Sort::ListS || sl == Sort::BstS || sr == Sort::ListS ||
        sr == Sort::BstS) {
      // Structurally equal data has equal measures; that is all the linear
      // fragment can use of such an equality.
      if (lit.pos) {
        std::vector<const char*> msrs;
        if (sl == Sort::ListS || sr == Sort::ListS) msrs = {"length"};
        else msrs = {"lower", "upper"};
        for (const char* m : msrs) {
          bool abs = false;
          Lin lin = lin_add(
              linearize(mk_app(mk_prim(m), args[0]), ctx, abs),
              linearize(mk_app(mk_prim(m), args[1]), ctx, abs), -1);
          d.abstracted = d.abstracted || abs;
          d.cons.push_back(make_con(std::move(lin), false, true));
        }
      }
      // The positive equality is fully represented by its measure
      // projections (an over-approximation, fine for proving); a negative
      // one stays an opaque abstracted atom.
      if (!lit.pos) add_bool_atom(d, ctx, t, lit.pos);
      return;
    }
  }
  add_bool_atom(d, ctx, t, lit.pos);
}

// ---------------------------------------------------------------------------
// Witness search

struct WitnessSearch {
  const Goal& goal;
  const SortMap& sorts;
  long budget;

  WitnessSearch(const Goal& g, const SortMap& s, long b)
      : goal(g), sorts(s), budget(b) {}

  std::vector<std::string> vars;
  std::map<std::string, std::vector<TermPtr>> candidates;
  bool feasible = true;

  void collect_ints(const TermPtr& e, std::set<Int>& out) {
    if (e->kind == TermKind::IntLit) out.insert(e->intval);
    if (e->a) collect_ints(e->a, out);
    if (e->b) collect_ints(e->b, out);
    if (e->body) collect_ints(e->body, out);
    for (const TermPtr& a : e->args) collect_ints(a, out);
  }

  void setup() {
    // Free variables of the goal, all of which must be instantiable data.
    std::set<std::string> fv;
    for (const TermPtr& h : goal.hyps)
      for (const std::string& v : free_vars(h)) fv.insert(v);
    for (const std::string& v : free_vars(goal.concl)) fv.insert(v);
    std::set<Int> consts;
    for (const TermPtr& h : goal.hyps) collect_ints(h, consts);
    collect_ints(goal.concl, consts);

    int int_vars = 0;
    for (const std::string& v : fv) {
      auto it = sorts.find(v);
      if (it == sorts.end() || it->second == Sort::FunS ||
          it->second == Sort::UnkS) {
        feasible = false;
        return;
      }
      if (it->second == Sort::IntS) ++int_vars;
      vars.push_back(v);
    }
    std::sort(vars.begin(), vars.end());

    std::vector<Int> ints;
    Int span = int_vars <= 2 ? 8 : 3;
    for (Int i = -span; i <= span; ++i) ints.push_back(i);
    for (const Int& c : consts) {
      if (abs(c) > 10000000) continue;
      for (Int d = -1; d <= 1; ++d)
        if (std::find(ints.begin(), ints.end(), c + d) == ints.end())
          ints.push_back(c + d);
    }
    std::sort(ints.begin(), ints.end());
    if (ints.size() > 48) ints.resize(48);

    std::vector<Int> small = {-3, -2, -1, 0, 1, 2, 3};
    for (const std::string& v : vars) {
      Sort s = sorts.at(v);
      auto& cs = candidates[v];
      switch (s) {
        case Sort::IntS:
          for (const Int& i : ints) cs.push_back(mk_int(i));
          break;
        case Sort::BoolS:
          cs = {mk_true(), mk_false()};
          break;
        case Sort::UnitS:
          cs = {mk_ctor("unit")};
          break;
        case Sort::ListS: {
          TermPtr l = mk_ctor("nil");
          cs.push_back(l);
          for (int n = 0; n < 4; ++n) {
            l = mk_ctor("cons", {mk_int(0), l});
            cs.push_back(l);
          }
          break;
        }
        case Sort::BstS:
          cs.push_back(mk_ctor("empty"));
          for (const Int& i : small)
            cs.push_back(
                mk_ctor("node", {mk_int(i), mk_ctor("empty"), mk_ctor("empty")}));
          break;
        default:
          feasible = false;
          return;
      }
    }
  }

  bool try_assignment(const std::map<std::string, TermPtr>& w) {
    SubstMap m;
    for (const auto& [v, t] : w) m.push_back({v, t, nullptr});
    for (const TermPtr& h : goal.hyps) {
      TermPtr inst = substitute(h, m);
      if (!free_vars(inst).empty()) return false;
      EvalResult r = evaluate(inst, 20000);
      if (r.status != EvalResult::Value || !is_true(r.value)) return false;
    }
    TermPtr inst = substitute(goal.concl, m);
    if (!free_vars(inst).empty()) return false;
    EvalResult r = evaluate(inst, 20000);
    return r.status == EvalResult::Value && is_false(r.value);
  }

  bool search(std::map<std::string, TermPtr>& out) {
    if (!feasible) return false;
    // Prune early: once a hypothesis is fully instantiated by a partial
    // assignment and evaluates to false, the whole subtree is dead.
    hyp_level.assign(goal.hyps.size(), vars.size());
    for (size_t h = 0; h < goal.hyps.size(); ++h) {
      std::set<std::string> fv = free_vars(goal.hyps[h]);
      size_t lvl = 0;
      for (const std::string& v : fv) {
        auto it = std::find(vars.begin(), vars.end(), v);
        if (it == vars.end()) {
          lvl = vars.size();
          break;
        }
        lvl = std::max(lvl, static_cast<size_t>(it - vars.begin()) + 1);
      }
      hyp_level[h] = lvl;
    }
    std::map<std::string, TermPtr> cur;
    return rec(0, cur, out);
  }

  std::vector<size_t> hyp_level;

  bool hyp_holds(size_t h, const std::map<std::string, TermPtr>& cur) {
    --budget;
    SubstMap m;
    for (const auto& [v, t] : cur) m.push_back({v, t, nullptr});
    TermPtr inst = substitute(goal.hyps[h], m);
    if (!free_vars(inst).empty()) return true;  // not decidable yet
    EvalResult r = evaluate(inst, 20000);
    return r.status == EvalResult::Value && is_true(r.value);
  }

  bool rec(size_t i, std::map<std::string, TermPtr>& cur,
           std::map<std::string, TermPtr>& out) {
    if (budget <= 0) return false;
    if (i == vars.size()) {
      --budget;
      if (try_assignment(cur)) {
        out = cur;
        return true;
      }
      return false;
    }
    for (const TermPtr& c : candidates[vars[i]]) {
      cur[vars[i]] = c;
      bool dead = false;
      for (size_t h = 0; h < goal.hyps.size() && !dead; ++h)
        if (hyp_level[h] == i + 1 && !hyp_holds(h, cur)) dead = true;
      if (!dead && rec(i + 1, cur, out)) return true;
      if (budget <= 0) return false;
    }
    cur.erase(vars[i]);
    return false;
  }
};

// Materializes an in-fragment FM sample into concrete values for the
// original variables: integers directly, lists/trees through their measures.
bool materialize(const LinCtx& ctx, const std::map<std::string, Rat>& sample,
                 const Goal& goal, const SortMap& sorts,
                 std::map<std::string, TermPtr>& out) {
  // Gather measure values per underlying variable.
  std::map<std::string, Int> length_of, lower_of, upper_of;
  for (const auto& [key, info] : ctx.vars) {
    auto it = sample.find(key);
    Rat val = it == sample.end() ? Rat(0) : it->second;
    if (denominator(val) != 1) return false;  // non-integral sample
    Int iv = numerator(val);
    if (key.rfind("v!", 0) == 0) {
      out[key.substr(2)] = mk_int(iv);
    } else if (key.rfind("b!", 0) == 0) {
      if (info.term->kind == TermKind::Var)
        out[info.term->name] = iv == 1 ? mk_true() : mk_false();
    } else if (key.rfind("m!", 0) == 0) {
      std::vector<TermPtr> args;
      for (const char* msr : {"length", "lower", "upper"}) {
        if (!prim_spine(info.term, msr, 1, args)) continue;
        if (args[0]->kind != TermKind::Var) return false;
        const std::string& v = args[0]->name;
        if (std::string(msr) == "length") length_of[v] = iv;
        if (std::string(msr) == "lower") lower_of[v] = iv;
        if (std::string(msr) == "upper") upper_of[v] = iv;
      }
    }
  }
  for (const auto& [v, n] : length_of) {
    if (n < 0 || n > 64) return false;
    TermPtr l = mk_ctor("nil");
    for (Int i = 0; i < n; ++i) l = mk_ctor("cons", {mk_int(0), l});
    out[v] = l;
  }
  std::set<std::string> bst_vars;
  for (const auto& [v, x] : lower_of) bst_vars.insert(v);
  for (const auto& [v, x] : upper_of) bst_vars.insert(v);
  for (const std::string& v : bst_vars) {
    Int lo = lower_of.count(v) ? lower_of[v] : kBstMaxInt;
    Int hi = upper_of.count(v) ? upper_of[v] : lo;
    if (!lower_of.count(v)) lo = hi;
    if (lo == kBstMaxInt && hi == kBstMinInt) {
      out[v] = mk_ctor("empty");
    } else if (lo == hi) {
      out[v] = mk_ctor("node", {mk_int(lo), mk_ctor("empty"), mk_ctor("empty")});
    } else if (lo < hi) {
      TermPtr left =
          mk_ctor("node", {mk_int(lo), mk_ctor("empty"), mk_ctor("empty")});
      out[v] = mk_ctor("node", {mk_int(hi), left, mk_ctor("empty")});
    } else {
      return false;  // lower > upper has no realizer
    }
  }
  // Default-fill remaining goal variables so hypotheses become closed.
  std::set<std::string> fv;
  for (const TermPtr& h : goal.hyps)
    for (const std::string& x : free_vars(h)) fv.insert(x);
  for (const std::string& x : free_vars(goal.concl)) fv.insert(x);
  for (const std::string& x : fv) {
    if (out.count(x)) continue;
    auto it = sorts.find(x);
    if (it == sorts.end()) return false;
    switch (it->second) {
      case Sort::IntS:
        out[x] = mk_int(0);
        break;
      case Sort::BoolS:
        out[x] = mk_true();
        break;
      case Sort::UnitS:
        out[x] = mk_ctor("unit");
        break;
      case Sort::ListS:
        out[x] = mk_ctor("nil");
        break;
      case Sort::BstS:
        out[x] = mk_ctor("empty");
        break;
      default:
        return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// SMT-LIB 2 emission

struct SmtEmitter {
  const SortMap& sorts;

  explicit SmtEmitter(const SortMap& s) : sorts(s) {}
  std::ostringstream decls, body;
  std::set<std::string> declared;
  int opaque_count = 0;
  std::map<std::string, std::string> opaque_names;

  std::string smt_sort(Sort s) {
    switch (s) {
      case Sort::IntS:
        return "Int";
      case Sort::BoolS:
        return "Bool";
      case Sort::ListS:
        return "IntList";
      case Sort::BstS:
        return "BST";
      case Sort::UnitS:
        return "Unt";
      default:
        return "Int";
    }
  }

  void declare(const std::string& name, const std::string& sig) {
    if (declared.insert(name).second) decls << sig << "\n";
  }

  std::string var(const std::string& n, Sort s) {
    declare("c!" + n, "(declare-const " + n + " " + smt_sort(s) + ")");
    return n;
  }

  std::string opaque(const TermPtr& e, Sort s) {
    std::string key = canon(e);
    auto it = opaque_names.find(key);
    if (it != opaque_names.end()) return it->second;
    std::string n = "o" + std::to_string(opaque_count++);
    declare("c!" + n, "(declare-const " + n + " " + smt_sort(s) + ")");
    opaque_names[key] = n;
    return n;
  }

  std::string tr(const TermPtr& e) {
    std::vector<TermPtr> args;
    switch (e->kind) {
      case TermKind::IntLit:
        if (e->intval < 0) return "(- " + Int(-e->intval).str() + ")";
        return e->intval.str();
      case TermKind::Var: {
        auto it = sorts.find(e->name);
        Sort s = it == sorts.end() ? Sort::IntS : it->second;
        if (s == Sort::FunS || s == Sort::UnkS) return opaque(e, Sort::IntS);
        return var(e->name, s);
      }
      case TermKind::Ctor:
        if (e->name == "true" || e->name == "false") return e->name;
        return opaque(e, sort_of(e, sorts));
      case TermKind::POr:
        return "(or " + tr(e->a) + " " + tr(e->b) + ")";
      case TermKind::PAnd:
        return "(and " + tr(e->a) + " " + tr(e->b) + ")";
      case TermKind::App: {
        static const std::map<std::string, std::string> ops = {
            {"+", "+"},   {"-", "-"},   {"*", "*"},  {"mod", "mod"},
            {"=", "="},   {"<", "<"},   {"<=", "<="}, {"not", "not"}};
        for (const auto& [p, op] : ops) {
          int ar = p == "not" ? 1 : 2;
          if (prim_spine(e, p, ar, args)) {
            std::string s = "(" + op;
            for (const TermPtr& a : args) s += " " + tr(a);
            return s + ")";
          }
        }
        if (prim_spine(e, "min", 2, args) || prim_spine(e, "max", 2, args)) {
          bool is_min = e->a->a->name == "min";
          std::string a = tr(args[0]), b = tr(args[1]);
          return "(ite (" + std::string(is_min ? "<=" : ">=") + " " + a + " " +
                 b + ") " + a + " " + b + ")";
        }
        for (const char* msr : {"length", "lower", "upper"}) {
          if (prim_spine(e, msr, 1, args)) {
            Sort as = sort_of(args[0], sorts);
            std::string dom = (as == Sort::BstS) ? "BST" : "IntList";
            declare("f!" + std::string(msr) + dom,
                    "(declare-fun " + std::string(msr) + " (" + dom + ") Int)");
            return "(" + std::string(msr) + " " + tr(args[0]) + ")";
          }
        }
        return opaque(e, sort_of(e, sorts));
      }
      default:
        return opaque(e, sort_of(e, sorts));
    }
  }

  std::string script(const Goal& g) {
    std::string hyp = "true";
    for (const TermPtr& h : g.hyps) hyp = "(and " + hyp + " " + tr(h) + ")";
    std::string concl = tr(g.concl);
    std::ostringstream out;
    out << "(set-logic ALL)\n(declare-sort IntList 0)\n(declare-sort BST 0)\n"
        << "(declare-sort Unt 0)\n"
        << decls.str() << "(assert (not (=> " << hyp << " " << concl
        << ")))\n(check-sat)\n";
    return out.str();
  }
};

void emit_smtlib(const Goal& g, const SortMap& sorts, const std::string& dir) {
  SmtEmitter em{sorts};
  std::string script = em.script(g);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::string path = dir + "/" + content_hash(script) + ".smt2";
  std::ofstream(path) << script;
}

}  // namespace

// ---------------------------------------------------------------------------

TermPtr fold_constants(const TermPtr& e, long fuel) {
  Term t = *e;
  if (t.a) t.a = fold_constants(t.a, fuel);
  if (t.b) t.b = fold_constants(t.b, fuel);
  if (t.body) t.body = fold_constants(t.body, fuel);
  for (TermPtr& a : t.args) a = fold_constants(a, fuel);
  for (CaseBranch& br : t.branches)
    br.handler = fold_constants(br.handler, fuel);
  TermPtr folded = std::make_shared<Term>(std::move(t));
  // Algebraic short-circuits that work under free variables.
  if (folded->kind == TermKind::POr) {
    if (is_true(folded->a) || is_true(folded->b)) return mk_true();
    if (is_false(folded->a)) return folded->b;
    if (is_false(folded->b)) return folded->a;
  }
  if (folded->kind == TermKind::PAnd) {
    if (is_false(folded->a) || is_false(folded->b)) return mk_false();
    if (is_true(folded->a)) return folded->b;
    if (is_true(folded->b)) return folded->a;
  }
  // Closed redexes evaluate outright.
  bool reducible = folded->kind == TermKind::App ||
                   folded->kind == TermKind::Case ||
                   folded->kind == TermKind::POr ||
                   folded->kind == TermKind::PAnd;
  if (reducible && free_vars(folded).empty()) {
    EvalResult r = evaluate(folded, fuel);
    if (r.status == EvalResult::Value) return r.value;
  }
  return folded;
}

bool validate_witness(const Env& env, const TermPtr& p, const TermPtr& q,
                      const std::map<std::string, TermPtr>& witness) {
  Goal g = build_goal(env, p, q);
  SortMap sorts;
  for (const auto& [x, T] : g.flat.bindings)
    sorts[x] = T->kind == TypeKind::Base ? sort_of_base(T->base)
               : T->kind == TypeKind::Arrow ? Sort::FunS
                                            : Sort::UnkS;
  WitnessSearch ws{g, sorts, 1};
  return ws.try_assignment(witness);
}

ProverResult implies(const Env& env, const TermPtr& p, const TermPtr& q,
                     const ProverOptions& opts) {
  Goal g = build_goal(env, p, q);
  for (TermPtr& h : g.hyps) h = fold_constants(h, opts.fold_fuel);
  g.concl = fold_constants(g.concl, opts.fold_fuel);
  propagate_units(g);

  // Fast paths that stay available even with the prover disabled.
  if (is_true(g.concl)) return {Certainty::Yes, {}};
  for (const TermPtr& h : g.hyps)
    if (is_false(h)) return {Certainty::Yes, {}};
  if (alpha_eq(fold_constants(p, opts.fold_fuel),
               fold_constants(q, opts.fold_fuel)))
    return {Certainty::Yes, {}};

  SortMap sorts;
  for (const auto& [x, T] : g.flat.bindings)
    sorts[x] = T->kind == TypeKind::Base ? sort_of_base(T->base)
               : T->kind == TypeKind::Arrow ? Sort::FunS
                                            : Sort::UnkS;

  if (!opts.emit_smtlib_dir.empty()) emit_smtlib(g, sorts, opts.emit_smtlib_dir);
  if (!opts.enabled) return {Certainty::Maybe, {}};

  // DNF of hypotheses /\ not conclusion.
  DnfCtx dctx{sorts, opts.max_disjuncts};
  std::vector<Cube> cubes = {{}};
  for (const TermPtr& h : g.hyps)
    cubes = dnf_combine(std::move(cubes), dnf(h, true, dctx), dctx);
  cubes = dnf_combine(std::move(cubes), dnf(g.concl, false, dctx), dctx);

  bool overflow = dctx.overflow;
  bool all_unsat = true;
  std::optional<std::map<std::string, TermPtr>> fm_witness;

  for (Cube& cube0 : cubes) {
    // Complementary literals refute a cube outright; skip the expensive
    // min/max expansion and FM stages for it.
    {
      std::set<std::string> pos, neg;
      bool contradictory = false;
      for (const Lit& l : cube0) {
        std::string k = canon(l.atom);
        if ((l.pos ? neg : pos).count(k)) {
          contradictory = true;
          break;
        }
        (l.pos ? pos : neg).insert(k);
      }
      if (contradictory) continue;
    }
    std::vector<Cube> expanded =
        expand_minmax(std::move(cube0), 4096, overflow);
    for (const Cube& cube : expanded) {
      LinCtx lctx{sorts, {}, {}};
      // Register min/max split variables so they linearize as integers.
      for (const Lit& l : cube)
        for (const std::string& v : free_vars(l.atom))
          if (v.rfind("mm%", 0) == 0) lctx.splitvars.insert(v);
      CubeData d;
      std::vector<std::pair<TermPtr, TermPtr>> diseqs;
      for (const Lit& l : cube) add_literal(d, lctx, l, diseqs);
      // Case-split integer disequalities (a != b  =>  a < b \/ b < a).
      std::vector<CubeData> systems = {d};
      for (const auto& [a, b] : diseqs) {
        if (systems.size() > 64) {
          for (CubeData& s : systems) s.abstracted = true;  // drop, soundly
          break;
        }
        std::vector<CubeData> nxt;
        for (const CubeData& s : systems) {
          for (int side = 0; side < 2; ++side) {
            CubeData s2 = s;
            bool abs = false;
            Lin l = lin_add(linearize(side ? b : a, lctx, abs),
                            linearize(side ? a : b, lctx, abs), -1);
            s2.abstracted = s2.abstracted || abs;
            s2.cons.push_back(make_con(std::move(l), true, false));
            nxt.push_back(std::move(s2));
          }
        }
        systems = std::move(nxt);
      }
      for (CubeData& sys : systems) {
        FmResult fm = fm_solve(sys.cons);
        if (!fm.sat) continue;
        all_unsat = false;
        if (getenv("HYTC_PROVER_DEBUG")) {
          static int shown = 0;
          if (shown++ < 3) {
            fprintf(stderr, "-- sat cube (abstracted=%d):\n", (int)sys.abstracted);
            for (const Lit& l : cube)
              fprintf(stderr, "   %c %s\n", l.pos ? '+' : '-',
                      print(l.atom).c_str());
            for (const auto& [key, info] : lctx.vars)
              if (info.abstracted)
                fprintf(stderr, "   abstracted var: %s\n", key.c_str());
          }
        }
        bool frag = !sys.abstracted;
        if (frag)
          for (const auto& [key, info] : lctx.vars)
            if (info.abstracted) frag = false;
        if (frag && !fm_witness) {
          std::map<std::string, TermPtr> w;
          if (materialize(lctx, fm.sample, g, sorts, w)) fm_witness = w;
        }
      }
    }
  }

  if (all_unsat && !overflow) return {Certainty::Yes, {}};

  // Refutation: concrete search first, then the FM-materialized candidate.
  WitnessSearch ws{g, sorts, opts.witness_budget};
  ws.setup();
  std::map<std::string, TermPtr> w;
  if (ws.search(w)) return {Certainty::No, std::move(w)};
  if (fm_witness && ws.try_assignment(*fm_witness))
    return {Certainty::No, std::move(*fm_witness)};
  return {Certainty::Maybe, {}};
}

}  // namespace hytc
