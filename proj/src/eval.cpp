#include "hytc/eval.hpp"

#include <cassert>

#include "hytc/builtins.hpp"
#include "hytc/surface.hpp"

namespace hytc {

namespace {

// Unwinds an application spine e = (((h a1) a2) ... an).
void unwind(const TermPtr& e, TermPtr& head, std::vector<TermPtr>& args) {
  if (e->kind == TermKind::App) {
    unwind(e->a, head, args);
    args.push_back(e->b);
  } else {
    head = e;
  }
}

bool is_bool_ctor(const TermPtr& e) {
  return e->kind == TermKind::Ctor && (e->name == "true" || e->name == "false");
}

// A value that can legally sit in function position.
bool is_applicable(const TermPtr& e) {
  if (e->kind == TermKind::Lam || e->kind == TermKind::Prim) return true;
  if (e->kind == TermKind::Ctor)
    return e->args.size() < ctor_info(e->name)->args.size();
  if (e->kind == TermKind::App) {
    TermPtr head;
    std::vector<TermPtr> args;
    unwind(e, head, args);
    if (head->kind == TermKind::Prim)
      return static_cast<int>(args.size()) < prim_arity(head->name);
    if (head->kind == TermKind::Cast)
      return args.size() == 1 && head->cast_tgt->kind == TypeKind::Arrow;
    return false;
  }
  return false;
}

TermPtr bool_term(bool b) { return b ? mk_true() : mk_false(); }

// delta: reduction of a fully applied primitive over values.
StepOut delta(const std::string& p, const std::vector<TermPtr>& args);

Int int_of(const TermPtr& e) {
  assert(e->kind == TermKind::IntLit);
  return e->intval;
}

Int measure_length(const TermPtr& v) {
  Int n = 0;
  TermPtr cur = v;
  while (cur->kind == TermKind::Ctor && cur->name == "cons") {
    ++n;
    cur = cur->args[1];
  }
  return n;
}

Int measure_lower(const TermPtr& v) {
  if (v->kind == TermKind::Ctor && v->name == "node") {
    Int l = measure_lower(v->args[1]);
    Int x = int_of(v->args[0]);
    return x < l ? x : l;
  }
  return kBstMaxInt;
}

Int measure_upper(const TermPtr& v) {
  if (v->kind == TermKind::Ctor && v->name == "node") {
    Int r = measure_upper(v->args[2]);
    Int x = int_of(v->args[0]);
    return x < r ? r : x;
  }
  return kBstMinInt;
}

StepOut delta(const std::string& p, const std::vector<TermPtr>& args) {
  auto val = [](TermPtr t) { return StepOut{StepOut::Stepped, t, {}, {}}; };
  if (p == "fix") {
    // fix f v -> f (fix f) v; `fix f` alone is a value, keeping call-by-value
    // recursion productive.
    return val(mk_app(mk_app(args[0], mk_app(mk_prim("fix"), args[0])), args[1]));
  }
  if (p == "not") {
    if (!is_bool_ctor(args[0]))
      return {StepOut::Error, nullptr, {}, "not applied to a non-boolean"};
    return val(bool_term(args[0]->name == "false"));
  }
  if (p == "=") return val(bool_term(value_eq(args[0], args[1])));
  if (p == "length") return val(mk_int(measure_length(args[0])));
  if (p == "lower") return val(mk_int(measure_lower(args[0])));
  if (p == "upper") return val(mk_int(measure_upper(args[0])));
  // The remaining primitives are integer-valued.
  for (const TermPtr& a : args)
    if (a->kind != TermKind::IntLit)
      return {StepOut::Error, nullptr, {}, p + " applied to a non-integer"};
  Int a = int_of(args[0]), b = int_of(args[1]);
  if (p == "+") return val(mk_int(a + b));
  if (p == "-") return val(mk_int(a - b));
  if (p == "*") return val(mk_int(a * b));
  if (p == "min") return val(mk_int(a < b ? a : b));
  if (p == "max") return val(mk_int(a < b ? b : a));
  if (p == "mod") return val(mk_int(b == 0 ? a : a % b));
  if (p == "<") return val(bool_term(a < b));
  if (p == "<=") return val(bool_term(a <= b));
  return {StepOut::Error, nullptr, {}, "unknown primitive " + p};
}

// Does the value v inhabit base type b (ignoring refinements)?
bool base_compatible(const TermPtr& v, BaseId b) {
  if (v->kind == TermKind::IntLit) return b == BaseId::Int;
  if (v->kind == TermKind::Ctor) return ctor_info(v->name)->result_base == b;
  return false;
}

StepOut stepped(TermPtr t) { return {StepOut::Stepped, std::move(t), {}, {}}; }
StepOut value_of(const TermPtr& t) { return {StepOut::Value, t, {}, {}}; }
StepOut error(std::string msg) {
  return {StepOut::Error, nullptr, {}, std::move(msg)};
}

StepOut step_app(const TermPtr& e);

}  // namespace

bool is_value(const TermPtr& e) {
  switch (e->kind) {
    case TermKind::IntLit:
    case TermKind::Lam:
    case TermKind::Prim:
    case TermKind::Cast:
      return true;
    case TermKind::Ctor:
      for (const TermPtr& a : e->args)
        if (!is_value(a)) return false;
      return true;
    case TermKind::App: {
      if (!is_value(e->a) || !is_value(e->b)) return false;
      TermPtr head;
      std::vector<TermPtr> args;
      unwind(e, head, args);
      if (head->kind == TermKind::Prim)
        return static_cast<int>(args.size()) < prim_arity(head->name);
      if (head->kind == TermKind::Cast)
        // A function wrapped in an arrow cast is a value; it reduces only
        // when applied (and casts into base/Dynamic always reduce).
        return args.size() == 1 && head->cast_tgt->kind == TypeKind::Arrow &&
               is_applicable(args[0]);
      return false;
    }
    default:
      return false;
  }
}

bool value_eq(const TermPtr& a, const TermPtr& b) {
  if (a->kind != b->kind) return false;
  if (a->kind == TermKind::IntLit) return a->intval == b->intval;
  if (a->kind == TermKind::Ctor) {
    if (a->name != b->name || a->args.size() != b->args.size()) return false;
    for (size_t i = 0; i < a->args.size(); ++i)
      if (!value_eq(a->args[i], b->args[i])) return false;
    return true;
  }
  // Functional values: compare by alpha-equivalence (best effort; `=` is
  // only typed at base types).
  return alpha_eq(a, b);
}

namespace {

StepOut step_app(const TermPtr& e) {
  const TermPtr& f = e->a;
  const TermPtr& x = e->b;
  if (!is_value(f)) {
    StepOut s = step(f);
    if (s.kind != StepOut::Stepped) return s;
    return stepped(mk_app(s.term, x));
  }
  if (!is_value(x)) {
    StepOut s = step(x);
    if (s.kind != StepOut::Stepped) return s;
    return stepped(mk_app(f, s.term));
  }
  // beta
  if (f->kind == TermKind::Lam) return stepped(subst1(f->body, f->name, x));
  // constructor argument absorption
  if (f->kind == TermKind::Ctor) {
    const CtorInfo* ci = ctor_info(f->name);
    if (f->args.size() >= ci->args.size())
      return error("constructor " + f->name + " applied to too many arguments");
    std::vector<TermPtr> args = f->args;
    args.push_back(x);
    return stepped(mk_ctor(f->name, std::move(args)));
  }
  // primitive spines
  {
    TermPtr head;
    std::vector<TermPtr> args;
    unwind(e, head, args);
    if (head->kind == TermKind::Prim) {
      int ar = prim_arity(head->name);
      if (static_cast<int>(args.size()) == ar) return delta(head->name, args);
      if (static_cast<int>(args.size()) < ar) return value_of(e);
      return error("primitive " + head->name + " applied to too many arguments");
    }
  }
  // cast application
  if (f->kind == TermKind::Cast) {
    const TypePtr& S = f->cast_src;
    const TypePtr& T = f->cast_tgt;
    if (S->kind == TypeKind::ExistsTy || T->kind == TypeKind::ExistsTy)
      return error("existential type reached at runtime");
    if (S->kind == TypeKind::TyVar || T->kind == TypeKind::TyVar)
      return error("unsolved type variable reached at runtime");
    if (T->kind == TypeKind::Dynamic) return stepped(x);  // erase
    if (T->kind == TypeKind::Base) {
      if (!base_compatible(x, T->base))
        return {StepOut::Failed, nullptr, {T, S, x}, {}};
      return stepped(
          mk_checking(T, subst1(T->refine, T->binder, x), x, S));
    }
    // T is an arrow: the wrapped function is a value unless the subject
    // cannot be applied at all.
    if (!is_applicable(x)) return {StepOut::Failed, nullptr, {T, S, x}, {}};
    return value_of(e);
  }
  // function-cast distribution: (<S => T> g) e
  if (f->kind == TermKind::App && f->a->kind == TermKind::Cast) {
    const TypePtr& S = f->a->cast_src;
    const TypePtr& T = f->a->cast_tgt;
    const TermPtr& g = f->b;
    TypePtr S1 = S->kind == TypeKind::Arrow ? S->dom : mk_dynamic();
    TypePtr T1 = T->dom;
    TermPtr inner = mk_app(mk_cast(T1, S1), x);
    TypePtr src_cod = S->kind == TypeKind::Arrow
                          ? subst1(S->cod, S->binder, inner)
                          : mk_dynamic();
    TypePtr tgt_cod = subst1(T->cod, T->binder, x);
    return stepped(mk_app(mk_cast(src_cod, tgt_cod), mk_app(g, inner)));
  }
  return error("application of a non-function value: " + print(f));
}

StepOut step_checking(const TermPtr& e) {
  const TermPtr& r = e->a;
  if (is_value(r)) {
    if (is_true(r)) return stepped(e->b);
    return {StepOut::Failed, nullptr, {e->annot, e->annot2, e->b}, {}};
  }
  StepOut s = step(r);
  if (s.kind != StepOut::Stepped) return s;
  return stepped(mk_checking(e->annot, s.term, e->b, e->annot2));
}

StepOut step_parallel(const TermPtr& e) {
  bool is_or = e->kind == TermKind::POr;
  const TermPtr& l = e->a;
  const TermPtr& r = e->b;
  auto absorb = is_or ? is_true : is_false;   // short-circuiting value
  auto neutral = is_or ? is_false : is_true;  // identity value
  if (absorb(l) || absorb(r)) return stepped(bool_term(is_or));
  if (neutral(l) && neutral(r)) return stepped(bool_term(!is_or));
  if (neutral(l)) return stepped(r);
  if (neutral(r)) return stepped(l);
  bool lv = is_value(l), rv = is_value(r);
  if (lv && rv) return error("parallel connective over non-boolean values");
  // Fair alternation: even counter steps the left side, odd the right, unless
  // that side is already a value.
  bool go_left = (e->fair % 2 == 0);
  if (lv) go_left = false;
  if (rv) go_left = true;
  StepOut s = step(go_left ? l : r);
  if (s.kind != StepOut::Stepped) return s;
  TermPtr nl = go_left ? s.term : l;
  TermPtr nr = go_left ? r : s.term;
  return stepped(is_or ? mk_por(nl, nr, e->fair + 1)
                       : mk_pand(nl, nr, e->fair + 1));
}

StepOut step_case(const TermPtr& e) {
  const TermPtr& scrut = e->body;
  if (!is_value(scrut)) {
    StepOut s = step(scrut);
    if (s.kind != StepOut::Stepped) return s;
    return stepped(mk_case(s.term, e->branches));
  }
  if (scrut->kind != TermKind::Ctor)
    return error("case scrutinee is not a constructor value");
  const CtorInfo* ci = ctor_info(scrut->name);
  if (scrut->args.size() != ci->args.size())
    return error("case scrutinee is a partially applied constructor");
  for (const CaseBranch& br : e->branches) {
    if (br.ctor != scrut->name) continue;
    // Handler receives the constructor arguments followed by the scrutinee
    // itself.
    TermPtr t = br.handler;
    for (const TermPtr& a : scrut->args) t = mk_app(t, a);
    return stepped(mk_app(t, scrut));
  }
  return error("no case branch for constructor " + scrut->name);
}

}  // namespace

StepOut step(const TermPtr& e) {
  if (is_value(e)) return value_of(e);
  switch (e->kind) {
    case TermKind::Var:
      return error("unbound variable at runtime: " + e->name);
    case TermKind::App:
      return step_app(e);
    case TermKind::Checking:
      return step_checking(e);
    case TermKind::Case:
      return step_case(e);
    case TermKind::POr:
    case TermKind::PAnd:
      return step_parallel(e);
    case TermKind::Exists:
      return error("existential predicate reached at runtime");
    case TermKind::PredVar:
      return error("refinement placeholder reached at runtime: " + e->name);
    case TermKind::Ctor: {
      // Some constructor argument still needs evaluation.
      std::vector<TermPtr> args = e->args;
      for (TermPtr& a : args) {
        if (is_value(a)) continue;
        StepOut s = step(a);
        if (s.kind != StepOut::Stepped) return s;
        a = s.term;
        return stepped(mk_ctor(e->name, std::move(args)));
      }
      return value_of(e);
    }
    default:
      return error("cannot evaluate term: " + print(e));
  }
}

EvalResult evaluate(const TermPtr& e, long fuel) {
  TermPtr cur = e;
  for (long i = 0; i < fuel; ++i) {
    StepOut s = step(cur);
    switch (s.kind) {
      case StepOut::Value:
        return {EvalResult::Value, cur, {}, {}, i};
      case StepOut::Stepped:
        cur = s.term;
        break;
      case StepOut::Failed:
        return {EvalResult::FailedCast, nullptr, s.fail, {}, i};
      case StepOut::Error:
        return {EvalResult::Error, nullptr, {}, s.error, i};
    }
  }
  return {EvalResult::OutOfFuel, cur, {}, {}, fuel};
}

}  // namespace hytc
