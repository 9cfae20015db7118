#include "hytc/ast.hpp"

#include <atomic>
#include <sstream>

namespace hytc {

// ---------------------------------------------------------------------------
// Builders

TermPtr mk_var(const std::string& n) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Var;
  t->name = n;
  return t;
}
TermPtr mk_prim(const std::string& n) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Prim;
  t->name = n;
  return t;
}
TermPtr mk_int(const Int& v) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::IntLit;
  t->intval = v;
  return t;
}
TermPtr mk_ctor(const std::string& n, std::vector<TermPtr> args) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Ctor;
  t->name = n;
  t->args = std::move(args);
  return t;
}
TermPtr mk_lam(const std::string& x, TypePtr ty, TermPtr body) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Lam;
  t->name = x;
  t->annot = std::move(ty);
  t->body = std::move(body);
  return t;
}
TermPtr mk_app(TermPtr f, TermPtr e) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::App;
  t->a = std::move(f);
  t->b = std::move(e);
  return t;
}
TermPtr mk_cast(TypePtr s, TypePtr tt) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Cast;
  t->cast_src = std::move(s);
  t->cast_tgt = std::move(tt);
  return t;
}
TermPtr mk_checking(TypePtr target, TermPtr residual, TermPtr subject, TypePtr source) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Checking;
  t->annot = std::move(target);
  t->annot2 = std::move(source);
  t->a = std::move(residual);
  t->b = std::move(subject);
  return t;
}
TermPtr mk_case(TermPtr scrut, std::vector<CaseBranch> branches) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Case;
  t->body = std::move(scrut);
  t->branches = std::move(branches);
  return t;
}
TermPtr mk_por(TermPtr l, TermPtr r, int fair) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::POr;
  t->a = std::move(l);
  t->b = std::move(r);
  t->fair = fair;
  return t;
}
TermPtr mk_pand(TermPtr l, TermPtr r, int fair) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::PAnd;
  t->a = std::move(l);
  t->b = std::move(r);
  t->fair = fair;
  return t;
}
TermPtr mk_exists(const std::string& x, TypePtr ty, TermPtr body) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Exists;
  t->name = x;
  t->annot = std::move(ty);
  t->body = std::move(body);
  return t;
}
TermPtr mk_predvar(const std::string& psi, SubstMap delayed) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::PredVar;
  t->name = psi;
  t->delayed = std::move(delayed);
  return t;
}

TermPtr mk_app2(TermPtr f, TermPtr x, TermPtr y) {
  return mk_app(mk_app(std::move(f), std::move(x)), std::move(y));
}
TermPtr mk_eq(TermPtr l, TermPtr r) { return mk_app2(mk_prim("="), std::move(l), std::move(r)); }
TermPtr mk_lt(TermPtr l, TermPtr r) { return mk_app2(mk_prim("<"), std::move(l), std::move(r)); }
TermPtr mk_le(TermPtr l, TermPtr r) { return mk_app2(mk_prim("<="), std::move(l), std::move(r)); }
TermPtr mk_and(TermPtr l, TermPtr r) { return mk_pand(std::move(l), std::move(r)); }
TermPtr mk_true() { return mk_ctor("true"); }
TermPtr mk_false() { return mk_ctor("false"); }

bool is_true(const TermPtr& e) {
  return e && e->kind == TermKind::Ctor && e->name == "true";
}
bool is_false(const TermPtr& e) {
  return e && e->kind == TermKind::Ctor && e->name == "false";
}

const char* base_name(BaseId b) {
  switch (b) {
    case BaseId::Bool: return "Bool";
    case BaseId::Int: return "Int";
    case BaseId::Unit: return "Unit";
    case BaseId::IntList: return "IntList";
    case BaseId::BST: return "BST";
  }
  return "?";
}
std::optional<BaseId> base_from_name(const std::string& s) {
  if (s == "Bool") return BaseId::Bool;
  if (s == "Int") return BaseId::Int;
  if (s == "Unit") return BaseId::Unit;
  if (s == "IntList") return BaseId::IntList;
  if (s == "BST") return BaseId::BST;
  return std::nullopt;
}

TypePtr mk_base(const std::string& x, BaseId b, TermPtr refine) {
  auto t = std::make_shared<Type>();
  t->kind = TypeKind::Base;
  t->binder = x;
  t->base = b;
  t->refine = std::move(refine);
  return t;
}
TypePtr mk_base_raw(BaseId b) { return mk_base("_", b, mk_true()); }
TypePtr mk_arrow(const std::string& x, TypePtr dom, TypePtr cod) {
  auto t = std::make_shared<Type>();
  t->kind = TypeKind::Arrow;
  t->binder = x;
  t->dom = std::move(dom);
  t->cod = std::move(cod);
  return t;
}
TypePtr mk_exists_ty(const std::string& x, TypePtr wit, TypePtr body) {
  auto t = std::make_shared<Type>();
  t->kind = TypeKind::ExistsTy;
  t->binder = x;
  t->dom = std::move(wit);
  t->cod = std::move(body);
  return t;
}
TypePtr mk_tyvar(const std::string& a, SubstMap delayed) {
  auto t = std::make_shared<Type>();
  t->kind = TypeKind::TyVar;
  t->var = a;
  t->delayed = std::move(delayed);
  return t;
}
TypePtr mk_dynamic() {
  auto t = std::make_shared<Type>();
  t->kind = TypeKind::Dynamic;
  return t;
}

// ---------------------------------------------------------------------------
// Fresh names

std::string fresh(const std::string& hint) {
  static std::atomic<unsigned long> counter{0};
  // Strip a previous freshness suffix so names do not grow without bound.
  auto cut = hint.find('%');
  std::string stem = cut == std::string::npos ? hint : hint.substr(0, cut);
  if (stem.empty()) stem = "v";
  return stem + "%" + std::to_string(++counter);
}

// ---------------------------------------------------------------------------
// Substitution

static SubstMap drop_binding(const SubstMap& m, const std::string& x) {
  SubstMap out;
  for (auto& e : m)
    if (e.name != x) out.push_back(e);
  return out;
}

static bool map_mentions(const SubstMap& m, const std::string& x) {
  for (auto& e : m) {
    if (free_vars(e.value).count(x)) return true;
    if (e.annot && free_vars(e.annot).count(x)) return true;
  }
  return false;
}

// Rename the binder of e if it would capture a variable free in the range of
// m.  Returns the (possibly renamed) binder name and the rewritten body parts
// through the callback-free pattern below.
static std::string avoid_capture(const std::string& binder, const SubstMap& m,
                                 SubstMap& inner, bool& renamed,
                                 std::string& fresh_name) {
  inner = drop_binding(m, binder);
  renamed = false;
  if (!inner.empty() && map_mentions(inner, binder)) {
    renamed = true;
    fresh_name = fresh(binder);
    return fresh_name;
  }
  return binder;
}

TermPtr substitute(const TermPtr& e, const SubstMap& m) {
  if (!e || m.empty()) return e;
  switch (e->kind) {
    case TermKind::Var: {
      for (auto& ent : m)
        if (ent.name == e->name) return ent.value;
      return e;
    }
    case TermKind::Prim:
    case TermKind::IntLit:
      return e;
    case TermKind::Ctor: {
      std::vector<TermPtr> args;
      bool changed = false;
      for (auto& a : e->args) {
        auto a2 = substitute(a, m);
        changed |= (a2 != a);
        args.push_back(a2);
      }
      return changed ? mk_ctor(e->name, std::move(args)) : e;
    }
    case TermKind::Lam: {
      SubstMap inner;
      bool renamed;
      std::string nn;
      std::string x = avoid_capture(e->name, m, inner, renamed, nn);
      TermPtr body = e->body;
      if (renamed) body = subst1(body, e->name, mk_var(x));
      auto annot = substitute(e->annot, m);
      auto body2 = substitute(body, inner);
      if (!renamed && annot == e->annot && body2 == e->body) return e;
      return mk_lam(x, annot, body2);
    }
    case TermKind::App: {
      auto f = substitute(e->a, m), a = substitute(e->b, m);
      if (f == e->a && a == e->b) return e;
      return mk_app(f, a);
    }
    case TermKind::Cast: {
      auto s = substitute(e->cast_src, m), t = substitute(e->cast_tgt, m);
      if (s == e->cast_src && t == e->cast_tgt) return e;
      return mk_cast(s, t);
    }
    case TermKind::Checking: {
      return mk_checking(substitute(e->annot, m), substitute(e->a, m),
                         substitute(e->b, m),
                         e->annot2 ? substitute(e->annot2, m) : nullptr);
    }
    case TermKind::Case: {
      std::vector<CaseBranch> bs;
      for (auto& br : e->branches)
        bs.push_back({br.ctor, substitute(br.handler, m)});
      return mk_case(substitute(e->body, m), std::move(bs));
    }
    case TermKind::POr:
      return mk_por(substitute(e->a, m), substitute(e->b, m), e->fair);
    case TermKind::PAnd:
      return mk_pand(substitute(e->a, m), substitute(e->b, m), e->fair);
    case TermKind::Exists: {
      SubstMap inner;
      bool renamed;
      std::string nn;
      std::string x = avoid_capture(e->name, m, inner, renamed, nn);
      TermPtr body = e->body;
      if (renamed) body = subst1(body, e->name, mk_var(x));
      return mk_exists(x, substitute(e->annot, m), substitute(body, inner));
    }
    case TermKind::PredVar: {
      // Delay: append the new substitution after the existing one.
      SubstMap d = e->delayed;
      for (auto& ent : m) d.push_back(ent);
      return mk_predvar(e->name, std::move(d));
    }
  }
  return e;
}

TypePtr substitute(const TypePtr& t, const SubstMap& m) {
  if (!t || m.empty()) return t;
  switch (t->kind) {
    case TypeKind::Base: {
      SubstMap inner;
      bool renamed;
      std::string nn;
      std::string x = avoid_capture(t->binder, m, inner, renamed, nn);
      TermPtr r = t->refine;
      if (renamed) r = subst1(r, t->binder, mk_var(x));
      auto r2 = substitute(r, inner);
      if (!renamed && r2 == t->refine) return t;
      return mk_base(x, t->base, r2);
    }
    case TypeKind::Arrow:
    case TypeKind::ExistsTy: {
      SubstMap inner;
      bool renamed;
      std::string nn;
      std::string x = avoid_capture(t->binder, m, inner, renamed, nn);
      TypePtr cod = t->cod;
      if (renamed) cod = subst1(cod, t->binder, mk_var(x));
      auto dom = substitute(t->dom, m);
      auto cod2 = substitute(cod, inner);
      if (!renamed && dom == t->dom && cod2 == t->cod) return t;
      return t->kind == TypeKind::Arrow ? mk_arrow(x, dom, cod2)
                                        : mk_exists_ty(x, dom, cod2);
    }
    case TypeKind::TyVar: {
      SubstMap d = t->delayed;
      for (auto& ent : m) d.push_back(ent);
      return mk_tyvar(t->var, std::move(d));
    }
    case TypeKind::Dynamic:
      return t;
  }
  return t;
}

TermPtr subst1(const TermPtr& e, const std::string& x, const TermPtr& v) {
  return substitute(e, SubstMap{{x, v, nullptr}});
}
TypePtr subst1(const TypePtr& t, const std::string& x, const TermPtr& v,
               TypePtr annot) {
  return substitute(t, SubstMap{{x, v, std::move(annot)}});
}

// ---------------------------------------------------------------------------
// Free variables

static void fv_term(const TermPtr& e, std::set<std::string>& bound,
                    std::set<std::string>& out);
static void fv_type(const TypePtr& t, std::set<std::string>& bound,
                    std::set<std::string>& out);

static void fv_map(const SubstMap& m, std::set<std::string>& bound,
                   std::set<std::string>& out) {
  for (auto& e : m) {
    fv_term(e.value, bound, out);
    if (e.annot) fv_type(e.annot, bound, out);
  }
}

static void fv_term(const TermPtr& e, std::set<std::string>& bound,
                    std::set<std::string>& out) {
  if (!e) return;
  switch (e->kind) {
    case TermKind::Var:
      if (!bound.count(e->name)) out.insert(e->name);
      break;
    case TermKind::Prim:
    case TermKind::IntLit:
      break;
    case TermKind::Ctor:
      for (auto& a : e->args) fv_term(a, bound, out);
      break;
    case TermKind::Lam: {
      fv_type(e->annot, bound, out);
      bool fresh_bind = bound.insert(e->name).second;
      fv_term(e->body, bound, out);
      if (fresh_bind) bound.erase(e->name);
      break;
    }
    case TermKind::App:
      fv_term(e->a, bound, out);
      fv_term(e->b, bound, out);
      break;
    case TermKind::Cast:
      fv_type(e->cast_src, bound, out);
      fv_type(e->cast_tgt, bound, out);
      break;
    case TermKind::Checking:
      fv_type(e->annot, bound, out);
      fv_term(e->a, bound, out);
      fv_term(e->b, bound, out);
      if (e->annot2) fv_type(e->annot2, bound, out);
      break;
    case TermKind::Case:
      fv_term(e->body, bound, out);
      for (auto& br : e->branches) fv_term(br.handler, bound, out);
      break;
    case TermKind::POr:
    case TermKind::PAnd:
      fv_term(e->a, bound, out);
      fv_term(e->b, bound, out);
      break;
    case TermKind::Exists: {
      fv_type(e->annot, bound, out);
      bool fresh_bind = bound.insert(e->name).second;
      fv_term(e->body, bound, out);
      if (fresh_bind) bound.erase(e->name);
      break;
    }
    case TermKind::PredVar:
      // fv(theta . psi) includes fv(rng(theta)); the placeholder itself may
      // range over its environment, which callers account for separately.
      fv_map(e->delayed, bound, out);
      break;
  }
}

static void fv_type(const TypePtr& t, std::set<std::string>& bound,
                    std::set<std::string>& out) {
  if (!t) return;
  switch (t->kind) {
    case TypeKind::Base: {
      bool fresh_bind = bound.insert(t->binder).second;
      fv_term(t->refine, bound, out);
      if (fresh_bind) bound.erase(t->binder);
      break;
    }
    case TypeKind::Arrow:
    case TypeKind::ExistsTy: {
      fv_type(t->dom, bound, out);
      bool fresh_bind = bound.insert(t->binder).second;
      fv_type(t->cod, bound, out);
      if (fresh_bind) bound.erase(t->binder);
      break;
    }
    case TypeKind::TyVar:
      fv_map(t->delayed, bound, out);
      break;
    case TypeKind::Dynamic:
      break;
  }
}

std::set<std::string> free_vars(const TermPtr& e) {
  std::set<std::string> bound, out;
  fv_term(e, bound, out);
  return out;
}
std::set<std::string> free_vars(const TypePtr& t) {
  std::set<std::string> bound, out;
  fv_type(t, bound, out);
  return out;
}

// ---------------------------------------------------------------------------
// Shapes

ShapePtr shape_base(BaseId b) {
  auto s = std::make_shared<Shape>();
  s->kind = Shape::B;
  s->base = b;
  return s;
}
ShapePtr shape_arrow(ShapePtr d, ShapePtr c) {
  auto s = std::make_shared<Shape>();
  s->kind = Shape::Arrow;
  s->dom = std::move(d);
  s->cod = std::move(c);
  return s;
}
ShapePtr shape_dyn() {
  auto s = std::make_shared<Shape>();
  s->kind = Shape::Dyn;
  return s;
}
bool shape_eq(const ShapePtr& a, const ShapePtr& b) {
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case Shape::B: return a->base == b->base;
    case Shape::Arrow:
      return shape_eq(a->dom, b->dom) && shape_eq(a->cod, b->cod);
    case Shape::Dyn: return true;
  }
  return false;
}
std::string shape_str(const ShapePtr& s) {
  switch (s->kind) {
    case Shape::B: return base_name(s->base);
    case Shape::Arrow:
      return "(" + shape_str(s->dom) + " -> " + shape_str(s->cod) + ")";
    case Shape::Dyn: return "Dynamic";
  }
  return "?";
}

ShapePtr shape_of(const TypePtr& t) {
  switch (t->kind) {
    case TypeKind::Base: return shape_base(t->base);
    case TypeKind::Arrow: return shape_arrow(shape_of(t->dom), shape_of(t->cod));
    case TypeKind::ExistsTy: return shape_of(t->cod);
    case TypeKind::TyVar:
      throw ShapeUndefined{"shape of unresolved type variable " + t->var};
    case TypeKind::Dynamic: return shape_dyn();
  }
  throw ShapeUndefined{"malformed type"};
}

// ---------------------------------------------------------------------------
// Canonical de-Bruijn form

namespace {
struct CanonCtx {
  std::vector<std::string> stack;  // innermost binder last

  std::string ref(const std::string& n) const {
    for (size_t i = stack.size(); i-- > 0;)
      if (stack[i] == n) return "%" + std::to_string(stack.size() - 1 - i);
    return "!" + n;  // free variable: keep the name
  }
};

void canon_term(const TermPtr& e, CanonCtx& c, std::ostream& o);
void canon_type(const TypePtr& t, CanonCtx& c, std::ostream& o);

void canon_map(const SubstMap& m, CanonCtx& c, std::ostream& o) {
  o << "[";
  for (auto& e : m) {
    o << e.name << ":=";
    canon_term(e.value, c, o);
    if (e.annot) {
      o << ",";
      canon_type(e.annot, c, o);
    }
    o << ";";
  }
  o << "]";
}

void canon_term(const TermPtr& e, CanonCtx& c, std::ostream& o) {
  switch (e->kind) {
    case TermKind::Var: o << c.ref(e->name); break;
    case TermKind::Prim: o << "#" << e->name; break;
    case TermKind::IntLit: o << e->intval; break;
    case TermKind::Ctor:
      o << "(" << e->name;
      for (auto& a : e->args) {
        o << " ";
        canon_term(a, c, o);
      }
      o << ")";
      break;
    case TermKind::Lam:
      o << "(lam ";
      canon_type(e->annot, c, o);
      o << ".";
      c.stack.push_back(e->name);
      canon_term(e->body, c, o);
      c.stack.pop_back();
      o << ")";
      break;
    case TermKind::App:
      o << "(";
      canon_term(e->a, c, o);
      o << " ";
      canon_term(e->b, c, o);
      o << ")";
      break;
    case TermKind::Cast:
      o << "(cast ";
      canon_type(e->cast_src, c, o);
      o << "=>";
      canon_type(e->cast_tgt, c, o);
      o << ")";
      break;
    case TermKind::Checking:
      o << "(chk ";
      canon_type(e->annot, c, o);
      o << ",";
      canon_term(e->a, c, o);
      o << ",";
      canon_term(e->b, c, o);
      o << ")";
      break;
    case TermKind::Case:
      o << "(case ";
      canon_term(e->body, c, o);
      for (auto& br : e->branches) {
        o << "|" << br.ctor << "=>";
        canon_term(br.handler, c, o);
      }
      o << ")";
      break;
    case TermKind::POr:
      o << "(por ";
      canon_term(e->a, c, o);
      o << " ";
      canon_term(e->b, c, o);
      o << ")";
      break;
    case TermKind::PAnd:
      o << "(pand ";
      canon_term(e->a, c, o);
      o << " ";
      canon_term(e->b, c, o);
      o << ")";
      break;
    case TermKind::Exists:
      o << "(ex ";
      canon_type(e->annot, c, o);
      o << ".";
      c.stack.push_back(e->name);
      canon_term(e->body, c, o);
      c.stack.pop_back();
      o << ")";
      break;
    case TermKind::PredVar:
      o << "(psi " << e->name;
      canon_map(e->delayed, c, o);
      o << ")";
      break;
  }
}

void canon_type(const TypePtr& t, CanonCtx& c, std::ostream& o) {
  switch (t->kind) {
    case TypeKind::Base:
      o << "{" << base_name(t->base) << "|";
      c.stack.push_back(t->binder);
      canon_term(t->refine, c, o);
      c.stack.pop_back();
      o << "}";
      break;
    case TypeKind::Arrow:
    case TypeKind::ExistsTy:
      o << (t->kind == TypeKind::Arrow ? "(pi " : "(sig ");
      canon_type(t->dom, c, o);
      o << ".";
      c.stack.push_back(t->binder);
      canon_type(t->cod, c, o);
      c.stack.pop_back();
      o << ")";
      break;
    case TypeKind::TyVar:
      o << "(alpha " << t->var;
      canon_map(t->delayed, c, o);
      o << ")";
      break;
    case TypeKind::Dynamic:
      o << "Dyn";
      break;
  }
}
}  // namespace

std::string canon(const TermPtr& e) {
  std::ostringstream o;
  CanonCtx c;
  canon_term(e, c, o);
  return o.str();
}
std::string canon(const TypePtr& t) {
  std::ostringstream o;
  CanonCtx c;
  canon_type(t, c, o);
  return o.str();
}
bool alpha_eq(const TermPtr& a, const TermPtr& b) { return canon(a) == canon(b); }
bool alpha_eq(const TypePtr& a, const TypePtr& b) { return canon(a) == canon(b); }

Env restrict_env(const Env& env, const TypePtr& S, const TypePtr& T) {
  std::set<std::string> wanted = free_vars(S);
  for (auto& v : free_vars(T)) wanted.insert(v);
  // Walk bindings from the right, keeping any binding some kept type needs.
  std::vector<std::pair<std::string, TypePtr>> kept;
  for (auto it = env.bindings.rbegin(); it != env.bindings.rend(); ++it) {
    if (wanted.count(it->first)) {
      kept.push_back(*it);
      for (auto& v : free_vars(it->second)) wanted.insert(v);
    }
  }
  Env out;
  for (auto it = kept.rbegin(); it != kept.rend(); ++it) out.push(it->first, it->second);
  return out;
}

std::string canon_key(const Env& env, const TypePtr& S, const TypePtr& T) {
  Env r = restrict_env(env, S, T);
  // Canonicalize binding names along with the types: render the environment
  // as nested arrow binders so de-Bruijn numbering covers it.
  TypePtr acc = mk_arrow("_l", S, T);  // placeholder pairing of S and T
  for (auto it = r.bindings.rbegin(); it != r.bindings.rend(); ++it)
    acc = mk_arrow(it->first, it->second, acc);
  return canon(acc);
}

std::string content_hash(const std::string& s) {
  unsigned long long h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  snprintf(buf, sizeof buf, "%016llx", h);
  return buf;
}

}  // namespace hytc
