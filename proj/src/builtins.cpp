#include "hytc/builtins.hpp"

#include <map>

namespace hytc {

const Int kBstMaxInt = 1000000;
const Int kBstMinInt = -1000000;

static TermPtr v(const char* n) { return mk_var(n); }
static TermPtr p2(const char* op, TermPtr a, TermPtr b) {
  return mk_app2(mk_prim(op), std::move(a), std::move(b));
}
static TermPtr p1(const char* op, TermPtr a) {
  return mk_app(mk_prim(op), std::move(a));
}

// x:Int -> y:Int -> {z:Int | z = x OP y}
static TypePtr binop_ty(const char* op) {
  auto cod = mk_base("z", BaseId::Int, mk_eq(v("z"), p2(op, v("x"), v("y"))));
  return mk_arrow("x", mk_base_raw(BaseId::Int),
                  mk_arrow("y", mk_base_raw(BaseId::Int), cod));
}

// x:Int -> y:Int -> {b:Bool | b = (x OP y)}
static TypePtr cmp_ty(const char* op) {
  auto cod = mk_base("b", BaseId::Bool, mk_eq(v("b"), p2(op, v("x"), v("y"))));
  return mk_arrow("x", mk_base_raw(BaseId::Int),
                  mk_arrow("y", mk_base_raw(BaseId::Int), cod));
}

static TypePtr measure_ty(const char* op, BaseId dom) {
  auto cod = mk_base("n", BaseId::Int, mk_eq(v("n"), p1(op, v("t"))));
  return mk_arrow("t", mk_base_raw(dom), cod);
}

static const std::map<std::string, PrimInfo>& prim_table() {
  static const std::map<std::string, PrimInfo> table = [] {
    std::map<std::string, PrimInfo> m;
    auto add = [&](const char* n, int a, TypePtr t) {
      m[n] = PrimInfo{n, a, std::move(t)};
    };
    add("+", 2, binop_ty("+"));
    add("-", 2, binop_ty("-"));
    add("*", 2, binop_ty("*"));
    add("mod", 2, binop_ty("mod"));
    add("min", 2, binop_ty("min"));
    add("max", 2, binop_ty("max"));
    add("=", 2, ty_eq(BaseId::Int));
    add("<", 2, cmp_ty("<"));
    add("<=", 2, cmp_ty("<="));
    {
      auto cod = mk_base("c", BaseId::Bool, mk_eq(v("c"), p1("not", v("b"))));
      add("not", 1, mk_arrow("b", mk_base_raw(BaseId::Bool), cod));
    }
    add("length", 1, measure_ty("length", BaseId::IntList));
    add("lower", 1, measure_ty("lower", BaseId::BST));
    add("upper", 1, measure_ty("upper", BaseId::BST));
    // fix f x --> f (fix f) x; its type (T->T)->T is handled specially by
    // the checkers, so no type is stored here.
    add("fix", 2, nullptr);
    return m;
  }();
  return table;
}

static const std::map<std::string, CtorInfo>& ctor_table() {
  static const std::map<std::string, CtorInfo> table = [] {
    std::map<std::string, CtorInfo> m;
    m["true"] = {"true", BaseId::Bool, {}, "b", mk_eq(v("b"), mk_true())};
    m["false"] = {"false", BaseId::Bool, {}, "b", mk_eq(v("b"), mk_false())};
    m["unit"] = {"unit", BaseId::Unit, {}, "u", mk_true()};
    m["nil"] = {"nil", BaseId::IntList, {}, "l",
                mk_eq(p1("length", v("l")), mk_int(0))};
    m["cons"] = {"cons",
                 BaseId::IntList,
                 {{"h", mk_base_raw(BaseId::Int)},
                  {"t", mk_base_raw(BaseId::IntList)}},
                 "l",
                 mk_eq(p1("length", v("l")),
                       p2("+", p1("length", v("t")), mk_int(1)))};
    m["empty"] = {"empty", BaseId::BST, {},
                  "x",
                  mk_and(mk_eq(p1("lower", v("x")), mk_int(kBstMaxInt)),
                         mk_eq(p1("upper", v("x")), mk_int(kBstMinInt)))};
    m["node"] = {"node",
                 BaseId::BST,
                 {{"v", mk_base_raw(BaseId::Int)},
                  {"l", mk_base("x", BaseId::BST,
                                mk_lt(p1("upper", v("x")), v("v")))},
                  {"r", mk_base("y", BaseId::BST,
                                mk_lt(v("v"), p1("lower", v("y"))))}},
                 "z",
                 mk_and(mk_eq(p1("lower", v("z")),
                              p2("min", v("v"), p1("lower", v("l")))),
                        mk_eq(p1("upper", v("z")),
                              p2("max", v("v"), p1("upper", v("r")))))};
    return m;
  }();
  return table;
}

const PrimInfo* prim_info(const std::string& name) {
  auto& t = prim_table();
  auto it = t.find(name);
  return it == t.end() ? nullptr : &it->second;
}
const CtorInfo* ctor_info(const std::string& name) {
  auto& t = ctor_table();
  auto it = t.find(name);
  return it == t.end() ? nullptr : &it->second;
}
int prim_arity(const std::string& name) {
  auto* p = prim_info(name);
  return p ? p->arity : -1;
}

TypePtr ty_int(const Int& n) {
  return mk_base("m", BaseId::Int, mk_eq(v("m"), mk_int(n)));
}

TypePtr ty_eq(BaseId b) {
  auto cod = mk_base("b", BaseId::Bool, mk_eq(v("b"), p2("=", v("x"), v("y"))));
  return mk_arrow("x", mk_base_raw(b), mk_arrow("y", mk_base_raw(b), cod));
}

TypePtr ty_ctor(const std::string& name) {
  const CtorInfo* c = ctor_info(name);
  if (!c) return nullptr;
  TypePtr t = mk_base(c->result_binder, c->result_base, c->result_refine);
  for (auto it = c->args.rbegin(); it != c->args.rend(); ++it)
    t = mk_arrow(it->first, it->second, t);
  return t;
}

const std::vector<std::string>& ctors_of_base(BaseId b) {
  static const std::vector<std::string> bools = {"true", "false"};
  static const std::vector<std::string> units = {"unit"};
  static const std::vector<std::string> lists = {"nil", "cons"};
  static const std::vector<std::string> trees = {"empty", "node"};
  static const std::vector<std::string> none = {};
  switch (b) {
    case BaseId::Bool: return bools;
    case BaseId::Unit: return units;
    case BaseId::IntList: return lists;
    case BaseId::BST: return trees;
    case BaseId::Int: return none;
  }
  return none;
}

}  // namespace hytc
