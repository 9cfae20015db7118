#include "hytc/surface.hpp"

#include <cctype>
#include <functional>
#include <sstream>

#include "hytc/builtins.hpp"

namespace hytc {

namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { Int, Ident, Sym, Eof };

struct Token {
  Tok kind;
  std::string text;
  Int value;
  int line = 1, col = 1;
};

const char* kSymbols[] = {"==>", "=>", "->", "<=", ">=", "&&", "||",
                          "(",  ")",  "{",  "}",  "<",  ">",  "=",
                          "|",  ":",  ".",  ",",  "+",  "-",  "*",  "?"};

std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  size_t i = 0;
  int line = 1, col = 1;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (src[i + k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    i += n;
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '-' && i + 1 < src.size() && src[i + 1] == '-') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      t.kind = Tok::Int;
      t.text = src.substr(i, j - i);
      t.value = Int(t.text);
      advance(j - i);
      out.push_back(t);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      // '%' appears in generated fresh names; accepting it keeps printed
      // programs re-parseable.
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) ||
                                src[j] == '_' || src[j] == '\'' || src[j] == '%'))
        ++j;
      t.kind = Tok::Ident;
      t.text = src.substr(i, j - i);
      advance(j - i);
      out.push_back(t);
      continue;
    }
    bool matched = false;
    for (const char* s : kSymbols) {
      size_t n = std::char_traits<char>::length(s);
      if (src.compare(i, n, s) == 0) {
        t.kind = Tok::Sym;
        t.text = s;
        advance(n);
        out.push_back(t);
        matched = true;
        break;
      }
    }
    if (!matched)
      throw ParseError{line, col, std::string("unexpected character '") + c + "'"};
  }
  Token eof;
  eof.kind = Tok::Eof;
  eof.line = line;
  eof.col = col;
  out.push_back(eof);
  return out;
}

bool is_reserved(const std::string& s) {
  static const std::set<std::string> kw = {
      "let",  "in",   "fun",    "case",  "of",     "if",    "then", "else",
      "exists", "mod", "Dynamic", "Bool", "Int",   "Unit",  "IntList", "BST"};
  return kw.count(s) > 0;
}

// ---------------------------------------------------------------------------
// Parser

class Parser {
 public:
  Parser(const std::string& src, const ParseOptions& opts)
      : toks_(lex(src)), opts_(opts) {}

  SourceProgram parse_program() {
    SourceProgram p;
    while (at_ident("let")) {
      // Greedily treat the top-level let chain as named bindings; the final
      // term after the last `in` is the program body.
      size_t save = pos_;
      next();
      Binding b;
      b.name = expect_name();
      if (accept_sym(":")) b.annot = parse_type();
      if (!accept_sym("=")) {
        pos_ = save;  // not actually a binding form; parse as a term
        break;
      }
      b.term = parse_term();
      expect_ident("in");
      p.bindings.push_back(std::move(b));
    }
    p.main = at_eof() ? mk_ctor("unit") : parse_term();
    expect_eof();
    return p;
  }

  TermPtr parse_term() {
    if (at_ident("fun")) return parse_fun();
    if (at_ident("if")) return parse_if();
    if (at_ident("case")) return parse_case();
    if (at_ident("let")) return parse_let();
    if (at_ident("exists")) return parse_exists_term();
    return parse_imp();
  }

  TypePtr parse_type() {
    // Dependent arrow: NAME ":" type "->" type.
    if (cur().kind == Tok::Ident && !is_reserved(cur().text) &&
        peek_sym(1, ":")) {
      std::string x = expect_name();
      expect_sym(":");
      TypePtr dom = parse_type_atom();
      expect_sym("->");
      return mk_arrow(x, dom, parse_type());
    }
    TypePtr t = parse_type_atom();
    if (accept_sym("->")) return mk_arrow(fresh("_"), t, parse_type());
    return t;
  }

  void expect_eof() {
    if (!at_eof()) err("unexpected trailing input '" + cur().text + "'");
  }

 private:
  std::vector<Token> toks_;
  size_t pos_ = 0;
  ParseOptions opts_;

  const Token& cur() const { return toks_[pos_]; }
  bool at_eof() const { return cur().kind == Tok::Eof; }
  void next() { ++pos_; }
  [[noreturn]] void err(const std::string& m) const {
    throw ParseError{cur().line, cur().col, m};
  }
  bool at_ident(const std::string& s) const {
    return cur().kind == Tok::Ident && cur().text == s;
  }
  bool at_sym(const std::string& s) const {
    return cur().kind == Tok::Sym && cur().text == s;
  }
  bool peek_sym(size_t n, const std::string& s) const {
    return pos_ + n < toks_.size() && toks_[pos_ + n].kind == Tok::Sym &&
           toks_[pos_ + n].text == s;
  }
  bool accept_sym(const std::string& s) {
    if (!at_sym(s)) return false;
    next();
    return true;
  }
  void expect_sym(const std::string& s) {
    if (!accept_sym(s)) err("expected '" + s + "'");
  }
  void expect_ident(const std::string& s) {
    if (!at_ident(s)) err("expected '" + s + "'");
    next();
  }
  std::string expect_name() {
    if (cur().kind != Tok::Ident || is_reserved(cur().text))
      err("expected an identifier");
    std::string n = cur().text;
    next();
    return n;
  }

  // --- term forms ---------------------------------------------------------

  TermPtr parse_fun() {
    expect_ident("fun");
    expect_sym("(");
    std::string x = expect_name();
    expect_sym(":");
    TypePtr t = parse_type();
    expect_sym(")");
    expect_sym("=>");
    return mk_lam(x, t, parse_term());
  }

  TermPtr parse_if() {
    expect_ident("if");
    TermPtr c = parse_term();
    expect_ident("then");
    TermPtr t1 = parse_term();
    expect_ident("else");
    TermPtr t2 = parse_term();
    // if-then-else is a Bool case; the handlers bind only the scrutinee-self.
    std::vector<CaseBranch> bs;
    bs.push_back({"true", mk_lam(fresh("s"), mk_base_raw(BaseId::Bool), t1)});
    bs.push_back({"false", mk_lam(fresh("s"), mk_base_raw(BaseId::Bool), t2)});
    return mk_case(c, std::move(bs));
  }

  TermPtr parse_case() {
    expect_ident("case");
    TermPtr scrut = parse_term();
    expect_ident("of");
    std::vector<CaseBranch> bs;
    do {
      std::string cname = expect_name();
      const CtorInfo* ci = ctor_info(cname);
      if (!ci) err("'" + cname + "' is not a constructor");
      std::vector<std::string> names;
      if (accept_sym("(")) {
        if (!at_sym(")")) {
          names.push_back(expect_name());
          while (accept_sym(",")) names.push_back(expect_name());
        }
        expect_sym(")");
      }
      size_t arity = ci->args.size();
      if (names.size() != arity && names.size() != arity + 1)
        err("pattern for '" + cname + "' needs " + std::to_string(arity) +
            " or " + std::to_string(arity + 1) + " names");
      if (names.size() == arity) names.push_back(fresh("s"));
      expect_sym("=>");
      TermPtr body = parse_term();
      // Build the handler lambda chain: one binder per constructor argument
      // (telescope types instantiated with the pattern names), then the
      // scrutinee-self binder at the constructor's result base.
      TermPtr h = mk_lam(names[arity], mk_base_raw(ci->result_base), body);
      SubstMap inst;
      for (size_t k = 0; k < arity; ++k)
        inst.push_back({ci->args[k].first, mk_var(names[k]), nullptr});
      for (size_t k = arity; k-- > 0;) {
        SubstMap pre(inst.begin(), inst.begin() + k);
        h = mk_lam(names[k], substitute(ci->args[k].second, pre), h);
      }
      bs.push_back({cname, h});
    } while (accept_sym("|"));
    return mk_case(scrut, std::move(bs));
  }

  TermPtr parse_let() {
    expect_ident("let");
    std::string x = expect_name();
    TypePtr t = accept_sym(":") ? parse_type() : mk_tyvar(fresh("a"));
    expect_sym("=");
    TermPtr d = parse_term();
    expect_ident("in");
    TermPtr e = parse_term();
    return mk_app(mk_lam(x, t, e), d);
  }

  TermPtr parse_exists_term() {
    if (!opts_.allow_exists) err("'exists' requires --allow-exists");
    expect_ident("exists");
    std::string x = expect_name();
    expect_sym(":");
    TypePtr t = parse_type();
    expect_sym(".");
    return mk_exists(x, t, parse_term());
  }

  // --- operator levels ----------------------------------------------------

  TermPtr parse_imp() {
    TermPtr l = parse_or();
    if (accept_sym("==>"))
      return mk_por(mk_app(mk_prim("not"), l), parse_imp());
    return l;
  }

  TermPtr parse_or() {
    TermPtr l = parse_and();
    if (accept_sym("||")) return mk_por(l, parse_or());
    return l;
  }

  TermPtr parse_and() {
    TermPtr l = parse_cmp();
    if (accept_sym("&&")) return mk_pand(l, parse_and());
    return l;
  }

  TermPtr parse_cmp() {
    TermPtr l = parse_add();
    if (accept_sym("=")) return mk_eq(l, parse_add());
    if (accept_sym("<")) return mk_lt(l, parse_add());
    if (accept_sym("<=")) return mk_le(l, parse_add());
    if (accept_sym(">")) return mk_lt(parse_add(), l);
    if (accept_sym(">=")) return mk_le(parse_add(), l);
    return l;
  }

  TermPtr parse_add() {
    TermPtr l;
    if (accept_sym("-")) {
      TermPtr r = parse_mul();
      l = (r->kind == TermKind::IntLit)
              ? mk_int(-r->intval)
              : mk_app2(mk_prim("-"), mk_int(0), r);
    } else {
      l = parse_mul();
    }
    for (;;) {
      if (accept_sym("+"))
        l = mk_app2(mk_prim("+"), l, parse_mul());
      else if (accept_sym("-"))
        l = mk_app2(mk_prim("-"), l, parse_mul());
      else
        return l;
    }
  }

  TermPtr parse_mul() {
    TermPtr l = parse_app();
    for (;;) {
      if (accept_sym("*"))
        l = mk_app2(mk_prim("*"), l, parse_app());
      else if (at_ident("mod")) {
        next();
        l = mk_app2(mk_prim("mod"), l, parse_app());
      } else
        return l;
    }
  }

  bool at_atom_start() const {
    if (cur().kind == Tok::Int) return true;
    // "<" is deliberately absent: after the head of an application chain it
    // reads as the comparison operator, so argument-position casts need
    // parentheses.
    if (at_sym("(")) return true;
    if (cur().kind == Tok::Ident && !is_reserved(cur().text)) return true;
    return false;
  }

  TermPtr parse_app() {
    TermPtr f = parse_atom();
    while (at_atom_start()) f = mk_app(f, parse_atom());
    return f;
  }

  TermPtr parse_atom() {
    if (cur().kind == Tok::Int) {
      Int v = cur().value;
      next();
      return mk_int(v);
    }
    if (accept_sym("(")) {
      TermPtr e = parse_term();
      expect_sym(")");
      return e;
    }
    if (at_sym("<")) {  // cast value: <S => T>
      next();
      TypePtr s = parse_type();
      expect_sym("=>");
      TypePtr t = parse_type();
      expect_sym(">");
      return mk_cast(s, t);
    }
    if (cur().kind == Tok::Ident && !is_reserved(cur().text)) {
      std::string n = expect_name();
      if (const CtorInfo* ci = ctor_info(n)) {
        std::vector<TermPtr> args;
        if (at_sym("(")) {  // saturated constructor call c(e1,..,en)
          next();
          if (!at_sym(")")) {
            args.push_back(parse_term());
            while (accept_sym(",")) args.push_back(parse_term());
          }
          expect_sym(")");
          if (args.size() != ci->args.size())
            err("constructor '" + n + "' takes " +
                std::to_string(ci->args.size()) + " arguments");
        }
        return mk_ctor(n, std::move(args));
      }
      if (prim_info(n)) return mk_prim(n);
      return mk_var(n);
    }
    err("expected an expression, found '" + cur().text + "'");
  }

  // --- types --------------------------------------------------------------

  TypePtr parse_type_atom() {
    if (accept_sym("?")) return mk_tyvar(fresh("a"));
    if (accept_sym("(")) {
      TypePtr t = parse_type();
      expect_sym(")");
      return t;
    }
    if (accept_sym("{")) {
      std::string x = expect_name();
      expect_sym(":");
      BaseId b = expect_base();
      expect_sym("|");
      TermPtr p = parse_term();
      expect_sym("}");
      return mk_base(x, b, p);
    }
    if (at_ident("exists")) {
      if (!opts_.allow_exists) err("'exists' requires --allow-exists");
      next();
      std::string x = expect_name();
      expect_sym(":");
      TypePtr w = parse_type();
      expect_sym(".");
      return mk_exists_ty(x, w, parse_type());
    }
    if (at_ident("Dynamic")) {
      next();
      return mk_dynamic();
    }
    if (cur().kind == Tok::Ident) {
      if (auto b = base_from_name(cur().text)) {
        next();
        return mk_base_raw(*b);
      }
    }
    err("expected a type, found '" + cur().text + "'");
  }

  BaseId expect_base() {
    if (cur().kind == Tok::Ident)
      if (auto b = base_from_name(cur().text)) {
        next();
        return *b;
      }
    err("expected a base type name");
  }
};

// ---------------------------------------------------------------------------
// Printer

// Precedence levels, loosest to tightest; mirror the parser.
enum Prec {
  kTerm = 0,  // fun / if / case / let / exists
  kImp,
  kOr,
  kAnd,
  kCmp,
  kAdd,
  kMul,
  kApp,
  kAtom
};

void print_term(std::ostream& os, const TermPtr& e, int prec);
void print_type(std::ostream& os, const TypePtr& t, bool atom);

void paren(std::ostream& os, bool need, const std::function<void()>& f) {
  if (need) os << "(";
  f();
  if (need) os << ")";
}

// Matches App(App(Prim op, a), b) for the infix operators.
const char* infix_op(const TermPtr& e, TermPtr& a, TermPtr& b) {
  if (e->kind != TermKind::App || e->a->kind != TermKind::App) return nullptr;
  const TermPtr& f = e->a->a;
  if (f->kind != TermKind::Prim) return nullptr;
  static const std::set<std::string> ops = {"+", "-", "*", "mod",
                                            "=", "<", "<="};
  if (!ops.count(f->name)) return nullptr;
  a = e->a->b;
  b = e->b;
  return f->name.c_str();
}

// Matches the let-redex App(Lam(x,T,body), d).
bool is_let_redex(const TermPtr& e) {
  return e->kind == TermKind::App && e->a->kind == TermKind::Lam;
}

bool is_bare_tyvar(const TypePtr& t) {
  return t->kind == TypeKind::TyVar && t->delayed.empty();
}

void print_term(std::ostream& os, const TermPtr& e, int prec) {
  switch (e->kind) {
    case TermKind::Var:
    case TermKind::Prim:
      os << e->name;
      return;
    case TermKind::IntLit:
      if (e->intval < 0 && prec > kAdd) {
        os << "(" << e->intval << ")";
      } else {
        os << e->intval;
      }
      return;
    case TermKind::Ctor:
      os << e->name;
      if (!e->args.empty()) {
        os << "(";
        for (size_t i = 0; i < e->args.size(); ++i) {
          if (i) os << ", ";
          print_term(os, e->args[i], kTerm);
        }
        os << ")";
      }
      return;
    case TermKind::Lam:
      paren(os, prec > kTerm, [&] {
        os << "fun (" << e->name << " : ";
        print_type(os, e->annot, false);
        os << ") => ";
        print_term(os, e->body, kTerm);
      });
      return;
    case TermKind::App: {
      TermPtr a, b;
      if (const char* op = infix_op(e, a, b)) {
        bool cmp = std::string(op) == "=" || std::string(op) == "<" ||
                   std::string(op) == "<=";
        int lvl = cmp ? kCmp : (std::string(op) == "+" || std::string(op) == "-"
                                    ? kAdd
                                    : kMul);
        paren(os, prec > lvl, [&] {
          print_term(os, a, cmp ? lvl + 1 : lvl);
          os << " " << op << " ";
          print_term(os, b, lvl + 1);
        });
        return;
      }
      if (is_let_redex(e)) {
        const TermPtr& lam = e->a;
        paren(os, prec > kTerm, [&] {
          os << "let " << lam->name;
          if (!is_bare_tyvar(lam->annot)) {
            os << " : ";
            print_type(os, lam->annot, false);
          }
          os << " = ";
          print_term(os, e->b, kTerm);
          os << " in\n";
          print_term(os, lam->body, kTerm);
        });
        return;
      }
      paren(os, prec > kApp, [&] {
        print_term(os, e->a, kApp);
        os << " ";
        print_term(os, e->b, kAtom);
      });
      return;
    }
    case TermKind::Cast:
      os << "<";
      print_type(os, e->cast_src, false);
      os << " => ";
      print_type(os, e->cast_tgt, false);
      os << ">";
      return;
    case TermKind::Checking:
      os << "<<";
      print_type(os, e->annot, false);
      os << ", ";
      print_term(os, e->a, kTerm);
      os << ", ";
      print_term(os, e->b, kTerm);
      os << ">>";
      return;
    case TermKind::Case:
      // An if-desugaring prints back as if/then/else when the self binders
      // are unused.
      if (e->branches.size() == 2 && e->branches[0].ctor == "true" &&
          e->branches[1].ctor == "false" &&
          e->branches[0].handler->kind == TermKind::Lam &&
          e->branches[1].handler->kind == TermKind::Lam &&
          !free_vars(e->branches[0].handler->body)
               .count(e->branches[0].handler->name) &&
          !free_vars(e->branches[1].handler->body)
               .count(e->branches[1].handler->name)) {
        paren(os, prec > kTerm, [&] {
          os << "if ";
          print_term(os, e->body, kTerm);
          os << " then ";
          print_term(os, e->branches[0].handler->body, kTerm);
          os << " else ";
          print_term(os, e->branches[1].handler->body, kTerm);
        });
        return;
      }
      paren(os, prec > kTerm, [&] {
        os << "case ";
        print_term(os, e->body, kTerm);
        os << " of ";
        for (size_t i = 0; i < e->branches.size(); ++i) {
          if (i) os << " | ";
          const CaseBranch& br = e->branches[i];
          os << br.ctor << "(";
          TermPtr h = br.handler;
          bool first = true;
          while (h->kind == TermKind::Lam) {
            if (!first) os << ", ";
            os << h->name;
            first = false;
            h = h->body;
          }
          os << ") => ";
          print_term(os, h, kTerm);
        }
      });
      return;
    case TermKind::POr:
      paren(os, prec > kOr, [&] {
        print_term(os, e->a, kOr + 1);
        os << " || ";
        print_term(os, e->b, kOr);
      });
      return;
    case TermKind::PAnd:
      paren(os, prec > kAnd, [&] {
        print_term(os, e->a, kAnd + 1);
        os << " && ";
        print_term(os, e->b, kAnd);
      });
      return;
    case TermKind::Exists:
      paren(os, prec > kTerm, [&] {
        os << "exists " << e->name << " : ";
        print_type(os, e->annot, false);
        os << ". ";
        print_term(os, e->body, kTerm);
      });
      return;
    case TermKind::PredVar:
      os << e->name;
      for (const SubstEntry& s : e->delayed) {
        os << "[" << s.name << " := ";
        print_term(os, s.value, kTerm);
        os << "]";
      }
      return;
  }
}

void print_type(std::ostream& os, const TypePtr& t, bool atom) {
  switch (t->kind) {
    case TypeKind::Base:
      if (is_true(t->refine)) {
        os << base_name(t->base);
      } else {
        os << "{" << t->binder << " : " << base_name(t->base) << " | ";
        print_term(os, t->refine, kTerm);
        os << "}";
      }
      return;
    case TypeKind::Arrow: {
      if (atom) os << "(";
      bool dep = free_vars(t->cod).count(t->binder) > 0;
      if (dep) os << t->binder << " : ";
      print_type(os, t->dom, true);
      os << " -> ";
      print_type(os, t->cod, false);
      if (atom) os << ")";
      return;
    }
    case TypeKind::ExistsTy:
      if (atom) os << "(";
      os << "exists " << t->binder << " : ";
      print_type(os, t->dom, true);
      os << ". ";
      print_type(os, t->cod, false);
      if (atom) os << ")";
      return;
    case TypeKind::TyVar:
      os << "?";
      for (const SubstEntry& s : t->delayed) {
        os << "[" << s.name << " := ";
        print_term(os, s.value, kTerm);
        os << "]";
      }
      return;
    case TypeKind::Dynamic:
      os << "Dynamic";
      return;
  }
}

}  // namespace

TermPtr SourceProgram::as_term() const {
  TermPtr t = main;
  for (auto it = bindings.rbegin(); it != bindings.rend(); ++it) {
    TypePtr annot = it->annot ? it->annot : mk_tyvar(fresh("a"));
    t = mk_app(mk_lam(it->name, annot, t), it->term);
  }
  return t;
}

std::string SourceProgram::id() const { return content_hash(canon(as_term())); }

SourceProgram parse(const std::string& text, const ParseOptions& opts) {
  Parser p(text, opts);
  SourceProgram prog = p.parse_program();
  for (const std::string& v : free_vars(prog.as_term()))
    throw UnknownIdentifier{v};
  return prog;
}

TermPtr parse_term(const std::string& text, const ParseOptions& opts) {
  Parser p(text, opts);
  TermPtr t = p.parse_term();
  p.expect_eof();
  return t;
}

TypePtr parse_type(const std::string& text, const ParseOptions& opts) {
  Parser p(text, opts);
  TypePtr t = p.parse_type();
  p.expect_eof();
  return t;
}

std::string print(const TermPtr& e) {
  std::ostringstream os;
  print_term(os, e, kTerm);
  return os.str();
}

std::string print(const TypePtr& t) {
  std::ostringstream os;
  print_type(os, t, false);
  return os.str();
}

std::string print(const SourceProgram& p) {
  std::ostringstream os;
  for (const Binding& b : p.bindings) {
    os << "let " << b.name;
    if (b.annot) {
      os << " : ";
      print_type(os, b.annot, false);
    }
    os << " = ";
    print_term(os, b.term, kTerm);
    os << " in\n";
  }
  print_term(os, p.main, kTerm);
  os << "\n";
  return os.str();
}

std::string print(const Env& env) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [n, t] : env.bindings) {
    if (!first) os << ", ";
    first = false;
    os << n << " : ";
    print_type(os, t, false);
  }
  return os.str();
}

}  // namespace hytc
