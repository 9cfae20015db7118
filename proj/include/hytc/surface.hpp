// Concrete syntax for `.lh` programs: a recursive-descent parser and a
// deterministic printer.
//
// Grammar sketch (see README for the full table):
//   program  ::= ("let" NAME [":" type] "=" term "in")* term
//   term     ::= "fun" "(" NAME ":" type ")" "=>" term
//              | "if" term "then" term "else" term
//              | "case" term "of" pat "=>" term ("|" pat "=>" term)*
//              | "let" NAME [":" type] "=" term "in" term
//              | "exists" NAME ":" type "." term
//              | infix/application chains over atoms
//   atom     ::= INT | NAME | NAME "(" terms ")" | "(" term ")"
//              | "<" type "=>" type ">"            (a cast value)
//   type     ::= NAME ":" type "->" type | type "->" type | "{" NAME ":" BASE "|" term "}"
//              | BASE | "Dynamic" | "?" | "exists" NAME ":" type "." type
//
// `let x : T = d in e` desugars to `(fun (x:T) => e) d`.  `if` desugars to a
// Bool case.  `a > b` and `a >= b` are sugar for the flipped `<`/`<=`.
// `p ==> q` (implication) desugars to `not p || q`.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hytc/ast.hpp"

namespace hytc {

struct ParseError {
  int line = 0, col = 0;
  std::string msg;
};
struct UnknownIdentifier {
  std::string name;
};

struct Binding {
  std::string name;
  TypePtr annot;  // null when omitted
  TermPtr term;
};

struct SourceProgram {
  std::vector<Binding> bindings;
  TermPtr main;  // never null; a bare `unit` when the file is bindings only

  // The whole program as a single term: bindings become let-redexes.
  TermPtr as_term() const;
  std::string id() const;  // content hash of the canonical form
};

struct ParseOptions {
  bool allow_exists = false;  // `exists` in types (outputs of recon/comp)
};

SourceProgram parse(const std::string& text, const ParseOptions& opts = {});
TermPtr parse_term(const std::string& text, const ParseOptions& opts = {});
TypePtr parse_type(const std::string& text, const ParseOptions& opts = {});

std::string print(const TermPtr& e);
std::string print(const TypePtr& t);
std::string print(const SourceProgram& p);
std::string print(const Env& env);

}  // namespace hytc
