// Compositional algorithmic checking with self types and covariant
// existentials.
//
// Instead of substituting argument terms into dependent codomains, an
// application f e of f : (x:R -> E1) is typed as the existential package
// exists x:E2. E1, where E2 is the synthesized type of the argument.  The
// type of a superterm therefore depends only on the *types* of its
// subterms, never their syntax.  Variables are typed by self(T, x), which
// strengthens T with the variable's identity, so exact facts like
// x - x = 0 remain derivable from types alone.
//
// Existentials are generated only in positive positions, and annotations
// are required to be existential-free, so subtyping queries always have
// the asymmetric form E <: R: existentials on the left peel into the
// environment and witnesses never need to be guessed.  When every
// refinement involved stays inside the restricted predicate fragment
// (decidable atoms, conjunction, case splits on variables), every query is
// decided Yes or No — never Maybe — and the verdict is:
//
//   Accept    all obligations proved (the program needs no casts),
//   Reject    the program is fully in-fragment and some obligation is
//             refuted with a validated counterexample,
//   Fallback  anything else; the caller should run the hybrid checker.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "hytc/ast.hpp"
#include "hytc/subtyping.hpp"
#include "hytc/surface.hpp"

namespace hytc {

enum class CompVerdict { Accept, Reject, Fallback };

const char* comp_verdict_name(CompVerdict v);

struct CompObligation {
  Env env;
  TypePtr lhs;  // synthesized augmented type (may contain existentials)
  TypePtr rhs;  // restricted annotation (existential-free)
  Certainty certainty;
  std::map<std::string, TermPtr> witness;  // validated, when certainty == No
};

struct CompReport {
  CompVerdict verdict = CompVerdict::Fallback;
  TypePtr main_ty;  // augmented type of the program body, when typing ran
  std::vector<CompObligation> obligations;
  int yes = 0, maybe = 0, no = 0;
  bool in_fragment = true;  // every annotation stayed in the fragment
  std::string note;         // reason for Fallback, or the refuted obligation
  std::map<std::string, TermPtr> witness;  // replayable witness on Reject
};

// self(T, e): the type T strengthened with the identity of e.
//   base        {y:B|p}      ->  {y:B | p && y = e}
//   arrow       x:S -> T     ->  x:S -> self(T, e x)
//   existential exists z:S.U ->  exists z:S. self(U, e)
TypePtr selfify(const TypePtr& T, const TermPtr& e);

// Restricted predicate fragment: decidable atoms (linear integer
// comparisons over variables, constants, measures, min/max), conjunction,
// and case splits on variables.
bool in_fragment_pred(const TermPtr& p);
bool in_fragment_type(const TypePtr& t);

// Raised by atype/asubtype for programs outside the compositional shape
// (unannotated parameters, non-variable scrutinees, casts, ...); comp_check
// converts it into a Fallback verdict.
struct CompFallback {
  std::string msg;
};

struct CompCtx {
  SubCtx sub;  // error_on_right_exists is forced on
  std::vector<CompObligation> obligations;
  bool in_fragment = true;
};

// Synthesizes the augmented type of e; throws CompFallback.
TypePtr atype(const Env& env, const TermPtr& e, CompCtx& ctx);

// Records and returns the obligation E <: R (R must be existential-free).
Certainty asubtype(const Env& env, const TypePtr& E, const TypePtr& R,
                   CompCtx& ctx);

CompReport comp_check(const SourceProgram& prog, const SubCtx& sub = {});

}  // namespace hytc
