// Whole-program type reconstruction.
//
// Omitted types (`?`) become type variables and omitted refinements become
// placeholder predicates.  Reconstruction proceeds in three stages:
//   1. constraint generation: syntax-directed, one fresh type variable per
//      application, subtyping + well-formedness constraints, delayed
//      substitutions on variable occurrences;
//   2. shape reconstruction: a FIFO worklist unifies the simple shapes of
//      the constrained types (with occurs check); every base-shaped type
//      variable becomes {x:B | psi} with a fresh placeholder, unconstrained
//      variables default to Int;
//   3. implication solving: free-variable elimination aligns constraint
//      environments with each placeholder's own environment, delayed
//      substitutions are eliminated into equations, and each placeholder is
//      assigned the parallel disjunction of its lower bounds (its strongest
//      refinement).  Pure-renaming bounds collapse into aliases; a
//      self-referential bound of pure-substitution shape is dropped from
//      the disjunction and re-verified on the solved program; genuinely
//      recursive placeholders are encoded with an executable fix predicate,
//      which the prover treats as opaque, so such programs fall back to
//      hybrid checking casts.
// The remaining ground obligations are checked: a refuted one rejects the
// program, an undecided one is reported and left to hybrid checking.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "hytc/ast.hpp"
#include "hytc/prover.hpp"
#include "hytc/surface.hpp"

namespace hytc {

struct ReconError {
  std::string msg;
};

struct PsiSolution {
  TermPtr predicate;  // the strongest refinement, over env + binder
  std::string binder;
  BaseId base = BaseId::Int;
  Env env;            // the placeholder's own environment (Gamma_psi)
  std::string alias;  // non-empty: solved as another placeholder
};

struct ResidualReport {
  Certainty certainty;
  Env env;
  TermPtr lhs, rhs;
};

struct ReconResult {
  SourceProgram output;  // fully annotated (and simplified) program
  // Shape solutions: type variable -> type whose refinements are still
  // placeholders.
  std::map<std::string, TypePtr> tyvar_shapes;
  std::map<std::string, PsiSolution> psi_solutions;
  std::vector<ResidualReport> residuals;  // post-solution ground obligations
  bool any_maybe = false;  // some residual undecided: hybrid casts will apply
};

ReconResult reconstruct(const SourceProgram& prog,
                        const ProverOptions& popts = {});

// Predicate/type simplification used on reconstruction output: constant
// folding, singleton-existential substitution, true-conjunct removal.
TermPtr simplify_pred(const TermPtr& p);
TypePtr simplify_type(const TypePtr& t);

}  // namespace hytc
