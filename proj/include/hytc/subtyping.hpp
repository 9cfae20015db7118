// Three-valued subtyping over refinement types.
//
// Base types reduce to a refinement implication decided by the prover;
// arrows are contravariant/covariant with the certainty lattice meet;
// Dynamic accepts everything (Yes) and promises nothing (Maybe).  A stored
// counterexample for the (restricted-environment, S, T) key refutes the
// query before any structural reasoning.
#pragma once

#include <map>

#include "hytc/ast.hpp"
#include "hytc/cexdb.hpp"
#include "hytc/prover.hpp"

namespace hytc {

struct ExistentialOnRight {
  TypePtr ty;
};

struct SubCtx {
  ProverOptions prover;
  CexStore* db = nullptr;
  // The compositional checker insists on left-peeling only; an existential
  // on the right is then a structural error rather than a Maybe.
  bool error_on_right_exists = false;
};

struct SubResult {
  Certainty certainty = Certainty::Maybe;
  // On a refutation of a base-type query: the prover's validated assignment.
  std::map<std::string, TermPtr> witness;
};

SubResult subtype(const Env& env, const TypePtr& S, const TypePtr& T,
                  const SubCtx& ctx);

}  // namespace hytc
