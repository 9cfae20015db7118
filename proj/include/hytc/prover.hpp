// Three-valued validity checking of refinement implications.
//
//   implies(env, p, q)  decides  "for all well-typed env, p implies q"
//
// with answers Yes (proved), No (refuted, with a concrete counterexample
// validated by evaluation), or Maybe.  The decidable fragment covers linear
// integer arithmetic with booleans and the structural measures length /
// lower / upper treated as uninterpreted terms, plus min/max by case
// splitting; it is decided by DNF conversion and Fourier-Motzkin elimination
// with integer tightening.  Everything else (non-linear multiplication, mod,
// applications of unknown functions, Dynamic-typed data) is abstracted: it
// can never cause a refutation on its own, only a Maybe.  Refutations are
// found by a bounded concrete search and replayed through the evaluator
// before being reported, so a No is always accompanied by a genuine witness.
#pragma once

#include <map>
#include <string>

#include "hytc/ast.hpp"

namespace hytc {

enum class Certainty { No, Maybe, Yes };

const char* certainty_name(Certainty c);

// Lattice meet under the ordering No < Maybe < Yes.
Certainty meet(Certainty a, Certainty b);

struct ProverOptions {
  bool enabled = true;           // false: every non-trivial query is Maybe
  std::string emit_smtlib_dir;   // when set, dump each query as SMT-LIB 2
  long fold_fuel = 64;           // evaluation budget for constant folding
  int max_disjuncts = 512;       // DNF size cap before giving up with Maybe
  long witness_budget = 50000;   // candidate assignments tried per query
};

struct ProverResult {
  Certainty certainty = Certainty::Maybe;
  // For No: an assignment of the free variables, validated by evaluation
  // (p holds, q fails).
  std::map<std::string, TermPtr> witness;
};

ProverResult implies(const Env& env, const TermPtr& p, const TermPtr& q,
                     const ProverOptions& opts = {});

// Bounded constant folding used for normalization and the reflexivity fast
// path; exposed for tests.
TermPtr fold_constants(const TermPtr& e, long fuel = 64);

// Replays a candidate witness: true iff every hypothesis evaluates to true
// and the conclusion evaluates to false under the assignment.
bool validate_witness(const Env& env, const TermPtr& p, const TermPtr& q,
                      const std::map<std::string, TermPtr>& witness);

}  // namespace hytc
