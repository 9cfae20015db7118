// Small-step call-by-value evaluator with runtime contract checking.
//
// Casts into base types unfold to an in-progress check <<T, p[x:=k], k>>
// whose residual predicate is evaluated; a residual value other than `true`
// raises a cast failure carrying the target type, the originating source
// type and the offending value.  Casts between function types distribute
// over application; casts into Dynamic are erased.  Parallel boolean
// connectives alternate fairly between their sides, so `true || loop`
// converges regardless of the divergent operand's position.
#pragma once

#include <string>

#include "hytc/ast.hpp"

namespace hytc {

struct FailedCastInfo {
  TypePtr target;   // the type the value failed to satisfy
  TypePtr source;   // the source side of the originating cast (may be null)
  TermPtr subject;  // the offending value
};

struct StepOut {
  enum Kind { Value, Stepped, Failed, Error } kind;
  TermPtr term;         // Stepped: the successor; Value: the input
  FailedCastInfo fail;  // Failed
  std::string error;    // Error: stuck term, existential at runtime, ...
};

bool is_value(const TermPtr& e);
StepOut step(const TermPtr& e);

struct EvalResult {
  enum Status { Value, FailedCast, OutOfFuel, Error } status;
  TermPtr value;  // Value: the result; OutOfFuel: the last term reached
  FailedCastInfo fail;
  std::string error;
  long steps = 0;
};

EvalResult evaluate(const TermPtr& e, long fuel = 100000);

// Structural equality of values (used by delta for `=` and by witness
// validation).
bool value_eq(const TermPtr& a, const TermPtr& b);

}  // namespace hytc
