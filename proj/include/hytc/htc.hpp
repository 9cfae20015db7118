// Hybrid type checking: bidirectional type checking with three-valued
// subtyping and cast insertion.
//
// Every flow of a value from type S into a context expecting T consults
// subtyping: Yes passes the value through unchanged, No rejects the program
// statically (with a validated counterexample when the prover found one),
// and Maybe inserts the runtime cast <S => T> and registers the undecided
// obligation with the counterexample database.  The compiled program is a
// term of the same language and compiling it again inserts no further casts.
#pragma once

#include <string>
#include <vector>

#include "hytc/ast.hpp"
#include "hytc/subtyping.hpp"
#include "hytc/surface.hpp"

namespace hytc {

struct StaticTypeError {
  std::string msg;
  Env env;
  TypePtr src, tgt;  // the offending flow, when applicable
  std::map<std::string, TermPtr> witness;
};

struct Obligation {
  Env env;
  TypePtr src, tgt;
  Certainty certainty;
  bool cast_inserted;
};

struct HtcCtx {
  SubCtx sub;
  std::string program_id;
  std::vector<Obligation> obligations;
};

struct CompileReport {
  SourceProgram compiled;
  TypePtr main_ty;
  std::vector<Obligation> obligations;
  int casts_inserted = 0;
};

// Whole-program compilation; throws StaticTypeError on a No.
CompileReport compile(const SourceProgram& prog, HtcCtx& ctx);

// Term-level entry points (used by reconstruction and the compositional
// checker's fallback).
TermPtr synthesize(const Env& env, const TermPtr& e, HtcCtx& ctx, TypePtr& ty);
TermPtr check_against(const Env& env, const TermPtr& e, const TypePtr& T,
                      HtcCtx& ctx);

// Deep search for unsolved type variables / refinement placeholders.
bool contains_tyvar(const TypePtr& t);

}  // namespace hytc
