// Built-in primitive functions and data constructors, with their (exact)
// refinement types.  The precision of checking is driven entirely by these
// types; the checker itself performs no abstraction.
#pragma once

#include "hytc/ast.hpp"

namespace hytc {

// Sentinels returned by lower/upper on the empty search tree.
extern const Int kBstMaxInt;  //  1000000
extern const Int kBstMinInt;  // -1000000

struct PrimInfo {
  std::string name;
  int arity;
  TypePtr ty;  // null for `fix`, whose type is indexed and handled specially
};

struct CtorInfo {
  std::string name;
  BaseId result_base;
  // Dependent argument telescope: (binder, type); later types may mention
  // earlier binders.
  std::vector<std::pair<std::string, TypePtr>> args;
  // Refinement of the result {y:B | p}, where p may mention the binders.
  std::string result_binder;
  TermPtr result_refine;
};

const PrimInfo* prim_info(const std::string& name);
const CtorInfo* ctor_info(const std::string& name);
int prim_arity(const std::string& name);

// Exact type of an integer literal: {m:Int | m = n}.
TypePtr ty_int(const Int& n);
// Polymorphic equality instance at base B: x:B -> y:B -> {b:Bool | b = (x = y)}.
TypePtr ty_eq(BaseId b);
// Full curried refinement type of a constructor.
TypePtr ty_ctor(const std::string& name);
// Constructors of a base type; empty for Int (case over Int is rejected)
// and Dynamic.
const std::vector<std::string>& ctors_of_base(BaseId b);

}  // namespace hytc
