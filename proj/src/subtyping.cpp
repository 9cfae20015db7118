#include "hytc/subtyping.hpp"

namespace hytc {

SubResult subtype(const Env& env, const TypePtr& S, const TypePtr& T,
                  const SubCtx& ctx) {
  if (alpha_eq(S, T)) return {Certainty::Yes, {}};
  if (ctx.db)
    if (ctx.db->refuted(env, S, T)) return {Certainty::No, {}};
  if (T->kind == TypeKind::Dynamic) return {Certainty::Yes, {}};
  if (S->kind == TypeKind::Dynamic) return {Certainty::Maybe, {}};
  if (S->kind == TypeKind::TyVar || T->kind == TypeKind::TyVar)
    return {Certainty::Maybe, {}};  // unsolved; reconstruction's business
  if (S->kind == TypeKind::ExistsTy) {
    // Peel the witness binder into the environment.
    std::string w = fresh(S->binder);
    Env e2 = env;
    e2.push(w, S->dom);
    return subtype(e2, subst1(S->cod, S->binder, mk_var(w)), T, ctx);
  }
  if (T->kind == TypeKind::ExistsTy) {
    if (ctx.error_on_right_exists) throw ExistentialOnRight{T};
    return {Certainty::Maybe, {}};
  }
  if (S->kind == TypeKind::Base && T->kind == TypeKind::Base) {
    if (S->base != T->base) return {Certainty::No, {}};
    std::string z = fresh(S->binder);
    Env e2 = env;
    e2.push(z, mk_base_raw(S->base));
    ProverResult r = implies(e2, subst1(S->refine, S->binder, mk_var(z)),
                             subst1(T->refine, T->binder, mk_var(z)),
                             ctx.prover);
    return {r.certainty, std::move(r.witness)};
  }
  if (S->kind == TypeKind::Arrow && T->kind == TypeKind::Arrow) {
    SubResult dom = subtype(env, T->dom, S->dom, ctx);
    if (dom.certainty == Certainty::No) return dom;
    std::string x = fresh(T->binder);
    Env e2 = env;
    e2.push(x, T->dom);
    SubResult cod = subtype(e2, subst1(S->cod, S->binder, mk_var(x)),
                            subst1(T->cod, T->binder, mk_var(x)), ctx);
    SubResult out;
    out.certainty = meet(dom.certainty, cod.certainty);
    out.witness = cod.certainty <= dom.certainty ? std::move(cod.witness)
                                                 : std::move(dom.witness);
    return out;
  }
  return {Certainty::No, {}};  // base vs arrow shape clash
}

}  // namespace hytc
