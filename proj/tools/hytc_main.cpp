// Command-line driver: check / run / reconstruct / comp-check / db.
//
// Exit codes: 0 success, 1 run-time cast failure, 2 static rejection,
// 3 usage or I/O error.
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hytc/cexdb.hpp"
#include "hytc/comp.hpp"
#include "hytc/eval.hpp"
#include "hytc/htc.hpp"
#include "hytc/recon.hpp"
#include "hytc/surface.hpp"

using nlohmann::json;
using namespace hytc;

namespace {

struct Opts {
  std::string file;
  std::string db_path;
  std::string emit_smtlib;
  long fuel = 100000;
  bool no_prover = false;
  bool explain = false;
  bool as_json = false;
  bool allow_exists = false;
};

SourceProgram load(const Opts& o) {
  std::ifstream f(o.file);
  if (!f) {
    std::cerr << "cannot open " << o.file << "\n";
    std::exit(3);
  }
  std::stringstream ss;
  ss << f.rdbuf();
  ParseOptions po;
  po.allow_exists = o.allow_exists;
  return parse(ss.str(), po);
}

HtcCtx make_ctx(const Opts& o, CexStore* db) {
  HtcCtx ctx;
  ctx.sub.prover.enabled = !o.no_prover;
  ctx.sub.prover.emit_smtlib_dir = o.emit_smtlib;
  ctx.sub.db = db;
  return ctx;
}

json obligation_json(const Obligation& ob) {
  return {{"env", print(ob.env)},
          {"src", print(ob.src)},
          {"tgt", print(ob.tgt)},
          {"certainty", certainty_name(ob.certainty)},
          {"cast_inserted", ob.cast_inserted}};
}

void print_report(const CompileReport& rep, const Opts& o) {
  if (o.as_json) {
    json j{{"casts_inserted", rep.casts_inserted},
           {"main_type", print(rep.main_ty)},
           {"compiled", print(rep.compiled)}};
    if (o.explain)
      for (const Obligation& ob : rep.obligations)
        j["obligations"].push_back(obligation_json(ob));
    std::cout << j.dump(2) << "\n";
    return;
  }
  int maybes = 0;
  for (const Obligation& ob : rep.obligations)
    if (ob.certainty == Certainty::Maybe) maybes++;
  std::cout << rep.casts_inserted << " casts inserted, " << maybes
            << " undecided of " << rep.obligations.size()
            << " obligations\n";
  std::cout << "main : " << print(rep.main_ty) << "\n";
  if (o.explain)
    for (const Obligation& ob : rep.obligations)
      std::cout << "  [" << certainty_name(ob.certainty) << "] "
                << print(ob.src) << "  <:  " << print(ob.tgt)
                << (ob.cast_inserted ? "   (cast)" : "") << "\n";
}

int reject(const StaticTypeError& e, const Opts& o) {
  if (o.as_json) {
    json j{{"error", "static rejection"}, {"message", e.msg}};
    for (const auto& [k, v] : e.witness) j["witness"][k] = print(v);
    std::cerr << j.dump(2) << "\n";
  } else {
    std::cerr << "static rejection: " << e.msg << "\n";
    for (const auto& [k, v] : e.witness)
      std::cerr << "  witness " << k << " = " << print(v) << "\n";
  }
  return 2;
}

int cmd_check(const Opts& o) {
  CexStore db(default_db_path(o.db_path));
  SourceProgram p = load(o);
  HtcCtx ctx = make_ctx(o, &db);
  try {
    CompileReport rep = compile(p, ctx);
    print_report(rep, o);
    return 0;
  } catch (const StaticTypeError& e) {
    return reject(e, o);
  }
}

int cmd_run(const Opts& o) {
  CexStore db(default_db_path(o.db_path));
  SourceProgram p = load(o);
  HtcCtx ctx = make_ctx(o, &db);
  CompileReport rep;
  try {
    rep = compile(p, ctx);
  } catch (const StaticTypeError& e) {
    return reject(e, o);
  }
  EvalResult r = evaluate(rep.compiled.as_term(), o.fuel);
  switch (r.status) {
    case EvalResult::Value:
      std::cout << print(r.value) << "\n";
      return 0;
    case EvalResult::FailedCast: {
      std::cerr << "run-time cast failure: " << print(r.fail.subject)
                << " is not a " << print(r.fail.target) << "\n";
      TypePtr src = r.fail.source ? r.fail.source : mk_dynamic();
      if (db.record_cex(Env{}, src, r.fail.target, r.fail.subject, p.id())) {
        std::cerr << "recorded counterexample in " << db.path() << "\n";
        if (const CexEntry* e = db.refuted(Env{}, src, r.fail.target))
          for (const std::string& pid : db.affected_programs(e->key))
            std::cerr << "affected program: " << pid << "\n";
      }
      return 1;
    }
    case EvalResult::OutOfFuel:
      std::cerr << "out of fuel after " << r.steps << " steps\n";
      return 1;
    case EvalResult::Error:
      std::cerr << "evaluation error: " << r.error << "\n";
      return 1;
  }
  return 3;
}

int cmd_reconstruct(const Opts& o) {
  SourceProgram p = load(o);
  ProverOptions popts;
  popts.enabled = !o.no_prover;
  popts.emit_smtlib_dir = o.emit_smtlib;
  try {
    ReconResult r = reconstruct(p, popts);
    if (o.as_json) {
      json j{{"program", print(r.output)},
             {"residual_maybes", r.residuals.size()}};
      for (const auto& [psi, sol] : r.psi_solutions)
        j["strongest_refinements"][psi] = print(sol.predicate);
      std::cout << j.dump(2) << "\n";
    } else {
      std::cout << print(r.output);
      if (o.explain) {
        for (const auto& [psi, sol] : r.psi_solutions)
          std::cout << "-- SR(" << psi << ") [" << sol.binder << ":"
                    << base_name(sol.base) << "] = " << print(sol.predicate)
                    << (sol.alias.empty() ? "" : "   (alias of " + sol.alias +
                                                     ")")
                    << "\n";
        for (const ResidualReport& rr : r.residuals)
          std::cout << "-- residual " << certainty_name(rr.certainty) << ": "
                    << print(rr.lhs) << "  =/=>  " << print(rr.rhs) << "\n";
      }
    }
    return 0;
  } catch (const ReconError& e) {
    std::cerr << "reconstruction rejected the program: " << e.msg << "\n";
    return 2;
  }
}

int cmd_comp(const Opts& o) {
  CexStore db(default_db_path(o.db_path));
  SourceProgram p = load(o);
  SubCtx sc;
  sc.prover.enabled = !o.no_prover;
  sc.prover.emit_smtlib_dir = o.emit_smtlib;
  sc.db = &db;
  CompReport rep = comp_check(p, sc);
  std::cout << comp_verdict_name(rep.verdict) << ": " << rep.yes << " yes, "
            << rep.maybe << " maybe, " << rep.no << " no"
            << (rep.in_fragment ? "" : " (outside the restricted fragment)")
            << "\n";
  if (!rep.note.empty()) std::cout << rep.note << "\n";
  if (o.explain)
    for (const CompObligation& ob : rep.obligations)
      std::cout << "  [" << certainty_name(ob.certainty) << "] "
                << print(ob.lhs) << "  <:  " << print(ob.rhs) << "\n";
  switch (rep.verdict) {
    case CompVerdict::Accept:
      std::cout << "main : " << print(rep.main_ty) << "\n";
      return 0;
    case CompVerdict::Reject:
      for (const auto& [k, v] : rep.witness)
        std::cerr << "  witness " << k << " = " << print(v) << "\n";
      return 2;
    case CompVerdict::Fallback: {
      std::cout << "falling back to hybrid checking\n";
      HtcCtx ctx = make_ctx(o, &db);
      try {
        CompileReport crep = compile(p, ctx);
        print_report(crep, o);
        return 0;
      } catch (const StaticTypeError& e) {
        return reject(e, o);
      }
    }
  }
  return 3;
}

int cmd_db(const Opts& o, const std::string& action) {
  CexStore db(default_db_path(o.db_path));
  if (action == "list") {
    for (const auto& [key, e] : db.counterexamples())
      std::cout << "cex " << print(e.src) << "  =/=>  " << print(e.tgt)
                << "   witness " << print(e.witness) << "   (from "
                << e.program_id << ")\n";
    for (const MaybeEntry& m : db.maybes())
      std::cout << "maybe " << m.key << "   (program " << m.program_id
                << ")\n";
    return 0;
  }
  // validate: the constructor already replays every entry; report results.
  int ok = 0;
  for (const auto& [key, e] : db.counterexamples())
    if (CexStore::replay(e.src, e.tgt, e.witness)) ok++;
  std::cout << ok << " of " << db.counterexamples().size()
            << " witnesses replay; " << db.dropped_on_load()
            << " entries dropped on load\n";
  return ok == static_cast<int>(db.counterexamples().size()) ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hytc: executable refinement types, checked statically where "
               "possible and dynamically where necessary"};
  app.require_subcommand(1);
  Opts o;
  app.add_option("--db", o.db_path, "counterexample database path");
  app.add_option("--fuel", o.fuel, "evaluation step budget");
  app.add_flag("--no-prover", o.no_prover, "treat every obligation as Maybe");
  app.add_option("--emit-smtlib", o.emit_smtlib,
                 "dump prover queries as SMT-LIB 2 into this directory");
  app.add_flag("--explain", o.explain, "print every obligation");
  app.add_flag("--json", o.as_json, "machine-readable output");
  app.add_flag("--allow-exists", o.allow_exists,
               "accept existential types in annotations");

  auto* check = app.add_subcommand("check", "type-check a program");
  check->add_option("file", o.file)->required();
  auto* run = app.add_subcommand("run", "check, then evaluate");
  run->add_option("file", o.file)->required();
  auto* rec = app.add_subcommand("reconstruct",
                                 "fill in omitted types and refinements");
  rec->add_option("file", o.file)->required();
  auto* comp = app.add_subcommand("comp-check", "compositional checking");
  comp->add_option("file", o.file)->required();
  auto* dbc = app.add_subcommand("db", "inspect the counterexample database");
  std::string db_action;
  dbc->add_option("action", db_action, "list | validate")
      ->check(CLI::IsMember({"list", "validate"}))
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 3;
  }

  try {
    if (check->parsed()) return cmd_check(o);
    if (run->parsed()) return cmd_run(o);
    if (rec->parsed()) return cmd_reconstruct(o);
    if (comp->parsed()) return cmd_comp(o);
    if (dbc->parsed()) return cmd_db(o, db_action);
  } catch (const ParseError& e) {
    std::cerr << o.file << ":" << e.line << ":" << e.col << ": " << e.msg
              << "\n";
    return 3;
  } catch (const UnknownIdentifier& e) {
    std::cerr << "unknown identifier: " << e.name << "\n";
    return 3;
  }
  return 3;
}
