// Acceptance suite: one pass/fail line per criterion.
//
// Usage: acceptance CORPUS_DIR [CLI_BINARY]
//
//   1. serializer triptych: verified / cast-and-run / rejected, under 1s
//   2. reconstruction running example, SR equivalent to n > 0, under 1s
//   3. cast insertion is idempotent across the corpus
//   4. 200 fuzzed well-typed programs, checked without the prover, never
//      fail an inserted cast on 10 random inputs each
//   5. bst/arith/mergesort: 0 undecided with the prover, >0 without, <5s
//   6. one-shot failures: run exits 1, recheck exits 2, db validate replays
//   7. 1000 fuzzed linear obligations vs brute force over [-8,8]
//   8. compositional checking: bst decided Yes/No only and accepted,
//      mutant rejected with a replayable witness
//   9. parallel-or converges on true in at most 4 steps, either side
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hytc/cexdb.hpp"
#include "hytc/comp.hpp"
#include "hytc/eval.hpp"
#include "hytc/htc.hpp"
#include "hytc/prover.hpp"
#include "hytc/recon.hpp"
#include "hytc/surface.hpp"

using namespace hytc;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_corpus;
std::string g_cli;
int g_failures = 0;

void report(int n, const std::string& what, bool ok,
            const std::string& detail = "") {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << n << ": " << what;
  if (!detail.empty()) std::cout << " [" << detail << "]";
  std::cout << std::endl;
  if (!ok) g_failures++;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    std::cerr << "cannot open " << path << "\n";
    std::exit(3);
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

SourceProgram load(const std::string& name) {
  return parse(slurp(g_corpus + "/" + name));
}

CompileReport compile_prog(const SourceProgram& p, bool prover = true) {
  HtcCtx ctx;
  ctx.sub.prover.enabled = prover;
  ctx.program_id = p.id();
  return compile(p, ctx);
}

double secs_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt_secs(double s) {
  char buf[32];
  snprintf(buf, sizeof buf, "%.2fs", s);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. The serializer triptych.

void criterion1() {
  auto t0 = Clock::now();
  std::vector<std::string> problems;
  try {
    CompileReport nm = compile_prog(load("serialize_matrix_nm.lh"));
    if (nm.casts_inserted != 0)
      problems.push_back("n*m result inserted casts");
  } catch (const StaticTypeError&) {
    problems.push_back("n*m result rejected");
  }
  try {
    CompileReport mn = compile_prog(load("serialize_matrix_mn.lh"));
    if (mn.casts_inserted < 1)
      problems.push_back("m*n result inserted no cast");
    // The program applies the serializer at (n,m) = (5,1) and (2,3); the
    // inserted cast must not fail on either.
    EvalResult r = evaluate(mn.compiled.as_term());
    if (r.status != EvalResult::Value)
      problems.push_back("m*n result did not run to a value");
  } catch (const StaticTypeError&) {
    problems.push_back("m*n result rejected");
  }
  try {
    compile_prog(load("serialize_matrix_mm.lh"));
    problems.push_back("m*m result accepted");
  } catch (const StaticTypeError& e) {
    if (e.witness.empty()) problems.push_back("m*m rejection has no witness");
  }
  double dt = secs_since(t0);
  if (dt >= 1.0) problems.push_back("took " + fmt_secs(dt));
  report(1, "serializer triptych: verified / cast-and-run / rejected",
         problems.empty(),
         problems.empty() ? fmt_secs(dt) : problems.front());
}

// ---------------------------------------------------------------------------
// 2. The reconstruction running example.

void criterion2() {
  auto t0 = Clock::now();
  std::string detail;
  bool ok = false;
  try {
    ReconResult r = reconstruct(load("recon_id.lh"));
    // The identity's inferred refinement must be provably equivalent to
    // n > 0, in both directions.
    for (const auto& [psi, sol] : r.psi_solutions) {
      if (!sol.alias.empty()) continue;
      Env env = sol.env;
      env.push(sol.binder, mk_base_raw(sol.base));
      TermPtr target = mk_lt(mk_int(0), mk_var(sol.binder));
      if (implies(env, sol.predicate, target).certainty == Certainty::Yes &&
          implies(env, target, sol.predicate).certainty == Certainty::Yes) {
        ok = true;
        break;
      }
    }
    if (!ok) detail = "no solution equivalent to n > 0";
    for (const Binding& b : r.output.bindings)
      if (!b.annot || contains_tyvar(b.annot)) {
        ok = false;
        detail = "unsolved annotation in output";
      }
  } catch (const ReconError& e) {
    detail = "rejected: " + e.msg;
  }
  double dt = secs_since(t0);
  if (dt >= 1.0) {
    ok = false;
    detail = "took " + fmt_secs(dt);
  }
  report(2, "reconstruction solves the identity to the positives", ok,
         ok ? fmt_secs(dt) : detail);
}

// ---------------------------------------------------------------------------
// 3. Idempotence across the corpus.

void criterion3() {
  const char* files[] = {"arith.lh",
                         "bst.lh",
                         "dynamic_bad.lh",
                         "gcd.lh",
                         "mergesort.lh",
                         "serialize_matrix_mn.lh",
                         "serialize_matrix_nm.lh"};
  bool ok = true;
  std::string detail;
  for (const char* f : files) {
    CompileReport r1 = compile_prog(load(f));
    HtcCtx ctx2;
    ctx2.program_id = r1.compiled.id();
    CompileReport r2 = compile(r1.compiled, ctx2);
    if (r2.casts_inserted != 0) {
      ok = false;
      detail = std::string(f) + " gained " +
               std::to_string(r2.casts_inserted) + " casts on recompile";
      break;
    }
  }
  report(3, "recompiling compiled output inserts zero casts", ok, detail);
}

// ---------------------------------------------------------------------------
// 4. Fuzzed well-typed programs: inserted casts never fail.
//
// Generator: chains of unary integer functions whose annotations state the
// exact linear fact the body computes (y = a*x + c), plus conditionals
// annotated with sound bounds.  Every program is semantically well typed,
// so however many casts a prover-less compile inserts, none may fail.

void criterion4() {
  std::mt19937 rng(20260826);
  auto rint = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  auto num = [](int v) {
    return v < 0 ? "(0 - " + std::to_string(-v) + ")" : std::to_string(v);
  };
  bool ok = true;
  std::string detail;
  for (int trial = 0; trial < 200 && ok; trial++) {
    int nfun = rint(1, 3);
    std::ostringstream prog;
    for (int i = 0; i < nfun; i++) {
      int a = rint(-2, 2), c = rint(-8, 8);
      switch (rint(0, 2)) {
        case 0:
          // Exact affine annotation.
          prog << "let f" << i << " : x:Int -> {y:Int | y = " << num(a)
               << " * x + " << num(c) << "} = fun (x:Int) => " << num(a)
               << " * x + " << num(c) << " in\n";
          break;
        case 1:
          // A conditional with a sound disjunctive bound.
          prog << "let f" << i << " : x:Int -> {y:Int | y = x || y = "
               << num(c) << "} = fun (x:Int) => if x < " << num(c) << " then "
               << num(c) << " else x in\n";
          break;
        default:
          // A weak annotation over a precise body.
          prog << "let f" << i << " : x:Int -> Int = fun (x:Int) => x + "
               << num(c) << " in\n";
          break;
      }
    }
    prog << "fun (n:Int) => ";
    int napp = rint(1, 4);
    for (int k = 0; k < napp; k++) prog << "f" << rint(0, nfun - 1) << " (";
    prog << "n";
    for (int k = 0; k < napp; k++) prog << ")";

    SourceProgram p;
    CompileReport rep;
    try {
      p = parse(prog.str());
      rep = compile_prog(p, /*prover=*/false);
    } catch (const StaticTypeError& e) {
      ok = false;
      detail = "trial " + std::to_string(trial) + " rejected: " + e.msg;
      break;
    } catch (const ParseError& e) {
      ok = false;
      detail = "trial " + std::to_string(trial) + " unparseable at line " +
               std::to_string(e.line) + ": " + e.msg + " in: " + prog.str();
      break;
    }
    TermPtr fn = rep.compiled.as_term();
    for (int j = 0; j < 10; j++) {
      TermPtr call = mk_app(fn, mk_int(rint(-100, 100)));
      EvalResult r = evaluate(call);
      if (r.status == EvalResult::FailedCast) {
        ok = false;
        detail = "trial " + std::to_string(trial) + " failed a cast on " +
                 print(r.fail.subject);
        break;
      }
      if (r.status != EvalResult::Value) {
        ok = false;
        detail = "trial " + std::to_string(trial) + " did not evaluate";
        break;
      }
    }
  }
  report(4, "200 fuzzed well-typed programs never fail an inserted cast", ok,
         detail);
}

// ---------------------------------------------------------------------------
// 5. Prover-on vs prover-off on the verified corpus programs.

void criterion5() {
  bool ok = true;
  std::string detail;
  for (const char* f : {"bst.lh", "arith.lh", "mergesort.lh"}) {
    auto t0 = Clock::now();
    SourceProgram p = load(f);
    CompileReport with = compile_prog(p, /*prover=*/true);
    int maybes_with = 0;
    for (const Obligation& o : with.obligations)
      if (o.certainty == Certainty::Maybe) maybes_with++;
    CompileReport without = compile_prog(p, /*prover=*/false);
    int maybes_without = 0;
    for (const Obligation& o : without.obligations)
      if (o.certainty == Certainty::Maybe) maybes_without++;
    double dt = secs_since(t0);
    if (maybes_with != 0 || with.casts_inserted != 0) {
      ok = false;
      detail = std::string(f) + " undecided with the prover";
    } else if (maybes_without == 0) {
      ok = false;
      detail = std::string(f) + " needed no prover at all";
    } else if (dt >= 5.0) {
      ok = false;
      detail = std::string(f) + " took " + fmt_secs(dt);
    }
  }
  report(5, "corpus fully decided with the prover, undecided without", ok,
         detail);
}

// ---------------------------------------------------------------------------
// 6. The one-shot failure workflow, end to end through the CLI.

void criterion6() {
  if (g_cli.empty()) {
    report(6, "one-shot failure workflow", false, "no CLI binary supplied");
    return;
  }
  std::string db = "acceptance_db.jsonl";
  std::remove(db.c_str());
  std::string file = g_corpus + "/dynamic_bad.lh";
  auto run = [&](const std::string& args) {
    int st = std::system(
        (g_cli + " --db " + db + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  };
  bool ok = true;
  std::string detail;
  int e1 = run("run " + file);
  if (e1 != 1) {
    ok = false;
    detail = "run exited " + std::to_string(e1) + ", expected 1";
  }
  int e2 = run("check " + file);
  if (ok && e2 != 2) {
    ok = false;
    detail = "recheck exited " + std::to_string(e2) + ", expected 2";
  }
  int e3 = run("db validate");
  if (ok && e3 != 0) {
    ok = false;
    detail = "db validate exited " + std::to_string(e3);
  }
  if (ok) {
    CexStore store(db);
    if (store.counterexamples().size() != 1 || store.dropped_on_load() != 0) {
      ok = false;
      detail = "database does not hold exactly the recorded failure";
    }
  }
  std::remove(db.c_str());
  report(6, "one-shot failure: run exits 1, recheck exits 2, db replays", ok,
         detail);
}

// ---------------------------------------------------------------------------
// 7. Fuzzed linear obligations vs brute force.

struct LinAtom {
  int coef[3] = {0, 0, 0};
  int k = 0;
  int op = 0;  // 0: <, 1: <=, 2: =
  bool holds(const int* v, int nv) const {
    long s = 0;
    for (int i = 0; i < nv; i++) s += static_cast<long>(coef[i]) * v[i];
    return op == 0 ? s < k : op == 1 ? s <= k : s == k;
  }
  std::string render(int nv) const {
    static const char* names[3] = {"a", "b", "c"};
    std::ostringstream os;
    bool first = true;
    for (int i = 0; i < nv; i++) {
      if (coef[i] == 0) continue;
      if (!first) os << " + ";
      if (coef[i] < 0)
        os << "(0 - " << -coef[i] << ")";
      else
        os << coef[i];
      os << " * " << names[i];
      first = false;
    }
    if (first) os << "0";
    os << (op == 0 ? " < " : op == 1 ? " <= " : " = ");
    if (k < 0)
      os << "(0 - " << -k << ")";
    else
      os << k;
    return os.str();
  }
};

void criterion7() {
  std::mt19937 rng(424242);
  auto rint = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  int yes = 0, no = 0, maybe = 0;
  bool ok = true;
  std::string detail;
  for (int trial = 0; trial < 1000 && ok; trial++) {
    int nv = rint(1, 3);
    auto atom = [&]() {
      LinAtom a;
      for (int i = 0; i < nv; i++) a.coef[i] = rint(-3, 3);
      a.k = rint(-8, 8);
      a.op = rint(0, 2);
      return a;
    };
    std::vector<LinAtom> hyp;
    int nh = rint(1, 2);
    for (int i = 0; i < nh; i++) hyp.push_back(atom());
    LinAtom concl = atom();

    Env env;
    static const char* names[3] = {"a", "b", "c"};
    for (int i = 0; i < nv; i++) env.push(names[i], mk_base_raw(BaseId::Int));
    TermPtr p = parse_term(hyp[0].render(nv));
    for (int i = 1; i < nh; i++)
      p = mk_and(p, parse_term(hyp[i].render(nv)));
    TermPtr q = parse_term(concl.render(nv));

    ProverResult r = implies(env, p, q);

    // Brute force over [-8,8]^nv.
    bool refutable = false;
    int v[3] = {0, 0, 0};
    for (v[0] = -8; v[0] <= 8 && !refutable; v[0]++)
      for (v[1] = -8; v[1] <= (nv > 1 ? 8 : -8) && !refutable; v[1]++)
        for (v[2] = -8; v[2] <= (nv > 2 ? 8 : -8) && !refutable; v[2]++) {
          bool h = true;
          for (const LinAtom& a : hyp) h = h && a.holds(v, nv);
          if (h && !concl.holds(v, nv)) refutable = true;
        }

    switch (r.certainty) {
      case Certainty::Yes:
        yes++;
        if (refutable) {
          ok = false;
          detail = "Yes contradicted by brute force on trial " +
                   std::to_string(trial);
        }
        break;
      case Certainty::No:
        no++;
        // A closed obligation refutes with an empty assignment; what matters
        // is that the assignment replays.
        if (!validate_witness(env, p, q, r.witness)) {
          ok = false;
          detail = "No without a replayable witness on trial " +
                   std::to_string(trial);
        }
        break;
      case Certainty::Maybe:
        maybe++;
        break;
    }
  }
  std::ostringstream d;
  d << yes << " yes, " << no << " no, " << maybe
    << " maybe (rate " << (maybe / 10.0) << "%)";
  report(7, "1000 fuzzed linear obligations agree with brute force", ok,
         ok ? d.str() : detail);
}

// ---------------------------------------------------------------------------
// 8. Compositional checking of the search tree and its mutant.

void criterion8() {
  bool ok = true;
  std::string detail;
  CompReport good = comp_check(load("bst.lh"));
  if (good.verdict != CompVerdict::Accept) {
    ok = false;
    detail = "bst not accepted";
  } else if (good.maybe != 0) {
    ok = false;
    detail = "bst had undecided obligations";
  }
  for (const CompObligation& o : good.obligations)
    if (o.certainty == Certainty::Maybe) {
      ok = false;
      detail = "an obligation was Maybe";
    }
  if (ok) {
    CompReport bad = comp_check(load("bst_mutant.lh"));
    if (bad.verdict != CompVerdict::Reject) {
      ok = false;
      detail = "mutant not rejected";
    } else if (bad.witness.empty()) {
      ok = false;
      detail = "rejection carries no witness";
    } else {
      for (const auto& [n, v] : bad.witness)
        if (!v || evaluate(v).status != EvalResult::Value) {
          ok = false;
          detail = "witness value for " + n + " does not evaluate";
        }
    }
  }
  report(8, "compositional: bst decided Yes/No and accepted, mutant refuted",
         ok, detail);
}

// ---------------------------------------------------------------------------
// 9. Fair parallel disjunction.

void criterion9() {
  TypePtr fty =
      mk_arrow("x", mk_base_raw(BaseId::Int), mk_base_raw(BaseId::Bool));
  TermPtr loop = mk_app(
      mk_app(mk_prim("fix"),
             mk_lam("f", fty,
                    mk_lam("x", mk_base_raw(BaseId::Int),
                           mk_app(mk_var("f"), mk_var("x"))))),
      mk_int(0));
  EvalResult l = evaluate(mk_por(mk_true(), loop), 16);
  EvalResult r = evaluate(mk_por(loop, mk_true()), 16);
  bool ok = l.status == EvalResult::Value && is_true(l.value) &&
            l.steps <= 4 && r.status == EvalResult::Value &&
            is_true(r.value) && r.steps <= 4;
  report(9, "true-or-loop converges within 4 steps on either side", ok,
         "steps: " + std::to_string(l.steps) + " and " +
             std::to_string(r.steps));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance CORPUS_DIR [CLI_BINARY]\n";
    return 3;
  }
  g_corpus = argv[1];
  if (argc > 2) g_cli = argv[2];
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  if (g_failures) {
    std::cout << g_failures << " criteria failed" << std::endl;
    return 1;
  }
  std::cout << "all 9 criteria passed" << std::endl;
  return 0;
}
