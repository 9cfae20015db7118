#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "hytc/cexdb.hpp"
#include "hytc/surface.hpp"

using namespace hytc;

namespace {
struct TempDb {
  std::string path;
  explicit TempDb(const std::string& p) : path(p) { std::remove(p.c_str()); }
  ~TempDb() { std::remove(path.c_str()); }
};
}  // namespace

TEST_CASE("default path resolution: flag, then env, then local file") {
  CHECK(default_db_path("explicit.jsonl") == "explicit.jsonl");
  setenv("HYTC_DB", "from_env.jsonl", 1);
  CHECK(default_db_path() == "from_env.jsonl");
  unsetenv("HYTC_DB");
  CHECK(default_db_path() == ".hytc-db.jsonl");
}

TEST_CASE("recording a genuine failure persists and refutes") {
  TempDb t("cexdb_test1.jsonl");
  TypePtr s = mk_base_raw(BaseId::Int);
  TypePtr tt = parse_type("{x:Int | 0 < x}");
  {
    CexStore db(t.path);
    CHECK(db.record_cex(Env{}, s, tt, mk_int(0), "p1"));
    CHECK(db.refuted(Env{}, s, tt) != nullptr);
    CHECK(db.counterexamples().size() == 1);
  }
  // Durable across reopen; nothing dropped on revalidation.
  CexStore db2(t.path);
  CHECK(db2.dropped_on_load() == 0);
  const CexEntry* e = db2.refuted(Env{}, s, tt);
  REQUIRE(e != nullptr);
  CHECK(alpha_eq(e->witness, mk_int(0)));
  CHECK(e->program_id == "p1");
}

TEST_CASE("a witness that passes the cast is rejected outright") {
  TempDb t("cexdb_test2.jsonl");
  CexStore db(t.path);
  TypePtr s = mk_base_raw(BaseId::Int);
  TypePtr tt = parse_type("{x:Int | 0 < x}");
  CHECK_FALSE(db.record_cex(Env{}, s, tt, mk_int(5), "p1"));
  CHECK(db.counterexamples().empty());
  CHECK(db.refuted(Env{}, s, tt) == nullptr);
}

TEST_CASE("duplicate keys keep the earliest witness") {
  TempDb t("cexdb_test3.jsonl");
  CexStore db(t.path);
  TypePtr s = mk_base_raw(BaseId::Int);
  TypePtr tt = parse_type("{x:Int | 0 < x}");
  REQUIRE(db.record_cex(Env{}, s, tt, mk_int(0), "p1"));
  REQUIRE(db.record_cex(Env{}, s, tt, mk_int(-7), "p2"));
  CHECK(db.counterexamples().size() == 1);
  CHECK(alpha_eq(db.refuted(Env{}, s, tt)->witness, mk_int(0)));
}

TEST_CASE("queries are alpha invariant but environment sensitive") {
  TempDb t("cexdb_test4.jsonl");
  CexStore db(t.path);
  TypePtr s = parse_type("{x:Int | 0 <= x}");
  TypePtr tt = parse_type("{x:Int | 0 < x}");
  REQUIRE(db.record_cex(Env{}, s, tt, mk_int(0), "p1"));

  // Alpha-renamed binders inside the types: same key.
  CHECK(db.refuted(Env{}, parse_type("{y:Int | 0 <= y}"),
                   parse_type("{y:Int | 0 < y}")) != nullptr);

  // A query with a relevant free binding has a different key.
  Env open;
  open.push("a", parse_type("{a:Int | a = 0}"));
  CHECK(db.refuted(open, parse_type("{x:Int | a <= x}"),
                   parse_type("{x:Int | a < x}")) == nullptr);

  // Irrelevant bindings are restricted away before keying.
  Env extra;
  extra.push("unused", mk_base_raw(BaseId::Bool));
  CHECK(db.refuted(extra, s, tt) != nullptr);

  // Only closed queries are recorded: an open one is refused.
  CHECK_FALSE(db.record_cex(open, parse_type("{x:Int | a <= x}"),
                            parse_type("{x:Int | a < x}"), mk_int(0), "p2"));
}

TEST_CASE("maybe obligations index affected programs") {
  TempDb t("cexdb_test5.jsonl");
  CexStore db(t.path);
  TypePtr s = mk_dynamic();
  TypePtr tt = parse_type("{x:Int | 0 < x}");
  db.record_maybe(Env{}, s, tt, "progA");
  db.record_maybe(Env{}, s, tt, "progB");
  db.record_maybe(Env{}, mk_dynamic(), mk_base_raw(BaseId::Bool), "progC");
  REQUIRE(db.record_cex(Env{}, s, tt, mk_int(0), "progA"));
  const CexEntry* e = db.refuted(Env{}, s, tt);
  REQUIRE(e != nullptr);
  std::vector<std::string> aff = db.affected_programs(e->key);
  CHECK(aff == std::vector<std::string>{"progA", "progB"});

  // The registry survives reload.
  CexStore db2(t.path);
  CHECK(db2.affected_programs(e->key) ==
        std::vector<std::string>{"progA", "progB"});
}

TEST_CASE("corrupt lines are skipped, stale entries dropped and counted") {
  TempDb t("cexdb_test6.jsonl");
  {
    CexStore db(t.path);
    REQUIRE(db.record_cex(Env{}, mk_base_raw(BaseId::Int),
                          parse_type("{x:Int | 0 < x}"), mk_int(0), "p1"));
  }
  {
    std::ofstream f(t.path, std::ios::app);
    f << "this is not json\n";
    f << "{\"kind\":\"cex\",\"bogus\":true}\n";
  }
  CexStore db(t.path);
  CHECK(db.counterexamples().size() == 1);
  CHECK(db.dropped_on_load() >= 1);
}

TEST_CASE("replay checks both failure and membership in the source") {
  TypePtr s = parse_type("{x:Int | x < 0}");
  TypePtr tt = parse_type("{x:Int | 0 < x}");
  CHECK(CexStore::replay(s, tt, mk_int(-3)));
  // 5 fails the target but does not inhabit the source: not a witness.
  CHECK_FALSE(CexStore::replay(s, tt, mk_int(5)));
  // 0 < 1 passes the target: not a witness either.
  CHECK_FALSE(CexStore::replay(mk_base_raw(BaseId::Int), tt, mk_int(1)));
}
