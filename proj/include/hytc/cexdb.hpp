// Persistent counterexample database.
//
// An append-only JSONL file records two kinds of facts discovered while
// checking and running programs:
//   - "cex": a subtyping query (restricted environment, source S, target T)
//     together with a concrete witness value that inhabits S but fails the
//     cast into T.  Witnesses are replayed through the evaluator both when
//     recorded and when loaded; entries that no longer replay are dropped.
//   - "maybe": a statically undecided obligation, keyed the same way and
//     tagged with the program that produced it, so that once a refutation
//     for the key arrives the affected programs can be reported.
//
// Queries and entries are keyed by the canonical (alpha-invariant) form of
// the restricted environment and the two types.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hytc/ast.hpp"

namespace hytc {

struct CexEntry {
  std::string key;
  Env env;
  TypePtr src, tgt;
  TermPtr witness;
  std::string program_id;
};

struct MaybeEntry {
  std::string key;
  std::string program_id;
};

// Path resolution: explicit argument, else $HYTC_DB, else ".hytc-db.jsonl".
std::string default_db_path(const std::string& flag_value = "");

class CexStore {
 public:
  // Loads the file if it exists; invalid or non-replaying entries are
  // dropped (and counted).
  explicit CexStore(std::string path);

  // Records a counterexample after replaying it; returns false (and stores
  // nothing) if the witness does not actually fail the cast.  Duplicate
  // keys keep the earliest witness.
  bool record_cex(const Env& env, const TypePtr& src, const TypePtr& tgt,
                  const TermPtr& witness, const std::string& program_id);

  void record_maybe(const Env& env, const TypePtr& src, const TypePtr& tgt,
                    const std::string& program_id);

  // Is this query refuted by a stored counterexample?
  const CexEntry* refuted(const Env& env, const TypePtr& src,
                          const TypePtr& tgt) const;

  // Programs that registered a Maybe obligation under this key.
  std::vector<std::string> affected_programs(const std::string& key) const;

  const std::map<std::string, CexEntry>& counterexamples() const {
    return cex_;
  }
  const std::vector<MaybeEntry>& maybes() const { return maybes_; }
  int dropped_on_load() const { return dropped_; }
  const std::string& path() const { return path_; }

  // Replays a witness: does `<src => tgt> witness` fail at runtime, with the
  // witness itself satisfying src?
  static bool replay(const TypePtr& src, const TypePtr& tgt,
                     const TermPtr& witness);

 private:
  void append_line(const std::string& line);

  std::string path_;
  std::map<std::string, CexEntry> cex_;
  std::vector<MaybeEntry> maybes_;
  int dropped_ = 0;
};

}  // namespace hytc
