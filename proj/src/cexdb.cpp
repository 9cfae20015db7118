#include "hytc/cexdb.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "hytc/eval.hpp"
#include "hytc/surface.hpp"

namespace hytc {

using nlohmann::json;

std::string default_db_path(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("HYTC_DB"))
    if (*env) return env;
  return ".hytc-db.jsonl";
}

bool CexStore::replay(const TypePtr& src, const TypePtr& tgt,
                      const TermPtr& witness) {
  if (!free_vars(src).empty() || !free_vars(tgt).empty() ||
      !free_vars(witness).empty())
    return false;
  // The witness must satisfy the source side...
  if (src->kind == TypeKind::Base) {
    EvalResult r = evaluate(subst1(src->refine, src->binder, witness), 20000);
    if (r.status != EvalResult::Value || !is_true(r.value)) return false;
  } else if (src->kind != TypeKind::Dynamic) {
    return false;  // only first-order witnesses are stored
  }
  // ... and fail the cast into the target.
  EvalResult r = evaluate(mk_app(mk_cast(src, tgt), witness), 20000);
  return r.status == EvalResult::FailedCast;
}

CexStore::CexStore(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  ParseOptions po{true};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      std::string kind = j.at("kind").get<std::string>();
      Env env;
      for (const auto& b : j.value("env", json::array()))
        env.push(b.at(0).get<std::string>(),
                 parse_type(b.at(1).get<std::string>(), po));
      TypePtr src = parse_type(j.at("src").get<std::string>(), po);
      TypePtr tgt = parse_type(j.at("tgt").get<std::string>(), po);
      std::string key = canon_key(restrict_env(env, src, tgt), src, tgt);
      if (kind == "maybe") {
        maybes_.push_back({key, j.value("program", "")});
        continue;
      }
      TermPtr w = parse_term(j.at("witness").get<std::string>(), po);
      if (!replay(src, tgt, w)) {
        ++dropped_;
        continue;
      }
      if (!cex_.count(key))  // earliest entry wins
        cex_[key] = {key, env, src, tgt, w, j.value("program", "")};
    } catch (...) {
      ++dropped_;
    }
  }
}

void CexStore::append_line(const std::string& line) {
  int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) return;
  ::flock(fd, LOCK_EX);
  std::string data = line + "\n";
  ssize_t ignored = ::write(fd, data.data(), data.size());
  (void)ignored;
  ::flock(fd, LOCK_UN);
  ::close(fd);
}

bool CexStore::record_cex(const Env& env, const TypePtr& src,
                          const TypePtr& tgt, const TermPtr& witness,
                          const std::string& program_id) {
  Env renv = restrict_env(env, src, tgt);
  if (!renv.bindings.empty()) return false;  // only closed queries are stored
  if (!replay(src, tgt, witness)) return false;
  std::string key = canon_key(renv, src, tgt);
  if (cex_.count(key)) return true;  // already known; keep the earliest
  cex_[key] = {key, renv, src, tgt, witness, program_id};
  json j = {{"kind", "cex"},
            {"key", key},
            {"env", json::array()},
            {"src", print(src)},
            {"tgt", print(tgt)},
            {"witness", print(witness)},
            {"program", program_id}};
  append_line(j.dump());
  return true;
}

void CexStore::record_maybe(const Env& env, const TypePtr& src,
                            const TypePtr& tgt,
                            const std::string& program_id) {
  Env renv = restrict_env(env, src, tgt);
  std::string key = canon_key(renv, src, tgt);
  for (const MaybeEntry& m : maybes_)
    if (m.key == key && m.program_id == program_id) return;
  maybes_.push_back({key, program_id});
  json envj = json::array();
  for (const auto& [n, t] : renv.bindings)
    envj.push_back(json::array({n, print(t)}));
  json j = {{"kind", "maybe"},
            {"key", key},
            {"env", envj},
            {"src", print(src)},
            {"tgt", print(tgt)},
            {"program", program_id}};
  append_line(j.dump());
}

const CexEntry* CexStore::refuted(const Env& env, const TypePtr& src,
                                  const TypePtr& tgt) const {
  std::string key = canon_key(restrict_env(env, src, tgt), src, tgt);
  auto it = cex_.find(key);
  return it == cex_.end() ? nullptr : &it->second;
}

std::vector<std::string> CexStore::affected_programs(
    const std::string& key) const {
  std::vector<std::string> out;
  for (const MaybeEntry& m : maybes_)
    if (m.key == key && !m.program_id.empty())
      if (std::find(out.begin(), out.end(), m.program_id) == out.end())
        out.push_back(m.program_id);
  return out;
}

}  // namespace hytc
