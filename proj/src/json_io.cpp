#include "json_io.hpp"

#include <algorithm>

namespace lcsx {

namespace {

ordered_json intcons_json(const std::vector<IntCon>& v) {
  std::vector<std::string> ss;
  for (auto& c : v) ss.push_back(to_string(c));
  std::sort(ss.begin(), ss.end());
  return ordered_json(ss);
}

}  // namespace

ordered_json rule_json(const Rule& r) {
  ordered_json j;
  j["name"] = r.name;
  j["kind"] = r.is_no ? "no" : "transformation";
  j["lhs"] = to_string(r.lhs);
  j["rhs"] = to_string(r.rhs);
  j["delta1"] = r.delta1;
  j["delta2"] = intcons_json(r.delta2);
  return j;
}

ordered_json final_json(const FinalSystem& f) {
  ordered_json j;
  j["system"] = f.canon_key;
  j["dvc_ok"] = f.dvc_ok;
  j["delta2_sat"] = f.delta2_sat;
  ordered_json model = ordered_json::object();
  for (auto& [k, v] : f.model) model[k] = v;
  j["least_model"] = model;
  j["steps"] = (long long)f.trace.size();
  return j;
}

ordered_json unify_json(const InitialProblem& p, const std::vector<FinalSystem>& finals,
                        const UnifyStats& stats) {
  ordered_json j;
  j["transformation"] = p.trans_name;
  j["no_rule"] = p.no_name;
  j["initial_equation"] = to_string(p.init.l) + " =? " + to_string(p.init.r);
  j["delta1"] = std::vector<std::string>(p.delta1.begin(), p.delta1.end());
  j["delta2"] = intcons_json(p.delta2);
  j["states"] = stats.states;
  j["budget_exhausted"] = stats.budget_exhausted;
  ordered_json fs = ordered_json::array();
  for (auto& f : finals) fs.push_back(final_json(f));
  j["finals"] = fs;
  return j;
}

ordered_json overlaps_json(const std::vector<PairResult>& pairs, bool include_forks) {
  ordered_json j;
  ordered_json rows = ordered_json::array();
  long long raw = 0, ded = 0, dvc = 0, crit = 0;
  bool budget = false;
  for (auto& pr : pairs) {
    ordered_json row;
    row["transformation"] = pr.trans_name;
    row["no_rule"] = pr.no_name;
    row["raw"] = pr.raw;
    row["deduped"] = pr.deduped;
    row["dvc_ok"] = pr.dvc_ok;
    row["critical"] = pr.critical;
    row["states"] = pr.stats.states;
    row["budget_exhausted"] = pr.stats.budget_exhausted;
    if (include_forks) {
      ordered_json fks = ordered_json::array();
      int k = 0;
      for (auto& fk : pr.forks) {
        ordered_json fj;
        fj["fork_id"] = pr.trans_name + "|" + pr.no_name + "#" + std::to_string(k++);
        fj["critical"] = fk.critical;
        fj["degenerate"] = fk.degenerate;
        fj["source"] = to_string(fk.source);
        fj["left"] = to_string(fk.left);
        fj["right"] = to_string(fk.right);
        fj["system"] = fk.final.canon_key;
        fks.push_back(fj);
      }
      row["forks"] = fks;
    }
    rows.push_back(row);
    raw += pr.raw;
    ded += pr.deduped;
    dvc += pr.dvc_ok;
    crit += pr.critical;
    budget = budget || pr.stats.budget_exhausted;
  }
  j["pairs"] = rows;
  ordered_json totals;
  totals["raw"] = raw;
  totals["deduped"] = ded;
  totals["dvc_ok"] = dvc;
  totals["critical"] = crit;
  j["totals"] = totals;
  j["budget_exhausted"] = budget;
  return j;
}

ordered_json diagrams_json(const DiagramReport& rep) {
  ordered_json j;
  ordered_json fks = ordered_json::array();
  for (auto& cf : rep.outcomes) {
    ordered_json fj;
    fj["fork_id"] = cf.fork_id;
    fj["transformation"] = cf.trans_name;
    fj["no_rule"] = cf.no_name;
    fj["degenerate"] = cf.degenerate;
    fj["closed"] = cf.closed;
    fj["shape"] = cf.shape;
    ordered_json ls = ordered_json::array(), rs = ordered_json::array();
    for (auto& s : cf.L) {
      ordered_json sj;
      sj["kind"] = s.is_no ? "no" : "S";
      sj["rule"] = s.rule;
      sj["after"] = to_string(s.after);
      ls.push_back(sj);
    }
    for (auto& s : cf.R) {
      ordered_json sj;
      sj["kind"] = "no";
      sj["rule"] = s.rule;
      sj["after"] = to_string(s.after);
      rs.push_back(sj);
    }
    fj["left_steps"] = ls;
    fj["right_steps"] = rs;
    if (cf.closed && cf.join) fj["join"] = to_string(cf.join);
    fks.push_back(fj);
  }
  j["forks"] = fks;
  ordered_json scs = ordered_json::array();
  for (auto& sc : rep.schemas) {
    ordered_json sj;
    sj["transformation"] = sc.trans;
    sj["fork"] = sc.fork_label;
    ordered_json L = ordered_json::array(), R = ordered_json::array();
    for (auto& p : sc.L) L.push_back({p.first, p.second});
    for (auto& p : sc.R) R.push_back({p.first, p.second});
    sj["L"] = L;
    sj["R"] = R;
    sj["shape"] = sc.shape;
    sj["count"] = sc.count;
    sj["signature"] = sc.signature();
    scs.push_back(sj);
  }
  j["schemas"] = scs;
  ordered_json sum;
  sum["forks"] = rep.forks;
  sum["degenerate"] = rep.degenerate;
  sum["closed"] = rep.closed;
  sum["unclosed"] = rep.unclosed;
  j["summary"] = sum;
  ordered_json un = ordered_json::array();
  for (auto& cf : rep.outcomes)
    if (!cf.closed) un.push_back(cf.fork_id);
  j["unclosed"] = un;
  return j;
}

}  // namespace lcsx
