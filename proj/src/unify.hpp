#pragma once
// The unification engine for the sorted term language with the left-commutative
// multiset theory of environments, classed context variables, and binding
// chains. Problems are almost-linear: solving never substitutes into the
// remaining equations; bound-variable identifications accumulate in a
// union-find. Branching rules produce a complete set of alternatives and every
// step strictly decreases the lexicographic measure (let count, weight).

#include <map>
#include <set>
#include <string>
#include <vector>

#include "calculus.hpp"
#include "term.hpp"

namespace lcsx {

struct Eq {
  TermPtr l, r;
};
std::string to_string(const Eq& e);

// per-step measure record: (mu1, mu2) of the equation set before and after
struct StepRec {
  std::string rule;
  long long mu1_before = 0, mu2_before = 0;
  long long mu1_after = 0, mu2_after = 0;
};

// union-find over bound-variable keys
struct BvUF {
  std::map<std::string, std::string> parent;
  std::map<std::string, TermPtr> terms;  // key -> variable term (first seen)
  void add(const TermPtr& v);
  std::string rep(const std::string& key) const;
  TermPtr rep_term(const TermPtr& v) const;
  void unite(const TermPtr& a, const TermPtr& b);
  // nontrivial classes, members sorted, classes ordered by smallest member
  std::vector<std::vector<std::string>> classes() const;
};

struct FinalSystem {
  std::vector<std::pair<std::string, TermPtr>> solved_chrono;  // key -> image
  Subst sub;            // the solved part as a substitution (context images hold [])
  BvUF bv;              // bound-variable identifications
  std::set<std::string> delta1;      // non-empty context variables
  std::vector<IntCon> delta2;        // index constraints
  std::vector<StepRec> trace;
  // chain atoms decomposed during solving: printed atom -> replacement
  // elements (the explicit link binding plus residual chain atoms)
  std::map<std::string, std::vector<TermPtr>> chain_splits;
  bool delta2_sat = false;
  std::map<std::string, long long> model;  // least model of delta2 when satisfiable
  bool dvc_ok = false;  // distinct-variable convention holds for the overlap term
  std::string canon_key;

  // sub plus the bound-variable representative mapping
  Subst full_sub() const;
};

struct InitialProblem {
  std::string trans_name, no_name;
  TermPtr lhs_T, rhs_T;    // the transformation rule, original variables
  TermPtr lhs_no, rhs_no;  // the normal-order rule, plain variables primed
  TermPtr S_hole;          // the fresh surface context variable as a context term S{S}([])
  Eq init;                 // S{S}(lhs_T) =? lhs_no
  std::set<std::string> delta1;
  std::vector<IntCon> delta2;
};

InitialProblem make_problem(const Rule& trans, const Rule& no);

struct UnifyOptions {
  long long max_states = 1000000;
  bool keep_traces = true;
};

struct UnifyStats {
  long long states = 0;          // branch states processed
  long long steps = 0;           // rule applications
  bool budget_exhausted = false;
};

// all final systems in deterministic order (branches with unsatisfiable index
// constraints are pruned; the distinct-variable check result is in dvc_ok)
std::vector<FinalSystem> unify(const InitialProblem& p, const UnifyOptions& opt, UnifyStats& stats);

// index constraints: least model over positive integers / entailment
bool delta2_least_model(const std::vector<IntCon>& cons, std::map<std::string, long long>& model);
bool delta2_entails(const std::vector<IntCon>& facts, const IntCon& query);
// facts entail a <= b (equality holds when both directions are entailed)
bool delta2_entails_le(const std::vector<IntCon>& facts, const std::string& a,
                       const std::string& b);

// canonical renaming key for a final system relative to its problem, used for
// duplicate elimination and stable output
std::string canonical_key(const InitialProblem& p, const FinalSystem& f);
void set_canon_keys(const InitialProblem& p, std::vector<FinalSystem>& finals);
std::vector<FinalSystem> dedup_finals(std::vector<FinalSystem> finals);  // keeps first per key

// ground soundness oracle: instantiate the final system (least index model,
// chains expanded, remaining variables mapped to concrete witnesses) and check
// that both sides of the initial equation become the same term
bool check_sound(const InitialProblem& p, const FinalSystem& f, std::string* why = nullptr);

// instantiate a term under the final system's witness assignment (used by the
// oracle and by tests): applies full_sub and the least model, expands chains,
// then maps leftover variables to concrete witnesses
TermPtr ground_instance(const FinalSystem& f, const TermPtr& t);

}  // namespace lcsx
