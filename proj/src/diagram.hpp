#pragma once
// Closing critical forks into diagrams: a matcher for rule patterns against
// the all-rigid symbolic fork terms, successor generation (normal-order steps
// at the root, transformation steps at surface positions), bounded search for
// joining sequences, and the aggregation of closures into diagram schemas.

#include "overlap.hpp"

namespace lcsx {

// facts about the fork that justify side conditions during matching
struct MatchCtx {
  std::vector<IntCon> facts;                        // integer constraints
  std::set<std::string> nonempty;                   // context vars known non-empty
  std::vector<std::vector<std::string>> bv_classes; // identified bound variables
};

MatchCtx match_ctx_of(const FinalSystem& f);

// all results of rewriting `term` at the root with `rule` (empty if no match)
std::vector<TermPtr> match_rule_root(const Rule& rule, const TermPtr& term, const MatchCtx& mc);

struct DiaStep {
  bool is_no = false;  // normal-order step (root shape) vs transformation in S
  std::string rule;    // catalog rule name
  TermPtr before, after;
};

std::vector<DiaStep> no_successors(const TermPtr& t, const std::vector<Rule>& nos,
                                   const MatchCtx& mc);
std::vector<DiaStep> s_successors(const TermPtr& t, const std::vector<Rule>& trans,
                                  const MatchCtx& mc);

struct ClosedFork {
  std::string fork_id;
  std::string trans_name, no_name, canon_key;
  bool degenerate = false;
  bool closed = false;
  std::vector<DiaStep> L;  // from the normal-order result
  std::vector<DiaStep> R;  // from the transformation result
  TermPtr join;
  std::string shape;  // degenerate | triangle | square (empty when unclosed)
};

ClosedFork close_fork(const Fork& fk, const std::string& fork_id, const std::vector<Rule>& trans,
                      const std::vector<Rule>& nos, int max_depth);

// a diagram schema in the label vocabulary of the rendered diagrams:
// fork_label "a" stands for an arbitrary normal-order rule
struct Schema {
  std::string trans;       // transformation base label
  std::string fork_label;  // "a" or a specific base label
  std::vector<std::pair<std::string, std::string>> L;  // (kind, label), kind "S"/"no"
  std::vector<std::pair<std::string, std::string>> R;
  std::string shape;
  long long count = 0;

  std::string signature() const;  // canonical one-line form, count excluded
};

struct DiagramReport {
  std::vector<ClosedFork> outcomes;  // critical, per fork, deterministic order
  std::vector<Schema> schemas;       // aggregated over closed non-degenerate forks
  long long forks = 0, degenerate = 0, closed = 0, unclosed = 0;
};

DiagramReport compute_diagrams(const std::vector<PairResult>& pairs,
                               const std::vector<Rule>& trans, const std::vector<Rule>& nos,
                               int max_depth, int threads);

// ASCII rendering of one schema as a commuting square / triangle
std::string render_schema(const Schema& s);

}  // namespace lcsx
