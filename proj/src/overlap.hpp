#pragma once
// Critical-pair computation: one unification problem per (transformation,
// normal-order rule) pair, fork construction from each final system, and the
// classification of overlaps into critical and variable positions.

#include "unify.hpp"

namespace lcsx {

struct Fork {
  std::string trans_name, no_name;
  FinalSystem final;
  TermPtr source;  // the unified overlap term (the normal-order side instance)
  TermPtr left;    // result of the normal-order step
  TermPtr right;   // result of the transformation step
  bool critical = false;
  bool degenerate = false;  // left and right already coincide
};

struct PairResult {
  std::string trans_name, no_name;
  InitialProblem prob;
  UnifyStats stats;
  long long raw = 0;      // final systems found
  long long deduped = 0;  // distinct up to canonical renaming
  long long dvc_ok = 0;   // distinct and satisfying the distinct-variable convention
  long long critical = 0;
  std::vector<Fork> forks;  // one per distinct dvc-passing final
};

Fork build_fork(const InitialProblem& p, const FinalSystem& f);
bool fork_is_critical(const InitialProblem& p, const FinalSystem& f);

struct OverlapOptions {
  UnifyOptions unify;
  int threads = 1;
};

// deterministic: pair order is transformation-major, results are merged in
// that order whatever the thread count
std::vector<PairResult> compute_overlaps(const std::vector<Rule>& trans,
                                         const std::vector<Rule>& nos, const OverlapOptions& opt);

}  // namespace lcsx
