#pragma once
// JSON serialization of catalogs, final systems, overlap runs and diagram
// reports.  All objects use insertion-ordered keys and canonically sorted
// collections so that identical runs serialize byte-identically.

#include "diagram.hpp"
#include "json.hpp"

namespace lcsx {

using ordered_json = nlohmann::ordered_json;

ordered_json rule_json(const Rule& r);
ordered_json final_json(const FinalSystem& f);
ordered_json unify_json(const InitialProblem& p, const std::vector<FinalSystem>& finals,
                        const UnifyStats& stats);
ordered_json overlaps_json(const std::vector<PairResult>& pairs, bool include_forks);
ordered_json diagrams_json(const DiagramReport& rep);

}  // namespace lcsx
