#include "overlap.hpp"

#include <atomic>
#include <functional>
#include <stdexcept>
#include <thread>

namespace lcsx {

namespace {

const char* kMark = "@mark";

bool contains_marker(const TermPtr& t) {
  if (t->kind == Term::Kind::Fun && t->name == kMark) return true;
  for (auto& a : t->args)
    if (contains_marker(a)) return true;
  for (auto& e : t->elems)
    if (contains_marker(e)) return true;
  for (auto& z : t->tails)
    if (contains_marker(z)) return true;
  return false;
}

TermPtr strip_marker(const TermPtr& t) {
  if (t->kind == Term::Kind::Fun && t->name == kMark) return strip_marker(t->args[0]);
  switch (t->kind) {
    case Term::Kind::Fun: {
      std::vector<TermPtr> as;
      for (auto& a : t->args) as.push_back(strip_marker(a));
      return mk_fun(t->name, as);
    }
    case Term::Kind::EnvML: {
      std::vector<TermPtr> es, zs;
      for (auto& e : t->elems) es.push_back(strip_marker(e));
      for (auto& z : t->tails) zs.push_back(strip_marker(z));
      return mk_env(es, zs);
    }
    case Term::Kind::CtxApp:
      return mk_ctx(t->name, t->cls, strip_marker(t->args[0]), t->idx);
    default:
      return t;
  }
}

// Alignment of the marked, instantiated normal-order side against the original
// rule pattern.  Returns true when the marker (the transformation redex) sits
// entirely inside the image of a variable-like part of the pattern: a
// first-order variable, a context variable's image proper, an environment tail
// or a chain region.  Returns false when the marker covers a rigid pattern
// node, i.e. the overlap is critical.
struct Aligner {
  const Subst& full;

  bool align(const TermPtr& m, const TermPtr& n) {
    if (n->kind == Term::Kind::CtxApp) {
      // descend through the context variable's image first: a marker that ends
      // up exactly at an emptied context must be judged against the pattern
      // below it, not against the context node
      TermPtr probe = mk_ctx(n->name, n->cls, mk_hole(), n->idx);
      TermPtr image = apply_star(full, probe);
      if (image->kind == Term::Kind::CtxApp && var_key(image) == var_key(n)) {
        // context variable unsolved: the instance must mirror it
        if (m->kind != Term::Kind::CtxApp || var_key(m) != var_key(n))
          throw std::logic_error("align: instance diverges at context variable");
        return align(m->args[0], n->args[0]);
      }
      return walk_image(m, image, n->args[0]);
    }
    if (m->kind == Term::Kind::Fun && m->name == kMark) {
      // the marker exactly covers the image of this pattern position
      return n->kind == Term::Kind::Var;
    }
    switch (n->kind) {
      case Term::Kind::Var:
        return true;  // marker strictly inside a first-order variable's image
      case Term::Kind::IntConst:
      case Term::Kind::Hole:
      case Term::Kind::Chain:
      case Term::Kind::CtxApp:
        throw std::logic_error("align: marker inside markless pattern node");
      case Term::Kind::Fun: {
        if (m->kind != Term::Kind::Fun || m->name != n->name)
          throw std::logic_error("align: instance diverges at function node");
        for (size_t i = 0; i < n->args.size(); ++i)
          if (contains_marker(m->args[i])) return align(m->args[i], n->args[i]);
        throw std::logic_error("align: lost marker below function node");
      }
      case Term::Kind::EnvML: {
        const TermPtr* mmark = nullptr;
        for (auto& e : m->elems)
          if (contains_marker(e)) {
            mmark = &e;
            break;
          }
        if (!mmark) throw std::logic_error("align: lost marker in environment");
        TermPtr stripped = strip_marker(*mmark);
        for (auto& c : n->elems) {
          if (c->kind != Term::Kind::Fun) continue;  // chain atoms never host the marker
          if (lc_equal(stripped, apply_star(full, c))) return align(*mmark, c);
        }
        // no rigid binding matches: the marked component comes from a tail
        // image or from the expansion of a chain region
        return true;
      }
    }
    return true;
  }

  // descend the solved context variable's image along its hole path; n_arg is
  // the pattern term that continues below the hole
  bool walk_image(const TermPtr& m, const TermPtr& image, const TermPtr& n_arg) {
    if (image->kind == Term::Kind::Hole) return align(m, n_arg);
    if (m->kind == Term::Kind::Fun && m->name == kMark) {
      // marker covers this image node and everything below its hole; that is
      // variable material only if the pattern continuing below is a variable
      TermPtr below = n_arg;
      while (below->kind == Term::Kind::CtxApp) below = below->args[0];
      return below->kind == Term::Kind::Var;
    }
    switch (image->kind) {
      case Term::Kind::Fun: {
        if (m->kind != Term::Kind::Fun || m->name != image->name)
          throw std::logic_error("align: instance diverges inside context image");
        size_t hi = image->args.size();
        for (size_t i = 0; i < image->args.size(); ++i)
          if (contains_hole(image->args[i])) {
            hi = i;
            break;
          }
        if (hi == image->args.size())
          throw std::logic_error("align: context image lost its hole");
        if (!contains_marker(m->args[hi])) return true;  // marker off the hole path
        return walk_image(m->args[hi], image->args[hi], n_arg);
      }
      case Term::Kind::CtxApp: {
        if (m->kind != Term::Kind::CtxApp || var_key(m) != var_key(image))
          throw std::logic_error("align: instance diverges at nested context");
        return walk_image(m->args[0], image->args[0], n_arg);
      }
      case Term::Kind::EnvML: {
        const TermPtr* holed = nullptr;
        for (auto& e : image->elems)
          if (contains_hole(e)) {
            holed = &e;
            break;
          }
        if (!holed) throw std::logic_error("align: env context image lost its hole");
        const TermPtr* mmark = nullptr;
        for (auto& e : m->elems)
          if (contains_marker(e)) {
            mmark = &e;
            break;
          }
        if (!mmark) return true;  // marker sits in tail material of the instance
        TermPtr filled = fill_hole(*holed, strip_hole_filler(n_arg));
        if (!lc_equal(strip_marker(*mmark), filled))
          return true;  // marker lives in a different component of the image
        return walk_image(*mmark, *holed, n_arg);
      }
      default:
        throw std::logic_error("align: unexpected node in context image");
    }
  }

  TermPtr strip_hole_filler(const TermPtr& n_arg) { return apply_star(full, n_arg); }
};

}  // namespace

namespace {

// re-expose chain links that were decomposed during solving: a rule side can
// still carry the original atom while its solved content (the explicit link
// binding) appears only in the recorded split
TermPtr expand_splits(const TermPtr& t, const FinalSystem& f, const Subst& full) {
  switch (t->kind) {
    case Term::Kind::Fun: {
      std::vector<TermPtr> as;
      for (auto& a : t->args) as.push_back(expand_splits(a, f, full));
      return mk_fun(t->name, as);
    }
    case Term::Kind::CtxApp:
      return mk_ctx(t->name, t->cls, expand_splits(t->args[0], f, full), t->idx);
    case Term::Kind::EnvML: {
      std::vector<TermPtr> elems;
      std::function<void(const TermPtr&)> put = [&](const TermPtr& e) {
        if (e->kind == Term::Kind::Chain) {
          auto it = f.chain_splits.find(to_string(e));
          if (it != f.chain_splits.end()) {
            for (auto& r : it->second) put(apply_star(full, r));
            return;
          }
        }
        elems.push_back(expand_splits(e, f, full));
      };
      for (auto& e : t->elems) put(e);
      std::vector<TermPtr> tails;
      for (auto& z : t->tails) tails.push_back(expand_splits(z, f, full));
      return mk_env(elems, tails);
    }
    default:
      return t;
  }
}

}  // namespace

Fork build_fork(const InitialProblem& p, const FinalSystem& f) {
  Fork fk;
  fk.trans_name = p.trans_name;
  fk.no_name = p.no_name;
  fk.final = f;
  Subst full = f.full_sub();
  fk.source = expand_splits(apply_star(full, p.lhs_no), f, full);
  fk.left = expand_splits(apply_star(full, p.rhs_no), f, full);
  TermPtr sctx = apply_star(full, p.S_hole);
  fk.right = expand_splits(fill_hole(sctx, apply_star(full, p.rhs_T)), f, full);
  fk.critical = fork_is_critical(p, f);
  fk.degenerate = lc_equal(fk.left, fk.right);
  return fk;
}

bool fork_is_critical(const InitialProblem& p, const FinalSystem& f) {
  Subst full = f.full_sub();
  TermPtr marked_redex = mk_fun(kMark, {apply_star(full, p.lhs_T)});
  TermPtr sctx = apply_star(full, p.S_hole);
  TermPtr marked = fill_hole(sctx, marked_redex);
  Aligner al{full};
  return !al.align(marked, p.lhs_no);
}

std::vector<PairResult> compute_overlaps(const std::vector<Rule>& trans,
                                         const std::vector<Rule>& nos, const OverlapOptions& opt) {
  struct Job {
    const Rule* t;
    const Rule* n;
  };
  std::vector<Job> jobs;
  for (auto& t : trans)
    for (auto& n : nos) jobs.push_back({&t, &n});

  std::vector<PairResult> out(jobs.size());
  auto run_one = [&](size_t i) {
    const Rule& t = *jobs[i].t;
    const Rule& n = *jobs[i].n;
    PairResult pr;
    pr.trans_name = t.name;
    pr.no_name = n.name;
    pr.prob = make_problem(t, n);
    std::vector<FinalSystem> finals = unify(pr.prob, opt.unify, pr.stats);
    pr.raw = (long long)finals.size();
    set_canon_keys(pr.prob, finals);
    std::vector<FinalSystem> ded = dedup_finals(finals);
    pr.deduped = (long long)ded.size();
    for (auto& f : ded) {
      if (!f.dvc_ok) continue;
      ++pr.dvc_ok;
      Fork fk = build_fork(pr.prob, f);
      if (fk.critical) ++pr.critical;
      pr.forks.push_back(std::move(fk));
    }
    out[i] = std::move(pr);
  };

  int T = opt.threads < 1 ? 1 : opt.threads;
  if (T == 1) {
    for (size_t i = 0; i < jobs.size(); ++i) run_one(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < T; ++w)
      pool.emplace_back([&] {
        for (;;) {
          size_t i = next.fetch_add(1);
          if (i >= jobs.size()) return;
          run_one(i);
        }
      });
    for (auto& th : pool) th.join();
  }
  return out;
}

}  // namespace lcsx
