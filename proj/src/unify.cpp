#include "unify.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>
#include <stdexcept>

namespace lcsx {

std::string to_string(const Eq& e) { return to_string(e.l) + " =? " + to_string(e.r); }

// ---------------------------------------------------------------------------
// bound-variable union-find

void BvUF::add(const TermPtr& v) {
  std::string k = var_key(v);
  if (!parent.count(k)) {
    parent[k] = k;
    terms[k] = v;
  }
}

std::string BvUF::rep(const std::string& key) const {
  std::string k = key;
  auto it = parent.find(k);
  while (it != parent.end() && it->second != k) {
    k = it->second;
    it = parent.find(k);
  }
  return k;
}

TermPtr BvUF::rep_term(const TermPtr& v) const {
  std::string r = rep(var_key(v));
  auto it = terms.find(r);
  return it != terms.end() ? it->second : v;
}

void BvUF::unite(const TermPtr& a, const TermPtr& b) {
  add(a);
  add(b);
  std::string ra = rep(var_key(a)), rb = rep(var_key(b));
  if (ra == rb) return;
  if (rb < ra) std::swap(ra, rb);  // smaller key becomes the representative
  parent[rb] = ra;
}

std::vector<std::vector<std::string>> BvUF::classes() const {
  std::map<std::string, std::vector<std::string>> by_rep;
  for (auto& [k, _] : parent) by_rep[rep(k)].push_back(k);
  std::vector<std::vector<std::string>> out;
  for (auto& [r, members] : by_rep) {
    if (members.size() < 2) continue;
    std::sort(members.begin(), members.end());
    out.push_back(members);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Subst FinalSystem::full_sub() const {
  Subst s = sub;
  for (auto& [k, _] : bv.parent) {
    std::string r = bv.rep(k);
    if (r != k) s.fo[k] = bv.terms.at(r);
  }
  return s;
}

// ---------------------------------------------------------------------------
// index constraints: least model and entailment over positive integers

namespace {
struct DiffEdge {
  std::string from, to;
  long long w;
};

std::vector<DiffEdge> con_edges(const std::vector<IntCon>& cons) {
  std::vector<DiffEdge> es;
  for (auto& c : cons) {
    es.push_back({c.a, c.b, 1});               // b >= a+1 for both kinds
    if (c.succ) es.push_back({c.b, c.a, -1});  // a >= b-1
  }
  return es;
}
}  // namespace

bool delta2_least_model(const std::vector<IntCon>& cons, std::map<std::string, long long>& model) {
  model.clear();
  for (auto& c : cons) {
    model[c.a] = 1;
    model[c.b] = 1;
  }
  auto es = con_edges(cons);
  size_t n = model.size();
  bool changed = true;
  for (size_t sweep = 0; sweep <= n + 1 && changed; ++sweep) {
    changed = false;
    for (auto& e : es) {
      long long cand = model[e.from] + e.w;
      if (model[e.to] < cand) {
        model[e.to] = cand;
        changed = true;
      }
    }
  }
  if (changed) return false;  // positive cycle: unsatisfiable
  for (auto& c : cons) {
    if (c.succ && model[c.b] != model[c.a] + 1) return false;
    if (!c.succ && !(model[c.a] < model[c.b])) return false;
  }
  return true;
}

bool delta2_entails(const std::vector<IntCon>& facts, const IntCon& query) {
  std::map<std::string, long long> m;
  if (!delta2_least_model(facts, m)) return true;  // inconsistent facts entail anything
  auto es = con_edges(facts);
  auto longest = [&](const std::string& from, const std::string& to) -> long long {
    const long long NEG = -1000000000;
    std::map<std::string, long long> d;
    for (auto& [v, _] : m) d[v] = NEG;
    if (!d.count(from)) d[from] = 0;
    d[from] = 0;
    if (!d.count(to)) d[to] = (from == to) ? 0 : NEG;
    for (size_t sweep = 0; sweep <= d.size(); ++sweep) {
      bool ch = false;
      for (auto& e : es) {
        if (!d.count(e.from) || !d.count(e.to)) continue;
        if (d[e.from] == NEG) continue;
        if (d[e.to] < d[e.from] + e.w) {
          d[e.to] = d[e.from] + e.w;
          ch = true;
        }
      }
      if (!ch) break;
    }
    return d.count(to) ? d[to] : NEG;
  };
  if (query.succ) return longest(query.a, query.b) >= 1 && longest(query.b, query.a) >= -1;
  return longest(query.a, query.b) >= 1;
}

bool delta2_entails_le(const std::vector<IntCon>& facts, const std::string& a,
                       const std::string& b) {
  if (a == b) return true;
  std::map<std::string, long long> m;
  if (!delta2_least_model(facts, m)) return true;
  auto es = con_edges(facts);
  const long long NEG = -1000000000;
  std::map<std::string, long long> d;
  for (auto& [v, _] : m) d[v] = NEG;
  d[a] = 0;
  if (!d.count(b)) d[b] = NEG;
  for (size_t sweep = 0; sweep <= d.size(); ++sweep) {
    bool ch = false;
    for (auto& e : es) {
      if (!d.count(e.from) || !d.count(e.to)) continue;
      if (d[e.from] == NEG) continue;
      if (d[e.to] < d[e.from] + e.w) {
        d[e.to] = d[e.from] + e.w;
        ch = true;
      }
    }
    if (!ch) break;
  }
  return d[b] >= 0;
}

// ---------------------------------------------------------------------------
// problem construction

namespace {
// rename every plain variable of the normal-order side by appending a prime;
// reserved chain names (indexed y@N, A@N) and integer index variables stay
TermPtr prime_term(const TermPtr& t) {
  switch (t->kind) {
    case Term::Kind::Var:
      if (t->idx || t->sort == Sort::Int) return t;
      return mk_var(t->name + "'", t->sort);
    case Term::Kind::IntConst:
    case Term::Kind::Hole:
      return t;
    case Term::Kind::Fun: {
      std::vector<TermPtr> args;
      for (auto& a : t->args) args.push_back(prime_term(a));
      return mk_fun(t->name, std::move(args));
    }
    case Term::Kind::EnvML: {
      std::vector<TermPtr> elems, tails;
      for (auto& e : t->elems) elems.push_back(prime_term(e));
      for (auto& r : t->tails) tails.push_back(prime_term(r));
      return mk_env(std::move(elems), std::move(tails));
    }
    case Term::Kind::Chain:
      return t;
    case Term::Kind::CtxApp: {
      std::string n = t->idx ? t->name : t->name + "'";
      return mk_ctx(n, t->cls, prime_term(t->args[0]), t->idx);
    }
  }
  return t;
}

std::string prime_key(const std::string& k) {
  if (k.find('@') != std::string::npos) return k;  // reserved indexed name
  return k + "'";
}
}  // namespace

InitialProblem make_problem(const Rule& trans, const Rule& no) {
  if (trans.is_no || !no.is_no) throw std::logic_error("make_problem: wrong rule kinds");
  InitialProblem p;
  p.trans_name = trans.name;
  p.no_name = no.name;
  p.lhs_T = trans.lhs;
  p.rhs_T = trans.rhs;
  p.lhs_no = prime_term(no.lhs);
  p.rhs_no = prime_term(no.rhs);
  p.S_hole = mk_ctx("S", CtxClass::S, mk_hole());
  p.init = Eq{mk_ctx("S", CtxClass::S, trans.lhs), p.lhs_no};
  for (auto& d : trans.delta1) p.delta1.insert(d);
  for (auto& d : no.delta1) p.delta1.insert(prime_key(d));
  p.delta2 = trans.delta2;
  for (auto& c : no.delta2) p.delta2.push_back(c);  // integer names are never primed
  return p;
}

// ---------------------------------------------------------------------------
// the engine

namespace {

struct State {
  std::vector<Eq> P;
  std::vector<std::pair<std::string, TermPtr>> solved_chrono;
  Subst sub;
  BvUF bv;
  std::set<std::string> delta1;
  std::vector<IntCon> delta2;
  std::set<std::string> delta2_seen;
  std::vector<StepRec> trace;
  std::map<std::string, std::vector<TermPtr>> chain_splits;
  int fresh_exp = 0, fresh_env = 0, fresh_bv = 0, fresh_ctx = 0, fresh_int = 2;
};

long long mu1_of(const std::vector<Eq>& P) {
  long long n = 0;
  for (auto& e : P) n += count_lets(e.l) + count_lets(e.r);
  return n;
}
long long mu2_of(const std::vector<Eq>& P) {
  long long n = 0;
  for (auto& e : P) n += mu2(e.l) + mu2(e.r);
  return n;
}

// a decomposition replaces an equation by its components; a remainder whose
// sides are both the empty environment is vacuously true and, weighing zero
// under mu2, must not be enqueued (removing it later would stall the measure)
static bool vacuous_remainder(const Eq& e) {
  return e.l->kind == Term::Kind::EnvML && e.r->kind == Term::Kind::EnvML &&
         e.l->elems.empty() && e.l->tails.empty() && e.r->elems.empty() &&
         e.r->tails.empty();
}

struct Engine {
  const InitialProblem& prob;
  const UnifyOptions& opt;
  UnifyStats& stats;
  std::vector<FinalSystem> finals;

  Engine(const InitialProblem& p, const UnifyOptions& o, UnifyStats& s)
      : prob(p), opt(o), stats(s) {}

  // --- fresh variables (per-state counters; families avoid catalog names) ---
  TermPtr fresh_exp(State& st) { return mk_var("F" + std::to_string(++st.fresh_exp), Sort::Exp); }
  TermPtr fresh_env(State& st) { return mk_var("G" + std::to_string(++st.fresh_env), Sort::Env); }
  TermPtr fresh_bv(State& st) { return mk_var("b" + std::to_string(++st.fresh_bv), Sort::BV); }
  TermPtr fresh_int(State& st) { return mk_var("N" + std::to_string(++st.fresh_int), Sort::Int); }
  std::string fresh_ctx_name(State& st) { return "Z" + std::to_string(++st.fresh_ctx); }

  static TermPtr hole_of(const std::string& name, CtxClass cls, TermPtr idx = nullptr) {
    return mk_ctx(name, cls, mk_hole(), std::move(idx));
  }

  void solve(State& st, const TermPtr& var_or_ctx, const TermPtr& image) {
    std::string key = var_key(var_or_ctx);
    st.solved_chrono.emplace_back(key, image);
    if (var_or_ctx->kind == Term::Kind::CtxApp)
      st.sub.ctx[key] = image;
    else
      st.sub.fo[key] = image;
  }

  bool add_delta2(State& st, const IntCon& c) {  // returns satisfiable
    std::string r = to_string(c);
    if (!st.delta2_seen.count(r)) {
      st.delta2_seen.insert(r);
      st.delta2.push_back(c);
    }
    std::map<std::string, long long> m;
    return delta2_least_model(st.delta2, m);
  }

  void record(State& st, const std::string& rule, long long m1b, long long m2b) {
    if (!opt.keep_traces) return;
    st.trace.push_back({rule, m1b, m2b, mu1_of(st.P), mu2_of(st.P)});
  }

  // ---- deterministic rules: returns true if a step was applied ----
  // categories are scanned in a fixed priority order for determinism
  enum class StepKind { None, Final, Progress, Branch, Fail };

  StepKind step(State& st, std::vector<State>& children, std::string& reason) {
    if (st.P.empty()) return StepKind::Final;
    long long m1 = mu1_of(st.P), m2 = mu2_of(st.P);

    // 1: trivial equations
    for (size_t i = 0; i < st.P.size(); ++i)
      if (equal(st.P[i].l, st.P[i].r)) {
        st.P.erase(st.P.begin() + i);
        record(st, "Trivial", m1, m2);
        return StepKind::Progress;
      }

    // 2: symbol clashes
    for (auto& e : st.P) {
      if (sort_of(e.l) != sort_of(e.r))
        throw std::logic_error("ill-sorted equation: " + to_string(e));
      if (e.l->kind == Term::Kind::Fun && e.r->kind == Term::Kind::Fun &&
          e.l->name != e.r->name) {
        reason = "Fail(" + e.l->name + "/" + e.r->name + ")";
        return StepKind::Fail;
      }
    }

    // 3: decomposition of equal heads
    for (size_t i = 0; i < st.P.size(); ++i) {
      const Eq e = st.P[i];
      if (e.l->kind == Term::Kind::Fun && e.r->kind == Term::Kind::Fun) {
        st.P.erase(st.P.begin() + i);
        for (size_t k = 0; k < e.l->args.size(); ++k) {
          Eq comp{e.l->args[k], e.r->args[k]};
          if (!vacuous_remainder(comp)) st.P.push_back(std::move(comp));
        }
        record(st, "Dec", m1, m2);
        return StepKind::Progress;
      }
      if (e.l->kind == Term::Kind::CtxApp && e.r->kind == Term::Kind::CtxApp &&
          var_key(e.l) == var_key(e.r)) {
        st.P[i] = Eq{e.l->args[0], e.r->args[0]};
        record(st, "Dec-Ctx", m1, m2);
        return StepKind::Progress;
      }
    }

    // 4: solving variables (almost-linear: no substitution into P is needed)
    for (size_t i = 0; i < st.P.size(); ++i) {
      const Eq e = st.P[i];
      bool lv = e.l->kind == Term::Kind::Var, rv = e.r->kind == Term::Kind::Var;
      if (lv && rv && e.l->sort == Sort::BV) {
        st.bv.unite(e.l, e.r);
        st.P.erase(st.P.begin() + i);
        record(st, "Solve-BV", m1, m2);
        return StepKind::Progress;
      }
      if (lv || rv) {
        TermPtr v = lv ? e.l : e.r;
        TermPtr other = lv ? e.r : e.l;
        if (v->sort == Sort::BV || v->sort == Sort::Int)
          throw std::logic_error("unexpected variable equation: " + to_string(e));
        if (occurs(var_key(v), other)) {
          reason = "Fail-Occurs(" + var_key(v) + ")";
          return StepKind::Fail;
        }
        solve(st, v, other);
        st.P.erase(st.P.begin() + i);
        record(st, "Solve", m1, m2);
        return StepKind::Progress;
      }
      // context application against a first-order variable is impossible here:
      // the variable case above catches it (Exp-sorted variable side)
    }

    // 5: cancellation of a shared environment tail variable
    for (size_t i = 0; i < st.P.size(); ++i) {
      const Eq e = st.P[i];
      if (e.l->kind != Term::Kind::EnvML || e.r->kind != Term::Kind::EnvML) continue;
      for (auto& tl : e.l->tails) {
        for (auto& tr : e.r->tails) {
          if (var_key(tl) != var_key(tr)) continue;
          auto strip = [](const TermPtr& env, const std::string& key) {
            std::vector<TermPtr> tails;
            bool stripped = false;
            for (auto& q : env->tails) {
              if (!stripped && var_key(q) == key) {
                stripped = true;
                continue;
              }
              tails.push_back(q);
            }
            return mk_env(env->elems, tails);
          };
          st.P[i] = Eq{strip(e.l, var_key(tl)), strip(e.r, var_key(tr))};
          record(st, "Cancel-T", m1, m2);
          return StepKind::Progress;
        }
      }
    }

    // 6: branching on the first branchable equation
    for (size_t i = 0; i < st.P.size(); ++i) {
      const Eq& e = st.P[i];
      bool lc = e.l->kind == Term::Kind::CtxApp, rc = e.r->kind == Term::Kind::CtxApp;
      if (lc && rc) return branch_ctx_flex(st, i, children, reason);
      if (lc || rc) return branch_ctx_structure(st, i, lc, children, reason);
      if (e.l->kind == Term::Kind::EnvML && e.r->kind == Term::Kind::EnvML)
        return branch_env(st, i, children, reason);
    }

    throw std::logic_error("no applicable rule for: " + to_string(st.P.front()));
  }

  // child factory: clones the state, removes equation i, then the mutator runs
  State child_of(const State& st, size_t i, std::vector<Eq>* replacement = nullptr) {
    State c = st;
    c.P.erase(c.P.begin() + i);
    if (replacement)
      c.P.insert(c.P.begin() + i, replacement->begin(), replacement->end());
    return c;
  }

  void finish_child(State& c, const std::string& rule, long long m1, long long m2,
                    std::vector<State>& children) {
    record(c, rule, m1, m2);
    children.push_back(std::move(c));
  }

  // --- context variable against structure: X{cls}(s) =? f(t1,...) ---
  StepKind branch_ctx_structure(State& st, size_t i, bool ctx_left,
                                std::vector<State>& children, std::string& reason) {
    const Eq e = st.P[i];
    const TermPtr& cx = ctx_left ? st.P[i].l : st.P[i].r;
    const TermPtr& str = ctx_left ? st.P[i].r : st.P[i].l;
    if (str->kind != Term::Kind::Fun)
      throw std::logic_error("context against non-structure: " + to_string(e));
    long long m1 = mu1_of(st.P), m2 = mu2_of(st.P);
    std::string key = var_key(cx);
    CtxClass cls = cx->cls;
    TermPtr arg = cx->args[0];
    auto mk_eq = [&](TermPtr from_ctx, TermPtr from_str) {
      return ctx_left ? Eq{std::move(from_ctx), std::move(from_str)}
                      : Eq{std::move(from_str), std::move(from_ctx)};
    };

    // empty context
    if (!st.delta1.count(key)) {
      std::vector<Eq> rep{mk_eq(arg, str)};
      State c = child_of(st, i, &rep);
      solve(c, cx, mk_hole());
      finish_child(c, "Empty-C", m1, m2, children);
    }

    const std::string& f = str->name;
    if (f == "app") {
      {  // descend left: any class keeps its class
        State c = child_of(st, i);
        TermPtr x2 = hole_of(fresh_ctx_name(c), cls);
        solve(c, cx, mk_app(x2, str->args[1]));
        c.P.insert(c.P.begin() + i, mk_eq(mk_ctx(x2->name, cls, arg), str->args[0]));
        finish_child(c, "Dec-CA", m1, m2, children);
      }
      if (cls != CtxClass::A) {  // descend right
        State c = child_of(st, i);
        TermPtr x2 = hole_of(fresh_ctx_name(c), cls);
        solve(c, cx, mk_app(str->args[0], x2));
        c.P.insert(c.P.begin() + i, mk_eq(mk_ctx(x2->name, cls, arg), str->args[1]));
        finish_child(c, "Dec-CC", m1, m2, children);
      }
    } else if (f == "let") {
      if (cls != CtxClass::A) {  // descend into the body
        State c = child_of(st, i);
        TermPtr x2 = hole_of(fresh_ctx_name(c), cls);
        solve(c, cx, mk_let(str->args[0], x2));
        c.P.insert(c.P.begin() + i, mk_eq(mk_ctx(x2->name, cls, arg), str->args[1]));
        finish_child(c, "Dec-CC", m1, m2, children);
      }
      if (cls != CtxClass::A) {  // descend into a binding
        State c = child_of(st, i);
        std::string zn = fresh_ctx_name(c);
        TermPtr b = fresh_bv(c);
        TermPtr z = fresh_env(c);
        solve(c, cx, mk_let(mk_env({mk_bind(b, hole_of(zn, cls))}, {z}), str->args[1]));
        c.P.insert(c.P.begin() + i,
                   mk_eq(mk_env({mk_bind(b, mk_ctx(zn, cls, arg))}, {z}), str->args[0]));
        finish_child(c, "Dec-CL", m1, m2, children);
      }
    } else if (f == "lam") {
      if (cls == CtxClass::C) {  // descend under the binder
        State c = child_of(st, i);
        TermPtr x2 = hole_of(fresh_ctx_name(c), cls);
        solve(c, cx, mk_lam(str->args[0], x2));
        c.P.insert(c.P.begin() + i, mk_eq(mk_ctx(x2->name, cls, arg), str->args[1]));
        finish_child(c, "Dec-Lam", m1, m2, children);
      }
    } else if (f == "var") {
      // no descent: a variable has no proper subposition
    } else {
      throw std::logic_error("context against unexpected symbol: " + f);
    }

    if (children.empty()) {
      reason = "Fail-Ctx(" + cls_name_str(cls) + "/" + f + ")";
      return StepKind::Fail;
    }
    return StepKind::Branch;
  }

  static std::string cls_name_str(CtxClass c) { return cls_name(c); }

  // --- two distinct context variables: X{cX}(s) =? Y{cY}(t) ---
  StepKind branch_ctx_flex(State& st, size_t i, std::vector<State>& children,
                           std::string& reason) {
    const Eq e = st.P[i];
    const TermPtr cxl = e.l, cxr = e.r;
    long long m1 = mu1_of(st.P), m2 = mu2_of(st.P);
    std::string kl = var_key(cxl), kr = var_key(cxr);
    CtxClass cl = cxl->cls, cr = cxr->cls;
    TermPtr s = cxl->args[0], t = cxr->args[0];

    // (a) left context empty
    if (!st.delta1.count(kl)) {
      std::vector<Eq> rep{Eq{s, cxr}};
      State c = child_of(st, i, &rep);
      solve(c, cxl, mk_hole());
      finish_child(c, "Empty-C", m1, m2, children);
    }
    // (b) left non-empty, right empty
    if (!st.delta1.count(kr)) {
      std::vector<Eq> rep{Eq{cxl, t}};
      State c = child_of(st, i, &rep);
      c.delta1.insert(kl);
      solve(c, cxr, mk_hole());
      finish_child(c, "Empty-C", m1, m2, children);
    }
    // (c) both non-empty: merge cases
    CtxClass minc = cls_min(cl, cr);
    {  // left path a prefix of the right path (possibly equal)
      State c = child_of(st, i);
      std::string zn = fresh_ctx_name(c);
      std::string yn = fresh_ctx_name(c);
      solve(c, cxl, hole_of(zn, minc));
      solve(c, cxr, mk_ctx(zn, minc, hole_of(yn, cr)));
      c.delta1.insert(zn);
      c.P.insert(c.P.begin() + i, Eq{s, mk_ctx(yn, cr, t)});
      finish_child(c, "Merge-P1", m1, m2, children);
    }
    {  // right path a proper prefix of the left path
      State c = child_of(st, i);
      std::string zn = fresh_ctx_name(c);
      std::string xn = fresh_ctx_name(c);
      solve(c, cxr, hole_of(zn, minc));
      solve(c, cxl, mk_ctx(zn, minc, hole_of(xn, cl)));
      c.delta1.insert(zn);
      c.delta1.insert(xn);
      c.P.insert(c.P.begin() + i, Eq{mk_ctx(xn, cl, s), t});
      finish_child(c, "Merge-P2", m1, m2, children);
    }
    bool la = cl == CtxClass::A, ra = cr == CtxClass::A;
    if (la != ra) {
      // diverging at an application: the application-spine context goes left,
      // the other goes right; no new equation remains
      State c = child_of(st, i);
      std::string zn = fresh_ctx_name(c);
      std::string pn = fresh_ctx_name(c);  // class A part
      std::string qn = fresh_ctx_name(c);  // other part
      const TermPtr& pv = la ? cxl : cxr;  // the A-classed one
      const TermPtr& qv = la ? cxr : cxl;
      const TermPtr& parg = la ? s : t;
      const TermPtr& qarg = la ? t : s;
      solve(c, pv, mk_ctx(zn, CtxClass::A,
                          mk_app(hole_of(pn, CtxClass::A), mk_ctx(qn, qv->cls, qarg))));
      solve(c, qv, mk_ctx(zn, CtxClass::A,
                          mk_app(mk_ctx(pn, CtxClass::A, parg), hole_of(qn, qv->cls))));
      finish_child(c, "Merge-FA", m1, m2, children);
    }
    if (!la && !ra) {
      // diverging at an application, left context into the left argument
      for (int orient = 0; orient < 2; ++orient) {
        State c = child_of(st, i);
        std::string zn = fresh_ctx_name(c);
        std::string xn = fresh_ctx_name(c);
        std::string yn = fresh_ctx_name(c);
        TermPtr xh = hole_of(xn, cl), yh = hole_of(yn, cr);
        TermPtr xs = mk_ctx(xn, cl, s), yt = mk_ctx(yn, cr, t);
        if (orient == 0) {
          solve(c, cxl, mk_ctx(zn, minc, mk_app(xh, yt)));
          solve(c, cxr, mk_ctx(zn, minc, mk_app(xs, yh)));
        } else {
          solve(c, cxl, mk_ctx(zn, minc, mk_app(yt, xh)));
          solve(c, cxr, mk_ctx(zn, minc, mk_app(yh, xs)));
        }
        finish_child(c, "Merge-FC-app", m1, m2, children);
      }
      // diverging at a letrec between a binding and the body
      for (int orient = 0; orient < 2; ++orient) {
        State c = child_of(st, i);
        std::string zn = fresh_ctx_name(c);
        std::string xn = fresh_ctx_name(c);
        std::string yn = fresh_ctx_name(c);
        TermPtr b = fresh_bv(c);
        TermPtr env_rest = fresh_env(c);
        TermPtr xh = hole_of(xn, cl), yh = hole_of(yn, cr);
        TermPtr xs = mk_ctx(xn, cl, s), yt = mk_ctx(yn, cr, t);
        if (orient == 0) {  // left in the binding, right in the body
          solve(c, cxl, mk_ctx(zn, minc, mk_let(mk_env({mk_bind(b, xh)}, {env_rest}), yt)));
          solve(c, cxr, mk_ctx(zn, minc, mk_let(mk_env({mk_bind(b, xs)}, {env_rest}), yh)));
        } else {  // left in the body, right in a binding
          solve(c, cxl, mk_ctx(zn, minc, mk_let(mk_env({mk_bind(b, yt)}, {env_rest}), xh)));
          solve(c, cxr, mk_ctx(zn, minc, mk_let(mk_env({mk_bind(b, yh)}, {env_rest}), xs)));
        }
        finish_child(c, "Merge-FC-let", m1, m2, children);
      }
      {  // diverging at a letrec between two distinct bindings
        State c = child_of(st, i);
        std::string zn = fresh_ctx_name(c);
        std::string xn = fresh_ctx_name(c);
        std::string yn = fresh_ctx_name(c);
        TermPtr b1 = fresh_bv(c);
        TermPtr b2 = fresh_bv(c);
        TermPtr env_rest = fresh_env(c);
        TermPtr body = fresh_exp(c);
        TermPtr xh = hole_of(xn, cl), yh = hole_of(yn, cr);
        TermPtr xs = mk_ctx(xn, cl, s), yt = mk_ctx(yn, cr, t);
        solve(c, cxl, mk_ctx(zn, minc,
                             mk_let(mk_env({mk_bind(b1, xh), mk_bind(b2, yt)}, {env_rest}), body)));
        solve(c, cxr, mk_ctx(zn, minc,
                             mk_let(mk_env({mk_bind(b1, xs), mk_bind(b2, yh)}, {env_rest}), body)));
        finish_child(c, "Merge-FC-env", m1, m2, children);
      }
    }
    if (children.empty()) {
      reason = "Fail-CtxFlex";
      return StepKind::Fail;
    }
    return StepKind::Branch;
  }

  // --- environment equations ---
  StepKind branch_env(State& st, size_t i, std::vector<State>& children, std::string& reason) {
    const Eq e = st.P[i];
    long long m1 = mu1_of(st.P), m2 = mu2_of(st.P);
    const TermPtr &l = e.l, &r = e.r;
    if (l->tails.size() > 1 || r->tails.size() > 1)
      throw std::logic_error("environment equation with several tail variables: " + to_string(e));

    auto binds_of = [](const TermPtr& env) {
      std::vector<size_t> idxs;
      for (size_t k = 0; k < env->elems.size(); ++k)
        if (env->elems[k]->kind == Term::Kind::Fun) idxs.push_back(k);
      return idxs;
    };
    auto chains_of = [](const TermPtr& env) {
      std::vector<size_t> idxs;
      for (size_t k = 0; k < env->elems.size(); ++k)
        if (env->elems[k]->kind == Term::Kind::Chain) idxs.push_back(k);
      return idxs;
    };
    auto without = [](const TermPtr& env, size_t drop, std::vector<TermPtr> extra = {}) {
      std::vector<TermPtr> elems;
      for (size_t k = 0; k < env->elems.size(); ++k)
        if (k != drop) elems.push_back(env->elems[k]);
      for (auto& x : extra) elems.push_back(x);
      return mk_env(std::move(elems), env->tails);
    };

    std::vector<size_t> lb = binds_of(l), rb = binds_of(r);
    std::vector<size_t> lch = chains_of(l), rch = chains_of(r);

    // component decomposition: match a binding against a binding
    for (size_t a : lb)
      for (size_t b : rb) {
        std::vector<Eq> rep{Eq{l->elems[a], r->elems[b]}};
        Eq rem{without(l, a), without(r, b)};
        if (!vacuous_remainder(rem)) rep.push_back(std::move(rem));
        State c = child_of(st, i, &rep);
        finish_child(c, "Dec-E", m1, m2, children);
      }

    // match a binding against part of a chain on the opposite side
    auto chain_cases = [&](bool bind_left, size_t bi, size_t ci) {
      const TermPtr& bside = bind_left ? l : r;
      const TermPtr& cside = bind_left ? r : l;
      const TermPtr bindc = bside->elems[bi];
      const TermPtr chain = cside->elems[ci];
      TermPtr lo = chain->args[0], hi = chain->args[1];
      auto link = [](const TermPtr& up, const TermPtr& down) {
        // bind(y@up, A@up(var(y@down)))
        return mk_bind(mk_var("y", Sort::BV, up),
                       mk_ctx("A", CtxClass::A, mk_varE(mk_var("y", Sort::BV, down)), up));
      };
      auto succ = [](const TermPtr& a, const TermPtr& b) { return IntCon{true, var_key(a), var_key(b)}; };
      auto less = [](const TermPtr& a, const TermPtr& b) { return IntCon{false, var_key(a), var_key(b)}; };
      auto emit = [&](const std::string& rule, State c, const TermPtr& lk,
                      const std::vector<TermPtr>& rest_chains, const std::vector<IntCon>& cons) {
        TermPtr bset = without(bind_left ? c.P[i].l : c.P[i].r, bi);
        TermPtr cset = without(bind_left ? c.P[i].r : c.P[i].l, ci, rest_chains);
        c.P[i] = bind_left ? Eq{bindc, lk} : Eq{lk, bindc};
        Eq rem = bind_left ? Eq{bset, cset} : Eq{cset, bset};
        if (!vacuous_remainder(rem)) c.P.insert(c.P.begin() + i + 1, std::move(rem));
        for (auto& con : cons)
          if (!add_delta2(c, con)) return;  // index constraints unsatisfiable: drop
        c.delta1.insert(var_key(lk->args[1]));  // the matched chain context is non-empty
        // record how the atom decomposed so solved instances can re-expose the
        // explicit link when the final system is instantiated
        std::vector<TermPtr> repl{lk};
        for (auto& rc : rest_chains) repl.push_back(rc);
        c.chain_splits[to_string(chain)] = repl;
        finish_child(c, rule, m1, m2, children);
      };
      // the whole chain is this single link
      emit("Dec-Ch1", st, link(hi, lo), {}, {succ(lo, hi)});
      {  // the first link of a longer chain
        State c = st;
        TermPtr n3 = fresh_int(c);
        emit("Dec-Ch2", c, link(n3, lo), {mk_chain(n3, hi)}, {succ(lo, n3), less(n3, hi)});
      }
      {  // the last link of a longer chain
        State c = st;
        TermPtr n3 = fresh_int(c);
        emit("Dec-Ch3", c, link(hi, n3), {mk_chain(lo, n3)}, {less(lo, n3), succ(n3, hi)});
      }
      {  // a middle link of a longer chain
        State c = st;
        TermPtr n3 = fresh_int(c);
        TermPtr n4 = fresh_int(c);
        emit("Dec-Ch4", c, link(n4, n3), {mk_chain(lo, n3), mk_chain(n4, hi)},
             {less(lo, n3), succ(n3, n4), less(n4, hi)});
      }
    };
    for (size_t a : lb)
      for (size_t cix : rch) chain_cases(true, a, cix);
    for (size_t b : rb)
      for (size_t cix : lch) chain_cases(false, b, cix);

    // both remainders absorbed by the two distinct tail variables
    if (l->tails.size() == 1 && r->tails.size() == 1 &&
        var_key(l->tails[0]) != var_key(r->tails[0])) {
      const TermPtr r1 = l->tails[0], r2 = r->tails[0];
      bool occ = false;
      for (auto& c2 : r->elems) occ = occ || occurs(var_key(r1), c2);
      for (auto& c2 : l->elems) occ = occ || occurs(var_key(r2), c2);
      if (!occ) {
        State c = child_of(st, i);
        TermPtr z3 = fresh_env(c);
        solve(c, r1, mk_env(r->elems, {z3}));
        solve(c, r2, mk_env(l->elems, {z3}));
        finish_child(c, "Solve-E", m1, m2, children);
      }
    }

    if (children.empty()) {
      reason = "Fail-E";
      return StepKind::Fail;
    }
    return StepKind::Branch;
  }

  // --- finalization ---
  FinalSystem finalize(const State& st) {
    FinalSystem f;
    f.solved_chrono = st.solved_chrono;
    f.sub = st.sub;
    f.bv = st.bv;
    f.delta1 = st.delta1;
    f.delta2 = st.delta2;
    f.trace = st.trace;
    f.chain_splits = st.chain_splits;
    f.delta2_sat = delta2_least_model(f.delta2, f.model);
    if (f.delta2_sat) f.dvc_ok = check_dvc(f);
    return f;
  }

  // distinct-variable convention: collect binder occurrences of the unified
  // overlap term (through the union-find) and require them pairwise distinct
  bool check_dvc(const FinalSystem& f) {
    Subst full = f.full_sub();
    TermPtr overlap = apply_star(full, prob.init.l);
    std::map<std::string, int> count;
    collect_binders(overlap, f, count);
    for (auto& [k, n] : count)
      if (n >= 2) return false;
    return true;
  }

  void collect_binders(const TermPtr& t, const FinalSystem& f, std::map<std::string, int>& count) {
    switch (t->kind) {
      case Term::Kind::Fun:
        if ((t->name == "lam" || t->name == "bind") && t->args[0]->kind == Term::Kind::Var)
          count[f.bv.rep(var_key(t->args[0]))]++;
        for (auto& a : t->args) collect_binders(a, f, count);
        return;
      case Term::Kind::EnvML:
        for (auto& e2 : t->elems) collect_binders(e2, f, count);
        return;
      case Term::Kind::Chain: {
        // a remaining chain piece binds y@hi (its interior binders are fresh)
        TermPtr yhi = mk_var("y", Sort::BV, t->args[1]);
        count[f.bv.rep(var_key(yhi))]++;
        return;
      }
      case Term::Kind::CtxApp:
        collect_binders(t->args[0], f, count);
        return;
      default:
        return;
    }
  }

  // --- search loop ---
  void run() {
    State init;
    init.P = {prob.init};
    init.delta1 = prob.delta1;
    init.delta2 = prob.delta2;
    for (auto& c : init.delta2) init.delta2_seen.insert(to_string(c));
    {
      std::map<std::string, long long> m;
      if (!delta2_least_model(init.delta2, m))
        throw std::logic_error("initial index constraints unsatisfiable");
    }
    std::vector<State> stack;
    stack.push_back(std::move(init));
    while (!stack.empty()) {
      State st = std::move(stack.back());
      stack.pop_back();
      ++stats.states;
      bool alive = true;
      while (alive) {
        if (++stats.steps > opt.max_states) {
          stats.budget_exhausted = true;
          return;
        }
        std::vector<State> children;
        std::string reason;
        StepKind k = step(st, children, reason);
        switch (k) {
          case StepKind::Final:
            finals.push_back(finalize(st));
            alive = false;
            break;
          case StepKind::Progress:
            break;
          case StepKind::Fail:
            alive = false;
            break;
          case StepKind::Branch:
            for (auto it = children.rbegin(); it != children.rend(); ++it)
              stack.push_back(std::move(*it));
            alive = false;
            break;
          case StepKind::None:
            throw std::logic_error("engine made no step");
        }
      }
    }
  }
};

}  // namespace

std::vector<FinalSystem> unify(const InitialProblem& p, const UnifyOptions& opt, UnifyStats& stats) {
  Engine eng(p, opt, stats);
  eng.run();
  set_canon_keys(p, eng.finals);
  return std::move(eng.finals);
}

// ---------------------------------------------------------------------------
// canonical renaming for duplicate elimination and stable display

namespace {
struct Renamer {
  std::map<std::string, std::string> map;  // original key -> canonical name
  int ne = 0, nv = 0, nb = 0, nc = 0, nn = 0, nd = 0;

  std::string fo_name(const std::string& key, Sort s) {
    auto it = map.find(key);
    if (it != map.end()) return it->second;
    std::string n;
    switch (s) {
      case Sort::Exp: n = "%e" + std::to_string(++ne); break;
      case Sort::Env: n = "%v" + std::to_string(++nv); break;
      case Sort::BV: n = "%b" + std::to_string(++nb); break;
      case Sort::Int: n = "%n" + std::to_string(++nn); break;
      case Sort::Bind: n = "%d" + std::to_string(++nd); break;
    }
    map[key] = n;
    return n;
  }
  std::string ctx_name(const std::string& key) {
    auto it = map.find(key);
    if (it != map.end()) return it->second;
    std::string n = "%c" + std::to_string(++nc);
    map[key] = n;
    return n;
  }
};

void render_canon(const TermPtr& t, Renamer& rn, std::ostream& os) {
  switch (t->kind) {
    case Term::Kind::Var:
      if (t->idx) {
        // reserved indexed names keep their base; the index is renamed
        os << t->name << "@";
        if (t->idx->kind == Term::Kind::IntConst)
          os << t->idx->ival;
        else
          os << rn.fo_name(var_key(t->idx), Sort::Int);
      } else {
        os << rn.fo_name(var_key(t), t->sort);
      }
      os << ":" << sort_name(t->sort);
      return;
    case Term::Kind::IntConst:
      os << t->ival;
      return;
    case Term::Kind::Fun: {
      os << t->name << "(";
      bool first = true;
      for (auto& a : t->args) {
        if (!first) os << ", ";
        first = false;
        render_canon(a, rn, os);
      }
      os << ")";
      return;
    }
    case Term::Kind::EnvML: {
      // canonical order must be taken after renaming; render components first
      std::vector<std::string> parts;
      for (auto& e2 : t->elems) {
        std::ostringstream o2;
        render_canon(e2, rn, o2);
        parts.push_back(o2.str());
      }
      std::vector<std::string> tl;
      for (auto& q : t->tails) {
        std::ostringstream o2;
        render_canon(q, rn, o2);
        tl.push_back(o2.str());
      }
      os << "env*({";
      for (size_t k = 0; k < parts.size(); ++k) os << (k ? ", " : "") << parts[k];
      os << "}";
      if (!tl.empty()) {
        os << " ; ";
        for (size_t k = 0; k < tl.size(); ++k) os << (k ? ", " : "") << tl[k];
      }
      os << ")";
      return;
    }
    case Term::Kind::Chain:
      os << "BCh(";
      if (t->args[0]->kind == Term::Kind::IntConst)
        os << t->args[0]->ival;
      else
        os << rn.fo_name(var_key(t->args[0]), Sort::Int);
      os << ", ";
      if (t->args[1]->kind == Term::Kind::IntConst)
        os << t->args[1]->ival;
      else
        os << rn.fo_name(var_key(t->args[1]), Sort::Int);
      os << ")";
      return;
    case Term::Kind::CtxApp:
      if (t->idx) {
        os << t->name << "@";
        if (t->idx->kind == Term::Kind::IntConst)
          os << t->idx->ival;
        else
          os << rn.fo_name(var_key(t->idx), Sort::Int);
      } else {
        os << rn.ctx_name(var_key(t));
      }
      os << "{" << cls_name(t->cls) << "}(";
      render_canon(t->args[0], rn, os);
      os << ")";
      return;
    case Term::Kind::Hole:
      os << "[]";
      return;
  }
}
}  // namespace

std::string canonical_key(const InitialProblem& p, const FinalSystem& f) {
  Renamer rn;
  // the problem variables keep their own names, assigned first in a fixed order
  std::vector<VarRef> vars;
  collect_vars(p.init.l, vars);
  collect_vars(p.init.r, vars);
  std::vector<VarRef> ordered;
  std::set<std::string> seen;
  for (auto& v : vars)
    if (seen.insert(v.key).second) ordered.push_back(v);
  for (auto& v : ordered) rn.map[v.key] = v.key;

  Subst full = f.full_sub();
  std::ostringstream os;
  for (auto& v : ordered) {
    os << v.key << " := ";
    if (v.kind == Term::Kind::CtxApp) {
      TermPtr probe = mk_ctx(v.key.substr(0, v.key.find('@')), v.cls, mk_hole(),
                             v.key.find('@') == std::string::npos
                                 ? nullptr
                                 : mk_var(v.key.substr(v.key.find('@') + 1), Sort::Int));
      render_canon(apply_star(full, probe), rn, os);
    } else if (v.sort == Sort::Int) {
      os << v.key;  // constrained only through the index constraints below
    } else {
      std::string base = v.key;
      TermPtr idx;
      auto at = v.key.find('@');
      if (at != std::string::npos) {
        base = v.key.substr(0, at);
        idx = mk_var(v.key.substr(at + 1), Sort::Int);
      }
      render_canon(apply_star(full, mk_var(base, v.sort, idx)), rn, os);
    }
    os << "\n";
  }
  os << "bv:";
  for (auto& cls : f.bv.classes()) {
    std::vector<std::string> names;
    for (auto& m : cls) {
      auto at = m.find('@');
      if (at != std::string::npos)
        names.push_back(m.substr(0, at) + "@" + rn.fo_name(m.substr(at + 1), Sort::Int));
      else
        names.push_back(rn.fo_name(m, Sort::BV));
    }
    std::sort(names.begin(), names.end());
    os << " {";
    for (size_t k = 0; k < names.size(); ++k) os << (k ? "," : "") << names[k];
    os << "}";
  }
  os << "\nd1:";
  {
    std::vector<std::string> d1;
    for (auto& k : f.delta1) {
      if (f.sub.ctx.count(k)) continue;  // solved: the constraint lives on in the image
      auto at = k.find('@');
      if (at != std::string::npos)
        d1.push_back(k.substr(0, at) + "@" + rn.fo_name(k.substr(at + 1), Sort::Int));
      else
        d1.push_back(rn.ctx_name(k));
    }
    std::sort(d1.begin(), d1.end());
    for (auto& k : d1) os << " " << k;
  }
  os << "\nd2:";
  {
    std::vector<std::string> d2;
    for (auto& c : f.delta2)
      d2.push_back(rn.fo_name(c.a, Sort::Int) + (c.succ ? "+1=" : "<") + rn.fo_name(c.b, Sort::Int));
    std::sort(d2.begin(), d2.end());
    for (auto& k : d2) os << " " << k;
  }
  return os.str();
}

void set_canon_keys(const InitialProblem& p, std::vector<FinalSystem>& finals) {
  for (auto& f : finals) f.canon_key = canonical_key(p, f);
}

std::vector<FinalSystem> dedup_finals(std::vector<FinalSystem> finals) {
  std::set<std::string> seen;
  std::vector<FinalSystem> out;
  for (auto& f : finals) {
    if (f.canon_key.empty()) throw std::logic_error("dedup before canonical keys were set");
    if (seen.insert(f.canon_key).second) out.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// ground soundness oracle

namespace {
std::string mangle(const std::string& key) {
  std::string o;
  for (char c : key) o += (c == '@' ? '_' : c);
  return o;
}

TermPtr ground_close(const TermPtr& t, const FinalSystem& f) {
  switch (t->kind) {
    case Term::Kind::Var:
      switch (sort_of(t)) {
        case Sort::Exp: return mk_varE(mk_var("u_" + mangle(var_key(t)), Sort::BV));
        case Sort::Env: return mk_empty_env();
        case Sort::BV: return t;     // already a representative
        case Sort::Int: return mk_int(1);  // unconstrained index
        case Sort::Bind: throw std::logic_error("ground_close: Bind variable");
      }
      return t;
    case Term::Kind::IntConst:
      return t;
    case Term::Kind::Hole:
      throw std::logic_error("ground_close: hole outside a context image");
    case Term::Kind::Fun: {
      std::vector<TermPtr> args;
      for (auto& a : t->args) args.push_back(ground_close(a, f));
      return mk_fun(t->name, std::move(args));
    }
    case Term::Kind::EnvML: {
      std::vector<TermPtr> elems, tails;
      for (auto& e : t->elems) {
        if (e->kind == Term::Kind::Chain) {
          if (e->args[0]->kind != Term::Kind::IntConst || e->args[1]->kind != Term::Kind::IntConst)
            throw std::logic_error("ground_close: chain with non-constant bounds: " + to_string(e));
          for (auto& b : expand_chain_binds(e->args[0]->ival, e->args[1]->ival))
            elems.push_back(ground_close(b, f));
        } else {
          elems.push_back(ground_close(e, f));
        }
      }
      for (auto& q : t->tails) tails.push_back(ground_close(q, f));
      return mk_env(std::move(elems), std::move(tails));
    }
    case Term::Kind::Chain:
      throw std::logic_error("ground_close: chain outside an environment");
    case Term::Kind::CtxApp: {
      TermPtr inner = ground_close(t->args[0], f);
      // non-empty witness, valid for every class: app([], fresh variable)
      return mk_app(inner, mk_varE(mk_var("u_" + mangle(var_key(t)), Sort::BV)));
    }
  }
  return t;
}
}  // namespace

namespace {
// expand every chain atom (bounds already concrete) into explicit link bindings
TermPtr expand_chains(const TermPtr& t) {
  switch (t->kind) {
    case Term::Kind::Var:
    case Term::Kind::IntConst:
    case Term::Kind::Hole:
    case Term::Kind::Chain:
      return t;
    case Term::Kind::Fun: {
      std::vector<TermPtr> args;
      for (auto& a : t->args) args.push_back(expand_chains(a));
      return mk_fun(t->name, std::move(args));
    }
    case Term::Kind::EnvML: {
      std::vector<TermPtr> elems;
      for (auto& e : t->elems) {
        if (e->kind == Term::Kind::Chain) {
          if (e->args[0]->kind != Term::Kind::IntConst || e->args[1]->kind != Term::Kind::IntConst)
            throw std::logic_error("expand_chains: non-constant bounds in " + to_string(e));
          for (auto& b : expand_chain_binds(e->args[0]->ival, e->args[1]->ival))
            elems.push_back(b);
        } else {
          elems.push_back(expand_chains(e));
        }
      }
      std::vector<TermPtr> tails = t->tails;
      return mk_env(std::move(elems), std::move(tails));
    }
    case Term::Kind::CtxApp:
      return mk_ctx(t->name, t->cls, expand_chains(t->args[0]), t->idx);
  }
  return t;
}

// rewrite an indexed key through the index model ("y@N2" -> "y@3")
std::string concretize_key(const std::string& key, const std::map<std::string, long long>& model) {
  auto at = key.find('@');
  if (at == std::string::npos) return key;
  auto it = model.find(key.substr(at + 1));
  if (it == model.end()) return key;
  return key.substr(0, at) + "@" + std::to_string(it->second);
}
}  // namespace

TermPtr ground_instance(const FinalSystem& f, const TermPtr& t) {
  // solved images with all index variables made concrete, keyed by the
  // concrete names, so that chain links introduced by expansion still see the
  // identifications the derivation made for them
  Subst ints;
  for (auto& [k, v] : f.model) ints.ints[k] = mk_int(v);
  Subst full = f.full_sub();
  Subst conc;
  conc.ints = ints.ints;
  for (auto& [k, img] : full.fo) conc.fo[concretize_key(k, f.model)] = apply_star(ints, img);
  for (auto& [k, img] : full.ctx) conc.ctx[concretize_key(k, f.model)] = apply_star(ints, img);
  TermPtr u = apply_star(ints, t);
  u = apply_star(conc, u);
  u = expand_chains(u);
  u = apply_star(conc, u);  // resolve links the expansion introduced
  return ground_close(u, f);
}

bool check_sound(const InitialProblem& p, const FinalSystem& f, std::string* why) {
  if (!f.delta2_sat) {
    if (why) *why = "index constraints unsatisfiable";
    return false;
  }
  TermPtr g1 = ground_instance(f, p.init.l);
  TermPtr g2 = ground_instance(f, p.init.r);
  if (lc_equal(g1, g2)) return true;
  if (why) *why = "instantiated sides differ:\n  " + to_string(g1) + "\n  " + to_string(g2);
  return false;
}

}  // namespace lcsx
