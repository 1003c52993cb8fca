#include "diagram.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace lcsx {

namespace {

std::string index_suffix(const std::string& key) {
  auto p = key.find('@');
  return p == std::string::npos ? std::string() : key.substr(p + 1);
}

// fork facts with helper views: bound-variable identifications and the
// difference-bound entailment over the fork's integer constraints
struct Facts {
  const MatchCtx& mc;
  std::map<std::string, int> cls_of;

  explicit Facts(const MatchCtx& m) : mc(m) {
    for (size_t i = 0; i < m.bv_classes.size(); ++i)
      for (auto& k : m.bv_classes[i]) cls_of[k] = (int)i;
  }

  // the chain index a bound-variable key stands for: its own @-suffix, or the
  // suffix of any identified variable
  std::string chain_index(const std::string& key) const {
    std::string s = index_suffix(key);
    if (!s.empty()) return s;
    auto it = cls_of.find(key);
    if (it == cls_of.end()) return {};
    for (auto& m : mc.bv_classes[it->second]) {
      s = index_suffix(m);
      if (!s.empty()) return s;
    }
    return {};
  }

  bool entails(const IntCon& c) const { return delta2_entails(mc.facts, c); }
  bool entails_eq(const std::string& a, const std::string& b) const {
    if (a == b) return true;
    return delta2_entails_le(mc.facts, a, b) && delta2_entails_le(mc.facts, b, a);
  }
};

// a rule-pattern match in progress: pattern variables solved against rigid
// term material; chain atoms solved against sequences of environment elements
struct MState {
  Subst sub;
  std::set<std::string> bv_targets;  // rigid variables already taken by binders
  std::map<std::string, std::vector<TermPtr>> chain_elems;
};

struct Matcher {
  const Facts& fx;
  using Cont = std::function<void(const MState&)>;

  // enumerate images with hole of class `cls` over the rigid term: every way
  // of descending to a hole position, absorbing rigid context variables whose
  // class is included in `cls`
  void enum_ctx(CtxClass cls, const TermPtr& t,
                const std::function<void(const TermPtr&, const TermPtr&)>& yield) {
    yield(mk_hole(), t);
    switch (t->kind) {
      case Term::Kind::Fun:
        if (t->name == "app") {
          enum_ctx(cls, t->args[0],
                   [&](const TermPtr& I, const TermPtr& u) { yield(mk_app(I, t->args[1]), u); });
          if (cls != CtxClass::A)
            enum_ctx(cls, t->args[1],
                     [&](const TermPtr& I, const TermPtr& u) { yield(mk_app(t->args[0], I), u); });
        } else if (t->name == "let" && cls != CtxClass::A) {
          enum_ctx(cls, t->args[1],
                   [&](const TermPtr& I, const TermPtr& u) { yield(mk_let(t->args[0], I), u); });
          if (t->args[0]->kind == Term::Kind::EnvML) {
            const TermPtr& env = t->args[0];
            for (size_t i = 0; i < env->elems.size(); ++i) {
              const TermPtr& e = env->elems[i];
              if (e->kind != Term::Kind::Fun || e->name != "bind") continue;
              enum_ctx(cls, e->args[1], [&](const TermPtr& I, const TermPtr& u) {
                std::vector<TermPtr> elems = env->elems;
                elems[i] = mk_bind(e->args[0], I);
                yield(mk_let(mk_env(elems, env->tails), t->args[1]), u);
              });
            }
          }
        } else if (t->name == "lam" && cls == CtxClass::C) {
          enum_ctx(cls, t->args[1],
                   [&](const TermPtr& I, const TermPtr& u) { yield(mk_lam(t->args[0], I), u); });
        }
        return;
      case Term::Kind::CtxApp:
        if (cls_leq(t->cls, cls))
          enum_ctx(cls, t->args[0], [&](const TermPtr& I, const TermPtr& u) {
            yield(mk_ctx(t->name, t->cls, I, t->idx), u);
          });
        return;
      default:
        return;
    }
  }

  void M(const TermPtr& p, const TermPtr& t, const MState& st, const Cont& k) {
    switch (p->kind) {
      case Term::Kind::Var: {
        std::string key = var_key(p);
        if (p->sort == Sort::Int) {
          if (!(t->kind == Term::Kind::IntConst || (t->kind == Term::Kind::Var && t->sort == Sort::Int)))
            return;
          auto it = st.sub.ints.find(key);
          if (it != st.sub.ints.end()) {
            if (lc_equal(it->second, t)) k(st);
            return;
          }
          MState s2 = st;
          s2.sub.ints[key] = t;
          k(s2);
          return;
        }
        if (sort_of(t) != p->sort) return;
        auto it = st.sub.fo.find(key);
        if (it != st.sub.fo.end()) {
          if (lc_equal(it->second, t)) k(st);
          return;
        }
        if (p->sort == Sort::BV) {
          if (t->kind != Term::Kind::Var) return;
          std::string tk = var_key(t);
          if (st.bv_targets.count(tk)) return;  // distinct binders stay distinct
          MState s2 = st;
          s2.bv_targets.insert(tk);
          s2.sub.fo[key] = t;
          k(s2);
          return;
        }
        MState s2 = st;
        s2.sub.fo[key] = t;
        k(s2);
        return;
      }
      case Term::Kind::IntConst:
        if (t->kind == Term::Kind::IntConst && t->ival == p->ival) k(st);
        return;
      case Term::Kind::Fun: {
        if (t->kind != Term::Kind::Fun || t->name != p->name || t->args.size() != p->args.size()) return;
        M_seq(p->args, t->args, 0, st, k);
        return;
      }
      case Term::Kind::CtxApp: {
        std::string key = var_key(p);
        if (st.sub.ctx.count(key))
          throw std::logic_error("matcher: context variable bound twice in a pattern");
        enum_ctx(p->cls, t, [&](const TermPtr& I, const TermPtr& u) {
          MState s2 = st;
          s2.sub.ctx[key] = I;
          M(p->args[0], u, s2, k);
        });
        return;
      }
      case Term::Kind::EnvML:
        M_env(p, t, st, k);
        return;
      default:
        throw std::logic_error("matcher: unexpected pattern node");
    }
  }

  void M_seq(const std::vector<TermPtr>& ps, const std::vector<TermPtr>& ts, size_t i,
             const MState& st, const Cont& k) {
    if (i == ps.size()) {
      k(st);
      return;
    }
    M(ps[i], ts[i], st, [&](const MState& s2) { M_seq(ps, ts, i + 1, s2, k); });
  }

  // a usable chain piece over the term environment: a rigid chain atom, or an
  // explicit binding y@d = A[y@c] with entailed c+1 = d
  struct Piece {
    size_t j;
    std::string start, end;
  };

  void M_env(const TermPtr& p, const TermPtr& t, const MState& st0, const Cont& k) {
    if (t->kind != Term::Kind::EnvML) return;  // opaque or non-environment term
    std::vector<TermPtr> pbinds;
    std::vector<TermPtr> pchains;
    for (auto& e : p->elems) {
      if (e->kind == Term::Kind::Chain)
        pchains.push_back(e);
      else
        pbinds.push_back(e);
    }
    if (pchains.size() > 1) throw std::logic_error("matcher: more than one chain in a pattern");
    if (p->tails.size() > 1) throw std::logic_error("matcher: more than one tail in a pattern");

    std::vector<char> used(t->elems.size(), 0);

    std::function<void(const MState&)> do_tail = [&](const MState& st) {
      std::vector<TermPtr> leftover;
      for (size_t j = 0; j < t->elems.size(); ++j)
        if (!used[j]) leftover.push_back(t->elems[j]);
      if (p->tails.empty()) {
        if (leftover.empty() && t->tails.empty()) k(st);
        return;
      }
      M(p->tails[0], mk_env(leftover, t->tails), st, k);
    };

    std::function<void(const MState&)> do_chain = [&](const MState& st) {
      if (pchains.empty()) {
        do_tail(st);
        return;
      }
      const TermPtr& ch = pchains[0];
      std::string chkey = to_string(ch);
      // candidate pieces among the unused elements
      std::vector<Piece> cand;
      for (size_t j = 0; j < t->elems.size(); ++j) {
        if (used[j]) continue;
        const TermPtr& e = t->elems[j];
        if (e->kind == Term::Kind::Chain) {
          if (e->args[0]->kind == Term::Kind::Var && e->args[1]->kind == Term::Kind::Var)
            cand.push_back({j, e->args[0]->name, e->args[1]->name});
        } else if (e->kind == Term::Kind::Fun && e->name == "bind" &&
                   e->args[0]->kind == Term::Kind::Var) {
          std::string d = fx.chain_index(var_key(e->args[0]));
          if (d.empty()) continue;
          TermPtr cur = e->args[1];
          for (;;) {
            if (cur->kind == Term::Kind::CtxApp && cur->cls == CtxClass::A)
              cur = cur->args[0];
            else if (cur->kind == Term::Kind::Fun && cur->name == "app")
              cur = cur->args[0];
            else
              break;
          }
          if (!(cur->kind == Term::Kind::Fun && cur->name == "var" && cur->args[0]->kind == Term::Kind::Var))
            continue;
          std::string c = fx.chain_index(var_key(cur->args[0]));
          if (c.empty()) continue;
          if (!fx.entails({true, c, d})) continue;  // link needs c+1 = d
          cand.push_back({j, c, d});
        }
      }

      // grow contiguous regions; close by binding the pattern's endpoints
      std::function<void(std::vector<size_t>&, const std::string&, const std::string&,
                         const MState&)>
          grow = [&](std::vector<size_t>& region, const std::string& lo, const std::string& hi,
                     const MState& st1) {
            // close the region here
            M(ch->args[0], mk_var(lo, Sort::Int), st1, [&](const MState& s2) {
              M(ch->args[1], mk_var(hi, Sort::Int), s2, [&](const MState& s3) {
                MState s4 = s3;
                auto& lst = s4.chain_elems[chkey];
                for (size_t j : region) lst.push_back(t->elems[j]);
                do_tail(s4);
              });
            });
            // or extend with an adjacent piece
            for (auto& pc : cand) {
              if (used[pc.j]) continue;
              if (!fx.entails_eq(hi, pc.start)) continue;
              used[pc.j] = 1;
              region.push_back(pc.j);
              grow(region, lo, pc.end, st1);
              region.pop_back();
              used[pc.j] = 0;
            }
          };
      for (auto& pc : cand) {
        if (used[pc.j]) continue;
        used[pc.j] = 1;
        std::vector<size_t> region{pc.j};
        grow(region, pc.start, pc.end, st);
        used[pc.j] = 0;
      }
    };

    std::function<void(size_t, const MState&)> step_bind = [&](size_t bi, const MState& st) {
      if (bi == pbinds.size()) {
        do_chain(st);
        return;
      }
      for (size_t j = 0; j < t->elems.size(); ++j) {
        if (used[j]) continue;
        if (t->elems[j]->kind != Term::Kind::Fun) continue;
        used[j] = 1;
        M(pbinds[bi], t->elems[j], st, [&](const MState& s2) { step_bind(bi + 1, s2); });
        used[j] = 0;
      }
    };
    step_bind(0, st0);
  }
};

// a context image is definitely non-empty when a function symbol lies on its
// hole path or a rigid context variable on the path is known non-empty
bool def_nonempty(const TermPtr& I, const Facts& fx) {
  switch (I->kind) {
    case Term::Kind::Hole:
      return false;
    case Term::Kind::CtxApp:
      if (fx.mc.nonempty.count(var_key(I))) return true;
      return def_nonempty(I->args[0], fx);
    default:
      return true;
  }
}

// instantiate a rule side under a completed match
TermPtr subst_pat(const TermPtr& p, const MState& st) {
  switch (p->kind) {
    case Term::Kind::Var: {
      std::string key = var_key(p);
      if (p->sort == Sort::Int) return st.sub.ints.at(key);
      return st.sub.fo.at(key);
    }
    case Term::Kind::IntConst:
      return p;
    case Term::Kind::Fun: {
      std::vector<TermPtr> as;
      for (auto& a : p->args) as.push_back(subst_pat(a, st));
      return mk_fun(p->name, as);
    }
    case Term::Kind::CtxApp: {
      TermPtr I = st.sub.ctx.at(var_key(p));
      return fill_hole(I, subst_pat(p->args[0], st));
    }
    case Term::Kind::EnvML: {
      std::vector<TermPtr> elems, tails;
      for (auto& e : p->elems) {
        if (e->kind == Term::Kind::Chain) {
          auto it = st.chain_elems.find(to_string(e));
          if (it == st.chain_elems.end()) throw std::logic_error("unsolved chain in rule side");
          for (auto& x : it->second) elems.push_back(x);
        } else {
          elems.push_back(subst_pat(e, st));
        }
      }
      for (auto& z : p->tails) tails.push_back(subst_pat(z, st));
      return mk_env(elems, tails);
    }
    default:
      throw std::logic_error("subst_pat: unexpected pattern node");
  }
}

// canonical renaming for the join test: variables renamed in first-occurrence
// order; iterated so the environment reordering it may cause settles
struct Renamer {
  std::map<std::string, std::string> map;
  int ne = 0, nv = 0, nb = 0, nn = 0, nc = 0;

  std::string name_for(const std::string& key, Sort s, bool is_ctx) {
    auto it = map.find(key);
    if (it != map.end()) return it->second;
    std::string n;
    if (is_ctx)
      n = "c" + std::to_string(++nc);
    else
      switch (s) {
        case Sort::Exp: n = "e" + std::to_string(++ne); break;
        case Sort::Env: n = "v" + std::to_string(++nv); break;
        case Sort::BV: n = "b" + std::to_string(++nb); break;
        case Sort::Int: n = "n" + std::to_string(++nn); break;
        default: n = "u" + std::to_string(++ne); break;
      }
    map[key] = n;
    return n;
  }

  TermPtr rename(const TermPtr& t) {
    switch (t->kind) {
      case Term::Kind::Var: {
        if (t->idx) {
          TermPtr ix = rename(t->idx);
          return mk_var(t->name, t->sort, ix);  // keep the indexed base name
        }
        return mk_var(name_for(var_key(t), t->sort, false), t->sort);
      }
      case Term::Kind::IntConst:
      case Term::Kind::Hole:
        return t;
      case Term::Kind::Fun: {
        std::vector<TermPtr> as;
        for (auto& a : t->args) as.push_back(rename(a));
        return mk_fun(t->name, as);
      }
      case Term::Kind::CtxApp: {
        if (t->idx) {
          TermPtr ix = rename(t->idx);
          return mk_ctx(t->name, t->cls, rename(t->args[0]), ix);
        }
        std::string n = name_for(var_key(t), Sort::Exp, true);
        return mk_ctx(n, t->cls, rename(t->args[0]));
      }
      case Term::Kind::EnvML: {
        std::vector<TermPtr> es, zs;
        for (auto& e : t->elems) es.push_back(rename(e));
        for (auto& z : t->tails) zs.push_back(rename(z));
        return mk_env(es, zs);
      }
      case Term::Kind::Chain:
        return mk_chain(rename(t->args[0]), rename(t->args[1]));
    }
    return t;
  }
};

TermPtr canon_rename(const TermPtr& t) {
  TermPtr u = t;
  for (int i = 0; i < 2; ++i) {
    Renamer r;
    u = r.rename(u);
  }
  return u;
}

bool join_equal(const TermPtr& a, const TermPtr& b) {
  if (lc_equal(a, b)) return true;
  return lc_equal(canon_rename(a), canon_rename(b));
}

// surface positions: every subterm not under a lambda binder, descending only
// through context variables of class A or S
void surface_positions(
    const TermPtr& t, const std::function<TermPtr(const TermPtr&)>& rb,
    std::vector<std::pair<TermPtr, std::function<TermPtr(const TermPtr&)>>>& out) {
  out.push_back({t, rb});
  switch (t->kind) {
    case Term::Kind::Fun:
      if (t->name == "app") {
        surface_positions(
            t->args[0], [rb, t](const TermPtr& x) { return rb(mk_app(x, t->args[1])); }, out);
        surface_positions(
            t->args[1], [rb, t](const TermPtr& x) { return rb(mk_app(t->args[0], x)); }, out);
      } else if (t->name == "let") {
        if (t->args[0]->kind == Term::Kind::EnvML) {
          const TermPtr& env = t->args[0];
          for (size_t i = 0; i < env->elems.size(); ++i) {
            const TermPtr& e = env->elems[i];
            if (e->kind != Term::Kind::Fun || e->name != "bind") continue;
            surface_positions(
                e->args[1],
                [rb, t, env, i, e](const TermPtr& x) {
                  std::vector<TermPtr> elems = env->elems;
                  elems[i] = mk_bind(e->args[0], x);
                  return rb(mk_let(mk_env(elems, env->tails), t->args[1]));
                },
                out);
          }
        }
        surface_positions(
            t->args[1], [rb, t](const TermPtr& x) { return rb(mk_let(t->args[0], x)); }, out);
      }
      return;
    case Term::Kind::CtxApp:
      if (t->cls == CtxClass::A || t->cls == CtxClass::S)
        surface_positions(
            t->args[0],
            [rb, t](const TermPtr& x) { return rb(mk_ctx(t->name, t->cls, x, t->idx)); }, out);
      return;
    default:
      return;
  }
}

}  // namespace

MatchCtx match_ctx_of(const FinalSystem& f) {
  MatchCtx mc;
  mc.facts = f.delta2;
  mc.nonempty = f.delta1;
  mc.bv_classes = f.bv.classes();
  return mc;
}

std::vector<TermPtr> match_rule_root(const Rule& rule, const TermPtr& term, const MatchCtx& mc) {
  Facts fx(mc);
  Matcher m{fx};
  std::vector<TermPtr> results;
  std::set<std::string> seen;
  MState st0;
  m.M(rule.lhs, term, st0, [&](const MState& st) {
    for (auto& c : rule.delta2) {
      auto ia = st.sub.ints.find(c.a), ib = st.sub.ints.find(c.b);
      if (ia == st.sub.ints.end() || ib == st.sub.ints.end()) return;
      if (ia->second->kind != Term::Kind::Var || ib->second->kind != Term::Kind::Var) return;
      if (!fx.entails({c.succ, ia->second->name, ib->second->name})) return;
    }
    for (auto& key : rule.delta1) {
      auto it = st.sub.ctx.find(key);
      if (it == st.sub.ctx.end()) return;
      if (!def_nonempty(it->second, fx)) return;
    }
    // indexed binders must stand for the chain position they were matched at
    for (auto& [k, v] : st.sub.fo) {
      auto at = k.find('@');
      if (at == std::string::npos) continue;
      auto ii = st.sub.ints.find(k.substr(at + 1));
      if (ii == st.sub.ints.end() || ii->second->kind != Term::Kind::Var) return;
      std::string beta = fx.chain_index(var_key(v));
      if (beta.empty() || !fx.entails_eq(ii->second->name, beta)) return;
    }
    TermPtr succ = subst_pat(rule.rhs, st);
    if (seen.insert(to_string(succ)).second) results.push_back(succ);
  });
  return results;
}

std::vector<DiaStep> no_successors(const TermPtr& t, const std::vector<Rule>& nos,
                                   const MatchCtx& mc) {
  std::vector<DiaStep> out;
  for (auto& r : nos)
    for (auto& res : match_rule_root(r, t, mc)) out.push_back({true, r.name, t, res});
  return out;
}

std::vector<DiaStep> s_successors(const TermPtr& t, const std::vector<Rule>& trans,
                                  const MatchCtx& mc) {
  std::vector<std::pair<TermPtr, std::function<TermPtr(const TermPtr&)>>> pos;
  surface_positions(t, [](const TermPtr& x) { return x; }, pos);
  std::vector<DiaStep> out;
  std::set<std::string> seen;
  for (auto& r : trans)
    for (auto& [u, rbf] : pos)
      for (auto& res : match_rule_root(r, u, mc)) {
        TermPtr whole = rbf(res);
        if (seen.insert(r.name + "\n" + to_string(whole)).second)
          out.push_back({false, r.name, t, whole});
      }
  return out;
}

namespace {

// cp-in and cp-e are positional variants of the same copy transformation; the
// diagram vocabulary treats them as one rule "cp" everywhere except in the
// top-edge transformation label
std::string col(const std::string& x) {
  return (x == "cp-in" || x == "cp-e") ? std::string("cp") : x;
}

Schema schema_of(const ClosedFork& cf) {
  std::string T = rule_base(cf.trans_name), F = rule_base(cf.no_name);
  std::vector<std::pair<std::string, std::string>> L, R;
  for (auto& s : cf.L) L.push_back({s.is_no ? "no" : "S", rule_base(s.rule)});
  for (auto& s : cf.R) R.push_back({"no", rule_base(s.rule)});
  Schema sc;
  sc.trans = T;
  bool generic = L.size() == 1 && L[0].first == "S" && col(L[0].second) == col(T) &&
                 R.size() == 1 && col(R[0].second) == col(F);
  if (generic) {
    sc.fork_label = "a";
    sc.L = {{"S", T}};
    sc.R = {{"no", "a"}};
    sc.shape = "square";
    return sc;
  }
  sc.fork_label = col(F);
  for (auto& p : L) sc.L.push_back({p.first, col(p.second)});
  for (auto& p : R) sc.R.push_back({p.first, col(p.second)});
  bool tri = sc.L.size() == 1 && sc.R.size() == 1 &&
             sc.L[0] == std::make_pair(std::string("no"), sc.fork_label) &&
             sc.R[0] == std::make_pair(std::string("no"), sc.fork_label);
  sc.shape = tri ? "triangle" : "square";
  return sc;
}

}  // namespace

ClosedFork close_fork(const Fork& fk, const std::string& fork_id, const std::vector<Rule>& trans,
                      const std::vector<Rule>& nos, int max_depth) {
  ClosedFork cf;
  cf.fork_id = fork_id;
  cf.trans_name = fk.trans_name;
  cf.no_name = fk.no_name;
  cf.canon_key = fk.final.canon_key;
  MatchCtx mc = match_ctx_of(fk.final);

  if (join_equal(fk.left, fk.right)) {
    cf.degenerate = true;
    cf.closed = true;
    cf.shape = "degenerate";
    cf.join = fk.left;
    return cf;
  }

  struct Node {
    TermPtr term;
    std::vector<DiaStep> path;
  };
  std::vector<std::vector<Node>> L{{{fk.left, {}}}}, R{{{fk.right, {}}}};

  // distinct (term, step-label sequence) pairs: different step sequences to
  // the same term are kept apart so the closure preference can choose among
  // them, but duplicate label sequences are pruned
  auto expand = [&](const std::vector<Node>& layer, bool left_side) {
    std::vector<Node> nxt;
    std::set<std::string> seen;
    for (auto& nd : layer) {
      std::vector<DiaStep> succs = no_successors(nd.term, nos, mc);
      if (left_side) {
        auto s2 = s_successors(nd.term, trans, mc);
        succs.insert(succs.end(), s2.begin(), s2.end());
      }
      for (auto& s : succs) {
        std::string key = to_string(s.after);
        for (auto& ps : nd.path) key += std::string("|") + (ps.is_no ? "no," : "S,") + ps.rule;
        key += std::string("|") + (s.is_no ? "no," : "S,") + s.rule;
        if (!seen.insert(key).second) continue;
        Node n2{s.after, nd.path};
        n2.path.push_back(s);
        nxt.push_back(std::move(n2));
      }
    }
    return nxt;
  };

  // All closures at the minimal total length are collected, then one is chosen
  // by a fixed preference: the commuting square that re-applies the forking
  // pair, then the triangle of normal-order steps, then the closure with the
  // fewest normal-order steps on the left leg, ties by discovery order.
  struct Cand {
    std::vector<DiaStep> L, R;
    TermPtr join;
  };
  std::string Tb = col(rule_base(fk.trans_name)), Fb = col(rule_base(fk.no_name));
  auto rank = [&](const Cand& c) {
    long long nol = 0;
    for (auto& s : c.L) nol += s.is_no ? 1 : 0;
    bool generic = c.L.size() == 1 && !c.L[0].is_no && col(rule_base(c.L[0].rule)) == Tb &&
                   c.R.size() == 1 && col(rule_base(c.R[0].rule)) == Fb;
    bool tri = c.L.size() == 1 && c.L[0].is_no && col(rule_base(c.L[0].rule)) == Fb &&
               c.R.size() == 1 && col(rule_base(c.R[0].rule)) == Fb;
    return generic ? std::make_pair(0LL, 0LL) : tri ? std::make_pair(1LL, 0LL)
                                                    : std::make_pair(2LL, nol);
  };

  for (int total = 0; total <= max_depth; ++total) {
    std::vector<Cand> cands;
    for (int dl = 0; dl <= total; ++dl) {
      int dr = total - dl;
      while ((int)L.size() <= dl) L.push_back(expand(L.back(), true));
      while ((int)R.size() <= dr) R.push_back(expand(R.back(), false));
      for (auto& nl : L[dl])
        for (auto& nr : R[dr])
          if (join_equal(nl.term, nr.term)) cands.push_back({nl.path, nr.path, nl.term});
    }
    if (cands.empty()) continue;
    size_t best = 0;
    for (size_t i = 1; i < cands.size(); ++i)
      if (rank(cands[i]) < rank(cands[best])) best = i;
    cf.closed = true;
    cf.L = cands[best].L;
    cf.R = cands[best].R;
    cf.join = cands[best].join;
    cf.shape = schema_of(cf).shape;
    return cf;
  }
  return cf;  // unclosed
}

std::string Schema::signature() const {
  std::ostringstream os;
  os << "trans=" << trans << " fork=no," << fork_label << " L=[";
  for (size_t i = 0; i < L.size(); ++i) os << (i ? " " : "") << L[i].first << "," << L[i].second;
  os << "] R=[";
  for (size_t i = 0; i < R.size(); ++i) os << (i ? " " : "") << R[i].first << "," << R[i].second;
  os << "] shape=" << shape;
  return os.str();
}

namespace {

int trans_order(const std::string& base) {
  static const std::vector<std::string> order = {"lbeta", "cp-in", "cp-e",
                                                 "llet-in", "llet-e", "lapp"};
  for (size_t i = 0; i < order.size(); ++i)
    if (order[i] == base) return (int)i;
  return (int)order.size();
}

}  // namespace

DiagramReport compute_diagrams(const std::vector<PairResult>& pairs,
                               const std::vector<Rule>& trans, const std::vector<Rule>& nos,
                               int max_depth, int threads) {
  struct Item {
    const Fork* fk;
    std::string id;
  };
  std::vector<Item> items;
  for (auto& pr : pairs) {
    int k = 0;
    for (auto& f : pr.forks) {
      std::string id = pr.trans_name + "|" + pr.no_name + "#" + std::to_string(k++);
      if (f.critical) items.push_back({&f, id});
    }
  }

  std::vector<ClosedFork> res(items.size());
  auto run_one = [&](size_t i) {
    res[i] = close_fork(*items[i].fk, items[i].id, trans, nos, max_depth);
  };
  int T = threads < 1 ? 1 : threads;
  if (T == 1) {
    for (size_t i = 0; i < items.size(); ++i) run_one(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < T; ++w)
      pool.emplace_back([&] {
        for (;;) {
          size_t i = next.fetch_add(1);
          if (i >= items.size()) return;
          run_one(i);
        }
      });
    for (auto& th : pool) th.join();
  }

  DiagramReport rep;
  rep.outcomes = std::move(res);
  std::map<std::string, Schema> agg;
  for (auto& cf : rep.outcomes) {
    ++rep.forks;
    if (cf.degenerate) {
      ++rep.degenerate;
      ++rep.closed;
      continue;
    }
    if (!cf.closed) {
      ++rep.unclosed;
      continue;
    }
    ++rep.closed;
    Schema sc = schema_of(cf);
    auto [it, fresh] = agg.emplace(sc.signature(), sc);
    it->second.count++;
  }
  for (auto& [sig, sc] : agg) rep.schemas.push_back(sc);
  std::sort(rep.schemas.begin(), rep.schemas.end(), [](const Schema& a, const Schema& b) {
    int oa = trans_order(a.trans), ob = trans_order(b.trans);
    if (oa != ob) return oa < ob;
    bool ga = a.fork_label == "a", gb = b.fork_label == "a";
    if (ga != gb) return ga;
    return a.signature() < b.signature();
  });
  return rep;
}

std::string render_schema(const Schema& s) {
  auto steps = [](const std::vector<std::pair<std::string, std::string>>& v) {
    std::string r;
    for (size_t i = 0; i < v.size(); ++i)
      r += (i ? " ; " : "") + v[i].first + "," + v[i].second;
    return r;
  };
  std::string top = "iS," + s.trans;
  std::string left = "no," + s.fork_label;
  std::string right = steps(s.R);
  std::string bottom = steps(s.L);
  std::ostringstream os;
  os << "[" << s.shape << "] x" << s.count << "\n";
  if (s.shape == "triangle") {
    os << "    .  --(" << top << ")-->  .\n"
       << "    |                   /\n"
       << "  (" << left << ")         /\n"
       << "    |          (" << right << ")\n"
       << "    v               /\n"
       << "    .              /\n"
       << "    |             /\n"
       << "  (" << bottom << ")      /\n"
       << "    v            v\n"
       << "    .  <--------'\n";
  } else {
    os << "    .  --(" << top << ")-->  .\n"
       << "    |                  :\n"
       << "  (" << left << ")        (" << right << ")\n"
       << "    |                  :\n"
       << "    v                  v\n"
       << "    .  --(" << bottom << ")-->  .\n";
  }
  return os.str();
}

}  // namespace lcsx
