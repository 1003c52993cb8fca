// Term core: constructors and sorting, canonical environments, LC equality
// against a brute-force permutation oracle, substitutions, measures, chains,
// and the text grammar round trip.
#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "term.hpp"

using namespace lcsx;

namespace {

// ---- random generators (deterministic seeds per test) ----

struct Gen {
  std::mt19937 rng;
  explicit Gen(unsigned seed) : rng(seed) {}
  int pick(int n) { return (int)(rng() % (unsigned)n); }

  TermPtr bv(int i) { return mk_var("b" + std::to_string(i), Sort::BV); }

  TermPtr exp(int depth) {
    if (depth <= 0) return mk_varE(bv(pick(3)));
    switch (pick(4)) {
      case 0: return mk_varE(bv(pick(3)));
      case 1: return mk_app(exp(depth - 1), exp(depth - 1));
      case 2: return mk_lam(bv(pick(3)), exp(depth - 1));
      default: return mk_let(env(depth - 1, 2), exp(depth - 1));
    }
  }

  TermPtr bind(int depth) { return mk_bind(bv(pick(3)), exp(depth)); }

  // environment with a component spine of up to `maxw` binds, possibly nested
  TermPtr env(int depth, int maxw) {
    int w = pick(maxw + 1);
    std::vector<TermPtr> es;
    for (int i = 0; i < w; ++i) es.push_back(bind(depth));
    std::vector<TermPtr> tails;
    if (pick(2)) tails.push_back(mk_var("E" + std::to_string(pick(2)), Sort::Env));
    return mk_env(es, tails);
  }
};

// Brute-force LC oracle: structural equality where every env node's
// components (and tails) are compared as multisets by trying all pairings.
// Written independently of compare()/canonical ordering.
bool oracle_eq(const TermPtr& a, const TermPtr& b);

bool oracle_multiset(const std::vector<TermPtr>& xs, const std::vector<TermPtr>& ys) {
  if (xs.size() != ys.size()) return false;
  std::vector<int> idx(ys.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = (int)i;
  std::sort(idx.begin(), idx.end());
  do {
    bool ok = true;
    for (size_t i = 0; i < xs.size() && ok; ++i) ok = oracle_eq(xs[i], ys[idx[i]]);
    if (ok) return true;
  } while (std::next_permutation(idx.begin(), idx.end()));
  return false;
}

bool oracle_eq(const TermPtr& a, const TermPtr& b) {
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case Term::Kind::Var:
      return var_key(a) == var_key(b) && a->sort == b->sort;
    case Term::Kind::IntConst:
      return a->ival == b->ival;
    case Term::Kind::Hole:
      return true;
    case Term::Kind::Chain:
      return oracle_eq(a->args[0], b->args[0]) && oracle_eq(a->args[1], b->args[1]);
    case Term::Kind::CtxApp:
      return var_key(a) == var_key(b) && a->cls == b->cls && oracle_eq(a->args[0], b->args[0]);
    case Term::Kind::Fun: {
      if (a->name != b->name || a->args.size() != b->args.size()) return false;
      for (size_t i = 0; i < a->args.size(); ++i)
        if (!oracle_eq(a->args[i], b->args[i])) return false;
      return true;
    }
    case Term::Kind::EnvML:
      return oracle_multiset(a->elems, b->elems) && oracle_multiset(a->tails, b->tails);
  }
  return false;
}

// rebuild a term bottom-up with every env component list fed in a shuffled
// order; canonicalization must erase the difference
TermPtr shuffled_rebuild(const TermPtr& t, std::mt19937& rng) {
  switch (t->kind) {
    case Term::Kind::Fun: {
      std::vector<TermPtr> as;
      for (auto& a : t->args) as.push_back(shuffled_rebuild(a, rng));
      return mk_fun(t->name, as);
    }
    case Term::Kind::CtxApp:
      return mk_ctx(t->name, t->cls, shuffled_rebuild(t->args[0], rng), t->idx);
    case Term::Kind::EnvML: {
      std::vector<TermPtr> es, zs;
      for (auto& e : t->elems) es.push_back(shuffled_rebuild(e, rng));
      for (auto& z : t->tails) zs.push_back(shuffled_rebuild(z, rng));
      std::shuffle(es.begin(), es.end(), rng);
      std::shuffle(zs.begin(), zs.end(), rng);
      return mk_env(es, zs);
    }
    default:
      return t;
  }
}

// a structure-preserving mutation that changes exactly one leaf name
TermPtr mutate(const TermPtr& t, bool& done) {
  if (done) return t;
  switch (t->kind) {
    case Term::Kind::Var:
      done = true;
      return mk_var(t->name + "m", t->sort, t->idx);
    case Term::Kind::Fun: {
      std::vector<TermPtr> as;
      for (auto& a : t->args) as.push_back(mutate(a, done));
      return mk_fun(t->name, as);
    }
    case Term::Kind::EnvML: {
      std::vector<TermPtr> es, zs;
      for (auto& e : t->elems) es.push_back(mutate(e, done));
      for (auto& z : t->tails) zs.push_back(mutate(z, done));
      return mk_env(es, zs);
    }
    case Term::Kind::CtxApp:
      return mk_ctx(t->name, t->cls, mutate(t->args[0], done), t->idx);
    default:
      return t;
  }
}

}  // namespace

TEST_CASE("sorts, classes and basic constructors") {
  CHECK(sort_from_name("Env") == Sort::Env);
  CHECK(cls_from_name("A") == CtxClass::A);
  CHECK(cls_leq(CtxClass::A, CtxClass::S));
  CHECK(cls_leq(CtxClass::S, CtxClass::C));
  CHECK(cls_leq(CtxClass::A, CtxClass::C));
  CHECK(!cls_leq(CtxClass::C, CtxClass::S));
  CHECK(!cls_leq(CtxClass::S, CtxClass::A));
  CHECK(cls_min(CtxClass::S, CtxClass::C) == CtxClass::S);

  TermPtr x = mk_var("x", Sort::BV), y = mk_var("y", Sort::BV);
  TermPtr t = mk_app(mk_varE(x), mk_varE(y));
  CHECK(sort_of(t) == Sort::Exp);
  CHECK(to_string(t) == "app(var(x:BV), var(y:BV))");

  // sort errors are loud, not silent falsehood
  CHECK_THROWS_AS(mk_bind(mk_varE(x), mk_varE(y)), std::logic_error);  // BV expected
  CHECK_THROWS_AS(mk_fun("frobnicate", {}), std::logic_error);         // unknown symbol
  CHECK_THROWS_AS(mk_fun("app", {mk_varE(x)}), std::logic_error);      // arity
  CHECK_THROWS_AS(mk_var("k", Sort::BV, mk_var("x", Sort::BV)), std::logic_error);  // index not Int
}

TEST_CASE("environment canonicalization: flatten, sort, collapse") {
  TermPtr b1 = mk_bind(mk_var("x", Sort::BV), mk_varE(mk_var("y", Sort::BV)));
  TermPtr b2 = mk_bind(mk_var("z", Sort::BV), mk_varE(mk_var("w", Sort::BV)));
  TermPtr E = mk_var("Env1", Sort::Env);

  TermPtr e1 = mk_env({b1, b2}, {});
  TermPtr e2 = mk_env({b2, b1}, {});
  CHECK(equal(e1, e2));
  CHECK(lc_equal(e1, e2));

  // nested env material in a tail flattens into one node
  TermPtr nested = mk_env({b1}, {mk_env({b2}, {E})});
  TermPtr flat = mk_env({b1, b2}, {E});
  CHECK(equal(nested, flat));
  CHECK(nested->kind == Term::Kind::EnvML);
  CHECK(nested->elems.size() == 2);
  CHECK(nested->tails.size() == 1);

  // empty env is a canonical EnvML with no parts; it disappears as a tail
  TermPtr empty = mk_empty_env();
  CHECK(empty->elems.empty());
  CHECK(empty->tails.empty());
  CHECK(equal(mk_env({b1}, {empty}), mk_env({b1}, {})));

  // reconstruct-and-reread is the identity on the canonical view
  TermPtr again = mk_env(flat->elems, flat->tails);
  CHECK(equal(again, flat));

  CHECK_THROWS_AS(mk_env({mk_varE(mk_var("x", Sort::BV))}, {}), std::logic_error);
}

TEST_CASE("lc_equal agrees with the permutation brute-force oracle") {
  Gen g(20260823);
  std::mt19937 sh(7);
  int agree = 0;
  for (int i = 0; i < 2000; ++i) {
    TermPtr a = g.env(2, 4);
    TermPtr b;
    switch (g.pick(3)) {
      case 0: b = shuffled_rebuild(a, sh); break;
      case 1: {
        bool done = false;
        b = mutate(a, done);
        break;
      }
      default: b = g.env(2, 4); break;
    }
    bool lhs = lc_equal(a, b);
    bool rhs = oracle_eq(a, b);
    if (lhs == rhs) ++agree;
    CHECK(lhs == rhs);
  }
  CHECK(agree == 2000);
}

TEST_CASE("lc_equal on wide spines (up to 6 components)") {
  Gen g(99);
  std::mt19937 sh(13);
  for (int i = 0; i < 200; ++i) {
    std::vector<TermPtr> es;
    int w = 1 + g.pick(6);
    for (int k = 0; k < w; ++k) es.push_back(g.bind(1));
    TermPtr a = mk_env(es, {});
    TermPtr b = shuffled_rebuild(a, sh);
    CHECK(lc_equal(a, b));
    CHECK(oracle_eq(a, b));
  }
}

TEST_CASE("lc_equal is an equivalence relation on shuffles") {
  Gen g(5);
  std::mt19937 sh(17);
  for (int i = 0; i < 300; ++i) {
    TermPtr t = g.env(2, 3);
    TermPtr p1 = shuffled_rebuild(t, sh);
    TermPtr p2 = shuffled_rebuild(p1, sh);
    CHECK(lc_equal(t, t));                       // reflexive
    CHECK(lc_equal(t, p1));
    CHECK(lc_equal(p1, t));                      // symmetric
    CHECK((lc_equal(t, p1) && lc_equal(p1, p2) ? lc_equal(t, p2) : true));  // transitive
  }
}

TEST_CASE("LC is non-collapsing and preserves variables") {
  Gen g(31);
  TermPtr x = mk_var("q", Sort::Exp);
  for (int i = 0; i < 200; ++i) {
    TermPtr t = g.exp(2);
    if (!(t->kind == Term::Kind::Var && var_key(t) == "q")) CHECK(!lc_equal(x, t));
  }
  std::mt19937 sh(23);
  for (int i = 0; i < 200; ++i) {
    TermPtr t = g.env(2, 3);
    TermPtr p = shuffled_rebuild(t, sh);
    REQUIRE(lc_equal(t, p));
    CHECK(var_keys(t) == var_keys(p));
  }
}

TEST_CASE("substitution: distribution, hole filling, classes") {
  TermPtr x = mk_var("x", Sort::BV);
  TermPtr s = mk_var("s", Sort::Exp), t2 = mk_var("t2", Sort::Exp);

  Subst id;
  TermPtr some = mk_app(mk_varE(x), s);
  CHECK(equal(apply1(id, some), some));

  // {X -> []} applied to X(s) gives s
  Subst sub1;
  sub1.ctx["X"] = mk_hole();
  CHECK(equal(apply1(sub1, mk_ctx("X", CtxClass::C, s)), s));

  // {X -> app(X', t2)} applied to X(s) gives app(X'(s), t2)
  Subst sub2;
  sub2.ctx["X"] = mk_app(mk_ctx("X'", CtxClass::C, mk_hole()), t2);
  TermPtr applied = apply1(sub2, mk_ctx("X", CtxClass::C, s));
  CHECK(equal(applied, mk_app(mk_ctx("X'", CtxClass::C, s), t2)));

  // distribution over free symbols
  Subst sub3;
  sub3.fo["s"] = mk_varE(x);
  TermPtr f = mk_app(s, mk_lam(x, s));
  CHECK(equal(apply1(sub3, f), mk_app(mk_varE(x), mk_lam(x, mk_varE(x)))));

  // apply_star reaches the fixpoint through chained images
  Subst sub4;
  sub4.fo["a"] = mk_var("b", Sort::Exp);
  sub4.fo["b"] = mk_varE(x);
  CHECK(equal(apply_star(sub4, mk_var("a", Sort::Exp)), mk_varE(x)));

  // cyclic substitution is a loud error
  Subst cyc;
  cyc.fo["u"] = mk_app(mk_var("v", Sort::Exp), s);
  cyc.fo["v"] = mk_app(mk_var("u", Sort::Exp), s);
  CHECK_THROWS_AS(apply_star(cyc, mk_var("u", Sort::Exp)), std::logic_error);

  CHECK(contains_hole(mk_app(mk_hole(), s)));
  CHECK(!contains_hole(some));
  CHECK(equal(fill_hole(mk_app(mk_hole(), t2), s), mk_app(s, t2)));
  CHECK_THROWS_AS(fill_hole(s, t2), std::logic_error);  // no hole
}

TEST_CASE("measures: count_lets and the weighted size") {
  TermPtr x = mk_var("x", Sort::BV), y = mk_var("y", Sort::BV);
  TermPtr z = mk_var("z", Sort::BV), w = mk_var("w", Sort::BV);
  TermPtr vy = mk_varE(y);  // weight 2
  CHECK(mu2(mk_varE(y)) == 2);
  CHECK(mu2(mk_var("s", Sort::Exp)) == 1);

  TermPtr b1 = mk_bind(x, vy);           // 1 + 1 + 2 = 4
  TermPtr b2 = mk_bind(z, mk_varE(w));   // 4
  TermPtr ch = mk_chain(mk_var("N1", Sort::Int), mk_var("N2", Sort::Int));
  TermPtr env = mk_env({b1, b2, ch}, {mk_var("Env1", Sort::Env)});
  // 7+4 per bind component, 1 per chain atom, tail weight 1
  CHECK(mu2(env) == 7 + 4 + 7 + 4 + 1 + 1);

  TermPtr let1 = mk_let(env, mk_varE(y));
  CHECK(count_lets(let1) == 1);
  CHECK(count_lets(mk_let(mk_env({mk_bind(x, let1)}, {}), let1)) == 3);
  CHECK(mu2(let1) == 1 + 24 + 2);
}

TEST_CASE("chain expansion") {
  auto one = expand_chain_binds(1, 2);
  REQUIRE(one.size() == 1);
  CHECK(to_string(one[0]) == "bind(y@2:BV, A@2{A}(var(y@1:BV)))");

  auto two = expand_chain_binds(1, 3);
  REQUIRE(two.size() == 2);
  CHECK(to_string(two[0]) == "bind(y@2:BV, A@2{A}(var(y@1:BV)))");
  CHECK(to_string(two[1]) == "bind(y@3:BV, A@3{A}(var(y@2:BV)))");

  CHECK_THROWS_AS(expand_chain_binds(2, 2), std::logic_error);
  CHECK_THROWS_AS(expand_chain_binds(0, 1), std::logic_error);
  CHECK_THROWS_AS(expand_chain_binds(3, 2), std::logic_error);
}

TEST_CASE("variable keys, collection and occurrence") {
  TermPtr yN = mk_var("y", Sort::BV, mk_var("N1", Sort::Int));
  CHECK(var_key(yN) == "y@N1");
  CHECK(var_key(mk_var("y", Sort::BV, mk_int(3))) == "y@3");
  CHECK(var_key(mk_ctx("A", CtxClass::A, mk_hole(), mk_var("N2", Sort::Int))) == "A@N2");

  TermPtr t = mk_let(mk_env({mk_bind(mk_var("x", Sort::BV), mk_ctx("C", CtxClass::C, mk_varE(yN)))},
                            {mk_var("Env1", Sort::Env)}),
                     mk_var("r", Sort::Exp));
  auto keys = var_keys(t);
  CHECK(keys.count("x"));
  CHECK(keys.count("C"));
  CHECK(keys.count("y@N1"));
  CHECK(keys.count("N1"));  // the index variable itself is tracked
  CHECK(keys.count("Env1"));
  CHECK(keys.count("r"));
  CHECK(occurs("C", t));
  CHECK(!occurs("zzz", t));

  // first-occurrence order is deterministic
  auto vs = collect_vars(t);
  REQUIRE(!vs.empty());
  CHECK(vs[0].key == "x");
}

TEST_CASE("text grammar round trip") {
  const char* samples[] = {
      "var(x:BV)",
      "app(lam(x:BV, s:Exp), r:Exp)",
      "let(env*({bind(x:BV, lam(w:BV, t:Exp)), bind(z:BV, C{C}(var(x:BV)))} ; Env1:Env), r:Exp)",
      "let(env*({bind(y@N1:BV, A@N1{A}(var(x':BV))), BCh(N1, N2)} ; Env1':Env), A1'{A}(var(y@N2:BV)))",
      "env*({})",
      "env*({} ; Env1:Env, Env2:Env)",
      "S{S}([])",
      "bind(y@2:BV, A@2{A}(var(y@1:BV)))",
  };
  for (auto* s : samples) {
    TermPtr t = parse_term(s);
    CHECK(to_string(t) == s);
    CHECK(equal(parse_term(to_string(t)), t));
  }

  // parse errors carry positions
  CHECK_THROWS_AS(parse_term("app(var(x:BV)"), std::runtime_error);
  CHECK_THROWS_AS(parse_term("app(var(x:BV), var(y:BV)) trailing"), std::runtime_error);

  // parsing respects canonical env ordering: two spellings, one term
  TermPtr a = parse_term("env*({bind(x:BV, s:Exp), bind(y:BV, t:Exp)})");
  TermPtr b = parse_term("env*({bind(y:BV, t:Exp), bind(x:BV, s:Exp)})");
  CHECK(equal(a, b));
  CHECK(to_string(a) == to_string(b));
}

TEST_CASE("random print/parse round trip") {
  Gen g(4242);
  for (int i = 0; i < 300; ++i) {
    TermPtr t = g.exp(3);
    CHECK(equal(parse_term(to_string(t)), t));
  }
}

TEST_CASE("compare is a total order consistent with equality") {
  Gen g(77);
  for (int i = 0; i < 200; ++i) {
    TermPtr a = g.exp(2), b = g.exp(2), c = g.exp(2);
    CHECK((compare(a, b) == 0) == equal(a, b));
    CHECK(compare(a, b) == -compare(b, a));
    if (compare(a, b) <= 0 && compare(b, c) <= 0) CHECK(compare(a, c) <= 0);
  }
}
