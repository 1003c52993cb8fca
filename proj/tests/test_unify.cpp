// Unifier: index-constraint solving, the worked cp-e/abs × no-cp-e-c/abs
// problem (golden final system), measure instrumentation, the alpha/DVC
// examples, dedup bookkeeping and the soundness oracle.
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "unify.hpp"

using namespace lcsx;

#ifndef LCSX_GOLDEN_DIR
#define LCSX_GOLDEN_DIR "tests/golden"
#endif

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  std::string s = os.str();
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

const Rule& find(const std::vector<Rule>& rs, const std::string& name) {
  for (auto& r : rs)
    if (r.name == name) return r;
  REQUIRE(false);
  return rs.front();
}

struct FlagshipRun {
  InitialProblem p;
  UnifyStats stats;
  std::vector<FinalSystem> raw;
  std::vector<FinalSystem> ded;
};

const FlagshipRun& flagship() {
  static FlagshipRun run = [] {
    FlagshipRun r;
    r.p = make_problem(find(transformations(), "cp-e/abs"), find(no_rules(), "no-cp-e-c/abs"));
    UnifyOptions opt;
    r.raw = unify(r.p, opt, r.stats);
    set_canon_keys(r.p, r.raw);
    r.ded = dedup_finals(r.raw);
    return r;
  }();
  return run;
}

// decompose a Merge-FA image Z1{A}(app(Z2{A}(u), Z3{C}(v))) into the three
// context-variable names and the two payloads
struct FAImage {
  std::string z1, z2, z3;
  TermPtr left, right;
};

bool decompose_fa(const TermPtr& img, FAImage& out) {
  if (img->kind != Term::Kind::CtxApp || img->cls != CtxClass::A) return false;
  out.z1 = var_key(img);
  TermPtr a = img->args[0];
  if (a->kind != Term::Kind::Fun || a->name != "app") return false;
  TermPtr l = a->args[0], r = a->args[1];
  if (l->kind != Term::Kind::CtxApp || l->cls != CtxClass::A) return false;
  if (r->kind != Term::Kind::CtxApp || r->cls != CtxClass::C) return false;
  out.z2 = var_key(l);
  out.z3 = var_key(r);
  out.left = l->args[0];
  out.right = r->args[0];
  return true;
}

}  // namespace

TEST_CASE("index constraints: least models and entailment") {
  std::map<std::string, long long> m;

  REQUIRE(delta2_least_model({{false, "N1", "N2"}}, m));
  CHECK(m == std::map<std::string, long long>{{"N1", 1}, {"N2", 2}});

  CHECK(!delta2_least_model({{true, "N1", "N2"}, {false, "N2", "N1"}}, m));

  REQUIRE(delta2_least_model({{false, "N1", "N3"}, {true, "N3", "N4"}, {false, "N4", "N2"}}, m));
  CHECK(m == std::map<std::string, long long>{{"N1", 1}, {"N3", 2}, {"N4", 3}, {"N2", 4}});

  // a lone succ constraint
  REQUIRE(delta2_least_model({{true, "A", "B"}}, m));
  CHECK(m == std::map<std::string, long long>{{"A", 1}, {"B", 2}});

  std::vector<IntCon> facts{{false, "N1", "N3"}, {true, "N3", "N4"}, {false, "N4", "N2"}};
  CHECK(delta2_entails(facts, {false, "N1", "N3"}));
  CHECK(delta2_entails(facts, {true, "N3", "N4"}));
  CHECK(delta2_entails(facts, {false, "N3", "N4"}));  // succ implies less-than
  CHECK(delta2_entails(facts, {false, "N1", "N2"}));  // transitively
  CHECK(!delta2_entails(facts, {false, "N2", "N1"}));
  CHECK(!delta2_entails(facts, {true, "N1", "N3"}));
  CHECK(delta2_entails_le(facts, "N1", "N1"));
  CHECK(delta2_entails_le(facts, "N3", "N4"));
  CHECK(!delta2_entails_le(facts, "N4", "N3"));
}

TEST_CASE("initial problem construction for the worked example") {
  const InitialProblem& p = flagship().p;
  CHECK(p.trans_name == "cp-e/abs");
  CHECK(p.no_name == "no-cp-e-c/abs");
  CHECK(to_string(p.init.l) + " =? " + to_string(p.init.r) ==
        "S{S}(let(env*({bind(x:BV, lam(w:BV, t:Exp)), bind(z:BV, C{C}(var(x:BV)))} ; Env1:Env), "
        "r:Exp)) =? "
        "let(env*({bind(x':BV, lam(w':BV, t':Exp)), bind(y@N1:BV, A@N1{A}(var(x':BV))), "
        "BCh(N1, N2)} ; Env1':Env), A1'{A}(var(y@N2:BV)))");
  CHECK(p.delta1 == std::set<std::string>{"A@N1"});
  REQUIRE(p.delta2.size() == 1);
  CHECK(to_string(p.delta2[0]) == "N1<N2");

  // the two sides are variable disjoint
  auto lk = var_keys(p.init.l);
  for (auto& k : var_keys(p.init.r)) {
    INFO(k);
    CHECK(!lk.count(k));
  }
}

TEST_CASE("worked example: search statistics and dedup") {
  const FlagshipRun& r = flagship();
  CHECK(!r.stats.budget_exhausted);
  CHECK(r.stats.states == 344);
  CHECK(r.raw.size() == 40);
  CHECK(r.ded.size() == 30);
  long long dvc = 0;
  for (auto& f : r.ded) dvc += f.dvc_ok ? 1 : 0;
  CHECK(dvc == 21);
}

TEST_CASE("worked example: the golden final system is found, structurally exact") {
  const FlagshipRun& r = flagship();
  std::string golden = slurp(std::string(LCSX_GOLDEN_DIR) + "/flagship_final.txt");

  const FinalSystem* hit = nullptr;
  for (auto& f : r.ded)
    if (f.canon_key == golden) hit = &f;
  REQUIRE(hit != nullptr);
  const FinalSystem& f = *hit;
  CHECK(f.dvc_ok);
  CHECK(f.delta2_sat);

  Subst full = f.full_sub();

  // S is solved to the empty context
  TermPtr S = apply_star(full, mk_ctx("S", CtxClass::S, mk_hole()));
  CHECK(S->kind == Term::Kind::Hole);

  // r is solved to an A-class context applied to var(y@N2)
  TermPtr rimg = apply_star(full, mk_var("r", Sort::Exp));
  REQUIRE(rimg->kind == Term::Kind::CtxApp);
  CHECK(rimg->cls == CtxClass::A);
  REQUIRE(rimg->args[0]->kind == Term::Kind::Fun);
  CHECK(rimg->args[0]->name == "var");
  CHECK(var_key(rimg->args[0]->args[0]) == "y@N2");

  // bound-variable identifications: exactly {w,w'}, {x,x'}, {z,y@nu4}
  auto classes = f.bv.classes();
  REQUIRE(classes.size() == 3);
  CHECK(classes[0] == std::vector<std::string>{"w", "w'"});
  CHECK(classes[1] == std::vector<std::string>{"x", "x'"});
  REQUIRE(classes[2].size() == 2);
  CHECK(classes[2][1] == "z");
  std::string ynu4 = classes[2][0];
  REQUIRE(ynu4.rfind("y@", 0) == 0);
  std::string nu4 = ynu4.substr(2);

  // the chain split: one solved link context A@nu4, plus nu3 with
  // Delta2 |= { N1 < nu3, nu3 + 1 = nu4, nu4 < N2 }
  std::string nu3;
  for (auto& c : f.delta2)
    if (c.succ && c.b == nu4) nu3 = c.a;
  REQUIRE(!nu3.empty());
  CHECK(delta2_entails(f.delta2, {false, "N1", nu3}));
  CHECK(delta2_entails(f.delta2, {true, nu3, nu4}));
  CHECK(delta2_entails(f.delta2, {false, nu4, "N2"}));
  CHECK(f.model ==
        std::map<std::string, long long>{{"N1", 1}, {nu3, 2}, {nu4, 3}, {"N2", 4}});

  // the recorded split of BCh(N1, N2): explicit link plus two residual chains
  auto sp = f.chain_splits.find("BCh(N1, N2)");
  REQUIRE(sp != f.chain_splits.end());
  REQUIRE(sp->second.size() == 3);
  CHECK(to_string(sp->second[0]) ==
        "bind(y@" + nu4 + ":BV, A@" + nu4 + "{A}(var(y@" + nu3 + ":BV)))");
  CHECK(to_string(sp->second[1]) == "BCh(N1, " + nu3 + ")");
  CHECK(to_string(sp->second[2]) == "BCh(" + nu4 + ", N2)");

  // Merge-FA: C and the link context A@nu4 share one decomposition
  //   C     = Z1{A}(app(Z2{A}(var(y@nu3)), Z3{C}([])))
  //   A@nu4 = Z1{A}(app(Z2{A}([]),         Z3{C}(var(x))))
  FAImage ci, ai;
  REQUIRE(decompose_fa(apply_star(full, mk_ctx("C", CtxClass::C, mk_hole())), ci));
  REQUIRE(decompose_fa(
      apply_star(full, mk_ctx("A", CtxClass::A, mk_hole(), mk_var(nu4, Sort::Int))), ai));
  CHECK(ci.z1 == ai.z1);
  CHECK(ci.z2 == ai.z2);
  CHECK(ci.z3 == ai.z3);
  CHECK(to_string(ci.left) == "var(y@" + nu3 + ":BV)");
  CHECK(ci.right->kind == Term::Kind::Hole);
  CHECK(ai.left->kind == Term::Kind::Hole);
  CHECK(to_string(ai.right) == "var(x:BV)");

  // first-order leftovers of the instantiated transformation variables
  CHECK(to_string(apply_star(full, mk_var("t", Sort::Exp))) == "t':Exp");
  CHECK(var_key(apply_star(full, mk_var("x", Sort::BV))) == "x");  // x is the class rep

  CHECK(check_sound(r.p, f));
}

TEST_CASE("worked example: soundness and measure hold on every final") {
  const FlagshipRun& r = flagship();
  long long steps = 0;
  for (auto& f : r.raw) {
    if (f.delta2_sat) {
      std::string why;
      INFO(why);
      CHECK(check_sound(r.p, f, &why));
    }
    for (auto& s : f.trace) {
      ++steps;
      bool dec = s.mu1_after < s.mu1_before ||
                 (s.mu1_after == s.mu1_before && s.mu2_after < s.mu2_before);
      INFO(s.rule);
      CHECK(dec);
    }
  }
  CHECK(steps == 462);
}

TEST_CASE("alpha equivalence through unification and the DVC") {
  auto problem_of = [](const char* a, const char* b) {
    InitialProblem p;
    p.trans_name = "left";
    p.no_name = "right";
    p.init = Eq{encode(parse_expr(a)), encode(parse_expr(b))};
    return p;
  };

  // \x.\y.x vs \u.\v.v : unifiable, but the unifier identifies {x,u,v,y},
  // i.e. the common instance is \x.\x.x — the DVC rejects it
  {
    InitialProblem p = problem_of("\\x.\\y.x", "\\u.\\v.v");
    UnifyOptions opt;
    UnifyStats st;
    auto fs = unify(p, opt, st);
    REQUIRE(fs.size() == 1);
    CHECK(!fs[0].dvc_ok);
    auto cls = fs[0].bv.classes();
    REQUIRE(cls.size() == 1);
    CHECK(cls[0] == std::vector<std::string>{"u", "v", "x", "y"});
  }

  // \x.\y.x vs \u.\v.u : alpha-equivalent — dvc_ok
  {
    InitialProblem p = problem_of("\\x.\\y.x", "\\u.\\v.u");
    UnifyOptions opt;
    UnifyStats st;
    auto fs = unify(p, opt, st);
    REQUIRE(fs.size() == 1);
    CHECK(fs[0].dvc_ok);
    auto cls = fs[0].bv.classes();
    REQUIRE(cls.size() == 2);
    CHECK(cls[0] == std::vector<std::string>{"u", "x"});
    CHECK(cls[1] == std::vector<std::string>{"v", "y"});
    CHECK(check_sound(p, fs[0]));
  }

  // different arities never unify
  {
    InitialProblem p = problem_of("\\x.\\y.x", "\\u.u");
    UnifyOptions opt;
    UnifyStats st;
    auto fs = unify(p, opt, st);
    CHECK(fs.empty());
  }
}

TEST_CASE("budget exhaustion is reported, not silent") {
  InitialProblem p = make_problem(find(transformations(), "cp-e/abs"),
                                  find(no_rules(), "no-cp-e-c/abs"));
  UnifyOptions opt;
  opt.max_states = 20;
  UnifyStats st;
  auto fs = unify(p, opt, st);
  CHECK(st.budget_exhausted);
}

TEST_CASE("dedup requires canonical keys") {
  std::vector<FinalSystem> fs(1);
  CHECK_THROWS_AS(dedup_finals(fs), std::logic_error);
}

TEST_CASE("canonical keys are stable across repeated runs") {
  const FlagshipRun& r = flagship();
  UnifyOptions opt;
  UnifyStats st;
  auto again = unify(r.p, opt, st);
  set_canon_keys(r.p, again);
  auto ded = dedup_finals(again);
  REQUIRE(ded.size() == r.ded.size());
  for (size_t i = 0; i < ded.size(); ++i) CHECK(ded[i].canon_key == r.ded[i].canon_key);
}
