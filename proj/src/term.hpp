#pragma once
// Many-sorted term core for the call-by-need letrec calculus.
//
// Sorts: Exp, Bind, Env, BV (an empty sort: bound-variable names), Int
// (chain indexes). Free symbols: app(Exp,Exp), lam(BV,Exp), let(Env,Exp),
// var(BV), bind(BV,Exp). Environments are terms of the left-commutative
// theory env(x, env(y, z)) = env(y, env(x, z)); we keep them canonical as
// multiset nodes (EnvML) holding sorted components plus env-variable tails,
// so structural equality on constructed terms is LC-equality.
//
// Context variables carry a class: A (hole under a spine of applications),
// S (hole not below a lambda), C (anywhere), ordered A < S < C. A context
// image is an ordinary term containing exactly one Hole node.
//
// Binding chains BCh(lo,hi) are atoms standing for the bindings
// y_{lo+1} = A_{lo+1}[y_lo], ..., y_hi = A_hi[y_{hi-1}] with each A_i a
// non-empty A-class context; the reserved names y_i / A_i are encoded as
// variables with an Int-sorted index term.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace lcsx {

enum class Sort { Exp, Bind, Env, BV, Int };
enum class CtxClass { A, S, C };

const char* sort_name(Sort s);
const char* cls_name(CtxClass c);
Sort sort_from_name(const std::string& s);
CtxClass cls_from_name(const std::string& s);
bool cls_leq(CtxClass a, CtxClass b);  // A <= S <= C
CtxClass cls_min(CtxClass a, CtxClass b);

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
  enum class Kind { Var, IntConst, Fun, EnvML, Chain, CtxApp, Hole };
  Kind kind;
  std::string name;            // Var base name / Fun symbol / CtxApp base name
  TermPtr idx;                 // optional index term (Var, CtxApp): Int var or const
  Sort sort = Sort::Exp;       // Var only; other kinds have derived sorts
  long long ival = 0;          // IntConst
  CtxClass cls = CtxClass::C;  // CtxApp only
  std::vector<TermPtr> args;   // Fun children; CtxApp {arg}; Chain {lo, hi}
  std::vector<TermPtr> elems;  // EnvML: Bind-sorted components (incl. Chain atoms)
  std::vector<TermPtr> tails;  // EnvML: Env-sorted variable tails
};

// --- constructors (EnvML canonicalizes: flattens nested env material, drops
// --- empties, sorts components and tails) ---
TermPtr mk_var(const std::string& name, Sort sort, TermPtr idx = nullptr);
TermPtr mk_int(long long v);
TermPtr mk_fun(const std::string& sym, std::vector<TermPtr> args);
TermPtr mk_env(std::vector<TermPtr> elems, std::vector<TermPtr> tails);
TermPtr mk_chain(TermPtr lo, TermPtr hi);
TermPtr mk_ctx(const std::string& name, CtxClass cls, TermPtr arg, TermPtr idx = nullptr);
TermPtr mk_hole();

// shorthands for the free signature
TermPtr mk_app(TermPtr f, TermPtr a);
TermPtr mk_lam(TermPtr bv, TermPtr body);
TermPtr mk_let(TermPtr env, TermPtr body);
TermPtr mk_varE(TermPtr bv);  // var : BV -> Exp
TermPtr mk_bind(TermPtr bv, TermPtr val);
TermPtr mk_empty_env();

Sort sort_of(const TermPtr& t);

// total order on canonical terms; equal(a,b) <=> compare(a,b)==0, which on
// constructed terms coincides with LC-equality
int compare(const TermPtr& a, const TermPtr& b);
bool equal(const TermPtr& a, const TermPtr& b);
bool lc_equal(const TermPtr& a, const TermPtr& b);

// variable identity key: base name plus rendered index ("x", "y@N1", "A@3")
std::string var_key(const TermPtr& var_or_ctx);

// --- substitutions ---
// fo: first-order variables (Exp/Env/Bind/BV) by key -> term
// ctx: context variables by key -> context term containing exactly one Hole
// ints: Int variables by key -> Int term
struct Subst {
  std::map<std::string, TermPtr> fo;
  std::map<std::string, TermPtr> ctx;
  std::map<std::string, TermPtr> ints;
  bool empty() const { return fo.empty() && ctx.empty() && ints.empty(); }
};

TermPtr apply1(const Subst& s, const TermPtr& t);     // single pass
TermPtr apply_star(const Subst& s, const TermPtr& t); // to fixpoint (throws on cycle)
TermPtr fill_hole(const TermPtr& ctx_term, const TermPtr& filler);
bool contains_hole(const TermPtr& t);

// --- inspection ---
struct VarRef {
  Term::Kind kind;  // Var (first-order or Int) or CtxApp
  std::string key;
  Sort sort;        // meaningful for Kind::Var
  CtxClass cls;     // meaningful for Kind::CtxApp
  bool operator<(const VarRef& o) const { return key < o.key; }
  bool operator==(const VarRef& o) const { return key == o.key; }
};
// all variable occurrences in first-occurrence order (depth-first, left to
// right over the canonical form); includes Int index variables and chain bounds
void collect_vars(const TermPtr& t, std::vector<VarRef>& out);
std::vector<VarRef> collect_vars(const TermPtr& t);
std::set<std::string> var_keys(const TermPtr& t);
bool occurs(const std::string& key, const TermPtr& t);

// number of `let` nodes / the termination weight: bind components of an env
// multiset cost 7 + weight(component), chain atoms cost 1, tails their weight,
// the env node itself 0; every other node costs 1 plus children
long long count_lets(const TermPtr& t);
long long mu2(const TermPtr& t);

// chain expansion for ground instantiation: BCh(lo,hi) with concrete bounds
// becomes bind(y@i, A@i(var(y@{i-1}))) for i in lo+1..hi
std::vector<TermPtr> expand_chain_binds(long long lo, long long hi);

// --- text form ---
// f(a,...); variables name:Sort; context application X{Cls}(t); BCh(l,h);
// hole []; env*({c1,...} ; tail1, tail2); Int terms bare
std::string to_string(const TermPtr& t);
TermPtr parse_term(const std::string& text);  // throws std::runtime_error

}  // namespace lcsx
