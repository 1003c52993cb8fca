#include "calculus.hpp"

#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lcsx {

std::string to_string(const IntCon& c) {
  return c.succ ? c.a + "+1=" + c.b : c.a + "<" + c.b;
}

// ---------------- surface expressions ----------------

static ExprPtr mkE(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

static ExprPtr evar(const std::string& n) {
  Expr e; e.kind = Expr::Kind::Var; e.name = n; return mkE(std::move(e));
}
static ExprPtr eapp(ExprPtr a, ExprPtr b) {
  Expr e; e.kind = Expr::Kind::App; e.a = std::move(a); e.b = std::move(b); return mkE(std::move(e));
}
static ExprPtr elam(const std::string& x, ExprPtr body) {
  Expr e; e.kind = Expr::Kind::Lam; e.name = x; e.a = std::move(body); return mkE(std::move(e));
}
static ExprPtr eletrec(std::vector<std::pair<std::string, ExprPtr>> bs, ExprPtr body) {
  std::set<std::string> seen;
  for (auto& b : bs)
    if (!seen.insert(b.first).second)
      throw std::runtime_error("letrec binders must be pairwise distinct: " + b.first);
  Expr e; e.kind = Expr::Kind::Letrec; e.binds = std::move(bs); e.body = std::move(body);
  return mkE(std::move(e));
}

namespace {
struct ExprParser {
  std::string s;
  size_t i = 0;
  explicit ExprParser(std::string t) : s(std::move(t)) {}

  void skip() { while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r')) i++; }
  bool eat(char c) { skip(); if (i < s.size() && s[i] == c) { i++; return true; } return false; }
  void expect(char c) {
    if (!eat(c)) throw std::runtime_error("expression parse error: expected '" + std::string(1, c) + "' at offset " + std::to_string(i) + " in: " + s);
  }
  static bool identch(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '\'';
  }
  std::string ident() {
    skip();
    size_t b = i;
    while (i < s.size() && identch(s[i])) i++;
    if (i == b) throw std::runtime_error("expression parse error: identifier expected at offset " + std::to_string(i) + " in: " + s);
    return s.substr(b, i - b);
  }
  bool peek_word(const std::string& w) {
    skip();
    if (s.compare(i, w.size(), w) != 0) return false;
    size_t e = i + w.size();
    return e >= s.size() || !identch(s[e]);
  }

  ExprPtr expr() {
    skip();
    if (i < s.size() && s[i] == '\\') {
      i++;
      std::string x = ident();
      expect('.');
      return elam(x, expr());
    }
    if (peek_word("letrec")) {
      i += 6;
      std::vector<std::pair<std::string, ExprPtr>> bs;
      for (;;) {
        std::string x = ident();
        expect('=');
        bs.emplace_back(x, expr());
        if (!eat(',')) break;
      }
      if (!peek_word("in")) throw std::runtime_error("expression parse error: 'in' expected in: " + s);
      i += 2;
      return eletrec(std::move(bs), expr());
    }
    return appexpr();
  }
  ExprPtr appexpr() {
    ExprPtr e = atom();
    for (;;) {
      skip();
      if (i >= s.size()) break;
      char c = s[i];
      if (c == ')' || c == ',' || c == '.') break;
      if (peek_word("in")) break;
      e = eapp(e, atom());
    }
    return e;
  }
  ExprPtr atom() {
    skip();
    if (i < s.size() && s[i] == '(') {
      i++;
      ExprPtr e = expr();
      expect(')');
      return e;
    }
    if (i < s.size() && s[i] == '\\') {
      i++;
      std::string x = ident();
      expect('.');
      return elam(x, expr());
    }
    if (peek_word("letrec")) return expr();
    return evar(ident());
  }
};
}  // namespace

ExprPtr parse_expr(const std::string& text) {
  ExprParser p(text);
  ExprPtr e = p.expr();
  p.skip();
  if (p.i != p.s.size())
    throw std::runtime_error("expression parse error: trailing input at offset " + std::to_string(p.i) + " in: " + text);
  return e;
}

static void print_expr(const ExprPtr& e, std::ostream& os) {
  switch (e->kind) {
    case Expr::Kind::Var: os << e->name; return;
    case Expr::Kind::App: {
      // lambda and letrec bodies extend maximally to the right, so they need
      // their own parentheses inside an application
      auto part = [&](const ExprPtr& p) {
        bool wrap = p->kind == Expr::Kind::Lam || p->kind == Expr::Kind::Letrec;
        if (wrap) os << "(";
        print_expr(p, os);
        if (wrap) os << ")";
      };
      os << "(";
      part(e->a);
      os << " ";
      part(e->b);
      os << ")";
      return;
    }
    case Expr::Kind::Lam:
      os << "\\" << e->name << ".";
      print_expr(e->a, os);
      return;
    case Expr::Kind::Letrec: {
      os << "letrec ";
      bool first = true;
      for (auto& [x, v] : e->binds) {
        if (!first) os << ", ";
        first = false;
        os << x << "=";
        print_expr(v, os);
      }
      os << " in ";
      print_expr(e->body, os);
      return;
    }
  }
}

std::string to_string(const ExprPtr& e) {
  std::ostringstream os;
  print_expr(e, os);
  return os.str();
}

TermPtr encode(const ExprPtr& e) {
  switch (e->kind) {
    case Expr::Kind::Var: return mk_varE(mk_var(e->name, Sort::BV));
    case Expr::Kind::App: return mk_app(encode(e->a), encode(e->b));
    case Expr::Kind::Lam: return mk_lam(mk_var(e->name, Sort::BV), encode(e->a));
    case Expr::Kind::Letrec: {
      std::vector<TermPtr> binds;
      for (auto& [x, v] : e->binds) binds.push_back(mk_bind(mk_var(x, Sort::BV), encode(v)));
      return mk_let(mk_env(binds, {}), encode(e->body));
    }
  }
  throw std::logic_error("encode: bad expression kind");
}

ExprPtr decode(const TermPtr& t) {
  if (t->kind == Term::Kind::Fun) {
    if (t->name == "var" && t->args[0]->kind == Term::Kind::Var && !t->args[0]->idx)
      return evar(t->args[0]->name);
    if (t->name == "app") return eapp(decode(t->args[0]), decode(t->args[1]));
    if (t->name == "lam" && t->args[0]->kind == Term::Kind::Var && !t->args[0]->idx)
      return elam(t->args[0]->name, decode(t->args[1]));
    if (t->name == "let" && t->args[0]->kind == Term::Kind::EnvML && t->args[0]->tails.empty()) {
      std::vector<std::pair<std::string, ExprPtr>> bs;
      for (auto& c : t->args[0]->elems) {
        if (c->kind != Term::Kind::Fun || c->name != "bind" || c->args[0]->kind != Term::Kind::Var || c->args[0]->idx)
          throw std::runtime_error("decode: not a ground binding: " + to_string(c));
        bs.emplace_back(c->args[0]->name, decode(c->args[1]));
      }
      return eletrec(std::move(bs), decode(t->args[1]));
    }
  }
  throw std::runtime_error("decode: not a ground encoded expression: " + to_string(t));
}

// ---------------- rule catalogs ----------------

namespace {
// shorthands for catalog construction
TermPtr bv(const std::string& n) { return mk_var(n, Sort::BV); }
TermPtr ev(const std::string& n) { return mk_var(n, Sort::Env); }
TermPtr xv(const std::string& n) { return mk_var(n, Sort::Exp); }
TermPtr iv(const std::string& n) { return mk_var(n, Sort::Int); }
TermPtr yat(const std::string& idx) { return mk_var("y", Sort::BV, iv(idx)); }
TermPtr Aat(const std::string& idx, TermPtr arg) { return mk_ctx("A", CtxClass::A, std::move(arg), iv(idx)); }
TermPtr Actx(const std::string& n, TermPtr arg) { return mk_ctx(n, CtxClass::A, std::move(arg)); }
TermPtr Cctx(const std::string& n, TermPtr arg) { return mk_ctx(n, CtxClass::C, std::move(arg)); }
TermPtr env1(TermPtr b, TermPtr tail) { return mk_env({std::move(b)}, {std::move(tail)}); }
IntCon lt(const std::string& a, const std::string& b) { return IntCon{false, a, b}; }

// left-hand sides must be almost-linear: every non-BV, non-Int variable occurs
// at most once (checked when the catalogs are built)
void check_rule(const Rule& r) {
  std::map<std::string, int> occ;
  for (auto& v : collect_vars(r.lhs))
    if (v.sort != Sort::BV && v.sort != Sort::Int) occ[v.key]++;
  for (auto& [k, n] : occ)
    if (n > 1) throw std::logic_error("rule " + r.name + ": lhs not almost-linear at " + k);
  std::set<std::string> lhs_keys;
  for (auto& v : collect_vars(r.lhs)) lhs_keys.insert(v.key);
  for (auto& v : collect_vars(r.rhs))
    if (!lhs_keys.count(v.key))
      throw std::logic_error("rule " + r.name + ": rhs variable " + v.key + " not in lhs");
  for (auto& d : r.delta1)
    if (!lhs_keys.count(d)) throw std::logic_error("rule " + r.name + ": delta1 key " + d + " not in lhs");
}

Rule mk_rule(std::string name, bool is_no, TermPtr lhs, TermPtr rhs,
             std::vector<std::string> d1 = {}, std::vector<IntCon> d2 = {}) {
  Rule r{std::move(name), is_no, std::move(lhs), std::move(rhs), std::move(d1), std::move(d2)};
  check_rule(r);
  return r;
}

std::vector<Rule> build_transformations() {
  std::vector<Rule> rs;
  // (lbeta)  ((\x.s) r) -> letrec x=r in s
  rs.push_back(mk_rule("lbeta", false,
      mk_app(mk_lam(bv("x"), xv("s")), xv("r")),
      mk_let(mk_env({mk_bind(bv("x"), xv("r"))}, {}), xv("s"))));
  // (cp-in)  letrec x=V, Env1 in C[x] -> letrec x=V, Env1 in C[V],  V a variable or abstraction
  for (bool abs : {false, true}) {
    TermPtr V = abs ? mk_lam(bv("w"), xv("t")) : mk_varE(bv("w"));
    rs.push_back(mk_rule(std::string("cp-in/") + (abs ? "abs" : "var"), false,
        mk_let(env1(mk_bind(bv("x"), V), ev("Env1")), Cctx("C", mk_varE(bv("x")))),
        mk_let(env1(mk_bind(bv("x"), V), ev("Env1")), Cctx("C", V))));
  }
  // (cp-e)  letrec x=V, z=C[x], Env1 in r -> letrec x=V, z=C[V], Env1 in r
  for (bool abs : {false, true}) {
    TermPtr V = abs ? mk_lam(bv("w"), xv("t")) : mk_varE(bv("w"));
    rs.push_back(mk_rule(std::string("cp-e/") + (abs ? "abs" : "var"), false,
        mk_let(mk_env({mk_bind(bv("x"), V), mk_bind(bv("z"), Cctx("C", mk_varE(bv("x"))))}, {ev("Env1")}), xv("r")),
        mk_let(mk_env({mk_bind(bv("x"), V), mk_bind(bv("z"), Cctx("C", V))}, {ev("Env1")}), xv("r"))));
  }
  // (llet-in)  letrec Env1 in (letrec Env2 in r) -> letrec Env1, Env2 in r
  rs.push_back(mk_rule("llet-in", false,
      mk_let(ev("Env1"), mk_let(ev("Env2"), xv("r"))),
      mk_let(mk_env({}, {ev("Env1"), ev("Env2")}), xv("r"))));
  // (llet-e)  letrec x=(letrec Env2 in s), Env1 in r -> letrec x=s, Env1, Env2 in r
  rs.push_back(mk_rule("llet-e", false,
      mk_let(env1(mk_bind(bv("x"), mk_let(ev("Env2"), xv("s"))), ev("Env1")), xv("r")),
      mk_let(mk_env({mk_bind(bv("x"), xv("s"))}, {ev("Env1"), ev("Env2")}), xv("r"))));
  // (lapp)  ((letrec Env1 in t) s) -> letrec Env1 in (t s)
  rs.push_back(mk_rule("lapp", false,
      mk_app(mk_let(ev("Env1"), xv("t")), xv("s")),
      mk_let(ev("Env1"), mk_app(xv("t"), xv("s")))));
  return rs;
}

// wrap a rule body (redex -> contractum) into the four reduction-context shapes
void push_R_shapes(std::vector<Rule>& rs, const std::string& base, TermPtr redex, TermPtr contractum) {
  // R1: A1[redex]
  rs.push_back(mk_rule(base + "/1", true, Actx("A1", redex), Actx("A1", contractum)));
  // R2: letrec Env1 in A1[redex]
  rs.push_back(mk_rule(base + "/2", true,
      mk_let(ev("Env1"), Actx("A1", redex)),
      mk_let(ev("Env1"), Actx("A1", contractum))));
  // R3: letrec y1=A1[redex], Env1 in A2[y1]
  rs.push_back(mk_rule(base + "/3", true,
      mk_let(env1(mk_bind(bv("y1"), Actx("A1", redex)), ev("Env1")), Actx("A2", mk_varE(bv("y1")))),
      mk_let(env1(mk_bind(bv("y1"), Actx("A1", contractum)), ev("Env1")), Actx("A2", mk_varE(bv("y1"))))));
  // R4: letrec y@N1=A@N1[redex], BCh(N1,N2), Env1 in A2[y@N2],  N1 < N2
  rs.push_back(mk_rule(base + "/4", true,
      mk_let(mk_env({mk_bind(yat("N1"), Aat("N1", redex)), mk_chain(iv("N1"), iv("N2"))}, {ev("Env1")}),
             Actx("A2", mk_varE(yat("N2")))),
      mk_let(mk_env({mk_bind(yat("N1"), Aat("N1", contractum)), mk_chain(iv("N1"), iv("N2"))}, {ev("Env1")}),
             Actx("A2", mk_varE(yat("N2")))),
      {}, {lt("N1", "N2")}));
}

std::vector<Rule> build_no_rules() {
  std::vector<Rule> rs;
  // no-lbeta/1..4
  push_R_shapes(rs, "no-lbeta",
      mk_app(mk_lam(bv("x"), xv("s")), xv("r")),
      mk_let(mk_env({mk_bind(bv("x"), xv("r"))}, {}), xv("s")));
  // no-cp-in: letrec x=V, Env1 in A1[x] -> ... in A1[V]
  for (bool abs : {false, true}) {
    TermPtr V = abs ? mk_lam(bv("w"), xv("t")) : mk_varE(bv("w"));
    rs.push_back(mk_rule(std::string("no-cp-in/") + (abs ? "abs" : "var"), true,
        mk_let(env1(mk_bind(bv("x"), V), ev("Env1")), Actx("A1", mk_varE(bv("x")))),
        mk_let(env1(mk_bind(bv("x"), V), ev("Env1")), Actx("A1", V))));
  }
  // no-cp-e: letrec x=V, y1=A2[x], Env1 in A1[y1], A2 non-empty
  for (bool abs : {false, true}) {
    TermPtr V = abs ? mk_lam(bv("w"), xv("t")) : mk_varE(bv("w"));
    rs.push_back(mk_rule(std::string("no-cp-e/") + (abs ? "abs" : "var"), true,
        mk_let(mk_env({mk_bind(bv("x"), V), mk_bind(bv("y1"), Actx("A2", mk_varE(bv("x"))))}, {ev("Env1")}),
               Actx("A1", mk_varE(bv("y1")))),
        mk_let(mk_env({mk_bind(bv("x"), V), mk_bind(bv("y1"), Actx("A2", V))}, {ev("Env1")}),
               Actx("A1", mk_varE(bv("y1")))),
        {"A2"}));
  }
  // no-cp-e-c: letrec x=V, y@N1=A@N1[x], BCh(N1,N2), Env1 in A1[y@N2], A@N1 non-empty, N1 < N2
  for (bool abs : {false, true}) {
    TermPtr V = abs ? mk_lam(bv("w"), xv("t")) : mk_varE(bv("w"));
    rs.push_back(mk_rule(std::string("no-cp-e-c/") + (abs ? "abs" : "var"), true,
        mk_let(mk_env({mk_bind(bv("x"), V), mk_bind(yat("N1"), Aat("N1", mk_varE(bv("x")))),
                       mk_chain(iv("N1"), iv("N2"))}, {ev("Env1")}),
               Actx("A1", mk_varE(yat("N2")))),
        mk_let(mk_env({mk_bind(bv("x"), V), mk_bind(yat("N1"), Aat("N1", V)),
                       mk_chain(iv("N1"), iv("N2"))}, {ev("Env1")}),
               Actx("A1", mk_varE(yat("N2")))),
        {"A@N1"}, {lt("N1", "N2")}));
  }
  // no-llet-in: letrec Env1 in (letrec Env2 in r)
  rs.push_back(mk_rule("no-llet-in", true,
      mk_let(ev("Env1"), mk_let(ev("Env2"), xv("r"))),
      mk_let(mk_env({}, {ev("Env1"), ev("Env2")}), xv("r"))));
  // no-llet-e: letrec y1=(letrec Env2 in s), Env1 in A1[y1]
  rs.push_back(mk_rule("no-llet-e", true,
      mk_let(env1(mk_bind(bv("y1"), mk_let(ev("Env2"), xv("s"))), ev("Env1")), Actx("A1", mk_varE(bv("y1")))),
      mk_let(mk_env({mk_bind(bv("y1"), xv("s"))}, {ev("Env1"), ev("Env2")}), Actx("A1", mk_varE(bv("y1"))))));
  // no-llet-e-c: letrec y@N1=(letrec Env2 in s), BCh(N1,N2), Env1 in A1[y@N2], N1 < N2
  rs.push_back(mk_rule("no-llet-e-c", true,
      mk_let(mk_env({mk_bind(yat("N1"), mk_let(ev("Env2"), xv("s"))), mk_chain(iv("N1"), iv("N2"))}, {ev("Env1")}),
             Actx("A1", mk_varE(yat("N2")))),
      mk_let(mk_env({mk_bind(yat("N1"), xv("s")), mk_chain(iv("N1"), iv("N2"))}, {ev("Env1"), ev("Env2")}),
             Actx("A1", mk_varE(yat("N2")))),
      {}, {lt("N1", "N2")}));
  // no-lapp/1..4
  push_R_shapes(rs, "no-lapp",
      mk_app(mk_let(ev("Env2"), xv("t")), xv("s")),
      mk_let(ev("Env2"), mk_app(xv("t"), xv("s"))));
  return rs;
}
}  // namespace

const std::vector<Rule>& transformations() {
  static const std::vector<Rule> rs = build_transformations();
  return rs;
}

const std::vector<Rule>& no_rules() {
  static const std::vector<Rule> rs = build_no_rules();
  return rs;
}

bool selector_matches(const std::string& selector, const std::string& rule_name) {
  if (selector == rule_name) return true;
  std::string base = selector;
  bool explicit_wild = false;
  if (base.size() >= 2 && base[base.size() - 2] == '/' &&
      (base.back() == '_' || base.back() == '*')) {
    base = base.substr(0, base.size() - 2);
    explicit_wild = true;
  }
  (void)explicit_wild;
  // segment prefix: "cp-e" matches "cp-e/var" and "cp-e" but not "cp-e-c/var"
  if (rule_name.size() > base.size() && rule_name.compare(0, base.size(), base) == 0 &&
      rule_name[base.size()] == '/')
    return true;
  return rule_name == base;
}

std::vector<Rule> select_rules(const std::vector<Rule>& from, const std::string& selector) {
  std::vector<Rule> out;
  for (auto& r : from)
    if (selector_matches(selector, r.name)) out.push_back(r);
  return out;
}

std::string rule_base(const std::string& rule_name) {
  std::string s = rule_name;
  if (s.rfind("no-", 0) == 0) s = s.substr(3);
  auto slash = s.find('/');
  if (slash != std::string::npos) s = s.substr(0, slash);
  if (s.size() > 2 && s.compare(s.size() - 2, 2, "-c") == 0) s = s.substr(0, s.size() - 2);
  return s;
}

}  // namespace lcsx
