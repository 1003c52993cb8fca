#include "term.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace lcsx {

const char* sort_name(Sort s) {
  switch (s) {
    case Sort::Exp: return "Exp";
    case Sort::Bind: return "Bind";
    case Sort::Env: return "Env";
    case Sort::BV: return "BV";
    case Sort::Int: return "Int";
  }
  return "?";
}

const char* cls_name(CtxClass c) {
  switch (c) {
    case CtxClass::A: return "A";
    case CtxClass::S: return "S";
    case CtxClass::C: return "C";
  }
  return "?";
}

Sort sort_from_name(const std::string& s) {
  if (s == "Exp") return Sort::Exp;
  if (s == "Bind") return Sort::Bind;
  if (s == "Env") return Sort::Env;
  if (s == "BV") return Sort::BV;
  if (s == "Int") return Sort::Int;
  throw std::runtime_error("unknown sort: " + s);
}

CtxClass cls_from_name(const std::string& s) {
  if (s == "A") return CtxClass::A;
  if (s == "S") return CtxClass::S;
  if (s == "C") return CtxClass::C;
  throw std::runtime_error("unknown context class: " + s);
}

bool cls_leq(CtxClass a, CtxClass b) { return static_cast<int>(a) <= static_cast<int>(b); }
CtxClass cls_min(CtxClass a, CtxClass b) { return cls_leq(a, b) ? a : b; }

// ---------------------------------------------------------------------------
// constructors

static TermPtr make(Term t) { return std::make_shared<const Term>(std::move(t)); }

TermPtr mk_var(const std::string& name, Sort sort, TermPtr idx) {
  Term t;
  t.kind = Term::Kind::Var;
  t.name = name;
  t.sort = sort;
  t.idx = std::move(idx);
  if (t.idx && sort_of(t.idx) != Sort::Int)
    throw std::logic_error("variable index must be Int-sorted");
  return make(std::move(t));
}

TermPtr mk_int(long long v) {
  Term t;
  t.kind = Term::Kind::IntConst;
  t.ival = v;
  return make(std::move(t));
}

static void expect_sort(const TermPtr& t, Sort s, const char* where) {
  if (sort_of(t) != s)
    throw std::logic_error(std::string("sort mismatch in ") + where + ": expected " +
                           sort_name(s) + ", got " + sort_name(sort_of(t)) + " in " +
                           to_string(t));
}

TermPtr mk_fun(const std::string& sym, std::vector<TermPtr> args) {
  if (sym == "app") {
    if (args.size() != 2) throw std::logic_error("app/2");
    expect_sort(args[0], Sort::Exp, "app");
    expect_sort(args[1], Sort::Exp, "app");
  } else if (sym == "lam") {
    if (args.size() != 2) throw std::logic_error("lam/2");
    expect_sort(args[0], Sort::BV, "lam");
    expect_sort(args[1], Sort::Exp, "lam");
  } else if (sym == "let") {
    if (args.size() != 2) throw std::logic_error("let/2");
    expect_sort(args[0], Sort::Env, "let");
    expect_sort(args[1], Sort::Exp, "let");
  } else if (sym == "var") {
    if (args.size() != 1) throw std::logic_error("var/1");
    expect_sort(args[0], Sort::BV, "var");
  } else if (sym == "bind") {
    if (args.size() != 2) throw std::logic_error("bind/2");
    expect_sort(args[0], Sort::BV, "bind");
    expect_sort(args[1], Sort::Exp, "bind");
  } else if (sym != "@mark") {  // internal transparent marker, any single child
    throw std::logic_error("unknown symbol: " + sym);
  }
  Term t;
  t.kind = Term::Kind::Fun;
  t.name = sym;
  t.args = std::move(args);
  return make(std::move(t));
}

TermPtr mk_env(std::vector<TermPtr> elems, std::vector<TermPtr> tails) {
  Term t;
  t.kind = Term::Kind::EnvML;
  for (auto& e : elems) {
    Sort s = sort_of(e);
    if (s != Sort::Bind) throw std::logic_error("env component must be Bind-sorted");
    t.elems.push_back(e);
  }
  for (auto& r : tails) {
    if (r->kind == Term::Kind::EnvML) {  // flatten nested env material
      for (auto& e : r->elems) t.elems.push_back(e);
      for (auto& q : r->tails) t.tails.push_back(q);
    } else if (r->kind == Term::Kind::Var && r->sort == Sort::Env) {
      t.tails.push_back(r);
    } else {
      throw std::logic_error("env tail must be an Env variable or env term");
    }
  }
  if (t.elems.empty() && t.tails.size() == 1) return t.tails[0];  // env*({} ; E) = E
  auto lt = [](const TermPtr& a, const TermPtr& b) { return compare(a, b) < 0; };
  std::stable_sort(t.elems.begin(), t.elems.end(), lt);
  std::stable_sort(t.tails.begin(), t.tails.end(), lt);
  return make(std::move(t));
}

TermPtr mk_chain(TermPtr lo, TermPtr hi) {
  expect_sort(lo, Sort::Int, "BCh");
  expect_sort(hi, Sort::Int, "BCh");
  Term t;
  t.kind = Term::Kind::Chain;
  t.args = {std::move(lo), std::move(hi)};
  return make(std::move(t));
}

TermPtr mk_ctx(const std::string& name, CtxClass cls, TermPtr arg, TermPtr idx) {
  expect_sort(arg, Sort::Exp, "ctx application");
  Term t;
  t.kind = Term::Kind::CtxApp;
  t.name = name;
  t.cls = cls;
  t.idx = std::move(idx);
  if (t.idx && sort_of(t.idx) != Sort::Int)
    throw std::logic_error("context index must be Int-sorted");
  t.args = {std::move(arg)};
  return make(std::move(t));
}

TermPtr mk_hole() {
  Term t;
  t.kind = Term::Kind::Hole;
  return make(std::move(t));
}

TermPtr mk_app(TermPtr f, TermPtr a) { return mk_fun("app", {std::move(f), std::move(a)}); }
TermPtr mk_lam(TermPtr bv, TermPtr body) { return mk_fun("lam", {std::move(bv), std::move(body)}); }
TermPtr mk_let(TermPtr env, TermPtr body) { return mk_fun("let", {std::move(env), std::move(body)}); }
TermPtr mk_varE(TermPtr bv) { return mk_fun("var", {std::move(bv)}); }
TermPtr mk_bind(TermPtr bv, TermPtr val) { return mk_fun("bind", {std::move(bv), std::move(val)}); }
TermPtr mk_empty_env() { return mk_env({}, {}); }

Sort sort_of(const TermPtr& t) {
  switch (t->kind) {
    case Term::Kind::Var: return t->sort;
    case Term::Kind::IntConst: return Sort::Int;
    case Term::Kind::Fun:
      if (t->name == "bind") return Sort::Bind;
      return Sort::Exp;  // app, lam, let, var, @mark
    case Term::Kind::EnvML: return Sort::Env;
    case Term::Kind::Chain: return Sort::Bind;  // placement sort inside env lists
    case Term::Kind::CtxApp: return Sort::Exp;
    case Term::Kind::Hole: return Sort::Exp;
  }
  return Sort::Exp;
}

// ---------------------------------------------------------------------------
// ordering

static int cmp_int(long long a, long long b) { return a < b ? -1 : a > b ? 1 : 0; }

static int cmp_opt(const TermPtr& a, const TermPtr& b) {
  if (!a && !b) return 0;
  if (!a) return -1;
  if (!b) return 1;
  return compare(a, b);
}

static int cmp_vec(const std::vector<TermPtr>& a, const std::vector<TermPtr>& b) {
  size_t n = std::min(a.size(), b.size());
  for (size_t i = 0; i < n; ++i)
    if (int c = compare(a[i], b[i])) return c;
  return cmp_int(static_cast<long long>(a.size()), static_cast<long long>(b.size()));
}

int compare(const TermPtr& a, const TermPtr& b) {
  if (a.get() == b.get()) return 0;
  if (int c = cmp_int(static_cast<int>(a->kind), static_cast<int>(b->kind))) return c;
  switch (a->kind) {
    case Term::Kind::Var:
      if (int c = a->name.compare(b->name)) return c < 0 ? -1 : 1;
      if (int c = cmp_opt(a->idx, b->idx)) return c;
      return cmp_int(static_cast<int>(a->sort), static_cast<int>(b->sort));
    case Term::Kind::IntConst:
      return cmp_int(a->ival, b->ival);
    case Term::Kind::Fun:
      if (int c = a->name.compare(b->name)) return c < 0 ? -1 : 1;
      return cmp_vec(a->args, b->args);
    case Term::Kind::EnvML:
      if (int c = cmp_vec(a->elems, b->elems)) return c;
      return cmp_vec(a->tails, b->tails);
    case Term::Kind::Chain:
      return cmp_vec(a->args, b->args);
    case Term::Kind::CtxApp:
      if (int c = a->name.compare(b->name)) return c < 0 ? -1 : 1;
      if (int c = cmp_opt(a->idx, b->idx)) return c;
      if (int c = cmp_int(static_cast<int>(a->cls), static_cast<int>(b->cls))) return c;
      return cmp_vec(a->args, b->args);
    case Term::Kind::Hole:
      return 0;
  }
  return 0;
}

bool equal(const TermPtr& a, const TermPtr& b) { return compare(a, b) == 0; }
bool lc_equal(const TermPtr& a, const TermPtr& b) { return equal(a, b); }

std::string var_key(const TermPtr& v) {
  std::string k = v->name;
  if (v->idx) {
    k += "@";
    k += (v->idx->kind == Term::Kind::IntConst) ? std::to_string(v->idx->ival) : v->idx->name;
  }
  return k;
}

// ---------------------------------------------------------------------------
// substitution

static TermPtr apply1_impl(const Subst& s, const TermPtr& t) {
  switch (t->kind) {
    case Term::Kind::Var: {
      TermPtr nt = t;
      if (t->idx) {
        TermPtr ni = apply1_impl(s, t->idx);
        if (!equal(ni, t->idx)) nt = mk_var(t->name, t->sort, ni);
      }
      if (sort_of(nt) == Sort::Int) {
        auto it = s.ints.find(var_key(nt));
        if (it != s.ints.end()) return it->second;
        return nt;
      }
      auto it = s.fo.find(var_key(nt));
      if (it != s.fo.end()) return it->second;
      return nt;
    }
    case Term::Kind::IntConst:
    case Term::Kind::Hole:
      return t;
    case Term::Kind::Fun: {
      std::vector<TermPtr> args;
      args.reserve(t->args.size());
      for (auto& a : t->args) args.push_back(apply1_impl(s, a));
      return mk_fun(t->name, std::move(args));
    }
    case Term::Kind::EnvML: {
      std::vector<TermPtr> elems, tails;
      for (auto& e : t->elems) {
        TermPtr ne = apply1_impl(s, e);
        if (ne->kind == Term::Kind::EnvML) {
          // a Bind variable was mapped to env material: not supported
          throw std::logic_error("env component substituted to env material");
        }
        elems.push_back(ne);
      }
      for (auto& r : t->tails) tails.push_back(apply1_impl(s, r));
      return mk_env(std::move(elems), std::move(tails));
    }
    case Term::Kind::Chain: {
      return mk_chain(apply1_impl(s, t->args[0]), apply1_impl(s, t->args[1]));
    }
    case Term::Kind::CtxApp: {
      TermPtr idx = t->idx ? apply1_impl(s, t->idx) : nullptr;
      TermPtr arg = apply1_impl(s, t->args[0]);
      TermPtr probe = mk_ctx(t->name, t->cls, arg, idx);
      auto it = s.ctx.find(var_key(probe));
      if (it != s.ctx.end()) return fill_hole(it->second, arg);
      return probe;
    }
  }
  return t;
}

TermPtr apply1(const Subst& s, const TermPtr& t) { return apply1_impl(s, t); }

TermPtr apply_star(const Subst& s, const TermPtr& t) {
  TermPtr cur = t;
  for (int i = 0; i < 1000; ++i) {
    TermPtr next = apply1_impl(s, cur);
    if (equal(next, cur)) return cur;
    cur = next;
  }
  throw std::logic_error("apply_star: substitution does not reach a fixpoint (cycle?)");
}

static TermPtr fill_impl(const TermPtr& t, const TermPtr& filler, int& count) {
  switch (t->kind) {
    case Term::Kind::Hole:
      ++count;
      return filler;
    case Term::Kind::Var:
    case Term::Kind::IntConst:
      return t;
    case Term::Kind::Fun: {
      std::vector<TermPtr> args;
      bool changed = false;
      for (auto& a : t->args) {
        TermPtr na = fill_impl(a, filler, count);
        changed = changed || na.get() != a.get();
        args.push_back(na);
      }
      return changed ? mk_fun(t->name, std::move(args)) : t;
    }
    case Term::Kind::EnvML: {
      std::vector<TermPtr> elems, tails;
      bool changed = false;
      for (auto& e : t->elems) {
        TermPtr ne = fill_impl(e, filler, count);
        changed = changed || ne.get() != e.get();
        elems.push_back(ne);
      }
      for (auto& r : t->tails) tails.push_back(r);
      return changed ? mk_env(std::move(elems), std::move(tails)) : t;
    }
    case Term::Kind::Chain:
      return t;
    case Term::Kind::CtxApp: {
      TermPtr na = fill_impl(t->args[0], filler, count);
      if (na.get() == t->args[0].get()) return t;
      return mk_ctx(t->name, t->cls, na, t->idx);
    }
  }
  return t;
}

TermPtr fill_hole(const TermPtr& ctx_term, const TermPtr& filler) {
  int count = 0;
  TermPtr r = fill_impl(ctx_term, filler, count);
  if (count != 1)
    throw std::logic_error("fill_hole: context has " + std::to_string(count) + " holes");
  return r;
}

bool contains_hole(const TermPtr& t) {
  switch (t->kind) {
    case Term::Kind::Hole: return true;
    case Term::Kind::Var:
    case Term::Kind::IntConst:
    case Term::Kind::Chain:
      return false;
    case Term::Kind::Fun:
      for (auto& a : t->args)
        if (contains_hole(a)) return true;
      return false;
    case Term::Kind::EnvML:
      for (auto& e : t->elems)
        if (contains_hole(e)) return true;
      return false;
    case Term::Kind::CtxApp:
      return contains_hole(t->args[0]);
  }
  return false;
}

// ---------------------------------------------------------------------------
// inspection

void collect_vars(const TermPtr& t, std::vector<VarRef>& out) {
  switch (t->kind) {
    case Term::Kind::Var:
      if (t->idx) collect_vars(t->idx, out);
      out.push_back({Term::Kind::Var, var_key(t), t->sort, CtxClass::C});
      return;
    case Term::Kind::IntConst:
    case Term::Kind::Hole:
      return;
    case Term::Kind::Fun:
    case Term::Kind::Chain:
      for (auto& a : t->args) collect_vars(a, out);
      return;
    case Term::Kind::EnvML:
      for (auto& e : t->elems) collect_vars(e, out);
      for (auto& r : t->tails) collect_vars(r, out);
      return;
    case Term::Kind::CtxApp:
      if (t->idx) collect_vars(t->idx, out);
      out.push_back({Term::Kind::CtxApp, var_key(t), Sort::Exp, t->cls});
      collect_vars(t->args[0], out);
      return;
  }
}

std::vector<VarRef> collect_vars(const TermPtr& t) {
  std::vector<VarRef> out;
  collect_vars(t, out);
  return out;
}

std::set<std::string> var_keys(const TermPtr& t) {
  std::vector<VarRef> v;
  collect_vars(t, v);
  std::set<std::string> out;
  for (auto& r : v) out.insert(r.key);
  return out;
}

bool occurs(const std::string& key, const TermPtr& t) {
  std::vector<VarRef> v;
  collect_vars(t, v);
  for (auto& r : v)
    if (r.key == key) return true;
  return false;
}

long long count_lets(const TermPtr& t) {
  long long n = 0;
  switch (t->kind) {
    case Term::Kind::Fun:
      if (t->name == "let") ++n;
      for (auto& a : t->args) n += count_lets(a);
      return n;
    case Term::Kind::EnvML:
      for (auto& e : t->elems) n += count_lets(e);
      return n;
    case Term::Kind::CtxApp:
      return count_lets(t->args[0]);
    default:
      return 0;
  }
}

long long mu2(const TermPtr& t) {
  switch (t->kind) {
    case Term::Kind::Var:
    case Term::Kind::IntConst:
    case Term::Kind::Hole:
      return 1;
    case Term::Kind::Fun: {
      long long n = 1;
      for (auto& a : t->args) n += mu2(a);
      return n;
    }
    case Term::Kind::EnvML: {
      long long n = 0;
      for (auto& e : t->elems) {
        if (e->kind == Term::Kind::Chain)
          n += 1;
        else
          n += 7 + mu2(e);
      }
      for (auto& r : t->tails) n += mu2(r);
      return n;
    }
    case Term::Kind::Chain:
      return 1;
    case Term::Kind::CtxApp:
      return 1 + mu2(t->args[0]);
  }
  return 1;
}

std::vector<TermPtr> expand_chain_binds(long long lo, long long hi) {
  if (!(0 < lo && lo < hi)) throw std::logic_error("expand_chain_binds: need 0 < lo < hi");
  std::vector<TermPtr> out;
  for (long long i = lo + 1; i <= hi; ++i) {
    TermPtr yi = mk_var("y", Sort::BV, mk_int(i));
    TermPtr yprev = mk_var("y", Sort::BV, mk_int(i - 1));
    TermPtr ai = mk_ctx("A", CtxClass::A, mk_varE(yprev), mk_int(i));
    out.push_back(mk_bind(yi, ai));
  }
  return out;
}

// ---------------------------------------------------------------------------
// printing

static void print(const TermPtr& t, std::ostream& os);

// chain bounds and name indexes print without a sort suffix
static void print_int_bare(const TermPtr& t, std::ostream& os) {
  if (t->kind == Term::Kind::IntConst) os << t->ival;
  else os << t->name;
}

static void print(const TermPtr& t, std::ostream& os) {
  switch (t->kind) {
    case Term::Kind::Var:
      os << t->name;
      if (t->idx) {
        os << "@";
        print_int_bare(t->idx, os);
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
        print(a, os);
      }
      os << ")";
      return;
    }
    case Term::Kind::EnvML: {
      os << "env*({";
      bool first = true;
      for (auto& e : t->elems) {
        if (!first) os << ", ";
        first = false;
        print(e, os);
      }
      os << "}";
      if (!t->tails.empty()) {
        os << " ; ";
        first = true;
        for (auto& r : t->tails) {
          if (!first) os << ", ";
          first = false;
          print(r, os);
        }
      }
      os << ")";
      return;
    }
    case Term::Kind::Chain:
      os << "BCh(";
      print_int_bare(t->args[0], os);
      os << ", ";
      print_int_bare(t->args[1], os);
      os << ")";
      return;
    case Term::Kind::CtxApp:
      os << t->name;
      if (t->idx) {
        os << "@";
        print_int_bare(t->idx, os);
      }
      os << "{" << cls_name(t->cls) << "}(";
      print(t->args[0], os);
      os << ")";
      return;
    case Term::Kind::Hole:
      os << "[]";
      return;
  }
}

std::string to_string(const TermPtr& t) {
  std::ostringstream os;
  print(t, os);
  return os.str();
}

// ---------------------------------------------------------------------------
// parsing

namespace {

struct Lexer {
  std::string s;
  size_t i = 0;
  void skip() {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r')) ++i;
  }
  bool eat(char c) {
    skip();
    if (i < s.size() && s[i] == c) {
      ++i;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!eat(c))
      throw std::runtime_error("parse error: expected '" + std::string(1, c) + "' at offset " +
                               std::to_string(i) + " in: " + s);
  }
  bool peek(char c) {
    skip();
    return i < s.size() && s[i] == c;
  }
  bool ident_char(char c) {
    return isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
  }
  std::string ident() {
    skip();
    size_t b = i;
    while (i < s.size() && ident_char(s[i])) ++i;
    if (b == i) throw std::runtime_error("parse error: identifier expected at " + std::to_string(i));
    std::string name = s.substr(b, i - b);
    if (name == "env" && i < s.size() && s[i] == '*') {
      ++i;
      name = "env*";
    }
    return name;
  }
  bool at_int() {
    skip();
    return i < s.size() && (isdigit(static_cast<unsigned char>(s[i])));
  }
  long long integer() {
    skip();
    size_t b = i;
    while (i < s.size() && isdigit(static_cast<unsigned char>(s[i]))) ++i;
    return std::stoll(s.substr(b, i - b));
  }
  bool done() {
    skip();
    return i >= s.size();
  }
};

struct Parser {
  Lexer lx;

  TermPtr int_term() {
    if (lx.at_int()) return mk_int(lx.integer());
    std::string n = lx.ident();
    return mk_var(n, Sort::Int);
  }

  TermPtr term() {
    lx.skip();
    if (lx.peek('[')) {
      lx.expect('[');
      lx.expect(']');
      return mk_hole();
    }
    if (lx.at_int()) return mk_int(lx.integer());
    std::string name = lx.ident();
    if (name == "env*") {
      lx.expect('(');
      lx.expect('{');
      std::vector<TermPtr> elems, tails;
      if (!lx.peek('}')) {
        do {
          elems.push_back(term());
        } while (lx.eat(','));
      }
      lx.expect('}');
      if (lx.eat(';')) {
        do {
          tails.push_back(term());
        } while (lx.eat(','));
      }
      lx.expect(')');
      return mk_env(std::move(elems), std::move(tails));
    }
    if (name == "BCh") {
      lx.expect('(');
      TermPtr lo = int_term();
      lx.expect(',');
      TermPtr hi = int_term();
      lx.expect(')');
      return mk_chain(lo, hi);
    }
    TermPtr idx;
    if (lx.eat('@')) idx = int_term();
    if (lx.peek('{')) {  // context application
      lx.expect('{');
      CtxClass cls = cls_from_name(lx.ident());
      lx.expect('}');
      lx.expect('(');
      TermPtr arg = term();
      lx.expect(')');
      return mk_ctx(name, cls, arg, idx);
    }
    if (lx.peek('(') && !idx) {  // function symbol
      lx.expect('(');
      std::vector<TermPtr> args;
      if (!lx.peek(')')) {
        do {
          args.push_back(term());
        } while (lx.eat(','));
      }
      lx.expect(')');
      return mk_fun(name, std::move(args));
    }
    if (lx.eat(':')) {
      Sort s = sort_from_name(lx.ident());
      return mk_var(name, s, idx);
    }
    // bare name: an Int variable (chain bound or index position)
    if (!idx) return mk_var(name, Sort::Int);
    throw std::runtime_error("parse error: indexed name needs :Sort or {Cls} at " +
                             std::to_string(lx.i));
  }
};

}  // namespace

TermPtr parse_term(const std::string& text) {
  Parser p;
  p.lx.s = text;
  TermPtr t = p.term();
  if (!p.lx.done())
    throw std::runtime_error("parse error: trailing input at offset " + std::to_string(p.lx.i) +
                             " in: " + text);
  return t;
}

}  // namespace lcsx
