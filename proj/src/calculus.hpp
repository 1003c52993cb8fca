#pragma once
// The call-by-need letrec calculus: expression syntax, the encoding into the
// sorted term language, and the two rule catalogs — 8 transformations and 17
// normal-order rules (the latter with the reduction context built into their
// left-hand sides; the deep-chain shapes carry BCh atoms plus index
// constraints).

#include <string>
#include <vector>

#include "term.hpp"

namespace lcsx {

// integer index constraint: a+1 = b (succ) or a < b
struct IntCon {
  bool succ;
  std::string a, b;
  bool operator==(const IntCon& o) const { return succ == o.succ && a == o.a && b == o.b; }
  bool operator<(const IntCon& o) const {
    if (succ != o.succ) return succ < o.succ;
    if (a != o.a) return a < o.a;
    return b < o.b;
  }
};
std::string to_string(const IntCon& c);

// --- surface expressions ---
struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;
struct Expr {
  enum class Kind { Var, App, Lam, Letrec };
  Kind kind;
  std::string name;                                  // Var / Lam binder
  ExprPtr a, b;                                      // App parts; Lam body in a
  std::vector<std::pair<std::string, ExprPtr>> binds;  // Letrec
  ExprPtr body;                                      // Letrec body
};

ExprPtr parse_expr(const std::string& text);  // \x.e | (e1 e2) | letrec x=e,... in e | x
std::string to_string(const ExprPtr& e);
TermPtr encode(const ExprPtr& e);   // ground term over the free signature
ExprPtr decode(const TermPtr& t);   // inverse on ground encodings; throws otherwise

// --- rule catalogs ---
struct Rule {
  std::string name;  // e.g. "lbeta", "cp-e/abs", "no-lbeta/3", "no-llet-e-c"
  bool is_no;
  TermPtr lhs, rhs;
  std::vector<std::string> delta1;  // context variable keys forced non-empty
  std::vector<IntCon> delta2;
};

const std::vector<Rule>& transformations();  // 8
const std::vector<Rule>& no_rules();         // 17

// selector matching: exact name, a segment prefix ("cp-e" matches "cp-e/var"
// but not "no-cp-e-c/..."), or with an explicit trailing wildcard "/_" or "/*"
bool selector_matches(const std::string& selector, const std::string& rule_name);
std::vector<Rule> select_rules(const std::vector<Rule>& from, const std::string& selector);

// base family of a rule name for diagram labels: strips the no- prefix, the
// /var /abs /1../4 variant suffix, and the chain marker -c
// ("no-cp-e-c/abs" -> "cp-e", "no-lbeta/3" -> "lbeta", "llet-in" -> "llet-in")
std::string rule_base(const std::string& rule_name);

}  // namespace lcsx
