#include "calib/polynomial.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace calib {

Monomial Monomial::variable(int index, int exponent) {
  if (index < 0 || exponent < 0) throw std::invalid_argument("bad monomial factor");
  Monomial m;
  if (exponent > 0) m.factors_.emplace_back(index, exponent);
  return m;
}

int Monomial::degree() const {
  int d = 0;
  for (const auto& f : factors_) d += f.second;
  return d;
}

int Monomial::exponent(int var) const {
  for (const auto& [v, e] : factors_)
    if (v == var) return e;
  return 0;
}

Monomial operator*(const Monomial& a, const Monomial& b) {
  Monomial out;
  auto ia = a.factors_.begin();
  auto ib = b.factors_.begin();
  while (ia != a.factors_.end() || ib != b.factors_.end()) {
    if (ib == b.factors_.end() || (ia != a.factors_.end() && ia->first < ib->first)) {
      out.factors_.push_back(*ia++);
    } else if (ia == a.factors_.end() || ib->first < ia->first) {
      out.factors_.push_back(*ib++);
    } else {
      out.factors_.emplace_back(ia->first, ia->second + ib->second);
      ++ia;
      ++ib;
    }
  }
  return out;
}

bool GrlexDescending::operator()(const Monomial& a, const Monomial& b) const {
  const int da = a.degree();
  const int db = b.degree();
  if (da != db) return da > db;
  // Lex: the first variable whose exponents differ decides; larger exponent
  // on the earlier variable sorts first.
  auto ia = a.factors().begin();
  auto ib = b.factors().begin();
  for (; ia != a.factors().end() && ib != b.factors().end(); ++ia, ++ib) {
    if (ia->first != ib->first) return ia->first < ib->first;
    if (ia->second != ib->second) return ia->second > ib->second;
  }
  return ia != a.factors().end() && ib == b.factors().end();
}

Polynomial Polynomial::constant(int nvars, const Rational& c) {
  Polynomial p(nvars);
  p.add_term(Monomial{}, c);
  return p;
}

Polynomial Polynomial::variable(int nvars, int index) {
  if (index < 0 || index >= nvars) throw DimensionMismatch("variable index outside the variable space");
  Polynomial p(nvars);
  p.add_term(Monomial::variable(index), 1);
  return p;
}

int Polynomial::degree() const {
  int d = -1;
  for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
  return d;
}

int Polynomial::degree_below(int limit) const {
  int d = -1;
  for (const auto& [m, c] : terms_) {
    int dm = 0;
    for (const auto& [v, e] : m.factors())
      if (v < limit) dm += e;
    d = std::max(d, dm);
  }
  return d;
}

void Polynomial::add_term(const Monomial& m, const Rational& c) {
  if (c == 0) return;
  for (const auto& [v, e] : m.factors())
    if (v >= nvars_) throw DimensionMismatch("monomial uses a variable outside the variable space");
  auto [it, inserted] = terms_.try_emplace(m, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

void Polynomial::check(const Polynomial& o) const {
  if (nvars_ != o.nvars_)
    throw DimensionMismatch("polynomials over " + std::to_string(nvars_) + " and " + std::to_string(o.nvars_) + " variables");
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  check(o);
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  check(o);
  for (const auto& [m, c] : o.terms_) add_term(m, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(const Rational& c) {
  if (c == 0) {
    terms_.clear();
    return *this;
  }
  for (auto& [m, coeff] : terms_) coeff *= c;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  a.check(b);
  Polynomial out(a.nvars_);
  for (const auto& [ma, ca] : a.terms_)
    for (const auto& [mb, cb] : b.terms_) out.add_term(ma * mb, ca * cb);
  return out;
}

double Polynomial::eval(std::span<const double> point) const {
  if (static_cast<int>(point.size()) != nvars_) throw DimensionMismatch("evaluation point has the wrong length");
  double total = 0;
  for (const auto& [m, c] : terms_) {
    double t = c.get_d();
    for (const auto& [v, e] : m.factors()) {
      double x = point[v];
      for (int i = 0; i < e; ++i) t *= x;
    }
    total += t;
  }
  return total;
}

Rational Polynomial::eval(std::span<const Rational> point) const {
  if (static_cast<int>(point.size()) != nvars_) throw DimensionMismatch("evaluation point has the wrong length");
  Rational total = 0;
  for (const auto& [m, c] : terms_) {
    Rational t = c;
    for (const auto& [v, e] : m.factors())
      for (int i = 0; i < e; ++i) t *= point[v];
    total += t;
  }
  return total;
}

Polynomial Polynomial::derivative(int var) const {
  Polynomial out(nvars_);
  for (const auto& [m, c] : terms_) {
    const int e = m.exponent(var);
    if (e == 0) continue;
    Monomial rest;
    for (const auto& [v, ev] : m.factors()) rest = rest * Monomial::variable(v, v == var ? ev - 1 : ev);
    out.add_term(rest, c * e);
  }
  return out;
}

Polynomial Polynomial::substitute(int var, const Polynomial& value) const {
  check(value);
  Polynomial out(nvars_);
  for (const auto& [m, c] : terms_) {
    Monomial rest;
    int e = 0;
    for (const auto& [v, ev] : m.factors()) {
      if (v == var)
        e = ev;
      else
        rest = rest * Monomial::variable(v, ev);
    }
    Polynomial term(nvars_);
    term.add_term(rest, c);
    out += e == 0 ? term : term * pow(value, e);
  }
  return out;
}

Polynomial Polynomial::widen(int nvars) const {
  if (nvars < nvars_) throw DimensionMismatch("cannot narrow a polynomial");
  Polynomial out(nvars);
  out.terms_ = terms_;
  return out;
}

Polynomial pow(const Polynomial& p, int e) {
  if (e < 0) throw std::invalid_argument("negative exponent");
  Polynomial out = Polynomial::constant(p.variable_count(), 1);
  for (int i = 0; i < e; ++i) out = out * p;
  return out;
}

std::string to_string(const Polynomial& p, std::span<const std::string> names) {
  if (static_cast<int>(names.size()) < p.variable_count()) throw DimensionMismatch("not enough variable names");
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : p.terms()) {
    const bool negative = c < 0;
    const Rational mag = negative ? Rational(-c) : c;
    if (first)
      out += negative ? "-" : "";
    else
      out += negative ? " - " : " + ";
    first = false;

    std::string mono;
    for (const auto& [v, e] : m.factors()) {
      if (!mono.empty()) mono += "*";
      mono += names[v];
      if (e > 1) mono += "^" + std::to_string(e);
    }
    if (mono.empty())
      out += to_string(mag);
    else if (mag == 1)
      out += mono;
    else
      out += to_string(mag) + "*" + mono;
  }
  return out;
}

namespace {

class PolyParser {
 public:
  PolyParser(std::string_view text, std::span<const std::string> names) : text_(text), names_(names) {}

  Polynomial parse() {
    const int n = static_cast<int>(names_.size());
    Polynomial out(n);
    skip();
    if (pos_ == text_.size()) fail("empty polynomial");
    bool first = true;
    while (pos_ < text_.size()) {
      Rational sign = 1;
      if (peek() == '+' || peek() == '-') {
        if (peek() == '-') sign = -1;
        ++pos_;
        skip();
      } else if (!first) {
        fail("expected '+' or '-'");
      }
      first = false;
      Polynomial term = factor();
      while (peek() == '*') {
        ++pos_;
        skip();
        term = term * factor();
      }
      out += term * sign;
    }
    return out;
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("polynomial parse error at " + std::to_string(pos_) + ": " + what);
  }

  int integer() {
    const std::size_t start = pos_;
    while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    if (start == pos_) fail("expected integer");
    return std::stoi(std::string(text_.substr(start, pos_ - start)));
  }

  Polynomial factor() {
    const int n = static_cast<int>(names_.size());
    Polynomial f(n);
    if (std::isdigit(static_cast<unsigned char>(peek()))) {
      const std::size_t start = pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      if (peek() == '/') {
        ++pos_;
        while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      }
      f = Polynomial::constant(n, parse_rational(text_.substr(start, pos_ - start)));
    } else if (std::isalpha(static_cast<unsigned char>(peek())) || peek() == '_') {
      const std::size_t start = pos_;
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') ++pos_;
      const std::string_view name = text_.substr(start, pos_ - start);
      auto it = std::find(names_.begin(), names_.end(), name);
      if (it == names_.end()) fail("unknown variable '" + std::string(name) + "'");
      f = Polynomial::variable(n, static_cast<int>(it - names_.begin()));
      if (peek() == '^') {
        ++pos_;
        f = pow(f, integer());
      }
    } else {
      fail("expected a number or a variable");
    }
    skip();
    return f;
  }

  std::string_view text_;
  std::span<const std::string> names_;
  std::size_t pos_ = 0;
};

}  // namespace

Polynomial parse_polynomial(std::string_view text, std::span<const std::string> names) {
  return PolyParser(text, names).parse();
}

std::vector<std::string> coordinate_names(int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back("x" + std::to_string(i));
  return out;
}

}  // namespace calib
