#pragma once

// Exact exterior algebra on R^n with the Euclidean metric and the standard
// orientation dx1 ^ ... ^ dxn. Index lists are 1-based throughout.

#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <vector>

#include <json.hpp>

#include "calib/errors.hpp"
#include "calib/rational.hpp"

namespace calib {

/// Strictly increasing list of 1-based coordinate indices.
class MultiIndex {
 public:
  MultiIndex() = default;
  /// Throws std::invalid_argument unless strictly increasing and positive.
  explicit MultiIndex(std::vector<int> indices);
  MultiIndex(std::initializer_list<int> indices) : MultiIndex(std::vector<int>(indices)) {}

  const std::vector<int>& indices() const { return indices_; }
  int degree() const { return static_cast<int>(indices_.size()); }
  int back() const { return indices_.empty() ? 0 : indices_.back(); }

  auto operator<=>(const MultiIndex&) const = default;

 private:
  std::vector<int> indices_;
};

/// Sparse k-form on R^n with exact rational coefficients; zero terms are
/// never stored.
class AlternatingForm {
 public:
  using Terms = std::map<MultiIndex, Rational>;

  AlternatingForm(int n, int k);

  int dimension() const { return n_; }
  int degree() const { return k_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  Rational coefficient(const MultiIndex& index) const;

  /// Adds c * dx_{i1} ^ ... ^ dx_{ik}; the indices may be in any order and the
  /// permutation sign is applied. Repeated indices contribute nothing.
  void add_term(std::vector<int> indices, const Rational& c);

  AlternatingForm& operator+=(const AlternatingForm& other);
  AlternatingForm& operator*=(const Rational& c);

  friend AlternatingForm operator+(AlternatingForm a, const AlternatingForm& b) { return a += b; }
  friend AlternatingForm operator*(const Rational& c, AlternatingForm a) { return a *= c; }
  friend AlternatingForm operator-(const AlternatingForm& a) { return Rational(-1) * a; }
  friend AlternatingForm operator-(AlternatingForm a, const AlternatingForm& b) { return a += -b; }
  friend bool operator==(const AlternatingForm&, const AlternatingForm&) = default;

 private:
  int n_;
  int k_;
  Terms terms_;
};

/// Basis form c * dx_{i1} ^ ... ^ dx_{ik} on R^n (indices in any order).
AlternatingForm basis_form(int n, std::vector<int> indices, const Rational& c = 1);

AlternatingForm wedge(const AlternatingForm& a, const AlternatingForm& b);
AlternatingForm hodge_star(const AlternatingForm& a);

/// The G2 3-form on R^7.
AlternatingForm g2_form();
/// Its Hodge dual, the coassociative 4-form on R^7.
AlternatingForm g2_star_form();
/// The Spin(7) 4-form on R^8.
AlternatingForm spin7_form();

/// Ordered list of k vectors in R^n (floating representation).
struct OrientedFrame {
  int n = 0;
  std::vector<std::vector<double>> vectors;

  OrientedFrame() = default;
  OrientedFrame(int dim, std::vector<std::vector<double>> vs);

  int size() const { return static_cast<int>(vectors.size()); }
  double gram_determinant() const;
};

/// Degenerate frames are rejected below this Gram determinant.
inline constexpr double kDegenerateGram = 1e-12;

double evaluate(const AlternatingForm& a, const OrientedFrame& frame);
/// kappa = a(v1..vk) / sqrt(Gram det). Throws DegenerateFrame.
double calibration_ratio(const AlternatingForm& a, const OrientedFrame& frame);

/// Best calibration ratio found over random frames plus projected-gradient
/// ascent on the Stiefel manifold. Deterministic for a given seed.
double comass_estimate(const AlternatingForm& a, int samples, int refine_steps, std::uint64_t seed);

inline double scale(double s, const Rational& q) { return s * q.get_d(); }
inline Rational scale(const Rational& s, const Rational& q) { return s * q; }

namespace detail {

// Signed permutations of {0..k-1} in lexicographic order.
const std::vector<std::pair<std::vector<int>, int>>& permutations(int k);
}  // namespace detail

/// a(v1, ..., vk) for any commutative ring scalar (double, Rational,
/// Polynomial). Each vector must have a.dimension() entries.
template <class Scalar>
Scalar evaluate_generic(const AlternatingForm& a, std::span<const std::vector<Scalar>> vectors, const Scalar& zero) {
  if (static_cast<int>(vectors.size()) != a.degree())
    throw ArityMismatch("form of degree " + std::to_string(a.degree()) + " applied to " +
                        std::to_string(vectors.size()) + " vectors");
  for (const auto& v : vectors)
    if (static_cast<int>(v.size()) != a.dimension()) throw DimensionMismatch("vector length differs from form dimension");

  const int k = a.degree();
  const auto& perms = detail::permutations(k);
  Scalar total = zero;
  for (const auto& [index, coeff] : a.terms()) {
    const auto& idx = index.indices();
    Scalar det = zero;
    for (const auto& [perm, sign] : perms) {
      Scalar prod = vectors[0][idx[perm[0]] - 1];
      for (int row = 1; row < k; ++row) prod = prod * vectors[row][idx[perm[row]] - 1];
      if (sign > 0)
        det = det + prod;
      else
        det = det - prod;
    }
    total = total + scale(det, coeff);
  }
  return total;
}

/// {n, k, terms: [{indices: [...], coeff: "p/q"}]} with ascending indices.
nlohmann::json to_json(const AlternatingForm& a);
AlternatingForm form_from_json(const nlohmann::json& j);

}  // namespace calib
