#include "calib/forms.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace calib {

namespace {

// Sorts in place and returns the sign of the sorting permutation, or 0 when
// an index repeats.
int sort_with_sign(std::vector<int>& v) {
  int sign = 1;
  for (std::size_t i = 1; i < v.size(); ++i)
    for (std::size_t j = i; j > 0 && v[j - 1] >= v[j]; --j) {
      if (v[j - 1] == v[j]) return 0;
      std::swap(v[j - 1], v[j]);
      sign = -sign;
    }
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i - 1] == v[i]) return 0;
  return sign;
}

void check_dims(const AlternatingForm& a, const AlternatingForm& b) {
  if (a.dimension() != b.dimension())
    throw DimensionMismatch("forms on R^" + std::to_string(a.dimension()) + " and R^" + std::to_string(b.dimension()));
}

}  // namespace

MultiIndex::MultiIndex(std::vector<int> indices) : indices_(std::move(indices)) {
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (indices_[i] < 1) throw std::invalid_argument("multi-index entries are 1-based");
    if (i > 0 && indices_[i - 1] >= indices_[i]) throw std::invalid_argument("multi-index must be strictly increasing");
  }
}

AlternatingForm::AlternatingForm(int n, int k) : n_(n), k_(k) {
  if (n < 1 || k < 0 || k > n) throw std::invalid_argument("invalid form shape (n=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
}

Rational AlternatingForm::coefficient(const MultiIndex& index) const {
  auto it = terms_.find(index);
  return it == terms_.end() ? Rational(0) : it->second;
}

void AlternatingForm::add_term(std::vector<int> indices, const Rational& c) {
  if (static_cast<int>(indices.size()) != k_) throw ArityMismatch("term degree differs from form degree");
  for (int i : indices)
    if (i < 1 || i > n_) throw DimensionMismatch("index " + std::to_string(i) + " outside 1.." + std::to_string(n_));
  const int sign = sort_with_sign(indices);
  if (sign == 0 || c == 0) return;
  MultiIndex key(std::move(indices));
  Rational& slot = terms_[key];
  slot += sign > 0 ? c : Rational(-c);
  if (slot == 0) terms_.erase(key);
}

AlternatingForm& AlternatingForm::operator+=(const AlternatingForm& other) {
  check_dims(*this, other);
  if (k_ != other.k_) throw ArityMismatch("cannot add forms of different degree");
  for (const auto& [idx, c] : other.terms_) {
    Rational& slot = terms_[idx];
    slot += c;
    if (slot == 0) terms_.erase(idx);
  }
  return *this;
}

AlternatingForm& AlternatingForm::operator*=(const Rational& c) {
  if (c == 0) {
    terms_.clear();
    return *this;
  }
  for (auto& [idx, coeff] : terms_) coeff *= c;
  return *this;
}

AlternatingForm basis_form(int n, std::vector<int> indices, const Rational& c) {
  AlternatingForm f(n, static_cast<int>(indices.size()));
  f.add_term(std::move(indices), c);
  return f;
}

AlternatingForm wedge(const AlternatingForm& a, const AlternatingForm& b) {
  check_dims(a, b);
  if (a.degree() + b.degree() > a.dimension())
    throw ArityMismatch("wedge degree " + std::to_string(a.degree() + b.degree()) + " exceeds dimension");
  AlternatingForm out(a.dimension(), a.degree() + b.degree());
  for (const auto& [ia, ca] : a.terms())
    for (const auto& [ib, cb] : b.terms()) {
      std::vector<int> joined = ia.indices();
      joined.insert(joined.end(), ib.indices().begin(), ib.indices().end());
      out.add_term(std::move(joined), ca * cb);
    }
  return out;
}

AlternatingForm hodge_star(const AlternatingForm& a) {
  const int n = a.dimension();
  AlternatingForm out(n, n - a.degree());
  for (const auto& [idx, c] : a.terms()) {
    std::vector<int> complement;
    for (int i = 1, p = 0; i <= n; ++i) {
      if (p < idx.degree() && idx.indices()[p] == i)
        ++p;
      else
        complement.push_back(i);
    }
    // dx_I ^ *dx_I = vol  =>  *dx_I = sign(I, J) dx_J.
    std::vector<int> perm = idx.indices();
    perm.insert(perm.end(), complement.begin(), complement.end());
    const int sign = sort_with_sign(perm);
    out.add_term(complement, sign > 0 ? c : Rational(-c));
  }
  return out;
}

AlternatingForm g2_form() {
  AlternatingForm f(7, 3);
  f.add_term({1, 2, 3}, 1);
  f.add_term({1, 4, 5}, 1);
  f.add_term({1, 6, 7}, 1);
  f.add_term({2, 4, 6}, 1);
  f.add_term({2, 5, 7}, -1);
  f.add_term({3, 4, 7}, -1);
  f.add_term({3, 5, 6}, -1);
  return f;
}

AlternatingForm g2_star_form() {
  AlternatingForm f(7, 4);
  f.add_term({4, 5, 6, 7}, 1);
  f.add_term({2, 3, 6, 7}, 1);
  f.add_term({2, 3, 4, 5}, 1);
  f.add_term({1, 3, 5, 7}, 1);
  f.add_term({1, 3, 4, 6}, -1);
  f.add_term({1, 2, 5, 6}, -1);
  f.add_term({1, 2, 4, 7}, -1);
  return f;
}

AlternatingForm spin7_form() {
  AlternatingForm f(8, 4);
  f.add_term({1, 2, 3, 4}, 1);
  f.add_term({1, 2, 5, 6}, 1);
  f.add_term({1, 2, 7, 8}, 1);
  f.add_term({1, 3, 5, 7}, 1);
  f.add_term({1, 3, 6, 8}, -1);
  f.add_term({1, 4, 5, 8}, -1);
  f.add_term({1, 4, 6, 7}, -1);
  f.add_term({5, 6, 7, 8}, 1);
  f.add_term({3, 4, 7, 8}, 1);
  f.add_term({3, 4, 5, 6}, 1);
  f.add_term({2, 4, 6, 8}, 1);
  f.add_term({2, 4, 5, 7}, -1);
  f.add_term({2, 3, 6, 7}, -1);
  f.add_term({2, 3, 5, 8}, -1);
  return f;
}

namespace detail {

const std::vector<std::pair<std::vector<int>, int>>& permutations(int k) {
  static std::mutex mutex;
  static std::map<int, std::vector<std::pair<std::vector<int>, int>>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(k);
  if (it != cache.end()) return it->second;
  std::vector<std::pair<std::vector<int>, int>> out;
  std::vector<int> p(k);
  std::iota(p.begin(), p.end(), 0);
  do {
    std::vector<int> copy = p;
    out.emplace_back(p, sort_with_sign(copy));
  } while (std::next_permutation(p.begin(), p.end()));
  return cache.emplace(k, std::move(out)).first->second;
}

}  // namespace detail

OrientedFrame::OrientedFrame(int dim, std::vector<std::vector<double>> vs) : n(dim), vectors(std::move(vs)) {
  for (const auto& v : vectors)
    if (static_cast<int>(v.size()) != n) throw DimensionMismatch("frame vector length differs from ambient dimension");
}

double OrientedFrame::gram_determinant() const {
  const int k = size();
  Eigen::MatrixXd g(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j) {
      double dot = 0;
      for (int d = 0; d < n; ++d) dot += vectors[i][d] * vectors[j][d];
      g(i, j) = g(j, i) = dot;
    }
  return k == 0 ? 1.0 : g.determinant();
}

double evaluate(const AlternatingForm& a, const OrientedFrame& frame) {
  if (frame.n != a.dimension()) throw DimensionMismatch("frame and form live in different dimensions");
  return evaluate_generic<double>(a, frame.vectors, 0.0);
}

double calibration_ratio(const AlternatingForm& a, const OrientedFrame& frame) {
  if (frame.size() != a.degree()) throw ArityMismatch("frame size differs from form degree");
  const double gram = frame.gram_determinant();
  if (!(gram >= kDegenerateGram)) throw DegenerateFrame("Gram determinant " + std::to_string(gram) + " below threshold");
  return evaluate(a, frame) / std::sqrt(gram);
}

namespace {

using Mat = Eigen::MatrixXd;

OrientedFrame to_frame(const Mat& v) {
  OrientedFrame f;
  f.n = static_cast<int>(v.rows());
  for (int j = 0; j < v.cols(); ++j) f.vectors.emplace_back(v.col(j).data(), v.col(j).data() + v.rows());
  return f;
}

// Orthonormalizes the columns keeping the orientation of their span (R has a
// positive diagonal).
Mat orthonormalize(const Mat& v) {
  Eigen::HouseholderQR<Mat> qr(v);
  Mat q = qr.householderQ() * Mat::Identity(v.rows(), v.cols());
  const Mat r = qr.matrixQR().topLeftCorner(v.cols(), v.cols());
  for (int j = 0; j < v.cols(); ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

// Euclidean gradient of V -> a(v1..vk): column i holds a(v1,..,e_d,..,vk)_d.
Mat form_gradient(const AlternatingForm& a, const Mat& v) {
  Mat g(v.rows(), v.cols());
  OrientedFrame f = to_frame(v);
  for (int i = 0; i < v.cols(); ++i) {
    const auto saved = f.vectors[i];
    for (int d = 0; d < v.rows(); ++d) {
      std::fill(f.vectors[i].begin(), f.vectors[i].end(), 0.0);
      f.vectors[i][d] = 1.0;
      g(d, i) = evaluate(a, f);
    }
    f.vectors[i] = saved;
  }
  return g;
}

double ascend(const AlternatingForm& a, Mat v, int steps) {
  double value = evaluate(a, to_frame(v));
  double eta = 0.5;
  for (int it = 0; it < steps && eta > 1e-14; ++it) {
    const Mat g = form_gradient(a, v);
    const Mat sym = 0.5 * (v.transpose() * g + g.transpose() * v);
    const Mat riem = g - v * sym;
    if (riem.norm() < 1e-13) break;
    while (eta > 1e-14) {
      Mat trial = orthonormalize(v + eta * riem);
      double tv = evaluate(a, to_frame(trial));
      if (tv > value) {
        // an accepted step can still overshoot to the far side of the maximum
        const Mat half = orthonormalize(v + 0.5 * eta * riem);
        if (const double hv = evaluate(a, to_frame(half)); hv > tv) {
          trial = half;
          tv = hv;
          eta *= 0.5;
        }
        v = trial;
        value = tv;
        eta = std::min(eta * 1.5, 2.0);
        break;
      }
      eta *= 0.5;
    }
  }
  return calibration_ratio(a, to_frame(v));
}

}  // namespace

double comass_estimate(const AlternatingForm& a, int samples, int refine_steps, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("comass_estimate needs at least one sample");
  const int n = a.dimension();
  const int k = a.degree();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;

  // Keep the best few starting frames for local ascent.
  constexpr int kStarts = 16;
  std::vector<std::pair<double, Mat>> best;
  for (int s = 0; s < samples; ++s) {
    Mat v(n, k);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < k; ++j) v(i, j) = normal(rng);
    v = orthonormalize(v);
    double val = evaluate(a, to_frame(v));
    if (val < 0) {  // reversing orientation flips the sign
      v.col(0) = -v.col(0);
      val = -val;
    }
    best.emplace_back(val, std::move(v));
    if (static_cast<int>(best.size()) > kStarts) {
      auto worst = std::min_element(best.begin(), best.end(), [](auto& x, auto& y) { return x.first < y.first; });
      best.erase(worst);
    }
  }
  double result = -std::numeric_limits<double>::infinity();
  for (auto& [val, v] : best) result = std::max(result, refine_steps > 0 ? ascend(a, v, refine_steps) : calibration_ratio(a, to_frame(v)));
  return result;
}

nlohmann::json to_json(const AlternatingForm& a) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [idx, c] : a.terms()) terms.push_back({{"indices", idx.indices()}, {"coeff", to_string(c)}});
  return {{"n", a.dimension()}, {"k", a.degree()}, {"terms", terms}};
}

AlternatingForm form_from_json(const nlohmann::json& j) {
  AlternatingForm f(j.at("n").get<int>(), j.at("k").get<int>());
  for (const auto& t : j.at("terms")) {
    MultiIndex idx(t.at("indices").get<std::vector<int>>());  // rejects unsorted input
    f.add_term(idx.indices(), parse_rational(t.at("coeff").get<std::string>()));
  }
  return f;
}

}  // namespace calib
