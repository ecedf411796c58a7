#include "evdep/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace evdep {

namespace {

void require_dimension(int m) {
  if (m < 1 || m > kMaxDimension) {
    throw std::invalid_argument("dimension must be in [1, " +
                                std::to_string(kMaxDimension) + "], got " +
                                std::to_string(m));
  }
}

// Sign of a term with intersection S = B inter L: (-1)^(|S|+1).
inline double term_sign(std::uint32_t intersection) {
  return (std::popcount(intersection) & 1) ? 1.0 : -1.0;
}

}  // namespace

SubsetIndex::SubsetIndex(std::uint32_t bits, int m) : bits_(bits), m_(m) {
  require_dimension(m);
  if (bits == 0) throw std::invalid_argument("subset must be nonempty");
  if (bits >> m) {
    throw std::invalid_argument("subset has elements above dimension " +
                                std::to_string(m));
  }
}

int SubsetIndex::size() const { return std::popcount(bits_); }

bool SubsetIndex::contains(int element) const {
  return element >= 1 && element <= m_ && ((bits_ >> (element - 1)) & 1u);
}

bool SubsetIndex::superset_of(const SubsetIndex& other) const {
  return (bits_ & other.bits_) == other.bits_;
}

bool SubsetIndex::intersects(const SubsetIndex& other) const {
  return (bits_ & other.bits_) != 0;
}

bool SubsetIndex::is_full() const {
  return bits_ == ((1u << m_) - 1u);
}

std::uint32_t SubsetIndex::complement_bits() const {
  return ((1u << m_) - 1u) & ~bits_;
}

std::vector<int> SubsetIndex::elements() const {
  std::vector<int> out;
  out.reserve(size());
  for (int i = 1; i <= m_; ++i) {
    if (contains(i)) out.push_back(i);
  }
  return out;
}

std::string SubsetIndex::label() const {
  std::string out;
  for (int e : elements()) {
    if (!out.empty()) out += '+';
    out += std::to_string(e);
  }
  return out;
}

SubsetIndex SubsetIndex::parse_label(const std::string& text, int m) {
  require_dimension(m);
  std::uint32_t bits = 0;
  std::istringstream in(text);
  std::string token;
  while (std::getline(in, token, '+')) {
    std::size_t used = 0;
    int e = 0;
    try {
      e = std::stoi(token, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad subset label '" + text + "'");
    }
    if (used != token.size() || e < 1 || e > m) {
      throw std::invalid_argument("bad subset label '" + text + "'");
    }
    bits |= 1u << (e - 1);
  }
  if (bits == 0) throw std::invalid_argument("empty subset label");
  return SubsetIndex(bits, m);
}

std::vector<SubsetIndex> enumerate_subsets(int m) {
  require_dimension(m);
  std::vector<SubsetIndex> out;
  out.reserve((std::size_t{1} << m) - 1);
  for (std::uint32_t bits = 1; bits < (1u << m); ++bits) {
    out.emplace_back(bits, m);
  }
  return out;
}

ExponentEvaluationSet::ExponentEvaluationSet(std::vector<double> y)
    : m_(static_cast<int>(y.size())), y_(std::move(y)) {
  require_dimension(m_);
  for (double v : y_) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("evaluation point must be strictly positive");
    }
  }
  values_.assign(std::size_t{1} << m_,
                 std::numeric_limits<double>::quiet_NaN());
}

void ExponentEvaluationSet::set(const SubsetIndex& B, double value) {
  if (B.dimension() != m_) {
    throw std::invalid_argument("subset dimension mismatch");
  }
  if (!std::isfinite(value) || value < 0.0) {
    throw std::invalid_argument("exponent measure values must be nonnegative");
  }
  values_[B.bits()] = value;
}

double ExponentEvaluationSet::at(const SubsetIndex& B) const {
  if (B.dimension() != m_) {
    throw std::invalid_argument("subset dimension mismatch");
  }
  double v = values_[B.bits()];
  if (std::isnan(v)) {
    throw std::invalid_argument("evaluation set has no value for {" +
                                B.label() + "}");
  }
  return v;
}

bool ExponentEvaluationSet::complete() const {
  for (std::uint32_t bits = 1; bits < values_.size(); ++bits) {
    if (std::isnan(values_[bits])) return false;
  }
  return true;
}

double ExponentEvaluationSet::margin_sum(const SubsetIndex& B) const {
  if (B.dimension() != m_) {
    throw std::invalid_argument("subset dimension mismatch");
  }
  double s = 0.0;
  for (int e : B.elements()) s += 1.0 / y_[e - 1];
  return s;
}

double MoebiusDecomposition::at(const SubsetIndex& L) const {
  if (L.dimension() != m) {
    throw std::invalid_argument("subset dimension mismatch");
  }
  return d[L.bits()];
}

std::vector<std::pair<SubsetIndex, int>> moebius_coefficients(
    const SubsetIndex& L) {
  const int m = L.dimension();
  const std::uint32_t comp = L.complement_bits();
  std::vector<std::pair<SubsetIndex, int>> out;
  out.reserve(std::size_t{1} << L.size());
  // B ranges over comp | S for S subset of L; B must be nonempty.
  for (std::uint32_t bits = 1; bits < (1u << m); ++bits) {
    if ((bits & comp) != comp) continue;
    const std::uint32_t inter = bits & L.bits();
    out.emplace_back(SubsetIndex(bits, m),
                     (std::popcount(inter) & 1) ? +1 : -1);
  }
  return out;
}

MoebiusDecomposition decompose(const ExponentEvaluationSet& values) {
  if (!values.complete()) {
    throw std::invalid_argument("decompose requires a complete evaluation set");
  }
  const int m = values.dimension();
  MoebiusDecomposition out{m, values.point(),
                           std::vector<double>(std::size_t{1} << m, 0.0)};
  for (std::uint32_t lbits = 1; lbits < (1u << m); ++lbits) {
    const std::uint32_t comp = ((1u << m) - 1u) & ~lbits;
    double sum = 0.0;
    // Enumerate S subset of L by the standard submask walk; B = comp | S.
    std::uint32_t s = lbits;
    while (true) {
      const std::uint32_t bbits = comp | s;
      if (bbits != 0) {
        sum += term_sign(s) * values.at(SubsetIndex(bbits, m));
      }
      if (s == 0) break;
      s = (s - 1) & lbits;
    }
    out.d[lbits] = sum;
  }
  return out;
}

double reconstruct(const MoebiusDecomposition& d, const SubsetIndex& B) {
  if (B.dimension() != d.m) {
    throw std::invalid_argument("subset dimension mismatch");
  }
  if (d.d.size() != (std::size_t{1} << d.m)) {
    throw std::invalid_argument("incomplete decomposition");
  }
  double sum = 0.0;
  for (std::uint32_t lbits = 1; lbits < (1u << d.m); ++lbits) {
    if (lbits & B.bits()) sum += d.d[lbits];
  }
  return sum;
}

ConsistencyReport check_consistency(const ExponentEvaluationSet& values,
                                    double tol) {
  if (tol < 0.0) throw std::invalid_argument("tolerance must be nonnegative");
  const MoebiusDecomposition dec = decompose(values);
  ConsistencyReport report{true, std::numeric_limits<double>::infinity(), {}};
  const int m = values.dimension();
  for (std::uint32_t lbits = 1; lbits < (1u << m); ++lbits) {
    const double dl = dec.d[lbits];
    report.min_d = std::min(report.min_d, dl);
    if (dl < -tol) {
      report.consistent = false;
      report.violations.emplace_back(SubsetIndex(lbits, m), dl);
    }
  }
  std::sort(report.violations.begin(), report.violations.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  return report;
}

double ExtremalCoefficientSet::at(const SubsetIndex& B) const {
  if (B.dimension() != m) {
    throw std::invalid_argument("subset dimension mismatch");
  }
  return theta[B.bits()];
}

ExtremalCoefficientSet extremal_coefficients_from_V(
    const ExponentEvaluationSet& values) {
  const int m = values.dimension();
  for (double yi : values.point()) {
    if (std::abs(yi - 1.0) > 1e-12) {
      throw std::invalid_argument(
          "extremal coefficients are defined at the all-ones point");
    }
  }
  if (!values.complete()) {
    throw std::invalid_argument("incomplete evaluation set");
  }
  ExtremalCoefficientSet out{m, std::vector<double>(std::size_t{1} << m, 0.0)};
  for (const SubsetIndex& B : enumerate_subsets(m)) {
    const double theta = values.at(B);
    if (theta < 1.0 - 1e-9 || theta > B.size() + 1e-9) {
      throw std::invalid_argument("theta_{" + B.label() +
                                  "} outside [1,|B|]: " + std::to_string(theta));
    }
    out.theta[B.bits()] = theta;
  }
  return out;
}

ThetaBounds triple_theta_bounds(double t12, double t13, double t23) {
  for (double t : {t12, t13, t23}) {
    if (!(t >= 1.0 - 1e-9) || !(t <= 2.0 + 1e-9)) {
      throw std::invalid_argument("pairwise coefficient outside [1,2]");
    }
  }
  ThetaBounds b;
  b.lo = std::max({t12, t13, t23, t12 + t13 + t23 - 3.0});
  b.hi = std::min({t12 + t13 - 1.0, t12 + t23 - 1.0, t13 + t23 - 1.0});
  return b;
}

}  // namespace evdep
