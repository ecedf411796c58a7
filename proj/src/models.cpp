#include "evdep/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace evdep {

namespace {

void require_positive_point(std::span<const double> y) {
  for (double v : y) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("coordinates must be strictly positive");
    }
  }
}

void append_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

LogisticModel::LogisticModel(double alpha, int m) : alpha(alpha), m(m) {
  if (!(alpha > 0.0) || alpha > 1.0 || !std::isfinite(alpha)) {
    throw std::invalid_argument("logistic dependence parameter must be in (0,1]");
  }
  if (m < 1 || m > kMaxDimension) {
    throw std::invalid_argument("dimension out of range");
  }
}

double logistic_V(const LogisticModel& model, const SubsetIndex& B,
                  std::span<const double> y_B) {
  if (B.dimension() != model.m) {
    throw std::invalid_argument("subset dimension mismatch");
  }
  if (static_cast<int>(y_B.size()) != B.size()) {
    throw std::invalid_argument("y_B must have one coordinate per element of B");
  }
  require_positive_point(y_B);
  if (y_B.size() == 1) return 1.0 / y_B[0];
  if (model.alpha == 1.0) {
    double s = 0.0;
    for (double v : y_B) s += 1.0 / v;
    return s;
  }
  double s = 0.0;
  for (double v : y_B) s += std::pow(v, -1.0 / model.alpha);
  return std::pow(s, model.alpha);
}

ExponentEvaluationSet logistic_evaluation_set(const LogisticModel& model,
                                              std::span<const double> y) {
  if (static_cast<int>(y.size()) != model.m) {
    throw std::invalid_argument("evaluation point dimension mismatch");
  }
  ExponentEvaluationSet out(std::vector<double>(y.begin(), y.end()));
  std::vector<double> proj;
  for (const SubsetIndex& B : enumerate_subsets(model.m)) {
    proj.clear();
    for (int e : B.elements()) proj.push_back(y[e - 1]);
    out.set(B, logistic_V(model, B, proj));
  }
  return out;
}

double frechet_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) {
    throw std::invalid_argument("quantile level must lie in (0,1)");
  }
  return -1.0 / std::log(p);
}

std::vector<double> simplex_point(std::span<const double> y_B) {
  require_positive_point(y_B);
  if (y_B.empty()) throw std::invalid_argument("empty coordinate set");
  double s = 0.0;
  for (double v : y_B) s += 1.0 / v;
  std::vector<double> w(y_B.size());
  for (std::size_t i = 0; i < y_B.size(); ++i) w[i] = (1.0 / y_B[i]) / s;
  return w;
}

double pickands_from_V(double v_B, std::span<const double> y_B) {
  if (!(v_B >= 0.0)) {
    throw std::invalid_argument("exponent measure value must be nonnegative");
  }
  require_positive_point(y_B);
  double s = 0.0;
  for (double v : y_B) s += 1.0 / v;
  return v_B / s;
}

BlockMaximaSample::BlockMaximaSample(int m, std::vector<double> row_major_data)
    : m_(m), data_(std::move(row_major_data)) {
  if (m_ < 1 || m_ > kMaxDimension) {
    throw std::invalid_argument("dimension out of range");
  }
  if (data_.empty() || data_.size() % m_ != 0) {
    throw std::invalid_argument("sample data size is not a multiple of m");
  }
  n_ = static_cast<int>(data_.size() / m_);
  for (double v : data_) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("sample entries must be strictly positive");
    }
  }
}

void BlockMaximaSample::write_csv(const std::string& path) const {
  std::string out = "j";
  for (int i = 1; i <= m_; ++i) out += ",y" + std::to_string(i);
  out += '\n';
  for (int j = 0; j < n_; ++j) {
    out += std::to_string(j + 1);
    for (int i = 0; i < m_; ++i) {
      out += ',';
      append_double(out, value(j, i));
    }
    out += '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
  file << out;
  if (!file) throw std::runtime_error("failed writing '" + path + "'");
}

BlockMaximaSample BlockMaximaSample::read_csv(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(file, line)) {
    throw std::runtime_error("'" + path + "': empty file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  int m = 0;
  {
    std::istringstream header(line);
    std::string col;
    if (!std::getline(header, col, ',') || col != "j") {
      throw std::runtime_error("'" + path + "': header must start with 'j'");
    }
    while (std::getline(header, col, ',')) {
      ++m;
      if (col != "y" + std::to_string(m)) {
        throw std::runtime_error("'" + path + "': bad header column '" + col +
                                 "'");
      }
    }
  }
  if (m < 1) throw std::runtime_error("'" + path + "': no value columns");
  std::vector<double> data;
  int row = 0;
  while (std::getline(file, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    std::istringstream fields(line);
    std::string tok;
    if (!std::getline(fields, tok, ',')) {
      throw std::runtime_error("'" + path + "': short row " +
                               std::to_string(row));
    }
    for (int i = 0; i < m; ++i) {
      if (!std::getline(fields, tok, ',')) {
        throw std::runtime_error("'" + path + "': short row " +
                                 std::to_string(row));
      }
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        throw std::runtime_error("'" + path + "': bad number '" + tok + "'");
      }
      if (used != tok.size()) {
        throw std::runtime_error("'" + path + "': bad number '" + tok + "'");
      }
      data.push_back(v);
    }
    if (std::getline(fields, tok, ',')) {
      throw std::runtime_error("'" + path + "': extra fields in row " +
                               std::to_string(row));
    }
  }
  if (data.empty()) throw std::runtime_error("'" + path + "': no data rows");
  return BlockMaximaSample(m, std::move(data));
}

double sample_positive_stable(double alpha, RngStream& rng) {
  if (!(alpha >= 1e-3) || !(alpha < 1.0)) {
    throw std::invalid_argument(
        "positive-stable sampler requires alpha in [1e-3, 1)");
  }
  const double u = std::numbers::pi * rng.uniform01();
  const double w = rng.exponential();
  const double log_t = (1.0 - alpha) / alpha *
                           (std::log(std::sin((1.0 - alpha) * u)) - std::log(w)) +
                       std::log(std::sin(alpha * u)) -
                       std::log(std::sin(u)) / alpha;
  return std::exp(log_t);
}

BlockMaximaSample sample_logistic(const LogisticModel& model, int n,
                                  RngStream& rng) {
  if (n < 1) throw std::invalid_argument("sample size must be at least 1");
  const int m = model.m;
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(n) * m);
  if (model.alpha == 1.0) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < m; ++i) data.push_back(1.0 / rng.exponential());
    }
    return BlockMaximaSample(m, std::move(data));
  }
  if (model.alpha < 1e-3) {
    throw std::invalid_argument("sampler range limit: alpha must be >= 1e-3");
  }
  const double alpha = model.alpha;
  for (int j = 0; j < n; ++j) {
    // Same construction as sample_positive_stable, kept in log space so the
    // heavy-tailed T never overflows before the final exp.
    const double u = std::numbers::pi * rng.uniform01();
    const double w = rng.exponential();
    const double log_t =
        (1.0 - alpha) / alpha *
            (std::log(std::sin((1.0 - alpha) * u)) - std::log(w)) +
        std::log(std::sin(alpha * u)) - std::log(std::sin(u)) / alpha;
    for (int i = 0; i < m; ++i) {
      const double e = rng.exponential();
      data.push_back(std::exp(alpha * (log_t - std::log(e))));
    }
  }
  return BlockMaximaSample(m, std::move(data));
}

BlockMaximaSample block_maxima(const BlockMaximaSample& sample,
                               int block_size) {
  if (block_size < 1 || sample.size() % block_size != 0) {
    throw std::invalid_argument(
        "block size must divide the number of observations");
  }
  const int m = sample.dim();
  const int blocks = sample.size() / block_size;
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(blocks) * m);
  for (int b = 0; b < blocks; ++b) {
    for (int i = 0; i < m; ++i) {
      double mx = 0.0;
      for (int r = 0; r < block_size; ++r) {
        mx = std::max(mx, sample.value(b * block_size + r, i));
      }
      data.push_back(mx / block_size);
    }
  }
  return BlockMaximaSample(m, std::move(data));
}

}  // namespace evdep
