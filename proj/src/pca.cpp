#include "rgbd/pca.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace rgbd {

namespace {

// Cyclic Jacobi eigensolver for a symmetric matrix (row-major, size m).
// Deterministic sweep order; returns eigenvalues descending with the
// eigenvectors as rows of `vecs`.
void jacobi_eigen(std::vector<double> a, size_t m, std::vector<double>* values,
                  std::vector<double>* vecs) {
  std::vector<double> v(m * m, 0.0);
  for (size_t i = 0; i < m; ++i) v[i * m + i] = 1.0;

  auto off_norm = [&]() {
    double s = 0;
    for (size_t i = 0; i < m; ++i)
      for (size_t j = i + 1; j < m; ++j) s += a[i * m + j] * a[i * m + j];
    return s;
  };
  double frob = 0;
  for (double x : a) frob += x * x;
  const double tol = std::max(1e-300, 1e-24 * frob);

  for (int sweep = 0; sweep < 100 && off_norm() > tol; ++sweep) {
    for (size_t p = 0; p < m; ++p) {
      for (size_t q = p + 1; q < m; ++q) {
        double apq = a[p * m + q];
        if (apq == 0.0) continue;
        double app = a[p * m + p], aqq = a[q * m + q];
        double tau = (aqq - app) / (2.0 * apq);
        double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;
        for (size_t i = 0; i < m; ++i) {
          double aip = a[i * m + p], aiq = a[i * m + q];
          a[i * m + p] = c * aip - s * aiq;
          a[i * m + q] = s * aip + c * aiq;
        }
        for (size_t i = 0; i < m; ++i) {
          double api = a[p * m + i], aqi = a[q * m + i];
          a[p * m + i] = c * api - s * aqi;
          a[q * m + i] = s * api + c * aqi;
        }
        for (size_t i = 0; i < m; ++i) {
          double vip = v[i * m + p], viq = v[i * m + q];
          v[i * m + p] = c * vip - s * viq;
          v[i * m + q] = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<size_t> order(m);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t x, size_t y) { return a[x * m + x] > a[y * m + y]; });
  values->resize(m);
  vecs->assign(m * m, 0.0);
  for (size_t r = 0; r < m; ++r) {
    (*values)[r] = a[order[r] * m + order[r]];
    for (size_t i = 0; i < m; ++i) (*vecs)[r * m + i] = v[i * m + order[r]];
  }
}

void apply_sign_convention(double* row, size_t d) {
  size_t arg = 0;
  for (size_t i = 1; i < d; ++i)
    if (std::abs(row[i]) > std::abs(row[arg])) arg = i;
  if (row[arg] < 0)
    for (size_t i = 0; i < d; ++i) row[i] = -row[i];
}

}  // namespace

PcaModel fit_pca(const std::vector<double>& features, size_t n, size_t d, size_t k,
                 size_t gram_threshold) {
  if (features.size() != n * d) throw std::invalid_argument("fit_pca: feature matrix size mismatch");
  if (n < 2) throw std::invalid_argument("fit_pca: need at least two observations");
  if (k < 1 || k > std::min(n - 1, d))
    throw std::invalid_argument("fit_pca: k out of range (1 <= k <= min(n-1, d))");
  for (double x : features)
    if (!std::isfinite(x)) throw DataError("fit_pca: non-finite feature value");

  PcaModel model;
  model.d = d;
  model.k = k;
  model.mean.assign(d, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) model.mean[j] += features[i * d + j];
  for (size_t j = 0; j < d; ++j) model.mean[j] /= static_cast<double>(n);

  std::vector<double> centered(n * d);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) centered[i * d + j] = features[i * d + j] - model.mean[j];

  const double denom = static_cast<double>(n - 1);
  double total_variance = 0;
  for (double x : centered) total_variance += x * x;
  total_variance /= denom;

  std::vector<double> values, vecs;
  if (d <= gram_threshold) {
    // covariance route
    std::vector<double> cov(d * d, 0.0);
    for (size_t i = 0; i < n; ++i)
      for (size_t a = 0; a < d; ++a) {
        double ca = centered[i * d + a];
        if (ca == 0.0) continue;
        for (size_t b = a; b < d; ++b) cov[a * d + b] += ca * centered[i * d + b];
      }
    for (size_t a = 0; a < d; ++a)
      for (size_t b = 0; b < a; ++b) cov[a * d + b] = cov[b * d + a];
    for (double& x : cov) x /= denom;
    jacobi_eigen(std::move(cov), d, &values, &vecs);
    model.basis.assign(k * d, 0.0);
    for (size_t r = 0; r < k; ++r) {
      std::copy(vecs.begin() + r * d, vecs.begin() + (r + 1) * d, model.basis.begin() + r * d);
      apply_sign_convention(&model.basis[r * d], d);
    }
  } else {
    // Gram route: eigenvectors of X X^T / (n-1) map to covariance
    // eigenvectors via X^T u.
    std::vector<double> gram(n * n, 0.0);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = i; j < n; ++j) {
        double s = 0;
        for (size_t a = 0; a < d; ++a) s += centered[i * d + a] * centered[j * d + a];
        gram[i * n + j] = s / denom;
        gram[j * n + i] = gram[i * n + j];
      }
    jacobi_eigen(std::move(gram), n, &values, &vecs);
    model.basis.assign(k * d, 0.0);
    for (size_t r = 0; r < k; ++r) {
      for (size_t a = 0; a < d; ++a) {
        double s = 0;
        for (size_t i = 0; i < n; ++i) s += centered[i * d + a] * vecs[r * n + i];
        model.basis[r * d + a] = s;
      }
      double nn = 0;
      for (size_t a = 0; a < d; ++a) nn += model.basis[r * d + a] * model.basis[r * d + a];
      nn = std::sqrt(nn);
      if (nn < 1e-300) throw NumericError("fit_pca: rank-deficient direction in Gram route");
      for (size_t a = 0; a < d; ++a) model.basis[r * d + a] /= nn;
      apply_sign_convention(&model.basis[r * d], d);
    }
  }

  model.variance_fraction.resize(k);
  double cumulative = 0;
  for (size_t r = 0; r < k; ++r) {
    model.variance_fraction[r] =
        total_variance > 0 ? std::max(0.0, values[r]) / total_variance : 0.0;
    if (r + 1 < k && !model.rank_deficient) {
      cumulative += model.variance_fraction[r];
      if (cumulative >= 1.0 - 1e-9) model.rank_deficient = true;
    }
  }
  return model;
}

std::vector<double> pca_project(const PcaModel& model, const std::vector<double>& features,
                                size_t n) {
  if (features.size() != n * model.d)
    throw std::invalid_argument("pca_project: feature dimension does not match the model");
  std::vector<double> out(n * model.k, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t r = 0; r < model.k; ++r) {
      double s = 0;
      const double* row = model.row(r);
      for (size_t j = 0; j < model.d; ++j) s += (features[i * model.d + j] - model.mean[j]) * row[j];
      out[i * model.k + r] = s;
    }
  }
  return out;
}

void save_pca(const PcaModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw DataError(path + ": cannot open for writing");
  nlohmann::json j{{"d", model.d}, {"k", model.k}, {"variance_fraction", model.variance_fraction}};
  std::string header = j.dump();
  uint32_t len = static_cast<uint32_t>(header.size());
  out.write("PCAM", 4);
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(header.data(), len);
  out.write(reinterpret_cast<const char*>(model.mean.data()),
            static_cast<std::streamsize>(model.mean.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(model.basis.data()),
            static_cast<std::streamsize>(model.basis.size() * sizeof(double)));
  if (!out.good()) throw DataError(path + ": write failed");
}

PcaModel load_pca(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw DataError(path + ": cannot open");
  char magic[4];
  in.read(magic, 4);
  if (!in.good() || std::memcmp(magic, "PCAM", 4) != 0) throw DataError(path + ": bad magic");
  uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 4);
  if (!in.good() || len == 0 || len > (1u << 20)) throw DataError(path + ": bad header length");
  std::string header(len, '\0');
  in.read(header.data(), len);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception&) {
    throw DataError(path + ": invalid header JSON");
  }
  PcaModel model;
  model.d = j.at("d").get<size_t>();
  model.k = j.at("k").get<size_t>();
  model.variance_fraction = j.at("variance_fraction").get<std::vector<double>>();
  model.mean.resize(model.d);
  model.basis.resize(model.k * model.d);
  in.read(reinterpret_cast<char*>(model.mean.data()),
          static_cast<std::streamsize>(model.mean.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(model.basis.data()),
          static_cast<std::streamsize>(model.basis.size() * sizeof(double)));
  if (!in.good()) throw DataError(path + ": truncated payload");
  return model;
}

}  // namespace rgbd
