#include "rgbd/svm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"

namespace rgbd {

namespace {

double primal_objective(const std::vector<double>& w, const std::vector<double>& features,
                        size_t n, size_t d, const std::vector<int>& labels, double C, double B,
                        double w1) {
  double reg = 0;
  for (double v : w) reg += v * v;
  double hinge = 0;
  for (size_t i = 0; i < n; ++i) {
    double margin = w[d] * B;
    for (size_t j = 0; j < d; ++j) margin += w[j] * features[i * d + j];
    double slack = 1.0 - labels[i] * margin;
    if (slack > 0) hinge += (labels[i] > 0 ? w1 : 1.0) * slack;
  }
  return 0.5 * reg + C * hinge;
}

}  // namespace

SvmModel train_svm(const std::vector<double>& features, size_t n, size_t d,
                   const std::vector<int>& labels, const SvmConfig& config) {
  if (features.size() != n * d) throw std::invalid_argument("train_svm: feature matrix size mismatch");
  if (labels.size() != n) throw std::invalid_argument("train_svm: label count mismatch");
  if (!(config.C > 0) || config.B < 0 || !(config.w1 > 0))
    throw std::invalid_argument("train_svm: invalid hyper-parameters");
  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    if (y == 1)
      has_pos = true;
    else if (y == -1)
      has_neg = true;
    else
      throw std::invalid_argument("train_svm: labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw DataError("train_svm: both classes must be present");
  for (double v : features)
    if (!std::isfinite(v)) throw DataError("train_svm: non-finite feature value");

  // Dual coordinate descent, L1 hinge: 0 <= alpha_i <= C * c_i,
  // Q_ii = ||x~_i||^2; one alpha is updated at a time against the
  // maintained w = sum alpha_i y_i x~_i.
  const size_t dim = d + 1;  // appended bias feature
  std::vector<double> w(dim, 0.0);
  std::vector<double> alpha(n, 0.0);
  std::vector<double> qd(n);
  std::vector<double> upper(n);
  for (size_t i = 0; i < n; ++i) {
    double q = config.B * config.B;
    for (size_t j = 0; j < d; ++j) q += features[i * d + j] * features[i * d + j];
    qd[i] = q;
    upper[i] = config.C * (labels[i] > 0 ? config.w1 : 1.0);
  }

  SvmModel model;
  model.B = config.B;
  model.C = config.C;
  model.w1 = config.w1;
  std::mt19937_64 rng(config.seed);
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});

  int pass = 0;
  for (; pass < config.max_passes; ++pass) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t s = 0; s < n; ++s) {
      size_t i = order[s];
      if (qd[i] <= 0) continue;  // zero feature vector with B = 0
      const double yi = labels[i];
      double margin = w[d] * config.B;
      for (size_t j = 0; j < d; ++j) margin += w[j] * features[i * d + j];
      double g = yi * margin - 1.0;

      double pg = g;
      if (alpha[i] <= 0.0 && g >= 0) pg = 0;
      if (alpha[i] >= upper[i] && g <= 0) pg = 0;
      if (pg == 0) continue;

      double old = alpha[i];
      alpha[i] = std::clamp(old - g / qd[i], 0.0, upper[i]);
      double delta = (alpha[i] - old) * yi;
      if (delta != 0.0) {
        for (size_t j = 0; j < d; ++j) w[j] += delta * features[i * d + j];
        w[d] += delta * config.B;
      }
    }

    // Dual objective 0.5||w||^2 - sum alpha (to minimize); primal-dual gap
    // against the primal decides convergence.
    double wn = 0;
    for (double v : w) wn += v * v;
    double asum = 0;
    for (double a : alpha) asum += a;
    double dual_min = 0.5 * wn - asum;
    model.dual_trace.push_back(dual_min);

    double primal = primal_objective(w, features, n, d, labels, config.C, config.B, config.w1);
    double gap = primal - (-dual_min);  // P(w) - D(alpha) >= 0 at optimum pair
    if (gap <= config.tol * std::max(1.0, std::abs(primal))) {
      ++pass;
      break;
    }
  }

  model.w.assign(w.begin(), w.begin() + d);
  model.bias_w = w[d];
  model.passes = pass;
  model.objective = primal_objective(w, features, n, d, labels, config.C, config.B, config.w1);
  return model;
}

double svm_score(const SvmModel& model, const std::vector<double>& x) {
  if (x.size() != model.w.size())
    throw std::invalid_argument("svm_score: feature dimension does not match the model");
  double s = model.bias_w * model.B;
  for (size_t j = 0; j < x.size(); ++j) s += model.w[j] * x[j];
  return s;
}

double svm_primal_objective(const SvmModel& model, const std::vector<double>& features, size_t n,
                            const std::vector<int>& labels, const SvmConfig& config) {
  std::vector<double> w = model.w;
  w.push_back(model.bias_w);
  return primal_objective(w, features, n, model.w.size(), labels, config.C, config.B, config.w1);
}

std::vector<SvmModel> train_one_vs_rest(const std::vector<double>& features, size_t n, size_t d,
                                        const std::vector<int>& class_labels, int n_classes,
                                        const SvmConfig& config) {
  std::vector<SvmModel> models;
  for (int c = 0; c < n_classes; ++c) {
    std::vector<int> binary(n);
    for (size_t i = 0; i < n; ++i) binary[i] = class_labels[i] == c ? 1 : -1;
    models.push_back(train_svm(features, n, d, binary, config));
  }
  return models;
}

void save_svm(const SvmModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw DataError(path + ": cannot open for writing");
  nlohmann::json j{{"d", model.w.size()}, {"C", model.C}, {"B", model.B}, {"w1", model.w1}};
  std::string header = j.dump();
  uint32_t len = static_cast<uint32_t>(header.size());
  out.write("SVMW", 4);
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(header.data(), len);
  out.write(reinterpret_cast<const char*>(model.w.data()),
            static_cast<std::streamsize>(model.w.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(&model.bias_w), sizeof(double));
  if (!out.good()) throw DataError(path + ": write failed");
}

SvmModel load_svm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw DataError(path + ": cannot open");
  char magic[4];
  in.read(magic, 4);
  if (!in.good() || std::memcmp(magic, "SVMW", 4) != 0) throw DataError(path + ": bad magic");
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
  SvmModel model;
  size_t d = j.at("d").get<size_t>();
  model.B = j.at("B").get<double>();
  model.C = j.value("C", model.C);
  model.w1 = j.value("w1", model.w1);
  model.w.resize(d);
  in.read(reinterpret_cast<char*>(model.w.data()),
          static_cast<std::streamsize>(d * sizeof(double)));
  in.read(reinterpret_cast<char*>(&model.bias_w), sizeof(double));
  if (!in.good()) throw DataError(path + ": truncated payload");
  return model;
}

}  // namespace rgbd
