#include "rgbd/fusionnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"

namespace rgbd {

std::string to_string(FusionPoint f) {
  switch (f) {
    case FusionPoint::Input: return "input";
    case FusionPoint::Pool2: return "pool2";
    case FusionPoint::Fc1: return "fc1";
    case FusionPoint::Fc2: return "fc2";
    case FusionPoint::Final: return "final";
  }
  return "?";
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::ConvPool: return "conv+pool";
    case Ablation::Conv: return "conv";
    case Ablation::ConvRelu: return "conv+relu";
  }
  return "?";
}

FusionPoint fusion_point_from_string(const std::string& s) {
  if (s == "input") return FusionPoint::Input;
  if (s == "pool2") return FusionPoint::Pool2;
  if (s == "fc1") return FusionPoint::Fc1;
  if (s == "fc2") return FusionPoint::Fc2;
  if (s == "final") return FusionPoint::Final;
  throw DataError("unknown fusion point: " + s);
}

Ablation ablation_from_string(const std::string& s) {
  if (s == "full") return Ablation::Full;
  if (s == "conv+pool") return Ablation::ConvPool;
  if (s == "conv") return Ablation::Conv;
  if (s == "conv+relu") return Ablation::ConvRelu;
  throw DataError("unknown ablation: " + s);
}

std::string NetworkConfig::to_json() const {
  nlohmann::json j;
  j["stream_names"] = stream_names;
  j["in_channels"] = in_channels;
  j["patch"] = patch;
  j["classes"] = classes;
  j["conv_channels"] = conv_channels;
  j["fc1_width"] = fc1_width;
  j["kernel"] = kernel;
  j["fusion"] = to_string(fusion);
  j["ablation"] = to_string(ablation);
  j["warm_start"] = warm_start;
  j["seed"] = seed;
  return j.dump();
}

NetworkConfig NetworkConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("network config: invalid JSON (") + e.what() + ")");
  }
  NetworkConfig c;
  c.stream_names = j.value("stream_names", c.stream_names);
  c.in_channels = j.value("in_channels", c.in_channels);
  c.patch = j.value("patch", c.patch);
  c.classes = j.value("classes", c.classes);
  c.conv_channels = j.value("conv_channels", c.conv_channels);
  c.fc1_width = j.value("fc1_width", c.fc1_width);
  c.kernel = j.value("kernel", c.kernel);
  c.fusion = fusion_point_from_string(j.value("fusion", to_string(c.fusion)));
  c.ablation = ablation_from_string(j.value("ablation", to_string(c.ablation)));
  c.warm_start = j.value("warm_start", c.warm_start);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

// Structural description of the single-stream layer sequence; concrete
// shapes are derived when a stack is built for a given input.
struct LayerSpecItem {
  LayerKind kind;
  std::string name;
  int out = 0;  // conv: out channels; fc: out width
};

std::vector<LayerSpecItem> arch_spec(const NetworkConfig& c) {
  const bool with_relu = c.ablation == Ablation::Full || c.ablation == Ablation::ConvRelu;
  const bool with_pool = c.ablation == Ablation::Full || c.ablation == Ablation::ConvPool;
  std::vector<LayerSpecItem> items;
  for (size_t i = 0; i < c.conv_channels.size(); ++i) {
    std::string n = std::to_string(i + 1);
    items.push_back({LayerKind::Conv, "conv" + n, c.conv_channels[i]});
    if (with_relu) items.push_back({LayerKind::ReLU, "relu" + n, 0});
    if (with_pool) items.push_back({LayerKind::MaxPool, "pool" + n, 0});
  }
  items.push_back({LayerKind::Flatten, "flatten", 0});
  items.push_back({LayerKind::FC, "fc1", c.fc1_width});
  if (with_relu) items.push_back({LayerKind::ReLU, "fc1_relu", 0});
  items.push_back({LayerKind::FC, "fc2", c.classes});
  return items;
}

// Index of the first layer that processes fused activations.
size_t split_index(const std::vector<LayerSpecItem>& items, FusionPoint fusion) {
  auto find_name = [&](const std::string& n) {
    for (size_t i = 0; i < items.size(); ++i)
      if (items[i].name == n) return i;
    throw std::logic_error("layer not in architecture: " + n);
  };
  switch (fusion) {
    case FusionPoint::Input:
      return 0;
    case FusionPoint::Pool2: {
      size_t last_pool = items.size();
      for (size_t i = 0; i < items.size(); ++i)
        if (items[i].kind == LayerKind::MaxPool) last_pool = i;
      return last_pool < items.size() ? last_pool : find_name("flatten");
    }
    case FusionPoint::Fc1:
      return find_name("fc1");
    case FusionPoint::Fc2:
    case FusionPoint::Final:
      return find_name("fc2");
  }
  return 0;
}

Layer make_layer(const LayerSpecItem& item, int in_c, int in_h, int in_w, int kernel,
                 std::mt19937_64& rng) {
  Layer l;
  l.kind = item.kind;
  l.name = item.name;
  l.in_c = in_c;
  l.in_h = in_h;
  l.in_w = in_w;
  switch (item.kind) {
    case LayerKind::Conv: {
      l.kernel = kernel;
      l.out_c = item.out;
      l.out_h = in_h - kernel + 1;
      l.out_w = in_w - kernel + 1;
      if (l.out_h < 1 || l.out_w < 1)
        throw std::invalid_argument("network config: conv output collapses (patch too small)");
      l.w.resize(static_cast<size_t>(l.out_c) * in_c * kernel * kernel);
      l.b.assign(static_cast<size_t>(l.out_c), 0.0);
      double limit = std::sqrt(6.0 / (static_cast<double>(in_c) * kernel * kernel));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (double& w : l.w) w = u(rng);
      break;
    }
    case LayerKind::ReLU:
      l.out_c = in_c;
      l.out_h = in_h;
      l.out_w = in_w;
      break;
    case LayerKind::MaxPool:
      l.out_c = in_c;
      l.out_h = in_h / 2;
      l.out_w = in_w / 2;
      if (l.out_h < 1 || l.out_w < 1)
        throw std::invalid_argument("network config: pool output collapses (patch too small)");
      break;
    case LayerKind::Flatten:
      l.out_c = in_c * in_h * in_w;
      l.out_h = 1;
      l.out_w = 1;
      break;
    case LayerKind::FC: {
      if (in_h != 1 || in_w != 1) throw std::logic_error("fc layer on spatial input");
      l.out_c = item.out;
      l.out_h = 1;
      l.out_w = 1;
      l.w.resize(static_cast<size_t>(l.out_c) * in_c);
      l.b.assign(static_cast<size_t>(l.out_c), 0.0);
      double limit = std::sqrt(6.0 / static_cast<double>(in_c));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (double& w : l.w) w = u(rng);
      break;
    }
  }
  return l;
}

LayerStack build_stack(const std::vector<LayerSpecItem>& items, size_t begin, size_t end, int in_c,
                       int in_h, int in_w, int kernel, std::mt19937_64& rng) {
  LayerStack stack;
  int c = in_c, h = in_h, w = in_w;
  for (size_t i = begin; i < end; ++i) {
    Layer l = make_layer(items[i], c, h, w, kernel, rng);
    c = l.out_c;
    h = l.out_h;
    w = l.out_w;
    stack.layers.push_back(std::move(l));
  }
  return stack;
}

uint64_t stream_seed(const NetworkConfig& c, const std::string& name) {
  return hash_mix(c.seed, fnv1a64(name));
}

// ---- layer math ---------------------------------------------------------

Tensor conv_forward(const Layer& l, const Tensor& x) {
  Tensor y(l.out_c, l.out_h, l.out_w);
  const int k = l.kernel;
  for (int oc = 0; oc < l.out_c; ++oc) {
    for (int oy = 0; oy < l.out_h; ++oy) {
      double* yrow = &y.v[(static_cast<size_t>(oc) * l.out_h + oy) * l.out_w];
      for (int ox = 0; ox < l.out_w; ++ox) yrow[ox] = l.b[oc];
      for (int ic = 0; ic < l.in_c; ++ic) {
        for (int ky = 0; ky < k; ++ky) {
          const double* xrow = &x.v[(static_cast<size_t>(ic) * l.in_h + oy + ky) * l.in_w];
          const double* wrow = &l.w[((static_cast<size_t>(oc) * l.in_c + ic) * k + ky) * k];
          for (int ox = 0; ox < l.out_w; ++ox) {
            double s = 0;
            for (int kx = 0; kx < k; ++kx) s += wrow[kx] * xrow[ox + kx];
            yrow[ox] += s;
          }
        }
      }
    }
  }
  return y;
}

void conv_backward(const Layer& l, const Tensor& x, const Tensor& dy, Tensor* dx,
                   std::vector<double>* dw, std::vector<double>* db) {
  const int k = l.kernel;
  for (int oc = 0; oc < l.out_c; ++oc) {
    for (int oy = 0; oy < l.out_h; ++oy) {
      const double* grow = &dy.v[(static_cast<size_t>(oc) * l.out_h + oy) * l.out_w];
      for (int ox = 0; ox < l.out_w; ++ox) (*db)[oc] += grow[ox];
      for (int ic = 0; ic < l.in_c; ++ic) {
        for (int ky = 0; ky < k; ++ky) {
          const double* xrow = &x.v[(static_cast<size_t>(ic) * l.in_h + oy + ky) * l.in_w];
          double* dxrow = &dx->v[(static_cast<size_t>(ic) * l.in_h + oy + ky) * l.in_w];
          double* dwrow = &(*dw)[((static_cast<size_t>(oc) * l.in_c + ic) * k + ky) * k];
          const double* wrow = &l.w[((static_cast<size_t>(oc) * l.in_c + ic) * k + ky) * k];
          for (int kx = 0; kx < k; ++kx) {
            double acc = 0;
            const double g_w = wrow[kx];
            double* dxp = dxrow + kx;
            const double* xp = xrow + kx;
            for (int ox = 0; ox < l.out_w; ++ox) {
              acc += grow[ox] * xp[ox];
              dxp[ox] += grow[ox] * g_w;
            }
            dwrow[kx] += acc;
          }
        }
      }
    }
  }
}

Tensor fc_forward(const Layer& l, const Tensor& x) {
  Tensor y(l.out_c, 1, 1);
  for (int o = 0; o < l.out_c; ++o) {
    double s = l.b[o];
    const double* wrow = &l.w[static_cast<size_t>(o) * l.in_c];
    for (int i = 0; i < l.in_c; ++i) s += wrow[i] * x.v[i];
    y.v[o] = s;
  }
  return y;
}

void fc_backward(const Layer& l, const Tensor& x, const Tensor& dy, Tensor* dx,
                 std::vector<double>* dw, std::vector<double>* db) {
  for (int o = 0; o < l.out_c; ++o) {
    const double g = dy.v[o];
    (*db)[o] += g;
    double* dwrow = &(*dw)[static_cast<size_t>(o) * l.in_c];
    const double* wrow = &l.w[static_cast<size_t>(o) * l.in_c];
    for (int i = 0; i < l.in_c; ++i) {
      dwrow[i] += g * x.v[i];
      dx->v[i] += g * wrow[i];
    }
  }
}

Tensor maxpool_forward(const Layer& l, const Tensor& x) {
  Tensor y(l.out_c, l.out_h, l.out_w);
  for (int c = 0; c < l.out_c; ++c)
    for (int oy = 0; oy < l.out_h; ++oy)
      for (int ox = 0; ox < l.out_w; ++ox) {
        double m = x.at(c, 2 * oy, 2 * ox);
        m = std::max(m, x.at(c, 2 * oy, 2 * ox + 1));
        m = std::max(m, x.at(c, 2 * oy + 1, 2 * ox));
        m = std::max(m, x.at(c, 2 * oy + 1, 2 * ox + 1));
        y.at(c, oy, ox) = m;
      }
  return y;
}

void maxpool_backward(const Layer& l, const Tensor& x, const Tensor& dy, Tensor* dx) {
  for (int c = 0; c < l.out_c; ++c)
    for (int oy = 0; oy < l.out_h; ++oy)
      for (int ox = 0; ox < l.out_w; ++ox) {
        // first maximum in scan order receives the gradient
        int by = 2 * oy, bx = 2 * ox;
        double m = x.at(c, by, bx);
        for (int dy2 = 0; dy2 < 2; ++dy2)
          for (int dx2 = 0; dx2 < 2; ++dx2) {
            double v = x.at(c, 2 * oy + dy2, 2 * ox + dx2);
            if (v > m) {
              m = v;
              by = 2 * oy + dy2;
              bx = 2 * ox + dx2;
            }
          }
        dx->at(c, by, bx) += dy.at(c, oy, ox);
      }
}

Tensor stack_layer_forward(const Layer& l, const Tensor& x) {
  switch (l.kind) {
    case LayerKind::Conv:
      return conv_forward(l, x);
    case LayerKind::FC:
      return fc_forward(l, x);
    case LayerKind::MaxPool:
      return maxpool_forward(l, x);
    case LayerKind::Flatten: {
      Tensor y(l.out_c, 1, 1);
      y.v = x.v;  // channel-major layout already flat
      return y;
    }
    case LayerKind::ReLU: {
      Tensor y = x;
      for (double& v : y.v) v = std::max(0.0, v);
      return y;
    }
  }
  return x;
}

// Runs a stack keeping each layer's input; acts[i] is the input of layer i,
// acts.back() is the stack output.
std::vector<Tensor> stack_forward_cached(const LayerStack& stack, const Tensor& in) {
  std::vector<Tensor> acts;
  acts.reserve(stack.layers.size() + 1);
  acts.push_back(in);
  for (const Layer& l : stack.layers) acts.push_back(stack_layer_forward(l, acts.back()));
  return acts;
}

Tensor stack_forward(const LayerStack& stack, Tensor in) {
  for (const Layer& l : stack.layers) in = stack_layer_forward(l, in);
  return in;
}

Tensor stack_backward(const LayerStack& stack, const std::vector<Tensor>& acts, Tensor dy,
                      StackGrads* grads) {
  for (size_t li = stack.layers.size(); li-- > 0;) {
    const Layer& l = stack.layers[li];
    const Tensor& x = acts[li];
    Tensor dx(l.in_c, l.in_h, l.in_w);
    switch (l.kind) {
      case LayerKind::Conv:
        conv_backward(l, x, dy, &dx, &grads->dw[li], &grads->db[li]);
        break;
      case LayerKind::FC:
        fc_backward(l, x, dy, &dx, &grads->dw[li], &grads->db[li]);
        break;
      case LayerKind::MaxPool:
        maxpool_backward(l, x, dy, &dx);
        break;
      case LayerKind::Flatten:
        dx.v = dy.v;
        break;
      case LayerKind::ReLU:
        dx.v = dy.v;
        for (size_t i = 0; i < dx.v.size(); ++i)
          if (x.v[i] <= 0.0) dx.v[i] = 0.0;
        break;
    }
    dy = std::move(dx);
  }
  return dy;
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  int c = 0;
  for (const Tensor& t : parts) c += t.c;
  Tensor out(c, parts[0].h, parts[0].w);
  size_t off = 0;
  for (const Tensor& t : parts) {
    if (t.h != parts[0].h || t.w != parts[0].w)
      throw std::logic_error("concat: stream shapes differ");
    std::copy(t.v.begin(), t.v.end(), out.v.begin() + off);
    off += t.v.size();
  }
  return out;
}

std::vector<Tensor> split_channels(const Tensor& whole, const std::vector<Tensor>& like) {
  std::vector<Tensor> parts;
  size_t off = 0;
  for (const Tensor& t : like) {
    Tensor p(t.c, t.h, t.w);
    std::copy(whole.v.begin() + off, whole.v.begin() + off + p.v.size(), p.v.begin());
    off += p.v.size();
    parts.push_back(std::move(p));
  }
  return parts;
}

double softmax_xent(const std::vector<double>& logits, int label, std::vector<double>* dlogits) {
  double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0;
  for (double l : logits) sum += std::exp(l - m);
  double loss = -(logits[label] - m - std::log(sum));
  if (dlogits) {
    dlogits->resize(logits.size());
    for (size_t i = 0; i < logits.size(); ++i)
      (*dlogits)[i] = std::exp(logits[i] - m) / sum - (static_cast<int>(i) == label ? 1.0 : 0.0);
  }
  return loss;
}

StackGrads zero_grads(const LayerStack& stack) {
  StackGrads g;
  g.dw.resize(stack.layers.size());
  g.db.resize(stack.layers.size());
  for (size_t i = 0; i < stack.layers.size(); ++i) {
    g.dw[i].assign(stack.layers[i].w.size(), 0.0);
    g.db[i].assign(stack.layers[i].b.size(), 0.0);
  }
  return g;
}

void check_sample(const Network& net, const Sample& sample) {
  const NetworkConfig& c = net.config;
  if (static_cast<int>(sample.size()) != c.streams())
    throw std::invalid_argument("forward: sample stream count does not match the network");
  for (const Tensor& t : sample)
    if (t.c != c.in_channels || t.h != c.patch || t.w != c.patch)
      throw std::invalid_argument("forward: sample tensor shape does not match the network");
}

}  // namespace

Network build_network(const NetworkConfig& config) {
  if (config.stream_names.empty()) throw std::invalid_argument("network config: no streams");
  if (config.conv_channels.empty()) throw std::invalid_argument("network config: no conv layers");
  const auto items = arch_spec(config);
  const size_t split = split_index(items, config.fusion);

  Network net;
  net.config = config;

  int branch_out_c = config.in_channels, branch_out_h = config.patch, branch_out_w = config.patch;
  for (const std::string& name : config.stream_names) {
    std::mt19937_64 rng(stream_seed(config, name));
    LayerStack b = build_stack(items, 0, split, config.in_channels, config.patch, config.patch,
                               config.kernel, rng);
    if (!b.layers.empty()) {
      branch_out_c = b.layers.back().out_c;
      branch_out_h = b.layers.back().out_h;
      branch_out_w = b.layers.back().out_w;
    }
    net.branches.push_back(std::move(b));
  }

  if (config.fusion == FusionPoint::Final) {
    for (const std::string& name : config.stream_names) {
      std::mt19937_64 rng(hash_mix(stream_seed(config, name), fnv1a64("head")));
      net.heads.push_back(build_stack(items, split, items.size(), branch_out_c, branch_out_h,
                                      branch_out_w, config.kernel, rng));
    }
  } else {
    std::mt19937_64 rng(hash_mix(config.seed, fnv1a64("trunk")));
    net.trunk = build_stack(items, split, items.size(), branch_out_c * config.streams(),
                            branch_out_h, branch_out_w, config.kernel, rng);
  }
  return net;
}

size_t parameter_count(const Network& net) {
  return trunk_parameter_count(net) + branch_parameter_count(net);
}

size_t trunk_parameter_count(const Network& net) {
  size_t n = 0;
  for (const Layer& l : net.trunk.layers) n += l.parameter_count();
  return n;
}

size_t branch_parameter_count(const Network& net) {
  size_t n = 0;
  for (const LayerStack& s : net.branches)
    for (const Layer& l : s.layers) n += l.parameter_count();
  for (const LayerStack& s : net.heads)
    for (const Layer& l : s.layers) n += l.parameter_count();
  return n;
}

std::vector<double> forward(const Network& net, const Sample& sample) {
  check_sample(net, sample);
  if (net.config.fusion == FusionPoint::Final) return extract_features(net, "fc1", sample);
  std::vector<Tensor> outs;
  outs.reserve(net.branches.size());
  for (size_t s = 0; s < net.branches.size(); ++s)
    outs.push_back(stack_forward(net.branches[s], sample[s]));
  Tensor logits = stack_forward(net.trunk, concat_channels(outs));
  return logits.v;
}

namespace {

// Logits used for accuracy reporting; Final fusion sums per-stream heads.
std::vector<double> eval_logits(const Network& net, const Sample& sample) {
  if (net.config.fusion != FusionPoint::Final) return forward(net, sample);
  std::vector<double> sum(net.config.classes, 0.0);
  for (size_t s = 0; s < net.branches.size(); ++s) {
    Tensor f = stack_forward(net.branches[s], sample[s]);
    Tensor logits = stack_forward(net.heads[s], f);
    for (int i = 0; i < net.config.classes; ++i) sum[i] += logits.v[i];
  }
  return sum;
}

double batch_loss_impl(const Network& net, const std::vector<Sample>& batch,
                       const std::vector<int>& labels, NetworkGradients* grads) {
  if (batch.size() != labels.size())
    throw std::invalid_argument("loss: batch and label sizes differ");
  if (grads) {
    grads->branches.clear();
    grads->heads.clear();
    for (const LayerStack& s : net.branches) grads->branches.push_back(zero_grads(s));
    grads->trunk = zero_grads(net.trunk);
    for (const LayerStack& s : net.heads) grads->heads.push_back(zero_grads(s));
  }

  double total = 0;
  for (size_t bi = 0; bi < batch.size(); ++bi) {
    const Sample& sample = batch[bi];
    check_sample(net, sample);
    const int label = labels[bi];
    if (label < 0 || label >= net.config.classes)
      throw std::invalid_argument("loss: label out of range");

    if (net.config.fusion == FusionPoint::Final) {
      for (size_t s = 0; s < net.branches.size(); ++s) {
        auto bacts = stack_forward_cached(net.branches[s], sample[s]);
        auto hacts = stack_forward_cached(net.heads[s], bacts.back());
        std::vector<double> dlogits;
        total += softmax_xent(hacts.back().v, label, grads ? &dlogits : nullptr);
        if (grads) {
          Tensor dy(net.config.classes, 1, 1);
          dy.v = dlogits;
          Tensor dfeat = stack_backward(net.heads[s], hacts, std::move(dy), &grads->heads[s]);
          stack_backward(net.branches[s], bacts, std::move(dfeat), &grads->branches[s]);
        }
      }
    } else {
      std::vector<std::vector<Tensor>> bacts(net.branches.size());
      std::vector<Tensor> outs;
      for (size_t s = 0; s < net.branches.size(); ++s) {
        bacts[s] = stack_forward_cached(net.branches[s], sample[s]);
        outs.push_back(bacts[s].back());
      }
      auto tacts = stack_forward_cached(net.trunk, concat_channels(outs));
      std::vector<double> dlogits;
      total += softmax_xent(tacts.back().v, label, grads ? &dlogits : nullptr);
      if (grads) {
        Tensor dy(net.config.classes, 1, 1);
        dy.v = dlogits;
        Tensor dconcat = stack_backward(net.trunk, tacts, std::move(dy), &grads->trunk);
        auto parts = split_channels(dconcat, outs);
        for (size_t s = 0; s < net.branches.size(); ++s)
          stack_backward(net.branches[s], bacts[s], std::move(parts[s]), &grads->branches[s]);
      }
    }
  }
  return total;
}

}  // namespace

double network_loss(const Network& net, const std::vector<Sample>& batch,
                    const std::vector<int>& labels) {
  return batch_loss_impl(net, batch, labels, nullptr);
}

double network_loss_and_gradients(const Network& net, const std::vector<Sample>& batch,
                                  const std::vector<int>& labels, NetworkGradients* grads) {
  return batch_loss_impl(net, batch, labels, grads);
}

namespace {

template <class FnStack>
void for_each_stack(Network& net, FnStack&& fn) {
  for (LayerStack& s : net.branches) fn(s);
  fn(net.trunk);
  for (LayerStack& s : net.heads) fn(s);
}

}  // namespace

std::vector<double*> all_parameters(Network& net) {
  std::vector<double*> out;
  for_each_stack(net, [&](LayerStack& s) {
    for (Layer& l : s.layers) {
      for (double& w : l.w) out.push_back(&w);
      for (double& b : l.b) out.push_back(&b);
    }
  });
  return out;
}

std::vector<double> flatten_gradients(const Network& net, const NetworkGradients& grads) {
  std::vector<double> out;
  auto push_stack = [&](const LayerStack& s, const StackGrads& g) {
    for (size_t li = 0; li < s.layers.size(); ++li) {
      out.insert(out.end(), g.dw[li].begin(), g.dw[li].end());
      out.insert(out.end(), g.db[li].begin(), g.db[li].end());
    }
  };
  for (size_t s = 0; s < net.branches.size(); ++s) push_stack(net.branches[s], grads.branches[s]);
  push_stack(net.trunk, grads.trunk);
  for (size_t s = 0; s < net.heads.size(); ++s) push_stack(net.heads[s], grads.heads[s]);
  return out;
}

namespace {

double accuracy(const Network& net, const std::vector<PatchSample>& samples) {
  if (samples.empty()) return 0;
  size_t hits = 0;
  for (const auto& s : samples) {
    auto logits = eval_logits(net, s.streams);
    size_t arg = std::distance(logits.begin(), std::max_element(logits.begin(), logits.end()));
    hits += (static_cast<int>(arg) == s.label);
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

TrainState sgd_train(Network& net, const std::vector<PatchSample>& train,
                     const std::vector<PatchSample>& val, const TrainParams& params,
                     uint64_t shuffle_seed) {
  TrainState state;
  state.params = params;
  if (train.empty()) throw DataError("train: empty training set");

  auto names = all_parameters(net);
  std::vector<double> velocity(names.size(), 0.0);
  std::mt19937_64 rng(shuffle_seed);
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), size_t{0});
  const int batch_size = std::max(1, std::min<int>(params.batch, static_cast<int>(train.size())));

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    const double lr =
        params.lr0 * std::pow(0.1, params.lr_decay_epochs > 0 ? epoch / params.lr_decay_epochs : 0);
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0;
    NetworkGradients grads;
    for (size_t start = 0; start < order.size(); start += batch_size) {
      size_t stop = std::min(order.size(), start + batch_size);
      std::vector<Sample> batch;
      std::vector<int> labels;
      batch.reserve(stop - start);
      for (size_t i = start; i < stop; ++i) {
        batch.push_back(train[order[i]].streams);
        labels.push_back(train[order[i]].label);
      }
      double loss = network_loss_and_gradients(net, batch, labels, &grads);
      if (!std::isfinite(loss)) throw NumericError("training diverged: non-finite loss");
      epoch_loss += loss;

      // gradients accumulate as sums over the batch; the step averages them
      const double inv_batch = 1.0 / static_cast<double>(batch.size());
      std::vector<double> g = flatten_gradients(net, grads);
      for (size_t p = 0; p < names.size(); ++p) {
        velocity[p] = params.momentum * velocity[p] - lr * g[p] * inv_batch;
        *names[p] += velocity[p];
      }
    }

    TraceRow row;
    row.epoch = epoch;
    row.loss = epoch_loss / static_cast<double>(train.size());
    row.train_acc = accuracy(net, train);
    row.val_acc = accuracy(net, val);
    if (!std::isfinite(row.loss)) throw NumericError("training diverged: non-finite loss");
    state.trace.push_back(row);
  }
  return state;
}

std::vector<PatchSample> slice_stream(const std::vector<PatchSample>& samples, size_t stream) {
  std::vector<PatchSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    PatchSample p;
    p.label = s.label;
    p.streams = {s.streams[stream]};
    out.push_back(std::move(p));
  }
  return out;
}

NetworkConfig single_stream_config(const NetworkConfig& base, const std::string& name) {
  NetworkConfig c = base;
  c.stream_names = {name};
  c.fusion = FusionPoint::Input;
  c.warm_start = false;
  return c;
}

// Trains one net per stream; used by Final fusion and by warm starts.
std::vector<TrainedNetwork> train_per_stream(const NetworkConfig& config,
                                             const PatchDataset& dataset,
                                             const TrainParams& params) {
  std::vector<TrainedNetwork> nets;
  for (size_t s = 0; s < config.stream_names.size(); ++s) {
    const std::string& name = config.stream_names[s];
    NetworkConfig sc = single_stream_config(config, name);
    Network net = build_network(sc);
    TrainParams sp = params;
    sp.seed = hash_mix(params.seed, fnv1a64(name));
    TrainState st = sgd_train(net, slice_stream(dataset.train, s), slice_stream(dataset.val, s),
                              sp, sp.seed);
    nets.push_back({std::move(net), std::move(st)});
  }
  return nets;
}

void copy_matching_prefix(const LayerStack& src, LayerStack* dst) {
  for (size_t i = 0; i < dst->layers.size(); ++i) {
    const Layer& from = src.layers.at(i);
    Layer& to = dst->layers[i];
    if (from.name != to.name || from.w.size() != to.w.size() || from.b.size() != to.b.size())
      throw std::logic_error("warm start: architecture prefix mismatch");
    to.w = from.w;
    to.b = from.b;
  }
}

}  // namespace

TrainedNetwork train_network(const NetworkConfig& config, const PatchDataset& dataset,
                             const TrainParams& params) {
  if (static_cast<int>(dataset.stream_names.size()) != config.streams())
    throw std::invalid_argument("train: dataset streams do not match the network config");

  if (config.fusion == FusionPoint::Final) {
    auto subs = train_per_stream(config, dataset, params);
    Network net = build_network(config);
    for (size_t s = 0; s < subs.size(); ++s) {
      const LayerStack& trained = subs[s].net.trunk;  // single-stream net: all layers in trunk
      copy_matching_prefix(trained, &net.branches[s]);
      // head = suffix starting at fc2
      LayerStack& head = net.heads[s];
      size_t off = trained.layers.size() - head.layers.size();
      for (size_t i = 0; i < head.layers.size(); ++i) {
        head.layers[i].w = trained.layers[off + i].w;
        head.layers[i].b = trained.layers[off + i].b;
      }
    }
    // Per-stream traces averaged per epoch for the record.
    TrainState state;
    state.params = params;
    for (size_t e = 0; e < subs[0].state.trace.size(); ++e) {
      TraceRow row;
      row.epoch = static_cast<int>(e);
      for (const auto& sub : subs) {
        row.loss += sub.state.trace[e].loss / static_cast<double>(subs.size());
        row.train_acc += sub.state.trace[e].train_acc / static_cast<double>(subs.size());
        row.val_acc += sub.state.trace[e].val_acc / static_cast<double>(subs.size());
      }
      state.trace.push_back(row);
    }
    return {std::move(net), std::move(state)};
  }

  Network net = build_network(config);
  if (config.warm_start &&
      (config.fusion == FusionPoint::Fc1 || config.fusion == FusionPoint::Fc2)) {
    auto subs = train_per_stream(config, dataset, params);
    for (size_t s = 0; s < subs.size(); ++s)
      copy_matching_prefix(subs[s].net.trunk, &net.branches[s]);
  }

  TrainState state = sgd_train(net, dataset.train, dataset.val, params, params.seed);
  return {std::move(net), std::move(state)};
}

std::vector<double> extract_features(const Network& net, const std::string& layer,
                                     const Sample& sample) {
  if (layer != "fc1") throw std::invalid_argument("extract_features: unknown layer " + layer);
  check_sample(net, sample);

  auto run_until_fc1 = [](const LayerStack& stack, Tensor x, bool* found) -> Tensor {
    *found = false;
    for (size_t i = 0; i < stack.layers.size(); ++i) {
      x = stack_layer_forward(stack.layers[i], x);
      if (stack.layers[i].name == "fc1") {
        if (i + 1 < stack.layers.size() && stack.layers[i + 1].kind == LayerKind::ReLU)
          x = stack_layer_forward(stack.layers[i + 1], x);
        *found = true;
        return x;
      }
    }
    return x;
  };

  // fc1 lives in the trunk for Input/Pool2/Fc1 fusion, in the branches for
  // Fc2/Final; probe the structure rather than the enum.
  bool in_branches = false;
  if (!net.branches.empty())
    for (const Layer& l : net.branches[0].layers)
      if (l.name == "fc1") in_branches = true;

  if (in_branches) {
    std::vector<double> out;
    for (size_t s = 0; s < net.branches.size(); ++s) {
      bool found = false;
      Tensor f = run_until_fc1(net.branches[s], sample[s], &found);
      if (!found) throw std::logic_error("extract_features: fc1 not found in branch");
      out.insert(out.end(), f.v.begin(), f.v.end());
    }
    return out;
  }

  std::vector<Tensor> outs;
  for (size_t s = 0; s < net.branches.size(); ++s)
    outs.push_back(stack_forward(net.branches[s], sample[s]));
  bool found = false;
  Tensor f = run_until_fc1(net.trunk, concat_channels(outs), &found);
  if (!found) throw std::logic_error("extract_features: fc1 not found in trunk");
  return f.v;
}

std::vector<std::vector<double>> extract_features_batch(const Network& net,
                                                        const std::string& layer,
                                                        const std::vector<Sample>& samples,
                                                        Exec exec) {
  std::vector<std::vector<double>> out(samples.size());
  for_each_row(static_cast<int>(samples.size()), exec,
               [&](int i) { out[i] = extract_features(net, layer, samples[i]); });
  return out;
}

void save_network(const Network& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw DataError(path + ": cannot open for writing");
  std::string cfg = net.config.to_json();
  out.write("FNET", 4);
  uint32_t len = static_cast<uint32_t>(cfg.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  auto dump_stack = [&](const LayerStack& s) {
    for (const Layer& l : s.layers) {
      out.write(reinterpret_cast<const char*>(l.w.data()),
                static_cast<std::streamsize>(l.w.size() * sizeof(double)));
      out.write(reinterpret_cast<const char*>(l.b.data()),
                static_cast<std::streamsize>(l.b.size() * sizeof(double)));
    }
  };
  for (const LayerStack& s : net.branches) dump_stack(s);
  dump_stack(net.trunk);
  for (const LayerStack& s : net.heads) dump_stack(s);
  if (!out.good()) throw DataError(path + ": write failed");
}

Network load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw DataError(path + ": cannot open");
  char magic[4];
  in.read(magic, 4);
  if (!in.good() || std::memcmp(magic, "FNET", 4) != 0) throw DataError(path + ": bad magic");
  uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 4);
  if (!in.good() || len == 0 || len > (1u << 20)) throw DataError(path + ": bad header length");
  std::string cfg(len, '\0');
  in.read(cfg.data(), len);
  if (!in.good()) throw DataError(path + ": truncated header");

  Network net = build_network(NetworkConfig::from_json(cfg));
  auto fill_stack = [&](LayerStack& s) {
    for (Layer& l : s.layers) {
      in.read(reinterpret_cast<char*>(l.w.data()),
              static_cast<std::streamsize>(l.w.size() * sizeof(double)));
      in.read(reinterpret_cast<char*>(l.b.data()),
              static_cast<std::streamsize>(l.b.size() * sizeof(double)));
    }
  };
  for (LayerStack& s : net.branches) fill_stack(s);
  fill_stack(net.trunk);
  for (LayerStack& s : net.heads) fill_stack(s);
  if (!in.good()) throw DataError(path + ": truncated parameters");
  return net;
}

void write_trace_csv(const TrainState& state, const std::string& path) {
  std::ofstream out(path);
  if (!out.good()) throw DataError(path + ": cannot open for writing");
  out << "epoch,loss,train_acc,val_acc\n";
  for (const TraceRow& r : state.trace)
    out << r.epoch << "," << format_double(r.loss) << "," << format_double(r.train_acc) << ","
        << format_double(r.val_acc) << "\n";
}

}  // namespace rgbd
