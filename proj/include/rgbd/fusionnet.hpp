#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgbd/common.hpp"
#include "rgbd/dataset.hpp"

namespace rgbd {

// Small multi-stream convolutional network trained from scratch. Streams
// share one architecture; the fusion point decides where their activations
// are concatenated along the channel axis and processing becomes joint:
//
//   Input  - maps stacked at the input layer, one trunk
//   Pool2  - streams independent up to the last pooling layer
//   Fc1    - streams independent through the conv stack; first shared fc
//   Fc2    - streams independent through fc1; shared classifier layer
//   Final  - fully independent nets; concatenated fc1 features go to the
//            external classifier instead of softmax scores
//
// Ablations strip functional components: ConvPool drops ReLU, ConvRelu
// drops pooling, Conv drops both (an affine network).

enum class FusionPoint { Input, Pool2, Fc1, Fc2, Final };
enum class Ablation { Full, ConvPool, Conv, ConvRelu };

std::string to_string(FusionPoint f);
std::string to_string(Ablation a);
FusionPoint fusion_point_from_string(const std::string& s);
Ablation ablation_from_string(const std::string& s);

struct NetworkConfig {
  std::vector<std::string> stream_names = {"disparity", "height", "angle"};
  int in_channels = 1;
  int patch = 32;
  int classes = 4;  // object classes + background
  std::vector<int> conv_channels = {8, 16};
  int fc1_width = 64;
  int kernel = 5;
  FusionPoint fusion = FusionPoint::Final;
  Ablation ablation = Ablation::Full;
  bool warm_start = false;  // Fc1/Fc2: branches start from per-stream trained nets
  uint64_t seed = 1;

  int streams() const { return static_cast<int>(stream_names.size()); }
  std::string to_json() const;
  static NetworkConfig from_json(const std::string& text);
};

enum class LayerKind { Conv, ReLU, MaxPool, Flatten, FC };

struct Layer {
  LayerKind kind = LayerKind::ReLU;
  std::string name;                     // conv1, pool2, fc1, ...
  int in_c = 0, in_h = 0, in_w = 0;
  int out_c = 0, out_h = 0, out_w = 0;
  int kernel = 0;                       // Conv only
  std::vector<double> w, b;

  size_t parameter_count() const { return w.size() + b.size(); }
};

struct LayerStack {
  std::vector<Layer> layers;
};

struct Network {
  NetworkConfig config;
  std::vector<LayerStack> branches;  // one per stream; empty stacks for Input fusion
  LayerStack trunk;                  // empty for Final fusion
  std::vector<LayerStack> heads;     // Final fusion: per-stream classifier layers
};

// Seeded He-style initialization; branch seeds derive from stream names so
// reordering streams carries their parameters along.
Network build_network(const NetworkConfig& config);

size_t parameter_count(const Network& net);
size_t trunk_parameter_count(const Network& net);
size_t branch_parameter_count(const Network& net);  // includes Final heads

// Logits for fusion points with a trunk; for Final fusion, the
// concatenated per-stream fc1 features (the external classifier's input).
std::vector<double> forward(const Network& net, const Sample& sample);

// Sum of softmax cross-entropies over the batch (per-stream heads summed
// for Final fusion).
double network_loss(const Network& net, const std::vector<Sample>& batch,
                    const std::vector<int>& labels);

struct StackGrads {
  std::vector<std::vector<double>> dw, db;  // parallel to stack layers
};
struct NetworkGradients {
  std::vector<StackGrads> branches;
  StackGrads trunk;
  std::vector<StackGrads> heads;
};

double network_loss_and_gradients(const Network& net, const std::vector<Sample>& batch,
                                  const std::vector<int>& labels, NetworkGradients* grads);

// Parameter/gradient access in declaration order (branches, trunk, heads);
// the two orders match element for element.
std::vector<double*> all_parameters(Network& net);
std::vector<double> flatten_gradients(const Network& net, const NetworkGradients& grads);

struct TrainParams {
  double lr0 = 1e-3;
  int lr_decay_epochs = 20;  // x0.1 every this many epochs
  double momentum = 0.9;
  int batch = 16;
  int epochs = 30;
  uint64_t seed = 1;
};

struct TraceRow {
  int epoch = 0;
  double loss = 0;  // mean per-sample training loss
  double train_acc = 0, val_acc = 0;
};

struct TrainState {
  TrainParams params;
  std::vector<TraceRow> trace;
};

struct TrainedNetwork {
  Network net;
  TrainState state;
};

// SGD with momentum under the schedule; deterministic given seeds. Final
// fusion trains each stream's net independently (as the external-classifier
// scheme prescribes); warm-started Fc1/Fc2 fusion pretrains per-stream nets
// and copies their matching prefixes into the branches first.
TrainedNetwork train_network(const NetworkConfig& config, const PatchDataset& dataset,
                             const TrainParams& params);

// Post-ReLU activations at the named layer ("fc1"); when fc1 lives in the
// branches (Fc2/Final fusion) the per-stream features are concatenated in
// stream order. Unknown layer names are an error.
std::vector<double> extract_features(const Network& net, const std::string& layer,
                                     const Sample& sample);
std::vector<std::vector<double>> extract_features_batch(const Network& net,
                                                        const std::string& layer,
                                                        const std::vector<Sample>& samples,
                                                        Exec exec = Exec::Parallel);

// Flat binary: magic "FNET", u32 config-JSON length, config JSON, then f64
// parameter tensors in declaration order.
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

void write_trace_csv(const TrainState& state, const std::string& path);

}  // namespace rgbd
