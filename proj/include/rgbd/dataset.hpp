#pragma once

#include <string>
#include <vector>

namespace rgbd {

// Dense value tensor, channel-major (index = (c * h + y) * w + x).
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, 0.0) {}

  size_t size() const { return v.size(); }
  double& at(int ch, int y, int x) { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
  double at(int ch, int y, int x) const { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
};

// One multi-stream training sample: one tensor per property stream.
using Sample = std::vector<Tensor>;

struct PatchSample {
  Sample streams;
  int label = 0;
};

struct PatchDataset {
  std::vector<std::string> stream_names;
  int patch = 0;
  int channels = 0;   // per stream
  int n_classes = 0;  // includes the background class (last id)
  std::vector<PatchSample> train;
  std::vector<PatchSample> val;
};

}  // namespace rgbd
