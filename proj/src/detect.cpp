#include "rgbd/detect.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "json.hpp"

namespace rgbd {

double iou(const BoundingBox& a, const BoundingBox& b) {
  if (!a.valid() || !b.valid()) throw std::invalid_argument("iou: invalid box");
  int ix1 = std::max(a.x1, b.x1), iy1 = std::max(a.y1, b.y1);
  int ix2 = std::min(a.x2, b.x2), iy2 = std::min(a.y2, b.y2);
  if (ix2 < ix1 || iy2 < iy1) return 0.0;
  long long inter = static_cast<long long>(ix2 - ix1 + 1) * (iy2 - iy1 + 1);
  long long uni = a.area() + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<int> label_proposals(const std::vector<BoundingBox>& proposals,
                                 const std::vector<GroundTruthBox>& gt, double positive_iou,
                                 double background_iou) {
  std::vector<int> labels(proposals.size(), kLabelBackground);
  for (size_t i = 0; i < proposals.size(); ++i) {
    double best = 0.0;
    int best_class = kLabelBackground;
    for (const auto& g : gt) {
      double o = iou(proposals[i], g.box);
      if (o > best) {
        best = o;
        best_class = g.class_id;
      }
    }
    if (best > positive_iou)
      labels[i] = best_class;
    else if (best < background_iou)
      labels[i] = kLabelBackground;
    else
      labels[i] = kLabelIgnored;
  }
  return labels;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, double threshold) {
  std::vector<size_t> order(dets.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return a < b;  // tie: lower input index first
  });
  std::vector<Detection> kept;
  for (size_t i : order) {
    bool ok = true;
    for (const Detection& k : kept) {
      if (iou(dets[i].box, k.box) > threshold) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(dets[i]);
  }
  return kept;
}

namespace {

// Flattened detection list sorted by score with per-frame greedy matching;
// shared by AP and the PR dump.
std::vector<std::pair<double, bool>> match_detections(const std::vector<FrameEval>& frames,
                                                      double iou_thresh, size_t* total_gt) {
  *total_gt = 0;
  struct Ref {
    double score;
    size_t frame, index;
  };
  std::vector<Ref> all;
  for (size_t f = 0; f < frames.size(); ++f) {
    *total_gt += frames[f].gt.size();
    for (size_t i = 0; i < frames[f].detections.size(); ++i)
      all.push_back({frames[f].detections[i].score, f, i});
  }
  std::stable_sort(all.begin(), all.end(), [](const Ref& a, const Ref& b) {
    return a.score > b.score;  // stable: input order breaks ties
  });

  std::vector<std::vector<uint8_t>> used(frames.size());
  for (size_t f = 0; f < frames.size(); ++f) used[f].assign(frames[f].gt.size(), 0);

  std::vector<std::pair<double, bool>> scored;  // (score, is_true_positive)
  scored.reserve(all.size());
  for (const Ref& r : all) {
    const Detection& d = frames[r.frame].detections[r.index];
    double best = 0.0;
    int best_gt = -1;
    for (size_t g = 0; g < frames[r.frame].gt.size(); ++g) {
      if (used[r.frame][g]) continue;
      double o = iou(d.box, frames[r.frame].gt[g]);
      if (o > best) {
        best = o;
        best_gt = static_cast<int>(g);
      }
    }
    bool tp = best_gt >= 0 && best >= iou_thresh;
    if (tp) used[r.frame][best_gt] = 1;
    scored.emplace_back(d.score, tp);
  }
  return scored;
}

}  // namespace

std::optional<double> average_precision(const std::vector<FrameEval>& frames, double iou_thresh,
                                        ApMode mode) {
  size_t total_gt = 0;
  auto scored = match_detections(frames, iou_thresh, &total_gt);
  if (total_gt == 0) return std::nullopt;  // AP undefined, never reported as 0

  if (mode == ApMode::Step) {
    double ap = 0.0;
    size_t tp = 0, seen = 0;
    for (const auto& [score, is_tp] : scored) {
      (void)score;
      ++seen;
      if (is_tp) {
        ++tp;
        double precision = static_cast<double>(tp) / static_cast<double>(seen);
        ap += precision / static_cast<double>(total_gt);  // recall step is 1/|gt|
      }
    }
    return ap;
  }

  // precision/recall after each detection, then the monotone envelope
  std::vector<double> recall, precision;
  size_t tp = 0, seen = 0;
  for (const auto& [score, is_tp] : scored) {
    (void)score;
    ++seen;
    if (is_tp) ++tp;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(seen));
  }
  for (size_t i = precision.size(); i-- > 1;)
    precision[i - 1] = std::max(precision[i - 1], precision[i]);

  if (mode == ApMode::Voc2010) {
    double ap = 0.0;
    double prev_r = 0.0;
    for (size_t i = 0; i < recall.size(); ++i) {
      ap += (recall[i] - prev_r) * precision[i];
      prev_r = recall[i];
    }
    return ap;
  }

  // ElevenPoint: envelope sampled at recall 0, 0.1, ..., 1
  double ap = 0.0;
  for (int k = 0; k <= 10; ++k) {
    double r = k / 10.0;
    double p = 0.0;
    for (size_t i = 0; i < recall.size(); ++i) {
      if (recall[i] >= r - 1e-12) {
        p = precision[i];
        break;
      }
    }
    ap += p / 11.0;
  }
  return ap;
}

std::optional<double> average_precision(const std::vector<Detection>& dets,
                                        const std::vector<BoundingBox>& gt, double iou_thresh,
                                        ApMode mode) {
  return average_precision(std::vector<FrameEval>{FrameEval{dets, gt}}, iou_thresh, mode);
}

std::vector<std::pair<double, double>> precision_recall_points(const std::vector<FrameEval>& frames,
                                                               double iou_thresh) {
  size_t total_gt = 0;
  auto scored = match_detections(frames, iou_thresh, &total_gt);
  std::vector<std::pair<double, double>> pr;
  size_t tp = 0, seen = 0;
  for (const auto& [score, is_tp] : scored) {
    (void)score;
    ++seen;
    if (is_tp) ++tp;
    double recall = total_gt ? static_cast<double>(tp) / static_cast<double>(total_gt) : 0.0;
    pr.emplace_back(recall, static_cast<double>(tp) / static_cast<double>(seen));
  }
  return pr;
}

ProposalSet grid_proposals(int frame_width, int frame_height, const std::vector<int>& scales,
                           const std::vector<int>& strides, const std::vector<double>& ratios) {
  if (frame_width <= 0 || frame_height <= 0)
    throw std::invalid_argument("grid_proposals: non-positive frame dimensions");
  if (scales.empty() || strides.empty() || scales.size() != strides.size())
    throw std::invalid_argument("grid_proposals: scales and strides must pair up");
  for (size_t i = 0; i < scales.size(); ++i)
    if (scales[i] <= 0 || strides[i] <= 0)
      throw std::invalid_argument("grid_proposals: scales and strides must be positive");

  ProposalSet out;
  out.source = ProposalSource::Grid;
  std::set<std::array<int, 4>> seen;
  auto centers = [](int dim, int stride) {
    std::vector<int> cs;
    for (int c = 0;; c += stride) {
      cs.push_back(c);
      if (c >= dim - 1) break;
    }
    return cs;
  };
  for (size_t s = 0; s < scales.size(); ++s) {
    for (double ratio : ratios) {
      if (!(ratio > 0)) throw std::invalid_argument("grid_proposals: ratios must be positive");
      int bw = std::max(1, static_cast<int>(std::lround(scales[s] * std::sqrt(ratio))));
      int bh = std::max(1, static_cast<int>(std::lround(scales[s] / std::sqrt(ratio))));
      for (int cy : centers(frame_height, strides[s])) {
        for (int cx : centers(frame_width, strides[s])) {
          BoundingBox b{cx - bw / 2, cy - bh / 2, 0, 0};
          b.x2 = b.x1 + bw - 1;
          b.y2 = b.y1 + bh - 1;
          b.x1 = std::max(0, b.x1);
          b.y1 = std::max(0, b.y1);
          b.x2 = std::min(frame_width - 1, b.x2);
          b.y2 = std::min(frame_height - 1, b.y2);
          if (!b.valid()) continue;
          std::array<int, 4> key{b.x1, b.y1, b.x2, b.y2};
          if (seen.insert(key).second) out.boxes.push_back(b);
        }
      }
    }
  }
  return out;
}

std::vector<ProposalSet> load_proposals(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw DataError(path + ": cannot open");
  std::vector<ProposalSet> sets;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw DataError(path + ": invalid JSON on line " + std::to_string(lineno));
    }
    ProposalSet set;
    set.source = ProposalSource::File;
    set.frame = j.value("frame", std::string{});
    for (const auto& box : j.at("boxes")) {
      if (!box.is_array() || box.size() != 4)
        throw DataError(path + ": box must be [x1,y1,x2,y2] on line " + std::to_string(lineno));
      BoundingBox b{box[0].get<int>(), box[1].get<int>(), box[2].get<int>(), box[3].get<int>()};
      if (!b.valid())
        throw DataError(path + ": degenerate box on line " + std::to_string(lineno));
      set.boxes.push_back(b);
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

void save_proposals(const std::vector<ProposalSet>& sets, const std::string& path) {
  std::ofstream out(path);
  if (!out.good()) throw DataError(path + ": cannot open for writing");
  for (const auto& set : sets) {
    nlohmann::json j;
    j["frame"] = set.frame;
    auto boxes = nlohmann::json::array();
    for (const auto& b : set.boxes) boxes.push_back({b.x1, b.y1, b.x2, b.y2});
    j["boxes"] = boxes;
    out << j.dump() << "\n";
  }
}

}  // namespace rgbd
