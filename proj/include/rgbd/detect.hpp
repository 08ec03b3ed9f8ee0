#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rgbd/common.hpp"

namespace rgbd {

// Detection bookkeeping: boxes, overlap, proposal labeling, greedy
// suppression and average precision.

struct BoundingBox {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;  // inclusive pixel corners

  long long area() const {
    return static_cast<long long>(x2 - x1 + 1) * static_cast<long long>(y2 - y1 + 1);
  }
  bool valid() const { return x2 >= x1 && y2 >= y1; }
};

struct Detection {
  BoundingBox box;
  int class_id = 0;
  double score = 0;
};

struct GroundTruthBox {
  int class_id = 0;
  BoundingBox box;
};

enum class ProposalSource { File, Grid };

struct ProposalSet {
  std::string frame;
  std::vector<BoundingBox> boxes;
  ProposalSource source = ProposalSource::Grid;
};

// Intersection over union with inclusive-pixel areas.
double iou(const BoundingBox& a, const BoundingBox& b);

// Proposal labels: IoU > 0.5 with any ground truth -> that class (max
// overlap wins); max IoU < 0.3 -> background; the band between is ignored
// for classifier training.
inline constexpr int kLabelBackground = -1;
inline constexpr int kLabelIgnored = -2;
std::vector<int> label_proposals(const std::vector<BoundingBox>& proposals,
                                 const std::vector<GroundTruthBox>& gt,
                                 double positive_iou = 0.5, double background_iou = 0.3);

// Greedy non-maximum suppression for a single class: scan by descending
// score (ties broken by lower input index), keep a detection iff its IoU
// with every kept detection is <= threshold. Output is score-descending.
std::vector<Detection> nms(const std::vector<Detection>& dets, double threshold = 0.3);

// Average precision over a set of frames: detections sorted by descending
// score, greedily matched to the highest-IoU unmatched ground truth of the
// frame (IoU >= iou_thresh -> true positive). The default Step mode is the
// area under the raw precision-recall step curve (sum over detections of
// precision times recall increment); Voc2010 applies the monotone
// precision envelope first, ElevenPoint samples the envelope at the 11
// canonical recall levels. Returns nullopt when there is no ground truth.
enum class ApMode { Step, Voc2010, ElevenPoint };
struct FrameEval {
  std::vector<Detection> detections;  // one class
  std::vector<BoundingBox> gt;        // same class
};
std::optional<double> average_precision(const std::vector<FrameEval>& frames,
                                        double iou_thresh = 0.5, ApMode mode = ApMode::Step);
// Single-frame convenience overload.
std::optional<double> average_precision(const std::vector<Detection>& dets,
                                        const std::vector<BoundingBox>& gt,
                                        double iou_thresh = 0.5, ApMode mode = ApMode::Step);

// Precision-recall points (after each detection) for plotting.
std::vector<std::pair<double, double>> precision_recall_points(const std::vector<FrameEval>& frames,
                                                               double iou_thresh = 0.5);

// Dense sliding windows: for each scale and aspect ratio, windows of size
// round(scale * sqrt(ratio)) x round(scale / sqrt(ratio)) centered on a
// stride grid covering the frame, clipped to bounds and deduplicated.
ProposalSet grid_proposals(int frame_width, int frame_height, const std::vector<int>& scales,
                           const std::vector<int>& strides,
                           const std::vector<double>& ratios = {1.0});

// Proposal files: one JSON object per line, {"frame": id, "boxes": [[x1,y1,x2,y2], ...]}.
std::vector<ProposalSet> load_proposals(const std::string& path);
void save_proposals(const std::vector<ProposalSet>& sets, const std::string& path);

}  // namespace rgbd
