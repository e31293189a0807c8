#pragma once

// Scene-completion metrics: binary occupancy IoU, per-class IoU / mIoU over
// the non-empty classes, and occupancy precision / recall.
//
// Conventions: an IoU whose union is empty scores 1.0, and so does a
// precision or recall with an empty denominator.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "amaa/objective.hpp"

namespace amaa {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  double iou() const;
  bool operator==(const ConfusionCounts&) const = default;
};

struct MetricsReport {
  double sc_iou = 1.0;
  std::vector<double> class_iou;  // classes 1 .. C-1
  double miou = 1.0;
  double precision = 1.0;
  double recall = 1.0;
  ConfusionCounts occupancy;
  std::vector<ConfusionCounts> classes;  // index k is class k + 1

  bool operator==(const MetricsReport&) const = default;
};

/// Accumulates integer counts over any number of (pred, truth) pairs, so a
/// split-level report is independent of how the voxels were partitioned.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(std::size_t classes);

  void add(const LabelVolume& pred, const LabelVolume& truth);
  MetricsReport report() const;
  std::size_t classes() const { return classes_; }

 private:
  std::size_t classes_;
  ConfusionCounts occupancy_;
  std::vector<ConfusionCounts> per_class_;
};

double metric_sc_iou(const LabelVolume& pred, const LabelVolume& truth);

struct ClassIou {
  std::vector<double> per_class;  // classes 1 .. C-1
  double miou = 1.0;
};
ClassIou metric_ssc_miou(const LabelVolume& pred, const LabelVolume& truth,
                         std::size_t classes);

/// Arithmetic mean of per-class IoU values (any scale, e.g. percentages).
double mean_iou(const std::vector<double>& per_class);

struct PrecisionRecall {
  double precision = 1.0;
  double recall = 1.0;
};
PrecisionRecall metric_precision_recall(const LabelVolume& pred,
                                        const LabelVolume& truth);

MetricsReport compute_metrics(const LabelVolume& pred, const LabelVolume& truth,
                              std::size_t classes);

/// Shortest round-trip decimal form, independent of locale.
std::string format_double(double v);

std::string metrics_json(const MetricsReport& r);
std::string metrics_csv_header(std::size_t classes);
std::string metrics_csv_row(const MetricsReport& r);

}  // namespace amaa
