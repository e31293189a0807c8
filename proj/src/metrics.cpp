#include "amaa/metrics.hpp"

#include <charconv>
#include <stdexcept>

#include <json.hpp>

namespace amaa {
namespace {

double ratio_or_one(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_pair(const LabelVolume& pred, const LabelVolume& truth) {
  if (pred.dims != truth.dims || pred.ids.size() != truth.ids.size()) {
    throw ShapeError("prediction and truth label volumes differ in shape");
  }
}

// A voxel counts when both volumes mark it valid.
bool counted(const LabelVolume& pred, const LabelVolume& truth, std::size_t i) {
  return pred.valid(i) && truth.valid(i);
}

}  // namespace

double ConfusionCounts::iou() const { return ratio_or_one(tp, tp + fp + fn); }

MetricsAccumulator::MetricsAccumulator(std::size_t classes)
    : classes_(classes), per_class_(classes > 0 ? classes - 1 : 0) {
  if (classes < 2) throw ConfigError("metrics need at least two classes");
}

void MetricsAccumulator::add(const LabelVolume& pred, const LabelVolume& truth) {
  check_pair(pred, truth);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!counted(pred, truth, i)) continue;
    const std::size_t p = pred.ids[i];
    const std::size_t y = truth.ids[i];
    if (p >= classes_ || y >= classes_) throw ShapeError("label id exceeds class count");
    const bool po = p != 0;
    const bool yo = y != 0;
    if (po && yo) ++occupancy_.tp;
    if (po && !yo) ++occupancy_.fp;
    if (!po && yo) ++occupancy_.fn;
    if (p == y) {
      if (p != 0) ++per_class_[p - 1].tp;
    } else {
      if (p != 0) ++per_class_[p - 1].fp;
      if (y != 0) ++per_class_[y - 1].fn;
    }
  }
}

MetricsReport MetricsAccumulator::report() const {
  MetricsReport r;
  r.occupancy = occupancy_;
  r.classes = per_class_;
  r.sc_iou = occupancy_.iou();
  r.precision = ratio_or_one(occupancy_.tp, occupancy_.tp + occupancy_.fp);
  r.recall = ratio_or_one(occupancy_.tp, occupancy_.tp + occupancy_.fn);
  for (const auto& c : per_class_) r.class_iou.push_back(c.iou());
  r.miou = mean_iou(r.class_iou);
  return r;
}

double mean_iou(const std::vector<double>& per_class) {
  if (per_class.empty()) throw ConfigError("mean IoU of an empty class list");
  double s = 0.0;
  for (double v : per_class) s += v;
  return s / static_cast<double>(per_class.size());
}

MetricsReport compute_metrics(const LabelVolume& pred, const LabelVolume& truth,
                              std::size_t classes) {
  MetricsAccumulator acc(classes);
  acc.add(pred, truth);
  return acc.report();
}

double metric_sc_iou(const LabelVolume& pred, const LabelVolume& truth) {
  check_pair(pred, truth);
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!counted(pred, truth, i)) continue;
    const bool po = pred.ids[i] != 0;
    const bool yo = truth.ids[i] != 0;
    c.tp += po && yo;
    c.fp += po && !yo;
    c.fn += !po && yo;
  }
  return c.iou();
}

ClassIou metric_ssc_miou(const LabelVolume& pred, const LabelVolume& truth,
                         std::size_t classes) {
  const MetricsReport r = compute_metrics(pred, truth, classes);
  return {r.class_iou, r.miou};
}

PrecisionRecall metric_precision_recall(const LabelVolume& pred,
                                        const LabelVolume& truth) {
  check_pair(pred, truth);
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!counted(pred, truth, i)) continue;
    const bool po = pred.ids[i] != 0;
    const bool yo = truth.ids[i] != 0;
    tp += po && yo;
    fp += po && !yo;
    fn += !po && yo;
  }
  return {ratio_or_one(tp, tp + fp), ratio_or_one(tp, tp + fn)};
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw std::runtime_error("double formatting failed");
  return std::string(buf, res.ptr);
}

std::string metrics_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["sc_iou"] = r.sc_iou;
  j["miou"] = r.miou;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["class_iou"] = r.class_iou;
  j["counts"]["occupancy"] = {{"tp", r.occupancy.tp}, {"fp", r.occupancy.fp},
                              {"fn", r.occupancy.fn}};
  auto& cls = j["counts"]["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : r.classes) cls.push_back({{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}});
  return j.dump(2);
}

std::string metrics_csv_header(std::size_t classes) {
  std::string s = "sc_iou,miou,precision,recall";
  for (std::size_t k = 1; k < classes; ++k) s += ",iou_class_" + std::to_string(k);
  return s;
}

std::string metrics_csv_row(const MetricsReport& r) {
  std::string s = format_double(r.sc_iou) + "," + format_double(r.miou) + "," +
                  format_double(r.precision) + "," + format_double(r.recall);
  for (double v : r.class_iou) s += "," + format_double(v);
  return s;
}

}  // namespace amaa
