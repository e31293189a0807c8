#include <doctest.h>

#include <json.hpp>

#include "../fixtures/comparison_rows.hpp"
#include "amaa/metrics.hpp"
#include "helpers.hpp"

using namespace amaa;
using amaa::testing::random_labels;

namespace {

LabelVolume line(std::vector<std::uint16_t> ids) {
  LabelVolume l(GridDims{1, 1, ids.size()});
  l.ids = std::move(ids);
  return l;
}

}  // namespace

TEST_SUITE("objective_metrics") {

TEST_CASE("mean IoU over the comparison-table rows") {
  CHECK(std::abs(mean_iou(fixtures::kMonoScene.class_iou) - 26.94) <= 0.005);
  CHECK(std::abs(mean_iou(fixtures::kLmscNet.class_iou) - 15.88) <= 0.005);
  // The third row does not average to its reported value.
  CHECK(std::abs(mean_iou(fixtures::kAmaa.class_iou) - 27.40) <= 0.005);
  CHECK_THROWS_AS(mean_iou({}), ConfigError);
}

TEST_CASE("scene completion IoU") {
  const LabelVolume t = line({0, 2, 1, 0});
  CHECK(metric_sc_iou(t, t) == 1.0);
  CHECK(metric_sc_iou(line({1, 0, 0, 0}), line({0, 0, 0, 2})) == 0.0);
  // pred {a, b}, truth {b, c}
  CHECK(std::abs(metric_sc_iou(line({1, 1, 0}), line({0, 1, 1})) - 1.0 / 3.0) <= 1e-15);
  CHECK(metric_sc_iou(line({0, 0}), line({0, 0})) == 1.0);
}

TEST_CASE("semantic IoU per class") {
  SplitMix64 rng(121);
  const LabelVolume t = random_labels(rng, 4, {2, 3, 3});
  const ClassIou same = metric_ssc_miou(t, t, 4);
  CHECK(same.per_class.size() == 3);
  for (double v : same.per_class) CHECK(v == 1.0);
  CHECK(same.miou == 1.0);

  const LabelVolume p = line({1, 1, 2, 0, 3});
  const LabelVolume q = line({1, 2, 2, 2, 0});
  const ClassIou r = metric_ssc_miou(p, q, 5);
  CHECK(r.per_class[0] == 0.5);        // class 1: tp 1, fp 1
  CHECK(r.per_class[1] == 1.0 / 3.0);  // class 2: tp 1, fn 2
  CHECK(r.per_class[2] == 0.0);        // class 3: fp 1
  CHECK(r.per_class[3] == 1.0);        // class 4: absent from both
}

TEST_CASE("precision and recall") {
  const LabelVolume t = line({0, 1, 2, 0});
  const PrecisionRecall same = metric_precision_recall(t, t);
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);
  const PrecisionRecall all = metric_precision_recall(line({1, 1, 1, 1, 1, 1, 1, 1}),
                                                      line({1, 1, 1, 1, 0, 0, 0, 0}));
  CHECK(all.precision == 0.5);
  CHECK(all.recall == 1.0);
  const PrecisionRecall none = metric_precision_recall(line({0, 0}), line({0, 3}));
  CHECK(none.precision == 1.0);
  CHECK(none.recall == 0.0);
}

TEST_CASE("swapping prediction and truth") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SplitMix64 rng(seed);
    const LabelVolume a = random_labels(rng, 4, {2, 2, 3}), b = random_labels(rng, 4, {2, 2, 3});
    CHECK(metric_sc_iou(a, b) == metric_sc_iou(b, a));
    CHECK(metric_ssc_miou(a, b, 4).per_class == metric_ssc_miou(b, a, 4).per_class);
    const auto ab = metric_precision_recall(a, b), ba = metric_precision_recall(b, a);
    CHECK(ab.precision == ba.recall);
    CHECK(ab.recall == ba.precision);
  }
}

TEST_CASE("accumulated report equals the report of the concatenation") {
  SplitMix64 rng(122);
  const LabelVolume p1 = random_labels(rng, 3, {1, 2, 4}), t1 = random_labels(rng, 3, {1, 2, 4});
  const LabelVolume p2 = random_labels(rng, 3, {1, 2, 4}), t2 = random_labels(rng, 3, {1, 2, 4});
  MetricsAccumulator acc(3);
  acc.add(p1, t1);
  acc.add(p2, t2);
  LabelVolume pc(GridDims{2, 2, 4}), tc(GridDims{2, 2, 4});
  for (std::size_t i = 0; i < 8; ++i) {
    pc.ids[i] = p1.ids[i];
    pc.ids[8 + i] = p2.ids[i];
    tc.ids[i] = t1.ids[i];
    tc.ids[8 + i] = t2.ids[i];
  }
  const MetricsReport r = acc.report();
  CHECK(r == compute_metrics(pc, tc, 3));
  double mean = 0.0;
  for (double v : r.class_iou) mean += v / 2.0;
  CHECK(r.miou == doctest::Approx(mean).epsilon(1e-15));
  for (double v : {r.sc_iou, r.miou, r.precision, r.recall}) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("masked voxels are left out of metrics") {
  LabelVolume t = line({1, 0, 2});
  t.mask = {1, 0, 1};
  const MetricsReport r = compute_metrics(line({1, 2, 2}), t, 3);
  CHECK(r.sc_iou == 1.0);
  CHECK(r.miou == 1.0);
}

TEST_CASE("serialisation") {
  const MetricsReport r = compute_metrics(line({1, 1, 2, 0}), line({1, 2, 2, 0}), 3);
  CHECK(metrics_csv_header(3) == "sc_iou,miou,precision,recall,iou_class_1,iou_class_2");
  const auto j = nlohmann::json::parse(metrics_json(r));
  CHECK(j.at("sc_iou").get<double>() == r.sc_iou);
  CHECK(j.at("class_iou").at(1).get<double>() == r.class_iou[1]);
  CHECK(j.at("counts").at("occupancy").at("tp").get<std::uint64_t>() == 3);
  CHECK(metrics_csv_row(r) == format_double(r.sc_iou) + "," + format_double(r.miou) + "," +
                                  format_double(r.precision) + "," + format_double(r.recall) +
                                  "," + format_double(r.class_iou[0]) + "," +
                                  format_double(r.class_iou[1]));
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
}

}  // TEST_SUITE
