#include <gtest/gtest.h>

#include <sstream>

#include "qfp/detector.hpp"
#include "qfp/error.hpp"
#include "qfp/simulator.hpp"

namespace qfp {
namespace {

QueryRecord record(const QueryImage& img, QueryLabel label, std::uint64_t ts) {
  return QueryRecord{img, label, ts};
}

Verdict verdict(QueryLabel label, bool flagged, bool mitigation = true) {
  Verdict v;
  v.label = label;
  v.flagged = flagged;
  v.action = flagged && mitigation ? Action::kRejected : Action::kForwarded;
  return v;
}

TEST(Detector, RejectsDuplicateWhenMitigating) {
  DetectorConfig cfg;
  Detector det(cfg, true, seeded_salt_source(1));
  const auto img = sim::smoothed_noise(Dims{}, 1);
  const auto a = det.process(record(img, QueryLabel::benign(), 0));
  const auto b = det.process(record(img, QueryLabel::benign(), 1));
  EXPECT_FALSE(a.flagged);
  EXPECT_EQ(a.action, Action::kForwarded);
  EXPECT_TRUE(b.flagged);
  EXPECT_EQ(b.overlap, 50u);
  EXPECT_EQ(b.action, Action::kRejected);
}

TEST(Detector, ForwardsFlaggedWithoutMitigation) {
  Detector det(DetectorConfig{}, false, seeded_salt_source(1));
  const auto img = sim::smoothed_noise(Dims{}, 2);
  det.process(record(img, QueryLabel::benign(), 0));
  const auto v = det.process(record(img, QueryLabel::benign(), 1));
  EXPECT_TRUE(v.flagged);
  EXPECT_EQ(v.action, Action::kForwarded);
}

TEST(Detector, ResetForgetsPriorQueries) {
  DetectorConfig cfg;
  cfg.reset_interval = 2;
  Detector det(cfg, true, seeded_salt_source(3));
  const auto img = sim::smoothed_noise(Dims{}, 3);
  const auto other = sim::smoothed_noise(Dims{}, 4);
  std::vector<Verdict> v;
  v.push_back(det.process(record(img, QueryLabel::benign(), 0)));
  v.push_back(det.process(record(other, QueryLabel::benign(), 1)));
  v.push_back(det.process(record(img, QueryLabel::benign(), 2)));
  v.push_back(det.process(record(img, QueryLabel::benign(), 3)));
  EXPECT_EQ(v[0].epoch, 0u);
  EXPECT_EQ(v[2].epoch, 1u);
  EXPECT_FALSE(v[2].flagged);
  EXPECT_TRUE(v[3].flagged);
  std::ostringstream csv;
  write_verdict_csv(csv, v);
  EXPECT_NE(csv.str().find(",rejected,1\n"), std::string::npos);
}

TEST(Detector, SmallImageBecomesErrorVerdict) {
  Detector det(DetectorConfig{}, true, seeded_salt_source(1));
  const auto v = det.process(record(QueryImage(2, 2, 1), QueryLabel::benign(), 0));
  EXPECT_EQ(v.action, Action::kError);
  EXPECT_FALSE(v.error.empty());
  EXPECT_EQ(det.processed(), 1u);
}

TEST(Metrics, PerTraceFields) {
  std::vector<Verdict> v{
      verdict(QueryLabel::attack_step(0, 0), false),
      verdict(QueryLabel::benign(), false),
      verdict(QueryLabel::attack_step(0, 1), true),
      verdict(QueryLabel::attack_step(1, 0), false),
      verdict(QueryLabel::attack_step(0, 2), true),
      verdict(QueryLabel::attack_step(1, 1), false),
      verdict(QueryLabel::attack_step(0, 3), false),
      verdict(QueryLabel::benign(), true),
  };
  const auto r = compute_metrics(v);
  ASSERT_EQ(r.traces.size(), 2u);
  EXPECT_TRUE(r.traces[0].detected);
  EXPECT_EQ(r.traces[0].queries_to_detect, 2u);
  EXPECT_DOUBLE_EQ(r.traces[0].coverage, 0.5);
  EXPECT_EQ(r.traces[0].forwarded, 2u);
  EXPECT_FALSE(r.traces[1].detected);
  EXPECT_EQ(r.traces[1].queries_to_detect, 0u);
  EXPECT_EQ(*r.attack_detection_rate, 0.5);
  EXPECT_EQ(*r.mean_queries_to_detect, 2.0);
  EXPECT_EQ(*r.mean_coverage, 0.25);
  EXPECT_EQ(*r.false_positive_rate, 0.5);
  // Trace 1 forwarded everything; trace 0 did not.
  EXPECT_EQ(*r.attack_success_with_mitigation, 0.5);
  EXPECT_EQ(compute_metrics(v), r);
}

TEST(Metrics, StepOrderNotTimestampOrder) {
  std::vector<Verdict> v{
      verdict(QueryLabel::attack_step(0, 2), true),
      verdict(QueryLabel::attack_step(0, 0), false),
      verdict(QueryLabel::attack_step(0, 1), false),
  };
  EXPECT_EQ(compute_metrics(v).traces[0].queries_to_detect, 3u);
}

TEST(Metrics, RequiredProgressOverride) {
  std::vector<Verdict> v{
      verdict(QueryLabel::attack_step(0, 0), false),
      verdict(QueryLabel::attack_step(0, 1), true),
      verdict(QueryLabel::attack_step(0, 2), false),
  };
  EXPECT_EQ(*compute_metrics(v).attack_success_with_mitigation, 0.0);
  EXPECT_EQ(*compute_metrics(v, {{0, 2}}).attack_success_with_mitigation, 1.0);
}

TEST(Metrics, EmptyPopulationsAreNull) {
  const auto r = compute_metrics(std::vector<Verdict>{});
  EXPECT_FALSE(r.attack_detection_rate);
  EXPECT_FALSE(r.false_positive_rate);
  EXPECT_FALSE(r.mean_queries_to_detect);
  const auto j = report_to_json(r);
  EXPECT_NE(j.find("\"false_positive_rate\": null"), std::string::npos);
}

TEST(Metrics, LabelCountMismatch) {
  std::vector<Verdict> v(3);
  std::vector<QueryLabel> labels(2);
  try {
    compute_metrics(v, labels);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingLabels);
  }
}

TEST(Metrics, JsonRoundTrip) {
  std::vector<Verdict> v{
      verdict(QueryLabel::attack_step(3, 0), false),
      verdict(QueryLabel::attack_step(3, 1), true),
      verdict(QueryLabel::attack_step(3, 2), true),
      verdict(QueryLabel::benign(), false),
  };
  const auto r = compute_metrics(v);
  EXPECT_EQ(report_from_json(report_to_json(r)), r);
  EXPECT_EQ(report_to_json(report_from_json(report_to_json(r))), report_to_json(r));
  EXPECT_THROW(report_from_json("{"), Error);
}

TEST(Metrics, ReportCsvShape) {
  std::vector<Verdict> v{verdict(QueryLabel::attack_step(0, 0), false),
                         verdict(QueryLabel::attack_step(0, 1), true)};
  std::ostringstream out;
  write_report_csv(out, compute_metrics(v));
  EXPECT_EQ(out.str(),
            "trace_id,detected,queries_to_detect,coverage\n"
            "0,1,2,0.5\n"
            "summary,1,2,0.5\n");
}

}  // namespace
}  // namespace qfp
