#include <algorithm>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "gesture/segmenter.hpp"
#include "synthetic_fixture.hpp"

using namespace gesture;

namespace {

std::vector<double> random_scores(Rng& rng, int n) {
  // Smooth-ish random walk in [0, 1] so runs of every length occur.
  std::vector<double> s(n);
  double v = rng.uniform();
  for (double& x : s) {
    v = std::clamp(v + 0.25 * rng.normal(), 0.0, 1.0);
    x = v;
  }
  return s;
}

std::set<int> active_frames(const std::vector<ActivityPeriod>& periods) {
  std::set<int> out;
  for (const auto& p : periods)
    for (int t = p.start; t <= p.end; ++t) out.insert(t);
  return out;
}

}  // namespace

TEST(Candidates, BoundaryRule) {
  const std::vector<int> labels{0, 0, 3, 3, 3, 0, 0};
  const auto c = binary_candidates(labels);
  EXPECT_EQ(c.positives, (std::vector<int>{2, 3, 4}));
  EXPECT_EQ(c.negatives, (std::vector<int>{0, 1, 5, 6}));
  const auto narrow = binary_candidates(labels, 1);
  EXPECT_EQ(narrow.negatives, (std::vector<int>{1, 5}));
}

TEST(Candidates, AllRestHasNoPositives) {
  const std::vector<int> labels(40, 0);
  const auto c = binary_candidates(labels);
  EXPECT_TRUE(c.positives.empty());
  EXPECT_TRUE(c.negatives.empty());
}

TEST(Candidates, FarRestIsNotACandidate) {
  std::vector<int> labels(100, 0);
  for (int t = 50; t < 60; ++t) labels[t] = 4;
  const auto c = binary_candidates(labels);
  EXPECT_EQ(c.negatives.front(), 40);
  EXPECT_EQ(c.negatives.back(), 69);
  EXPECT_EQ(c.negatives.size(), 20u);
}

TEST(TrainingSet, ClassBalanceWithinOne) {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<LabeledDescriptors> data;
    for (int s = 0; s < 3; ++s) {
      const int n = rng.between(20, 120);
      auto labels = testing_support::random_run_labels(rng, n, 5);
      data.push_back({"s" + std::to_string(s), Matrix::Random(4, n), labels});
    }
    int pos = 0;
    for (const auto& d : data)
      pos += static_cast<int>(std::count_if(d.labels.begin(), d.labels.end(), [](int l) { return l != 0; }));
    if (pos == 0) continue;
    SegmenterConfig config;
    Rng sampler(trial);
    const auto set = build_binary_training_set(data, config, sampler);
    const long positives = static_cast<long>(set.targets.sum());
    const long negatives = set.targets.cols() - positives;
    EXPECT_EQ(positives, pos);
    EXPECT_LE(negatives, positives + 1);
    // Without enough candidates every candidate is kept.
    int candidates = 0;
    for (const auto& d : data) candidates += static_cast<int>(binary_candidates(d.labels).negatives.size());
    if (candidates >= pos) {
      EXPECT_GE(negatives, positives - 1);
    } else {
      EXPECT_EQ(negatives, candidates);
    }
  }
}

TEST(TrainingSet, MismatchedLengthsRejected) {
  std::vector<LabeledDescriptors> data{{"bad", Matrix::Zero(3, 5), FrameLabels(6, 1)}};
  Rng rng(1);
  EXPECT_THROW(build_binary_training_set(data, SegmenterConfig{}, rng), Error);
}

TEST(Loess, QuadraticSignalIsReproduced) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = rng.normal(), b = rng.normal(), c = rng.normal() * 0.01;
    const int n = rng.between(3, 80);
    std::vector<double> s(n);
    for (int t = 0; t < n; ++t) s[t] = a + b * t + c * t * t;
    for (int span : {5, 11, 21}) {
      const auto out = loess_smooth(s, span);
      for (int t = 0; t < n; ++t) EXPECT_NEAR(out[t], s[t], 1e-9) << "n " << n << " t " << t;
      const auto twice = loess_smooth(out, span);
      for (int t = 0; t < n; ++t) EXPECT_NEAR(twice[t], out[t], 1e-9);
    }
  }
}

TEST(Loess, ConstantStaysConstant) {
  const std::vector<double> s(30, 0.37);
  for (double v : loess_smooth(s, 11)) EXPECT_NEAR(v, 0.37, 1e-12);
}

TEST(Loess, ReducesWhiteNoiseVariance) {
  Rng rng(3);
  std::vector<double> s(10000);
  for (double& v : s) v = rng.normal();
  const auto out = loess_smooth(s, 11);
  auto variance = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / v.size();
  };
  EXPECT_LT(variance(out), variance(s));
  EXPECT_LT(variance(out), 0.6);
}

TEST(Periods, AllHighIsOnePeriod) {
  const std::vector<double> s(30, 0.9);
  EXPECT_EQ(extract_periods(s, SegmenterConfig{}), (std::vector<ActivityPeriod>{{0, 29}}));
}

TEST(Periods, ShortRunDropped) {
  std::vector<double> s(40, 0.1);
  for (int t = 15; t < 25; ++t) s[t] = 0.8;
  EXPECT_TRUE(extract_periods(s, SegmenterConfig{}).empty());
  for (int t = 25; t < 27; ++t) s[t] = 0.8;
  EXPECT_EQ(extract_periods(s, SegmenterConfig{}), (std::vector<ActivityPeriod>{{15, 26}}));
  s[26] = 0.1;
  EXPECT_TRUE(extract_periods(s, SegmenterConfig{}).empty());
}

TEST(Periods, TwoRunsTwoPeriods) {
  std::vector<double> s(50, 0.0);
  for (int t = 2; t < 17; ++t) s[t] = 0.7;
  for (int t = 30; t < 45; ++t) s[t] = 0.95;
  EXPECT_EQ(extract_periods(s, SegmenterConfig{}),
            (std::vector<ActivityPeriod>{{2, 16}, {30, 44}}));
}

TEST(Periods, ThresholdIsStrict) {
  std::vector<double> s(20, 0.4);
  EXPECT_TRUE(extract_periods(s, SegmenterConfig{}).empty());
  s.assign(20, std::nextafter(0.4, 1.0));
  EXPECT_EQ(extract_periods(s, SegmenterConfig{}).size(), 1u);
  // A frame at exactly the threshold splits a run.
  s.assign(30, 0.9);
  s[14] = 0.4;
  EXPECT_EQ(extract_periods(s, SegmenterConfig{}),
            (std::vector<ActivityPeriod>{{0, 13}, {15, 29}}));
}

TEST(Periods, SortedDisjointAndLongEnough) {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = random_scores(rng, rng.between(1, 200));
    SegmenterConfig c;
    c.min_period = rng.between(1, 15);
    const auto periods = extract_periods(s, c);
    for (std::size_t i = 0; i < periods.size(); ++i) {
      EXPECT_GE(periods[i].length(), c.min_period);
      if (i) {
        EXPECT_GT(periods[i].start, periods[i - 1].end + 1);
      }
      for (int t = periods[i].start; t <= periods[i].end; ++t) EXPECT_GT(s[t], c.threshold);
    }
  }
}

TEST(Periods, MonotoneInThreshold) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = random_scores(rng, rng.between(1, 200));
    SegmenterConfig lo, hi;
    lo.threshold = rng.uniform(0.05, 0.9);
    hi.threshold = lo.threshold + rng.uniform(0.0, 0.95 - lo.threshold);
    const auto a = active_frames(extract_periods(s, lo));
    for (int t : active_frames(extract_periods(s, hi))) EXPECT_TRUE(a.count(t)) << t;
  }
}

TEST(Periods, ActivityMaskCoversPeriods) {
  const std::vector<ActivityPeriod> p{{2, 4}, {7, 7}};
  EXPECT_EQ(activity_mask(p, 9), (std::vector<int>{0, 0, 1, 1, 1, 0, 0, 1, 0}));
}

TEST(SegmenterConfig, Validation) {
  SegmenterConfig c;
  c.threshold = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.loess_span = 10;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.negative_margin = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Segmenter, ArchitectureAndOutputRange) {
  const auto spec = segmenter_spec(kDescriptorWidth, SegmenterConfig{});
  EXPECT_EQ(spec.parameter_count(), 28601);
  nn::Mlp net(spec);
  Rng rng(6);
  net.initialize(rng);
  Matrix x(kDescriptorWidth, 50);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 30.0 * rng.normal();
  for (double v : frame_scores(net, x)) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  for (double v : frame_scores(net, Matrix::Random(kDescriptorWidth, 20))) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Segmenter, TrainsDeterministicallyOnSyntheticData) {
  const auto data = testing_support::synthetic_descriptors(testing_support::small_synth(4, 3));
  SegmenterConfig config;
  config.hidden1 = 16;
  config.hidden2 = 8;
  config.scg.max_iterations = 40;
  Rng r1(config.seed), r2(config.seed);
  const auto set = build_binary_training_set(data.sequences, config, r1);
  const auto set2 = build_binary_training_set(data.sequences, config, r2);
  EXPECT_EQ(set.inputs, set2.inputs);
  nn::OptimizationTrace trace;
  const auto a = train_segmenter(set, data.features, config, &trace);
  const auto b = train_segmenter(set, data.features, config);
  EXPECT_EQ(a.network.parameters(), b.network.parameters());
  EXPECT_LT(trace.loss.back(), 0.5 * trace.loss.front());

  const auto& seq = data.sequences.front();
  const auto seg = segment_sequence(a.network, seq.descriptors, config);
  const auto again = segment_sequence(b.network, seq.descriptors, config);
  EXPECT_EQ(seg.smoothed_scores, again.smoothed_scores);
  EXPECT_EQ(seg.periods, again.periods);
  const auto mask = activity_mask(seg.periods, static_cast<int>(seq.labels.size()));
  int agree = 0;
  for (std::size_t t = 0; t < mask.size(); ++t) agree += mask[t] == (seq.labels[t] != 0);
  EXPECT_GT(static_cast<double>(agree) / mask.size(), 0.8);
}
