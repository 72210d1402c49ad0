#include <sstream>

#include <gtest/gtest.h>

#include "gesture/io.hpp"
#include "gesture/skeleton.hpp"
#include "support.hpp"

using namespace gesture;

namespace {

std::string frame_line(int joints, double v = 0.0) {
  std::string s;
  for (int i = 0; i < 3 * joints; ++i) s += (i ? " " : "") + format_double(v);
  return s + "\n";
}

}  // namespace

TEST(Joints, ElevenStableCodes) {
  EXPECT_EQ(kNumJoints, 11);
  EXPECT_EQ(index(JointId::HipCenter), 0);
  EXPECT_EQ(index(JointId::HandRight), 10);
  EXPECT_EQ(kJointNames.size(), 11u);
}

TEST(Joints, BoneTreeIsRootedAndParentFirst) {
  std::array<bool, kNumJoints> reached{};
  reached[index(JointId::HipCenter)] = true;
  for (const Bone& b : kTreeBones) {
    EXPECT_TRUE(reached[index(b.parent)]) << kJointNames[index(b.parent)];
    EXPECT_FALSE(reached[index(b.child)]);
    reached[index(b.child)] = true;
  }
  for (bool r : reached) EXPECT_TRUE(r);
  EXPECT_EQ(kNumBones, 12);
  for (const Bone& b : kVirtualBones) EXPECT_EQ(b.child, JointId::HipCenter);
}

TEST(Labels, FromAnnotations) {
  EXPECT_EQ(labels_from_annotations({}, 5), (FrameLabels{0, 0, 0, 0, 0}));
  const std::vector<GestureAnnotation> one{{7, 2, 4}};
  EXPECT_EQ(labels_from_annotations(one, 6), (FrameLabels{0, 0, 7, 7, 7, 0}));
  const std::vector<GestureAnnotation> two{{3, 0, 1}, {5, 3, 4}};
  EXPECT_EQ(labels_from_annotations(two, 5), (FrameLabels{3, 3, 0, 5, 5}));
}

TEST(Labels, RejectsBadAnnotations) {
  const std::vector<GestureAnnotation> overlap{{1, 0, 3}, {2, 3, 5}};
  EXPECT_THROW(labels_from_annotations(overlap, 8), Error);
  const std::vector<GestureAnnotation> outside{{1, 4, 9}};
  EXPECT_THROW(labels_from_annotations(outside, 8), Error);
  const std::vector<GestureAnnotation> bad_class{{21, 0, 1}};
  EXPECT_THROW(labels_from_annotations(bad_class, 8), Error);
}

TEST(Labels, RunsRecoverAnnotationsProperty) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int length = rng.between(1, 80);
    std::vector<GestureAnnotation> ann;
    int t = rng.between(0, 4);
    int prev_class = 0;
    while (t < length) {
      const int len = rng.between(1, 10);
      const int end = std::min(length - 1, t + len - 1);
      int cls = rng.between(1, 20);
      // Adjacent annotations of one class would merge into a single run.
      if (!ann.empty() && ann.back().end_frame + 1 == t && cls == prev_class) cls = cls % 20 + 1;
      ann.push_back({cls, t, end});
      prev_class = cls;
      t = end + 1 + rng.between(0, 3);
    }
    EXPECT_EQ(annotations_from_labels(labels_from_annotations(ann, length)), ann);
  }
}

TEST(SequenceFile, ThreeZeroFramesWithoutLabels) {
  std::istringstream in("GSKEL 1 3 20 zeros\n" + frame_line(11) + frame_line(11) + frame_line(11));
  const auto s = read_sequence(in);
  EXPECT_EQ(s.sequence.size(), 3);
  EXPECT_EQ(s.sequence.id, "zeros");
  EXPECT_EQ(s.labels, (FrameLabels{0, 0, 0}));
  EXPECT_EQ(s.sequence.frames[2][10], Vec3::Zero());
}

TEST(SequenceFile, WrongJointCountNamesLine) {
  std::istringstream in("GSKEL 1 3 20 short\n" + frame_line(11) + frame_line(10) + frame_line(11));
  try {
    read_sequence(in);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::format);
    EXPECT_STREQ(e.what(), "wrong joint count at line 3");
  }
}

TEST(SequenceFile, RejectsMalformedContent) {
  auto fails = [](const std::string& text) {
    std::istringstream in(text);
    EXPECT_THROW(read_sequence(in), Error) << text;
  };
  fails("");
  fails("GSKEL 2 1 20 x\n" + frame_line(11));
  fails("GSKEL 1 0 20 x\n");
  fails("GSKEL 1 2 20 x\n" + frame_line(11));
  fails("GSKEL 1 1 20 x\n" + frame_line(11, std::nan("")));
  fails("GSKEL 1 1 20 x\n" + frame_line(11) + "LABELS\n21\n");
  fails("GSKEL 1 2 20 x\n" + frame_line(11) + frame_line(11) + "LABELS\n1\n");
  fails("GSKEL 1 1 20 x\n" + frame_line(11) + "LABELS\n1 2\n");
}

TEST(SequenceFile, SaveLoadIsBitExact) {
  testing_support::TempDir dir("io");
  SkeletonSequence seq = testing_support::jittered_skeleton(57, 11);
  seq.id = "roundtrip";
  seq.frames[3][4] = Vec3(1e-310, -0.1, 1.0 / 3.0);
  FrameLabels labels(57, 0);
  for (int t = 10; t < 30; ++t) labels[t] = 13;
  const auto path = (dir.path() / "s.gskel").string();
  save_sequence(path, seq, &labels);
  const auto back = load_sequence(path);
  EXPECT_EQ(back.labels, labels);
  EXPECT_EQ(back.sequence.id, seq.id);
  ASSERT_EQ(back.sequence.size(), seq.size());
  for (int t = 0; t < seq.size(); ++t)
    for (int j = 0; j < kNumJoints; ++j)
      for (int c = 0; c < 3; ++c) EXPECT_EQ(back.sequence.frames[t][j][c], seq.frames[t][j][c]);
}

TEST(SequenceFile, LoadErrorCarriesPath) {
  try {
    load_sequence("/nonexistent/file.gskel");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::io);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/file.gskel"), std::string::npos);
  }
}

TEST(DescriptorDump, RoundTripAndTruncation) {
  Matrix m = Matrix::Random(183, 7);
  std::stringstream buf;
  write_descriptors(buf, m);
  const std::string text = buf.str();
  std::istringstream in(text);
  EXPECT_EQ(read_descriptors(in), m);
  std::istringstream cut(text.substr(0, text.size() - 8));
  EXPECT_THROW(read_descriptors(cut), Error);
}

TEST(LabelDump, RoundTrip) {
  FrameLabels labels(95, 0);
  for (int t = 40; t < 90; ++t) labels[t] = 20;
  std::stringstream buf;
  write_label_dump(buf, "seq7", labels);
  const auto [id, back] = read_label_dump(buf);
  EXPECT_EQ(id, "seq7");
  EXPECT_EQ(back, labels);
}
