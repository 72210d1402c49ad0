#pragma once

#include <vector>

#include "gesture/descriptor.hpp"
#include "gesture/segmenter.hpp"
#include "gesture/synth.hpp"
#include "support.hpp"

namespace testing_support {

struct SyntheticDescriptors {
  gesture::FeatureContext features;
  std::vector<gesture::LabeledDescriptors> sequences;
};

/// Standardized descriptors of a small synthetic set. The feature context is
/// fit on the set itself unless one is given.
inline SyntheticDescriptors synthetic_descriptors(const gesture::SynthConfig& config,
                                                  const gesture::FeatureContext* fitted = nullptr) {
  using namespace gesture;
  const auto samples = generate_synthetic(config);
  std::vector<SkeletonSequence> skeletons;
  for (const auto& s : samples) skeletons.push_back(s.sequence);
  SyntheticDescriptors out;
  out.features.bone_lengths = fitted ? fitted->bone_lengths : mean_bone_lengths(skeletons);
  std::vector<Matrix> raw;
  for (const auto& s : samples) raw.push_back(build_descriptors(s.sequence, out.features.bone_lengths));
  out.features.standardizer = fitted ? fitted->standardizer : Standardizer::fit(raw);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.features.standardizer.apply(raw[i]);
    out.sequences.push_back({samples[i].sequence.id, raw[i], samples[i].labels});
  }
  return out;
}

inline gesture::SynthConfig small_synth(int n_sequences, int gestures, std::uint64_t seed = 42) {
  gesture::SynthConfig c;
  c.n_sequences = n_sequences;
  c.gestures_per_sequence = gestures;
  c.seed = seed;
  return c;
}

}  // namespace testing_support
