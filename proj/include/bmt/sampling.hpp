#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bmt/features.hpp"

namespace bmt {

// Anchor frame i reconstructs neighbor j of the same source, 1 <= |i-j| <= k.
struct ContextPair {
  std::string source_id;
  int anchor = 0;
  int target = 0;
};

// (anchor, positive) from source a; (negative, negative's neighbor) from a
// different source. Both pairs satisfy the stationarity bound.
struct TripletTuple {
  std::string source_a;
  int anchor = 0;
  int positive = 0;
  std::string source_b;
  int negative = 0;
  int negative_pair = 0;
};

struct SamplerConfig {
  double k_seconds = 6.0;   // max shift inside a stationary region
  int n_context = 4;        // positives per anchor
  std::uint64_t seed = 0;

  int k_frames(double shift_s) const;
};

// Every frame anchors once; neighbors drawn uniformly without replacement
// from {a-k,...,a+k}\{a} clipped to the sequence. Returns empty (caller
// records the warning) when the sequence is too short.
std::vector<ContextPair> sample_context_pairs(const FrameSequence& seq,
                                              const SamplerConfig& cfg);

// One tuple per context pair; negative source drawn uniformly among the other
// files, (n, np) drawn under the same stationarity bound.
std::vector<TripletTuple> sample_triplet_tuples(const std::vector<FrameSequence>& corpus,
                                                const SamplerConfig& cfg);

// Line-oriented manifest, one tuple per line: "A_id a p B_id n np".
std::string format_tuple_manifest(const std::vector<TripletTuple>& tuples);
void write_tuple_manifest(const std::filesystem::path& path,
                          const std::vector<TripletTuple>& tuples);
std::vector<TripletTuple> read_tuple_manifest(const std::filesystem::path& path);

}  // namespace bmt
