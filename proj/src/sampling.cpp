#include "bmt/sampling.hpp"

#include <cmath>
#include <sstream>

#include "bmt/common.hpp"
#include "bmt/io_util.hpp"
#include "bmt/rng.hpp"

namespace bmt {

int SamplerConfig::k_frames(double shift_s) const {
  require(k_seconds > 0 && shift_s > 0, "k_seconds and shift must be positive");
  const int k = static_cast<int>(std::lround(k_seconds / shift_s));
  require(k >= 1, "k_seconds smaller than one frame shift");
  return k;
}

namespace {

std::vector<int> neighbor_candidates(int anchor, int k, int n_frames) {
  std::vector<int> cand;
  cand.reserve(2 * k);
  for (int j = anchor - k; j <= anchor + k; ++j)
    if (j != anchor && j >= 0 && j < n_frames) cand.push_back(j);
  return cand;
}

}  // namespace

std::vector<ContextPair> sample_context_pairs(const FrameSequence& seq,
                                              const SamplerConfig& cfg) {
  require(cfg.n_context >= 1, "n_context must be >= 1");
  const int k = cfg.k_frames(seq.shift_s);
  const auto n_frames = static_cast<int>(seq.size());
  if (n_frames <= k + 1) return {};  // too short, caller records a warning

  Rng rng(derive_stream_seed(cfg.seed, seq.source_id));
  std::vector<ContextPair> pairs;
  pairs.reserve(static_cast<std::size_t>(n_frames) * cfg.n_context);
  for (int a = 0; a < n_frames; ++a) {
    const auto cand = neighbor_candidates(a, k, n_frames);
    const auto picked =
        rng.sample_without_replacement(cand, static_cast<std::size_t>(cfg.n_context));
    for (int j : picked) pairs.push_back({seq.source_id, a, j});
  }
  return pairs;
}

std::vector<TripletTuple> sample_triplet_tuples(const std::vector<FrameSequence>& corpus,
                                                const SamplerConfig& cfg) {
  require(corpus.size() >= 2, "triplet sampling requires >=2 sources");

  // Files long enough to host a (n, np) pair.
  std::vector<int> usable;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const int k = cfg.k_frames(corpus[i].shift_s);
    if (static_cast<int>(corpus[i].size()) > k + 1) usable.push_back(static_cast<int>(i));
  }
  require(usable.size() >= 2, "triplet sampling requires >=2 sources long enough for k");

  std::vector<TripletTuple> tuples;
  for (int ai : usable) {
    const FrameSequence& seq_a = corpus[ai];
    const auto pairs = sample_context_pairs(seq_a, cfg);
    // Negative draws come from a per-file substream so files can be sampled
    // in parallel without changing the output.
    Rng rng(derive_stream_seed(cfg.seed, seq_a.source_id + "#neg"));
    for (const auto& pr : pairs) {
      int bi = usable[static_cast<std::size_t>(rng.below(usable.size()))];
      while (bi == ai) bi = usable[static_cast<std::size_t>(rng.below(usable.size()))];
      const FrameSequence& seq_b = corpus[static_cast<std::size_t>(bi)];
      const int kb = cfg.k_frames(seq_b.shift_s);
      const int n = static_cast<int>(rng.below(static_cast<std::uint64_t>(seq_b.size())));
      const auto cand = neighbor_candidates(n, kb, static_cast<int>(seq_b.size()));
      const int np = cand[static_cast<std::size_t>(rng.below(cand.size()))];
      tuples.push_back({pr.source_id, pr.anchor, pr.target, seq_b.source_id, n, np});
    }
  }
  return tuples;
}

std::string format_tuple_manifest(const std::vector<TripletTuple>& tuples) {
  std::ostringstream os;
  for (const auto& t : tuples)
    os << t.source_a << ' ' << t.anchor << ' ' << t.positive << ' ' << t.source_b << ' '
       << t.negative << ' ' << t.negative_pair << '\n';
  return os.str();
}

void write_tuple_manifest(const std::filesystem::path& path,
                          const std::vector<TripletTuple>& tuples) {
  atomic_write_text(path, format_tuple_manifest(tuples));
}

std::vector<TripletTuple> read_tuple_manifest(const std::filesystem::path& path) {
  std::vector<TripletTuple> tuples;
  for (const auto& line : read_manifest_lines(path)) {
    std::istringstream is(line);
    TripletTuple t;
    is >> t.source_a >> t.anchor >> t.positive >> t.source_b >> t.negative >>
        t.negative_pair;
    require(!is.fail(), "malformed tuple manifest line: " + line);
    tuples.push_back(std::move(t));
  }
  require(!tuples.empty(), "empty tuple manifest: " + path.string());
  return tuples;
}

}  // namespace bmt
