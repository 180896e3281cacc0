// bmt: behavior-manifold toolkit. Pipeline stages as subcommands:
//   extract  wav -> analysis-frame feature files
//   synth    synthetic benchmark corpora (feature-space or audio mode)
//   sample   feature dir -> triplet tuple manifest
//   train    tuples + features -> checkpoint
//   embed    checkpoint + features -> 64-dim embedding files
//   eval-knn 1-NN leave-one-group-out session classification
//   trajectory per-frame top-N positive-neighbor scores over a session
//   confusion  cross-file nearest-neighbor similarity matrix

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bmt/common.hpp"
#include "bmt/evaluation.hpp"
#include "bmt/feature_io.hpp"
#include "bmt/io_util.hpp"
#include "bmt/manifest.hpp"
#include "bmt/model.hpp"
#include "bmt/parallel.hpp"
#include "bmt/sampling.hpp"
#include "bmt/svg.hpp"
#include "bmt/synth.hpp"
#include "bmt/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunTimer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

bmt::RunManifest make_manifest(const CLI::App& app, const std::string& command,
                               const std::vector<std::string>& argv,
                               std::uint64_t seed) {
  bmt::RunManifest m;
  m.command = command;
  m.argv = argv;
  m.config_hash = bmt::sha256_hex(command + "\n" +
                                  const_cast<CLI::App&>(app).config_to_str(true, false));
  m.seed = seed;
  m.timestamp_utc = bmt::utc_timestamp_now();
  return m;
}

void add_input_digest(bmt::RunManifest& m, const fs::path& p) {
  m.input_digests.emplace_back(p.string(), bmt::sha256_file_hex(p));
}

void add_dir_digests(bmt::RunManifest& m, const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) add_input_digest(m, p);
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(csv);
  while (std::getline(is, cur, ',')) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct ExtractOpts {
  std::string in;
  std::string out_dir;
  double window_s = 20.0;
  double shift_s = 1.0;
  bool csv = false;
  int jobs = bmt::default_jobs();
};

void run_extract(const ExtractOpts& o, bmt::RunManifest manifest) {
  RunTimer timer;
  std::vector<fs::path> wavs;
  const fs::path in(o.in);
  bmt::require(fs::exists(in), "input not found: " + o.in);
  if (in.extension() == ".wav") {
    wavs.push_back(in);
  } else {
    for (const auto& line : bmt::read_manifest_lines(in)) wavs.emplace_back(line);
    bmt::require(!wavs.empty(), "empty input manifest: " + o.in);
  }
  std::set<std::string> stems;
  for (const auto& w : wavs) {
    bmt::require(fs::exists(w), "input not found: " + w.string());
    bmt::require(stems.insert(w.stem().string()).second,
                 "duplicate input stem: " + w.stem().string());
    add_input_digest(manifest, w);
  }

  fs::create_directories(o.out_dir);
  const bmt::LldConfig lld_cfg;
  const auto names = bmt::feature_column_names(lld_cfg);
  std::vector<std::string> failures(wavs.size());
  bmt::parallel_for(wavs.size(), o.jobs, [&](std::size_t i) {
    try {
      const bmt::AudioBuffer audio = bmt::read_wav(wavs[i]);
      const auto seq = bmt::extract_features(audio, lld_cfg, o.window_s, o.shift_s,
                                             wavs[i].stem().string());
      const fs::path out = fs::path(o.out_dir) / (seq.source_id + bmt::kFeatureFileExt);
      bmt::write_feature_file(out, seq);
      if (o.csv)
        bmt::write_feature_csv(fs::path(o.out_dir) / (seq.source_id + ".csv"), seq, names);
    } catch (const std::exception& e) {
      failures[i] = wavs[i].string() + ": " + e.what();
    }
  });
  for (const auto& f : failures)
    if (!f.empty()) throw bmt::InputError(f);

  manifest.wall_time_s = timer.seconds();
  bmt::write_run_manifest(fs::path(o.out_dir) / "run_manifest.json", manifest);
  std::cerr << "extracted " << wavs.size() << " file(s) -> " << o.out_dir << "\n";
}

// ---------------------------------------------------------------------------

struct SynthOpts {
  bmt::SynthConfig cfg;
  std::string out_dir;
  bool audio = false;
  bool csv = false;
};

void run_synth(const SynthOpts& o, bmt::RunManifest manifest) {
  RunTimer timer;
  const fs::path out(o.out_dir);
  fs::create_directories(out);

  std::ostringstream states_csv;
  states_csv << "session_id,t_start_s,state\n";

  if (o.audio) {
    const auto corpus = bmt::generate_audio(o.cfg);
    fs::create_directories(out / "audio");
    for (std::size_t f = 0; f < corpus.audio.size(); ++f) {
      const std::string id = bmt::synth_file_id(static_cast<int>(f), o.cfg.n_files);
      bmt::write_wav(out / "audio" / (id + ".wav"), corpus.audio[f]);
      for (std::size_t i = 0; i < corpus.frame_states[f].size(); ++i)
        states_csv << id << ',' << static_cast<double>(i) * o.cfg.shift_s << ','
                   << corpus.frame_states[f][i] << '\n';
    }
    bmt::write_labels_csv(out / "labels.csv", corpus.labels);
  } else {
    const auto corpus = bmt::generate(o.cfg);
    fs::create_directories(out / "features");
    for (std::size_t f = 0; f < corpus.files.size(); ++f) {
      const auto& seq = corpus.files[f];
      bmt::write_feature_file(out / "features" / (seq.source_id + bmt::kFeatureFileExt), seq);
      if (o.csv) {
        std::vector<std::string> names;
        for (int d = 0; d < o.cfg.dim; ++d) names.push_back("f" + std::to_string(d));
        bmt::write_feature_csv(out / "features" / (seq.source_id + ".csv"), seq, names);
      }
      for (std::size_t i = 0; i < corpus.frame_states[f].size(); ++i)
        states_csv << seq.source_id << ',' << seq.t_start(static_cast<Eigen::Index>(i))
                   << ',' << corpus.frame_states[f][i] << '\n';
    }
    bmt::write_labels_csv(out / "labels.csv", corpus.labels);

    json report;
    report["n_files"] = o.cfg.n_files;
    report["file_duration_s"] = o.cfg.file_duration_s;
    report["behavior_dwell_s"] = o.cfg.behavior_dwell_s;
    report["n_states"] = o.cfg.n_states;
    report["nuisance_strength"] = o.cfg.nuisance_strength;
    report["noise_sigma"] = o.cfg.noise_sigma;
    report["seed"] = o.cfg.seed;
    report["stationarity_prob_k6"] = corpus.stationarity_prob;
    json fr = json::array();
    for (const auto& v : corpus.state_fractions) fr.push_back(v);
    report["state_fractions"] = fr;
    bmt::atomic_write_text(out / "report.json", report.dump(2) + "\n");
  }
  bmt::atomic_write_text(out / "states.csv", states_csv.str());

  manifest.wall_time_s = timer.seconds();
  bmt::write_run_manifest(out / "run_manifest.json", manifest);
  std::cerr << "synthesized " << o.cfg.n_files << " file(s) -> " << o.out_dir << "\n";
}

// ---------------------------------------------------------------------------

struct SampleOpts {
  std::string features_dir;
  bmt::SamplerConfig cfg;
  std::string out;
};

void run_sample(const SampleOpts& o, bmt::RunManifest manifest) {
  RunTimer timer;
  add_dir_digests(manifest, o.features_dir, bmt::kFeatureFileExt);
  const auto corpus = bmt::read_feature_dir(o.features_dir);
  for (const auto& seq : corpus) {
    const int k = o.cfg.k_frames(seq.shift_s);
    if (static_cast<int>(seq.size()) <= k + 1)
      std::cerr << "warning: skipping short file " << seq.source_id << " (" << seq.size()
                << " frames <= k+1)\n";
  }
  const auto tuples = bmt::sample_triplet_tuples(corpus, o.cfg);
  bmt::write_tuple_manifest(o.out, tuples);
  manifest.wall_time_s = timer.seconds();
  bmt::write_run_manifest(o.out + ".run.json", manifest);
  std::cerr << "sampled " << tuples.size() << " tuples -> " << o.out << "\n";
}

// ---------------------------------------------------------------------------

struct TrainOpts {
  std::string tuples;
  std::string features_dir;
  std::string variant = "te-dcn";
  std::string val_files;  // comma-separated source ids
  bmt::TrainConfig cfg;
  std::string out;
  bool quiet = false;
};

void run_train(const TrainOpts& o, bmt::RunManifest manifest) {
  RunTimer timer;
  add_input_digest(manifest, o.tuples);
  add_dir_digests(manifest, o.features_dir, bmt::kFeatureFileExt);

  const auto corpus = bmt::read_feature_dir(o.features_dir);
  const auto all_tuples = bmt::read_tuple_manifest(o.tuples);
  const auto val_list = split_list(o.val_files);
  bmt::require(!val_list.empty(), "--val-files requires at least one source id");
  const std::set<std::string> val_set(val_list.begin(), val_list.end());

  std::vector<bmt::TripletTuple> train_tuples, val_tuples;
  std::size_t dropped = 0;
  for (const auto& t : all_tuples) {
    const bool a_val = val_set.count(t.source_a) > 0;
    const bool b_val = val_set.count(t.source_b) > 0;
    if (a_val && b_val)
      val_tuples.push_back(t);
    else if (!a_val && !b_val)
      train_tuples.push_back(t);
    else
      ++dropped;  // tuples straddling the split would leak validation frames
  }
  if (dropped > 0)
    std::cerr << "dropped " << dropped << " tuples straddling the train/val split\n";

  const auto variant = bmt::variant_from_name(o.variant);
  const auto ckpt = bmt::train(corpus, train_tuples, val_tuples, o.cfg, variant,
                               o.quiet ? nullptr : &std::cerr);
  bmt::save_checkpoint(o.out, ckpt);
  manifest.wall_time_s = timer.seconds();
  bmt::write_run_manifest(o.out + ".run.json", manifest);
  std::cerr << "trained " << o.variant << ": best epoch " << ckpt.best_epoch
            << ", val loss " << ckpt.val_history[static_cast<std::size_t>(ckpt.best_epoch)]
            << " -> " << o.out << "\n";
}

// ---------------------------------------------------------------------------

struct EmbedOpts {
  std::string ckpt;
  std::string features_dir;
  std::string out_dir;
  int jobs = bmt::default_jobs();
};

void run_embed(const EmbedOpts& o, bmt::RunManifest manifest) {
  RunTimer timer;
  add_input_digest(manifest, o.ckpt);
  add_dir_digests(manifest, o.features_dir, bmt::kFeatureFileExt);

  const auto ckpt = bmt::load_checkpoint(o.ckpt);
  const auto corpus = bmt::read_feature_dir(o.features_dir);
  fs::create_directories(o.out_dir);
  std::vector<std::string> failures(corpus.size());
  bmt::parallel_for(corpus.size(), o.jobs, [&](std::size_t i) {
    try {
      bmt::FrameSequence emb;
      emb.values = bmt::embed_frames(ckpt, corpus[i]);
      emb.window_s = corpus[i].window_s;
      emb.shift_s = corpus[i].shift_s;
      emb.source_id = corpus[i].source_id;
      bmt::write_feature_file(
          fs::path(o.out_dir) / (emb.source_id + bmt::kFeatureFileExt), emb);
    } catch (const std::exception& e) {
      failures[i] = corpus[i].source_id + ": " + e.what();
    }
  });
  for (const auto& f : failures)
    if (!f.empty()) throw bmt::InputError(f);

  manifest.wall_time_s = timer.seconds();
  bmt::write_run_manifest(fs::path(o.out_dir) / "run_manifest.json", manifest);
  std::cerr << "embedded " << corpus.size() << " file(s) -> " << o.out_dir << "\n";
}

// ---------------------------------------------------------------------------

struct EvalOpts {
  std::string embeddings_dir;
  std::string labels;
  std::string codes;  // comma-separated; empty = all codes in the labels file
  int balance = 0;    // per-class session count, 0 = use everything
  std::uint64_t seed = 0;
  std::string out_dir;
  int jobs = bmt::default_jobs();
};

void run_eval(const EvalOpts& o, bmt::RunManifest manifest) {
  RunTimer timer;
  add_input_digest(manifest, o.labels);
  add_dir_digests(manifest, o.embeddings_dir, bmt::kFeatureFileExt);

  const auto sessions = bmt::load_sessions(o.embeddings_dir, o.labels);
  std::vector<std::string> codes = split_list(o.codes);
  if (codes.empty()) {
    std::set<std::string> all;
    for (const auto& s : sessions)
      for (const auto& [code, _] : s.labels) all.insert(code);
    codes.assign(all.begin(), all.end());
  }
  bmt::require(!codes.empty(), "no behavior codes found in labels");

  fs::create_directories(o.out_dir);
  std::ostringstream pred_csv;
  pred_csv << "code,session_id,group_id,true_label,predicted,pos_votes,total_votes\n";
  json acc;
  double acc_sum = 0.0;

  // one shared distance scan when every code sees the same session set
  bool shared_scan = (o.balance == 0);
  std::vector<bmt::SessionRecord> all_labeled;
  for (const auto& s : sessions) {
    const bool has_all = std::all_of(codes.begin(), codes.end(), [&](const auto& c) {
      return s.labels.count(c) > 0;
    });
    const bool has_any = std::any_of(codes.begin(), codes.end(), [&](const auto& c) {
      return s.labels.count(c) > 0;
    });
    if (has_all)
      all_labeled.push_back(s);
    else if (has_any)
      shared_scan = false;
  }

  auto record = [&](const std::string& code, const bmt::ClassifyResult& result) {
    for (const auto& p : result.sessions)
      pred_csv << code << ',' << p.session_id << ',' << p.group_id << ',' << p.true_label
               << ',' << p.predicted << ',' << p.pos_votes << ',' << p.total_votes << '\n';
    acc["codes"][code] = {{"accuracy", result.accuracy},
                          {"n_sessions", result.sessions.size()},
                          {"tp", result.tp},
                          {"tn", result.tn},
                          {"fp", result.fp},
                          {"fn", result.fn}};
    acc_sum += result.accuracy;
    std::cerr << "code " << code << ": accuracy " << result.accuracy << " over "
              << result.sessions.size() << " sessions\n";
  };

  if (shared_scan && !all_labeled.empty()) {
    const auto plan = bmt::build_fold_plan(all_labeled);
    const auto results = bmt::classify_sessions_multi(all_labeled, codes, plan, o.jobs);
    for (std::size_t c = 0; c < codes.size(); ++c) record(codes[c], results[c]);
  } else {
    for (const auto& code : codes) {
      std::vector<bmt::SessionRecord> labeled;
      for (const auto& s : sessions)
        if (s.labels.count(code)) labeled.push_back(s);
      bmt::require(!labeled.empty(), "no sessions labeled for code " + code);
      if (o.balance > 0) labeled = bmt::select_balanced(labeled, code, o.balance, o.seed);
      const auto plan = bmt::build_fold_plan(labeled);
      record(code, bmt::classify_sessions(labeled, code, plan, o.jobs));
    }
  }
  acc["average_accuracy"] = acc_sum / static_cast<double>(codes.size());

  bmt::atomic_write_text(fs::path(o.out_dir) / "predictions.csv", pred_csv.str());
  bmt::atomic_write_text(fs::path(o.out_dir) / "accuracy.json", acc.dump(2) + "\n");
  manifest.wall_time_s = timer.seconds();
  bmt::write_run_manifest(fs::path(o.out_dir) / "run_manifest.json", manifest);
  std::cerr << "average accuracy " << acc["average_accuracy"] << " -> " << o.out_dir << "\n";
}

// ---------------------------------------------------------------------------

struct TrajectoryOpts {
  std::string embeddings_dir;
  std::string labels;
  std::string session;
  int top_n = 60;
  std::string out;
  std::string svg;
  int jobs = bmt::default_jobs();
};

void run_trajectory(const TrajectoryOpts& o, bmt::RunManifest manifest) {
  RunTimer timer;
  add_input_digest(manifest, o.labels);
  add_dir_digests(manifest, o.embeddings_dir, bmt::kFeatureFileExt);

  const auto sessions = bmt::load_sessions(o.embeddings_dir, o.labels);
  const bmt::SessionRecord* query = nullptr;
  for (const auto& s : sessions)
    if (s.session_id == o.session) query = &s;
  bmt::require(query != nullptr, "session not found: " + o.session);

  std::set<std::string> codes;
  for (const auto& s : sessions)
    for (const auto& [code, _] : s.labels) codes.insert(code);
  bmt::require(!codes.empty(), "no behavior codes found in labels");

  std::ostringstream csv;
  csv << "t_start_s,code,score\n";
  std::vector<double> t_axis;
  for (Eigen::Index i = 0; i < query->frames.rows(); ++i)
    t_axis.push_back(static_cast<double>(i) * query->shift_s);

  std::vector<bmt::SvgSeries> series;
  for (const auto& code : codes) {
    bmt::ReferenceSet refs;
    Eigen::Index n_ref = 0;
    for (const auto& s : sessions)
      if (s.group_id != query->group_id && s.labels.count(code)) n_ref += s.frames.rows();
    bmt::require(n_ref > 0, "no reference frames outside group for code " + code);
    refs.vectors.resize(n_ref, query->frames.cols());
    Eigen::Index at = 0;
    for (const auto& s : sessions) {
      if (s.group_id == query->group_id || !s.labels.count(code)) continue;
      refs.vectors.middleRows(at, s.frames.rows()) = s.frames;
      at += s.frames.rows();
      refs.labels.insert(refs.labels.end(), static_cast<std::size_t>(s.frames.rows()),
                         s.labels.at(code));
    }
    const auto scores = bmt::trajectory_scores(query->frames, refs, o.top_n, o.jobs);
    for (std::size_t i = 0; i < scores.size(); ++i)
      csv << t_axis[i] << ',' << code << ',' << scores[i] << '\n';
    series.push_back({code, scores});
  }

  bmt::atomic_write_text(o.out, csv.str());
  if (!o.svg.empty())
    bmt::write_line_chart_svg(o.svg, t_axis, series, "session time (s)",
                              "positive-neighbor fraction");
  manifest.wall_time_s = timer.seconds();
  bmt::write_run_manifest(o.out + ".run.json", manifest);
  std::cerr << "trajectory for " << o.session << " (" << series.size() << " codes) -> "
            << o.out << "\n";
}

// ---------------------------------------------------------------------------

struct ConfusionOpts {
  std::string embeddings_dir;
  std::string out;
  int jobs = bmt::default_jobs();
};

void run_confusion(const ConfusionOpts& o, bmt::RunManifest manifest) {
  RunTimer timer;
  add_dir_digests(manifest, o.embeddings_dir, bmt::kFeatureFileExt);
  const auto corpus = bmt::read_feature_dir(o.embeddings_dir);
  std::vector<bmt::MatrixXfRM> files;
  for (const auto& seq : corpus) files.push_back(seq.values);
  const Eigen::MatrixXd matrix = bmt::similarity_confusion(files, o.jobs);

  std::ostringstream csv;
  csv << "file_id";
  for (const auto& seq : corpus) csv << ',' << seq.source_id;
  csv << '\n';
  csv.precision(9);
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    csv << corpus[static_cast<std::size_t>(i)].source_id;
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) csv << ',' << matrix(i, j);
    csv << '\n';
  }
  bmt::atomic_write_text(o.out, csv.str());
  manifest.wall_time_s = timer.seconds();
  bmt::write_run_manifest(o.out + ".run.json", manifest);
  std::cerr << "confusion matrix over " << corpus.size() << " files -> " << o.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> raw_argv(argv, argv + argc);
  CLI::App app{"bmt: unsupervised behavior-manifold learning from speech features"};
  app.set_version_flag("--version", bmt::kToolVersion);
  app.set_config("--config", "", "INI config file with [subcommand] sections; flags win");
  app.require_subcommand(1);

  ExtractOpts ex;
  auto* extract = app.add_subcommand("extract", "Extract analysis-frame features from WAV");
  extract->add_option("--in", ex.in, "WAV file or manifest listing WAV paths")->required();
  extract->add_option("--out", ex.out_dir, "Output directory")->required();
  extract->add_option("--window", ex.window_s, "Analysis window (s)");
  extract->add_option("--shift", ex.shift_s, "Analysis shift (s)");
  extract->add_flag("--csv", ex.csv, "Also write CSV exports");
  extract->add_option("--jobs", ex.jobs, "Parallel workers");

  SynthOpts sy;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic benchmark corpus");
  synth->add_option("--files", sy.cfg.n_files, "Number of files");
  synth->add_option("--duration", sy.cfg.file_duration_s, "File duration (s)");
  synth->add_option("--dwell", sy.cfg.behavior_dwell_s, "Mean behavior dwell (s)");
  synth->add_option("--states", sy.cfg.n_states, "Number of behavior states");
  synth->add_option("--nuisance", sy.cfg.nuisance_strength, "Nuisance strength in [0,1]");
  synth->add_option("--noise", sy.cfg.noise_sigma, "Per-dim noise sigma");
  synth->add_option("--seed", sy.cfg.seed, "RNG seed");
  synth->add_option("--out", sy.out_dir, "Output directory")->required();
  synth->add_flag("--audio", sy.audio, "Emit WAV tone corpus instead of feature files");
  synth->add_flag("--csv", sy.csv, "Also write CSV exports");

  SampleOpts sa;
  auto* sample = app.add_subcommand("sample", "Sample triplet tuples from features");
  sample->add_option("--features", sa.features_dir, "Feature directory")->required();
  sample->add_option("--k", sa.cfg.k_seconds, "Max stationary shift (s)");
  sample->add_option("--n-context", sa.cfg.n_context, "Positives per anchor");
  sample->add_option("--seed", sa.cfg.seed, "RNG seed");
  sample->add_option("--out", sa.out, "Output tuple manifest")->required();

  TrainOpts tr;
  auto* train = app.add_subcommand("train", "Train an encoder-decoder variant");
  train->add_option("--tuples", tr.tuples, "Tuple manifest")->required();
  train->add_option("--features", tr.features_dir, "Feature directory")->required();
  train->add_option("--variant", tr.variant, "dcn|triplet|te-autoencoder|te-dcn");
  train->add_option("--val-files", tr.val_files, "Comma-separated validation source ids")
      ->required();
  train->add_option("--seed", tr.cfg.seed, "RNG seed");
  train->add_option("--lr", tr.cfg.lr, "Learning rate");
  train->add_option("--lr-decay", tr.cfg.lr_decay, "LR decay factor");
  train->add_option("--lr-decay-every", tr.cfg.lr_decay_every, "Epochs per decay step");
  train->add_option("--margin", tr.cfg.margin, "Triplet margin");
  train->add_option("--lambda", tr.cfg.lambda, "L2 weight on squared weight norm");
  train->add_option("--batch", tr.cfg.batch_size, "Batch size (tuples)");
  train->add_option("--max-epochs", tr.cfg.max_epochs, "Maximum epochs");
  train->add_option("--patience", tr.cfg.patience, "Early stopping patience");
  train->add_flag("--quiet", tr.quiet, "Suppress per-epoch log");
  train->add_option("--out", tr.out, "Output checkpoint")->required();

  EmbedOpts em;
  auto* embed = app.add_subcommand("embed", "Embed feature files with a checkpoint");
  embed->add_option("--ckpt", em.ckpt, "Checkpoint file")->required();
  embed->add_option("--features", em.features_dir, "Feature directory")->required();
  embed->add_option("--out", em.out_dir, "Output directory")->required();
  embed->add_option("--jobs", em.jobs, "Parallel workers");

  EvalOpts ev;
  auto* evalknn = app.add_subcommand("eval-knn",
                                     "Leave-one-group-out 1-NN session classification");
  evalknn->add_option("--embeddings", ev.embeddings_dir, "Embedding (or feature) directory")
      ->required();
  evalknn->add_option("--labels", ev.labels, "Labels CSV")->required();
  evalknn->add_option("--codes", ev.codes, "Comma-separated codes (default: all)");
  evalknn->add_option("--balance", ev.balance, "Balanced sessions per class (0 = all)");
  evalknn->add_option("--seed", ev.seed, "Seed for balanced selection");
  evalknn->add_option("--out", ev.out_dir, "Output directory")->required();
  evalknn->add_option("--jobs", ev.jobs, "Parallel workers");

  TrajectoryOpts tj;
  auto* traj = app.add_subcommand("trajectory", "Top-N positive-neighbor score over time");
  traj->add_option("--embeddings", tj.embeddings_dir, "Embedding directory")->required();
  traj->add_option("--labels", tj.labels, "Labels CSV")->required();
  traj->add_option("--session", tj.session, "Query session id")->required();
  traj->add_option("--n", tj.top_n, "Neighbor count");
  traj->add_option("--out", tj.out, "Output CSV")->required();
  traj->add_option("--svg", tj.svg, "Optional SVG line chart");
  traj->add_option("--jobs", tj.jobs, "Parallel workers");

  ConfusionOpts cf;
  auto* confusion = app.add_subcommand("confusion", "Cross-file similarity matrix");
  confusion->add_option("--embeddings", cf.embeddings_dir, "Embedding directory")
      ->required();
  confusion->add_option("--out", cf.out, "Output CSV")->required();
  confusion->add_option("--jobs", cf.jobs, "Parallel workers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (extract->parsed())
      run_extract(ex, make_manifest(app, "extract", raw_argv, 0));
    else if (synth->parsed())
      run_synth(sy, make_manifest(app, "synth", raw_argv, sy.cfg.seed));
    else if (sample->parsed())
      run_sample(sa, make_manifest(app, "sample", raw_argv, sa.cfg.seed));
    else if (train->parsed())
      run_train(tr, make_manifest(app, "train", raw_argv, tr.cfg.seed));
    else if (embed->parsed())
      run_embed(em, make_manifest(app, "embed", raw_argv, 0));
    else if (evalknn->parsed())
      run_eval(ev, make_manifest(app, "eval-knn", raw_argv, ev.seed));
    else if (traj->parsed())
      run_trajectory(tj, make_manifest(app, "trajectory", raw_argv, 0));
    else if (confusion->parsed())
      run_confusion(cf, make_manifest(app, "confusion", raw_argv, 0));
  } catch (const std::exception& e) {
    json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
