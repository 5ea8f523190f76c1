// spoofguard command-line driver.
//
//   spoofguard synth-data --out data
//   spoofguard extract    --data data --out feats
//   spoofguard train      --data data --features feats --out run
//   spoofguard score      --model run/model.ckpt --data data --features feats --out scored
//   spoofguard evaluate   --scores scored/scores.txt --protocol data/protocol.txt --out eval
//   spoofguard fuse       --scores a.txt b.txt c.txt --out fused
//
// Settings come from built-in defaults, then a key=value --config file, then
// explicit flags. Every run writes manifest.json with the effective settings.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spoofguard/spoofguard.hpp"

namespace fs = std::filesystem;
namespace sg = spoofguard;
using json = nlohmann::ordered_json;

namespace {

// -- settings ---------------------------------------------------------------

sg::KeyValueConfig synth_kv(const sg::SynthConfig& c) {
  sg::KeyValueConfig kv;
  kv.set("synth.n_bonafide", c.n_bonafide);
  kv.set("synth.n_spoof", c.n_spoof);
  kv.set("synth.utterance_len", c.utterance_len);
  kv.set("synth.difficulty", c.difficulty);
  kv.set("synth.hard_fraction", c.hard_fraction);
  kv.set("synth.sample_rate", static_cast<std::size_t>(c.sample_rate));
  kv.set("synth.n_speakers", c.n_speakers);
  std::string attacks;
  for (const auto& a : c.attacks) attacks += (attacks.empty() ? "" : ",") + a;
  kv.set("synth.attacks", attacks);
  return kv;
}

sg::SynthConfig synth_from(const sg::KeyValueConfig& kv, std::uint64_t seed) {
  sg::SynthConfig c;
  c.n_bonafide = kv.get("synth.n_bonafide", c.n_bonafide);
  c.n_spoof = kv.get("synth.n_spoof", c.n_spoof);
  c.utterance_len = kv.get("synth.utterance_len", c.utterance_len);
  c.difficulty = kv.get("synth.difficulty", c.difficulty);
  c.hard_fraction = kv.get("synth.hard_fraction", c.hard_fraction);
  c.sample_rate = static_cast<int>(kv.get("synth.sample_rate", static_cast<std::size_t>(c.sample_rate)));
  c.n_speakers = kv.get("synth.n_speakers", c.n_speakers);
  if (kv.has("synth.attacks")) {
    c.attacks.clear();
    std::istringstream is(kv.get("synth.attacks", std::string()));
    for (std::string a; std::getline(is, a, ',');) c.attacks.push_back(a);
  }
  c.seed = seed;
  return c;
}

sg::KeyValueConfig frontend_kv(const sg::FrontendConfig& c) {
  sg::KeyValueConfig kv;
  kv.set("frontend.win_ms", c.win_ms);
  kv.set("frontend.hop_ms", c.hop_ms);
  kv.set("frontend.n_fft", c.n_fft);
  kv.set("frontend.n_filters", c.n_filters);
  kv.set("frontend.n_ceps", c.n_ceps);
  kv.set("frontend.delta_width", c.delta_width);
  kv.set("frontend.log_floor", c.log_floor);
  kv.set("frontend.pre_emphasis", c.pre_emphasis);
  return kv;
}

sg::FrontendConfig frontend_from(const sg::KeyValueConfig& kv) {
  sg::FrontendConfig c;
  c.win_ms = kv.get("frontend.win_ms", c.win_ms);
  c.hop_ms = kv.get("frontend.hop_ms", c.hop_ms);
  c.n_fft = kv.get("frontend.n_fft", c.n_fft);
  c.n_filters = kv.get("frontend.n_filters", c.n_filters);
  c.n_ceps = kv.get("frontend.n_ceps", c.n_ceps);
  c.delta_width = kv.get("frontend.delta_width", c.delta_width);
  c.log_floor = kv.get("frontend.log_floor", c.log_floor);
  c.pre_emphasis = kv.get("frontend.pre_emphasis", c.pre_emphasis);
  return c;
}

struct TrainSettings {
  sg::TrainConfig train;
  sg::OhemConfig ohem;
  sg::ModelConfig raw;
  sg::TinyConfig tiny;
};

sg::KeyValueConfig train_kv(const TrainSettings& s) {
  sg::KeyValueConfig kv;
  kv.set("train.model", std::string(sg::model_kind_name(s.train.model)));
  kv.set("train.epochs", s.train.epochs);
  kv.set("train.batch_size", s.train.batch_size);
  kv.set("train.lr", s.train.adam.lr);
  kv.set("train.beta1", s.train.adam.beta1);
  kv.set("train.beta2", s.train.adam.beta2);
  kv.set("train.eps", s.train.adam.eps);
  kv.set("ohem.enabled", std::string(s.ohem.enabled ? "on" : "off"));
  kv.set("ohem.fraction", s.ohem.fraction);
  kv.set("ohem.min_selected", s.ohem.min_selected);
  kv.set("ohem.scope", std::string(sg::scope_name(s.ohem.scope)));
  kv.set("ohem.rank_key", std::string(sg::rank_key_name(s.ohem.rank_key)));
  kv.set("ohem.warmup_epochs", s.ohem.warmup_epochs);
  const sg::KeyValueConfig model = s.train.model == sg::ModelKind::tiny ? s.tiny.to_kv() : s.raw.to_kv();
  const std::string prefix = s.train.model == sg::ModelKind::tiny ? "tiny." : "raw.";
  for (const auto& [k, v] : model.values()) kv.set(prefix + k, v);
  return kv;
}

TrainSettings train_from(const sg::KeyValueConfig& kv, std::uint64_t seed) {
  TrainSettings s;
  s.train.model = sg::parse_model_kind(kv.get("train.model", std::string("tiny")));
  s.train.epochs = kv.get("train.epochs", s.train.epochs);
  s.train.batch_size = kv.get("train.batch_size", s.train.batch_size);
  s.train.adam.lr = kv.get("train.lr", s.train.adam.lr);
  s.train.adam.beta1 = kv.get("train.beta1", s.train.adam.beta1);
  s.train.adam.beta2 = kv.get("train.beta2", s.train.adam.beta2);
  s.train.adam.eps = kv.get("train.eps", s.train.adam.eps);
  s.train.seed = seed;
  s.ohem.enabled = kv.get_bool("ohem.enabled", s.ohem.enabled);
  s.ohem.fraction = kv.get("ohem.fraction", s.ohem.fraction);
  s.ohem.min_selected = kv.get("ohem.min_selected", s.ohem.min_selected);
  s.ohem.scope = sg::parse_scope(kv.get("ohem.scope", std::string(sg::scope_name(s.ohem.scope))));
  s.ohem.rank_key = sg::parse_rank_key(kv.get("ohem.rank_key", std::string(sg::rank_key_name(s.ohem.rank_key))));
  s.ohem.warmup_epochs = kv.get("ohem.warmup_epochs", s.ohem.warmup_epochs);
  s.raw = sg::ModelConfig::from_kv(kv, "raw.");
  s.tiny = sg::TinyConfig::from_kv(kv, "tiny.");
  return s;
}

sg::KeyValueConfig tdcf_kv(const sg::TdcfParams& p) {
  sg::KeyValueConfig kv;
  kv.set("tdcf.cost_miss_asv", p.cost_miss_asv);
  kv.set("tdcf.cost_fa_asv", p.cost_fa_asv);
  kv.set("tdcf.cost_miss_cm", p.cost_miss_cm);
  kv.set("tdcf.cost_fa_cm", p.cost_fa_cm);
  kv.set("tdcf.prior_target", p.prior_target);
  kv.set("tdcf.prior_nontarget", p.prior_nontarget);
  kv.set("tdcf.prior_spoof", p.prior_spoof);
  kv.set("tdcf.asv_p_miss", p.asv_p_miss);
  kv.set("tdcf.asv_p_fa", p.asv_p_fa);
  kv.set("tdcf.asv_p_miss_spoof", p.asv_p_miss_spoof);
  return kv;
}

sg::TdcfParams tdcf_from(const sg::KeyValueConfig& kv) {
  sg::TdcfParams p;
  p.cost_miss_asv = kv.get("tdcf.cost_miss_asv", p.cost_miss_asv);
  p.cost_fa_asv = kv.get("tdcf.cost_fa_asv", p.cost_fa_asv);
  p.cost_miss_cm = kv.get("tdcf.cost_miss_cm", p.cost_miss_cm);
  p.cost_fa_cm = kv.get("tdcf.cost_fa_cm", p.cost_fa_cm);
  p.prior_target = kv.get("tdcf.prior_target", p.prior_target);
  p.prior_nontarget = kv.get("tdcf.prior_nontarget", p.prior_nontarget);
  p.prior_spoof = kv.get("tdcf.prior_spoof", p.prior_spoof);
  p.asv_p_miss = kv.get("tdcf.asv_p_miss", p.asv_p_miss);
  p.asv_p_fa = kv.get("tdcf.asv_p_fa", p.asv_p_fa);
  p.asv_p_miss_spoof = kv.get("tdcf.asv_p_miss_spoof", p.asv_p_miss_spoof);
  return p;
}

std::set<std::string> known_keys() {
  std::set<std::string> keys;
  auto take = [&](const sg::KeyValueConfig& kv) {
    for (const auto& [k, v] : kv.values()) keys.insert(k);
  };
  take(synth_kv({}));
  take(frontend_kv({}));
  take(tdcf_kv({}));
  TrainSettings s;
  s.train.model = sg::ModelKind::tiny;
  take(train_kv(s));
  s.train.model = sg::ModelKind::raw_res2net;
  take(train_kv(s));
  keys.insert("score.batch_size");
  return keys;
}

// -- run plumbing -----------------------------------------------------------

struct Globals {
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out;
  bool force = false;
};

/// Effective settings: config file overlaid with explicit flags.
struct Settings {
  sg::KeyValueConfig kv;

  template <class T>
  void flag(const std::string& key, const std::optional<T>& v) {
    if (!v) return;
    if constexpr (std::is_same_v<T, std::string>) {
      kv.set(key, *v);
    } else if constexpr (std::is_same_v<T, double>) {
      kv.set(key, *v);
    } else {
      kv.set(key, static_cast<std::size_t>(*v));
    }
  }
};

Settings load_settings(const Globals& g) {
  Settings s;
  if (!g.config_path.empty()) {
    s.kv = sg::KeyValueConfig::load(g.config_path);
    s.kv.require_known(known_keys());
  }
  return s;
}

/// Creates the output directory; an existing non-empty one needs --force.
fs::path prepare_out(const Globals& g, const std::string& fallback) {
  const fs::path out = g.out.empty() ? fs::path(fallback) : fs::path(g.out);
  if (fs::exists(out)) {
    if (!fs::is_directory(out)) throw sg::IoError("output path '" + out.string() + "' is not a directory");
    if (!fs::is_empty(out) && !g.force) {
      throw sg::IoError("output directory '" + out.string() + "' is not empty (use --force to overwrite)");
    }
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw sg::IoError("cannot create '" + out.string() + "': " + ec.message());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw sg::IoError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw sg::IoError("failed writing '" + path.string() + "'");
}

void write_manifest(const fs::path& dir, const std::string& command, const Globals& g, const sg::KeyValueConfig& kv,
                    const json& inputs, const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["version"] = sg::kVersion;
  m["seed"] = g.seed;
  json cfg = json::object();
  for (const auto& [k, v] : kv.values()) cfg[k] = v;
  m["config"] = cfg;
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

std::vector<sg::TrialRecord> load_protocol(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw sg::IoError("cannot open protocol '" + path.string() + "'");
  try {
    return sg::parse_protocol(is);
  } catch (const sg::ParseError& e) {
    throw sg::ParseError(path.string() + ": " + e.what());
  }
}

fs::path wav_path(const fs::path& data, const std::string& id) { return data / "wav" / (id + ".wav"); }

/// Waveforms for every protocol entry, failing with the list of missing files.
std::vector<sg::Waveform> load_waveforms(const fs::path& data, const std::vector<sg::TrialRecord>& protocol) {
  std::string missing;
  std::size_t n_missing = 0;
  for (const auto& r : protocol)
    if (!fs::exists(wav_path(data, r.utterance_id))) {
      if (n_missing++ < 10) missing += " " + wav_path(data, r.utterance_id).string();
    }
  if (n_missing) {
    throw sg::IoError(std::to_string(n_missing) + " utterance file(s) missing:" + missing +
                      (n_missing > 10 ? " ..." : ""));
  }
  std::vector<sg::Waveform> out(protocol.size());
  sg::parallel_for(protocol.size(), sg::worker_count(),
                   [&](std::size_t i) { out[i] = sg::load_wav(wav_path(data, protocol[i].utterance_id)); });
  return out;
}

std::vector<std::string> ids_of(const std::vector<sg::TrialRecord>& protocol) {
  std::vector<std::string> ids;
  for (const auto& r : protocol) ids.push_back(r.utterance_id);
  return ids;
}

sg::Dataset load_dataset(sg::ModelKind kind, std::size_t raw_len, const fs::path& data, const std::string& features,
                         const std::vector<sg::TrialRecord>& protocol) {
  if (kind == sg::ModelKind::tiny) {
    if (features.empty()) throw sg::ConfigError("the tiny model reads LFCC features: pass --features <dir>");
    const auto entries =
        sg::read_feature_dump(fs::path(features) / "features.bin", fs::path(features) / "features.manifest");
    return sg::make_feature_dataset(entries, protocol);
  }
  return sg::make_waveform_dataset(load_waveforms(data, protocol), ids_of(protocol), protocol, raw_len);
}

// -- commands ---------------------------------------------------------------

struct SynthArgs {
  std::optional<std::size_t> n_bonafide, n_spoof, length;
  std::optional<double> difficulty, hard_fraction;
};

int cmd_synth(const Globals& g, const SynthArgs& a) {
  Settings s = load_settings(g);
  s.flag("synth.n_bonafide", a.n_bonafide);
  s.flag("synth.n_spoof", a.n_spoof);
  s.flag("synth.utterance_len", a.length);
  s.flag("synth.difficulty", a.difficulty);
  s.flag("synth.hard_fraction", a.hard_fraction);
  const sg::SynthConfig cfg = synth_from(s.kv, g.seed);
  cfg.validate();
  const fs::path out = prepare_out(g, "data");

  const sg::SyntheticDataset ds = sg::generate_synthetic_dataset(cfg);
  fs::create_directories(out / "wav");
  sg::parallel_for(ds.waveforms.size(), sg::worker_count(),
                   [&](std::size_t i) { sg::save_wav(wav_path(out, ds.trials[i].utterance_id), ds.waveforms[i]); });
  std::ostringstream proto;
  sg::write_protocol(proto, ds.trials);
  write_text(out / "protocol.txt", proto.str());
  write_manifest(out, "synth-data", g, synth_kv(cfg), json::object(), {"protocol.txt", "wav/"});
  std::cout << "wrote " << ds.trials.size() << " utterances (" << cfg.n_bonafide << " bona fide, " << cfg.n_spoof
            << " spoof) to " << out.string() << "\n";
  return 0;
}

int cmd_extract(const Globals& g, const std::string& data) {
  Settings s = load_settings(g);
  const sg::FrontendConfig cfg = frontend_from(s.kv);
  cfg.validate(sg::kDefaultSampleRate);
  const auto protocol = load_protocol(fs::path(data) / "protocol.txt");
  const auto waves = load_waveforms(data, protocol);
  const fs::path out = prepare_out(g, "features");

  const auto feats = sg::extract_lfcc_batch(waves, cfg);
  std::vector<sg::FeatureEntry> entries;
  for (std::size_t i = 0; i < feats.size(); ++i) entries.push_back({protocol[i].utterance_id, feats[i]});
  sg::write_feature_dump(out / "features.bin", out / "features.manifest", entries);
  write_manifest(out, "extract", g, frontend_kv(cfg), {{"data", data}}, {"features.bin", "features.manifest"});
  if (!feats.empty()) {
    std::cout << "extracted " << feats.size() << " utterances, " << feats.front().rows << "x" << feats.front().cols
              << " LFCC each, to " << out.string() << "\n";
  }
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string features;
  std::optional<std::string> model, ohem, scope, rank_key;
  std::optional<double> fraction, lr;
  std::optional<std::size_t> epochs, batch_size, warmup;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  Settings s = load_settings(g);
  s.flag("train.model", a.model);
  s.flag("ohem.enabled", a.ohem);
  s.flag("ohem.scope", a.scope);
  s.flag("ohem.rank_key", a.rank_key);
  s.flag("ohem.fraction", a.fraction);
  s.flag("train.lr", a.lr);
  s.flag("train.epochs", a.epochs);
  s.flag("train.batch_size", a.batch_size);
  s.flag("ohem.warmup_epochs", a.warmup);
  const TrainSettings ts = train_from(s.kv, g.seed);
  ts.train.validate(ts.ohem);
  if (ts.train.model == sg::ModelKind::tiny) {
    ts.tiny.validate();
  } else {
    ts.raw.validate();
  }
  const auto protocol = load_protocol(fs::path(a.data) / "protocol.txt");
  const sg::Dataset dataset = load_dataset(ts.train.model, ts.raw.input_len, a.data, a.features, protocol);
  const fs::path out = prepare_out(g, "run");

  sg::TrainResult result;
  sg::AnyModel model = ts.train.model == sg::ModelKind::tiny
                           ? sg::AnyModel(std::in_place_type<sg::TinyReference>, ts.tiny, g.seed)
                           : sg::AnyModel(std::in_place_type<sg::RawRes2Net>, ts.raw, g.seed);
  std::visit([&](auto& m) { result = sg::train(m, dataset, ts.train, ts.ohem); }, model);

  sg::save_model_file(out / "model.ckpt", model);
  std::ostringstream csv;
  sg::write_stats_csv(csv, result);
  write_text(out / "train_stats.csv", csv.str());
  json inputs = {{"data", a.data}};
  if (!a.features.empty()) inputs["features"] = a.features;
  write_manifest(out, "train", g, train_kv(ts), inputs, {"model.ckpt", "train_stats.csv"});
  for (const auto& e : result.epochs) {
    std::cout << "epoch " << e.epoch << "  mean loss " << sg::format_double(e.mean_loss) << "  optimized loss "
              << sg::format_double(e.mean_selected_loss) << "\n";
  }
  return 0;
}

int cmd_score(const Globals& g, const std::string& model_path, const std::string& data, const std::string& features) {
  Settings s = load_settings(g);
  const std::size_t batch = s.kv.get("score.batch_size", std::size_t{64});
  if (batch < 1) throw sg::ConfigError("score.batch_size must be >= 1");
  sg::AnyModel model = sg::load_model_file(model_path);
  const auto protocol = load_protocol(fs::path(data) / "protocol.txt");
  const bool tiny = std::holds_alternative<sg::TinyReference>(model);
  const std::size_t raw_len = tiny ? 0 : std::get<sg::RawRes2Net>(model).config().input_len;
  const sg::Dataset dataset =
      load_dataset(tiny ? sg::ModelKind::tiny : sg::ModelKind::raw_res2net, raw_len, data, features, protocol);
  const fs::path out = prepare_out(g, "scores");

  sg::ScoreSet scores;
  std::visit([&](auto& m) { scores = sg::score_dataset(m, dataset, batch); }, model);
  sg::save_scores(out / "scores.txt", scores);
  sg::KeyValueConfig kv;
  kv.set("score.batch_size", batch);
  json inputs = {{"model", model_path}, {"data", data}};
  if (!features.empty()) inputs["features"] = features;
  write_manifest(out, "score", g, kv, inputs, {"scores.txt"});
  std::cout << "scored " << scores.size() << " utterances to " << (out / "scores.txt").string() << "\n";
  return 0;
}

int cmd_evaluate(const Globals& g, const std::string& scores_path, const std::string& protocol_path) {
  Settings s = load_settings(g);
  const sg::TdcfParams params = tdcf_from(s.kv);
  params.validate();
  const sg::ScoreSet scores = sg::load_scores(scores_path);
  const auto protocol = load_protocol(protocol_path);

  std::set<std::string> attacks;
  for (const auto& r : protocol)
    if (r.key == sg::Key::spoof) attacks.insert(r.attack_id);
  std::string unscored;
  std::size_t n_unscored = 0;
  for (const auto& r : protocol)
    if (!scores.contains(r.utterance_id) && n_unscored++ < 10) unscored += " " + r.utterance_id;
  if (n_unscored) {
    throw sg::InvalidInput(std::to_string(n_unscored) + " protocol utterance(s) have no score:" + unscored +
                           (n_unscored > 10 ? " ..." : ""));
  }
  const sg::EvaluationReport report =
      sg::evaluate_report(scores, protocol, params, std::vector<std::string>(attacks.begin(), attacks.end()));
  const fs::path out = prepare_out(g, "evaluation");
  write_text(out / "report.json", sg::to_json(report).dump(2) + "\n");
  write_text(out / "report.txt", sg::to_text(report));
  write_text(out / "det.tsv", sg::det_tsv(report));
  write_text(out / "per_attack.tsv", sg::per_attack_tsv(report));
  write_manifest(out, "evaluate", g, tdcf_kv(params), {{"scores", scores_path}, {"protocol", protocol_path}},
                 {"report.json", "report.txt", "det.tsv", "per_attack.tsv"});
  std::cout << sg::to_text(report);
  return 0;
}

int cmd_fuse(const Globals& g, const std::vector<std::string>& files, const std::vector<double>& weights) {
  if (files.size() < 2) throw sg::ConfigError("fuse needs at least two score files");
  if (!weights.empty() && weights.size() != files.size()) {
    throw sg::ConfigError("fuse: " + std::to_string(weights.size()) + " weights for " + std::to_string(files.size()) +
                          " score files");
  }
  std::vector<sg::ScoreSet> systems;
  for (const auto& f : files) systems.push_back(sg::load_scores(f));
  const sg::ScoreSet fused = sg::fuse_scores(systems, weights);
  const fs::path out = prepare_out(g, "fused");
  sg::save_scores(out / "scores.txt", fused);
  sg::KeyValueConfig kv;
  std::string w;
  for (std::size_t i = 0; i < files.size(); ++i)
    w += (i ? "," : "") + sg::format_double(weights.empty() ? 1.0 : weights[i]);
  kv.set("fuse.weights", w);
  write_manifest(out, "fuse", g, kv, {{"scores", files}}, {"scores.txt"});
  std::cout << "fused " << files.size() << " systems over " << fused.size() << " utterances to "
            << (out / "scores.txt").string() << "\n";
  return 0;
}

int fail(const std::string& category, const std::string& msg, int code) {
  std::cerr << "spoofguard: error[" << category << "]: " << msg << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spoofguard: synthetic anti-spoofing toolkit (LFCC, Raw-Res2Net, OHEM, EER/t-DCF)"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sg::kVersion);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--config", g.config_path, "key=value settings file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "output directory");
  app.add_flag("--force", g.force, "write into a non-empty output directory");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth-data", "generate a synthetic labelled corpus");
  c_synth->add_option("--n-bonafide", synth.n_bonafide, "bona fide utterances");
  c_synth->add_option("--n-spoof", synth.n_spoof, "spoof utterances");
  c_synth->add_option("--length", synth.length, "samples per utterance");
  c_synth->add_option("--difficulty", synth.difficulty, "artifact strength falls as this rises, in [0,1]");
  c_synth->add_option("--hard-fraction", synth.hard_fraction, "share of spoofs with the weakest artifacts");

  std::string data, features;
  auto* c_extract = app.add_subcommand("extract", "compute 60-dim LFCC features for a corpus");
  c_extract->add_option("--data", data, "corpus directory (protocol.txt, wav/)")->required()->check(CLI::ExistingDirectory);

  TrainArgs ta;
  auto* c_train = app.add_subcommand("train", "train a countermeasure");
  c_train->add_option("--data", ta.data, "corpus directory")->required()->check(CLI::ExistingDirectory);
  c_train->add_option("--features", ta.features, "feature directory (tiny model)");
  c_train->add_option("--model", ta.model, "tiny | raw-res2net");
  c_train->add_option("--ohem", ta.ohem, "on | off");
  c_train->add_option("--ohem-scope", ta.scope, "negatives | all");
  c_train->add_option("--rank-key", ta.rank_key, "loss | score");
  c_train->add_option("--fraction", ta.fraction, "share of the pool kept per batch");
  c_train->add_option("--epochs", ta.epochs, "training epochs");
  c_train->add_option("--batch-size", ta.batch_size, "mini-batch size");
  c_train->add_option("--lr", ta.lr, "Adam learning rate");
  c_train->add_option("--warmup", ta.warmup, "epochs on the plain mean before mining");

  std::string model_path;
  auto* c_score = app.add_subcommand("score", "score a corpus with a trained model");
  c_score->add_option("--model", model_path, "checkpoint")->required()->check(CLI::ExistingFile);
  c_score->add_option("--data", data, "corpus directory")->required()->check(CLI::ExistingDirectory);
  c_score->add_option("--features", features, "feature directory (tiny model)");

  std::string scores_path, protocol_path;
  auto* c_eval = app.add_subcommand("evaluate", "EER, min t-DCF, per-attack EER and DET data");
  c_eval->add_option("--scores", scores_path, "score file")->required();
  c_eval->add_option("--protocol", protocol_path, "protocol file")->required();

  std::vector<std::string> fuse_files;
  std::vector<double> fuse_weights;
  auto* c_fuse = app.add_subcommand("fuse", "z-norm score fusion");
  c_fuse->add_option("--scores", fuse_files, "score files")->required();
  c_fuse->add_option("--weights", fuse_weights, "one non-negative weight per file")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", e.what(), 2);
  }

  try {
    if (*c_synth) return cmd_synth(g, synth);
    if (*c_extract) return cmd_extract(g, data);
    if (*c_train) return cmd_train(g, ta);
    if (*c_score) return cmd_score(g, model_path, data, features);
    if (*c_eval) return cmd_evaluate(g, scores_path, protocol_path);
    if (*c_fuse) return cmd_fuse(g, fuse_files, fuse_weights);
  } catch (const sg::ConfigError& e) {
    return fail(e.category(), e.what(), 2);
  } catch (const sg::Error& e) {
    return fail(e.category(), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
