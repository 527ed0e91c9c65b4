#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "driveclone/adversarial/gail.hpp"
#include "driveclone/adversarial/gan.hpp"
#include "driveclone/bc/policy.hpp"
#include "driveclone/bc/train.hpp"
#include "driveclone/data/demonstrations.hpp"
#include "driveclone/data/recording.hpp"
#include "driveclone/data/synth.hpp"
#include "driveclone/error.hpp"
#include "driveclone/eval/metrics.hpp"
#include "driveclone/eval/table.hpp"
#include "driveclone/nn/checkpoint.hpp"
#include "driveclone/sim/highway_env.hpp"
#include "driveclone/text.hpp"

namespace driveclone::cli {

namespace fs = std::filesystem;

// Bad invocation that CLI11 itself cannot see (missing seed, bad list).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::vector<int> parse_widths(const std::string& s) {
  std::vector<int> out;
  for (auto part : text::split(s, ',')) {
    const auto v = text::parse_int(text::trim(part));
    if (!v || *v < 1) throw UsageError("--hidden expects positive integers separated by commas, got '" + s + "'");
    out.push_back(static_cast<int>(*v));
  }
  if (out.empty()) throw UsageError("--hidden is empty");
  return out;
}

// "key=value" lines; '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string body;
  try {
    body = text::read_file(path);
  } catch (const IoFailure& e) {
    throw UsageError(e.what());
  }
  int n = 0;
  for (const auto& line : text::lines(body)) {
    ++n;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos || eq == 0)
      throw UsageError(path + ":" + std::to_string(n) + ": expected key=value");
    out.emplace_back(std::string(text::trim(t.substr(0, eq))), std::string(text::trim(t.substr(eq + 1))));
  }
  return out;
}

// Expands --config FILE into --key=value flags for every key not already given
// on the command line, so flags win over the file and the file over defaults.
inline std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<long>(i));
      break;
    }
  }
  if (!path) return args;
  for (const auto& [k, v] : read_config(*path)) {
    const std::string flag = "--" + k;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!given) args.push_back(flag + "=" + v);
  }
  return args;
}

inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("DRIVECLONE_SEED")) {
    const auto v = text::parse_int(env);
    if (!v || *v < 0) throw UsageError("DRIVECLONE_SEED is not a non-negative integer");
    return static_cast<std::uint64_t>(*v);
  }
  throw UsageError("--seed is required (or set DRIVECLONE_SEED)");
}

// Recordings from one tracks CSV or every *.csv in a directory (sorted by
// name). Each CSV's geometry comes from the sibling .meta file; without one
// the default geometry is used and the track id is its position in the list.
inline std::vector<data::Recording> load_recordings(const std::string& path, std::vector<std::string>* inputs = nullptr) {
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.emplace_back(path);
  }
  if (files.empty()) throw IoFailure("no tracks CSV under " + path);
  std::vector<data::Recording> out;
  for (std::size_t i = 0; i < files.size(); ++i) {
    data::TrackMeta meta;
    meta.track_id = static_cast<int>(i) + 1;
    auto meta_path = files[i];
    meta_path.replace_extension(".meta");
    if (fs::exists(meta_path)) {
      meta = data::parse_meta(text::read_file(meta_path.string()));
      if (inputs) inputs->push_back(meta_path.string());
    }
    out.push_back(data::parse_tracks(text::read_file(files[i].string()), meta));
    if (inputs) inputs->push_back(files[i].string());
  }
  return out;
}

// Line-oriented record of one run: resolved options, seed, and FNV-1a
// fingerprints of every input read and artifact written.
struct Manifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> options;
  std::vector<std::string> inputs;
  std::vector<std::string> artifacts;

  std::string render() const {
    std::string out = "command=" + command + "\n";
    for (const auto& [k, v] : options) out += k + "=" + v + "\n";
    for (const auto& p : inputs) out += "input." + p + "=" + text::hex64(text::fnv1a(text::read_file(p))) + "\n";
    for (const auto& p : artifacts) out += "artifact." + p + "=" + text::hex64(text::fnv1a(text::read_file(p))) + "\n";
    return out;
  }
};

// Every option of `app` with its value after parsing (defaults included).
inline std::vector<std::pair<std::string, std::string>> resolved_options(const CLI::App& app) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const CLI::Option* o : app.get_options()) {
    const std::string name = o->get_single_name();
    if (name == "help" || name == "seed") continue;
    std::string value;
    if (o->count() > 0) {
      const auto& r = o->results();
      for (std::size_t i = 0; i < r.size(); ++i) value += (i ? " " : "") + r[i];
    } else {
      value = o->get_default_str();
    }
    out.emplace_back(name, value);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string display_name(const std::string& trainer) {
  if (trainer == "bc") return "BC";
  if (trainer == "bcmdn") return "BC MDN";
  if (trainer == "gan") return "GAN";
  if (trainer == "gail") return "GAIL";
  return "AIR-GAIL";
}

inline std::string profiles_path(const std::string& out) { return out + ".profiles.csv"; }

struct Options {
  std::optional<std::uint64_t> seed;
  std::string out;
  // synth
  data::SynthConfig synth;
  // demos / env / eval
  std::string tracks;
  std::string demos;
  // bc
  bc::BcConfig bc;
  std::string hidden = "64,64";
  // gan
  adversarial::GanConfig gan;
  // gail
  adversarial::GailConfig gail;
  adversarial::PenaltyConfig penalty;
  int horizon = 500;
  std::string disc_hidden = "64,64";
  // eval
  std::string policy;
  std::string name;
  eval::EvalConfig eval;
  int workers = 1;
  // export
  std::vector<std::string> metrics;
  std::string profiles_out;
};

inline void add_seed(CLI::App* a, Options& o) { a->add_option("--seed", o.seed, "RNG seed (falls back to DRIVECLONE_SEED)"); }

inline void add_workers(CLI::App* a, Options& o) {
  a->add_option("--workers", o.workers, "parallel workers")->capture_default_str()->check(CLI::PositiveNumber);
}

inline void add_train_common(CLI::App* a, Options& o) {
  a->add_option("--demos", o.demos, "demonstrations CSV")->required();
  a->add_option("--out", o.out, "checkpoint path")->required();
  a->add_option("--hidden", o.hidden, "hidden widths, comma separated")->capture_default_str();
  add_seed(a, o);
}

inline void add_bc(CLI::App* a, Options& o, bool mdn) {
  add_train_common(a, o);
  a->add_option("--epochs", o.bc.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--batch", o.bc.batch)->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--lr", o.bc.lr)->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--validation-fraction", o.bc.validation_fraction)->capture_default_str()->check(CLI::Range(0.0, 0.9));
  if (mdn) a->add_option("--M", o.bc.components, "mixture components")->capture_default_str()->check(CLI::PositiveNumber);
}

inline void add_gan(CLI::App* a, Options& o) {
  add_train_common(a, o);
  a->add_option("--steps", o.gan.steps)->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--z-dim", o.gan.z_dim)->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--batch", o.gan.batch)->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--generator-lr", o.gan.generator_lr)->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--discriminator-lr", o.gan.discriminator_lr)->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--report-every", o.gan.report_every)->capture_default_str()->check(CLI::PositiveNumber);
  a->add_flag("--non-saturating", o.gan.non_saturating, "generator maximizes log D");
}

inline void add_gail(CLI::App* a, Options& o, bool air) {
  add_train_common(a, o);
  auto& g = o.gail;
  a->add_option("--tracks", o.tracks, "recordings for the training environment")->required();
  a->add_option("--budget", g.budget, "environment steps")->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--steps-per-iter", g.rollout.steps_per_iter)->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--horizon", o.horizon, "episode step cap, 0 = track end")->capture_default_str()->check(CLI::NonNegativeNumber);
  a->add_option("--disc-hidden", o.disc_hidden)->capture_default_str();
  a->add_option("--disc-batch", g.disc_batch)->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--disc-steps", g.disc_steps)->capture_default_str()->check(CLI::NonNegativeNumber);
  a->add_option("--gamma", g.ppo.gamma)->capture_default_str();
  a->add_option("--gae-lambda", g.ppo.gae_lambda)->capture_default_str();
  a->add_option("--clip", g.ppo.clip)->capture_default_str();
  a->add_option("--entropy-coef", g.ppo.entropy_coef)->capture_default_str();
  a->add_option("--value-coef", g.ppo.value_coef)->capture_default_str();
  a->add_option("--epochs", g.ppo.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--minibatch", g.ppo.minibatch)->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--policy-lr", g.ppo.policy_lr)->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--discriminator-lr", g.ppo.discriminator_lr)->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--initial-log-std", g.initial_log_std)->capture_default_str();
  a->add_option("--standardize-inputs", g.standardize_policy_inputs,
                "policy sees expert-standardized observations")->capture_default_str();
  a->add_option("--standardization-floor", g.standardization_floor)->capture_default_str()->check(CLI::PositiveNumber);
  add_workers(a, o);
  if (air) {
    a->add_option("--penalty", o.penalty.penalty)->capture_default_str();
    a->add_option("--history", o.penalty.history)->capture_default_str()->check(CLI::NonNegativeNumber);
    a->add_option("--negative-fraction", o.penalty.negative_fraction)->capture_default_str()->check(CLI::Range(0.0, 1.0));
    a->add_option("--capacity", o.penalty.capacity)->capture_default_str();
  }
}

inline void write_policy(const bc::Policy& p, const std::string& trainer, const Options& o, std::uint64_t seed,
                         Manifest& m) {
  text::write_file(o.out, nn::serialize_checkpoint(bc::to_checkpoint(
                              p, {{"name", display_name(trainer)}, {"trainer", trainer}, {"seed", std::to_string(seed)}})));
  m.artifacts.push_back(o.out);
}

inline void write_report(const TrainReport& r, const Options& o, Manifest& m) {
  text::write_file(o.out + ".report.csv", r.to_csv());
  m.artifacts.push_back(o.out + ".report.csv");
}

inline void run_train(const std::string& trainer, Options& o, std::uint64_t seed, Manifest& m, std::ostream& out) {
  m.inputs.push_back(o.demos);
  const auto demos = data::parse_demonstrations(text::read_file(o.demos));
  const auto hidden = parse_widths(o.hidden);
  if (trainer == "bc" || trainer == "bcmdn") {
    o.bc.seed = seed;
    o.bc.hidden = hidden;
    auto [p, report] = trainer == "bc" ? bc::train_bc(demos, o.bc) : bc::train_bc_mdn(demos, o.bc);
    write_policy(p, trainer, o, seed, m);
    write_report(report, o, m);
    out << trainer << ": train_loss " << text::sig6(report.last("train_loss")) << " val_loss "
        << text::sig6(report.last("val_loss")) << "\n";
  } else if (trainer == "gan") {
    o.gan.seed = seed;
    o.gan.hidden = hidden;
    const auto r = adversarial::gan_train(demos, o.gan);
    write_policy(r.generator, trainer, o, seed, m);
    text::write_file(o.out + ".disc", nn::serialize_checkpoint(adversarial::to_checkpoint(r.discriminator)));
    m.artifacts.push_back(o.out + ".disc");
    write_report(r.report, o, m);
    out << "gan: disc_accuracy " << text::sig6(r.report.last("disc_accuracy")) << "\n";
  } else {
    auto pool = std::make_shared<const std::vector<data::Recording>>(load_recordings(o.tracks, &m.inputs));
    const int horizon = o.horizon;
    const sim::EnvFactory factory = [pool, horizon](std::uint64_t) {
      return std::make_unique<sim::HighwayEnv>(pool, sim::SimConfig{}, sim::SpawnPolicy{}, horizon);
    };
    o.gail.seed = seed;
    o.gail.hidden = hidden;
    o.gail.discriminator_hidden = parse_widths(o.disc_hidden);
    o.gail.rollout.workers = o.workers;
    const auto r = trainer == "gail" ? adversarial::gail_train(factory, demos, o.gail)
                                     : adversarial::air_gail_train(factory, demos, o.gail, o.penalty);
    write_policy(r.policy, trainer, o, seed, m);
    text::write_file(o.out + ".disc", nn::serialize_checkpoint(adversarial::to_checkpoint(r.discriminator)));
    m.artifacts.push_back(o.out + ".disc");
    write_report(r.report, o, m);
    out << trainer << ": collision_rate " << text::sig6(r.report.last("collision_rate")) << " mean_episode_len "
        << text::sig6(r.report.last("mean_episode_len")) << "\n";
  }
}

// Joins several eval outputs (table + sibling profiles) into one of each.
inline void run_export(const Options& o, Manifest& m) {
  std::vector<eval::MetricsRow> rows;
  std::vector<eval::TrackProfile> merged;
  for (const auto& path : o.metrics) {
    m.inputs.push_back(path);
    for (auto& r : eval::parse_table(text::read_file(path))) rows.push_back(std::move(r));
    const auto pp = profiles_path(path);
    if (!fs::exists(pp)) continue;
    m.inputs.push_back(pp);
    const auto prof = eval::parse_profiles(text::read_file(pp));
    if (merged.empty()) {
      merged = prof;
      continue;
    }
    if (prof.size() != merged.size()) throw ShapeMismatch(pp + " covers a different set of tracks");
    for (std::size_t i = 0; i < prof.size(); ++i) {
      if (prof[i].track_id != merged[i].track_id) throw ShapeMismatch(pp + " covers a different set of tracks");
      merged[i].policies.insert(merged[i].policies.end(), prof[i].policies.begin(), prof[i].policies.end());
    }
  }
  const auto prof_out = o.profiles_out.empty() ? profiles_path(o.out) : o.profiles_out;
  eval::export_table(rows, merged, o.out, prof_out);
  m.artifacts.push_back(o.out);
  m.artifacts.push_back(prof_out);
}

inline int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"driveclone: imitation-learning driving policies on replayed highway traffic", "driveclone"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  auto* synth = app.add_subcommand("synth", "write a synthetic tracks CSV (plus .meta)");
  synth->add_option("--out", o.out, "tracks CSV path")->required();
  synth->add_option("--vehicles", o.synth.n_vehicles)->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--lanes", o.synth.n_lanes)->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--duration", o.synth.duration_s, "seconds")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--road-length", o.synth.road_length, "m")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--track-id", o.synth.track_id)->capture_default_str();
  synth->add_option("--min-desired-speed", o.synth.min_desired_speed)->capture_default_str();
  synth->add_option("--max-desired-speed", o.synth.max_desired_speed)->capture_default_str();
  synth->add_option("--lane-change-probability", o.synth.lane_change_probability)->capture_default_str();
  add_seed(synth, o);

  auto* demos = app.add_subcommand("demos", "extract (observation, action) pairs from recordings");
  demos->add_option("--tracks", o.tracks, "tracks CSV or directory")->required();
  demos->add_option("--out", o.out, "demonstrations CSV")->required();

  auto* train = app.add_subcommand("train", "train a policy");
  train->require_subcommand(1);
  std::map<std::string, CLI::App*> trainers;
  for (const std::string k : {"bc", "bcmdn", "gan", "gail", "airgail"}) trainers[k] = train->add_subcommand(k);
  add_bc(trainers["bc"], o, false);
  add_bc(trainers["bcmdn"], o, true);
  add_gan(trainers["gan"], o);
  add_gail(trainers["gail"], o, false);
  add_gail(trainers["airgail"], o, true);

  auto* ev = app.add_subcommand("eval", "insert a trained policy into recordings and measure it");
  o.out = "metrics.csv";  // the other subcommands require --out
  ev->add_option("--policy", o.policy, "checkpoint")->required();
  ev->add_option("--tracks", o.tracks, "tracks CSV or directory")->required();
  ev->add_option("--out", o.out, "metrics CSV (profiles go to <out>.profiles.csv)")->capture_default_str();
  ev->add_option("--insertions", o.eval.insertions_per_track)->capture_default_str()->check(CLI::PositiveNumber);
  ev->add_option("--max-steps", o.eval.max_steps, "0 = until the track ends")->capture_default_str();
  ev->add_option("--name", o.name, "row label (default from the checkpoint)");
  add_workers(ev, o);
  add_seed(ev, o);

  auto* ex = app.add_subcommand("export", "merge eval outputs into the comparison table and profiles");
  ex->add_option("--metrics", o.metrics, "eval metrics CSVs")->required();
  ex->add_option("--out", o.out, "comparison table CSV")->required();
  ex->add_option("--profiles-out", o.profiles_out, "profiles CSV (default <out>.profiles.csv)");

  if (raw_args.empty()) {
    err << app.help();
    return 1;
  }
  try {
    auto args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    err << "driveclone: " << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    Manifest m;
    if (synth->parsed()) {
      const auto seed = resolve_seed(o.seed);
      m.command = "synth";
      m.options = resolved_options(*synth);
      m.options.emplace_back("seed", std::to_string(seed));
      o.synth.seed = seed;
      const auto rec = data::synth_traffic(o.synth);
      auto meta = fs::path(o.out).replace_extension(".meta").string();
      text::write_file(o.out, data::serialize_tracks(rec));
      text::write_file(meta, data::serialize_meta(rec.meta()));
      m.artifacts = {o.out, meta};
      out << "synth: " << rec.frames.size() << " rows, " << data::vehicle_ids(rec).size() << " vehicles\n";
    } else if (demos->parsed()) {
      m.command = "demos";
      m.options = resolved_options(*demos);
      const auto recs = load_recordings(o.tracks, &m.inputs);
      const auto d = data::extract_all_demonstrations(recs, sim::ObservationSpec{});
      text::write_file(o.out, data::serialize_demonstrations(d));
      m.artifacts = {o.out};
      out << "demos: " << d.size() << " pairs\n";
    } else if (train->parsed()) {
      for (auto& [k, sub] : trainers) {
        if (!sub->parsed()) continue;
        const auto seed = resolve_seed(o.seed);
        m.command = "train " + k;
        m.options = resolved_options(*sub);
        m.options.emplace_back("seed", std::to_string(seed));
        run_train(k, o, seed, m, out);
      }
    } else if (ev->parsed()) {
      const auto seed = resolve_seed(o.seed);
      m.command = "eval";
      m.options = resolved_options(*ev);
      m.options.emplace_back("seed", std::to_string(seed));
      m.inputs.push_back(o.policy);
      const auto ckpt = nn::parse_checkpoint(text::read_file(o.policy));
      const auto policy = bc::policy_from_checkpoint(ckpt);
      const auto recs = load_recordings(o.tracks, &m.inputs);
      o.eval.seed = seed;
      o.eval.workers = o.workers;
      const std::string name = !o.name.empty() ? o.name : ckpt.meta.count("name") ? ckpt.meta.at("name") : "policy";
      const auto result = eval::run_evaluation(name, policy, recs, o.eval);
      const auto prof = eval::merge_profiles(eval::expert_profiles(recs), {result});
      eval::export_table({result.row}, prof, o.out, profiles_path(o.out));
      m.artifacts = {o.out, profiles_path(o.out)};
      out << eval::table_csv({result.row});
    } else if (ex->parsed()) {
      m.command = "export";
      m.options = resolved_options(*ex);
      run_export(o, m);
    }
    text::write_file(o.out + ".manifest", m.render());
    return 0;
  } catch (const UsageError& e) {
    err << "driveclone: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "driveclone: " << e.what() << "\n";
    return 2;
  }
}

inline int main(int argc, char** argv) {
  return run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}

}  // namespace driveclone::cli
