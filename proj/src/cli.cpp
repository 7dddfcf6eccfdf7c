#include "rasood/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "rasood/analysis.hpp"
#include "rasood/dumpio.hpp"
#include "rasood/enhancers.hpp"
#include "rasood/metrics.hpp"
#include "rasood/scorers.hpp"
#include "rasood/synthlab.hpp"

namespace rasood::cli {

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoFailure:
    case ErrorCode::BadMagic:
    case ErrorCode::UnsupportedVersion:
    case ErrorCode::TruncatedPayload:
    case ErrorCode::NonFinitePayload:
    case ErrorCode::RaggedRows:
    case ErrorCode::NonNumericCell: return kIoError;
    case ErrorCode::SingularCovariance:
    case ErrorCode::EigenFailure:
    case ErrorCode::DegenerateSplit:
    case ErrorCode::ZeroVariance:
    case ErrorCode::ZeroVector:
    case ErrorCode::ZeroMassSample:
    case ErrorCode::DegenerateSet: return kNumericError;
    default: return kValidationError;
  }
}

/// Writes to --out when given, else to the command's stdout.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
      if (!*file_) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "' for writing");
      stream_ = file_.get();
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

std::string dataset_name(const std::string& path) { return std::filesystem::path(path).stem().string(); }

struct CommonArgs {
  std::string id;
  std::vector<std::string> ood;
  std::string head;
  std::string profile;
  std::string config;
  std::string train;
  std::string out;
  std::string in;
  std::string spec;
  std::string grid = "0:95:5";
  std::optional<std::uint64_t> seed;
  bool markdown = false;
  bool allow_any_tag = false;
  bool pooled = false;
  double temperature = 1.0;
  double percentile_p = kDefaultScalePercentile;
};

std::string resolve(const std::string& flag, const io::ExperimentConfig& cfg, const std::string& key) {
  if (!flag.empty()) return flag;
  const auto it = cfg.paths.find(key);
  return it == cfg.paths.end() ? std::string() : it->second;
}

double param_or(const std::map<std::string, std::string>& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  io::KeyValueConfig kv;
  kv.set(key, it->second);
  return kv.get_double(key, fallback);
}

EnhancerSpec calibrate_enhancer(const io::NamedParams& named, const ActivationSet& train, const LinearHead& head,
                                const std::string& profile_path) {
  const EnhancerKind kind = parse_enhancer_kind(named.name);
  auto profile = [&]() { return profile_path.empty() ? build_profile(train) : io::read_profile(profile_path); };
  switch (kind) {
    case EnhancerKind::Identity: return EnhancerSpec::identity();
    case EnhancerKind::Ras: return EnhancerSpec::ras(profile());
    case EnhancerKind::RasInhibit: return EnhancerSpec::ras_inhibit(profile());
    case EnhancerKind::RasExcite: return EnhancerSpec::ras_excite(profile());
    case EnhancerKind::React: {
      const double p = param_or(named.params, "percentile_p", kDefaultReactPercentile);
      const auto fixed = named.params.find("react_threshold_c");
      const double c = fixed != named.params.end() ? param_or(named.params, "react_threshold_c", 0.0)
                                                   : calibrate_react(train, p);
      return EnhancerSpec::react(c, p);
    }
    case EnhancerKind::AshP: return EnhancerSpec::ash_p(param_or(named.params, "percentile_p", kDefaultAshPercentile));
    case EnhancerKind::AshB: return EnhancerSpec::ash_b(param_or(named.params, "percentile_p", kDefaultAshPercentile));
    case EnhancerKind::AshS: return EnhancerSpec::ash_s(param_or(named.params, "percentile_p", kDefaultAshPercentile));
    case EnhancerKind::Scale:
      return EnhancerSpec::scale(param_or(named.params, "percentile_p", kDefaultScalePercentile));
    case EnhancerKind::Dice: {
      const double p = param_or(named.params, "percentile_p", 0.0);
      return EnhancerSpec::dice(calibrate_dice(train, head, p), p);
    }
    case EnhancerKind::L2Norm: {
      double target = 0.0;
      if (named.params.count("l2_target")) {
        target = param_or(named.params, "l2_target", 0.0);
      } else {
        for (std::size_t i = 0; i < train.size(); ++i) target += l2_norm(train.row(i));
        target /= static_cast<double>(train.size());
      }
      return EnhancerSpec::l2norm(target);
    }
  }
  throw Error(ErrorCode::ConfigError, "enhancer: unhandled '" + named.name + "'");
}

ScorerSpec scorer_from_config(const io::NamedParams& named, std::size_t dim) {
  ScorerSpec spec;
  spec.kind = parse_scorer_kind(named.name);
  spec.temperature = param_or(named.params, "temperature", 1.0);
  if (!(spec.temperature > 0.0)) throw Error(ErrorCode::ConfigError, "temperature: must be positive");
  spec.gen_gamma = param_or(named.params, "gen_gamma", 0.1);
  if (named.params.count("gen_top_m")) {
    spec.gen_top_m = static_cast<std::size_t>(param_or(named.params, "gen_top_m", 1.0));
  }
  spec.mds_ridge = param_or(named.params, "mds_ridge", 1e-6);
  spec.vim_subspace_dim = static_cast<std::size_t>(param_or(named.params, "vim_dim", static_cast<double>(dim / 2)));
  return spec;
}

ActivationSet load_set(const std::string& path, const char* role) {
  if (path.empty()) throw Error(ErrorCode::ConfigError, std::string(role) + ": no path given");
  return io::read_activation_set(path);
}

int cmd_profile(const CommonArgs& a, std::ostream& out) {
  const ActivationSet set = load_set(a.in, "--in");
  if (set.tag() != DistTag::IdTrain && !a.allow_any_tag) {
    throw Error(ErrorCode::InvalidArgument,
                std::string("profile source must be tagged id_train, got ") + to_string(set.tag()) +
                    " (pass --allow-any-tag to override)");
  }
  if (a.out.empty()) throw Error(ErrorCode::ConfigError, "--out: profile output path required");
  const ReferenceProfile profile = build_profile(set);
  io::write_profile(profile, a.out);
  out << "dim,count,mu_min,mu_max\n"
      << profile.dim() << ',' << profile.count() << ',' << io::format_double(profile.mu().front()) << ','
      << io::format_double(profile.mu().back()) << '\n';
  return kOk;
}

int cmd_eval(const CommonArgs& a, std::ostream& out) {
  if (a.config.empty()) throw Error(ErrorCode::ConfigError, "--config: required");
  const auto cfg = io::parse_experiment_config(io::KeyValueConfig::load(a.config));
  const ActivationSet id = load_set(resolve(a.id, cfg, "id"), "--id").with_tag(DistTag::IdTest);
  std::vector<std::string> ood_paths = a.ood;
  if (ood_paths.empty() && cfg.paths.count("ood")) ood_paths.push_back(cfg.paths.at("ood"));
  if (ood_paths.empty()) throw Error(ErrorCode::ConfigError, "--ood: at least one OoD dump required");
  const std::string head_path = resolve(a.head, cfg, "head");
  if (head_path.empty()) throw Error(ErrorCode::ConfigError, "--head: required");
  const LinearHead head = io::read_linear_head(head_path);
  const std::string train_path = resolve(a.train, cfg, "train");
  const ActivationSet train = train_path.empty() ? id : io::read_activation_set(train_path);

  const EnhancerSpec enhancer = calibrate_enhancer(cfg.enhancer, train, head, resolve(a.profile, cfg, "profile"));
  const ScorerSpec scorer = calibrate_scorer(scorer_from_config(cfg.scorer, head.dim()), train, head, enhancer);
  const ScoreSet id_scores = score_set(id, head, enhancer, scorer);

  const std::string method = cfg.enhancer.name + "+" + cfg.scorer.name;
  std::vector<MetricRow> rows;
  for (const auto& path : ood_paths) {
    ScoreSet combined = id_scores;
    combined.append(score_set(io::read_activation_set(path).with_tag(DistTag::Ood), head, enhancer, scorer));
    rows.push_back(evaluate(method, dataset_name(path), combined));
  }
  rows = with_average(std::move(rows));
  Sink sink(a.out, out);
  if (a.markdown) {
    io::write_metrics_markdown(rows, *sink);
  } else {
    io::write_metrics_csv(rows, *sink);
  }
  return kOk;
}

int cmd_gamma(const CommonArgs& a, std::ostream& out) {
  const ActivationSet id = load_set(a.id, "--id");
  if (a.ood.size() != 1) throw Error(ErrorCode::ConfigError, "--ood: gamma takes exactly one OoD dump");
  const ActivationSet ood = load_set(a.ood.front(), "--ood");
  const GammaCurve curve = gamma_curve(id, ood, parse_grid(a.grid),
                                       a.pooled ? GammaEstimator::Pooled : GammaEstimator::PerSample);
  Sink sink(a.out, out);
  io::write_gamma_csv(curve, *sink);
  return kOk;
}

int cmd_condition(const CommonArgs& a, std::ostream& out) {
  const ActivationSet id = load_set(a.id, "--id");
  if (a.ood.size() != 1) throw Error(ErrorCode::ConfigError, "--ood: condition takes exactly one OoD dump");
  const ActivationSet ood = load_set(a.ood.front(), "--ood");
  const MuSigmaCondition cond = mu_sigma_condition(id, ood);
  Sink sink(a.out, out);
  *sink << "ratio_id,ratio_ood,holds,id_rectified,ood_rectified\n"
        << io::format_double(cond.ratio_id) << ',' << io::format_double(cond.ratio_ood) << ','
        << (cond.holds ? "true" : "false") << ',' << (looks_rectified(id) ? "true" : "false") << ','
        << (looks_rectified(ood) ? "true" : "false") << '\n';
  return kOk;
}

int cmd_scaling(const CommonArgs& a, std::ostream& out) {
  const ActivationSet set = load_set(a.in, "--in");
  const ScalingDiagnostics diag = scaling_diagnostics(set, a.percentile_p);
  Sink sink(a.out, out);
  *sink << "sample,r,rectified\n";
  const char* rectified = diag.rectified ? "true" : "false";
  for (std::size_t k = 0; k < diag.factors.size(); ++k) {
    *sink << diag.sample_index[k] << ',' << io::format_double(diag.factors[k]) << ',' << rectified << '\n';
  }
  for (std::size_t i : diag.degenerate) *sink << i << ",nan," << rectified << '\n';
  return kOk;
}

int cmd_residuals(const CommonArgs& a, std::ostream& out) {
  if (a.ood.size() != 1) throw Error(ErrorCode::ConfigError, "--ood: residuals take exactly one OoD dump");
  if (a.profile.empty()) throw Error(ErrorCode::ConfigError, "--profile: required");
  const ResidualProfile res = residual_profile(load_set(a.ood.front(), "--ood"), io::read_profile(a.profile));
  Sink sink(a.out, out);
  io::write_residuals_csv(res, *sink);
  return kOk;
}

int cmd_synth(const CommonArgs& a, std::ostream& out) {
  if (a.spec.empty()) throw Error(ErrorCode::ConfigError, "--spec: required");
  if (a.out.empty()) throw Error(ErrorCode::ConfigError, "--out: required");
  const auto kv = io::KeyValueConfig::load(a.spec);
  const std::string kind = kv.get_or("kind", "rect_gauss");
  const std::uint64_t seed = a.seed.value_or(kv.get_uint("seed", 0));
  const DistTag tag = parse_dist_tag(kv.get_or("tag", "id_train"));
  if (kind == "rect_gauss") {
    RectGaussSpec spec;
    spec.mu = kv.get_double("mu", 0.0);
    spec.sigma = kv.get_double("sigma", 1.0);
    spec.dim = kv.get_uint("dim", 1);
    spec.n = kv.get_uint("n", 1);
    spec.rectified = kv.get_bool("rectified", true);
    spec.seed = seed;
    spec.tag = tag;
    const ActivationSet set = sample_rect_gauss(spec);
    io::write_activation_set(set, a.out);
    out << "samples,dim,rectified\n" << set.size() << ',' << set.dim() << ',' << (spec.rectified ? "true" : "false") << '\n';
  } else if (kind == "class_clouds") {
    const ClassClouds clouds = sample_class_clouds(kv.get_uint("classes", 2), kv.get_uint("dim", 2),
                                                   kv.get_uint("n_per_class", 1), kv.get_double("mean_scale", 1.0),
                                                   seed, tag);
    io::write_activation_set(clouds.set, a.out);
    const std::string head_out = kv.get_or("head_out", a.out + ".head.csv");
    io::write_linear_head(clouds.head, head_out);
    out << "samples,dim,classes\n" << clouds.set.size() << ',' << clouds.set.dim() << ','
        << clouds.head.num_classes() << '\n';
  } else if (kind == "toy_network") {
    const auto hidden64 = kv.get_uint_list("hidden");
    std::vector<std::size_t> hidden(hidden64.begin(), hidden64.end());
    std::vector<LayerActivation> acts;
    std::stringstream names(kv.get_or("activations", ""));
    for (std::string name; std::getline(names, name, ',');) acts.push_back(parse_layer_activation(name));
    const ToyNetwork net =
        ToyNetwork::random(kv.get_uint("input_dim", 1), hidden, acts, kv.get_uint("classes", 2), seed);
    io::write_toy_network(net, a.out);
    out << "layers,input_dim,classes\n" << net.layers().size() << ',' << net.input_dim() << ','
        << net.head().num_classes() << '\n';
  } else {
    throw Error(ErrorCode::ConfigError, "kind: unknown synthetic kind '" + kind + "'");
  }
  return kOk;
}

int cmd_accuracy(const CommonArgs& a, std::ostream& out) {
  const io::ExperimentConfig cfg =
      a.config.empty() ? io::ExperimentConfig{} : io::parse_experiment_config(io::KeyValueConfig::load(a.config));
  const ActivationSet id = load_set(resolve(a.id, cfg, "id"), "--id");
  const std::string head_path = resolve(a.head, cfg, "head");
  if (head_path.empty()) throw Error(ErrorCode::ConfigError, "--head: required");
  const LinearHead head = io::read_linear_head(head_path);
  const std::string train_path = resolve(a.train, cfg, "train");
  const ActivationSet train = train_path.empty() ? id : io::read_activation_set(train_path);
  const EnhancerSpec enhancer = calibrate_enhancer(cfg.enhancer, train, head, resolve(a.profile, cfg, "profile"));
  const AccuracyDelta acc = accuracy_delta(id, head, enhancer);
  Sink sink(a.out, out);
  *sink << "acc_base,acc_enh,delta,agreement\n"
        << io::format_double(acc.base) << ',' << io::format_double(acc.enhanced) << ','
        << io::format_double(acc.delta) << ',' << io::format_double(acc.agreement) << '\n';
  return kOk;
}

int cmd_energy(const CommonArgs& a, std::ostream& out) {
  const ActivationSet id = load_set(a.id, "--id");
  if (a.ood.size() != 1) throw Error(ErrorCode::ConfigError, "--ood: energy takes exactly one OoD dump");
  const ActivationSet ood = load_set(a.ood.front(), "--ood");
  if (a.head.empty()) throw Error(ErrorCode::ConfigError, "--head: required");
  const LinearHead head = io::read_linear_head(a.head);
  const ReferenceProfile profile =
      a.profile.empty() ? build_profile(a.train.empty() ? id : io::read_activation_set(a.train))
                        : io::read_profile(a.profile);
  const auto rows = energy_ablation(id, ood, head, profile, a.temperature);
  Sink sink(a.out, out);
  *sink << "method,id_mean,id_std,ood_mean,ood_std,id_delta_mean,ood_delta_mean,auroc,auroc_delta\n";
  for (const auto& r : rows) {
    *sink << r.method << ',' << io::format_double(r.id.mean) << ',' << io::format_double(r.id.stddev) << ','
          << io::format_double(r.ood.mean) << ',' << io::format_double(r.ood.stddev) << ','
          << io::format_double(r.id.delta_mean_vs_baseline) << ',' << io::format_double(r.ood.delta_mean_vs_baseline)
          << ',' << io::format_double(r.auroc) << ',' << io::format_double(r.auroc_delta) << '\n';
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Post-hoc OoD detection toolkit: ranked activation shift, baselines, metrics and diagnostics",
               "rasood"};
  app.require_subcommand(1);
  CommonArgs a;
  std::function<int(const CommonArgs&, std::ostream&)> handler;

  auto add = [&](const std::string& name, const std::string& help, auto fn) {
    auto* sub = app.add_subcommand(name, help);
    sub->callback([&handler, fn] { handler = fn; });
    return sub;
  };

  auto* profile = add("profile", "build a ranked reference profile from an ID training dump", cmd_profile);
  profile->add_option("--in", a.in, "ID training dump")->required();
  profile->add_option("--out", a.out, "profile output path")->required();
  profile->add_flag("--allow-any-tag", a.allow_any_tag, "accept dumps not tagged id_train");

  auto* eval = add("eval", "score ID vs each OoD dump and emit AUROC/FPR95/AUPR rows", cmd_eval);
  eval->add_option("--id", a.id, "ID test dump");
  eval->add_option("--ood", a.ood, "OoD dump (repeatable)");
  eval->add_option("--head", a.head, "linear head CSV");
  eval->add_option("--profile", a.profile, "precomputed reference profile");
  eval->add_option("--train", a.train, "ID training dump used for calibration (defaults to --id)");
  eval->add_option("--config", a.config, "key=value experiment config")->required();
  eval->add_option("--out", a.out, "output CSV (stdout when omitted)");
  eval->add_flag("--markdown", a.markdown, "render a markdown table instead of CSV");

  auto* gamma = add("gamma", "Gamma(p) curve between an ID and an OoD dump", cmd_gamma);
  gamma->add_option("--id", a.id, "ID dump")->required();
  gamma->add_option("--ood", a.ood, "OoD dump")->required();
  gamma->add_option("--grid", a.grid, "percentile grid start:stop:step");
  gamma->add_flag("--pooled", a.pooled, "ratio of pooled sums instead of mean of per-sample ratios");
  gamma->add_option("--out", a.out, "output CSV");

  auto* condition = add("condition", "mean/std condition and rectification check", cmd_condition);
  condition->add_option("--id", a.id, "ID dump")->required();
  condition->add_option("--ood", a.ood, "OoD dump")->required();
  condition->add_option("--out", a.out, "output CSV");

  auto* scaling = add("scaling", "per-sample scaling factor r = Q / Q_p", cmd_scaling);
  scaling->add_option("--in", a.in, "activation dump")->required();
  scaling->add_option("--p", a.percentile_p, "percentile");
  scaling->add_option("--out", a.out, "output CSV");

  auto* residuals = add("residuals", "ranked OoD mean minus the reference profile", cmd_residuals);
  residuals->add_option("--ood", a.ood, "OoD dump")->required();
  residuals->add_option("--profile", a.profile, "reference profile")->required();
  residuals->add_option("--out", a.out, "output CSV");

  auto* synth = add("synth", "generate a synthetic dump, class clouds with head, or a toy network", cmd_synth);
  synth->add_option("--spec", a.spec, "key=value generator spec")->required();
  synth->add_option("--out", a.out, "output path")->required();
  synth->add_option("--seed", a.seed, "override the spec seed");

  auto* accuracy = add("accuracy", "top-1 accuracy with and without an enhancer", cmd_accuracy);
  accuracy->add_option("--id", a.id, "labelled ID dump");
  accuracy->add_option("--head", a.head, "linear head CSV");
  accuracy->add_option("--profile", a.profile, "precomputed reference profile");
  accuracy->add_option("--train", a.train, "calibration dump (defaults to --id)");
  accuracy->add_option("--config", a.config, "config naming the enhancer");
  accuracy->add_option("--out", a.out, "output CSV");

  auto* energy = add("energy", "energy-score statistics for EBO, +inhibit, +excite, +RAS", cmd_energy);
  energy->add_option("--id", a.id, "ID dump")->required();
  energy->add_option("--ood", a.ood, "OoD dump")->required();
  energy->add_option("--head", a.head, "linear head CSV")->required();
  energy->add_option("--profile", a.profile, "reference profile");
  energy->add_option("--train", a.train, "profile source when --profile is absent (defaults to --id)");
  energy->add_option("--temperature", a.temperature, "EBO temperature");
  energy->add_option("--out", a.out, "output CSV");

  std::vector<std::string> argv_store = {"rasood"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kValidationError;
  }

  try {
    return handler(a, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }
}

}  // namespace rasood::cli
