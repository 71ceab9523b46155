#include "advise/cli.hpp"

#include <csignal>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "advise/augment.hpp"
#include "advise/dataset.hpp"
#include "advise/http_api.hpp"
#include "advise/metrics.hpp"
#include "advise/policy.hpp"
#include "advise/report.hpp"
#include "advise/risk_model.hpp"
#include "advise/service.hpp"
#include "advise/simulation.hpp"
#include "advise/synthetic.hpp"

namespace advise {

using nlohmann::json;
namespace fs = std::filesystem;

std::string content_hash(std::string_view contents) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(contents);
  return os.str();
}

fs::path resolve_output_path(const std::string& pattern, std::string_view contents) {
  static constexpr std::string_view kToken = "{hash}";
  std::string out = pattern;
  const std::string h = content_hash(contents);
  for (auto pos = out.find(kToken); pos != std::string::npos; pos = out.find(kToken, pos + h.size())) {
    out.replace(pos, kToken.size(), h);
  }
  return out;
}

RunManifest::RunManifest(std::string command, const std::vector<std::string>& args)
    : command_(std::move(command)), args_(args) {}

void RunManifest::add_input(const fs::path& path) {
  inputs_.push_back({{"path", path.string()}, {"fnv1a64", content_hash(read_file(path))}});
}

void RunManifest::add_output(const fs::path& path, std::string_view contents) {
  outputs_.push_back({{"path", path.string()}, {"fnv1a64", content_hash(contents)}, {"bytes", contents.size()}});
}

json RunManifest::to_json() const {
  return {{"format", "advise-manifest"}, {"version", 1}, {"command", command_}, {"args", args_},
          {"settings", extra_},          {"inputs", inputs_}, {"outputs", outputs_}};
}

void RunManifest::write(const fs::path& path) const { write_file_atomic(path, to_json().dump(2) + "\n"); }

namespace {

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> args;
};

/// Writes `contents` to the resolved pattern and records it.
fs::path emit(Context& ctx, RunManifest& m, const std::string& pattern, const std::string& contents) {
  const fs::path path = resolve_output_path(pattern, contents);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, contents);
  m.add_output(path, contents);
  ctx.out << "wrote " << path.string() << '\n';
  return path;
}

fs::path manifest_path_for(const fs::path& primary) {
  return primary.string() + ".manifest.json";
}

std::string cases_csv(const std::vector<DefendantCase>& cases) {
  std::ostringstream os;
  write_cases_csv(os, cases);
  return os.str();
}

std::string predictions_csv(const std::vector<HumanPrediction>& p) {
  std::ostringstream os;
  write_predictions_csv(os, p);
  return os.str();
}

std::string records_jsonl(const std::vector<PredictionRecord>& r) {
  std::ostringstream os;
  write_records_jsonl(os, r);
  return os.str();
}

json parse_json_file(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw ValidationError(p.string() + ": " + e.what());
  }
}

HumanModel load_human(const std::string& path) {
  return path.empty() ? HumanModel{} : human_model_from_json(parse_json_file(path));
}

void add_forest_flags(CLI::App* cmd, ForestConfig& f) {
  cmd->add_option("--trees", f.n_estimators, "number of trees")->capture_default_str();
  cmd->add_option("--min-split", f.min_samples_split, "minimum samples to split a node")->capture_default_str();
  cmd->add_option("--min-leaf", f.min_samples_leaf, "minimum samples per leaf")->capture_default_str();
  cmd->add_option("--max-features", f.max_features, "features drawn per split")->capture_default_str();
  cmd->add_option("--max-depth", f.max_depth, "depth limit, negative for none")->capture_default_str();
  cmd->add_option("--threads", f.n_threads, "worker threads, 0 for all cores")->capture_default_str();
}

// ---- gen-data ----

struct GenDataArgs {
  GeneratorConfig gen;
  std::string out = "cases-{hash}.csv";
  std::string generator_out;
  int participants = 0;
  int series = 50;
  std::string predictions_out = "predictions-{hash}.csv";
  std::string human;
};

int cmd_gen_data(Context& ctx, const GenDataArgs& a) {
  a.gen.validate();
  RunManifest m("gen-data", ctx.args);
  const auto ds = generate_synthetic(a.gen);
  const auto primary = emit(ctx, m, a.out, cases_csv(ds.cases));
  const json gen_json = to_json(a.gen);
  m.set("generator", gen_json);
  m.set("seed", a.gen.seed);
  const std::string gen_path =
      a.generator_out.empty() ? (primary.parent_path() / "generator.json").string() : a.generator_out;
  emit(ctx, m, gen_path, gen_json.dump(2) + "\n");
  if (a.participants > 0) {
    const HumanModel hm = load_human(a.human);
    if (!a.human.empty()) m.add_input(a.human);
    m.set("human", to_json(hm));
    const LatentRisk latent(a.gen);
    const auto preds = simulate_unassisted_predictions(
        ds.cases, [&](const DefendantCase& c) { return latent(c); }, hm, a.participants, a.series, a.gen.seed);
    emit(ctx, m, a.predictions_out, predictions_csv(preds));
  }
  m.write(manifest_path_for(primary));
  return 0;
}

// ---- augment ----

struct AugmentArgs {
  std::string cases, predictions;
  double alpha = 0.5;
  std::uint64_t seed = 1;
  bool no_age = false;
  bool no_sampled = false;
  std::string out_cases = "cases-aug-{hash}.csv";
  std::string out_predictions = "predictions-aug-{hash}.csv";
};

int cmd_augment(Context& ctx, const AugmentArgs& a) {
  RunManifest m("augment", ctx.args);
  m.add_input(a.cases);
  m.add_input(a.predictions);
  m.set("seed", a.seed);
  m.set("alpha", a.alpha);
  PredictionDataset ds = load_dataset(a.cases, a.predictions);
  const std::size_t n_cases = ds.cases.size(), n_preds = ds.predictions.size();
  if (!a.no_age) ds = augment_age_variants(ds);
  const std::size_t after_age = ds.predictions.size();
  if (!a.no_sampled) ds = augment_sampled_predictions(ds, a.alpha, RngSeed(a.seed).derive("augment"));
  const auto primary = emit(ctx, m, a.out_cases, cases_csv(ds.cases));
  emit(ctx, m, a.out_predictions, predictions_csv(ds.predictions));
  ctx.out << "cases " << n_cases << " -> " << ds.cases.size() << "; predictions " << n_preds << " -> "
          << after_age << " (age variants) -> " << ds.predictions.size() << '\n';
  m.write(manifest_path_for(primary));
  return 0;
}

// ---- train-risk ----

struct TrainRiskArgs {
  std::string cases;
  RiskModelConfig cfg;
  std::string out = "risk-model-{hash}.json";
};

int cmd_train_risk(Context& ctx, TrainRiskArgs a) {
  RunManifest m("train-risk", ctx.args);
  m.add_input(a.cases);
  const auto cases = load_cases(a.cases);
  const RiskModel model = train_risk_model(cases, a.cfg);
  m.set("seed", a.cfg.seed);
  m.set("forest", to_json(a.cfg.forest));
  m.set("holdout_fraction", a.cfg.holdout_fraction);
  const auto primary = emit(ctx, m, a.out, model.to_json().dump() + "\n");
  const auto& md = model.metadata();
  ctx.out << "train_brier=" << format_number(md.train_brier) << " holdout_brier=" << format_number(md.holdout_brier)
          << " n_train=" << md.n_train << " n_holdout=" << md.n_holdout << '\n';
  m.write(manifest_path_for(primary));
  return 0;
}

// ---- train-policy / calibrate ----

struct PolicyDataArgs {
  std::string cases, predictions, risk_model;
};

PolicyTrainingSet load_policy_set(RunManifest& m, const PolicyDataArgs& d, const RiskModel& risk,
                                  PolicyFeatureOptions f, PolicyLabelOptions l) {
  m.add_input(d.cases);
  m.add_input(d.predictions);
  const auto ds = load_dataset(d.cases, d.predictions, risk.encoding().offenses());
  return build_policy_training_set(ds, risk, f, l);
}

struct TrainPolicyArgs {
  PolicyDataArgs data;
  ForestConfig forest;
  std::uint64_t seed = 1;
  bool no_gap = false;
  bool rounded_labels = false;
  bool calibrate = false;
  double threshold = kDefaultLearnedThreshold;
  std::string out = "policy-{hash}.json";
};

int cmd_train_policy(Context& ctx, TrainPolicyArgs a) {
  RunManifest m("train-policy", ctx.args);
  const RiskModel risk = RiskModel::load(a.data.risk_model);
  m.add_input(a.data.risk_model);
  const PolicyFeatureOptions f{.include_gap = !a.no_gap};
  const PolicyLabelOptions l{.use_rounded_alg = a.rounded_labels};
  const auto ts = load_policy_set(m, a.data, risk, f, l);
  a.forest.seed = RngSeed(a.seed).derive("policy/forest").value();
  auto model = std::make_shared<const ForestModel>(train_learned_policy(ts, a.forest));
  double threshold = a.threshold;
  if (a.calibrate) threshold = calibrate_threshold(*model, ts);
  AdvisingPolicySpec spec = AdvisingPolicySpec::learned(model, risk.encoding(), threshold, f);
  spec.label_options = l;
  m.set("seed", a.seed);
  m.set("forest", to_json(a.forest));
  m.set("rows", ts.x.rows());
  m.set("label_base_rate", ts.base_rate());
  const auto primary = emit(ctx, m, a.out, spec.to_json().dump() + "\n");
  ctx.out << "rows=" << ts.x.rows() << " label_base_rate=" << format_number(ts.base_rate())
          << " threshold=" << format_number(threshold) << '\n';
  m.write(manifest_path_for(primary));
  return 0;
}

struct CalibrateArgs {
  PolicyDataArgs data;
  std::string policy;
  std::string out = "policy-calibrated-{hash}.json";
};

int cmd_calibrate(Context& ctx, const CalibrateArgs& a) {
  RunManifest m("calibrate", ctx.args);
  AdvisingPolicySpec spec = AdvisingPolicySpec::load(a.policy);
  m.add_input(a.policy);
  if (spec.kind != TreatmentKind::Learned) throw ValidationError("calibrate needs a Learned policy file");
  const RiskModel risk = RiskModel::load(a.data.risk_model);
  m.add_input(a.data.risk_model);
  if (!(risk.encoding().offenses() == spec.encoding.offenses())) {
    throw ValidationError("policy and risk model use different offense categories");
  }
  const auto ts = load_policy_set(m, a.data, risk, spec.feature_options, spec.label_options);
  const auto scores = spec.model->predict_proba_batch(ts.x);
  spec.threshold = calibrate_threshold_from_scores(scores, ts.base_rate());
  std::size_t advised = 0;
  for (double s : scores) advised += s >= spec.threshold;
  const double freq = static_cast<double>(advised) / static_cast<double>(ts.x.rows());
  m.set("label_base_rate", ts.base_rate());
  m.set("threshold", spec.threshold);
  m.set("advise_frequency", freq);
  const auto primary = emit(ctx, m, a.out, spec.to_json().dump() + "\n");
  ctx.out << "threshold=" << format_number(spec.threshold) << " advise_frequency=" << format_number(freq)
          << " label_base_rate=" << format_number(ts.base_rate()) << '\n';
  m.write(manifest_path_for(primary));
  return 0;
}

// ---- simulate ----

struct SimulateArgs {
  std::string treatment = "all";
  std::string cases, risk_model, policy, generator, human;
  int participants = 200;
  int series = 50;
  std::uint64_t seed = 1;
  double random_p = kDefaultRandomAdviseProbability;
  int threads = 1;
  int bootstrap_rounds = 2000;
  std::string out_dir = "simulation";
};

RaceLookup race_lookup(std::shared_ptr<const std::vector<DefendantCase>> cases) {
  auto index = std::make_shared<std::unordered_map<std::string, Race>>();
  for (const auto& c : *cases) index->emplace(c.id, c.race);
  return [index](const std::string& id) {
    auto it = index->find(std::string(parent_case_id(id)));
    if (it == index->end()) throw ValidationError("no race known for case " + id);
    return it->second;
  };
}

void write_report(Context& ctx, RunManifest& m, const fs::path& dir, const TreatmentReport& rep) {
  emit(ctx, m, (dir / "report.txt").string(), render_table(rep));
  emit(ctx, m, (dir / "report.kv").string(), render_kv(rep));
}

int cmd_simulate(Context& ctx, const SimulateArgs& a) {
  RunManifest m("simulate", ctx.args);
  std::vector<TreatmentKind> kinds;
  if (a.treatment == "all") {
    kinds.assign(kAllTreatments.begin(), kAllTreatments.end());
  } else {
    kinds.push_back(parse_treatment(a.treatment));
  }
  const bool needs_policy = std::find(kinds.begin(), kinds.end(), TreatmentKind::Learned) != kinds.end();
  const auto risk = std::make_shared<const RiskModel>(RiskModel::load(a.risk_model));
  m.add_input(a.risk_model);
  std::optional<AdvisingPolicySpec> learned;
  if (needs_policy) {
    if (a.policy.empty()) throw ValidationError("--policy is required for the Learned treatment");
    learned = AdvisingPolicySpec::load(a.policy);
    m.add_input(a.policy);
    if (learned->kind != TreatmentKind::Learned) throw ValidationError("--policy must hold a Learned policy");
  }
  const GeneratorConfig gen = generator_config_from_json(parse_json_file(a.generator));
  m.add_input(a.generator);
  const auto latent = std::make_shared<const LatentRisk>(gen);
  auto pool =
      std::make_shared<const std::vector<DefendantCase>>(load_cases(a.cases, risk->encoding().offenses()));
  m.add_input(a.cases);
  const HumanModel hm = load_human(a.human);
  if (!a.human.empty()) m.add_input(a.human);
  m.set("seed", a.seed);
  m.set("participants", a.participants);
  m.set("series_length", a.series);
  m.set("random_advise_probability", a.random_p);
  m.set("human", to_json(hm));

  std::vector<ExperimentPlan> plans;
  for (auto kind : kinds) {
    ExperimentPlan p;
    p.treatment = kind;
    p.n_participants = a.participants;
    p.series_length = a.series;
    p.pool = pool;
    switch (kind) {
      case TreatmentKind::Learned: p.policy = *learned; break;
      case TreatmentKind::Random: p.policy = AdvisingPolicySpec::random(a.random_p, a.seed); break;
      default: p.policy = AdvisingPolicySpec::simple(kind); break;
    }
    p.algorithm = [risk](const DefendantCase& c) { return risk->predict(c); };
    p.latent_risk = [latent](const DefendantCase& c) { return (*latent)(c); };
    p.human = hm;
    p.master_seed = a.seed;
    p.n_threads = a.threads;
    plans.push_back(std::move(p));
  }
  ReportOptions opts;
  opts.ci.bootstrap_rounds = a.bootstrap_rounds;
  opts.ci.seed = a.seed;
  opts.series_length = a.series;
  const RaceLookup races = race_lookup(pool);
  const SuiteResult suite = run_suite(plans, &races, opts);
  const fs::path dir = a.out_dir;
  for (const auto& run : suite.runs) {
    const fs::path tdir = dir / std::string(to_string(run.treatment));
    emit(ctx, m, (tdir / "records.jsonl").string(), records_jsonl(run.records));
    write_report(ctx, m, tdir, run.report);
  }
  emit(ctx, m, (dir / "suite.kv").string(), render_suite_kv(suite.summary));
  emit(ctx, m, (dir / "suite.txt").string(), render_suite_table(suite.summary));
  ctx.out << render_suite_table(suite.summary);
  m.write(dir / "manifest.json");
  return 0;
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string records;
  std::string cases;
  std::string label;
  int series = 0;
  std::string ci = "normal";
  int bootstrap_rounds = 2000;
  std::uint64_t seed = 1;
  std::string fairness = "pooled";
  std::string out_dir;
};

int cmd_evaluate(Context& ctx, const EvaluateArgs& a) {
  RunManifest m("evaluate", ctx.args);
  const auto records = load_records(a.records);
  m.add_input(a.records);
  ReportOptions opts;
  opts.series_length = a.series;
  opts.ci.method = a.ci == "bootstrap" ? CiOptions::Method::Bootstrap : CiOptions::Method::Normal;
  opts.ci.bootstrap_rounds = a.bootstrap_rounds;
  opts.ci.seed = a.seed;
  opts.fairness_aggregation =
      a.fairness == "participant" ? FairnessAggregation::ParticipantAveraged : FairnessAggregation::Pooled;
  std::optional<RaceLookup> races;
  if (!a.cases.empty()) {
    races = race_lookup(std::make_shared<const std::vector<DefendantCase>>(load_cases(a.cases)));
    m.add_input(a.cases);
  }
  const std::string label = a.label.empty() ? fs::path(a.records).parent_path().filename().string() : a.label;
  const TreatmentReport rep = build_treatment_report(label, records, races ? &*races : nullptr, opts);
  ctx.out << render_table(rep);
  if (!a.out_dir.empty()) {
    write_report(ctx, m, a.out_dir, rep);
    m.write(fs::path(a.out_dir) / "manifest.json");
  }
  return 0;
}

// ---- serve ----

struct ServeArgs {
  std::string config;
  int port = -1;
  std::string data_dir;
  std::string host;
};

HttpServer* g_server = nullptr;
extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(Context& ctx, const ServeArgs& a) {
  ServerSettings s = load_server_settings(a.config);
  if (a.port >= 0) s.port = a.port;
  if (!a.data_dir.empty()) s.data_dir = a.data_dir;
  if (!a.host.empty()) s.host = a.host;
  SessionService service(make_service_config(s));
  HttpServer server(service);
  const int port = server.bind(s.host, s.port);
  if (port < 0) throw ValidationError("cannot bind " + s.host + ":" + std::to_string(s.port));
  RunManifest m("serve", ctx.args);
  m.add_input(a.config);
  m.add_input(s.cases);
  m.add_input(s.risk_model);
  m.add_input(s.policy);
  m.set("seed", s.seed);
  m.set("port", port);
  m.set("data_dir", s.data_dir.string());
  m.write(s.data_dir / "serve-manifest.json");
  ctx.out << "listening on http://" << s.host << ':' << port << " (" << service.session_count()
          << " sessions restored from " << s.data_dir.string() << ")" << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Selective algorithmic advice: data, models, simulation, and session server", "advise"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  Context ctx{out, err, std::vector<std::string>(args.begin() + (args.empty() ? 0 : 1), args.end())};

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "generate synthetic defendant cases and optional human predictions");
  g->add_option("--n", gen.gen.n_cases, "number of cases")->capture_default_str();
  g->add_option("--seed", gen.gen.seed, "random seed")->capture_default_str();
  g->add_option("--base-rate", gen.gen.base_violation_rate, "target violation rate")->capture_default_str();
  g->add_option("--id-prefix", gen.gen.id_prefix, "case id prefix")->capture_default_str();
  g->add_option("--out", gen.out, "cases CSV; {hash} is replaced by the content hash")->capture_default_str();
  g->add_option("--generator-out", gen.generator_out, "generator config JSON (default: generator.json next to --out)");
  g->add_option("--participants", gen.participants, "simulated participants giving unassisted predictions")
      ->capture_default_str();
  g->add_option("--series", gen.series, "cases per simulated participant")->capture_default_str();
  g->add_option("--predictions-out", gen.predictions_out, "predictions CSV")->capture_default_str();
  g->add_option("--human", gen.human, "human model JSON (default: built-in)");

  AugmentArgs aug;
  auto* au = app.add_subcommand("augment", "age-variant and sampled-prediction augmentation");
  au->add_option("--cases", aug.cases, "cases CSV")->required();
  au->add_option("--predictions", aug.predictions, "predictions CSV")->required();
  au->add_option("--alpha", aug.alpha, "additive smoothing for sampled predictions")->capture_default_str();
  au->add_option("--seed", aug.seed, "random seed")->capture_default_str();
  au->add_flag("--no-age-variants", aug.no_age, "skip the age-variant step");
  au->add_flag("--no-sampled", aug.no_sampled, "skip the sampled-prediction step");
  au->add_option("--out-cases", aug.out_cases, "augmented cases CSV")->capture_default_str();
  au->add_option("--out-predictions", aug.out_predictions, "augmented predictions CSV")->capture_default_str();

  TrainRiskArgs tr;
  auto* trc = app.add_subcommand("train-risk", "fit the risk-assessment forest");
  trc->add_option("--cases", tr.cases, "cases CSV with outcomes")->required();
  add_forest_flags(trc, tr.cfg.forest);
  trc->add_option("--holdout", tr.cfg.holdout_fraction, "holdout fraction")->capture_default_str();
  trc->add_option("--seed", tr.cfg.seed, "random seed")->capture_default_str();
  trc->add_option("--out", tr.out, "model JSON")->capture_default_str();

  TrainPolicyArgs tp;
  auto* tpc = app.add_subcommand("train-policy", "fit the learned advising policy");
  tpc->add_option("--cases", tp.data.cases, "augmented cases CSV")->required();
  tpc->add_option("--predictions", tp.data.predictions, "augmented predictions CSV")->required();
  tpc->add_option("--risk-model", tp.data.risk_model, "risk model JSON")->required();
  add_forest_flags(tpc, tp.forest);
  tpc->add_option("--seed", tp.seed, "random seed")->capture_default_str();
  tpc->add_flag("--no-gap", tp.no_gap, "omit the |alg - human| feature");
  tpc->add_flag("--rounded-labels", tp.rounded_labels, "label with the grid-rounded algorithm prediction");
  tpc->add_option("--threshold", tp.threshold, "decision threshold stored in the policy")->capture_default_str();
  tpc->add_flag("--calibrate", tp.calibrate, "calibrate the threshold on the training set");
  tpc->add_option("--out", tp.out, "policy JSON")->capture_default_str();

  CalibrateArgs cal;
  auto* cc = app.add_subcommand("calibrate", "match the advise frequency to the label base rate");
  cc->add_option("--policy", cal.policy, "policy JSON")->required();
  cc->add_option("--cases", cal.data.cases, "augmented cases CSV")->required();
  cc->add_option("--predictions", cal.data.predictions, "augmented predictions CSV")->required();
  cc->add_option("--risk-model", cal.data.risk_model, "risk model JSON")->required();
  cc->add_option("--out", cal.out, "calibrated policy JSON")->capture_default_str();

  SimulateArgs sim;
  auto* sc = app.add_subcommand("simulate", "run simulated participants through the treatments");
  sc->add_option("--treatment", sim.treatment, "treatment name or 'all'")->capture_default_str();
  sc->add_option("--cases", sim.cases, "case pool CSV with outcomes")->required();
  sc->add_option("--risk-model", sim.risk_model, "risk model JSON")->required();
  sc->add_option("--policy", sim.policy, "learned policy JSON");
  sc->add_option("--generator", sim.generator, "generator JSON (ground-truth risk)")->required();
  sc->add_option("--human", sim.human, "human model JSON (default: built-in)");
  sc->add_option("--participants", sim.participants, "participants per treatment")->capture_default_str();
  sc->add_option("--series", sim.series, "cases per participant")->capture_default_str();
  sc->add_option("--seed", sim.seed, "random seed")->capture_default_str();
  sc->add_option("--random-p", sim.random_p, "advise probability of the Random policy")->capture_default_str();
  sc->add_option("--threads", sim.threads, "worker threads, 0 for all cores")->capture_default_str();
  sc->add_option("--bootstrap-rounds", sim.bootstrap_rounds, "bootstrap resamples")->capture_default_str();
  sc->add_option("--out-dir", sim.out_dir, "output directory")->capture_default_str();

  EvaluateArgs ev;
  auto* ec = app.add_subcommand("evaluate", "report metrics for a records file");
  ec->add_option("records", ev.records, "records JSONL")->required();
  ec->add_option("--cases", ev.cases, "cases CSV, enables fairness metrics");
  ec->add_option("--label", ev.label, "report label (default: parent directory name)");
  ec->add_option("--series", ev.series, "series length (default: largest period)")->capture_default_str();
  ec->add_option("--ci", ev.ci, "normal or bootstrap")
      ->check(CLI::IsMember({"normal", "bootstrap"}))
      ->capture_default_str();
  ec->add_option("--bootstrap-rounds", ev.bootstrap_rounds, "bootstrap resamples")->capture_default_str();
  ec->add_option("--seed", ev.seed, "bootstrap seed")->capture_default_str();
  ec->add_option("--fairness", ev.fairness, "pooled or participant")
      ->check(CLI::IsMember({"pooled", "participant"}))
      ->capture_default_str();
  ec->add_option("--out-dir", ev.out_dir, "also write report.txt and report.kv here");

  ServeArgs sv;
  auto* svc = app.add_subcommand("serve", "run the /v1 session server");
  svc->add_option("--config", sv.config, "server config JSON")->required();
  svc->add_option("--port", sv.port, "port (overrides config and ADVISE_PORT)");
  svc->add_option("--data-dir", sv.data_dir, "event-log directory (overrides config and ADVISE_DATA_DIR)");
  svc->add_option("--host", sv.host, "bind address");

  try {
    std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(rest.begin(), rest.end());
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) return cmd_gen_data(ctx, gen);
    if (*au) return cmd_augment(ctx, aug);
    if (*trc) return cmd_train_risk(ctx, tr);
    if (*tpc) return cmd_train_policy(ctx, tp);
    if (*cc) return cmd_calibrate(ctx, cal);
    if (*sc) return cmd_simulate(ctx, sim);
    if (*ec) return cmd_evaluate(ctx, ev);
    if (*svc) return cmd_serve(ctx, sv);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run_cli(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace advise
