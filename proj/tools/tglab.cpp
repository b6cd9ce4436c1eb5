#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tglab/tglab.hpp"

namespace fs = std::filesystem;
using namespace tglab;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct RunConfig {
  std::string model = "phi1v";
  double k_s = 10;
  double k_z = 10;
  std::uint64_t seed = 0;
  std::uint64_t trials = 10000;
  double grid_step = 5.0;
  int T = 2;
  std::string output;
  std::string format = "json";
  std::string input;
  std::string cls;
  std::string constraint = "none";
  std::string family;
  std::string evidence;
  int jobs = 0;
  bool timing = false;
  double tolerance = 0;
  std::string check;
  bool run_check = false;
};

nlohmann::json echo(const RunConfig& c) {
  return {{"k_s", c.k_s}, {"k_z", c.k_z}, {"seed", c.seed}, {"trials", c.trials}, {"T", c.T}, {"grid_step", c.grid_step}};
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open input file '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw config_error("cannot parse '" + path + "': " + e.what());
  }
}

/// Explicit -o wins, then $TGLAB_OUTPUT_DIR/<default_name>, then stdout.
void emit(const RunConfig& c, const std::string& default_name, const std::string& text) {
  std::string path = c.output;
  if (path.empty())
    if (const char* dir = std::getenv("TGLAB_OUTPUT_DIR"); dir && *dir) path = (fs::path(dir) / default_name).string();
  if (path.empty()) {
    std::cout << text;
    return;
  }
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write '" + path + "'");
  out << text;
}

int cmd_trace(const RunConfig& c) {
  const auto spec = build(c.model, c.k_s, c.k_z);
  if (c.input.empty()) throw config_error("trace needs --input");
  const auto in = input_from_json(read_json_file(c.input));
  const auto res = forward(spec, in.X, in.mask);
  auto j = to_json(res.trace);
  j["config"] = echo(c);
  emit(c, "trace-" + spec.name + ".json", j.dump(2) + "\n");
  return kExitPass;
}

int cmd_verify(const RunConfig& c, bool trials_given) {
  CheckOptions o;
  o.k_s = c.k_s;
  o.k_z = c.k_z;
  o.seed = c.seed;
  o.trials = c.trials;
  o.T = c.T;
  o.grid_step = c.grid_step;
  o.jobs = resolve_jobs(c.jobs);
  o.timing = c.timing;
  o.tolerance = c.tolerance;
  if (c.check == "lemma2" && trials_given) o.lemma2_samples = c.trials;
  if (c.check == "trace-tables" && trials_given) o.trace_trials = c.trials;
  if (c.check == "tightness" && trials_given) o.search_budget = c.trials;
  std::optional<Family> fam;
  if (!c.family.empty()) fam = parse_family(c.family);

  TransparencyCache cache;
  const auto reports = run_check(c.check, o, cache, fam);
  Status overall = combine(reports);
  for (const auto& r : reports) std::cerr << to_string(r.status) << "  " << r.check_id << "\n";

  std::string text;
  if (c.format == "csv") {
    text = to_csv(reports);
  } else if (c.format == "json") {
    nlohmann::json j = {{"check", c.check}, {"status", to_string(overall)}, {"config", echo(c)}};
    auto arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(to_json(r));
    j["reports"] = arr;
    text = j.dump(2) + "\n";
  } else {
    throw config_error("verify supports --format json or csv");
  }
  emit(c, "verify-" + c.check + "." + c.format, text);
  return overall == Status::Pass ? kExitPass : kExitFail;
}

std::vector<EdgeMask> masks_for(PerturbationClass cls, const Graph& g) {
  return allows_edge_perturbation(cls) ? enumerate_masks(g) : std::vector<EdgeMask>{EdgeMask{}};
}

FeatureSequence fixed_input(const RunConfig& c, const ModelSpec& spec, InputConstraint constraint) {
  if (!c.input.empty()) return input_from_json(read_json_file(c.input)).X;
  return draw_bounded(SamplerConfig{bound_K(spec), c.T, spec.n(), c.seed, constraint}, 0);
}

PerturbationSet make_evidence(const RunConfig& c, const ModelSpec& spec, PerturbationClass cls) {
  const auto constraint = parse_constraint(c.constraint);
  std::vector<FeatureSequence> inputs;
  if (cls == PerturbationClass::Edge) {
    if (c.trials > 0) inputs.push_back(fixed_input(c, spec, constraint));
  } else {
    inputs = sample_bounded(bound_K(spec), c.T, spec.n(), c.trials, c.seed, constraint);
  }
  return build_set(spec, cls, inputs, masks_for(cls, spec.graph), c.seed, resolve_jobs(c.jobs));
}

int cmd_perturb(const RunConfig& c) {
  const auto spec = build(c.model, c.k_s, c.k_z);
  const auto cls = parse_class(c.cls);
  const auto p = make_evidence(c, spec, cls);
  std::ostringstream os;
  write_jsonl(os, p);
  emit(c, "perturb-" + spec.name + "-" + std::string(to_string(cls)) + ".jsonl", os.str());
  return kExitPass;
}

int cmd_explain(const RunConfig& c) {
  const auto id = parse_model_id(c.model);
  const auto spec = build(id, c.k_s, c.k_z);
  PerturbationSet p;
  if (!c.evidence.empty()) {
    std::ifstream in(c.evidence);
    if (!in) throw config_error("cannot open evidence file '" + c.evidence + "'");
    p = read_jsonl(in);
    if (!c.cls.empty() && parse_class(c.cls) != p.cls) throw config_error("--class does not match the evidence file");
  } else {
    p = make_evidence(c, spec, parse_class(c.cls.empty() ? "node" : c.cls));
  }
  if (p.empty()) throw empty_evidence("no perturbation evidence to explain");

  // The model name stays out of the output so paired models can be diffed byte for byte.
  const std::vector<Dbn> candidates = {transparent_dbn({id.family, 1, id.temporal}), transparent_dbn({id.family, 2, id.temporal})};
  auto out = nlohmann::json::array();
  if (allows_node_perturbation(p.cls)) {
    const ResponseOracle oracle(spec, p.cls);
    out.push_back(to_json(occlusion_node_scores(p, oracle)));
  }
  if (allows_edge_perturbation(p.cls)) {
    const auto& X = p.records.front().X;
    const ResponseOracle oracle(spec, p.cls, X);
    out.push_back(to_json(occlusion_edge_scores(oracle, X)));
  }
  out.push_back(to_json(select_dbn(p, candidates, spec.graph)));
  nlohmann::json j = {{"class", to_string(p.cls)}, {"records", p.records.size()}, {"explanations", out}};
  emit(c, "explain-" + spec.name + "-" + std::string(to_string(p.cls)) + ".json", j.dump(2) + "\n");
  return kExitPass;
}

int cmd_dbn(const RunConfig& c) {
  const auto id = parse_model_id(c.model);
  const auto d = transparent_dbn(id);
  if (!c.run_check) {
    emit(c, "dbn-" + d.name + ".json", to_json(d).dump(2) + "\n");
    return kExitPass;
  }
  const auto spec = build(id, c.k_s, c.k_z);
  SweepOptions so;
  so.jobs = resolve_jobs(c.jobs);
  so.seed = c.seed;
  so.timing = c.timing;
  const auto r = check_transparent(d, spec, bounded_source({bound_K(spec), 3, spec.n(), c.seed}), c.trials, so);
  std::cerr << to_string(r.status) << "  " << r.check_id << "\n";
  emit(c, "dbn-check-" + d.name + ".json", to_json(r).dump(2) + "\n");
  return r.passed() ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forward traces, perturbation evidence, explainers and verification suites for the constructed temporal GNNs"};
  app.require_subcommand(1);
  RunConfig c;

  auto common = [&](CLI::App* s) {
    s->add_option("--k-s", c.k_s, "Send-gate threshold")->capture_default_str();
    s->add_option("--k-z", c.k_z, "Output-gate threshold")->capture_default_str();
    s->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    s->add_option("-o,--output", c.output, "Output file (default: $TGLAB_OUTPUT_DIR or stdout)");
    s->add_option("--jobs", c.jobs, "Worker threads (0 = all cores)")->capture_default_str();
  };

  auto* trace = app.add_subcommand("trace", "Run one forward pass and export the full trace");
  common(trace);
  trace->add_option("--model", c.model, "Model id, e.g. phi1v or phi1v-gnn")->required();
  trace->add_option("--input", c.input, "Input JSON file")->required();

  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  common(verify);
  verify->add_option("check", c.check, "lemma2|lemma3|lemma5|tasks|trace-tables|dbn|tightness|theorem-gv|theorem-ge|theorem-ga|gnn|exact|all")
      ->required();
  auto* trials_opt = verify->add_option("--trials", c.trials, "Samples per check")->capture_default_str();
  verify->add_option("--grid-step", c.grid_step, "Full-grid step for lemma2")->capture_default_str();
  verify->add_option("-T", c.T, "Sequence length")->capture_default_str();
  verify->add_option("--format", c.format, "json or csv")->capture_default_str();
  verify->add_option("--family", c.family, "Restrict tightness to gv, ge or ga");
  verify->add_flag("--timing", c.timing, "Record runtime_ms (makes reports non-reproducible)");
  verify->add_option("--tolerance", c.tolerance, "Fallback comparison tolerance")->capture_default_str();

  auto* perturb = app.add_subcommand("perturb", "Generate a perturbation-response set as JSONL");
  common(perturb);
  perturb->add_option("--model", c.model, "Model id")->required();
  perturb->add_option("--class", c.cls, "node, edge or node_and_edge")->required();
  perturb->add_option("--constraint", c.constraint, "none or x2gtx3")->capture_default_str();
  perturb->add_option("--trials", c.trials, "Number of inputs")->capture_default_str();
  perturb->add_option("-T", c.T, "Sequence length")->capture_default_str();
  perturb->add_option("--input", c.input, "Fixed input for the edge class");

  auto* explain = app.add_subcommand("explain", "Run the reference explainers on perturbation evidence");
  common(explain);
  explain->add_option("--model", c.model, "Model answering black-box queries")->required();
  explain->add_option("--class", c.cls, "node, edge or node_and_edge");
  explain->add_option("--evidence", c.evidence, "Perturbation JSONL file (default: generate)");
  explain->add_option("--constraint", c.constraint, "none or x2gtx3")->capture_default_str();
  explain->add_option("--trials", c.trials, "Number of inputs when generating evidence")->capture_default_str();
  explain->add_option("-T", c.T, "Sequence length")->capture_default_str();
  explain->add_option("--input", c.input, "Fixed input for the edge class");

  auto* dbn = app.add_subcommand("dbn", "Print a transparent DBN, optionally checking it against its model");
  common(dbn);
  dbn->add_option("--model", c.model, "Model id")->required();
  dbn->add_flag("--check", c.run_check, "Run consistency and minimality");
  dbn->add_option("--trials", c.trials, "Sampled base points")->capture_default_str();
  dbn->add_flag("--timing", c.timing, "Record runtime_ms");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*trace) return cmd_trace(c);
    if (*verify) return cmd_verify(c, trials_opt->count() > 0);
    if (*perturb) return cmd_perturb(c);
    if (*explain) return cmd_explain(c);
    if (*dbn) return cmd_dbn(c);
  } catch (const tglab::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
