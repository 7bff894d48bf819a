// rmdp: command-line front end for librmdp (validate / solve / train /
// export-lp / product / env). Links only the C interface.
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rmdp/rmdp_c.h"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

int status_to_exit(RmdpStatus st) {
  switch (st) {
    case RMDP_OK:
      return kExitOk;
    case RMDP_ERR_DOMAIN:
      return kExitDomain;
    default:
      return kExitUsage;
  }
}

int report_error(RmdpStatus st) {
  std::fprintf(stderr, "error: %s\n", rmdp_last_error());
  return status_to_exit(st);
}

struct ModelHandle {
  RmdpModel* m = nullptr;
  ~ModelHandle() { rmdp_model_free(m); }
};

struct OwnedString {
  char* s = nullptr;
  ~OwnedString() { rmdp_string_free(s); }
};

bool looks_builtin(const std::string& name) {
  return name == "cloud" || name == "spelunking" || name == "palindrome" ||
         name.rfind("chain:", 0) == 0;
}

RmdpStatus load_model(const std::string& spec, ModelHandle& h) {
  if (looks_builtin(spec)) return rmdp_model_builtin(spec.c_str(), &h.m);
  return rmdp_model_from_file(spec.c_str(), &h.m);
}

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) return false;
  out << text;
  return out.good();
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(10);
  ss << v;
  return ss.str();
}

// Nearest-rank percentile over a sorted sample: element at index
// ceil(p*n) - 1 (clamped), matching order statistics with no interpolation.
double nearest_rank(const std::vector<double>& sorted, double p) {
  int n = (int)sorted.size();
  int rank = (int)std::ceil(p * n);
  rank = std::max(1, std::min(n, rank));
  return sorted[rank - 1];
}

struct HyperFlags {
  RmdpHyper h;
  std::vector<std::pair<CLI::Option*, std::function<void(RmdpHyper&, const RmdpHyper&)>>> copiers;
  HyperFlags() { rmdp_hyper_init(&h); }

  void add_options(CLI::App* cmd) {
    auto reg = [&](CLI::Option* opt, auto member) {
      copiers.emplace_back(opt, [member](RmdpHyper& dst, const RmdpHyper& src) {
        dst.*member = src.*member;
      });
    };
    reg(cmd->add_option("--alpha", h.alpha, "learning rate"), &RmdpHyper::alpha);
    reg(cmd->add_option("--alpha-power", h.alpha_power, "per-visit learning-rate decay exponent"),
        &RmdpHyper::alpha_power);
    reg(cmd->add_option("--eps-initial", h.eps_initial, "initial exploration rate"),
        &RmdpHyper::eps_initial);
    reg(cmd->add_option("--eps-final", h.eps_final, "final exploration rate"),
        &RmdpHyper::eps_final);
    reg(cmd->add_option("--eps-decay-steps", h.eps_decay_steps, "linear epsilon decay horizon"),
        &RmdpHyper::eps_decay_steps);
    reg(cmd->add_option("--quant", h.quant, "exit-value quantization resolution"),
        &RmdpHyper::quant);
    reg(cmd->add_option("--step-cap", h.step_cap, "episode step cap"), &RmdpHyper::step_cap);
    reg(cmd->add_option("--total-steps", h.total_steps, "training step budget"),
        &RmdpHyper::total_steps);
    reg(cmd->add_option("--lambda", h.lambda, "box-wise discount (1-exit learner)"),
        &RmdpHyper::lambda);
    reg(cmd->add_option("--q-init", h.q_init, "initial Q value"), &RmdpHyper::q_init);
    reg(cmd->add_option("--start-comp", h.start_comp, "start component index"),
        &RmdpHyper::start_comp);
    reg(cmd->add_option("--start-entry", h.start_entry, "start entry node id (-1: first entry)"),
        &RmdpHyper::start_entry);
    reg(cmd->add_option("--eval-every", h.eval_every, "evaluation period in steps"),
        &RmdpHyper::eval_every);
    reg(cmd->add_option("--eval-episodes", h.eval_episodes, "episodes per evaluation"),
        &RmdpHyper::eval_episodes);
    reg(cmd->add_flag("--include-truncated-eval", h.include_truncated_eval,
                      "count truncated evaluation episodes"),
        &RmdpHyper::include_truncated_eval);
  }

  // Copies fields whose flags were explicitly passed from `flags` onto h.
  void apply_explicit(const RmdpHyper& flags) {
    for (auto& [opt, copy] : copiers)
      if (opt->count() > 0) copy(h, flags);
  }

  // Applies a JSON object of hyperparameter overrides (config-file keys use
  // the same names as the library struct).
  void apply_json(const json& j) {
    auto num = [&](const char* k, auto& field) {
      if (j.contains(k)) field = j[k].get<std::remove_reference_t<decltype(field)>>();
    };
    num("alpha", h.alpha);
    num("alpha_power", h.alpha_power);
    num("eps_initial", h.eps_initial);
    num("eps_final", h.eps_final);
    num("eps_decay_steps", h.eps_decay_steps);
    num("quant", h.quant);
    num("step_cap", h.step_cap);
    num("total_steps", h.total_steps);
    num("lambda", h.lambda);
    num("q_init", h.q_init);
    num("start_comp", h.start_comp);
    num("start_entry", h.start_entry);
    num("eval_every", h.eval_every);
    num("eval_episodes", h.eval_episodes);
    if (j.contains("include_truncated_eval"))
      h.include_truncated_eval = j["include_truncated_eval"].get<bool>() ? 1 : 0;
  }
};

int cmd_validate(const std::string& path) {
  ModelHandle h;
  RmdpStatus st = rmdp_model_from_file(path.c_str(), &h.m);
  if (st != RMDP_OK) return report_error(st);
  OwnedString diag;
  int count = 0;
  st = rmdp_model_validate(h.m, &diag.s, &count);
  if (st != RMDP_OK) return report_error(st);
  if (count == 0) {
    std::printf("ok: %s\n", path.c_str());
    return kExitOk;
  }
  std::printf("%s\n", diag.s);
  return kExitDomain;
}

int cmd_solve(const std::string& model, const std::string& algo, int stack_bound, double tol,
              const std::string& out_path) {
  ModelHandle h;
  RmdpStatus st = load_model(model, h);
  if (st != RMDP_OK) return report_error(st);
  OwnedString rep;
  st = rmdp_solve(h.m, algo.c_str(), stack_bound, tol, &rep.s);
  if (st != RMDP_OK) return report_error(st);
  if (!out_path.empty()) {
    if (!write_file(out_path, std::string(rep.s) + "\n")) {
      std::fprintf(stderr, "error: cannot write %s\n", out_path.c_str());
      return kExitUsage;
    }
  } else {
    std::printf("%s\n", rep.s);
  }
  return kExitOk;
}

int cmd_train(const std::string& model, const std::string& algo, std::vector<std::uint64_t> seeds,
              HyperFlags hyper, bool use_env_defaults, const std::string& config_path,
              const std::string& out_dir) {
  if (seeds.empty()) {
    std::fprintf(stderr, "error: at least one seed is required\n");
    return kExitUsage;
  }
  // Precedence: builtin env defaults, then the config file, then flags that
  // were explicitly passed on the command line.
  const RmdpHyper flag_values = hyper.h;
  if (use_env_defaults) {
    OwnedString spec;
    RmdpStatus st = rmdp_env_spec(model.c_str(), &spec.s);
    if (st != RMDP_OK) return report_error(st);
    json j = json::parse(spec.s);
    rmdp_hyper_init(&hyper.h);
    hyper.apply_json(j["hyper"]);
  }
  if (!config_path.empty()) {
    std::string text;
    if (!read_file(config_path, text)) {
      std::fprintf(stderr, "error: cannot open %s\n", config_path.c_str());
      return kExitUsage;
    }
    hyper.apply_json(json::parse(text));
  }
  hyper.apply_explicit(flag_values);

  ModelHandle h;
  RmdpStatus st = load_model(model, h);
  if (st != RMDP_OK) return report_error(st);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);

  struct SeedResult {
    std::uint64_t seed = 0;
    RmdpStatus st = RMDP_OK;
    std::string error;
    std::string csv;
    double final_value = 0.0;
    long qsize = 0;
  };
  std::vector<SeedResult> results(seeds.size());
  std::vector<std::thread> workers;
  for (size_t i = 0; i < seeds.size(); ++i) {
    workers.emplace_back([&, i] {
      SeedResult& r = results[i];
      r.seed = seeds[i];
      RmdpHyper hp = hyper.h;
      hp.seed = seeds[i];
      OwnedString csv;
      r.st = rmdp_train(h.m, algo.c_str(), &hp, &csv.s, &r.final_value, &r.qsize);
      if (r.st == RMDP_OK)
        r.csv = csv.s;
      else
        r.error = rmdp_last_error();
    });
  }
  for (auto& w : workers) w.join();

  // Per-seed CSVs plus an aggregate with order-statistic percentiles.
  std::map<long, std::vector<double>> by_step;
  int failures = 0;
  for (const SeedResult& r : results) {
    if (r.st != RMDP_OK) {
      std::fprintf(stderr, "seed %llu failed: %s\n", (unsigned long long)r.seed, r.error.c_str());
      ++failures;
      continue;
    }
    std::string path = out_dir + "/" + algo + "_seed" + std::to_string(r.seed) + ".csv";
    if (!write_file(path, r.csv)) {
      std::fprintf(stderr, "error: cannot write %s\n", path.c_str());
      return kExitUsage;
    }
    std::istringstream in(r.csv);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      size_t comma = line.find(',');
      if (comma == std::string::npos) continue;
      by_step[std::stol(line.substr(0, comma))].push_back(std::stod(line.substr(comma + 1)));
    }
    std::printf("seed %llu: final mean return %s (table size %ld)\n", (unsigned long long)r.seed,
                format_double(r.final_value).c_str(), r.qsize);
  }
  if (failures == (int)seeds.size()) return kExitDomain;

  std::ostringstream agg;
  agg << "# percentiles are nearest-rank order statistics over seeds (no interpolation)\n";
  agg << "step,mean_return,p10,p90\n";
  agg.precision(10);
  for (auto& [step, vals] : by_step) {
    std::sort(vals.begin(), vals.end());
    double mean = 0;
    for (double v : vals) mean += v;
    mean /= (double)vals.size();
    agg << step << "," << mean << "," << nearest_rank(vals, 0.10) << ","
        << nearest_rank(vals, 0.90) << "\n";
  }
  std::string agg_path = out_dir + "/" + algo + "_aggregate.csv";
  if (!write_file(agg_path, agg.str())) {
    std::fprintf(stderr, "error: cannot write %s\n", agg_path.c_str());
    return kExitUsage;
  }
  if (!by_step.empty()) {
    const auto& last = by_step.rbegin()->second;
    double mean = 0;
    for (double v : last) mean += v;
    mean /= (double)last.size();
    std::printf("aggregate final mean return: %s over %zu seeds\n", format_double(mean).c_str(),
                last.size());
  }
  return failures > 0 ? kExitDomain : kExitOk;
}

int cmd_export_lp(const std::string& model, const std::string& out_path) {
  ModelHandle h;
  RmdpStatus st = load_model(model, h);
  if (st != RMDP_OK) return report_error(st);
  OwnedString lp;
  st = rmdp_export_lp(h.m, &lp.s);
  if (st != RMDP_OK) return report_error(st);
  if (!out_path.empty()) {
    if (!write_file(out_path, lp.s)) {
      std::fprintf(stderr, "error: cannot write %s\n", out_path.c_str());
      return kExitUsage;
    }
  } else {
    std::printf("%s", lp.s);
  }
  return kExitOk;
}

int cmd_product(const std::string& model, const std::string& pda_path, const std::string& success,
                double r_success, double r_reject, double r_step, double corruption,
                const std::string& out_path) {
  ModelHandle h;
  RmdpStatus st = load_model(model, h);
  if (st != RMDP_OK) return report_error(st);
  std::string pda_text;
  if (!read_file(pda_path, pda_text)) {
    std::fprintf(stderr, "error: cannot open %s\n", pda_path.c_str());
    return kExitUsage;
  }
  ModelHandle prod;
  st = rmdp_pda_product(h.m, pda_text.c_str(), success.c_str(), r_success, r_reject, r_step,
                        corruption, &prod.m);
  if (st != RMDP_OK) return report_error(st);
  OwnedString text;
  st = rmdp_model_serialize(prod.m, &text.s);
  if (st != RMDP_OK) return report_error(st);
  if (!out_path.empty()) {
    if (!write_file(out_path, text.s)) {
      std::fprintf(stderr, "error: cannot write %s\n", out_path.c_str());
      return kExitUsage;
    }
  } else {
    std::printf("%s", text.s);
  }
  return kExitOk;
}

int cmd_env(const std::string& name, const std::string& out_model, const std::string& out_spec) {
  OwnedString spec;
  RmdpStatus st = rmdp_env_spec(name.c_str(), &spec.s);
  if (st != RMDP_OK) return report_error(st);
  ModelHandle h;
  st = rmdp_model_builtin(name.c_str(), &h.m);
  if (st != RMDP_OK) return report_error(st);
  if (!out_model.empty()) {
    OwnedString text;
    st = rmdp_model_serialize(h.m, &text.s);
    if (st != RMDP_OK) return report_error(st);
    if (!write_file(out_model, text.s)) {
      std::fprintf(stderr, "error: cannot write %s\n", out_model.c_str());
      return kExitUsage;
    }
  }
  if (!out_spec.empty()) {
    if (!write_file(out_spec, std::string(spec.s) + "\n")) {
      std::fprintf(stderr, "error: cannot write %s\n", out_spec.c_str());
      return kExitUsage;
    }
  }
  std::printf("%s\n", spec.s);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recursive Markov decision process toolkit"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  // validate
  std::string v_path;
  auto* validate = app.add_subcommand("validate", "check an .rmdp file");
  validate->add_option("path", v_path, "model file")->required();

  // solve
  std::string s_model, s_algo = "1exit", s_out;
  int s_bound = 30;
  double s_tol = 1e-10;
  auto* solve = app.add_subcommand("solve", "run an exact solver");
  solve->add_option("--model", s_model, "model file or builtin name")->required();
  solve->add_option("--algo", s_algo, "1exit | truncated | deterministic")
      ->check(CLI::IsMember({"1exit", "truncated", "deterministic"}));
  solve->add_option("--stack-bound", s_bound, "stack bound (truncated) / depth cap (deterministic)");
  solve->add_option("--tol", s_tol, "convergence tolerance");
  solve->add_option("--out", s_out, "write the JSON report here instead of stdout");

  // train
  std::string t_model, t_algo = "rql", t_out_dir = ".", t_config;
  std::vector<std::uint64_t> t_seeds;
  bool t_env_defaults = false;
  HyperFlags t_hyper;
  auto* train = app.add_subcommand("train", "train a tabular learner over seeds");
  train->add_option("--model", t_model, "model file or builtin name")->required();
  train->add_option("--algo", t_algo, "rql | rql1 | flat-q")
      ->check(CLI::IsMember({"rql", "rql1", "flat-q"}));
  train->add_option("--seeds", t_seeds, "rng seeds, one training run each")->required();
  train->add_flag("--env-defaults", t_env_defaults,
                  "start from the builtin environment's shipped hyperparameters");
  train->add_option("--config", t_config, "JSON file of hyperparameter overrides");
  train->add_option("--out-dir", t_out_dir, "directory for per-seed and aggregate CSVs");
  t_hyper.add_options(train);

  // export-lp
  std::string l_model, l_out;
  auto* lp = app.add_subcommand("export-lp", "emit the 1-exit LP in LP text format");
  lp->add_option("--model", l_model, "model file or builtin name")->required();
  lp->add_option("--out", l_out, "output file (stdout if omitted)");

  // product
  std::string p_model, p_pda, p_success, p_out;
  double p_rs = 50.0, p_rr = -5.0, p_rt = -1.0, p_corruption = 0.01;
  auto* product = app.add_subcommand("product", "compose a flat MDP with a PDA monitor");
  product->add_option("--model", p_model, "flat single-component model file")->required();
  product->add_option("--pda", p_pda, ".pda file")->required();
  product->add_option("--success", p_success, "comma-separated success node names");
  product->add_option("--reward-success", p_rs, "success reward");
  product->add_option("--reward-reject", p_rr, "rejection reward");
  product->add_option("--reward-step", p_rt, "per-step reward");
  product->add_option("--corruption", p_corruption, "action corruption probability");
  product->add_option("--out", p_out, "output .rmdp file (stdout if omitted)");

  // env
  std::string e_name, e_model, e_spec;
  auto* env = app.add_subcommand("env", "export a builtin environment");
  env->add_option("name", e_name, "cloud | spelunking | palindrome")->required();
  env->add_option("--out-model", e_model, "write the .rmdp model here");
  env->add_option("--out-spec", e_spec, "write the hyperparameter spec JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*validate) return cmd_validate(v_path);
    if (*solve) return cmd_solve(s_model, s_algo, s_bound, s_tol, s_out);
    if (*train)
      return cmd_train(t_model, t_algo, t_seeds, t_hyper, t_env_defaults, t_config, t_out_dir);
    if (*lp) return cmd_export_lp(l_model, l_out);
    if (*product)
      return cmd_product(p_model, p_pda, p_success, p_rs, p_rr, p_rt, p_corruption, p_out);
    if (*env) return cmd_env(e_name, e_model, e_spec);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDomain;
  }
  return kExitUsage;
}
