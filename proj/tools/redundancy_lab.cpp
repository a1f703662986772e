// redundancy-lab: command-line runner over the C interface.
//
//   redundancy-lab <scenario> [--config FILE] [--seed N] [--out DIR] [--json] [--timing] ...
//   redundancy-lab validate (--model FILE | --config FILE)
//   redundancy-lab plot --csv FILE [--scenario NAME] [--out FILE]
//
// Exit status: 0 when no row is violated, 1 when some row is, 2 on usage or
// configuration errors.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "redlab/redlab.h"

namespace {

constexpr int kExitViolated = 1;
constexpr int kExitUsage = 2;

struct CString {
  char* p = nullptr;
  ~CString() { redlab_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct Failure {
  redlab_status status;
  std::string message;
};

void check(redlab_status s) {
  if (s != REDLAB_OK) throw Failure{s, redlab_last_error()};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{REDLAB_CONFIG_ERROR, "cannot open '" + path + "'"};
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct RunOptions {
  std::string config;
  std::string out;
  std::vector<std::string> models;
  std::string m;
  std::string levels;
  std::optional<std::uint64_t> seed;
  std::optional<double> sigma2, delta;
  std::optional<std::size_t> replicates, n_mc;
  bool json = false;
  bool timing = false;
};

int run_scenario(const std::string& scenario, const RunOptions& o) {
  using ConfigPtr = std::unique_ptr<redlab_config, decltype(&redlab_config_free)>;
  redlab_config* raw = nullptr;
  if (!o.config.empty()) {
    check(redlab_config_from_file(o.config.c_str(), scenario.c_str(), &raw));
  } else {
    check(redlab_config_default(scenario.c_str(), &raw));
  }
  ConfigPtr config(raw, redlab_config_free);
  auto set = [&](const char* key, const std::string& value) { check(redlab_config_set(config.get(), key, value.c_str())); };
  if (!o.models.empty()) set("models", join(o.models));
  if (o.sigma2) set("sigma2", std::to_string(*o.sigma2));
  if (!o.m.empty()) set("m", o.m);
  if (!o.levels.empty()) set("levels", o.levels);
  if (o.replicates) set("replicates", std::to_string(*o.replicates));
  if (o.delta) {
    std::ostringstream d;
    d.precision(17);
    d << *o.delta;
    set("delta", d.str());
  }
  if (o.n_mc) set("n_mc", std::to_string(*o.n_mc));
  if (o.seed) set("seed", std::to_string(*o.seed));
  if (!o.out.empty()) set("out", o.out);

  redlab_run* run_raw = nullptr;
  check(redlab_run_experiment(config.get(), &run_raw));
  std::unique_ptr<redlab_run, decltype(&redlab_run_free)> run(run_raw, redlab_run_free);

  CString dir;
  check(redlab_config_output_dir(config.get(), &dir.p));
  check(redlab_run_write(run.get(), dir.p, o.timing));

  CString text;
  if (o.json) {
    check(redlab_run_json(run.get(), o.timing, &text.p));
  } else {
    check(redlab_run_summary(run.get(), o.timing, &text.p));
  }
  std::cout << text.str();
  if (o.json) std::cout << '\n';

  std::size_t violated = 0;
  check(redlab_run_violations(run.get(), &violated));
  if (!o.json) std::cerr << "wrote " << dir.str() << "/report.csv (" << violated << " violated rows)\n";
  return violated == 0 ? 0 : kExitViolated;
}

int validate(const std::string& model_path, const std::string& config_path) {
  if (!config_path.empty()) {
    redlab_config* raw = nullptr;
    check(redlab_config_from_file(config_path.c_str(), nullptr, &raw));
    redlab_config_free(raw);
    std::cout << config_path << ": valid config\n";
    return 0;
  }
  CString report;
  check(redlab_model_validate_json(read_file(model_path).c_str(), &report.p));
  if (report.str() == "[]") {
    std::cout << model_path << ": valid model\n";
    return 0;
  }
  std::cout << report.str() << '\n';
  return kExitUsage;
}

int plot(const std::string& csv_path, std::string scenario, std::string out) {
  const std::string csv = read_file(csv_path);
  if (scenario.empty()) {
    const auto ls = lines(csv);
    if (ls.size() < 2) throw Failure{REDLAB_CONFIG_ERROR, csv_path + ": no rows to plot"};
    scenario = ls[1].substr(0, ls[1].find(','));
  }
  CString svg;
  check(redlab_plot_csv(csv.c_str(), scenario.c_str(), &svg.p));
  if (out.empty()) out = "plot_" + scenario + ".svg";
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Failure{REDLAB_CONFIG_ERROR, "cannot write '" + out + "'"};
  f << svg.str();
  std::cerr << "wrote " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verification lab for multi-view contrastive representations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(redlab_version()));

  std::vector<std::string> scenarios;
  {
    CString names;
    if (redlab_scenario_names(&names.p) != REDLAB_OK) {
      std::cerr << "error: " << redlab_last_error() << '\n';
      return kExitUsage;
    }
    scenarios = lines(names.str());
  }

  RunOptions opts;
  for (const auto& s : scenarios) {
    CLI::App* sub = app.add_subcommand(s, "run the " + s + " scenario");
    sub->add_option("--config", opts.config, "experiment config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "base seed");
    sub->add_option("--out", opts.out, "output directory");
    sub->add_flag("--json", opts.json, "print rows as JSON instead of the summary");
    sub->add_flag("--timing", opts.timing, "record wall times in report.csv");
    sub->add_option("--model", opts.models, "model token(s): builtin name, gaussian:<s2>, topic:<K>:<a>, "
                                            "random:<seed> or a model file")
        ->delimiter(',');
    sub->add_option("--sigma2", opts.sigma2, "variance for the bare gaussian model");
    sub->add_option("--m", opts.m, "comma-separated dimension grid");
    sub->add_option("--replicates", opts.replicates, "replicates per grid point");
    sub->add_option("--delta", opts.delta, "failure probability");
    sub->add_option("--n-mc", opts.n_mc, "Monte Carlo sample size");
    sub->add_option("--levels", opts.levels, "comma-separated perturbation levels (error-propagation)");
  }

  std::string model_file, config_file;
  CLI::App* val = app.add_subcommand("validate", "check a model or config document");
  auto* mopt = val->add_option("--model", model_file, "model document")->check(CLI::ExistingFile);
  auto* copt = val->add_option("--config", config_file, "experiment config")->check(CLI::ExistingFile);
  mopt->excludes(copt);
  val->require_option(1);

  std::string csv_file, plot_scenario, plot_out;
  CLI::App* pl = app.add_subcommand("plot", "render an SVG from report.csv");
  pl->add_option("--csv", csv_file, "report.csv")->required()->check(CLI::ExistingFile);
  pl->add_option("--scenario", plot_scenario, "scenario rows to plot (default: first row's)");
  pl->add_option("--out", plot_out, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (val->parsed()) return validate(model_file, config_file);
    if (pl->parsed()) return plot(csv_file, plot_scenario, plot_out);
    for (const auto& s : scenarios) {
      if (app.got_subcommand(s)) return run_scenario(s, opts);
    }
  } catch (const Failure& f) {
    std::cerr << "error (" << redlab_status_name(f.status) << "): " << f.message << '\n';
    return f.status == REDLAB_CONFIG_ERROR || f.status == REDLAB_MODEL_INVALID ||
                   f.status == REDLAB_INVALID_ARGUMENT
               ? kExitUsage
               : 3;
  }
  return kExitUsage;
}
