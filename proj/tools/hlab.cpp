#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>

#include "CLI11.hpp"

#include "hlab/cli/experiments.hpp"

using namespace hlab;
using namespace hlab::cli;

namespace {

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string usage() {
  std::string s =
      "usage: hlab <experiment> [options]\n"
      "       hlab run <config.json> [--out DIR]\n"
      "       hlab list\n\n"
      "experiments:\n";
  for (const auto& e : experiments()) {
    s += "  " + e.name;
    s += std::string(e.name.size() < 16 ? 16 - e.name.size() : 1, ' ');
    s += e.summary + "\n";
  }
  s += "\n'hlab <experiment> --help' lists the parameters with their defaults.\n"
       "Artifacts go to --out, the config's output_dir, $HLAB_OUT_DIR or ./results, in that order.\n";
  return s;
}

std::string listing() {
  std::string s;
  for (const auto& e : experiments()) {
    s += e.name + ": " + e.summary + "\n";
    for (const auto& p : e.params) s += "  --" + p.name + " = " + p.def.dump() + "  " + p.doc + "\n";
    for (const auto& p : e.tolerances) s += "  --tol-" + p.name + " = " + p.def.dump() + "  " + p.doc + "\n";
  }
  return s;
}

std::string resolve_out(const std::string& flag, const std::string& from_config) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  if (const char* env = std::getenv("HLAB_OUT_DIR"); env && *env) return env;
  return "results";
}

int finish(const Experiment& e, const RunConfig& rc, const std::string& out_dir) {
  const auto r = execute(e, rc);
  if (!r.artifacts) {
    std::cerr << "hlab " << e.name << ": invalid configuration: " << r.message << "\n";
    return r.status;
  }
  try {
    write_artifacts(out_dir, e.name, *r.artifacts);
    std::ofstream(std::filesystem::path(out_dir) / (e.name + ".timing.json"))
        << json{{"experiment", e.name}, {"wall_clock_seconds", r.seconds}, {"threads", rc.threads}}.dump(2) << "\n";
  } catch (const std::exception& err) {
    std::cerr << "hlab " << e.name << ": cannot write artifacts: " << err.what() << "\n";
    return kExitNumerical;
  }
  const auto doc = json::parse(r.artifacts->json_text);
  for (const auto& c : doc["checks"])
    std::cout << (c["passed"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << "  "
              << c["value"].dump() << " " << c["relation"].get<std::string>() << " " << c["threshold"].dump() << "\n";
  if (!r.message.empty()) std::cerr << "hlab " << e.name << ": " << r.message << "\n";
  std::cerr << "hlab " << e.name << ": wall clock " << r.seconds << " s, artifacts in " << out_dir << "\n";
  return r.status;
}

int run_config_file(int argc, char** argv) {
  CLI::App app{"run an experiment from a JSON config", "hlab run"};
  std::string path, out;
  app.add_option("config", path, "config file")->required();
  app.add_option("--out", out, "output directory");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& err) {
    std::cerr << err.what() << "\n";
    return kExitConfig;
  }
  try {
    const auto rc = parse_config(load_json_file(path), default_threads());
    const Experiment* e = find_experiment(rc.experiment);
    if (!e) {
      std::cerr << "hlab run: unknown experiment '" << rc.experiment << "'; did you mean '"
                << nearest(rc.experiment, experiment_names()) << "'?\n";
      return kExitConfig;
    }
    return finish(*e, rc, resolve_out(out, rc.output_dir));
  } catch (const ConfigError& err) {
    std::cerr << "hlab run: " << err.what() << "\n";
    return kExitConfig;
  }
}

int run_experiment(const Experiment& e, int argc, char** argv) {
  CLI::App app{e.summary, "hlab " + e.name};
  std::string config, out;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  app.add_option("--config", config, "JSON config; flags override its values");
  auto* seed_opt = app.add_option("--seed", seed, "random seed [default: 1]");
  app.add_option("--threads", threads, "worker threads [default: available cores]");
  app.add_option("--out", out, "output directory");
  std::map<std::string, std::string> pvals, tvals;
  std::map<std::string, CLI::Option*> popts, topts;
  for (const auto& p : e.params)
    popts[p.name] = app.add_option("--" + p.name, pvals[p.name], p.doc + " [default: " + p.def.dump() + "]");
  for (const auto& p : e.tolerances)
    topts[p.name] = app.add_option("--tol-" + p.name, tvals[p.name], p.doc + " [default: " + p.def.dump() + "]");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& err) {
    std::cerr << "hlab " << e.name << ": " << err.what() << "\n";
    return kExitConfig;
  }
  try {
    RunConfig rc;
    rc.threads = default_threads();
    if (!config.empty()) {
      rc = parse_config(load_json_file(config), default_threads());
      if (!rc.experiment.empty() && rc.experiment != e.name)
        throw ConfigError("config is for experiment '" + rc.experiment + "', not '" + e.name + "'");
    }
    rc.experiment = e.name;
    if (seed_opt->count() > 0) rc.seed = seed;
    if (threads > 0) rc.threads = threads;
    if (!rc.parameters.is_object()) throw ConfigError("'parameters' must be an object");
    if (!rc.tolerances.is_object()) throw ConfigError("'tolerances' must be an object");
    for (const auto& [name, opt] : popts)
      if (opt->count() > 0) rc.parameters[name] = parse_cli_value(pvals[name]);
    for (const auto& [name, opt] : topts)
      if (opt->count() > 0) rc.tolerances[name] = parse_cli_value(tvals[name]);
    return finish(e, rc, resolve_out(out, rc.output_dir));
  } catch (const ConfigError& err) {
    std::cerr << "hlab " << e.name << ": " << err.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cout << usage();
    return kExitOk;
  }
  const std::string cmd = argv[1];
  if (cmd == "-h" || cmd == "--help" || cmd == "help") {
    std::cout << usage();
    return kExitOk;
  }
  if (cmd == "list") {
    std::cout << listing();
    return kExitOk;
  }
  if (cmd == "run") return run_config_file(argc - 1, argv + 1);
  if (const Experiment* e = find_experiment(cmd)) return run_experiment(*e, argc - 1, argv + 1);
  auto names = experiment_names();
  names.insert(names.end(), {"list", "run"});
  std::cerr << "hlab: unknown experiment '" << cmd << "'; did you mean '" << nearest(cmd, names) << "'?\n"
            << "run 'hlab' without arguments for the list of experiments\n";
  return kExitConfig;
}
