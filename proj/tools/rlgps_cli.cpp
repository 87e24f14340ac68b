#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rlgps/config.hpp"
#include "rlgps/experiment.hpp"
#include "rlgps/report.hpp"

namespace fs = std::filesystem;
using namespace rlgps;

namespace {

ExperimentConfig load_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
  IniFile ini = IniFile::load(path);
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    ini.set(s.substr(0, eq), s.substr(eq + 1));
  }
  return load_experiment(ini);
}

void print_summary(const GroupOutcome& g) {
  std::vector<RegretTrace> traces;
  for (const TrialOutcome& t : g.trials) traces.push_back(t.trace);
  const AggregateResult agg = aggregate(g.group, traces);
  const Index K = Index(agg.mean.size());
  std::cout << (g.group.empty() ? std::string("run") : g.group) << ": trials=" << agg.trials
            << " final_mean=" << mean_at(agg, K) << " sem=" << sem_at(agg, K) << " median=" << agg.median.back()
            << " dir=" << g.dir.string() << "\n";
}

/// Expands files, directories (all trial CSVs below) and '*' / '?' patterns
/// in the last path component.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const std::string& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path());
      continue;
    }
    const std::string name = p.filename().string();
    if (name.find_first_of("*?") == std::string::npos) {
      out.push_back(p);
      continue;
    }
    std::string re;
    for (const char c : name) {
      if (c == '*') re += ".*";
      else if (c == '?') re += '.';
      else if (std::isalnum(static_cast<unsigned char>(c))) re += c;
      else re += std::string("\\") + c;
    }
    const std::regex pattern(re);
    const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
    if (!fs::is_directory(dir)) continue;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && std::regex_match(e.path().filename().string(), pattern)) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Posterior sampling RL with multi-output GP models"};
  app.set_version_flag("--version", code_version());
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;

  auto* run_cmd = app.add_subcommand("run", "Run all trials of an experiment config");
  run_cmd->add_option("config", config_path, "Experiment config file")->required();
  run_cmd->add_option("--set", sets, "Override a config key (key=value)");

  std::vector<std::string> axes;
  auto* sweep_cmd = app.add_subcommand("sweep", "Cross product of config values over a base config");
  sweep_cmd->add_option("config", config_path, "Base experiment config file")->required();
  sweep_cmd->add_option("--axis", axes, "key=v1,v2,... (use ';' between values that contain commas)")->required();
  sweep_cmd->add_option("--set", sets, "Override a config key (key=value)");

  auto* verify_cmd = app.add_subcommand("verify", "Run the confidence-bound and potential-inequality checks");
  verify_cmd->add_option("config", config_path, "Experiment config file")->required();
  verify_cmd->add_option("--set", sets, "Override a config key (key=value)");

  std::vector<std::string> plot_inputs;
  std::string plot_out = "regret.svg";
  std::string plot_title;
  auto* plot_cmd = app.add_subcommand("plot", "Plot cumulative regret traces as SVG (groups = parent directory)");
  plot_cmd->add_option("traces", plot_inputs, "Trace CSV files, directories or patterns")->required();
  plot_cmd->add_option("-o,--out", plot_out, "Output SVG path");
  plot_cmd->add_option("--title", plot_title, "Plot title");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const ExperimentConfig cfg = load_with_overrides(config_path, sets);
      print_summary(run_experiment(cfg, fs::path(cfg.output_dir) / cfg.name));
    } else if (*sweep_cmd) {
      const ExperimentConfig cfg = load_with_overrides(config_path, sets);
      std::vector<SweepAxis> parsed;
      for (const std::string& a : axes) parsed.push_back(parse_sweep_axis(a));
      for (const GroupOutcome& g : run_sweep(cfg, parsed)) print_summary(g);
    } else if (*verify_cmd) {
      const ExperimentConfig cfg = load_with_overrides(config_path, sets);
      bool ok = true;
      for (const CheckLine& line : run_verification(cfg)) {
        std::cout << format_check(line) << std::endl;
        ok = ok && line.pass;
      }
      return ok ? 0 : 2;
    } else if (*plot_cmd) {
      const std::vector<fs::path> files = expand_inputs(plot_inputs);
      if (files.empty()) throw IoError("no trace files matched");
      std::map<std::string, std::vector<RegretTrace>> groups;
      for (const fs::path& f : files) groups[f.parent_path().filename().string()].push_back(read_trace_csv(f).trace);
      std::vector<AggregateResult> aggs;
      for (const auto& [name, traces] : groups) aggs.push_back(aggregate(name, traces));
      std::ofstream out(plot_out);
      if (!out) throw IoError("cannot write " + plot_out);
      write_regret_svg(out, aggs, plot_title);
      for (const AggregateResult& a : aggs) {
        std::cout << a.group << ": trials=" << a.trials << " final_mean=" << a.mean.back() << " sem=" << a.sem.back()
                  << "\n";
      }
      std::cout << "wrote " << plot_out << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
