#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ncq/jobs.hpp"
#include "ncq/version.hpp"

// Command-line front end. Each subcommand reads a JSON config, hands it to
// run_job, prints the human summary, and writes the report (and CSV artifact,
// for the table-producing jobs) wherever the config's "output" key or --out
// points. Exit codes: 0 for a passing job, 1 for a failing verdict, 2 for
// usage or config problems.

namespace {

struct CliState {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> degree;
  std::optional<double> tol;
  std::optional<std::string> out;
  bool json = false;

  // synthesis flags for wigner/sweep without a config file
  std::optional<int> N;
  std::optional<int> kmax;
  std::optional<int> trials;
  std::optional<std::string> Ns;
};

std::string dirname_of(const std::string& path) {
  auto pos = path.find_last_of('/');
  return pos == std::string::npos ? std::string(".") : path.substr(0, pos);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ncq::Error("cannot write file '" + path + "'");
  out << text;
}

int run_subcommand(const std::string& job, const CliState& cli) {
  using ncq::Json;
  Json config;
  std::string base_dir = ".";
  if (!cli.config_path.empty()) {
    std::ifstream in(cli.config_path, std::ios::binary);
    if (!in) {
      std::cerr << "error: cannot read config '" << cli.config_path << "'\n";
      return 2;
    }
    try {
      config = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "error: " << cli.config_path << ": " << e.what() << "\n";
      return 2;
    }
    base_dir = dirname_of(cli.config_path);
    if (config.is_object() && config.contains("job") &&
        config.at("job") != job) {
      std::cerr << "error: config is a '"
                << config.at("job").get<std::string>()
                << "' job, not '" << job << "'\n";
      return 2;
    }
  } else if (job != "wigner" && job != "sweep") {
    std::cerr << "error: the " << job << " command needs a config file\n";
    return 2;
  }
  if (!config.is_object()) config = Json::object();
  config["job"] = job;

  // flag-level synthesis for the random-matrix commands
  if (cli.N) config["N"] = *cli.N;
  if (cli.kmax) config["kmax"] = *cli.kmax;
  if (cli.trials) config["trials"] = *cli.trials;
  if (cli.Ns) {
    Json ns = Json::array();
    std::string item;
    std::istringstream list(*cli.Ns);
    while (std::getline(list, item, ','))
      if (!item.empty()) ns.push_back(std::stoi(item));
    config["Ns"] = std::move(ns);
  }

  ncq::Overrides ov;
  ov.seed = cli.seed;
  ov.degree = cli.degree;
  ov.tol = cli.tol;
  ov.output = cli.out;

  const auto start = std::chrono::steady_clock::now();
  ncq::RunResult result;
  try {
    result = ncq::run_job(config, base_dir, ov);
  } catch (const ncq::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  const auto elapsed = std::chrono::duration<double, std::milli>(
      std::chrono::steady_clock::now() - start);

  std::string report_text = result.report.dump(2) + "\n";
  if (cli.json) {
    std::cout << report_text;  // machine mode: the report and nothing else
  } else {
    for (const auto& w : result.report.at("warnings"))
      std::cout << "warning: " << w.get<std::string>() << "\n";
    std::cout << result.summary;
  }

  std::string output;
  if (result.report.at("job").contains("output"))
    output = result.report.at("job").at("output").get<std::string>();
  if (!output.empty()) {
    try {
      // table jobs write their CSV there; everything else the JSON report
      write_file(output, result.artifact.empty() ? report_text
                                                 : result.artifact);
      if (!cli.json) std::cout << "wrote " << output << "\n";
    } catch (const ncq::Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }
  if (!cli.json) std::printf("done in %.0f ms\n", elapsed.count());
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ncq: contextual quantization workbench"};
  app.set_version_flag("--version", std::string("ncq ") + ncq::kVersion);
  app.require_subcommand(1);

  CliState cli;
  struct Sub {
    const char* command;
    const char* job;
    const char* help;
    bool config_required;
  };
  const Sub subs[] = {
      {"algebra-check", "algebra_check",
       "randomized rewriting-consistency properties", true},
      {"moments", "moments", "evaluate state moments of expressions", true},
      {"pcp", "pcp", "moment-matrix feasibility of pinned moments", true},
      {"quantize", "quantize", "verify a contextual quantization", true},
      {"twoslit", "twoslit", "density-matrix marginal feasibility", true},
      {"wigner", "wigner", "trace moments of one random-matrix size", false},
      {"replica", "replica", "replica pattern averages vs predictions", true},
      {"sweep", "sweep", "trace-moment convergence across sizes", false},
  };

  for (const Sub& s : subs) {
    CLI::App* cmd = app.add_subcommand(s.command, s.help);
    auto* pos = cmd->add_option("config", cli.config_path,
                                "JSON job config");
    if (s.config_required) pos->required();
    cmd->add_option("--seed", cli.seed, "override the RNG seed");
    cmd->add_option("--degree", cli.degree, "override the moment degree");
    cmd->add_option("--tol", cli.tol, "override the solver tolerance");
    cmd->add_option("--out", cli.out, "override the output path");
    cmd->add_flag("--json", cli.json, "print the full report to stdout");
    if (std::string(s.job) == "wigner") {
      cmd->add_option("--N", cli.N, "matrix size");
      cmd->add_option("--kmax", cli.kmax, "highest trace power");
      cmd->add_option("--trials", cli.trials, "samples per estimate");
    }
    if (std::string(s.job) == "sweep") {
      cmd->add_option("--Ns", cli.Ns, "comma-separated matrix sizes");
      cmd->add_option("--kmax", cli.kmax, "highest trace power");
      cmd->add_option("--trials", cli.trials, "samples per estimate");
    }
    cmd->callback([&cli, job = std::string(s.job)]() {
      std::exit(run_subcommand(job, cli));
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    // CLI11 returns 0 for --help/--version; keep that, map errors to 2
    return code == 0 ? 0 : 2;
  }
  return 2;
}
