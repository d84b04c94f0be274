// Copyright 2026 The dncprep Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dncprep/experiments.hpp"

namespace {

using dncprep::ConfigError;
using dncprep::Experiment;
using dncprep::ExperimentConfig;
using dncprep::io::json;

constexpr int kExitInvariantFailure = 1;
constexpr int kExitInvalidInput = 2;
constexpr int kExitRuntimeError = 3;

struct Flags {
  std::string config;
  std::optional<int> p;
  std::optional<double> h;
  std::optional<double> j;
  std::optional<std::string> operator_path;
  std::optional<std::string> spans;
  std::optional<double> delta;
  std::optional<std::string> qpe_model;
  std::optional<double> c_qpe;
  std::optional<double> r_lb;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> runs;
  bool unbounded = false;
  std::optional<std::string> csv;
  std::optional<std::string> report;
  std::optional<int> p_max;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config; flags given alongside override it");
  cmd->add_option("--p", f.p, "TFIM tree height (2^p spins)");
  cmd->add_option("--h", f.h, "TFIM field strength");
  cmd->add_option("--J", f.j, "TFIM coupling");
  cmd->add_option("--operator", f.operator_path, "operator JSON file instead of the TFIM");
  cmd->add_option("--spans", f.spans, "leaf spans as JSON, e.g. [[0,2],[2,4]]");
  cmd->add_option("--delta", f.delta, "failure budget in (0, 1)");
  cmd->add_option("--qpe-model", f.qpe_model, "IdealProjective or PessimisticCleve");
  cmd->add_option("--c-qpe", f.c_qpe, "constant in the per-attempt U cost");
  cmd->add_option("--r-lb", f.r_lb, "fixed overlap lower bound (default: measured minimum)");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--runs", f.runs, "number of seeded runs");
  cmd->add_flag("--unbounded-retries", f.unbounded, "retry merges until success");
  cmd->add_option("--csv", f.csv, "CSV output path (default: stdout)");
  cmd->add_option("--report", f.report, "JSON report output path");
  cmd->add_option("--p-max", f.p_max, "largest p for curve experiments (<= 4)");
}

ExperimentConfig build_config(const Flags& f, std::optional<Experiment> experiment) {
  ExperimentConfig c;
  if (!f.config.empty()) {
    c = dncprep::load_config(f.config);
    if (experiment && !dncprep::io::read_json(f.config).value("experiment", std::string()).empty() &&
        c.experiment != *experiment)
      throw ConfigError("config names experiment " + dncprep::to_string(c.experiment) +
                        " but the subcommand is " + dncprep::to_string(*experiment));
  }
  if (experiment) c.experiment = *experiment;
  if (f.p) c.model.p = *f.p;
  if (f.h) c.model.h = *f.h;
  if (f.j) c.model.j = *f.j;
  if (f.operator_path) {
    c.model.type = "operator-file";
    c.model.path = *f.operator_path;
  }
  if (f.spans) {
    try {
      c.model.spans = dncprep::io::spans_from_json(json::parse(*f.spans), "--spans");
    } catch (const json::exception& e) {
      throw ConfigError(std::string("--spans is not valid JSON: ") + e.what());
    } catch (const dncprep::InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  if (f.delta) c.engine.delta = *f.delta;
  if (f.qpe_model) {
    try {
      c.engine.qpe.kind = dncprep::qpe_kind_from_string(*f.qpe_model);
    } catch (const dncprep::InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  if (f.c_qpe) c.engine.qpe.c_qpe = *f.c_qpe;
  if (f.r_lb) {
    c.engine.r_lb_mode = "fixed";
    c.engine.r_lb_value = *f.r_lb;
  }
  if (f.seed) c.engine.master_seed = *f.seed;
  if (f.runs) c.engine.n_runs = *f.runs;
  if (f.unbounded) c.engine.unbounded_retries = true;
  if (f.csv) c.output.csv_path = *f.csv;
  if (f.report) c.output.report_path = *f.report;
  if (f.p_max) c.p_max = *f.p_max;
  dncprep::validate(c);
  return c;
}

int error_record(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump() << "\n";
  return code;
}

int execute(const Flags& f, std::optional<Experiment> experiment) {
  try {
    const ExperimentConfig cfg = build_config(f, experiment);
    const dncprep::ExperimentOutcome out = dncprep::run(cfg);
    dncprep::write_outputs(cfg, out);
    if (cfg.output.csv_path.empty()) std::cout << out.csv.str();
    for (const auto& c : out.checks)
      if (!c.passed) std::cerr << "invariant failed: " << c.name << ": " << c.detail << "\n";
    return out.passed() ? 0 : kExitInvariantFailure;
  } catch (const ConfigError& e) {
    return error_record("config", e.what(), kExitInvalidInput);
  } catch (const dncprep::InvalidArgument& e) {
    return error_record("invalid_argument", e.what(), kExitInvalidInput);
  } catch (const dncprep::DegenerateSpectrum& e) {
    return error_record("degenerate_spectrum", e.what(), kExitRuntimeError);
  } catch (const dncprep::ConvergenceFailure& e) {
    return error_record("convergence_failure", e.what(), kExitRuntimeError);
  } catch (const std::exception& e) {
    return error_record("runtime", e.what(), kExitRuntimeError);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Divide-and-conquer ground state preparation simulator"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);
  Flags flags;
  std::optional<Experiment> chosen;
  bool from_config = false;

  for (const auto& [kind, name] : dncprep::experiment_names()) {
    CLI::App* cmd = app.add_subcommand(name, "run the " + name + " experiment");
    add_flags(cmd, flags);
    cmd->callback([&chosen, kind = kind] { chosen = kind; });
  }
  CLI::App* run_cmd = app.add_subcommand("run", "run the experiment named in --config");
  add_flags(run_cmd, flags);
  run_cmd->get_option("--config")->required();
  run_cmd->callback([&from_config] { from_config = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return error_record("usage", e.what(), kExitInvalidInput);
  }
  return execute(flags, from_config ? std::nullopt : chosen);
}
