// tsnfab: runs the fabric experiments and validates experiment configs.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "tsnfabric/harness.hpp"
#include "tsnfabric/kvtext.hpp"

namespace {

using namespace tsnfabric;

struct Overrides {
  std::string config;
  std::string out;
  std::string seed;
  std::string rates;
  std::string faults;
  std::string scheme;
  std::string priority_mode;
  bool csv = false;
  bool table = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment config file (key = value)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "64-bit base seed");
  cmd->add_option("--rates", o.rates, "comma-separated injection rates");
  cmd->add_option("--faults", o.faults, "fault count or comma-separated link selectors");
  cmd->add_option("--scheme", o.scheme, "buffer scheme: baseline | memeff");
  cmd->add_option("--priority-mode", o.priority_mode, "byvc | bypacket | none");
  auto* csv = cmd->add_flag("--csv", o.csv, "print the summary as CSV (default)");
  auto* table = cmd->add_flag("--table", o.table, "print the summary as an aligned table");
  csv->excludes(table);
}

// Config file first, then the command line; both go through the validator.
ValidationResult load(const std::string& experiment, const Overrides& o) {
  KeyValueDocument doc;
  if (!o.config.empty()) {
    try {
      doc = KeyValueDocument::load(o.config);
    } catch (const std::exception& e) {
      ValidationResult r;
      r.errors.push_back(e.what());
      return r;
    }
  }
  std::vector<std::pair<std::string, std::string>> cli;
  if (!experiment.empty()) cli.emplace_back("experiment", experiment);
  if (!o.out.empty()) cli.emplace_back("output_dir", o.out);
  if (!o.seed.empty()) cli.emplace_back("seed", o.seed);
  if (!o.rates.empty()) cli.emplace_back("rates", o.rates);
  if (!o.faults.empty()) cli.emplace_back("faults", o.faults);
  if (!o.scheme.empty()) cli.emplace_back("scheme", o.scheme);
  if (!o.priority_mode.empty()) cli.emplace_back("priority_mode", o.priority_mode);
  if (o.csv) cli.emplace_back("format", "csv");
  if (o.table) cli.emplace_back("format", "table");

  if (!experiment.empty()) {
    if (const auto named = doc.first("experiment"); named && trim(*named) != experiment) {
      ValidationResult r;
      r.errors.push_back(fmt::format("config names experiment '{}' but '{}' was requested", *named, experiment));
      return r;
    }
  }
  KeyValueDocument merged;
  for (const auto& e : doc.entries()) {
    bool replaced = false;
    for (const auto& [k, v] : cli) replaced = replaced || k == e.key;
    if (!replaced) merged.add(e.key, e.value);
  }
  for (const auto& [k, v] : cli) merged.add(k, v);
  return validate_config_text(merged.to_text());
}

int report_errors(const ValidationResult& r) {
  for (const auto& e : r.errors) fmt::print(stderr, "error: {}\n", e);
  return 2;
}

int run(const std::string& experiment, const Overrides& o) {
  const auto v = load(experiment, o);
  if (!v.ok()) return report_errors(v);
  try {
    const auto result = run_experiment(*v.spec);
    fmt::print("{}", result.summary);
    for (const auto& f : result.files) fmt::print(stderr, "wrote {}\n", f.string());
  } catch (const ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cycle-accurate single-stage and multi-stage switch fabric experiments"};
  app.set_version_flag("--version", std::string(tsnfabric::tool_version()));
  app.require_subcommand(1);

  std::vector<Overrides> overrides(tsnfabric::all_experiments().size() + 1);
  std::vector<std::pair<CLI::App*, std::string>> commands;
  std::size_t i = 0;
  for (const auto kind : tsnfabric::all_experiments()) {
    const std::string name(tsnfabric::to_string(kind));
    auto* cmd = app.add_subcommand(name, fmt::format("run the {} experiment", name));
    add_common(cmd, overrides[i++]);
    commands.emplace_back(cmd, name);
  }
  Overrides& vo = overrides.back();
  auto* validate = app.add_subcommand("validate", "check a config and print its normalized form");
  add_common(validate, vo);
  validate->get_option("--config")->required();

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) {
    const auto v = load("", vo);
    if (!v.ok()) return report_errors(v);
    fmt::print("{}", tsnfabric::to_config_text(*v.spec));
    return 0;
  }
  for (std::size_t k = 0; k < commands.size(); ++k) {
    if (commands[k].first->parsed()) return run(commands[k].second, overrides[k]);
  }
  return 1;
}
