#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "tsnfabric/harness.hpp"

namespace tsnfabric {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool any_contains(const std::vector<std::string>& items, std::string_view needle) {
  for (const auto& s : items) {
    if (s.find(needle) != std::string::npos) return true;
  }
  return false;
}

fs::path scratch_dir(std::string_view name) {
  const auto dir = fs::temp_directory_path() / "tsnfabric_tests" / name;
  fs::remove_all(dir);
  return dir;
}

TEST(ValidateConfig, MinimalConfigFillsDefaults) {
  const auto res = validate_config_text("experiment = latency-compare\n");
  ASSERT_TRUE(res.ok()) << (res.errors.empty() ? "" : res.errors.front());
  const auto& s = *res.spec;
  EXPECT_EQ(s.kind, ExperimentKind::LatencyCompare);
  EXPECT_EQ(s.base.topology.kind, FabricKind::Clos3);
  EXPECT_EQ(s.base.topology.clos, (ClosParams{2, 2, 4}));
  EXPECT_EQ(s.rates, default_rate_grid());
  EXPECT_EQ(s.single_stage_ports, 8);
  EXPECT_EQ(s.base.priority_mode, PriorityMode::ByVC);
}

TEST(ValidateConfig, RateOutOfRangeIsNamed) {
  const auto res = validate_config_text("experiment = throughput-compare\nrates = 0.1, 1.5\n");
  EXPECT_FALSE(res.ok());
  EXPECT_TRUE(any_contains(res.errors, "rate out of [0,1]"));
  EXPECT_TRUE(any_contains(res.errors, "line 2"));
}

TEST(ValidateConfig, EveryProblemIsReported) {
  const auto res = validate_config_text(
      "experiment = memory-compare\n"
      "rates = 0.3, 0.2\n"
      "scheme = tiny\n"
      "bogus = 1\n"
      "seed = 4\n"
      "seed = 5\n");
  EXPECT_FALSE(res.ok());
  EXPECT_EQ(res.errors.size(), 4u);
  EXPECT_TRUE(any_contains(res.errors, "strictly increasing"));
  EXPECT_TRUE(any_contains(res.errors, "expected baseline or memeff"));
  EXPECT_TRUE(any_contains(res.errors, "unknown key"));
  EXPECT_TRUE(any_contains(res.errors, "repeated key"));
}

TEST(ValidateConfig, BadFaultSelectorIsNamed) {
  const auto res = validate_config_text("experiment = fault-latency\nfaults = 0.0.0->1.0.0, 9.9.9->1.0.0\n");
  EXPECT_FALSE(res.ok());
  EXPECT_TRUE(any_contains(res.errors, "9.9.9->1.0.0"));
}

TEST(ValidateConfig, FaultExperimentNeedsMultiStage) {
  const auto res = validate_config_text("experiment = fault-throughput\ntopology = single\n");
  EXPECT_TRUE(any_contains(res.errors, "multi-stage"));
}

TEST(ValidateConfig, UnknownExperimentAndMissingFile) {
  EXPECT_TRUE(any_contains(validate_config_text("experiment = nope\n").errors, "unknown experiment"));
  EXPECT_TRUE(any_contains(validate_config_text("seed = 1\n").errors, "missing 'experiment'"));
  EXPECT_FALSE(validate_config("/nonexistent/dir/config.txt").ok());
}

TEST(ValidateConfig, AnalyticsPortsMustBePowerOfTwo) {
  const auto res = validate_config_text("experiment = analytics-table\nanalytics_ports = 12\n");
  EXPECT_TRUE(any_contains(res.errors, "power of two"));
}

TEST(ValidateConfig, NormalizedTextReloadsToSameText) {
  for (const auto kind : all_experiments()) {
    const auto text = to_config_text(default_spec(kind));
    const auto res = validate_config_text(text);
    ASSERT_TRUE(res.ok()) << to_string(kind) << ": " << (res.errors.empty() ? "" : res.errors.front());
    EXPECT_EQ(to_config_text(*res.spec), text);
    EXPECT_EQ(parse_experiment_kind(to_string(kind)), kind);
  }
}

TEST(ConfigDigest, Fnv1a) {
  EXPECT_EQ(config_digest(""), "cbf29ce484222325");
  EXPECT_EQ(config_digest("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(config_digest("a").size(), 16u);
}

TEST(PlotData, RowsPerReportWithSaturationFlag) {
  std::vector<StatsReport> reports(9);
  for (int i = 0; i < 9; ++i) {
    reports[i].offered_load = 0.1 * (i + 1);
    reports[i].accepted_throughput = std::min(0.1 * (i + 1), 0.55);
    reports[i].avg_latency_all = 16.0 + i;
    reports[i].saturated = i >= 6;
  }
  for (const auto axis : {PlotAxis::Latency, PlotAxis::Throughput}) {
    const auto text = plot_data(reports, axis, "multi-stage", "abc");
    std::istringstream in(text);
    std::string line;
    int comments = 0, rows = 0, flagged = 0;
    while (std::getline(in, line)) {
      if (line.starts_with("#")) {
        ++comments;
        continue;
      }
      double x = 0, y = 0;
      int flag = -1;
      std::istringstream cols(line);
      ASSERT_TRUE(cols >> x >> y >> flag) << line;
      ++rows;
      flagged += flag;
    }
    EXPECT_EQ(comments, 3);
    EXPECT_EQ(rows, 9);
    EXPECT_EQ(flagged, 3);
    EXPECT_NE(text.find("# series: multi-stage"), std::string::npos);
    EXPECT_NE(text.find("# config_digest: abc"), std::string::npos);
  }
  EXPECT_NE(plot_data(reports, PlotAxis::Latency, "s", "d").find("0.100000 16.000000 0"), std::string::npos);
  EXPECT_THROW(plot_data(std::vector<StatsReport>{}, PlotAxis::Latency, "s", "d"), std::invalid_argument);
}

TEST(SeededFaults, NestedAcrossCountsAndConnected) {
  const TopologySpec topo;
  const auto three = seeded_fault_order(topo, 1, 3);
  ASSERT_EQ(three.size(), 3u);
  for (int k = 0; k <= 3; ++k) {
    const auto prefix = seeded_fault_order(topo, 1, k);
    ASSERT_EQ(prefix.size(), static_cast<std::size_t>(k));
    EXPECT_TRUE(std::equal(prefix.begin(), prefix.end(), three.begin()));
    const auto built = apply_faults(topo.build_base(), prefix);
    EXPECT_EQ(built.disconnected_pairs, 0);
  }
  EXPECT_EQ(seeded_fault_order(topo, 1, 3), three);
  EXPECT_THROW(seeded_fault_order(topo, 1, 9), ConfigError);
}

TEST(SeededFaults, SuccessiveFaultsHitDistinctMiddles) {
  TopologySpec topo;
  topo.clos = {2, 3, 4};
  const auto order = seeded_fault_order(topo, 5, 3);
  std::set<std::string> middles;
  for (const auto& sel : order) middles.insert(sel.substr(sel.find("->") + 2, 3));
  EXPECT_EQ(middles.size(), 3u);
}

ExperimentSpec quick_spec(ExperimentKind kind, const fs::path& dir) {
  auto s = default_spec(kind);
  s.base.warmup_cycles = 300;
  s.base.measure_cycles = 1500;
  s.base.max_drain_cycles = 1500;
  s.rates = {0.1, 0.4};
  s.refine_saturation = false;
  s.threads = 1;
  s.output_dir = dir;
  s.mc_trials = 2000;
  return s;
}

TEST(RunExperiment, ManifestRerunReproducesCsvFiles) {
  const auto dir1 = scratch_dir("rerun1");
  const auto dir2 = scratch_dir("rerun2");
  auto spec = quick_spec(ExperimentKind::FaultLatency, dir1);
  spec.faults = 2;
  const auto first = run_experiment(spec);
  ASSERT_EQ(first.series.size(), 3u);
  EXPECT_EQ(first.series[2].name, "faults-2");

  auto res = validate_config(dir1 / "fault-latency_manifest.txt");
  ASSERT_TRUE(res.ok()) << (res.errors.empty() ? "" : res.errors.front());
  EXPECT_TRUE(std::holds_alternative<std::vector<std::string>>(res.spec->faults));
  res.spec->output_dir = dir2;
  const auto second = run_experiment(*res.spec);

  ASSERT_EQ(first.files.size(), second.files.size());
  int csv_files = 0;
  for (std::size_t i = 0; i < first.files.size(); ++i) {
    EXPECT_EQ(first.files[i].filename(), second.files[i].filename());
    if (first.files[i].extension() != ".csv") continue;  // plot headers and manifest name the output dir
    EXPECT_EQ(slurp(first.files[i]), slurp(second.files[i])) << first.files[i].filename();
    ++csv_files;
  }
  EXPECT_EQ(csv_files, 4);
  EXPECT_TRUE(fs::exists(dir1 / "fault-latency_faults-0.csv"));
  EXPECT_TRUE(fs::exists(dir1 / "fault-latency_faults-1_latency.dat"));
  EXPECT_TRUE(fs::exists(dir1 / "fault-latency_summary.csv"));
}

TEST(RunExperiment, CompareSeriesAndSummary) {
  const auto spec = quick_spec(ExperimentKind::LatencyCompare, scratch_dir("compare"));
  const auto r = run_experiment(spec, false);
  ASSERT_EQ(r.series.size(), 2u);
  EXPECT_EQ(r.series[0].name, "single-stage");
  EXPECT_EQ(r.series[1].name, "multi-stage");
  EXPECT_EQ(r.series[0].reports.front().zero_load_latency, 6.0);
  EXPECT_EQ(r.series[1].reports.front().zero_load_latency, 16.0);
  EXPECT_TRUE(r.summary.starts_with("series,faults,max_accepted"));
  EXPECT_TRUE(r.files.empty());
  EXPECT_FALSE(fs::exists(spec.output_dir));
}

TEST(RunExperiment, AnalyticsTableFiles) {
  const auto dir = scratch_dir("analytics");
  const auto r = run_experiment(quick_spec(ExperimentKind::AnalyticsTable, dir));
  ASSERT_EQ(r.metrics.size(), 3u);
  EXPECT_NEAR(r.metrics[0].reliability, 0.6, 1e-12);
  EXPECT_NEAR(r.metrics[1].reliability, 0.778212676, 1e-9);
  EXPECT_EQ(r.metrics[1].buffer_total, 288);
  EXPECT_EQ(r.metrics[2].buffer_total, 192);
  EXPECT_NEAR(r.metrics[1].ple, 0.8, 1e-12);
  const auto oracle = slurp(dir / "analytics-table_reliability.csv");
  EXPECT_TRUE(oracle.starts_with("ports,r,closed_form,mc_trials,mc_estimate\n"));
  EXPECT_NE(oracle.find("8,0.9,0.778213,2000,"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "analytics-table_metrics.txt"));
  EXPECT_TRUE(fs::exists(dir / "analytics-table_manifest.txt"));
}

}  // namespace
}  // namespace tsnfabric
