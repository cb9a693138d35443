// mstk: batch front end for ingest, segmentation, metrics, synthesis and
// population comparison. Exit codes: 0 success, 1 partial batch failure,
// 2 configuration or parse error.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "mstk/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<unsigned> jobs;
  std::vector<std::string> set;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "global RNG seed (overrides config)");
  cmd->add_option("--out", c.out, "output directory (overrides config)");
  cmd->add_option("--jobs", c.jobs, "worker threads (default: MSTK_JOBS or all cores)");
  cmd->add_option("--set", c.set, "override a config value, e.g. synth.count=4");
}

mstk::PipelineConfig resolve(const Common& c) {
  json tree = json::object();
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    try {
      tree = json::parse(in);
    } catch (const json::parse_error& e) {
      throw mstk::ConfigError(c.config + ": " + e.what());
    }
  }
  for (const auto& s : c.set) mstk::apply_override(tree, s);
  if (c.seed) tree["seed"] = *c.seed;
  if (!c.out.empty()) tree["output_dir"] = c.out;
  return mstk::parse_config(tree);
}

int report(const mstk::StageResult& st) {
  for (const auto& it : st.items) {
    if (it.ok) {
      std::printf("%-24s ok", it.id.c_str());
      if (it.detail.contains("dims"))
        std::printf("  %s %ux%ux%u spacing %g", it.detail["kind"].get<std::string>().c_str(),
                    it.detail["dims"][0].get<unsigned>(), it.detail["dims"][1].get<unsigned>(),
                    it.detail["dims"][2].get<unsigned>(), it.detail["spacing"].get<double>());
      if (it.detail.contains("seeds"))
        std::printf("  seeds pore=%zu ni=%zu ysz=%zu", it.detail["seeds"]["pore"].get<std::size_t>(),
                    it.detail["seeds"]["ni"].get<std::size_t>(),
                    it.detail["seeds"]["ysz"].get<std::size_t>());
      std::printf("\n");
    } else {
      std::printf("%-24s FAILED  %s\n", it.id.c_str(), it.message.c_str());
    }
  }
  std::printf("%s: %zu item(s), %zu failed, status %s%s%s\n", st.name.c_str(), st.items.size(),
              st.failures(), st.status.c_str(), st.message.empty() ? "" : ", ",
              st.message.c_str());
  return st.failures() ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mstk - three-phase microstructure toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mstk::kToolVersion);

  Common common;
  std::vector<std::string> inputs;
  double spacing = mstk::kDefaultSpacing;
  std::optional<std::size_t> count;

  auto* ingest = app.add_subcommand("ingest", "validate .mvol files or assemble a PGM slice stack");
  add_common(ingest, common);
  ingest->add_option("--spacing", spacing, "voxel edge in um for PGM stacks");
  ingest->add_option("inputs", inputs, ".mvol files, or PGM slices in z order")->required();

  auto* segment = app.add_subcommand("segment", "segment grayscale volumes");
  add_common(segment, common);
  segment->add_option("inputs", inputs, "grayscale .mvol files or globs")->required();

  auto* metrics = app.add_subcommand("metrics", "compute metrics of segmented volumes");
  add_common(metrics, common);
  metrics->add_option("inputs", inputs, "segmented .mvol files or globs")->required();

  auto* synth = app.add_subcommand("synth", "generate ellipsoid-packed volumes");
  add_common(synth, common);
  synth->add_option("--count", count, "number of volumes (overrides synth.count)");

  auto* cmp = app.add_subcommand("compare", "compare metric populations");
  add_common(cmp, common);
  cmp->add_option("inputs", inputs, "source=metrics.csv pairs")->required();

  auto* pipeline = app.add_subcommand("pipeline", "run the full campaign");
  add_common(pipeline, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const mstk::PipelineConfig cfg = resolve(common);
    const unsigned jobs = mstk::resolve_jobs(common.jobs);
    const fs::path out = cfg.output_dir;

    if (ingest->parsed()) {
      std::vector<fs::path> mvols;
      std::vector<std::vector<fs::path>> stacks(1);
      for (const auto& p : mstk::expand_inputs(inputs)) {
        if (p.extension() == ".pgm")
          stacks.front().push_back(p);
        else
          mvols.push_back(p);
      }
      if (stacks.front().empty()) stacks.clear();
      const auto st = mstk::run_ingest(mvols, stacks, spacing, out, jobs);
      report(st);
      // A file that cannot be parsed is a parse error.
      return st.failures() ? 2 : 0;
    }
    if (segment->parsed())
      return report(mstk::run_segment(mstk::expand_inputs(inputs), cfg.segmentation, out, jobs));
    if (metrics->parsed())
      return report(mstk::run_metrics(mstk::expand_inputs(inputs), cfg.metrics, out, jobs));
    if (synth->parsed())
      return report(mstk::run_synth(cfg.synth, count.value_or(cfg.synth_count), cfg.seed, out, jobs));
    if (cmp->parsed()) {
      std::vector<mstk::CompareInput> sources;
      for (const auto& s : inputs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
          throw mstk::ConfigError("compare input '" + s + "' is not source=path");
        sources.push_back({s.substr(0, eq), s.substr(eq + 1)});
      }
      return report(mstk::run_compare(sources, cfg.compare_metrics, cfg.bins, out));
    }
    if (pipeline->parsed()) {
      const auto run = mstk::run_pipeline(cfg, jobs);
      for (const auto& s : run.manifest["stages"])
        std::printf("%-20s %s\n", s["name"].get<std::string>().c_str(),
                    s["status"].get<std::string>().c_str());
      std::printf("output: %s\n", run.directory.string().c_str());
      return run.exit_code;
    }
  } catch (const mstk::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
