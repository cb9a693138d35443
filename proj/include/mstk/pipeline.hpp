#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mstk/metrics.hpp"
#include "mstk/segmentation.hpp"
#include "mstk/synthgen.hpp"

namespace mstk {

inline constexpr const char* kToolVersion = "1.0.0";

/// Bad or inconsistent configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RenderInput {
  std::size_t count = 0;
  std::array<double, 3> intensity = {20, 128, 230};
  double noise = 10;
  SynthConfig synth;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "runs";

  // inputs
  std::vector<std::string> volumes;  // grayscale .mvol paths or file-name globs
  std::vector<std::vector<std::filesystem::path>> slice_stacks;
  double spacing = kDefaultSpacing;
  RenderInput render;  // grayscale fixtures rendered from synthetic labels

  // subvolume sampling; count 0 keeps whole volumes
  std::uint32_t edge = 96;
  std::size_t samples = 0;
  bool augment = false;

  SegmentationConfig segmentation;

  std::size_t synth_count = 8;
  SynthConfig synth;

  MetricOptions metrics;

  std::vector<std::string> compare_metrics;  // empty = the standard sixteen
  std::size_t bins = 20;
};

/// Bounds for renders with modes (20, 128, 230): +-3 sigma boxes (sigma 10)
/// around each mode. The gradient limit of 256 only drops voxels at sharp
/// three-phase corners; blurred scans want a much tighter one.
SegmentationConfig default_segmentation();

/// Strict parse: unknown keys, wrong types and invalid values throw
/// ConfigError with the offending key path.
PipelineConfig parse_config(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);
/// Canonical form of every setting, defaults included.
nlohmann::json to_json(const PipelineConfig& c);
/// Applies "a.b.c=value" to a config tree; value is read as JSON when it
/// parses, otherwise as a string.
void apply_override(nlohmann::json& tree, const std::string& assignment);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
/// 16 hex digits of the FNV-1a hash of the canonical config dump.
std::string config_hash(const PipelineConfig& c);

/// Seed of item `index` in stream `stream`, independent of scheduling.
std::uint64_t item_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// Jobs from the flag, else MSTK_JOBS, else the hardware thread count.
unsigned resolve_jobs(std::optional<unsigned> flag);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Items must be
/// independent; exceptions are the caller's to capture.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

/// Expands globs (wildcards in the file-name part only) in sorted order.
std::vector<std::filesystem::path> expand_inputs(const std::vector<std::string>& patterns);

// --- batch stages ------------------------------------------------------------

struct ItemResult {
  std::string id;
  std::filesystem::path input;
  bool ok = false;
  std::string message;
  std::vector<std::filesystem::path> outputs;
  nlohmann::json detail;  // stage-specific log (seed counts, ...)
};

struct StageResult {
  std::string name;
  std::vector<ItemResult> items;
  std::string status = "ok";  // ok | partial | failed | skipped
  std::string message;

  std::size_t failures() const;
  void settle();  // derives status from the items
};

/// Validates each input (.mvol or a PGM stack) and writes <out>/<id>.mvol.
StageResult run_ingest(const std::vector<std::filesystem::path>& mvol_inputs,
                       const std::vector<std::vector<std::filesystem::path>>& stacks,
                       double spacing, const std::filesystem::path& out, unsigned jobs);

StageResult run_segment(const std::vector<std::filesystem::path>& inputs,
                        const SegmentationConfig& config, const std::filesystem::path& out,
                        unsigned jobs);

/// metrics.csv plus one <id>.json per volume.
StageResult run_metrics(const std::vector<std::filesystem::path>& inputs,
                        const MetricOptions& options, const std::filesystem::path& out,
                        unsigned jobs);

StageResult run_synth(const SynthConfig& config, std::size_t count, std::uint64_t seed,
                      const std::filesystem::path& out, unsigned jobs);

struct CompareInput {
  std::string source;
  std::filesystem::path csv;
};
/// Throws ConfigError for fewer than two sources, duplicate tags or CSVs
/// with different columns.
StageResult run_compare(const std::vector<CompareInput>& inputs,
                        const std::vector<std::string>& metrics, std::size_t bins,
                        const std::filesystem::path& out);

struct PipelineRun {
  std::filesystem::path directory;
  nlohmann::json manifest;
  int exit_code = 0;
};

/// ingest -> (sample) -> segment -> metrics -> synth -> metrics -> compare
/// into <output_dir>/<config hash>/, with manifest.json.
PipelineRun run_pipeline(const PipelineConfig& config, unsigned jobs);

/// Paths and FNV-1a digests of every file under `dir` except the manifest.
nlohmann::json file_digests(const std::filesystem::path& dir);

}  // namespace mstk
