#include "mstk/pipeline.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "mstk/record_io.hpp"
#include "mstk/sampling.hpp"
#include "mstk/statlab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mstk {

namespace {

// Walks one JSON object, remembering which keys were read so leftovers can
// be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }
  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  Section child(const std::string& key) { return Section(raw(key), key_path(key)); }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>)
          if (v.get<long long>() < 0) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError(key_path(key) + ": wrong type (" + std::string(v.type_name()) + ")");
    }
  }

  template <class T, std::size_t N>
  void get_array(const std::string& key, std::array<T, N>& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != N)
      throw ConfigError(key_path(key) + ": expected an array of " + std::to_string(N));
    for (std::size_t i = 0; i < N; ++i) {
      if (!v[i].is_number()) throw ConfigError(key_path(key) + ": expected numbers");
      if constexpr (std::is_integral_v<T>)
        if (!v[i].is_number_integer() || v[i].get<long long>() <= 0)
          throw ConfigError(key_path(key) + ": expected positive integers");
      out[i] = v[i].get<T>();
    }
  }

  void finish() const {
    for (const auto& [k, _] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key " + key_path(k));
  }

  std::string where() const { return path_.empty() ? "config" : path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void check(bool ok, const std::string& key, F&& what) {
  if (!ok) throw ConfigError(key + ": " + what());
}

void parse_moments(Section s, SizeMoments& m) {
  s.get("mean", m.mean);
  s.get("std", m.std);
  s.finish();
}

// Fields shared by the synth section and the render section.
void parse_synth(Section& s, SynthConfig& c) {
  s.get_array("fractions", c.fractions);
  if (s.has("ni")) parse_moments(s.child("ni"), c.ni);
  if (s.has("ysz")) parse_moments(s.child("ysz"), c.ysz);
  std::array<std::uint32_t, 3> dims = {c.dims.nx, c.dims.ny, c.dims.nz};
  s.get_array("dims", dims);
  c.dims = {dims[0], dims[1], dims[2]};
  s.get("spacing", c.spacing);
  std::array<double, 2> aspect = {c.aspect_min, c.aspect_max};
  s.get_array("aspect", aspect);
  c.aspect_min = aspect[0];
  c.aspect_max = aspect[1];
  s.get("overlap_threshold", c.overlap_threshold);
  s.get("retries", c.retries);
  s.get("overlap_samples", c.overlap_samples);
  s.get("fill_tolerance", c.fill_tolerance);
  s.get("octants", c.octants);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s.where() + ": " + e.what());
  }
}

json synth_json(const SynthConfig& c) {
  return {{"fractions", c.fractions},
          {"ni", {{"mean", c.ni.mean}, {"std", c.ni.std}}},
          {"ysz", {{"mean", c.ysz.mean}, {"std", c.ysz.std}}},
          {"dims", {c.dims.nx, c.dims.ny, c.dims.nz}},
          {"spacing", c.spacing},
          {"aspect", {c.aspect_min, c.aspect_max}},
          {"overlap_threshold", c.overlap_threshold},
          {"retries", c.retries},
          {"overlap_samples", c.overlap_samples},
          {"fill_tolerance", c.fill_tolerance},
          {"octants", c.octants}};
}

const std::array<std::pair<const char*, std::uint8_t>, 7> kFaceNames = {{{"x-", kXMin},
                                                                        {"x+", kXMax},
                                                                        {"y-", kYMin},
                                                                        {"y+", kYMax},
                                                                        {"z-", kZMin},
                                                                        {"z+", kZMax},
                                                                        {"any", kAnyFace}}};

const char* const kPhaseKeys[3] = {"pore", "ni", "ysz"};

json faces_json(std::uint8_t bits) {
  if (bits == kAnyFace) return json::array({"any"});
  json a = json::array();
  for (const auto& [name, bit] : kFaceNames)
    if (bit != kAnyFace && (bits & bit)) a.push_back(name);
  return a;
}

Connectivity parse_connectivity(Section& s, const std::string& key, Connectivity def) {
  int v = static_cast<int>(def);
  s.get(key, v);
  check(v == 6 || v == 26, s.key_path(key), [] { return std::string("must be 6 or 26"); });
  return static_cast<Connectivity>(v);
}

std::string hex16(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::string describe(const std::exception& e) {
  if (const auto* v = dynamic_cast<const VolumeError*>(&e); v && v->offset() >= 0)
    return std::string(e.what()) + " (byte offset " + std::to_string(v->offset()) + ")";
  return e.what();
}

// Ids are file stems; repeats get a numeric suffix.
std::vector<std::string> unique_ids(const std::vector<std::string>& stems) {
  std::vector<std::string> ids;
  std::set<std::string> used;
  for (const auto& s : stems) {
    std::string id = s;
    for (int k = 1; used.count(id); ++k) id = s + "_" + std::to_string(k);
    used.insert(id);
    ids.push_back(id);
  }
  return ids;
}

std::vector<std::string> stems_of(const std::vector<fs::path>& paths) {
  std::vector<std::string> s;
  for (const auto& p : paths) s.push_back(p.stem().string());
  return s;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<fs::path> ok_outputs(const StageResult& st) {
  std::vector<fs::path> out;
  for (const auto& it : st.items)
    if (it.ok) out.insert(out.end(), it.outputs.begin(), it.outputs.end());
  return out;
}

json stage_json(const StageResult& st, const fs::path& root) {
  json items = json::array();
  for (const auto& it : st.items) {
    json outs = json::array();
    for (const auto& o : it.outputs) outs.push_back(fs::relative(o, root).generic_string());
    json j = {{"id", it.id}, {"status", it.ok ? "ok" : "failed"}, {"outputs", outs}};
    if (!it.input.empty()) {
      const fs::path rel = fs::relative(it.input, root);
      j["input"] = (rel.empty() || *rel.begin() == "..") ? it.input.generic_string()
                                                          : rel.generic_string();
    }
    if (!it.message.empty()) j["message"] = it.message;
    if (!it.detail.is_null()) j["detail"] = it.detail;
    items.push_back(std::move(j));
  }
  json j = {{"name", st.name}, {"status", st.status}, {"items", items}};
  if (!st.message.empty()) j["message"] = st.message;
  return j;
}

}  // namespace

SegmentationConfig default_segmentation() {
  SegmentationConfig c;
  c.bounds[Phase::Pore] = {0, 50, 0, 256};
  c.bounds[Phase::Ni] = {98, 158, 0, 256};
  c.bounds[Phase::YSZ] = {200, 255, 0, 256};
  return c;
}

PipelineConfig parse_config(const json& j) {
  PipelineConfig c;
  c.segmentation = default_segmentation();
  c.render.synth.dims = {64, 64, 64};
  Section root(j, "");
  root.get("seed", c.seed);
  if (root.has("output_dir")) {
    std::string d;
    root.get("output_dir", d);
    check(!d.empty(), "output_dir", [] { return std::string("must not be empty"); });
    c.output_dir = d;
  }

  if (root.has("inputs")) {
    Section in = root.child("inputs");
    if (in.has("volumes")) {
      const json& v = in.raw("volumes");
      check(v.is_array(), "inputs.volumes", [] { return std::string("expected an array"); });
      for (const auto& p : v) {
        check(p.is_string(), "inputs.volumes", [] { return std::string("expected strings"); });
        c.volumes.push_back(p.get<std::string>());
      }
    }
    if (in.has("slice_stacks")) {
      const json& v = in.raw("slice_stacks");
      check(v.is_array(), "inputs.slice_stacks", [] { return std::string("expected an array"); });
      for (const auto& stack : v) {
        check(stack.is_array() && !stack.empty(), "inputs.slice_stacks",
              [] { return std::string("each stack is a nonempty array of PGM paths"); });
        std::vector<fs::path> paths;
        for (const auto& p : stack) {
          check(p.is_string(), "inputs.slice_stacks", [] { return std::string("expected strings"); });
          paths.emplace_back(p.get<std::string>());
        }
        c.slice_stacks.push_back(std::move(paths));
      }
    }
    in.get("spacing", c.spacing);
    check(c.spacing > 0, "inputs.spacing", [] { return std::string("must be positive"); });
    if (in.has("render")) {
      Section r = in.child("render");
      r.get("count", c.render.count);
      r.get_array("intensity", c.render.intensity);
      for (double v : c.render.intensity)
        check(v >= 0 && v <= 255, "inputs.render.intensity",
              [] { return std::string("must lie in [0, 255]"); });
      r.get("noise", c.render.noise);
      check(c.render.noise >= 0, "inputs.render.noise",
            [] { return std::string("must be non-negative"); });
      if (r.has("synth")) {
        Section rs = r.child("synth");
        parse_synth(rs, c.render.synth);
        rs.finish();
      }
      r.finish();
    }
    in.finish();
  }

  if (root.has("sampling")) {
    Section s = root.child("sampling");
    s.get("edge", c.edge);
    check(c.edge > 0, "sampling.edge", [] { return std::string("must be positive"); });
    s.get("count", c.samples);
    s.get("augment", c.augment);
    s.finish();
  }

  if (root.has("segmentation")) {
    Section s = root.child("segmentation");
    if (s.has("bounds")) {
      Section b = s.child("bounds");
      for (Phase p : kPhases) {
        const std::string key = kPhaseKeys[slot(p)];
        if (!b.has(key)) continue;
        Section box = b.child(key);
        std::array<double, 2> in = {c.segmentation.bounds[p].intensity_lo,
                                    c.segmentation.bounds[p].intensity_hi};
        std::array<double, 2> gr = {c.segmentation.bounds[p].gradient_lo,
                                    c.segmentation.bounds[p].gradient_hi};
        box.get_array("intensity", in);
        box.get_array("gradient", gr);
        box.finish();
        c.segmentation.bounds[p] = {in[0], in[1], gr[0], gr[1]};
      }
      b.finish();
    }
    s.get("intensity_bins", c.segmentation.intensity_bins);
    s.get("gradient_bins", c.segmentation.gradient_bins);
    check(c.segmentation.intensity_bins > 0 && c.segmentation.gradient_bins > 0,
          "segmentation", [] { return std::string("bin counts must be positive"); });
    s.finish();
  }
  try {
    c.segmentation.bounds.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("segmentation.bounds: ") + e.what());
  }

  if (root.has("synth")) {
    Section s = root.child("synth");
    s.get("count", c.synth_count);
    parse_synth(s, c.synth);
    s.finish();
  }

  if (root.has("metrics")) {
    Section s = root.child("metrics");
    c.metrics.component_connectivity =
        parse_connectivity(s, "connectivity", c.metrics.component_connectivity);
    c.metrics.geodesic_connectivity =
        parse_connectivity(s, "geodesic_connectivity", c.metrics.geodesic_connectivity);
    s.get("area_correction", c.metrics.area_correction);
    check(c.metrics.area_correction > 0, "metrics.area_correction",
          [] { return std::string("must be positive"); });
    if (s.has("active_faces")) {
      Section f = s.child("active_faces");
      for (Phase p : kPhases) {
        const std::string key = kPhaseKeys[slot(p)];
        if (!f.has(key)) continue;
        const json& names = f.raw(key);
        const std::string path = f.key_path(key);
        check(names.is_array() && !names.empty(), path,
              [] { return std::string("expected a nonempty array of faces"); });
        std::uint8_t bits = 0;
        for (const auto& n : names) {
          check(n.is_string(), path, [] { return std::string("expected face names"); });
          const auto it = std::find_if(kFaceNames.begin(), kFaceNames.end(),
                                       [&](const auto& e) { return n.get<std::string>() == e.first; });
          check(it != kFaceNames.end(), path, [&] {
            return "unknown face " + n.get<std::string>() + " (x-, x+, y-, y+, z-, z+, any)";
          });
          bits |= it->second;
        }
        c.metrics.active.faces[slot(p)] = bits;
      }
      f.finish();
    }
    s.finish();
  }

  if (root.has("compare")) {
    Section s = root.child("compare");
    if (s.has("metrics")) {
      const json& m = s.raw("metrics");
      check(m.is_array(), "compare.metrics", [] { return std::string("expected an array"); });
      const auto& known = metric_columns();
      for (const auto& name : m) {
        check(name.is_string(), "compare.metrics", [] { return std::string("expected strings"); });
        const auto n = name.get<std::string>();
        check(std::find(known.begin(), known.end(), n) != known.end(), "compare.metrics",
              [&] { return "unknown metric " + n; });
        c.compare_metrics.push_back(n);
      }
    }
    s.get("bins", c.bins);
    check(c.bins > 0, "compare.bins", [] { return std::string("must be positive"); });
    s.finish();
  }
  root.finish();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const PipelineConfig& c) {
  json stacks = json::array();
  for (const auto& s : c.slice_stacks) {
    json a = json::array();
    for (const auto& p : s) a.push_back(p.generic_string());
    stacks.push_back(a);
  }
  json bounds = json::object();
  for (Phase p : kPhases) {
    const SeedBox& b = c.segmentation.bounds[p];
    bounds[kPhaseKeys[slot(p)]] = {{"intensity", {b.intensity_lo, b.intensity_hi}},
                                   {"gradient", {b.gradient_lo, b.gradient_hi}}};
  }
  json faces = json::object();
  for (Phase p : kPhases) faces[kPhaseKeys[slot(p)]] = faces_json(c.metrics.active.faces[slot(p)]);
  json synth = synth_json(c.synth);
  synth["count"] = c.synth_count;
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir.generic_string()},
      {"inputs",
       {{"volumes", c.volumes},
        {"slice_stacks", stacks},
        {"spacing", c.spacing},
        {"render",
         {{"count", c.render.count},
          {"intensity", c.render.intensity},
          {"noise", c.render.noise},
          {"synth", synth_json(c.render.synth)}}}}},
      {"sampling", {{"edge", c.edge}, {"count", c.samples}, {"augment", c.augment}}},
      {"segmentation",
       {{"bounds", bounds},
        {"intensity_bins", c.segmentation.intensity_bins},
        {"gradient_bins", c.segmentation.gradient_bins}}},
      {"synth", synth},
      {"metrics",
       {{"connectivity", static_cast<int>(c.metrics.component_connectivity)},
        {"geodesic_connectivity", static_cast<int>(c.metrics.geodesic_connectivity)},
        {"active_faces", faces},
        {"area_correction", c.metrics.area_correction}}},
      {"compare", {{"metrics", c.compare_metrics}, {"bins", c.bins}}},
  };
}

void apply_override(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) *node = json::object();
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const PipelineConfig& c) {
  // The output directory does not change any result, so it stays out.
  json j = to_json(c);
  j.erase("output_dir");
  return hex16(fnv1a(j.dump()));
}

std::uint64_t item_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return Rng::mix(Rng::mix(seed ^ Rng::mix(stream)) + index);
}

unsigned resolve_jobs(std::optional<unsigned> flag) {
  if (flag && *flag > 0) return *flag;
  if (const char* env = std::getenv("MSTK_JOBS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& patterns) {
  std::vector<fs::path> out;
  for (const auto& pat : patterns) {
    const fs::path p(pat);
    const std::string name = p.filename().string();
    if (name.find_first_of("*?[") == std::string::npos) {
      out.push_back(p);
      continue;
    }
    const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
    std::vector<fs::path> hits;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec))
      if (e.is_regular_file() && fnmatch(name.c_str(), e.path().filename().c_str(), 0) == 0)
        hits.push_back(p.has_parent_path() ? dir / e.path().filename() : e.path().filename());
    if (hits.empty()) throw ConfigError("pattern " + pat + " matches no files");
    std::sort(hits.begin(), hits.end());
    out.insert(out.end(), hits.begin(), hits.end());
  }
  return out;
}

std::size_t StageResult::failures() const {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(), [](const ItemResult& i) { return !i.ok; }));
}

void StageResult::settle() {
  const std::size_t bad = failures();
  if (items.empty())
    status = "skipped";
  else if (bad == 0)
    status = "ok";
  else
    status = bad == items.size() ? "failed" : "partial";
}

StageResult run_ingest(const std::vector<fs::path>& mvol_inputs,
                       const std::vector<std::vector<fs::path>>& stacks, double spacing,
                       const fs::path& out, unsigned jobs) {
  fs::create_directories(out);
  StageResult st{"ingest", {}, "ok", {}};
  std::vector<std::string> stems = stems_of(mvol_inputs);
  for (const auto& s : stacks) stems.push_back(s.empty() ? "stack" : s.front().stem().string());
  const auto ids = unique_ids(stems);
  st.items.resize(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t i) {
    ItemResult& r = st.items[i];
    r.id = ids[i];
    try {
      AnyVolume v;
      if (i < mvol_inputs.size()) {
        r.input = mvol_inputs[i];
        v = load_volume(mvol_inputs[i]);
      } else {
        const auto& stack = stacks[i - mvol_inputs.size()];
        r.input = stack.empty() ? fs::path() : stack.front();
        v = import_slice_stack(stack, spacing);
      }
      const fs::path dest = out / (r.id + ".mvol");
      save_volume(v, dest);
      std::visit(
          [&](const auto& vol) {
            r.detail = {{"kind", vol.kind == VolumeKind::Grayscale ? "grayscale" : "segmented"},
                        {"dims", {vol.dims().nx, vol.dims().ny, vol.dims().nz}},
                        {"spacing", vol.spacing()}};
          },
          v);
      r.outputs.push_back(dest);
      r.ok = true;
    } catch (const std::exception& e) {
      r.message = (r.input.empty() ? std::string() : r.input.string() + ": ") + describe(e);
    }
  });
  st.settle();
  return st;
}

StageResult run_segment(const std::vector<fs::path>& inputs, const SegmentationConfig& config,
                        const fs::path& out, unsigned jobs) {
  config.bounds.validate();
  fs::create_directories(out);
  StageResult st{"segment", {}, "ok", {}};
  const auto ids = unique_ids(stems_of(inputs));
  st.items.resize(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) {
    ItemResult& r = st.items[i];
    r.id = ids[i];
    r.input = inputs[i];
    try {
      const GrayscaleVolume g = load_grayscale(inputs[i]);
      const SegmentationResult res = segment_pipeline(g, config);
      r.detail = {{"seeds",
                   {{"pore", res.seed_counts[0]}, {"ni", res.seed_counts[1]}, {"ysz", res.seed_counts[2]}}}};
      const fs::path dest = out / (r.id + ".mvol");
      save_volume(res.labels, dest);
      r.outputs.push_back(dest);
      r.ok = true;
    } catch (const std::exception& e) {
      r.message = describe(e);
    }
  });
  st.settle();
  // Per-file seed log, written once by the coordinating thread.
  std::ostringstream log;
  log << "id,status,seeds_pore,seeds_ni,seeds_ysz,message\n";
  for (const auto& r : st.items) {
    log << r.id << ',' << (r.ok ? "ok" : "failed");
    for (const char* k : {"pore", "ni", "ysz"})
      log << ',' << (r.ok ? std::to_string(r.detail["seeds"][k].get<std::size_t>()) : "");
    std::string msg = r.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    log << ',' << msg << '\n';
  }
  write_text(out / "segment_log.csv", log.str());
  return st;
}

StageResult run_metrics(const std::vector<fs::path>& inputs, const MetricOptions& options,
                        const fs::path& out, unsigned jobs) {
  fs::create_directories(out);
  StageResult st{"metrics", {}, "ok", {}};
  const auto ids = unique_ids(stems_of(inputs));
  st.items.resize(inputs.size());
  std::vector<std::optional<MetricsRecord>> records(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) {
    ItemResult& r = st.items[i];
    r.id = ids[i];
    r.input = inputs[i];
    try {
      records[i] = metrics_report(load_segmented(inputs[i]), r.id, options);
      const fs::path dest = out / (r.id + ".json");
      write_text(dest, to_json(*records[i]).dump(2) + "\n");
      r.outputs.push_back(dest);
      r.ok = true;
    } catch (const std::exception& e) {
      r.message = describe(e);
    }
  });
  std::vector<MetricsRecord> good;
  for (auto& rec : records)
    if (rec) good.push_back(std::move(*rec));
  std::ostringstream csv;
  write_metrics_csv(csv, good);
  write_text(out / "metrics.csv", csv.str());
  st.settle();
  return st;
}

StageResult run_synth(const SynthConfig& config, std::size_t count, std::uint64_t seed,
                      const fs::path& out, unsigned jobs) {
  config.validate();
  fs::create_directories(out);
  StageResult st{"synth", {}, "ok", {}};
  st.items.resize(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    ItemResult& r = st.items[i];
    char name[32];
    std::snprintf(name, sizeof name, "synth_%04zu", i);
    r.id = name;
    try {
      SynthConfig c = config;
      c.seed = item_seed(seed, 0x5e7, i);
      const auto vols = generate(c);
      r.detail = {{"seed", c.seed}};
      for (std::size_t k = 0; k < vols.size(); ++k) {
        const fs::path dest =
            out / (vols.size() == 1 ? r.id + ".mvol" : r.id + "_o" + std::to_string(k) + ".mvol");
        save_volume(vols[k], dest);
        r.outputs.push_back(dest);
      }
      r.ok = true;
    } catch (const std::exception& e) {
      r.message = describe(e);
    }
  });
  st.settle();
  return st;
}

StageResult run_compare(const std::vector<CompareInput>& inputs,
                        const std::vector<std::string>& metrics, std::size_t bins,
                        const fs::path& out) {
  if (inputs.size() < 2)
    throw ConfigError("compare needs at least two tagged metrics CSVs (source=path)");
  std::set<std::string> tags;
  for (const auto& in : inputs)
    if (!tags.insert(in.source).second) throw ConfigError("duplicate source tag " + in.source);

  std::vector<MetricsTable> tables;
  for (const auto& in : inputs) {
    try {
      tables.push_back(read_metrics_csv(in.csv));
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  for (std::size_t k = 1; k < tables.size(); ++k) {
    std::vector<std::string> a, b;
    for (const auto& [name, _] : tables[0].columns) a.push_back(name);
    for (const auto& [name, _] : tables[k].columns) b.push_back(name);
    if (a != b)
      throw ConfigError("schema mismatch: " + inputs[k].csv.string() + " has different columns than " +
                        inputs[0].csv.string());
  }

  const auto& wanted = metrics.empty() ? comparison_metrics() : metrics;
  std::map<std::string, std::map<std::string, MetricPopulation>> pops;
  StageResult st{"compare", {}, "ok", {}};
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& by_metric = pops[inputs[k].source];
    for (const auto& m : wanted) {
      const auto it = tables[k].columns.find(m);
      if (it == tables[k].columns.end()) continue;
      by_metric.emplace(m, MetricPopulation::from_optional(m, inputs[k].source, tables[k].ids, it->second));
    }
    ItemResult r;
    r.id = inputs[k].source;
    r.input = inputs[k].csv;
    r.ok = true;
    r.detail = {{"volumes", tables[k].ids.size()}};
    st.items.push_back(std::move(r));
  }
  const ComparisonReport report = compare(pops, wanted, bins);
  emit_report(report, out);
  if (!report.warnings.empty()) st.message = std::to_string(report.warnings.size()) + " warning(s)";
  st.settle();
  return st;
}

json file_digests(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  json a = json::array();
  for (const auto& f : files) {
    const std::string bytes = read_file(f);
    a.push_back({{"path", fs::relative(f, dir).generic_string()},
                 {"bytes", bytes.size()},
                 {"fnv1a", hex16(fnv1a(bytes))}});
  }
  return a;
}

PipelineRun run_pipeline(const PipelineConfig& config, unsigned jobs) {
  PipelineRun run;
  const std::string hash = config_hash(config);
  run.directory = config.output_dir / hash;
  const std::string started = utc_now();
  // The directory belongs to this exact config; a rerun rebuilds it.
  fs::remove_all(run.directory);
  fs::create_directories(run.directory);
  const fs::path& root = run.directory;
  std::vector<StageResult> stages;

  // Inputs: files, slice stacks and rendered fixtures all land in ingest/.
  StageResult ingest = run_ingest(expand_inputs(config.volumes), config.slice_stacks,
                                  config.spacing, root / "ingest", jobs);
  if (config.render.count > 0) {
    std::vector<ItemResult> rendered(config.render.count);
    parallel_for(config.render.count, jobs, [&](std::size_t i) {
      ItemResult& r = rendered[i];
      char name[32];
      std::snprintf(name, sizeof name, "render_%04zu", i);
      r.id = name;
      try {
        SynthConfig c = config.render.synth;
        c.octants = false;
        c.seed = item_seed(config.seed, 0x4e4d, i);
        const SegmentedVolume labels = generate(c).front();
        const GrayscaleVolume g =
            grayscale_render(labels, config.render.intensity, config.render.noise,
                             item_seed(config.seed, 0x401e, i));
        const fs::path dest = root / "ingest" / (r.id + ".mvol");
        save_volume(g, dest);
        r.outputs.push_back(dest);
        r.detail = {{"kind", "grayscale"}, {"rendered", true}};
        r.ok = true;
      } catch (const std::exception& e) {
        r.message = describe(e);
      }
    });
    ingest.items.insert(ingest.items.end(), rendered.begin(), rendered.end());
    ingest.settle();
  }
  stages.push_back(ingest);

  // Only grayscale volumes go on to segmentation.
  std::vector<fs::path> gray;
  for (const auto& it : ingest.items)
    if (it.ok && it.detail.value("kind", "") == "grayscale") gray.push_back(it.outputs.front());

  if (config.samples > 0) {
    StageResult samp{"sample", {}, "ok", {}};
    const fs::path dir = root / "samples";
    fs::create_directories(dir);
    samp.items.resize(gray.size());
    parallel_for(gray.size(), jobs, [&](std::size_t i) {
      ItemResult& r = samp.items[i];
      r.id = gray[i].stem().string();
      r.input = gray[i];
      try {
        const auto subs = sample_subvolumes(load_grayscale(gray[i]), config.samples, config.edge,
                                            item_seed(config.seed, 0x5a3, i), config.augment);
        for (std::size_t k = 0; k < subs.size(); ++k) {
          char name[16];
          std::snprintf(name, sizeof name, "_s%03zu", k);
          const fs::path dest = dir / (r.id + name + ".mvol");
          save_volume(subs[k], dest);
          r.outputs.push_back(dest);
        }
        r.ok = true;
      } catch (const std::exception& e) {
        r.message = describe(e);
      }
    });
    samp.settle();
    stages.push_back(samp);
    gray = ok_outputs(samp);
  }

  StageResult seg = gray.empty() ? StageResult{"segment", {}, "skipped", "no grayscale inputs"}
                                 : run_segment(gray, config.segmentation, root / "segmented", jobs);
  stages.push_back(seg);

  const auto metrics_stage = [&](const std::vector<fs::path>& in, const std::string& source) {
    StageResult m = in.empty() ? StageResult{"metrics", {}, "skipped", "no segmented inputs"}
                               : run_metrics(in, config.metrics, root / "metrics" / source, jobs);
    m.name = "metrics_" + source;
    return m;
  };
  const StageResult m_orig = metrics_stage(ok_outputs(seg), "original");
  stages.push_back(m_orig);

  const StageResult syn = config.synth_count == 0
                              ? StageResult{"synth", {}, "skipped", "count is 0"}
                              : run_synth(config.synth, config.synth_count, config.seed,
                                          root / "synth", jobs);
  stages.push_back(syn);
  const StageResult m_syn = metrics_stage(ok_outputs(syn), "ellipsoid");
  stages.push_back(m_syn);

  std::vector<CompareInput> sources;
  if (m_orig.status != "skipped" && m_orig.failures() < m_orig.items.size())
    sources.push_back({"original", root / "metrics" / "original" / "metrics.csv"});
  if (m_syn.status != "skipped" && m_syn.failures() < m_syn.items.size())
    sources.push_back({"ellipsoid", root / "metrics" / "ellipsoid" / "metrics.csv"});
  if (sources.size() < 2) {
    stages.push_back({"compare", {}, "skipped", "needs two sources with metrics"});
  } else {
    try {
      stages.push_back(run_compare(sources, config.compare_metrics, config.bins, root / "report"));
    } catch (const std::exception& e) {
      stages.push_back({"compare", {}, "failed", e.what()});
    }
  }

  json stage_list = json::array();
  bool clean = true;
  for (const auto& s : stages) {
    stage_list.push_back(stage_json(s, root));
    if (s.status == "partial" || s.status == "failed") clean = false;
  }
  run.exit_code = clean ? 0 : 1;
  run.manifest = {{"tool", "mstk"},
                  {"version", kToolVersion},
                  {"schema", {{"metrics", kMetricsSchemaVersion}, {"report", kReportSchemaVersion}}},
                  {"config_hash", hash},
                  {"seed", config.seed},
                  {"config", to_json(config)},
                  {"stages", stage_list},
                  {"files", file_digests(root)},
                  {"exit_code", run.exit_code},
                  {"started_at", started},
                  {"finished_at", utc_now()}};
  write_text(root / "manifest.json", run.manifest.dump(2) + "\n");
  return run;
}

}  // namespace mstk
