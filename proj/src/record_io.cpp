#include "mstk/record_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mstk {

namespace {

constexpr const char* kPhaseKeys[3] = {"pore", "ni", "ysz"};
constexpr const char* kPairKeys[3] = {"pore_ni", "pore_ysz", "ni_ysz"};

std::vector<std::string> build_columns() {
  std::vector<std::string> c;
  for (const char* p : kPhaseKeys) c.push_back(std::string("theta_") + p);
  for (const char* p : kPhaseKeys) c.push_back(std::string("dmean_") + p);
  for (const char* p : kPhaseKeys) c.push_back(std::string("tau_") + p);
  for (const char* p : kPairKeys) c.push_back(std::string("area_") + p);
  for (const char* p : kPhaseKeys) c.push_back(std::string("K_") + p);
  c.push_back("tpb_total");
  // Extras beyond the standard panels.
  for (const char* p : kPhaseKeys) c.push_back(std::string("dstd_") + p);
  for (const char* axis : {"x", "y", "z"})
    for (const char* p : kPhaseKeys) c.push_back(std::string("tau") + axis + "_" + p);
  c.push_back("tpb_active");
  return c;
}

int phase_index(const std::string& key) {
  for (int i = 0; i < 3; ++i)
    if (key == kPhaseKeys[i]) return i;
  return -1;
}

int pair_index(const std::string& key) {
  for (int i = 0; i < 3; ++i)
    if (key == kPairKeys[i]) return i;
  return -1;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

const std::vector<std::string>& metric_columns() {
  static const auto cols = build_columns();
  return cols;
}

const std::vector<std::string>& comparison_metrics() {
  static const std::vector<std::string> cols(metric_columns().begin(),
                                             metric_columns().begin() + 16);
  return cols;
}

std::optional<double> metric_value(const MetricsRecord& r, const std::string& column) {
  const auto us = column.rfind('_');
  if (column == "tpb_total") return r.tpb_total;
  if (column == "tpb_active") return r.tpb_active;
  if (us == std::string::npos) throw std::invalid_argument("unknown metric " + column);
  if (column.rfind("area_", 0) == 0) {
    const int k = pair_index(column.substr(5));
    if (k < 0) throw std::invalid_argument("unknown metric " + column);
    return r.area[k];
  }
  const std::string head = column.substr(0, us);
  const int p = phase_index(column.substr(us + 1));
  if (p < 0) throw std::invalid_argument("unknown metric " + column);
  if (head == "theta") return r.theta[p];
  if (head == "dmean") return r.d_mean[p];
  if (head == "dstd") return r.d_std[p];
  if (head == "tau") return r.tau[p];
  if (head == "K") return r.formation[p];
  if (head == "taux") return r.tau_axes[p][0];
  if (head == "tauy") return r.tau_axes[p][1];
  if (head == "tauz") return r.tau_axes[p][2];
  throw std::invalid_argument("unknown metric " + column);
}

nlohmann::json to_json(const MetricsRecord& r) {
  nlohmann::json j;
  j["schema_version"] = kMetricsSchemaVersion;
  j["id"] = r.id;
  j["dims"] = {r.dims.nx, r.dims.ny, r.dims.nz};
  j["spacing_um"] = r.spacing;
  nlohmann::json phases = nlohmann::json::object();
  for (Phase p : kPhases) {
    const std::size_t k = slot(p);
    nlohmann::json ph;
    ph["label"] = static_cast<int>(p);
    ph["volume_fraction"] = r.theta[k];
    ph["d_mean_um"] = opt(r.d_mean[k]);
    ph["d_std_um"] = opt(r.d_std[k]);
    ph["percolating"] = r.tau[k].has_value();
    ph["tortuosity"] = opt(r.tau[k]);
    ph["tortuosity_axes"] = {opt(r.tau_axes[k][0]), opt(r.tau_axes[k][1]), opt(r.tau_axes[k][2])};
    ph["formation_factor"] = opt(r.formation[k]);
    phases[kPhaseKeys[k]] = ph;
  }
  j["phases"] = phases;
  nlohmann::json area = nlohmann::json::object();
  for (int k = 0; k < 3; ++k) area[kPairKeys[k]] = r.area[k];
  j["interfacial_area_um2_per_um3"] = area;
  j["tpb_um_per_um3"] = {{"total", r.tpb_total}, {"active", r.tpb_active}};
  j["conventions"] = {
      {"tortuosity", "geodesic; mean over reachable outlet voxels, averaged over both directions "
                     "of each axis; phase value is the mean over percolating axes"},
      {"particle_size", "volume-weighted inscribed-sphere diameter; domain faces bound spheres"},
      {"tpb", "voxel-edge counting"},
  };
  return j;
}

std::string metrics_csv_header() {
  std::string h = "row_type,id,nx,ny,nz,spacing";
  for (const auto& c : metric_columns()) h += "," + c;
  for (const char* p : kPhaseKeys) h += std::string(",percolating_") + p;
  return h;
}

std::string metrics_csv_row(const MetricsRecord& r) {
  std::string row = "volume," + r.id + "," + std::to_string(r.dims.nx) + "," +
                    std::to_string(r.dims.ny) + "," + std::to_string(r.dims.nz) + "," +
                    format_number(r.spacing);
  for (const auto& c : metric_columns()) {
    row += ",";
    if (const auto v = metric_value(r, c)) row += format_number(*v);
  }
  for (Phase p : kPhases) row += r.percolating(p) ? ",1" : ",0";
  return row;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records) {
  out << metrics_csv_header() << '\n';
  for (const auto& r : records) out << metrics_csv_row(r) << '\n';
  if (records.empty()) return;
  std::string mean_row = "mean,,,,,", std_row = "std,,,,,";
  for (const auto& c : metric_columns()) {
    double sum = 0;
    std::size_t n = 0;
    std::vector<double> vals;
    for (const auto& r : records)
      if (const auto v = metric_value(r, c)) vals.push_back(*v);
    for (double v : vals) sum += v;
    n = vals.size();
    mean_row += ",";
    std_row += ",";
    if (n == 0) continue;
    const double mean = sum / static_cast<double>(n);
    double ss = 0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    mean_row += format_number(mean);
    std_row += format_number(n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0);
  }
  out << mean_row << ",,,\n" << std_row << ",,,\n";
}

MetricsTable parse_metrics_csv(std::istream& in, const std::string& source_name) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(source_name + ": empty metrics CSV");
  const auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "row_type" || header[1] != "id")
    throw std::runtime_error(source_name + ": not a metrics CSV (bad header)");
  MetricsTable t;
  for (std::size_t c = 2; c < header.size(); ++c) t.columns[header[c]];
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw std::runtime_error(source_name + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " cells, got " +
                               std::to_string(cells.size()));
    if (cells[0] != "volume") continue;
    t.ids.push_back(cells[1]);
    for (std::size_t c = 2; c < header.size(); ++c) {
      auto& col = t.columns[header[c]];
      if (cells[c].empty()) {
        col.push_back(std::nullopt);
      } else {
        try {
          col.push_back(std::stod(cells[c]));
        } catch (const std::exception&) {
          throw std::runtime_error(source_name + ":" + std::to_string(line_no) +
                                   ": bad number in column " + header[c]);
        }
      }
    }
  }
  return t;
}

MetricsTable read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_metrics_csv(in, path.string());
}

}  // namespace mstk
