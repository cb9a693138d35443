#include "mstk/volume.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace mstk {

namespace {

void put_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}

void put_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void put_u64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void check_geometry(const Dims& dims, double spacing) {
  if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0)
    throw VolumeError("volume dims must be positive, got " + to_string(dims));
  if (!(spacing > 0.0) || !std::isfinite(spacing))
    throw VolumeError("voxel spacing must be positive and finite");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw VolumeError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw VolumeError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw VolumeError("write failed: " + path.string());
}

}  // namespace

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Pore: return "pore";
    case Phase::Ni: return "Ni";
    case Phase::YSZ: return "YSZ";
  }
  return "?";
}

std::string to_string(const Dims& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

template <VolumeKind K>
Volume<K>::Volume(Dims dims, double spacing, std::vector<std::uint8_t> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
  check_geometry(dims_, spacing_);
  if (data_.size() != dims_.count())
    throw VolumeError("payload holds " + std::to_string(data_.size()) +
                      " voxels, dims " + to_string(dims_) + " need " +
                      std::to_string(dims_.count()));
  if constexpr (K == VolumeKind::Segmented) {
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (data_[i] < 1 || data_[i] > 3)
        throw VolumeError("illegal phase label " + std::to_string(data_[i]) +
                          " at voxel " + std::to_string(i));
    }
  }
}

template <VolumeKind K>
Volume<K>::Volume(Dims dims, double spacing, std::uint8_t fill)
    : Volume(dims, spacing, std::vector<std::uint8_t>(dims.count(), fill)) {}

template class Volume<VolumeKind::Grayscale>;
template class Volume<VolumeKind::Segmented>;

std::array<std::uint8_t, kHeaderSize> encode_header(const VolumeHeader& h) {
  std::array<std::uint8_t, kHeaderSize> b{};
  std::memcpy(b.data(), "MVOL", 4);
  put_u16(b.data() + 4, h.byte_order);
  put_u16(b.data() + 6, h.version);
  b[8] = static_cast<std::uint8_t>(h.kind);
  put_u32(b.data() + 12, h.dims.nx);
  put_u32(b.data() + 16, h.dims.ny);
  put_u32(b.data() + 20, h.dims.nz);
  put_u64(b.data() + 24, std::bit_cast<std::uint64_t>(h.spacing));
  return b;
}

VolumeHeader decode_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize)
    throw VolumeError("truncated header: " + std::to_string(bytes.size()) + " of " +
                          std::to_string(kHeaderSize) + " bytes",
                      static_cast<long long>(bytes.size()));
  const std::uint8_t* p = bytes.data();
  if (std::memcmp(p, "MVOL", 4) != 0) throw VolumeError("bad magic, expected \"MVOL\"", 0);
  VolumeHeader h;
  h.byte_order = get_u16(p + 4);
  if (h.byte_order != 0xFEFF) throw VolumeError("unsupported byte order marker", 4);
  h.version = get_u16(p + 6);
  if (h.version != kFormatVersion)
    throw VolumeError("unsupported format version " + std::to_string(h.version), 6);
  if (p[8] != 0x01 && p[8] != 0x02)
    throw VolumeError("unknown volume kind byte " + std::to_string(p[8]), 8);
  for (std::size_t off : {9, 10, 11})
    if (p[off] != 0) throw VolumeError("reserved header byte is not zero", static_cast<long long>(off));
  for (std::size_t off = 32; off < kHeaderSize; ++off)
    if (p[off] != 0) throw VolumeError("reserved header byte is not zero", static_cast<long long>(off));
  h.kind = static_cast<VolumeKind>(p[8]);
  h.dims = {get_u32(p + 12), get_u32(p + 16), get_u32(p + 20)};
  for (int axis = 0; axis < 3; ++axis)
    if (h.dims[axis] == 0) throw VolumeError("zero dimension in header", 12 + 4 * axis);
  h.spacing = std::bit_cast<double>(get_u64(p + 24));
  if (!(h.spacing > 0.0) || !std::isfinite(h.spacing))
    throw VolumeError("voxel spacing must be positive and finite", 24);
  return h;
}

std::vector<std::uint8_t> serialize(const AnyVolume& v) {
  return std::visit(
      [](const auto& vol) {
        VolumeHeader h;
        h.dims = vol.dims();
        h.spacing = vol.spacing();
        h.kind = vol.kind;
        const auto header = encode_header(h);
        std::vector<std::uint8_t> out(header.begin(), header.end());
        out.insert(out.end(), vol.data().begin(), vol.data().end());
        return out;
      },
      v);
}

AnyVolume deserialize(std::span<const std::uint8_t> bytes) {
  const VolumeHeader h = decode_header(bytes);
  const std::size_t payload = bytes.size() - kHeaderSize;
  if (payload != h.dims.count())
    throw VolumeError("payload size mismatch: header dims " + to_string(h.dims) + " need " +
                          std::to_string(h.dims.count()) + " bytes, file has " +
                          std::to_string(payload),
                      static_cast<long long>(kHeaderSize + std::min(payload, h.dims.count())));
  std::vector<std::uint8_t> data(bytes.begin() + kHeaderSize, bytes.end());
  if (h.kind == VolumeKind::Grayscale) return GrayscaleVolume(h.dims, h.spacing, std::move(data));
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i] < 1 || data[i] > 3)
      throw VolumeError("illegal phase label " + std::to_string(data[i]),
                        static_cast<long long>(kHeaderSize + i));
  }
  return SegmentedVolume(h.dims, h.spacing, std::move(data));
}

AnyVolume load_volume(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return deserialize(bytes);
  } catch (const VolumeError& e) {
    throw VolumeError(path.string() + ": " + e.what(), e.offset());
  }
}

GrayscaleVolume load_grayscale(const std::filesystem::path& path) {
  auto v = load_volume(path);
  if (auto* g = std::get_if<GrayscaleVolume>(&v)) return std::move(*g);
  throw VolumeError(path.string() + ": expected a grayscale volume", 8);
}

SegmentedVolume load_segmented(const std::filesystem::path& path) {
  auto v = load_volume(path);
  if (auto* s = std::get_if<SegmentedVolume>(&v)) return std::move(*s);
  throw VolumeError(path.string() + ": expected a segmented volume", 8);
}

void save_volume(const AnyVolume& v, const std::filesystem::path& path) {
  write_file(path, serialize(v));
}

PgmImage read_pgm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::size_t pos = 0;
  auto fail = [&](const std::string& msg) -> VolumeError {
    return VolumeError(path.string() + ": " + msg, static_cast<long long>(pos));
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw fail("not a binary PGM (P5) file");
  pos = 2;
  auto next_number = [&]() -> std::uint32_t {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw fail("malformed PGM header");
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > UINT32_MAX) throw fail("PGM header value out of range");
    }
    return static_cast<std::uint32_t>(v);
  };
  PgmImage img;
  img.width = next_number();
  img.height = next_number();
  const std::uint32_t maxval = next_number();
  if (img.width == 0 || img.height == 0) throw fail("PGM has zero size");
  if (maxval != 255) throw fail("unsupported PGM maxval " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw fail("malformed PGM header");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (bytes.size() - pos != n)
    throw fail("PGM payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
               std::to_string(n));
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

void write_pgm(const PgmImage& img, const std::filesystem::path& path) {
  std::ostringstream head;
  head << "P5\n" << img.width << " " << img.height << "\n255\n";
  const std::string h = head.str();
  std::vector<std::uint8_t> bytes(h.begin(), h.end());
  bytes.insert(bytes.end(), img.pixels.begin(), img.pixels.end());
  write_file(path, bytes);
}

GrayscaleVolume import_slice_stack(std::span<const std::filesystem::path> paths,
                                   double spacing) {
  if (paths.empty()) throw VolumeError("slice stack is empty");
  std::vector<std::uint8_t> data;
  std::uint32_t w = 0, h = 0;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    PgmImage img = read_pgm(paths[k]);
    if (k == 0) {
      w = img.width;
      h = img.height;
      data.reserve(static_cast<std::size_t>(w) * h * paths.size());
    } else if (img.width != w || img.height != h) {
      throw VolumeError(paths[k].string() + ": slice is " + std::to_string(img.width) + "x" +
                        std::to_string(img.height) + ", stack is " + std::to_string(w) + "x" +
                        std::to_string(h));
    }
    data.insert(data.end(), img.pixels.begin(), img.pixels.end());
  }
  return GrayscaleVolume({w, h, static_cast<std::uint32_t>(paths.size())}, spacing,
                         std::move(data));
}

template <VolumeKind K>
Volume<K> crop(const Volume<K>& v, Index3 origin, Dims shape) {
  const Dims& d = v.dims();
  const std::uint32_t o[3] = {origin.x, origin.y, origin.z};
  for (int axis = 0; axis < 3; ++axis) {
    if (shape[axis] == 0 ||
        static_cast<std::uint64_t>(o[axis]) + shape[axis] > d[axis])
      throw VolumeError("crop window at (" + std::to_string(origin.x) + "," +
                        std::to_string(origin.y) + "," + std::to_string(origin.z) +
                        ") of shape " + to_string(shape) + " exceeds " + to_string(d));
  }
  std::vector<std::uint8_t> out;
  out.reserve(shape.count());
  const auto src = v.data();
  for (std::uint32_t z = 0; z < shape.nz; ++z)
    for (std::uint32_t y = 0; y < shape.ny; ++y) {
      const std::size_t start = v.index(origin.x, origin.y + y, origin.z + z);
      out.insert(out.end(), src.begin() + static_cast<std::ptrdiff_t>(start),
                 src.begin() + static_cast<std::ptrdiff_t>(start + shape.nx));
    }
  return Volume<K>(shape, v.spacing(), std::move(out));
}

template GrayscaleVolume crop(const GrayscaleVolume&, Index3, Dims);
template SegmentedVolume crop(const SegmentedVolume&, Index3, Dims);

UnitVolume to_unit_range(const GrayscaleVolume& g) {
  UnitVolume u{g.dims(), g.spacing(), {}};
  u.values.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    u.values[i] = static_cast<float>(g[i] / 127.5 - 1.0);
  return u;
}

GrayscaleVolume from_unit_range(const UnitVolume& u) {
  std::vector<std::uint8_t> data(u.values.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = std::round((static_cast<double>(u.values[i]) + 1.0) * 127.5);
    data[i] = static_cast<std::uint8_t>(std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 255.0));
  }
  return GrayscaleVolume(u.dims, u.spacing, std::move(data));
}

}  // namespace mstk
