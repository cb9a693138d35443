#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mstk {

/// Default isotropic voxel edge length in micrometers (65 nm).
inline constexpr double kDefaultSpacing = 0.065;

enum class VolumeKind : std::uint8_t { Grayscale = 0x01, Segmented = 0x02 };

/// Phase labels of a segmented three-phase anode volume.
enum class Phase : std::uint8_t { Pore = 1, Ni = 2, YSZ = 3 };
inline constexpr std::array<Phase, 3> kPhases = {Phase::Pore, Phase::Ni, Phase::YSZ};
inline constexpr int kPhaseCount = 3;

/// Zero-based slot of a phase in per-phase arrays.
constexpr std::size_t slot(Phase p) { return static_cast<std::size_t>(p) - 1; }
const char* phase_name(Phase p);

struct Dims {
  std::uint32_t nx = 0;
  std::uint32_t ny = 0;
  std::uint32_t nz = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * ny * nz;
  }
  bool cubic() const { return nx == ny && ny == nz; }
  std::uint32_t operator[](int axis) const {
    return axis == 0 ? nx : (axis == 1 ? ny : nz);
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

struct Index3 {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t z = 0;
  friend bool operator==(const Index3&, const Index3&) = default;
};

std::string to_string(const Dims& d);

/// Raised for malformed data. `offset()` is the byte offset of the problem in
/// the source file, or -1 when not file-related.
class VolumeError : public std::runtime_error {
 public:
  explicit VolumeError(const std::string& what, long long offset = -1)
      : std::runtime_error(what), offset_(offset) {}
  long long offset() const { return offset_; }

 private:
  long long offset_;
};

/// One byte per voxel, x-fastest. Immutable after construction.
template <VolumeKind K>
class Volume {
 public:
  static constexpr VolumeKind kind = K;

  Volume() = default;
  Volume(Dims dims, double spacing, std::vector<std::uint8_t> data);
  Volume(Dims dims, double spacing, std::uint8_t fill);

  const Dims& dims() const { return dims_; }
  double spacing() const { return spacing_; }
  std::span<const std::uint8_t> data() const { return data_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::uint32_t x, std::uint32_t y, std::uint32_t z) const {
    return (static_cast<std::size_t>(z) * dims_.ny + y) * dims_.nx + x;
  }
  std::uint8_t at(std::uint32_t x, std::uint32_t y, std::uint32_t z) const {
    return data_[index(x, y, z)];
  }
  std::uint8_t operator[](std::size_t i) const { return data_[i]; }

  /// Releases the payload, e.g. to build a modified copy.
  std::vector<std::uint8_t> take() && { return std::move(data_); }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  Dims dims_{};
  double spacing_ = kDefaultSpacing;
  std::vector<std::uint8_t> data_;
};

using GrayscaleVolume = Volume<VolumeKind::Grayscale>;
/// Labels restricted to {1=pore, 2=Ni, 3=YSZ}.
using SegmentedVolume = Volume<VolumeKind::Segmented>;
using AnyVolume = std::variant<GrayscaleVolume, SegmentedVolume>;

// ---------------------------------------------------------------------------
// .mvol container
//
//   offset  size  field
//   0       4     magic "MVOL"
//   4       2     byte order marker 0xFEFF (u16 little-endian, bytes FF FE)
//   6       2     format version (u16 LE), currently 1
//   8       1     kind: 0x01 grayscale, 0x02 segmented
//   9       3     reserved, zero
//   12      12    nx, ny, nz (u32 LE)
//   24      8     spacing in micrometers (IEEE-754 binary64 LE)
//   32      32    reserved, zero
//   64      ...   payload, nx*ny*nz bytes, x fastest
// ---------------------------------------------------------------------------
inline constexpr std::size_t kHeaderSize = 64;
inline constexpr std::uint16_t kFormatVersion = 1;

struct VolumeHeader {
  Dims dims;
  double spacing = kDefaultSpacing;
  VolumeKind kind = VolumeKind::Grayscale;
  std::uint16_t byte_order = 0xFEFF;
  std::uint16_t version = kFormatVersion;
};

std::array<std::uint8_t, kHeaderSize> encode_header(const VolumeHeader& h);
VolumeHeader decode_header(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize(const AnyVolume& v);
AnyVolume deserialize(std::span<const std::uint8_t> bytes);

AnyVolume load_volume(const std::filesystem::path& path);
GrayscaleVolume load_grayscale(const std::filesystem::path& path);
SegmentedVolume load_segmented(const std::filesystem::path& path);
void save_volume(const AnyVolume& v, const std::filesystem::path& path);

// Binary PGM (P5, maxval 255) slices.
struct PgmImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, x fastest
};
PgmImage read_pgm(const std::filesystem::path& path);
void write_pgm(const PgmImage& img, const std::filesystem::path& path);

/// Slice k of the stack becomes the z = k plane.
GrayscaleVolume import_slice_stack(std::span<const std::filesystem::path> paths,
                                   double spacing = kDefaultSpacing);

template <VolumeKind K>
Volume<K> crop(const Volume<K>& v, Index3 origin, Dims shape);

struct UnitVolume {
  Dims dims;
  double spacing = kDefaultSpacing;
  std::vector<float> values;
};

/// intensity / 127.5 - 1, so 0 -> -1 and 255 -> +1.
UnitVolume to_unit_range(const GrayscaleVolume& g);
/// Inverse of to_unit_range with rounding and clamping to [0, 255].
GrayscaleVolume from_unit_range(const UnitVolume& u);

}  // namespace mstk
