#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "mrieval/volume.hpp"

namespace mrieval {

using Bytes = std::vector<std::uint8_t>;
using ParsedImage = std::variant<Volume, LabelMap>;

namespace nifti {
inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::size_t kDataOffset = 352;  // header + empty extension flag
inline constexpr std::size_t kMagicOffset = 344;
inline constexpr std::size_t kDimOffset = 40;
inline constexpr std::size_t kDatatypeOffset = 70;
inline constexpr std::size_t kPixdimOffset = 76;
inline constexpr std::size_t kVoxOffsetOffset = 108;

enum Datatype : std::int16_t {
  kUInt8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kUInt16 = 512,
};
}  // namespace nifti

/// Decodes a single-file NIfTI-1 stream ("n+1"), gzip-compressed or not.
/// Real-valued datatypes give a Volume; integer datatypes give a LabelMap with
/// an empty table, unless the header carries a non-identity scl_slope/scl_inter,
/// in which case the scaled values are returned as a Volume.
/// Throws NiftiError carrying the byte offset of the failing field.
ParsedImage parse_nifti(std::span<const std::uint8_t> bytes);

/// Header/payload pair ("ni1" magic, .hdr + .img).
ParsedImage parse_nifti_pair(std::span<const std::uint8_t> header, std::span<const std::uint8_t> payload);

/// float32 payload, sform from the affine.
Bytes write_nifti(const Volume& v, bool compress);
/// int16 payload; throws Error when a code falls outside the int16 range.
Bytes write_nifti(const LabelMap& m, bool compress);

Bytes gzip_compress(std::span<const std::uint8_t> raw);
Bytes gzip_decompress(std::span<const std::uint8_t> gz);
bool is_gzip(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Path helpers; compression follows a ".gz" suffix.
ParsedImage read_nifti(const std::filesystem::path& path);
Volume read_volume(const std::filesystem::path& path);
LabelMap read_label_map(const std::filesystem::path& path, const RegionTable& table);
void write_nifti_file(const std::filesystem::path& path, const Volume& v);
void write_nifti_file(const std::filesystem::path& path, const LabelMap& m);

/// True for *.nii and *.nii.gz.
bool has_nifti_suffix(const std::filesystem::path& path);
/// File name with .nii / .nii.gz stripped.
std::string nifti_stem(const std::filesystem::path& path);

}  // namespace mrieval
