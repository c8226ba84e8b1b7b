#include "mrieval/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "mrieval/error.hpp"

namespace mrieval {
namespace {

using namespace nifti;

template <class T>
T byteswap(T v) {
  auto raw = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
  std::reverse(raw.begin(), raw.end());
  return std::bit_cast<T>(raw);
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <class T>
  T get(std::size_t offset) const {
    if (offset + sizeof(T) > bytes_.size()) throw NiftiError("truncated header", bytes_.size());
    T v;
    std::memcpy(&v, bytes_.data() + offset, sizeof(T));
    return swap_ ? byteswap(v) : v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swap_;
};

class Writer {
 public:
  explicit Writer(Bytes& out) : out_(out) {}
  template <class T>
  void put(std::size_t offset, T v) {
    std::memcpy(out_.data() + offset, &v, sizeof(T));
  }
  void put_text(std::size_t offset, std::string_view s, std::size_t capacity) {
    std::memcpy(out_.data() + offset, s.data(), std::min(s.size(), capacity - 1));
  }

 private:
  Bytes& out_;
};

std::size_t datatype_bytes(std::int16_t code) {
  switch (code) {
    case kUInt8: return 1;
    case kInt16: return 2;
    case kUInt16: return 2;
    case kInt32: return 4;
    case kFloat32: return 4;
    case kFloat64: return 8;
    default: return 0;
  }
}

bool is_integer_type(std::int16_t code) { return code == kUInt8 || code == kInt16 || code == kUInt16 || code == kInt32; }

template <class T>
double sample(const std::uint8_t* p, bool swap) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if (swap) v = byteswap(v);
  return static_cast<double>(v);
}

double read_sample(std::int16_t code, const std::uint8_t* p, bool swap) {
  switch (code) {
    case kUInt8: return sample<std::uint8_t>(p, false);
    case kInt16: return sample<std::int16_t>(p, swap);
    case kUInt16: return sample<std::uint16_t>(p, swap);
    case kInt32: return sample<std::int32_t>(p, swap);
    case kFloat32: return sample<float>(p, swap);
    case kFloat64: return sample<double>(p, swap);
    default: return 0.0;
  }
}

Affine quaternion_affine(const Reader& r, const Spacing& spacing, float qfac_raw) {
  const double b = r.get<float>(256), c = r.get<float>(260), d = r.get<float>(264);
  const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
  const double qfac = qfac_raw < 0.0f ? -1.0 : 1.0;
  Eigen::Matrix3d rot;
  rot << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),  //
      2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),      //
      2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c;
  Affine m = Affine::Identity();
  m.block<3, 1>(0, 0) = rot.col(0) * spacing[0];
  m.block<3, 1>(0, 1) = rot.col(1) * spacing[1];
  m.block<3, 1>(0, 2) = rot.col(2) * spacing[2] * qfac;
  m(0, 3) = r.get<float>(268);
  m(1, 3) = r.get<float>(272);
  m(2, 3) = r.get<float>(276);
  return m;
}

struct Header {
  bool swap = false;
  bool paired = false;
  Shape3 shape;
  Spacing spacing{};
  std::int16_t datatype = 0;
  std::size_t vox_offset = 0;
  double slope = 0.0, inter = 0.0;
  Affine affine = Affine::Identity();
  std::string description;
};

Header parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw NiftiError("truncated header", bytes.size());

  Header h;
  std::int32_t sizeof_hdr;
  std::memcpy(&sizeof_hdr, bytes.data(), 4);
  if (sizeof_hdr != static_cast<std::int32_t>(kHeaderSize)) {
    if (byteswap(sizeof_hdr) != static_cast<std::int32_t>(kHeaderSize))
      throw NiftiError("bad sizeof_hdr " + std::to_string(sizeof_hdr), 0);
    h.swap = true;
  }
  const Reader r(bytes, h.swap);

  const auto* magic = bytes.data() + kMagicOffset;
  if (std::memcmp(magic, "n+1\0", 4) == 0) {
    h.paired = false;
  } else if (std::memcmp(magic, "ni1\0", 4) == 0) {
    h.paired = true;
  } else {
    throw NiftiError("bad magic", kMagicOffset);
  }

  const auto ndim = r.get<std::int16_t>(kDimOffset);
  if (ndim != 3) throw NiftiError("dim[0] is " + std::to_string(ndim) + ", expected 3", kDimOffset);
  std::array<std::size_t, 3> dims{};
  for (std::size_t a = 0; a < 3; ++a) {
    const auto d = r.get<std::int16_t>(kDimOffset + 2 * (a + 1));
    if (d <= 0) throw NiftiError("non-positive dim[" + std::to_string(a + 1) + "]", kDimOffset + 2 * (a + 1));
    dims[a] = static_cast<std::size_t>(d);
  }
  h.shape = {dims[0], dims[1], dims[2]};

  h.datatype = r.get<std::int16_t>(kDatatypeOffset);
  if (datatype_bytes(h.datatype) == 0)
    throw NiftiError("unsupported datatype " + std::to_string(h.datatype), kDatatypeOffset);

  for (std::size_t a = 0; a < 3; ++a) {
    const std::size_t off = kPixdimOffset + 4 * (a + 1);
    const double p = std::abs(static_cast<double>(r.get<float>(off)));
    if (!(p > 0.0) || !std::isfinite(p)) throw NiftiError("non-positive pixdim[" + std::to_string(a + 1) + "]", off);
    h.spacing[a] = p;
  }

  const float vox_offset = r.get<float>(kVoxOffsetOffset);
  if (!h.paired) {
    if (!(vox_offset >= static_cast<float>(kHeaderSize)) || !std::isfinite(vox_offset))
      throw NiftiError("vox_offset " + std::to_string(vox_offset) + " inside header", kVoxOffsetOffset);
    h.vox_offset = static_cast<std::size_t>(vox_offset);
  } else {
    h.vox_offset = std::isfinite(vox_offset) && vox_offset > 0.0f ? static_cast<std::size_t>(vox_offset) : 0;
  }

  h.slope = r.get<float>(112);
  h.inter = r.get<float>(116);
  if (!std::isfinite(h.slope)) h.slope = 0.0;
  if (!std::isfinite(h.inter)) h.inter = 0.0;

  const auto qform_code = r.get<std::int16_t>(252);
  const auto sform_code = r.get<std::int16_t>(254);
  if (sform_code > 0) {
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 4; ++col)
        h.affine(row, col) = r.get<float>(280 + 16 * static_cast<std::size_t>(row) + 4 * static_cast<std::size_t>(col));
  } else if (qform_code > 0) {
    h.affine = quaternion_affine(r, h.spacing, r.get<float>(kPixdimOffset));
  } else {
    h.affine = spacing_affine(h.spacing);
  }

  const char* descrip = reinterpret_cast<const char*>(bytes.data() + 148);
  h.description.assign(descrip, strnlen(descrip, 80));
  return h;
}

ParsedImage decode(const Header& h, std::span<const std::uint8_t> payload, std::size_t payload_base) {
  const std::size_t width = datatype_bytes(h.datatype);
  const std::size_t n = h.shape.voxels();
  const std::size_t need = n * width;
  if (payload.size() < need)
    throw NiftiError("truncated payload: need " + std::to_string(need) + " bytes, have " +
                         std::to_string(payload.size()),
                     payload_base + payload.size());

  const bool scaled = h.slope != 0.0 && (h.slope != 1.0 || h.inter != 0.0);
  const std::uint8_t* p = payload.data();

  if (is_integer_type(h.datatype) && !scaled) {
    std::vector<std::int32_t> codes(n);
    for (std::size_t i = 0; i < n; ++i) codes[i] = static_cast<std::int32_t>(read_sample(h.datatype, p + i * width, h.swap));
    return LabelMap(VoxelGrid<std::int32_t>(h.shape, h.spacing, std::move(codes), h.affine, h.description));
  }

  std::vector<float> data(n);
  if (h.datatype == kFloat32 && !scaled && !h.swap) {
    std::memcpy(data.data(), p, need);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double v = read_sample(h.datatype, p + i * width, h.swap);
      if (scaled) v = v * h.slope + h.inter;
      data[i] = static_cast<float>(v);
    }
  }
  return Volume(h.shape, h.spacing, std::move(data), h.affine, h.description);
}

template <class T>
Bytes encode(const VoxelGrid<T>& g, std::int16_t datatype, std::int16_t bitpix, const std::vector<std::uint8_t>& payload,
             bool compress) {
  Bytes out(kDataOffset, 0);
  Writer w(out);
  w.put<std::int32_t>(0, static_cast<std::int32_t>(kHeaderSize));
  w.put<char>(38, 'r');
  const std::array<std::int16_t, 8> dim{3,
                                        static_cast<std::int16_t>(g.shape().nx),
                                        static_cast<std::int16_t>(g.shape().ny),
                                        static_cast<std::int16_t>(g.shape().nz),
                                        1, 1, 1, 1};
  for (std::size_t i = 0; i < 8; ++i) w.put<std::int16_t>(kDimOffset + 2 * i, dim[i]);
  w.put<std::int16_t>(kDatatypeOffset, datatype);
  w.put<std::int16_t>(72, bitpix);
  w.put<float>(kPixdimOffset, 1.0f);
  for (std::size_t a = 0; a < 3; ++a) w.put<float>(kPixdimOffset + 4 * (a + 1), static_cast<float>(g.spacing()[a]));
  w.put<float>(kVoxOffsetOffset, static_cast<float>(kDataOffset));
  w.put<float>(112, 1.0f);
  w.put<float>(116, 0.0f);
  w.put<std::uint8_t>(123, 2 | 8);  // mm, s
  w.put_text(148, g.description(), 80);
  w.put<std::int16_t>(252, 0);
  w.put<std::int16_t>(254, 1);
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 4; ++col)
      w.put<float>(280 + 16 * static_cast<std::size_t>(row) + 4 * static_cast<std::size_t>(col),
                   static_cast<float>(g.affine()(row, col)));
  std::memcpy(out.data() + kMagicOffset, "n+1\0", 4);
  out.insert(out.end(), payload.begin(), payload.end());
  return compress ? gzip_compress(out) : out;
}

template <class T>
void check_writable(const VoxelGrid<T>& g) {
  if (g.size() == 0) throw Error("cannot write a zero-sized volume");
  for (std::size_t a = 0; a < 3; ++a)
    if (g.shape()[a] > static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max()))
      throw Error("axis " + std::to_string(a) + " too long for NIfTI-1");
}

}  // namespace

ParsedImage parse_nifti(std::span<const std::uint8_t> bytes) {
  if (is_gzip(bytes)) {
    const Bytes raw = gzip_decompress(bytes);
    return parse_nifti(raw);
  }
  const Header h = parse_header(bytes);
  if (h.paired) throw NiftiError("detached header (ni1) needs a separate image payload", kMagicOffset);
  const std::size_t start = std::min(h.vox_offset, bytes.size());
  return decode(h, bytes.subspan(start), start);
}

ParsedImage parse_nifti_pair(std::span<const std::uint8_t> header, std::span<const std::uint8_t> payload) {
  Bytes hdr_raw, img_raw;
  if (is_gzip(header)) {
    hdr_raw = gzip_decompress(header);
    header = hdr_raw;
  }
  if (is_gzip(payload)) {
    img_raw = gzip_decompress(payload);
    payload = img_raw;
  }
  const Header h = parse_header(header);
  const std::size_t start = std::min(h.vox_offset, payload.size());
  return decode(h, payload.subspan(start), start);
}

Bytes write_nifti(const Volume& v, bool compress) {
  check_writable(v);
  std::vector<std::uint8_t> payload(v.size() * sizeof(float));
  std::memcpy(payload.data(), v.data().data(), payload.size());
  return encode(v, kFloat32, 32, payload, compress);
}

Bytes write_nifti(const LabelMap& m, bool compress) {
  check_writable(m);
  std::vector<std::uint8_t> payload(m.size() * sizeof(std::int16_t));
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto code = m.data()[i];
    if (code < std::numeric_limits<std::int16_t>::min() || code > std::numeric_limits<std::int16_t>::max())
      throw Error("label code " + std::to_string(code) + " exceeds the int16 range");
    const auto c16 = static_cast<std::int16_t>(code);
    std::memcpy(payload.data() + 2 * i, &c16, 2);
  }
  return encode(m, kInt16, 16, payload, compress);
}

bool is_gzip(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

Bytes gzip_compress(std::span<const std::uint8_t> raw) {
  z_stream zs{};
  if (deflateInit2(&zs, 6, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) throw Error("deflateInit2 failed");
  Bytes out(deflateBound(&zs, static_cast<uLong>(raw.size())) + 32);
  zs.next_in = const_cast<Bytef*>(raw.data());
  zs.avail_in = static_cast<uInt>(raw.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error("gzip compression failed");
  out.resize(zs.total_out);
  return out;
}

Bytes gzip_decompress(std::span<const std::uint8_t> gz) {
  Bytes out;
  std::size_t consumed = 0;
  std::array<std::uint8_t, 1 << 16> chunk{};
  // Concatenated members are decoded back to back.
  while (consumed < gz.size()) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK) throw Error("inflateInit2 failed");
    zs.next_in = const_cast<Bytef*>(gz.data() + consumed);
    zs.avail_in = static_cast<uInt>(gz.size() - consumed);
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
      zs.next_out = chunk.data();
      zs.avail_out = static_cast<uInt>(chunk.size());
      rc = inflate(&zs, Z_NO_FLUSH);
      if (rc != Z_OK && rc != Z_STREAM_END) {
        const auto at = consumed + zs.total_in;
        inflateEnd(&zs);
        if (rc == Z_BUF_ERROR) throw NiftiError("truncated gzip stream", at);
        throw NiftiError("corrupt gzip stream", at);
      }
      out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    }
    consumed += zs.total_in;
    inflateEnd(&zs);
    if (!is_gzip(gz.subspan(consumed))) break;
  }
  return out;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

ParsedImage read_nifti(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  try {
    return parse_nifti(bytes);
  } catch (const NiftiError& e) {
    throw NiftiError(path.string() + ": " + std::string(e.what()).substr(0, std::string(e.what()).rfind(" at offset")),
                     e.offset());
  }
}

Volume read_volume(const std::filesystem::path& path) {
  auto img = read_nifti(path);
  if (auto* v = std::get_if<Volume>(&img)) return std::move(*v);
  const auto& m = std::get<LabelMap>(img);
  std::vector<float> data(m.size());
  std::transform(m.data().begin(), m.data().end(), data.begin(), [](std::int32_t c) { return static_cast<float>(c); });
  return Volume(m.shape(), m.spacing(), std::move(data), m.affine(), m.description());
}

LabelMap read_label_map(const std::filesystem::path& path, const RegionTable& table) {
  auto img = read_nifti(path);
  if (auto* m = std::get_if<LabelMap>(&img)) return m->with_table(table);
  throw Error(path.string() + ": label maps need an integer datatype");
}

void write_nifti_file(const std::filesystem::path& path, const Volume& v) {
  write_file(path, write_nifti(v, path.extension() == ".gz"));
}

void write_nifti_file(const std::filesystem::path& path, const LabelMap& m) {
  write_file(path, write_nifti(m, path.extension() == ".gz"));
}

bool has_nifti_suffix(const std::filesystem::path& path) {
  const auto name = path.filename().string();
  return name.ends_with(".nii") || name.ends_with(".nii.gz");
}

std::string nifti_stem(const std::filesystem::path& path) {
  auto name = path.filename().string();
  if (name.ends_with(".gz")) name.resize(name.size() - 3);
  if (name.ends_with(".nii")) name.resize(name.size() - 4);
  return name;
}

}  // namespace mrieval
