#include "mrieval/embedding.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>

#include "mrieval/csv.hpp"
#include "mrieval/error.hpp"
#include "mrieval/nifti.hpp"

namespace mrieval {
namespace {

constexpr char kMagic[4] = {'V', 'E', 'M', 'B'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "binary embedding I/O assumes a little-endian host");

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t v;
  std::memcpy(&v, b.data() + off, 4);
  return v;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + 4);
}

}  // namespace

EmbeddingSet::EmbeddingSet(Eigen::MatrixXd vectors, std::string source_tag, std::vector<std::string> ids)
    : vectors_(std::move(vectors)), tag_(std::move(source_tag)), ids_(std::move(ids)) {
  if (vectors_.rows() == 0 || vectors_.cols() == 0) throw Error("embedding set is empty");
  if (!vectors_.allFinite()) throw Error("embedding set '" + tag_ + "' has non-finite entries");
  if (!ids_.empty() && ids_.size() != rows()) throw Error("embedding ids do not match the row count");
}

EmbeddingSet parse_embeddings_csv(std::string_view text, std::string source_tag) {
  const CsvTable table = parse_csv(text);
  if (table.header.size() < 2 || table.header.front() != "id")
    throw Error("embedding CSV header must start with 'id' followed by feature columns");
  const std::size_t dim = table.header.size() - 1;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(dim));
  std::vector<std::string> ids;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != dim + 1)
      throw Error("embedding CSV row " + std::to_string(r + 2) + " has " + std::to_string(row.size()) +
                  " fields, expected " + std::to_string(dim + 1));
    ids.push_back(row[0]);
    for (std::size_t c = 0; c < dim; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = parse_real(row[c + 1], "embedding value");
  }
  return EmbeddingSet(std::move(m), std::move(source_tag), std::move(ids));
}

std::string embeddings_to_csv(const EmbeddingSet& e) {
  std::vector<std::string> header{"id"};
  for (std::size_t c = 0; c < e.dim(); ++c) header.push_back("f" + std::to_string(c));
  CsvTable t{header, {}};
  for (std::size_t r = 0; r < e.rows(); ++r) {
    std::vector<std::string> row{e.ids().empty() ? std::to_string(r) : e.ids()[r]};
    for (std::size_t c = 0; c < e.dim(); ++c)
      row.push_back(format_real(e.vectors()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
    t.rows.push_back(std::move(row));
  }
  return write_csv(t);
}

EmbeddingSet parse_embeddings_binary(std::span<const std::uint8_t> bytes, std::string source_tag) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error("not a VEMB embedding file");
  const auto version = get_u32(bytes, 4);
  if (version != kVersion) throw Error("unsupported VEMB version " + std::to_string(version));
  const std::size_t n = get_u32(bytes, 8), d = get_u32(bytes, 12);
  if (bytes.size() != 16 + 4 * n * d)
    throw Error("VEMB payload size " + std::to_string(bytes.size() - 16) + " does not match N*D*4 = " +
                std::to_string(4 * n * d));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      float v;
      std::memcpy(&v, bytes.data() + 16 + 4 * (r * d + c), 4);
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  return EmbeddingSet(std::move(m), std::move(source_tag));
}

std::vector<std::uint8_t> embeddings_to_binary(const EmbeddingSet& e) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(e.rows()));
  put_u32(out, static_cast<std::uint32_t>(e.dim()));
  for (std::size_t r = 0; r < e.rows(); ++r)
    for (std::size_t c = 0; c < e.dim(); ++c) {
      const auto v = static_cast<float>(e.vectors()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
      const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
      out.insert(out.end(), p, p + 4);
    }
  return out;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path, std::string source_tag) {
  const Bytes bytes = read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0)
    return parse_embeddings_binary(bytes, std::move(source_tag));
  return parse_embeddings_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                              std::move(source_tag));
}

}  // namespace mrieval
