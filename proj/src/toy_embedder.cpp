#include "mrieval/toy_embedder.hpp"

#include <cmath>

#include "mrieval/detail/parallel.hpp"
#include "mrieval/error.hpp"

namespace mrieval {
namespace {

constexpr std::size_t kBlock = 4;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Eigen::VectorXd toy_embed(const Volume& v, std::size_t dim, std::uint64_t seed) {
  if (dim < 1) throw Error("embedding dimension must be at least 1");
  const Shape3& s = v.shape();
  const Shape3 p{s.nx / kBlock, s.ny / kBlock, s.nz / kBlock};
  if (p.voxels() == 0) throw Error("volume " + to_string(s) + " is smaller than the 4x4x4 pooling block");

  std::vector<double> pooled(p.voxels(), 0.0);
  for (std::size_t z = 0; z < p.nz * kBlock; ++z)
    for (std::size_t y = 0; y < p.ny * kBlock; ++y)
      for (std::size_t x = 0; x < p.nx * kBlock; ++x)
        pooled[x / kBlock + p.nx * (y / kBlock + p.ny * (z / kBlock))] += v.at(x, y, z);
  for (auto& val : pooled) val /= static_cast<double>(kBlock * kBlock * kBlock);

  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  const std::uint64_t base = splitmix64(seed);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < dim; ++r) {
    double acc = 0.0;
    // One 64-bit hash yields signs for 64 consecutive columns.
    std::uint64_t bits = 0;
    for (std::size_t c = 0; c < pooled.size(); ++c) {
      if (c % 64 == 0) bits = splitmix64(base ^ splitmix64(r * 0x100000001b3ULL + c / 64));
      acc += ((bits >> (c % 64)) & 1U) ? pooled[c] : -pooled[c];
    }
    out[static_cast<Eigen::Index>(r)] = acc * scale;
  }
  return out;
}

EmbeddingSet toy_embed_set(std::span<const Volume> volumes, std::size_t dim, std::uint64_t seed,
                           std::string source_tag, unsigned threads) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(volumes.size()), static_cast<Eigen::Index>(dim));
  std::vector<Eigen::VectorXd> rows(volumes.size());
  detail::parallel_for(volumes.size(), threads, [&](std::size_t i) { rows[i] = toy_embed(volumes[i], dim, seed); });
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return EmbeddingSet(std::move(m), std::move(source_tag));
}

}  // namespace mrieval
