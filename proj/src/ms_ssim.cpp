#include "mrieval/ms_ssim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "mrieval/detail/numeric.hpp"
#include "mrieval/detail/parallel.hpp"
#include "mrieval/error.hpp"

namespace mrieval {
namespace {

/// Filters one axis in valid mode. Inner loops run along contiguous x.
std::vector<double> filter_axis(std::span<const double> in, const Shape3& s, const std::vector<double>& w,
                                std::size_t axis, Shape3& out_shape) {
  const std::size_t taps = w.size();
  out_shape = s;
  if (axis == 0) out_shape.nx = s.nx - taps + 1;
  if (axis == 1) out_shape.ny = s.ny - taps + 1;
  if (axis == 2) out_shape.nz = s.nz - taps + 1;
  const Shape3& o = out_shape;
  std::vector<double> out(o.voxels(), 0.0);

  if (axis == 0) {
    for (std::size_t z = 0; z < o.nz; ++z)
      for (std::size_t y = 0; y < o.ny; ++y) {
        const double* src = in.data() + s.nx * (y + s.ny * z);
        double* dst = out.data() + o.nx * (y + o.ny * z);
        for (std::size_t x = 0; x < o.nx; ++x) {
          double acc = 0.0;
          for (std::size_t k = 0; k < taps; ++k) acc += w[k] * src[x + k];
          dst[x] = acc;
        }
      }
  } else if (axis == 1) {
    for (std::size_t z = 0; z < o.nz; ++z)
      for (std::size_t y = 0; y < o.ny; ++y) {
        double* dst = out.data() + o.nx * (y + o.ny * z);
        for (std::size_t k = 0; k < taps; ++k) {
          const double* src = in.data() + s.nx * ((y + k) + s.ny * z);
          const double wk = w[k];
          for (std::size_t x = 0; x < o.nx; ++x) dst[x] += wk * src[x];
        }
      }
  } else {
    const std::size_t plane = s.nx * s.ny;
    for (std::size_t z = 0; z < o.nz; ++z) {
      double* dst = out.data() + plane * z;
      for (std::size_t k = 0; k < taps; ++k) {
        const double* src = in.data() + plane * (z + k);
        const double wk = w[k];
        for (std::size_t i = 0; i < plane; ++i) dst[i] += wk * src[i];
      }
    }
  }
  return out;
}

struct ScaleTerms {
  double cs = 0.0;    // mean contrast-structure
  double ssim = 0.0;  // mean luminance * contrast-structure
};

ScaleTerms scale_terms(std::span<const double> a, std::span<const double> b, const Shape3& shape,
                       const std::array<int, 3>& win, const MsSsimSpec& spec) {
  const std::array<std::vector<double>, 3> kernels{gaussian_window(win[0], spec.sigma),
                                                   gaussian_window(win[1], spec.sigma),
                                                   gaussian_window(win[2], spec.sigma)};
  const std::size_t n = shape.voxels();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  Shape3 o;
  const auto mu_a = filter_valid(a, shape, kernels, o);
  const auto mu_b = filter_valid(b, shape, kernels, o);
  const auto e_aa = filter_valid(aa, shape, kernels, o);
  const auto e_bb = filter_valid(bb, shape, kernels, o);
  const auto e_ab = filter_valid(ab, shape, kernels, o);

  const double c1 = (spec.k1 * spec.dynamic_range) * (spec.k1 * spec.dynamic_range);
  const double c2 = (spec.k2 * spec.dynamic_range) * (spec.k2 * spec.dynamic_range);
  detail::CompensatedSum cs_sum, ssim_sum;
  for (std::size_t i = 0; i < o.voxels(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    const double cs = (2.0 * cov + c2) / (va + vb + c2);
    const double lum = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    cs_sum.add(cs);
    ssim_sum.add(lum * cs);
  }
  const double count = static_cast<double>(o.voxels());
  return {cs_sum.value() / count, ssim_sum.value() / count};
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  // Rejection sampling keeps the draw unbiased and identical across standard
  // libraries (std::uniform_int_distribution is implementation-defined).
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % bound;
}

}  // namespace

void MsSsimSpec::validate() const {
  if (scales < 1) throw Error("MS-SSIM needs at least one scale");
  if (weights.size() != static_cast<std::size_t>(scales))
    throw Error("MS-SSIM weights length " + std::to_string(weights.size()) + " != scales " + std::to_string(scales));
  for (double w : weights)
    if (!(w > 0.0)) throw Error("MS-SSIM weights must be positive");
  // The standard five weights sum to 1.0001.
  if (std::abs(std::accumulate(weights.begin(), weights.end(), 0.0) - 1.0) > 1e-3)
    throw Error("MS-SSIM weights must sum to 1");
  if (window < 1 || window % 2 == 0) throw Error("MS-SSIM window must be a positive odd integer");
  if (!(sigma > 0.0)) throw Error("MS-SSIM sigma must be positive");
  if (!(k1 > 0.0) || !(k2 > 0.0)) throw Error("MS-SSIM k1/k2 must be positive");
  if (!(dynamic_range > 0.0)) throw Error("MS-SSIM dynamic_range must be positive");
}

std::vector<double> gaussian_window(int size, double sigma) {
  if (size < 1 || size % 2 == 0) throw Error("window size must be odd");
  std::vector<double> w(static_cast<std::size_t>(size));
  const int half = size / 2;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - half;
    w[static_cast<std::size_t>(i)] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    total += w[static_cast<std::size_t>(i)];
  }
  for (auto& v : w) v /= total;
  return w;
}

std::vector<double> filter_valid(std::span<const double> in, const Shape3& shape,
                                 const std::array<std::vector<double>, 3>& kernels, Shape3& out_shape) {
  for (std::size_t a = 0; a < 3; ++a)
    if (kernels[a].size() > shape[a]) throw Error("filter kernel longer than axis " + std::to_string(a));
  Shape3 s1, s2;
  const auto fx = filter_axis(in, shape, kernels[0], 0, s1);
  const auto fy = filter_axis(fx, s1, kernels[1], 1, s2);
  return filter_axis(fy, s2, kernels[2], 2, out_shape);
}

std::vector<double> downsample2(std::span<const double> in, const Shape3& s, Shape3& o) {
  o = {s.nx / 2, s.ny / 2, s.nz / 2};
  std::vector<double> out(o.voxels());
  for (std::size_t z = 0; z < o.nz; ++z)
    for (std::size_t y = 0; y < o.ny; ++y)
      for (std::size_t x = 0; x < o.nx; ++x) {
        double acc = 0.0;
        for (std::size_t dz = 0; dz < 2; ++dz)
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx)
              acc += in[(2 * x + dx) + s.nx * ((2 * y + dy) + s.ny * (2 * z + dz))];
        out[x + o.nx * (y + o.ny * z)] = acc / 8.0;
      }
  return out;
}

std::vector<std::array<int, 3>> pyramid_windows(const Shape3& shape, const MsSsimSpec& spec) {
  spec.validate();
  std::vector<std::array<int, 3>> out;
  Shape3 s = shape;
  for (int level = 0; level < spec.scales; ++level) {
    std::array<int, 3> win{};
    for (std::size_t a = 0; a < 3; ++a) {
      const auto axis = static_cast<int>(s[a]);
      if (axis >= spec.window) {
        win[a] = spec.window;
      } else if (spec.adapt_window && axis >= 3) {
        win[a] = axis % 2 == 1 ? axis : axis - 1;
      } else {
        throw Error("volume " + to_string(shape) + " too small for a " + std::to_string(spec.scales) +
                    "-scale pyramid with window " + std::to_string(spec.window) + " (axis " + std::to_string(a) +
                    " is " + std::to_string(axis) + " at scale " + std::to_string(level + 1) + ")");
      }
    }
    out.push_back(win);
    s = {s.nx / 2, s.ny / 2, s.nz / 2};
  }
  return out;
}

double ms_ssim(const Volume& a, const Volume& b, const MsSsimSpec& spec) {
  if (a.shape() != b.shape())
    throw Error("MS-SSIM: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  const auto windows = pyramid_windows(a.shape(), spec);

  std::vector<double> da(a.data().begin(), a.data().end());
  std::vector<double> db(b.data().begin(), b.data().end());
  Shape3 shape = a.shape();
  double result = 1.0;
  for (int level = 0; level < spec.scales; ++level) {
    const auto terms = scale_terms(da, db, shape, windows[static_cast<std::size_t>(level)], spec);
    const bool coarsest = level == spec.scales - 1;
    const double term = coarsest ? terms.ssim : terms.cs;
    if (term < 0.0)
      throw Error("negative MS-SSIM term " + std::to_string(term) + " at scale " + std::to_string(level + 1));
    result *= std::pow(term, spec.weights[static_cast<std::size_t>(level)]);
    if (!coarsest) {
      Shape3 next;
      da = downsample2(da, shape, next);
      db = downsample2(db, shape, next);
      shape = next;
    }
  }
  return result;
}

std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (n < 2) throw Error("pair sampling needs at least 2 items");
  const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  if (count < 1) throw Error("pair count must be at least 1");
  if (count > total)
    throw Error("requested " + std::to_string(count) + " pairs but only " + std::to_string(total) + " exist");

  // Floyd's algorithm: a uniform `count`-subset of [0, total).
  std::mt19937_64 rng(seed);
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(count * 2);
  for (std::uint64_t j = total - count; j < total; ++j) {
    const std::uint64_t t = uniform_below(rng, j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> flat(chosen.begin(), chosen.end());
  std::sort(flat.begin(), flat.end());

  // Flat index enumerates (0,1),(0,2),...,(0,n-1),(1,2),...
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(count);
  std::size_t row = 0;
  std::uint64_t row_start = 0;
  for (const auto f : flat) {
    while (f >= row_start + (n - 1 - row)) {
      row_start += n - 1 - row;
      ++row;
    }
    pairs.emplace_back(row, row + 1 + static_cast<std::size_t>(f - row_start));
  }
  return pairs;
}

PairwiseMsSsim pairwise_ms_ssim(std::span<const Volume> set, std::size_t num_pairs, std::uint64_t seed,
                                const MsSsimSpec& spec, unsigned threads) {
  if (set.size() < 2) throw Error("pairwise MS-SSIM needs at least 2 volumes");
  PairwiseMsSsim r;
  r.pairs = sample_pairs(set.size(), num_pairs, seed);
  r.scores.resize(r.pairs.size());
  detail::parallel_for(r.pairs.size(), threads, [&](std::size_t i) {
    r.scores[i] = ms_ssim(set[r.pairs[i].first], set[r.pairs[i].second], spec);
  });
  const double k = static_cast<double>(r.scores.size());
  r.mean = detail::compensated_sum(r.scores) / k;
  if (r.scores.size() > 1) {
    detail::CompensatedSum ss;
    for (double s : r.scores) ss.add((s - r.mean) * (s - r.mean));
    r.stddev = std::sqrt(ss.value() / (k - 1.0));
  }
  return r;
}

}  // namespace mrieval
