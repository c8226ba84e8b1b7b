#include "mrieval/mmd.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>

#include "mrieval/csv.hpp"
#include "mrieval/detail/numeric.hpp"
#include "mrieval/detail/parallel.hpp"
#include "mrieval/error.hpp"

namespace mrieval {
namespace {

using detail::CompensatedSum;

/// Pooled rows: the first m belong to x, the rest to y.
template <class T>
struct Pool {
  std::vector<std::span<const T>> rows;
  std::size_t m = 0;
  std::size_t n() const { return rows.size() - m; }
};

template <class T>
double dot(std::span<const T> a, std::span<const T> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

template <class T>
double sqdist(std::span<const T> a, std::span<const T> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

template <class T>
double median_distance(const Pool<T>& pool, unsigned threads) {
  const std::size_t n = pool.rows.size();
  std::vector<std::vector<double>> per_row(n);
  detail::parallel_for(n, threads, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::sqrt(sqdist(pool.rows[i], pool.rows[j]));
      if (d > 0.0) per_row[i].push_back(d);
    }
  });
  std::vector<double> all;
  for (auto& r : per_row) all.insert(all.end(), r.begin(), r.end());
  if (all.empty()) throw Error("median heuristic undefined: all pooled points are identical");
  const std::size_t mid = all.size() / 2;
  std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(mid), all.end());
  const double upper = all[mid];
  if (all.size() % 2 == 1) return upper;
  const double lower = *std::max_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

template <class T>
std::function<double(std::span<const T>, std::span<const T>)> make_kernel(const KernelSpec& k, double bandwidth) {
  switch (k.kind) {
    case KernelKind::Gaussian: {
      const double denom = 2.0 * bandwidth * bandwidth;
      return [denom](auto a, auto b) { return std::exp(-sqdist(a, b) / denom); };
    }
    case KernelKind::Linear:
      return [](auto a, auto b) { return dot(a, b); };
    case KernelKind::Polynomial: {
      const int degree = k.degree;
      const double coef = k.coef;
      return [degree, coef](auto a, auto b) {
        const double base = dot(a, b) + coef;
        double r = 1.0;
        for (int i = 0; i < degree; ++i) r *= base;
        return r;
      };
    }
  }
  throw Error("unknown kernel kind");
}

template <class T>
double mmd_pool(const Pool<T>& pool, const KernelSpec& k, unsigned threads) {
  k.validate();
  const std::size_t m = pool.m, n = pool.n();
  if (m < 2 || n < 2)
    throw Error("MMD needs at least 2 samples per set, got " + std::to_string(m) + " and " + std::to_string(n));

  double bandwidth = 0.0;
  if (k.kind == KernelKind::Gaussian) bandwidth = k.bandwidth ? *k.bandwidth : median_distance(pool, threads);
  const auto kernel = make_kernel<T>(k, bandwidth);

  // Row i accumulates k(z_i, z_j) for j > i into its own slots; rows are then
  // reduced in index order.
  const std::size_t total = m + n;
  std::vector<double> xx(total), yy(total), xy(total);
  detail::parallel_for(total, threads, [&](std::size_t i) {
    CompensatedSum sxx, syy, sxy;
    for (std::size_t j = i + 1; j < total; ++j) {
      const double v = kernel(pool.rows[i], pool.rows[j]);
      if (j < m)
        sxx.add(v);
      else if (i >= m)
        syy.add(v);
      else
        sxy.add(v);
    }
    xx[i] = sxx.value();
    yy[i] = syy.value();
    xy[i] = sxy.value();
  });

  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  const double kxx = 2.0 * detail::compensated_sum(xx) / (md * (md - 1.0));
  const double kyy = 2.0 * detail::compensated_sum(yy) / (nd * (nd - 1.0));
  const double kxy = detail::compensated_sum(xy) / (md * nd);
  return kxx + kyy - 2.0 * kxy;
}

struct RowMajor {
  std::vector<double> data;
  std::size_t dim = 0;
};

RowMajor to_row_major(const EmbeddingSet& e) {
  RowMajor r{std::vector<double>(e.rows() * e.dim()), e.dim()};
  for (std::size_t i = 0; i < e.rows(); ++i)
    for (std::size_t c = 0; c < e.dim(); ++c)
      r.data[i * e.dim() + c] = e.vectors()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
  return r;
}

Pool<double> embedding_pool(const RowMajor& x, std::size_t mx, const RowMajor& y, std::size_t my) {
  Pool<double> pool;
  pool.m = mx;
  for (std::size_t i = 0; i < mx; ++i) pool.rows.emplace_back(x.data.data() + i * x.dim, x.dim);
  for (std::size_t i = 0; i < my; ++i) pool.rows.emplace_back(y.data.data() + i * y.dim, y.dim);
  return pool;
}

void check_dims(const EmbeddingSet& x, const EmbeddingSet& y) {
  if (x.dim() != y.dim())
    throw Error("MMD: dimension mismatch " + std::to_string(x.dim()) + " vs " + std::to_string(y.dim()));
}

double linear_image_mmd(std::span<const Volume> xs, std::span<const Volume> ys, unsigned threads) {
  const std::size_t voxels = xs.front().size();
  // Per-voxel sums over each set and per-volume squared norms.
  auto set_sum = [&](std::span<const Volume> set) {
    std::vector<double> s(voxels, 0.0);
    for (const auto& v : set) {
      const auto d = v.data();
      for (std::size_t i = 0; i < voxels; ++i) s[i] += d[i];
    }
    return s;
  };
  auto self_norms = [&](std::span<const Volume> set) {
    std::vector<double> norms(set.size());
    detail::parallel_for(set.size(), threads, [&](std::size_t i) {
      const auto d = set[i].data();
      norms[i] = dot<float>(d, d);
    });
    return detail::compensated_sum(norms);
  };
  const std::vector<double> sx = set_sum(xs), sy = set_sum(ys);
  CompensatedSum sxx, syy, sxy;
  for (std::size_t i = 0; i < voxels; ++i) {
    sxx.add(sx[i] * sx[i]);
    syy.add(sy[i] * sy[i]);
    sxy.add(sx[i] * sy[i]);
  }
  const double m = static_cast<double>(xs.size()), n = static_cast<double>(ys.size());
  const double kxx = (sxx.value() - self_norms(xs)) / (m * (m - 1.0));
  const double kyy = (syy.value() - self_norms(ys)) / (n * (n - 1.0));
  const double kxy = sxy.value() / (m * n);
  return kxx + kyy - 2.0 * kxy;
}

}  // namespace

void KernelSpec::validate() const {
  if (kind == KernelKind::Gaussian && bandwidth && !(*bandwidth > 0.0 && std::isfinite(*bandwidth)))
    throw Error("gaussian kernel bandwidth must be positive");
  if (kind == KernelKind::Polynomial && degree < 1) throw Error("polynomial kernel degree must be >= 1");
  if (kind == KernelKind::Polynomial && !std::isfinite(coef)) throw Error("polynomial kernel coef must be finite");
}

std::string KernelSpec::describe() const {
  switch (kind) {
    case KernelKind::Gaussian:
      return bandwidth ? "gaussian(h=" + format_real(*bandwidth) + ")" : "gaussian(median)";
    case KernelKind::Linear:
      return "linear";
    case KernelKind::Polynomial:
      return "polynomial(d=" + std::to_string(degree) + ",c=" + format_real(coef) + ")";
  }
  return "unknown";
}

KernelSpec KernelSpec::parse(std::string_view text) {
  // Accepted: linear | gaussian | gaussian:<h> | polynomial:<degree>:<coef>
  auto next = [&text]() {
    const auto pos = text.find(':');
    auto head = text.substr(0, pos);
    text = pos == std::string_view::npos ? std::string_view{} : text.substr(pos + 1);
    return head;
  };
  const auto name = next();
  KernelSpec k;
  if (name == "linear") {
    k = linear();
  } else if (name == "gaussian") {
    k = gaussian();
    if (!text.empty()) {
      const auto h = next();
      if (h != "median") k.bandwidth = parse_real(h, "kernel bandwidth");
    }
  } else if (name == "polynomial") {
    k = polynomial(2, 1.0);
    if (!text.empty()) {
      const auto d = next();
      if (std::from_chars(d.data(), d.data() + d.size(), k.degree).ec != std::errc{})
        throw Error("invalid polynomial degree '" + std::string(d) + "'");
    }
    if (!text.empty()) k.coef = parse_real(next(), "polynomial coef");
  } else {
    throw Error("unknown kernel '" + std::string(name) + "'");
  }
  k.validate();
  return k;
}

double median_heuristic_bandwidth(const EmbeddingSet& x, const EmbeddingSet& y) {
  check_dims(x, y);
  const RowMajor rx = to_row_major(x), ry = to_row_major(y);
  return median_distance(embedding_pool(rx, x.rows(), ry, y.rows()), 1);
}

double mmd2_unbiased(const EmbeddingSet& x, const EmbeddingSet& y, const KernelSpec& k, unsigned threads) {
  check_dims(x, y);
  const RowMajor rx = to_row_major(x), ry = to_row_major(y);
  return mmd_pool(embedding_pool(rx, x.rows(), ry, y.rows()), k, threads);
}

double image_space_mmd(std::span<const Volume> xs, std::span<const Volume> ys, const KernelSpec& k,
                       unsigned threads) {
  k.validate();
  if (xs.size() < 2 || ys.size() < 2)
    throw Error("image MMD needs at least 2 volumes per set, got " + std::to_string(xs.size()) + " and " +
                std::to_string(ys.size()));
  const Shape3 shape = xs.front().shape();
  for (const auto* set : {&xs, &ys})
    for (const auto& v : *set)
      if (v.shape() != shape)
        throw Error("image MMD: shape mismatch " + to_string(v.shape()) + " vs " + to_string(shape));

  if (k.kind == KernelKind::Linear) return linear_image_mmd(xs, ys, threads);

  Pool<float> pool;
  pool.m = xs.size();
  for (const auto& v : xs) pool.rows.push_back(v.data());
  for (const auto& v : ys) pool.rows.push_back(v.data());
  return mmd_pool(pool, k, threads);
}

}  // namespace mrieval
