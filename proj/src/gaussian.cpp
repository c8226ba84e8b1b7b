#include "mrieval/gaussian.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "mrieval/error.hpp"

namespace mrieval {
namespace {

constexpr double kClip = 1e-8;

Eigen::VectorXd clipped_eigenvalues(const Eigen::VectorXd& ev) {
  const double top = std::max(0.0, ev.maxCoeff());
  return ev.unaryExpr([&](double x) { return x < kClip * top ? 0.0 : x; });
}

}  // namespace

GaussianSummary fit_gaussian(const EmbeddingSet& e) {
  if (e.rows() < 2) throw Error("fit_gaussian needs at least 2 vectors, got " + std::to_string(e.rows()));
  const auto& x = e.vectors();
  GaussianSummary g;
  g.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - g.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
  g.cov = 0.5 * (cov + cov.transpose());
  return g;
}

void check_gaussian(const GaussianSummary& g) {
  if (g.cov.rows() != g.cov.cols() || g.cov.rows() != g.mean.size())
    throw Error("gaussian summary has inconsistent dimensions");
  if (!g.mean.allFinite() || !g.cov.allFinite()) throw Error("gaussian summary has non-finite entries");
  const double scale = std::max(1.0, g.cov.cwiseAbs().maxCoeff());
  if ((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) throw Error("covariance is not symmetric");
  if (g.cov.size() == 0) return;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.cov, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  if (ev.minCoeff() < -kClip * std::max(0.0, ev.maxCoeff()))
    throw Error("covariance is not positive semi-definite");
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& sym) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sym + sym.transpose()));
  const Eigen::VectorXd roots = clipped_eigenvalues(es.eigenvalues()).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

double frechet_distance(const GaussianSummary& a, const GaussianSummary& b) {
  if (a.mean.size() != b.mean.size())
    throw Error("frechet_distance: dimension mismatch " + std::to_string(a.mean.size()) + " vs " +
                std::to_string(b.mean.size()));
  check_gaussian(a);
  check_gaussian(b);

  const double mean_term = (a.mean - b.mean).squaredNorm();
  const Eigen::MatrixXd root_a = psd_sqrt(a.cov);
  const Eigen::MatrixXd inner = root_a * b.cov * root_a;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double cross = clipped_eigenvalues(es.eigenvalues()).cwiseSqrt().sum();

  const double d = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * cross;
  return std::max(0.0, d);
}

}  // namespace mrieval
