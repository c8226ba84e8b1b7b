#pragma once

#include <Eigen/Core>

#include "mrieval/embedding.hpp"

namespace mrieval {

struct GaussianSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // symmetric PSD
};

/// Column means and the unbiased (N-1) covariance, symmetrized.
GaussianSummary fit_gaussian(const EmbeddingSet& e);

/// Throws Error when cov is not symmetric (1e-9 relative) or has an
/// eigenvalue below -1e-8 * largest.
void check_gaussian(const GaussianSummary& g);

/// Square root of a symmetric PSD matrix by eigendecomposition; eigenvalues
/// below 1e-8 * largest are clipped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& sym);

/// ||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa Sb)^{1/2}); clamped to >= 0.
/// The trace term uses the symmetric form sqrt(Sa) Sb sqrt(Sa).
double frechet_distance(const GaussianSummary& a, const GaussianSummary& b);

}  // namespace mrieval
