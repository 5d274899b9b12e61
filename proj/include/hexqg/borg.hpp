#pragma once

// Symmetric potential from its Dirichlet spectrum: Gauss-Newton on cosine coefficients.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "hexqg/edge_ode.hpp"

namespace hexqg {

struct SpectralFit {
  std::vector<double> target;
  int basis_size = 0;  // K
  SymmetricPotential result;
  std::vector<double> residuals;  // lambda_j(result) - target_j, recomputed from scratch
  double residual = 0.0;          // max relative mismatch
  int iterations = 0;
  bool converged = false;
};

class BorgDivergence : public std::runtime_error {
 public:
  BorgDivergence(const std::string& what, SpectralFit best) : std::runtime_error(what), best_(std::move(best)) {}
  const SpectralFit& best() const { return best_; }

 private:
  SpectralFit best_;
};

inline std::vector<double> spectrum_residual(const SymmetricPotential& q, const std::vector<double>& target,
                                             OdeSettings s = {}) {
  const std::vector<double> l = dirichlet_spectrum(q, static_cast<int>(target.size()), s);
  std::vector<double> r(target.size());
  for (std::size_t j = 0; j < target.size(); ++j) r[j] = l[j] - target[j];
  return r;
}

namespace detail {

// First M eigenvalues near a previous estimate, full scan when the warm start fails.
inline std::vector<double> eigen_map(const std::vector<double>& c, const std::vector<double>& guess, OdeSettings s) {
  const EdgeSolver solver(SymmetricPotential::cosine(c), s);
  const int M = static_cast<int>(guess.size());
  std::vector<double> out(guess.size());
  for (int j = 0; j < M; ++j) {
    const double v = refine_dirichlet(solver, j + 1, guess[static_cast<std::size_t>(j)]);
    if (!std::isfinite(v)) return dirichlet_spectrum(solver, M);
    out[static_cast<std::size_t>(j)] = v;
  }
  return out;
}

}  // namespace detail

inline SpectralFit recover_potential(const std::vector<double>& target, int K, int max_iter = 50, OdeSettings s = {}) {
  const int M = static_cast<int>(target.size());
  if (K < 0) throw std::invalid_argument("recover_potential: K must be >= 0");
  if (M < K + 1) throw std::invalid_argument("recover_potential: need at least K+1 eigenvalues");
  for (int j = 1; j < M; ++j)
    if (!(target[static_cast<std::size_t>(j)] > target[static_cast<std::size_t>(j - 1)]))
      throw std::invalid_argument("recover_potential: target eigenvalues must be strictly increasing");

  const double pi2 = std::numbers::pi * std::numbers::pi;
  std::vector<double> c(static_cast<std::size_t>(K + 1), 0.0);
  c[0] = target[0] - pi2;

  auto residual_vec = [&](const std::vector<double>& lam) {
    Eigen::VectorXd r(M);
    for (int j = 0; j < M; ++j) r(j) = (lam[static_cast<std::size_t>(j)] - target[static_cast<std::size_t>(j)]) / target[static_cast<std::size_t>(j)];
    return r;
  };

  std::vector<double> lam = dirichlet_spectrum(SymmetricPotential::cosine(c), M, s);
  Eigen::VectorXd r = residual_vec(lam);
  double cost = r.squaredNorm();
  SpectralFit fit;
  fit.target = target;
  fit.basis_size = K;
  const double h = 1e-6;
  int it = 0;
  bool converged = r.cwiseAbs().maxCoeff() < 1e-10;
  for (; it < max_iter && !converged; ++it) {
    Eigen::MatrixXd J(M, K + 1);
    for (int m = 0; m <= K; ++m) {
      std::vector<double> cp = c, cm = c;
      cp[static_cast<std::size_t>(m)] += h;
      cm[static_cast<std::size_t>(m)] -= h;
      const auto lp = detail::eigen_map(cp, lam, s), lm = detail::eigen_map(cm, lam, s);
      for (int j = 0; j < M; ++j)
        J(j, m) = (lp[static_cast<std::size_t>(j)] - lm[static_cast<std::size_t>(j)]) / (2.0 * h) / target[static_cast<std::size_t>(j)];
    }
    const Eigen::VectorXd step = J.colPivHouseholderQr().solve(-r);
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
      std::vector<double> cn = c;
      for (int m = 0; m <= K; ++m) cn[static_cast<std::size_t>(m)] += t * step(m);
      const auto ln = detail::eigen_map(cn, lam, s);
      const Eigen::VectorXd rn = residual_vec(ln);
      if (rn.squaredNorm() < cost || rn.cwiseAbs().maxCoeff() < 1e-10) {
        c = cn;
        lam = ln;
        r = rn;
        cost = rn.squaredNorm();
        accepted = true;
        break;
      }
    }
    // no descent direction left (stationary point) or a negligible step: done
    if (!accepted || t * step.norm() < 1e-10 || r.cwiseAbs().maxCoeff() < 1e-10) {
      converged = true;
      ++it;
      break;
    }
  }

  fit.result = SymmetricPotential::cosine(c);
  fit.iterations = it;
  fit.residuals = spectrum_residual(fit.result, target, s);
  for (int j = 0; j < M; ++j)
    fit.residual = std::max(fit.residual, std::abs(fit.residuals[static_cast<std::size_t>(j)]) / target[static_cast<std::size_t>(j)]);
  fit.converged = converged;
  if (!converged) {
    std::ostringstream os;
    os << "recover_potential: no convergence after " << it << " iterations (residual " << fit.residual << ")";
    throw BorgDivergence(os.str(), fit);
  }
  return fit;
}

}  // namespace hexqg
