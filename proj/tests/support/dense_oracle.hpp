#pragma once

// Test-only reference fitter: an independently written likelihood with an
// analytic gradient, a finite-difference Hessian, and a brute-force dense
// Newton solve. Cubic in the number of outcome categories, so only suitable
// for small inputs, which is exactly what makes it a trustworthy comparison
// point for the production fitter.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "cpmdid/data.hpp"
#include "cpmdid/links.hpp"

namespace dense_oracle {

struct Result {
  std::vector<double> alphas;
  Eigen::VectorXd betas;
  double loglik = 0.0;
  bool converged = false;
};

inline double cdf(cpmdid::Link lk, double z) {
  switch (lk) {
    case cpmdid::Link::probit:
      return 0.5 * std::erfc(-z / std::sqrt(2.0));
    case cpmdid::Link::logit: {
      if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
      const double e = std::exp(z);
      return e / (1.0 + e);
    }
    case cpmdid::Link::cloglog:
      return -std::expm1(-std::exp(z));
  }
  return 0.0;
}

inline double pdf(cpmdid::Link lk, double z) {
  switch (lk) {
    case cpmdid::Link::probit:
      return std::exp(-0.5 * z * z) / std::sqrt(8.0 * std::atan(1.0));
    case cpmdid::Link::logit: {
      const double e = std::exp(-std::fabs(z));
      return e / ((1.0 + e) * (1.0 + e));
    }
    case cpmdid::Link::cloglog:
      return std::exp(z - std::exp(z));
  }
  return 0.0;
}

// theta packs the cutpoints first, then the slopes.
inline double loglik(const Eigen::VectorXd& theta,
                     const cpmdid::SupportEncoding& enc,
                     const Eigen::MatrixXd& w, cpmdid::Link lk) {
  const int k = enc.category_count();
  const Eigen::Index m = w.cols();
  const Eigen::VectorXd eta = w * theta.tail(m);
  double ll = 0.0;
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    const int c = enc.category_index[static_cast<std::size_t>(r)];
    const double upper =
        c == k - 1 ? 1.0 : cdf(lk, theta[c] - eta[r]);
    const double lower = c == 0 ? 0.0 : cdf(lk, theta[c - 1] - eta[r]);
    ll += std::log(std::max(upper - lower, 1e-300));
  }
  return ll;
}

inline Eigen::VectorXd gradient(const Eigen::VectorXd& theta,
                                const cpmdid::SupportEncoding& enc,
                                const Eigen::MatrixXd& w, cpmdid::Link lk) {
  const int k = enc.category_count();
  const Eigen::Index m = w.cols();
  const Eigen::VectorXd eta = w * theta.tail(m);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    const int c = enc.category_index[static_cast<std::size_t>(r)];
    const double upper =
        c == k - 1 ? 1.0 : cdf(lk, theta[c] - eta[r]);
    const double lower = c == 0 ? 0.0 : cdf(lk, theta[c - 1] - eta[r]);
    const double p = std::max(upper - lower, 1e-300);
    const double du = c == k - 1 ? 0.0 : pdf(lk, theta[c] - eta[r]);
    const double dl = c == 0 ? 0.0 : pdf(lk, theta[c - 1] - eta[r]);
    if (c < k - 1) g[c] += du / p;
    if (c > 0) g[c - 1] -= dl / p;
    g.tail(m) -= w.row(r).transpose() * ((du - dl) / p);
  }
  return g;
}

inline Eigen::MatrixXd fd_hessian(const Eigen::VectorXd& theta,
                                  const cpmdid::SupportEncoding& enc,
                                  const Eigen::MatrixXd& w, cpmdid::Link lk) {
  const Eigen::Index dim = theta.size();
  Eigen::MatrixXd h(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double step = 1e-6 * (1.0 + std::fabs(theta[j]));
    Eigen::VectorXd hi = theta, lo = theta;
    hi[j] += step;
    lo[j] -= step;
    h.col(j) =
        (gradient(hi, enc, w, lk) - gradient(lo, enc, w, lk)) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

inline bool ordered(const Eigen::VectorXd& theta, int cutpoints) {
  for (int i = 1; i < cutpoints; ++i) {
    if (!(theta[i - 1] < theta[i])) return false;
  }
  return true;
}

inline Result fit(const cpmdid::Dataset& data, cpmdid::Link lk) {
  const cpmdid::SupportEncoding enc = cpmdid::encode_support(data);
  const Eigen::MatrixXd w = cpmdid::design_matrix(data);
  const int k = enc.category_count();
  const Eigen::Index m = w.cols();
  const Eigen::Index dim = k - 1 + m;
  const double n = static_cast<double>(w.rows());

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);
  long cum = 0;
  for (int c = 0; c + 1 < k; ++c) {
    cum += enc.counts[static_cast<std::size_t>(c)];
    theta[c] = cpmdid::link(lk, static_cast<double>(cum) / n);
  }

  Result out;
  double ll = loglik(theta, enc, w, lk);
  for (int iter = 0; iter < 300; ++iter) {
    const Eigen::VectorXd g = gradient(theta, enc, w, lk);
    if (g.cwiseAbs().maxCoeff() < 1e-10 * n) break;
    Eigen::MatrixXd neg = -fd_hessian(theta, enc, w, lk);
    neg.diagonal().array() += 1e-10 * neg.diagonal().cwiseAbs().maxCoeff();
    const Eigen::VectorXd dir = neg.fullPivLu().solve(g);
    double step = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 60; ++halving) {
      const Eigen::VectorXd cand = theta + step * dir;
      if (ordered(cand, k - 1)) {
        const double cand_ll = loglik(cand, enc, w, lk);
        if (std::isfinite(cand_ll) && cand_ll >= ll) {
          theta = cand;
          ll = cand_ll;
          moved = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  // The line search compares likelihoods in double precision, so late steps
  // can stall with the gradient slightly above the loop target; anything at
  // or below 1e-7 per observation is the optimum for comparison purposes.
  out.converged =
      gradient(theta, enc, w, lk).cwiseAbs().maxCoeff() < 1e-7 * n;
  out.alphas.assign(theta.data(), theta.data() + (k - 1));
  out.betas = theta.tail(m);
  out.loglik = ll;
  return out;
}

}  // namespace dense_oracle
