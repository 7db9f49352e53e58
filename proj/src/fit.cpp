#include "cpmdid/fit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cpmdid {

namespace {

// Category probabilities are floored here before taking logs or ratios, so a
// row pushed into a vanishing cell degrades the step instead of producing
// NaNs.
constexpr double kProbabilityFloor = 1e-300;

bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i - 1] < v[i])) return false;
  }
  return !v.empty() && std::isfinite(v.front()) && std::isfinite(v.back());
}

void check_shapes(const std::vector<double>& alphas,
                  const Eigen::VectorXd& betas, const SupportEncoding& encoding,
                  const Eigen::MatrixXd& design) {
  const int k = encoding.category_count();
  if (k < 2) {
    throw std::invalid_argument(
        "model undefined: fewer than two distinct outcome values");
  }
  if (static_cast<int>(alphas.size()) != k - 1) {
    std::ostringstream msg;
    msg << "expected " << k - 1 << " cutpoints for " << k
        << " outcome categories, got " << alphas.size();
    throw std::invalid_argument(msg.str());
  }
  if (design.rows() != static_cast<Eigen::Index>(encoding.category_index.size())) {
    throw std::invalid_argument(
        "design matrix row count does not match the encoded outcomes");
  }
  if (design.cols() != betas.size()) {
    throw std::invalid_argument(
        "design matrix column count does not match the slope vector");
  }
  if (!strictly_increasing(alphas)) {
    throw std::domain_error("cutpoints must be finite and strictly increasing");
  }
}

// Probability of the category bounded by cutpoints l and u on the linear
// scale. The difference is taken on whichever side of the distribution keeps
// both terms small, so deep-tail categories do not cancel.
double category_probability(Link lk, bool has_l, bool has_u, double l,
                            double u) {
  if (!has_l) return inverse_link(lk, u);
  if (!has_u) return inverse_link_complement(lk, l);
  if (u + l > 0.0) {
    return inverse_link_complement(lk, l) - inverse_link_complement(lk, u);
  }
  return inverse_link(lk, u) - inverse_link(lk, l);
}

// Unit-lower-bidiagonal LDL^T factorization of a symmetric tridiagonal,
// positive definite up to rounding; tiny pivots are clamped so a flat
// direction cannot blow up the solve.
struct TridiagonalFactor {
  Eigen::VectorXd diag;
  Eigen::VectorXd sub;
};

TridiagonalFactor factor_tridiagonal(const Eigen::VectorXd& diag,
                                     const Eigen::VectorXd& off) {
  const Eigen::Index n = diag.size();
  TridiagonalFactor f{Eigen::VectorXd(n),
                      Eigen::VectorXd(std::max<Eigen::Index>(n - 1, 0))};
  const double floor_pivot =
      std::max(diag.cwiseAbs().maxCoeff(), 1.0) * 1e-14;
  f.diag[0] = std::max(diag[0], floor_pivot);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    f.sub[i] = off[i] / f.diag[i];
    f.diag[i + 1] = std::max(diag[i + 1] - f.sub[i] * off[i], floor_pivot);
  }
  return f;
}

Eigen::VectorXd tridiagonal_solve(const TridiagonalFactor& f,
                                  Eigen::VectorXd b) {
  const Eigen::Index n = b.size();
  for (Eigen::Index i = 1; i < n; ++i) b[i] -= f.sub[i - 1] * b[i - 1];
  b.array() /= f.diag.array();
  for (Eigen::Index i = n - 2; i >= 0; --i) b[i] -= f.sub[i] * b[i + 1];
  return b;
}

Eigen::VectorXd solve_reduced(Eigen::MatrixXd s, const Eigen::VectorXd& rhs) {
  const double scale = std::max(s.diagonal().cwiseAbs().maxCoeff(), 1.0);
  double ridge = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd work = s;
    work.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(work);
    if (ldlt.info() == Eigen::Success) {
      Eigen::VectorXd v = ldlt.solve(rhs);
      if (v.allFinite()) return v;
    }
    ridge = ridge == 0.0 ? scale * 1e-12 : ridge * 100.0;
  }
  throw numerical_error("Newton step failed: reduced system is not solvable");
}

struct Direction {
  Eigen::VectorXd dalpha;
  Eigen::VectorXd dbeta;
};

// Solves -H d = g by eliminating the tridiagonal alpha block first. When
// rank_labels is given (first iteration), the reduced slope system is rank
// checked so a constant or collinear design column is reported by name; the
// alpha block absorbs every intercept, so a constant column is invisible to
// the slope block alone and only this profiled check catches it.
Direction newton_direction(const ScoreHessian& sh,
                           const std::vector<std::string>* rank_labels) {
  const Eigen::Index m = sh.beta_score.size();
  const TridiagonalFactor f =
      factor_tridiagonal(-sh.alpha_diag, -sh.alpha_offdiag);
  Eigen::MatrixXd x(sh.alpha_score.size(), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    x.col(j) = tridiagonal_solve(f, (-sh.cross.col(j)).eval());
  }
  const Eigen::MatrixXd schur =
      -sh.beta_block + sh.cross.transpose() * x;
  if (rank_labels != nullptr) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(schur);
    qr.setThreshold(1e-8);
    const Eigen::Index rank = qr.rank();
    if (rank < m) {
      const auto& perm = qr.colsPermutation().indices();
      std::ostringstream msg;
      msg << "degenerate design: column";
      if (m - rank > 1) msg << "s";
      for (Eigen::Index j = rank; j < m; ++j) {
        msg << (j == rank ? " '" : ", '")
            << (*rank_labels)[static_cast<std::size_t>(perm[j])] << "'";
      }
      msg << (m - rank > 1 ? " are" : " is")
          << " constant or collinear with the rest of the design";
      throw input_error(msg.str());
    }
  }
  Direction d;
  d.dbeta = solve_reduced(
      schur, sh.beta_score - x.transpose() * sh.alpha_score);
  d.dalpha = tridiagonal_solve(f, sh.alpha_score) - x * d.dbeta;
  return d;
}

double standardized_score(const ScoreHessian& sh, Eigen::Index rows) {
  const double worst = std::max(sh.alpha_score.cwiseAbs().maxCoeff(),
                                sh.beta_score.cwiseAbs().maxCoeff());
  return worst / static_cast<double>(rows);
}

// Folds outcomes below lo into the lowest retained category and outcomes
// above hi into the highest, where lo and hi are the extreme support values
// inside the censor bounds. Interior values keep their own categories, so
// the remaining cutpoints all sit inside the bounds.
SupportEncoding collapse_support(const SupportEncoding& encoding, double lo,
                                 double hi) {
  std::vector<double> clamped(encoding.support.size());
  for (std::size_t i = 0; i < clamped.size(); ++i) {
    clamped[i] = std::clamp(encoding.support[i], lo, hi);
  }
  SupportEncoding out;
  out.support = clamped;
  out.support.erase(std::unique(out.support.begin(), out.support.end()),
                    out.support.end());
  std::vector<int> remap(clamped.size());
  for (std::size_t i = 0; i < clamped.size(); ++i) {
    remap[i] = static_cast<int>(
        std::lower_bound(out.support.begin(), out.support.end(), clamped[i]) -
        out.support.begin());
  }
  out.category_index.resize(encoding.category_index.size());
  out.counts.assign(out.support.size(), 0);
  for (std::size_t r = 0; r < encoding.category_index.size(); ++r) {
    const int c = remap[static_cast<std::size_t>(encoding.category_index[r])];
    out.category_index[r] = c;
    ++out.counts[static_cast<std::size_t>(c)];
  }
  return out;
}

}  // namespace

double log_likelihood(const std::vector<double>& alphas,
                      const Eigen::VectorXd& betas,
                      const SupportEncoding& encoding,
                      const Eigen::MatrixXd& design, Link lk) {
  check_shapes(alphas, betas, encoding, design);
  const int top = encoding.category_count() - 1;
  const Eigen::VectorXd eta = design * betas;
  double ll = 0.0;
  for (Eigen::Index r = 0; r < eta.size(); ++r) {
    const int c = encoding.category_index[static_cast<std::size_t>(r)];
    const bool has_l = c > 0;
    const bool has_u = c < top;
    const double u = has_u ? alphas[static_cast<std::size_t>(c)] - eta[r] : 0.0;
    const double l =
        has_l ? alphas[static_cast<std::size_t>(c - 1)] - eta[r] : 0.0;
    const double p = category_probability(lk, has_l, has_u, l, u);
    ll += std::log(std::max(p, kProbabilityFloor));
  }
  return ll;
}

ScoreHessian score_and_hessian(const std::vector<double>& alphas,
                               const Eigen::VectorXd& betas,
                               const SupportEncoding& encoding,
                               const Eigen::MatrixXd& design, Link lk) {
  check_shapes(alphas, betas, encoding, design);
  const int top = encoding.category_count() - 1;
  const Eigen::Index m = design.cols();
  ScoreHessian sh;
  sh.alpha_score = Eigen::VectorXd::Zero(top);
  sh.beta_score = Eigen::VectorXd::Zero(m);
  sh.alpha_diag = Eigen::VectorXd::Zero(top);
  sh.alpha_offdiag = Eigen::VectorXd::Zero(std::max(top - 1, 0));
  sh.cross = Eigen::MatrixXd::Zero(top, m);
  sh.beta_block = Eigen::MatrixXd::Zero(m, m);
  const Eigen::VectorXd eta = design * betas;
  for (Eigen::Index r = 0; r < eta.size(); ++r) {
    const int c = encoding.category_index[static_cast<std::size_t>(r)];
    const bool has_l = c > 0;
    const bool has_u = c < top;
    const double u = has_u ? alphas[static_cast<std::size_t>(c)] - eta[r] : 0.0;
    const double l =
        has_l ? alphas[static_cast<std::size_t>(c - 1)] - eta[r] : 0.0;
    const double p =
        std::max(category_probability(lk, has_l, has_u, l, u),
                 kProbabilityFloor);
    double fu = 0.0, fpu = 0.0, fl = 0.0, fpl = 0.0;
    if (has_u) inverse_link_density_pair(lk, u, fu, fpu);
    if (has_l) inverse_link_density_pair(lk, l, fl, fpl);
    const double gu = fu / p;
    const double gl = fl / p;
    const double duu = fpu / p - gu * gu;
    const double dll = -fpl / p - gl * gl;
    const double dul = gu * gl;
    const auto w = design.row(r);
    if (has_u) {
      sh.alpha_score[c] += gu;
      sh.alpha_diag[c] += duu;
      sh.cross.row(c).noalias() -= w * (duu + dul);
    }
    if (has_l) {
      sh.alpha_score[c - 1] -= gl;
      sh.alpha_diag[c - 1] += dll;
      sh.cross.row(c - 1).noalias() -= w * (dll + dul);
    }
    if (has_l && has_u) sh.alpha_offdiag[c - 1] += dul;
    sh.beta_score.noalias() += w.transpose() * (gl - gu);
    sh.beta_block.noalias() +=
        (w.transpose() * w) * (duu + dll + 2.0 * dul);
  }
  return sh;
}

FittedCPM fit_cpm(const Dataset& dataset, const FitOptions& options,
                  const Eigen::VectorXd* initial_betas) {
  validate(dataset);
  if (options.max_iterations < 1) {
    throw input_error("max_iterations must be at least 1");
  }
  if (!(options.tolerance > 0.0)) {
    throw input_error("tolerance must be positive");
  }
  SupportEncoding encoding = encode_support(dataset);
  if (options.censor_bounds) {
    const auto [lo, hi] = *options.censor_bounds;
    if (!(lo < hi)) {
      throw input_error("censor bounds require L < U");
    }
    if (!(encoding.support.front() <= lo) ||
        !(hi <= encoding.support.back())) {
      throw input_error(
          "censor bounds must lie inside the observed outcome range [" +
          format_double(encoding.support.front()) + ", " +
          format_double(encoding.support.back()) + "]");
    }
    const auto first_kept = std::lower_bound(encoding.support.begin(),
                                             encoding.support.end(), lo);
    const auto past_kept = std::upper_bound(encoding.support.begin(),
                                            encoding.support.end(), hi);
    if (first_kept == encoding.support.end() ||
        past_kept == encoding.support.begin() ||
        !(*first_kept < *std::prev(past_kept))) {
      throw input_error(
          "censor bounds leave fewer than two outcome categories");
    }
    encoding = collapse_support(encoding, *first_kept, *std::prev(past_kept));
  }
  const Eigen::MatrixXd design = design_matrix(dataset);
  const Eigen::Index n = design.rows();
  const Eigen::Index m = design.cols();
  const int k = encoding.category_count();

  FittedCPM fit;
  fit.link = options.link;
  fit.support = encoding.support;
  fit.alphas.resize(static_cast<std::size_t>(k - 1));
  // Start the cutpoints at the link-transformed marginal ecdf, winsorized
  // away from 0 and 1, and the slopes at zero (or the caller's warm start).
  {
    const double dn = static_cast<double>(n);
    long cum = 0;
    for (int c = 0; c + 1 < k; ++c) {
      cum += encoding.counts[static_cast<std::size_t>(c)];
      const double p = std::clamp(static_cast<double>(cum) / dn,
                                  0.5 / dn, 1.0 - 0.5 / dn);
      fit.alphas[static_cast<std::size_t>(c)] = link(options.link, p);
    }
  }
  if (initial_betas != nullptr) {
    if (initial_betas->size() != m) {
      throw std::invalid_argument("warm-start slopes have the wrong length");
    }
    fit.betas = *initial_betas;
  } else {
    fit.betas = Eigen::VectorXd::Zero(m);
  }

  double ll = log_likelihood(fit.alphas, fit.betas, encoding, design,
                             options.link);
  fit.loglik_trace.push_back(ll);
  // Convergence needs the relative log-likelihood change below tolerance AND
  // a small accepted move. Under separation the likelihood flattens while
  // the iterates keep drifting by non-vanishing amounts, so the move guard
  // reports non-convergence instead of silently emitting runaway slopes.
  // After the criterion is met, a couple of polish steps push the score to
  // machine scale.
  int small_steps = 0;
  std::vector<double> cand_alphas(fit.alphas.size());
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    const ScoreHessian sh =
        score_and_hessian(fit.alphas, fit.betas, encoding, design,
                          options.link);
    if (small_steps > 0 &&
        (standardized_score(sh, n) < 1e-9 || small_steps >= 3)) {
      fit.converged = true;
      break;
    }
    std::vector<std::string> labels;
    if (iter == 1) labels = design_labels(dataset);
    const Direction dir = newton_direction(sh, iter == 1 ? &labels : nullptr);

    double step = 1.0;
    double ll_new = ll;
    Eigen::VectorXd cand_betas;
    bool accepted = false;
    for (int halving = 0; halving < 60 && !accepted; ++halving) {
      for (std::size_t i = 0; i < cand_alphas.size(); ++i) {
        cand_alphas[i] = fit.alphas[i] + step * dir.dalpha[static_cast<Eigen::Index>(i)];
      }
      if (strictly_increasing(cand_alphas)) {
        cand_betas = fit.betas + step * dir.dbeta;
        ll_new = log_likelihood(cand_alphas, cand_betas, encoding, design,
                                options.link);
        if (std::isfinite(ll_new) && ll_new >= ll) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const double rel = (ll_new - ll) / std::max(1.0, std::fabs(ll_new));
    const double move =
        step * std::max(dir.dalpha.cwiseAbs().maxCoeff(),
                        dir.dbeta.cwiseAbs().maxCoeff());
    fit.alphas = cand_alphas;
    fit.betas = std::move(cand_betas);
    ll = ll_new;
    fit.loglik_trace.push_back(ll);
    fit.iterations = iter;
    small_steps = (rel < options.tolerance && move < 0.05) ? small_steps + 1 : 0;
  }
  if (!fit.converged && small_steps > 0) fit.converged = true;
  fit.loglik = ll;
  fit.max_abs_score = standardized_score(
      score_and_hessian(fit.alphas, fit.betas, encoding, design, options.link),
      n);
  return fit;
}

double conditional_cdf(const FittedCPM& fit,
                       const Eigen::Ref<const Eigen::RowVectorXd>& w,
                       double y) {
  if (fit.support.size() < 2) {
    throw std::invalid_argument("conditional_cdf requires a fitted model");
  }
  if (w.size() != fit.betas.size()) {
    throw std::invalid_argument(
        "covariate row length does not match the fitted slopes");
  }
  if (std::isnan(y)) {
    throw std::invalid_argument("conditional_cdf requires a real threshold");
  }
  if (y < fit.support.front()) return 0.0;
  const auto it =
      std::upper_bound(fit.support.begin(), fit.support.end(), y);
  const std::size_t idx =
      static_cast<std::size_t>(it - fit.support.begin()) - 1;
  if (idx + 1 == fit.support.size()) return 1.0;
  return inverse_link(fit.link, fit.alphas[idx] - w.dot(fit.betas));
}

}  // namespace cpmdid
