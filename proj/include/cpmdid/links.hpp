#pragma once

#include <string_view>

namespace cpmdid {

// Latent error families available for the cumulative probability model.
// The model ties P(Y <= y | W) to the linear predictor through the inverse
// of one of these distribution functions.
enum class Link { probit, logit, cloglog };

// Accepts "probit", "logit", "cloglog"; throws std::invalid_argument otherwise.
Link parse_link(std::string_view name);
std::string_view link_name(Link lk);

// CDF of the latent error at z. Strictly increasing on the representable
// range, saturating smoothly toward 0 and 1 in the tails.
double inverse_link(Link lk, double z);

// 1 - inverse_link(lk, z), computed without cancellation in the upper tail.
double inverse_link_complement(Link lk, double z);

// Density of the latent error (derivative of inverse_link in z).
double inverse_link_density(Link lk, double z);

// Derivative of the density, needed for Hessian assembly.
double inverse_link_density_gradient(Link lk, double z);

// Density and its derivative together, sharing the exponential.
void inverse_link_density_pair(Link lk, double z, double& density,
                               double& gradient);

// Quantile function of the latent error. Throws std::domain_error unless
// 0 < p < 1 (the quantile is infinite at the endpoints).
double link(Link lk, double p);

}  // namespace cpmdid
