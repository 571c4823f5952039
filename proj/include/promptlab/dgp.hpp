#pragma once

// Structural simulation of a purchasing population, shared by the mock
// backend and the ground-truth oracle.
//
// For relative price d = (P - P0)/P0:
//   u | observational ~ N(gamma*d + gamma_quad*d^2, sigma_u^2)   (confounded)
//   u | interventional ~ N(0, sigma_u^2)                          (randomized)
//   P(purchase) = sigmoid(alpha + beta*d + kappa*u)
//
// Elicited covariates inherit the same confounding shift in observational
// mode: past price ~ P0*(1 + lambda_past*shift(d)) + noise, and similarly for
// competing price and expiration days.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "promptlab/rng.hpp"

namespace promptlab {

enum class QueryMode { observational, interventional };

inline const char* query_mode_name(QueryMode m) {
    return m == QueryMode::observational ? "observational" : "interventional";
}

struct DgpConfig {
    double alpha = 0.3;    // purchase intercept
    double beta = -3.0;    // causal price slope
    double kappa = 1.0;    // confounder loading in the purchase equation
    double gamma = 1.5;    // confounder shift per unit relative price (observational)
    double gamma_quad = 0.0;  // optional curvature of the confounder shift
    double sigma_u = 0.5;  // confounder dispersion
    double lambda_past = 0.4;       // past-price sensitivity to the confounder shift
    double lambda_competing = 0.3;  // competing-price sensitivity
    double lambda_expiration = 0.2; // expiration-days sensitivity
    double price_noise_frac = 0.05; // elicited-price noise, fraction of regular price
    double expiration_base_days = 30.0;

    void validate() const {
        auto finite = [](double v) { return std::isfinite(v); };
        if (!finite(alpha) || !finite(beta) || !finite(kappa) || !finite(gamma) ||
            !finite(gamma_quad) || !finite(sigma_u) || !finite(lambda_past) ||
            !finite(lambda_competing) || !finite(lambda_expiration) || !finite(price_noise_frac) ||
            !finite(expiration_base_days))
            throw std::invalid_argument("DgpConfig: non-finite parameter");
        if (sigma_u <= 0) throw std::invalid_argument("DgpConfig: sigma_u must be > 0");
        if (price_noise_frac < 0) throw std::invalid_argument("DgpConfig: price_noise_frac must be >= 0");
        if (expiration_base_days <= 0)
            throw std::invalid_argument("DgpConfig: expiration_base_days must be > 0");
    }

    /// Mean of the confounder u given relative price d, under a mode.
    double confound_shift(double d, QueryMode mode) const {
        if (mode == QueryMode::interventional) return 0.0;
        return gamma * d + gamma_quad * d * d;
    }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct GroundTruth {
    double probability = 0.0;
    double std_error = 0.0;
    int n_draws = 0;
};

/// Monte-Carlo purchase probability at relative price d under a mode.
/// Deterministic for a given (config, d, mode, seed, n).
inline GroundTruth ground_truth_demand(const DgpConfig& config, double d, QueryMode mode,
                                       uint64_t seed = 0, int n = 100000) {
    config.validate();
    if (n <= 1) throw std::invalid_argument("ground_truth_demand: n must be > 1");
    Rng rng(derive_seed({seed, fnv1a64("ground_truth_demand"), uint64_t(mode == QueryMode::observational),
                         fnv1a64(strprintf("%.17g", d))}));
    double shift = config.confound_shift(d, mode);
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        double u = shift + config.sigma_u * rng.normal01();
        double p = sigmoid(config.alpha + config.beta * d + config.kappa * u);
        sum += p;
        sumsq += p * p;
    }
    GroundTruth gt;
    gt.n_draws = n;
    gt.probability = sum / n;
    double var = (sumsq - sum * sum / n) / (n - 1);
    gt.std_error = std::sqrt(var / n);
    return gt;
}

}  // namespace promptlab
