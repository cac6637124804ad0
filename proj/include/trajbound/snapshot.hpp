#pragma once

#include <optional>
#include <vector>

#include "trajbound/numerics.hpp"

namespace trajbound {

/// Statistics recorded at one point J_t of a learning trajectory. S' (the
/// holdout set) stands in for the data distribution throughout.
struct TrajectorySnapshot {
    long t = 0;
    long epoch = 0;
    double eta_t = 0.0;              // rate of the update leaving J_t
    double F_S = 0.0;
    double F_Sprime = 0.0;
    double grad_norm_S = 0.0;
    double grad_norm_Sprime = 0.0;
    double grad_dot = 0.0;           // grad F_S . grad F_S'
    double trace_sigma = 0.0;        // Tr of the per-sample gradient covariance on S
    double delta_t = 0.0;            // eta_t * |grad F_S|
    double C_cum = 0.0;              // trajectory complexity accumulated up to t
    std::optional<double> gamma_tilde;
    std::optional<double> rp;        // progress ratios of the interval ending at t
    std::optional<double> trp;
    bool degenerate_gradient = false;

    // Kept in memory for the estimators; never serialized.
    Vector w;
    Vector grad_S;
    Vector grad_Sprime;
};

} // namespace trajbound
