#pragma once

#include <span>
#include <vector>

namespace hev {

/// Scalar Kalman filter with identity dynamics and observation (F = H = 1).
struct KalmanState {
    double x_hat = 0.0;  // state estimate
    double p_var = 1.0;  // estimate error variance
    double q_var = 1e-4; // process noise variance
    double r_var = 1e-2; // measurement noise variance

    /// Throws DomainError unless p_var >= 0, q_var >= 0, r_var > 0.
    void validate() const;
};

struct KalmanConfig {
    double p0 = 1.0;
    double q = 1e-4;
    double r = 1e-2;
};

/// p_var += q_var; x_hat unchanged.
KalmanState predict(const KalmanState& s);

/// Gain k = p/(p + r); x_hat += k (z - x_hat); p_var = (1 - k) p.
KalmanState update(const KalmanState& s, double z);

struct FilterPoint {
    double x_hat;
    double p_var;
};

/// One predict/update pair per observation.
std::vector<FilterPoint> filter_sequence(const KalmanState& init, std::span<const double> observations);

/// Same as filter_sequence but leaves the final state in `state` so a stream
/// can be resumed.
std::vector<FilterPoint> filter_stream(KalmanState& state, std::span<const double> observations);

/// Initial state for a stream: x_hat = first observation, remaining fields from cfg.
KalmanState initial_state(const KalmanConfig& cfg, double first_observation);

}  // namespace hev
