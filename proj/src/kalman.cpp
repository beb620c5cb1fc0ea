#include "hev/kalman.hpp"

#include <cmath>

#include "hev/errors.hpp"

namespace hev {

void KalmanState::validate() const {
    if (!(p_var >= 0.0)) throw DomainError("kalman: p_var must be >= 0");
    if (!(q_var >= 0.0)) throw DomainError("kalman: q_var must be >= 0");
    if (!(r_var > 0.0)) throw DomainError("kalman: r_var must be > 0");
    if (!std::isfinite(x_hat)) throw DomainError("kalman: x_hat must be finite");
}

KalmanState predict(const KalmanState& s) {
    KalmanState out = s;
    out.p_var = s.p_var + s.q_var;
    return out;
}

KalmanState update(const KalmanState& s, double z) {
    KalmanState out = s;
    const double gain = s.p_var / (s.p_var + s.r_var);
    out.x_hat = s.x_hat + gain * (z - s.x_hat);
    out.p_var = (1.0 - gain) * s.p_var;
    return out;
}

std::vector<FilterPoint> filter_stream(KalmanState& state, std::span<const double> observations) {
    state.validate();
    std::vector<FilterPoint> out;
    out.reserve(observations.size());
    for (double z : observations) {
        state = update(predict(state), z);
        out.push_back({state.x_hat, state.p_var});
    }
    return out;
}

std::vector<FilterPoint> filter_sequence(const KalmanState& init, std::span<const double> observations) {
    if (observations.empty()) throw DomainError("filter_sequence: observations must be non-empty");
    KalmanState state = init;
    return filter_stream(state, observations);
}

KalmanState initial_state(const KalmanConfig& cfg, double first_observation) {
    KalmanState s{first_observation, cfg.p0, cfg.q, cfg.r};
    s.validate();
    return s;
}

}  // namespace hev
