#pragma once

#include <cmath>
#include <optional>

#include "bridgekit/common.hpp"
#include "bridgekit/schedule.hpp"

namespace bridgekit {

// One coupled sample (X0, Y1, optional condition c) defining a bridge.
struct EndpointPair {
    Vec x0;
    Vec y1;
    std::optional<Vec> condition;

    EndpointPair() = default;
    EndpointPair(Vec x0_, Vec y1_, std::optional<Vec> c = std::nullopt)
        : x0(std::move(x0_)), y1(std::move(y1_)), condition(std::move(c)) {
        require(x0.size() == y1.size(), "EndpointPair: x0 and y1 must have identical dimension");
    }
};

// Gaussian posterior of Y_t given both endpoints; variance is the isotropic
// scalar coefficient of Sigma_t = variance * I.
struct BridgePosterior {
    Vec mean;
    double variance = 0.0;
};

struct BridgeSample {
    Vec y_t;
    Vec epsilon;  // the standard normal draw used; target half of objective (d)
    double t = 0.0;
};

enum class ObjectiveKind { Endpoint, BridgeLength, PosteriorLength, EndpointWithScore };

inline const char* to_string(ObjectiveKind k) {
    switch (k) {
        case ObjectiveKind::Endpoint: return "endpoint";
        case ObjectiveKind::BridgeLength: return "bridge-length";
        case ObjectiveKind::PosteriorLength: return "posterior-length";
        case ObjectiveKind::EndpointWithScore: return "endpoint-with-score";
    }
    return "?";
}

inline ObjectiveKind objective_from_string(const std::string& s) {
    if (s == "endpoint") return ObjectiveKind::Endpoint;
    if (s == "bridge-length") return ObjectiveKind::BridgeLength;
    if (s == "posterior-length") return ObjectiveKind::PosteriorLength;
    if (s == "endpoint-with-score") return ObjectiveKind::EndpointWithScore;
    throw std::invalid_argument("unknown objective: " + s);
}

// target width for a given state width; objective (d) doubles the output
inline Eigen::Index target_width(ObjectiveKind kind, Eigen::Index state_dim) {
    return kind == ObjectiveKind::EndpointWithScore ? 2 * state_dim : state_dim;
}

// q(Y_t | X0, Y1) = N(mu_t, Sigma_t) with
//   mu_t    = (sigma2_hat * X0 + sigma2 * Y1) / (sigma2_hat + sigma2)
//   Sigma_t = sigma2 * sigma2_hat / (sigma2_hat + sigma2) * I
inline BridgePosterior posterior_given_endpoints(const NoiseSchedule& s, const EndpointPair& pair, double t) {
    if (!s.is_sb()) throw std::domain_error("posterior_given_endpoints: needs an sb schedule");
    const double s2 = s.sigma2_at(t);
    const double s2h = s.sigma2_hat_at(t);
    const double denom = s2 + s2h;
    if (denom <= 0.0) return {pair.x0, 0.0};  // degenerate beta == 0 schedule
    return {(s2h * pair.x0 + s2 * pair.y1) / denom, s2 * s2h / denom};
}

inline BridgeSample sample_bridge_point(const BridgePosterior& post, const Vec& noise, double t) {
    require(noise.size() == post.mean.size(), "sample_bridge_point: noise dimension mismatch");
    return {post.mean + std::sqrt(post.variance) * noise, noise, t};
}

// Deterministic interpolant of the bridge ODE; identical to the posterior mean.
inline Vec ode_point(const NoiseSchedule& s, const EndpointPair& pair, double t) {
    return posterior_given_endpoints(s, pair, t).mean;
}

// ODE drift v_t = (beta_t / sigma_t^2) (y_t - x0); singular at sigma_t^2 = 0,
// callers clamp t >= t_min (default 1e-5).
inline constexpr double kVelocityTMin = 1e-5;

inline Vec velocity(const NoiseSchedule& s, const Vec& x0, const Vec& y_t, double t) {
    require(x0.size() == y_t.size(), "velocity: dimension mismatch");
    const double s2 = s.sigma2_at(t);
    if (s2 <= 0.0) throw std::domain_error("velocity: sigma_t^2 = 0 at t = " + std::to_string(t));
    return (s.beta_at(t) / s2) * (y_t - x0);
}

// Backward transition p(Y_{t_n} | x0_hat, Y_{t_next}) for t_n < t_next, with
// alpha2 = int_{t_n}^{t_next} beta and sigma2 = sigma2(t_n):
//   mean = (alpha2 * x0_hat + sigma2 * y_next) / (alpha2 + sigma2)
//   var  = alpha2 * sigma2 / (alpha2 + sigma2)
inline BridgePosterior transition_posterior(const NoiseSchedule& s, const Vec& x0_hat, const Vec& y_next,
                                            double t_n, double t_next) {
    if (!(t_n < t_next)) throw std::domain_error("transition_posterior: requires t_n < t_next");
    require(x0_hat.size() == y_next.size(), "transition_posterior: dimension mismatch");
    const double a2 = s.alpha2_between(t_n, t_next);
    const double s2 = s.sigma2_at(t_n);
    const double denom = a2 + s2;
    if (denom <= 0.0) return {x0_hat, 0.0};
    return {(a2 * x0_hat + s2 * y_next) / denom, a2 * s2 / denom};
}

// Regression targets (a)-(d): endpoint X0, bridge length Y1-X0, posterior
// length Y_t-X0, endpoint with score [X0, eps].
inline Vec objective_target(ObjectiveKind kind, const BridgeSample& sample, const EndpointPair& pair) {
    switch (kind) {
        case ObjectiveKind::Endpoint: return pair.x0;
        case ObjectiveKind::BridgeLength: return pair.y1 - pair.x0;
        case ObjectiveKind::PosteriorLength: return sample.y_t - pair.x0;
        case ObjectiveKind::EndpointWithScore: {
            require(sample.epsilon.size() == pair.x0.size(), "objective_target: sample carries no epsilon");
            Vec out(2 * pair.x0.size());
            out << pair.x0, sample.epsilon;
            return out;
        }
    }
    throw std::invalid_argument("objective_target: bad kind");
}

// Algebraic inverse of objective_target; the epsilon half of (d) is a
// training-time auxiliary and is dropped here.
inline Vec endpoint_from_prediction(ObjectiveKind kind, const Vec& pred, const Vec& y_t, const Vec& y1) {
    switch (kind) {
        case ObjectiveKind::Endpoint:
            require(pred.size() == y1.size(), "endpoint_from_prediction: width mismatch");
            return pred;
        case ObjectiveKind::BridgeLength:
            require(pred.size() == y1.size(), "endpoint_from_prediction: width mismatch");
            return y1 - pred;
        case ObjectiveKind::PosteriorLength:
            require(pred.size() == y_t.size(), "endpoint_from_prediction: width mismatch");
            return y_t - pred;
        case ObjectiveKind::EndpointWithScore:
            require(pred.size() == 2 * y1.size(), "endpoint_from_prediction: width mismatch");
            return pred.head(y1.size());
    }
    throw std::invalid_argument("endpoint_from_prediction: bad kind");
}

} // namespace bridgekit
