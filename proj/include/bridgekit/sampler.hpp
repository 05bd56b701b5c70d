#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "bridgekit/bridge.hpp"
#include "bridgekit/net.hpp"
#include "bridgekit/problems.hpp"
#include "bridgekit/rng.hpp"

namespace bridgekit {

enum class SamplerMethod { EulerSde, Ode, Heun, EulerSdeGuided };

inline const char* to_string(SamplerMethod m) {
    switch (m) {
        case SamplerMethod::EulerSde: return "euler-sde";
        case SamplerMethod::Ode: return "ode";
        case SamplerMethod::Heun: return "heun";
        case SamplerMethod::EulerSdeGuided: return "euler-sde-guided";
    }
    return "?";
}

inline SamplerMethod sampler_method_from_string(const std::string& s) {
    if (s == "euler-sde") return SamplerMethod::EulerSde;
    if (s == "ode") return SamplerMethod::Ode;
    if (s == "heun") return SamplerMethod::Heun;
    if (s == "euler-sde-guided") return SamplerMethod::EulerSdeGuided;
    throw std::invalid_argument("unknown sampler method: " + s);
}

struct SamplerConfig {
    SamplerMethod method = SamplerMethod::EulerSde;
    int n_steps = 5;  // paper defaults: 5-step Euler SDE, 1-step ODE
    double psi = 0.0;
    std::uint64_t seed = 0;
    bool record_trajectory = false;

    static SamplerConfig defaults(SamplerMethod m) {
        SamplerConfig c;
        c.method = m;
        c.n_steps = m == SamplerMethod::Ode ? 1 : 5;
        if (m == SamplerMethod::EulerSdeGuided) c.psi = 0.5;
        return c;
    }

    void validate() const {
        require(n_steps >= 1, "SamplerConfig: n_steps >= 1");
        require(psi >= 0.0, "SamplerConfig: psi >= 0");
    }
};

// t strictly decreasing from 1 to 0; first state is the provided Y1.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> predicted_endpoints;  // one per transition
    bool guidance_residual_warning = false;
};

using EndpointPredictor = std::function<Vec(const Vec& y_t, const std::optional<Vec>& c, double t)>;

// Wraps a trained regressor into a predictor via the objective's endpoint
// recovery algebra; y1 is the chain's start point (bridge-length objective
// needs it).
inline EndpointPredictor net_endpoint_predictor(const Regressor& net, Vec y1) {
    return [&net, y1 = std::move(y1)](const Vec& y_t, const std::optional<Vec>& c, double t) {
        const Vec pred = net.forward(y_t, c, t);
        return endpoint_from_prediction(net.cfg.objective, pred, y_t, y1);
    };
}

namespace detail {

inline void check_state(const Vec& y, int step) {
    if (!y.allFinite())
        throw std::runtime_error("sampler diverged: non-finite state at step " + std::to_string(step));
}

inline void record(Trajectory& tr, bool enabled, double t, const Vec& y) {
    if (!enabled) return;
    tr.times.push_back(t);
    tr.states.push_back(y);
}

// substreams: purpose 0 = posterior noise, purpose 1 = Heun probe noise;
// keeping them separate makes Euler and Heun consume identical posterior
// draws under the same seed
inline RandomStream noise_stream(std::uint64_t seed, int step, std::uint64_t purpose) {
    return RandomStream(substream_seed(seed, 0x5a00u + purpose, static_cast<std::uint64_t>(step)));
}

} // namespace detail

// Euler posterior sampling: iterate the backward transition over
// linspace(1, 0, n_steps + 1), predicting the endpoint at the current state
// and drawing Y at the next node. An optional hook adjusts the predicted
// endpoint before the transition (guided sampling plugs in there).
inline std::pair<Vec, Trajectory> sample_sde_hooked(
    const SamplerConfig& cfg, const EndpointPredictor& predict, const NoiseSchedule& sched, const Vec& y1,
    const std::optional<Vec>& c, const std::function<Vec(const Vec&, Trajectory&, int)>& adjust) {
    cfg.validate();
    require(y1.allFinite(), "sample: y1 must be finite");
    Trajectory tr;
    const bool rec = cfg.record_trajectory;
    Vec y = y1;
    double t_cur = 1.0;
    detail::record(tr, rec, t_cur, y);
    for (int k = 1; k <= cfg.n_steps; ++k) {
        const double t_next = static_cast<double>(cfg.n_steps - k) / cfg.n_steps;
        Vec x0_hat = predict(y, c, t_cur);
        if (adjust) x0_hat = adjust(x0_hat, tr, k);
        if (rec) tr.predicted_endpoints.push_back(x0_hat);
        const BridgePosterior post = transition_posterior(sched, x0_hat, y, t_next, t_cur);
        if (post.variance > 0.0) {
            RandomStream rng = detail::noise_stream(cfg.seed, k, 0);
            y = post.mean + std::sqrt(post.variance) * rng.normal_vec(y.size());
        } else {
            y = post.mean;  // t = 0 has zero posterior variance: deterministic final step
        }
        detail::check_state(y, k);
        t_cur = t_next;
        detail::record(tr, rec, t_cur, y);
    }
    return {y, std::move(tr)};
}

inline std::pair<Vec, Trajectory> sample_sde(const SamplerConfig& cfg, const EndpointPredictor& predict,
                                             const NoiseSchedule& sched, const Vec& y1,
                                             const std::optional<Vec>& c = std::nullopt) {
    return sample_sde_hooked(cfg, predict, sched, y1, c, nullptr);
}

// Deterministic sampling on the analytic interpolant: predict the endpoint,
// then reinterpolate the current state to the next node. With
// r = sigma2(t')/sigma2(t) this is Y_{t'} = r Y_t + (1 - r) X0_hat, which is
// exactly the interpolant through (X0_hat, Y1_eff) where Y1_eff anchors the
// current state at time t.
inline std::pair<Vec, Trajectory> sample_ode(const SamplerConfig& cfg, const EndpointPredictor& predict,
                                             const NoiseSchedule& sched, const Vec& y1,
                                             const std::optional<Vec>& c = std::nullopt) {
    cfg.validate();
    require(y1.allFinite(), "sample: y1 must be finite");
    Trajectory tr;
    const bool rec = cfg.record_trajectory;
    Vec y = y1;
    double t_cur = 1.0;
    detail::record(tr, rec, t_cur, y);
    for (int k = 1; k <= cfg.n_steps; ++k) {
        const double t_next = static_cast<double>(cfg.n_steps - k) / cfg.n_steps;
        const Vec x0_hat = predict(y, c, t_cur);
        if (rec) tr.predicted_endpoints.push_back(x0_hat);
        const double s2_cur = sched.sigma2_at(t_cur);
        const double r = s2_cur > 0.0 ? sched.sigma2_at(t_next) / s2_cur : 0.0;
        y = r * y + (1.0 - r) * x0_hat;
        detail::check_state(y, k);
        t_cur = t_next;
        detail::record(tr, rec, t_cur, y);
    }
    return {y, std::move(tr)};
}

// Two-stage Heun refinement: predict, probe the forward posterior at the
// temporary time t' = t + dt (anchored at the original Y1), re-predict, and
// posterior-sample with the averaged endpoint. The final step (t = 0) falls
// back to the single-prediction branch.
inline std::pair<Vec, Trajectory> sample_heun(const SamplerConfig& cfg, const EndpointPredictor& predict,
                                              const NoiseSchedule& sched, const Vec& y1,
                                              const std::optional<Vec>& c = std::nullopt) {
    cfg.validate();
    require(y1.allFinite(), "sample: y1 must be finite");
    Trajectory tr;
    const bool rec = cfg.record_trajectory;
    const double dt = 1.0 / cfg.n_steps;
    Vec y = y1;
    double t_cur = 1.0;
    detail::record(tr, rec, t_cur, y);
    for (int k = 1; k <= cfg.n_steps; ++k) {
        const double t_next = static_cast<double>(cfg.n_steps - k) / cfg.n_steps;
        const Vec x0_first = predict(y, c, t_cur);
        Vec x0_hat = x0_first;
        if (t_next != 0.0) {
            const double t_tmp = t_next + dt;
            const BridgePosterior probe = posterior_given_endpoints(sched, EndpointPair(x0_first, y1), t_tmp);
            RandomStream prng = detail::noise_stream(cfg.seed, k, 1);
            const Vec y_tmp = probe.mean + std::sqrt(probe.variance) * prng.normal_vec(y.size());
            const Vec x0_second = predict(y_tmp, c, t_tmp);
            x0_hat = 0.5 * (x0_first + x0_second);
        }
        if (rec) tr.predicted_endpoints.push_back(x0_hat);
        const BridgePosterior post = transition_posterior(sched, x0_hat, y, t_next, t_cur);
        if (post.variance > 0.0) {
            RandomStream rng = detail::noise_stream(cfg.seed, k, 0);
            y = post.mean + std::sqrt(post.variance) * rng.normal_vec(y.size());
        } else {
            y = post.mean;
        }
        detail::check_state(y, k);
        t_cur = t_next;
        detail::record(tr, rec, t_cur, y);
    }
    return {y, std::move(tr)};
}

// Gradient-constrained Euler sampling: each predicted endpoint is corrected by
// the analytic gradient of |A1 x - y1|^2 + |A2 x - c|^2 (factors of 2 from
// differentiating the squared norms kept explicit) before posterior sampling.
inline std::pair<Vec, Trajectory> sample_guided(const SamplerConfig& cfg, const EndpointPredictor& predict,
                                                const NoiseSchedule& sched, const Vec& y1,
                                                const std::optional<Vec>& c, const LinearOperator& a1,
                                                const std::optional<LinearOperator>& a2 = std::nullopt) {
    require(a1.in_dim() == y1.size() && a1.out_dim() == y1.size(), "sample_guided: A1 shape mismatch");
    if (a2) {
        require(c.has_value(), "sample_guided: A2 supplied without a condition");
        require(a2->in_dim() == y1.size() && a2->out_dim() == c->size(), "sample_guided: A2 shape mismatch");
    }
    double first_residual = -1.0;
    auto adjust = [&](const Vec& x0_hat, Trajectory& tr, int /*step*/) {
        const Vec r1 = a1.apply(x0_hat) - y1;
        Vec grad = 2.0 * a1.adjoint(r1);
        if (a2) grad += 2.0 * a2->adjoint(a2->apply(x0_hat) - *c);
        const double res = r1.norm();
        if (first_residual < 0.0)
            first_residual = res;
        else if (res > 10.0 * first_residual)
            tr.guidance_residual_warning = true;
        return Vec(x0_hat - cfg.psi * grad);
    };
    return sample_sde_hooked(cfg, predict, sched, y1, c, adjust);
}

inline std::pair<Vec, Trajectory> run_sampler(const SamplerConfig& cfg, const EndpointPredictor& predict,
                                              const NoiseSchedule& sched, const Vec& y1,
                                              const std::optional<Vec>& c = std::nullopt,
                                              const std::optional<LinearOperator>& a1 = std::nullopt,
                                              const std::optional<LinearOperator>& a2 = std::nullopt) {
    switch (cfg.method) {
        case SamplerMethod::EulerSde: return sample_sde(cfg, predict, sched, y1, c);
        case SamplerMethod::Ode: return sample_ode(cfg, predict, sched, y1, c);
        case SamplerMethod::Heun: return sample_heun(cfg, predict, sched, y1, c);
        case SamplerMethod::EulerSdeGuided:
            require(a1.has_value(), "guided sampler requires operators");
            return sample_guided(cfg, predict, sched, y1, c, *a1, a2);
    }
    throw std::invalid_argument("run_sampler: bad method");
}

} // namespace bridgekit
