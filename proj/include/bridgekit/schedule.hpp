#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bridgekit/common.hpp"

namespace bridgekit {

enum class ScheduleKind { SbQuadraticFlip, SbConstant, Vp, SubVp, Ve };

inline const char* to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::SbQuadraticFlip: return "sb-quadratic-flip";
        case ScheduleKind::SbConstant: return "sb-constant";
        case ScheduleKind::Vp: return "vp";
        case ScheduleKind::SubVp: return "sub-vp";
        case ScheduleKind::Ve: return "ve";
    }
    return "?";
}

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "sb-quadratic-flip") return ScheduleKind::SbQuadraticFlip;
    if (s == "sb-constant") return ScheduleKind::SbConstant;
    if (s == "vp") return ScheduleKind::Vp;
    if (s == "sub-vp") return ScheduleKind::SubVp;
    if (s == "ve") return ScheduleKind::Ve;
    throw std::invalid_argument("unknown schedule kind: " + s);
}

// Diffusion-rate curve beta_t with closed-form integrals.
//
// The sb-quadratic-flip curve rises as a quadratic on [0, 1/2] and mirrors it
// on (1/2, 1]:
//   beta_t = ((sqrt(beta_half) - sqrt(beta_0)) * 2t + sqrt(beta_0))^2
// so that beta(1/2) = beta_half exactly. The printed-form variant without the
// 2t rescaling (which does not attain beta_half at the midpoint) is available
// behind `literal_beta` for comparison.
//
// sigma2 = int_0^t beta, sigma2_hat = int_t^1 beta; both are exact piecewise
// cubics, so sigma2 + sigma2_hat == total_variance holds to roundoff.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::SbQuadraticFlip;

    // sb kinds
    double beta0 = 1e-4;
    double beta_half = 0.3;
    bool literal_beta = false;

    // vp / sub-vp
    double a = 19.9;
    double b = 0.1;

    // ve
    double sigma_min = 0.01;
    double ratio_r = 100.0;

    double total_variance = 0.0;  // T = int_0^1 beta (sb kinds)

    static NoiseSchedule sb_quadratic_flip(double beta0, double beta_half, bool literal = false) {
        require(beta0 >= 0.0 && beta_half >= 0.0, "beta rates must be nonnegative");
        NoiseSchedule s;
        s.kind = ScheduleKind::SbQuadraticFlip;
        s.beta0 = beta0;
        s.beta_half = beta_half;
        s.literal_beta = literal;
        s.total_variance = 2.0 * s.sigma2_raw_half(0.5);
        return s;
    }

    static NoiseSchedule sb_constant(double beta) {
        require(beta >= 0.0, "beta must be nonnegative");
        NoiseSchedule s;
        s.kind = ScheduleKind::SbConstant;
        s.beta0 = beta;
        s.beta_half = beta;
        s.total_variance = beta;
        return s;
    }

    static NoiseSchedule vp(double a = 19.9, double b = 0.1) {
        NoiseSchedule s;
        s.kind = ScheduleKind::Vp;
        s.a = a;
        s.b = b;
        return s;
    }

    static NoiseSchedule sub_vp(double a = 19.9, double b = 0.1) {
        NoiseSchedule s = vp(a, b);
        s.kind = ScheduleKind::SubVp;
        return s;
    }

    static NoiseSchedule ve(double sigma_min = 0.01, double ratio_r = 100.0) {
        require(sigma_min > 0.0 && ratio_r > 1.0, "ve needs sigma_min > 0, r > 1");
        NoiseSchedule s;
        s.kind = ScheduleKind::Ve;
        s.sigma_min = sigma_min;
        s.ratio_r = ratio_r;
        return s;
    }

    bool is_sb() const {
        return kind == ScheduleKind::SbQuadraticFlip || kind == ScheduleKind::SbConstant;
    }

    // slope of sqrt(beta) on the rising half; 2(v-u) under the midpoint
    // convention, (v-u) for the paper-literal form
    double sqrt_slope() const {
        const double u = std::sqrt(beta0), v = std::sqrt(beta_half);
        return (literal_beta ? 1.0 : 2.0) * (v - u);
    }

    // int_0^t beta over the rising half only; valid for t in [0, 1/2]
    double sigma2_raw_half(double t) const {
        const double u = std::sqrt(beta0);
        const double c = sqrt_slope();
        if (c == 0.0) return beta0 * t;
        const double w = c * t + u;
        return (w * w * w - u * u * u) / (3.0 * c);
    }

private:
    void check_sb(const char* op) const {
        if (!is_sb()) throw std::domain_error(std::string(op) + ": schedule kind " + to_string(kind) + " unsupported");
    }

    static void check_t(double t) {
        if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("t out of [0,1]: " + std::to_string(t));
    }

public:
    double beta_at(double t) const {
        check_t(t);
        check_sb("beta_at");
        if (kind == ScheduleKind::SbConstant) return beta0;
        const double u = std::sqrt(beta0);
        const double c = sqrt_slope();
        const double s = t <= 0.5 ? t : 1.0 - t;
        const double w = c * s + u;
        return w * w;
    }

    double sigma2_at(double t) const {
        check_t(t);
        check_sb("sigma2_at");
        if (kind == ScheduleKind::SbConstant) return beta0 * t;
        if (t <= 0.5) return sigma2_raw_half(t);
        // mirrored branch: int_{1/2}^{t} beta(tau) dtau = int_{1-t}^{1/2} of the rising quadratic
        return sigma2_raw_half(0.5) + (sigma2_raw_half(0.5) - sigma2_raw_half(1.0 - t));
    }

    double sigma2_hat_at(double t) const { return total_variance - sigma2_at(t); }

    double alpha2_between(double t_lo, double t_hi) const {
        if (t_lo > t_hi) throw std::domain_error("alpha2_between: t_lo > t_hi");
        return sigma2_at(t_hi) - sigma2_at(t_lo);
    }

    // DPM baseline scale/spread pairs (alpha_t, sigma_t); data end at t = 1.
    std::pair<double, double> vp_alpha_sigma(double t) const {
        check_t(t);
        if (is_sb()) throw std::domain_error("vp_alpha_sigma: sb schedule has no (alpha, sigma) pair");
        if (kind == ScheduleKind::Ve) {
            const double s = sigma_min * std::sqrt(std::pow(ratio_r, 2.0 * (1.0 - t)) - 1.0);
            return {1.0, s};
        }
        const double alpha = std::exp(-0.25 * a * (1.0 - t) * (1.0 - t) - 0.5 * b * (1.0 - t));
        if (kind == ScheduleKind::SubVp) return {alpha, 1.0 - alpha * alpha};
        return {alpha, std::sqrt(1.0 - alpha * alpha)};
    }

    // d/dt alpha_t for the vp kind (exact differentiation)
    double vp_dalpha(double t) const {
        const double alpha = vp_alpha_sigma(t).first;
        return alpha * (a * (1.0 - t) + b) / 2.0;
    }

    // d/dt sigma_t for the vp kind; singular at t = 1
    double vp_dsigma(double t) const {
        const double alpha = vp_alpha_sigma(t).first;
        return -alpha / std::sqrt(1.0 - alpha * alpha) * vp_dalpha(t);
    }

    std::string id() const {
        if (kind == ScheduleKind::SbQuadraticFlip)
            return std::string(to_string(kind)) + "(" + std::to_string(beta0) + "," + std::to_string(beta_half) + ")";
        if (kind == ScheduleKind::SbConstant) return std::string(to_string(kind)) + "(" + std::to_string(beta0) + ")";
        if (kind == ScheduleKind::Ve)
            return std::string(to_string(kind)) + "(" + std::to_string(sigma_min) + "," + std::to_string(ratio_r) + ")";
        return std::string(to_string(kind)) + "(" + std::to_string(a) + "," + std::to_string(b) + ")";
    }
};

// Strictly increasing node sequence t_0 = 0 < ... < t_N = 1.
struct TimeGrid {
    std::vector<double> nodes;

    explicit TimeGrid(int n_steps) {
        require(n_steps >= 1, "TimeGrid needs n_steps >= 1");
        nodes.resize(static_cast<std::size_t>(n_steps) + 1);
        for (int i = 0; i <= n_steps; ++i) nodes[static_cast<std::size_t>(i)] = static_cast<double>(i) / n_steps;
        nodes.front() = 0.0;
        nodes.back() = 1.0;
    }

    int n_steps() const { return static_cast<int>(nodes.size()) - 1; }
};

} // namespace bridgekit
