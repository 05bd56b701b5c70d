#pragma once

#include <cmath>
#include <vector>

#include "bridgekit/common.hpp"
#include "bridgekit/rng.hpp"
#include "bridgekit/train.hpp"

namespace bridgekit {

enum class OperatorKind { Blur, Downsample, Identity };

// Linear degradation operator on a (height x width) grid, stored row-major.
// Blur is a separable zero-padded convolution (dims of size 1 are skipped);
// downsample is pure stride-s decimation, whose adjoint is zero-upsampling.
struct LinearOperator {
    OperatorKind kind = OperatorKind::Identity;
    int height = 1;
    int width = 1;
    std::vector<double> taps;  // blur only; odd length, centered
    int stride = 2;            // downsample only

    static LinearOperator identity(int height, int width) { return {OperatorKind::Identity, height, width, {}, 1}; }

    static LinearOperator blur(int height, int width, std::vector<double> taps) {
        require(taps.size() % 2 == 1, "blur taps must have odd length");
        return {OperatorKind::Blur, height, width, std::move(taps), 1};
    }

    static LinearOperator downsample(int height, int width, int stride) {
        require(stride >= 1 && height % stride == 0 && width % stride == 0,
                "downsample stride must divide the grid");
        return {OperatorKind::Downsample, height, width, {}, stride};
    }

    Eigen::Index in_dim() const { return static_cast<Eigen::Index>(height) * width; }

    Eigen::Index out_dim() const {
        if (kind == OperatorKind::Downsample) return static_cast<Eigen::Index>(height / stride) * (width / stride);
        return in_dim();
    }

    Vec apply(const Vec& x) const {
        require(x.size() == in_dim(), "operator apply: dimension mismatch");
        switch (kind) {
            case OperatorKind::Identity: return x;
            case OperatorKind::Blur: return blur_pass(x, false);
            case OperatorKind::Downsample: {
                Vec y(out_dim());
                const int oh = height / stride, ow = width / stride;
                for (int i = 0; i < oh; ++i)
                    for (int j = 0; j < ow; ++j) y[i * ow + j] = x[(i * stride) * width + j * stride];
                return y;
            }
        }
        throw std::invalid_argument("operator apply: bad kind");
    }

    Vec adjoint(const Vec& y) const {
        require(y.size() == out_dim(), "operator adjoint: dimension mismatch");
        switch (kind) {
            case OperatorKind::Identity: return y;
            case OperatorKind::Blur: return blur_pass(y, true);
            case OperatorKind::Downsample: {
                Vec x = Vec::Zero(in_dim());
                const int oh = height / stride, ow = width / stride;
                for (int i = 0; i < oh; ++i)
                    for (int j = 0; j < ow; ++j) x[(i * stride) * width + j * stride] = y[i * ow + j];
                return x;
            }
        }
        throw std::invalid_argument("operator adjoint: bad kind");
    }

private:
    // separable zero-padded convolution along rows then columns; the adjoint
    // is correlation (flipped taps), also zero-padded
    Vec blur_pass(const Vec& x, bool adjoint_mode) const {
        const int r = static_cast<int>(taps.size()) / 2;
        auto tap = [&](int k) { return adjoint_mode ? taps[static_cast<std::size_t>(2 * r - k)] : taps[static_cast<std::size_t>(k)]; };
        Vec cur = x;
        if (width > 1) {
            Vec next = Vec::Zero(cur.size());
            for (int i = 0; i < height; ++i)
                for (int j = 0; j < width; ++j) {
                    double acc = 0.0;
                    for (int k = 0; k <= 2 * r; ++k) {
                        const int jj = j + k - r;
                        if (jj >= 0 && jj < width) acc += tap(k) * cur[i * width + jj];
                    }
                    next[i * width + j] = acc;
                }
            cur = next;
        }
        if (height > 1) {
            Vec next = Vec::Zero(cur.size());
            for (int i = 0; i < height; ++i)
                for (int j = 0; j < width; ++j) {
                    double acc = 0.0;
                    for (int k = 0; k <= 2 * r; ++k) {
                        const int ii = i + k - r;
                        if (ii >= 0 && ii < height) acc += tap(k) * cur[ii * width + j];
                    }
                    next[i * width + j] = acc;
                }
            cur = next;
        }
        return cur;
    }
};

enum class ToyKind { Gauss8, SwissRoll };

struct ToySpec {
    ToyKind kind = ToyKind::Gauss8;
    double scale = 1.0;
    double noise = 0.1;  // component std (gauss8) or jitter (swiss roll)
    std::uint64_t seed = 0;
};

// Uniform mixture of 8 isotropic Gaussians on a radius-R circle at 45 degree
// spacing. Defaults R = 2, component std 0.1.
inline Vec sample_gauss8_point(RandomStream& rng, double radius = 2.0, double comp_std = 0.1) {
    const auto k = static_cast<double>(rng.integer(8));
    const double ang = k * (M_PI / 4.0);
    Vec p(2);
    p << radius * std::cos(ang) + comp_std * rng.normal(), radius * std::sin(ang) + comp_std * rng.normal();
    return p;
}

inline std::vector<Vec> sample_gauss8(const ToySpec& spec, int n) {
    require(n >= 0, "sample_gauss8: n must be nonnegative");
    RandomStream rng(substream_seed(spec.seed, 0x6738));
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(spec.scale * sample_gauss8_point(rng, 2.0, spec.noise));
    return out;
}

// theta uniform on [1.5 pi, 4.5 pi], r = theta, rescaled so the noiseless
// curve has unit RMS radius, plus isotropic jitter.
inline constexpr double kSwissThetaLo = 1.5 * M_PI;
inline constexpr double kSwissThetaHi = 4.5 * M_PI;

inline double swiss_roll_rms() {
    const double a = kSwissThetaLo, b = kSwissThetaHi;
    return std::sqrt((b * b * b - a * a * a) / (3.0 * (b - a)));
}

inline Vec sample_swiss_roll_point(RandomStream& rng, double jitter = 0.05) {
    const double th = rng.uniform(kSwissThetaLo, kSwissThetaHi);
    const double r = th / swiss_roll_rms();
    Vec p(2);
    p << r * std::cos(th) + jitter * rng.normal(), r * std::sin(th) + jitter * rng.normal();
    return p;
}

inline std::vector<Vec> sample_swiss_roll(const ToySpec& spec, int n) {
    require(n >= 0, "sample_swiss_roll: n must be nonnegative");
    RandomStream rng(substream_seed(spec.seed, 0x5772));
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(spec.scale * sample_swiss_roll_point(rng, spec.noise));
    return out;
}

// Unpaired toy coupling: X0 and Y1 drawn independently from their marginals.
inline PairSource make_toy_source(ToyKind x0_kind, ToyKind y1_kind, double x0_noise = -1.0, double y1_noise = -1.0) {
    auto draw = [](ToyKind k, RandomStream& rng, double noise) {
        if (k == ToyKind::Gauss8) return sample_gauss8_point(rng, 2.0, noise < 0 ? 0.1 : noise);
        return sample_swiss_roll_point(rng, noise < 0 ? 0.05 : noise);
    };
    return [=](RandomStream& rng) {
        Vec x0 = draw(x0_kind, rng, x0_noise);
        Vec y1 = draw(y1_kind, rng, y1_noise);
        return EndpointPair(std::move(x0), std::move(y1));
    };
}

// Procedural clean corpus: piecewise-constant images made of 1..3 random
// axis-aligned rectangles with intensities in [0, 1].
inline Vec sample_rect_image(RandomStream& rng, int height = 16, int width = 16) {
    Vec img = Vec::Zero(static_cast<Eigen::Index>(height) * width);
    const int n_rects = 1 + static_cast<int>(rng.integer(3));
    for (int r = 0; r < n_rects; ++r) {
        const int i0 = static_cast<int>(rng.integer(static_cast<std::uint64_t>(height - 1)));
        const int j0 = static_cast<int>(rng.integer(static_cast<std::uint64_t>(width - 1)));
        const int hh = 2 + static_cast<int>(rng.integer(static_cast<std::uint64_t>(height - i0 - 1)));
        const int ww = 2 + static_cast<int>(rng.integer(static_cast<std::uint64_t>(width - j0 - 1)));
        const double val = rng.uniform();
        for (int i = i0; i < std::min(height, i0 + hh); ++i)
            for (int j = j0; j < std::min(width, j0 + ww); ++j) img[i * width + j] = val;
    }
    return img;
}

using CleanSource = std::function<Vec(RandomStream&)>;

// Coupled inverse-problem pairs: X0 clean, Y1 = A1(X0) + sigma Z, and
// c = A2(X0) as the side-information condition when a second operator is given.
inline PairSource make_inverse_problem(CleanSource clean, LinearOperator a1, double noise_sigma,
                                       std::optional<LinearOperator> a2 = std::nullopt) {
    require(a1.out_dim() == a1.in_dim(), "make_inverse_problem: A1 must preserve the state dimension");
    return [clean = std::move(clean), a1 = std::move(a1), a2 = std::move(a2), noise_sigma](RandomStream& rng) {
        Vec x0 = clean(rng);
        Vec y1 = a1.apply(x0);
        if (noise_sigma > 0.0) y1 += noise_sigma * rng.normal_vec(y1.size());
        std::optional<Vec> c;
        if (a2) c = a2->apply(x0);
        return EndpointPair(std::move(x0), std::move(y1), std::move(c));
    };
}

} // namespace bridgekit
