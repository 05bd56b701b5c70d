#include <gtest/gtest.h>

#include "bridgekit/analysis.hpp"
#include "bridgekit/problems.hpp"
#include "bridgekit/rng.hpp"

using namespace bridgekit;

namespace {

std::vector<CouplingSample> random_coupling(int n, int dim, std::uint64_t seed, double degrade = -1.0) {
    RandomStream rng(seed);
    std::vector<CouplingSample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Vec x0 = rng.normal_vec(dim);
        Vec y1 = degrade > 0.0 ? Vec(x0 + degrade * rng.normal_vec(dim)) : rng.normal_vec(dim);
        out.push_back({std::move(x0), std::move(y1)});
    }
    return out;
}

} // namespace

TEST(CurvatureNumeric, LinearInterpolantIsStraight) {
    const auto coupling = random_coupling(64, 2, 1);
    const Interpolant lin = [](const CouplingSample& cs, double t) { return Vec((1.0 - t) * cs.x0 + t * cs.y1); };
    const auto rep = curvature_numeric(lin, coupling, curvature_grid(32));
    EXPECT_LT(rep.mean_curvature, 1e-8);
}

TEST(CurvatureNumeric, ConstantBetaBridgeMeanIsStraight) {
    const auto coupling = random_coupling(64, 2, 2);
    const auto s = NoiseSchedule::sb_constant(0.9);
    const auto rep = curvature_numeric(sb_mean_interpolant(s), coupling, curvature_grid(32));
    EXPECT_LT(rep.mean_curvature, 1e-8);
}

TEST(CurvatureSbClosedForm, ConstantBetaIsExactlyZero) {
    const auto coupling = random_coupling(16, 2, 3);
    const auto s = NoiseSchedule::sb_constant(0.4);
    const auto rep = curvature_sb_closed_form(s, coupling, curvature_grid(64));
    EXPECT_EQ(rep.mean_curvature, 0.0);
}

TEST(CurvatureSbClosedForm, IdentityCouplingIsZero) {
    RandomStream rng(4);
    std::vector<CouplingSample> coupling;
    for (int i = 0; i < 16; ++i) {
        Vec x = rng.normal_vec(2);
        coupling.push_back({x, x});
    }
    const auto s = NoiseSchedule::sb_quadratic_flip(1e-4, 0.3);
    EXPECT_EQ(curvature_sb_closed_form(s, coupling, curvature_grid(32)).mean_curvature, 0.0);
}

TEST(CurvatureSbClosedForm, MatchesNumericOracle) {
    const auto coupling = random_coupling(256, 2, 5);
    const auto s = NoiseSchedule::sb_quadratic_flip(1e-4, 0.3);
    const auto grid = curvature_grid(128);
    const double closed = curvature_sb_closed_form(s, coupling, grid).mean_curvature;
    const double numeric = curvature_numeric(sb_mean_interpolant(s), coupling, grid).mean_curvature;
    EXPECT_NEAR(closed, numeric, 1e-4 * closed);
}

TEST(CurvatureSbClosedForm, PaperLiteralDisagreesWithOracle) {
    // the printed M_t is reported for comparison; on the constant-beta
    // schedule it fails the exact M == 1 identity, so the curvature is not 0
    const auto coupling = random_coupling(32, 2, 6);
    const auto s = NoiseSchedule::sb_constant(0.4);
    const double lit = curvature_sb_closed_form(s, coupling, curvature_grid(32), true).mean_curvature;
    EXPECT_GT(lit, 1e-4);
}

TEST(CurvatureVpClosedForm, MatchesNumericOracle) {
    // antithetic moment-exact noise slots so the two routes differ only by
    // finite-difference error, not sampling noise
    const auto coupling = vp_moment_coupling(128, 2, 7);
    const auto vp = NoiseSchedule::vp(19.9, 0.1);
    const auto grid = curvature_grid(128);
    const double closed = curvature_vp_closed_form(vp, coupling, grid).mean_curvature;
    const double numeric = curvature_numeric(vp_interpolant(vp), coupling, grid).mean_curvature;
    EXPECT_NEAR(closed, numeric, 1e-3 * closed);
}

TEST(CurvatureVpClosedForm, ZeroDataReducesToNoiseTerm) {
    std::vector<CouplingSample> coupling;
    RandomStream rng(8);
    for (int i = 0; i < 16; ++i) coupling.push_back({Vec::Zero(2), rng.normal_vec(2)});
    const auto vp = NoiseSchedule::vp(19.9, 0.1);
    const auto grid = curvature_grid(64);
    const auto rep = curvature_vp_closed_form(vp, coupling, grid);
    double expected = 0.0;
    for (double t : grid) {
        const double k = vp.vp_dsigma(t);
        expected += (1.0 + k) * (1.0 + k) * 2.0;
    }
    expected /= static_cast<double>(grid.size());
    EXPECT_NEAR(rep.mean_curvature, expected, 1e-12 * expected);
}

TEST(CurvatureVpClosedForm, RejectsClampViolationsAndWrongKind) {
    const auto vp = NoiseSchedule::vp(19.9, 0.1);
    const auto coupling = random_coupling(4, 2, 9);
    EXPECT_THROW(curvature_vp_closed_form(vp, coupling, {0.5, 1.0}), std::invalid_argument);
    EXPECT_THROW(curvature_vp_closed_form(NoiseSchedule::sb_constant(0.1), coupling, curvature_grid(8)),
                 std::domain_error);
}

TEST(Curvature, VpExceedsSbOnDegradedCoupling) {
    // the acceptance coupling: y1 = x0 + 0.5 z; ratio comfortably >= 5
    const auto sb_pairs = random_coupling(512, 2, 10, 0.5);
    const auto vp_pairs = random_coupling(512, 2, 11);
    const auto grid = curvature_grid(64);
    const double sb = curvature_numeric(sb_mean_interpolant(NoiseSchedule::sb_quadratic_flip(1e-4, 0.3)), sb_pairs,
                                        grid)
                          .mean_curvature;
    const double vp = curvature_numeric(vp_interpolant(NoiseSchedule::vp()), vp_pairs, grid).mean_curvature;
    EXPECT_GT(vp, 0.0);
    EXPECT_GE(vp / sb, 5.0);
}

TEST(EnergyDistance, IdenticalSetsNearZero) {
    ToySpec spec;
    spec.kind = ToyKind::SwissRoll;
    spec.seed = 12;
    const auto a = sample_swiss_roll(spec, 500);
    EXPECT_LE(std::max(energy_distance(a, a), 0.0), 1e-12);
}

TEST(EnergyDistance, TwoPointMassesClosedForm) {
    // point masses at distance D: ED = 2D
    std::vector<Vec> a(50, Vec::Zero(2));
    Vec far(2);
    far << 3.0, 4.0;  // distance 5
    std::vector<Vec> b(70, far);
    EXPECT_NEAR(energy_distance(a, b), 10.0, 1e-12);
}

TEST(EnergyDistance, SymmetricInArguments) {
    ToySpec sa, sb;
    sa.kind = ToyKind::SwissRoll;
    sa.seed = 13;
    sb.kind = ToyKind::Gauss8;
    sb.seed = 14;
    const auto a = sample_swiss_roll(sa, 200);
    const auto b = sample_gauss8(sb, 300);
    // symmetric up to floating summation order
    EXPECT_NEAR(energy_distance(a, b), energy_distance(b, a), 1e-12);
    EXPECT_GT(energy_distance(a, b), 0.1);  // clearly different distributions
}

TEST(EnergyDistance, SameDistributionCalibration) {
    // two independent 2000-point swiss-roll draws: well below 0.01
    ToySpec s1, s2;
    s1.kind = s2.kind = ToyKind::SwissRoll;
    s1.seed = 15;
    s2.seed = 16;
    const double ed = energy_distance(sample_swiss_roll(s1, 2000), sample_swiss_roll(s2, 2000));
    EXPECT_LT(std::abs(ed), 0.01);
}

TEST(TransportCost, OracleOnCoupledDataEqualizesCosts) {
    RandomStream rng(17);
    std::vector<EndpointPair> pairs;
    for (int i = 0; i < 32; ++i) {
        Vec x0 = rng.normal_vec(2);
        pairs.emplace_back(x0, Vec(x0 + 0.3 * rng.normal_vec(2)));
    }
    const auto rep = transport_cost_check([](const EndpointPair& p) { return p.x0; }, pairs);
    EXPECT_DOUBLE_EQ(rep.cost_generated, rep.cost_independent);
    EXPECT_DOUBLE_EQ(rep.ratio, 1.0);
}

TEST(TransportCost, IdentityProblemZeroCosts) {
    RandomStream rng(18);
    std::vector<EndpointPair> pairs;
    for (int i = 0; i < 8; ++i) {
        Vec x0 = rng.normal_vec(2);
        pairs.emplace_back(x0, x0);
    }
    const auto rep = transport_cost_check([](const EndpointPair& p) { return p.y1; }, pairs);
    EXPECT_EQ(rep.cost_generated, 0.0);
    EXPECT_EQ(rep.cost_independent, 0.0);
}

TEST(FiniteDiffCheck, QuadraticIsExact) {
    Mat q(3, 3);
    q << 2, 0.5, 0, 0.5, 1, 0.3, 0, 0.3, 1.5;
    const auto f = [&q](const Vec& x) { return 0.5 * x.dot(q * x); };
    RandomStream rng(19);
    const Vec x = rng.normal_vec(3);
    const Vec grad = q * x;
    EXPECT_LT(finite_diff_check(f, grad, x, 1e-4), 1e-10);
}

TEST(FiniteDiffCheck, SineAtOne) {
    const auto f = [](const Vec& x) { return std::sin(x[0]); };
    const Vec x = Vec::Constant(1, 1.0);
    const Vec grad = Vec::Constant(1, std::cos(1.0));
    EXPECT_LT(finite_diff_check(f, grad, x, 1e-5), 1e-9);
}

TEST(FiniteDiffCheck, DetectsWrongGradientAndUnderflow) {
    const auto f = [](const Vec& x) { return x.squaredNorm(); };
    const Vec x = Vec::Ones(2);
    EXPECT_GT(finite_diff_check(f, Vec::Zero(2), x, 1e-5), 0.5);
    EXPECT_THROW(finite_diff_check(f, Vec(2.0 * x), x, 1e-320), std::runtime_error);
}
