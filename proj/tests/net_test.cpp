#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "bridgekit/net.hpp"
#include "bridgekit/rng.hpp"

using namespace bridgekit;

namespace {

// randomize every tensor, including the zero-initialized head and film maps,
// so gradient probes see generic weights
Regressor random_net(const RegressorConfig& cfg, std::uint64_t seed) {
    Regressor net = Regressor::init(cfg, seed);
    RandomStream rng(substream_seed(seed, 0xff));
    net.visit_tensors([&](double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) p[i] += 0.1 * rng.normal();
    });
    return net;
}

// worst relative error of backward() against central finite differences of
// the probe functional g(theta) = probe . forward(theta)
double gradient_check(Regressor& net, const Vec& y, const std::optional<Vec>& c, double t, RandomStream& rng,
                      double h = 1e-5) {
    const Vec probe = rng.normal_vec(net.out_dim());
    ForwardCache cache;
    net.forward(y, c, t, &cache);
    Regressor grads = Regressor::like(net);
    net.backward(cache, probe, grads);

    std::vector<std::pair<double*, std::size_t>> pt, gt;
    net.visit_tensors([&](double* p, std::size_t n) { pt.push_back({p, n}); });
    grads.visit_tensors([&](double* p, std::size_t n) { gt.push_back({p, n}); });
    // relative error floored at 1e-3 of the gradient scale: components near
    // zero sit below the finite-difference noise floor for any exact gradient
    double gscale = 0.0;
    grads.visit_tensors([&](double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) gscale = std::max(gscale, std::abs(p[i]));
    });
    const double floor = 1e-3 * gscale;
    double worst = 0.0;
    for (std::size_t k = 0; k < pt.size(); ++k) {
        auto [p, n] = pt[k];
        for (std::size_t i = 0; i < n; ++i) {
            const double keep = p[i];
            p[i] = keep + h;
            const double fp = probe.dot(net.forward(y, c, t));
            p[i] = keep - h;
            const double fm = probe.dot(net.forward(y, c, t));
            p[i] = keep;
            const double num = (fp - fm) / (2.0 * h);
            const double ana = gt[k].first[i];
            worst = std::max(worst, std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), floor}));
        }
    }
    return worst;
}

} // namespace

TEST(EmbedTime, Basics) {
    const Vec e0 = embed_time(0.0, 8);
    for (int k = 0; k < 4; ++k) {
        EXPECT_EQ(e0[2 * k], 0.0);
        EXPECT_EQ(e0[2 * k + 1], 1.0);
    }
    EXPECT_EQ(embed_time(0.37, 16), embed_time(0.37, 16));
    EXPECT_THROW(embed_time(0.5, 7), std::invalid_argument);
}

TEST(EmbedTime, DistinctTimesSeparate) {
    // any two grid times differ in some component by more than 1e-6
    const auto grid = [] {
        std::vector<double> g;
        for (int i = 1; i < 100; ++i) g.push_back(i / 100.0);
        return g;
    }();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t j = i + 1; j < grid.size(); ++j) {
            const Vec d = embed_time(grid[i], 16) - embed_time(grid[j], 16);
            EXPECT_GT(d.cwiseAbs().maxCoeff(), 1e-6) << grid[i] << " vs " << grid[j];
        }
    }
}

TEST(Film, IdentityAndOffsets) {
    RandomStream rng(3);
    const Vec x = rng.normal_vec(5);
    EXPECT_EQ(film_modulate(x, Vec::Zero(5), Vec::Zero(5)), x);
    const Vec b = rng.normal_vec(5);
    EXPECT_EQ(film_modulate(Vec::Zero(5), Vec::Zero(5), b), b);
    // d(output)/d(a_i) at fixed x is x_i
    const Vec a = rng.normal_vec(5);
    const double h = 1e-7;
    Vec ap = a;
    ap[2] += h;
    Vec am = a;
    am[2] -= h;
    const double fd = (film_modulate(x, ap, b)[2] - film_modulate(x, am, b)[2]) / (2.0 * h);
    EXPECT_NEAR(fd, x[2], 1e-6);
    EXPECT_THROW(film_modulate(x, Vec::Zero(4), b), std::invalid_argument);
}

TEST(SimpleGate, Definition) {
    Vec x(4);
    x << 1, 2, 3, 4;
    const Vec g = simple_gate(x);
    ASSERT_EQ(g.size(), 2);
    EXPECT_EQ(g[0], 3.0);
    EXPECT_EQ(g[1], 8.0);
    Vec ones4(4);
    ones4 << 5, -2, 1, 1;
    EXPECT_EQ(simple_gate(ones4)[0], 5.0);
    Vec zhalf(4);
    zhalf << 1, 2, 0, 0;
    EXPECT_EQ(simple_gate(zhalf).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(simple_gate(Vec::Zero(5)), std::invalid_argument);
}

TEST(Regressor, ZeroInitHeadPredictsBias) {
    RegressorConfig cfg;
    cfg.state_dim = 2;
    cfg.hidden_dim = 16;
    cfg.depth = 2;
    cfg.emb_dim = 8;
    Regressor net = Regressor::init(cfg, 7);
    EXPECT_EQ(net.forward(Vec::Ones(2), std::nullopt, 0.3).cwiseAbs().maxCoeff(), 0.0);
    net.head.b << 0.5, -0.25;
    EXPECT_EQ(net.forward(Vec::Ones(2), std::nullopt, 0.3), net.head.b);
}

TEST(Regressor, ForwardDeterminism) {
    RegressorConfig cfg;
    cfg.state_dim = 3;
    cfg.cond_dim = 2;
    cfg.hidden_dim = 16;
    cfg.depth = 2;
    cfg.emb_dim = 8;
    Regressor net = random_net(cfg, 11);
    RandomStream rng(12);
    const Vec y = rng.normal_vec(3);
    const Vec c = rng.normal_vec(2);
    const Vec a = net.forward(y, c, 0.7);
    const Vec b = net.forward(y, c, 0.7);
    EXPECT_EQ(a, b);
}

TEST(Regressor, WidthValidation) {
    RegressorConfig cfg;
    cfg.state_dim = 3;
    cfg.cond_dim = 2;
    cfg.hidden_dim = 8;
    cfg.depth = 1;
    cfg.emb_dim = 4;
    Regressor net = Regressor::init(cfg, 1);
    EXPECT_THROW(net.forward(Vec::Zero(4), Vec(Vec::Zero(2)), 0.5), std::invalid_argument);
    EXPECT_THROW(net.forward(Vec::Zero(3), std::nullopt, 0.5), std::invalid_argument);
    EXPECT_THROW(net.forward(Vec::Zero(3), Vec(Vec::Zero(1)), 0.5), std::invalid_argument);
}

TEST(Regressor, GradientsMatchFiniteDifferences) {
    // the module's load-bearing test: width-8 depth-2, 20 random probes
    RegressorConfig cfg;
    cfg.state_dim = 3;
    cfg.cond_dim = 2;
    cfg.hidden_dim = 8;
    cfg.depth = 2;
    cfg.emb_dim = 8;
    double worst = 0.0;
    for (int probe = 0; probe < 20; ++probe) {
        Regressor net = random_net(cfg, 100 + static_cast<std::uint64_t>(probe));
        RandomStream rng(200 + static_cast<std::uint64_t>(probe));
        const Vec y = rng.normal_vec(3);
        const Vec c = rng.normal_vec(2);
        const double t = rng.uniform();
        worst = std::max(worst, gradient_check(net, y, c, t, rng));
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(Regressor, GradientsMatchFiniteDifferencesVariants) {
    {  // objective (d): doubled output width
        RegressorConfig cfg;
        cfg.state_dim = 2;
        cfg.hidden_dim = 8;
        cfg.depth = 2;
        cfg.emb_dim = 8;
        cfg.objective = ObjectiveKind::EndpointWithScore;
        Regressor net = random_net(cfg, 300);
        ASSERT_EQ(net.out_dim(), 4);
        RandomStream rng(301);
        EXPECT_LT(gradient_check(net, rng.normal_vec(2), std::nullopt, 0.3, rng), 1e-5);
    }
    {  // double forward: gradient flows through both passes
        RegressorConfig cfg;
        cfg.state_dim = 2;
        cfg.hidden_dim = 8;
        cfg.depth = 2;
        cfg.emb_dim = 8;
        cfg.double_forward = true;
        Regressor net = random_net(cfg, 310);
        RandomStream rng(311);
        EXPECT_LT(gradient_check(net, rng.normal_vec(2), std::nullopt, 0.6, rng), 1e-5);
    }
    {  // channel scaling disabled
        RegressorConfig cfg;
        cfg.state_dim = 2;
        cfg.hidden_dim = 8;
        cfg.depth = 1;
        cfg.emb_dim = 8;
        cfg.channel_scale = false;
        Regressor net = random_net(cfg, 320);
        RandomStream rng(321);
        EXPECT_LT(gradient_check(net, rng.normal_vec(2), std::nullopt, 0.1, rng), 1e-5);
    }
}

TEST(Regressor, InputGradientMatchesFiniteDifferences) {
    RegressorConfig cfg;
    cfg.state_dim = 3;
    cfg.hidden_dim = 8;
    cfg.depth = 2;
    cfg.emb_dim = 8;
    Regressor net = random_net(cfg, 400);
    RandomStream rng(401);
    const Vec y = rng.normal_vec(3);
    const Vec probe = rng.normal_vec(net.out_dim());
    ForwardCache cache;
    net.forward(y, std::nullopt, 0.55, &cache);
    Regressor grads = Regressor::like(net);
    const Vec dy = net.backward(cache, probe, grads);
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i) {
        Vec yp = y, ym = y;
        yp[i] += h;
        ym[i] -= h;
        const double num =
            (probe.dot(net.forward(yp, std::nullopt, 0.55)) - probe.dot(net.forward(ym, std::nullopt, 0.55))) /
            (2.0 * h);
        EXPECT_NEAR(dy[i], num, 1e-6 * std::max(1.0, std::abs(num)));
    }
}

TEST(Regressor, ZeroGradOutGivesZeroGradients) {
    RegressorConfig cfg;
    cfg.state_dim = 2;
    cfg.hidden_dim = 8;
    cfg.depth = 1;
    cfg.emb_dim = 4;
    Regressor net = random_net(cfg, 500);
    ForwardCache cache;
    net.forward(Vec::Ones(2), std::nullopt, 0.5, &cache);
    Regressor grads = Regressor::like(net);
    net.backward(cache, Vec::Zero(net.out_dim()), grads);
    grads.visit_tensors([&](double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(p[i], 0.0);
    });
}

TEST(Regressor, AllGradientsFinite) {
    RegressorConfig cfg;
    cfg.state_dim = 2;
    cfg.hidden_dim = 16;
    cfg.depth = 3;
    cfg.emb_dim = 8;
    Regressor net = random_net(cfg, 600);
    RandomStream rng(601);
    ForwardCache cache;
    net.forward(rng.normal_vec(2), std::nullopt, 0.9, &cache);
    Regressor grads = Regressor::like(net);
    net.backward(cache, rng.normal_vec(net.out_dim()), grads);
    EXPECT_TRUE(grads.all_finite());
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
    RegressorConfig cfg;
    cfg.state_dim = 2;
    cfg.hidden_dim = 8;
    cfg.depth = 1;
    cfg.emb_dim = 4;
    Regressor net = random_net(cfg, 700);
    const Regressor before = net;
    AdamState st = AdamState::init(net);
    adam_step(net, Regressor::like(net), st, AdamConfig{});
    std::vector<std::pair<const double*, std::size_t>> a, b;
    net.visit_tensors([&](const double* p, std::size_t n) { a.push_back({p, n}); });
    before.visit_tensors([&](const double* p, std::size_t n) { b.push_back({p, n}); });
    for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t i = 0; i < a[k].second; ++i) EXPECT_EQ(a[k].first[i], b[k].first[i]);
}

TEST(Adam, ConstantGradientApproachesLr) {
    // single-parameter view: drive one scalar with g = 1 and watch |delta| -> lr
    RegressorConfig cfg;
    cfg.state_dim = 1;
    cfg.hidden_dim = 2;
    cfg.depth = 1;
    cfg.emb_dim = 2;
    Regressor net = Regressor::init(cfg, 1);
    AdamState st = AdamState::init(net);
    AdamConfig ac;
    ac.lr = 0.01;
    Regressor grads = Regressor::like(net);
    grads.head.b[0] = 1.0;
    double prev = net.head.b[0];
    double delta = 0.0;
    for (int i = 0; i < 200; ++i) {
        adam_step(net, grads, st, ac);
        delta = prev - net.head.b[0];
        prev = net.head.b[0];
    }
    EXPECT_NEAR(delta, ac.lr, 1e-5);
}

TEST(Adam, DeterministicAcrossRuns) {
    RegressorConfig cfg;
    cfg.state_dim = 2;
    cfg.hidden_dim = 8;
    cfg.depth = 1;
    cfg.emb_dim = 4;
    auto run = [&] {
        Regressor net = random_net(cfg, 800);
        AdamState st = AdamState::init(net);
        RandomStream rng(801);
        for (int i = 0; i < 5; ++i) {
            Regressor g = Regressor::like(net);
            g.visit_tensors([&](double* p, std::size_t n) {
                for (std::size_t j = 0; j < n; ++j) p[j] = rng.normal();
            });
            adam_step(net, g, st, AdamConfig{});
        }
        return net;
    };
    Regressor n1 = run(), n2 = run();
    std::vector<std::pair<const double*, std::size_t>> a, b;
    n1.visit_tensors([&](const double* p, std::size_t n) { a.push_back({p, n}); });
    n2.visit_tensors([&](const double* p, std::size_t n) { b.push_back({p, n}); });
    for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t i = 0; i < a[k].second; ++i) EXPECT_EQ(a[k].first[i], b[k].first[i]);
}

TEST(Adam, NonFiniteGradientAborts) {
    RegressorConfig cfg;
    cfg.state_dim = 1;
    cfg.hidden_dim = 2;
    cfg.depth = 1;
    cfg.emb_dim = 2;
    Regressor net = Regressor::init(cfg, 1);
    AdamState st = AdamState::init(net);
    Regressor g = Regressor::like(net);
    g.head.b[0] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(adam_step(net, g, st, AdamConfig{}), std::runtime_error);
}

TEST(Checkpoint, RoundTripBitExact) {
    RegressorConfig cfg;
    cfg.state_dim = 3;
    cfg.cond_dim = 1;
    cfg.hidden_dim = 16;
    cfg.depth = 2;
    cfg.emb_dim = 8;
    cfg.objective = ObjectiveKind::BridgeLength;
    Regressor net = random_net(cfg, 900);
    AdamState st = AdamState::init(net);
    st.step = 42;
    RandomStream rng(901);
    st.m.visit_tensors([&](double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) p[i] = rng.normal();
    });

    const std::string path = (std::filesystem::temp_directory_path() / "bk_ckpt_test.bin").string();
    save_checkpoint(path, net, &st);
    EXPECT_EQ(peek_checkpoint_objective(path), ObjectiveKind::BridgeLength);

    AdamState st2;
    Regressor net2 = load_checkpoint(path, &st2);
    EXPECT_EQ(st2.step, 42);
    EXPECT_EQ(net2.cfg.hidden_dim, 16);

    const Vec y = rng.normal_vec(3);
    const Vec c = rng.normal_vec(1);
    EXPECT_EQ(net.forward(y, c, 0.123), net2.forward(y, c, 0.123));

    // serialized bytes are reproducible
    EXPECT_EQ(serialize_checkpoint(net, &st), serialize_checkpoint(net2, &st2));
    std::remove(path.c_str());
}

TEST(Checkpoint, CrcDetectsCorruption) {
    RegressorConfig cfg;
    cfg.state_dim = 2;
    cfg.hidden_dim = 4;
    cfg.depth = 1;
    cfg.emb_dim = 4;
    Regressor net = Regressor::init(cfg, 1);
    const std::string path = (std::filesystem::temp_directory_path() / "bk_ckpt_corrupt.bin").string();
    save_checkpoint(path, net);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(64);
        char byte = 0x5a;
        f.write(&byte, 1);
    }
    EXPECT_THROW(load_checkpoint(path), std::runtime_error);
    std::remove(path.c_str());
}

TEST(Regressor, BatchedPathMatchesPerSample) {
    RegressorConfig cfg;
    cfg.state_dim = 3;
    cfg.cond_dim = 2;
    cfg.hidden_dim = 16;
    cfg.depth = 2;
    cfg.emb_dim = 8;
    Regressor net = random_net(cfg, 970);
    RandomStream rng(971);
    const int batch = 5;
    Mat y(3, batch), c(2, batch), probe(net.out_dim(), batch);
    std::vector<double> ts;
    for (int j = 0; j < batch; ++j) {
        y.col(j) = rng.normal_vec(3);
        c.col(j) = rng.normal_vec(2);
        probe.col(j) = rng.normal_vec(net.out_dim());
        ts.push_back(rng.uniform());
    }
    BatchForwardCache bcache;
    const Mat out = net.forward_batch(y, &c, ts, &bcache);
    Regressor bgrads = Regressor::like(net);
    const Mat dy = net.backward_batch(bcache, probe, bgrads);

    Regressor sgrads = Regressor::like(net);
    for (int j = 0; j < batch; ++j) {
        ForwardCache cache;
        const Vec oj = net.forward(y.col(j), Vec(c.col(j)), ts[static_cast<std::size_t>(j)], &cache);
        EXPECT_LT((oj - out.col(j)).cwiseAbs().maxCoeff(), 1e-12) << "col " << j;
        const Vec dyj = net.backward(cache, probe.col(j), sgrads);
        EXPECT_LT((dyj - dy.col(j)).cwiseAbs().maxCoeff(), 1e-11) << "col " << j;
    }
    // summed per-sample gradients equal the batched gradients
    std::vector<std::pair<const double*, std::size_t>> bg, sg;
    bgrads.visit_tensors([&](const double* p, std::size_t n) { bg.push_back({p, n}); });
    sgrads.visit_tensors([&](const double* p, std::size_t n) { sg.push_back({p, n}); });
    for (std::size_t k = 0; k < bg.size(); ++k)
        for (std::size_t i = 0; i < bg[k].second; ++i)
            EXPECT_NEAR(bg[k].first[i], sg[k].first[i], 1e-11 * std::max(1.0, std::abs(sg[k].first[i])));
}

TEST(Regressor, BatchPermutationEquivariance) {
    RegressorConfig cfg;
    cfg.state_dim = 2;
    cfg.hidden_dim = 16;
    cfg.depth = 2;
    cfg.emb_dim = 8;
    Regressor net = random_net(cfg, 980);
    RandomStream rng(981);
    const int batch = 4;
    Mat y(2, batch);
    std::vector<double> ts;
    for (int j = 0; j < batch; ++j) {
        y.col(j) = rng.normal_vec(2);
        ts.push_back(rng.uniform());
    }
    BatchForwardCache c1, c2;
    const Mat out = net.forward_batch(y, nullptr, ts, &c1);
    Mat yp(2, batch);
    std::vector<double> tsp;
    for (int j = 0; j < batch; ++j) {
        yp.col(j) = y.col(batch - 1 - j);
        tsp.push_back(ts[static_cast<std::size_t>(batch - 1 - j)]);
    }
    const Mat outp = net.forward_batch(yp, nullptr, tsp, &c2);
    for (int j = 0; j < batch; ++j)
        EXPECT_LT((outp.col(j) - out.col(batch - 1 - j)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Regressor, DoubleForwardRequiresEndpointObjective) {
    RegressorConfig cfg;
    cfg.state_dim = 2;
    cfg.hidden_dim = 4;
    cfg.depth = 1;
    cfg.emb_dim = 4;
    cfg.double_forward = true;
    cfg.objective = ObjectiveKind::BridgeLength;
    EXPECT_THROW(Regressor::init(cfg, 1), std::invalid_argument);
}

TEST(Regressor, DoubleForwardFeedsOutputBack) {
    RegressorConfig cfg;
    cfg.state_dim = 2;
    cfg.hidden_dim = 8;
    cfg.depth = 1;
    cfg.emb_dim = 4;
    cfg.double_forward = true;
    Regressor net = random_net(cfg, 950);
    RegressorConfig single = cfg;
    single.double_forward = false;
    Regressor ref = net;
    ref.cfg = single;
    RandomStream rng(951);
    const Vec y = rng.normal_vec(2);
    const Vec once = ref.forward(y, std::nullopt, 0.4);
    const Vec twice = ref.forward(once, std::nullopt, 0.4);
    EXPECT_EQ(net.forward(y, std::nullopt, 0.4), twice);
}
