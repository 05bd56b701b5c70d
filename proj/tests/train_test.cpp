#include <gtest/gtest.h>

#include <filesystem>

#include "bridgekit/problems.hpp"
#include "bridgekit/train.hpp"

using namespace bridgekit;

namespace {

const NoiseSchedule kSched = NoiseSchedule::sb_quadratic_flip(1e-4, 0.3);

PairSource identity_source() {
    return [](RandomStream& rng) {
        const Vec x = sample_swiss_roll_point(rng);
        return EndpointPair(x, x);
    };
}

RegressorConfig small_net_cfg(ObjectiveKind obj = ObjectiveKind::Endpoint) {
    RegressorConfig cfg;
    cfg.state_dim = 2;
    cfg.hidden_dim = 32;
    cfg.depth = 2;
    cfg.emb_dim = 16;
    cfg.objective = obj;
    return cfg;
}

} // namespace

TEST(Loss, MseBasics) {
    EXPECT_EQ(mse_loss(Vec::Ones(3), Vec::Ones(3)), 0.0);
    EXPECT_EQ(mse_loss(Vec::Ones(1), Vec::Zero(1)), 1.0);
    Vec a(3), b(3);
    a << 1, 2, 3;
    b << 0, 1, -1;
    Vec ap(3), bp(3);
    ap << 3, 1, 2;
    bp << -1, 0, 1;  // same permutation applied to both
    EXPECT_DOUBLE_EQ(mse_loss(a, b), mse_loss(ap, bp));
    EXPECT_THROW(mse_loss(Vec::Ones(2), Vec::Ones(3)), std::invalid_argument);
}

TEST(Train, IdentityProblemConverges) {
    // Y1 == X0 with ODE-mode bridge points: the net learns an identity-like
    // map; loss drops below 1e-4 within 500 steps
    TrainConfig cfg;
    cfg.objective = ObjectiveKind::Endpoint;
    cfg.mode = BridgeMode::Ode;
    cfg.steps = 500;
    cfg.batch = 32;
    cfg.adam.lr = 3e-3;
    cfg.seed = 0;
    Regressor net = Regressor::init(small_net_cfg(), cfg.seed);
    AdamState adam = AdamState::init(net);
    const auto losses = train(cfg, kSched, identity_source(), net, adam);
    ASSERT_EQ(losses.size(), 500u);
    double tail = 0.0;
    for (std::size_t i = losses.size() - 10; i < losses.size(); ++i) tail += losses[i];
    EXPECT_LT(tail / 10.0, 1e-4) << "final losses around " << losses.back();
}

TEST(Train, ZeroLearningRateLeavesParamsUnchanged) {
    TrainConfig cfg;
    cfg.steps = 20;
    cfg.batch = 4;
    cfg.adam.lr = 0.0;
    Regressor net = Regressor::init(small_net_cfg(), 3);
    const Regressor before = net;
    AdamState adam = AdamState::init(net);
    train(cfg, kSched, identity_source(), net, adam);
    std::vector<std::pair<const double*, std::size_t>> a, b;
    net.visit_tensors([&](const double* p, std::size_t n) { a.push_back({p, n}); });
    before.visit_tensors([&](const double* p, std::size_t n) { b.push_back({p, n}); });
    for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t i = 0; i < a[k].second; ++i) EXPECT_EQ(a[k].first[i], b[k].first[i]);
}

TEST(Train, FixedSeedGivesBitIdenticalLossHistory) {
    auto run = [] {
        TrainConfig cfg;
        cfg.steps = 40;
        cfg.batch = 8;
        cfg.seed = 17;
        Regressor net = Regressor::init(small_net_cfg(), cfg.seed);
        AdamState adam = AdamState::init(net);
        return train(cfg, kSched, make_toy_source(ToyKind::SwissRoll, ToyKind::Gauss8), net, adam);
    };
    const auto l1 = run(), l2 = run();
    ASSERT_EQ(l1.size(), l2.size());
    for (std::size_t i = 0; i < l1.size(); ++i) EXPECT_EQ(l1[i], l2[i]);
}

TEST(Train, CheckpointResumeIsBitIdentical) {
    const PairSource src = make_toy_source(ToyKind::SwissRoll, ToyKind::Gauss8);
    TrainConfig cfg;
    cfg.steps = 30;
    cfg.batch = 8;
    cfg.seed = 23;

    Regressor full = Regressor::init(small_net_cfg(), cfg.seed);
    AdamState full_adam = AdamState::init(full);
    const auto full_losses = train(cfg, kSched, src, full, full_adam);

    TrainConfig half = cfg;
    half.steps = 12;
    Regressor part = Regressor::init(small_net_cfg(), cfg.seed);
    AdamState part_adam = AdamState::init(part);
    train(half, kSched, src, part, part_adam);

    const std::string path = (std::filesystem::temp_directory_path() / "bk_resume.bin").string();
    save_checkpoint(path, part, &part_adam);
    AdamState resumed_adam;
    Regressor resumed = load_checkpoint(path, &resumed_adam);
    const auto tail = train(cfg, kSched, src, resumed, resumed_adam, resumed_adam.step);

    ASSERT_EQ(tail.size(), full_losses.size() - 12);
    for (std::size_t i = 0; i < tail.size(); ++i) EXPECT_EQ(tail[i], full_losses[i + 12]);
    EXPECT_EQ(serialize_checkpoint(full, &full_adam), serialize_checkpoint(resumed, &resumed_adam));
    std::remove(path.c_str());
}

TEST(Train, StratifiedModeDrawsGridTimes) {
    TrainConfig cfg;
    cfg.steps = 5;
    cfg.batch = 8;
    cfg.stratified = true;
    cfg.train_grid = 500;
    Regressor net = Regressor::init(small_net_cfg(), 1);
    AdamState adam = AdamState::init(net);
    EXPECT_NO_THROW(train(cfg, kSched, identity_source(), net, adam));
}

TEST(Train, ScoreObjectiveRequiresSdeMode) {
    TrainConfig cfg;
    cfg.objective = ObjectiveKind::EndpointWithScore;
    cfg.mode = BridgeMode::Ode;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg.mode = BridgeMode::Sde;
    EXPECT_NO_THROW(cfg.validate());
}

TEST(Train, ScoreObjectiveTrains) {
    TrainConfig cfg;
    cfg.objective = ObjectiveKind::EndpointWithScore;
    cfg.steps = 120;
    cfg.batch = 16;
    cfg.seed = 2;
    Regressor net = Regressor::init(small_net_cfg(ObjectiveKind::EndpointWithScore), 2);
    AdamState adam = AdamState::init(net);
    const auto losses = train(cfg, kSched, make_toy_source(ToyKind::SwissRoll, ToyKind::Gauss8), net, adam);
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 10; ++i) head += losses[static_cast<std::size_t>(i)];
    for (std::size_t i = losses.size() - 10; i < losses.size(); ++i) tail += losses[i];
    EXPECT_LT(tail, head);
}
