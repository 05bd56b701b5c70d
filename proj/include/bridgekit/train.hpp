#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bridgekit/bridge.hpp"
#include "bridgekit/net.hpp"
#include "bridgekit/rng.hpp"
#include "bridgekit/schedule.hpp"

namespace bridgekit {

// Pull-based endpoint-pair source; pure given the stream, so workers can
// clone deterministic substreams.
using PairSource = std::function<EndpointPair(RandomStream&)>;

enum class BridgeMode { Sde, Ode };

struct TrainConfig {
    ObjectiveKind objective = ObjectiveKind::Endpoint;
    BridgeMode mode = BridgeMode::Sde;
    int steps = 2000;
    int batch = 32;
    AdamConfig adam;
    int train_grid = 1000;     // stratified-sampling grid (ablation mode)
    bool stratified = false;   // default: continuous t ~ U(0,1)
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // 0 = only on demand
    std::string checkpoint_path;

    void validate() const {
        require(steps > 0 && batch > 0, "TrainConfig: steps and batch must be positive");
        require(train_grid >= 2, "TrainConfig: train_grid must be >= 2");
        if (objective == ObjectiveKind::EndpointWithScore)
            require(mode == BridgeMode::Sde, "endpoint-with-score objective requires SDE bridge samples");
    }
};

inline double mse_loss(const Vec& pred, const Vec& target) {
    require(pred.size() == target.size(), "loss: width mismatch");
    return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

namespace detail {

// per-step noise/data substreams keyed by (seed, step); resuming at step k
// replays the identical stream sequence
inline RandomStream step_stream(std::uint64_t seed, std::int64_t step) {
    return RandomStream(substream_seed(seed, 0x7261u, static_cast<std::uint64_t>(step)));
}

} // namespace detail

// Algorithm: per step draw pairs and t, build bridge points (stochastic for
// SDE mode, the deterministic interpolant for ODE mode), regress the selected
// objective with MSE, take one Adam step. Returns the per-step loss history.
// `start_step` continues a run bit-exactly from a checkpointed state.
inline std::vector<double> train(const TrainConfig& cfg, const NoiseSchedule& sched, const PairSource& source,
                                 Regressor& net, AdamState& adam, std::int64_t start_step = 0) {
    cfg.validate();
    require(net.cfg.objective == cfg.objective, "train: net output objective mismatch");
    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(cfg.steps - start_step));

    Regressor grads = Regressor::like(net);
    const Eigen::Index state_dim = net.cfg.state_dim;
    const Eigen::Index cond_dim = net.cfg.cond_dim;
    const Eigen::Index out_dim = net.out_dim();

    for (std::int64_t step = start_step; step < cfg.steps; ++step) {
        RandomStream rng = detail::step_stream(cfg.seed, step);
        grads.visit_tensors([](double* p, std::size_t n) { std::fill(p, p + n, 0.0); });
        std::uint64_t inputs_hash = 0xcbf29ce484222325ull;

        Mat y_batch(state_dim, cfg.batch);
        Mat c_batch(cond_dim, cfg.batch);
        Mat target_batch(out_dim, cfg.batch);
        std::vector<double> ts(static_cast<std::size_t>(cfg.batch));
        for (int bi = 0; bi < cfg.batch; ++bi) {
            const EndpointPair pair = source(rng);
            double t = cfg.stratified ? static_cast<double>(rng.integer(static_cast<std::uint64_t>(cfg.train_grid) + 1)) /
                                            cfg.train_grid
                                      : rng.uniform();
            BridgeSample bs;
            if (cfg.mode == BridgeMode::Sde) {
                const BridgePosterior post = posterior_given_endpoints(sched, pair, t);
                bs = sample_bridge_point(post, rng.normal_vec(pair.x0.size()), t);
            } else {
                bs = BridgeSample{ode_point(sched, pair, t), Vec::Zero(pair.x0.size()), t};
            }
            if (cond_dim > 0) {
                require(pair.condition && pair.condition->size() == cond_dim, "train: condition width mismatch");
                c_batch.col(bi) = *pair.condition;
            }
            y_batch.col(bi) = bs.y_t;
            target_batch.col(bi) = objective_target(cfg.objective, bs, pair);
            ts[static_cast<std::size_t>(bi)] = t;
            inputs_hash = fnv1a(bs.y_t.data(), static_cast<std::size_t>(bs.y_t.size()) * sizeof(double), inputs_hash);
        }

        BatchForwardCache cache;
        const Mat pred = net.forward_batch(y_batch, cond_dim > 0 ? &c_batch : nullptr, ts, &cache);
        const Mat diff = pred - target_batch;
        const double loss = diff.squaredNorm() / static_cast<double>(out_dim * cfg.batch);
        if (!std::isfinite(loss)) {
            char msg[128];
            std::snprintf(msg, sizeof(msg), "train: non-finite loss at step %lld (inputs hash %016llx)",
                          static_cast<long long>(step), static_cast<unsigned long long>(inputs_hash));
            throw std::runtime_error(msg);
        }
        // d(mean loss)/dpred over the whole batch
        const Mat dpred = 2.0 / static_cast<double>(out_dim * cfg.batch) * diff;
        net.backward_batch(cache, dpred, grads);
        adam_step(net, grads, adam, cfg.adam);
        history.push_back(loss);

        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
            (step + 1) % cfg.checkpoint_every == 0 && step + 1 < cfg.steps) {
            save_checkpoint(cfg.checkpoint_path, net, &adam);
        }
    }
    return history;
}

} // namespace bridgekit
