#pragma once

#include <array>
#include <cstring>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <zlib.h>

#include "bridgekit/bridge.hpp"
#include "bridgekit/common.hpp"
#include "bridgekit/rng.hpp"

namespace bridgekit {

// Interleaved sin/cos at geometrically spaced frequencies 1 .. freq_base.
inline Vec embed_time(double t, int dim, double freq_base = 1000.0) {
    require(dim > 0 && dim % 2 == 0, "embed_time: dim must be positive and even");
    const int half = dim / 2;
    Vec e(dim);
    for (int k = 0; k < half; ++k) {
        const double w = half > 1 ? std::pow(freq_base, static_cast<double>(k) / (half - 1)) : 1.0;
        e[2 * k] = std::sin(w * t);
        e[2 * k + 1] = std::cos(w * t);
    }
    return e;
}

struct Dense {
    Mat w;
    Vec b;
};

// Affine map t_emb -> (a, b) pairs for feature-wise modulation.
struct Film {
    Mat w;
    Vec b;
};

inline Vec film_modulate(const Vec& x, const Vec& a, const Vec& b) {
    require(x.size() == a.size() && x.size() == b.size(), "film_modulate: shape mismatch");
    return ((1.0 + a.array()) * x.array() + b.array()).matrix();
}

inline Vec film_modulate(const Vec& x, const Vec& t_emb, const Film& f) {
    require(f.w.cols() == t_emb.size() && f.w.rows() == 2 * x.size(), "film_modulate: shape mismatch");
    const Vec ab = f.w * t_emb + f.b;
    return film_modulate(x, ab.head(x.size()), ab.tail(x.size()));
}

// y = x[:c/2] .* x[c/2:]
inline Vec simple_gate(const Vec& x) {
    require(x.size() % 2 == 0, "simple_gate: width must be even");
    const Eigen::Index h = x.size() / 2;
    return (x.head(h).array() * x.tail(h).array()).matrix();
}

// One residual block: two gated branches, each dense -> FiLM -> simple gate ->
// dense, with learnable residual scales alpha (first branch) and beta (second).
// The first branch optionally carries a learned per-feature scale after the
// gate (the dense-form stand-in for simple channel attention).
struct Block {
    Dense expand1;  // h -> 2h
    Film film1;     // emb -> (a, b) over 2h
    Vec channel_scale;
    Dense project1;  // h -> h
    double alpha = 0.0;  // residual scales start at 0: blocks fade in as they learn

    Dense expand2;
    Film film2;
    Dense project2;
    double beta = 0.0;
};

struct RegressorConfig {
    int state_dim = 2;
    int cond_dim = 0;
    int hidden_dim = 128;
    int depth = 4;
    int emb_dim = 64;
    double freq_base = 1000.0;
    ObjectiveKind objective = ObjectiveKind::Endpoint;
    bool double_forward = false;
    bool channel_scale = true;
};

struct BranchCache {
    Vec x_in, pre_act, film_a, modulated, gated, scaled, branch_out;
};

struct PassCache {
    Vec input, emb, head_in, output;
    std::vector<std::array<BranchCache, 2>> blocks;
};

struct ForwardCache {
    PassCache pass1;
    std::optional<PassCache> pass2;
};

// column-per-sample variants; the batched path turns the per-sample rank-1
// gradient updates into single matrix products
struct BatchBranchCache {
    Mat x_in, pre_act, film_a, modulated, gated, scaled, branch_out;
};

struct BatchPassCache {
    Mat input, emb, head_in, output;
    std::vector<std::array<BatchBranchCache, 2>> blocks;
};

struct BatchForwardCache {
    BatchPassCache pass1;
    std::optional<BatchPassCache> pass2;
};

class Regressor {
public:
    RegressorConfig cfg;
    Dense stem;
    std::vector<Block> blocks;
    Dense head;

    Regressor() = default;

    static Regressor init(const RegressorConfig& cfg, std::uint64_t seed) {
        require(cfg.state_dim > 0 && cfg.hidden_dim > 0 && cfg.depth > 0, "Regressor: bad dims");
        require(cfg.emb_dim > 0 && cfg.emb_dim % 2 == 0, "Regressor: emb_dim must be even");
        const Eigen::Index out = target_width(cfg.objective, cfg.state_dim);
        if (cfg.double_forward) {
            require(cfg.objective == ObjectiveKind::Endpoint,
                    "double_forward requires the endpoint objective (output feeds back as input)");
        }
        Regressor r;
        r.cfg = cfg;
        RandomStream rng(substream_seed(seed, 0x1e17));
        const int h = cfg.hidden_dim;
        r.stem = make_dense(h, cfg.state_dim + cfg.cond_dim, rng);
        r.blocks.resize(static_cast<std::size_t>(cfg.depth));
        for (auto& blk : r.blocks) {
            blk.expand1 = make_dense(2 * h, h, rng);
            blk.film1 = Film{Mat::Zero(4 * h, cfg.emb_dim), Vec::Zero(4 * h)};
            blk.channel_scale = Vec::Ones(h);
            blk.project1 = make_dense(h, h, rng);
            blk.expand2 = make_dense(2 * h, h, rng);
            blk.film2 = Film{Mat::Zero(4 * h, cfg.emb_dim), Vec::Zero(4 * h)};
            blk.project2 = make_dense(h, h, rng);
        }
        // zero-initialized head: training starts from the prior mean
        r.head = Dense{Mat::Zero(out, h), Vec::Zero(out)};
        return r;
    }

    // zeroed same-shape buffer (gradient / moment storage)
    static Regressor like(const Regressor& other) {
        Regressor r = other;
        r.visit_tensors([](double* p, std::size_t n) { std::fill(p, p + n, 0.0); });
        return r;
    }

    Eigen::Index out_dim() const { return head.w.rows(); }
    Eigen::Index in_dim() const { return stem.w.cols(); }

    Vec forward(const Vec& y_t, const std::optional<Vec>& c, double t, ForwardCache* cache = nullptr) const {
        const Vec u = join_input(y_t, c);
        ForwardCache local;
        ForwardCache& fc = cache ? *cache : local;
        fc.pass2.reset();
        Vec out = run_pass(u, t, fc.pass1);
        if (cfg.double_forward) {
            const Vec u2 = join_input(out, c);
            fc.pass2.emplace();
            out = run_pass(u2, t, *fc.pass2);
        }
        return out;
    }

    // Exact gradients of the forward map. Returns the gradient with respect to
    // the y_t input; parameter gradients accumulate into `grads`.
    Vec backward(const ForwardCache& cache, const Vec& grad_out, Regressor& grads) const {
        Vec g = grad_out;
        if (cache.pass2) {
            const Vec du2 = backward_pass(*cache.pass2, g, grads);
            g = du2.head(cfg.state_dim);  // second-pass input was the first-pass output
        }
        const Vec du = backward_pass(cache.pass1, g, grads);
        return du.head(cfg.state_dim);
    }

    // Batched forward: y_t columns are samples, one time per column. The
    // per-column results equal the per-sample forward up to summation order.
    Mat forward_batch(const Mat& y_t, const Mat* c, const std::vector<double>& ts, BatchForwardCache* cache) const {
        const auto batch = y_t.cols();
        require(static_cast<std::size_t>(batch) == ts.size(), "forward_batch: one time per column");
        Mat u = join_input_batch(y_t, c);
        Mat emb(cfg.emb_dim, batch);
        for (Eigen::Index j = 0; j < batch; ++j) emb.col(j) = embed_time(ts[static_cast<std::size_t>(j)], cfg.emb_dim, cfg.freq_base);
        cache->pass2.reset();
        Mat out = run_pass_batch(u, emb, cache->pass1);
        if (cfg.double_forward) {
            const Mat u2 = join_input_batch(out, c);
            cache->pass2.emplace();
            out = run_pass_batch(u2, emb, *cache->pass2);
        }
        return out;
    }

    Mat backward_batch(const BatchForwardCache& cache, const Mat& grad_out, Regressor& grads) const {
        Mat g = grad_out;
        if (cache.pass2) {
            const Mat du2 = backward_pass_batch(*cache.pass2, g, grads);
            g = du2.topRows(cfg.state_dim);
        }
        const Mat du = backward_pass_batch(cache.pass1, g, grads);
        return du.topRows(cfg.state_dim);
    }

    template <class F>
    void visit_tensors(F&& f) {
        auto mat = [&](Mat& m) { f(m.data(), static_cast<std::size_t>(m.size())); };
        auto vec = [&](Vec& v) { f(v.data(), static_cast<std::size_t>(v.size())); };
        mat(stem.w);
        vec(stem.b);
        for (auto& blk : blocks) {
            mat(blk.expand1.w);
            vec(blk.expand1.b);
            mat(blk.film1.w);
            vec(blk.film1.b);
            vec(blk.channel_scale);
            mat(blk.project1.w);
            vec(blk.project1.b);
            f(&blk.alpha, 1);
            mat(blk.expand2.w);
            vec(blk.expand2.b);
            mat(blk.film2.w);
            vec(blk.film2.b);
            mat(blk.project2.w);
            vec(blk.project2.b);
            f(&blk.beta, 1);
        }
        mat(head.w);
        vec(head.b);
    }

    template <class F>
    void visit_tensors(F&& f) const {
        const_cast<Regressor*>(this)->visit_tensors([&](double* p, std::size_t n) { f(const_cast<const double*>(p), n); });
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        visit_tensors([&](const double*, std::size_t k) { n += k; });
        return n;
    }

    bool all_finite() const {
        bool ok = true;
        visit_tensors([&](const double* p, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i)
                if (!std::isfinite(p[i])) ok = false;
        });
        return ok;
    }

private:
    static Dense make_dense(Eigen::Index rows, Eigen::Index cols, RandomStream& rng) {
        // uniform fan-in init, U(-sqrt(3/fan_in), sqrt(3/fan_in))
        const double lim = std::sqrt(3.0 / static_cast<double>(cols));
        Mat w(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = rng.uniform(-lim, lim);
        return {std::move(w), Vec::Zero(rows)};
    }

    Vec join_input(const Vec& y, const std::optional<Vec>& c) const {
        require(y.size() == cfg.state_dim, "forward: state width mismatch");
        if (cfg.cond_dim == 0) {
            require(!c || c->size() == 0, "forward: unexpected condition");
            return y;
        }
        require(c && c->size() == cfg.cond_dim, "forward: condition width mismatch");
        Vec u(cfg.state_dim + cfg.cond_dim);
        u << y, *c;
        return u;
    }

    Vec run_pass(const Vec& u, double t, PassCache& pc) const {
        pc.input = u;
        pc.emb = embed_time(t, cfg.emb_dim, cfg.freq_base);
        pc.blocks.resize(blocks.size());
        Vec x = stem.w * u + stem.b;
        const Eigen::Index h = cfg.hidden_dim;
        for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
            const Block& blk = blocks[bi];
            run_branch(blk.expand1, blk.film1, &blk.channel_scale, blk.project1, pc.emb, x, pc.blocks[bi][0]);
            x += blk.alpha * pc.blocks[bi][0].branch_out;
            run_branch(blk.expand2, blk.film2, nullptr, blk.project2, pc.emb, x, pc.blocks[bi][1]);
            x += blk.beta * pc.blocks[bi][1].branch_out;
            if (!x.allFinite())
                throw std::runtime_error("forward: non-finite activation after block " + std::to_string(bi));
            (void)h;
        }
        pc.head_in = x;
        pc.output = head.w * x + head.b;
        return pc.output;
    }

    void run_branch(const Dense& expand, const Film& film, const Vec* scale, const Dense& project, const Vec& emb,
                    const Vec& x, BranchCache& bc) const {
        const Eigen::Index h2 = expand.w.rows();
        bc.x_in = x;
        bc.pre_act = expand.w * x + expand.b;
        const Vec ab = film.w * emb + film.b;
        bc.film_a = ab.head(h2);
        bc.modulated = ((1.0 + bc.film_a.array()) * bc.pre_act.array() + ab.tail(h2).array()).matrix();
        bc.gated = (bc.modulated.head(h2 / 2).array() * bc.modulated.tail(h2 / 2).array()).matrix();
        bc.scaled = scale && cfg.channel_scale ? Vec((scale->array() * bc.gated.array()).matrix()) : bc.gated;
        bc.branch_out = project.w * bc.scaled + project.b;
    }

    // Mirrors run_pass in reverse; returns the gradient w.r.t. the pass input.
    Vec backward_pass(const PassCache& pc, const Vec& grad_out, Regressor& grads) const {
        require(grad_out.size() == out_dim(), "backward: grad_out width mismatch");
        require(pc.blocks.size() == blocks.size(), "backward: stale cache");
        grads.head.w += grad_out * pc.head_in.transpose();
        grads.head.b += grad_out;
        Vec dx = head.w.transpose() * grad_out;
        for (std::size_t bi = blocks.size(); bi-- > 0;) {
            const Block& blk = blocks[bi];
            Block& gblk = grads.blocks[bi];
            {
                const BranchCache& bc = pc.blocks[bi][1];
                gblk.beta += dx.dot(bc.branch_out);
                const Vec dp = blk.beta * dx;
                dx += branch_backward(blk.expand2, blk.film2, nullptr, blk.project2, pc.emb, bc, dp, gblk.expand2,
                                      gblk.film2, nullptr, gblk.project2);
            }
            {
                const BranchCache& bc = pc.blocks[bi][0];
                gblk.alpha += dx.dot(bc.branch_out);
                const Vec dp = blk.alpha * dx;
                dx += branch_backward(blk.expand1, blk.film1, &blk.channel_scale, blk.project1, pc.emb, bc, dp,
                                      gblk.expand1, gblk.film1, &gblk.channel_scale, gblk.project1);
            }
        }
        grads.stem.w += dx * pc.input.transpose();
        grads.stem.b += dx;
        return stem.w.transpose() * dx;
    }

    // Gradient of one branch; returns d(branch)/d(x_in) contribution.
    Vec branch_backward(const Dense& expand, const Film& film, const Vec* scale, const Dense& project, const Vec& emb,
                        const BranchCache& bc, const Vec& d_out, Dense& g_expand, Film& g_film, Vec* g_scale,
                        Dense& g_project) const {
        const Eigen::Index h2 = expand.w.rows();
        const Eigen::Index h = h2 / 2;
        g_project.w += d_out * bc.scaled.transpose();
        g_project.b += d_out;
        Vec ds = project.w.transpose() * d_out;
        Vec dg;
        if (scale && cfg.channel_scale) {
            *g_scale += (ds.array() * bc.gated.array()).matrix();
            dg = (ds.array() * scale->array()).matrix();
        } else {
            dg = std::move(ds);
        }
        Vec dm(h2);
        dm.head(h) = (dg.array() * bc.modulated.tail(h).array()).matrix();
        dm.tail(h) = (dg.array() * bc.modulated.head(h).array()).matrix();
        Vec dab(2 * h2);
        dab.head(h2) = (dm.array() * bc.pre_act.array()).matrix();  // d/da
        dab.tail(h2) = dm;                                          // d/db
        g_film.w += dab * emb.transpose();
        g_film.b += dab;
        const Vec dh = (dm.array() * (1.0 + bc.film_a.array())).matrix();
        g_expand.w += dh * bc.x_in.transpose();
        g_expand.b += dh;
        return expand.w.transpose() * dh;
    }

    Mat join_input_batch(const Mat& y, const Mat* c) const {
        require(y.rows() == cfg.state_dim, "forward_batch: state width mismatch");
        if (cfg.cond_dim == 0) {
            require(!c || c->size() == 0, "forward_batch: unexpected condition");
            return y;
        }
        require(c && c->rows() == cfg.cond_dim && c->cols() == y.cols(), "forward_batch: condition shape mismatch");
        Mat u(cfg.state_dim + cfg.cond_dim, y.cols());
        u.topRows(cfg.state_dim) = y;
        u.bottomRows(cfg.cond_dim) = *c;
        return u;
    }

    Mat run_pass_batch(const Mat& u, const Mat& emb, BatchPassCache& pc) const {
        pc.input = u;
        pc.emb = emb;
        pc.blocks.resize(blocks.size());
        Mat x = (stem.w * u).colwise() + stem.b;
        for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
            const Block& blk = blocks[bi];
            run_branch_batch(blk.expand1, blk.film1, &blk.channel_scale, blk.project1, emb, x, pc.blocks[bi][0]);
            x += blk.alpha * pc.blocks[bi][0].branch_out;
            run_branch_batch(blk.expand2, blk.film2, nullptr, blk.project2, emb, x, pc.blocks[bi][1]);
            x += blk.beta * pc.blocks[bi][1].branch_out;
            if (!x.allFinite())
                throw std::runtime_error("forward: non-finite activation after block " + std::to_string(bi));
        }
        pc.head_in = x;
        pc.output = (head.w * x).colwise() + head.b;
        return pc.output;
    }

    void run_branch_batch(const Dense& expand, const Film& film, const Vec* scale, const Dense& project,
                          const Mat& emb, const Mat& x, BatchBranchCache& bc) const {
        const Eigen::Index h2 = expand.w.rows();
        bc.x_in = x;
        bc.pre_act = (expand.w * x).colwise() + expand.b;
        const Mat ab = (film.w * emb).colwise() + film.b;
        bc.film_a = ab.topRows(h2);
        bc.modulated = ((1.0 + bc.film_a.array()) * bc.pre_act.array() + ab.bottomRows(h2).array()).matrix();
        bc.gated = (bc.modulated.topRows(h2 / 2).array() * bc.modulated.bottomRows(h2 / 2).array()).matrix();
        bc.scaled = scale && cfg.channel_scale ? Mat(bc.gated.array().colwise() * scale->array()) : bc.gated;
        bc.branch_out = (project.w * bc.scaled).colwise() + project.b;
    }

    Mat backward_pass_batch(const BatchPassCache& pc, const Mat& grad_out, Regressor& grads) const {
        require(grad_out.rows() == out_dim(), "backward_batch: grad_out width mismatch");
        require(pc.blocks.size() == blocks.size(), "backward_batch: stale cache");
        grads.head.w += grad_out * pc.head_in.transpose();
        grads.head.b += grad_out.rowwise().sum();
        Mat dx = head.w.transpose() * grad_out;
        for (std::size_t bi = blocks.size(); bi-- > 0;) {
            const Block& blk = blocks[bi];
            Block& gblk = grads.blocks[bi];
            {
                const BatchBranchCache& bc = pc.blocks[bi][1];
                gblk.beta += (dx.array() * bc.branch_out.array()).sum();
                const Mat dp = blk.beta * dx;
                dx += branch_backward_batch(blk.expand2, blk.film2, nullptr, blk.project2, pc.emb, bc, dp,
                                            gblk.expand2, gblk.film2, nullptr, gblk.project2);
            }
            {
                const BatchBranchCache& bc = pc.blocks[bi][0];
                gblk.alpha += (dx.array() * bc.branch_out.array()).sum();
                const Mat dp = blk.alpha * dx;
                dx += branch_backward_batch(blk.expand1, blk.film1, &blk.channel_scale, blk.project1, pc.emb, bc, dp,
                                            gblk.expand1, gblk.film1, &gblk.channel_scale, gblk.project1);
            }
        }
        grads.stem.w += dx * pc.input.transpose();
        grads.stem.b += dx.rowwise().sum();
        return stem.w.transpose() * dx;
    }

    Mat branch_backward_batch(const Dense& expand, const Film& film, const Vec* scale, const Dense& project,
                              const Mat& emb, const BatchBranchCache& bc, const Mat& d_out, Dense& g_expand,
                              Film& g_film, Vec* g_scale, Dense& g_project) const {
        const Eigen::Index h2 = expand.w.rows();
        const Eigen::Index h = h2 / 2;
        g_project.w += d_out * bc.scaled.transpose();
        g_project.b += d_out.rowwise().sum();
        Mat ds = project.w.transpose() * d_out;
        Mat dg;
        if (scale && cfg.channel_scale) {
            *g_scale += (ds.array() * bc.gated.array()).rowwise().sum().matrix();
            dg = (ds.array().colwise() * scale->array()).matrix();
        } else {
            dg = std::move(ds);
        }
        Mat dm(h2, dg.cols());
        dm.topRows(h) = (dg.array() * bc.modulated.bottomRows(h).array()).matrix();
        dm.bottomRows(h) = (dg.array() * bc.modulated.topRows(h).array()).matrix();
        Mat dab(2 * h2, dg.cols());
        dab.topRows(h2) = (dm.array() * bc.pre_act.array()).matrix();
        dab.bottomRows(h2) = dm;
        g_film.w += dab * emb.transpose();
        g_film.b += dab.rowwise().sum();
        const Mat dh = (dm.array() * (1.0 + bc.film_a.array())).matrix();
        g_expand.w += dh * bc.x_in.transpose();
        g_expand.b += dh.rowwise().sum();
        return expand.w.transpose() * dh;
    }
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::int64_t step = 0;
    Regressor m, v;

    static AdamState init(const Regressor& params) {
        AdamState s;
        s.m = Regressor::like(params);
        s.v = Regressor::like(params);
        return s;
    }
};

inline void adam_step(Regressor& params, const Regressor& grads, AdamState& state, const AdamConfig& cfg) {
    if (!const_cast<Regressor&>(grads).all_finite())
        throw std::runtime_error("adam_step: non-finite gradient at step " + std::to_string(state.step));
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    std::vector<double*> ps, ms, vs;
    std::vector<const double*> gs;
    std::vector<std::size_t> ns;
    params.visit_tensors([&](double* p, std::size_t n) { ps.push_back(p); ns.push_back(n); });
    state.m.visit_tensors([&](double* p, std::size_t) { ms.push_back(p); });
    state.v.visit_tensors([&](double* p, std::size_t) { vs.push_back(p); });
    grads.visit_tensors([&](const double* p, std::size_t) { gs.push_back(p); });
    for (std::size_t k = 0; k < ps.size(); ++k) {
        for (std::size_t i = 0; i < ns[k]; ++i) {
            const double g = gs[k][i];
            ms[k][i] = cfg.beta1 * ms[k][i] + (1.0 - cfg.beta1) * g;
            vs[k][i] = cfg.beta2 * vs[k][i] + (1.0 - cfg.beta2) * g * g;
            const double mh = ms[k][i] / bc1;
            const double vh = vs[k][i] / bc2;
            ps[k][i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoint format: little-endian, magic "SBMK", version u32, objective u8,
// tensor count u32, per tensor (rank u8, dims u64 each, f64 payload),
// trailing CRC32 over everything before it.

namespace detail {

inline void put_bytes(std::string& out, const void* p, std::size_t n) {
    out.append(static_cast<const char*>(p), n);
}

template <class T>
void put(std::string& out, T v) {
    put_bytes(out, &v, sizeof(T));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    void read(void* p, std::size_t n) {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated");
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    template <class T>
    T get() {
        T v;
        read(&v, sizeof(T));
        return v;
    }
};

inline void put_tensor(std::string& out, const double* data, const std::vector<std::uint64_t>& dims) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(dims.size()));
    std::size_t n = 1;
    for (auto d : dims) {
        put<std::uint64_t>(out, d);
        n *= d;
    }
    put_bytes(out, data, n * sizeof(double));
}

} // namespace detail

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::string serialize_checkpoint(const Regressor& net, const AdamState* adam) {
    std::string out;
    detail::put_bytes(out, "SBMK", 4);
    detail::put<std::uint32_t>(out, kCheckpointVersion);
    detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(net.cfg.objective));

    std::uint32_t count = 1;  // meta tensor
    net.visit_tensors([&](const double*, std::size_t) { ++count; });
    if (adam) count += 2 * (count - 1);
    detail::put<std::uint32_t>(out, count);

    const std::vector<double> meta = {
        static_cast<double>(net.cfg.state_dim),   static_cast<double>(net.cfg.cond_dim),
        static_cast<double>(net.cfg.hidden_dim),  static_cast<double>(net.cfg.depth),
        static_cast<double>(net.cfg.emb_dim),     net.cfg.freq_base,
        net.cfg.double_forward ? 1.0 : 0.0,       net.cfg.channel_scale ? 1.0 : 0.0,
        adam ? 1.0 : 0.0,                         adam ? static_cast<double>(adam->step) : 0.0,
    };
    detail::put_tensor(out, meta.data(), {meta.size()});

    auto dump = [&](const Regressor& r) {
        r.visit_tensors([&](const double* p, std::size_t n) {
            detail::put_tensor(out, p, {static_cast<std::uint64_t>(n)});
        });
    };
    dump(net);
    if (adam) {
        dump(adam->m);
        dump(adam->v);
    }
    const auto crc = static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(out.data()), static_cast<uInt>(out.size())));
    detail::put<std::uint32_t>(out, crc);
    return out;
}

inline void save_checkpoint(const std::string& path, const Regressor& net, const AdamState* adam = nullptr) {
    const std::string bytes = serialize_checkpoint(net, adam);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline ObjectiveKind peek_checkpoint_objective(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    std::uint32_t ver = 0;
    f.read(reinterpret_cast<char*>(&ver), 4);
    std::uint8_t obj = 0;
    f.read(reinterpret_cast<char*>(&obj), 1);
    if (!f || std::memcmp(magic, "SBMK", 4) != 0) throw std::runtime_error("bad checkpoint magic: " + path);
    return static_cast<ObjectiveKind>(obj);
}

inline Regressor load_checkpoint(const std::string& path, AdamState* adam_out = nullptr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 17) throw std::runtime_error("checkpoint too small: " + path);

    std::uint32_t stored_crc = 0;
    std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
    const auto crc = static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));
    if (crc != stored_crc) throw std::runtime_error("checkpoint CRC mismatch: " + path);

    detail::Reader r{buf};
    char magic[4];
    r.read(magic, 4);
    if (std::memcmp(magic, "SBMK", 4) != 0) throw std::runtime_error("bad checkpoint magic: " + path);
    const auto ver = r.get<std::uint32_t>();
    if (ver != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
    const auto obj = static_cast<ObjectiveKind>(r.get<std::uint8_t>());
    const auto count = r.get<std::uint32_t>();

    auto read_tensor = [&](std::vector<double>& data) {
        const auto rank = r.get<std::uint8_t>();
        std::size_t n = 1;
        for (int i = 0; i < rank; ++i) n *= r.get<std::uint64_t>();
        data.resize(n);
        r.read(data.data(), n * sizeof(double));
    };

    std::vector<double> meta;
    read_tensor(meta);
    if (meta.size() < 10) throw std::runtime_error("checkpoint meta malformed");
    RegressorConfig cfg;
    cfg.state_dim = static_cast<int>(meta[0]);
    cfg.cond_dim = static_cast<int>(meta[1]);
    cfg.hidden_dim = static_cast<int>(meta[2]);
    cfg.depth = static_cast<int>(meta[3]);
    cfg.emb_dim = static_cast<int>(meta[4]);
    cfg.freq_base = meta[5];
    cfg.double_forward = meta[6] != 0.0;
    cfg.channel_scale = meta[7] != 0.0;
    cfg.objective = obj;
    const bool has_adam = meta[8] != 0.0;

    Regressor net = Regressor::init(cfg, 0);
    auto fill = [&](Regressor& target) {
        target.visit_tensors([&](double* p, std::size_t n) {
            std::vector<double> data;
            read_tensor(data);
            if (data.size() != n) throw std::runtime_error("checkpoint tensor shape mismatch");
            std::copy(data.begin(), data.end(), p);
        });
    };
    fill(net);
    if (has_adam) {
        AdamState st = AdamState::init(net);
        st.step = static_cast<std::int64_t>(meta[9]);
        fill(st.m);
        fill(st.v);
        if (adam_out) *adam_out = std::move(st);
    } else if (adam_out) {
        *adam_out = AdamState::init(net);
    }
    (void)count;
    return net;
}

} // namespace bridgekit
