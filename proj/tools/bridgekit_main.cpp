// bridgekit command-line tool: train / sample / curvature / schedule-dump /
// toy-demo / check. JSON config in, CSV + JSON artifacts out.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bridgekit/analysis.hpp"
#include "bridgekit/bridge.hpp"
#include "bridgekit/io.hpp"
#include "bridgekit/net.hpp"
#include "bridgekit/problems.hpp"
#include "bridgekit/rng.hpp"
#include "bridgekit/sampler.hpp"
#include "bridgekit/schedule.hpp"
#include "bridgekit/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bridgekit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCompat = 3;

struct ProblemSetup {
    PairSource source;
    int state_dim = 0;
    int cond_dim = 0;
    std::optional<LinearOperator> a1;
    std::optional<LinearOperator> a2;
    std::string kind;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    NoiseSchedule schedule = NoiseSchedule::sb_quadratic_flip(1e-4, 0.3);
    ProblemSetup problem;
    RegressorConfig net;
    TrainConfig train;
    SamplerConfig sampler;
    std::string raw_text;
};

ToyKind toy_kind_from_string(const std::string& s) {
    if (s == "gauss8") return ToyKind::Gauss8;
    if (s == "swiss-roll") return ToyKind::SwissRoll;
    throw std::invalid_argument("problem: unknown toy kind '" + s + "'");
}

NoiseSchedule parse_schedule(const json& j) {
    const std::string kind = j.value("kind", "sb-quadratic-flip");
    switch (schedule_kind_from_string(kind)) {
        case ScheduleKind::SbQuadraticFlip:
            return NoiseSchedule::sb_quadratic_flip(j.value("beta0", 1e-4), j.value("beta_half", 0.3),
                                                    j.value("literal_beta", false));
        case ScheduleKind::SbConstant: return NoiseSchedule::sb_constant(j.value("beta0", 0.1));
        case ScheduleKind::Vp: return NoiseSchedule::vp(j.value("a", 19.9), j.value("b", 0.1));
        case ScheduleKind::SubVp: return NoiseSchedule::sub_vp(j.value("a", 19.9), j.value("b", 0.1));
        case ScheduleKind::Ve: return NoiseSchedule::ve(j.value("sigma_min", 0.01), j.value("ratio_r", 100.0));
    }
    throw std::invalid_argument("schedule.kind: unknown");
}

ProblemSetup parse_problem(const json& j) {
    ProblemSetup p;
    p.kind = j.value("kind", "toy");
    if (p.kind == "toy") {
        const auto x0 = toy_kind_from_string(j.value("x0", "swiss-roll"));
        const auto y1 = toy_kind_from_string(j.value("y1", "gauss8"));
        p.source = make_toy_source(x0, y1, j.value("x0_noise", -1.0), j.value("y1_noise", -1.0));
        p.state_dim = 2;
    } else if (p.kind == "identity") {
        const auto marginal = toy_kind_from_string(j.value("source", "swiss-roll"));
        const double noise = j.value("noise", -1.0);
        p.source = [marginal, noise](RandomStream& rng) {
            Vec x = marginal == ToyKind::Gauss8 ? sample_gauss8_point(rng, 2.0, noise < 0 ? 0.1 : noise)
                                                : sample_swiss_roll_point(rng, noise < 0 ? 0.05 : noise);
            return EndpointPair(x, x);
        };
        p.state_dim = 2;
    } else if (p.kind == "inverse") {
        const int height = j.value("height", 16);
        const int width = j.value("width", 16);
        std::vector<double> taps = j.value("blur_taps", std::vector<double>{0.25, 0.5, 0.25});
        p.a1 = LinearOperator::blur(height, width, taps);
        const bool use_cond = j.value("use_condition", true);
        if (use_cond) p.a2 = LinearOperator::downsample(height, width, j.value("downsample_stride", 2));
        p.state_dim = static_cast<int>(p.a1->in_dim());
        p.cond_dim = p.a2 ? static_cast<int>(p.a2->out_dim()) : 0;
        CleanSource clean = [height, width](RandomStream& rng) { return sample_rect_image(rng, height, width); };
        p.source = make_inverse_problem(std::move(clean), *p.a1, j.value("noise_sigma", 0.05), p.a2);
    } else {
        throw std::invalid_argument("problem.kind: expected toy | identity | inverse, got '" + p.kind + "'");
    }
    return p;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config file not found: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    RunConfig rc;
    rc.raw_text = ss.str();
    json j;
    try {
        j = json::parse(rc.raw_text);
    } catch (const json::exception& e) {
        throw std::invalid_argument("config parse error in " + path + ": " + e.what());
    }

    rc.seed = j.value("seed", std::uint64_t{0});
    rc.out_dir = j.value("out_dir", "out");
    if (j.contains("schedule")) rc.schedule = parse_schedule(j["schedule"]);
    rc.problem = parse_problem(j.value("problem", json{{"kind", "toy"}}));

    const json jn = j.value("net", json::object());
    rc.net.hidden_dim = jn.value("hidden", 128);
    rc.net.depth = jn.value("depth", 4);
    rc.net.emb_dim = jn.value("emb_dim", 64);
    rc.net.freq_base = jn.value("freq_base", 1000.0);
    rc.net.double_forward = jn.value("double_forward", false);
    rc.net.channel_scale = jn.value("channel_scale", true);
    rc.net.state_dim = rc.problem.state_dim;
    rc.net.cond_dim = rc.problem.cond_dim;

    const json jt = j.value("train", json::object());
    rc.train.objective = objective_from_string(jt.value("objective", "endpoint"));
    rc.train.mode = jt.value("mode", "sde") == std::string("ode") ? BridgeMode::Ode : BridgeMode::Sde;
    rc.train.steps = jt.value("steps", 2000);
    rc.train.batch = jt.value("batch", 32);
    rc.train.adam.lr = jt.value("lr", 1e-3);
    rc.train.train_grid = jt.value("train_grid", 1000);
    rc.train.stratified = jt.value("stratified", false);
    rc.train.checkpoint_every = jt.value("checkpoint_every", 0);
    rc.net.objective = rc.train.objective;

    const json js = j.value("sampler", json::object());
    rc.sampler.method = sampler_method_from_string(js.value("method", "euler-sde"));
    rc.sampler.n_steps = js.value("steps", rc.sampler.method == SamplerMethod::Ode ? 1 : 5);
    rc.sampler.psi = js.value("psi", 0.5);
    rc.sampler.record_trajectory = js.value("record_trajectory", false);

    if (const char* env = std::getenv("BRIDGEKIT_SEED")) rc.seed = std::strtoull(env, nullptr, 10);
    rc.train.seed = rc.seed;
    rc.sampler.seed = rc.seed;
    return rc;
}

void write_manifest(const RunConfig& rc, const std::string& path, double final_loss) {
    json m;
    m["version"] = kVersion;
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(fnv1a(rc.raw_text)));
    m["config_hash"] = hash;
    m["seed"] = rc.seed;
    m["final_loss"] = final_loss;
    write_text_file(path, m.dump(2) + "\n");
}

int cmd_train(const std::string& config_path) {
    RunConfig rc = load_config(config_path);
    fs::create_directories(rc.out_dir);
    Regressor net = Regressor::init(rc.net, rc.seed);
    AdamState adam = AdamState::init(net);
    rc.train.checkpoint_path = (fs::path(rc.out_dir) / "checkpoint.bin").string();
    const std::vector<double> losses = train(rc.train, rc.schedule, rc.problem.source, net, adam);
    save_checkpoint(rc.train.checkpoint_path, net, &adam);

    CsvWriter loss_csv((fs::path(rc.out_dir) / "loss.csv").string(), {"step", "loss"});
    for (std::size_t i = 0; i < losses.size(); ++i) loss_csv.row({static_cast<double>(i), losses[i]});
    const double final_loss = losses.empty() ? 0.0 : losses.back();
    write_manifest(rc, (fs::path(rc.out_dir) / "manifest.json").string(), final_loss);
    std::cout << "trained " << losses.size() << " steps, final loss " << format_double(final_loss) << "\n"
              << "checkpoint: " << rc.train.checkpoint_path << "\n";
    return kExitOk;
}

int cmd_sample(const std::string& config_path, const std::string& checkpoint_path, int n, bool oracle_net) {
    RunConfig rc = load_config(config_path);
    fs::create_directories(rc.out_dir);

    Regressor net;
    if (!oracle_net) {
        const ObjectiveKind ck_obj = peek_checkpoint_objective(checkpoint_path);
        if (ck_obj != rc.train.objective) {
            std::cerr << "checkpoint objective (" << to_string(ck_obj) << ") does not match config objective ("
                      << to_string(rc.train.objective) << ")\n";
            return kExitCompat;
        }
        net = load_checkpoint(checkpoint_path);
        if (net.cfg.state_dim != rc.problem.state_dim || net.cfg.cond_dim != rc.problem.cond_dim) {
            std::cerr << "checkpoint width (" << net.cfg.state_dim << "+" << net.cfg.cond_dim
                      << ") does not match problem (" << rc.problem.state_dim << "+" << rc.problem.cond_dim << ")\n";
            return kExitCompat;
        }
    }

    std::vector<Vec> generated, truths, inputs;
    std::vector<double> residuals;
    RandomStream data_rng(substream_seed(rc.seed, 0xda7a));
    for (int i = 0; i < n; ++i) {
        const EndpointPair pair = rc.problem.source(data_rng);
        SamplerConfig scfg = rc.sampler;
        scfg.seed = substream_seed(rc.seed, 0xc4a1, static_cast<std::uint64_t>(i));
        EndpointPredictor predict =
            oracle_net ? EndpointPredictor([x0 = pair.x0](const Vec&, const std::optional<Vec>&, double) { return x0; })
                       : net_endpoint_predictor(net, pair.y1);
        auto [x0_hat, traj] = run_sampler(scfg, predict, rc.schedule, pair.y1, pair.condition, rc.problem.a1,
                                          rc.problem.a2);
        if (rc.sampler.record_trajectory) {
            std::vector<std::string> header = {"step", "t"};
            for (int d = 0; d < rc.problem.state_dim; ++d) header.push_back("comp" + std::to_string(d));
            CsvWriter tw((fs::path(rc.out_dir) / ("trajectory_" + std::to_string(i) + ".csv")).string(), header);
            for (std::size_t s = 0; s < traj.times.size(); ++s) {
                std::vector<double> row = {static_cast<double>(s), traj.times[s]};
                for (int d = 0; d < rc.problem.state_dim; ++d) row.push_back(traj.states[s][d]);
                tw.row(row);
            }
        }
        if (rc.problem.a1) residuals.push_back((rc.problem.a1->apply(x0_hat) - pair.y1).norm());
        generated.push_back(std::move(x0_hat));
        truths.push_back(pair.x0);
        inputs.push_back(pair.y1);
    }
    write_vectors_csv((fs::path(rc.out_dir) / "samples.csv").string(), generated, rc.problem.state_dim);

    json summary;
    summary["n"] = n;
    summary["method"] = to_string(rc.sampler.method);
    if (!residuals.empty()) {
        double mean_res = 0.0;
        for (double r : residuals) mean_res += r;
        summary["mean_residual"] = mean_res / static_cast<double>(residuals.size());
    }
    if (rc.problem.kind == "toy" && n > 1) {
        summary["energy_distance_to_reference"] = energy_distance(generated, truths);
    }
    write_text_file((fs::path(rc.out_dir) / "sample_summary.json").string(), summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    return kExitOk;
}

int cmd_schedule_dump(const std::string& config_path, int n) {
    RunConfig rc = load_config(config_path);
    fs::create_directories(rc.out_dir);
    if (!rc.schedule.is_sb()) throw std::invalid_argument("schedule-dump: needs an sb schedule");
    CsvWriter w((fs::path(rc.out_dir) / "schedule.csv").string(),
                {"t", "beta", "sigma2", "sigma2_hat", "var_posterior"});
    for (double t : uniform_grid(0.0, 1.0, n)) {
        const double s2 = rc.schedule.sigma2_at(t);
        const double s2h = rc.schedule.sigma2_hat_at(t);
        const double denom = s2 + s2h;
        w.row({t, rc.schedule.beta_at(t), s2, s2h, denom > 0 ? s2 * s2h / denom : 0.0});
    }
    std::cout << "wrote " << (fs::path(rc.out_dir) / "schedule.csv").string() << "\n";
    return kExitOk;
}

// Synthetic unit-scale degraded coupling for the curvature comparison:
// x0 ~ N(0, I), y1 = x0 + 0.5 z. The same x0 marginal feeds the VP data term,
// with a fresh standard normal in the noise slot.
void curvature_couplings(int dim, int n, std::uint64_t seed, std::vector<CouplingSample>& sb,
                         std::vector<CouplingSample>& vp) {
    RandomStream rng(substream_seed(seed, 0xcccc));
    sb.clear();
    vp.clear();
    for (int i = 0; i < n; ++i) {
        Vec x0 = rng.normal_vec(dim);
        sb.push_back({x0, x0 + 0.5 * rng.normal_vec(dim)});
        vp.push_back({x0, rng.normal_vec(dim)});
    }
}

int cmd_curvature(const std::string& config_path) {
    RunConfig rc = load_config(config_path);
    fs::create_directories(rc.out_dir);
    const NoiseSchedule sb_sched = rc.schedule.is_sb() ? rc.schedule : NoiseSchedule::sb_quadratic_flip(1e-4, 0.3);
    const NoiseSchedule vp_sched = NoiseSchedule::vp(19.9, 0.1);

    std::vector<CouplingSample> sb_pairs, vp_pairs;
    curvature_couplings(2, 4096, rc.seed, sb_pairs, vp_pairs);
    const auto grid = curvature_grid(256);

    const CurvatureReport sb_num = curvature_numeric(sb_mean_interpolant(sb_sched), sb_pairs, grid);
    const CurvatureReport vp_num = curvature_numeric(vp_interpolant(vp_sched), vp_pairs, grid);
    const CurvatureReport sb_closed = curvature_sb_closed_form(sb_sched, sb_pairs, grid);
    const CurvatureReport vp_closed = curvature_vp_closed_form(vp_sched, vp_pairs, grid);
    const CurvatureReport sb_lit = curvature_sb_closed_form(sb_sched, sb_pairs, grid, true);
    const CurvatureReport vp_lit = curvature_vp_closed_form(vp_sched, vp_pairs, grid, true);

    CsvWriter w((fs::path(rc.out_dir) / "curvature.csv").string(), {"t", "curv_sb", "curv_vp"});
    for (std::size_t i = 0; i < grid.size(); ++i) w.row({grid[i], sb_num.profile[i], vp_num.profile[i]});

    json summary;
    summary["mean_sb"] = sb_num.mean_curvature;
    summary["mean_vp"] = vp_num.mean_curvature;
    summary["ratio"] = vp_num.mean_curvature / sb_num.mean_curvature;
    summary["mean_sb_closed_form"] = sb_closed.mean_curvature;
    summary["mean_vp_closed_form"] = vp_closed.mean_curvature;
    summary["mean_sb_paper_literal"] = sb_lit.mean_curvature;
    summary["mean_vp_paper_literal"] = vp_lit.mean_curvature;
    write_text_file((fs::path(rc.out_dir) / "curvature_summary.json").string(), summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    return kExitOk;
}

int cmd_toy_demo(const std::string& config_path, int n) {
    RunConfig rc = load_config(config_path);
    fs::create_directories(rc.out_dir);
    Regressor net = Regressor::init(rc.net, rc.seed);
    AdamState adam = AdamState::init(net);
    std::cout << "training toy model (" << rc.train.steps << " steps)...\n";
    const std::vector<double> losses = train(rc.train, rc.schedule, rc.problem.source, net, adam);
    save_checkpoint((fs::path(rc.out_dir) / "checkpoint.bin").string(), net, &adam);

    std::vector<Vec> before, after, reference;
    RandomStream data_rng(substream_seed(rc.seed, 0xde40));
    for (int i = 0; i < n; ++i) {
        const EndpointPair pair = rc.problem.source(data_rng);
        SamplerConfig scfg = rc.sampler;
        scfg.seed = substream_seed(rc.seed, 0xc4a1, static_cast<std::uint64_t>(i));
        auto [x0_hat, traj] = run_sampler(scfg, net_endpoint_predictor(net, pair.y1), rc.schedule, pair.y1,
                                          pair.condition);
        before.push_back(pair.y1);
        after.push_back(std::move(x0_hat));
        reference.push_back(pair.x0);
    }
    write_vectors_csv((fs::path(rc.out_dir) / "before.csv").string(), before, 2);
    write_vectors_csv((fs::path(rc.out_dir) / "after.csv").string(), after, 2);
    write_vectors_csv((fs::path(rc.out_dir) / "reference.csv").string(), reference, 2);

    json summary;
    summary["final_loss"] = losses.empty() ? 0.0 : losses.back();
    summary["energy_distance"] = energy_distance(after, reference);
    write_text_file((fs::path(rc.out_dir) / "toy_summary.json").string(), summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// check: the full invariant suite.

struct CheckResult {
    std::string name;
    bool pass;
    std::string detail;
};

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double eps, int depth = 24) {
    const double c = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fc = f(c);
    std::function<double(double, double, double, double, double, double, int)> rec =
        [&](double lo, double hi, double flo, double fhi, double fmid, double tol, int d) -> double {
        const double mid = 0.5 * (lo + hi);
        const double lmid = 0.5 * (lo + mid), rmid = 0.5 * (mid + hi);
        const double fl = f(lmid), fr = f(rmid);
        const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        const double left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid);
        const double right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi);
        if (d <= 0 || std::abs(left + right - whole) < 15.0 * tol) return left + right + (left + right - whole) / 15.0;
        return rec(lo, mid, flo, fmid, fl, tol / 2.0, d - 1) + rec(mid, hi, fmid, fhi, fr, tol / 2.0, d - 1);
    };
    return rec(a, b, fa, fb, fc, eps, depth);
}

int cmd_check(const std::string& inject_fault) {
    const auto t_start = std::chrono::steady_clock::now();
    std::vector<CheckResult> results;
    auto add = [&](const std::string& name, bool pass, const std::string& detail) {
        results.push_back({name, pass, detail});
    };

    const NoiseSchedule sched = NoiseSchedule::sb_quadratic_flip(1e-4, 0.3);
    const NoiseSchedule cbeta = NoiseSchedule::sb_constant(0.7);

    {  // schedule identities
        double worst = 0.0;
        for (double t : uniform_grid(0.0, 1.0, 101)) {
            worst = std::max(worst, std::abs(sched.sigma2_at(t) + sched.sigma2_hat_at(t) - sched.total_variance));
            worst = std::max(worst, std::abs(sched.beta_at(t) - sched.beta_at(1.0 - t)));
        }
        worst = std::max(worst, std::abs(sched.sigma2_at(0.0)));
        worst = std::max(worst, std::abs(sched.sigma2_hat_at(1.0)));
        add("schedule-identities", worst < 1e-12, "max deviation " + format_double(worst));
    }
    {  // closed-form integral vs adaptive quadrature
        double worst = 0.0;
        for (double t : uniform_grid(0.0, 1.0, 101)) {
            if (t == 0.0) continue;
            const double num = adaptive_simpson([&](double u) { return sched.beta_at(u); }, 0.0, t, 1e-13);
            worst = std::max(worst, std::abs(num - sched.sigma2_at(t)) / std::max(num, 1e-300));
        }
        add("schedule-quadrature", worst < 1e-9, "max rel err " + format_double(worst));
    }
    {  // posterior boundaries
        RandomStream rng(7);
        const EndpointPair pair(rng.normal_vec(3), rng.normal_vec(3));
        const auto p0 = posterior_given_endpoints(sched, pair, 0.0);
        const auto p1 = posterior_given_endpoints(sched, pair, 1.0);
        const double worst = std::max({(p0.mean - pair.x0).cwiseAbs().maxCoeff(), std::abs(p0.variance),
                                       (p1.mean - pair.y1).cwiseAbs().maxCoeff(), std::abs(p1.variance)});
        add("posterior-boundary", worst < 1e-12, "max deviation " + format_double(worst));
    }
    {  // Monte-Carlo composition vs analytic posterior
        const double x0 = 0.3, y1 = -1.1, tb = 0.6, ta = 0.25;
        const int n = 100000;
        RandomStream rng(substream_seed(11, 0xabcd));
        double sum = 0.0, sum2 = 0.0;
        const Vec vx0 = Vec::Constant(1, x0), vy1 = Vec::Constant(1, y1);
        for (int i = 0; i < n; ++i) {
            const auto pb = transition_posterior(sched, vx0, vy1, tb, 1.0);
            const double yb = pb.mean[0] + std::sqrt(pb.variance) * rng.normal();
            const auto pa = transition_posterior(sched, vx0, Vec::Constant(1, yb), ta, tb);
            const double ya = pa.mean[0] + std::sqrt(pa.variance) * rng.normal();
            sum += ya;
            sum2 += ya * ya;
        }
        const double emp_mean = sum / n;
        const double emp_var = sum2 / n - emp_mean * emp_mean;
        const auto direct = posterior_given_endpoints(sched, EndpointPair(vx0, vy1), ta);
        const double se_mean = std::sqrt(direct.variance / n);
        const double se_var = direct.variance * std::sqrt(2.0 / (n - 1.0));
        const bool ok = std::abs(emp_mean - direct.mean[0]) < 4.0 * se_mean &&
                        std::abs(emp_var - direct.variance) < 4.0 * se_var;
        add("posterior-composition-mc", ok,
            "mean dev " + format_double(std::abs(emp_mean - direct.mean[0]) / se_mean) + " se, var dev " +
                format_double(std::abs(emp_var - direct.variance) / se_var) + " se");
    }
    {  // constant-beta reductions (velocity is the fault-injection target)
        RandomStream rng(13);
        const EndpointPair pair(rng.normal_vec(2), rng.normal_vec(2));
        double worst_mu = 0.0, worst_v = 0.0;
        for (double t : uniform_grid(1e-3, 1.0, 200)) {
            const Vec mu = ode_point(cbeta, pair, t);
            const Vec lin = (1.0 - t) * pair.x0 + t * pair.y1;
            worst_mu = std::max(worst_mu, (mu - lin).cwiseAbs().maxCoeff());
            Vec v = velocity(cbeta, pair.x0, mu, t);
            if (inject_fault == "velocity-sign") v = -v;
            worst_v = std::max(worst_v, (v - (mu - pair.x0) / t).cwiseAbs().maxCoeff());
        }
        add("constant-beta-mean", worst_mu < 1e-12, "max deviation " + format_double(worst_mu));
        add("constant-beta-velocity", worst_v < 1e-9, "max deviation " + format_double(worst_v));
    }
    {  // regressor gradients vs finite differences
        RegressorConfig cfg;
        cfg.state_dim = 3;
        cfg.cond_dim = 0;
        cfg.hidden_dim = 8;
        cfg.depth = 2;
        cfg.emb_dim = 8;
        Regressor net = Regressor::init(cfg, 21);
        RandomStream rng(22);
        net.visit_tensors([&](double* p, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) p[i] += 0.05 * rng.normal();
        });
        const Vec y = rng.normal_vec(3);
        const Vec probe = rng.normal_vec(net.out_dim());
        const double t = 0.37;
        ForwardCache cache;
        net.forward(y, std::nullopt, t, &cache);
        Regressor grads = Regressor::like(net);
        net.backward(cache, probe, grads);
        double worst = 0.0;
        const double h = 1e-5;
        // parallel tensor walk (same visiting order on both structures);
        // relative error floored at 1e-3 of the gradient scale (components
        // near zero sit below the finite-difference noise floor)
        std::vector<std::pair<double*, std::size_t>> pt, gt;
        net.visit_tensors([&](double* p, std::size_t n) { pt.push_back({p, n}); });
        grads.visit_tensors([&](double* p, std::size_t n) { gt.push_back({p, n}); });
        double gscale = 0.0;
        grads.visit_tensors([&](double* p, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) gscale = std::max(gscale, std::abs(p[i]));
        });
        const double floor = 1e-3 * gscale;
        for (std::size_t k = 0; k < pt.size(); ++k) {
            auto [p, n] = pt[k];
            for (std::size_t i = 0; i < n; i += std::max<std::size_t>(1, n / 6)) {
                const double keep = p[i];
                p[i] = keep + h;
                const double fp = probe.dot(net.forward(y, std::nullopt, t));
                p[i] = keep - h;
                const double fm = probe.dot(net.forward(y, std::nullopt, t));
                p[i] = keep;
                const double num = (fp - fm) / (2.0 * h);
                const double ana = gt[k].first[i];
                worst = std::max(worst, std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), floor}));
            }
        }
        add("gradient-finite-difference", worst < 1e-5, "worst rel err " + format_double(worst));
    }
    {  // curvature closed forms vs numeric oracle
        std::vector<CouplingSample> sb_pairs, vp_unused;
        curvature_couplings(2, 512, 31, sb_pairs, vp_unused);
        const auto vp_pairs = vp_moment_coupling(256, 2, 32);
        const auto grid = curvature_grid(64);
        const double sbn = curvature_numeric(sb_mean_interpolant(sched), sb_pairs, grid).mean_curvature;
        const double sbc = curvature_sb_closed_form(sched, sb_pairs, grid).mean_curvature;
        const double vpn = curvature_numeric(vp_interpolant(NoiseSchedule::vp()), vp_pairs, grid).mean_curvature;
        const double vpc = curvature_vp_closed_form(NoiseSchedule::vp(), vp_pairs, grid).mean_curvature;
        const double rel_sb = std::abs(sbn - sbc) / sbc;
        const double rel_vp = std::abs(vpn - vpc) / vpc;
        add("curvature-cross-check", rel_sb < 1e-4 && rel_vp < 1e-3,
            "sb rel " + format_double(rel_sb) + ", vp rel " + format_double(rel_vp));
        const double cb0 =
            curvature_sb_closed_form(cbeta, sb_pairs, grid).mean_curvature;
        add("curvature-constant-beta-zero", std::abs(cb0) < 1e-8, "value " + format_double(cb0));
    }
    {  // oracle-net sampler recovery
        RandomStream rng(41);
        const Vec x0 = rng.normal_vec(4);
        const Vec y1 = rng.normal_vec(4);
        const EndpointPredictor oracle = [&x0](const Vec&, const std::optional<Vec>&, double) { return x0; };
        double worst = 0.0;
        for (SamplerMethod m : {SamplerMethod::EulerSde, SamplerMethod::Ode, SamplerMethod::Heun}) {
            SamplerConfig c = SamplerConfig::defaults(m);
            c.n_steps = m == SamplerMethod::Ode ? 1 : 4;
            auto [xh, tr] = run_sampler(c, oracle, sched, y1);
            worst = std::max(worst, (xh - x0).cwiseAbs().maxCoeff());
        }
        add("oracle-sampler-recovery", worst < 1e-12, "max deviation " + format_double(worst));
    }

    bool all = true;
    std::vector<std::string> failed;
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS  " : "FAIL  ") << r.name << "  (" << r.detail << ")\n";
        if (!r.pass) {
            all = false;
            failed.push_back(r.name);
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    std::cout << "check: " << (all ? "all invariants green" : "FAILED") << " in " << format_double(secs) << " s\n";
    if (secs > 60.0) std::cout << "warning: check exceeded the 60 s budget\n";
    if (!all) {
        std::cout << "failed invariants:";
        for (const auto& f : failed) std::cout << ' ' << f;
        std::cout << "\n";
        return kExitCheckFail;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"schrodinger-bridge matching toolkit"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, inject_fault;
    int n = 2000;

    auto* train_cmd = app.add_subcommand("train", "train an endpoint regressor from a JSON config");
    train_cmd->add_option("--config", config_path, "JSON config path")->required();

    auto* sample_cmd = app.add_subcommand("sample", "sample from a trained checkpoint");
    sample_cmd->add_option("--config", config_path, "JSON config path")->required();
    sample_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint path");
    sample_cmd->add_option("--n", n, "number of chains");
    bool oracle_net = false;
    sample_cmd->add_flag("--oracle-net", oracle_net, "test hook: predictor returns the drawn pair's true X0");

    auto* curv_cmd = app.add_subcommand("curvature", "curvature comparison of SB vs VP trajectories");
    curv_cmd->add_option("--config", config_path, "JSON config path")->required();

    auto* dump_cmd = app.add_subcommand("schedule-dump", "dump the beta/variance schedule as CSV");
    dump_cmd->add_option("--config", config_path, "JSON config path")->required();
    dump_cmd->add_option("--n", n, "number of uniform nodes")->default_val(101);

    auto* demo_cmd = app.add_subcommand("toy-demo", "end-to-end gauss8 -> swiss-roll transport demo");
    demo_cmd->add_option("--config", config_path, "JSON config path")->required();
    demo_cmd->add_option("--n", n, "number of generated samples");

    auto* check_cmd = app.add_subcommand("check", "run the invariant suite");
    check_cmd->add_option("--inject-fault", inject_fault, "test hook: name of a fault to inject");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(config_path);
        if (sample_cmd->parsed()) {
            if (!oracle_net && checkpoint_path.empty()) {
                std::cerr << "sample: --checkpoint is required without --oracle-net\n";
                return kExitConfig;
            }
            return cmd_sample(config_path, checkpoint_path, n, oracle_net);
        }
        if (curv_cmd->parsed()) return cmd_curvature(config_path);
        if (dump_cmd->parsed()) return cmd_schedule_dump(config_path, n);
        if (demo_cmd->parsed()) return cmd_toy_demo(config_path, n);
        if (check_cmd->parsed()) return cmd_check(inject_fault);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFail;
    }
    return kExitConfig;
}
