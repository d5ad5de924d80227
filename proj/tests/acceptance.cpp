// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "mdps/baselines.hpp"
#include "mdps/curve.hpp"
#include "mdps/harness.hpp"
#include "mdps/neighbors.hpp"
#include "mdps/parallel.hpp"
#include "mdps/quality.hpp"
#include "mdps/sampler.hpp"

using namespace mdps;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
    bool pass = true;
    std::string detail;

    void fail(const std::string &why) {
        if (pass) detail = why;
        pass = false;
    }
};

bool distinct(const std::vector<Index> &v) { return std::set<Index>(v.begin(), v.end()).size() == v.size(); }

std::string fmt(const char *f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// Clouds shared by A3, A4 and A9.
struct QualityCase {
    CloudFamily family;
    PointCloud cloud;
    FpsOutput baseline;
};

std::vector<QualityCase> &quality_cases() {
    static std::vector<QualityCase> cases = [] {
        std::vector<QualityCase> out;
        for (auto family : {CloudFamily::kUniformBox, CloudFamily::kRoomSurfaces}) {
            for (std::uint64_t seed = 1; seed <= 5; ++seed) {
                Rng rng(seed);
                auto cloud = generate_cloud(family, 10000, rng);
                auto base = fps(cloud, count_for_stride(cloud.size(), 4));
                out.push_back({family, std::move(cloud), std::move(base)});
            }
        }
        return out;
    }();
    return cases;
}

MdpsConfig oracle_config(const MinDistCurve &truth, std::size_t nseg) {
    MdpsConfig c;
    c.estimator = OracleCurve{truth};
    c.nseg = nseg;
    return c;
}

// A1 ----------------------------------------------------------------------
Verdict a1() {
    Verdict v;
    const unsigned max_threads = std::max(4u, default_threads());
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(1000 + seed);
        const std::size_t n_points = 1 + rng.uniform_index(seed < 50 ? 300 : 1000);
        std::vector<Point3> pts(n_points);
        // Every fourth cloud lives on a coarse lattice to force ties.
        for (auto &p : pts) {
            if (seed % 4 == 0) {
                p = {float(rng.uniform_index(5)), float(rng.uniform_index(5)), float(rng.uniform_index(5))};
            } else {
                p = {float(rng.uniform01()), float(rng.uniform01()), float(rng.uniform01())};
            }
        }
        const PointCloud cloud(std::move(pts));
        const std::size_t n = 1 + rng.uniform_index(seed < 50 ? n_points : std::min<std::size_t>(n_points, 200));
        const auto seed_index = static_cast<Index>(rng.uniform_index(n_points));
        const auto one = fps(cloud, n, seed_index, 1).result.indices;
        if (one != fps_bruteforce_oracle(cloud, n, seed_index).indices) v.fail("oracle mismatch, cloud " + std::to_string(seed));
        if (one != fps(cloud, n, seed_index, max_threads).result.indices) v.fail("thread mismatch, cloud " + std::to_string(seed));
    }
    if (v.pass) v.detail = "100 clouds, 1 vs " + std::to_string(max_threads) + " threads";
    return v;
}

// A2 ----------------------------------------------------------------------
Verdict a2() {
    Verdict v;
    std::size_t fallbacks = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(2000 + seed);
        const std::size_t n_points = 50 + rng.uniform_index(1951);
        const auto family = static_cast<CloudFamily>(seed % 4);
        const auto cloud = generate_cloud(family, n_points, rng);
        const std::size_t n = std::max<std::size_t>(2, n_points / 4);
        const auto truth = oracle_estimator(cloud, n);

        MdpsConfig c = oracle_config(truth, 1 + seed % 6);
        // Every third cloud shrinks R_1 below typical spacing to force the fallback.
        if (seed % 3 == 0) {
            const double tiny = truth[n - 1] * 0.05 + 1e-9;
            c.estimator = CustomEstimator{[tiny](const CurvePrefix &p) {
                MinDistCurve out{p.measured};
                out.values.resize(p.n_total, tiny);
                return out;
            }};
        }
        const double ball_r = cloud.bbox_diagonal() * (0.02 + 0.05 * rng.uniform01());
        c.extra_radii = {ball_r};
        c.rng_seed = seed;
        const auto run = mdps::mdps(cloud, n, c);
        const auto &centroids = run.result.indices;

        const std::size_t cap = seed % 2 ? 32 : n_points;
        if (rf_ball_query(run.exclusion, ball_r, centroids, cap).lists !=
            ball_query_naive(cloud, centroids, ball_r, cap).lists) {
            v.fail("ball query mismatch, cloud " + std::to_string(seed));
        }
        for (std::size_t l = 0; l < run.thresholds.segments(); ++l) {
            const double r = run.exclusion.level_radii()[l];
            if (rf_ball_query(run.exclusion, r, centroids, cap).lists != ball_query_naive(cloud, centroids, r, cap).lists) {
                v.fail("threshold-radius ball query mismatch, cloud " + std::to_string(seed));
            }
        }

        std::vector<Index> all(n_points);
        for (std::size_t i = 0; i < n_points; ++i) all[i] = static_cast<Index>(i);
        const auto sampled = membership(centroids, n_points);
        for (std::size_t k : {1u, 3u, 16u}) {
            const auto rf = rf_knn(cloud, run.exclusion, sampled, all, k);
            fallbacks += rf.fallback_count;
            if (rf.lists != knn_naive(cloud, all, centroids, k).lists) v.fail("knn mismatch, cloud " + std::to_string(seed));
        }
    }
    if (fallbacks == 0) v.fail("fallback path never exercised");
    if (v.pass) v.detail = "100 clouds, " + std::to_string(fallbacks) + " fallback queries";
    return v;
}

// A3 / A4 / A9 ------------------------------------------------------------
struct QualityRuns {
    std::vector<double> oracle6, oracle1, power6;
    std::vector<double> l1_six, l1_one;
    std::vector<double> early_frac;
};

QualityRuns &quality_runs() {
    static QualityRuns runs = [] {
        QualityRuns r;
        for (const auto &qc : quality_cases()) {
            const std::size_t n = qc.baseline.result.size();
            const auto six = mdps::mdps(qc.cloud, n, oracle_config(qc.baseline.curve, 6));
            const auto one = mdps::mdps(qc.cloud, n, oracle_config(qc.baseline.curve, 1));

            // Exponent from 5 held-out clouds of the same family.
            std::vector<MinDistCurve> train;
            for (std::uint64_t k = 0; k < 5; ++k) {
                Rng rng(500 + k);
                train.push_back(oracle_estimator(generate_cloud(qc.family, qc.cloud.size(), rng), n));
            }
            MdpsConfig pc;
            pc.estimator = fit_power_exponent(train);
            const auto pw = mdps::mdps(qc.cloud, n, pc);

            r.oracle6.push_back(quality_ratio(qc.cloud, six.result, qc.baseline.result));
            r.oracle1.push_back(quality_ratio(qc.cloud, one.result, qc.baseline.result));
            r.power6.push_back(quality_ratio(qc.cloud, pw.result, qc.baseline.result));
            r.early_frac.push_back(double(six.result.stats->early_term_iters) / double(n));

            const auto sf = nearest_other_spacings(qc.cloud, qc.baseline.result);
            const auto s6 = nearest_other_spacings(qc.cloud, six.result);
            const auto s1 = nearest_other_spacings(qc.cloud, one.result);
            const double upper = std::max({*std::max_element(sf.begin(), sf.end()),
                                           *std::max_element(s6.begin(), s6.end()),
                                           *std::max_element(s1.begin(), s1.end())});
            const auto hf = make_histogram(sf, 50, upper);
            r.l1_six.push_back(histogram_l1(make_histogram(s6, 50, upper), hf));
            r.l1_one.push_back(histogram_l1(make_histogram(s1, 50, upper), hf));
        }
        return r;
    }();
    return runs;
}

Verdict a3() {
    Verdict v;
    const auto &r = quality_runs();
    const double o = *std::min_element(r.oracle6.begin(), r.oracle6.end());
    const double p = *std::min_element(r.power6.begin(), r.power6.end());
    if (o < 97.0) v.fail(fmt("oracle min %.2f%% < 97%%", o));
    if (p < 93.0) v.fail(fmt("power min %.2f%% < 93%%", p));
    if (v.pass) v.detail = fmt("oracle min %.2f%%", o) + fmt(", power min %.2f%%", p);
    return v;
}

Verdict a4() {
    Verdict v;
    const auto &r = quality_runs();
    double worst_gap = kInfinity;
    for (std::size_t k = 0; k < r.oracle6.size(); ++k) {
        worst_gap = std::min(worst_gap, r.oracle6[k] - r.oracle1[k]);
        if (r.oracle6[k] < r.oracle1[k] - 0.2) v.fail("cloud " + std::to_string(k) + fmt(": nseg=6 quality below nseg=1 by %.3f", r.oracle1[k] - r.oracle6[k]));
        if (!(r.l1_six[k] < r.l1_one[k])) v.fail("cloud " + std::to_string(k) + ": nseg=6 histogram not closer to FPS");
    }
    if (v.pass) v.detail = fmt("worst quality gap (6 - 1) %+.3f points", worst_gap);
    return v;
}

Verdict a9() {
    Verdict v;
    const auto &r = quality_runs();
    const double worst = *std::max_element(r.early_frac.begin(), r.early_frac.end());
    if (worst > 0.10) v.fail(fmt("early termination %.2f%% of n", 100 * worst));

    std::size_t over_et = 0;
    for (const auto &qc : quality_cases()) {
        const std::size_t n = qc.baseline.result.size();
        MinDistCurve doubled = qc.baseline.curve;
        for (double &x : doubled.values) x *= 2.0;
        MdpsConfig c;
        c.estimator = CustomEstimator{[&doubled](const CurvePrefix &p) {
            MinDistCurve out = doubled;
            std::copy(p.measured.begin(), p.measured.end(), out.values.begin());
            return out;
        }};
        const auto out = mdps::mdps(qc.cloud, n, c);
        if (out.result.size() != n || !distinct(out.result.indices)) v.fail("overestimator returned a bad sample");
        over_et = std::max(over_et, out.result.stats->early_term_iters);
    }
    if (v.pass) v.detail = fmt("worst early termination %.2f%% of n", 100 * worst) + ", 2x overestimate ok (max " + std::to_string(over_et) + " fallback iters)";
    return v;
}

// A5 ----------------------------------------------------------------------
Verdict a5() {
    Verdict v;
    Rng rng(55);
    const auto cloud = generate_cloud(CloudFamily::kUniformBox, 100000, rng);
    const std::size_t n = count_for_stride(cloud.size(), 4);
    const unsigned threads = std::max(4u, default_threads());

    auto median_of_5 = [](const std::function<void()> &fn) {
        std::vector<double> t;
        for (int k = 0; k < 5; ++k) {
            const auto t0 = Clock::now();
            fn();
            t.push_back(seconds_since(t0));
        }
        std::sort(t.begin(), t.end());
        return t[2];
    };

    // Baseline: the faster of single-threaded and multi-threaded exact FPS.
    MinDistCurve truth;
    const double fps_1 = median_of_5([&] { truth = fps(cloud, n, 0, 1).curve; });
    const double fps_t = median_of_5([&] { fps(cloud, n, 0, threads); });
    const double fps_best = std::min(fps_1, fps_t);

    MdpsConfig c = oracle_config(truth, 6);
    c.threads = threads;
    c.build = ExclusionBuild::kCellGrid;
    SampleResult last;
    const double md = median_of_5([&] { last = mdps::mdps(cloud, n, c).result; });
    const double ratio = md / fps_best;
    if (last.size() != n || !distinct(last.indices)) v.fail("mdps returned a bad sample");
    if (ratio > 0.67) v.fail(fmt("mdps/fps = %.3f > 0.67", ratio));
    v.detail = (v.pass ? std::string() : v.detail + "; ") + fmt("fps %.3fs", fps_best) + fmt(", mdps %.3fs", md) +
               fmt(", ratio %.3f", ratio) + " (" + std::to_string(threads) + " threads, " +
               std::to_string(default_threads()) + " cores)";
    return v;
}

// A6 ----------------------------------------------------------------------
Verdict a6() {
    Verdict v;
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(6000 + seed);
        const auto family = static_cast<CloudFamily>(seed % 4);
        const auto cloud = generate_cloud(family, 500 + rng.uniform_index(1501), rng);
        const std::size_t n = cloud.size() / (2 + seed % 4);
        MdpsConfig c;
        c.nseg = 1 + seed % 7;
        c.rng_seed = seed;
        if (seed % 2) c.estimator = fit_power_exponent(std::vector<MinDistCurve>{oracle_estimator(cloud, n)});
        const auto out = mdps::mdps(cloud, n, c);
        const auto &idx = out.result.indices;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const auto s = out.sample_segment[i];
            if (s == 0) continue;
            ++checked;
            const double r = out.thresholds.radii[s - 1];
            for (std::size_t j = 0; j < i; ++j) {
                if (within_radius(squared_distance(cloud[idx[i]], cloud[idx[j]]), r)) {
                    v.fail("sample " + std::to_string(i) + " of cloud " + std::to_string(seed) + " violates R_" + std::to_string(s));
                }
            }
        }
    }
    if (v.pass) v.detail = std::to_string(checked) + " predicted-distance samples checked";
    return v;
}

// A7 ----------------------------------------------------------------------
Verdict a7() {
    Verdict v;
    Rng rng(7);
    const auto cloud = generate_cloud(CloudFamily::kUniformBox, 1500, rng);
    const std::size_t n = 375;
    const auto truth = oracle_estimator(cloud, n);
    const std::uint64_t expect = 1500ull * 1499 / 2 + 1500;
    for (std::size_t nseg : {1u, 6u}) {
        for (bool extra : {false, true}) {
            auto t = segment_thresholds(truth, nseg);
            const std::vector<double> radii = extra ? std::vector<double>{0.1} : std::vector<double>{};
            DistanceCounter::reset();
            const auto e = build_exclusion_lists(cloud, t, radii, ExclusionBuild::kAllPairs);
            if (DistanceCounter::value() != expect || e.distance_evaluations() != expect) {
                v.fail("nseg " + std::to_string(nseg) + (extra ? " +radius" : "") + ": " +
                       std::to_string(DistanceCounter::value()) + " evaluations");
            }
        }
    }
    if (v.pass) v.detail = std::to_string(expect) + " evaluations in all 4 configurations";
    return v;
}

// A8 ----------------------------------------------------------------------
Verdict a8() {
    Verdict v;
    // (i) exact power laws
    double worst_fit = 0.0;
    for (double e : {0.25, 1.0 / 3.0, 0.5, 1.0, 2.0}) {
        std::vector<MinDistCurve> curves;
        for (double a : {0.5, 3.0, 40.0}) {
            MinDistCurve c{{kInfinity}};
            for (std::size_t i = 1; i < 1000; ++i) c.values.push_back(a / std::pow(double(i), e));
            curves.push_back(c);
        }
        worst_fit = std::max(worst_fit, std::abs(fit_power_exponent(curves).exponent - e));
    }
    if (worst_fit > 1e-6) v.fail(fmt("power fit error %.3g", worst_fit));

    // (ii) gradients vs central differences
    Rng rng(8);
    double worst_grad = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        const std::vector<std::size_t> sizes{8, 12, 10, 6};
        MlpModel m = MlpModel::random_init(sizes, rng);
        for (auto &l : m.layers()) {
            for (double &b : l.bias) b = rng.uniform(-0.3, 0.3);
        }
        std::vector<double> x(8), y(6);
        for (double &t : x) t = rng.uniform(-1, 1);
        for (double &t : y) t = rng.uniform(-1, 1);
        MlpModel g(sizes);
        mlp_loss_and_gradient(m, x, y, g);
        for (std::size_t l = 0; l < m.layers().size(); ++l) {
            for (int bias = 0; bias < 2; ++bias) {
                auto &param = bias ? m.layers()[l].bias : m.layers()[l].weights;
                const auto &grad = bias ? g.layers()[l].bias : g.layers()[l].weights;
                for (std::size_t k = 0; k < param.size(); ++k) {
                    const double keep = param[k];
                    param[k] = keep + 1e-3;
                    const double up = mlp_loss(m, x, y);
                    param[k] = keep - 1e-3;
                    const double down = mlp_loss(m, x, y);
                    param[k] = keep;
                    const double fd = (up - down) / 2e-3;
                    worst_grad = std::max(worst_grad, std::abs(fd - grad[k]) / std::max(1.0, std::abs(fd)));
                }
            }
        }
    }
    if (worst_grad > 1e-4) v.fail(fmt("gradient error %.3g", worst_grad));

    // (iii) single-sample overfit
    Rng cloud_rng(88);
    const auto overfit_curve = oracle_estimator(generate_cloud(CloudFamily::kRoomSurfaces, 10000, cloud_rng), 2500);
    Rng train_rng(9);
    const auto trained =
        mlp_train(std::vector<TrainingPair>{make_training_pair(overfit_curve, 0.1)}, 200, 0.01, train_rng);
    const double drop = trained.initial_loss / trained.loss_trace.back();
    if (drop < 10.0) v.fail(fmt("overfit reduced MSE only %.2fx", drop));

    // (iv) power estimator on held-out uniform clouds
    const std::size_t n_points = 10000, n = 2500;
    std::vector<MinDistCurve> fit_set, held_out;
    for (std::uint64_t k = 0; k < 5; ++k) {
        Rng a(800 + k), b(900 + k);
        fit_set.push_back(oracle_estimator(generate_cloud(CloudFamily::kUniformBox, n_points, a), n));
        held_out.push_back(oracle_estimator(generate_cloud(CloudFamily::kUniformBox, n_points, b), n));
    }
    const PowerModel model = fit_power_exponent(fit_set);
    double worst_mape = 0.0;
    for (const auto &truth : held_out) {
        const std::size_t m = prefix_length(n, 0.1);
        const CurvePrefix prefix{{truth.values.begin(), truth.values.begin() + static_cast<std::ptrdiff_t>(m)}, n};
        worst_mape = std::max(worst_mape, estimator_mape(estimate_power(prefix, model), truth, 0.1));
    }
    if (worst_mape > 5.0) v.fail(fmt("power MAPE %.2f%% > 5%%", worst_mape));

    if (v.pass) {
        v.detail = fmt("fit err %.2g", worst_fit) + fmt(", grad err %.2g", worst_grad) + fmt(", overfit %.0fx", drop) +
                   fmt(", power MAPE %.2f%%", worst_mape);
    }
    return v;
}

// A10 ---------------------------------------------------------------------
Verdict a10() {
    Verdict v;
    std::size_t curves = 0;
    for (int f = 0; f < 4; ++f) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            Rng rng(10000 + 10 * f + seed);
            const auto cloud = generate_cloud(static_cast<CloudFamily>(f), 4000, rng);
            const auto c = oracle_estimator(cloud, 1000);
            ++curves;
            for (std::size_t i = 2; i < c.size(); ++i) {
                if (c[i] > c[i - 1]) v.fail(std::string(to_string(static_cast<CloudFamily>(f))) + " curve rises at " + std::to_string(i));
            }
        }
    }
    for (const auto &qc : quality_cases()) {
        ++curves;
        const auto &c = qc.baseline.curve;
        for (std::size_t i = 2; i < c.size(); ++i) {
            if (c[i] > c[i - 1]) v.fail("A3 cloud curve rises");
        }
    }
    if (v.pass) v.detail = std::to_string(curves) + " curves non-increasing";
    return v;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char *, Verdict (*)()>> criteria{
        {"A1 fps exactness", a1},          {"A2 neighbor exactness", a2}, {"A3 sampling quality", a3},
        {"A4 segment-count trend", a4},    {"A5 relative speed", a5},     {"A6 step-function bound", a6},
        {"A7 distance-once count", a7},    {"A8 estimator correctness", a8}, {"A9 early termination", a9},
        {"A10 curve monotonicity", a10},
    };
    int failures = 0;
    for (const auto &[name, run] : criteria) {
        const auto t0 = Clock::now();
        Verdict v;
        try {
            v = run();
        } catch (const std::exception &e) {
            v.fail(std::string("exception: ") + e.what());
        }
        std::printf("%s %-26s %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
        failures += v.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
