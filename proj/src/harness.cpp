#include "mdps/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

#include "json.hpp"

#include "mdps/baselines.hpp"
#include "mdps/neighbors.hpp"
#include "mdps/parallel.hpp"
#include "mdps/quality.hpp"

namespace mdps {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

Point3 make_point(double x, double y, double z) {
    return {static_cast<float>(x), static_cast<float>(y), static_cast<float>(z)};
}

void room_points(std::size_t n, Rng &rng, const GeneratorParams &g, std::vector<Point3> &out) {
    const double X = g.room_x, Y = g.room_y, Z = g.room_z;
    if (!(X > 0 && Y > 0 && Z > 0)) throw std::invalid_argument("room-surfaces: extents must be positive");
    // Rectangles as (origin, edge u, edge v); sampled proportionally to area.
    struct Rect {
        double o[3], u[3], v[3];
        double area() const {
            const double cu = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
            const double cv = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
            return cu * cv;
        }
    };
    const std::vector<Rect> rects = {
        {{0, 0, 0}, {X, 0, 0}, {0, Y, 0}},                        // floor
        {{0, 0, Z}, {X, 0, 0}, {0, Y, 0}},                        // ceiling
        {{0, 0, 0}, {X, 0, 0}, {0, 0, Z}},                        // walls
        {{0, Y, 0}, {X, 0, 0}, {0, 0, Z}},
        {{0, 0, 0}, {0, Y, 0}, {0, 0, Z}},
        {{X, 0, 0}, {0, Y, 0}, {0, 0, Z}},
        {{0.6 * X, 0, 0}, {0, 0.5 * Y, 0}, {0, 0, 0.8 * Z}},      // partition
        {{0.15 * X, 0.55 * Y, 0.25 * Z}, {0.3 * X, 0, 0}, {0, 0.25 * Y, 0}},  // table top
    };
    std::vector<double> cumulative;
    double total = 0.0;
    for (const auto &r : rects) cumulative.push_back(total += r.area());
    for (std::size_t i = 0; i < n; ++i) {
        const double pick = rng.uniform01() * total;
        const auto k = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), pick) -
                                                cumulative.begin());
        const auto &r = rects[std::min(k, rects.size() - 1)];
        const double a = rng.uniform01(), b = rng.uniform01();
        double p[3];
        for (int c = 0; c < 3; ++c) p[c] = r.o[c] + a * r.u[c] + b * r.v[c];
        if (g.surface_noise > 0) {
            for (double &c : p) c += rng.normal(0.0, g.surface_noise);
        }
        out.push_back(make_point(p[0], p[1], p[2]));
    }
}

}  // namespace

std::string_view to_string(CloudFamily f) noexcept {
    switch (f) {
        case CloudFamily::kUniformBox: return "uniform-box";
        case CloudFamily::kGaussianClusters: return "gaussian-clusters";
        case CloudFamily::kRoomSurfaces: return "room-surfaces";
        case CloudFamily::kLidarRings: return "lidar-rings";
    }
    return "unknown";
}

CloudFamily parse_cloud_family(std::string_view s) {
    for (auto f : {CloudFamily::kUniformBox, CloudFamily::kGaussianClusters, CloudFamily::kRoomSurfaces,
                   CloudFamily::kLidarRings}) {
        if (to_string(f) == s) return f;
    }
    throw std::invalid_argument("unknown cloud family: " + std::string(s));
}

PointCloud generate_cloud(CloudFamily family, std::size_t n, Rng &rng, const GeneratorParams &params) {
    if (n == 0) throw std::invalid_argument("generate_cloud: N must be at least 1");
    std::vector<Point3> pts;
    pts.reserve(n);
    switch (family) {
        case CloudFamily::kUniformBox:
            for (std::size_t i = 0; i < n; ++i) {
                const double x = rng.uniform01(), y = rng.uniform01(), z = rng.uniform01();
                pts.push_back(make_point(x, y, z));
            }
            break;
        case CloudFamily::kGaussianClusters: {
            if (params.clusters == 0 || !(params.cluster_sigma > 0)) {
                throw std::invalid_argument("gaussian-clusters: need clusters >= 1 and sigma > 0");
            }
            std::vector<std::array<double, 3>> centers(params.clusters);
            for (auto &c : centers) c = {rng.uniform01(), rng.uniform01(), rng.uniform01()};
            for (std::size_t i = 0; i < n; ++i) {
                const auto &c = centers[rng.uniform_index(centers.size())];
                const double x = rng.normal(c[0], params.cluster_sigma);
                const double y = rng.normal(c[1], params.cluster_sigma);
                const double z = rng.normal(c[2], params.cluster_sigma);
                pts.push_back(make_point(x, y, z));
            }
            break;
        }
        case CloudFamily::kRoomSurfaces:
            room_points(n, rng, params, pts);
            break;
        case CloudFamily::kLidarRings: {
            if (params.rings == 0 || !(params.ring_min > 0) || !(params.ring_spacing > 0)) {
                throw std::invalid_argument("lidar-rings: need rings >= 1 and positive radii");
            }
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t ring = i % params.rings;
                const double r = params.ring_min + static_cast<double>(ring) * params.ring_spacing +
                                 rng.normal(0.0, 0.01 * params.ring_spacing);
                const double theta = 2.0 * std::numbers::pi * rng.uniform01();
                const double z = -params.sensor_height + rng.normal(0.0, 0.02);
                pts.push_back(make_point(r * std::cos(theta), r * std::sin(theta), z));
            }
            break;
        }
    }
    return PointCloud(std::move(pts));
}

// ---------------------------------------------------------------------------

std::string_view to_string(EstimatorKind k) noexcept {
    switch (k) {
        case EstimatorKind::kOracle: return "oracle";
        case EstimatorKind::kPower: return "power";
        case EstimatorKind::kMlp: return "mlp";
    }
    return "unknown";
}

EstimatorKind parse_estimator_kind(std::string_view s) {
    for (auto k : {EstimatorKind::kOracle, EstimatorKind::kPower, EstimatorKind::kMlp}) {
        if (to_string(k) == s) return k;
    }
    throw std::invalid_argument("unknown estimator: " + std::string(s));
}

void validate(const BenchConfig &config) {
    if (config.repetitions < 1) throw std::invalid_argument("bench: repetitions must be >= 1");
    if (config.stride < 2) throw std::invalid_argument("bench: stride must be >= 2");
    if (config.clouds.empty()) throw std::invalid_argument("bench: no clouds configured");
    if (config.methods.empty()) throw std::invalid_argument("bench: no methods configured");
}

BenchConfig load_bench_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open bench config: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    BenchConfig c;
    c.stride = j.value("stride", c.stride);
    c.repetitions = j.value("repetitions", c.repetitions);
    c.warmup = j.value("warmup", c.warmup);
    c.threads = j.value("threads", c.threads);
    c.knn_k = j.value("knn_k", c.knn_k);
    c.training_clouds = j.value("training_clouds", c.training_clouds);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    for (const auto &jc : j.at("clouds")) {
        CloudSpec cs;
        cs.family = parse_cloud_family(jc.value("family", std::string(to_string(cs.family))));
        cs.n = jc.value("n", cs.n);
        cs.seed = jc.value("seed", cs.seed);
        c.clouds.push_back(cs);
    }
    for (const auto &jm : j.at("methods")) {
        MethodSpec ms;
        ms.method = parse_sample_method(jm.value("method", std::string("fps")));
        ms.estimator = parse_estimator_kind(jm.value("estimator", std::string("oracle")));
        ms.nseg = jm.value("nseg", ms.nseg);
        ms.p = jm.value("p", ms.p);
        const auto build = jm.value("exclusion_build", std::string("all-pairs"));
        if (build == "grid") {
            ms.build = ExclusionBuild::kCellGrid;
        } else if (build != "all-pairs") {
            throw std::invalid_argument("unknown exclusion_build: " + build);
        }
        if (jm.contains("model")) ms.model = jm.at("model").get<std::string>();
        if (ms.method == SampleMethod::kSingleThreshold) ms.nseg = 1;
        c.methods.push_back(ms);
    }
    validate(c);
    return c;
}

CurveEstimator make_estimator(const MethodSpec &spec, const CloudSpec &cloud, std::size_t n_samples,
                              std::size_t training_clouds, std::uint64_t rng_seed, unsigned threads) {
    if (spec.estimator == EstimatorKind::kOracle) return OracleCurve{};
    if (spec.model) {
        if (spec.estimator == EstimatorKind::kPower) return load_power(*spec.model);
        return load_mlp(*spec.model);
    }
    // Held-out training clouds: same family and size, disjoint seeds.
    std::vector<MinDistCurve> curves;
    for (std::size_t k = 0; k < std::max<std::size_t>(1, training_clouds); ++k) {
        Rng rng = Rng(cloud.seed).split(1000 + k);
        const auto train = generate_cloud(cloud.family, cloud.n, rng);
        curves.push_back(oracle_estimator(train, n_samples, 0, threads));
    }
    if (spec.estimator == EstimatorKind::kPower) return fit_power_exponent(curves);
    std::vector<TrainingPair> pairs;
    for (const auto &c : curves) pairs.push_back(make_training_pair(c, spec.p));
    Rng rng(rng_seed);
    return mlp_train(pairs, 200, 0.01, rng).model;
}

BenchReport run_bench(const BenchConfig &config) {
    validate(config);
    const unsigned threads = resolve_threads(config.threads);
    BenchReport report;
    for (const auto &cs : config.clouds) {
        Rng gen_rng(cs.seed);
        const PointCloud cloud = generate_cloud(cs.family, cs.n, gen_rng);
        const std::size_t n = count_for_stride(cloud.size(), config.stride);
        const auto baseline = fps(cloud, n, 0, threads);
        if (n < 2) throw std::invalid_argument("bench: stride leaves fewer than 2 samples");

        for (const auto &ms : config.methods) {
            const bool predictive = ms.method == SampleMethod::kMdps || ms.method == SampleMethod::kSingleThreshold;
            MdpsConfig mc;
            if (predictive) {
                mc.p = ms.p;
                mc.nseg = ms.method == SampleMethod::kSingleThreshold ? 1 : ms.nseg;
                mc.build = ms.build;
                mc.threads = threads;
                mc.rng_seed = config.rng_seed;
                mc.estimator = make_estimator(ms, cs, n, config.training_clouds, config.rng_seed, threads);
            }

            std::vector<StageTimes> times;
            SampleResult result;
            std::optional<MdpsOutput> last_mdps;
            for (std::size_t rep = 0; rep < config.warmup + config.repetitions; ++rep) {
                const auto t0 = Clock::now();
                switch (ms.method) {
                    case SampleMethod::kFps:
                        result = fps(cloud, n, 0, threads).result;
                        break;
                    case SampleMethod::kRandom: {
                        Rng rng(config.rng_seed);
                        result = random_sample(cloud, n, rng);
                        break;
                    }
                    case SampleMethod::kGrid:
                        result = grid_sample_to_count(cloud, n, 0.05);
                        break;
                    case SampleMethod::kMdps:
                    case SampleMethod::kSingleThreshold:
                        last_mdps = mdps(cloud, n, mc);
                        result = last_mdps->result;
                        break;
                }
                StageTimes st = result.stats ? result.stats->times : StageTimes{};
                st.total_ms = elapsed_ms(t0);
                if (rep >= config.warmup) times.push_back(st);
            }

            BenchRow base;
            base.family = std::string(to_string(cs.family));
            base.n_points = cloud.size();
            base.method = std::string(to_string(ms.method));
            base.estimator = predictive ? std::string(to_string(ms.estimator)) : "-";
            base.nseg = predictive ? mc.nseg : 0;
            base.p = predictive ? mc.p : 0.0;
            base.threads = threads;
            base.quality_ratio_pct = quality_ratio(cloud, result, baseline.result, threads);
            if (result.stats) {
                base.early_term_frac =
                    static_cast<double>(result.stats->early_term_iters) / static_cast<double>(result.size());
            }
            if (last_mdps && config.knn_k > 0) {
                std::vector<Index> all(cloud.size());
                for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Index>(i);
                const auto flags = membership(result.indices, cloud.size());
                base.fallback_count =
                    rf_knn(cloud, last_mdps->exclusion, flags, all, config.knn_k, threads).fallback_count;
            }

            auto add_stage = [&](const char *stage, double StageTimes::*field) {
                std::vector<double> v;
                for (const auto &t : times) v.push_back(t.*field);
                BenchRow row = base;
                row.stage = stage;
                row.time_ms_median = median(v);
                row.time_ms_min = *std::min_element(v.begin(), v.end());
                report.rows.push_back(row);
            };
            add_stage("total", &StageTimes::total_ms);
            if (predictive) {
                add_stage("curve-estimation", &StageTimes::curve_estimation_ms);
                add_stage("segmentation", &StageTimes::segmentation_ms);
                add_stage("sampling", &StageTimes::sampling_ms);
                add_stage("early-termination", &StageTimes::early_termination_ms);
            }
        }
    }
    return report;
}

void write_bench_csv(const BenchReport &report, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "family,N,method,estimator,nseg,p,threads,stage,time_ms_median,time_ms_min,quality_ratio_pct,"
           "early_term_frac,fallback_count\n";
    out << std::setprecision(10);
    for (const auto &r : report.rows) {
        out << r.family << ',' << r.n_points << ',' << r.method << ',' << r.estimator << ',' << r.nseg << ',' << r.p
            << ',' << r.threads << ',' << r.stage << ',' << r.time_ms_median << ',' << r.time_ms_min << ','
            << r.quality_ratio_pct << ',' << r.early_term_frac << ',' << r.fallback_count << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_bench_json(const BenchReport &report, const std::filesystem::path &path) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto &r : report.rows) {
        rows.push_back({{"family", r.family},
                        {"N", r.n_points},
                        {"method", r.method},
                        {"estimator", r.estimator},
                        {"nseg", r.nseg},
                        {"p", r.p},
                        {"threads", r.threads},
                        {"stage", r.stage},
                        {"time_ms_median", r.time_ms_median},
                        {"time_ms_min", r.time_ms_min},
                        {"quality_ratio_pct", r.quality_ratio_pct},
                        {"early_term_frac", r.early_term_frac},
                        {"fallback_count", r.fallback_count}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << nlohmann::json{{"rows", rows}}.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

namespace {

AblationRow run_ablation_point(const PointCloud &cloud, std::size_t n, const MdpsConfig &config,
                               const SampleResult &baseline) {
    const auto out = mdps(cloud, n, config);
    AblationRow row;
    row.p = config.p;
    row.nseg = config.nseg;
    row.quality_ratio_pct = quality_ratio(cloud, out.result, baseline, config.threads);
    row.total_ms = out.result.stats->times.total_ms;
    row.early_term_frac = static_cast<double>(out.result.stats->early_term_iters) / static_cast<double>(n);
    return row;
}

void check_monotone(AblationReport &report, double margin_pct) {
    for (std::size_t k = 1; k < report.rows.size(); ++k) {
        for (std::size_t j = 0; j < k; ++j) {
            if (report.rows[k].quality_ratio_pct < report.rows[j].quality_ratio_pct - margin_pct) {
                report.monotone_within_margin = false;
            }
        }
    }
}

}  // namespace

AblationReport ablation_p(const PointCloud &cloud, std::size_t n, const MdpsConfig &base,
                          const std::vector<double> &p_values, double margin_pct) {
    auto sorted = p_values;
    std::sort(sorted.begin(), sorted.end());
    const auto baseline = fps(cloud, n, base.seed_index, base.threads);
    MdpsConfig config = base;
    if (auto *o = std::get_if<OracleCurve>(&config.estimator); o && o->truth.values.empty()) {
        o->truth = baseline.curve;
    }
    AblationReport report;
    for (double p : sorted) {
        config.p = p;
        report.rows.push_back(run_ablation_point(cloud, n, config, baseline.result));
    }
    check_monotone(report, margin_pct);
    return report;
}

AblationReport ablation_nseg(const PointCloud &cloud, std::size_t n, const MdpsConfig &base,
                             const std::vector<std::size_t> &nseg_values, double margin_pct) {
    auto sorted = nseg_values;
    std::sort(sorted.begin(), sorted.end());
    const auto baseline = fps(cloud, n, base.seed_index, base.threads);
    MdpsConfig config = base;
    if (auto *o = std::get_if<OracleCurve>(&config.estimator); o && o->truth.values.empty()) {
        o->truth = baseline.curve;
    }
    AblationReport report;
    for (std::size_t s : sorted) {
        config.nseg = s;
        report.rows.push_back(run_ablation_point(cloud, n, config, baseline.result));
    }
    check_monotone(report, margin_pct);
    return report;
}

void save_sample_stats(const SampleResult &result, const std::filesystem::path &path) {
    const SampleStats stats = result.stats.value_or(SampleStats{});
    nlohmann::json j{
        {"method", std::string(to_string(result.method))},
        {"sample_count", result.size()},
        {"fps_prefix_iters", stats.fps_prefix_iters},
        {"early_term_iters", stats.early_term_iters},
        {"segments_entered", stats.segments_entered},
        {"degenerate_curve", stats.degenerate_curve},
        {"stage_ms",
         {{"curve_estimation", stats.times.curve_estimation_ms},
          {"segmentation", stats.times.segmentation_ms},
          {"sampling", stats.times.sampling_ms},
          {"early_termination", stats.times.early_termination_ms},
          {"total", stats.times.total_ms}}},
    };
    if (result.method == SampleMethod::kGrid) {
        j["achieved_count"] = stats.achieved_count;
        j["voxel_size"] = stats.voxel_size;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace mdps
