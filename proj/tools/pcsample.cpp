// pcsample: command-line front end for the sampling library.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "mdps/baselines.hpp"
#include "mdps/curve.hpp"
#include "mdps/harness.hpp"
#include "mdps/io.hpp"
#include "mdps/neighbors.hpp"
#include "mdps/quality.hpp"
#include "mdps/sampler.hpp"

namespace fs = std::filesystem;
using namespace mdps;

namespace {

struct GenArgs {
    std::string family = "uniform-box";
    std::size_t n = 10000;
    std::uint64_t seed = 1;
    fs::path out;
};

struct SampleArgs {
    std::string method = "fps";
    std::optional<std::size_t> n;
    std::optional<std::size_t> stride;
    fs::path input;
    fs::path output;
    std::string seed_index = "0";
    std::uint64_t rng_seed = 0;
    std::string estimator = "oracle";
    double p = 0.1;
    std::size_t nseg = 6;
    std::optional<fs::path> model;
    std::optional<fs::path> stats_out;
    std::string pick = "random";
    std::string exclusion_build = "all-pairs";
    unsigned threads = 0;
    std::optional<double> voxel_size;
};

struct CurveArgs {
    fs::path input;
    fs::path output;
    std::vector<fs::path> curves;
    std::optional<std::size_t> n;
    std::optional<std::size_t> stride;
    std::size_t epochs = 200;
    double lr = 0.01;
    double p = 0.1;
    std::uint64_t rng_seed = 0;
    std::string estimator = "power";
    std::optional<fs::path> model;
    unsigned threads = 0;
};

struct NeighborArgs {
    std::string mode = "ball";
    std::string impl = "naive";
    std::optional<double> radius;
    std::size_t k = 3;
    std::size_t max_neighbors = 64;
    fs::path input;
    fs::path centroids;
    fs::path output;
    // rf needs the sampling parameters to rebuild the same exclusion lists
    std::string estimator = "oracle";
    double p = 0.1;
    std::size_t nseg = 6;
    std::optional<fs::path> model;
    unsigned threads = 0;
};

struct QualityArgs {
    fs::path input;
    fs::path samples;
    std::optional<fs::path> baseline;
    std::optional<fs::path> hist_out;
    std::optional<fs::path> report_out;
    std::size_t bins = 50;
    unsigned threads = 0;
};

struct BenchArgs {
    fs::path config;
    fs::path out_dir = ".";
};

std::size_t resolve_count(const PointCloud &cloud, const std::optional<std::size_t> &n,
                          const std::optional<std::size_t> &stride) {
    if (n && stride) throw std::invalid_argument("give either --n or --stride, not both");
    if (n) return *n;
    if (stride) {
        if (*stride < 1) throw std::invalid_argument("--stride must be at least 1");
        return count_for_stride(cloud.size(), *stride);
    }
    throw std::invalid_argument("one of --n or --stride is required");
}

CurveEstimator load_estimator(const std::string &name, const std::optional<fs::path> &model) {
    switch (parse_estimator_kind(name)) {
        case EstimatorKind::kOracle: return OracleCurve{};
        case EstimatorKind::kPower:
            if (!model) throw std::invalid_argument("--model is required for the power estimator");
            return load_power(*model);
        case EstimatorKind::kMlp:
            if (!model) throw std::invalid_argument("--model is required for the mlp estimator");
            return load_mlp(*model);
    }
    throw std::invalid_argument("unknown estimator");
}

int run_gen(const GenArgs &a) {
    Rng rng(a.seed);
    save_cloud(generate_cloud(parse_cloud_family(a.family), a.n, rng), a.out);
    return 0;
}

int run_sample(const SampleArgs &a) {
    const PointCloud cloud = load_cloud(a.input);
    const SampleMethod method = parse_sample_method(a.method);
    Rng rng(a.rng_seed);
    Index seed = 0;
    if (a.seed_index == "random") {
        seed = static_cast<Index>(rng.split(0xfeed).uniform_index(cloud.size()));
    } else {
        seed = static_cast<Index>(std::stoul(a.seed_index));
    }

    SampleResult result;
    if (method == SampleMethod::kGrid && a.voxel_size) {
        result = grid_sample(cloud, *a.voxel_size);
    } else {
        const std::size_t n = resolve_count(cloud, a.n, a.stride);
        switch (method) {
            case SampleMethod::kFps: result = fps(cloud, n, seed, a.threads).result; break;
            case SampleMethod::kRandom: result = random_sample(cloud, n, rng); break;
            case SampleMethod::kGrid: result = grid_sample_to_count(cloud, n, 0.05); break;
            case SampleMethod::kMdps:
            case SampleMethod::kSingleThreshold: {
                MdpsConfig c;
                c.p = a.p;
                c.nseg = method == SampleMethod::kSingleThreshold ? 1 : a.nseg;
                c.estimator = load_estimator(a.estimator, a.model);
                c.seed_index = seed;
                c.rng_seed = a.rng_seed;
                c.pick = a.pick == "lowest" ? PickMode::kLowestIndex : PickMode::kRandom;
                c.build = a.exclusion_build == "grid" ? ExclusionBuild::kCellGrid : ExclusionBuild::kAllPairs;
                c.threads = a.threads;
                result = mdps::mdps(cloud, n, c).result;
                break;
            }
        }
    }
    save_indices(result.indices, a.output);
    if (a.stats_out) save_sample_stats(result, *a.stats_out);
    return 0;
}

int run_curve_extract(const CurveArgs &a) {
    const PointCloud cloud = load_cloud(a.input);
    const std::size_t n = a.n || a.stride ? resolve_count(cloud, a.n, a.stride) : cloud.size();
    save_curve(oracle_estimator(cloud, n, 0, a.threads), a.output);
    return 0;
}

int run_curve_fit_power(const CurveArgs &a) {
    std::vector<MinDistCurve> curves;
    for (const auto &path : a.curves) curves.push_back(load_curve(path));
    const PowerModel model = fit_power_exponent(curves);
    save_power(model, a.output);
    std::cout << "exponent " << std::setprecision(17) << model.exponent << '\n';
    return 0;
}

int run_curve_train_mlp(const CurveArgs &a) {
    std::vector<TrainingPair> pairs;
    for (const auto &path : a.curves) pairs.push_back(make_training_pair(load_curve(path), a.p));
    Rng rng(a.rng_seed);
    const auto trained = mlp_train(pairs, a.epochs, a.lr, rng);
    save_mlp(trained.model, a.output);
    std::cout << "initial_loss " << trained.initial_loss << " final_loss "
              << (trained.loss_trace.empty() ? trained.initial_loss : trained.loss_trace.back()) << '\n';
    return 0;
}

int run_curve_estimate(const CurveArgs &a) {
    const MinDistCurve truth = load_curve(a.input);
    const std::size_t n = truth.size();
    const std::size_t m = std::min(n, std::max<std::size_t>(2, prefix_length(n, a.p)));
    CurvePrefix prefix{{truth.values.begin(), truth.values.begin() + static_cast<std::ptrdiff_t>(m)}, n};
    CurveEstimator est = load_estimator(a.estimator, a.model);
    if (auto *o = std::get_if<OracleCurve>(&est)) o->truth = truth;
    const MinDistCurve estimated = estimate_curve(est, prefix);
    save_curve(estimated, a.output);
    if (m < n) std::cout << "mape_pct " << tail_mape(estimated, truth, m) << '\n';
    return 0;
}

void write_neighbors(const NeighborLists &lists, std::span<const Index> queries, const fs::path &path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "query_index,neighbor_index,distance\n" << std::setprecision(17);
    for (std::size_t q = 0; q < lists.size(); ++q) {
        for (const auto &nb : lists[q]) out << queries[q] << ',' << nb.index << ',' << nb.distance << '\n';
    }
}

int run_neighbors(const NeighborArgs &a) {
    const PointCloud cloud = load_cloud(a.input);
    const std::vector<Index> centroids = load_indices(a.centroids);
    const bool ball = a.mode == "ball";
    if (!ball && a.mode != "knn") throw std::invalid_argument("--mode must be ball or knn");
    if (ball && !a.radius) throw std::invalid_argument("--radius is required for ball mode");

    if (ball && a.impl == "naive") {
        write_neighbors(ball_query_naive(cloud, centroids, *a.radius, a.max_neighbors, a.threads), centroids, a.output);
        return 0;
    }
    if (!ball && a.impl == "naive") {
        // Upsampling direction: every cloud point queries the sampled set.
        std::vector<Index> all(cloud.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Index>(i);
        write_neighbors(knn_naive(cloud, all, centroids, a.k, a.threads), all, a.output);
        return 0;
    }
    if (a.impl != "rf") throw std::invalid_argument("--impl must be naive or rf");

    // Rebuild the exclusion lists of an mdps run over this cloud, with the
    // ball radius baked in as an extra level.
    const std::size_t n = std::max<std::size_t>(2, centroids.size());
    MdpsConfig c;
    c.p = a.p;
    c.nseg = a.nseg;
    c.estimator = load_estimator(a.estimator, a.model);
    c.threads = a.threads;
    if (ball) c.extra_radii = {*a.radius};
    const auto run = mdps::mdps(cloud, std::min(n, cloud.size()), c);
    if (ball) {
        write_neighbors(rf_ball_query(run.exclusion, *a.radius, centroids, a.max_neighbors), centroids, a.output);
    } else {
        std::vector<Index> all(cloud.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Index>(i);
        const auto lists = rf_knn(cloud, run.exclusion, membership(centroids, cloud.size()), all, a.k, a.threads);
        write_neighbors(lists, all, a.output);
        std::cerr << "fallback_count " << lists.fallback_count << '\n';
    }
    return 0;
}

int run_quality(const QualityArgs &a) {
    const PointCloud cloud = load_cloud(a.input);
    SampleResult sample{load_indices(a.samples), SampleMethod::kFps, std::nullopt};
    std::optional<SampleResult> baseline;
    if (a.baseline) baseline = SampleResult{load_indices(*a.baseline), SampleMethod::kFps, std::nullopt};
    const auto report = quality_report(cloud, sample, baseline, a.bins, a.threads);
    if (a.hist_out) save_histogram(report.histogram, *a.hist_out);
    if (a.report_out) save_quality_report(report, *a.report_out);
    std::cout << "avg_min_spacing " << std::setprecision(10) << report.avg_min_spacing << '\n';
    if (report.ratio_to_baseline) std::cout << "quality_ratio_pct " << *report.ratio_to_baseline << '\n';
    return 0;
}

int run_bench_cmd(const BenchArgs &a) {
    const BenchConfig config = load_bench_config(a.config);
    fs::create_directories(a.out_dir);
    const auto report = run_bench(config);
    write_bench_csv(report, a.out_dir / "bench.csv");
    write_bench_json(report, a.out_dir / "bench.json");
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Point cloud downsampling: FPS, MDPS and baselines"};
    app.require_subcommand(1);

    GenArgs gen;
    auto *g = app.add_subcommand("gen", "Generate a synthetic cloud");
    g->add_option("--family", gen.family, "uniform-box|gaussian-clusters|room-surfaces|lidar-rings");
    g->add_option("--n", gen.n, "Point count");
    g->add_option("--rng-seed", gen.seed);
    g->add_option("--out", gen.out, "Output cloud (.xyz or .pcf)")->required();

    SampleArgs sa;
    auto *s = app.add_subcommand("sample", "Downsample a cloud");
    s->add_option("--method", sa.method, "fps|random|grid|mdps|single-threshold");
    s->add_option("--n", sa.n, "Sample count");
    s->add_option("--stride", sa.stride, "Downsampling ratio");
    s->add_option("--input", sa.input)->required();
    s->add_option("--output", sa.output, "indices.csv")->required();
    s->add_option("--seed-index", sa.seed_index, "Seed point index or 'random'");
    s->add_option("--rng-seed", sa.rng_seed);
    s->add_option("--estimator", sa.estimator, "oracle|power|mlp");
    s->add_option("--p", sa.p, "Measured FPS prefix ratio");
    s->add_option("--nseg", sa.nseg, "Segment count");
    s->add_option("--model", sa.model, "Estimator model file");
    s->add_option("--stats-out", sa.stats_out, "Stage timings JSON");
    s->add_option("--pick", sa.pick, "random|lowest");
    s->add_option("--exclusion-build", sa.exclusion_build, "all-pairs|grid");
    s->add_option("--threads", sa.threads, "0 = all cores");
    s->add_option("--voxel-size", sa.voxel_size, "grid: fixed voxel edge instead of a target count");

    CurveArgs ca;
    auto *c = app.add_subcommand("curve", "Minimum distance curves and estimators");
    c->require_subcommand(1);
    auto *ce = c->add_subcommand("extract", "FPS curve of a cloud");
    ce->add_option("--input", ca.input)->required();
    ce->add_option("--output", ca.output)->required();
    ce->add_option("--n", ca.n);
    ce->add_option("--stride", ca.stride);
    ce->add_option("--threads", ca.threads);
    auto *cf = c->add_subcommand("fit-power", "Fit the power-law exponent");
    cf->add_option("--curves", ca.curves)->required();
    cf->add_option("--output", ca.output)->required();
    auto *ct = c->add_subcommand("train-mlp", "Train the MLP estimator");
    ct->add_option("--curves", ca.curves)->required();
    ct->add_option("--output", ca.output)->required();
    ct->add_option("--epochs", ca.epochs);
    ct->add_option("--lr", ca.lr);
    ct->add_option("--p", ca.p);
    ct->add_option("--rng-seed", ca.rng_seed);
    auto *cs = c->add_subcommand("estimate", "Predict a curve from its prefix");
    cs->add_option("--input", ca.input, "Ground-truth curve CSV")->required();
    cs->add_option("--output", ca.output)->required();
    cs->add_option("--estimator", ca.estimator, "power|mlp|oracle");
    cs->add_option("--model", ca.model);
    cs->add_option("--p", ca.p);

    NeighborArgs na;
    auto *nb = app.add_subcommand("neighbors", "Ball query or k-NN");
    nb->add_option("--mode", na.mode, "ball|knn");
    nb->add_option("--impl", na.impl, "naive|rf");
    nb->add_option("--radius", na.radius);
    nb->add_option("--k", na.k);
    nb->add_option("--max-neighbors", na.max_neighbors);
    nb->add_option("--input", na.input)->required();
    nb->add_option("--centroids", na.centroids, "indices.csv")->required();
    nb->add_option("--output", na.output)->required();
    nb->add_option("--estimator", na.estimator);
    nb->add_option("--model", na.model);
    nb->add_option("--p", na.p);
    nb->add_option("--nseg", na.nseg);
    nb->add_option("--threads", na.threads);

    QualityArgs qa;
    auto *q = app.add_subcommand("quality", "Spacing metrics of a sample");
    q->add_option("--input", qa.input)->required();
    q->add_option("--samples", qa.samples)->required();
    q->add_option("--baseline", qa.baseline);
    q->add_option("--hist-out", qa.hist_out);
    q->add_option("--report-out", qa.report_out);
    q->add_option("--bins", qa.bins);
    q->add_option("--threads", qa.threads);

    BenchArgs ba;
    auto *b = app.add_subcommand("bench", "Run a benchmark config");
    b->add_option("--config", ba.config, "JSON config")->required();
    b->add_option("--out-dir", ba.out_dir);

    CLI11_PARSE(app, argc, argv);

    try {
        if (g->parsed()) return run_gen(gen);
        if (s->parsed()) return run_sample(sa);
        if (ce->parsed()) return run_curve_extract(ca);
        if (cf->parsed()) return run_curve_fit_power(ca);
        if (ct->parsed()) return run_curve_train_mlp(ca);
        if (cs->parsed()) return run_curve_estimate(ca);
        if (nb->parsed()) return run_neighbors(na);
        if (q->parsed()) return run_quality(qa);
        if (b->parsed()) return run_bench_cmd(ba);
    } catch (const ParseError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
