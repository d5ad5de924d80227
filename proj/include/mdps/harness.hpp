#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mdps/core.hpp"
#include "mdps/curve.hpp"
#include "mdps/sampler.hpp"

namespace mdps {

enum class CloudFamily { kUniformBox, kGaussianClusters, kRoomSurfaces, kLidarRings };

std::string_view to_string(CloudFamily f) noexcept;
CloudFamily parse_cloud_family(std::string_view s);

struct GeneratorParams {
    // gaussian-clusters
    std::size_t clusters = 8;
    double cluster_sigma = 0.05;
    // room-surfaces: box extents
    double room_x = 6.0;
    double room_y = 5.0;
    double room_z = 3.0;
    double surface_noise = 0.005;
    // lidar-rings: ring k has radius ring_min + k * ring_spacing
    std::size_t rings = 32;
    double ring_min = 2.0;
    double ring_spacing = 1.0;
    double sensor_height = 1.7;
};

/// uniform-box: i.i.d. in [0,1]^3.
/// gaussian-clusters: uniform centers in [0,1]^3, isotropic Gaussian spread.
/// room-surfaces: the six faces of a box plus a partition wall and a table top.
/// lidar-rings: equal point counts per concentric ring, so area density falls
/// as 1/radius.
PointCloud generate_cloud(CloudFamily family, std::size_t n, Rng &rng, const GeneratorParams &params = {});

// ---------------------------------------------------------------------------

enum class EstimatorKind { kOracle, kPower, kMlp };
std::string_view to_string(EstimatorKind k) noexcept;
EstimatorKind parse_estimator_kind(std::string_view s);

struct MethodSpec {
    SampleMethod method = SampleMethod::kFps;
    EstimatorKind estimator = EstimatorKind::kOracle;
    std::size_t nseg = 6;
    double p = 0.1;
    ExclusionBuild build = ExclusionBuild::kAllPairs;
    /// Optional model file (POWER or MLP); when absent the model is fit on
    /// held-out clouds of the same family.
    std::optional<std::filesystem::path> model;
};

struct CloudSpec {
    CloudFamily family = CloudFamily::kUniformBox;
    std::size_t n = 10000;
    std::uint64_t seed = 1;
};

struct BenchConfig {
    std::vector<CloudSpec> clouds;
    std::vector<MethodSpec> methods;
    std::size_t stride = 4;
    std::size_t repetitions = 3;
    std::size_t warmup = 1;
    unsigned threads = 0;
    std::size_t knn_k = 3;
    std::size_t training_clouds = 5;
    std::uint64_t rng_seed = 7;
};

/// JSON config, e.g.
/// {"clouds":[{"family":"uniform-box","n":10000,"seed":1}],
///  "methods":[{"method":"fps"},{"method":"mdps","estimator":"oracle","nseg":6}],
///  "stride":4,"repetitions":3,"warmup":1,"threads":4}
BenchConfig load_bench_config(const std::filesystem::path &path);
void validate(const BenchConfig &config);

struct BenchRow {
    std::string family;
    std::size_t n_points = 0;
    std::string method;
    std::string estimator;
    std::size_t nseg = 0;
    double p = 0.0;
    unsigned threads = 0;
    std::string stage;
    double time_ms_median = 0.0;
    double time_ms_min = 0.0;
    double quality_ratio_pct = 0.0;
    double early_term_frac = 0.0;
    std::size_t fallback_count = 0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
};

BenchReport run_bench(const BenchConfig &config);

/// Columns: family,N,method,estimator,nseg,p,threads,stage,time_ms_median,
/// time_ms_min,quality_ratio_pct,early_term_frac,fallback_count
void write_bench_csv(const BenchReport &report, const std::filesystem::path &path);
void write_bench_json(const BenchReport &report, const std::filesystem::path &path);

/// Builds the estimator a method spec asks for, fitting/training on
/// `training_clouds` held-out clouds of the family when no model file is given.
CurveEstimator make_estimator(const MethodSpec &spec, const CloudSpec &cloud, std::size_t n_samples,
                              std::size_t training_clouds, std::uint64_t rng_seed, unsigned threads);

// ---------------------------------------------------------------------------

struct AblationRow {
    double p = 0.0;
    std::size_t nseg = 0;
    double quality_ratio_pct = 0.0;
    double total_ms = 0.0;
    double early_term_frac = 0.0;
};

struct AblationReport {
    std::vector<AblationRow> rows;
    /// Quality never drops by more than the noise margin as the swept
    /// parameter grows.
    bool monotone_within_margin = true;
};

/// Runs mdps once per p with the given base config and reports quality against
/// exact FPS on the same cloud.
AblationReport ablation_p(const PointCloud &cloud, std::size_t n, const MdpsConfig &base,
                          const std::vector<double> &p_values, double margin_pct = 1.0);

/// Same for the segment count.
AblationReport ablation_nseg(const PointCloud &cloud, std::size_t n, const MdpsConfig &base,
                             const std::vector<std::size_t> &nseg_values, double margin_pct = 0.2);

/// Writes MDPS stage timings and counters as JSON.
void save_sample_stats(const SampleResult &result, const std::filesystem::path &path);

}  // namespace mdps
