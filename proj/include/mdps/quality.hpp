#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "mdps/core.hpp"

namespace mdps {

/// Per-sample distance to the nearest other sampled point.
std::vector<double> nearest_other_spacings(const PointCloud &cloud, const SampleResult &sample, unsigned threads = 0);

/// Mean nearest-other spacing. Requires at least 2 samples.
double avg_min_spacing(const PointCloud &cloud, const SampleResult &sample, unsigned threads = 0);

/// 100 * spacing(candidate) / spacing(baseline).
double quality_ratio(const PointCloud &cloud, const SampleResult &candidate, const SampleResult &baseline,
                     unsigned threads = 0);

struct Histogram {
    std::vector<double> edges;  // bins + 1
    std::vector<std::size_t> counts;

    std::size_t total() const noexcept;
};

/// Equal-width bins over [0, upper]; upper defaults to the largest spacing.
/// Values equal to upper fall into the last bin.
Histogram spacing_histogram(const PointCloud &cloud, const SampleResult &sample, std::size_t bins = 50,
                            std::optional<double> upper = std::nullopt, unsigned threads = 0);
Histogram make_histogram(const std::vector<double> &values, std::size_t bins, std::optional<double> upper);

/// L1 distance between the count-normalized histograms (same binning).
double histogram_l1(const Histogram &a, const Histogram &b);

struct QualityReport {
    double avg_min_spacing = 0.0;
    std::optional<double> ratio_to_baseline;
    Histogram histogram;
    std::size_t sample_count = 0;
};

QualityReport quality_report(const PointCloud &cloud, const SampleResult &sample,
                             const std::optional<SampleResult> &baseline, std::size_t bins = 50,
                             unsigned threads = 0);

/// CSV "bin_low,bin_high,count".
void save_histogram(const Histogram &h, const std::filesystem::path &path);
void save_quality_report(const QualityReport &report, const std::filesystem::path &path);

}  // namespace mdps
