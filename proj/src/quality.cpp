#include "mdps/quality.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "json.hpp"

#include "mdps/neighbors.hpp"
#include "mdps/parallel.hpp"

namespace mdps {

namespace {

constexpr std::size_t kBruteForceLimit = 20000;

}  // namespace

std::vector<double> nearest_other_spacings(const PointCloud &cloud, const SampleResult &sample, unsigned threads) {
    const auto &idx = sample.indices;
    if (idx.size() < 2) throw std::invalid_argument("spacing: need at least 2 samples");
    validate_sample(sample, cloud.size());
    std::vector<double> spacing(idx.size());
    if (idx.size() > kBruteForceLimit) {
        const auto lists = knn_naive(cloud, idx, idx, 2, threads);
        for (std::size_t q = 0; q < idx.size(); ++q) {
            // Self is one of the two nearest; the other entry is the answer.
            const auto &l = lists[q];
            spacing[q] = l[0].index == idx[q] ? l[1].distance : l[0].distance;
        }
        return spacing;
    }
    std::vector<Point3> pts(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) pts[k] = cloud[idx[k]];
    parallel_for(idx.size(), resolve_threads(threads), [&](std::size_t a) {
        double best = kInfinity;
        for (std::size_t b = 0; b < pts.size(); ++b) {
            if (b != a) best = std::min(best, squared_distance(pts[a], pts[b]));
        }
        spacing[a] = std::sqrt(best);
    });
    DistanceCounter::add(static_cast<std::uint64_t>(idx.size()) * (idx.size() - 1));
    return spacing;
}

double avg_min_spacing(const PointCloud &cloud, const SampleResult &sample, unsigned threads) {
    const auto s = nearest_other_spacings(cloud, sample, threads);
    return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

double quality_ratio(const PointCloud &cloud, const SampleResult &candidate, const SampleResult &baseline,
                     unsigned threads) {
    const double base = avg_min_spacing(cloud, baseline, threads);
    if (!(base > 0.0)) throw std::invalid_argument("quality_ratio: baseline spacing is zero");
    return 100.0 * (avg_min_spacing(cloud, candidate, threads) / base);
}

std::size_t Histogram::total() const noexcept { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

Histogram make_histogram(const std::vector<double> &values, std::size_t bins, std::optional<double> upper) {
    if (bins == 0) throw std::invalid_argument("histogram: bins must be at least 1");
    const double top = upper ? *upper : (values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()));
    Histogram h;
    h.counts.assign(bins, 0);
    h.edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = top * static_cast<double>(b) / static_cast<double>(bins);
    for (double v : values) {
        std::size_t b = 0;
        if (top > 0.0) {
            b = static_cast<std::size_t>(std::floor(v / top * static_cast<double>(bins)));
            b = std::min(b, bins - 1);
        }
        ++h.counts[b];
    }
    return h;
}

Histogram spacing_histogram(const PointCloud &cloud, const SampleResult &sample, std::size_t bins,
                            std::optional<double> upper, unsigned threads) {
    return make_histogram(nearest_other_spacings(cloud, sample, threads), bins, upper);
}

double histogram_l1(const Histogram &a, const Histogram &b) {
    if (a.counts.size() != b.counts.size()) throw std::invalid_argument("histogram_l1: bin counts differ");
    const double ta = static_cast<double>(a.total());
    const double tb = static_cast<double>(b.total());
    double l1 = 0.0;
    for (std::size_t k = 0; k < a.counts.size(); ++k) {
        l1 += std::abs(static_cast<double>(a.counts[k]) / ta - static_cast<double>(b.counts[k]) / tb);
    }
    return l1;
}

QualityReport quality_report(const PointCloud &cloud, const SampleResult &sample,
                             const std::optional<SampleResult> &baseline, std::size_t bins, unsigned threads) {
    QualityReport r;
    const auto spacing = nearest_other_spacings(cloud, sample, threads);
    r.sample_count = spacing.size();
    r.avg_min_spacing = std::accumulate(spacing.begin(), spacing.end(), 0.0) / static_cast<double>(spacing.size());
    r.histogram = make_histogram(spacing, bins, std::nullopt);
    if (baseline) {
        const double base = avg_min_spacing(cloud, *baseline, threads);
        if (!(base > 0.0)) throw std::invalid_argument("quality_ratio: baseline spacing is zero");
        r.ratio_to_baseline = 100.0 * (r.avg_min_spacing / base);
    }
    return r;
}

void save_histogram(const Histogram &h, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << std::setprecision(17) << "bin_low,bin_high,count\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        out << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
    }
}

void save_quality_report(const QualityReport &report, const std::filesystem::path &path) {
    nlohmann::json j;
    j["avg_min_spacing"] = report.avg_min_spacing;
    j["sample_count"] = report.sample_count;
    j["ratio_to_baseline_pct"] = report.ratio_to_baseline ? nlohmann::json(*report.ratio_to_baseline) : nullptr;
    j["histogram"] = {{"edges", report.histogram.edges}, {"counts", report.histogram.counts}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace mdps
