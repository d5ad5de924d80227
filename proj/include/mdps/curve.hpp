#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "mdps/baselines.hpp"
#include "mdps/core.hpp"

namespace mdps {

/// The measured head of a minimum distance curve: positions [0, m) of a
/// curve whose full length will be n_total. Position 0 is the +inf seed.
struct CurvePrefix {
    std::vector<double> measured;
    std::size_t n_total = 0;

    std::size_t size() const noexcept { return measured.size(); }
};

/// Number of measured prefix positions for ratio p: ceil(p * n).
std::size_t prefix_length(std::size_t n, double p);

struct PrefixRun {
    CurvePrefix prefix;
    FpsState state;
    SampleResult samples;
};

/// Runs exact FPS for ceil(p * n) samples and keeps everything it produced.
PrefixRun extract_prefix(const PointCloud &cloud, std::size_t n, double p, Index seed_index = 0,
                         unsigned threads = 0);

// ---------------------------------------------------------------------------
// Power-law estimator: value(i) = amplitude / i^exponent.

struct PowerModel {
    double exponent = 0.0;
    std::optional<double> amplitude;
};

/// Pooled log-log least squares with one intercept per curve, so amplitude
/// differences between curves do not bias the slope. exponent = -slope.
PowerModel fit_power_exponent(std::span<const MinDistCurve> curves);

/// Fits the amplitude on the finite prefix positions and extrapolates. The
/// measured prefix is kept verbatim; the tail is clamped to a running minimum.
MinDistCurve estimate_power(const CurvePrefix &prefix, const PowerModel &model);

// ---------------------------------------------------------------------------
// MLP estimator.

struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights;  // inputs x outputs, row-major
    std::vector<double> bias;     // outputs
};

/// Fully connected network, ReLU on hidden layers and identity on the output.
class MlpModel {
public:
    static constexpr std::size_t kInputs = 32;
    static constexpr std::size_t kOutputs = 64;

    MlpModel() : MlpModel(canonical_sizes()) {}
    /// Zero-initialized network with the given layer widths (>= 2 entries).
    explicit MlpModel(std::span<const std::size_t> sizes);

    static std::vector<std::size_t> canonical_sizes() { return {32, 128, 128, 64}; }
    /// Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases.
    static MlpModel random_init(std::span<const std::size_t> sizes, Rng &rng);

    std::vector<std::size_t> sizes() const;
    bool is_canonical() const { return sizes() == canonical_sizes(); }
    std::size_t input_size() const { return layers_.front().inputs; }
    std::size_t output_size() const { return layers_.back().outputs; }

    std::vector<DenseLayer> &layers() noexcept { return layers_; }
    const std::vector<DenseLayer> &layers() const noexcept { return layers_; }

    friend bool operator==(const MlpModel &a, const MlpModel &b);

private:
    std::vector<DenseLayer> layers_;
};

bool operator==(const DenseLayer &a, const DenseLayer &b);

std::vector<double> mlp_forward(const MlpModel &model, std::span<const double> input);

/// Mean squared error over the outputs.
double mlp_loss(const MlpModel &model, std::span<const double> input, std::span<const double> target);

/// Loss plus its gradient w.r.t. every weight and bias (same layout as model).
double mlp_loss_and_gradient(const MlpModel &model, std::span<const double> input, std::span<const double> target,
                             MlpModel &gradient);

struct TrainingPair {
    std::vector<double> input;
    std::vector<double> target;
};

/// Builds a scale-normalized (32-input, 64-output) pair from a full curve.
TrainingPair make_training_pair(const MinDistCurve &curve, double p);

class TrainingDiverged : public std::runtime_error {
public:
    explicit TrainingDiverged(std::size_t epoch)
        : std::runtime_error("MLP training diverged (NaN loss) at epoch " + std::to_string(epoch)), epoch_(epoch) {}
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

struct MlpTrainResult {
    MlpModel model;
    double initial_loss = 0.0;
    std::vector<double> loss_trace;  // mean training MSE after each epoch
};

/// Plain SGD with batch size 1, shuffling the pairs every epoch.
MlpTrainResult mlp_train(std::span<const TrainingPair> pairs, std::size_t epochs, double lr, Rng &rng);
MlpTrainResult mlp_train(std::span<const TrainingPair> pairs, std::size_t epochs, double lr, Rng &rng,
                         MlpModel initial);

/// Linear interpolation over a normalized abscissa; endpoints are preserved.
std::vector<double> resample_curve(std::span<const double> values, std::size_t target_len);

MinDistCurve estimate_mlp(const CurvePrefix &prefix, const MlpModel &model);

/// True when any tail position (>= prefix_len) is not strictly positive.
bool has_degenerate_tail(const MinDistCurve &curve, std::size_t prefix_len);

// ---------------------------------------------------------------------------

/// Mean absolute percentage error over the predicted positions [ceil(p*n), n).
double estimator_mape(const MinDistCurve &estimated, const MinDistCurve &truth, double p);
/// Same over positions [begin, n).
double tail_mape(const MinDistCurve &estimated, const MinDistCurve &truth, std::size_t begin);

struct SegmentedThresholds {
    std::vector<double> radii;             // R_1 >= R_2 >= ... (true distances)
    std::vector<std::size_t> boundaries;  // d_s, end iteration of segment s

    std::size_t segments() const noexcept { return radii.size(); }
};

/// d_s = floor(n * s / nseg) clamped to n - 1, R_s = curve[d_s], radii forced
/// non-increasing.
SegmentedThresholds segment_thresholds(const MinDistCurve &curve, std::size_t nseg);

/// Ground truth: the full curve of an exact FPS run.
MinDistCurve oracle_estimator(const PointCloud &cloud, std::size_t n, Index seed_index = 0, unsigned threads = 0);

// ---------------------------------------------------------------------------
// Estimator dispatch used by the sampler.

struct OracleCurve {
    MinDistCurve truth;
};

struct CustomEstimator {
    std::function<MinDistCurve(const CurvePrefix &)> fn;
};

using CurveEstimator = std::variant<PowerModel, MlpModel, OracleCurve, CustomEstimator>;

MinDistCurve estimate_curve(const CurveEstimator &estimator, const CurvePrefix &prefix);

// ---------------------------------------------------------------------------
// Files.

/// "MLP s0 s1 ...", then per layer "W r c" + r*c values and "B c" + c values.
void save_mlp(const MlpModel &model, const std::filesystem::path &path);
MlpModel load_mlp(const std::filesystem::path &path);

/// "POWER <exponent>".
void save_power(const PowerModel &model, const std::filesystem::path &path);
PowerModel load_power(const std::filesystem::path &path);

/// CSV "iteration,value"; the seed position is written as "inf".
void save_curve(const MinDistCurve &curve, const std::filesystem::path &path);
MinDistCurve load_curve(const std::filesystem::path &path);

}  // namespace mdps
