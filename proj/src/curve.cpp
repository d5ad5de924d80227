#include "mdps/curve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

namespace mdps {

namespace {

void clamp_tail(std::vector<double> &values, std::size_t begin) {
    double running = begin > 0 ? values[begin - 1] : kInfinity;
    for (std::size_t i = begin; i < values.size(); ++i) {
        values[i] = std::max(0.0, std::min(values[i], running));
        running = values[i];
    }
}

std::span<const double> finite_prefix(const CurvePrefix &prefix) {
    if (prefix.measured.empty()) return {};
    return std::span<const double>(prefix.measured).subspan(1);
}

}  // namespace

std::size_t prefix_length(std::size_t n, double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("prefix ratio p must lie in (0, 1)");
    // Absorb representation error in products like 0.1 * 30.
    return static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-9));
}

PrefixRun extract_prefix(const PointCloud &cloud, std::size_t n, double p, Index seed_index, unsigned threads) {
    const std::size_t m = prefix_length(n, p);
    if (m < 2) throw std::invalid_argument("extract_prefix: ceil(p * n) must be at least 2");
    if (n > cloud.size()) throw std::invalid_argument("extract_prefix: sample count exceeds cloud size");
    PrefixRun run;
    run.state = fps_init(cloud, seed_index);
    run.prefix.n_total = n;
    run.prefix.measured.reserve(m);
    run.prefix.measured.push_back(kInfinity);
    fps_advance(cloud, run.state, m, threads, &run.prefix.measured);
    fps_flush(cloud, run.state, threads);
    run.samples.indices = run.state.sampled;
    run.samples.method = SampleMethod::kFps;
    return run;
}

// ---------------------------------------------------------------------------

PowerModel fit_power_exponent(std::span<const MinDistCurve> curves) {
    if (curves.empty()) throw std::invalid_argument("fit_power_exponent: need at least one curve");
    double sxy = 0.0, sxx = 0.0;
    for (const auto &curve : curves) {
        if (curve.size() < 9) throw std::invalid_argument("fit_power_exponent: curve has fewer than 8 finite values");
        std::vector<double> xs, ys;
        for (std::size_t i = 1; i < curve.size(); ++i) {
            const double v = curve[i];
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw std::invalid_argument("fit_power_exponent: non-positive or non-finite curve value at " +
                                            std::to_string(i));
            }
            xs.push_back(std::log(static_cast<double>(i)));
            ys.push_back(std::log(v));
        }
        const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
        const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
        for (std::size_t k = 0; k < xs.size(); ++k) {
            sxy += (xs[k] - mx) * (ys[k] - my);
            sxx += (xs[k] - mx) * (xs[k] - mx);
        }
    }
    return PowerModel{-sxy / sxx, std::nullopt};
}

MinDistCurve estimate_power(const CurvePrefix &prefix, const PowerModel &model) {
    const auto head = finite_prefix(prefix);
    if (head.empty()) throw std::invalid_argument("estimate_power: prefix has no finite values");
    if (prefix.n_total < prefix.size()) throw std::invalid_argument("estimate_power: prefix longer than curve");
    double amplitude = 0.0;
    for (std::size_t k = 0; k < head.size(); ++k) {
        amplitude += head[k] * std::pow(static_cast<double>(k + 1), model.exponent);
    }
    amplitude /= static_cast<double>(head.size());

    MinDistCurve out;
    out.values = prefix.measured;
    out.values.resize(prefix.n_total);
    for (std::size_t i = prefix.size(); i < prefix.n_total; ++i) {
        out.values[i] = amplitude / std::pow(static_cast<double>(i), model.exponent);
    }
    clamp_tail(out.values, prefix.size());
    return out;
}

// ---------------------------------------------------------------------------

MlpModel::MlpModel(std::span<const std::size_t> sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("MlpModel: need at least input and output widths");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        if (sizes[l] == 0 || sizes[l + 1] == 0) throw std::invalid_argument("MlpModel: zero layer width");
        DenseLayer layer;
        layer.inputs = sizes[l];
        layer.outputs = sizes[l + 1];
        layer.weights.assign(layer.inputs * layer.outputs, 0.0);
        layer.bias.assign(layer.outputs, 0.0);
        layers_.push_back(std::move(layer));
    }
}

MlpModel MlpModel::random_init(std::span<const std::size_t> sizes, Rng &rng) {
    MlpModel model(sizes);
    for (auto &layer : model.layers_) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.inputs + layer.outputs));
        for (double &w : layer.weights) w = rng.uniform(-limit, limit);
    }
    return model;
}

std::vector<std::size_t> MlpModel::sizes() const {
    std::vector<std::size_t> s{layers_.front().inputs};
    for (const auto &layer : layers_) s.push_back(layer.outputs);
    return s;
}

bool operator==(const DenseLayer &a, const DenseLayer &b) {
    return a.inputs == b.inputs && a.outputs == b.outputs && a.weights == b.weights && a.bias == b.bias;
}

bool operator==(const MlpModel &a, const MlpModel &b) { return a.layers_ == b.layers_; }

namespace {

// Activations per layer: acts[0] = input, acts[l+1] = output of layer l
// (post-ReLU for hidden layers).
std::vector<std::vector<double>> forward_all(const MlpModel &model, std::span<const double> input) {
    if (input.size() != model.input_size()) throw std::invalid_argument("mlp_forward: input size mismatch");
    const auto &layers = model.layers();
    std::vector<std::vector<double>> acts;
    acts.reserve(layers.size() + 1);
    acts.emplace_back(input.begin(), input.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto &layer = layers[l];
        std::vector<double> out(layer.bias);
        const auto &in = acts.back();
        for (std::size_t i = 0; i < layer.inputs; ++i) {
            const double xi = in[i];
            if (xi == 0.0) continue;
            const double *row = layer.weights.data() + i * layer.outputs;
            for (std::size_t o = 0; o < layer.outputs; ++o) out[o] += xi * row[o];
        }
        if (l + 1 < layers.size()) {
            for (double &v : out) v = std::max(0.0, v);
        }
        acts.push_back(std::move(out));
    }
    return acts;
}

double mse(std::span<const double> out, std::span<const double> target) {
    if (out.size() != target.size()) throw std::invalid_argument("mlp: target size mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) s += (out[k] - target[k]) * (out[k] - target[k]);
    return s / static_cast<double>(out.size());
}

void check_pairs(const MlpModel &model, std::span<const TrainingPair> pairs) {
    for (const auto &pair : pairs) {
        if (pair.input.size() != model.input_size() || pair.target.size() != model.output_size()) {
            throw std::invalid_argument("mlp_train: training pair shape does not match the model");
        }
    }
}

double mean_loss(const MlpModel &model, std::span<const TrainingPair> pairs) {
    double total = 0.0;
    for (const auto &pair : pairs) total += mlp_loss(model, pair.input, pair.target);
    return total / static_cast<double>(pairs.size());
}

}  // namespace

std::vector<double> mlp_forward(const MlpModel &model, std::span<const double> input) {
    return std::move(forward_all(model, input).back());
}

double mlp_loss(const MlpModel &model, std::span<const double> input, std::span<const double> target) {
    return mse(mlp_forward(model, input), target);
}

double mlp_loss_and_gradient(const MlpModel &model, std::span<const double> input, std::span<const double> target,
                             MlpModel &gradient) {
    const auto acts = forward_all(model, input);
    const auto &out = acts.back();
    const double loss = mse(out, target);
    if (gradient.sizes() != model.sizes()) gradient = MlpModel(model.sizes());

    const auto &layers = model.layers();
    std::vector<double> delta(out.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        delta[k] = 2.0 * (out[k] - target[k]) / static_cast<double>(out.size());
    }
    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto &layer = layers[l];
        auto &g = gradient.layers()[l];
        const auto &in = acts[l];
        for (std::size_t i = 0; i < layer.inputs; ++i) {
            double *grow = g.weights.data() + i * layer.outputs;
            for (std::size_t o = 0; o < layer.outputs; ++o) grow[o] = in[i] * delta[o];
        }
        g.bias = delta;
        if (l == 0) break;
        std::vector<double> prev(layer.inputs, 0.0);
        for (std::size_t i = 0; i < layer.inputs; ++i) {
            // acts[l] is post-ReLU, so zero exactly where the unit was inactive.
            if (in[i] <= 0.0) continue;
            const double *row = layer.weights.data() + i * layer.outputs;
            double s = 0.0;
            for (std::size_t o = 0; o < layer.outputs; ++o) s += row[o] * delta[o];
            prev[i] = s;
        }
        delta = std::move(prev);
    }
    return loss;
}

TrainingPair make_training_pair(const MinDistCurve &curve, double p) {
    const std::size_t n = curve.size();
    const std::size_t m = prefix_length(n, p);
    if (m < 3 || n - m < 2) throw std::invalid_argument("make_training_pair: curve too short for this p");
    const double scale = curve[m - 1];
    if (!(scale > 0.0)) throw std::invalid_argument("make_training_pair: last prefix value must be positive");
    TrainingPair pair;
    pair.input = resample_curve(std::span<const double>(curve.values).subspan(1, m - 1), MlpModel::kInputs);
    pair.target = resample_curve(std::span<const double>(curve.values).subspan(m), MlpModel::kOutputs);
    for (double &v : pair.input) v /= scale;
    for (double &v : pair.target) v /= scale;
    return pair;
}

MlpTrainResult mlp_train(std::span<const TrainingPair> pairs, std::size_t epochs, double lr, Rng &rng) {
    const auto sizes = MlpModel::canonical_sizes();
    MlpModel initial = MlpModel::random_init(sizes, rng);
    return mlp_train(pairs, epochs, lr, rng, std::move(initial));
}

MlpTrainResult mlp_train(std::span<const TrainingPair> pairs, std::size_t epochs, double lr, Rng &rng,
                         MlpModel initial) {
    if (pairs.empty()) throw std::invalid_argument("mlp_train: empty training set");
    if (epochs == 0) throw std::invalid_argument("mlp_train: epochs must be at least 1");
    check_pairs(initial, pairs);

    MlpTrainResult result{std::move(initial), 0.0, {}};
    result.initial_loss = mean_loss(result.model, pairs);
    MlpModel gradient(result.model.sizes());
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t k : order) {
            const double loss = mlp_loss_and_gradient(result.model, pairs[k].input, pairs[k].target, gradient);
            if (!std::isfinite(loss)) throw TrainingDiverged(epoch);
            for (std::size_t l = 0; l < gradient.layers().size(); ++l) {
                auto &layer = result.model.layers()[l];
                const auto &g = gradient.layers()[l];
                for (std::size_t w = 0; w < layer.weights.size(); ++w) layer.weights[w] -= lr * g.weights[w];
                for (std::size_t b = 0; b < layer.bias.size(); ++b) layer.bias[b] -= lr * g.bias[b];
            }
        }
        const double epoch_loss = mean_loss(result.model, pairs);
        if (!std::isfinite(epoch_loss)) throw TrainingDiverged(epoch);
        result.loss_trace.push_back(epoch_loss);
    }
    return result;
}

std::vector<double> resample_curve(std::span<const double> values, std::size_t target_len) {
    if (values.size() < 2) throw std::invalid_argument("resample_curve: need at least 2 source values");
    if (target_len == 0) return {};
    if (target_len == 1) return {values.back()};
    if (target_len == values.size()) return {values.begin(), values.end()};
    std::vector<double> out(target_len);
    const double span = static_cast<double>(values.size() - 1);
    for (std::size_t k = 0; k < target_len; ++k) {
        const double pos = span * static_cast<double>(k) / static_cast<double>(target_len - 1);
        auto lo = static_cast<std::size_t>(std::floor(pos));
        if (lo >= values.size() - 1) lo = values.size() - 2;
        const double w = pos - static_cast<double>(lo);
        out[k] = (1.0 - w) * values[lo] + w * values[lo + 1];
    }
    out.front() = values.front();
    out.back() = values.back();
    return out;
}

MinDistCurve estimate_mlp(const CurvePrefix &prefix, const MlpModel &model) {
    const auto head = finite_prefix(prefix);
    if (head.size() < 2) throw std::invalid_argument("estimate_mlp: prefix needs at least 2 finite values");
    const double scale = head.back();
    if (!(scale > 0.0)) throw std::invalid_argument("estimate_mlp: last measured value must be positive");
    if (prefix.n_total < prefix.size()) throw std::invalid_argument("estimate_mlp: prefix longer than curve");

    auto input = resample_curve(head, model.input_size());
    for (double &v : input) v /= scale;
    auto output = mlp_forward(model, input);
    for (double &v : output) v *= scale;

    MinDistCurve out;
    out.values = prefix.measured;
    const std::size_t tail_len = prefix.n_total - prefix.size();
    if (tail_len > 0) {
        const auto tail = output.size() >= 2 ? resample_curve(output, tail_len)
                                             : std::vector<double>(tail_len, output.front());
        out.values.insert(out.values.end(), tail.begin(), tail.end());
    }
    clamp_tail(out.values, prefix.size());
    return out;
}

bool has_degenerate_tail(const MinDistCurve &curve, std::size_t prefix_len) {
    for (std::size_t i = prefix_len; i < curve.size(); ++i) {
        if (!(curve[i] > 0.0)) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------

double tail_mape(const MinDistCurve &estimated, const MinDistCurve &truth, std::size_t begin) {
    if (estimated.size() != truth.size()) throw std::invalid_argument("mape: curve lengths differ");
    if (begin >= truth.size()) throw std::invalid_argument("mape: empty tail");
    double total = 0.0;
    for (std::size_t i = begin; i < truth.size(); ++i) {
        if (!(truth[i] > 0.0)) throw std::invalid_argument("mape: zero truth value at position " + std::to_string(i));
        total += std::abs(estimated[i] - truth[i]) / truth[i];
    }
    return 100.0 * total / static_cast<double>(truth.size() - begin);
}

double estimator_mape(const MinDistCurve &estimated, const MinDistCurve &truth, double p) {
    return tail_mape(estimated, truth, prefix_length(truth.size(), p));
}

SegmentedThresholds segment_thresholds(const MinDistCurve &curve, std::size_t nseg) {
    if (nseg == 0) throw std::invalid_argument("segment_thresholds: nseg must be at least 1");
    const std::size_t n = curve.size();
    if (n < nseg + 1) throw std::invalid_argument("segment_thresholds: curve shorter than nseg + 1");
    SegmentedThresholds t;
    double running = kInfinity;
    for (std::size_t s = 1; s <= nseg; ++s) {
        const std::size_t d = std::min(n * s / nseg, n - 1);
        running = std::min(running, curve[d]);
        t.boundaries.push_back(d);
        t.radii.push_back(running);
    }
    return t;
}

MinDistCurve oracle_estimator(const PointCloud &cloud, std::size_t n, Index seed_index, unsigned threads) {
    return fps(cloud, n, seed_index, threads).curve;
}

MinDistCurve estimate_curve(const CurveEstimator &estimator, const CurvePrefix &prefix) {
    struct Visitor {
        const CurvePrefix &prefix;
        MinDistCurve operator()(const PowerModel &m) const { return estimate_power(prefix, m); }
        MinDistCurve operator()(const MlpModel &m) const { return estimate_mlp(prefix, m); }
        MinDistCurve operator()(const OracleCurve &o) const {
            if (o.truth.size() != prefix.n_total) {
                throw std::invalid_argument("oracle curve length does not match the sample count");
            }
            MinDistCurve out = o.truth;
            std::copy(prefix.measured.begin(), prefix.measured.end(), out.values.begin());
            return out;
        }
        MinDistCurve operator()(const CustomEstimator &c) const {
            MinDistCurve out = c.fn(prefix);
            if (out.size() != prefix.n_total) throw std::invalid_argument("custom estimator returned wrong length");
            return out;
        }
    };
    return std::visit(Visitor{prefix}, estimator);
}

// ---------------------------------------------------------------------------

namespace {

std::ifstream open_text(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    return in;
}

std::ofstream create_text(const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    return out;
}

template <typename T>
T expect(std::istream &in, const std::filesystem::path &path, const char *what) {
    T v{};
    if (!(in >> v)) throw std::runtime_error(path.string() + ": malformed file, expected " + what);
    return v;
}

}  // namespace

void save_mlp(const MlpModel &model, const std::filesystem::path &path) {
    auto out = create_text(path);
    out << "MLP";
    for (auto s : model.sizes()) out << ' ' << s;
    out << '\n';
    for (const auto &layer : model.layers()) {
        out << "W " << layer.inputs << ' ' << layer.outputs << '\n';
        for (std::size_t i = 0; i < layer.inputs; ++i) {
            for (std::size_t o = 0; o < layer.outputs; ++o) {
                out << layer.weights[i * layer.outputs + o] << (o + 1 == layer.outputs ? '\n' : ' ');
            }
        }
        out << "B " << layer.outputs << '\n';
        for (std::size_t o = 0; o < layer.outputs; ++o) out << layer.bias[o] << (o + 1 == layer.outputs ? '\n' : ' ');
    }
}

MlpModel load_mlp(const std::filesystem::path &path) {
    auto in = open_text(path);
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    if (expect<std::string>(hs, path, "MLP tag") != "MLP") throw std::runtime_error(path.string() + ": not an MLP file");
    std::vector<std::size_t> sizes;
    std::size_t s = 0;
    while (hs >> s) sizes.push_back(s);
    MlpModel model(sizes);
    for (auto &layer : model.layers()) {
        if (expect<std::string>(in, path, "W") != "W") throw std::runtime_error(path.string() + ": expected W");
        const auto r = expect<std::size_t>(in, path, "rows");
        const auto c = expect<std::size_t>(in, path, "cols");
        if (r != layer.inputs || c != layer.outputs) throw std::runtime_error(path.string() + ": layer shape mismatch");
        for (double &w : layer.weights) w = expect<double>(in, path, "weight");
        if (expect<std::string>(in, path, "B") != "B") throw std::runtime_error(path.string() + ": expected B");
        if (expect<std::size_t>(in, path, "bias size") != layer.outputs) {
            throw std::runtime_error(path.string() + ": bias size mismatch");
        }
        for (double &b : layer.bias) b = expect<double>(in, path, "bias");
    }
    return model;
}

void save_power(const PowerModel &model, const std::filesystem::path &path) {
    auto out = create_text(path);
    out << "POWER " << model.exponent << '\n';
}

PowerModel load_power(const std::filesystem::path &path) {
    auto in = open_text(path);
    if (expect<std::string>(in, path, "POWER tag") != "POWER") {
        throw std::runtime_error(path.string() + ": not a power model file");
    }
    return PowerModel{expect<double>(in, path, "exponent"), std::nullopt};
}

void save_curve(const MinDistCurve &curve, const std::filesystem::path &path) {
    auto out = create_text(path);
    out << "iteration,value\n";
    for (std::size_t i = 0; i < curve.size(); ++i) {
        out << i << ',';
        if (std::isinf(curve[i])) {
            out << "inf";
        } else {
            out << curve[i];
        }
        out << '\n';
    }
}

MinDistCurve load_curve(const std::filesystem::path &path) {
    auto in = open_text(path);
    MinDistCurve curve;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.rfind("iteration", 0) == 0) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ParseError(path.string() + ": expected 'iteration,value'", line_no);
        const std::string value = line.substr(comma + 1);
        try {
            curve.values.push_back(value.rfind("inf", 0) == 0 ? kInfinity : std::stod(value));
        } catch (const std::exception &) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": invalid value", line_no);
        }
    }
    return curve;
}

}  // namespace mdps
