#include "nlq/evaluation.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numeric>

#include "nlq/calibration.hpp"
#include "nlq/errors.hpp"
#include "nlq/rng.hpp"

namespace nlq {

std::string to_shortest(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

double mse(std::span<const double> samples, const QuantizerModel& model) {
    if (samples.empty()) throw ValidationError("mse of empty input");
    double acc = 0.0;
    for (double x : samples) {
        const double d = x - model.centers[static_cast<std::size_t>(quantize_floor(x, model))];
        acc += d * d;
    }
    return acc / static_cast<double>(samples.size());
}

double max_abs_error(std::span<const double> samples, const QuantizerModel& model) {
    if (samples.empty()) throw ValidationError("max_abs_error of empty input");
    double worst = 0.0;
    for (double x : samples) {
        const double d = x - model.centers[static_cast<std::size_t>(quantize_floor(x, model))];
        worst = std::max(worst, std::abs(d));
    }
    return worst;
}

std::vector<std::uint64_t> code_histogram(std::span<const double> samples,
                                          const QuantizerModel& model) {
    std::vector<std::uint64_t> hist(static_cast<std::size_t>(model.levels()), 0);
    for (double x : samples) {
        ++hist[static_cast<std::size_t>(quantize_floor(x, model))];
    }
    return hist;
}

namespace {

struct CodedMetrics {
    double mse = 0.0;
    double max_abs = 0.0;
    std::vector<std::uint64_t> hist;
};

template <typename Decode>
CodedMetrics metrics_from_codes(std::span<const double> samples, std::span<const int> codes,
                                int levels, Decode&& decode) {
    CodedMetrics m;
    m.hist.assign(static_cast<std::size_t>(levels), 0);
    double acc = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double d = samples[i] - decode(codes[i]);
        acc += d * d;
        m.max_abs = std::max(m.max_abs, std::abs(d));
        ++m.hist[static_cast<std::size_t>(codes[i])];
    }
    m.mse = acc / static_cast<double>(samples.size());
    return m;
}

}  // namespace

EvalReport evaluate_methods(std::span<const double> pool, std::span<const double> eval_samples,
                            Range range, int bits, const std::vector<Method>& methods,
                            const EvalOptions& opts) {
    if (pool.empty()) throw ValidationError("empty pool");
    if (eval_samples.empty()) throw ValidationError("empty evaluation set");

    std::vector<Method> ordered(methods);
    std::sort(ordered.begin(), ordered.end());
    ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());

    // evaluation runs on the raw samples: the floor converter saturates
    // out-of-range inputs, so full-range coverage shows up in the error

    EvalReport report;
    report.seed = opts.seed;
    report.pool_size = pool.size();

    for (std::size_t mi = 0; mi < ordered.size(); ++mi) {
        const Method method = ordered[mi];
        FitOptions fit_opts;
        fit_opts.seed = CounterRng::derive(opts.seed, mi);
        fit_opts.restarts = opts.restarts;
        QuantizerModel model;
        try {
            model = fit(method, pool, range, bits, fit_opts);
        } catch (const ValidationError& e) {
            throw ValidationError(std::string(method_name(method)) + ": " + e.what());
        }

        EvalRow row;
        row.method = method_name(method);
        row.bits = bits;
        row.seed = opts.seed;
        row.mse = mse(eval_samples, model);
        row.max_abs_err = max_abs_error(eval_samples, model);
        row.histogram = code_histogram(eval_samples, model);
        report.rows.push_back(std::move(row));

        if (!opts.hw) continue;

        const HwProjection proj = [&] {
            auto p = project_hw(model, opts.min_multiplier, opts.budget);
            if (opts.corner) p.config.corner = *opts.corner;
            return p;
        }();
        const CenterLut lut = build_center_lut(model, opts.lut_bits);

        std::optional<std::uint64_t> noise_seed;
        if (opts.corner) noise_seed = CounterRng::derive(opts.seed, 0x100 + mi);
        const std::vector<int> codes =
            convert_batch(eval_samples, proj.config, proj.projected, noise_seed);

        // post-projection row decodes through the exact centers
        CodedMetrics exact = metrics_from_codes(
            eval_samples, codes, model.levels(),
            [&](int code) { return model.centers[static_cast<std::size_t>(code)]; });
        EvalRow hw_row;
        hw_row.method = std::string(method_name(method)) + "+hw";
        hw_row.bits = bits;
        hw_row.seed = opts.seed;
        hw_row.mse = exact.mse;
        hw_row.max_abs_err = exact.max_abs;
        hw_row.histogram = std::move(exact.hist);
        hw_row.hw_err = proj.max_ref_error;
        report.rows.push_back(std::move(hw_row));

        // post-LUT row additionally snaps centers to the output grid
        CodedMetrics snapped = metrics_from_codes(
            eval_samples, codes, model.levels(),
            [&](int code) { return lut_dequantize(code, lut, model.range); });
        EvalRow lut_row;
        lut_row.method = std::string(method_name(method)) + "+hw+lut";
        lut_row.bits = bits;
        lut_row.seed = opts.seed;
        lut_row.mse = snapped.mse;
        lut_row.max_abs_err = snapped.max_abs;
        lut_row.histogram = std::move(snapped.hist);
        lut_row.hw_err = proj.max_ref_error;
        report.rows.push_back(std::move(lut_row));
    }
    return report;
}

std::vector<double> weight_quantize_linear(std::span<const double> weights, int bits) {
    if (bits < 2 || bits > 8) throw ValidationError("weight bits must be in [2, 8]");
    double max_abs = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w)) throw ValidationError("non-finite weight");
        max_abs = std::max(max_abs, std::abs(w));
    }
    std::vector<double> out(weights.begin(), weights.end());
    if (max_abs == 0.0) return out;  // all-zero tensor passes through

    const int levels = (1 << bits) - 1;                     // odd, zero representable
    const double step = 2.0 * max_abs / static_cast<double>(levels - 1);
    for (double& w : out) {
        w = step * std::llround(w / step);
    }
    return out;
}

// ---------------------------------------------------------------------------
// desk-scale PTQ study

Dataset make_blob_dataset(const BlobDatasetConfig& config) {
    if (config.classes < 2 || config.dim < 1) throw ValidationError("bad dataset shape");

    Dataset data;
    data.dim = config.dim;
    data.classes = config.classes;

    std::vector<double> means(static_cast<std::size_t>(config.classes * config.dim));
    CounterRng rng_means(CounterRng::derive(config.seed, 1));
    for (auto& m : means) m = config.spread * rng_means.next_gauss();

    const auto fill = [&](std::vector<double>& xs, std::vector<int>& ys, int n,
                          std::uint64_t stream) {
        CounterRng rng(CounterRng::derive(config.seed, stream));
        xs.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(config.dim));
        ys.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const int cls = i % config.classes;
            ys[static_cast<std::size_t>(i)] = cls;
            for (int d = 0; d < config.dim; ++d) {
                xs[static_cast<std::size_t>(i) * config.dim + d] =
                    means[static_cast<std::size_t>(cls) * config.dim + d] + rng.next_gauss();
            }
        }
    };
    fill(data.train_x, data.train_y, config.train_n, 2);
    fill(data.test_x, data.test_y, config.test_n, 3);
    fill(data.calib_x, data.calib_y, config.calib_n, 4);
    return data;
}

void TinyMlp::forward(std::span<const double> x, std::span<double> logits, double* h1,
                      double* h2) const {
    double a1[kH1], a2[kH2];
    for (int j = 0; j < kH1; ++j) {
        double s = b1[static_cast<std::size_t>(j)];
        for (int i = 0; i < kIn; ++i) s += x[static_cast<std::size_t>(i)] * w1[static_cast<std::size_t>(i) * kH1 + j];
        a1[j] = s > 0.0 ? s : 0.0;
    }
    for (int j = 0; j < kH2; ++j) {
        double s = b2[static_cast<std::size_t>(j)];
        for (int i = 0; i < kH1; ++i) s += a1[i] * w2[static_cast<std::size_t>(i) * kH2 + j];
        a2[j] = s > 0.0 ? s : 0.0;
    }
    for (int o = 0; o < kOut; ++o) {
        double s = b3[static_cast<std::size_t>(o)];
        for (int i = 0; i < kH2; ++i) s += a2[i] * w3[static_cast<std::size_t>(i) * kOut + o];
        logits[static_cast<std::size_t>(o)] = s;
    }
    if (h1) std::copy(a1, a1 + kH1, h1);
    if (h2) std::copy(a2, a2 + kH2, h2);
}

namespace {

int argmax10(std::span<const double> logits) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
        if (logits[static_cast<std::size_t>(i)] > logits[static_cast<std::size_t>(best)]) best = i;
    }
    return best;
}

}  // namespace

double mlp_accuracy(const TinyMlp& net, std::span<const double> xs, std::span<const int> ys) {
    const std::size_t n = ys.size();
    std::size_t hits = 0;
    double logits[TinyMlp::kOut];
    for (std::size_t i = 0; i < n; ++i) {
        net.forward(xs.subspan(i * TinyMlp::kIn, TinyMlp::kIn), logits);
        if (argmax10(logits) == ys[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

TinyMlp train_tiny_mlp(const Dataset& data, const TrainConfig& config) {
    if (data.dim != TinyMlp::kIn || data.classes != TinyMlp::kOut) {
        throw ValidationError("dataset shape does not match the network");
    }
    TinyMlp net;
    CounterRng rng_init(CounterRng::derive(config.seed, 10));
    const auto he_init = [&](std::vector<double>& w, int fan_in, int count) {
        const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
        w.resize(static_cast<std::size_t>(count));
        for (auto& v : w) v = scale * rng_init.next_gauss();
    };
    he_init(net.w1, TinyMlp::kIn, TinyMlp::kIn * TinyMlp::kH1);
    he_init(net.w2, TinyMlp::kH1, TinyMlp::kH1 * TinyMlp::kH2);
    he_init(net.w3, TinyMlp::kH2, TinyMlp::kH2 * TinyMlp::kOut);
    net.b1.assign(TinyMlp::kH1, 0.0);
    net.b2.assign(TinyMlp::kH2, 0.0);
    net.b3.assign(TinyMlp::kOut, 0.0);

    const std::size_t n = data.train_y.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng_shuffle(CounterRng::derive(config.seed, 11));

    std::vector<double> gw1(net.w1.size()), gb1(net.b1.size());
    std::vector<double> gw2(net.w2.size()), gb2(net.b2.size());
    std::vector<double> gw3(net.w3.size()), gb3(net.b3.size());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) {  // Fisher-Yates
            const std::size_t j = rng_shuffle.below(i);
            std::swap(order[i - 1], order[j]);
        }
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(config.batch_size));
            std::fill(gw1.begin(), gw1.end(), 0.0);
            std::fill(gb1.begin(), gb1.end(), 0.0);
            std::fill(gw2.begin(), gw2.end(), 0.0);
            std::fill(gb2.begin(), gb2.end(), 0.0);
            std::fill(gw3.begin(), gw3.end(), 0.0);
            std::fill(gb3.begin(), gb3.end(), 0.0);

            for (std::size_t s = start; s < stop; ++s) {
                const std::size_t idx = order[s];
                const double* x = data.train_x.data() + idx * TinyMlp::kIn;
                double h1[TinyMlp::kH1], h2[TinyMlp::kH2], logits[TinyMlp::kOut];
                net.forward(std::span<const double>(x, TinyMlp::kIn), logits, h1, h2);

                // softmax cross-entropy gradient
                double mx = logits[0];
                for (int o = 1; o < TinyMlp::kOut; ++o) mx = std::max(mx, logits[o]);
                double z = 0.0;
                double p[TinyMlp::kOut];
                for (int o = 0; o < TinyMlp::kOut; ++o) {
                    p[o] = std::exp(logits[o] - mx);
                    z += p[o];
                }
                for (int o = 0; o < TinyMlp::kOut; ++o) p[o] /= z;
                p[data.train_y[idx]] -= 1.0;

                double gh2[TinyMlp::kH2] = {};
                for (int i2 = 0; i2 < TinyMlp::kH2; ++i2) {
                    for (int o = 0; o < TinyMlp::kOut; ++o) {
                        gw3[static_cast<std::size_t>(i2) * TinyMlp::kOut + o] += h2[i2] * p[o];
                        gh2[i2] += net.w3[static_cast<std::size_t>(i2) * TinyMlp::kOut + o] * p[o];
                    }
                    if (h2[i2] <= 0.0) gh2[i2] = 0.0;
                }
                for (int o = 0; o < TinyMlp::kOut; ++o) gb3[static_cast<std::size_t>(o)] += p[o];

                double gh1[TinyMlp::kH1] = {};
                for (int i1 = 0; i1 < TinyMlp::kH1; ++i1) {
                    for (int i2 = 0; i2 < TinyMlp::kH2; ++i2) {
                        gw2[static_cast<std::size_t>(i1) * TinyMlp::kH2 + i2] += h1[i1] * gh2[i2];
                        gh1[i1] += net.w2[static_cast<std::size_t>(i1) * TinyMlp::kH2 + i2] * gh2[i2];
                    }
                    if (h1[i1] <= 0.0) gh1[i1] = 0.0;
                }
                for (int i2 = 0; i2 < TinyMlp::kH2; ++i2) gb2[static_cast<std::size_t>(i2)] += gh2[i2];

                for (int i0 = 0; i0 < TinyMlp::kIn; ++i0) {
                    for (int i1 = 0; i1 < TinyMlp::kH1; ++i1) {
                        gw1[static_cast<std::size_t>(i0) * TinyMlp::kH1 + i1] += x[i0] * gh1[i1];
                    }
                }
                for (int i1 = 0; i1 < TinyMlp::kH1; ++i1) gb1[static_cast<std::size_t>(i1)] += gh1[i1];
            }

            const double scale = config.lr / static_cast<double>(stop - start);
            const auto apply = [scale](std::vector<double>& w, const std::vector<double>& g) {
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= scale * g[i];
            };
            apply(net.w1, gw1);
            apply(net.b1, gb1);
            apply(net.w2, gw2);
            apply(net.b2, gb2);
            apply(net.w3, gw3);
            apply(net.b3, gb3);
        }
    }
    return net;
}

namespace {

struct LayerQuantizer {
    QuantizerModel model;
    std::optional<HwProjection> hw;
};

// Quantize one activation tensor element; noisy conversions run through the
// projected ramp with a per-conversion derived seed.
double convert_activation(double v, const LayerQuantizer& lq, CounterRng* noise_stream) {
    int code;
    if (noise_stream) {
        code = simulate_ramp(v, lq.hw->config, lq.hw->projected, noise_stream->next_u64());
    } else {
        code = quantize_floor(v, lq.model);
    }
    return lq.model.centers[static_cast<std::size_t>(code)];
}

double quantized_accuracy(const TinyMlp& net, const Dataset& data,
                          const std::array<LayerQuantizer, 3>& layers, bool with_noise,
                          std::uint64_t noise_seed) {
    std::optional<CounterRng> noise0, noise1, noise2;
    if (with_noise) {
        noise0.emplace(CounterRng::derive(noise_seed, 20));
        noise1.emplace(CounterRng::derive(noise_seed, 21));
        noise2.emplace(CounterRng::derive(noise_seed, 22));
    }
    const std::size_t n = data.test_y.size();
    std::size_t hits = 0;
    double xq[TinyMlp::kIn], h1[TinyMlp::kH1], h2[TinyMlp::kH2], logits[TinyMlp::kOut];
    for (std::size_t s = 0; s < n; ++s) {
        const double* x = data.test_x.data() + s * TinyMlp::kIn;
        for (int i = 0; i < TinyMlp::kIn; ++i) {
            xq[i] = convert_activation(x[i], layers[0], noise0 ? &*noise0 : nullptr);
        }
        for (int j = 0; j < TinyMlp::kH1; ++j) {
            double acc = net.b1[static_cast<std::size_t>(j)];
            for (int i = 0; i < TinyMlp::kIn; ++i) acc += xq[i] * net.w1[static_cast<std::size_t>(i) * TinyMlp::kH1 + j];
            acc = acc > 0.0 ? acc : 0.0;
            h1[j] = convert_activation(acc, layers[1], noise1 ? &*noise1 : nullptr);
        }
        for (int j = 0; j < TinyMlp::kH2; ++j) {
            double acc = net.b2[static_cast<std::size_t>(j)];
            for (int i = 0; i < TinyMlp::kH1; ++i) acc += h1[i] * net.w2[static_cast<std::size_t>(i) * TinyMlp::kH2 + j];
            acc = acc > 0.0 ? acc : 0.0;
            h2[j] = convert_activation(acc, layers[2], noise2 ? &*noise2 : nullptr);
        }
        for (int o = 0; o < TinyMlp::kOut; ++o) {
            double acc = net.b3[static_cast<std::size_t>(o)];
            for (int i = 0; i < TinyMlp::kH2; ++i) acc += h2[i] * net.w3[static_cast<std::size_t>(i) * TinyMlp::kOut + o];
            logits[o] = acc;
        }
        if (argmax10(logits) == data.test_y[s]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

double clamped_float_accuracy(const TinyMlp& net, const Dataset& data,
                              const std::array<Range, 3>& ranges) {
    const std::size_t n = data.test_y.size();
    std::size_t hits = 0;
    double xc[TinyMlp::kIn], h1[TinyMlp::kH1], h2[TinyMlp::kH2], logits[TinyMlp::kOut];
    for (std::size_t s = 0; s < n; ++s) {
        const double* x = data.test_x.data() + s * TinyMlp::kIn;
        for (int i = 0; i < TinyMlp::kIn; ++i) xc[i] = std::clamp(x[i], ranges[0].lo, ranges[0].hi);
        for (int j = 0; j < TinyMlp::kH1; ++j) {
            double acc = net.b1[static_cast<std::size_t>(j)];
            for (int i = 0; i < TinyMlp::kIn; ++i) acc += xc[i] * net.w1[static_cast<std::size_t>(i) * TinyMlp::kH1 + j];
            h1[j] = std::clamp(acc > 0.0 ? acc : 0.0, ranges[1].lo, ranges[1].hi);
        }
        for (int j = 0; j < TinyMlp::kH2; ++j) {
            double acc = net.b2[static_cast<std::size_t>(j)];
            for (int i = 0; i < TinyMlp::kH1; ++i) acc += h1[i] * net.w2[static_cast<std::size_t>(i) * TinyMlp::kH2 + j];
            h2[j] = std::clamp(acc > 0.0 ? acc : 0.0, ranges[2].lo, ranges[2].hi);
        }
        for (int o = 0; o < TinyMlp::kOut; ++o) {
            double acc = net.b3[static_cast<std::size_t>(o)];
            for (int i = 0; i < TinyMlp::kH2; ++i) acc += h2[i] * net.w3[static_cast<std::size_t>(i) * TinyMlp::kOut + o];
            logits[o] = acc;
        }
        if (argmax10(logits) == data.test_y[s]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

PtqResult ptq_study(const TinyMlp& net, const Dataset& data, int bits_act, int bits_w,
                    Method method, std::optional<Corner> corner, std::uint64_t seed) {
    if (data.calib_x.empty()) throw ValidationError("empty calibration split");
    if (mlp_accuracy(net, data.train_x, data.train_y) < 0.9) {
        throw ValidationError("untrained net (train accuracy below 0.9)");
    }

    // per-layer calibration on the held-out split, minibatches of 32 samples
    constexpr int kCalibBatch = 32;
    const auto calib_config = [&](std::uint64_t stream) {
        CalibrationConfig c;
        c.seed = CounterRng::derive(seed, stream);
        return c;
    };
    std::array<Calibrator, 3> calibs{Calibrator(calib_config(30)), Calibrator(calib_config(31)),
                                     Calibrator(calib_config(32))};
    const auto n_calib = data.calib_y.size();
    std::uint64_t batch_id = 1;
    for (std::size_t start = 0; start < n_calib; start += kCalibBatch, ++batch_id) {
        const std::size_t stop = std::min(n_calib, start + kCalibBatch);
        ActivationBatch b0, b1, b2;
        b0.batch_id = b1.batch_id = b2.batch_id = batch_id;
        b0.source_tag = "input";
        b1.source_tag = "h1";
        b2.source_tag = "h2";
        double h1[TinyMlp::kH1], h2[TinyMlp::kH2], logits[TinyMlp::kOut];
        for (std::size_t s = start; s < stop; ++s) {
            const double* x = data.calib_x.data() + s * TinyMlp::kIn;
            net.forward(std::span<const double>(x, TinyMlp::kIn), logits, h1, h2);
            b0.samples.insert(b0.samples.end(), x, x + TinyMlp::kIn);
            b1.samples.insert(b1.samples.end(), h1, h1 + TinyMlp::kH1);
            b2.samples.insert(b2.samples.end(), h2, h2 + TinyMlp::kH2);
        }
        calibs[0].observe(b0);
        calibs[1].observe(b1);
        calibs[2].observe(b2);
    }

    std::array<LayerQuantizer, 3> layers;
    std::array<Range, 3> ranges;
    for (std::size_t l = 0; l < 3; ++l) {
        const CalibrationSummary summary = calibs[l].finish();
        ranges[l] = {summary.g_min, summary.g_max};
        FitOptions fo;
        fo.seed = CounterRng::derive(seed, 40 + l);
        layers[l].model = fit(method, summary.pool, ranges[l], bits_act, fo);
        if (corner) {
            layers[l].hw = project_hw(layers[l].model);
            layers[l].hw->config.corner = *corner;
        }
    }

    PtqResult result;
    result.acc_float = clamped_float_accuracy(net, data, ranges);

    TinyMlp qnet = net;
    qnet.w1 = weight_quantize_linear(net.w1, bits_w);
    qnet.w2 = weight_quantize_linear(net.w2, bits_w);
    qnet.w3 = weight_quantize_linear(net.w3, bits_w);

    result.acc_ptq = quantized_accuracy(qnet, data, layers, false, 0);
    if (corner) {
        result.acc_noise = quantized_accuracy(qnet, data, layers, true,
                                              CounterRng::derive(seed, 50));
    }
    return result;
}

std::string report_to_csv(const EvalReport& report,
                          const std::map<std::string, std::string>& meta) {
    std::string out;
    for (const auto& [key, value] : meta) {
        out += "# " + key + "=" + value + "\n";
    }
    out += "method,bits,mse,max_abs_err,hw_err,acc_float,acc_ptq,acc_noise,seed\n";
    const auto opt = [](const std::optional<double>& v) {
        return v ? to_shortest(*v) : std::string();
    };
    for (const auto& row : report.rows) {
        out += row.method;
        out += ',' + std::to_string(row.bits);
        out += ',' + to_shortest(row.mse);
        out += ',' + to_shortest(row.max_abs_err);
        out += ',' + opt(row.hw_err);
        out += ',' + opt(row.acc_float);
        out += ',' + opt(row.acc_ptq);
        out += ',' + opt(row.acc_noise);
        out += ',' + std::to_string(row.seed);
        out += '\n';
    }
    return out;
}

}  // namespace nlq
