#include "nlq/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nlq/errors.hpp"

namespace nlq {

namespace {

double percentile_sorted(std::span<const double> sorted, double q) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double rank = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(rank);
    if (lo + 1 >= n) return sorted[n - 1];
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

void check_finite(std::span<const double> samples) {
    for (double v : samples) {
        if (!std::isfinite(v)) throw ValidationError("non-finite sample");
    }
}

}  // namespace

double percentile(std::span<const double> samples, double q) {
    if (samples.empty()) throw ValidationError("percentile of empty input");
    if (q < 0.0 || q > 1.0) throw ValidationError("percentile fraction must be in [0, 1]");
    check_finite(samples);
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    return percentile_sorted(sorted, q);
}

TrimResult trim_batch(const ActivationBatch& batch, double alpha) {
    if (batch.samples.size() < 2) throw ValidationError("trim_batch requires >= 2 samples");
    if (!(alpha > 0.0 && alpha < 0.5)) throw ValidationError("alpha must be in (0, 0.5)");
    check_finite(batch.samples);

    std::vector<double> sorted(batch.samples.begin(), batch.samples.end());
    std::sort(sorted.begin(), sorted.end());

    TrimResult r;
    r.p_low = percentile_sorted(sorted, alpha);
    r.p_high = percentile_sorted(sorted, 1.0 - alpha);
    r.central.reserve(batch.samples.size());
    for (double v : batch.samples) {
        if (v >= r.p_low && v <= r.p_high) r.central.push_back(v);
    }
    // the median always satisfies p_low <= v <= p_high, so central is non-empty
    r.b_min = *std::min_element(r.central.begin(), r.central.end());
    r.b_max = *std::max_element(r.central.begin(), r.central.end());
    return r;
}

Calibrator::Calibrator(CalibrationConfig config)
    : config_(config), rng_(CounterRng::derive(config.seed, 0x706f6f6cull)) {
    if (!(config_.alpha > 0.0 && config_.alpha < 0.5)) {
        throw ValidationError("alpha must be in (0, 0.5)");
    }
    if (config_.pool_cap == 0) throw ValidationError("pool_cap must be positive");
}

void Calibrator::pool_push(double v) {
    ++stream_pos_;
    if (pool_values_.size() < config_.pool_cap) {
        pool_order_.push_back(stream_pos_);
        pool_values_.push_back(v);
        return;
    }
    // reservoir replacement keeps an unbiased subsample of the stream
    const std::uint64_t j = rng_.below(stream_pos_);
    if (j < pool_values_.size()) {
        pool_order_[j] = stream_pos_;
        pool_values_[j] = v;
    }
}

void Calibrator::observe(const ActivationBatch& batch) {
    if (batch.samples.empty()) throw ValidationError("empty batch");
    if (batch.batch_id <= last_batch_id_) {
        throw ValidationError("batch ids must be strictly increasing (got " +
                              std::to_string(batch.batch_id) + " after " +
                              std::to_string(last_batch_id_) + ")");
    }

    const TrimResult trimmed = trim_batch(batch, config_.alpha);
    if (batches_ == 0) {
        g_min_ = trimmed.b_min;
        g_max_ = trimmed.b_max;
    } else {
        g_min_ = config_.ema_keep * g_min_ + config_.ema_add * trimmed.b_min;
        g_max_ = config_.ema_keep * g_max_ + config_.ema_add * trimmed.b_max;
    }
    for (double v : trimmed.central) pool_push(v);
    samples_seen_ += batch.samples.size();
    samples_trimmed_ += batch.samples.size() - trimmed.central.size();
    last_batch_id_ = batch.batch_id;
    ++batches_;
}

CalibrationSummary Calibrator::finish() const {
    if (batches_ == 0) throw ValidationError("no batches observed");

    CalibrationSummary s;
    s.alpha = config_.alpha;
    s.batches = batches_;
    s.samples_seen = samples_seen_;
    s.samples_trimmed = samples_trimmed_;
    s.g_min = g_min_;
    s.g_max = g_max_;
    if (g_min_ == g_max_) {
        const double eps = std::max(1e-9, 1e-9 * std::abs(g_min_));
        s.g_min = g_min_ - eps;
        s.g_max = g_min_ + eps;
        s.degenerate = true;
    }

    // restore stream order; below the cap this is the identity
    std::vector<std::size_t> idx(pool_values_.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return pool_order_[a] < pool_order_[b]; });
    s.pool.reserve(idx.size());
    for (std::size_t i : idx) s.pool.push_back(pool_values_[i]);
    return s;
}

}  // namespace nlq
