#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nlq/activation_data.hpp"
#include "nlq/rng.hpp"

namespace nlq {

struct CalibrationConfig {
    double alpha = 0.005;  // per-batch tail ratio, in (0, 0.5)
    double ema_keep = 0.9;
    double ema_add = 0.1;
    std::size_t pool_cap = std::size_t(1) << 20;  // reservoir limit on retained samples
    std::uint64_t seed = 0;                       // reservoir subsampling stream
};

struct CalibrationSummary {
    double g_min = 0.0;
    double g_max = 0.0;
    std::vector<double> pool;
    int batches = 0;
    std::size_t samples_seen = 0;
    std::size_t samples_trimmed = 0;
    bool degenerate = false;  // equal range was widened by epsilon
    double alpha = 0.005;
};

struct TrimResult {
    std::vector<double> central;  // input order preserved
    double b_min = 0.0;
    double b_max = 0.0;
    double p_low = 0.0;
    double p_high = 0.0;
};

// Linear-interpolation percentile: rank r = q*(n-1), result
// x[floor(r)] + frac(r) * (x[floor(r)+1] - x[floor(r)]) on the sorted data.
double percentile(std::span<const double> samples, double q);

// Keeps samples v with percentile(alpha) <= v <= percentile(1-alpha).
TrimResult trim_batch(const ActivationBatch& batch, double alpha);

// Streaming EMA range tracker. Batches must be observed sequentially in
// order; the first batch initializes (g_min, g_max) directly, later batches
// update them as keep*g + add*b.
class Calibrator {
public:
    explicit Calibrator(CalibrationConfig config = {});

    void observe(const ActivationBatch& batch);
    CalibrationSummary finish() const;

    int batches_seen() const { return batches_; }
    double g_min() const { return g_min_; }
    double g_max() const { return g_max_; }

private:
    void pool_push(double v);

    CalibrationConfig config_;
    double g_min_ = 0.0;
    double g_max_ = 0.0;
    int batches_ = 0;
    std::uint64_t last_batch_id_ = 0;
    std::size_t samples_seen_ = 0;
    std::size_t samples_trimmed_ = 0;
    std::uint64_t stream_pos_ = 0;
    std::vector<std::uint64_t> pool_order_;
    std::vector<double> pool_values_;
    CounterRng rng_;
};

}  // namespace nlq
