#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlq/adc_model.hpp"
#include "nlq/quantizers.hpp"

namespace nlq {

double mse(std::span<const double> samples, const QuantizerModel& model);
double max_abs_error(std::span<const double> samples, const QuantizerModel& model);
std::vector<std::uint64_t> code_histogram(std::span<const double> samples,
                                          const QuantizerModel& model);

struct EvalRow {
    std::string method;  // method name, with "+hw" / "+hw+lut" variants
    int bits = 0;
    double mse = 0.0;
    double max_abs_err = 0.0;
    std::vector<std::uint64_t> histogram;
    std::optional<double> hw_err;
    std::optional<double> acc_float;
    std::optional<double> acc_ptq;
    std::optional<double> acc_noise;
    std::uint64_t seed = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::uint64_t seed = 0;
    std::size_t pool_size = 0;
    std::string source;
};

struct EvalOptions {
    bool hw = false;
    int min_multiplier = 1;
    int budget = kBitcellBudget;
    int lut_bits = 6;
    std::optional<Corner> corner;  // corner noise on the hw conversion path
    std::uint64_t seed = 0;
    int restarts = 4;
};

// Fits every requested method on the same pool/range and evaluates it on the
// eval samples (clamped to the range). With hw on, each method gains a "+hw"
// row (projected references, exact centers) and a "+hw+lut" row (projected
// references, centers snapped to the lut_bits grid); corner noise, when set,
// perturbs the conversions of those two rows.
EvalReport evaluate_methods(std::span<const double> pool, std::span<const double> eval_samples,
                            Range range, int bits, const std::vector<Method>& methods,
                            const EvalOptions& opts);

// Symmetric per-tensor linear weight quantization: 2^bits - 1 levels over
// [-max|w|, +max|w|], nearest rounding; all-zero tensors pass through.
std::vector<double> weight_quantize_linear(std::span<const double> weights, int bits);

// ---------------------------------------------------------------------------
// Desk-scale PTQ study: a small seeded blob classifier standing in for the
// full networks, used to compare activation quantizers end to end.

struct BlobDatasetConfig {
    int classes = 10;
    int dim = 16;
    int train_n = 2000;
    int test_n = 500;
    int calib_n = 256;
    double spread = 2.2;  // class-mean scale relative to unit intra-class noise
    std::uint64_t seed = 0;
};

struct Dataset {
    int dim = 0;
    int classes = 0;
    std::vector<double> train_x;  // row-major [n][dim]
    std::vector<int> train_y;
    std::vector<double> test_x;
    std::vector<int> test_y;
    std::vector<double> calib_x;
    std::vector<int> calib_y;
};

Dataset make_blob_dataset(const BlobDatasetConfig& config);

struct TrainConfig {
    int epochs = 60;
    int batch_size = 64;
    double lr = 0.05;
    std::uint64_t seed = 0;
};

// 16-32-32-10 ReLU MLP trained with seeded minibatch gradient descent.
class TinyMlp {
public:
    static constexpr int kIn = 16;
    static constexpr int kH1 = 32;
    static constexpr int kH2 = 32;
    static constexpr int kOut = 10;

    std::vector<double> w1, b1, w2, b2, w3, b3;

    // logits for one sample; h1/h2 receive the hidden activations when given
    void forward(std::span<const double> x, std::span<double> logits, double* h1 = nullptr,
                 double* h2 = nullptr) const;
};

TinyMlp train_tiny_mlp(const Dataset& data, const TrainConfig& config);
double mlp_accuracy(const TinyMlp& net, std::span<const double> xs, std::span<const int> ys);

struct PtqResult {
    double acc_float = 0.0;  // float net with calibrated activation clamps
    double acc_ptq = 0.0;
    std::optional<double> acc_noise;
};

// Calibrates each activation tensor (input, both hidden layers) on the calib
// split, quantizes activations with the chosen method at bits_act and weights
// linearly at bits_w, and optionally injects corner noise into every ADC
// conversion via the hardware-projected ramp.
PtqResult ptq_study(const TinyMlp& net, const Dataset& data, int bits_act, int bits_w,
                    Method method, std::optional<Corner> corner, std::uint64_t seed);

// CSV rendering: "# key=value" metadata lines (sorted), the fixed header, one
// row per configuration. Shortest round-trip decimal formatting throughout.
std::string report_to_csv(const EvalReport& report,
                          const std::map<std::string, std::string>& meta);

std::string to_shortest(double v);

}  // namespace nlq
