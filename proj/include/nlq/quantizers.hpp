#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nlq {

enum class Method { Bskmq, Linear, LloydMax, Cdf, Kmeans };

const char* method_name(Method method);
Method parse_method(const std::string& name);

struct Range {
    double lo = 0.0;
    double hi = 1.0;
    double span() const { return hi - lo; }
};

// Fitting accepts up to 8 bits so high-precision software baselines can run;
// the hardware projection path enforces the 7-bit array limit separately.
inline constexpr int kMaxFitBits = 8;

// A scalar quantizer: 2^bits strictly increasing centers plus the derived
// reference (decision) levels. references[0] == centers[0]; for fitted models
// references[i] is the midpoint of adjacent centers so a floor-type ADC
// reproduces nearest-center quantization. Hardware-projected models replace
// the references with ramp-realizable levels and clear midpoint_references.
struct QuantizerModel {
    int bits = 1;
    Method method = Method::Linear;
    Range range;
    std::vector<double> centers;
    std::vector<double> references;
    bool midpoint_references = true;
    bool padded = false;  // degenerate pool repaired by gap-midpoint padding

    int levels() const { return 1 << bits; }
};

// Throws ValidationError unless all structural invariants hold.
void validate_model(const QuantizerModel& model);

// Builds a model from explicit levels, bypassing the midpoint invariant when
// midpoint_references is false (raw ramp fixtures, projected models).
QuantizerModel make_model(Method method, int bits, Range range, std::vector<double> centers,
                          std::vector<double> references, bool midpoint_references);

// R[0] = C[0]; R[i] = (C[i-1] + C[i]) / 2. Input must be strictly increasing.
std::vector<double> map_references(std::span<const double> centers);

struct FitOptions {
    std::uint64_t seed = 0;
    int restarts = 4;
    int lloyd_max_iter = 500;
    double lloyd_tol = -1.0;  // < 0 selects 1e-9 * range span
};

QuantizerModel fit_bskmq(std::span<const double> pool, Range range, int bits,
                         const FitOptions& opts = {});
QuantizerModel fit_linear(Range range, int bits);
QuantizerModel fit_lloyd_max(std::span<const double> pool, Range range, int bits,
                             int max_iter = 500, double tol = -1.0);
QuantizerModel fit_cdf(std::span<const double> pool, Range range, int bits);
QuantizerModel fit_kmeans(std::span<const double> pool, Range range, int bits, int restarts,
                          std::uint64_t seed);

// Dispatch on method; pool is ignored for Linear.
QuantizerModel fit(Method method, std::span<const double> pool, Range range, int bits,
                   const FitOptions& opts = {});

struct Kmeans1dResult {
    std::vector<double> centers;      // sorted
    std::vector<int> assignments;     // per input sample, original order
    double wcss = 0.0;
};

// Seeded k-means++ / Lloyd on scalars. Initialization and iteration run in
// min-max normalized coordinates so results are scale-equivariant; empty
// clusters are reseeded at the sample farthest from its center.
Kmeans1dResult kmeans_1d_core(std::span<const double> samples, int k, int restarts,
                              std::uint64_t seed);

struct DpOptimal1d {
    std::vector<double> centers;
    double wcss = 0.0;
};

// Exact 1-D clustering oracle: O(k n^2) dynamic programming over contiguous
// segments of the sorted input.
DpOptimal1d dp_optimal_1d(std::span<const double> sorted_samples, int k);

std::vector<double> clamp_to_range(std::span<const double> samples, Range range);

}  // namespace nlq
