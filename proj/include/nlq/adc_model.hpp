#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlq/quantizers.hpp"

namespace nlq {

// 256-cell reference column: 4 cells reserved for zero-crossing calibration.
inline constexpr int kBitcellBudget = 252;
inline constexpr int kCalibCells = 4;
inline constexpr int kMaxAdcBits = 7;
inline constexpr int kMacColumnRows = 256;

enum class Corner { TT, FF, SS };

const char* corner_name(Corner corner);
Corner parse_corner(const std::string& name);

// Conversion-error distribution for a process corner, in unit_step units.
struct CornerNoise {
    double mu = 0.0;
    double sigma = 0.0;
};

// TT is the measured nominal; SS scales sigma by 1.2; FF has no published
// parameters and defaults to TT (flagged in reports).
CornerNoise corner_noise(Corner corner);

// Integer step-multiplier realization of a reference ramp: step i raises the
// ramp by multipliers[i-1] * unit_step above references[0].
struct AdcHardwareConfig {
    int bits = 1;
    double unit_step = 0.0;
    std::vector<int> multipliers;  // 2^bits - 1 entries, each >= min_multiplier
    int min_multiplier = 1;
    int budget = kBitcellBudget;
    int calib_cells = kCalibCells;
    double zero_offset = 0.0;  // residual ramp start offset after calibration
    Corner corner = Corner::TT;

    int cells_used() const;
};

// Output code of the floor-type converter: index of the largest reference not
// exceeding x; inputs below references[0] saturate to code 0.
int quantize_floor(double x, const QuantizerModel& model);

double dequantize(int code, const QuantizerModel& model);

struct HwProjection {
    AdcHardwareConfig config;
    QuantizerModel projected;  // original centers, ramp-realizable references
    double max_ref_error = 0.0;
};

// Picks unit_step and integer multipliers minimizing the worst reference
// error under the cell budget: geometric sweep over unit_step followed by a
// single-multiplier refinement pass.
HwProjection project_hw(const QuantizerModel& model, int min_multiplier = 1,
                        int budget = kBitcellBudget);

// Thermometer conversion against the configured ramp. One Gaussian error is
// drawn per conversion when noise_seed is set, scaled by unit_step, and
// applied to the whole ramp.
int simulate_ramp(double x, const AdcHardwareConfig& cfg, const QuantizerModel& model,
                  std::optional<std::uint64_t> noise_seed = std::nullopt);

// Per-sample noise streams derive from (seed, sample index) so batches can be
// converted in any order or in parallel with identical results.
std::vector<int> convert_batch(std::span<const double> samples, const AdcHardwareConfig& cfg,
                               const QuantizerModel& model,
                               std::optional<std::uint64_t> seed = std::nullopt);

// Low-bit code -> index into the uniform 2^out_bits grid over the model range.
struct CenterLut {
    int out_bits = 6;
    std::vector<int> entries;  // strictly increasing, one per code
};

CenterLut build_center_lut(const QuantizerModel& model, int out_bits);
double lut_dequantize(int code, const CenterLut& lut, Range range);

// Golden model of one ternary MAC column: sum of w*x accumulated as the
// right/left bitline difference. weights in {-1, 0, +1}, length <= 256.
double mac_column(std::span<const int> weights, std::span<const double> inputs, int weight_bits);

// Replica cells required per weight magnitude at the given precision
// (binary-coded parallel cells, sign handled by the dual cell paths).
int weight_cell_cost(int weight_bits);

// Cells that discharge for a given weight vector; zero weights open no path.
int mac_discharge_count(std::span<const int> weights);

}  // namespace nlq
