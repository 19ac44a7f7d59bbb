#include "nlq/adc_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nlq/errors.hpp"
#include "nlq/rng.hpp"

namespace nlq {

namespace {

constexpr std::uint64_t kConversionStream = 0x636f6e76ull;

void check_code(int code, const QuantizerModel& model) {
    if (code < 0 || code >= model.levels()) {
        throw ValidationError("code " + std::to_string(code) + " out of range for " +
                              std::to_string(model.bits) + " bits");
    }
}

struct SweepState {
    double unit_step = 0.0;
    std::vector<int> multipliers;
    double max_error = std::numeric_limits<double>::infinity();
    bool feasible = false;
};

double projection_error(const std::vector<double>& refs, double u,
                        const std::vector<int>& multipliers) {
    double err = 0.0;
    long long cum = 0;
    for (std::size_t i = 1; i < refs.size(); ++i) {
        cum += multipliers[i - 1];
        const double proj = refs[0] + u * static_cast<double>(cum);
        err = std::max(err, std::abs(proj - refs[i]));
    }
    return err;
}

SweepState evaluate_step(const std::vector<double>& refs, double u, int min_multiplier,
                         int budget) {
    SweepState s;
    s.unit_step = u;
    s.multipliers.reserve(refs.size() - 1);
    long long total = 0;
    for (std::size_t i = 1; i < refs.size(); ++i) {
        const double delta = refs[i] - refs[i - 1];
        const auto m = std::max<long long>(min_multiplier, std::llround(delta / u));
        s.multipliers.push_back(static_cast<int>(m));
        total += m;
    }
    if (total > budget) return s;  // infeasible at this step size
    s.feasible = true;
    s.max_error = projection_error(refs, u, s.multipliers);
    return s;
}

}  // namespace

const char* corner_name(Corner corner) {
    switch (corner) {
        case Corner::TT: return "TT";
        case Corner::FF: return "FF";
        case Corner::SS: return "SS";
    }
    return "?";
}

Corner parse_corner(const std::string& name) {
    if (name == "TT") return Corner::TT;
    if (name == "FF") return Corner::FF;
    if (name == "SS") return Corner::SS;
    throw ValidationError("unknown corner '" + name + "' (expected TT, FF or SS)");
}

CornerNoise corner_noise(Corner corner) {
    constexpr CornerNoise tt{0.21, 1.07};
    switch (corner) {
        case Corner::TT: return tt;
        case Corner::SS: return {tt.mu, tt.sigma * 1.2};
        case Corner::FF: return tt;  // no published figures; reported as TT-equivalent
    }
    return tt;
}

int AdcHardwareConfig::cells_used() const {
    return std::accumulate(multipliers.begin(), multipliers.end(), 0);
}

int quantize_floor(double x, const QuantizerModel& model) {
    const auto& refs = model.references;
    const auto it = std::upper_bound(refs.begin(), refs.end(), x);
    const auto idx = static_cast<long>(it - refs.begin()) - 1;
    return idx < 0 ? 0 : static_cast<int>(idx);
}

double dequantize(int code, const QuantizerModel& model) {
    check_code(code, model);
    return model.centers[static_cast<std::size_t>(code)];
}

HwProjection project_hw(const QuantizerModel& model, int min_multiplier, int budget) {
    validate_model(model);
    if (model.bits > kMaxAdcBits) {
        throw ValidationError("hardware resolution is capped at " +
                              std::to_string(kMaxAdcBits) + " bits");
    }
    if (min_multiplier < 1) throw ValidationError("min_multiplier must be positive");
    if (budget < 1) throw ValidationError("budget must be positive");

    const auto& refs = model.references;
    const auto steps = static_cast<long long>(refs.size()) - 1;
    if (steps * min_multiplier > budget) {
        throw InfeasibleError("budget " + std::to_string(budget) + " cannot host " +
                              std::to_string(steps) + " steps at min_multiplier " +
                              std::to_string(min_multiplier));
    }

    double min_delta = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < refs.size(); ++i) {
        min_delta = std::min(min_delta, refs[i] - refs[i - 1]);
    }
    const double span = refs.back() - refs.front();
    const double u_coarse = min_delta / static_cast<double>(min_multiplier);
    const double u_fine = span / static_cast<double>(budget);
    const double u_start = std::max(u_coarse, u_fine);
    const double u_end = std::min(u_coarse, u_fine);

    constexpr int kGridPoints = 256;
    const double ratio = u_end / u_start;
    SweepState best;
    for (int g = 0; g < kGridPoints; ++g) {
        const double u =
            g == 0 ? u_start
                   : u_start * std::pow(ratio, static_cast<double>(g) /
                                                   static_cast<double>(kGridPoints - 1));
        SweepState s = evaluate_step(refs, u, min_multiplier, budget);
        if (s.feasible && s.max_error < best.max_error) best = std::move(s);
    }
    if (!best.feasible) {
        // widen the step until every delta rounds down to min_multiplier
        double u = u_start;
        for (int i = 0; i < 64 && !best.feasible; ++i) {
            u *= 2.0;
            SweepState s = evaluate_step(refs, u, min_multiplier, budget);
            if (s.feasible) best = std::move(s);
        }
    }
    if (!best.feasible) {
        throw InfeasibleError("no feasible step configuration under budget " +
                              std::to_string(budget));
    }

    // single-multiplier refinement: apply +-1 moves while they strictly
    // reduce the worst reference error
    {
        long long total = std::accumulate(best.multipliers.begin(), best.multipliers.end(), 0ll);
        for (int pass = 0; pass < 1000; ++pass) {
            double best_err = best.max_error;
            std::size_t best_i = 0;
            int best_delta = 0;
            for (std::size_t i = 0; i < best.multipliers.size(); ++i) {
                for (int delta : {-1, +1}) {
                    const int m = best.multipliers[i] + delta;
                    if (m < min_multiplier) continue;
                    if (total + delta > budget) continue;
                    best.multipliers[i] = m;
                    const double err = projection_error(refs, best.unit_step, best.multipliers);
                    best.multipliers[i] = m - delta;
                    if (err < best_err) {
                        best_err = err;
                        best_i = i;
                        best_delta = delta;
                    }
                }
            }
            if (best_delta == 0) break;
            best.multipliers[best_i] += best_delta;
            total += best_delta;
            best.max_error = best_err;
        }
    }

    AdcHardwareConfig cfg;
    cfg.bits = model.bits;
    cfg.unit_step = best.unit_step;
    cfg.multipliers = best.multipliers;
    cfg.min_multiplier = min_multiplier;
    cfg.budget = budget;
    cfg.zero_offset = 0.0;  // the ramp anchor is exact in the behavioral model

    std::vector<double> projected(refs.size());
    projected[0] = refs[0];
    long long cum = 0;
    for (std::size_t i = 1; i < refs.size(); ++i) {
        cum += cfg.multipliers[i - 1];
        projected[i] = refs[0] + cfg.unit_step * static_cast<double>(cum);
    }

    HwProjection out;
    out.config = std::move(cfg);
    out.projected = model;
    out.projected.references = std::move(projected);
    out.projected.midpoint_references = false;
    out.max_ref_error = best.max_error;
    validate_model(out.projected);
    return out;
}

int simulate_ramp(double x, const AdcHardwareConfig& cfg, const QuantizerModel& model,
                  std::optional<std::uint64_t> noise_seed) {
    if (cfg.bits != model.bits) throw ValidationError("config/model bit-width mismatch");
    if (cfg.multipliers.size() != static_cast<std::size_t>(model.levels() - 1)) {
        throw ValidationError("config multiplier count != 2^bits - 1");
    }
    if (!(cfg.unit_step > 0.0)) throw ValidationError("unit_step must be positive");

    double eps = 0.0;
    if (noise_seed) {
        const CornerNoise noise = corner_noise(cfg.corner);
        CounterRng rng(*noise_seed);
        eps = (noise.mu + noise.sigma * rng.next_gauss()) * cfg.unit_step;
    }

    const double anchor = model.references[0];
    int code = 0;
    long long cum = 0;
    for (std::size_t i = 0; i < cfg.multipliers.size(); ++i) {
        cum += cfg.multipliers[i];
        const double level = anchor + cfg.unit_step * static_cast<double>(cum) +
                             cfg.zero_offset + eps;
        if (level <= x) {
            ++code;
        } else {
            break;  // the ramp only rises from here
        }
    }
    return code;
}

std::vector<int> convert_batch(std::span<const double> samples, const AdcHardwareConfig& cfg,
                               const QuantizerModel& model, std::optional<std::uint64_t> seed) {
    std::vector<int> codes;
    codes.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::optional<std::uint64_t> s;
        if (seed) s = CounterRng::derive(*seed, kConversionStream + i);
        codes.push_back(simulate_ramp(samples[i], cfg, model, s));
    }
    return codes;
}

CenterLut build_center_lut(const QuantizerModel& model, int out_bits) {
    if (out_bits < model.bits) throw ValidationError("out_bits must be >= model bits");
    if (out_bits > 16) throw ValidationError("out_bits too large");
    const int levels = 1 << out_bits;
    const int n = model.levels();
    if (n > levels) throw ValidationError("more centers than grid levels");

    const double step = model.range.span() / static_cast<double>(levels - 1);
    CenterLut lut;
    lut.out_bits = out_bits;
    lut.entries.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto idx = static_cast<long>(
            std::llround((model.centers[static_cast<std::size_t>(i)] - model.range.lo) / step));
        idx = std::clamp<long>(idx, 0, levels - 1);
        lut.entries[static_cast<std::size_t>(i)] = static_cast<int>(idx);
    }
    // enforce strict monotonicity: bump collisions upward, then pull back any
    // overflow from the top
    for (int i = 1; i < n; ++i) {
        if (lut.entries[i] <= lut.entries[i - 1]) lut.entries[i] = lut.entries[i - 1] + 1;
    }
    if (lut.entries.back() > levels - 1) {
        lut.entries.back() = levels - 1;
        for (int i = n - 2; i >= 0; --i) {
            if (lut.entries[i] >= lut.entries[i + 1]) lut.entries[i] = lut.entries[i + 1] - 1;
        }
        if (lut.entries.front() < 0) throw ValidationError("cannot build monotone center LUT");
    }
    return lut;
}

double lut_dequantize(int code, const CenterLut& lut, Range range) {
    if (code < 0 || code >= static_cast<int>(lut.entries.size())) {
        throw ValidationError("LUT code out of range");
    }
    const int levels = 1 << lut.out_bits;
    const double step = range.span() / static_cast<double>(levels - 1);
    return range.lo + step * static_cast<double>(lut.entries[static_cast<std::size_t>(code)]);
}

double mac_column(std::span<const int> weights, std::span<const double> inputs, int weight_bits) {
    if (weights.size() != inputs.size()) throw ValidationError("weights/inputs length mismatch");
    if (weights.size() > kMacColumnRows) {
        throw ValidationError("column holds at most " + std::to_string(kMacColumnRows) + " rows");
    }
    if (weight_bits < 2 || weight_bits > 4) throw ValidationError("weight_bits must be in [2, 4]");

    // accumulate the two bitlines separately; the output is their difference
    double right = 0.0, left = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        switch (weights[i]) {
            case 1: right += inputs[i]; break;
            case -1: left += inputs[i]; break;
            case 0: break;
            default: throw ValidationError("weights must be ternary (-1, 0, +1)");
        }
    }
    return right - left;
}

int weight_cell_cost(int weight_bits) {
    if (weight_bits < 2 || weight_bits > 4) throw ValidationError("weight_bits must be in [2, 4]");
    return (1 << (weight_bits - 1)) - 1;
}

int mac_discharge_count(std::span<const int> weights) {
    int count = 0;
    for (int w : weights) {
        if (w != 0) ++count;
    }
    return count;
}

}  // namespace nlq
