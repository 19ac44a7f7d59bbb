#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "nlq/adc_model.hpp"
#include "nlq/calibration.hpp"
#include "nlq/quantizers.hpp"

namespace nlq {

// Free-form resolved-run metadata embedded in every artifact.
using MetaMap = std::map<std::string, std::string>;

struct FitMeta {
    std::uint64_t seed = 0;
    double alpha = 0.005;
    std::size_t pool_size = 0;
    int restarts = 4;
};

struct LoadedCalibration {
    CalibrationSummary summary;
    MetaMap meta;
};

struct LoadedQuantizer {
    QuantizerModel model;
    FitMeta fit;
    std::optional<AdcHardwareConfig> hw;
    std::optional<double> hw_max_ref_error;
    MetaMap meta;
};

void save_calibration(const std::filesystem::path& path, const CalibrationSummary& summary,
                      const MetaMap& meta);
LoadedCalibration load_calibration(const std::filesystem::path& path);

// The quantizer config carries the calibration outcome (range, alpha, pool
// size) plus centers/references; an optional "hw" section stores the ramp
// realization. Models are re-validated on load.
void save_quantizer(const std::filesystem::path& path, const QuantizerModel& model,
                    const FitMeta& fit, const std::optional<HwProjection>& hw,
                    const MetaMap& meta);
LoadedQuantizer load_quantizer(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace nlq
