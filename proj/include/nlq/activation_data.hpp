#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace nlq {

// One calibration batch of scalar activation samples.
struct ActivationBatch {
    std::vector<double> samples;
    std::uint64_t batch_id = 0;
    std::string source_tag;
};

enum class DistKind { ReluGauss, ReluMixture, Lognormal, Uniform };

struct MixtureComponent {
    double weight = 0.0;
    double mean = 0.0;
    double sigma = 1.0;
};

// Seeded synthetic activation source. boundary_mass forces that fraction of
// each batch to exactly 0.0, emulating ReLU/clamp pile-up at the lower edge.
struct SyntheticDistSpec {
    DistKind kind = DistKind::ReluGauss;
    double mean = 0.0;   // relu_gauss: pre-rectification mean; lognormal: log-space mu
    double sigma = 1.0;  // relu_gauss / lognormal scale
    double lo = 0.0;     // uniform bounds
    double hi = 1.0;
    std::vector<MixtureComponent> components;  // relu_mixture
    double clamp_max = std::numeric_limits<double>::infinity();
    double boundary_mass = 0.0;
    std::uint64_t seed = 0;
};

enum class BatchFormat { Csv, RawF32le };

const char* dist_kind_name(DistKind kind);
DistKind parse_dist_kind(const std::string& name);

// Compact text form "kind(key=value,...)" used by the CLI and run metadata.
// parse accepts keys in any order; format emits a canonical ordering so the
// string round-trips byte-identically.
SyntheticDistSpec parse_dist_spec(const std::string& text);
std::string format_dist_spec(const SyntheticDistSpec& spec);

std::vector<ActivationBatch> load_batches(const std::filesystem::path& path, BatchFormat format);
void save_batches(const std::vector<ActivationBatch>& batches, const std::filesystem::path& path,
                  BatchFormat format);

// Deterministic: the sample stream depends only on (spec, batch index). All
// emitted values are exactly representable in 32-bit floats so raw_f32le
// round trips are lossless.
std::vector<ActivationBatch> generate(const SyntheticDistSpec& spec, int n_batches, int batch_size);

}  // namespace nlq
