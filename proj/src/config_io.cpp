#include "nlq/config_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nlq/errors.hpp"
#include "nlq/version.hpp"

namespace nlq {

namespace {

using json = nlohmann::json;

json load_json(const std::filesystem::path& path, const char* expected_kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    if (!j.is_object() || j.value("kind", "") != expected_kind) {
        throw ValidationError(path.string() + ": not a " + std::string(expected_kind) + " file");
    }
    return j;
}

json meta_to_json(const MetaMap& meta) {
    json j = json::object();
    for (const auto& [k, v] : meta) j[k] = v;
    return j;
}

MetaMap meta_from_json(const json& j) {
    MetaMap meta;
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            if (v.is_string()) meta[k] = v.get<std::string>();
        }
    }
    return meta;
}

std::vector<double> finite_array(const json& j, const char* field) {
    if (!j.is_array()) throw ValidationError(std::string(field) + " must be an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number()) throw ValidationError(std::string(field) + " holds a non-number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ValidationError(std::string(field) + " holds a non-finite value");
        out.push_back(d);
    }
    return out;
}

}  // namespace

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw IoError("write failure on " + path.string());
}

void save_calibration(const std::filesystem::path& path, const CalibrationSummary& summary,
                      const MetaMap& meta) {
    json j;
    j["kind"] = "nlq_calibration";
    j["version"] = kVersion;
    j["alpha"] = summary.alpha;
    j["g_min"] = summary.g_min;
    j["g_max"] = summary.g_max;
    j["degenerate"] = summary.degenerate;
    j["batches"] = summary.batches;
    j["samples_seen"] = summary.samples_seen;
    j["samples_trimmed"] = summary.samples_trimmed;
    j["pool"] = summary.pool;
    j["meta"] = meta_to_json(meta);
    write_text_file(path, j.dump(1, '\t') + "\n");
}

LoadedCalibration load_calibration(const std::filesystem::path& path) {
    const json j = load_json(path, "nlq_calibration");
    LoadedCalibration out;
    try {
        out.summary.alpha = j.at("alpha").get<double>();
        out.summary.g_min = j.at("g_min").get<double>();
        out.summary.g_max = j.at("g_max").get<double>();
        out.summary.degenerate = j.at("degenerate").get<bool>();
        out.summary.batches = j.at("batches").get<int>();
        out.summary.samples_seen = j.at("samples_seen").get<std::size_t>();
        out.summary.samples_trimmed = j.at("samples_trimmed").get<std::size_t>();
        out.summary.pool = finite_array(j.at("pool"), "pool");
        out.meta = meta_from_json(j.value("meta", json::object()));
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    if (out.summary.pool.empty()) throw ValidationError(path.string() + ": empty pool");
    if (!(out.summary.g_min < out.summary.g_max)) {
        throw ValidationError(path.string() + ": g_min must be below g_max");
    }
    return out;
}

void save_quantizer(const std::filesystem::path& path, const QuantizerModel& model,
                    const FitMeta& fit, const std::optional<HwProjection>& hw,
                    const MetaMap& meta) {
    validate_model(model);
    json j;
    j["kind"] = "nlq_quantizer";
    j["version"] = kVersion;
    j["method"] = method_name(model.method);
    j["bits"] = model.bits;
    j["g_min"] = model.range.lo;
    j["g_max"] = model.range.hi;
    j["centers"] = model.centers;
    j["references"] = model.references;
    j["midpoint_references"] = model.midpoint_references;
    j["padded"] = model.padded;
    j["fit"] = {{"seed", fit.seed},
                {"alpha", fit.alpha},
                {"pool_size", fit.pool_size},
                {"restarts", fit.restarts}};
    if (hw) {
        j["hw"] = {{"unit_step", hw->config.unit_step},
                   {"multipliers", hw->config.multipliers},
                   {"min_multiplier", hw->config.min_multiplier},
                   {"budget", hw->config.budget},
                   {"calib_cells", hw->config.calib_cells},
                   {"zero_offset", hw->config.zero_offset},
                   {"corner", corner_name(hw->config.corner)},
                   {"max_ref_error", hw->max_ref_error}};
    }
    j["meta"] = meta_to_json(meta);
    write_text_file(path, j.dump(1, '\t') + "\n");
}

LoadedQuantizer load_quantizer(const std::filesystem::path& path) {
    const json j = load_json(path, "nlq_quantizer");
    LoadedQuantizer out;
    try {
        QuantizerModel m;
        m.method = parse_method(j.at("method").get<std::string>());
        m.bits = j.at("bits").get<int>();
        m.range = {j.at("g_min").get<double>(), j.at("g_max").get<double>()};
        m.centers = finite_array(j.at("centers"), "centers");
        m.references = finite_array(j.at("references"), "references");
        m.midpoint_references = j.value("midpoint_references", true);
        m.padded = j.value("padded", false);
        validate_model(m);
        out.model = std::move(m);

        const json& f = j.at("fit");
        out.fit.seed = f.at("seed").get<std::uint64_t>();
        out.fit.alpha = f.at("alpha").get<double>();
        out.fit.pool_size = f.at("pool_size").get<std::size_t>();
        out.fit.restarts = f.at("restarts").get<int>();

        if (j.contains("hw")) {
            const json& h = j.at("hw");
            AdcHardwareConfig cfg;
            cfg.bits = out.model.bits;
            cfg.unit_step = h.at("unit_step").get<double>();
            cfg.multipliers = h.at("multipliers").get<std::vector<int>>();
            cfg.min_multiplier = h.at("min_multiplier").get<int>();
            cfg.budget = h.at("budget").get<int>();
            cfg.calib_cells = h.value("calib_cells", kCalibCells);
            cfg.zero_offset = h.at("zero_offset").get<double>();
            cfg.corner = parse_corner(h.at("corner").get<std::string>());
            if (cfg.multipliers.size() != static_cast<std::size_t>(out.model.levels() - 1)) {
                throw ValidationError("hw multiplier count != 2^bits - 1");
            }
            if (cfg.cells_used() > cfg.budget) {
                throw ValidationError("hw multipliers exceed the cell budget");
            }
            out.hw = std::move(cfg);
            out.hw_max_ref_error = h.at("max_ref_error").get<double>();
        }
        out.meta = meta_from_json(j.value("meta", json::object()));
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return out;
}

}  // namespace nlq
