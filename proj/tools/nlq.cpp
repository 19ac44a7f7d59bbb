// nlq: nonlinear activation quantization toolkit.
//
// Pipeline: generate/ingest activation batches -> calibrate a robust range ->
// fit quantization centers -> project references onto the in-memory ramp ADC
// -> evaluate quantization error and desk-scale PTQ accuracy.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "nlq/activation_data.hpp"
#include "nlq/adc_model.hpp"
#include "nlq/calibration.hpp"
#include "nlq/config_io.hpp"
#include "nlq/errors.hpp"
#include "nlq/evaluation.hpp"
#include "nlq/quantizers.hpp"
#include "nlq/rng.hpp"
#include "nlq/version.hpp"

namespace fs = std::filesystem;
using namespace nlq;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitIo = 4;

BatchFormat resolve_format(const std::string& name, const fs::path& path) {
    if (name == "csv") return BatchFormat::Csv;
    if (name == "f32" || name == "raw_f32le") return BatchFormat::RawF32le;
    if (name == "auto") {
        return path.extension() == ".csv" ? BatchFormat::Csv : BatchFormat::RawF32le;
    }
    throw ValidationError("unknown format '" + name + "' (expected csv, f32 or auto)");
}

struct SourceOpts {
    std::string input;
    std::string format = "auto";
    std::string synthetic;
    int n_batches = 32;     // calibration set size default
    int batch_size = 4096;  // exposed because the source text fixes neither
};

void add_source_flags(CLI::App* cmd, SourceOpts& src) {
    cmd->add_option("--input", src.input, "batch file to read");
    cmd->add_option("--format", src.format, "input file format: csv, f32 or auto")
        ->default_val("auto");
    cmd->add_option("--synthetic", src.synthetic,
                    "synthetic source, e.g. \"relu_gauss(mean=0,sigma=1,seed=7)\"");
    cmd->add_option("--n-batches", src.n_batches, "synthetic batch count")->default_val(32);
    cmd->add_option("--batch-size", src.batch_size, "synthetic batch size")->default_val(4096);
}

std::vector<ActivationBatch> load_source(const SourceOpts& src,
                                         std::optional<std::uint64_t> seed_override = {}) {
    if (src.input.empty() == src.synthetic.empty()) {
        throw ValidationError("exactly one of --input / --synthetic is required");
    }
    if (!src.input.empty()) {
        return load_batches(src.input, resolve_format(src.format, src.input));
    }
    SyntheticDistSpec spec = parse_dist_spec(src.synthetic);
    if (seed_override) spec.seed = *seed_override;
    return generate(spec, src.n_batches, src.batch_size);
}

std::string describe_source(const SourceOpts& src) {
    if (!src.input.empty()) return "file:" + src.input;
    return format_dist_spec(parse_dist_spec(src.synthetic));
}

CalibrationSummary calibrate_batches(const std::vector<ActivationBatch>& batches, double alpha,
                                     std::size_t pool_cap, std::uint64_t seed) {
    CalibrationConfig config;
    config.alpha = alpha;
    config.pool_cap = pool_cap;
    config.seed = seed;
    Calibrator calib(config);
    for (const auto& batch : batches) calib.observe(batch);
    return calib.finish();
}

std::vector<Method> parse_methods(const std::string& csv) {
    std::vector<Method> methods;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        const std::string tok = csv.substr(pos, comma - pos);
        if (!tok.empty()) methods.push_back(parse_method(tok));
        pos = comma + 1;
    }
    if (methods.empty()) throw ValidationError("no methods given");
    return methods;
}

std::vector<int> parse_bits_list(const std::string& text) {
    std::vector<int> bits;
    const std::size_t colon = text.find(':');
    if (colon != std::string::npos) {
        const int lo = std::stoi(text.substr(0, colon));
        const int hi = std::stoi(text.substr(colon + 1));
        if (lo > hi) throw ValidationError("bits range must be lo:hi");
        for (int b = lo; b <= hi; ++b) bits.push_back(b);
    } else {
        std::size_t pos = 0;
        while (pos <= text.size()) {
            std::size_t comma = text.find(',', pos);
            if (comma == std::string::npos) comma = text.size();
            const std::string tok = text.substr(pos, comma - pos);
            if (!tok.empty()) bits.push_back(std::stoi(tok));
            pos = comma + 1;
        }
    }
    if (bits.empty()) throw ValidationError("no bit-widths given");
    for (int b : bits) {
        if (b < 1 || b > kMaxAdcBits) {
            throw ValidationError("bits " + std::to_string(b) +
                                  " outside the achievable 1.." + std::to_string(kMaxAdcBits));
        }
    }
    return bits;
}

void check_cli_bits(int bits) {
    if (bits < 1 || bits > kMaxAdcBits) {
        throw ValidationError("bits must be in [1, " + std::to_string(kMaxAdcBits) +
                              "]: the reference column caps resolution at " +
                              std::to_string(kMaxAdcBits) + " bits");
    }
}

// ---------------------------------------------------------------------------
// subcommand options

struct GenerateOpts {
    std::string synthetic;
    int n_batches = 32;
    int batch_size = 4096;
    std::string out;
    std::string format = "auto";
};

struct CalibrateOpts {
    SourceOpts src;
    double alpha = 0.005;
    std::uint64_t seed = 0;
    std::size_t pool_cap = std::size_t(1) << 20;
    bool allow_degenerate = false;
    std::string out;
};

struct FitOptsCli {
    std::string calib;
    std::string method = "bskmq";
    int bits = 4;
    std::uint64_t seed = 0;
    int restarts = 4;
    std::string out;
};

struct ProjectOpts {
    std::string config;
    int budget = kBitcellBudget;
    int min_multiplier = 1;
    std::string corner = "TT";
    std::string out;
};

struct EvaluateOpts {
    std::vector<std::string> configs;
    SourceOpts src;
    bool hw = false;
    int budget = kBitcellBudget;
    int min_multiplier = 1;
    int lut_bits = 6;
    std::string corner;
    std::uint64_t seed = 0;
    std::string out;
};

struct SweepOpts {
    SourceOpts src;
    std::string bits = "3";
    std::string methods = "bskmq,linear,lloyd_max,cdf,kmeans";
    int seeds = 1;
    std::uint64_t seed = 0;
    double alpha = 0.005;
    int eval_samples = 65536;
    bool hw = false;
    bool ptq = false;
    int bits_w = 4;
    int budget = kBitcellBudget;
    int min_multiplier = 1;
    int lut_bits = 6;
    std::string corner;
    int jobs = 1;
    std::string out;
};

struct PtqOpts {
    int bits_act = 3;
    int bits_w = 4;
    std::string methods = "bskmq,linear";
    std::string corner;
    int seeds = 1;
    std::uint64_t seed = 0;
    std::string out;
};

MetaMap base_meta(const std::string& command) {
    return {{"command", command}, {"version", kVersion}};
}

// ---------------------------------------------------------------------------
// subcommand bodies

int run_generate(const GenerateOpts& o) {
    const SyntheticDistSpec spec = parse_dist_spec(o.synthetic);
    const auto batches = generate(spec, o.n_batches, o.batch_size);
    save_batches(batches, o.out, resolve_format(o.format, o.out));
    std::cout << "wrote " << batches.size() << " batches x " << o.batch_size << " samples to "
              << o.out << "\n";
    return 0;
}

int run_calibrate(const CalibrateOpts& o) {
    if (!(o.alpha > 0.0 && o.alpha < 0.5)) {
        throw ValidationError("--alpha must be in (0, 0.5)");
    }
    const auto batches = load_source(o.src);
    const CalibrationSummary summary =
        calibrate_batches(batches, o.alpha, o.pool_cap, o.seed);

    const double trim_frac = summary.samples_seen == 0
                                 ? 0.0
                                 : static_cast<double>(summary.samples_trimmed) /
                                       static_cast<double>(summary.samples_seen);
    std::cout << "batches=" << summary.batches << " samples=" << summary.samples_seen
              << " trimmed=" << summary.samples_trimmed << " (" << to_shortest(trim_frac * 100.0)
              << "%) g_min=" << to_shortest(summary.g_min)
              << " g_max=" << to_shortest(summary.g_max)
              << (summary.degenerate ? " [degenerate]" : "") << "\n";
    if (summary.degenerate && !o.allow_degenerate) {
        throw ValidationError(
            "calibrated range is degenerate (constant data); pass --allow-degenerate to keep it");
    }

    MetaMap meta = base_meta("calibrate");
    meta["source"] = describe_source(o.src);
    meta["alpha"] = to_shortest(o.alpha);
    meta["pool_cap"] = std::to_string(o.pool_cap);
    meta["seed"] = std::to_string(o.seed);
    save_calibration(o.out, summary, meta);
    return 0;
}

int run_fit(const FitOptsCli& o) {
    check_cli_bits(o.bits);
    const LoadedCalibration calib = load_calibration(o.calib);
    const Method method = parse_method(o.method);

    FitOptions fo;
    fo.seed = o.seed;
    fo.restarts = o.restarts;
    const Range range{calib.summary.g_min, calib.summary.g_max};
    const QuantizerModel model = fit(method, calib.summary.pool, range, o.bits, fo);

    FitMeta fit_meta;
    fit_meta.seed = o.seed;
    fit_meta.alpha = calib.summary.alpha;
    fit_meta.pool_size = calib.summary.pool.size();
    fit_meta.restarts = o.restarts;

    MetaMap meta = base_meta("fit");
    meta["calibration"] = o.calib;
    meta["method"] = o.method;
    meta["bits"] = std::to_string(o.bits);
    meta["seed"] = std::to_string(o.seed);
    save_quantizer(o.out, model, fit_meta, std::nullopt, meta);
    std::cout << "fitted " << o.method << " bits=" << o.bits << " on "
              << calib.summary.pool.size() << " samples -> " << o.out << "\n";
    return 0;
}

int run_project(const ProjectOpts& o) {
    LoadedQuantizer lq = load_quantizer(o.config);
    HwProjection proj = project_hw(lq.model, o.min_multiplier, o.budget);
    proj.config.corner = parse_corner(o.corner);

    MetaMap meta = lq.meta;
    for (auto& [k, v] : base_meta("project-hw")) meta[k] = v;
    meta["budget"] = std::to_string(o.budget);
    meta["min_multiplier"] = std::to_string(o.min_multiplier);
    meta["corner"] = o.corner;
    save_quantizer(o.out, lq.model, lq.fit, proj, meta);
    std::cout << "projected: cells=" << proj.config.cells_used() << "/" << o.budget
              << " unit_step=" << to_shortest(proj.config.unit_step)
              << " max_ref_error=" << to_shortest(proj.max_ref_error) << "\n";
    return 0;
}

int run_evaluate(const EvaluateOpts& o) {
    if (o.configs.empty()) throw ValidationError("at least one --config is required");
    const auto batches = load_source(o.src);
    std::vector<double> samples;
    for (const auto& b : batches) {
        samples.insert(samples.end(), b.samples.begin(), b.samples.end());
    }

    std::optional<Corner> corner;
    if (!o.corner.empty()) corner = parse_corner(o.corner);

    EvalReport report;
    report.seed = o.seed;
    report.pool_size = samples.size();
    for (const auto& path : o.configs) {
        const LoadedQuantizer lq = load_quantizer(path);

        EvalRow row;
        row.method = method_name(lq.model.method);
        row.bits = lq.model.bits;
        row.seed = o.seed;
        row.mse = mse(samples, lq.model);
        row.max_abs_err = max_abs_error(samples, lq.model);
        row.histogram = code_histogram(samples, lq.model);
        report.rows.push_back(std::move(row));

        std::optional<HwProjection> proj;
        if (lq.hw) {
            HwProjection p;
            p.config = *lq.hw;
            p.projected = lq.model;
            p.projected.midpoint_references = false;
            std::vector<double> refs(lq.model.references.size());
            refs[0] = lq.model.references[0];
            long long cum = 0;
            for (std::size_t i = 1; i < refs.size(); ++i) {
                cum += p.config.multipliers[i - 1];
                refs[i] = refs[0] + p.config.unit_step * static_cast<double>(cum);
            }
            p.projected.references = std::move(refs);
            p.max_ref_error = lq.hw_max_ref_error.value_or(0.0);
            proj = std::move(p);
        } else if (o.hw) {
            proj = project_hw(lq.model, o.min_multiplier, o.budget);
        }
        if (!proj) continue;
        if (corner) proj->config.corner = *corner;

        std::optional<std::uint64_t> noise_seed;
        if (corner) noise_seed = CounterRng::derive(o.seed, 0x200);
        const auto codes = convert_batch(samples, proj->config, proj->projected, noise_seed);
        const CenterLut lut = build_center_lut(lq.model, o.lut_bits);

        for (int variant = 0; variant < 2; ++variant) {
            EvalRow r;
            r.method = std::string(method_name(lq.model.method)) +
                       (variant == 0 ? "+hw" : "+hw+lut");
            r.bits = lq.model.bits;
            r.seed = o.seed;
            r.hw_err = proj->max_ref_error;
            r.histogram.assign(static_cast<std::size_t>(lq.model.levels()), 0);
            double acc = 0.0, worst = 0.0;
            for (std::size_t i = 0; i < samples.size(); ++i) {
                const double decoded =
                    variant == 0
                        ? lq.model.centers[static_cast<std::size_t>(codes[i])]
                        : lut_dequantize(codes[i], lut, lq.model.range);
                const double d = samples[i] - decoded;
                acc += d * d;
                worst = std::max(worst, std::abs(d));
                ++r.histogram[static_cast<std::size_t>(codes[i])];
            }
            r.mse = acc / static_cast<double>(samples.size());
            r.max_abs_err = worst;
            report.rows.push_back(std::move(r));
        }
    }

    MetaMap meta = base_meta("evaluate");
    meta["source"] = describe_source(o.src);
    meta["seed"] = std::to_string(o.seed);
    if (!o.corner.empty()) meta["corner"] = o.corner;
    write_text_file(o.out, report_to_csv(report, meta));
    std::cout << "wrote " << report.rows.size() << " rows to " << o.out << "\n";
    return 0;
}

int run_sweep(const SweepOpts& o) {
    const std::vector<int> bits_list = parse_bits_list(o.bits);
    const std::vector<Method> methods = parse_methods(o.methods);
    if (o.seeds < 1) throw ValidationError("--seeds must be positive");
    if (!(o.alpha > 0.0 && o.alpha < 0.5)) throw ValidationError("--alpha must be in (0, 0.5)");
    std::optional<Corner> corner;
    if (!o.corner.empty()) corner = parse_corner(o.corner);

    const bool synthetic = !o.src.synthetic.empty();
    std::vector<ActivationBatch> file_batches;
    if (!synthetic) file_batches = load_source(o.src);

    std::vector<std::vector<EvalRow>> per_seed(static_cast<std::size_t>(o.seeds));

    const auto run_one = [&](int s) {
        const auto su = static_cast<std::uint64_t>(s);
        std::vector<ActivationBatch> batches;
        std::vector<double> eval_set;
        if (synthetic) {
            batches = load_source(o.src, CounterRng::derive(o.seed, 0xD157 + su));
            SourceOpts eval_src = o.src;
            const int eval_batches =
                (o.eval_samples + o.src.batch_size - 1) / o.src.batch_size;
            eval_src.n_batches = std::max(1, eval_batches);
            const auto eb = load_source(eval_src, CounterRng::derive(o.seed, 0xE7A1 + su));
            for (const auto& b : eb) {
                eval_set.insert(eval_set.end(), b.samples.begin(), b.samples.end());
            }
            eval_set.resize(std::min<std::size_t>(eval_set.size(),
                                                  static_cast<std::size_t>(o.eval_samples)));
        } else {
            batches = file_batches;
        }
        const CalibrationSummary summary =
            calibrate_batches(batches, o.alpha, std::size_t(1) << 20,
                              CounterRng::derive(o.seed, 0xCA11 + su));
        if (!synthetic) eval_set = summary.pool;
        const Range range{summary.g_min, summary.g_max};

        std::optional<Dataset> dataset;
        std::optional<TinyMlp> net;
        if (o.ptq) {
            BlobDatasetConfig ds;
            ds.seed = CounterRng::derive(o.seed, 0xDA7A + su);
            dataset = make_blob_dataset(ds);
            TrainConfig tc;
            tc.seed = ds.seed;
            net = train_tiny_mlp(*dataset, tc);
        }

        std::vector<EvalRow>& rows = per_seed[static_cast<std::size_t>(s)];
        for (int bits : bits_list) {
            EvalOptions eo;
            eo.hw = o.hw;
            eo.min_multiplier = o.min_multiplier;
            eo.budget = o.budget;
            eo.lut_bits = o.lut_bits;
            eo.corner = corner;
            eo.seed = CounterRng::derive(o.seed, 0xF17 + (su << 8) +
                                                     static_cast<std::uint64_t>(bits));
            EvalReport r = evaluate_methods(summary.pool, eval_set, range, bits, methods, eo);
            for (auto& row : r.rows) row.seed = su;

            if (o.ptq) {
                for (auto& row : r.rows) {
                    if (row.method.find('+') != std::string::npos) continue;
                    const PtqResult ptq =
                        ptq_study(*net, *dataset, bits, o.bits_w, parse_method(row.method),
                                  corner, CounterRng::derive(o.seed, 0x9712 + su));
                    row.acc_float = ptq.acc_float;
                    row.acc_ptq = ptq.acc_ptq;
                    row.acc_noise = ptq.acc_noise;
                }
            }
            rows.insert(rows.end(), r.rows.begin(), r.rows.end());
        }
    };

    const int jobs = std::max(1, o.jobs);
    if (jobs == 1) {
        for (int s = 0; s < o.seeds; ++s) run_one(s);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
        for (int t = 0; t < jobs; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (int s = next.fetch_add(1); s < o.seeds; s = next.fetch_add(1)) {
                        run_one(s);
                    }
                } catch (...) {
                    errors[static_cast<std::size_t>(t)] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    EvalReport report;
    report.seed = o.seed;
    for (const auto& rows : per_seed) {
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    }

    MetaMap meta = base_meta("sweep");
    meta["source"] = describe_source(o.src);
    meta["bits"] = o.bits;
    meta["methods"] = o.methods;
    meta["seeds"] = std::to_string(o.seeds);
    meta["seed"] = std::to_string(o.seed);
    meta["alpha"] = to_shortest(o.alpha);
    meta["eval_samples"] = std::to_string(o.eval_samples);
    meta["hw"] = o.hw ? "1" : "0";
    meta["ptq"] = o.ptq ? "1" : "0";
    if (o.ptq) meta["bits_w"] = std::to_string(o.bits_w);
    if (!o.corner.empty()) meta["corner"] = o.corner;
    // deliberately not recorded: --jobs (must not influence output bytes)
    write_text_file(o.out, report_to_csv(report, meta));
    std::cout << "wrote " << report.rows.size() << " rows to " << o.out << "\n";
    return 0;
}

int run_ptq(const PtqOpts& o) {
    if (o.bits_act < 1 || o.bits_act > kMaxFitBits) {
        throw ValidationError("--bits-act must be in [1, 8]");
    }
    const std::vector<Method> methods = parse_methods(o.methods);
    std::optional<Corner> corner;
    if (!o.corner.empty()) corner = parse_corner(o.corner);

    EvalReport report;
    report.seed = o.seed;
    for (int s = 0; s < o.seeds; ++s) {
        const auto su = static_cast<std::uint64_t>(s);
        BlobDatasetConfig ds;
        ds.seed = CounterRng::derive(o.seed, 0xDA7A + su);
        const Dataset dataset = make_blob_dataset(ds);
        TrainConfig tc;
        tc.seed = ds.seed;
        const TinyMlp net = train_tiny_mlp(dataset, tc);

        for (Method m : methods) {
            const PtqResult ptq = ptq_study(net, dataset, o.bits_act, o.bits_w, m, corner,
                                            CounterRng::derive(o.seed, 0x9712 + su));
            EvalRow row;
            row.method = method_name(m);
            row.bits = o.bits_act;
            row.seed = su;
            row.mse = 0.0;
            row.max_abs_err = 0.0;
            row.acc_float = ptq.acc_float;
            row.acc_ptq = ptq.acc_ptq;
            row.acc_noise = ptq.acc_noise;
            report.rows.push_back(std::move(row));
        }
    }

    MetaMap meta = base_meta("ptq");
    meta["bits_act"] = std::to_string(o.bits_act);
    meta["bits_w"] = std::to_string(o.bits_w);
    meta["methods"] = o.methods;
    meta["seeds"] = std::to_string(o.seeds);
    meta["seed"] = std::to_string(o.seed);
    if (!o.corner.empty()) meta["corner"] = o.corner;
    write_text_file(o.out, report_to_csv(report, meta));
    std::cout << "wrote " << report.rows.size() << " rows to " << o.out << "\n";
    return 0;
}

// Named fixtures mirroring the worked 3-bit example, the 4-bit/32-cell ramp
// pattern, and the minimum-step-10 corner-noise regime.
int run_fixtures(const std::string& out_dir) {
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    // 3-bit worked example: centers 0, 0.125, 0.25, 0.5, 1, 2, 4, 8
    {
        const std::vector<double> centers{0.0, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
        QuantizerModel model =
            make_model(Method::Bskmq, 3, {0.0, 8.0}, centers, map_references(centers), true);
        HwProjection proj = project_hw(model, 1, kBitcellBudget);
        FitMeta fm;
        fm.pool_size = 0;
        MetaMap meta = base_meta("fixtures");
        meta["fixture"] = "sec21";
        save_quantizer(dir / "sec21_quantizer.json", model, fm, proj, meta);
    }

    // calibration batches whose interior blobs cluster back to those centers
    {
        std::vector<ActivationBatch> batches;
        for (int b = 0; b < 8; ++b) {
            ActivationBatch batch;
            batch.batch_id = static_cast<std::uint64_t>(b) + 1;
            batch.source_tag = "sec21_fixture";
            for (int i = 0; i < 100; ++i) batch.samples.push_back(0.0);
            for (double v : {0.125, 0.25, 0.5, 1.0, 2.0, 4.0}) {
                for (int i = 0; i < 140; ++i) batch.samples.push_back(v);
            }
            for (int i = 0; i < 60; ++i) batch.samples.push_back(8.0);
            batches.push_back(std::move(batch));
        }
        save_batches(batches, dir / "sec21_batches.csv", BatchFormat::Csv);
    }

    // 4-bit ramp with 32 enabled cells; steps 1,2,...,2,3,4 of 1/32 each
    {
        const std::vector<int> pattern{1, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 3, 4};
        std::vector<double> refs{0.0};
        int cum = 0;
        for (int m : pattern) {
            cum += m;
            refs.push_back(static_cast<double>(cum) / 32.0);
        }
        std::vector<double> centers{0.0};
        for (std::size_t i = 1; i < refs.size(); ++i) {
            centers.push_back(2.0 * refs[i] - centers[i - 1]);
        }
        QuantizerModel model = make_model(Method::Bskmq, 4, {centers.front(), centers.back()},
                                          centers, map_references(centers), true);
        HwProjection proj = project_hw(model, 1, kBitcellBudget);
        FitMeta fm;
        MetaMap meta = base_meta("fixtures");
        meta["fixture"] = "fig3a";
        save_quantizer(dir / "fig3a_quantizer.json", model, fm, proj, meta);
    }

    // 4-bit uniform-reference ramp at min step 10, TT corner noise regime
    {
        std::vector<double> refs;
        std::vector<double> centers;
        for (int i = 0; i < 16; ++i) {
            refs.push_back(static_cast<double>(i) / 15.0);
            centers.push_back(static_cast<double>(i) / 15.0);
        }
        QuantizerModel model = make_model(Method::Linear, 4, {0.0, 1.0}, centers, refs, false);
        HwProjection proj = project_hw(model, 10, kBitcellBudget);
        proj.config.corner = Corner::TT;
        FitMeta fm;
        MetaMap meta = base_meta("fixtures");
        meta["fixture"] = "fig5";
        save_quantizer(dir / "fig5_hw.json", model, fm, proj, meta);
    }

    std::cout << "wrote sec21_quantizer.json sec21_batches.csv fig3a_quantizer.json fig5_hw.json"
              << " to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nlq: nonlinear activation quantization and in-memory ramp ADC toolkit"};
    app.set_version_flag("--version", kVersion);

    std::string paper_fixtures_dir;
    app.add_option("--paper-fixtures", paper_fixtures_dir,
                   "write the named example fixtures into a directory and exit");

    GenerateOpts gen;
    auto* cmd_gen = app.add_subcommand("generate", "write synthetic activation batches");
    cmd_gen->add_option("--synthetic", gen.synthetic, "distribution spec")->required();
    cmd_gen->add_option("--n-batches", gen.n_batches)->default_val(32);
    cmd_gen->add_option("--batch-size", gen.batch_size)->default_val(4096);
    cmd_gen->add_option("--out", gen.out, "output file")->required();
    cmd_gen->add_option("--format", gen.format, "csv, f32 or auto")->default_val("auto");

    CalibrateOpts cal;
    auto* cmd_cal = app.add_subcommand("calibrate", "derive the robust activation range");
    add_source_flags(cmd_cal, cal.src);
    cmd_cal->add_option("--alpha", cal.alpha, "per-batch tail ratio")->default_val(0.005);
    cmd_cal->add_option("--seed", cal.seed, "run seed")->envname("NLQ_SEED")->default_val(0);
    cmd_cal->add_option("--pool-cap", cal.pool_cap, "retained-sample cap")
        ->default_val(std::size_t(1) << 20);
    cmd_cal->add_flag("--allow-degenerate", cal.allow_degenerate,
                      "accept a constant-data range");
    cmd_cal->add_option("--out", cal.out, "calibration summary file")->required();

    FitOptsCli fit_o;
    auto* cmd_fit = app.add_subcommand("fit", "fit quantization centers from a calibration");
    cmd_fit->add_option("--calib", fit_o.calib, "calibration summary file")->required();
    cmd_fit->add_option("--method", fit_o.method, "bskmq|linear|lloyd_max|cdf|kmeans")
        ->default_val("bskmq");
    cmd_fit->add_option("--bits", fit_o.bits, "output resolution")->default_val(4);
    cmd_fit->add_option("--seed", fit_o.seed)->envname("NLQ_SEED")->default_val(0);
    cmd_fit->add_option("--restarts", fit_o.restarts)->default_val(4);
    cmd_fit->add_option("--out", fit_o.out, "quantizer config file")->required();

    ProjectOpts proj_o;
    auto* cmd_proj = app.add_subcommand("project-hw", "realize references as ramp multipliers");
    cmd_proj->add_option("--config", proj_o.config, "quantizer config file")->required();
    cmd_proj->add_option("--budget", proj_o.budget, "bitcell budget")->default_val(kBitcellBudget);
    cmd_proj->add_option("--min-multiplier", proj_o.min_multiplier)->default_val(1);
    cmd_proj->add_option("--corner", proj_o.corner, "TT|FF|SS")->default_val("TT");
    cmd_proj->add_option("--out", proj_o.out, "augmented config file")->required();

    EvaluateOpts eval_o;
    auto* cmd_eval = app.add_subcommand("evaluate", "quantization error of saved configs");
    cmd_eval->add_option("--config", eval_o.configs, "quantizer config file(s)")->required();
    add_source_flags(cmd_eval, eval_o.src);
    cmd_eval->add_flag("--hw", eval_o.hw, "project to hardware before evaluating");
    cmd_eval->add_option("--budget", eval_o.budget)->default_val(kBitcellBudget);
    cmd_eval->add_option("--min-multiplier", eval_o.min_multiplier)->default_val(1);
    cmd_eval->add_option("--lut-bits", eval_o.lut_bits)->default_val(6);
    cmd_eval->add_option("--corner", eval_o.corner, "enable corner noise: TT|FF|SS");
    cmd_eval->add_option("--seed", eval_o.seed)->envname("NLQ_SEED")->default_val(0);
    cmd_eval->add_option("--out", eval_o.out, "CSV report")->required();

    SweepOpts sweep_o;
    auto* cmd_sweep = app.add_subcommand("sweep", "full method x bits x seed comparison");
    add_source_flags(cmd_sweep, sweep_o.src);
    cmd_sweep->add_option("--bits", sweep_o.bits, "list '2,3' or range '2:5'")->default_val("3");
    cmd_sweep->add_option("--methods", sweep_o.methods)->default_val(
        "bskmq,linear,lloyd_max,cdf,kmeans");
    cmd_sweep->add_option("--seeds", sweep_o.seeds, "number of seed indices")->default_val(1);
    cmd_sweep->add_option("--seed", sweep_o.seed, "master seed")
        ->envname("NLQ_SEED")
        ->default_val(0);
    cmd_sweep->add_option("--alpha", sweep_o.alpha)->default_val(0.005);
    cmd_sweep->add_option("--eval-samples", sweep_o.eval_samples)->default_val(65536);
    cmd_sweep->add_flag("--hw", sweep_o.hw, "add hardware projection rows");
    cmd_sweep->add_flag("--ptq", sweep_o.ptq, "add desk-scale PTQ accuracy columns");
    cmd_sweep->add_option("--bits-w", sweep_o.bits_w, "PTQ weight bits")->default_val(4);
    cmd_sweep->add_option("--budget", sweep_o.budget)->default_val(kBitcellBudget);
    cmd_sweep->add_option("--min-multiplier", sweep_o.min_multiplier)->default_val(1);
    cmd_sweep->add_option("--lut-bits", sweep_o.lut_bits)->default_val(6);
    cmd_sweep->add_option("--corner", sweep_o.corner, "enable corner noise: TT|FF|SS");
    cmd_sweep->add_option("--jobs", sweep_o.jobs, "parallel seed workers")->default_val(1);
    cmd_sweep->add_option("--out", sweep_o.out, "CSV report")->required();

    PtqOpts ptq_o;
    auto* cmd_ptq = app.add_subcommand("ptq", "desk-scale post-training quantization study");
    cmd_ptq->add_option("--bits-act", ptq_o.bits_act)->default_val(3);
    cmd_ptq->add_option("--bits-w", ptq_o.bits_w)->default_val(4);
    cmd_ptq->add_option("--methods", ptq_o.methods)->default_val("bskmq,linear");
    cmd_ptq->add_option("--corner", ptq_o.corner, "enable corner noise: TT|FF|SS");
    cmd_ptq->add_option("--seeds", ptq_o.seeds)->default_val(1);
    cmd_ptq->add_option("--seed", ptq_o.seed)->envname("NLQ_SEED")->default_val(0);
    cmd_ptq->add_option("--out", ptq_o.out, "CSV report")->required();

    std::string fixtures_out;
    auto* cmd_fix = app.add_subcommand("fixtures", "write the named example fixtures");
    cmd_fix->add_option("--out", fixtures_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (!paper_fixtures_dir.empty()) return run_fixtures(paper_fixtures_dir);
        if (cmd_gen->parsed()) return run_generate(gen);
        if (cmd_cal->parsed()) return run_calibrate(cal);
        if (cmd_fit->parsed()) return run_fit(fit_o);
        if (cmd_proj->parsed()) return run_project(proj_o);
        if (cmd_eval->parsed()) return run_evaluate(eval_o);
        if (cmd_sweep->parsed()) return run_sweep(sweep_o);
        if (cmd_ptq->parsed()) return run_ptq(ptq_o);
        if (cmd_fix->parsed()) return run_fixtures(fixtures_out);
        std::cerr << app.help();
        return kExitValidation;
    } catch (const InfeasibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
