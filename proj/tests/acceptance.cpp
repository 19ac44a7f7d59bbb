// Acceptance suite: one line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nlq/activation_data.hpp"
#include "nlq/adc_model.hpp"
#include "nlq/calibration.hpp"
#include "nlq/evaluation.hpp"
#include "nlq/quantizers.hpp"
#include "nlq/rng.hpp"

using namespace nlq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

QuantizerModel worked_example() {
    const std::vector<double> centers{0.0, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
    return make_model(Method::Bskmq, 3, {0.0, 8.0}, centers, map_references(centers), true);
}

QuantizerModel uniform_ramp(int bits, double lo, double hi) {
    const int levels = 1 << bits;
    std::vector<double> refs(static_cast<std::size_t>(levels));
    for (int i = 0; i < levels; ++i) {
        refs[static_cast<std::size_t>(i)] =
            lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(levels - 1);
    }
    return make_model(Method::Linear, bits, {lo, hi}, refs, refs, false);
}

QuantizerModel random_fitted_model(std::uint64_t seed) {
    CounterRng rng(CounterRng::derive(seed, 0xACC));
    SyntheticDistSpec spec;
    spec.kind = DistKind::ReluMixture;
    spec.components = {{0.7, 0.3 + rng.next_unit(), 0.2 + 0.3 * rng.next_unit()},
                       {0.3, 1.5 + rng.next_unit(), 0.5 + rng.next_unit()}};
    spec.boundary_mass = 0.3 * rng.next_unit();
    spec.seed = rng.next_u64();
    const auto pool = generate(spec, 1, 4096)[0].samples;
    const double hi = *std::max_element(pool.begin(), pool.end());
    const Range range{0.0, std::max(hi, 1e-3)};
    const int bits = 2 + static_cast<int>(rng.below(4));
    const auto method = static_cast<Method>(rng.below(5));
    FitOptions fo;
    fo.seed = seed;
    return fit(method, pool, range, bits, fo);
}

// shared fig.1-style fixture: heavy exact-zero pile, three dense activation
// modes, and a sparse upper component stretching the calibrated range
SyntheticDistSpec fig1_spec(double boundary_mass, std::uint64_t seed) {
    SyntheticDistSpec spec = parse_dist_spec(
        "relu_mixture(w1=0.36,mu1=0.4,sd1=0.05,w2=0.3,mu2=1.2,sd2=0.07,"
        "w3=0.3,mu3=2.5,sd3=0.1,w4=0.04,mu4=6,sd4=2)");
    spec.boundary_mass = boundary_mass;
    spec.seed = seed;
    return spec;
}

struct CalibratedPool {
    std::vector<double> pool;
    Range range;
    std::vector<double> eval;
};

CalibratedPool calibrated_fixture(const SyntheticDistSpec& spec, std::uint64_t eval_seed,
                                  int t_batches = 8, int batch_size = 2048,
                                  int eval_samples = 65536) {
    Calibrator calib(CalibrationConfig{});
    for (const auto& batch : generate(spec, t_batches, batch_size)) calib.observe(batch);
    const CalibrationSummary s = calib.finish();

    SyntheticDistSpec eval_spec = spec;
    eval_spec.seed = eval_seed;
    const int n_eval_batches = (eval_samples + batch_size - 1) / batch_size;
    std::vector<double> eval;
    for (const auto& batch : generate(eval_spec, n_eval_batches, batch_size)) {
        eval.insert(eval.end(), batch.samples.begin(), batch.samples.end());
    }
    eval.resize(static_cast<std::size_t>(eval_samples));

    CalibratedPool out;
    out.range = {s.g_min, s.g_max};
    out.pool = s.pool;
    out.eval = std::move(eval);  // raw: the floor converter saturates overflow
    return out;
}

// ---------------------------------------------------------------------------

Outcome c1_worked_example() {
    const std::vector<double> centers{0.0, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
    const std::vector<double> expected{0.0, 0.0625, 0.1875, 0.375, 0.75, 1.5, 3.0, 6.0};
    if (map_references(centers) != expected) return {false, "reference mapping mismatch"};
    const auto model = worked_example();
    if (dequantize(quantize_floor(0.05, model), model) != 0.0) {
        return {false, "0.05 did not map to center 0"};
    }
    if (dequantize(quantize_floor(0.07, model), model) != 0.125) {
        return {false, "0.07 did not map to center 0.125"};
    }
    return {true, "references bit-exact; 0.05->0, 0.07->0.125"};
}

Outcome c2_ramp_floor_equivalence() {
    long long mismatches = 0;
    for (std::uint64_t m = 0; m < 100; ++m) {
        const auto model = random_fitted_model(m);
        const int min_mult = 1 + static_cast<int>(m % 3);
        const auto proj = project_hw(model, min_mult, kBitcellBudget);
        const double lo = model.range.lo - 0.1 * model.range.span();
        const double step = 1.4 * model.range.span() / 9999.0;
        for (int i = 0; i < 10000; ++i) {
            const double x = lo + step * static_cast<double>(i);
            if (simulate_ramp(x, proj.config, proj.projected) !=
                quantize_floor(x, proj.projected)) {
                ++mismatches;
            }
        }
    }
    return {mismatches == 0,
            "100 models x 10^4 inputs, mismatches=" + std::to_string(mismatches)};
}

Outcome c3_clustering_oracle() {
    int failures = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        CounterRng rng(CounterRng::derive(seed, 0xC3));
        const std::size_t n = 32 + rng.below(481);
        const int k = 2 + static_cast<int>(rng.below(7));
        std::vector<double> xs(n);
        for (auto& v : xs) v = rng.next_gauss() + (rng.next_unit() < 0.3 ? 4.0 : 0.0);
        const auto km = kmeans_1d_core(xs, k, 4, seed);
        std::sort(xs.begin(), xs.end());
        const auto dp = dp_optimal_1d(xs, k);
        const double ratio = dp.wcss > 0.0 ? km.wcss / dp.wcss : 1.0;
        worst = std::max(worst, ratio);
        if (km.wcss > 1.05 * dp.wcss + 1e-12) ++failures;
    }
    std::ostringstream os;
    os << "50 instances, worst wcss ratio " << worst;
    return {failures == 0, os.str()};
}

Outcome c4_mse_ordering() {
    std::ostringstream os;
    bool pass = true;
    for (double mass : {0.3, 0.5}) {
        int strict_wins = 0;
        int ratio_wins = 0;
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto spec = fig1_spec(mass, CounterRng::derive(4000 + s, 1));
            const auto fx = calibrated_fixture(spec, CounterRng::derive(4000 + s, 2));
            double e_bskmq = 0.0, e_linear = 0.0;
            double best_other = std::numeric_limits<double>::infinity();
            for (Method method : {Method::Bskmq, Method::Linear, Method::LloydMax, Method::Cdf,
                                  Method::Kmeans}) {
                FitOptions fo;
                fo.seed = CounterRng::derive(s, static_cast<std::uint64_t>(method));
                const auto model = fit(method, fx.pool, fx.range, 3, fo);
                const double e = mse(fx.eval, model);
                if (method == Method::Bskmq) {
                    e_bskmq = e;
                } else {
                    best_other = std::min(best_other, e);
                    if (method == Method::Linear) e_linear = e;
                }
            }
            if (e_bskmq < best_other) ++strict_wins;
            if (e_linear >= 2.0 * e_bskmq) ++ratio_wins;
        }
        os << "mass=" << mass << ": lowest " << strict_wins << "/20, linear>=2x " << ratio_wins
           << "/20; ";
        if (strict_wins < 18 || ratio_wins < 18) pass = false;
    }
    return {pass, os.str()};
}

Outcome c5_lloyd_max_analytic() {
    CounterRng rng(0xC5);
    std::vector<double> pool(100000);
    for (auto& v : pool) v = rng.next_unit();
    const auto m = fit_lloyd_max(pool, {0.0, 1.0}, 2);
    const std::vector<double> expected{0.125, 0.375, 0.625, 0.875};
    double worst = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        worst = std::max(worst, std::abs(m.centers[i] - expected[i]));
    }
    std::ostringstream os;
    os << "max center deviation " << worst;
    return {worst <= 0.01, os.str()};
}

Outcome c6_cdf_equal_mass() {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CounterRng rng(CounterRng::derive(seed, 0xC6));
        const std::size_t n = 500 + rng.below(3000);
        std::vector<double> pool(n);
        for (auto& v : pool) v = rng.next_gauss();
        const int bits = 2 + static_cast<int>(seed % 3);
        const Range range{-4.0, 4.0};
        const auto m = fit_cdf(pool, range, bits);

        auto xs = clamp_to_range(pool, range);
        std::sort(xs.begin(), xs.end());
        const int blocks = 1 << bits;
        for (int b = 0; b < blocks; ++b) {
            const std::size_t beg = static_cast<std::size_t>(b) * n / blocks;
            const std::size_t end = static_cast<std::size_t>(b + 1) * n / blocks;
            const double occupancy = static_cast<double>(end - beg);
            if (std::abs(occupancy - static_cast<double>(n) / blocks) > 1.0) {
                return {false, "bin occupancy off by more than one sample"};
            }
            double mean = 0.0;
            for (std::size_t i = beg; i < end; ++i) mean += xs[i];
            mean /= occupancy;
            if (std::abs(m.centers[static_cast<std::size_t>(b)] - mean) >
                1e-9 * (1.0 + std::abs(mean))) {
                return {false, "bin center is not the equal-mass block mean"};
            }
        }
    }
    return {true, "20 pools, every bin holds n/2^bits +- 1 samples"};
}

Outcome c7_hardware_budget() {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const auto model = random_fitted_model(seed + 700);
        const auto proj = project_hw(model, 1 + static_cast<int>(seed % 3), kBitcellBudget);
        if (proj.config.cells_used() > kBitcellBudget) {
            return {false, "projection exceeded the 252-cell budget"};
        }
    }
    const auto sec21 = project_hw(worked_example(), 1, kBitcellBudget);
    if (sec21.config.multipliers != std::vector<int>{1, 2, 3, 6, 12, 24, 48} ||
        sec21.max_ref_error != 0.0) {
        return {false, "worked-example projection is not {1,2,3,6,12,24,48} at zero error"};
    }

    const std::vector<int> pattern{1, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 3, 4};
    std::vector<double> refs{0.0};
    int cum = 0;
    for (int mm : pattern) {
        cum += mm;
        refs.push_back(static_cast<double>(cum) / 32.0);
    }
    std::vector<double> centers{0.0};
    for (std::size_t i = 1; i < refs.size(); ++i) {
        centers.push_back(2.0 * refs[i] - centers[i - 1]);
    }
    const auto fig3a = make_model(Method::Bskmq, 4, {centers.front(), centers.back()}, centers,
                                  map_references(centers), true);
    const auto proj = project_hw(fig3a, 1, kBitcellBudget);
    if (proj.config.cells_used() != 32 || proj.max_ref_error != 0.0) {
        return {false, "4-bit fixture used " + std::to_string(proj.config.cells_used()) +
                           " cells instead of 32"};
    }
    return {true, "budget safe; worked-example steps exact; 4-bit fixture uses 32 cells"};
}

Outcome c8_corner_noise() {
    const auto model = uniform_ramp(7, 0.0, 127.0);
    auto proj = project_hw(model, 1, kBitcellBudget);
    proj.config.corner = Corner::TT;
    const int n = 100000;
    CounterRng inputs(0xC8);
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const int cell = 10 + static_cast<int>(inputs.below(106));
        const double x = static_cast<double>(cell) + 0.5;
        const int code = simulate_ramp(x, proj.config, proj.projected,
                                       CounterRng::derive(0xC8C8, static_cast<std::uint64_t>(i)));
        const double err = code - cell;
        sum += err;
        sum2 += err * err;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum2 / n - mean * mean);
    const CornerNoise tt = corner_noise(Corner::TT);
    const CornerNoise ss = corner_noise(Corner::SS);
    std::ostringstream os;
    os << "recovered mu " << -mean << " sigma " << sd << " (ss/tt "
       << ss.sigma / tt.sigma << ")";
    const bool pass = std::abs(-mean - 0.21) <= 0.05 && std::abs(sd - 1.07) <= 0.05 * 1.07 &&
                      ss.sigma == tt.sigma * 1.2;
    return {pass, os.str()};
}

Outcome c9_desk_scale_ptq() {
    int bskmq_wins = 0;
    bool high_precision_ok = true;
    for (std::uint64_t s = 0; s < 10; ++s) {
        BlobDatasetConfig ds;
        ds.seed = CounterRng::derive(900 + s, 1);
        const Dataset data = make_blob_dataset(ds);
        TrainConfig tc;
        tc.seed = ds.seed;
        const TinyMlp net = train_tiny_mlp(data, tc);

        const auto b3 = ptq_study(net, data, 3, 4, Method::Bskmq, std::nullopt, ds.seed);
        const auto l3 = ptq_study(net, data, 3, 4, Method::Linear, std::nullopt, ds.seed);
        if (b3.acc_ptq >= l3.acc_ptq) ++bskmq_wins;

        const auto b8 = ptq_study(net, data, 8, 8, Method::Bskmq, std::nullopt, ds.seed);
        const auto l8 = ptq_study(net, data, 8, 8, Method::Linear, std::nullopt, ds.seed);
        if (std::abs(b8.acc_ptq - b8.acc_float) > 0.01 ||
            std::abs(l8.acc_ptq - l8.acc_float) > 0.01) {
            high_precision_ok = false;
        }
    }
    std::ostringstream os;
    os << "bskmq>=linear at 3 bits on " << bskmq_wins << "/10 seeds; 8-bit near-lossless "
       << (high_precision_ok ? "yes" : "no");
    return {bskmq_wins >= 8 && high_precision_ok, os.str()};
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Outcome c10_cli_determinism() {
    const fs::path dir = fs::temp_directory_path() / "nlq_acceptance_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto run = [&](const std::string& args) {
        const std::string cmd = std::string("\"") + NLQ_CLI_PATH + "\" " + args + " >" +
                                (dir / "out.txt").string() + " 2>&1";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };

    const std::string calib_args =
        "calibrate --synthetic \"relu_gauss(mean=0,sigma=1,seed=5)\" --n-batches 8 "
        "--batch-size 1024 --seed 7 --out ";
    if (run(calib_args + (dir / "c1.json").string()) != 0) return {false, "calibrate failed"};
    if (run(calib_args + (dir / "c2.json").string()) != 0) return {false, "calibrate failed"};
    if (slurp(dir / "c1.json") != slurp(dir / "c2.json")) {
        return {false, "calibrate rerun differed"};
    }

    const std::string fit_args = "fit --calib " + (dir / "c1.json").string() +
                                 " --method bskmq --bits 4 --seed 3 --out ";
    if (run(fit_args + (dir / "q1.json").string()) != 0) return {false, "fit failed"};
    if (run(fit_args + (dir / "q2.json").string()) != 0) return {false, "fit failed"};
    if (slurp(dir / "q1.json") != slurp(dir / "q2.json")) return {false, "fit rerun differed"};

    const std::string sweep_args =
        "sweep --synthetic "
        "\"relu_mixture(w1=0.85,mu1=0,sd1=0.5,w2=0.15,mu2=2.5,sd2=1.5,boundary_mass=0.3)\" "
        "--bits 2:4 --methods bskmq,linear,kmeans --seeds 4 --seed 13 --n-batches 4 "
        "--batch-size 1024 --eval-samples 8192 --hw --out ";
    if (run(sweep_args + (dir / "s1.csv").string() + " --jobs 1") != 0) {
        return {false, "sweep failed"};
    }
    if (run(sweep_args + (dir / "s2.csv").string() + " --jobs 4") != 0) {
        return {false, "sweep failed"};
    }
    if (run(sweep_args + (dir / "s3.csv").string() + " --jobs 4") != 0) {
        return {false, "sweep failed"};
    }
    const std::string s1 = slurp(dir / "s1.csv");
    if (s1.empty() || s1 != slurp(dir / "s2.csv") || s1 != slurp(dir / "s3.csv")) {
        return {false, "parallel sweep outputs differed"};
    }
    return {true, "calibrate/fit/sweep reruns byte-identical, jobs 1 == jobs 4"};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        double limit_s;
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria{
        {1, "worked-example exactness", 1.0, c1_worked_example},
        {2, "floor/ramp equivalence", 30.0, c2_ramp_floor_equivalence},
        {3, "clustering oracle", 60.0, c3_clustering_oracle},
        {4, "MSE ordering on boundary-heavy fixtures", 120.0, c4_mse_ordering},
        {5, "Lloyd-Max analytic check", 10.0, c5_lloyd_max_analytic},
        {6, "CDF equal-mass bins", 10.0, c6_cdf_equal_mass},
        {7, "hardware budget fixtures", 5.0, c7_hardware_budget},
        {8, "corner noise statistics", 30.0, c8_corner_noise},
        {9, "desk-scale PTQ", 300.0, c9_desk_scale_ptq},
        {10, "CLI determinism", 120.0, c10_cli_determinism},
    };

    int only = 0;
    if (argc > 1) only = std::atoi(argv[1]);

    int failures = 0;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.fn();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs < c.limit_s;
        const bool pass = outcome.pass && in_time;
        if (!pass) ++failures;
        std::ostringstream line;
        line << (pass ? "[PASS] " : "[FAIL] ") << "C" << c.id << " " << c.name << " — "
             << outcome.detail << " [" << std::fixed;
        line.precision(1);
        line << secs << "s/" << c.limit_s << "s]";
        std::cout << line.str() << std::endl;
    }
    return failures;
}
