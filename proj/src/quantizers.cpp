#include "nlq/quantizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nlq/errors.hpp"
#include "nlq/rng.hpp"

namespace nlq {

namespace {

constexpr int kLloydIterCap = 300;  // internal cap for the k-means Lloyd loop

void check_bits(int bits) {
    if (bits < 1 || bits > kMaxFitBits) {
        throw ValidationError("bits must be in [1, " + std::to_string(kMaxFitBits) + "]");
    }
}

void check_range(Range range) {
    if (!std::isfinite(range.lo) || !std::isfinite(range.hi) || !(range.lo < range.hi)) {
        throw ValidationError("range requires finite g_min < g_max");
    }
}

bool strictly_increasing(std::span<const double> xs) {
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (!(xs[i] > xs[i - 1])) return false;
    }
    return true;
}

// Deduplicates a sorted center list and inserts gap midpoints until `target`
// strictly increasing values lie inside [range.lo, range.hi]. Endpoint
// candidates participate as virtual gap walls when they are not themselves
// centers, so inserted values always stay inside the range.
std::vector<double> repair_centers(std::vector<double> centers, int target, Range range,
                                   bool* padded) {
    std::sort(centers.begin(), centers.end());
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(target));
    for (double c : centers) {
        if (out.empty() || c > out.back()) out.push_back(c);
    }
    if (static_cast<int>(out.size()) > target) {
        throw ValidationError("more centers than quantization levels");
    }
    const bool needed_padding = static_cast<int>(out.size()) < target;
    while (static_cast<int>(out.size()) < target) {
        // walls = centers plus range endpoints when they extend the span
        std::vector<double> walls;
        walls.reserve(out.size() + 2);
        if (out.empty() || range.lo < out.front()) walls.push_back(range.lo);
        walls.insert(walls.end(), out.begin(), out.end());
        if (out.empty() || range.hi > out.back()) walls.push_back(range.hi);

        double best_gap = -1.0;
        double candidate = 0.0;
        for (std::size_t i = 1; i < walls.size(); ++i) {
            const double gap = walls[i] - walls[i - 1];
            if (gap <= best_gap) continue;
            const double mid = 0.5 * (walls[i - 1] + walls[i]);
            if (mid > walls[i - 1] && mid < walls[i]) {
                best_gap = gap;
                candidate = mid;
            }
        }
        if (best_gap < 0.0) {
            throw ValidationError("cannot construct strictly increasing centers in range");
        }
        out.insert(std::upper_bound(out.begin(), out.end(), candidate), candidate);
    }
    if (padded && needed_padding) *padded = true;
    return out;
}

QuantizerModel assemble(Method method, int bits, Range range, std::vector<double> centers,
                        bool padded) {
    QuantizerModel m;
    m.bits = bits;
    m.method = method;
    m.range = range;
    m.centers = std::move(centers);
    m.references = map_references(m.centers);
    m.midpoint_references = true;
    m.padded = padded;
    validate_model(m);
    return m;
}

}  // namespace

const char* method_name(Method method) {
    switch (method) {
        case Method::Bskmq: return "bskmq";
        case Method::Linear: return "linear";
        case Method::LloydMax: return "lloyd_max";
        case Method::Cdf: return "cdf";
        case Method::Kmeans: return "kmeans";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    if (name == "bskmq") return Method::Bskmq;
    if (name == "linear") return Method::Linear;
    if (name == "lloyd_max") return Method::LloydMax;
    if (name == "cdf") return Method::Cdf;
    if (name == "kmeans") return Method::Kmeans;
    throw ValidationError("unknown method '" + name + "'");
}

std::vector<double> clamp_to_range(std::span<const double> samples, Range range) {
    check_range(range);
    std::vector<double> out;
    out.reserve(samples.size());
    for (double v : samples) out.push_back(std::clamp(v, range.lo, range.hi));
    return out;
}

std::vector<double> map_references(std::span<const double> centers) {
    if (centers.empty()) throw ValidationError("map_references: empty centers");
    if (!strictly_increasing(centers)) {
        throw ValidationError("map_references: centers must be strictly increasing");
    }
    std::vector<double> refs;
    refs.reserve(centers.size());
    refs.push_back(centers[0]);
    for (std::size_t i = 1; i < centers.size(); ++i) {
        refs.push_back(0.5 * (centers[i - 1] + centers[i]));
    }
    if (!strictly_increasing(refs)) {
        throw ValidationError("map_references: derived references are not strictly increasing");
    }
    return refs;
}

void validate_model(const QuantizerModel& model) {
    check_bits(model.bits);
    check_range(model.range);
    const auto n = static_cast<std::size_t>(model.levels());
    if (model.centers.size() != n) throw ValidationError("centers size != 2^bits");
    if (model.references.size() != n) throw ValidationError("references size != 2^bits");
    if (!strictly_increasing(model.centers)) {
        throw ValidationError("centers must be strictly increasing");
    }
    if (!strictly_increasing(model.references)) {
        throw ValidationError("references must be strictly increasing");
    }
    if (model.midpoint_references) {
        if (model.references[0] != model.centers[0]) {
            throw ValidationError("references[0] must equal centers[0]");
        }
        for (std::size_t i = 1; i < n; ++i) {
            if (model.references[i] != 0.5 * (model.centers[i - 1] + model.centers[i])) {
                throw ValidationError("references must be midpoints of adjacent centers");
            }
            if (!(model.centers[i - 1] <= model.references[i] &&
                  model.references[i] <= model.centers[i])) {
                throw ValidationError("reference escapes its center interval");
            }
        }
        if (model.method == Method::Bskmq) {
            if (model.centers.front() != model.range.lo || model.centers.back() != model.range.hi) {
                throw ValidationError("bskmq centers must pin the calibrated range");
            }
        }
    }
}

QuantizerModel make_model(Method method, int bits, Range range, std::vector<double> centers,
                          std::vector<double> references, bool midpoint_references) {
    QuantizerModel m;
    m.bits = bits;
    m.method = method;
    m.range = range;
    m.centers = std::move(centers);
    m.references = std::move(references);
    m.midpoint_references = midpoint_references;
    validate_model(m);
    return m;
}

// ---------------------------------------------------------------------------
// k-means core

namespace {

struct SortedView {
    std::vector<double> values;       // sorted
    std::vector<std::size_t> order;   // original index of each sorted position
    std::vector<double> sum1;         // prefix sums of values
    std::vector<double> sum2;         // prefix sums of squares
};

SortedView make_sorted_view(std::span<const double> samples) {
    SortedView v;
    const std::size_t n = samples.size();
    v.order.resize(n);
    std::iota(v.order.begin(), v.order.end(), std::size_t{0});
    std::stable_sort(v.order.begin(), v.order.end(),
                     [&](std::size_t a, std::size_t b) { return samples[a] < samples[b]; });
    v.values.reserve(n);
    for (std::size_t i : v.order) v.values.push_back(samples[i]);
    v.sum1.assign(n + 1, 0.0);
    v.sum2.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        v.sum1[i + 1] = v.sum1[i] + v.values[i];
        v.sum2[i + 1] = v.sum2[i] + v.values[i] * v.values[i];
    }
    return v;
}

// Greedy D^2-weighted seeding on the (sorted) normalized values: each round
// samples a few candidates and keeps the one with the lowest resulting
// potential (the standard greedy k-means++ variant).
std::vector<double> kmeanspp(const std::vector<double>& ys, int k, CounterRng& rng) {
    const std::size_t n = ys.size();
    std::vector<double> centers;
    centers.reserve(static_cast<std::size_t>(k));
    std::vector<double> dist2(n);

    const std::size_t first = rng.below(n);
    centers.push_back(ys[first]);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = ys[i] - ys[first];
        dist2[i] = d * d;
        total += dist2[i];
    }

    int candidates = 2;
    for (int kk = k; kk > 1; kk >>= 1) ++candidates;  // 2 + floor(log2 k)

    std::vector<double> cum(n);
    std::vector<double> best_dist2(n);
    while (static_cast<int>(centers.size()) < k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += dist2[i];
            cum[i] = acc;
        }
        std::size_t best_pick = 0;
        double best_total = std::numeric_limits<double>::infinity();
        for (int c = 0; c < candidates; ++c) {
            std::size_t pick;
            if (total > 0.0) {
                const double u = rng.next_unit() * total;
                pick = static_cast<std::size_t>(
                    std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
                if (pick >= n) pick = n - 1;
            } else {
                pick = rng.below(n);
            }
            double cand_total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = ys[i] - ys[pick];
                cand_total += std::min(dist2[i], d * d);
            }
            if (cand_total < best_total) {
                best_total = cand_total;
                best_pick = pick;
            }
        }
        centers.push_back(ys[best_pick]);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = ys[i] - ys[best_pick];
            best_dist2[i] = std::min(dist2[i], d * d);
        }
        dist2.swap(best_dist2);
        total = best_total;
    }
    std::sort(centers.begin(), centers.end());
    return centers;
}

// Segment cut positions for sorted data under midpoint decision boundaries.
// cuts[j] = first index belonging to cluster j+1.
void segment_cuts(const std::vector<double>& ys, const std::vector<double>& centers,
                  std::vector<std::size_t>& cuts) {
    const int k = static_cast<int>(centers.size());
    cuts.resize(static_cast<std::size_t>(k) - 1);
    for (int j = 0; j + 1 < k; ++j) {
        const double boundary = 0.5 * (centers[j] + centers[j + 1]);
        cuts[j] = static_cast<std::size_t>(
            std::lower_bound(ys.begin(), ys.end(), boundary) - ys.begin());
    }
}

}  // namespace

Kmeans1dResult kmeans_1d_core(std::span<const double> samples, int k, int restarts,
                              std::uint64_t seed) {
    const std::size_t n = samples.size();
    if (k < 1) throw ValidationError("k must be positive");
    if (n < static_cast<std::size_t>(k)) throw ValidationError("k exceeds sample count");
    if (restarts < 1) throw ValidationError("restarts must be positive");
    for (double v : samples) {
        if (!std::isfinite(v)) throw ValidationError("non-finite sample");
    }

    const SortedView view = make_sorted_view(samples);
    const double lo = view.values.front();
    const double hi = view.values.back();
    const double span = hi - lo;

    Kmeans1dResult best;
    best.wcss = std::numeric_limits<double>::infinity();

    if (span <= 0.0) {
        // all samples identical: every center collapses, zero error
        best.centers.assign(static_cast<std::size_t>(k), lo);
        best.assignments.assign(n, 0);
        best.wcss = 0.0;
        return best;
    }

    std::vector<double> ys;
    ys.reserve(n);
    for (double v : view.values) ys.push_back((v - lo) / span);
    std::vector<double> ysum1(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) ysum1[i + 1] = ysum1[i] + ys[i];

    std::vector<std::size_t> cuts;
    for (int r = 0; r < restarts; ++r) {
        CounterRng rng(CounterRng::derive(seed, static_cast<std::uint64_t>(r)));
        std::vector<double> centers = kmeanspp(ys, k, rng);

        for (int iter = 0; iter < kLloydIterCap; ++iter) {
            segment_cuts(ys, centers, cuts);

            // locate the first empty cluster, if any
            int empty = -1;
            for (int j = 0; j < k; ++j) {
                const std::size_t beg = j == 0 ? 0 : cuts[j - 1];
                const std::size_t end = j == k - 1 ? n : cuts[j];
                if (beg >= end) {
                    empty = j;
                    break;
                }
            }
            if (empty >= 0) {
                // reseed at the sample farthest from its assigned center
                double worst = -1.0;
                std::size_t worst_i = 0;
                int cluster = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    while (cluster < k - 1 && i >= cuts[cluster]) ++cluster;
                    const double d = std::abs(ys[i] - centers[cluster]);
                    if (d > worst) {
                        worst = d;
                        worst_i = i;
                    }
                }
                centers[static_cast<std::size_t>(empty)] = ys[worst_i];
                std::sort(centers.begin(), centers.end());
                continue;
            }

            bool changed = false;
            for (int j = 0; j < k; ++j) {
                const std::size_t beg = j == 0 ? 0 : cuts[j - 1];
                const std::size_t end = j == k - 1 ? n : cuts[j];
                const double mean =
                    (ysum1[end] - ysum1[beg]) / static_cast<double>(end - beg);
                if (mean != centers[j]) {
                    centers[j] = mean;
                    changed = true;
                }
            }
            if (!changed) break;
        }

        segment_cuts(ys, centers, cuts);
        // raw-space centers and objective
        std::vector<double> raw(centers.size());
        for (std::size_t j = 0; j < centers.size(); ++j) raw[j] = lo + centers[j] * span;
        double wcss = 0.0;
        for (int j = 0; j < k; ++j) {
            const std::size_t beg = j == 0 ? 0 : cuts[j - 1];
            const std::size_t end = j == k - 1 ? n : cuts[j];
            if (beg >= end) continue;
            const double cnt = static_cast<double>(end - beg);
            const double s1 = view.sum1[end] - view.sum1[beg];
            const double s2 = view.sum2[end] - view.sum2[beg];
            wcss += s2 - 2.0 * raw[j] * s1 + cnt * raw[j] * raw[j];
        }
        wcss = std::max(wcss, 0.0);

        if (wcss < best.wcss) {
            best.wcss = wcss;
            best.centers = std::move(raw);
            best.assignments.assign(n, 0);
            int cluster = 0;
            for (std::size_t i = 0; i < n; ++i) {
                while (cluster < k - 1 && i >= cuts[cluster]) ++cluster;
                best.assignments[view.order[i]] = cluster;
            }
        }
    }
    return best;
}

DpOptimal1d dp_optimal_1d(std::span<const double> sorted_samples, int k) {
    const std::size_t n = sorted_samples.size();
    if (k < 1) throw ValidationError("k must be positive");
    if (n < static_cast<std::size_t>(k)) throw ValidationError("k exceeds sample count");
    if (!std::is_sorted(sorted_samples.begin(), sorted_samples.end())) {
        throw ValidationError("dp_optimal_1d requires sorted input");
    }

    std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        s1[i + 1] = s1[i] + sorted_samples[i];
        s2[i + 1] = s2[i] + sorted_samples[i] * sorted_samples[i];
    }
    const auto cost = [&](std::size_t i, std::size_t j) {  // inclusive segment [i, j]
        const double cnt = static_cast<double>(j - i + 1);
        const double a = s1[j + 1] - s1[i];
        const double b = s2[j + 1] - s2[i];
        return std::max(0.0, b - a * a / cnt);
    };

    // dp[j] = best cost of clustering [0, j] with the current segment count
    std::vector<double> dp(n), dp_prev(n);
    std::vector<std::vector<std::size_t>> split(static_cast<std::size_t>(k),
                                                std::vector<std::size_t>(n, 0));
    for (std::size_t j = 0; j < n; ++j) dp_prev[j] = cost(0, j);
    for (int m = 2; m <= k; ++m) {
        for (std::size_t j = static_cast<std::size_t>(m) - 1; j < n; ++j) {
            double bestv = std::numeric_limits<double>::infinity();
            std::size_t besti = 0;
            for (std::size_t i = static_cast<std::size_t>(m) - 1; i <= j; ++i) {
                const double v = dp_prev[i - 1] + cost(i, j);
                if (v < bestv) {
                    bestv = v;
                    besti = i;
                }
            }
            dp[j] = bestv;
            split[static_cast<std::size_t>(m) - 1][j] = besti;
        }
        std::swap(dp, dp_prev);
    }

    DpOptimal1d result;
    result.wcss = dp_prev[n - 1];
    result.centers.resize(static_cast<std::size_t>(k));
    std::size_t j = n - 1;
    for (int m = k; m >= 1; --m) {
        const std::size_t i = m == 1 ? 0 : split[static_cast<std::size_t>(m) - 1][j];
        const double cnt = static_cast<double>(j - i + 1);
        result.centers[static_cast<std::size_t>(m) - 1] = (s1[j + 1] - s1[i]) / cnt;
        if (m > 1) j = i - 1;
    }
    return result;
}

// ---------------------------------------------------------------------------
// fitting

QuantizerModel fit_linear(Range range, int bits) {
    check_bits(bits);
    check_range(range);
    const int levels = 1 << bits;
    std::vector<double> centers(static_cast<std::size_t>(levels));
    const double step = range.span() / static_cast<double>(levels - 1);
    for (int i = 0; i < levels; ++i) {
        centers[static_cast<std::size_t>(i)] = range.lo + static_cast<double>(i) * step;
    }
    centers.back() = range.hi;  // avoid accumulation drift on the top level
    return assemble(Method::Linear, bits, range, std::move(centers), false);
}

QuantizerModel fit_bskmq(std::span<const double> pool, Range range, int bits,
                         const FitOptions& opts) {
    check_bits(bits);
    check_range(range);
    if (pool.empty()) throw ValidationError("empty pool");

    std::vector<double> clamped = clamp_to_range(pool, range);
    std::vector<double> interior;
    interior.reserve(clamped.size());
    for (double v : clamped) {
        if (v != range.lo && v != range.hi) interior.push_back(v);
    }

    const int k = (1 << bits) - 2;
    std::vector<double> centers;
    centers.reserve(static_cast<std::size_t>(1 << bits));
    centers.push_back(range.lo);
    if (k > 0 && !interior.empty()) {
        const int k_eff = std::min<int>(k, static_cast<int>(interior.size()));
        Kmeans1dResult km = kmeans_1d_core(interior, k_eff, opts.restarts, opts.seed);
        for (double c : km.centers) centers.push_back(c);
    }
    centers.push_back(range.hi);

    bool padded = false;
    centers = repair_centers(std::move(centers), 1 << bits, range, &padded);
    return assemble(Method::Bskmq, bits, range, std::move(centers), padded);
}

QuantizerModel fit_lloyd_max(std::span<const double> pool, Range range, int bits, int max_iter,
                             double tol) {
    check_bits(bits);
    check_range(range);
    if (pool.empty()) throw ValidationError("empty pool");
    if (max_iter < 1) throw ValidationError("max_iter must be positive");

    std::vector<double> xs = clamp_to_range(pool, range);
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    std::vector<double> s1(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) s1[i + 1] = s1[i] + xs[i];

    const int levels = 1 << bits;
    const double tol_eff = tol > 0.0 ? tol : 1e-9 * range.span();
    std::vector<double> centers(fit_linear(range, bits).centers);

    std::vector<std::size_t> cuts(static_cast<std::size_t>(levels) - 1);
    for (int iter = 0; iter < max_iter; ++iter) {
        for (int j = 0; j + 1 < levels; ++j) {
            const double boundary = 0.5 * (centers[j] + centers[j + 1]);
            cuts[static_cast<std::size_t>(j)] = static_cast<std::size_t>(
                std::lower_bound(xs.begin(), xs.end(), boundary) - xs.begin());
        }
        double movement = 0.0;
        for (int j = 0; j < levels; ++j) {
            const std::size_t beg = j == 0 ? 0 : cuts[static_cast<std::size_t>(j) - 1];
            const std::size_t end =
                j == levels - 1 ? n : cuts[static_cast<std::size_t>(j)];
            if (beg >= end) continue;  // empty cell keeps its center
            const double mean = (s1[end] - s1[beg]) / static_cast<double>(end - beg);
            movement = std::max(movement, std::abs(mean - centers[j]));
            centers[static_cast<std::size_t>(j)] = mean;
        }
        if (movement < tol_eff) break;
    }

    bool padded = false;
    centers = repair_centers(std::move(centers), levels, range, &padded);
    return assemble(Method::LloydMax, bits, range, std::move(centers), padded);
}

QuantizerModel fit_cdf(std::span<const double> pool, Range range, int bits) {
    check_bits(bits);
    check_range(range);
    if (pool.empty()) throw ValidationError("empty pool");

    std::vector<double> xs = clamp_to_range(pool, range);
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    const int levels = 1 << bits;

    // equal-frequency (empirical quantile) blocks of the sorted pool
    const int blocks = static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(levels)));
    std::vector<double> centers;
    centers.reserve(static_cast<std::size_t>(levels));
    for (int b = 0; b < blocks; ++b) {
        const auto beg = static_cast<std::size_t>(
            static_cast<unsigned long long>(b) * n / static_cast<unsigned long long>(blocks));
        const auto end = static_cast<std::size_t>(
            static_cast<unsigned long long>(b + 1) * n / static_cast<unsigned long long>(blocks));
        double sum = 0.0;
        for (std::size_t i = beg; i < end; ++i) sum += xs[i];
        centers.push_back(sum / static_cast<double>(end - beg));
    }

    bool padded = false;
    centers = repair_centers(std::move(centers), levels, range, &padded);
    return assemble(Method::Cdf, bits, range, std::move(centers), padded);
}

QuantizerModel fit_kmeans(std::span<const double> pool, Range range, int bits, int restarts,
                          std::uint64_t seed) {
    check_bits(bits);
    check_range(range);
    const int levels = 1 << bits;
    if (pool.size() < static_cast<std::size_t>(levels)) {
        throw ValidationError("fewer samples than clusters");
    }

    std::vector<double> xs = clamp_to_range(pool, range);
    Kmeans1dResult km = kmeans_1d_core(xs, levels, restarts, seed);

    bool padded = false;
    std::vector<double> centers = repair_centers(std::move(km.centers), levels, range, &padded);
    return assemble(Method::Kmeans, bits, range, std::move(centers), padded);
}

QuantizerModel fit(Method method, std::span<const double> pool, Range range, int bits,
                   const FitOptions& opts) {
    switch (method) {
        case Method::Bskmq: return fit_bskmq(pool, range, bits, opts);
        case Method::Linear: return fit_linear(range, bits);
        case Method::LloydMax:
            return fit_lloyd_max(pool, range, bits, opts.lloyd_max_iter, opts.lloyd_tol);
        case Method::Cdf: return fit_cdf(pool, range, bits);
        case Method::Kmeans: return fit_kmeans(pool, range, bits, opts.restarts, opts.seed);
    }
    throw ValidationError("unknown method");
}

}  // namespace nlq
