#include "nlq/activation_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nlq/errors.hpp"
#include "nlq/rng.hpp"

namespace nlq {

namespace {

constexpr std::uint64_t kBatchStream = 0x6261746368ull;  // per-batch substream tag

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failure on " + path.string());
    return buf.str();
}

double parse_sample(const char* first, const char* last, std::size_t line_no, std::size_t idx) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last) {
        throw ParseError("line " + std::to_string(line_no) + ": invalid number at value " +
                             std::to_string(idx + 1),
                         line_no);
    }
    if (!std::isfinite(v)) {
        throw ParseError("line " + std::to_string(line_no) + ": non-finite sample at value " +
                             std::to_string(idx + 1),
                         line_no);
    }
    return v;
}

std::vector<ActivationBatch> load_csv(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::vector<ActivationBatch> batches;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        ++line_no;
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line(text.data() + pos, eol - pos);
        pos = eol + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) {
            if (pos >= text.size()) break;  // trailing newline
            throw ParseError("line " + std::to_string(line_no) + ": empty line", line_no);
        }

        const std::size_t semi = line.find(';');
        if (semi == std::string_view::npos) {
            throw ParseError("line " + std::to_string(line_no) + ": missing ';' header separator",
                             line_no);
        }
        std::size_t count = 0;
        {
            const char* first = line.data();
            const char* last = line.data() + semi;
            auto [p, ec] = std::from_chars(first, last, count);
            if (ec != std::errc() || p != last) {
                throw ParseError("line " + std::to_string(line_no) + ": invalid sample count '" +
                                     std::string(first, last) + "'",
                                 line_no);
            }
        }
        if (count == 0) {
            throw ParseError("line " + std::to_string(line_no) + ": empty batch", line_no);
        }

        ActivationBatch batch;
        batch.batch_id = batches.size() + 1;
        batch.source_tag = path.filename().string();
        batch.samples.reserve(count);
        std::string_view rest = line.substr(semi + 1);
        std::size_t idx = 0;
        while (true) {
            const std::size_t comma = rest.find(',');
            const std::string_view tok =
                comma == std::string_view::npos ? rest : rest.substr(0, comma);
            batch.samples.push_back(parse_sample(tok.data(), tok.data() + tok.size(), line_no, idx));
            ++idx;
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (batch.samples.size() != count) {
            throw ParseError("line " + std::to_string(line_no) + ": declared " +
                                 std::to_string(count) + " samples, found " +
                                 std::to_string(batch.samples.size()),
                             line_no);
        }
        batches.push_back(std::move(batch));
    }
    if (batches.empty()) throw ParseError("no batches in " + path.string(), 0);
    return batches;
}

std::uint32_t read_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<ActivationBatch> load_raw(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    const auto* data = reinterpret_cast<const unsigned char*>(text.data());
    const std::size_t size = text.size();
    std::vector<ActivationBatch> batches;
    std::size_t pos = 0;
    while (pos < size) {
        if (pos + 4 > size) {
            throw ParseError("byte " + std::to_string(pos) + ": truncated batch header", pos);
        }
        const std::uint32_t count = read_u32le(data + pos);
        if (count == 0) {
            throw ParseError("byte " + std::to_string(pos) + ": empty batch", pos);
        }
        pos += 4;
        if (pos + 4ull * count > size) {
            throw ParseError("byte " + std::to_string(pos) + ": truncated batch payload", pos);
        }
        ActivationBatch batch;
        batch.batch_id = batches.size() + 1;
        batch.source_tag = path.filename().string();
        batch.samples.reserve(count);
        for (std::uint32_t i = 0; i < count; ++i) {
            const std::uint32_t bits = read_u32le(data + pos);
            float f;
            std::memcpy(&f, &bits, 4);
            if (!std::isfinite(f)) {
                throw ParseError("byte " + std::to_string(pos) + ": non-finite sample", pos);
            }
            batch.samples.push_back(static_cast<double>(f));
            pos += 4;
        }
        batches.push_back(std::move(batch));
    }
    if (batches.empty()) throw ParseError("no batches in " + path.string(), 0);
    return batches;
}

void write_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::string format_sample(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

}  // namespace

const char* dist_kind_name(DistKind kind) {
    switch (kind) {
        case DistKind::ReluGauss: return "relu_gauss";
        case DistKind::ReluMixture: return "relu_mixture";
        case DistKind::Lognormal: return "lognormal";
        case DistKind::Uniform: return "uniform";
    }
    return "?";
}

DistKind parse_dist_kind(const std::string& name) {
    if (name == "relu_gauss") return DistKind::ReluGauss;
    if (name == "relu_mixture") return DistKind::ReluMixture;
    if (name == "lognormal") return DistKind::Lognormal;
    if (name == "uniform") return DistKind::Uniform;
    throw ValidationError("unknown distribution kind '" + name + "'");
}

std::vector<ActivationBatch> load_batches(const std::filesystem::path& path, BatchFormat format) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
    return format == BatchFormat::Csv ? load_csv(path) : load_raw(path);
}

void save_batches(const std::vector<ActivationBatch>& batches, const std::filesystem::path& path,
                  BatchFormat format) {
    if (batches.empty()) throw ValidationError("save_batches: no batches");
    std::string out;
    for (const auto& batch : batches) {
        if (batch.samples.empty()) throw ValidationError("save_batches: empty batch");
        if (format == BatchFormat::Csv) {
            out += std::to_string(batch.samples.size());
            out += ';';
            for (std::size_t i = 0; i < batch.samples.size(); ++i) {
                if (i) out += ',';
                out += format_sample(batch.samples[i]);
            }
            out += '\n';
        } else {
            write_u32le(out, static_cast<std::uint32_t>(batch.samples.size()));
            for (double v : batch.samples) {
                const auto f = static_cast<float>(v);
                std::uint32_t bits;
                std::memcpy(&bits, &f, 4);
                write_u32le(out, bits);
            }
        }
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) throw IoError("write failure on " + path.string());
}

namespace {

void validate_spec(const SyntheticDistSpec& spec) {
    if (spec.boundary_mass < 0.0 || spec.boundary_mass >= 1.0) {
        throw ValidationError("boundary_mass must be in [0, 1)");
    }
    switch (spec.kind) {
        case DistKind::ReluGauss:
        case DistKind::Lognormal:
            if (spec.sigma < 0.0) throw ValidationError("sigma must be non-negative");
            break;
        case DistKind::Uniform:
            if (!(spec.lo < spec.hi)) throw ValidationError("uniform requires lo < hi");
            break;
        case DistKind::ReluMixture: {
            if (spec.components.empty()) {
                throw ValidationError("relu_mixture requires at least one component");
            }
            double total = 0.0;
            for (const auto& c : spec.components) {
                if (c.weight < 0.0) throw ValidationError("mixture weight must be non-negative");
                if (c.sigma < 0.0) throw ValidationError("sigma must be non-negative");
                total += c.weight;
            }
            if (std::abs(total - 1.0) > 1e-9) {
                throw ValidationError("mixture weights must sum to 1 within 1e-9");
            }
            break;
        }
    }
    if (!(spec.clamp_max > 0.0)) throw ValidationError("clamp_max must be positive");
}

double draw_sample(const SyntheticDistSpec& spec, CounterRng& rng) {
    double v = 0.0;
    switch (spec.kind) {
        case DistKind::ReluGauss:
            v = std::max(0.0, spec.mean + spec.sigma * rng.next_gauss());
            break;
        case DistKind::ReluMixture: {
            const double u = rng.next_unit();
            double acc = 0.0;
            const MixtureComponent* chosen = &spec.components.back();
            for (const auto& c : spec.components) {
                acc += c.weight;
                if (u < acc) {
                    chosen = &c;
                    break;
                }
            }
            v = std::max(0.0, chosen->mean + chosen->sigma * rng.next_gauss());
            break;
        }
        case DistKind::Lognormal:
            v = std::exp(spec.mean + spec.sigma * rng.next_gauss());
            break;
        case DistKind::Uniform:
            v = spec.lo + rng.next_unit() * (spec.hi - spec.lo);
            break;
    }
    if (v > spec.clamp_max) v = spec.clamp_max;
    return v;
}

}  // namespace

std::vector<ActivationBatch> generate(const SyntheticDistSpec& spec, int n_batches,
                                      int batch_size) {
    validate_spec(spec);
    if (n_batches < 1) throw ValidationError("n_batches must be positive");
    if (batch_size < 2) throw ValidationError("batch_size must be at least 2");

    const auto forced =
        static_cast<std::size_t>(std::lround(spec.boundary_mass * batch_size));
    std::vector<ActivationBatch> batches;
    batches.reserve(static_cast<std::size_t>(n_batches));
    for (int b = 0; b < n_batches; ++b) {
        CounterRng rng(CounterRng::derive(spec.seed,
                                          kBatchStream + static_cast<std::uint64_t>(b)));
        ActivationBatch batch;
        batch.batch_id = static_cast<std::uint64_t>(b) + 1;
        batch.source_tag = std::string("synthetic:") + dist_kind_name(spec.kind);
        batch.samples.resize(static_cast<std::size_t>(batch_size));
        for (auto& v : batch.samples) {
            // narrow to f32 so file round trips are lossless
            v = static_cast<double>(static_cast<float>(draw_sample(spec, rng)));
        }
        for (std::size_t i = 0; i < forced && i < batch.samples.size(); ++i) {
            batch.samples[i] = 0.0;
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

namespace {

double parse_value(const std::string& key, const std::string& text) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) {
        throw ValidationError("invalid value for '" + key + "': '" + text + "'");
    }
    return v;
}

}  // namespace

// Text form: kind(key=value,...). relu_mixture components use numbered keys
// w1/mu1/sd1, w2/mu2/sd2, ... (up to 4 components).
SyntheticDistSpec parse_dist_spec(const std::string& text) {
    const std::size_t open = text.find('(');
    SyntheticDistSpec spec;
    std::string kind = text;
    std::string body;
    if (open != std::string::npos) {
        if (text.back() != ')') throw ValidationError("distribution spec missing ')'");
        kind = text.substr(0, open);
        body = text.substr(open + 1, text.size() - open - 2);
    }
    spec.kind = parse_dist_kind(kind);

    double weights[6] = {0, 0, 0, 0, 0, 0};
    double means[6] = {0, 0, 0, 0, 0, 0};
    double sigmas[6] = {1, 1, 1, 1, 1, 1};
    int max_component = 0;

    std::size_t pos = 0;
    while (pos < body.size()) {
        std::size_t comma = body.find(',', pos);
        if (comma == std::string::npos) comma = body.size();
        const std::string item = body.substr(pos, comma - pos);
        pos = comma + 1;
        if (item.empty()) continue;
        const std::size_t eq = item.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("distribution parameter '" + item + "' is not key=value");
        }
        const std::string key = item.substr(0, eq);
        const std::string val = item.substr(eq + 1);
        if (key == "mean" || key == "mu") {
            spec.mean = parse_value(key, val);
        } else if (key == "sigma" || key == "sd") {
            spec.sigma = parse_value(key, val);
        } else if (key == "lo") {
            spec.lo = parse_value(key, val);
        } else if (key == "hi") {
            spec.hi = parse_value(key, val);
        } else if (key == "clamp_max") {
            spec.clamp_max = parse_value(key, val);
        } else if (key == "boundary_mass") {
            spec.boundary_mass = parse_value(key, val);
        } else if (key == "seed") {
            spec.seed = static_cast<std::uint64_t>(parse_value(key, val));
        } else if (key.size() >= 2 && (key[0] == 'w' || key.rfind("mu", 0) == 0 ||
                                       key.rfind("sd", 0) == 0)) {
            const char digit = key.back();
            if (digit < '1' || digit > '6') {
                throw ValidationError("unknown distribution parameter '" + key + "'");
            }
            const int idx = digit - '1';
            max_component = std::max(max_component, idx + 1);
            if (key[0] == 'w' && key.size() == 2) {
                weights[idx] = parse_value(key, val);
            } else if (key.rfind("mu", 0) == 0 && key.size() == 3) {
                means[idx] = parse_value(key, val);
            } else if (key.rfind("sd", 0) == 0 && key.size() == 3) {
                sigmas[idx] = parse_value(key, val);
            } else {
                throw ValidationError("unknown distribution parameter '" + key + "'");
            }
        } else {
            throw ValidationError("unknown distribution parameter '" + key + "'");
        }
    }
    if (spec.kind == DistKind::ReluMixture) {
        for (int i = 0; i < max_component; ++i) {
            spec.components.push_back({weights[i], means[i], sigmas[i]});
        }
    }
    validate_spec(spec);
    return spec;
}

std::string format_dist_spec(const SyntheticDistSpec& spec) {
    std::string out = dist_kind_name(spec.kind);
    out += '(';
    switch (spec.kind) {
        case DistKind::ReluGauss:
            out += "mean=" + format_sample(spec.mean) + ",sigma=" + format_sample(spec.sigma);
            break;
        case DistKind::Lognormal:
            out += "mu=" + format_sample(spec.mean) + ",sigma=" + format_sample(spec.sigma);
            break;
        case DistKind::Uniform:
            out += "lo=" + format_sample(spec.lo) + ",hi=" + format_sample(spec.hi);
            break;
        case DistKind::ReluMixture:
            for (std::size_t i = 0; i < spec.components.size(); ++i) {
                const auto& c = spec.components[i];
                const std::string n = std::to_string(i + 1);
                if (i) out += ',';
                out += "w" + n + "=" + format_sample(c.weight);
                out += ",mu" + n + "=" + format_sample(c.mean);
                out += ",sd" + n + "=" + format_sample(c.sigma);
            }
            break;
    }
    if (std::isfinite(spec.clamp_max)) out += ",clamp_max=" + format_sample(spec.clamp_max);
    out += ",boundary_mass=" + format_sample(spec.boundary_mass);
    out += ",seed=" + std::to_string(spec.seed);
    out += ')';
    return out;
}

}  // namespace nlq
