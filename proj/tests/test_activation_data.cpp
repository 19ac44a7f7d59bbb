#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "nlq/activation_data.hpp"
#include "nlq/errors.hpp"
#include "nlq/rng.hpp"

using namespace nlq;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "nlq_test_activation_data";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    os << content;
}

SyntheticDistSpec gauss_spec(std::uint64_t seed) {
    SyntheticDistSpec spec;
    spec.kind = DistKind::ReluGauss;
    spec.mean = 0.5;
    spec.sigma = 1.0;
    spec.seed = seed;
    return spec;
}

}  // namespace

TEST_CASE("csv batch parses to the literal sample list") {
    const auto path = temp_dir() / "one.csv";
    write_file(path, "3;0.0,1.5,2.5\n");
    const auto batches = load_batches(path, BatchFormat::Csv);
    REQUIRE(batches.size() == 1);
    CHECK(batches[0].batch_id == 1);
    CHECK(batches[0].samples == std::vector<double>{0.0, 1.5, 2.5});
}

TEST_CASE("empty file reports no batches") {
    const auto path = temp_dir() / "empty.csv";
    write_file(path, "");
    CHECK(throws_with<ParseError>([&] { load_batches(path, BatchFormat::Csv); }, "no batches"));
    write_file(temp_dir() / "empty.f32", "");
    CHECK(throws_with<ParseError>([&] { load_batches(temp_dir() / "empty.f32", BatchFormat::RawF32le); }, "no batches"));
}

TEST_CASE("csv parse errors are distinct and carry the line number") {
    const auto dir = temp_dir();

    write_file(dir / "bad_header.csv", "2;1,2\nxx,1,2\n");
    CHECK(throws_with<ParseError>([&] { load_batches(dir / "bad_header.csv", BatchFormat::Csv); }, "line 2: missing ';'"));

    write_file(dir / "bad_count.csv", "two;1,2\n");
    CHECK(throws_with<ParseError>([&] { load_batches(dir / "bad_count.csv", BatchFormat::Csv); }, "invalid sample count"));

    write_file(dir / "mismatch.csv", "3;1,2\n");
    CHECK(throws_with<ParseError>([&] { load_batches(dir / "mismatch.csv", BatchFormat::Csv); }, "declared 3 samples, found 2"));

    write_file(dir / "nonfinite.csv", "2;1,inf\n");
    CHECK(throws_with<ParseError>([&] { load_batches(dir / "nonfinite.csv", BatchFormat::Csv); }, "non-finite sample at value 2"));

    write_file(dir / "emptybatch.csv", "0;\n");
    CHECK(throws_with<ParseError>([&] { load_batches(dir / "emptybatch.csv", BatchFormat::Csv); }, "line 1: empty batch"));

    try {
        load_batches(dir / "bad_header.csv", BatchFormat::Csv);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 2);
    }
}

TEST_CASE("raw parse errors name the byte offset") {
    const auto dir = temp_dir();
    write_file(dir / "trunc.f32", std::string("\x02\x00\x00\x00", 4) + std::string(4, '\0'));
    CHECK(throws_with<ParseError>([&] { load_batches(dir / "trunc.f32", BatchFormat::RawF32le); }, "byte 4: truncated batch payload"));

    write_file(dir / "zero.f32", std::string("\x00\x00\x00\x00", 4));
    CHECK(throws_with<ParseError>([&] { load_batches(dir / "zero.f32", BatchFormat::RawF32le); }, "empty batch"));
}

TEST_CASE("missing file is an io error") {
    CHECK_THROWS_AS(load_batches(temp_dir() / "nope.csv", BatchFormat::Csv), IoError);
}

TEST_CASE("raw_f32le round trip is lossless over random batches") {
    // round-trip oracle: save then load must reproduce the exact sample lists
    const auto path = temp_dir() / "roundtrip.f32";
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto batches = generate(gauss_spec(seed), 10, 100);
        save_batches(batches, path, BatchFormat::RawF32le);
        const auto loaded = load_batches(path, BatchFormat::RawF32le);
        REQUIRE(loaded.size() == batches.size());
        for (std::size_t b = 0; b < batches.size(); ++b) {
            CHECK(loaded[b].samples == batches[b].samples);
        }
    }
}

TEST_CASE("csv round trip reproduces doubles exactly") {
    // shortest round-trip formatting preserves far more than 9 significant digits
    const auto path = temp_dir() / "roundtrip.csv";
    const auto batches = generate(gauss_spec(42), 10, 1000);
    save_batches(batches, path, BatchFormat::Csv);
    const auto loaded = load_batches(path, BatchFormat::Csv);
    REQUIRE(loaded.size() == batches.size());
    for (std::size_t b = 0; b < batches.size(); ++b) {
        CHECK(loaded[b].samples == batches[b].samples);
    }
}

TEST_CASE("single-sample batch round trips") {
    const auto path = temp_dir() / "tiny.f32";
    std::vector<ActivationBatch> batches{{{0.0}, 1, "t"}};
    save_batches(batches, path, BatchFormat::RawF32le);
    const auto loaded = load_batches(path, BatchFormat::RawF32le);
    CHECK(loaded[0].samples == std::vector<double>{0.0});
}

TEST_CASE("generation is deterministic bit for bit") {
    const auto a = generate(gauss_spec(7), 4, 256);
    const auto b = generate(gauss_spec(7), 4, 256);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].samples == b[i].samples);
        CHECK(a[i].batch_id == i + 1);
    }
    // a different seed must change the stream
    const auto c = generate(gauss_spec(8), 4, 256);
    CHECK(a[0].samples != c[0].samples);
}

TEST_CASE("uniform samples stay inside the bounds") {
    SyntheticDistSpec spec;
    spec.kind = DistKind::Uniform;
    spec.lo = 0.0;
    spec.hi = 1.0;
    spec.seed = 3;
    for (const auto& batch : generate(spec, 4, 1000)) {
        for (double v : batch.samples) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("relu generators never emit negatives and rectify about half the mass") {
    SyntheticDistSpec spec;
    spec.kind = DistKind::ReluGauss;
    spec.mean = 0.0;
    spec.sigma = 1.0;
    spec.seed = 11;
    std::size_t zeros = 0, total = 0;
    for (const auto& batch : generate(spec, 100, 1000)) {
        for (double v : batch.samples) {
            CHECK(v >= 0.0);
            if (v == 0.0) ++zeros;
            ++total;
        }
    }
    REQUIRE(total == 100000);
    // half-Gaussian rectification puts ~50% of draws at exactly zero
    const double frac = static_cast<double>(zeros) / static_cast<double>(total);
    CHECK(frac >= 0.45);
    CHECK(frac <= 0.55);
}

TEST_CASE("boundary_mass forces the exact sample count to zero") {
    SyntheticDistSpec spec;
    spec.kind = DistKind::Lognormal;  // lognormal never hits zero on its own
    spec.mean = 0.0;
    spec.sigma = 0.5;
    spec.boundary_mass = 0.3;
    spec.seed = 9;
    for (const auto& batch : generate(spec, 5, 1000)) {
        const auto zeros = static_cast<std::size_t>(
            std::count(batch.samples.begin(), batch.samples.end(), 0.0));
        CHECK(zeros == 300);
    }
}

TEST_CASE("generator validation rejects bad parameters") {
    SyntheticDistSpec spec = gauss_spec(0);
    spec.sigma = -1.0;
    CHECK_THROWS_AS(generate(spec, 1, 10), ValidationError);

    SyntheticDistSpec mix;
    mix.kind = DistKind::ReluMixture;
    mix.components = {{0.5, 0.0, 1.0}, {0.6, 1.0, 1.0}};  // weights sum to 1.1
    CHECK_THROWS_AS(generate(mix, 1, 10), ValidationError);

    SyntheticDistSpec uni;
    uni.kind = DistKind::Uniform;
    uni.lo = 1.0;
    uni.hi = 1.0;
    CHECK_THROWS_AS(generate(uni, 1, 10), ValidationError);

    SyntheticDistSpec bm = gauss_spec(0);
    bm.boundary_mass = 1.0;
    CHECK_THROWS_AS(generate(bm, 1, 10), ValidationError);

    CHECK_THROWS_AS(generate(gauss_spec(0), 1, 1), ValidationError);
}

TEST_CASE("dist spec text form round trips") {
    const std::string text =
        "relu_mixture(w1=0.85,mu1=0,sd1=0.5,w2=0.15,mu2=2.5,sd2=1.5,boundary_mass=0.3,seed=7)";
    const SyntheticDistSpec spec = parse_dist_spec(text);
    CHECK(spec.kind == DistKind::ReluMixture);
    REQUIRE(spec.components.size() == 2);
    CHECK(spec.components[0].weight == 0.85);
    CHECK(spec.components[1].mean == 2.5);
    CHECK(spec.boundary_mass == 0.3);
    CHECK(spec.seed == 7);
    const std::string canon = format_dist_spec(spec);
    const SyntheticDistSpec again = parse_dist_spec(canon);
    CHECK(format_dist_spec(again) == canon);

    CHECK_THROWS_AS(parse_dist_spec("nope(a=1)"), ValidationError);
    CHECK_THROWS_AS(parse_dist_spec("uniform(lo=0,hi=1,bogus=2)"), ValidationError);
}
