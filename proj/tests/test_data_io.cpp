#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "bpre/data_io.hpp"
#include "bpre/engine.hpp"
#include "json.hpp"

using namespace bpre;

namespace {

Err kind_of(const std::function<void()>& fn, std::string* message = nullptr) {
    try {
        fn();
    } catch (const Error& e) {
        if (message != nullptr) *message = e.what();
        return e.kind();
    }
    FAIL("expected an Error");
    return Err::io_failure;
}

// Independent little-endian encoders mirroring the documented layout.
void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u32(out, bits);
}

void patch_u32(std::string& data, std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) data[at + static_cast<std::size_t>(i)] =
        static_cast<char>((v >> (8 * i)) & 0xff);
}

void patch_f32(std::string& data, std::size_t at, float v) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &v, sizeof(bits));
    patch_u32(data, at, bits);
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

// 69-byte reference file: d=3, two classes, one labeled single-view sample.
// Offsets: magic 0, version 4, dim 8, classes 12, samples 16, uniform 20,
// text 24..47, view-count 48, has-label 52, label 53, view floats 57..68.
std::string reference_bytes() {
    std::string out = "BPRE";
    put_u32(out, 1);  // version
    put_u32(out, 3);  // dim
    put_u32(out, 2);  // classes
    put_u32(out, 1);  // samples
    put_u32(out, 1);  // uniform views
    put_f32(out, 1.0f);
    put_f32(out, 0.0f);
    put_f32(out, 0.0f);
    put_f32(out, 0.0f);
    put_f32(out, 1.0f);
    put_f32(out, 0.0f);
    put_u32(out, 1);        // view count
    out.push_back(char(1));  // has label
    put_u32(out, 0);        // label 0
    put_f32(out, 0.0f);
    put_f32(out, 0.0f);
    put_f32(out, 1.0f);
    return out;
}

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() {
        std::remove(path.c_str());
        std::remove((path + ".json").c_str());
    }
};

std::uint64_t expected_bytes(const EmbeddingBank& bank) {
    std::uint64_t views = 0;
    for (const TestSample& s : bank.samples) views += s.view_features.size();
    return 24 + 4ull * bank.dim * (bank.num_classes() + views) +
           9ull * bank.samples.size();
}

SynthSpec tiny_spec(std::uint64_t seed) {
    SynthSpec spec;
    spec.classes = 3;
    spec.dim = 8;
    spec.n_per_class = 5;
    spec.views = 2;
    spec.seed = seed;
    return spec;
}

double zero_shot_accuracy(const EmbeddingBank& bank) {
    std::uint64_t correct = 0;
    for (const TestSample& s : bank.samples) {
        std::size_t best = 0;
        double best_cos = -2.0;
        for (std::size_t c = 0; c < bank.num_classes(); ++c) {
            const double cs = numkit::cosine(s.view_features[0], bank.text_embeddings[c]);
            if (cs > best_cos) {
                best_cos = cs;
                best = c;
            }
        }
        if (static_cast<std::int32_t>(best) == s.true_label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(bank.samples.size());
}

}  // namespace

TEST_CASE("write_bank emits exactly the documented byte layout") {
    const EmbeddingBank bank = generate_synthetic(tiny_spec(5));
    TempFile tmp("tdio_layout.bpre");
    const std::uint64_t bytes = write_bank(bank, tmp.path);
    CHECK(bytes == expected_bytes(bank));
    CHECK(std::filesystem::file_size(tmp.path) == bytes);
    REQUIRE(std::filesystem::exists(tmp.path + ".json"));

    std::ifstream mfile(tmp.path + ".json");
    const auto manifest = nlohmann::json::parse(mfile);
    CHECK(manifest["class_names"].size() == bank.num_classes());
    CHECK(manifest["source"] == "synthetic");
    CHECK(manifest.contains("spec"));
}

TEST_CASE("banks survive a write/read round trip") {
    const EmbeddingBank bank = generate_synthetic(tiny_spec(6));
    TempFile tmp("tdio_roundtrip.bpre");
    write_bank(bank, tmp.path);
    const EmbeddingBank back = read_bank(tmp.path);

    CHECK(back.dim == bank.dim);
    CHECK(back.class_names == bank.class_names);
    CHECK(back.source == "synthetic");
    const SynthSpec echoed = synth_spec_from_json(back.spec_json);
    CHECK(echoed.seed == 6);
    CHECK(echoed.classes == 3);

    REQUIRE(back.samples.size() == bank.samples.size());
    for (std::size_t c = 0; c < bank.num_classes(); ++c) {
        for (std::size_t i = 0; i < bank.dim; ++i) {
            CHECK(back.text_embeddings[c][i] ==
                  doctest::Approx(bank.text_embeddings[c][i]).epsilon(1e-7));
        }
    }
    for (std::size_t s = 0; s < bank.samples.size(); ++s) {
        CHECK(back.samples[s].sample_id == bank.samples[s].sample_id);
        CHECK(back.samples[s].true_label == bank.samples[s].true_label);
        REQUIRE(back.samples[s].view_features.size() ==
                bank.samples[s].view_features.size());
        for (std::size_t v = 0; v < bank.samples[s].view_features.size(); ++v) {
            for (std::size_t i = 0; i < bank.dim; ++i) {
                CHECK(back.samples[s].view_features[v][i] ==
                      doctest::Approx(bank.samples[s].view_features[v][i])
                          .epsilon(1e-7));
            }
        }
    }

    // Re-persisting the loaded bank reproduces the file byte for byte.
    TempFile tmp2("tdio_rewrite.bpre");
    EmbeddingBank copy = back;
    copy.spec_json = bank.spec_json;
    write_bank(copy, tmp2.path);
    std::ifstream a(tmp.path, std::ios::binary), b(tmp2.path, std::ios::binary);
    std::ostringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
}

TEST_CASE("fifty generated banks round-trip within float precision") {
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
        SynthSpec spec;
        spec.classes = 2 + trial % 5;
        spec.dim = 4 + (trial * 3) % 13;
        spec.n_per_class = 1 + trial % 6;
        spec.views = 1 + trial % 4;
        spec.class_separation = 0.2 + 0.02 * static_cast<double>(trial % 10);
        spec.sample_noise = 0.01 * static_cast<double>(trial % 8);
        spec.view_noise = 0.005 * static_cast<double>(trial % 5);
        spec.text_offset = 0.03 * static_cast<double>(trial % 6);
        spec.drift_angle = 0.05 * static_cast<double>(trial % 4);
        spec.seed = 1000 + trial;
        const EmbeddingBank bank = generate_synthetic(spec);

        TempFile tmp("tdio_prop.bpre");
        const std::uint64_t bytes = write_bank(bank, tmp.path);
        REQUIRE(bytes == expected_bytes(bank));
        const EmbeddingBank back = read_bank(tmp.path);
        REQUIRE(back.samples.size() == bank.samples.size());
        double worst = 0.0;
        for (std::size_t c = 0; c < bank.num_classes(); ++c) {
            for (std::size_t i = 0; i < bank.dim; ++i) {
                worst = std::max(worst, std::abs(back.text_embeddings[c][i] -
                                                 bank.text_embeddings[c][i]));
            }
        }
        for (std::size_t s = 0; s < bank.samples.size(); ++s) {
            REQUIRE(back.samples[s].true_label == bank.samples[s].true_label);
            for (std::size_t v = 0; v < bank.samples[s].view_features.size(); ++v) {
                for (std::size_t i = 0; i < bank.dim; ++i) {
                    worst = std::max(worst,
                                     std::abs(back.samples[s].view_features[v][i] -
                                              bank.samples[s].view_features[v][i]));
                }
            }
        }
        REQUIRE(worst <= 1e-7);
    }
}

TEST_CASE("ragged view counts persist with a zero uniform-views hint") {
    EmbeddingBank bank;
    bank.dim = 3;
    bank.text_embeddings = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};
    TestSample s0;
    s0.sample_id = 0;
    s0.true_label = 0;
    s0.view_features = {{1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}};
    TestSample s1;
    s1.sample_id = 1;
    s1.true_label = -1;
    s1.view_features = {{0.0, 1.0, 0.0}};
    bank.samples = {s0, s1};

    TempFile tmp("tdio_ragged.bpre");
    const std::uint64_t bytes = write_bank(bank, tmp.path);
    CHECK(bytes == expected_bytes(bank));

    std::ifstream file(tmp.path, std::ios::binary);
    std::ostringstream buf;
    buf << file.rdbuf();
    const std::string data = buf.str();
    std::uint32_t hint = 0;
    std::memcpy(&hint, data.data() + 20, 4);
    CHECK(hint == 0);

    const EmbeddingBank back = read_bank(tmp.path);
    REQUIRE(back.samples.size() == 2);
    CHECK(back.samples[0].view_features.size() == 2);
    CHECK(back.samples[1].view_features.size() == 1);
    CHECK(back.samples[1].true_label == -1);
    CHECK(back.labeled_count() == 1);
    CHECK(back.any_labels());
}

TEST_CASE("write_bank validates its input") {
    EmbeddingBank bank;
    bank.dim = 3;
    bank.text_embeddings = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};
    CHECK_NOTHROW(write_bank(bank, "tdio_validate.bpre"));
    std::remove("tdio_validate.bpre");
    std::remove("tdio_validate.bpre.json");

    EmbeddingBank no_dim = bank;
    no_dim.dim = 0;
    CHECK(kind_of([&] { write_bank(no_dim, "x"); }) == Err::invalid_bank);

    EmbeddingBank one_class = bank;
    one_class.text_embeddings.resize(1);
    CHECK(kind_of([&] { write_bank(one_class, "x"); }) == Err::invalid_bank);

    EmbeddingBank bad_names = bank;
    bad_names.class_names = {"only-one"};
    CHECK(kind_of([&] { write_bank(bad_names, "x"); }) == Err::invalid_bank);

    EmbeddingBank bad_label = bank;
    TestSample s;
    s.view_features = {{1.0, 0.0, 0.0}};
    s.true_label = 9;
    bad_label.samples = {s};
    CHECK(kind_of([&] { write_bank(bad_label, "x"); }) == Err::invalid_bank);

    EmbeddingBank no_views = bank;
    no_views.samples = {TestSample{}};
    CHECK(kind_of([&] { write_bank(no_views, "x"); }) == Err::invalid_bank);

    EmbeddingBank bad_norm = bank;
    TestSample far;
    far.view_features = {{2.0, 0.0, 0.0}};
    bad_norm.samples = {far};
    CHECK(kind_of([&] { write_bank(bad_norm, "x"); }) == Err::invalid_bank);
}

TEST_CASE("the reader accepts the handcrafted reference file") {
    TempFile tmp("tdio_ref.bpre");
    write_file(tmp.path, reference_bytes());
    const EmbeddingBank bank = read_bank(tmp.path);
    CHECK(bank.dim == 3);
    CHECK(bank.num_classes() == 2);
    CHECK(bank.class_names == std::vector<std::string>{"class_0", "class_1"});
    CHECK(bank.source.empty());
    REQUIRE(bank.samples.size() == 1);
    CHECK(bank.samples[0].true_label == 0);
    CHECK(bank.samples[0].view_features[0] == FeatureVector{0.0, 0.0, 1.0});
}

TEST_CASE("the corrupt-file corpus maps onto precise error kinds") {
    const std::string base = reference_bytes();
    const std::string path = "tdio_corrupt.bpre";
    TempFile tmp(path);
    const auto expect = [&](const std::string& data, Err want) {
        write_file(path, data);
        CHECK(kind_of([&] { read_bank(path); }) == want);
    };

    std::string bad = base;
    bad[0] = 'X';
    expect(bad, Err::bad_magic);  // 1

    bad = base;
    patch_u32(bad, 4, 2);
    expect(bad, Err::unsupported_version);  // 2

    bad = base;
    patch_u32(bad, 8, 0);
    expect(bad, Err::invalid_bank);  // 3: zero dimension

    bad = base;
    patch_u32(bad, 8, 70000);
    expect(bad, Err::invalid_bank);  // 4: implausible dimension

    bad = base;
    patch_u32(bad, 12, 1);
    expect(bad, Err::invalid_bank);  // 5: single class

    expect(base.substr(0, 12), Err::corrupt_payload);   // 6: truncated header
    expect(base.substr(0, 30), Err::corrupt_payload);   // 7: truncated text
    expect(base.substr(0, 60), Err::corrupt_payload);   // 8: truncated view
    expect(base + "xyz", Err::corrupt_payload);         // 9: trailing bytes

    bad = base;
    patch_u32(bad, 16, 2);
    expect(bad, Err::corrupt_payload);  // 10: sample count beyond payload

    bad = base;
    patch_u32(bad, 48, 0);
    expect(bad, Err::corrupt_payload);  // 11: zero views

    bad = base;
    bad[52] = char(2);
    expect(bad, Err::corrupt_payload);  // 12: label-presence byte

    bad = base;
    patch_u32(bad, 53, 5);
    expect(bad, Err::invalid_bank);  // 13: label out of range

    bad = base;
    patch_f32(bad, 57, std::nanf(""));
    expect(bad, Err::corrupt_payload);  // 14: non-finite coordinate

    bad = base;
    patch_f32(bad, 57, 0.5f);
    patch_f32(bad, 65, 0.0f);
    expect(bad, Err::norm_violation);  // 15: norm far from 1

    CHECK(kind_of([] { read_bank("tdio_missing.bpre"); }) == Err::io_failure);  // 16

    // 17: mildly denormalized vectors are silently fixed on load.
    bad = base;
    patch_f32(bad, 57, 1.005f);
    patch_f32(bad, 65, 0.0f);
    write_file(path, bad);
    EmbeddingBank fixed = read_bank(path);
    CHECK(numkit::l2_norm(fixed.samples[0].view_features[0]) ==
          doctest::Approx(1.0).epsilon(1e-9));

    // 18: near-unit vectors load exactly as stored.
    bad = base;
    patch_f32(bad, 57, 1.00005f);
    patch_f32(bad, 65, 0.0f);
    write_file(path, bad);
    EmbeddingBank kept = read_bank(path);
    CHECK(numkit::l2_norm(kept.samples[0].view_features[0]) ==
          doctest::Approx(1.00005).epsilon(1e-6));

    // 19-21: manifest damage.
    write_file(path, base);
    write_file(path + ".json", "{oops");
    CHECK(kind_of([&] { read_bank(path); }) == Err::parse_error);
    write_file(path + ".json", R"({"class_names": ["only"]})");
    CHECK(kind_of([&] { read_bank(path); }) == Err::invalid_bank);
    write_file(path + ".json", R"({"class_names": [1, 2]})");
    CHECK(kind_of([&] { read_bank(path); }) == Err::invalid_bank);

    // A well-formed manifest is honored.
    write_file(path + ".json",
               R"({"class_names": ["cat", "dog"], "source": "external"})");
    const EmbeddingBank named = read_bank(path);
    CHECK(named.class_names == std::vector<std::string>{"cat", "dog"});
    CHECK(named.source == "external");
}

TEST_CASE("CSV banks parse the documented fixture format") {
    const std::string path = "tdio_fixture.csv";
    TempFile tmp(path);
    write_file(path,
               "# embeddings fixture\n"
               "kind,class_or_sample_id,view_index,label,v0,v1,v2\n"
               "\n"
               "text,0,0,-1,1,0,0\r\n"
               "text,1,0,-1,0,1,0\n"
               "view,0,0,1,0,0,1\n"
               "view,0,1,1,0,0.0005,1\n"
               "view,7,0,-1,0.7071067811865476,0.7071067811865476,0\n");

    const EmbeddingBank bank = read_csv_bank(path);
    CHECK(bank.dim == 3);
    CHECK(bank.source == "csv");
    CHECK(bank.num_classes() == 2);
    REQUIRE(bank.samples.size() == 2);
    CHECK(bank.samples[0].sample_id == 0);
    CHECK(bank.samples[0].true_label == 1);
    CHECK(bank.samples[0].view_features.size() == 2);
    CHECK(bank.samples[1].sample_id == 7);
    CHECK(bank.samples[1].true_label == -1);
    CHECK(bank.samples[1].view_features.size() == 1);
    CHECK(bank.samples[0].view_features[0] == FeatureVector{0.0, 0.0, 1.0});
}

TEST_CASE("CSV parse failures carry their line numbers") {
    const std::string path = "tdio_bad.csv";
    TempFile tmp(path);
    const auto expect = [&](const std::string& text, Err want,
                            const std::string& needle) {
        write_file(path, text);
        std::string message;
        CHECK(kind_of([&] { read_csv_bank(path); }, &message) == want);
        if (!needle.empty()) {
            INFO("message: " << message);
            CHECK(message.find(needle) != std::string::npos);
        }
    };

    expect(
        "text,0,0,-1,1,0,0\n"
        "text,1,0,-1,0,1,0\n"
        "view,0,0,0,1,0\n",  // d-1 floats
        Err::parse_error, ":3:");
    expect(
        "text,0,0,-1,1,0,0\n"
        "text,1,0,-1,0,one,0\n",
        Err::parse_error, ":2:");
    expect("blob,0,0,-1,1,0,0\n", Err::parse_error, "unknown kind");
    expect(
        "text,0,0,-1,1,0,0\n"
        "text,0,0,-1,1,0,0\n",
        Err::parse_error, "duplicate text row");
    expect(
        "text,0,0,-1,1,0,0\n"
        "text,1,0,-1,0,1,0\n"
        "view,0,0,1,0,0,1\n"
        "view,0,0,1,0,0,1\n",
        Err::parse_error, "duplicate view");
    expect(
        "text,0,0,-1,1,0,0\n"
        "text,1,0,-1,0,1,0\n"
        "view,0,0,1,0,0,1\n"
        "view,0,1,0,0,0,1\n",
        Err::parse_error, "contradicts");
    expect(
        "text,0,0,-1,1,0,0\n"
        "text,1,0,-1,0,1,0\n"
        "view,0,0,1,0,0,1\n"
        "view,0,2,1,0,1,0\n",
        Err::parse_error, "contiguous");
    expect("text,0,0,-1,1,0,0\n", Err::invalid_bank, "at least 2 classes");
    expect(
        "text,1,0,-1,1,0,0\n"
        "text,2,0,-1,0,1,0\n",
        Err::invalid_bank, "missing 0");
    expect(
        "text,0,0,-1,1,0,0\n"
        "text,1,0,-1,0,1,0\n"
        "view,0,0,5,0,0,1\n",
        Err::invalid_bank, "out of range");
    expect(
        "text,0,0,-1,1,0,0\n"
        "text,1,0,-1,0,1,0\n"
        "view,0,0,1,0.5,0,0\n",
        Err::norm_violation, "");
    expect("view\n", Err::parse_error, "at least 5 columns");
    CHECK(kind_of([] { read_csv_bank("tdio_nope.csv"); }) == Err::io_failure);
}

TEST_CASE("CSV and binary forms of one bank produce identical runs") {
    const EmbeddingBank source = generate_synthetic(tiny_spec(8));
    TempFile binary("tdio_equiv.bpre");
    write_bank(source, binary.path);
    const EmbeddingBank quantized = read_bank(binary.path);

    // Emit the quantized bank as CSV at full double precision.
    std::string csv;
    char buf[40];
    const auto append_vec = [&](const FeatureVector& v) {
        for (double x : v) {
            std::snprintf(buf, sizeof(buf), ",%.17g", x);
            csv += buf;
        }
        csv += '\n';
    };
    for (std::size_t c = 0; c < quantized.num_classes(); ++c) {
        csv += "text," + std::to_string(c) + ",0,-1";
        append_vec(quantized.text_embeddings[c]);
    }
    for (const TestSample& s : quantized.samples) {
        for (std::size_t v = 0; v < s.view_features.size(); ++v) {
            csv += "view," + std::to_string(s.sample_id) + "," + std::to_string(v) +
                   "," + std::to_string(s.true_label);
            append_vec(s.view_features[v]);
        }
    }
    TempFile text("tdio_equiv.csv");
    write_file(text.path, csv);
    const EmbeddingBank parsed = read_csv_bank(text.path);

    const EngineConfig config;
    const std::string from_binary = report_to_json(
        run_stream(quantized.samples, quantized.text_embeddings, config), false);
    const std::string from_csv = report_to_json(
        run_stream(parsed.samples, parsed.text_embeddings, config), false);
    CHECK(from_binary == from_csv);
}

TEST_CASE("the generator is deterministic per seed") {
    const SynthSpec spec = tiny_spec(21);
    const EmbeddingBank a = generate_synthetic(spec);
    const EmbeddingBank b = generate_synthetic(spec);
    CHECK(a.text_embeddings == b.text_embeddings);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t s = 0; s < a.samples.size(); ++s) {
        CHECK(a.samples[s].sample_id == b.samples[s].sample_id);
        CHECK(a.samples[s].true_label == b.samples[s].true_label);
        CHECK(a.samples[s].view_features == b.samples[s].view_features);
    }

    SynthSpec other = spec;
    other.seed = 22;
    const EmbeddingBank c = generate_synthetic(other);
    CHECK(a.text_embeddings != c.text_embeddings);
}

TEST_CASE("angle parameters leave the noise realization untouched") {
    SynthSpec calm = tiny_spec(33);
    SynthSpec drifted = calm;
    drifted.drift_angle = 0.3;
    const EmbeddingBank a = generate_synthetic(calm);
    const EmbeddingBank b = generate_synthetic(drifted);
    CHECK(a.text_embeddings == b.text_embeddings);
    REQUIRE(a.samples.size() == b.samples.size());
    CHECK(a.samples[0].sample_id == b.samples[0].sample_id);
    CHECK(a.samples[0].view_features != b.samples[0].view_features);
}

TEST_CASE("streams are shuffled with ids in stream order") {
    SynthSpec spec = tiny_spec(44);
    spec.n_per_class = 20;
    const EmbeddingBank bank = generate_synthetic(spec);
    bool interleaved = false;
    for (std::size_t s = 0; s < bank.samples.size(); ++s) {
        CHECK(bank.samples[s].sample_id == static_cast<std::int64_t>(s));
        if (s > 0 && bank.samples[s].true_label != bank.samples[0].true_label &&
            s < 20) {
            interleaved = true;
        }
    }
    CHECK(interleaved);
    CHECK(bank.labeled_count() == bank.samples.size());
}

TEST_CASE("an aligned low-noise bank is perfectly zero-shot separable") {
    SynthSpec spec;
    spec.classes = 4;
    spec.dim = 16;
    spec.n_per_class = 10;
    spec.views = 1;
    spec.class_separation = 0.5;
    spec.sample_noise = 0.02;
    spec.seed = 3;
    const EmbeddingBank bank = generate_synthetic(spec);
    CHECK(zero_shot_accuracy(bank) == 1.0);
}

TEST_CASE("drift makes the stream monotonically harder") {
    const double drifts[5] = {0.0, 0.2, 0.4, 0.6, 0.8};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        double previous = 2.0;
        int inversions = 0;
        for (double drift : drifts) {
            SynthSpec spec;
            spec.classes = 6;
            spec.dim = 32;
            spec.n_per_class = 25;
            spec.views = 1;
            spec.class_separation = 0.4;
            spec.sample_noise = 0.10;
            spec.text_offset = 0.1;
            spec.drift_angle = drift;
            spec.seed = seed;
            const double acc = zero_shot_accuracy(generate_synthetic(spec));
            if (acc > previous + 1e-12) ++inversions;
            previous = acc;
        }
        INFO("seed " << seed);
        CHECK(inversions <= 1);
    }
}

TEST_CASE("infeasible generator specs are rejected") {
    const auto rejects = [](const std::function<void(SynthSpec&)>& mutate) {
        SynthSpec spec = tiny_spec(1);
        mutate(spec);
        return kind_of([&] { generate_synthetic(spec); }) == Err::infeasible_spec;
    };
    CHECK(rejects([](SynthSpec& s) { s.classes = 1; }));
    CHECK(rejects([](SynthSpec& s) { s.dim = 2; }));
    CHECK(rejects([](SynthSpec& s) { s.classes = 600; }));
    CHECK(rejects([](SynthSpec& s) {
        s.classes = 40;
        s.dim = 4;
    }));
    CHECK(rejects([](SynthSpec& s) { s.n_per_class = 0; }));
    CHECK(rejects([](SynthSpec& s) { s.views = 0; }));
    CHECK(rejects([](SynthSpec& s) { s.class_separation = 0.0; }));
    CHECK(rejects([](SynthSpec& s) { s.class_separation = 3.15; }));
    CHECK(rejects([](SynthSpec& s) { s.text_offset = 3.2; }));
    CHECK(rejects([](SynthSpec& s) { s.drift_angle = -0.1; }));
    CHECK(rejects([](SynthSpec& s) { s.sample_noise = -0.01; }));
    CHECK(rejects([](SynthSpec& s) { s.view_noise = 5.0; }));
}

TEST_CASE("synthetic spec JSON round-trips and rejects junk") {
    SynthSpec spec = tiny_spec(77);
    spec.drift_angle = 0.25;
    spec.text_offset = 0.15;
    const SynthSpec back = synth_spec_from_json(synth_spec_to_json(spec));
    CHECK(back.classes == spec.classes);
    CHECK(back.dim == spec.dim);
    CHECK(back.n_per_class == spec.n_per_class);
    CHECK(back.views == spec.views);
    CHECK(back.class_separation == spec.class_separation);
    CHECK(back.sample_noise == spec.sample_noise);
    CHECK(back.view_noise == spec.view_noise);
    CHECK(back.text_offset == spec.text_offset);
    CHECK(back.drift_angle == spec.drift_angle);
    CHECK(back.seed == spec.seed);

    CHECK(kind_of([] { synth_spec_from_json("{bad"); }) == Err::invalid_config);
    CHECK(kind_of([] { synth_spec_from_json("[]"); }) == Err::invalid_config);
    CHECK(kind_of([] { synth_spec_from_json(R"({"speed": 9})"); }) ==
          Err::invalid_config);
    CHECK(kind_of([] { synth_spec_from_json(R"({"classes": -1})"); }) ==
          Err::invalid_config);
    CHECK(kind_of([] { synth_spec_from_json(R"({"classes": "many"})"); }) ==
          Err::invalid_config);
    CHECK(kind_of([] { synth_spec_from_json(R"({"drift_angle": "far"})"); }) ==
          Err::invalid_config);
}

TEST_CASE("prototype snapshots become loadable banks") {
    PrototypeBank bank = init_from_text({{1.0, 0.0, 0.0, 0.0},
                                         {0.0, 1.0, 0.0, 0.0},
                                         {0.0, 0.0, 1.0, 0.0}});
    try_admit(bank, 0, FeatureVector{1.0, 0.0, 0.0, 0.0}, 0.9, 0.01, 1);
    try_admit(bank, 0, FeatureVector{0.0, 0.0, 0.0, 1.0}, 0.8, 0.02, 2);
    try_admit(bank, 2, FeatureVector{0.0, 0.0, 1.0, 0.0}, 0.7, 0.03, 3);

    const EmbeddingBank snap =
        snapshot_from_prototypes(bank, {"ant", "bee", "cat"});
    CHECK(snap.dim == 4);
    CHECK(snap.source == "checkpoint");
    CHECK(snap.class_names == std::vector<std::string>{"ant", "bee", "cat"});
    CHECK(snap.text_embeddings == bank.prototypes);
    REQUIRE(snap.samples.size() == 3);
    CHECK(snap.samples[0].true_label == 0);
    CHECK(snap.samples[1].true_label == 0);
    CHECK(snap.samples[2].true_label == 2);
    CHECK(snap.samples[2].view_features[0] == FeatureVector{0.0, 0.0, 1.0, 0.0});

    TempFile tmp("tdio_snapshot.bpre");
    write_bank(snap, tmp.path);
    const EmbeddingBank back = read_bank(tmp.path);
    CHECK(back.class_names == snap.class_names);
    CHECK(back.source == "checkpoint");
    CHECK(back.samples.size() == 3);

    // Mismatched name lists fall back to generated names.
    const EmbeddingBank fallback = snapshot_from_prototypes(bank, {"x"});
    CHECK(fallback.class_names ==
          std::vector<std::string>{"class_0", "class_1", "class_2"});

    CHECK(kind_of([] {
              snapshot_from_prototypes(PrototypeBank{}, {});
          }) == Err::uninitialized_bank);
}
