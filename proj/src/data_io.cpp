#include "bpre/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"

namespace bpre {
namespace {

constexpr char kMagic[4] = {'B', 'P', 'R', 'E'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint32_t kMaxDim = 1u << 16;
constexpr std::uint32_t kMaxClasses = 1u << 20;
constexpr std::uint32_t kMaxViews = 1u << 20;

// ---- little-endian encoding helpers -------------------------------------

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_i32(std::string& out, std::int32_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u32(out, bits);
}

class Cursor {
  public:
    Cursor(const std::string& data, const std::string& path)
        : data_(data), path_(path) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8) | static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)]);
        }
        pos_ += 4;
        return v;
    }

    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }

    float f32() {
        const std::uint32_t bits = u32();
        float v = 0.0f;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    void magic() {
        need(4);
        if (std::memcmp(data_.data() + pos_, kMagic, 4) != 0) {
            raise(Err::bad_magic, path_ + ": not a bank file (bad magic)");
        }
        pos_ += 4;
    }

    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) {
            raise(Err::corrupt_payload, path_ + ": truncated at byte " +
                                            std::to_string(pos_) + " (need " +
                                            std::to_string(n) + " more)");
        }
    }

    bool exhausted() const { return pos_ == data_.size(); }
    std::size_t pos() const { return pos_; }

  private:
    const std::string& data_;
    const std::string& path_;
    std::size_t pos_ = 0;
};

// Loader norm policy: within 1e-4 of unit keep as stored, within 1e-2 fix,
// beyond that reject.
void adopt_vector(FeatureVector& v, const std::string& context) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            raise(Err::corrupt_payload, context + ": non-finite coordinate");
        }
    }
    const double norm = numkit::l2_norm(v);
    if (std::abs(norm - 1.0) <= 1e-4) return;
    if (std::abs(norm - 1.0) <= 1e-2) {
        for (double& x : v) x /= norm;
        return;
    }
    raise(Err::norm_violation,
          context + ": vector norm " + std::to_string(norm) + " too far from 1");
}

std::string manifest_path(const std::string& path) { return path + ".json"; }

std::vector<std::string> default_class_names(std::size_t count) {
    std::vector<std::string> names;
    names.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        names.push_back("class_" + std::to_string(c));
    }
    return names;
}

void validate_bank_for_write(const EmbeddingBank& bank) {
    if (bank.dim == 0) raise(Err::invalid_bank, "bank dimension must be positive");
    if (bank.num_classes() < 2) raise(Err::invalid_bank, "bank needs at least 2 classes");
    if (!bank.class_names.empty() && bank.class_names.size() != bank.num_classes()) {
        raise(Err::invalid_bank, "class name count does not match class count");
    }
    for (const FeatureVector& t : bank.text_embeddings) {
        if (t.size() != bank.dim) {
            raise(Err::dimension_mismatch, "text embedding dimension mismatch");
        }
    }
    const auto n_classes = static_cast<std::int32_t>(bank.num_classes());
    for (const TestSample& s : bank.samples) {
        if (s.view_features.empty()) {
            raise(Err::invalid_bank,
                  "sample " + std::to_string(s.sample_id) + " has no views");
        }
        if (s.true_label < -1 || s.true_label >= n_classes) {
            raise(Err::invalid_bank, "sample " + std::to_string(s.sample_id) +
                                         " has out-of-range label " +
                                         std::to_string(s.true_label));
        }
        for (const FeatureVector& v : s.view_features) {
            if (v.size() != bank.dim) {
                raise(Err::dimension_mismatch, "view dimension mismatch in sample " +
                                                   std::to_string(s.sample_id));
            }
        }
    }
}

// ---- deterministic RNG with pinned consumption ---------------------------

class SynthRng {
  public:
    explicit SynthRng(std::uint64_t seed) : gen_(seed) {}

    double uniform() {  // [0, 1)
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // Box-Muller, exactly two uniforms per draw (no spare caching, so the
    // consumption schedule is independent of call pattern).
    double gaussian() {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    FeatureVector gaussian_vector(std::size_t dim) {
        FeatureVector v(dim);
        for (double& x : v) x = gaussian();
        return v;
    }

    std::uint64_t below(std::uint64_t bound) { return gen_() % bound; }

  private:
    std::mt19937_64 gen_;
};

// Removes the component of v along unit vector u, then normalizes; falls
// back to a deterministic basis direction in the measure-zero degenerate
// case.
FeatureVector orthonormal_against(FeatureVector v, const FeatureVector& u) {
    const double proj = numkit::dot(v, u);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= proj * u[i];
    if (numkit::l2_norm(v) < 1e-12) {
        std::size_t axis = 0;
        for (std::size_t i = 1; i < u.size(); ++i) {
            if (std::abs(u[i]) < std::abs(u[axis])) axis = i;
        }
        std::fill(v.begin(), v.end(), 0.0);
        v[axis] = 1.0;
        const double p = numkit::dot(v, u);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * u[i];
    }
    numkit::l2_normalize_inplace(v);
    return v;
}

void validate_spec(const SynthSpec& spec) {
    const auto fail = [](const std::string& message) {
        raise(Err::infeasible_spec, message);
    };
    if (spec.classes < 2) fail("synthetic spec: need at least 2 classes");
    if (spec.dim < 3) fail("synthetic spec: dimension must be at least 3");
    if (spec.classes > 512) fail("synthetic spec: at most 512 classes supported");
    if (spec.classes > 8 * spec.dim) {
        fail("synthetic spec: " + std::to_string(spec.classes) +
             " classes cannot be separated at dimension " + std::to_string(spec.dim));
    }
    if (spec.n_per_class < 1) fail("synthetic spec: n_per_class must be at least 1");
    if (spec.views < 1) fail("synthetic spec: views must be at least 1");
    if (spec.views > kMaxViews) fail("synthetic spec: implausible view count");
    if (!(spec.class_separation > 0.0) || spec.class_separation >= 3.14159265358979323846) {
        fail("synthetic spec: class_separation must lie in (0, pi)");
    }
    const auto angle_ok = [](double a) { return a >= 0.0 && a < 3.14159265358979323846; };
    if (!angle_ok(spec.text_offset)) fail("synthetic spec: text_offset must lie in [0, pi)");
    if (!angle_ok(spec.drift_angle)) fail("synthetic spec: drift_angle must lie in [0, pi)");
    if (!(spec.sample_noise >= 0.0) || spec.sample_noise > 4.0) {
        fail("synthetic spec: sample_noise must lie in [0, 4]");
    }
    if (!(spec.view_noise >= 0.0) || spec.view_noise > 4.0) {
        fail("synthetic spec: view_noise must lie in [0, 4]");
    }
}

}  // namespace

std::uint64_t EmbeddingBank::labeled_count() const {
    std::uint64_t n = 0;
    for (const TestSample& s : samples) {
        if (s.has_label()) ++n;
    }
    return n;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
    nlohmann::json j;
    j["classes"] = spec.classes;
    j["dim"] = spec.dim;
    j["n_per_class"] = spec.n_per_class;
    j["views"] = spec.views;
    j["class_separation"] = spec.class_separation;
    j["sample_noise"] = spec.sample_noise;
    j["view_noise"] = spec.view_noise;
    j["text_offset"] = spec.text_offset;
    j["drift_angle"] = spec.drift_angle;
    j["seed"] = spec.seed;
    return j.dump();
}

SynthSpec synth_spec_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        raise(Err::invalid_config, std::string("spec JSON parse failure: ") + e.what());
    }
    if (!j.is_object()) raise(Err::invalid_config, "spec JSON must be an object");
    SynthSpec spec;
    const auto grab = [&](const char* key, auto& field) {
        using T = std::remove_reference_t<decltype(field)>;
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) {
                raise(Err::invalid_config, std::string("spec key '") + key +
                                               "' must be a number");
            }
            field = v.template get<double>();
        } else {
            if (!v.is_number_integer() && !v.is_number_unsigned()) {
                raise(Err::invalid_config, std::string("spec key '") + key +
                                               "' must be an integer");
            }
            const auto raw = v.template get<std::int64_t>();
            if (raw < 0) {
                raise(Err::invalid_config, std::string("spec key '") + key +
                                               "' must be nonnegative");
            }
            field = static_cast<T>(raw);
        }
        j.erase(key);
    };
    grab("classes", spec.classes);
    grab("dim", spec.dim);
    grab("n_per_class", spec.n_per_class);
    grab("views", spec.views);
    grab("class_separation", spec.class_separation);
    grab("sample_noise", spec.sample_noise);
    grab("view_noise", spec.view_noise);
    grab("text_offset", spec.text_offset);
    grab("drift_angle", spec.drift_angle);
    grab("seed", spec.seed);
    if (!j.empty()) {
        raise(Err::invalid_config, "unknown spec key '" + j.items().begin().key() + "'");
    }
    return spec;
}

std::uint64_t write_bank(const EmbeddingBank& bank, const std::string& path) {
    validate_bank_for_write(bank);

    std::uint32_t uniform_views = 0;
    if (!bank.samples.empty()) {
        uniform_views = static_cast<std::uint32_t>(bank.samples.front().view_features.size());
        for (const TestSample& s : bank.samples) {
            if (s.view_features.size() != uniform_views) {
                uniform_views = 0;
                break;
            }
        }
    }

    std::string out;
    out.reserve(24 + bank.num_classes() * bank.dim * 4);
    out.append(kMagic, 4);
    put_u32(out, kFormatVersion);
    put_u32(out, bank.dim);
    put_u32(out, static_cast<std::uint32_t>(bank.num_classes()));
    put_u32(out, static_cast<std::uint32_t>(bank.samples.size()));
    put_u32(out, uniform_views);

    const auto put_vector = [&](const FeatureVector& v) {
        const double norm = numkit::l2_norm(v);
        const bool fix = std::abs(norm - 1.0) > 1e-4;
        if (std::abs(norm - 1.0) > 1e-2) {
            raise(Err::invalid_bank, "vector norm " + std::to_string(norm) +
                                         " too far from 1 to persist");
        }
        for (double x : v) {
            put_f32(out, static_cast<float>(fix ? x / norm : x));
        }
    };

    for (const FeatureVector& t : bank.text_embeddings) put_vector(t);
    for (const TestSample& s : bank.samples) {
        put_u32(out, static_cast<std::uint32_t>(s.view_features.size()));
        out.push_back(s.has_label() ? char(1) : char(0));
        put_i32(out, s.has_label() ? s.true_label : -1);
        for (const FeatureVector& v : s.view_features) put_vector(v);
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) raise(Err::io_failure, "cannot open '" + path + "' for writing");
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) raise(Err::io_failure, "write failure on '" + path + "'");
    file.close();

    nlohmann::json manifest;
    manifest["class_names"] = bank.class_names.empty()
                                  ? default_class_names(bank.num_classes())
                                  : bank.class_names;
    manifest["source"] = bank.source.empty() ? "external" : bank.source;
    if (!bank.spec_json.empty()) {
        manifest["spec"] = nlohmann::json::parse(bank.spec_json);
    }
    std::ofstream mfile(manifest_path(path), std::ios::binary | std::ios::trunc);
    if (!mfile) {
        raise(Err::io_failure, "cannot open '" + manifest_path(path) + "' for writing");
    }
    const std::string mtext = manifest.dump(2) + "\n";
    mfile.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    if (!mfile) raise(Err::io_failure, "write failure on '" + manifest_path(path) + "'");
    return out.size();
}

EmbeddingBank read_bank(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) raise(Err::io_failure, "cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << file.rdbuf();
    const std::string data = buffer.str();

    Cursor cur(data, path);
    cur.magic();
    const std::uint32_t version = cur.u32();
    if (version != kFormatVersion) {
        raise(Err::unsupported_version,
              path + ": format version " + std::to_string(version) + " not supported");
    }
    EmbeddingBank bank;
    bank.dim = cur.u32();
    const std::uint32_t n_classes = cur.u32();
    const std::uint32_t n_samples = cur.u32();
    cur.u32();  // uniform-views hint; per-sample counts are authoritative

    if (bank.dim == 0 || bank.dim > kMaxDim) {
        raise(Err::invalid_bank, path + ": implausible dimension " + std::to_string(bank.dim));
    }
    if (n_classes < 2 || n_classes > kMaxClasses) {
        raise(Err::invalid_bank,
              path + ": class count " + std::to_string(n_classes) + " outside [2, max]");
    }

    const auto read_vector = [&](const std::string& context) {
        cur.need(static_cast<std::size_t>(bank.dim) * 4);
        FeatureVector v(bank.dim);
        for (double& x : v) x = static_cast<double>(cur.f32());
        adopt_vector(v, context);
        return v;
    };

    bank.text_embeddings.reserve(n_classes);
    for (std::uint32_t c = 0; c < n_classes; ++c) {
        bank.text_embeddings.push_back(read_vector(path + ": text embedding " +
                                                   std::to_string(c)));
    }
    bank.samples.reserve(n_samples);
    for (std::uint32_t s = 0; s < n_samples; ++s) {
        const std::string context = path + ": sample " + std::to_string(s);
        const std::uint32_t n_views = cur.u32();
        if (n_views == 0 || n_views > kMaxViews) {
            raise(Err::corrupt_payload,
                  context + ": implausible view count " + std::to_string(n_views));
        }
        const std::uint8_t has_label = cur.u8();
        if (has_label > 1) {
            raise(Err::corrupt_payload, context + ": label-presence byte is " +
                                            std::to_string(has_label));
        }
        const std::int32_t label = cur.i32();
        if (has_label == 1 &&
            (label < 0 || label >= static_cast<std::int32_t>(n_classes))) {
            raise(Err::invalid_bank,
                  context + ": label " + std::to_string(label) + " out of range");
        }
        TestSample sample;
        sample.sample_id = static_cast<std::int64_t>(s);
        sample.true_label = has_label == 1 ? label : -1;
        cur.need(static_cast<std::size_t>(n_views) * bank.dim * 4);
        sample.view_features.reserve(n_views);
        for (std::uint32_t v = 0; v < n_views; ++v) {
            sample.view_features.push_back(
                read_vector(context + ", view " + std::to_string(v)));
        }
        bank.samples.push_back(std::move(sample));
    }
    if (!cur.exhausted()) {
        raise(Err::corrupt_payload, path + ": trailing bytes after sample blocks");
    }

    // Sidecar manifest is optional; without it class names are generated.
    const std::string mpath = manifest_path(path);
    if (std::filesystem::exists(mpath)) {
        std::ifstream mfile(mpath, std::ios::binary);
        if (!mfile) raise(Err::io_failure, "cannot open '" + mpath + "'");
        nlohmann::json manifest;
        try {
            manifest = nlohmann::json::parse(mfile);
        } catch (const nlohmann::json::exception& e) {
            raise(Err::parse_error, mpath + ": " + e.what());
        }
        if (manifest.contains("class_names")) {
            const auto& names = manifest.at("class_names");
            if (!names.is_array() || names.size() != n_classes) {
                raise(Err::invalid_bank,
                      mpath + ": class_names count does not match bank class count");
            }
            for (const auto& name : names) {
                if (!name.is_string()) {
                    raise(Err::invalid_bank, mpath + ": class_names must be strings");
                }
                bank.class_names.push_back(name.get<std::string>());
            }
        }
        if (manifest.contains("source") && manifest.at("source").is_string()) {
            bank.source = manifest.at("source").get<std::string>();
        }
        if (manifest.contains("spec")) {
            bank.spec_json = manifest.at("spec").dump();
        }
    }
    if (bank.class_names.empty()) {
        bank.class_names = default_class_names(n_classes);
    }
    return bank;
}

EmbeddingBank read_csv_bank(const std::string& path) {
    std::ifstream file(path);
    if (!file) raise(Err::io_failure, "cannot open '" + path + "'");

    EmbeddingBank bank;
    bank.source = "csv";
    std::map<std::int32_t, FeatureVector> text_rows;
    std::vector<std::int64_t> sample_order;
    std::map<std::int64_t, std::map<std::int64_t, FeatureVector>> sample_views;
    std::map<std::int64_t, std::int32_t> sample_labels;

    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    const auto fail = [&](const std::string& message) {
        raise(Err::parse_error, path + ":" + std::to_string(line_no) + ": " + message);
    };

    while (std::getline(file, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("kind,", 0) == 0) continue;  // optional header row

        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (fields.size() < 5) fail("expected at least 5 columns");
        if (dim == 0) {
            dim = fields.size() - 4;
        } else if (fields.size() - 4 != dim) {
            fail("row has " + std::to_string(fields.size() - 4) + " floats, expected " +
                 std::to_string(dim));
        }

        const auto parse_int = [&](const std::string& text, const char* what) {
            std::size_t consumed = 0;
            long long v = 0;
            try {
                v = std::stoll(text, &consumed);
            } catch (const std::exception&) {
                fail(std::string("cannot parse ") + what + " '" + text + "'");
            }
            if (consumed != text.size()) {
                fail(std::string("cannot parse ") + what + " '" + text + "'");
            }
            return v;
        };
        FeatureVector values(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            const std::string& text = fields[i + 4];
            std::size_t consumed = 0;
            try {
                values[i] = std::stod(text, &consumed);
            } catch (const std::exception&) {
                fail("cannot parse float '" + text + "'");
            }
            if (consumed != text.size()) fail("cannot parse float '" + text + "'");
        }

        if (fields[0] == "text") {
            const long long class_id = parse_int(fields[1], "class id");
            if (class_id < 0 || class_id > kMaxClasses) fail("class id out of range");
            if (text_rows.count(static_cast<std::int32_t>(class_id)) != 0) {
                fail("duplicate text row for class " + std::to_string(class_id));
            }
            text_rows[static_cast<std::int32_t>(class_id)] = std::move(values);
        } else if (fields[0] == "view") {
            const long long sample_id = parse_int(fields[1], "sample id");
            const long long view_index = parse_int(fields[2], "view index");
            const long long label = parse_int(fields[3], "label");
            if (sample_id < 0) fail("sample id must be nonnegative");
            if (view_index < 0 || view_index > kMaxViews) fail("view index out of range");
            if (label < -1) fail("label must be -1 or a class id");
            auto [it, inserted] =
                sample_views.try_emplace(sample_id);
            if (inserted) sample_order.push_back(sample_id);
            if (!it->second.try_emplace(view_index, std::move(values)).second) {
                fail("duplicate view " + std::to_string(view_index) + " for sample " +
                     std::to_string(sample_id));
            }
            auto [lit, linserted] =
                sample_labels.try_emplace(sample_id, static_cast<std::int32_t>(label));
            if (!linserted && lit->second != static_cast<std::int32_t>(label)) {
                fail("label " + std::to_string(label) + " contradicts earlier label " +
                     std::to_string(lit->second) + " for sample " +
                     std::to_string(sample_id));
            }
        } else {
            fail("unknown kind '" + fields[0] + "' (expected text or view)");
        }
    }
    line_no = 0;  // end-of-file structural errors report without a line number

    if (text_rows.size() < 2) {
        raise(Err::invalid_bank, path + ": need text rows for at least 2 classes");
    }
    const auto n_classes = static_cast<std::int32_t>(text_rows.size());
    for (std::int32_t c = 0; c < n_classes; ++c) {
        if (text_rows.count(c) == 0) {
            raise(Err::invalid_bank, path + ": text rows must cover classes 0.." +
                                         std::to_string(n_classes - 1) + " (missing " +
                                         std::to_string(c) + ")");
        }
    }
    bank.dim = static_cast<std::uint32_t>(dim);
    for (std::int32_t c = 0; c < n_classes; ++c) {
        FeatureVector v = std::move(text_rows.at(c));
        adopt_vector(v, path + ": text embedding " + std::to_string(c));
        bank.text_embeddings.push_back(std::move(v));
    }
    for (const std::int64_t sample_id : sample_order) {
        auto& views = sample_views.at(sample_id);
        const std::string context = path + ": sample " + std::to_string(sample_id);
        TestSample sample;
        sample.sample_id = sample_id;
        sample.true_label = sample_labels.at(sample_id);
        if (sample.true_label >= n_classes) {
            raise(Err::invalid_bank, context + ": label " +
                                         std::to_string(sample.true_label) +
                                         " out of range");
        }
        std::int64_t expected = 0;
        for (auto& [view_index, vec] : views) {
            if (view_index != expected) {
                raise(Err::parse_error, context + ": view indices must be contiguous " +
                                            "from 0 (missing " + std::to_string(expected) +
                                            ")");
            }
            adopt_vector(vec, context + ", view " + std::to_string(view_index));
            sample.view_features.push_back(std::move(vec));
            ++expected;
        }
        bank.samples.push_back(std::move(sample));
    }
    bank.class_names = default_class_names(static_cast<std::size_t>(n_classes));
    return bank;
}

EmbeddingBank generate_synthetic(const SynthSpec& spec) {
    validate_spec(spec);
    SynthRng rng(spec.seed);
    const std::size_t d = spec.dim;
    const std::size_t n_classes = spec.classes;

    // Hub: the shared center the class cone hangs from.
    FeatureVector hub = rng.gaussian_vector(d);
    numkit::l2_normalize_inplace(hub);

    // Class directions: greedy farthest-point picks over seeded candidates on
    // the sphere orthogonal to the hub.  Candidate draws are consumed
    // unconditionally so the schedule is angle-independent.
    constexpr std::size_t kCandidates = 64;
    std::vector<FeatureVector> directions;
    directions.reserve(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::vector<FeatureVector> candidates;
        candidates.reserve(kCandidates);
        for (std::size_t k = 0; k < kCandidates; ++k) {
            candidates.push_back(orthonormal_against(rng.gaussian_vector(d), hub));
        }
        std::size_t best = 0;
        if (!directions.empty()) {
            double best_score = 2.0;  // lower max-cosine wins
            for (std::size_t k = 0; k < kCandidates; ++k) {
                double max_cos = -1.0;
                for (const FeatureVector& e : directions) {
                    max_cos = std::max(max_cos, numkit::dot(candidates[k], e));
                }
                if (max_cos < best_score) {
                    best_score = max_cos;
                    best = k;
                }
            }
        }
        directions.push_back(std::move(candidates[best]));
    }

    const double cos_sep = std::cos(spec.class_separation);
    const double sin_sep = std::sin(spec.class_separation);
    std::vector<FeatureVector> means;
    means.reserve(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
        FeatureVector mu(d);
        for (std::size_t i = 0; i < d; ++i) {
            mu[i] = cos_sep * hub[i] + sin_sep * directions[c][i];
        }
        means.push_back(std::move(mu));
    }

    EmbeddingBank bank;
    bank.dim = spec.dim;
    bank.source = "synthetic";
    bank.spec_json = synth_spec_to_json(spec);
    bank.class_names = default_class_names(n_classes);

    // Text embeddings: each class mean rotated by text_offset within its own
    // seeded random 2-plane (cross-modal misalignment).
    const double cos_off = std::cos(spec.text_offset);
    const double sin_off = std::sin(spec.text_offset);
    for (std::size_t c = 0; c < n_classes; ++c) {
        const FeatureVector plane = orthonormal_against(rng.gaussian_vector(d), means[c]);
        FeatureVector t(d);
        for (std::size_t i = 0; i < d; ++i) {
            t[i] = cos_off * means[c][i] + sin_off * plane[i];
        }
        bank.text_embeddings.push_back(std::move(t));
    }

    // Domain shift: every image feature is rotated by drift_angle toward one
    // shared random direction, so the whole image domain moves coherently
    // while the text embeddings stay put.  (A rotation within a single fixed
    // plane would leave class margins untouched at high dimension: it only
    // perturbs the two-dimensional projection every class shares.)
    FeatureVector drift_target = rng.gaussian_vector(d);
    numkit::l2_normalize_inplace(drift_target);
    const double cos_drift = std::cos(spec.drift_angle);
    const double sin_drift = std::sin(spec.drift_angle);
    const auto rotate_drift = [&](const FeatureVector& x) {
        const FeatureVector axis = orthonormal_against(drift_target, x);
        FeatureVector out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            out[i] = cos_drift * x[i] + sin_drift * axis[i];
        }
        return out;
    };

    bank.samples.reserve(static_cast<std::size_t>(n_classes) * spec.n_per_class);
    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::uint32_t k = 0; k < spec.n_per_class; ++k) {
            FeatureVector s = rng.gaussian_vector(d);
            for (std::size_t i = 0; i < d; ++i) {
                s[i] = means[c][i] + spec.sample_noise * s[i];
            }
            numkit::l2_normalize_inplace(s);
            const FeatureVector x = rotate_drift(s);

            TestSample sample;
            sample.sample_id = 0;  // assigned after the shuffle
            sample.true_label = static_cast<std::int32_t>(c);
            sample.view_features.reserve(spec.views);
            sample.view_features.push_back(x);  // view 0: the original
            for (std::uint32_t v = 1; v < spec.views; ++v) {
                FeatureVector jitter = rng.gaussian_vector(d);
                for (std::size_t i = 0; i < d; ++i) {
                    jitter[i] = x[i] + spec.view_noise * jitter[i];
                }
                numkit::l2_normalize_inplace(jitter);
                sample.view_features.push_back(std::move(jitter));
            }
            bank.samples.push_back(std::move(sample));
        }
    }

    // Seeded Fisher-Yates so the stream interleaves classes.
    for (std::size_t i = bank.samples.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(bank.samples[i - 1], bank.samples[j]);
    }
    // Ids follow stream order so persisted banks round-trip exactly.
    for (std::size_t i = 0; i < bank.samples.size(); ++i) {
        bank.samples[i].sample_id = static_cast<std::int64_t>(i);
    }
    return bank;
}

EmbeddingBank snapshot_from_prototypes(const PrototypeBank& bank,
                                       const std::vector<std::string>& class_names) {
    if (bank.num_classes() < 2) {
        raise(Err::uninitialized_bank, "snapshot: prototype bank is empty");
    }
    EmbeddingBank out;
    out.dim = static_cast<std::uint32_t>(bank.dim());
    out.source = "checkpoint";
    out.class_names = class_names.size() == bank.num_classes()
                          ? class_names
                          : default_class_names(bank.num_classes());
    out.text_embeddings = bank.prototypes;
    std::int64_t next_id = 0;
    for (const ClassCache& cache : bank.caches) {
        for (const CacheEntry& entry : cache.entries) {
            TestSample sample;
            sample.sample_id = next_id++;
            sample.true_label = cache.class_id;
            sample.view_features.push_back(entry.feature);
            out.samples.push_back(std::move(sample));
        }
    }
    return out;
}

}  // namespace bpre
