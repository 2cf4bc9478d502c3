#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "bpre.h"

namespace {

constexpr const char* kTinySpec =
    R"({"classes": 3, "dim": 8, "n_per_class": 5, "views": 2, "seed": 12})";

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() {
        std::remove(path.c_str());
        std::remove((path + ".json").c_str());
    }
};

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

// Ownership helpers so failures don't leak handles across assertions.
struct Bank {
    bpre_bank* h = nullptr;
    ~Bank() { bpre_bank_destroy(h); }
};
struct Config {
    bpre_config* h = bpre_config_create();
    ~Config() { bpre_config_destroy(h); }
};
struct Report {
    bpre_report* h = nullptr;
    ~Report() { bpre_report_destroy(h); }
};
struct Str {
    char* s = nullptr;
    ~Str() { bpre_string_free(s); }
};

}  // namespace

TEST_CASE("status codes are part of the ABI") {
    CHECK(BPRE_OK == 0);
    CHECK(BPRE_ERR_UNKNOWN == 1);
    CHECK(BPRE_ERR_IO == 2);
    CHECK(BPRE_ERR_FORMAT == 3);
    CHECK(BPRE_ERR_CONFIG == 4);
    CHECK(BPRE_ERR_NO_LABELS == 5);
    CHECK(BPRE_ERR_DIMENSION == 6);
    CHECK(BPRE_ERR_DOMAIN == 7);
    CHECK(BPRE_ERR_STATE == 8);
}

TEST_CASE("version and last_error are always readable") {
    REQUIRE(bpre_version() != nullptr);
    CHECK(std::string(bpre_version()) == "1.0.0");
    REQUIRE(bpre_last_error() != nullptr);
}

TEST_CASE("config handles set, validate, and serialize") {
    Config config;
    REQUIRE(config.h != nullptr);
    CHECK(bpre_config_set(config.h, "tau-clip", "0.02") == BPRE_OK);
    CHECK(bpre_config_set(config.h, "update_period", "25") == BPRE_OK);
    CHECK(bpre_config_set(config.h, "M", "6") == BPRE_OK);
    CHECK(bpre_config_validate(config.h) == BPRE_OK);
    CHECK(std::string(bpre_last_error()) == "ok");

    Str json{bpre_config_json(config.h)};
    REQUIRE(json.s != nullptr);
    const std::string text = json.s;
    CHECK(text.find("\"tau-clip\": 0.02") != std::string::npos);
    CHECK(text.find("\"update-period\": 25") != std::string::npos);
    CHECK(text.find("\"memory-capacity\": 6") != std::string::npos);

    CHECK(bpre_config_set(config.h, "no-such-knob", "1") == BPRE_ERR_CONFIG);
    CHECK(std::string(bpre_last_error()).find("no-such-knob") != std::string::npos);
    CHECK(bpre_config_set(config.h, "alpha", "soon") == BPRE_ERR_CONFIG);
    CHECK(bpre_config_set(config.h, "cache-capacity", "0") == BPRE_OK);
    CHECK(bpre_config_validate(config.h) == BPRE_ERR_CONFIG);
}

TEST_CASE("config files load through the C surface") {
    Config config;
    TempFile tmp("tcapi_config.json");
    write_file(tmp.path, R"({"alpha": 2.0, "counter-mode": "global"})");
    CHECK(bpre_config_load_file(config.h, tmp.path.c_str()) == BPRE_OK);
    Str json{bpre_config_json(config.h)};
    CHECK(std::string(json.s).find("\"alpha\": 2.0") != std::string::npos);
    CHECK(std::string(json.s).find("\"counter-mode\": \"global\"") !=
          std::string::npos);

    CHECK(bpre_config_load_file(config.h, "tcapi_missing.json") == BPRE_ERR_IO);
}

TEST_CASE("null arguments are reported, not dereferenced") {
    CHECK(bpre_config_set(nullptr, "alpha", "1") == BPRE_ERR_STATE);
    CHECK(std::string(bpre_last_error()).find("null") != std::string::npos);
    CHECK(bpre_config_json(nullptr) == nullptr);
    CHECK(bpre_config_validate(nullptr) == BPRE_ERR_STATE);
    CHECK(bpre_bank_open(nullptr, nullptr) == BPRE_ERR_STATE);
    CHECK(bpre_bank_dim(nullptr) == 0);
    CHECK(bpre_bank_classes(nullptr) == 0);
    CHECK(bpre_bank_samples(nullptr) == 0);
    CHECK(bpre_bank_class_name(nullptr, 0) == nullptr);
    CHECK(bpre_report_json(nullptr, 0) == nullptr);
    CHECK(bpre_report_has_accuracy(nullptr) == 0);
    CHECK(bpre_report_accuracy(nullptr) == -1.0);
    CHECK(bpre_engine_steps(nullptr) == 0);
    bpre_bank_destroy(nullptr);
    bpre_report_destroy(nullptr);
    bpre_engine_destroy(nullptr);
    bpre_config_destroy(nullptr);
    bpre_string_free(nullptr);
}

TEST_CASE("banks generate with accessors") {
    Bank bank;
    REQUIRE(bpre_bank_generate(kTinySpec, &bank.h) == BPRE_OK);
    CHECK(bpre_bank_dim(bank.h) == 8);
    CHECK(bpre_bank_classes(bank.h) == 3);
    CHECK(bpre_bank_samples(bank.h) == 15);
    CHECK(bpre_bank_labeled(bank.h) == 15);
    REQUIRE(bpre_bank_class_name(bank.h, 0) != nullptr);
    CHECK(std::string(bpre_bank_class_name(bank.h, 0)) == "class_0");
    CHECK(bpre_bank_class_name(bank.h, 99) == nullptr);

    bpre_bank* bad = nullptr;
    CHECK(bpre_bank_generate("{oops", &bad) == BPRE_ERR_CONFIG);
    CHECK(bad == nullptr);
    CHECK(bpre_bank_generate(R"({"classes": 1})", &bad) == BPRE_ERR_CONFIG);
    CHECK(bad == nullptr);
}

TEST_CASE("banks write and reopen") {
    Bank bank;
    REQUIRE(bpre_bank_generate(kTinySpec, &bank.h) == BPRE_OK);
    TempFile tmp("tcapi_bank.bpre");
    uint64_t bytes = 0;
    REQUIRE(bpre_bank_write(bank.h, tmp.path.c_str(), &bytes) == BPRE_OK);
    CHECK(bytes > 24);

    Bank reopened;
    REQUIRE(bpre_bank_open(tmp.path.c_str(), &reopened.h) == BPRE_OK);
    CHECK(bpre_bank_dim(reopened.h) == 8);
    CHECK(bpre_bank_classes(reopened.h) == 3);
    CHECK(bpre_bank_samples(reopened.h) == 15);

    bpre_bank* bad = nullptr;
    CHECK(bpre_bank_open("tcapi_missing.bpre", &bad) == BPRE_ERR_IO);
    TempFile junk("tcapi_junk.bpre");
    write_file(junk.path, "this is not a bank");
    CHECK(bpre_bank_open(junk.path.c_str(), &bad) == BPRE_ERR_FORMAT);
}

TEST_CASE("CSV banks load through the C surface") {
    TempFile tmp("tcapi_bank.csv");
    write_file(tmp.path,
               "text,0,0,-1,1,0,0\n"
               "text,1,0,-1,0,1,0\n"
               "view,0,0,0,1,0,0\n"
               "view,1,0,1,0,1,0\n");
    Bank bank;
    REQUIRE(bpre_bank_open_csv(tmp.path.c_str(), &bank.h) == BPRE_OK);
    CHECK(bpre_bank_dim(bank.h) == 3);
    CHECK(bpre_bank_samples(bank.h) == 2);

    TempFile bad("tcapi_bad.csv");
    write_file(bad.path, "text,0,0,-1,1,0,0\n");
    bpre_bank* none = nullptr;
    CHECK(bpre_bank_open_csv(bad.path.c_str(), &none) == BPRE_ERR_FORMAT);
}

TEST_CASE("runs produce reports with canonical JSON") {
    Bank bank;
    REQUIRE(bpre_bank_generate(kTinySpec, &bank.h) == BPRE_OK);
    Config config;

    Report report;
    REQUIRE(bpre_run(bank.h, config.h, 0, &report.h) == BPRE_OK);
    CHECK(bpre_report_has_accuracy(report.h) == 1);
    const double accuracy = bpre_report_accuracy(report.h);
    CHECK(accuracy >= 0.0);
    CHECK(accuracy <= 1.0);
    CHECK(bpre_report_peak_state_scalars(report.h) > 0);
    CHECK(bpre_report_peak_scratch_scalars(report.h) > 0);

    Str first{bpre_report_json(report.h, 0)};
    REQUIRE(first.s != nullptr);
    Report again;
    REQUIRE(bpre_run(bank.h, config.h, 0, &again.h) == BPRE_OK);
    Str second{bpre_report_json(again.h, 0)};
    CHECK(std::string(first.s) == std::string(second.s));

    Str timed{bpre_report_json(report.h, 1)};
    CHECK(std::string(timed.s).find("wall_time") != std::string::npos);
    CHECK(std::string(first.s).find("wall_time") == std::string::npos);

    // Records require opting in at run time.
    CHECK(bpre_report_records_csv(report.h) == nullptr);
    CHECK(std::string(bpre_last_error()).find("records") != std::string::npos);
    Report kept;
    REQUIRE(bpre_run(bank.h, config.h, 1, &kept.h) == BPRE_OK);
    Str csv{bpre_report_records_csv(kept.h)};
    REQUIRE(csv.s != nullptr);
    CHECK(std::string(csv.s).rfind("sample_id,predicted,correct", 0) == 0);
}

TEST_CASE("invalid configs and empty banks fail to run") {
    Bank bank;
    REQUIRE(bpre_bank_generate(kTinySpec, &bank.h) == BPRE_OK);
    Config config;
    REQUIRE(bpre_config_set(config.h, "rho", "0") == BPRE_OK);
    bpre_report* out = nullptr;
    CHECK(bpre_run(bank.h, config.h, 0, &out) == BPRE_ERR_CONFIG);
    CHECK(out == nullptr);

    TempFile tmp("tcapi_empty.csv");
    write_file(tmp.path,
               "text,0,0,-1,1,0,0\n"
               "text,1,0,-1,0,1,0\n");
    Bank empty;
    REQUIRE(bpre_bank_open_csv(tmp.path.c_str(), &empty.h) == BPRE_OK);
    Config defaults;
    CHECK(bpre_run(empty.h, defaults.h, 0, &out) == BPRE_ERR_STATE);
}

TEST_CASE("masked runs disable components and reject the empty mask") {
    Bank bank;
    REQUIRE(bpre_bank_generate(kTinySpec, &bank.h) == BPRE_OK);
    Config config;

    Report sim_only;
    REQUIRE(bpre_run_masked(bank.h, config.h, 1, 0, 0, 0, &sim_only.h) == BPRE_OK);
    Str json{bpre_report_json(sim_only.h, 0)};
    CHECK(std::string(json.s).find("\"lambda-conf\": 0.0") != std::string::npos);
    CHECK(std::string(json.s).find("\"lambda-div\": 0.0") != std::string::npos);

    bpre_report* out = nullptr;
    CHECK(bpre_run_masked(bank.h, config.h, 0, 0, 0, 0, &out) == BPRE_ERR_CONFIG);
    CHECK(out == nullptr);
}

TEST_CASE("checkpoints persist the adapted state") {
    Bank bank;
    REQUIRE(bpre_bank_generate(kTinySpec, &bank.h) == BPRE_OK);
    Config config;
    Report report;
    REQUIRE(bpre_run(bank.h, config.h, 0, &report.h) == BPRE_OK);

    TempFile tmp("tcapi_checkpoint.bpre");
    REQUIRE(bpre_report_checkpoint(report.h, bank.h, tmp.path.c_str()) == BPRE_OK);
    Bank resumed;
    REQUIRE(bpre_bank_open(tmp.path.c_str(), &resumed.h) == BPRE_OK);
    CHECK(bpre_bank_classes(resumed.h) == bpre_bank_classes(bank.h));
    CHECK(bpre_bank_dim(resumed.h) == bpre_bank_dim(bank.h));
    CHECK(bpre_bank_labeled(resumed.h) == bpre_bank_samples(resumed.h));
    CHECK(std::string(bpre_bank_class_name(resumed.h, 0)) == "class_0");
}

TEST_CASE("the streaming engine steps one sample at a time") {
    Bank bank;
    REQUIRE(bpre_bank_generate(kTinySpec, &bank.h) == BPRE_OK);
    Config config;
    bpre_engine* raw = nullptr;
    REQUIRE(bpre_engine_create(bank.h, config.h, &raw) == BPRE_OK);

    const uint32_t dim = bpre_bank_dim(bank.h);
    std::vector<double> views(2 * dim, 0.0);
    views[0] = 1.0;        // view 0: e0
    views[dim] = 1.0;      // view 1: e0 again
    int32_t predicted = -1;
    double r_final = -1.0;
    CHECK(bpre_engine_step(raw, views.data(), 2, 0, &predicted, &r_final) == BPRE_OK);
    CHECK(predicted >= 0);
    CHECK(predicted < 3);
    CHECK(r_final == 0.1);  // first step sits on the warmup floor
    CHECK(bpre_engine_steps(raw) == 1);
    CHECK(bpre_engine_state_scalars(raw) > 0);
    CHECK(bpre_engine_peak_state_scalars(raw) >= bpre_engine_state_scalars(raw));

    CHECK(bpre_engine_step(raw, views.data(), 2, 1, &predicted, nullptr) == BPRE_OK);
    CHECK(bpre_engine_steps(raw) == 2);

    CHECK(bpre_engine_step(raw, nullptr, 2, 2, &predicted, nullptr) ==
          BPRE_ERR_STATE);
    CHECK(bpre_engine_step(raw, views.data(), 0, 2, &predicted, nullptr) ==
          BPRE_ERR_STATE);
    bpre_engine_destroy(raw);
}

TEST_CASE("unlabeled runs report no accuracy") {
    TempFile tmp("tcapi_unlabeled.csv");
    write_file(tmp.path,
               "text,0,0,-1,1,0,0\n"
               "text,1,0,-1,0,1,0\n"
               "view,0,0,-1,1,0,0\n"
               "view,1,0,-1,0,1,0\n");
    Bank bank;
    REQUIRE(bpre_bank_open_csv(tmp.path.c_str(), &bank.h) == BPRE_OK);
    CHECK(bpre_bank_labeled(bank.h) == 0);
    Config config;
    Report report;
    REQUIRE(bpre_run(bank.h, config.h, 0, &report.h) == BPRE_OK);
    CHECK(bpre_report_has_accuracy(report.h) == 0);
    CHECK(bpre_report_accuracy(report.h) == -1.0);
}
