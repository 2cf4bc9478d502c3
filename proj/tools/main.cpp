// bpre command-line front end: run adaptation streams, generate synthetic
// banks, sweep parameters, and emit ablation tables.  Talks to the engine
// exclusively through the C API in bpre.h.
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "bpre.h"
#include "json.hpp"

namespace {

constexpr const char* kConfigKeys[] = {
    "tau-clip",      "rho",        "view-entropy-gate", "entropy-threshold",
    "cache-capacity", "momentum",  "tau",               "update-period",
    "counter-mode",  "alpha",      "beta",              "fusion",
    "lambda-sim",    "lambda-conf", "lambda-div",       "r-min",
    "warmup-steps",  "warmup-schedule", "similarity-scope", "memory-capacity",
};

using ConfigPtr = std::unique_ptr<bpre_config, decltype(&bpre_config_destroy)>;
using BankPtr = std::unique_ptr<bpre_bank, decltype(&bpre_bank_destroy)>;
using ReportPtr = std::unique_ptr<bpre_report, decltype(&bpre_report_destroy)>;

struct OwnedString {
    explicit OwnedString(char* text) : text_(text) {}
    ~OwnedString() { bpre_string_free(text_); }
    OwnedString(const OwnedString&) = delete;
    OwnedString& operator=(const OwnedString&) = delete;
    const char* get() const { return text_ == nullptr ? "" : text_; }
    bool ok() const { return text_ != nullptr; }

  private:
    char* text_;
};

struct ConfigArgs {
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> overrides;  // flag order
};

void attach_config_flags(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.config_file,
                    "JSON file of engine settings (flags override it)");
    for (const char* key : kConfigKeys) {
        cmd->add_option_function<std::string>(
            std::string("--") + key,
            [&args, key](const std::string& value) {
                args.overrides.emplace_back(key, value);
            },
            "Set " + std::string(key));
    }
}

int fail(bpre_status status) {
    std::fprintf(stderr, "error: %s\n", bpre_last_error());
    return static_cast<int>(status);
}

int fail_message(bpre_status status, const std::string& message) {
    std::fprintf(stderr, "error: %s\n", message.c_str());
    return static_cast<int>(status);
}

// Builds a validated config from file + flag overrides; returns nullptr and
// sets *exit_code on failure.
ConfigPtr build_config(const ConfigArgs& args, bool baseline_zero_shot,
                       int* exit_code) {
    ConfigPtr config(bpre_config_create(), &bpre_config_destroy);
    if (!args.config_file.empty()) {
        if (const bpre_status st = bpre_config_load_file(config.get(),
                                                         args.config_file.c_str())) {
            *exit_code = fail(st);
            return ConfigPtr(nullptr, &bpre_config_destroy);
        }
    }
    for (const auto& [key, value] : args.overrides) {
        if (const bpre_status st =
                bpre_config_set(config.get(), key.c_str(), value.c_str())) {
            *exit_code = fail(st);
            return ConfigPtr(nullptr, &bpre_config_destroy);
        }
    }
    if (baseline_zero_shot) {
        bpre_config_set(config.get(), "alpha", "0");
        bpre_config_set(config.get(), "update-period", "0");
    }
    if (const bpre_status st = bpre_config_validate(config.get())) {
        *exit_code = fail(st);
        return ConfigPtr(nullptr, &bpre_config_destroy);
    }
    return config;
}

BankPtr open_bank(const std::string& path, int* exit_code) {
    bpre_bank* raw = nullptr;
    const bpre_status st = path.size() > 4 && path.substr(path.size() - 4) == ".csv"
                               ? bpre_bank_open_csv(path.c_str(), &raw)
                               : bpre_bank_open(path.c_str(), &raw);
    if (st != BPRE_OK) {
        *exit_code = fail(st);
        return BankPtr(nullptr, &bpre_bank_destroy);
    }
    return BankPtr(raw, &bpre_bank_destroy);
}

bool write_text_file(const std::string& path, const std::string& content,
                     int* exit_code) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        *exit_code = fail_message(BPRE_ERR_IO, "cannot open '" + path + "' for writing");
        return false;
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        *exit_code = fail_message(BPRE_ERR_IO, "write failure on '" + path + "'");
        return false;
    }
    return true;
}

struct RunArgs {
    std::string bank_path;
    ConfigArgs config;
    std::string baseline;
    std::string json_path;
    std::string records_path;
    std::string checkpoint_path;
    bool seed_report = false;
};

int do_run(const RunArgs& args) {
    int exit_code = 0;
    ConfigPtr config = build_config(args.config, args.baseline == "zero-shot",
                                    &exit_code);
    if (!config) return exit_code;
    BankPtr bank = open_bank(args.bank_path, &exit_code);
    if (!bank) return exit_code;

    const bool keep_records = !args.records_path.empty();
    bpre_report* raw = nullptr;
    if (const bpre_status st =
            bpre_run(bank.get(), config.get(), keep_records ? 1 : 0, &raw)) {
        return fail(st);
    }
    ReportPtr report(raw, &bpre_report_destroy);

    if (!args.checkpoint_path.empty()) {
        if (const bpre_status st = bpre_report_checkpoint(report.get(), bank.get(),
                                                          args.checkpoint_path.c_str())) {
            return fail(st);
        }
    }
    if (keep_records) {
        OwnedString csv(bpre_report_records_csv(report.get()));
        if (!csv.ok()) return fail(BPRE_ERR_STATE);
        if (!write_text_file(args.records_path, csv.get(), &exit_code)) return exit_code;
    }
    if (!args.json_path.empty()) {
        OwnedString json(bpre_report_json(report.get(), 1));
        if (!write_text_file(args.json_path, std::string(json.get()) + "\n", &exit_code)) {
            return exit_code;
        }
    }

    if (args.seed_report) {
        OwnedString json(bpre_report_json(report.get(), 0));
        std::fputs(json.get(), stdout);
        std::fputc('\n', stdout);
        return 0;
    }
    std::printf("samples: %llu (labeled %llu)\n",
                static_cast<unsigned long long>(bpre_bank_samples(bank.get())),
                static_cast<unsigned long long>(bpre_bank_labeled(bank.get())));
    if (bpre_report_has_accuracy(report.get())) {
        std::printf("accuracy: %.6f\n", bpre_report_accuracy(report.get()));
    }
    OwnedString json(bpre_report_json(report.get(), 1));
    const nlohmann::json j = nlohmann::json::parse(json.get());
    const auto& counts = j.at("counts");
    std::printf("admissions: %llu  evictions: %llu  prototype updates: %llu\n",
                counts.at("admissions").get<unsigned long long>(),
                counts.at("evictions").get<unsigned long long>(),
                counts.at("prototype_updates").get<unsigned long long>());
    std::printf("wall time: %.3f s\n", j.at("wall_time").get<double>());
    return 0;
}

struct SynthArgs {
    std::string out_path;
    std::uint32_t classes = 10;
    std::uint32_t dim = 64;
    std::uint32_t per_class = 100;
    std::uint32_t views = 8;
    double separation = 0.5;
    double sample_noise = 0.05;
    double view_noise = 0.02;
    double text_offset = 0.0;
    double drift = 0.0;
    std::uint64_t seed = 0;
};

int do_synth(const SynthArgs& args) {
    nlohmann::json spec;
    spec["classes"] = args.classes;
    spec["dim"] = args.dim;
    spec["n_per_class"] = args.per_class;
    spec["views"] = args.views;
    spec["class_separation"] = args.separation;
    spec["sample_noise"] = args.sample_noise;
    spec["view_noise"] = args.view_noise;
    spec["text_offset"] = args.text_offset;
    spec["drift_angle"] = args.drift;
    spec["seed"] = args.seed;

    bpre_bank* raw = nullptr;
    if (const bpre_status st = bpre_bank_generate(spec.dump().c_str(), &raw)) {
        return fail(st);
    }
    BankPtr bank(raw, &bpre_bank_destroy);
    uint64_t bytes = 0;
    if (const bpre_status st = bpre_bank_write(bank.get(), args.out_path.c_str(),
                                               &bytes)) {
        return fail(st);
    }

    // Zero-shot preview: adaptation disabled.
    ConfigPtr preview(bpre_config_create(), &bpre_config_destroy);
    bpre_config_set(preview.get(), "alpha", "0");
    bpre_config_set(preview.get(), "update-period", "0");
    bpre_report* preview_raw = nullptr;
    if (const bpre_status st = bpre_run(bank.get(), preview.get(), 0, &preview_raw)) {
        return fail(st);
    }
    ReportPtr preview_report(preview_raw, &bpre_report_destroy);

    std::printf("wrote %s (%llu bytes)\n", args.out_path.c_str(),
                static_cast<unsigned long long>(bytes));
    std::printf("classes: %u  dim: %u  samples: %llu  views: %u\n", args.classes,
                args.dim, static_cast<unsigned long long>(bpre_bank_samples(bank.get())),
                args.views);
    std::printf("zero-shot accuracy preview: %.6f\n",
                bpre_report_accuracy(preview_report.get()));
    return 0;
}

struct AblateArgs {
    std::string bank_path;
    ConfigArgs config;
    std::string format = "markdown";
    std::string out_path;
};

int do_ablate(const AblateArgs& args) {
    int exit_code = 0;
    ConfigPtr config = build_config(args.config, false, &exit_code);
    if (!config) return exit_code;
    BankPtr bank = open_bank(args.bank_path, &exit_code);
    if (!bank) return exit_code;
    if (bpre_bank_labeled(bank.get()) == 0) {
        return fail_message(BPRE_ERR_NO_LABELS,
                            "'" + args.bank_path + "' has no labels; ablation needs them");
    }

    struct MaskRow {
        const char* name;
        int sim, conf, div;
    };
    constexpr MaskRow kMasks[] = {
        {"sim", 1, 0, 0},          {"conf", 0, 1, 0},        {"div", 0, 0, 1},
        {"sim+conf", 1, 1, 0},     {"sim+div", 1, 0, 1},     {"conf+div", 0, 1, 1},
        {"sim+conf+div", 1, 1, 1},
    };

    std::string csv = "mask,accuracy\n";
    std::string markdown = "| mask | accuracy |\n| --- | --- |\n";
    for (const MaskRow& row : kMasks) {
        bpre_report* raw = nullptr;
        if (const bpre_status st = bpre_run_masked(bank.get(), config.get(), row.sim,
                                                   row.conf, row.div, 0, &raw)) {
            return fail(st);
        }
        ReportPtr report(raw, &bpre_report_destroy);
        char value[40];
        std::snprintf(value, sizeof(value), "%.17g", bpre_report_accuracy(report.get()));
        csv += std::string(row.name) + "," + value + "\n";
        char pretty[40];
        std::snprintf(pretty, sizeof(pretty), "%.4f", bpre_report_accuracy(report.get()));
        markdown += std::string("| ") + row.name + " | " + pretty + " |\n";
    }

    const std::string& body = args.format == "csv" ? csv : markdown;
    if (!args.out_path.empty()) {
        if (!write_text_file(args.out_path, body, &exit_code)) return exit_code;
        return 0;
    }
    std::fputs(body.c_str(), stdout);
    return 0;
}

struct SweepArgs {
    std::string bank_path;
    ConfigArgs config;
    std::string param;
    std::string grid;
    std::string out_path;
};

int do_sweep(const SweepArgs& args) {
    std::vector<std::string> values;
    std::size_t start = 0;
    while (start <= args.grid.size()) {
        const std::size_t comma = args.grid.find(',', start);
        const std::string token =
            args.grid.substr(start, comma == std::string::npos ? std::string::npos
                                                               : comma - start);
        if (!token.empty()) values.push_back(token);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (values.empty()) {
        return fail_message(BPRE_ERR_CONFIG, "sweep grid is empty");
    }

    int exit_code = 0;
    BankPtr bank = open_bank(args.bank_path, &exit_code);
    if (!bank) return exit_code;
    if (bpre_bank_labeled(bank.get()) == 0) {
        return fail_message(BPRE_ERR_NO_LABELS,
                            "'" + args.bank_path + "' has no labels; sweeps need them");
    }

    std::string csv = "value,accuracy\n";
    for (const std::string& value : values) {
        ConfigArgs point = args.config;
        point.overrides.emplace_back(args.param, value);
        ConfigPtr config = build_config(point, false, &exit_code);
        if (!config) return exit_code;
        bpre_report* raw = nullptr;
        if (const bpre_status st = bpre_run(bank.get(), config.get(), 0, &raw)) {
            return fail(st);
        }
        ReportPtr report(raw, &bpre_report_destroy);
        char accuracy[40];
        std::snprintf(accuracy, sizeof(accuracy), "%.17g",
                      bpre_report_accuracy(report.get()));
        csv += value + "," + accuracy + "\n";
    }

    if (!args.out_path.empty()) {
        if (!write_text_file(args.out_path, csv, &exit_code)) return exit_code;
        return 0;
    }
    std::fputs(csv.c_str(), stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bpre: streaming prototype-evolution classifier over embedding banks"};
    app.set_version_flag("--version", std::string(bpre_version()));
    app.require_subcommand(1);

    RunArgs run_args;
    CLI::App* run_cmd = app.add_subcommand("run", "Adapt over a bank's sample stream");
    run_cmd->add_option("bank", run_args.bank_path, "Embedding bank (.bpre or .csv)")
        ->required();
    attach_config_flags(run_cmd, run_args.config);
    run_cmd->add_option("--baseline", run_args.baseline,
                        "Disable adaptation ('zero-shot')")
        ->check(CLI::IsMember({"zero-shot"}));
    run_cmd->add_option("--json", run_args.json_path, "Write the full report JSON here");
    run_cmd->add_option("--records", run_args.records_path,
                        "Write per-sample records CSV here");
    run_cmd->add_option("--checkpoint-out", run_args.checkpoint_path,
                        "Write the adapted prototype state as a bank");
    run_cmd->add_flag("--seed-report", run_args.seed_report,
                      "Print canonical JSON (no wall time) for replay comparison");

    SynthArgs synth_args;
    CLI::App* synth_cmd =
        app.add_subcommand("synth", "Generate a synthetic domain-shift bank");
    synth_cmd->add_option("-o,--out", synth_args.out_path, "Output bank path")
        ->required();
    synth_cmd->add_option("--classes", synth_args.classes, "Class count");
    synth_cmd->add_option("--dim", synth_args.dim, "Embedding dimension");
    synth_cmd->add_option("--per-class", synth_args.per_class, "Samples per class");
    synth_cmd->add_option("--views", synth_args.views, "Views per sample");
    synth_cmd->add_option("--separation", synth_args.separation,
                          "Angular spread of class means (radians)");
    synth_cmd->add_option("--sample-noise", synth_args.sample_noise,
                          "Per-sample jitter scale");
    synth_cmd->add_option("--view-noise", synth_args.view_noise,
                          "Per-view jitter scale");
    synth_cmd->add_option("--text-offset", synth_args.text_offset,
                          "Text-image misalignment angle (radians)");
    synth_cmd->add_option("--drift", synth_args.drift,
                          "Image-side domain shift angle (radians)");
    synth_cmd->add_option("--seed", synth_args.seed, "Generator seed");

    AblateArgs ablate_args;
    CLI::App* ablate_cmd =
        app.add_subcommand("ablate", "Accuracy for every reward component mask");
    ablate_cmd->add_option("bank", ablate_args.bank_path, "Labeled embedding bank")
        ->required();
    attach_config_flags(ablate_cmd, ablate_args.config);
    ablate_cmd->add_option("--format", ablate_args.format, "Output format")
        ->check(CLI::IsMember({"csv", "markdown"}));
    ablate_cmd->add_option("--out", ablate_args.out_path, "Write the table here");

    SweepArgs sweep_args;
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "Accuracy across a one-parameter grid");
    sweep_cmd->add_option("bank", sweep_args.bank_path, "Labeled embedding bank")
        ->required();
    attach_config_flags(sweep_cmd, sweep_args.config);
    sweep_cmd->add_option("--param", sweep_args.param, "Config key to sweep")
        ->required();
    sweep_cmd->add_option("--grid", sweep_args.grid, "Comma-separated values")
        ->required();
    sweep_cmd->add_option("--out", sweep_args.out_path, "Write the CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the usage message
        return static_cast<int>(BPRE_ERR_CONFIG);
    }

    if (run_cmd->parsed()) return do_run(run_args);
    if (synth_cmd->parsed()) return do_synth(synth_args);
    if (ablate_cmd->parsed()) return do_ablate(ablate_args);
    if (sweep_cmd->parsed()) return do_sweep(sweep_args);
    return static_cast<int>(BPRE_ERR_CONFIG);
}
