// posverify: calibrate theta tables and run position-verification experiments.
//
//   posverify theta --n 100 --noise-mode significant --samples 25x20 --seed 7
//   posverify run --preset neg-noise-52 --trials 100 --report out.csv --format csv
//   posverify run --config exp.json --report out.json --format json
//   posverify sweep --preset sig-noise-62 --n0-min 55 --n0-max 70 --trials 20 --out curve.csv

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "posverify/harness.hpp"
#include "posverify/serialization.hpp"

namespace pv = posverify;

namespace {

pv::Regiond parse_region(const std::string& s)
{
    double a = 0, b = 0, c = 0, d = 0;
    if (std::sscanf(s.c_str(), "%lf,%lf,%lf,%lf", &a, &b, &c, &d) == 4) {
        return pv::Regiond::make(a, b, c, d);
    }
    if (std::sscanf(s.c_str(), "%lfx%lf", &a, &b) == 2) {
        return pv::Regiond::make(0.0, a, 0.0, b);
    }
    throw std::invalid_argument("--region expects WxH or x_min,x_max,y_min,y_max");
}

void parse_samples(const std::string& s, int& num_x0, int& per_x0)
{
    if (std::sscanf(s.c_str(), "%dx%d", &num_x0, &per_x0) != 2 || num_x0 < 1 || per_x0 < 1) {
        throw std::invalid_argument("--samples expects <x0 draws>x<layouts per x0>, e.g. 25x20");
    }
}

void apply_noise_mode(pv::ExperimentConfig& c, const std::string& mode)
{
    if (mode == "negligible") {
        c.noise_mode = pv::NoiseMode::Negligible;
    } else if (mode == "significant") {
        c.noise_mode = pv::NoiseMode::Significant;
    } else {
        c.noise_mode = pv::NoiseMode::Explicit;
        c.explicit_sigma = std::stod(mode);
    }
}

pv::ExperimentConfig load_config(const std::string& config_path, const std::string& preset_name)
{
    if (!config_path.empty() && !preset_name.empty()) {
        throw std::invalid_argument("use either --config or --preset, not both");
    }
    if (!preset_name.empty()) {
        return pv::preset(preset_name);
    }
    if (config_path.empty()) {
        throw std::invalid_argument("one of --config or --preset is required");
    }
    try {
        return nlohmann::json::parse(pv::read_text_file(config_path)).get<pv::ExperimentConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("bad config " + config_path + ": " + e.what());
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Position verification for wireless sensor networks in noisy channels"};
    app.require_subcommand(1);
    unsigned workers = 0;
    app.add_option("--workers", workers, "Worker threads (0 = hardware concurrency)");

    // theta
    auto* theta = app.add_subcommand("theta", "Calibrate and cache a theta table");
    int theta_n = 100;
    std::string theta_region = "100x100";
    std::string theta_noise = "significant";
    std::string theta_samples = "25x20";
    std::uint64_t theta_seed = pv::CalibrationSettings{}.seed;
    std::string theta_out;
    theta->add_option("--n", theta_n, "Network size")->check(CLI::Range(4, 100000));
    theta->add_option("--region", theta_region, "WxH or x_min,x_max,y_min,y_max (meters)");
    theta->add_option("--noise-mode", theta_noise, "negligible | significant | <sigma in watts>");
    theta->add_option("--samples", theta_samples, "<x0 draws>x<layouts per x0>");
    theta->add_option("--seed", theta_seed, "Master seed");
    theta->add_option("--out", theta_out, "Output file or directory (default: theta cache)");

    // run
    auto* run = app.add_subcommand("run", "Run one experiment");
    std::string run_config, run_preset, run_report, run_format = "json";
    std::optional<int> run_trials;
    std::optional<std::uint64_t> run_seed;
    run->add_option("--config", run_config, "Experiment config JSON");
    run->add_option("--preset", run_preset, "Named preset")->check(CLI::IsMember(pv::preset_names()));
    run->add_option("--trials", run_trials, "Override trial count");
    run->add_option("--seed", run_seed, "Override master seed");
    run->add_option("--report", run_report, "Report path (default: stdout)");
    run->add_option("--format", run_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

    // sweep
    auto* sw = app.add_subcommand("sweep", "Vary n0 and emit a success-rate curve (CSV)");
    std::string sw_config, sw_preset, sw_out;
    int n0_min = 0, n0_max = 0;
    std::optional<int> sw_trials;
    std::optional<std::uint64_t> sw_seed;
    sw->add_option("--config", sw_config, "Experiment config JSON");
    sw->add_option("--preset", sw_preset, "Named preset")->check(CLI::IsMember(pv::preset_names()));
    sw->add_option("--n0-min", n0_min, "Smallest n0")->required();
    sw->add_option("--n0-max", n0_max, "Largest n0")->required();
    sw->add_option("--trials", sw_trials, "Override trial count");
    sw->add_option("--seed", sw_seed, "Override master seed");
    sw->add_option("--out", sw_out, "CSV path (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (theta->parsed()) {
            pv::ExperimentConfig c;
            c.n = theta_n;
            c.n0 = (theta_n + 1) / 2;
            c.region = parse_region(theta_region);
            c.faking = pv::FakingSearchConfigd::defaults_for(c.region);
            apply_noise_mode(c, theta_noise);
            parse_samples(theta_samples, c.calibration.num_x0, c.calibration.num_X_per_x0);
            c.calibration.seed = theta_seed;
            const auto meta = c.calibration_meta();
            const auto table = pv::estimate_theta_table(meta.signal, meta.region, c.n, meta.num_x0,
                                                        meta.num_X_per_x0, meta.faking, meta.seed, workers);
            std::filesystem::path out = theta_out.empty() ? pv::theta_cache_dir() : std::filesystem::path(theta_out);
            if (theta_out.empty() || std::filesystem::is_directory(out)) {
                std::filesystem::create_directories(out);
                out /= pv::theta_table_filename(c.n, meta);
            }
            pv::save_theta_table(table, out);
            std::cout << "theta_star=" << table.theta_star << " samples=" << table.samples.size() << " -> "
                      << out.string() << "\n";
        } else if (run->parsed()) {
            auto c = load_config(run_config, run_preset);
            if (run_trials) {
                c.trials = *run_trials;
            }
            if (run_seed) {
                c.seed = *run_seed;
            }
            c.validate();
            const auto report = pv::run_experiment(c, pv::theta_cache_dir(), workers);
            const auto format = run_format == "csv" ? pv::ReportFormat::Csv : pv::ReportFormat::Json;
            if (run_report.empty()) {
                std::cout << (format == pv::ReportFormat::Csv ? pv::report_to_csv(report)
                                                              : nlohmann::json(report).dump(2) + "\n");
            } else {
                pv::emit_report(report, format, run_report);
            }
            std::cerr << "theta_star=" << report.theta_star << " success_rate=" << report.aggregate.success_rate
                      << " mean_genuine_retained=" << report.aggregate.mean_genuine_retained << "\n";
        } else if (sw->parsed()) {
            auto c = load_config(sw_config, sw_preset);
            if (sw_trials) {
                c.trials = *sw_trials;
            }
            if (sw_seed) {
                c.seed = *sw_seed;
            }
            c.n0 = std::max(2, std::min(n0_min, c.n));
            c.validate();
            const auto table = pv::resolve_theta_table(c, pv::theta_cache_dir(), workers);
            const auto csv = pv::sweep_to_csv(pv::sweep(c, n0_min, n0_max, table, workers));
            if (sw_out.empty()) {
                std::cout << csv;
            } else {
                pv::write_text_file(sw_out, csv);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "posverify: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
