#pragma once

// Experiment driver: deployments, calibrated theta tables, seeded trials and
// CSV/JSON reports.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "posverify/adversary.hpp"
#include "posverify/geometry.hpp"
#include "posverify/protocol.hpp"
#include "posverify/rss_channel.hpp"
#include "posverify/theta_oracle.hpp"

namespace posverify {

enum class NoiseMode { Negligible, Significant, Explicit };
enum class FilterMode { Standard, Quantile };
enum class ReportFormat { Csv, Json };

/// sigma relative to the noise scale SS in the negligible-noise regime.
inline constexpr double kNegligibleNoiseFraction = 1e-6;

/// Tabulated theta* for n = 100 and 101 in the negligible-noise regime
/// (2p rounded up). The neg-noise presets use it directly.
inline constexpr int kTabulatedNegligibleThetaStar = 2;

struct CalibrationSettings {
    int num_x0 = 25;
    int num_X_per_x0 = 20;
    std::uint64_t seed = 20240601;

    friend bool operator==(const CalibrationSettings&, const CalibrationSettings&) = default;
};

struct ExperimentConfig {
    int n = 100;
    int n0 = 52;
    Regiond region{};
    // Signal parameters apart from sigma, which comes from noise_mode.
    double transmit_power = 1.0;
    double wavelength = 0.125;
    double path_loss_exponent = 2.0;
    NoiseMode noise_mode = NoiseMode::Negligible;
    double explicit_sigma = 0.0; // used only with NoiseMode::Explicit
    FakingSearchConfigd faking = FakingSearchConfigd::defaults_for(Regiond{});
    FilterMode filter_mode = FilterMode::Standard;
    std::optional<std::string> theta_path; // nullopt: recalibrate (through the cache)
    // A tabulated theta* used instead of any calibration. Standard filter only.
    std::optional<int> tabulated_theta_star;
    CalibrationSettings calibration{};
    std::uint64_t seed = 1;
    int trials = 1;

    int n1() const { return n - n0; }
    void validate() const;

    /// Signal parameters with sigma resolved from noise_mode.
    SignalParamsd signal() const;

    /// Calibration inputs for the theta table this experiment needs.
    CalibrationMeta calibration_meta() const;
};

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

/// One line of the per-step deletion table.
struct TableRow {
    int step = 0;
    int genuine_total = 0;
    int malicious_total = 0;
    double threshold = 0.0;
    int genuine_deleted = 0;
    int malicious_deleted = 0;
    int approvals_min = -1; // -1 when nothing was deleted
    int approvals_max = -1;

    friend bool operator==(const TableRow&, const TableRow&) = default;
};

struct TrialRecord {
    std::uint64_t seed = 0;
    FilterResult filter;
    std::vector<TableRow> table;
    int genuine_retained = 0;
    int genuine_removed = 0;
    int malicious_removed = 0;
    int malicious_retained = 0;
    bool success = false;

    friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct StepSummary {
    int step = 0;
    double mean_genuine_deleted = 0.0;
    double mean_malicious_deleted = 0.0;

    friend bool operator==(const StepSummary&, const StepSummary&) = default;
};

struct ReportAggregate {
    double success_rate = 0.0;
    double mean_genuine_retained = 0.0;
    double mean_rounds = 0.0;
    std::vector<StepSummary> steps;

    friend bool operator==(const ReportAggregate&, const ReportAggregate&) = default;
};

struct ExperimentReport {
    ExperimentConfig config;
    int theta_star = 0;
    std::vector<double> theta_schedule;
    std::vector<TrialRecord> per_trial;
    ReportAggregate aggregate;
};

bool operator==(const ExperimentReport& a, const ExperimentReport& b);

struct SweepPoint {
    int n0 = 0;
    int n1 = 0;
    int trials = 0;
    double success_rate = 0.0;
    double mean_genuine_retained = 0.0;
    double mean_rounds = 0.0;
};

/// Ideal received power across the region diagonal, divided by three.
/// The noise level of params is ignored.
double compute_noise_scale(const SignalParamsd& params, const Regiond& region);

/// n0 genuine nodes (ids 0..n0-1) and n1 malicious nodes (ids n0..n-1) placed
/// uniformly; malicious nodes claim their optimized faking positions.
std::vector<Node> deploy(const ExperimentConfig& config, std::uint64_t seed, unsigned workers = 1);

/// Seed of trial t, derived from the experiment seed.
std::uint64_t trial_seed(std::uint64_t master, int trial);

/// Deploy, AccuseApprove and filter for one trial.
TrialRecord run_trial(const ExperimentConfig& config, const ThetaTable& table, std::uint64_t seed);

/// Splits a FilterResult into the per-pass deletion table using node kinds.
std::vector<TableRow> deletion_table(const FilterResult& result, const std::vector<Node>& nodes);

ExperimentReport run_experiment(const ExperimentConfig& config, const ThetaTable& table, unsigned workers = 0);

/// Table holding only a tabulated theta* (no samples, every quantile equal to it).
ThetaTable tabulated_theta_table(const ExperimentConfig& config);

/// Uses the tabulated theta*, loads the table from config.theta_path, or finds
/// or builds it in cache_dir.
ThetaTable resolve_theta_table(const ExperimentConfig& config, const std::filesystem::path& cache_dir,
                               unsigned workers = 0);

ExperimentReport run_experiment(const ExperimentConfig& config, const std::filesystem::path& cache_dir,
                                unsigned workers = 0);

std::vector<SweepPoint> sweep(const ExperimentConfig& config, int n0_min, int n0_max, const ThetaTable& table,
                              unsigned workers = 0);

/// CSV header of the per-step deletion table. Each trial's rows follow a
/// "# trial <t> seed <s>" comment line.
std::string report_csv_header();
std::string report_to_csv(const ExperimentReport& report);
std::string sweep_to_csv(const std::vector<SweepPoint>& points);

void emit_report(const ExperimentReport& report, ReportFormat format, const std::filesystem::path& path);

/// Named experiment presets (see preset_names()).
ExperimentConfig preset(std::string_view name);
std::vector<std::string> preset_names();

/// Directory for cached theta tables: $POSVERIFY_THETA_CACHE or ./theta-cache.
std::filesystem::path theta_cache_dir();

void to_json(nlohmann::json& j, const TableRow& r);
void from_json(const nlohmann::json& j, TableRow& r);
void to_json(nlohmann::json& j, const TrialRecord& t);
void from_json(const nlohmann::json& j, TrialRecord& t);
void to_json(nlohmann::json& j, const StepSummary& s);
void from_json(const nlohmann::json& j, StepSummary& s);
void to_json(nlohmann::json& j, const ReportAggregate& a);
void from_json(const nlohmann::json& j, ReportAggregate& a);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
void to_json(nlohmann::json& j, const ExperimentReport& r);
void from_json(const nlohmann::json& j, ExperimentReport& r);

} // namespace posverify
