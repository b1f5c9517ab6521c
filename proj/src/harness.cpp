#include "posverify/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "posverify/parallel.hpp"
#include "posverify/random.hpp"
#include "posverify/serialization.hpp"

namespace posverify {

using nlohmann::json;

void ExperimentConfig::validate() const
{
    if (n0 < 2 || n0 > n) {
        throw std::invalid_argument("ExperimentConfig: need 2 <= n0 <= n");
    }
    if (trials < 1) {
        throw std::invalid_argument("ExperimentConfig: trials must be >= 1");
    }
    region.validate();
    faking.validate();
    if (noise_mode == NoiseMode::Explicit && !(explicit_sigma >= 0.0)) {
        throw std::invalid_argument("ExperimentConfig: explicit noise sigma must be non-negative");
    }
    if (calibration.num_x0 < 1 || calibration.num_X_per_x0 < 1) {
        throw std::invalid_argument("ExperimentConfig: calibration sample counts must be >= 1");
    }
    if (tabulated_theta_star) {
        if (*tabulated_theta_star < 0) {
            throw std::invalid_argument("ExperimentConfig: tabulated theta* must be non-negative");
        }
        if (theta_path) {
            throw std::invalid_argument("ExperimentConfig: give either a theta table path or a tabulated theta*");
        }
        if (filter_mode == FilterMode::Quantile) {
            throw std::invalid_argument("ExperimentConfig: the quantile filter needs a calibrated theta table");
        }
    }
    (void)signal();
}

SignalParamsd ExperimentConfig::signal() const
{
    const auto base = SignalParamsd::make(transmit_power, wavelength, 0.0, path_loss_exponent);
    switch (noise_mode) {
    case NoiseMode::Negligible:
        return base.with_noise(kNegligibleNoiseFraction * compute_noise_scale(base, region));
    case NoiseMode::Significant:
        return base.with_noise(compute_noise_scale(base, region));
    case NoiseMode::Explicit:
        return base.with_noise(explicit_sigma);
    }
    throw std::logic_error("unknown noise mode");
}

CalibrationMeta ExperimentConfig::calibration_meta() const
{
    return CalibrationMeta{signal(), region, faking, calibration.num_x0, calibration.num_X_per_x0,
                           calibration.seed};
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b)
{
    return json(a) == json(b);
}

bool operator==(const ExperimentReport& a, const ExperimentReport& b)
{
    return a.config == b.config && a.theta_star == b.theta_star && a.theta_schedule == b.theta_schedule &&
           a.per_trial == b.per_trial && a.aggregate == b.aggregate;
}

double compute_noise_scale(const SignalParamsd& params, const Regiond& region)
{
    region.validate();
    return ideal_received_power(params, region.diagonal()) / 3.0;
}

std::vector<Node> deploy(const ExperimentConfig& config, std::uint64_t seed, unsigned workers)
{
    config.validate();
    const auto params = config.signal();
    Rng rng = make_rng(seed, StreamTag::Deployment);

    std::vector<Node> nodes(static_cast<std::size_t>(config.n));
    PointSet2d genuine(2, config.n0);
    for (int j = 0; j < config.n; ++j) {
        Node& node = nodes[static_cast<std::size_t>(j)];
        node.id = j;
        node.kind = j < config.n0 ? NodeKind::Genuine : NodeKind::Malicious;
        Point2d p;
        do {
            p = uniform_point(config.region, rng);
        } while (node.kind == NodeKind::Malicious &&
                 config.region.farthest_distance(p) < config.faking.exclusion_radius);
        node.true_position = p;
        node.claimed_position = p;
        if (node.kind == NodeKind::Genuine) {
            genuine.col(j) = p;
        }
    }

    const auto n1 = static_cast<std::size_t>(config.n1());
    parallel_for(n1, workers, [&](std::size_t m) {
        Node& node = nodes[static_cast<std::size_t>(config.n0) + m];
        node.claimed_position =
            optimize_fake_position(params, config.region, node.true_position, genuine, config.faking).fake_position;
    });
    return nodes;
}

std::uint64_t trial_seed(std::uint64_t master, int trial)
{
    return derive_seed(master, StreamTag::Trial, static_cast<std::uint64_t>(trial));
}

std::vector<TableRow> deletion_table(const FilterResult& result, const std::vector<Node>& nodes)
{
    std::map<NodeId, NodeKind> kinds;
    int genuine = 0;
    int malicious = 0;
    for (const auto& node : nodes) {
        kinds[node.id] = node.kind;
        (node.kind == NodeKind::Genuine ? genuine : malicious) += 1;
    }

    std::vector<TableRow> rows;
    rows.reserve(result.rounds.size());
    for (const auto& round : result.rounds) {
        TableRow row;
        row.step = round.step;
        row.genuine_total = genuine;
        row.malicious_total = malicious;
        row.threshold = round.threshold;
        for (std::size_t k = 0; k < round.removed.size(); ++k) {
            (kinds.at(round.removed[k]) == NodeKind::Genuine ? row.genuine_deleted : row.malicious_deleted) += 1;
            const int a = round.removed_approvals[k];
            row.approvals_min = row.approvals_min < 0 ? a : std::min(row.approvals_min, a);
            row.approvals_max = std::max(row.approvals_max, a);
        }
        genuine -= row.genuine_deleted;
        malicious -= row.malicious_deleted;
        rows.push_back(row);
    }
    return rows;
}

namespace {

void check_table(const ExperimentConfig& config, const ThetaTable& table)
{
    if (table.n != config.n) {
        throw std::invalid_argument("theta table calibrated for n=" + std::to_string(table.n) +
                                    " but experiment has n=" + std::to_string(config.n));
    }
}

std::vector<double> schedule_for(const ExperimentConfig& config, const ThetaTable& table)
{
    if (config.filter_mode == FilterMode::Quantile) {
        return quantile_schedule(table);
    }
    return {static_cast<double>(table.theta_star)};
}

} // namespace

TrialRecord run_trial(const ExperimentConfig& config, const ThetaTable& table, std::uint64_t seed)
{
    check_table(config, table);
    const auto nodes = deploy(config, seed, 1);
    const auto matrix = accuse_approve(nodes, config.signal(), seed);
    const auto thetas = schedule_for(config, table);

    TrialRecord record;
    record.seed = seed;
    record.filter = scheduled_filter(matrix, thetas);
    record.table = deletion_table(record.filter, nodes);
    for (const NodeId id : record.filter.final_genuine_set) {
        (nodes[static_cast<std::size_t>(id)].kind == NodeKind::Genuine ? record.genuine_retained
                                                                         : record.malicious_retained) += 1;
    }
    record.genuine_removed = config.n0 - record.genuine_retained;
    record.malicious_removed = config.n1() - record.malicious_retained;
    record.success = record.malicious_retained == 0 && record.genuine_retained >= 1;
    return record;
}

ExperimentReport run_experiment(const ExperimentConfig& config, const ThetaTable& table, unsigned workers)
{
    config.validate();
    check_table(config, table);

    ExperimentReport report;
    report.config = config;
    report.theta_star = table.theta_star;
    report.theta_schedule = schedule_for(config, table);
    report.per_trial.resize(static_cast<std::size_t>(config.trials));
    parallel_for(report.per_trial.size(), workers, [&](std::size_t t) {
        report.per_trial[t] = run_trial(config, table, trial_seed(config.seed, static_cast<int>(t)));
    });

    auto& agg = report.aggregate;
    std::map<int, std::pair<double, double>> per_step;
    for (const auto& trial : report.per_trial) {
        agg.success_rate += trial.success ? 1.0 : 0.0;
        agg.mean_genuine_retained += trial.genuine_retained;
        agg.mean_rounds += static_cast<double>(trial.filter.rounds.size());
        for (const auto& row : trial.table) {
            auto& s = per_step[row.step];
            s.first += row.genuine_deleted;
            s.second += row.malicious_deleted;
        }
    }
    const double trials = static_cast<double>(report.per_trial.size());
    agg.success_rate /= trials;
    agg.mean_genuine_retained /= trials;
    agg.mean_rounds /= trials;
    for (const auto& [step, sums] : per_step) {
        agg.steps.push_back({step, sums.first / trials, sums.second / trials});
    }
    return report;
}

ThetaTable tabulated_theta_table(const ExperimentConfig& config)
{
    config.validate();
    if (!config.tabulated_theta_star) {
        throw std::invalid_argument("tabulated_theta_table: config has no tabulated theta*");
    }
    ThetaTable table;
    table.n = config.n;
    table.theta_star = *config.tabulated_theta_star;
    table.quantiles.fill(static_cast<double>(table.theta_star));
    table.calibration_meta = config.calibration_meta();
    table.calibration_meta.num_x0 = 0;
    table.calibration_meta.num_X_per_x0 = 0;
    return table;
}

ThetaTable resolve_theta_table(const ExperimentConfig& config, const std::filesystem::path& cache_dir,
                               unsigned workers)
{
    config.validate();
    if (config.tabulated_theta_star) {
        return tabulated_theta_table(config);
    }
    if (config.theta_path) {
        auto table = load_theta_table(*config.theta_path);
        check_table(config, table);
        return table;
    }
    const auto meta = config.calibration_meta();
    const auto path = cache_dir / theta_table_filename(config.n, meta);
    if (std::filesystem::exists(path)) {
        auto table = load_theta_table(path);
        if (table.n == config.n && table.calibration_meta == meta) {
            return table;
        }
    }
    auto table = estimate_theta_table(meta.signal, meta.region, config.n, meta.num_x0, meta.num_X_per_x0,
                                      meta.faking, meta.seed, workers);
    std::error_code ec;
    std::filesystem::create_directories(cache_dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create theta cache directory " + cache_dir.string() + ": " + ec.message());
    }
    save_theta_table(table, path);
    return table;
}

ExperimentReport run_experiment(const ExperimentConfig& config, const std::filesystem::path& cache_dir,
                                unsigned workers)
{
    return run_experiment(config, resolve_theta_table(config, cache_dir, workers), workers);
}

std::vector<SweepPoint> sweep(const ExperimentConfig& config, int n0_min, int n0_max, const ThetaTable& table,
                              unsigned workers)
{
    if (n0_min > n0_max) {
        throw std::invalid_argument("sweep: empty n0 range");
    }
    std::vector<SweepPoint> points;
    for (int n0 = n0_min; n0 <= n0_max; ++n0) {
        ExperimentConfig c = config;
        c.n0 = n0;
        const auto report = run_experiment(c, table, workers);
        points.push_back({n0, c.n1(), c.trials, report.aggregate.success_rate,
                          report.aggregate.mean_genuine_retained, report.aggregate.mean_rounds});
    }
    return points;
}

namespace {

std::string format_fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string approvals_cell(const TableRow& row)
{
    if (row.approvals_min < 0) {
        return "---";
    }
    if (row.approvals_min == row.approvals_max) {
        return std::to_string(row.approvals_min);
    }
    return std::to_string(row.approvals_min) + "-" + std::to_string(row.approvals_max);
}

} // namespace

std::string report_csv_header()
{
    return "step,genuine_total,malicious_total,threshold,genuine_deleted,malicious_deleted,deleted_approvals";
}

std::string report_to_csv(const ExperimentReport& report)
{
    std::ostringstream out;
    out << report_csv_header() << "\n";
    for (std::size_t t = 0; t < report.per_trial.size(); ++t) {
        const auto& trial = report.per_trial[t];
        out << "# trial " << t << " seed " << trial.seed << "\n";
        for (const auto& row : trial.table) {
            out << row.step << ',' << row.genuine_total << ',' << row.malicious_total << ','
                << format_fixed(row.threshold, 2) << ',' << row.genuine_deleted << ',' << row.malicious_deleted
                << ',' << approvals_cell(row) << "\n";
        }
    }
    return out.str();
}

std::string sweep_to_csv(const std::vector<SweepPoint>& points)
{
    std::ostringstream out;
    out << "n0,n1,trials,success_rate,mean_genuine_retained,mean_rounds\n";
    for (const auto& p : points) {
        out << p.n0 << ',' << p.n1 << ',' << p.trials << ',' << format_fixed(p.success_rate, 4) << ','
            << format_fixed(p.mean_genuine_retained, 4) << ',' << format_fixed(p.mean_rounds, 4) << "\n";
    }
    return out.str();
}

void emit_report(const ExperimentReport& report, ReportFormat format, const std::filesystem::path& path)
{
    if (format == ReportFormat::Csv) {
        write_text_file(path, report_to_csv(report));
    } else {
        write_text_file(path, json(report).dump(2) + "\n");
    }
}

ExperimentConfig preset(std::string_view name)
{
    ExperimentConfig c;
    c.trials = 1;
    const auto negligible = [&](int n, int n0, std::uint64_t seed) {
        c.n = n;
        c.n0 = n0;
        c.noise_mode = NoiseMode::Negligible;
        c.filter_mode = FilterMode::Standard;
        c.tabulated_theta_star = kTabulatedNegligibleThetaStar;
        c.seed = seed;
    };
    const auto significant = [&](int n0, FilterMode mode, std::uint64_t seed) {
        c.n = 100;
        c.n0 = n0;
        c.noise_mode = NoiseMode::Significant;
        c.filter_mode = mode;
        c.seed = seed;
    };
    if (name == "neg-noise-52") {
        negligible(100, 52, 7);
    } else if (name == "neg-noise-51") {
        negligible(100, 51, 7);
    } else if (name == "neg-noise-101-52") {
        negligible(101, 52, 7);
    } else if (name == "neg-noise-101-51") {
        negligible(101, 51, 7);
    } else if (name == "sig-noise-62") {
        significant(62, FilterMode::Standard, 11);
    } else if (name == "sig-noise-63") {
        significant(63, FilterMode::Standard, 11);
    } else if (name == "sig-noise-q-60") {
        significant(60, FilterMode::Quantile, 11);
    } else if (name == "sig-noise-q-56") {
        significant(56, FilterMode::Quantile, 11);
    } else if (name == "sig-noise-q-55") {
        significant(55, FilterMode::Quantile, 11);
    } else {
        throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
    }
    return c;
}

std::vector<std::string> preset_names()
{
    return {"neg-noise-52",  "neg-noise-51",   "neg-noise-101-52", "neg-noise-101-51",
            "sig-noise-62",  "sig-noise-63", "sig-noise-q-60", "sig-noise-q-56",   "sig-noise-q-55"};
}

std::filesystem::path theta_cache_dir()
{
    if (const char* env = std::getenv("POSVERIFY_THETA_CACHE"); env != nullptr && *env != '\0') {
        return env;
    }
    return "theta-cache";
}

namespace {

const char* noise_mode_name(NoiseMode m)
{
    switch (m) {
    case NoiseMode::Negligible:
        return "negligible";
    case NoiseMode::Significant:
        return "significant";
    case NoiseMode::Explicit:
        return "explicit";
    }
    return "?";
}

NoiseMode parse_noise_mode(const std::string& s)
{
    if (s == "negligible") {
        return NoiseMode::Negligible;
    }
    if (s == "significant") {
        return NoiseMode::Significant;
    }
    if (s == "explicit") {
        return NoiseMode::Explicit;
    }
    throw std::invalid_argument("unknown noise_mode '" + s + "'");
}

FilterMode parse_filter_mode(const std::string& s)
{
    if (s == "standard") {
        return FilterMode::Standard;
    }
    if (s == "quantile") {
        return FilterMode::Quantile;
    }
    throw std::invalid_argument("unknown filter_mode '" + s + "'");
}

} // namespace

void to_json(json& j, const TableRow& r)
{
    j = json{{"step", r.step},
             {"genuine_total", r.genuine_total},
             {"malicious_total", r.malicious_total},
             {"threshold", r.threshold},
             {"genuine_deleted", r.genuine_deleted},
             {"malicious_deleted", r.malicious_deleted},
             {"approvals_min", r.approvals_min},
             {"approvals_max", r.approvals_max}};
}

void from_json(const json& j, TableRow& r)
{
    r.step = j.at("step").get<int>();
    r.genuine_total = j.at("genuine_total").get<int>();
    r.malicious_total = j.at("malicious_total").get<int>();
    r.threshold = j.at("threshold").get<double>();
    r.genuine_deleted = j.at("genuine_deleted").get<int>();
    r.malicious_deleted = j.at("malicious_deleted").get<int>();
    r.approvals_min = j.at("approvals_min").get<int>();
    r.approvals_max = j.at("approvals_max").get<int>();
}

void to_json(json& j, const TrialRecord& t)
{
    j = json{{"seed", t.seed},
             {"filter", t.filter},
             {"table", t.table},
             {"genuine_retained", t.genuine_retained},
             {"genuine_removed", t.genuine_removed},
             {"malicious_removed", t.malicious_removed},
             {"malicious_retained", t.malicious_retained},
             {"success", t.success}};
}

void from_json(const json& j, TrialRecord& t)
{
    t.seed = j.at("seed").get<std::uint64_t>();
    t.filter = j.at("filter").get<FilterResult>();
    t.table = j.at("table").get<std::vector<TableRow>>();
    t.genuine_retained = j.at("genuine_retained").get<int>();
    t.genuine_removed = j.at("genuine_removed").get<int>();
    t.malicious_removed = j.at("malicious_removed").get<int>();
    t.malicious_retained = j.at("malicious_retained").get<int>();
    t.success = j.at("success").get<bool>();
}

void to_json(json& j, const StepSummary& s)
{
    j = json{{"step", s.step},
             {"mean_genuine_deleted", s.mean_genuine_deleted},
             {"mean_malicious_deleted", s.mean_malicious_deleted}};
}

void from_json(const json& j, StepSummary& s)
{
    s.step = j.at("step").get<int>();
    s.mean_genuine_deleted = j.at("mean_genuine_deleted").get<double>();
    s.mean_malicious_deleted = j.at("mean_malicious_deleted").get<double>();
}

void to_json(json& j, const ReportAggregate& a)
{
    j = json{{"success_rate", a.success_rate},
             {"mean_genuine_retained", a.mean_genuine_retained},
             {"mean_rounds", a.mean_rounds},
             {"steps", a.steps}};
}

void from_json(const json& j, ReportAggregate& a)
{
    a.success_rate = j.at("success_rate").get<double>();
    a.mean_genuine_retained = j.at("mean_genuine_retained").get<double>();
    a.mean_rounds = j.at("mean_rounds").get<double>();
    a.steps = j.at("steps").get<std::vector<StepSummary>>();
}

namespace {

json theta_source_json(const ExperimentConfig& c)
{
    if (c.tabulated_theta_star) {
        return json{{"theta_star", *c.tabulated_theta_star}};
    }
    return c.theta_path ? *c.theta_path : std::string("recalibrate");
}

} // namespace

void to_json(json& j, const ExperimentConfig& c)
{
    j = json{{"n", c.n},
             {"n0", c.n0},
             {"region", c.region},
             {"signal",
              {{"transmit_power", c.transmit_power},
               {"wavelength", c.wavelength},
               {"path_loss_exponent", c.path_loss_exponent}}},
             {"noise_mode", noise_mode_name(c.noise_mode)},
             {"faking", c.faking},
             {"filter_mode", c.filter_mode == FilterMode::Standard ? "standard" : "quantile"},
             {"theta_source", theta_source_json(c)},
             {"calibration",
              {{"num_x0", c.calibration.num_x0},
               {"num_X_per_x0", c.calibration.num_X_per_x0},
               {"seed", c.calibration.seed}}},
             {"seed", c.seed},
             {"trials", c.trials}};
    if (c.noise_mode == NoiseMode::Explicit) {
        j["noise_sigma"] = c.explicit_sigma;
    }
}

void from_json(const json& j, ExperimentConfig& c)
{
    c = ExperimentConfig{};
    c.n = j.at("n").get<int>();
    c.n0 = j.at("n0").get<int>();
    if (j.contains("region")) {
        c.region = j.at("region").get<Regiond>();
    }
    if (j.contains("signal")) {
        const auto& s = j.at("signal");
        c.transmit_power = s.value("transmit_power", c.transmit_power);
        c.wavelength = s.value("wavelength", c.wavelength);
        c.path_loss_exponent = s.value("path_loss_exponent", c.path_loss_exponent);
    }
    c.noise_mode = parse_noise_mode(j.value("noise_mode", std::string("negligible")));
    if (c.noise_mode == NoiseMode::Explicit) {
        c.explicit_sigma = j.at("noise_sigma").get<double>();
    }
    c.faking = j.contains("faking") ? j.at("faking").get<FakingSearchConfigd>()
                                    : FakingSearchConfigd::defaults_for(c.region);
    c.filter_mode = parse_filter_mode(j.value("filter_mode", std::string("standard")));
    if (j.contains("theta_source")) {
        const auto& source = j.at("theta_source");
        if (source.is_object()) {
            c.tabulated_theta_star = source.at("theta_star").get<int>();
        } else if (const auto s = source.get<std::string>(); s != "recalibrate") {
            c.theta_path = s;
        }
    }
    if (j.contains("calibration")) {
        const auto& cal = j.at("calibration");
        c.calibration.num_x0 = cal.value("num_x0", c.calibration.num_x0);
        c.calibration.num_X_per_x0 = cal.value("num_X_per_x0", c.calibration.num_X_per_x0);
        c.calibration.seed = cal.value("seed", c.calibration.seed);
    }
    c.seed = j.value("seed", c.seed);
    c.trials = j.value("trials", c.trials);
    c.validate();
}

void to_json(json& j, const ExperimentReport& r)
{
    j = json{{"config", r.config},
             {"theta_star", r.theta_star},
             {"theta_schedule", r.theta_schedule},
             {"per_trial", r.per_trial},
             {"aggregate", r.aggregate}};
}

void from_json(const json& j, ExperimentReport& r)
{
    r.config = j.at("config").get<ExperimentConfig>();
    r.theta_star = j.at("theta_star").get<int>();
    r.theta_schedule = j.at("theta_schedule").get<std::vector<double>>();
    r.per_trial = j.at("per_trial").get<std::vector<TrialRecord>>();
    r.aggregate = j.at("aggregate").get<ReportAggregate>();
}

} // namespace posverify
