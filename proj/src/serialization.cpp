#include "posverify/serialization.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace posverify {

using nlohmann::json;

void to_json(json& j, const SignalParamsd& p)
{
    j = json{{"transmit_power", p.transmit_power},
             {"wavelength", p.wavelength},
             {"alpha", p.alpha},
             {"noise_sigma", p.noise_sigma},
             {"path_loss_exponent", p.path_loss_exponent}};
}

void from_json(const json& j, SignalParamsd& p)
{
    p = SignalParamsd::make(j.at("transmit_power").get<double>(), j.at("wavelength").get<double>(),
                            j.at("noise_sigma").get<double>(), j.value("path_loss_exponent", 2.0));
    if (j.contains("alpha")) {
        const double alpha = j.at("alpha").get<double>();
        if (std::abs(alpha - p.alpha) > 1e-12 * p.alpha) {
            throw std::invalid_argument("SignalParams: alpha inconsistent with wavelength");
        }
        p.alpha = alpha;
    }
}

void to_json(json& j, const Regiond& r)
{
    j = json{{"x_min", r.x_min}, {"x_max", r.x_max}, {"y_min", r.y_min}, {"y_max", r.y_max}};
}

void from_json(const json& j, Regiond& r)
{
    r = Regiond::make(j.at("x_min").get<double>(), j.at("x_max").get<double>(), j.at("y_min").get<double>(),
                      j.at("y_max").get<double>());
}

void to_json(json& j, const FakingSearchConfigd& c)
{
    j = json{{"exclusion_radius", c.exclusion_radius}, {"grid_step", c.grid_step}, {"refine_iters", c.refine_iters}};
}

void from_json(const json& j, FakingSearchConfigd& c)
{
    c.exclusion_radius = j.at("exclusion_radius").get<double>();
    c.grid_step = j.at("grid_step").get<double>();
    c.refine_iters = j.at("refine_iters").get<int>();
    c.validate();
}

void to_json(json& j, const CalibrationMeta& m)
{
    j = json{{"signal", m.signal},           {"region", m.region},
             {"faking", m.faking},           {"num_x0", m.num_x0},
             {"num_X_per_x0", m.num_X_per_x0}, {"seed", m.seed}};
}

void from_json(const json& j, CalibrationMeta& m)
{
    m.signal = j.at("signal").get<SignalParamsd>();
    m.region = j.at("region").get<Regiond>();
    m.faking = j.at("faking").get<FakingSearchConfigd>();
    m.num_x0 = j.at("num_x0").get<int>();
    m.num_X_per_x0 = j.at("num_X_per_x0").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
}

namespace {

std::string decile_key(int d)
{
    return "0." + std::to_string(d);
}

} // namespace

void to_json(json& j, const ThetaTable& t)
{
    json q = json::object();
    for (int d = 1; d <= 9; ++d) {
        q[decile_key(d)] = t.quantile(d);
    }
    j = json{{"n", t.n},
             {"theta_star", t.theta_star},
             {"quantiles", q},
             {"samples", t.samples},
             {"calibration_meta", t.calibration_meta}};
}

void from_json(const json& j, ThetaTable& t)
{
    t.n = j.at("n").get<int>();
    t.theta_star = j.at("theta_star").get<int>();
    const auto& q = j.at("quantiles");
    for (int d = 1; d <= 9; ++d) {
        t.quantiles[static_cast<std::size_t>(d - 1)] = q.at(decile_key(d)).get<double>();
    }
    t.samples = j.at("samples").get<std::vector<double>>();
    t.calibration_meta = j.at("calibration_meta").get<CalibrationMeta>();
    const auto expected = static_cast<std::size_t>(t.calibration_meta.num_x0) *
                          static_cast<std::size_t>(t.calibration_meta.num_X_per_x0);
    if (t.samples.size() != expected) {
        throw std::invalid_argument("ThetaTable: sample count does not match calibration_meta");
    }
}

void to_json(json& j, const FilterRound& r)
{
    j = json{{"step", r.step},
             {"active_count", r.active_count},
             {"theta", r.theta},
             {"threshold", r.threshold},
             {"removed", r.removed},
             {"removed_approvals", r.removed_approvals}};
}

void from_json(const json& j, FilterRound& r)
{
    r.step = j.at("step").get<int>();
    r.active_count = j.at("active_count").get<int>();
    r.theta = j.at("theta").get<double>();
    r.threshold = j.at("threshold").get<double>();
    r.removed = j.at("removed").get<std::vector<NodeId>>();
    r.removed_approvals = j.at("removed_approvals").get<std::vector<int>>();
}

void to_json(json& j, const FilterResult& r)
{
    j = json{{"rounds", r.rounds},
             {"final_genuine_set", r.final_genuine_set},
             {"final_filtered_set", r.final_filtered_set}};
}

void from_json(const json& j, FilterResult& r)
{
    r.rounds = j.at("rounds").get<std::vector<FilterRound>>();
    r.final_genuine_set = j.at("final_genuine_set").get<std::vector<NodeId>>();
    r.final_filtered_set = j.at("final_filtered_set").get<std::vector<NodeId>>();
}

void to_json(json& j, const AccusationMatrix& m)
{
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.size(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.size(); ++c) {
            row.push_back(m.accuses(r, c));
        }
        rows.push_back(std::move(row));
    }
    j = json{{"ids", m.ids()}, {"accuses", std::move(rows)}};
}

void from_json(const json& j, AccusationMatrix& m)
{
    auto ids = j.at("ids").get<std::vector<NodeId>>();
    const auto n = static_cast<Eigen::Index>(ids.size());
    const auto& rows = j.at("accuses");
    if (static_cast<Eigen::Index>(rows.size()) != n) {
        throw std::invalid_argument("AccusationMatrix: row count does not match ids");
    }
    AccusationMatrix::Grid grid(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& row = rows.at(static_cast<std::size_t>(r));
        if (static_cast<Eigen::Index>(row.size()) != n) {
            throw std::invalid_argument("AccusationMatrix: ragged row");
        }
        for (Eigen::Index c = 0; c < n; ++c) {
            grid(r, c) = row.at(static_cast<std::size_t>(c)).get<bool>();
        }
    }
    m = AccusationMatrix(std::move(ids), std::move(grid));
}

namespace {

constexpr char kMagic[4] = {'P', 'V', 'A', 'M'};
constexpr std::uint32_t kBinaryVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int b = 0; b < 4; ++b) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
    }
}

void put_i64(std::vector<std::uint8_t>& out, std::int64_t v)
{
    const auto u = static_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
        out.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
    }
}

std::uint64_t get_le(const std::vector<std::uint8_t>& in, std::size_t& pos, int width)
{
    if (pos + static_cast<std::size_t>(width) > in.size()) {
        throw std::invalid_argument("decode_accusation_matrix: truncated input");
    }
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b) {
        v |= static_cast<std::uint64_t>(in[pos++]) << (8 * b);
    }
    return v;
}

} // namespace

std::vector<std::uint8_t> encode_accusation_matrix(const AccusationMatrix& m)
{
    const auto n = static_cast<std::size_t>(m.size());
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    put_u32(out, kBinaryVersion);
    put_u32(out, static_cast<std::uint32_t>(n));
    for (const NodeId id : m.ids()) {
        put_i64(out, id);
    }
    const std::size_t header = out.size();
    out.resize(header + (n * n + 7) / 8, 0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            if (m.accuses(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))) {
                const std::size_t k = r * n + c;
                out[header + k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
            }
        }
    }
    return out;
}

AccusationMatrix decode_accusation_matrix(const std::vector<std::uint8_t>& bytes)
{
    if (bytes.size() < 12 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
        throw std::invalid_argument("decode_accusation_matrix: bad magic");
    }
    std::size_t pos = 4;
    if (get_le(bytes, pos, 4) != kBinaryVersion) {
        throw std::invalid_argument("decode_accusation_matrix: unsupported version");
    }
    const auto n = static_cast<std::size_t>(get_le(bytes, pos, 4));
    if ((bytes.size() - pos) / 8 < n) {
        throw std::invalid_argument("decode_accusation_matrix: truncated input");
    }
    std::vector<NodeId> ids(n);
    for (auto& id : ids) {
        id = static_cast<NodeId>(get_le(bytes, pos, 8));
    }
    if (bytes.size() != pos + (n * n + 7) / 8) {
        throw std::invalid_argument("decode_accusation_matrix: payload size mismatch");
    }
    const auto en = static_cast<Eigen::Index>(n);
    AccusationMatrix::Grid grid(en, en);
    for (std::size_t k = 0; k < n * n; ++k) {
        grid(static_cast<Eigen::Index>(k / n), static_cast<Eigen::Index>(k % n)) =
            ((bytes[pos + k / 8] >> (k % 8)) & 1u) != 0;
    }
    return AccusationMatrix(std::move(ids), std::move(grid));
}

std::uint64_t calibration_hash(int n, const CalibrationMeta& meta)
{
    const std::string canonical = json{{"n", n}, {"calibration_meta", meta}}.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string theta_table_filename(int n, const CalibrationMeta& meta)
{
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(calibration_hash(n, meta)));
    return "theta_n" + std::to_string(n) + "_" + hex + ".json";
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string() + " for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) {
        throw std::runtime_error("error while reading " + path.string());
    }
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& contents)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << contents;
    out.flush();
    if (!out) {
        throw std::runtime_error("error while writing " + path.string());
    }
}

void save_theta_table(const ThetaTable& table, const std::filesystem::path& path)
{
    write_text_file(path, json(table).dump(2) + "\n");
}

ThetaTable load_theta_table(const std::filesystem::path& path)
{
    try {
        return json::parse(read_text_file(path)).get<ThetaTable>();
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed theta table " + path.string() + ": " + e.what());
    }
}

} // namespace posverify
