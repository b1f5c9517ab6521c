#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "brute_force_filter.hpp"
#include "posverify/serialization.hpp"

using namespace posverify;
using nlohmann::json;

namespace {

std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("posverify_unit_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

ThetaTable small_table()
{
    ThetaTable t;
    t.n = 10;
    t.theta_star = 4;
    t.samples = {1.25, 3.5, 2.0, 0.1 + 0.2, 3.9999999999999996, 2.75};
    for (int d = 1; d <= 9; ++d) {
        t.quantiles[static_cast<std::size_t>(d - 1)] = nearest_rank_quantile(t.samples, d);
    }
    t.calibration_meta.signal = SignalParamsd::make(1.0, 0.125, 3.3e-7, 2.5);
    t.calibration_meta.region = Regiond::make(-5.0, 45.0, 0.0, 20.0);
    t.calibration_meta.faking = FakingSearchConfigd::defaults_for(t.calibration_meta.region);
    t.calibration_meta.num_x0 = 2;
    t.calibration_meta.num_X_per_x0 = 3;
    t.calibration_meta.seed = 0xfedcba9876543210ULL;
    return t;
}

} // namespace

TEST_CASE("value types round-trip through JSON")
{
    const auto p = SignalParamsd::make(2.0, 0.33, 1e-9, 3.0);
    const auto p2 = json(p).get<SignalParamsd>();
    CHECK(p2.alpha == p.alpha);
    CHECK(p2.noise_sigma == p.noise_sigma);
    CHECK(p2.path_loss_exponent == 3.0);

    json bad = p;
    bad["alpha"] = 1.0;
    CHECK_THROWS_AS(bad.get<SignalParamsd>(), std::invalid_argument);
    json negative = p;
    negative["noise_sigma"] = -1.0;
    CHECK_THROWS_AS(negative.get<SignalParamsd>(), std::invalid_argument);

    const auto r = Regiond::make(1, 2, 3, 4);
    const auto r2 = json(r).get<Regiond>();
    CHECK(r2.x_min == 1);
    CHECK(r2.y_max == 4);
    CHECK_THROWS_AS((json{{"x_min", 1}, {"x_max", 1}, {"y_min", 0}, {"y_max", 1}}.get<Regiond>()),
                    std::domain_error);

    const auto f = FakingSearchConfigd::defaults_for(r);
    const auto f2 = json(f).get<FakingSearchConfigd>();
    CHECK(f2.exclusion_radius == f.exclusion_radius);
    CHECK(f2.refine_iters == f.refine_iters);
    CHECK_THROWS_AS((json{{"exclusion_radius", 1}, {"grid_step", 0}, {"refine_iters", 3}}.get<FakingSearchConfigd>()),
                    std::invalid_argument);
}

TEST_CASE("ThetaTable JSON")
{
    const auto t = small_table();
    const json j = t;
    CHECK(j.at("quantiles").contains("0.1"));
    CHECK(j.at("quantiles").contains("0.9"));
    CHECK(j.at("samples").size() == 6);
    CHECK(j.at("calibration_meta").at("seed").get<std::uint64_t>() == 0xfedcba9876543210ULL);
    CHECK(j.get<ThetaTable>() == t);

    SUBCASE("stored quantiles agree with the samples")
    {
        const auto back = j.get<ThetaTable>();
        for (int d = 1; d <= 9; ++d) {
            CHECK(nearest_rank_quantile(back.samples, d) == back.quantile(d));
        }
    }
    SUBCASE("sample count must match the metadata")
    {
        json broken = j;
        broken["samples"].push_back(1.0);
        CHECK_THROWS_AS(broken.get<ThetaTable>(), std::invalid_argument);
    }
}

TEST_CASE("theta table files")
{
    const auto dir = scratch_dir("theta");
    const auto t = small_table();
    const auto name = theta_table_filename(t.n, t.calibration_meta);
    CHECK(name.rfind("theta_n10_", 0) == 0);
    CHECK(name.size() == std::string("theta_n10_").size() + 16 + 5);
    CHECK(name.substr(name.size() - 5) == ".json");

    save_theta_table(t, dir / name);
    CHECK(load_theta_table(dir / name) == t);

    auto other = t.calibration_meta;
    other.seed += 1;
    CHECK(calibration_hash(10, other) != calibration_hash(10, t.calibration_meta));
    CHECK(calibration_hash(11, t.calibration_meta) != calibration_hash(10, t.calibration_meta));
    CHECK(calibration_hash(10, t.calibration_meta) == calibration_hash(10, small_table().calibration_meta));

    write_text_file(dir / "junk.json", "{ not json");
    CHECK_THROWS_AS(load_theta_table(dir / "junk.json"), std::runtime_error);
    try {
        load_theta_table(dir / "missing.json");
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("missing.json") != std::string::npos);
    }
    CHECK_THROWS_AS(write_text_file(dir / "no" / "such" / "dir.txt", "x"), std::runtime_error);
}

TEST_CASE("FilterResult JSON round trip")
{
    std::mt19937_64 rng(12);
    const auto m = bruteforce::to_matrix(bruteforce::random_table(9, 0.35, rng), -4);
    const auto r = filter_fixpoint(m, 1.5);
    CHECK(json(r).get<FilterResult>() == r);
}

TEST_CASE("AccusationMatrix JSON and binary forms")
{
    std::mt19937_64 rng(5);
    for (int n : {0, 1, 3, 8, 13}) {
        const auto m = bruteforce::to_matrix(bruteforce::random_table(n, 0.5, rng), -3);
        CHECK(json(m).get<AccusationMatrix>() == m);
        const auto bytes = encode_accusation_matrix(m);
        CHECK(bytes.size() == 12 + 8 * static_cast<std::size_t>(n) + (static_cast<std::size_t>(n * n) + 7) / 8);
        CHECK(decode_accusation_matrix(bytes) == m);
    }

    SUBCASE("bit layout")
    {
        AccusationMatrix m({1, 2, 3});
        m.set(0, 1, true); // bit 1
        m.set(2, 0, true); // bit 6
        m.set(2, 2, true); // bit 8
        const auto bytes = encode_accusation_matrix(m);
        REQUIRE(bytes.size() == 12 + 24 + 2);
        CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PVAM");
        CHECK(bytes[4] == 1);
        CHECK(bytes[8] == 3);
        CHECK(bytes[12] == 1);
        CHECK(bytes[36] == 0x42);
        CHECK(bytes[37] == 0x01);
    }
    SUBCASE("malformed input")
    {
        const auto good = encode_accusation_matrix(AccusationMatrix({1, 2}));
        auto bad_magic = good;
        bad_magic[0] = 'X';
        CHECK_THROWS_AS(decode_accusation_matrix(bad_magic), std::invalid_argument);
        auto bad_version = good;
        bad_version[4] = 2;
        CHECK_THROWS_AS(decode_accusation_matrix(bad_version), std::invalid_argument);
        auto truncated = good;
        truncated.pop_back();
        CHECK_THROWS_AS(decode_accusation_matrix(truncated), std::invalid_argument);
        auto padded = good;
        padded.push_back(0);
        CHECK_THROWS_AS(decode_accusation_matrix(padded), std::invalid_argument);
        auto huge = good;
        huge[11] = 0x7f; // n near 2^31 with a tiny payload
        CHECK_THROWS_AS(decode_accusation_matrix(huge), std::invalid_argument);
        CHECK_THROWS_AS(decode_accusation_matrix({}), std::invalid_argument);
        auto dup = encode_accusation_matrix(AccusationMatrix({1, 2}));
        dup[20] = 1; // second id becomes 1
        CHECK_THROWS_AS(decode_accusation_matrix(dup), std::invalid_argument);
    }
    SUBCASE("malformed JSON")
    {
        CHECK_THROWS_AS((json{{"ids", {1, 2}}, {"accuses", {{false, false}}}}.get<AccusationMatrix>()),
                        std::invalid_argument);
        CHECK_THROWS_AS((json{{"ids", {1, 2}}, {"accuses", {{false, false}, {false}}}}.get<AccusationMatrix>()),
                        std::invalid_argument);
    }
}
