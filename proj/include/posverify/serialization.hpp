#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "posverify/adversary.hpp"
#include "posverify/geometry.hpp"
#include "posverify/protocol.hpp"
#include "posverify/rss_channel.hpp"
#include "posverify/theta_oracle.hpp"

namespace posverify {

void to_json(nlohmann::json& j, const SignalParamsd& p);
void from_json(const nlohmann::json& j, SignalParamsd& p);
void to_json(nlohmann::json& j, const Regiond& r);
void from_json(const nlohmann::json& j, Regiond& r);
void to_json(nlohmann::json& j, const FakingSearchConfigd& c);
void from_json(const nlohmann::json& j, FakingSearchConfigd& c);
void to_json(nlohmann::json& j, const CalibrationMeta& m);
void from_json(const nlohmann::json& j, CalibrationMeta& m);
void to_json(nlohmann::json& j, const ThetaTable& t);
void from_json(const nlohmann::json& j, ThetaTable& t);
void to_json(nlohmann::json& j, const FilterRound& r);
void from_json(const nlohmann::json& j, FilterRound& r);
void to_json(nlohmann::json& j, const FilterResult& r);
void from_json(const nlohmann::json& j, FilterResult& r);
void to_json(nlohmann::json& j, const AccusationMatrix& m);
void from_json(const nlohmann::json& j, AccusationMatrix& m);

/// Compact binary form of an accusation matrix:
///   "PVAM" | u32 version (1) | u32 n | n x i64 ids | ceil(n*n/8) bytes
/// All integers little-endian. Entry (j, i) is bit k = j*n + i, stored in
/// byte k/8 at bit position k%8 (LSB first).
std::vector<std::uint8_t> encode_accusation_matrix(const AccusationMatrix& m);
AccusationMatrix decode_accusation_matrix(const std::vector<std::uint8_t>& bytes);

/// Stable 64-bit FNV-1a digest of the calibration inputs for network size n.
std::uint64_t calibration_hash(int n, const CalibrationMeta& meta);

/// theta_n<N>_<16 hex digits>.json
std::string theta_table_filename(int n, const CalibrationMeta& meta);

void save_theta_table(const ThetaTable& table, const std::filesystem::path& path);
ThetaTable load_theta_table(const std::filesystem::path& path);

/// Reads a whole text file; throws std::runtime_error naming the path.
std::string read_text_file(const std::filesystem::path& path);
/// Writes a whole text file; throws std::runtime_error naming the path.
void write_text_file(const std::filesystem::path& path, const std::string& contents);

} // namespace posverify
