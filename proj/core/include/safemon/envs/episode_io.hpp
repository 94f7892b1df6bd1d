#pragma once

#include <filesystem>
#include <string>

#include "safemon/envs/scenario.hpp"

namespace safemon::envs {

/// CSV body: header `t,<labels>,violation`, one row per state; `violation` is
/// 1 on the violation row only. Values round-trip exactly.
std::string episode_csv(const Episode& episode);

/// Writes `<stem>.csv` plus the `<stem>.json` manifest (study, scenario, seed,
/// dt, length, violation_time). Observations are not persisted.
void write_episode(const Episode& episode, const std::filesystem::path& csv_path);

/// Inverse of write_episode. Throws IoError or ParseError on malformed files.
Episode read_episode(const std::filesystem::path& csv_path);

}  // namespace safemon::envs
