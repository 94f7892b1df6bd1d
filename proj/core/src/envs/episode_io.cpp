#include "safemon/envs/episode_io.hpp"

#include <charconv>
#include <sstream>

#include <nlohmann/json.hpp>

#include "safemon/error.hpp"
#include "safemon/io.hpp"

namespace safemon::envs {

namespace {

std::filesystem::path manifest_path(std::filesystem::path csv) {
  return csv.replace_extension(".json");
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double to_double(const std::string& s, std::size_t offset) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError("bad number '" + s + "'", offset);
  return v;
}

}  // namespace

std::string episode_csv(const Episode& ep) {
  std::string out = "t";
  const auto& labels = ep.trace.labels();
  for (std::size_t j = 0; j < ep.trace.dim(); ++j) {
    out += ',';
    out += j < labels.size() ? labels[j] : "s" + std::to_string(j);
  }
  out += ",violation\n";
  for (std::size_t t = 0; t < ep.trace.length(); ++t) {
    out += std::to_string(t);
    for (double v : ep.trace[t]) {
      out += ',';
      out += format_double(v);
    }
    out += ep.violation_time == t ? ",1\n" : ",0\n";
  }
  return out;
}

void write_episode(const Episode& ep, const std::filesystem::path& csv_path) {
  nlohmann::json m;
  m["study"] = ep.study;
  m["scenario"] = ep.scenario.name();
  m["ray_indices"] = ep.scenario.ray_indices;
  m["seed"] = ep.seed;
  m["dt"] = ep.trace.dt();
  m["length"] = ep.trace.length();
  m["violation_time"] = ep.violation_time ? nlohmann::json(*ep.violation_time) : nlohmann::json();
  write_file_atomic(csv_path, episode_csv(ep));
  write_file_atomic(manifest_path(csv_path), m.dump(2) + "\n");
}

Episode read_episode(const std::filesystem::path& csv_path) {
  Episode ep;
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(manifest_path(csv_path)));
    ep.study = m.at("study").get<std::string>();
    ep.scenario = OodScenario::from_name(m.at("scenario").get<std::string>());
    ep.scenario.ray_indices = m.at("ray_indices").get<std::vector<std::size_t>>();
    ep.seed = m.at("seed").get<std::uint64_t>();
    if (!m.at("violation_time").is_null()) ep.violation_time = m["violation_time"].get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest for " + csv_path.string() + ": " + e.what());
  }

  std::istringstream in(read_file(csv_path));
  std::string line;
  std::size_t offset = 0;
  if (!std::getline(in, line)) throw IoError("empty episode file " + csv_path.string());
  const auto header = split(line);
  if (header.size() < 3 || header.front() != "t" || header.back() != "violation") {
    throw ParseError("unexpected episode header", 0);
  }
  const std::vector<std::string> labels(header.begin() + 1, header.end() - 1);
  ep.trace = stl::Trace(labels.size(), m.at("dt").get<double>(), labels);
  offset += line.size() + 1;
  std::vector<double> row(labels.size());
  while (std::getline(in, line)) {
    const auto cells = split(line);
    if (cells.size() != header.size()) throw ParseError("wrong column count", offset);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = to_double(cells[j + 1], offset);
    ep.trace.push_back(row);
    offset += line.size() + 1;
  }
  if (ep.trace.length() != m.at("length").get<std::size_t>()) {
    throw IoError("episode length disagrees with manifest for " + csv_path.string());
  }
  return ep;
}

}  // namespace safemon::envs
