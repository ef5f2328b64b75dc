#pragma once

// Trial records and their JSONL persistence. One JSON object per line; the
// "timestamps" member is excluded from the content hash so replays against a
// deterministic endpoint compare equal.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "planprobe/error.hpp"
#include "planprobe/hash.hpp"

namespace planprobe::records {

inline constexpr int kSchemaVersion = 1;

enum class Experiment { exp1, exp2 };
enum class Stage { gen1, gen2 };
enum class TrialStatus { ok, under_length, failed };

inline const char* to_string(Experiment e) { return e == Experiment::exp1 ? "exp1" : "exp2"; }
inline const char* to_string(Stage s) { return s == Stage::gen1 ? "gen1" : "gen2"; }
inline const char* to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::ok: return "ok";
    case TrialStatus::under_length: return "under_length";
    case TrialStatus::failed: return "failed";
  }
  return "failed";
}

inline Stage parse_stage(const std::string& text) {
  if (text == "gen1") return Stage::gen1;
  if (text == "gen2") return Stage::gen2;
  throw InvalidParameterError("unknown stage '" + text + "' (expected gen1 or gen2)");
}

struct Exp2Condition {
  std::int64_t mu = 0;
  double sigma = 10.0;
  std::size_t context_count = 64;
  std::size_t generate_count = 64;
  std::int64_t replicate = 0;
  Stage stage = Stage::gen1;
  std::vector<std::int64_t> context_values;
  std::uint64_t rng_seed = 0;

  bool operator==(const Exp2Condition&) const = default;
};

struct Timestamps {
  std::string requested_at;
  std::string completed_at;
  bool operator==(const Timestamps&) const = default;
};

struct TrialRecord {
  Experiment experiment = Experiment::exp1;
  std::string condition;
  std::string model_name;
  std::string prompt_text;
  std::string raw_completion;
  std::string finish_reason;
  std::vector<std::int64_t> parsed_values;
  std::vector<std::string> parse_warnings;
  TrialStatus status = TrialStatus::ok;
  std::optional<std::int64_t> start_value;    // exp1
  std::size_t requested_count = 0;            // exp1: values wanted incl. the start
  std::optional<Exp2Condition> exp2;          // exp2
  Timestamps timestamps;

  bool operator==(const TrialRecord&) const = default;
};

inline std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch());
  const std::time_t secs = static_cast<std::time_t>(ms.count() / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900,
                     tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                     ms.count() % 1000);
}

/// Content fields only (no timestamps), in a fixed key order.
inline nlohmann::ordered_json content_json(const TrialRecord& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = to_string(r.experiment);
  j["condition"] = r.condition;
  j["model_name"] = r.model_name;
  j["status"] = to_string(r.status);
  if (r.start_value) {
    j["start_value"] = *r.start_value;
    j["requested_count"] = r.requested_count;
  }
  if (r.exp2) {
    const auto& c = *r.exp2;
    j["exp2"] = {{"mu", c.mu},
                 {"sigma", c.sigma},
                 {"context_count", c.context_count},
                 {"generate_count", c.generate_count},
                 {"replicate", c.replicate},
                 {"stage", to_string(c.stage)},
                 {"rng_seed", c.rng_seed},
                 {"context_values", c.context_values}};
  }
  j["prompt_text"] = r.prompt_text;
  j["raw_completion"] = r.raw_completion;
  j["finish_reason"] = r.finish_reason;
  j["parsed_values"] = r.parsed_values;
  j["parse_warnings"] = r.parse_warnings;
  return j;
}

inline std::string content_hash(const TrialRecord& r) { return sha256_hex(content_json(r).dump()); }

inline std::string to_jsonl_line(const TrialRecord& r) {
  auto j = content_json(r);
  j["timestamps"] = {{"requested_at", r.timestamps.requested_at},
                     {"completed_at", r.timestamps.completed_at}};
  return j.dump();
}

/// Checks record-level invariants; throws InvalidDataError.
inline void validate(const TrialRecord& r) {
  if (r.experiment == Experiment::exp1) {
    if (!r.start_value) throw InvalidDataError("exp1 record without start_value");
    if (r.status != TrialStatus::failed &&
        (r.parsed_values.empty() || r.parsed_values.front() != *r.start_value))
      throw InvalidDataError(fmt::format("exp1 record '{}': first value must equal start {}",
                                         r.condition, *r.start_value));
  } else {
    if (!r.exp2) throw InvalidDataError("exp2 record without condition block");
    if (r.exp2->context_values.size() != r.exp2->context_count && r.status != TrialStatus::failed)
      throw InvalidDataError(fmt::format("exp2 record '{}': {} context values, expected {}",
                                         r.condition, r.exp2->context_values.size(),
                                         r.exp2->context_count));
  }
}

inline TrialRecord from_json(const nlohmann::json& j) {
  TrialRecord r;
  const int version = j.at("schema_version").get<int>();
  if (version != kSchemaVersion)
    throw FormatError(fmt::format("record schema version {} is not supported (expected {})",
                                  version, kSchemaVersion));
  const auto exp = j.at("experiment").get<std::string>();
  if (exp == "exp1")
    r.experiment = Experiment::exp1;
  else if (exp == "exp2")
    r.experiment = Experiment::exp2;
  else
    throw FormatError("unknown experiment '" + exp + "'");
  r.condition = j.at("condition").get<std::string>();
  r.model_name = j.at("model_name").get<std::string>();
  const auto status = j.at("status").get<std::string>();
  if (status == "ok")
    r.status = TrialStatus::ok;
  else if (status == "under_length")
    r.status = TrialStatus::under_length;
  else if (status == "failed")
    r.status = TrialStatus::failed;
  else
    throw FormatError("unknown status '" + status + "'");
  if (j.contains("start_value")) {
    r.start_value = j["start_value"].get<std::int64_t>();
    r.requested_count = j.at("requested_count").get<std::size_t>();
  }
  if (j.contains("exp2")) {
    const auto& c = j["exp2"];
    Exp2Condition cond;
    cond.mu = c.at("mu").get<std::int64_t>();
    cond.sigma = c.at("sigma").get<double>();
    cond.context_count = c.at("context_count").get<std::size_t>();
    cond.generate_count = c.at("generate_count").get<std::size_t>();
    cond.replicate = c.at("replicate").get<std::int64_t>();
    cond.stage = parse_stage(c.at("stage").get<std::string>());
    cond.rng_seed = c.at("rng_seed").get<std::uint64_t>();
    cond.context_values = c.at("context_values").get<std::vector<std::int64_t>>();
    r.exp2 = std::move(cond);
  }
  r.prompt_text = j.at("prompt_text").get<std::string>();
  r.raw_completion = j.at("raw_completion").get<std::string>();
  r.finish_reason = j.at("finish_reason").get<std::string>();
  r.parsed_values = j.at("parsed_values").get<std::vector<std::int64_t>>();
  r.parse_warnings = j.at("parse_warnings").get<std::vector<std::string>>();
  if (j.contains("timestamps")) {
    r.timestamps.requested_at = j["timestamps"].value("requested_at", "");
    r.timestamps.completed_at = j["timestamps"].value("completed_at", "");
  }
  return r;
}

/// Appends records, one line each, flushing after every line.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path, bool append = false)
      : path_(path), out_(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc)) {
    if (!out_) throw FileError("cannot write " + path.string());
  }

  void write(const TrialRecord& r) {
    out_ << to_jsonl_line(r) << '\n';
    out_.flush();
    if (!out_) throw FileError("write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

inline void write_jsonl(std::ostream& out, const std::vector<TrialRecord>& records) {
  for (const auto& r : records) out << to_jsonl_line(r) << '\n';
}

inline std::vector<TrialRecord> read_jsonl(std::istream& in, const std::string& source = "input") {
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto record = from_json(nlohmann::json::parse(line));
      validate(record);
      out.push_back(std::move(record));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(fmt::format("{}:{}: malformed record: {}", source, line_no, e.what()));
    } catch (const Error& e) {
      throw FormatError(fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
  }
  return out;
}

inline std::vector<TrialRecord> load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path.string());
  return read_jsonl(in, path.string());
}

inline void persist(const std::filesystem::path& path, const std::vector<TrialRecord>& records) {
  JsonlWriter writer(path);
  for (const auto& r : records) writer.write(r);
}

}  // namespace planprobe::records
