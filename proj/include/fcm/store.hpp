// fcm/store.hpp
// ----------------------------------------------------------------------------
// File-backed store for model versions, run records and analysis records.
//
//   <root>/models/<model_id>/<version>.fcm.json   canonical model documents
//   <root>/runs/<run_id>.json                     immutable run records
//   <root>/analyses/<analysis_id>.json            immutable analysis records
//   <root>/index.jsonl                            append-only event log
//
// Every document is written to a temporary file and renamed into place
// before its index line is appended, so a crash loses at most the write in
// flight. Opening a store replays the index; lines that are torn or point
// at missing files are skipped.
// ----------------------------------------------------------------------------
#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "fcm/io.hpp"

namespace fcm {

struct StoredModel {
  std::string model_id;
  int version = 0;
  std::string document;  // canonical model document
  std::string created;   // UTC, ISO-8601
  std::string updated;
};

struct ModelRef {
  std::string model_id;
  int version = 0;
};

class Store {
 public:
  explicit Store(std::filesystem::path root) : root_(std::move(root)) {
    namespace fs = std::filesystem;
    fs::create_directories(root_ / "models");
    fs::create_directories(root_ / "runs");
    fs::create_directories(root_ / "analyses");
    replay();
  }

  const std::filesystem::path& root() const noexcept { return root_; }

  ModelRef create_model(const FcmModel& model) {
    const auto doc = save_model(model);
    std::unique_lock lock(write_mutex_);
    const auto id = make_id('m', ++model_counter_);
    const auto now = timestamp();
    persist_model_version(id, 1, doc);
    append_index({{"op", "model"}, {"id", id}, {"version", 1}, {"at", now}});
    std::unique_lock state(state_mutex_);
    models_[id] = {1, now, now};
    return {id, 1};
  }

  /// Optimistic update: fails with `version_conflict` unless the stored
  /// latest version equals `expected_version`.
  ModelRef update_model(const std::string& id, int expected_version, const FcmModel& model) {
    const auto doc = save_model(model);
    std::unique_lock lock(write_mutex_);
    ModelInfo info;
    {
      std::shared_lock state(state_mutex_);
      auto it = models_.find(id);
      if (it == models_.end()) throw FcmError("not_found", "unknown model", id);
      info = it->second;
    }
    if (info.latest != expected_version)
      throw FcmError("version_conflict",
                     "expected version " + std::to_string(expected_version) + ", current is " +
                         std::to_string(info.latest),
                     id);
    const int version = info.latest + 1;
    const auto now = timestamp();
    persist_model_version(id, version, doc);
    append_index({{"op", "model"}, {"id", id}, {"version", version}, {"at", now}});
    std::unique_lock state(state_mutex_);
    models_[id] = {version, info.created, now};
    return {id, version};
  }

  /// Latest version when `version` is empty.
  std::optional<StoredModel> get_model(const std::string& id, std::optional<int> version = {}) const {
    ModelInfo info;
    {
      std::shared_lock state(state_mutex_);
      auto it = models_.find(id);
      if (it == models_.end()) return std::nullopt;
      info = it->second;
    }
    const int v = version.value_or(info.latest);
    if (v < 1 || v > info.latest) return std::nullopt;
    const auto path = model_path(id, v);
    if (!std::filesystem::exists(path)) return std::nullopt;
    return StoredModel{id, v, read_file(path), info.created, info.updated};
  }

  /// Stores a record under a fresh id; `fill` receives the id and returns
  /// the document to write.
  template <typename Fill>
  std::string put_run(Fill&& fill) {
    return put_record("runs", 'r', run_counter_, std::forward<Fill>(fill));
  }

  template <typename Fill>
  std::string put_analysis(Fill&& fill) {
    return put_record("analyses", 'a', analysis_counter_, std::forward<Fill>(fill));
  }

  std::optional<std::string> get_run(const std::string& id) const { return get_record("runs", id); }
  std::optional<std::string> get_analysis(const std::string& id) const {
    return get_record("analyses", id);
  }

 private:
  struct ModelInfo {
    int latest = 0;
    std::string created;
    std::string updated;
  };

  static std::string make_id(char prefix, std::uint64_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%06llu", prefix, static_cast<unsigned long long>(n));
    return buf;
  }

  static bool safe_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    for (char c : id)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
    return true;
  }

  static std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  std::filesystem::path model_path(const std::string& id, int version) const {
    return root_ / "models" / id / (std::to_string(version) + ".fcm.json");
  }

  void persist_model_version(const std::string& id, int version, const std::string& doc) {
    std::filesystem::create_directories(root_ / "models" / id);
    write_file_atomic(model_path(id, version), doc);
  }

  void append_index(const Json& entry) {
    std::ofstream out(root_ / "index.jsonl", std::ios::app | std::ios::binary);
    out << entry.dump() << '\n';
    out.flush();
    if (!out) throw FcmError("io", "cannot append to store index", (root_ / "index.jsonl").string());
  }

  template <typename Fill>
  std::string put_record(const char* dir, char prefix, std::uint64_t& counter, Fill&& fill) {
    std::unique_lock lock(write_mutex_);
    const auto id = make_id(prefix, ++counter);
    const std::string doc = fill(id);
    write_file_atomic(root_ / dir / (id + ".json"), doc);
    append_index({{"op", prefix == 'r' ? "run" : "analysis"}, {"id", id}, {"at", timestamp()}});
    return id;
  }

  std::optional<std::string> get_record(const char* dir, const std::string& id) const {
    if (!safe_id(id)) return std::nullopt;
    const auto path = root_ / dir / (id + ".json");
    if (!std::filesystem::exists(path)) return std::nullopt;
    return read_file(path);
  }

  static std::uint64_t counter_of(const std::string& id) {
    if (id.size() < 2 || !std::isdigit(static_cast<unsigned char>(id[1]))) return 0;
    try {
      return std::stoull(id.substr(1));
    } catch (...) {
      return 0;
    }
  }

  void replay() {
    std::ifstream in(root_ / "index.jsonl", std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      Json e = Json::parse(line, nullptr, false);
      if (e.is_discarded() || !e.is_object() || !e.contains("op") || !e.contains("id")) continue;
      if (!e["op"].is_string() || !e["id"].is_string()) continue;
      const auto op = e["op"].get<std::string>();
      const auto id = e["id"].get<std::string>();
      if (!safe_id(id)) continue;
      const auto at = e.value("at", std::string());
      if (op == "model") {
        if (!e.contains("version") || !e["version"].is_number_integer()) continue;
        const int v = e["version"].get<int>();
        if (!std::filesystem::exists(model_path(id, v))) continue;
        auto& info = models_[id];
        if (v == 1) info.created = at;
        if (v > info.latest) {
          info.latest = v;
          info.updated = at;
        }
        model_counter_ = std::max(model_counter_, counter_of(id));
      } else if (op == "run") {
        run_counter_ = std::max(run_counter_, counter_of(id));
      } else if (op == "analysis") {
        analysis_counter_ = std::max(analysis_counter_, counter_of(id));
      }
    }
    in.close();
    terminate_torn_tail();

    // files written before a crash but never indexed still reserve their ids
    namespace fs = std::filesystem;
    for (const auto& entry : fs::directory_iterator(root_ / "models"))
      model_counter_ = std::max(model_counter_, counter_of(entry.path().filename().string()));
    for (const auto& entry : fs::directory_iterator(root_ / "runs"))
      run_counter_ = std::max(run_counter_, counter_of(entry.path().stem().string()));
    for (const auto& entry : fs::directory_iterator(root_ / "analyses"))
      analysis_counter_ = std::max(analysis_counter_, counter_of(entry.path().stem().string()));
  }

  /// A torn final line would swallow the next appended entry.
  void terminate_torn_tail() {
    const auto path = root_ / "index.jsonl";
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in || in.tellg() <= 0) return;
    in.seekg(-1, std::ios::end);
    char last = 0;
    in.get(last);
    in.close();
    if (last != '\n') std::ofstream(path, std::ios::app | std::ios::binary) << '\n';
  }

  std::filesystem::path root_;
  std::mutex write_mutex_;
  mutable std::shared_mutex state_mutex_;
  std::map<std::string, ModelInfo> models_;
  std::uint64_t model_counter_ = 0;
  std::uint64_t run_counter_ = 0;
  std::uint64_t analysis_counter_ = 0;
};

}  // namespace fcm
