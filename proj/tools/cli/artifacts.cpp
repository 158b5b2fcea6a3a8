#include <chrono>
#include <ctime>

#include "internal.hpp"
#include "lopt/error.hpp"

namespace lopt::cli {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Manifest::Manifest(fs::path outdir) : outdir_(std::move(outdir)) {
  const fs::path path = outdir_ / "manifest.json";
  doc_ = json{{"tool", "lopt"}, {"version", kToolVersion}, {"stages", json::object()}};
  if (!fs::exists(path)) return;
  try {
    json loaded = json::parse(read_file(path));
    if (loaded.contains("stages") && loaded["stages"].is_object()) doc_["stages"] = loaded["stages"];
  } catch (const json::parse_error&) {
    // An unreadable manifest only means nothing can be skipped.
  }
}

const json* Manifest::stage(const std::string& name) const {
  const json& stages = doc_["stages"];
  auto it = stages.find(name);
  return it == stages.end() ? nullptr : &*it;
}

void Manifest::set_stage(const std::string& name, json entry) {
  doc_["stages"][name] = std::move(entry);
  doc_["updated"] = utc_timestamp();
}

void Manifest::save() const {
  fs::create_directories(outdir_);
  write_file_atomic(outdir_ / "manifest.json", doc_.dump(2) + "\n");
}

Stage::Stage(RunContext& run, Manifest& manifest, std::string name, std::string input_hash)
    : run_(run),
      manifest_(manifest),
      name_(std::move(name)),
      input_hash_(std::move(input_hash)),
      dir_(run.task_dir() / name_),
      started_(utc_timestamp()) {}

bool Stage::up_to_date() const {
  const json* entry = manifest_.stage(to_string(run_.config.task.kind) + "/" + name_);
  if (!entry || entry->value("input_hash", "") != input_hash_) return false;
  if (!entry->contains("files")) return false;
  for (const auto& [file, digest] : (*entry)["files"].items()) {
    const fs::path path = dir_ / file;
    if (!fs::exists(path) || sha256_hex(read_file(path)) != digest.get<std::string>()) return false;
  }
  return true;
}

void Stage::write(const std::string& filename, const std::string& content) {
  const fs::path path = dir_ / filename;
  fs::create_directories(path.parent_path());
  write_file_atomic(path, content);
  files_[filename] = sha256_hex(content);
}

void Stage::write_json(const std::string& filename, const json& doc) {
  write(filename, doc.dump(2) + "\n");
}

void Stage::write_table(const std::string& stem, const CsvTable& table) {
  const std::string text = table.str();
  write(stem + ".csv", text);
  if (auto svg = render_plot(dir_, stem, parse_csv(text))) write(stem + ".svg", *svg);
}

void Stage::commit() {
  const std::string key = to_string(run_.config.task.kind) + "/" + name_;
  // Files from an earlier run of this stage that were not produced again.
  if (const json* old = manifest_.stage(key); old && old->contains("files")) {
    for (const auto& [file, digest] : (*old)["files"].items()) {
      if (!files_.count(file)) fs::remove(dir_ / file);
    }
  }
  json files = json::object();
  for (const auto& [file, digest] : files_) files[file] = digest;
  manifest_.set_stage(key, json{{"input_hash", input_hash_},
                                {"tool_version", kToolVersion},
                                {"started", started_},
                                {"finished", utc_timestamp()},
                                {"files", files}});
  manifest_.save();
}

}  // namespace lopt::cli
