#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "ragred/error.hpp"
#include "ragred/text.hpp"
#include "ragred/version.hpp"

namespace ragred {

// Run directories are append-only: every stage writes <name>.v<N>.<ext>
// with N one past the highest existing version, never overwriting.

namespace detail {

inline std::optional<int> artifact_version(const std::filesystem::path& file,
                                           const std::string& name, const std::string& ext) {
  const std::string fname = file.filename().string();
  const std::string prefix = name + ".v";
  const std::string suffix = "." + ext;
  if (fname.rfind(prefix, 0) != 0 || fname.size() <= prefix.size() + suffix.size()) {
    return std::nullopt;
  }
  if (fname.compare(fname.size() - suffix.size(), suffix.size(), suffix) != 0) {
    return std::nullopt;
  }
  const std::string digits = fname.substr(prefix.size(), fname.size() - prefix.size() - suffix.size());
  if (digits.empty()) return std::nullopt;
  for (char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  return std::stoi(digits);
}

inline int max_artifact_version(const std::filesystem::path& run_dir, const std::string& name,
                                const std::string& ext) {
  int best = 0;
  if (!std::filesystem::exists(run_dir)) return best;
  for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
    if (auto v = artifact_version(entry.path(), name, ext)) best = std::max(best, *v);
  }
  return best;
}

}  // namespace detail

inline std::filesystem::path next_artifact_path(const std::filesystem::path& run_dir,
                                                const std::string& name, const std::string& ext) {
  const int next = detail::max_artifact_version(run_dir, name, ext) + 1;
  return run_dir / (name + ".v" + std::to_string(next) + "." + ext);
}

inline std::optional<std::filesystem::path> latest_artifact(const std::filesystem::path& run_dir,
                                                            const std::string& name,
                                                            const std::string& ext) {
  const int v = detail::max_artifact_version(run_dir, name, ext);
  if (v == 0) return std::nullopt;
  return run_dir / (name + ".v" + std::to_string(v) + "." + ext);
}

// Requires the named prior-stage artifact; the error names the subcommand
// that produces it.
inline std::filesystem::path require_artifact(const std::filesystem::path& run_dir,
                                              const std::string& name, const std::string& ext,
                                              const std::string& producing_command) {
  if (auto p = latest_artifact(run_dir, name, ext)) return *p;
  throw MissingArtifactError("missing artifact '" + name + "' in " + run_dir.string() +
                             "; run the '" + producing_command + "' subcommand first");
}

inline void write_json_artifact(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write artifact: " + path.string());
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json_artifact(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open artifact: " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError(path.string() + ": invalid JSON artifact");
  return j;
}

// One subcommand at a time per run directory.
class RunLock {
public:
  explicit RunLock(const std::filesystem::path& run_dir) : path_(run_dir / ".lock") {
    std::filesystem::create_directories(run_dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw Error("run directory is locked (" + path_.string() +
                  " exists); remove it if no other run is active");
    }
  }

  ~RunLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      std::error_code ec;
      std::filesystem::remove(path_, ec);
    }
  }

  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

private:
  std::filesystem::path path_;
  int fd_ = -1;
};

}  // namespace ragred
