#pragma once

#include <chrono>
#include <filesystem>
#include <stop_token>
#include <string>
#include <vector>

namespace oed {

struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
  bool cancelled = false;
  std::string out;
  std::string err;
};

/// Runs `program` with `args`, capturing stdout and stderr. The child is
/// killed when `timeout` elapses or `stop` is requested.
ProcessResult run_process(const std::string& program, const std::vector<std::string>& args,
                          std::chrono::milliseconds timeout, std::stop_token stop = {});

/// A uniquely named file in the temp directory, removed on destruction.
class TempFile {
 public:
  explicit TempFile(const std::string& contents, const std::string& suffix = ".json");
  ~TempFile();
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// True when `program` names an existing executable file.
bool is_executable(const std::string& program);

}  // namespace oed
