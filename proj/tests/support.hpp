// Shared helpers for the unit and golden-file test suites.
#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bracket/dataset.hpp"

namespace testutil {

inline bracket::UnitRecord rec(std::string id, int w, double y_lag, double y0, double y1,
                               std::vector<double> covs = {}) {
  bracket::UnitRecord r;
  r.unit_id = std::move(id);
  r.w = w;
  r.y_lag = y_lag;
  r.y0 = y0;
  r.y1 = y1;
  r.covariates = std::move(covs);
  return r;
}

inline bracket::CanonicalDataset make_ds(std::vector<bracket::UnitRecord> records,
                                         std::vector<std::string> cov_names = {}) {
  bracket::CanonicalDataset ds;
  ds.records = std::move(records);
  ds.meta.covariate_names = std::move(cov_names);
  return ds;
}

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    dir_ = std::filesystem::temp_directory_path() /
           ("bracket_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path path() const { return dir_; }
  std::string str(const std::string& name) const { return (dir_ / name).string(); }

 private:
  std::filesystem::path dir_;
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

#ifdef BRACKET_CLI_PATH
/// Runs the CLI binary with the given argument string; captures stdout/stderr.
inline CliResult run_cli(const std::string& args, const TempDir& scratch,
                         const std::string& env_prefix = "") {
  const std::string out_path = scratch.str("_stdout.txt");
  const std::string err_path = scratch.str("_stderr.txt");
  const std::string cmd = env_prefix + std::string(BRACKET_CLI_PATH) + " " + args + " >" +
                          out_path + " 2>" + err_path;
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
  result.out = read_text(out_path);
  result.err = read_text(err_path);
  return result;
}
#endif

}  // namespace testutil
