// Copyright 2026 The penaltydp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PENALTYDP_TESTS_HELPERS_HPP_
#define PENALTYDP_TESTS_HELPERS_HPP_

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <penaltydp/model.hpp>

namespace testutil {

// Reference normal CDF by composite Simpson quadrature of the density. Kept
// deliberately independent of the erfc-based implementation under test.
// Absolute error is far below 1e-12 on [-9, 9].
inline double simpson_normal_cdf(double x) {
  if (x <= -9.0) return 0.0;
  if (x >= 9.0) return 1.0;
  const double a = -9.0;
  const int n = 2 * static_cast<int>(std::ceil((x - a) * 256.0)) + 2;
  const double h = (x - a) / n;
  const auto pdf = [](double t) {
    return 0.3989422804014326779 * std::exp(-0.5 * t * t);
  };
  double s = pdf(a) + pdf(x);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(a + i * h);
  return s * h / 3.0;
}

// Unique scratch directory for a test case; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("penaltydp_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Deterministic Bernoulli dataset: `ones` ones followed by zeros.
inline penaltydp::Dataset bernoulli_data(std::size_t n, std::size_t ones) {
  std::vector<penaltydp::Vec> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) rows.push_back({i < ones ? 1.0 : 0.0});
  return penaltydp::Dataset{std::move(rows)};
}

inline std::string bernoulli_csv(std::size_t n, std::size_t ones) {
  std::string s = "y\n";
  for (std::size_t i = 0; i < n; ++i) s += (i < ones ? "1\n" : "0\n");
  return s;
}

// Deterministic bounded real dataset centred near `center`, amplitude `amp`.
inline penaltydp::Dataset cosine_data(std::size_t n, double center, double amp) {
  std::vector<penaltydp::Vec> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back({center + amp * std::cos(6.283185307179586 * (i + 0.5) / n)});
  }
  return penaltydp::Dataset{std::move(rows)};
}

inline std::string csv_of(const penaltydp::Dataset& data) {
  std::string s = "y\n";
  char buf[40];
  for (const auto& r : data.records) {
    std::snprintf(buf, sizeof buf, "%.17g\n", r[0]);
    s += buf;
  }
  return s;
}

// Runs the CLI under test with stdout/stderr captured to files. Returns the
// exit code (or -1 if the child did not exit normally).
inline int run_cli(const std::string& args, const std::string& stdout_path,
                   const std::string& stderr_path) {
  const std::string cmd = std::string(PENALTYDP_CLI_PATH) + " " + args + " >" +
                          stdout_path + " 2>" + stderr_path;
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

// Convenience overload when the streams do not matter.
inline int run_cli(const std::string& args, const TempDir& dir) {
  return run_cli(args, dir.file("stdout.txt"), dir.file("stderr.txt"));
}

// Inverse CDF by bisection, for drawing exact samples from an analytic
// posterior in reference tests.
template <typename Cdf>
double invert_cdf(const Cdf& cdf, double u, double lo, double hi) {
  for (int i = 0; i < 200 && hi - lo > 1e-14; ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace testutil

#endif  // PENALTYDP_TESTS_HELPERS_HPP_
