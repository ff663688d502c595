// Copyright 2026 The vbdiar Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef VBDIAR_TESTS_TEST_UTIL_HPP_
#define VBDIAR_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "vbdiar/error.hpp"
#include "vbdiar/metrics.hpp"

namespace vbdiar::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = "vbdiar";
    if (info) name += std::string("_") + info->test_suite_name() + "_" + info->name();
    path_ = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  std::string File(const std::string &name) const { return (path_ / name).string(); }
  std::string Write(const std::string &name, const std::string &content) const {
    std::ofstream(path_ / name) << content;
    return File(name);
  }
  const std::filesystem::path &path() const { return path_; }

 private:
  std::filesystem::path path_;
};

template <typename F>
ErrorKind KindOf(F &&f) {
  try {
    f();
  } catch (const Error &e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a vbdiar::Error";
  return ErrorKind::kIo;
}

/// Fraction of items outside the best one-to-one matching of truth and
/// estimate clusters.
inline double PartitionError(const std::vector<int> &truth, const std::vector<int> &estimate) {
  const int kt = *std::max_element(truth.begin(), truth.end()) + 1;
  const int ke = *std::max_element(estimate.begin(), estimate.end()) + 1;
  Matrix counts = Matrix::Zero(kt, ke);
  for (std::size_t i = 0; i < truth.size(); ++i) counts(truth[i], estimate[i]) += 1.0;
  const auto map = MaxWeightAssignment(counts);
  double hit = 0.0;
  for (int r = 0; r < kt; ++r) {
    if (map[static_cast<std::size_t>(r)] >= 0) hit += counts(r, map[static_cast<std::size_t>(r)]);
  }
  return 1.0 - hit / static_cast<double>(truth.size());
}

}  // namespace vbdiar::testing

#endif  // VBDIAR_TESTS_TEST_UTIL_HPP_
