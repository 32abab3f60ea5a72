// Copyright (c) 2026 Aformer Authors. All Rights Reserved.
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

#include "fixtures.h"

#include <unistd.h>

#include <atomic>
#include <cstring>
#include <fstream>
#include <iterator>

namespace fixtures {

aformer::ExperimentConfig tiny_experiment() {
  aformer::ExperimentConfig c = aformer::ExperimentConfig::desk();
  c.data.clean_train = 48;
  c.data.accent_train = 16;
  c.data.test_utterances = 6;
  c.train.batch_size = 4;
  c.train.warmup = 25;
  c.train.log_every = 10;
  return c;
}

ExampleSets tiny_examples(const aformer::ExperimentConfig& config) {
  return aformer::prepare_dataset(aformer::generate_dataset(config.data), config.data);
}

TempDir::TempDir(const std::string& label) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("aformer_" + label + "_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

bool bitwise_equal(const aformer::Tensor& a, const aformer::Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.ptr(), b.ptr(), a.numel() * sizeof(float)) == 0;
}

bool files_identical(const std::string& a, const std::string& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  const std::string da{std::istreambuf_iterator<char>(fa), {}};
  const std::string db{std::istreambuf_iterator<char>(fb), {}};
  return da == db;
}

}  // namespace fixtures
