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

// Small experiment setups shared by the training tests and the acceptance
// suite.

#ifndef AFORMER_TESTS_FIXTURES_H_
#define AFORMER_TESTS_FIXTURES_H_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aformer/config.h"
#include "aformer/training.h"

namespace fixtures {

// Desk model on a few dozen synthetic utterances with a short warmup.
aformer::ExperimentConfig tiny_experiment();

using ExampleSets = std::map<std::string, std::vector<aformer::Example>>;
ExampleSets tiny_examples(const aformer::ExperimentConfig& config);

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& label);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

bool bitwise_equal(const aformer::Tensor& a, const aformer::Tensor& b);
bool files_identical(const std::string& a, const std::string& b);

}  // namespace fixtures

#endif  // AFORMER_TESTS_FIXTURES_H_
