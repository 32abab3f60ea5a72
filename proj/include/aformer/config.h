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

#ifndef AFORMER_CONFIG_H_
#define AFORMER_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "aformer/data.h"
#include "aformer/model.h"

namespace aformer {

enum class CmvnMode { kUtterance, kCorpus, kNone };

std::string to_string(CmvnMode mode);
CmvnMode cmvn_mode_from_string(const std::string& s);

// Synthetic task layout: one non-accented training corpus, one small
// accented training corpus, and four test sets.
struct DataConfig {
  uint64_t world_seed = 7;
  int feat_dim = 16;
  int clean_train = 3600;
  int accent_train = 200;
  int test_utterances = 200;
  GenerationParams generation;
  AccentFamily family;
  CmvnMode cmvn = CmvnMode::kUtterance;

  void validate() const;
  bool operator==(const DataConfig&) const = default;
};

struct TrainConfig {
  int batch_size = 16;
  int pretrain_steps = 2000;
  int adapt_steps = 300;
  int retrain_steps = 1000;
  int finetune_steps = 300;
  int warmup = 500;
  float lr_base = 0.4f;
  float beta1 = 0.9f;
  float beta2 = 0.98f;
  float eps = 1e-9f;
  float grad_clip = 5.0f;
  int bucket_batches = 8;  // batches formed per length-sorted bucket
  int log_every = 50;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct DecodeConfig {
  int beam = 4;
  float ctc_weight = 0.3f;

  void validate() const;
  bool operator==(const DecodeConfig&) const = default;
};

struct ExperimentConfig {
  ModelConfig model;
  DataConfig data;
  TrainConfig train;
  DecodeConfig decode;
  uint64_t seed = 1;

  static ExperimentConfig desk();
  static ExperimentConfig full();
  // Named profile: "desk" or "full".
  static ExperimentConfig profile(const std::string& name);

  void validate() const;
  std::string to_json() const;
  // Stable digest of the canonical JSON form.
  std::string hash() const;

  bool operator==(const ExperimentConfig&) const = default;
};

// Parses a JSON document. An optional top-level "profile" key selects the
// starting point; every other key must be known. Values are validated.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

// Applies "section.key=value" assignments, e.g. "train.batch_size=8" or
// "model.accent.kind=lstm". The value is parsed as JSON when possible and
// as a plain string otherwise.
ExperimentConfig apply_overrides(const ExperimentConfig& base,
                                 const std::vector<std::string>& overrides);

}  // namespace aformer

#endif  // AFORMER_CONFIG_H_
