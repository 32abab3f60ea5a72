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

#ifndef AFORMER_TRAINING_H_
#define AFORMER_TRAINING_H_

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "aformer/config.h"
#include "aformer/data.h"
#include "aformer/decoding.h"
#include "aformer/model.h"
#include "aformer/scoring.h"

namespace aformer {

// ---- optimizer ------------------------------------------------------------

struct AdamOptions {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Moments are keyed by parameter name and created on a parameter's first
// update, so frozen parameters never hold state.
struct AdamState {
  int64_t step = 0;
  std::map<std::string, std::vector<float>> first_moment;
  std::map<std::string, std::vector<float>> second_moment;
};

// One entry per parameter of a NamedParams list: true when it may change.
using TrainMask = std::vector<bool>;

// Bias-corrected Adam update of every trainable parameter from its
// accumulated gradient (an absent gradient counts as zero).
void adam_step(const NamedParams& params, const TrainMask& mask, AdamState& state,
               float lr, const AdamOptions& options = {});

// base * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5).
float warmup_lr(int64_t step, int warmup, float base, int d_model);

// Marks every parameter whose name equals a prefix or continues it with
// '.' as frozen. Throws ConfigError when a prefix matches nothing.
TrainMask apply_freeze(const NamedParams& params, const std::vector<std::string>& prefixes);

// Scales trainable gradients so their joint L2 norm is at most `max_norm`;
// returns the norm before clipping.
double clip_grad_norm(const NamedParams& params, const TrainMask& mask, double max_norm);

// ---- data feeding ---------------------------------------------------------

// A training or test utterance ready for the model.
struct Example {
  std::string id;
  std::string corpus_tag;
  Tensor feats;
  std::vector<int> tokens;
};

using CorpusSet = std::map<std::string, std::vector<UtteranceRecord>>;

// Tokenizes and normalizes records. `corpus_stats` is required for, and only
// used by, corpus-level normalization.
std::vector<Example> prepare_examples(const std::vector<UtteranceRecord>& records,
                                      const Tokenizer& tokenizer, CmvnMode mode,
                                      const CmvnStats* corpus_stats = nullptr);

// Deterministic batch order. Uniform mode walks seeded epochs over the pooled
// utterances: each epoch is shuffled, cut into buckets of `bucket_batches`
// batches, sorted by length inside a bucket, and the batches shuffled again.
// Weighted mode draws each slot's corpus from `corpus_weights` and then the
// next utterance of that corpus's own shuffled epoch.
class BatchSampler {
 public:
  BatchSampler(std::vector<const Example*> pool, int batch_size, int bucket_batches,
               uint64_t seed, std::map<std::string, double> corpus_weights = {});
  std::vector<const Example*> next();
  int64_t epoch() const { return epoch_; }

 private:
  void refill();
  const Example* draw_weighted();

  std::vector<const Example*> pool_;
  int batch_size_;
  int bucket_batches_;
  std::mt19937_64 rng_;
  std::vector<std::vector<const Example*>> queue_;
  size_t cursor_ = 0;
  int64_t epoch_ = 0;
  std::vector<std::string> weighted_tags_;
  std::vector<double> weights_;
  std::map<std::string, std::vector<const Example*>> by_tag_;
  std::map<std::string, size_t> tag_cursor_;
};

// ---- passes ---------------------------------------------------------------

enum class PassId { kA1, kA2, kA3, kFinetune, kPooledPretrain };

std::string to_string(PassId id);
PassId pass_id_from_string(const std::string& s);

struct PassSpec {
  PassId id = PassId::kA1;
  std::string init_checkpoint;      // required for A2, A3, finetune
  ModelConfig model;                // architecture when starting from scratch
  std::vector<std::string> corpora;  // corpus tags of the data mixture
  std::map<std::string, double> corpus_weights;  // empty: uniform pooling
  std::vector<std::string> frozen_prefixes;
  int steps = 0;
  TrainConfig train;
  uint64_t seed = 1;
  std::string config_hash;
  std::string out_checkpoint;  // empty: keep the result in memory only
  std::string manifest_path;   // JSONL run log; empty: none
};

// Default spec for a pass: A2 freezes the general encoder, the others train
// everything.
PassSpec make_pass_spec(PassId id, const ExperimentConfig& config,
                        std::vector<std::string> corpora, std::string init_checkpoint);

// Throws ConfigError for an invalid combination of id, init and freezing.
void validate_pass_spec(const PassSpec& spec);

struct StepRecord {
  int64_t step = 0;
  double loss = 0.0;
  double att = 0.0;
  double ctc = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
  std::vector<std::string> corpus_tags;  // tag of every utterance in the batch
};

struct PassResult {
  AformerModel model;
  CheckpointMeta meta;
  std::vector<StepRecord> history;
};

using ProgressFn = std::function<void(const std::string&)>;

// Trains for spec.steps updates and, when requested, writes the checkpoint
// and a JSONL manifest (one record per logged step plus a summary).
PassResult run_pass(const PassSpec& spec, const std::map<std::string, std::vector<Example>>& data,
                    const ProgressFn& progress = {});

// Follows init links from `checkpoint` and checks that the recorded lineage
// names existing files whose passes form a valid chain (A3 <- A2 <- A1).
// Returns the pass ids oldest first.
std::vector<std::string> verify_lineage(const std::string& checkpoint);

// ---- evaluation and ablation ------------------------------------------------

ScoreReport evaluate(const AformerModel& model, const std::vector<Example>& test,
                     const std::string& test_set, const DecodeOptions& options,
                     Transcripts* hyps = nullptr);

std::vector<std::string> token_symbols(const Tokenizer& tokenizer, std::span<const int> ids);

// Synthetic corpora for one experiment, keyed by tag:
//   clean_train, accent_train, clean_test, accent_in_test,
//   accent_out1_test, accent_out2_test
CorpusSet generate_dataset(const DataConfig& config);
void write_dataset(const std::string& dir, const CorpusSet& corpora, const DataConfig& config);
CorpusSet read_dataset(const std::string& dir);

// Examples of every corpus after the configured normalization.
std::map<std::string, std::vector<Example>> prepare_dataset(const CorpusSet& corpora,
                                                            const DataConfig& config);

struct AblationReport {
  std::vector<std::string> systems;    // a1, a2, b, c, finetune
  std::vector<std::string> test_sets;  // clean, accent_in, accent_out1, accent_out2
  std::map<std::string, std::map<std::string, ScoreReport>> scores;  // system -> set
  std::map<std::string, std::string> checkpoints;  // system -> path
  double seconds = 0.0;

  std::string table() const;
};

// Trains the five systems under `out_dir` and scores them on every test set.
// Writes report.txt and report.jsonl there.
AblationReport run_ablation(const ExperimentConfig& config, const std::string& out_dir,
                            const ProgressFn& progress = {});

}  // namespace aformer

#endif  // AFORMER_TRAINING_H_
