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

#ifndef AFORMER_DATA_H_
#define AFORMER_DATA_H_

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aformer {

struct UtteranceRecord {
  std::string id;
  std::string corpus_tag;
  std::string accent_tag;  // "none" for non-accented speech
  int frames = 0;
  int feat_dim = 0;
  std::vector<float> features;  // [frames x feat_dim], row-major
  std::string text;

  bool operator==(const UtteranceRecord&) const = default;
};

// Character vocabulary. Id 0 is the CTC blank, the last id is the shared
// start/end symbol, and the sorted characters sit in between.
class Tokenizer {
 public:
  // Lowercase letters plus space.
  Tokenizer();
  explicit Tokenizer(std::string charset);

  std::vector<int> tokenize(const std::string& text) const;
  std::string detokenize(std::span<const int> ids) const;

  int blank() const { return 0; }
  int sos_eos() const { return static_cast<int>(chars_.size()) + 1; }
  int vocab_size() const { return static_cast<int>(chars_.size()) + 2; }
  int num_chars() const { return static_cast<int>(chars_.size()); }
  const std::string& chars() const { return chars_; }
  int id_of(char c) const;
  // Printable symbol for an id: the character, "<space>", "<blank>", "<eos>".
  std::string symbol(int id) const;

 private:
  std::string chars_;
};

// Shared "language": one prototype feature vector per character.
struct SyntheticWorld {
  uint64_t seed = 0;
  int feat_dim = 16;
  Tokenizer tokenizer;
  std::vector<float> prototypes;  // [num_chars x feat_dim]

  static SyntheticWorld create(uint64_t seed, int feat_dim = 16,
                               float prototype_scale = 1.0f);
  std::span<const float> prototype(int char_index) const;
};

struct AccentSpec {
  std::string id;
  std::vector<float> rotation;      // [feat_dim x feat_dim], orthogonal
  std::vector<float> bias;          // [feat_dim]
  std::vector<float> perturbation;  // [num_chars x feat_dim]
  float stretch = 1.0f;
  float noise = 0.3f;

  // Identity transform with the given noise level.
  static AccentSpec identity(int feat_dim, int num_chars, float noise);
  float max_orthogonality_error() const;
};

// Accents of one family share a common rotation generator plus an
// individual component. Rotations come from the Cayley transform of a
// skew-symmetric matrix, so they are orthogonal by construction.
struct AccentFamily {
  uint64_t seed = 0;
  float strength = 0.5f;       // scale of the shared generator
  float individual = 0.5f;     // scale of the per-accent generator
  float bias_scale = 0.5f;
  float perturbation_scale = 0.3f;
  float stretch_spread = 0.25f;  // stretch drawn in [1 - s, 1 + s]
  float noise = 0.3f;

  AccentSpec make(const std::string& id, uint64_t accent_seed,
                  const SyntheticWorld& world) const;
  bool operator==(const AccentFamily&) const = default;
};

struct GenerationParams {
  int min_tokens = 3;
  int max_tokens = 12;
  int min_frames_per_token = 2;
  int max_frames_per_token = 6;
  // Feature frames rendered per duration unit. Durations are counted at the
  // encoder rate, so this matches the frontend's 4x time reduction.
  int frames_per_unit = 4;
  float noise = 0.3f;        // used when no accent is applied
  float speaker_offset = 0.5f;

  bool operator==(const GenerationParams&) const = default;
};

struct CorpusManifest {
  std::string corpus_tag;
  int64_t utterances = 0;
  int64_t total_frames = 0;
  std::string accent;  // "none" when unaccented
  uint64_t seed = 0;
  int feat_dim = 0;

  bool operator==(const CorpusManifest&) const = default;
};

// Pure function of its arguments. Token strings never repeat a character
// back to back, so every frame run maps to exactly one token sequence.
std::vector<UtteranceRecord> generate_corpus(const SyntheticWorld& world,
                                             const std::string& corpus_tag,
                                             uint64_t seed, int n_utts,
                                             const AccentSpec* accent,
                                             const GenerationParams& params = {});

CorpusManifest make_manifest(const std::string& corpus_tag,
                             const std::vector<UtteranceRecord>& records,
                             const std::string& accent, uint64_t seed);

// Per-dimension mean/std. Utterance-level CMVN uses one utterance's
// statistics; corpus-level CMVN estimates them once over a training set.
struct CmvnStats {
  std::vector<double> mean;
  std::vector<double> std;

  static CmvnStats of_utterance(std::span<const float> features, int frames,
                                int feat_dim);
  static CmvnStats of_corpus(const std::vector<UtteranceRecord>& records);
  void apply(std::span<float> features, int frames, int feat_dim) const;
};

constexpr double kCmvnVarianceFloor = 1e-8;

// Utterance-level normalization: zero mean, unit variance per dimension.
std::vector<float> cmvn(std::span<const float> features, int frames,
                        int feat_dim);
void apply_utterance_cmvn(std::vector<UtteranceRecord>& records);

// Binary corpus container ("AFC1") plus a JSON sidecar manifest at
// `path + ".manifest.json"`.
void write_corpus(const std::string& path,
                  const std::vector<UtteranceRecord>& records,
                  const CorpusManifest& manifest);

CorpusManifest read_manifest(const std::string& corpus_path);

// Sequential reader. The corpus tag of every record comes from the sidecar
// manifest.
class CorpusReader {
 public:
  explicit CorpusReader(const std::string& path);
  std::optional<UtteranceRecord> next();
  uint32_t declared_count() const { return declared_; }
  const CorpusManifest& manifest() const { return manifest_; }

 private:
  void read_exact(char* dst, size_t n, const char* what);
  uint16_t read_u16(const char* what);
  uint32_t read_u32(const char* what);
  std::string read_string16(const char* what);

  std::string path_;
  std::ifstream in_;
  uint64_t offset_ = 0;
  uint64_t file_size_ = 0;
  uint32_t declared_ = 0;
  uint32_t consumed_ = 0;
  CorpusManifest manifest_;
};

// Reads every record and verifies header, manifest and payload agree.
std::vector<UtteranceRecord> load_corpus(const std::string& path);

}  // namespace aformer

#endif  // AFORMER_DATA_H_
