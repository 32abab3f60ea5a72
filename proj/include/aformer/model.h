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

#ifndef AFORMER_MODEL_H_
#define AFORMER_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aformer/encoders.h"
#include "aformer/fusion.h"
#include "aformer/layers.h"

namespace aformer {

struct ModelConfig {
  int feat_dim = 16;
  int subsample_channels = 32;
  int d_model = 32;
  int heads = 2;
  int d_ff = 64;
  int general_blocks = 2;
  int conv_kernel = 7;
  AccentEncoderConfig accent;
  FusionKind fusion = FusionKind::kAdd;
  int d_att = 32;
  int decoder_layers = 2;
  int vocab = 29;  // blank + characters + start/end
  float dropout = 0.1f;
  float label_smoothing = 0.1f;
  float ctc_weight = 0.3f;

  static ModelConfig desk();
  static ModelConfig full();
  // Throws ConfigError naming the first violated constraint.
  void validate() const;
  int blank() const { return 0; }
  int sos_eos() const { return vocab - 1; }

  bool operator==(const ModelConfig&) const = default;
};

// Pre-norm transformer decoder layer:
//   x = x + SelfAttn(LN(x), causal)
//   x = x + SrcAttn(LN(x), memory)
//   x = x + FFN(LN(x))
struct DecoderLayer {
  LayerNorm self_norm;
  MultiHeadAttention self_attn;
  LayerNorm src_norm;
  MultiHeadAttention src_attn;
  LayerNorm ffn_norm;
  FeedForward ffn;

  static DecoderLayer create(int d_model, int heads, int d_ff, std::mt19937& rng);
  Tensor forward(const Tensor& x, const Tensor& memory,
                 const ForwardContext& ctx) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct Decoder {
  Tensor embedding;  // [vocab x d_model]
  std::vector<DecoderLayer> layers;
  LayerNorm final_norm;
  Linear output;

  static Decoder create(int vocab, int d_model, int heads, int d_ff,
                        int n_layers, std::mt19937& rng);
  // Logits [L x vocab] for every prefix of `inputs` (teacher forcing).
  Tensor forward(std::span<const int> inputs, const Tensor& memory,
                 const ForwardContext& ctx) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct EncoderOutput {
  Tensor general;  // X_G [T' x d]
  Tensor accent;   // X_A, undefined without an accent encoder
  Tensor fused;    // X_F, equal to X_G without an accent encoder
};

struct ModelOutput {
  EncoderOutput enc;
  Tensor ctc_logits;      // [T' x vocab]
  Tensor decoder_logits;  // [(|target| + 1) x vocab]
};

// Parameter name prefixes, used for freezing and checkpoint diffs.
inline constexpr const char* kFrontendPrefix = "frontend";
inline constexpr const char* kGeneralPrefix = "general_encoder";
inline constexpr const char* kAccentPrefix = "accent_encoder";
inline constexpr const char* kFusionPrefix = "fusion";
inline constexpr const char* kCtcPrefix = "ctc_head";
inline constexpr const char* kDecoderPrefix = "decoder";

// Frontend -> {general, accent} encoders -> fusion -> {CTC head, decoder}.
// Parameters are shared handles; copies of a model alias the same storage.
class AformerModel {
 public:
  static AformerModel create(const ModelConfig& config, uint64_t seed);

  const ModelConfig& config() const { return config_; }

  EncoderOutput encode(const Tensor& feats, const ForwardContext& ctx) const;
  // `target` holds token ids without start/end symbols.
  ModelOutput forward(const Tensor& feats, std::span<const int> target,
                      const ForwardContext& ctx) const;
  Tensor ctc_logits(const Tensor& fused) const { return ctc_head_.forward(fused); }
  Tensor decoder_logits(std::span<const int> inputs, const Tensor& fused,
                        const ForwardContext& ctx) const {
    return decoder_.forward(inputs, fused, ctx);
  }

  // Leaf tensors in a fixed order, named by module path.
  NamedParams named_parameters() const;
  // Copies values by name; every parameter must be present with its shape.
  void load_parameters(const NamedParams& values);
  // Independent copy with its own parameter storage.
  AformerModel deep_copy() const;

  // Mutable component access, for structural tests.
  Subsampling& frontend() { return frontend_; }
  GeneralEncoder& general_encoder() { return general_; }
  AccentEncoder& accent_encoder() { return accent_; }
  Fusion& fusion() { return fusion_; }
  Decoder& decoder() { return decoder_; }

 private:
  ModelConfig config_;
  Subsampling frontend_;
  GeneralEncoder general_;
  AccentEncoder accent_;
  Fusion fusion_;
  Linear ctc_head_;
  Decoder decoder_;
};

// Label-smoothed cross entropy over teacher-forced logits; `target` excludes
// the end symbol, which is appended here.
Tensor attention_loss(const Tensor& decoder_logits, std::span<const int> target,
                      int eos, float smoothing);

struct UtteranceLoss {
  std::string id;
  double total = 0.0;
  double att = 0.0;
  double ctc = 0.0;
};

struct BatchLoss {
  double total = 0.0;
  double att_component = 0.0;
  double ctc_component = 0.0;
  std::vector<UtteranceLoss> per_utterance;
};

// (1 - ctc_weight) * att + ctc_weight * ctc. Throws ConfigError unless
// ctc_weight lies in [0, 1].
BatchLoss hybrid_loss(double att, double ctc, double ctc_weight);
Tensor hybrid_loss(const Tensor& att, const Tensor& ctc, float ctc_weight);

// Graph-carrying loss of one utterance plus its scalar breakdown.
struct UtteranceObjective {
  Tensor loss;
  UtteranceLoss values;
};

UtteranceObjective utterance_objective(const AformerModel& model,
                                       const Tensor& feats,
                                       std::span<const int> target,
                                       const ForwardContext& ctx);

// Checkpoint container "AFMT": magic, u32 version, u32-length JSON metadata,
// then named little-endian float32 parameters.
struct CheckpointMeta {
  ModelConfig config;
  std::string pass_id;
  int64_t global_step = 0;
  uint64_t seed = 0;
  std::string config_hash;
  std::string init_checkpoint;       // empty for a pass without init
  std::vector<std::string> lineage;  // ancestor checkpoint paths, oldest first
  std::vector<std::string> lineage_passes;
};

void save_checkpoint(const std::string& path, const AformerModel& model,
                     const CheckpointMeta& meta);
CheckpointMeta read_checkpoint_meta(const std::string& path);
// Rebuilds the model from the stored config and parameters.
AformerModel load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& json);

}  // namespace aformer

#endif  // AFORMER_MODEL_H_
