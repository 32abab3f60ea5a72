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

#include "aformer/model.h"

#include <cstring>
#include <fstream>
#include <map>

#include "aformer/ctc.h"
#include "aformer/errors.h"
#include "aformer/ops.h"
#include "binary_io.h"
#include "json_util.h"

namespace aformer {

namespace {

constexpr char kCheckpointMagic[4] = {'A', 'F', 'M', 'T'};
constexpr uint32_t kCheckpointVersion = 1;

void require_positive(int v, const char* name) {
  if (v < 1) {
    throw ConfigError(std::string("model.") + name + " must be >= 1, got " +
                      std::to_string(v));
  }
}

}  // namespace

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::full() {
  ModelConfig c;
  c.feat_dim = 81;
  c.subsample_channels = 256;
  c.d_model = 256;
  c.heads = 4;
  c.d_ff = 2048;
  c.general_blocks = 12;
  c.conv_kernel = 15;
  c.accent = {AccentKind::kTransformer, 4, 2048, 256};
  c.fusion = FusionKind::kCrossAttention;
  c.d_att = 256;
  c.decoder_layers = 6;
  c.vocab = 3002;
  return c;
}

void ModelConfig::validate() const {
  require_positive(feat_dim, "feat_dim");
  require_positive(subsample_channels, "subsample_channels");
  require_positive(d_model, "d_model");
  require_positive(heads, "heads");
  require_positive(d_ff, "d_ff");
  require_positive(conv_kernel, "conv_kernel");
  require_positive(decoder_layers, "decoder_layers");
  if (general_blocks < 0) throw ConfigError("model.general_blocks must be >= 0");
  if (feat_dim < 7) {
    throw ConfigError("model.feat_dim must be >= 7 for two 3x3 stride-2 convolutions");
  }
  if (d_model % heads != 0) {
    throw ConfigError("model.d_model (" + std::to_string(d_model) +
                      ") must be divisible by model.heads (" +
                      std::to_string(heads) + ")");
  }
  if (conv_kernel % 2 == 0) throw ConfigError("model.conv_kernel must be odd");
  if (vocab < 3) {
    throw ConfigError("model.vocab must be >= 3 (blank, start/end, one token), got " +
                      std::to_string(vocab));
  }
  if (!(ctc_weight >= 0.0f && ctc_weight <= 1.0f)) {
    throw ConfigError("model.ctc_weight must lie in [0, 1]");
  }
  if (!(dropout >= 0.0f && dropout < 1.0f)) {
    throw ConfigError("model.dropout must lie in [0, 1)");
  }
  if (!(label_smoothing >= 0.0f && label_smoothing < 1.0f)) {
    throw ConfigError("model.label_smoothing must lie in [0, 1)");
  }
  if (accent.kind != AccentKind::kNone) {
    require_positive(accent.depth, "accent.depth");
    if (accent.kind == AccentKind::kTransformer) require_positive(accent.d_ff, "accent.d_ff");
    if (accent.kind == AccentKind::kRecurrent) {
      require_positive(accent.lstm_hidden, "accent.lstm_hidden");
    }
    if (fusion == FusionKind::kCrossAttention) require_positive(d_att, "d_att");
  }
}

DecoderLayer DecoderLayer::create(int d_model, int heads, int d_ff,
                                  std::mt19937& rng) {
  DecoderLayer l;
  l.self_norm = LayerNorm::create(d_model);
  l.self_attn = MultiHeadAttention::create(d_model, heads, rng);
  l.src_norm = LayerNorm::create(d_model);
  l.src_attn = MultiHeadAttention::create(d_model, heads, rng);
  l.ffn_norm = LayerNorm::create(d_model);
  l.ffn = FeedForward::create(d_model, d_ff, Activation::kRelu, rng);
  return l;
}

Tensor DecoderLayer::forward(const Tensor& x, const Tensor& memory,
                             const ForwardContext& ctx) const {
  Tensor h = self_norm.forward(x);
  Tensor y = add(x, ctx.drop(self_attn.forward(h, h, true, ctx)));
  h = src_norm.forward(y);
  y = add(y, ctx.drop(src_attn.forward(h, memory, false, ctx)));
  return add(y, ctx.drop(ffn.forward(ffn_norm.forward(y), ctx)));
}

void DecoderLayer::collect(const std::string& prefix, NamedParams& out) const {
  self_norm.collect(prefix + ".self_norm", out);
  self_attn.collect(prefix + ".self_attn", out);
  src_norm.collect(prefix + ".src_norm", out);
  src_attn.collect(prefix + ".src_attn", out);
  ffn_norm.collect(prefix + ".ffn_norm", out);
  ffn.collect(prefix + ".ffn", out);
}

Decoder Decoder::create(int vocab, int d_model, int heads, int d_ff,
                        int n_layers, std::mt19937& rng) {
  Decoder d;
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> table(static_cast<size_t>(vocab) * d_model);
  for (float& v : table) v = n(rng);
  d.embedding = Tensor({vocab, d_model}, std::move(table));
  d.embedding.set_requires_grad(true);
  for (int i = 0; i < n_layers; ++i) {
    d.layers.push_back(DecoderLayer::create(d_model, heads, d_ff, rng));
  }
  d.final_norm = LayerNorm::create(d_model);
  d.output = Linear::create(d_model, vocab, rng);
  return d;
}

Tensor Decoder::forward(std::span<const int> inputs, const Tensor& memory,
                        const ForwardContext& ctx) const {
  if (inputs.empty()) throw ContractError("decoder: empty input sequence");
  const int d = embedding.dim(1);
  Tensor x = add(aformer::embedding(embedding, inputs),
             positional_encoding(static_cast<int>(inputs.size()), d));
  x = ctx.drop(x);
  for (const DecoderLayer& l : layers) x = l.forward(x, memory, ctx);
  return output.forward(final_norm.forward(x));
}

void Decoder::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".embedding", embedding);
  for (size_t i = 0; i < layers.size(); ++i) {
    layers[i].collect(prefix + ".layer" + std::to_string(i), out);
  }
  final_norm.collect(prefix + ".final_norm", out);
  output.collect(prefix + ".output", out);
}

AformerModel AformerModel::create(const ModelConfig& config, uint64_t seed) {
  config.validate();
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
  std::mt19937 rng(seq);
  AformerModel m;
  m.config_ = config;
  m.frontend_ = Subsampling::create(config.feat_dim, config.subsample_channels,
                                    config.d_model, rng);
  m.general_ = GeneralEncoder::create(config.general_blocks, config.d_model,
                                      config.heads, config.d_ff,
                                      config.conv_kernel, rng);
  m.accent_ = AccentEncoder::create(config.accent, config.d_model, config.heads, rng);
  if (config.accent.kind != AccentKind::kNone) {
    check_encoder_pair(config.d_model, m.accent_);
    m.fusion_ = Fusion::create(config.fusion, config.d_model, config.d_att, rng);
  }
  m.ctc_head_ = Linear::create(config.d_model, config.vocab, rng);
  m.decoder_ = Decoder::create(config.vocab, config.d_model, config.heads,
                               config.d_ff, config.decoder_layers, rng);
  return m;
}

EncoderOutput AformerModel::encode(const Tensor& feats,
                                   const ForwardContext& ctx) const {
  if (feats.rank() != 2 || feats.dim(1) != config_.feat_dim) {
    throw DimensionError("model: expected features [T x " +
                         std::to_string(config_.feat_dim) + "], got " +
                         shape_str(feats.shape()));
  }
  Tensor x = frontend_.forward(feats);
  x = ctx.drop(add(x, positional_encoding(x.dim(0), config_.d_model)));
  EncoderOutput out;
  out.general = general_.forward(x, ctx);
  if (config_.accent.kind == AccentKind::kNone) {
    out.fused = out.general;
  } else {
    out.accent = accent_.forward(x, ctx);
    out.fused = fusion_.forward(out.general, out.accent);
  }
  return out;
}

ModelOutput AformerModel::forward(const Tensor& feats, std::span<const int> target,
                                  const ForwardContext& ctx) const {
  const int eos = config_.sos_eos();
  for (int id : target) {
    if (id <= config_.blank() || id >= eos) {
      throw DataError(DataError::Reason::kVocab,
                      "model: target token " + std::to_string(id) +
                          " outside the output vocabulary");
    }
  }
  ModelOutput out;
  out.enc = encode(feats, ctx);
  out.ctc_logits = ctc_head_.forward(out.enc.fused);
  std::vector<int> inputs;
  inputs.reserve(target.size() + 1);
  inputs.push_back(eos);
  inputs.insert(inputs.end(), target.begin(), target.end());
  out.decoder_logits = decoder_.forward(inputs, out.enc.fused, ctx);
  return out;
}

NamedParams AformerModel::named_parameters() const {
  NamedParams out;
  frontend_.collect(kFrontendPrefix, out);
  general_.collect(kGeneralPrefix, out);
  if (config_.accent.kind != AccentKind::kNone) {
    accent_.collect(kAccentPrefix, out);
    fusion_.collect(kFusionPrefix, out);
  }
  ctc_head_.collect(kCtcPrefix, out);
  decoder_.collect(kDecoderPrefix, out);
  return out;
}

void AformerModel::load_parameters(const NamedParams& values) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : values) by_name[name] = &t;
  NamedParams mine = named_parameters();
  if (by_name.size() != mine.size()) {
    throw DataError(DataError::Reason::kIntegrity,
                    "parameter set holds " + std::to_string(by_name.size()) +
                        " tensors, model expects " + std::to_string(mine.size()));
  }
  for (auto& [name, dst] : mine) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw DataError(DataError::Reason::kIntegrity, "missing parameter " + name);
    }
    if (it->second->shape() != dst.shape()) {
      throw DimensionError("parameter " + name + " has shape " +
                           shape_str(it->second->shape()) + ", model expects " +
                           shape_str(dst.shape()));
    }
    std::copy(it->second->data().begin(), it->second->data().end(), dst.data().begin());
  }
}

AformerModel AformerModel::deep_copy() const {
  AformerModel copy = create(config_, 0);
  copy.load_parameters(named_parameters());
  return copy;
}

Tensor attention_loss(const Tensor& decoder_logits, std::span<const int> target,
                      int eos, float smoothing) {
  if (decoder_logits.rank() != 2 ||
      decoder_logits.dim(0) != static_cast<int>(target.size()) + 1) {
    throw DimensionError("attention_loss: logits " + shape_str(decoder_logits.shape()) +
                         " do not cover target length " +
                         std::to_string(target.size()) + " plus end symbol");
  }
  std::vector<int> labels(target.begin(), target.end());
  labels.push_back(eos);
  return label_smoothed_cross_entropy(decoder_logits, labels, smoothing);
}

BatchLoss hybrid_loss(double att, double ctc, double ctc_weight) {
  if (!(ctc_weight >= 0.0 && ctc_weight <= 1.0)) {
    throw ConfigError("hybrid_loss: ctc weight must lie in [0, 1], got " +
                      std::to_string(ctc_weight));
  }
  BatchLoss b;
  b.att_component = att;
  b.ctc_component = ctc;
  b.total = (1.0 - ctc_weight) * att + ctc_weight * ctc;
  return b;
}

Tensor hybrid_loss(const Tensor& att, const Tensor& ctc, float ctc_weight) {
  if (!(ctc_weight >= 0.0f && ctc_weight <= 1.0f)) {
    throw ConfigError("hybrid_loss: ctc weight must lie in [0, 1]");
  }
  return add(scale(att, 1.0f - ctc_weight), scale(ctc, ctc_weight));
}

UtteranceObjective utterance_objective(const AformerModel& model,
                                       const Tensor& feats,
                                       std::span<const int> target,
                                       const ForwardContext& ctx) {
  const ModelConfig& c = model.config();
  ModelOutput out = model.forward(feats, target, ctx);
  const Tensor att = attention_loss(out.decoder_logits, target, c.sos_eos(),
                                    c.label_smoothing);
  const Tensor ctc = ctc_loss(out.ctc_logits, target, c.blank());
  UtteranceObjective o;
  o.loss = hybrid_loss(att, ctc, c.ctc_weight);
  o.values.att = att.item();
  o.values.ctc = ctc.item();
  o.values.total = o.loss.item();
  return o;
}

nlohmann::json model_config_json(const ModelConfig& c) {
  return {{"feat_dim", c.feat_dim},
          {"subsample_channels", c.subsample_channels},
          {"d_model", c.d_model},
          {"heads", c.heads},
          {"d_ff", c.d_ff},
          {"general_blocks", c.general_blocks},
          {"conv_kernel", c.conv_kernel},
          {"accent",
           {{"kind", to_string(c.accent.kind)},
            {"depth", c.accent.depth},
            {"d_ff", c.accent.d_ff},
            {"lstm_hidden", c.accent.lstm_hidden}}},
          {"fusion", to_string(c.fusion)},
          {"d_att", c.d_att},
          {"decoder_layers", c.decoder_layers},
          {"vocab", c.vocab},
          {"dropout", c.dropout},
          {"label_smoothing", c.label_smoothing},
          {"ctc_weight", c.ctc_weight}};
}

ModelConfig parse_model_config(const nlohmann::json& j, const std::string& where,
                               ModelConfig c) {
  StrictObject o(j, where);
  o.get("feat_dim", c.feat_dim);
  o.get("subsample_channels", c.subsample_channels);
  o.get("d_model", c.d_model);
  o.get("heads", c.heads);
  o.get("d_ff", c.d_ff);
  o.get("general_blocks", c.general_blocks);
  o.get("conv_kernel", c.conv_kernel);
  if (const nlohmann::json* a = o.child("accent")) {
    StrictObject ao(*a, o.path("accent"));
    std::string kind = to_string(c.accent.kind);
    ao.get("kind", kind);
    c.accent.kind = accent_kind_from_string(kind);
    ao.get("depth", c.accent.depth);
    ao.get("d_ff", c.accent.d_ff);
    ao.get("lstm_hidden", c.accent.lstm_hidden);
    ao.finish();
  }
  std::string fusion = to_string(c.fusion);
  o.get("fusion", fusion);
  c.fusion = fusion_kind_from_string(fusion);
  o.get("d_att", c.d_att);
  o.get("decoder_layers", c.decoder_layers);
  o.get("vocab", c.vocab);
  o.get("dropout", c.dropout);
  o.get("label_smoothing", c.label_smoothing);
  o.get("ctc_weight", c.ctc_weight);
  o.finish();
  return c;
}

std::string model_config_to_json(const ModelConfig& config) {
  return model_config_json(config).dump();
}

ModelConfig model_config_from_json(const std::string& json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  ModelConfig c = parse_model_config(j, "model", ModelConfig{});
  c.validate();
  return c;
}

void save_checkpoint(const std::string& path, const AformerModel& model,
                     const CheckpointMeta& meta) {
  const nlohmann::json j = {{"config", model_config_json(model.config())},
                            {"pass", meta.pass_id},
                            {"global_step", meta.global_step},
                            {"seed", meta.seed},
                            {"config_hash", meta.config_hash},
                            {"init", meta.init_checkpoint},
                            {"lineage", meta.lineage},
                            {"lineage_passes", meta.lineage_passes}};
  const std::string text = j.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kCheckpointMagic, 4);
  binary::put_u32(os, kCheckpointVersion);
  binary::put_u32(os, static_cast<uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  const NamedParams params = model.named_parameters();
  binary::put_u32(os, static_cast<uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    binary::put_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    binary::put_u32(os, static_cast<uint32_t>(t.rank()));
    for (int e : t.shape()) binary::put_u32(os, static_cast<uint32_t>(e));
    binary::put_f32s(os, t.data());
  }
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

namespace {

// Whole-file cursor with bounds checks that name the byte offset.
class ByteCursor {
 public:
  ByteCursor(std::string bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  const char* take(size_t n, const char* what) {
    if (pos_ + n > bytes_.size()) {
      throw DataError(DataError::Reason::kTruncated,
                      path_ + ": truncated " + what + " at byte offset " +
                          std::to_string(pos_));
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  uint32_t u32(const char* what) { return binary::get_u32(take(4, what)); }
  std::string str(size_t n, const char* what) { return std::string(take(n, what), n); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::string path_;
  size_t pos_ = 0;
};

ByteCursor open_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  ByteCursor cur(std::move(bytes), path);
  if (std::memcmp(cur.take(4, "magic"), kCheckpointMagic, 4) != 0) {
    throw DataError(DataError::Reason::kMagic, "not an AFMT checkpoint: " + path);
  }
  const uint32_t version = cur.u32("version");
  if (version != kCheckpointVersion) {
    throw DataError(DataError::Reason::kMagic,
                    "unsupported checkpoint version " + std::to_string(version));
  }
  return cur;
}

CheckpointMeta parse_meta(ByteCursor& cur, const std::string& path) {
  const uint32_t len = cur.u32("metadata length");
  const std::string text = cur.str(len, "metadata");
  CheckpointMeta m;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    m.config = parse_model_config(j.at("config"), "model", ModelConfig{});
    m.pass_id = j.at("pass").get<std::string>();
    m.global_step = j.at("global_step").get<int64_t>();
    m.seed = j.at("seed").get<uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.init_checkpoint = j.at("init").get<std::string>();
    m.lineage = j.at("lineage").get<std::vector<std::string>>();
    m.lineage_passes = j.at("lineage_passes").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataError::Reason::kIntegrity,
                    path + ": malformed checkpoint metadata: " + e.what());
  }
  return m;
}

}  // namespace

CheckpointMeta read_checkpoint_meta(const std::string& path) {
  ByteCursor cur = open_checkpoint(path);
  return parse_meta(cur, path);
}

AformerModel load_checkpoint(const std::string& path, CheckpointMeta* meta) {
  ByteCursor cur = open_checkpoint(path);
  CheckpointMeta m = parse_meta(cur, path);
  const uint32_t count = cur.u32("parameter count");
  NamedParams values;
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = cur.str(cur.u32("name length"), "parameter name");
    const uint32_t rank = cur.u32("rank");
    if (rank == 0 || rank > 8) {
      throw DataError(DataError::Reason::kIntegrity,
                      path + ": parameter " + name + " has rank " + std::to_string(rank));
    }
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<int>(cur.u32("extent"));
    Tensor t(shape);
    const size_t bytes = 4 * t.numel();
    binary::get_f32s(cur.take(bytes, "parameter data"), t.data());
    values.emplace_back(std::move(name), std::move(t));
  }
  if (!cur.done()) {
    throw DataError(DataError::Reason::kIntegrity, path + ": trailing bytes after parameters");
  }
  AformerModel model = AformerModel::create(m.config, 0);
  model.load_parameters(values);
  if (meta) *meta = std::move(m);
  return model;
}

}  // namespace aformer
