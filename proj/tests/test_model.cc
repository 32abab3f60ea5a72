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

#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "aformer/ctc.h"
#include "aformer/errors.h"
#include "aformer/model.h"
#include "aformer/ops.h"
#include "oracles.h"

namespace aformer {
namespace {

namespace fs = std::filesystem;

ModelConfig small_config() {
  ModelConfig c = ModelConfig::desk();
  c.vocab = 8;
  return c;
}

ModelConfig micro_config() {
  ModelConfig c;
  c.feat_dim = 8;
  c.subsample_channels = 2;
  c.d_model = 8;
  c.heads = 2;
  c.d_ff = 8;
  c.general_blocks = 1;
  c.conv_kernel = 3;
  c.accent = {AccentKind::kTransformer, 1, 8, 4};
  c.fusion = FusionKind::kCrossAttention;
  c.d_att = 4;
  c.decoder_layers = 1;
  c.vocab = 5;
  c.dropout = 0.0f;
  return c;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("aformer_model_" + std::to_string(::getpid()) + "_" + name);
}

void expect_bitwise(const Tensor& a, const Tensor& b) {
  ASSERT_EQ(a.shape(), b.shape());
  for (size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a.data()[i], b.data()[i]) << i;
}

TEST(ModelConfig, ProfilesValidate) {
  EXPECT_NO_THROW(ModelConfig::desk().validate());
  const ModelConfig full = ModelConfig::full();
  EXPECT_NO_THROW(full.validate());
  EXPECT_EQ(full.d_model, 256);
  EXPECT_EQ(full.heads, 4);
  EXPECT_EQ(full.d_ff, 2048);
  EXPECT_EQ(full.general_blocks, 12);
  EXPECT_EQ(full.conv_kernel, 15);
  EXPECT_EQ(full.accent.depth, 4);
  EXPECT_FLOAT_EQ(full.ctc_weight, 0.3f);
  EXPECT_FLOAT_EQ(full.label_smoothing, 0.1f);
}

TEST(ModelConfig, ValidationNamesViolations) {
  auto expect_bad = [](auto mutate) {
    ModelConfig c = ModelConfig::desk();
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  expect_bad([](ModelConfig& c) { c.vocab = 2; });
  expect_bad([](ModelConfig& c) { c.ctc_weight = 1.5f; });
  expect_bad([](ModelConfig& c) { c.heads = 3; });
  expect_bad([](ModelConfig& c) { c.conv_kernel = 4; });
  expect_bad([](ModelConfig& c) { c.feat_dim = 6; });
  expect_bad([](ModelConfig& c) { c.dropout = 1.0f; });
}

TEST(Model, OutputShapes) {
  const AformerModel model = AformerModel::create(small_config(), 1);
  std::mt19937 rng(61);
  const Tensor feats = oracle::random_tensor({32, 16}, rng);
  const std::vector<int> target = {1, 2, 3, 4, 5};
  const ModelOutput out = model.forward(feats, target, ForwardContext{});
  EXPECT_EQ(out.ctc_logits.shape(), (Shape{7, 8}));
  EXPECT_EQ(out.decoder_logits.shape(), (Shape{6, 8}));
  EXPECT_EQ(out.enc.fused.shape(), (Shape{7, 32}));
}

TEST(Model, AddFusionWithSilentAccentPathPassesGeneralThrough) {
  AformerModel model = AformerModel::create(small_config(), 2);
  // A zero final norm makes the transformer accent encoder emit exact zeros.
  LayerNorm& last = model.accent_encoder().layers.back().norm2;
  for (float& v : last.gamma.data()) v = 0.0f;
  for (float& v : last.beta.data()) v = 0.0f;
  std::mt19937 rng(62);
  const EncoderOutput enc = model.encode(oracle::random_tensor({20, 16}, rng), ForwardContext{});
  for (float v : enc.accent.data()) ASSERT_EQ(v, 0.0f);
  expect_bitwise(enc.fused, enc.general);
}

TEST(Model, NoAccentEncoderFusesToGeneral) {
  ModelConfig c = small_config();
  c.accent.kind = AccentKind::kNone;
  const AformerModel model = AformerModel::create(c, 3);
  std::mt19937 rng(63);
  const EncoderOutput enc = model.encode(oracle::random_tensor({20, 16}, rng), ForwardContext{});
  EXPECT_FALSE(enc.accent.defined());
  expect_bitwise(enc.fused, enc.general);
  for (const auto& [name, t] : model.named_parameters()) {
    EXPECT_NE(name.rfind(kAccentPrefix, 0), 0u) << name;
  }
}

TEST(Model, EvalModeIsDeterministic) {
  const AformerModel model = AformerModel::create(small_config(), 4);
  std::mt19937 rng(64);
  const Tensor feats = oracle::random_tensor({25, 16}, rng);
  const std::vector<int> target = {3, 1, 2};
  const ModelOutput a = model.forward(feats, target, ForwardContext{});
  const ModelOutput b = model.forward(feats, target, ForwardContext{});
  expect_bitwise(a.ctc_logits, b.ctc_logits);
  expect_bitwise(a.decoder_logits, b.decoder_logits);
}

TEST(Model, SameSeedSameParameters) {
  const auto a = AformerModel::create(small_config(), 9).named_parameters();
  const auto b = AformerModel::create(small_config(), 9).named_parameters();
  const auto c = AformerModel::create(small_config(), 10).named_parameters();
  ASSERT_EQ(a.size(), b.size());
  bool any_differs = false;
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    expect_bitwise(a[i].second, b[i].second);
    for (size_t k = 0; k < a[i].second.numel(); ++k) {
      any_differs |= a[i].second.data()[k] != c[i].second.data()[k];
    }
  }
  EXPECT_TRUE(any_differs);
}

TEST(Model, DecoderIsCausal) {
  const AformerModel model = AformerModel::create(small_config(), 5);
  std::mt19937 rng(65);
  const EncoderOutput enc = model.encode(oracle::random_tensor({20, 16}, rng), ForwardContext{});
  const std::vector<int> inputs = {7, 1, 2, 3, 4, 5};
  const Tensor base = model.decoder_logits(inputs, enc.fused, ForwardContext{});
  for (size_t j = 1; j < inputs.size(); ++j) {
    std::vector<int> changed = inputs;
    changed[j] = changed[j] % 6 + 1;
    const Tensor moved = model.decoder_logits(changed, enc.fused, ForwardContext{});
    for (size_t t = 0; t < j; ++t) {
      for (int k = 0; k < 8; ++k) {
        ASSERT_EQ(base.at(static_cast<int>(t), k), moved.at(static_cast<int>(t), k))
            << "position " << t << " saw token " << j;
      }
    }
    bool later_changed = false;
    for (int k = 0; k < 8; ++k) later_changed |= base.at(j, k) != moved.at(j, k);
    EXPECT_TRUE(later_changed);
  }
}

TEST(Model, ForwardErrors) {
  const AformerModel model = AformerModel::create(small_config(), 6);
  std::mt19937 rng(66);
  EXPECT_THROW(model.forward(oracle::random_tensor({6, 16}, rng), std::vector<int>{1}, {}),
               DimensionError);
  try {
    model.forward(oracle::random_tensor({20, 16}, rng), std::vector<int>{1, 8}, {});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.reason, DataError::Reason::kVocab);
  }
  EXPECT_THROW(model.forward(oracle::random_tensor({20, 16}, rng), std::vector<int>{0}, {}),
               DataError);
}

TEST(HybridLoss, WorkedExampleAndEndpoints) {
  EXPECT_NEAR(hybrid_loss(2.0, 5.0, 0.3).total, 2.9, 1e-12);
  EXPECT_DOUBLE_EQ(hybrid_loss(2.0, 5.0, 0.0).total, 2.0);
  EXPECT_DOUBLE_EQ(hybrid_loss(2.0, 5.0, 1.0).total, 5.0);
  const BatchLoss b = hybrid_loss(1.25, 3.5, 0.3);
  EXPECT_EQ(b.att_component, 1.25);
  EXPECT_EQ(b.ctc_component, 3.5);
  EXPECT_NEAR(b.total, 0.7 * 1.25 + 0.3 * 3.5, 1e-12);
  EXPECT_THROW(hybrid_loss(1.0, 1.0, -0.1), ConfigError);
  EXPECT_THROW(hybrid_loss(1.0, 1.0, 1.1), ConfigError);
}

TEST(HybridLoss, AffineInWeight) {
  for (double w : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
    const double total = hybrid_loss(1.7, 4.2, w).total;
    EXPECT_NEAR(total, 1.7 + w * (4.2 - 1.7), 1e-12);
  }
  const Tensor att = Tensor::scalar(2.0f), ctc = Tensor::scalar(5.0f);
  EXPECT_NEAR(hybrid_loss(att, ctc, 0.3f).item(), 2.9, 1e-6);
}

TEST(AttentionLoss, MatchesSmoothedCrossEntropyOverTargetPlusEnd) {
  std::mt19937 rng(67);
  const Tensor logits = oracle::random_tensor({4, 6}, rng);
  const std::vector<int> target = {2, 1, 3};
  const double want = oracle::smoothed_ce(oracle::to_matrix(logits), {2, 1, 3, 5}, 0.1);
  EXPECT_NEAR(attention_loss(logits, target, 5, 0.1f).item(), want, 1e-5);
  EXPECT_THROW(attention_loss(logits, std::vector<int>{1}, 5, 0.1f), Error);
}

TEST(UtteranceObjective, CombinesComponents) {
  const AformerModel model = AformerModel::create(small_config(), 7);
  std::mt19937 rng(68);
  const Tensor feats = oracle::random_tensor({40, 16}, rng);
  const std::vector<int> target = {1, 2, 2, 3};
  const UtteranceObjective o = utterance_objective(model, feats, target, ForwardContext{});
  EXPECT_NEAR(o.values.total, 0.7 * o.values.att + 0.3 * o.values.ctc, 1e-5);
  EXPECT_NEAR(o.loss.item(), o.values.total, 1e-5);
  const ModelOutput out = model.forward(feats, target, ForwardContext{});
  EXPECT_NEAR(o.values.ctc, ctc_loss(out.ctc_logits, target, 0).item(), 1e-5);
}

TEST(Model, FullGradientCheckOnMicroConfig) {
  const AformerModel model = AformerModel::create(micro_config(), 8);
  std::mt19937 rng(69);
  Tensor feats = oracle::random_tensor({8, 8}, rng);
  const std::vector<int> target = {2};
  std::vector<std::pair<std::string, Tensor>> inputs;
  for (const auto& p : model.named_parameters()) inputs.push_back(p);
  const auto check = oracle::check_gradients(
      [&] { return reshape(utterance_objective(model, feats, target, {}).loss, {1, 1}); }, inputs,
      11);
  EXPECT_TRUE(check.ok(1e-2)) << check.worst_input << " " << check.worst_rel;
}

TEST(Model, DeepCopyIsIndependent) {
  const AformerModel model = AformerModel::create(small_config(), 12);
  AformerModel copy = model.deep_copy();
  Tensor w = copy.named_parameters().front().second;
  const float before = model.named_parameters().front().second.data()[0];
  w.data()[0] += 1.0f;
  EXPECT_EQ(model.named_parameters().front().second.data()[0], before);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  const AformerModel model = AformerModel::create(small_config(), 13);
  CheckpointMeta meta;
  meta.config = model.config();
  meta.pass_id = "A2";
  meta.global_step = 42;
  meta.seed = 99;
  meta.config_hash = "abc123";
  meta.init_checkpoint = "a1.ckpt";
  meta.lineage = {"a1.ckpt"};
  meta.lineage_passes = {"A1"};
  const fs::path path = temp_path("roundtrip.ckpt");
  save_checkpoint(path.string(), model, meta);

  CheckpointMeta back;
  const AformerModel loaded = load_checkpoint(path.string(), &back);
  EXPECT_EQ(back.config, model.config());
  EXPECT_EQ(back.pass_id, "A2");
  EXPECT_EQ(back.global_step, 42);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.config_hash, "abc123");
  EXPECT_EQ(back.lineage, meta.lineage);
  EXPECT_EQ(back.lineage_passes, meta.lineage_passes);
  EXPECT_EQ(read_checkpoint_meta(path.string()).pass_id, "A2");
  const auto a = model.named_parameters(), b = loaded.named_parameters();
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    expect_bitwise(a[i].second, b[i].second);
  }
  fs::remove(path);
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  const AformerModel model = AformerModel::create(small_config(), 14);
  CheckpointMeta meta;
  meta.config = model.config();
  meta.pass_id = "A1";
  const fs::path path = temp_path("corrupt.ckpt");
  save_checkpoint(path.string(), model, meta);
  std::string bytes;
  {
    std::ifstream is(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(is), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(b.data(), static_cast<std::streamsize>(b.size()));
  };
  auto reason_of = [&]() {
    try {
      load_checkpoint(path.string());
    } catch (const DataError& e) {
      return e.reason;
    }
    return DataError::Reason::kOther;
  };

  std::string bad = bytes;
  bad[0] = 'X';
  write(bad);
  EXPECT_EQ(reason_of(), DataError::Reason::kMagic);
  write(bytes.substr(0, bytes.size() - 7));
  EXPECT_EQ(reason_of(), DataError::Reason::kTruncated);
  write(bytes + "junk");
  EXPECT_EQ(reason_of(), DataError::Reason::kIntegrity);
  fs::remove(path);
  EXPECT_THROW(load_checkpoint(path.string()), IoError);
}

TEST(Checkpoint, ConfigJsonRoundTrip) {
  const ModelConfig c = ModelConfig::full();
  EXPECT_EQ(model_config_from_json(model_config_to_json(c)), c);
  EXPECT_THROW(model_config_from_json("{\"d_model\": 8, \"bogus\": 1}"), ConfigError);
}

}  // namespace
}  // namespace aformer
