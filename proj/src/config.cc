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

#include "aformer/config.h"

#include <fstream>
#include <sstream>

#include "aformer/errors.h"
#include "json_util.h"

namespace aformer {

namespace {

using nlohmann::json;

json data_json(const DataConfig& d) {
  const GenerationParams& g = d.generation;
  const AccentFamily& f = d.family;
  return {{"world_seed", d.world_seed},
          {"feat_dim", d.feat_dim},
          {"clean_train", d.clean_train},
          {"accent_train", d.accent_train},
          {"test_utterances", d.test_utterances},
          {"cmvn", to_string(d.cmvn)},
          {"generation",
           {{"min_tokens", g.min_tokens},
            {"max_tokens", g.max_tokens},
            {"min_frames_per_token", g.min_frames_per_token},
            {"max_frames_per_token", g.max_frames_per_token},
            {"frames_per_unit", g.frames_per_unit},
            {"noise", g.noise},
            {"speaker_offset", g.speaker_offset}}},
          {"accent_family",
           {{"seed", f.seed},
            {"strength", f.strength},
            {"individual", f.individual},
            {"bias_scale", f.bias_scale},
            {"perturbation_scale", f.perturbation_scale},
            {"stretch_spread", f.stretch_spread},
            {"noise", f.noise}}}};
}

json train_json(const TrainConfig& t) {
  return {{"batch_size", t.batch_size},     {"pretrain_steps", t.pretrain_steps},
          {"adapt_steps", t.adapt_steps},   {"retrain_steps", t.retrain_steps},
          {"finetune_steps", t.finetune_steps}, {"warmup", t.warmup},
          {"lr_base", t.lr_base},           {"beta1", t.beta1},
          {"beta2", t.beta2},               {"eps", t.eps},
          {"grad_clip", t.grad_clip},       {"bucket_batches", t.bucket_batches},
          {"log_every", t.log_every}};
}

json experiment_json(const ExperimentConfig& c) {
  return {{"model", model_config_json(c.model)},
          {"data", data_json(c.data)},
          {"train", train_json(c.train)},
          {"decode", {{"beam", c.decode.beam}, {"ctc_weight", c.decode.ctc_weight}}},
          {"seed", c.seed}};
}

void parse_data(const json& j, DataConfig& d) {
  StrictObject o(j, "data");
  o.get("world_seed", d.world_seed);
  o.get("feat_dim", d.feat_dim);
  o.get("clean_train", d.clean_train);
  o.get("accent_train", d.accent_train);
  o.get("test_utterances", d.test_utterances);
  std::string cmvn = to_string(d.cmvn);
  o.get("cmvn", cmvn);
  d.cmvn = cmvn_mode_from_string(cmvn);
  if (const json* g = o.child("generation")) {
    StrictObject go(*g, "data.generation");
    GenerationParams& p = d.generation;
    go.get("min_tokens", p.min_tokens);
    go.get("max_tokens", p.max_tokens);
    go.get("min_frames_per_token", p.min_frames_per_token);
    go.get("max_frames_per_token", p.max_frames_per_token);
    go.get("frames_per_unit", p.frames_per_unit);
    go.get("noise", p.noise);
    go.get("speaker_offset", p.speaker_offset);
    go.finish();
  }
  if (const json* f = o.child("accent_family")) {
    StrictObject fo(*f, "data.accent_family");
    AccentFamily& a = d.family;
    fo.get("seed", a.seed);
    fo.get("strength", a.strength);
    fo.get("individual", a.individual);
    fo.get("bias_scale", a.bias_scale);
    fo.get("perturbation_scale", a.perturbation_scale);
    fo.get("stretch_spread", a.stretch_spread);
    fo.get("noise", a.noise);
    fo.finish();
  }
  o.finish();
}

void parse_train(const json& j, TrainConfig& t) {
  StrictObject o(j, "train");
  o.get("batch_size", t.batch_size);
  o.get("pretrain_steps", t.pretrain_steps);
  o.get("adapt_steps", t.adapt_steps);
  o.get("retrain_steps", t.retrain_steps);
  o.get("finetune_steps", t.finetune_steps);
  o.get("warmup", t.warmup);
  o.get("lr_base", t.lr_base);
  o.get("beta1", t.beta1);
  o.get("beta2", t.beta2);
  o.get("eps", t.eps);
  o.get("grad_clip", t.grad_clip);
  o.get("bucket_batches", t.bucket_batches);
  o.get("log_every", t.log_every);
  o.finish();
}

ExperimentConfig parse_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  StrictObject o(j, "");
  std::string profile = "desk";
  o.get("profile", profile);
  ExperimentConfig c = ExperimentConfig::profile(profile);
  if (const json* m = o.child("model")) c.model = parse_model_config(*m, "model", c.model);
  if (const json* d = o.child("data")) parse_data(*d, c.data);
  if (const json* t = o.child("train")) parse_train(*t, c.train);
  if (const json* d = o.child("decode")) {
    StrictObject dobj(*d, "decode");
    dobj.get("beam", c.decode.beam);
    dobj.get("ctc_weight", c.decode.ctc_weight);
    dobj.finish();
  }
  o.get("seed", c.seed);
  o.finish();
  c.validate();
  return c;
}

}  // namespace

std::string to_string(CmvnMode mode) {
  switch (mode) {
    case CmvnMode::kUtterance: return "utterance";
    case CmvnMode::kCorpus: return "corpus";
    case CmvnMode::kNone: return "none";
  }
  return "utterance";
}

CmvnMode cmvn_mode_from_string(const std::string& s) {
  if (s == "utterance") return CmvnMode::kUtterance;
  if (s == "corpus") return CmvnMode::kCorpus;
  if (s == "none") return CmvnMode::kNone;
  throw ConfigError("unknown cmvn mode '" + s + "'");
}

void DataConfig::validate() const {
  if (feat_dim < 7) throw ConfigError("data.feat_dim must be >= 7");
  if (clean_train < 1 || accent_train < 1 || test_utterances < 1) {
    throw ConfigError("data: corpus sizes must be >= 1");
  }
  const GenerationParams& g = generation;
  if (g.min_tokens < 1 || g.max_tokens < g.min_tokens) {
    throw ConfigError("data.generation: need 1 <= min_tokens <= max_tokens");
  }
  if (g.min_frames_per_token < 1 || g.max_frames_per_token < g.min_frames_per_token) {
    throw ConfigError("data.generation: need 1 <= min_frames_per_token <= max_frames_per_token");
  }
  if (g.frames_per_unit < 1) throw ConfigError("data.generation.frames_per_unit must be >= 1");
  if (g.noise < 0 || g.speaker_offset < 0 || family.noise < 0) {
    throw ConfigError("data: noise levels must be non-negative");
  }
  if (family.stretch_spread < 0 || family.stretch_spread >= 1) {
    throw ConfigError("data.accent_family.stretch_spread must lie in [0, 1)");
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (pretrain_steps < 0 || adapt_steps < 0 || retrain_steps < 0 || finetune_steps < 0) {
    throw ConfigError("train: step budgets must be >= 0");
  }
  if (warmup < 1) throw ConfigError("train.warmup must be >= 1");
  if (!(lr_base > 0)) throw ConfigError("train.lr_base must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) {
    throw ConfigError("train: Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0)) throw ConfigError("train.eps must be positive");
  if (!(grad_clip > 0)) throw ConfigError("train.grad_clip must be positive");
  if (bucket_batches < 1) throw ConfigError("train.bucket_batches must be >= 1");
  if (log_every < 1) throw ConfigError("train.log_every must be >= 1");
}

void DecodeConfig::validate() const {
  if (beam < 1) throw ConfigError("decode.beam must be >= 1");
  if (!(ctc_weight >= 0 && ctc_weight <= 1)) {
    throw ConfigError("decode.ctc_weight must lie in [0, 1]");
  }
}

ExperimentConfig ExperimentConfig::desk() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::full() {
  ExperimentConfig c;
  c.model = ModelConfig::full();
  c.data.feat_dim = c.model.feat_dim;
  c.train.warmup = 25000;
  c.train.lr_base = 1.0f;
  c.train.batch_size = 32;
  c.train.pretrain_steps = 100000;
  c.train.adapt_steps = 10000;
  c.train.retrain_steps = 50000;
  c.train.finetune_steps = 10000;
  c.decode.beam = 10;
  return c;
}

ExperimentConfig ExperimentConfig::profile(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "full") return full();
  throw ConfigError("unknown profile '" + name + "' (expected desk or full)");
}

void ExperimentConfig::validate() const {
  model.validate();
  data.validate();
  train.validate();
  decode.validate();
  if (model.feat_dim != data.feat_dim) {
    throw ConfigError("model.feat_dim (" + std::to_string(model.feat_dim) +
                      ") must equal data.feat_dim (" + std::to_string(data.feat_dim) + ")");
  }
}

std::string ExperimentConfig::to_json() const { return experiment_json(*this).dump(2); }

std::string ExperimentConfig::hash() const { return fnv1a_hex(experiment_json(*this).dump()); }

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_json(j);
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_experiment_config(ss.str());
}

ExperimentConfig apply_overrides(const ExperimentConfig& base,
                                 const std::vector<std::string>& overrides) {
  if (overrides.empty()) return base;
  json j = experiment_json(base);
  for (const std::string& ov : overrides) {
    const size_t eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + ov + "' is not of the form key=value");
    }
    const std::string key = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json* node = &j;
    std::stringstream path(key);
    std::string part;
    while (std::getline(path, part, '.')) {
      if (!node->is_object() || !node->contains(part)) {
        throw ConfigError("unknown config key " + key);
      }
      node = &(*node)[part];
    }
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;
    }
    if (node->is_object()) throw ConfigError("override " + key + " names a section, not a value");
    if (node->is_string() && !value.is_string()) value = raw;
    *node = value;
  }
  return parse_json(j);
}

}  // namespace aformer
