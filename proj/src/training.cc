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

#include "aformer/training.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "aformer/errors.h"
#include "json.hpp"

namespace aformer {

namespace fs = std::filesystem;

namespace {

bool matches_prefix(const std::string& name, const std::string& prefix) {
  if (prefix.empty()) return false;
  if (name.compare(0, prefix.size(), prefix) != 0) return false;
  return name.size() == prefix.size() || prefix.back() == '.' || name[prefix.size()] == '.';
}

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void emit(const ProgressFn& progress, const std::string& msg) {
  if (progress) progress(msg);
}

}  // namespace

void adam_step(const NamedParams& params, const TrainMask& mask, AdamState& state,
               float lr, const AdamOptions& options) {
  if (mask.size() != params.size()) {
    throw ContractError("adam_step: mask covers " + std::to_string(mask.size()) +
                        " parameters, expected " + std::to_string(params.size()));
  }
  ++state.step;
  const double b1 = options.beta1, b2 = options.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (size_t p = 0; p < params.size(); ++p) {
    if (!mask[p]) continue;
    const auto& [name, t] = params[p];
    Tensor param = t;
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.empty()) {
      m.assign(param.numel(), 0.0f);
      v.assign(param.numel(), 0.0f);
    } else if (m.size() != param.numel()) {
      throw DimensionError("adam_step: moment shape of " + name + " does not match parameter");
    }
    const bool has_grad = param.has_grad();
    const std::span<const float> g = param.grad();
    std::span<float> w = param.data();
    for (size_t i = 0; i < w.size(); ++i) {
      const double gi = has_grad ? g[i] : 0.0;
      m[i] = static_cast<float>(b1 * m[i] + (1.0 - b1) * gi);
      v[i] = static_cast<float>(b2 * v[i] + (1.0 - b2) * gi * gi);
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] = static_cast<float>(w[i] - lr * mhat / (std::sqrt(vhat) + options.eps));
    }
  }
}

float warmup_lr(int64_t step, int warmup, float base, int d_model) {
  if (step < 1) throw ContractError("warmup_lr: step must be >= 1");
  if (warmup < 1) throw ConfigError("warmup_lr: warmup must be >= 1");
  if (d_model < 1) throw ConfigError("warmup_lr: d_model must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return static_cast<float>(base / std::sqrt(static_cast<double>(d_model)) *
                            std::min(1.0 / std::sqrt(s), s * std::pow(w, -1.5)));
}

TrainMask apply_freeze(const NamedParams& params, const std::vector<std::string>& prefixes) {
  TrainMask mask(params.size(), true);
  for (const std::string& prefix : prefixes) {
    bool hit = false;
    for (size_t i = 0; i < params.size(); ++i) {
      if (matches_prefix(params[i].first, prefix)) {
        mask[i] = false;
        hit = true;
      }
    }
    if (!hit) throw ConfigError("freeze prefix '" + prefix + "' matches no parameter");
  }
  return mask;
}

double clip_grad_norm(const NamedParams& params, const TrainMask& mask, double max_norm) {
  double sq = 0.0;
  for (size_t p = 0; p < params.size(); ++p) {
    if (!mask[p] || !params[p].second.has_grad()) continue;
    for (float g : params[p].second.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
  if (norm > max_norm) {
    const float s = static_cast<float>(max_norm / norm);
    for (size_t p = 0; p < params.size(); ++p) {
      if (!mask[p] || !params[p].second.has_grad()) continue;
      Tensor t = params[p].second;
      for (float& g : t.mutable_grad()) g *= s;
    }
  }
  return norm;
}

std::vector<Example> prepare_examples(const std::vector<UtteranceRecord>& records,
                                      const Tokenizer& tokenizer, CmvnMode mode,
                                      const CmvnStats* corpus_stats) {
  if (mode == CmvnMode::kCorpus && !corpus_stats) {
    throw ContractError("prepare_examples: corpus CMVN needs statistics");
  }
  std::vector<Example> out;
  out.reserve(records.size());
  for (const UtteranceRecord& r : records) {
    std::vector<float> feats = r.features;
    if (mode == CmvnMode::kUtterance) {
      feats = cmvn(feats, r.frames, r.feat_dim);
    } else if (mode == CmvnMode::kCorpus) {
      corpus_stats->apply(feats, r.frames, r.feat_dim);
    }
    out.push_back({r.id, r.corpus_tag, Tensor({r.frames, r.feat_dim}, std::move(feats)),
                   tokenizer.tokenize(r.text)});
  }
  return out;
}

BatchSampler::BatchSampler(std::vector<const Example*> pool, int batch_size,
                           int bucket_batches, uint64_t seed,
                           std::map<std::string, double> corpus_weights)
    : pool_(std::move(pool)),
      batch_size_(batch_size),
      bucket_batches_(bucket_batches),
      rng_(seed) {
  if (pool_.empty()) throw ContractError("batch sampler: empty data pool");
  if (batch_size < 1 || bucket_batches < 1) {
    throw ConfigError("batch sampler: batch size and bucket size must be >= 1");
  }
  for (const Example* e : pool_) by_tag_[e->corpus_tag].push_back(e);
  for (const auto& [tag, w] : corpus_weights) {
    if (!by_tag_.count(tag)) throw ConfigError("corpus weight for unknown tag '" + tag + "'");
    if (!(w >= 0.0)) throw ConfigError("corpus weight for '" + tag + "' must be >= 0");
    if (w > 0.0) {
      weighted_tags_.push_back(tag);
      weights_.push_back(w);
    }
  }
  if (!corpus_weights.empty() && weighted_tags_.empty()) {
    throw ConfigError("corpus weights are all zero");
  }
  for (auto& [tag, list] : by_tag_) {
    std::shuffle(list.begin(), list.end(), rng_);
    tag_cursor_[tag] = 0;
  }
}

void BatchSampler::refill() {
  std::vector<const Example*> order = pool_;
  std::shuffle(order.begin(), order.end(), rng_);
  const size_t bucket = static_cast<size_t>(batch_size_) * bucket_batches_;
  queue_.clear();
  for (size_t start = 0; start < order.size(); start += bucket) {
    const size_t end = std::min(order.size(), start + bucket);
    std::stable_sort(order.begin() + start, order.begin() + end,
                     [](const Example* a, const Example* b) {
                       return a->feats.dim(0) < b->feats.dim(0);
                     });
    for (size_t b = start; b < end; b += batch_size_) {
      queue_.emplace_back(order.begin() + b,
                          order.begin() + std::min(end, b + static_cast<size_t>(batch_size_)));
    }
  }
  std::shuffle(queue_.begin(), queue_.end(), rng_);
  cursor_ = 0;
  ++epoch_;
}

const Example* BatchSampler::draw_weighted() {
  std::discrete_distribution<size_t> pick(weights_.begin(), weights_.end());
  const std::string& tag = weighted_tags_[pick(rng_)];
  auto& list = by_tag_[tag];
  size_t& cur = tag_cursor_[tag];
  if (cur == list.size()) {
    std::shuffle(list.begin(), list.end(), rng_);
    cur = 0;
  }
  return list[cur++];
}

std::vector<const Example*> BatchSampler::next() {
  if (!weights_.empty()) {
    std::vector<const Example*> batch;
    for (int i = 0; i < batch_size_; ++i) batch.push_back(draw_weighted());
    return batch;
  }
  if (cursor_ == queue_.size()) refill();
  return queue_[cursor_++];
}

std::string to_string(PassId id) {
  switch (id) {
    case PassId::kA1: return "A1";
    case PassId::kA2: return "A2";
    case PassId::kA3: return "A3";
    case PassId::kFinetune: return "finetune";
    case PassId::kPooledPretrain: return "pooled-pretrain";
  }
  return "A1";
}

PassId pass_id_from_string(const std::string& s) {
  if (s == "A1") return PassId::kA1;
  if (s == "A2") return PassId::kA2;
  if (s == "A3") return PassId::kA3;
  if (s == "finetune") return PassId::kFinetune;
  if (s == "pooled-pretrain") return PassId::kPooledPretrain;
  throw ConfigError("unknown pass id '" + s + "'");
}

PassSpec make_pass_spec(PassId id, const ExperimentConfig& config,
                        std::vector<std::string> corpora, std::string init_checkpoint) {
  PassSpec s;
  s.id = id;
  s.init_checkpoint = std::move(init_checkpoint);
  s.model = config.model;
  s.corpora = std::move(corpora);
  s.train = config.train;
  s.seed = config.seed;
  s.config_hash = config.hash();
  switch (id) {
    case PassId::kA1:
    case PassId::kPooledPretrain: s.steps = config.train.pretrain_steps; break;
    case PassId::kA2:
      s.steps = config.train.adapt_steps;
      s.frozen_prefixes = {kGeneralPrefix};
      break;
    case PassId::kA3: s.steps = config.train.retrain_steps; break;
    case PassId::kFinetune: s.steps = config.train.finetune_steps; break;
  }
  return s;
}

void validate_pass_spec(const PassSpec& spec) {
  const std::string id = to_string(spec.id);
  const bool needs_init = spec.id == PassId::kA2 || spec.id == PassId::kA3 ||
                          spec.id == PassId::kFinetune;
  if (needs_init && spec.init_checkpoint.empty()) {
    throw ConfigError("pass " + id + " requires an init checkpoint");
  }
  if (!needs_init && !spec.init_checkpoint.empty()) {
    throw ConfigError("pass " + id + " trains from scratch and takes no init checkpoint");
  }
  if (spec.id == PassId::kA2) {
    const bool freezes_general = std::any_of(
        spec.frozen_prefixes.begin(), spec.frozen_prefixes.end(), [](const std::string& p) {
          return p == kGeneralPrefix || p == std::string(kGeneralPrefix) + ".";
        });
    if (!freezes_general) {
      throw ConfigError("pass A2 must freeze every parameter under '" +
                        std::string(kGeneralPrefix) + "'");
    }
  }
  if (spec.corpora.empty()) throw ConfigError("pass " + id + " has no training corpora");
  if (spec.steps < 0) throw ConfigError("pass " + id + ": step budget must be >= 0");
  spec.train.validate();
}

namespace {

// Checks that `init_pass` may feed a pass of kind `id`.
void check_parent(PassId id, const std::string& init_pass, const std::string& path) {
  const auto bad = [&](const std::string& want) {
    throw ConfigError("pass " + to_string(id) + " must start from an " + want +
                      " checkpoint, but " + path + " was written by pass " + init_pass);
  };
  switch (id) {
    case PassId::kA2:
      if (init_pass != "A1") bad("A1");
      break;
    case PassId::kA3:
      if (init_pass != "A2") bad("A2");
      break;
    case PassId::kFinetune:
      if (init_pass != "A1" && init_pass != "pooled-pretrain") bad("A1 or pooled-pretrain");
      break;
    default: break;
  }
}

nlohmann::json step_json(const std::string& pass, const StepRecord& r) {
  return {{"event", "step"}, {"pass", pass},          {"step", r.step},
          {"loss", r.loss},  {"att", r.att},          {"ctc", r.ctc},
          {"lr", r.lr},      {"grad_norm", r.grad_norm}};
}

}  // namespace

PassResult run_pass(const PassSpec& spec,
                    const std::map<std::string, std::vector<Example>>& data,
                    const ProgressFn& progress) {
  validate_pass_spec(spec);
  const std::string pass = to_string(spec.id);

  std::vector<const Example*> pool;
  for (const std::string& tag : spec.corpora) {
    auto it = data.find(tag);
    if (it == data.end()) throw ConfigError("pass " + pass + ": corpus tag '" + tag + "' not found");
    if (it->second.empty()) throw DataError(DataError::Reason::kOther, "corpus '" + tag + "' is empty");
    for (const Example& e : it->second) pool.push_back(&e);
  }

  CheckpointMeta init_meta;
  PassResult result{spec.init_checkpoint.empty() ? AformerModel::create(spec.model, spec.seed)
                                                 : load_checkpoint(spec.init_checkpoint, &init_meta),
                    {}, {}};
  CheckpointMeta& meta = result.meta;
  meta.config = result.model.config();
  meta.pass_id = pass;
  meta.seed = spec.seed;
  meta.config_hash = spec.config_hash;
  meta.init_checkpoint = spec.init_checkpoint;
  if (!spec.init_checkpoint.empty()) {
    check_parent(spec.id, init_meta.pass_id, spec.init_checkpoint);
    meta.lineage = init_meta.lineage;
    meta.lineage.push_back(spec.init_checkpoint);
    meta.lineage_passes = init_meta.lineage_passes;
    meta.lineage_passes.push_back(init_meta.pass_id);
    meta.global_step = init_meta.global_step;
  }

  AformerModel& model = result.model;
  const NamedParams params = model.named_parameters();
  const TrainMask mask = apply_freeze(params, spec.frozen_prefixes);
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].second;
    t.set_requires_grad(mask[i]);
  }

  std::ofstream log;
  if (!spec.manifest_path.empty()) {
    log.open(spec.manifest_path, std::ios::trunc);
    if (!log) throw IoError("cannot write run manifest " + spec.manifest_path);
    log << nlohmann::json{{"event", "start"},
                          {"pass", pass},
                          {"init", spec.init_checkpoint},
                          {"seed", spec.seed},
                          {"config_hash", spec.config_hash},
                          {"corpora", spec.corpora},
                          {"frozen", spec.frozen_prefixes},
                          {"steps", spec.steps},
                          {"lineage", meta.lineage},
                          {"lineage_passes", meta.lineage_passes}}
               .dump()
        << "\n";
  }

  const ModelConfig& cfg = model.config();
  BatchSampler sampler(pool, spec.train.batch_size, spec.train.bucket_batches,
                       mix_seed(spec.seed, 1), spec.corpus_weights);
  std::seed_seq seq{static_cast<uint32_t>(spec.seed), static_cast<uint32_t>(spec.seed >> 32), 2u};
  std::mt19937 dropout_rng(seq);
  ForwardContext ctx{true, cfg.dropout, &dropout_rng};
  AdamState adam;
  const AdamOptions adam_opts{spec.train.beta1, spec.train.beta2, spec.train.eps};

  for (int64_t step = 1; step <= spec.steps; ++step) {
    const std::vector<const Example*> batch = sampler.next();
    for (const auto& [name, t] : params) {
      Tensor p = t;
      p.clear_grad();
    }
    StepRecord rec;
    rec.step = step;
    const float inv_batch = 1.0f / static_cast<float>(batch.size());
    for (const Example* e : batch) {
      UtteranceObjective obj = utterance_objective(model, e->feats, e->tokens, ctx);
      if (!std::isfinite(obj.values.total)) {
        throw NumericError("pass " + pass + ": non-finite loss on " + e->id);
      }
      backward(obj.loss, inv_batch);
      rec.loss += obj.values.total * inv_batch;
      rec.att += obj.values.att * inv_batch;
      rec.ctc += obj.values.ctc * inv_batch;
      rec.corpus_tags.push_back(e->corpus_tag);
    }
    rec.grad_norm = clip_grad_norm(params, mask, spec.train.grad_clip);
    rec.lr = warmup_lr(step, spec.train.warmup, spec.train.lr_base, cfg.d_model);
    adam_step(params, mask, adam, static_cast<float>(rec.lr), adam_opts);
    if (log.is_open() && (step % spec.train.log_every == 0 || step == spec.steps || step == 1)) {
      log << step_json(pass, rec).dump() << "\n";
    }
    if (step % spec.train.log_every == 0 || step == spec.steps) {
      std::ostringstream msg;
      msg << pass << " step " << step << "/" << spec.steps << " loss " << std::fixed
          << std::setprecision(4) << rec.loss << " (att " << rec.att << ", ctc " << rec.ctc
          << ") lr " << std::scientific << std::setprecision(3) << rec.lr;
      emit(progress, msg.str());
    }
    result.history.push_back(std::move(rec));
  }
  for (const auto& [name, t] : params) {
    Tensor p = t;
    p.clear_grad();
    p.set_requires_grad(true);
  }
  meta.global_step += spec.steps;

  if (!spec.out_checkpoint.empty()) save_checkpoint(spec.out_checkpoint, model, meta);
  if (log.is_open()) {
    log << nlohmann::json{{"event", "end"},
                          {"pass", pass},
                          {"checkpoint", spec.out_checkpoint},
                          {"global_step", meta.global_step},
                          {"final_loss", result.history.empty() ? 0.0 : result.history.back().loss}}
               .dump()
        << "\n";
  }
  return result;
}

std::vector<std::string> verify_lineage(const std::string& checkpoint) {
  const CheckpointMeta meta = read_checkpoint_meta(checkpoint);
  if (meta.lineage.size() != meta.lineage_passes.size()) {
    throw DataError(DataError::Reason::kIntegrity,
                    checkpoint + ": lineage paths and passes differ in length");
  }
  std::set<std::string> seen{fs::weakly_canonical(checkpoint).string()};
  std::vector<std::string> passes;
  for (size_t i = 0; i < meta.lineage.size(); ++i) {
    const std::string& path = meta.lineage[i];
    if (!fs::exists(path)) {
      throw DataError(DataError::Reason::kIntegrity, "lineage checkpoint " + path + " is missing");
    }
    if (!seen.insert(fs::weakly_canonical(path).string()).second) {
      throw DataError(DataError::Reason::kIntegrity, "lineage of " + checkpoint + " is cyclic");
    }
    const CheckpointMeta anc = read_checkpoint_meta(path);
    if (anc.pass_id != meta.lineage_passes[i]) {
      throw DataError(DataError::Reason::kIntegrity,
                      "lineage checkpoint " + path + " holds pass " + anc.pass_id +
                          ", expected " + meta.lineage_passes[i]);
    }
    passes.push_back(anc.pass_id);
  }
  passes.push_back(meta.pass_id);
  for (size_t i = 1; i < passes.size(); ++i) {
    check_parent(pass_id_from_string(passes[i]), passes[i - 1],
                 i - 1 < meta.lineage.size() ? meta.lineage[i - 1] : checkpoint);
  }
  const PassId own = pass_id_from_string(meta.pass_id);
  if ((own == PassId::kA1 || own == PassId::kPooledPretrain) && passes.size() != 1) {
    throw DataError(DataError::Reason::kIntegrity, checkpoint + ": a from-scratch pass has ancestors");
  }
  if (own != PassId::kA1 && own != PassId::kPooledPretrain && passes.size() < 2) {
    throw DataError(DataError::Reason::kIntegrity, checkpoint + ": lineage is incomplete");
  }
  return passes;
}

std::vector<std::string> token_symbols(const Tokenizer& tokenizer, std::span<const int> ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(tokenizer.symbol(id));
  return out;
}

ScoreReport evaluate(const AformerModel& model, const std::vector<Example>& test,
                     const std::string& test_set, const DecodeOptions& options,
                     Transcripts* hyps) {
  const Tokenizer tokenizer;
  ScoreReport report;
  report.test_set = test_set;
  for (const Example& e : test) {
    const DecodeResult r = decode(model, e.feats, options);
    report.add(edit_distance_align(std::span<const int>(e.tokens), std::span<const int>(r.tokens)),
               static_cast<int64_t>(e.tokens.size()));
    if (hyps) (*hyps)[e.id] = token_symbols(tokenizer, r.tokens);
  }
  return report;
}

namespace {

const char* const kTrainClean = "clean_train";
const char* const kTrainAccent = "accent_train";
const std::vector<std::pair<std::string, std::string>> kTestSets = {
    {"clean", "clean_test"},
    {"accent_in", "accent_in_test"},
    {"accent_out1", "accent_out1_test"},
    {"accent_out2", "accent_out2_test"}};

}  // namespace

CorpusSet generate_dataset(const DataConfig& config) {
  config.validate();
  const SyntheticWorld world = SyntheticWorld::create(config.world_seed, config.feat_dim);
  const uint64_t s = config.world_seed;
  const AccentSpec in = config.family.make("accent_in", mix_seed(s, 101), world);
  const AccentSpec out1 = config.family.make("accent_out1", mix_seed(s, 102), world);
  const AccentSpec out2 = config.family.make("accent_out2", mix_seed(s, 103), world);
  const GenerationParams& g = config.generation;
  CorpusSet c;
  c[kTrainClean] = generate_corpus(world, kTrainClean, mix_seed(s, 1), config.clean_train, nullptr, g);
  c[kTrainAccent] = generate_corpus(world, kTrainAccent, mix_seed(s, 2), config.accent_train, &in, g);
  const int n = config.test_utterances;
  c["clean_test"] = generate_corpus(world, "clean_test", mix_seed(s, 3), n, nullptr, g);
  c["accent_in_test"] = generate_corpus(world, "accent_in_test", mix_seed(s, 4), n, &in, g);
  c["accent_out1_test"] = generate_corpus(world, "accent_out1_test", mix_seed(s, 5), n, &out1, g);
  c["accent_out2_test"] = generate_corpus(world, "accent_out2_test", mix_seed(s, 6), n, &out2, g);
  return c;
}

void write_dataset(const std::string& dir, const CorpusSet& corpora, const DataConfig& config) {
  fs::create_directories(dir);
  for (const auto& [tag, records] : corpora) {
    const std::string accent = records.empty() ? "none" : records.front().accent_tag;
    write_corpus(dir + "/" + tag + ".afc", records,
                 make_manifest(tag, records, accent, config.world_seed));
  }
}

CorpusSet read_dataset(const std::string& dir) {
  CorpusSet c;
  std::vector<std::string> tags = {kTrainClean, kTrainAccent};
  for (const auto& [name, tag] : kTestSets) tags.push_back(tag);
  for (const std::string& tag : tags) {
    const std::string path = dir + "/" + tag + ".afc";
    if (!fs::exists(path)) throw IoError("missing corpus file " + path);
    c[tag] = load_corpus(path);
  }
  return c;
}

std::map<std::string, std::vector<Example>> prepare_dataset(const CorpusSet& corpora,
                                                            const DataConfig& config) {
  const Tokenizer tokenizer;
  CmvnStats stats;
  if (config.cmvn == CmvnMode::kCorpus) {
    std::vector<UtteranceRecord> train;
    for (const char* tag : {kTrainClean, kTrainAccent}) {
      auto it = corpora.find(tag);
      if (it != corpora.end()) train.insert(train.end(), it->second.begin(), it->second.end());
    }
    stats = CmvnStats::of_corpus(train);
  }
  std::map<std::string, std::vector<Example>> out;
  for (const auto& [tag, records] : corpora) {
    out[tag] = prepare_examples(records, tokenizer, config.cmvn, &stats);
  }
  return out;
}

std::string AblationReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(10) << "system";
  for (const auto& t : test_sets) os << std::right << std::setw(13) << t;
  os << "\n";
  for (const auto& s : systems) {
    os << std::left << std::setw(10) << s;
    for (const auto& t : test_sets) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(2) << 100.0 * scores.at(s).at(t).error_rate() << "%";
      os << std::right << std::setw(13) << cell.str();
    }
    os << "\n";
  }
  // Relative error reduction of the full multi-pass system over the
  // finetuned baseline, per accented test set.
  os << std::left << std::setw(10) << "c vs ft";
  for (const auto& t : test_sets) {
    const double ft = scores.at("finetune").at(t).error_rate();
    const double c = scores.at("c").at(t).error_rate();
    std::ostringstream cell;
    if (ft > 0) {
      cell << std::fixed << std::setprecision(1) << std::showpos << 100.0 * (ft - c) / ft << "%";
    } else {
      cell << "n/a";
    }
    os << std::right << std::setw(13) << cell.str();
  }
  os << "\n";
  return os.str();
}

AblationReport run_ablation(const ExperimentConfig& config, const std::string& out_dir,
                            const ProgressFn& progress) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(out_dir + "/ckpt");
  fs::create_directories(out_dir + "/logs");
  const std::string data_dir = out_dir + "/data";

  emit(progress, "generating synthetic corpora");
  const CorpusSet corpora = generate_dataset(config.data);
  write_dataset(data_dir, corpora, config.data);
  const auto data = prepare_dataset(corpora, config.data);

  const auto ckpt = [&](const std::string& n) { return out_dir + "/ckpt/" + n + ".ckpt"; };
  const auto run = [&](PassId id, const std::string& name, std::vector<std::string> corpora_tags,
                       const std::string& init, const ModelConfig& model) {
    PassSpec spec = make_pass_spec(id, config, std::move(corpora_tags), init);
    spec.model = model;
    spec.out_checkpoint = ckpt(name);
    spec.manifest_path = out_dir + "/logs/" + name + ".jsonl";
    emit(progress, "training " + name + " (" + to_string(id) + ", " +
                       std::to_string(spec.steps) + " steps)");
    return run_pass(spec, data, progress);
  };

  const std::vector<std::string> pooled = {kTrainClean, kTrainAccent};
  std::map<std::string, AformerModel> systems;
  systems.emplace("a1", run(PassId::kA1, "a1", {kTrainClean}, "", config.model).model);
  systems.emplace("a2", run(PassId::kPooledPretrain, "a2", pooled, "", config.model).model);
  systems.emplace("b", run(PassId::kA2, "b", {kTrainAccent}, ckpt("a1"), config.model).model);
  systems.emplace("c", run(PassId::kA3, "c", pooled, ckpt("b"), config.model).model);
  ModelConfig conformer = config.model;
  conformer.accent.kind = AccentKind::kNone;
  run(PassId::kA1, "conformer", {kTrainClean}, "", conformer);
  systems.emplace("finetune",
                  run(PassId::kFinetune, "finetune", {kTrainAccent}, ckpt("conformer"), conformer).model);

  AblationReport report;
  report.systems = {"a1", "a2", "b", "c", "finetune"};
  for (const auto& [name, tag] : kTestSets) report.test_sets.push_back(name);
  const DecodeOptions opts{config.decode.beam, config.decode.ctc_weight, std::nullopt};
  std::ofstream jsonl(out_dir + "/report.jsonl", std::ios::trunc);
  for (const std::string& s : report.systems) {
    report.checkpoints[s] = ckpt(s);
    for (const auto& [name, tag] : kTestSets) {
      emit(progress, "decoding " + name + " with " + s);
      const ScoreReport r = evaluate(systems.at(s), data.at(tag), name, opts);
      report.scores[s][name] = r;
      jsonl << nlohmann::json{{"system", s},
                              {"test_set", name},
                              {"error_rate", r.error_rate()},
                              {"substitutions", r.substitutions},
                              {"insertions", r.insertions},
                              {"deletions", r.deletions},
                              {"ref_tokens", r.ref_tokens},
                              {"utterances", r.utterances}}
                   .dump()
            << "\n";
    }
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream txt(out_dir + "/report.txt", std::ios::trunc);
  txt << report.table();
  txt << "config " << config.hash() << ", " << std::fixed << std::setprecision(1)
      << report.seconds << " s\n";
  return report;
}

}  // namespace aformer
