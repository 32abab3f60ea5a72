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

#include "aformer/data.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "aformer/errors.h"
#include "binary_io.h"
#include "json.hpp"

namespace aformer {

namespace {

constexpr char kCorpusMagic[4] = {'A', 'F', 'C', '1'};
constexpr uint32_t kCorpusVersion = 1;

std::string manifest_path(const std::string& corpus_path) {
  return corpus_path + ".manifest.json";
}

// Random skew-symmetric generator with N(0, 1/dim) entries above the diagonal.
Eigen::MatrixXd random_skew(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = i + 1; j < dim; ++j) {
      s(i, j) = n(rng);
      s(j, i) = -s(i, j);
    }
  }
  return s;
}

}  // namespace

Tokenizer::Tokenizer() : Tokenizer(" abcdefghijklmnopqrstuvwxyz") {}

Tokenizer::Tokenizer(std::string charset) : chars_(std::move(charset)) {
  std::sort(chars_.begin(), chars_.end());
  chars_.erase(std::unique(chars_.begin(), chars_.end()), chars_.end());
  if (chars_.empty()) throw ConfigError("tokenizer: empty character set");
}

int Tokenizer::id_of(char c) const {
  auto it = std::lower_bound(chars_.begin(), chars_.end(), c);
  if (it == chars_.end() || *it != c) return -1;
  return static_cast<int>(it - chars_.begin()) + 1;
}

std::vector<int> Tokenizer::tokenize(const std::string& text) const {
  if (text.empty()) {
    throw DataError(DataError::Reason::kVocab, "tokenize: empty text");
  }
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char c : text) {
    const int id = id_of(c);
    if (id < 0) {
      throw DataError(DataError::Reason::kVocab,
                      std::string("tokenize: character '") + c +
                          "' is not in the vocabulary");
    }
    ids.push_back(id);
  }
  return ids;
}

std::string Tokenizer::detokenize(std::span<const int> ids) const {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 1 || id > num_chars()) {
      throw DataError(DataError::Reason::kVocab,
                      "detokenize: id " + std::to_string(id) +
                          " is not a character");
    }
    out.push_back(chars_[id - 1]);
  }
  return out;
}

std::string Tokenizer::symbol(int id) const {
  if (id == blank()) return "<blank>";
  if (id == sos_eos()) return "<eos>";
  if (id < 1 || id > num_chars()) return "<unk>";
  const char c = chars_[id - 1];
  return c == ' ' ? std::string("<space>") : std::string(1, c);
}

SyntheticWorld SyntheticWorld::create(uint64_t seed, int feat_dim,
                                      float prototype_scale) {
  if (feat_dim < 1) throw ConfigError("synthetic world: feat_dim must be >= 1");
  SyntheticWorld w;
  w.seed = seed;
  w.feat_dim = feat_dim;
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, prototype_scale);
  w.prototypes.resize(static_cast<size_t>(w.tokenizer.num_chars()) * feat_dim);
  for (float& v : w.prototypes) v = n(rng);
  return w;
}

std::span<const float> SyntheticWorld::prototype(int char_index) const {
  return std::span<const float>(prototypes).subspan(
      static_cast<size_t>(char_index) * feat_dim, feat_dim);
}

AccentSpec AccentSpec::identity(int feat_dim, int num_chars, float noise) {
  AccentSpec a;
  a.id = "identity";
  a.rotation.assign(static_cast<size_t>(feat_dim) * feat_dim, 0.0f);
  for (int i = 0; i < feat_dim; ++i) a.rotation[static_cast<size_t>(i) * feat_dim + i] = 1.0f;
  a.bias.assign(feat_dim, 0.0f);
  a.perturbation.assign(static_cast<size_t>(num_chars) * feat_dim, 0.0f);
  a.stretch = 1.0f;
  a.noise = noise;
  return a;
}

float AccentSpec::max_orthogonality_error() const {
  const int d = static_cast<int>(bias.size());
  Eigen::MatrixXd r(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) r(i, j) = rotation[static_cast<size_t>(i) * d + j];
  }
  const Eigen::MatrixXd e = r.transpose() * r - Eigen::MatrixXd::Identity(d, d);
  return static_cast<float>(e.cwiseAbs().maxCoeff());
}

AccentSpec AccentFamily::make(const std::string& id, uint64_t accent_seed,
                              const SyntheticWorld& world) const {
  const int d = world.feat_dim;
  std::mt19937_64 family_rng(seed);
  const Eigen::MatrixXd shared = random_skew(d, family_rng);
  std::mt19937_64 rng(accent_seed);
  const Eigen::MatrixXd own = random_skew(d, rng);
  const Eigen::MatrixXd skew = strength * shared + individual * own;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd rot = (eye - skew).partialPivLu().solve(eye + skew);

  AccentSpec a;
  a.id = id;
  a.rotation.resize(static_cast<size_t>(d) * d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) a.rotation[static_cast<size_t>(i) * d + j] = static_cast<float>(rot(i, j));
  }
  std::normal_distribution<float> n(0.0f, 1.0f);
  a.bias.resize(d);
  for (float& v : a.bias) v = bias_scale * n(rng);
  a.perturbation.resize(world.prototypes.size());
  for (float& v : a.perturbation) v = perturbation_scale * n(rng);
  std::uniform_real_distribution<float> s(1.0f - stretch_spread, 1.0f + stretch_spread);
  a.stretch = s(rng);
  a.noise = noise;
  return a;
}

std::vector<UtteranceRecord> generate_corpus(const SyntheticWorld& world,
                                             const std::string& corpus_tag,
                                             uint64_t seed, int n_utts,
                                             const AccentSpec* accent,
                                             const GenerationParams& params) {
  if (n_utts < 1) {
    throw ContractError("generate_corpus: n_utts must be >= 1, got " +
                        std::to_string(n_utts));
  }
  const int d = world.feat_dim;
  const int n_chars = world.tokenizer.num_chars();
  if (accent) {
    if (accent->rotation.size() != static_cast<size_t>(d) * d ||
        accent->bias.size() != static_cast<size_t>(d) ||
        accent->perturbation.size() != world.prototypes.size()) {
      throw DimensionError("generate_corpus: accent spec does not match world");
    }
    if (!(accent->stretch > 0.0f)) {
      throw ContractError("generate_corpus: accent stretch must be positive");
    }
  }
  if (params.min_tokens < 1 || params.max_tokens < params.min_tokens ||
      params.min_frames_per_token < 1 ||
      params.max_frames_per_token < params.min_frames_per_token ||
      params.frames_per_unit < 1) {
    throw ConfigError("generate_corpus: invalid generation parameters");
  }
  const float sigma = accent ? accent->noise : params.noise;

  std::mt19937_64 rng(seed);
  std::vector<UtteranceRecord> out;
  out.reserve(n_utts);
  std::vector<float> frame(d), rotated(d);
  for (int u = 0; u < n_utts; ++u) {
    std::mt19937_64 ur(rng());
    const int len = std::uniform_int_distribution<int>(params.min_tokens, params.max_tokens)(ur);
    std::vector<int> chars(len);
    int prev = -1;
    for (int i = 0; i < len; ++i) {
      int c;
      if (prev < 0) {
        c = std::uniform_int_distribution<int>(0, n_chars - 1)(ur);
      } else {
        c = std::uniform_int_distribution<int>(0, n_chars - 2)(ur);
        if (c >= prev) ++c;
      }
      chars[i] = prev = c;
    }
    std::vector<int> durations(len);
    for (int& dur : durations) {
      dur = std::uniform_int_distribution<int>(params.min_frames_per_token,
                                               params.max_frames_per_token)(ur);
    }
    std::normal_distribution<float> normal(0.0f, 1.0f);
    std::vector<float> speaker(d);
    for (float& v : speaker) v = params.speaker_offset * normal(ur);

    UtteranceRecord rec;
    char id[32];
    std::snprintf(id, sizeof(id), "-%05d", u);
    rec.id = corpus_tag + id;
    rec.corpus_tag = corpus_tag;
    rec.accent_tag = accent ? accent->id : "none";
    rec.feat_dim = d;
    for (int i = 0; i < len; ++i) rec.text.push_back(world.tokenizer.chars()[chars[i]]);

    for (int i = 0; i < len; ++i) {
      const int n_frames =
          accent ? std::max(1, static_cast<int>(std::lround(accent->stretch * durations[i])))
                 : durations[i];
      const auto proto = world.prototype(chars[i]);
      for (int f = 0; f < n_frames * params.frames_per_unit; ++f) {
        for (int k = 0; k < d; ++k) {
          float v = proto[k];
          if (accent) v += accent->perturbation[static_cast<size_t>(chars[i]) * d + k];
          frame[k] = v + sigma * normal(ur);
        }
        if (accent) {
          for (int r = 0; r < d; ++r) {
            float acc = 0.0f;
            for (int k = 0; k < d; ++k) acc += accent->rotation[static_cast<size_t>(r) * d + k] * frame[k];
            rotated[r] = acc + accent->bias[r];
          }
          frame.swap(rotated);
        }
        for (int k = 0; k < d; ++k) rec.features.push_back(frame[k] + speaker[k]);
        ++rec.frames;
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

CorpusManifest make_manifest(const std::string& corpus_tag,
                             const std::vector<UtteranceRecord>& records,
                             const std::string& accent, uint64_t seed) {
  CorpusManifest m;
  m.corpus_tag = corpus_tag;
  m.utterances = static_cast<int64_t>(records.size());
  for (const auto& r : records) m.total_frames += r.frames;
  m.accent = accent;
  m.seed = seed;
  m.feat_dim = records.empty() ? 0 : records.front().feat_dim;
  return m;
}

CmvnStats CmvnStats::of_utterance(std::span<const float> features, int frames,
                                  int feat_dim) {
  if (frames < 2) {
    throw ContractError("cmvn: need at least 2 frames, got " +
                        std::to_string(frames));
  }
  if (features.size() != static_cast<size_t>(frames) * feat_dim) {
    throw DimensionError("cmvn: feature buffer does not match frames x dim");
  }
  CmvnStats s;
  s.mean.assign(feat_dim, 0.0);
  s.std.assign(feat_dim, 0.0);
  for (int t = 0; t < frames; ++t) {
    for (int k = 0; k < feat_dim; ++k) s.mean[k] += features[static_cast<size_t>(t) * feat_dim + k];
  }
  for (double& m : s.mean) m /= frames;
  for (int t = 0; t < frames; ++t) {
    for (int k = 0; k < feat_dim; ++k) {
      const double c = features[static_cast<size_t>(t) * feat_dim + k] - s.mean[k];
      s.std[k] += c * c;
    }
  }
  for (double& v : s.std) v = std::sqrt(std::max(v / frames, kCmvnVarianceFloor));
  return s;
}

CmvnStats CmvnStats::of_corpus(const std::vector<UtteranceRecord>& records) {
  if (records.empty()) throw ContractError("cmvn: empty corpus");
  const int d = records.front().feat_dim;
  CmvnStats s;
  s.mean.assign(d, 0.0);
  s.std.assign(d, 0.0);
  int64_t n = 0;
  for (const auto& r : records) {
    if (r.feat_dim != d) throw DimensionError("cmvn: mixed feature dims in corpus");
    for (int t = 0; t < r.frames; ++t) {
      for (int k = 0; k < d; ++k) s.mean[k] += r.features[static_cast<size_t>(t) * d + k];
    }
    n += r.frames;
  }
  if (n < 2) throw ContractError("cmvn: need at least 2 frames");
  for (double& m : s.mean) m /= static_cast<double>(n);
  for (const auto& r : records) {
    for (int t = 0; t < r.frames; ++t) {
      for (int k = 0; k < d; ++k) {
        const double c = r.features[static_cast<size_t>(t) * d + k] - s.mean[k];
        s.std[k] += c * c;
      }
    }
  }
  for (double& v : s.std) v = std::sqrt(std::max(v / static_cast<double>(n), kCmvnVarianceFloor));
  return s;
}

void CmvnStats::apply(std::span<float> features, int frames, int feat_dim) const {
  if (mean.size() != static_cast<size_t>(feat_dim) ||
      features.size() != static_cast<size_t>(frames) * feat_dim) {
    throw DimensionError("cmvn: statistics do not match features");
  }
  for (int t = 0; t < frames; ++t) {
    for (int k = 0; k < feat_dim; ++k) {
      float& v = features[static_cast<size_t>(t) * feat_dim + k];
      v = static_cast<float>((v - mean[k]) / std[k]);
    }
  }
}

std::vector<float> cmvn(std::span<const float> features, int frames,
                        int feat_dim) {
  const CmvnStats s = CmvnStats::of_utterance(features, frames, feat_dim);
  std::vector<float> out(features.begin(), features.end());
  s.apply(out, frames, feat_dim);
  return out;
}

void apply_utterance_cmvn(std::vector<UtteranceRecord>& records) {
  for (auto& r : records) r.features = cmvn(r.features, r.frames, r.feat_dim);
}

void write_corpus(const std::string& path,
                  const std::vector<UtteranceRecord>& records,
                  const CorpusManifest& manifest) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open corpus for writing: " + path);
  os.write(kCorpusMagic, 4);
  binary::put_u32(os, kCorpusVersion);
  binary::put_u32(os, static_cast<uint32_t>(records.size()));
  auto put_str16 = [&](const std::string& s) {
    if (s.size() > 0xffff) throw DataError(DataError::Reason::kOther, "string too long: " + s.substr(0, 32));
    binary::put_u16(os, static_cast<uint16_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
  };
  for (const auto& r : records) {
    if (r.features.size() != static_cast<size_t>(r.frames) * r.feat_dim) {
      throw DimensionError("write_corpus: record " + r.id + " has inconsistent features");
    }
    put_str16(r.id);
    put_str16(r.accent_tag);
    binary::put_u32(os, static_cast<uint32_t>(r.frames));
    binary::put_u32(os, static_cast<uint32_t>(r.feat_dim));
    binary::put_f32s(os, r.features);
    put_str16(r.text);
  }
  if (!os) throw IoError("failed writing corpus: " + path);

  nlohmann::json j = {{"corpus_tag", manifest.corpus_tag},
                      {"utterances", manifest.utterances},
                      {"total_frames", manifest.total_frames},
                      {"accent", manifest.accent},
                      {"seed", manifest.seed},
                      {"feat_dim", manifest.feat_dim}};
  std::ofstream ms(manifest_path(path), std::ios::trunc);
  if (!ms) throw IoError("cannot write manifest for " + path);
  ms << j.dump(2) << "\n";
}

CorpusManifest read_manifest(const std::string& corpus_path) {
  std::ifstream ms(manifest_path(corpus_path));
  if (!ms) throw IoError("missing corpus manifest " + manifest_path(corpus_path));
  nlohmann::json j;
  try {
    ms >> j;
    CorpusManifest m;
    m.corpus_tag = j.at("corpus_tag").get<std::string>();
    m.utterances = j.at("utterances").get<int64_t>();
    m.total_frames = j.at("total_frames").get<int64_t>();
    m.accent = j.at("accent").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    m.feat_dim = j.at("feat_dim").get<int>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataError::Reason::kIntegrity,
                    "malformed manifest " + manifest_path(corpus_path) + ": " + e.what());
  }
}

CorpusReader::CorpusReader(const std::string& path) : path_(path) {
  manifest_ = read_manifest(path);
  in_.open(path, std::ios::binary);
  if (!in_) throw IoError("cannot open corpus " + path);
  file_size_ = std::filesystem::file_size(path);
  char magic[4];
  read_exact(magic, 4, "magic");
  if (std::memcmp(magic, kCorpusMagic, 4) != 0) {
    throw DataError(DataError::Reason::kMagic, "not an AFC1 corpus: " + path);
  }
  const uint32_t version = read_u32("version");
  if (version != kCorpusVersion) {
    throw DataError(DataError::Reason::kMagic,
                    "unsupported corpus version " + std::to_string(version));
  }
  declared_ = read_u32("utterance count");
}

void CorpusReader::read_exact(char* dst, size_t n, const char* what) {
  if (offset_ + n > file_size_) {
    throw DataError(DataError::Reason::kTruncated,
                    path_ + ": truncated " + what + " at byte offset " +
                        std::to_string(offset_));
  }
  in_.read(dst, static_cast<std::streamsize>(n));
  if (!in_) {
    throw DataError(DataError::Reason::kTruncated,
                    path_ + ": short read of " + what + " at byte offset " +
                        std::to_string(offset_));
  }
  offset_ += n;
}

uint16_t CorpusReader::read_u16(const char* what) {
  char b[2];
  read_exact(b, 2, what);
  return binary::get_u16(b);
}

uint32_t CorpusReader::read_u32(const char* what) {
  char b[4];
  read_exact(b, 4, what);
  return binary::get_u32(b);
}

std::string CorpusReader::read_string16(const char* what) {
  const uint16_t n = read_u16(what);
  std::string s(n, '\0');
  if (n) read_exact(s.data(), n, what);
  return s;
}

std::optional<UtteranceRecord> CorpusReader::next() {
  if (consumed_ == declared_) {
    if (offset_ != file_size_) {
      throw DataError(DataError::Reason::kIntegrity,
                      path_ + ": " + std::to_string(file_size_ - offset_) +
                          " trailing bytes after " + std::to_string(declared_) +
                          " declared records");
    }
    return std::nullopt;
  }
  UtteranceRecord r;
  r.id = read_string16("utterance id");
  r.accent_tag = read_string16("accent tag");
  r.frames = static_cast<int>(read_u32("frame count"));
  r.feat_dim = static_cast<int>(read_u32("feature dim"));
  if (r.frames < 1 || r.feat_dim < 1) {
    throw DataError(DataError::Reason::kIntegrity,
                    path_ + ": record " + r.id + " has an empty feature matrix");
  }
  const size_t n = static_cast<size_t>(r.frames) * r.feat_dim;
  if (offset_ + 4 * n > file_size_) {
    throw DataError(DataError::Reason::kTruncated,
                    path_ + ": truncated features at byte offset " +
                        std::to_string(offset_));
  }
  std::string raw(4 * n, '\0');
  read_exact(raw.data(), raw.size(), "features");
  r.features.resize(n);
  binary::get_f32s(raw.data(), r.features);
  r.text = read_string16("token string");
  if (r.text.empty()) {
    throw DataError(DataError::Reason::kIntegrity,
                    path_ + ": record " + r.id + " has an empty token string");
  }
  r.corpus_tag = manifest_.corpus_tag;
  ++consumed_;
  return r;
}

std::vector<UtteranceRecord> load_corpus(const std::string& path) {
  CorpusReader reader(path);
  const CorpusManifest& m = reader.manifest();
  if (m.utterances != reader.declared_count()) {
    throw DataError(DataError::Reason::kIntegrity,
                    path + ": manifest lists " + std::to_string(m.utterances) +
                        " utterances, header declares " +
                        std::to_string(reader.declared_count()));
  }
  std::vector<UtteranceRecord> records;
  int64_t frames = 0;
  while (auto r = reader.next()) {
    frames += r->frames;
    records.push_back(std::move(*r));
  }
  if (frames != m.total_frames) {
    throw DataError(DataError::Reason::kIntegrity,
                    path + ": manifest lists " + std::to_string(m.total_frames) +
                        " frames, file holds " + std::to_string(frames));
  }
  return records;
}

}  // namespace aformer
