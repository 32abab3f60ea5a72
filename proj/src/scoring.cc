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

#include "aformer/scoring.h"

#include <fstream>
#include <sstream>

#include "aformer/errors.h"

namespace aformer {

namespace {

template <typename T>
EditCounts align(std::span<const T> ref, std::span<const T> hyp) {
  if (ref.empty()) throw ContractError("edit_distance_align: empty reference");
  const size_t n = ref.size(), m = hyp.size();
  // cost[i][j]: edits turning ref[0..i) into hyp[0..j).
  std::vector<std::vector<int>> cost(n + 1, std::vector<int>(m + 1));
  for (size_t i = 0; i <= n; ++i) cost[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= m; ++j) cost[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      const int diag = cost[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cost[i][j] = std::min({diag, cost[i][j - 1] + 1, cost[i - 1][j] + 1});
    }
  }
  EditCounts e;
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (cost[i][j] == cost[i - 1][j - 1] + (same ? 0 : 1)) {
        if (!same) ++e.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && cost[i][j] == cost[i][j - 1] + 1) {
      ++e.insertions;
      --j;
    } else {
      ++e.deletions;
      --i;
    }
  }
  return e;
}

}  // namespace

EditCounts edit_distance_align(std::span<const std::string> ref,
                               std::span<const std::string> hyp) {
  return align(ref, hyp);
}

EditCounts edit_distance_align(std::span<const int> ref, std::span<const int> hyp) {
  return align(ref, hyp);
}

void ScoreReport::add(const EditCounts& e, int64_t ref_len) {
  ++utterances;
  ref_tokens += ref_len;
  substitutions += e.substitutions;
  insertions += e.insertions;
  deletions += e.deletions;
}

double ScoreReport::error_rate() const {
  return ref_tokens == 0 ? 0.0 : static_cast<double>(edits()) / static_cast<double>(ref_tokens);
}

Transcripts read_transcripts(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open transcript file " + path);
  Transcripts t;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string id, tok;
    if (!(ls >> id)) continue;
    std::vector<std::string> toks;
    while (ls >> tok) toks.push_back(tok);
    if (!t.emplace(id, std::move(toks)).second) {
      throw DataError(DataError::Reason::kIntegrity,
                      path + ":" + std::to_string(lineno) + ": duplicate utterance id " + id);
    }
  }
  return t;
}

void write_transcripts(const std::string& path, const Transcripts& t) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write transcript file " + path);
  for (const auto& [id, toks] : t) {
    os << id;
    for (const auto& tok : toks) os << ' ' << tok;
    os << '\n';
  }
}

ScoreReport score_transcripts(const std::string& test_set, const Transcripts& ref,
                              const Transcripts& hyp) {
  for (const auto& [id, toks] : hyp) {
    if (!ref.count(id)) {
      throw DataError(DataError::Reason::kIntegrity,
                      "hypothesis " + id + " has no reference");
    }
  }
  ScoreReport r;
  r.test_set = test_set;
  static const std::vector<std::string> kEmpty;
  for (const auto& [id, toks] : ref) {
    auto it = hyp.find(id);
    const auto& h = it == hyp.end() ? kEmpty : it->second;
    r.add(edit_distance_align(std::span<const std::string>(toks), std::span<const std::string>(h)),
          static_cast<int64_t>(toks.size()));
  }
  return r;
}

}  // namespace aformer
