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

#ifndef AFORMER_SCORING_H_
#define AFORMER_SCORING_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace aformer {

struct EditCounts {
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;

  int edits() const { return substitutions + insertions + deletions; }
  bool operator==(const EditCounts&) const = default;
};

// Minimum edit alignment of `hyp` against `ref`. Among minimal alignments
// the backtrace prefers substitution, then insertion, then deletion.
// Throws ContractError when `ref` is empty.
EditCounts edit_distance_align(std::span<const std::string> ref,
                               std::span<const std::string> hyp);
EditCounts edit_distance_align(std::span<const int> ref, std::span<const int> hyp);

struct ScoreReport {
  std::string test_set;
  int64_t utterances = 0;
  int64_t ref_tokens = 0;
  int64_t substitutions = 0;
  int64_t insertions = 0;
  int64_t deletions = 0;

  void add(const EditCounts& e, int64_t ref_len);
  int64_t edits() const { return substitutions + insertions + deletions; }
  // Edits per reference token, as a fraction.
  double error_rate() const;
};

// Transcript files hold one utterance per line: "<id> <tok> <tok> ...".
using Transcripts = std::map<std::string, std::vector<std::string>>;

Transcripts read_transcripts(const std::string& path);
void write_transcripts(const std::string& path, const Transcripts& t);

// Scores every reference utterance; a missing hypothesis counts as empty.
// Throws DataError for hypothesis ids absent from the reference.
ScoreReport score_transcripts(const std::string& test_set, const Transcripts& ref,
                              const Transcripts& hyp);

}  // namespace aformer

#endif  // AFORMER_SCORING_H_
