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

#ifndef AFORMER_DECODING_H_
#define AFORMER_DECODING_H_

#include <optional>
#include <vector>

#include "aformer/model.h"

namespace aformer {

struct DecodeOptions {
  int beam = 4;
  float ctc_weight = 0.3f;
  // Longest hypothesis in real tokens; unset means the number of encoder
  // frames, the most a CTC alignment can emit.
  std::optional<int> max_len;
};

struct Hypothesis {
  std::vector<int> tokens;  // without start/end symbols
  double score = 0.0;
};

struct DecodeResult {
  std::vector<int> tokens;
  double score = 0.0;
  std::vector<Hypothesis> ended;  // every finished hypothesis, best first
};

// Label-synchronous beam search under the joint score
//   (1 - w) * sum log p_att + w * log p_ctc(prefix)
// where the end symbol takes the full CTC probability of the prefix.
// Candidates from all live hypotheses compete for `beam` slots; a candidate
// ending in the end symbol leaves the beam as a finished hypothesis.
// Throws ConfigError for beam < 1 or max_len < 1.
DecodeResult decode(const AformerModel& model, const Tensor& feats,
                    const DecodeOptions& options);

}  // namespace aformer

#endif  // AFORMER_DECODING_H_
