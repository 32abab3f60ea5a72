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

#ifndef AFORMER_CTC_H_
#define AFORMER_CTC_H_

#include <span>
#include <vector>

#include "aformer/tensor.h"

namespace aformer {

// Frames needed to emit `target`: one per token plus one blank between each
// pair of identical neighbours.
int ctc_min_frames(std::span<const int> target);

// log p(target | x) by the forward algorithm over log-probabilities
// `log_probs` [frames x vocab]. Returns -inf when no alignment exists.
double ctc_log_likelihood(std::span<const double> log_probs, int frames,
                          int vocab, std::span<const int> target, int blank);

// Negative log-likelihood of `target` under frame logits [T x V]. The
// log-softmax is applied internally. Throws InfeasibleError when the target
// cannot fit in T frames.
Tensor ctc_loss(const Tensor& logits, std::span<const int> target, int blank);

// Incremental CTC prefix probabilities for label-synchronous decoding.
class CtcPrefixScorer {
 public:
  struct State {
    std::vector<double> r_nonblank;  // log prob, prefix ends in its last label
    std::vector<double> r_blank;     // log prob, prefix followed by blank
    double prefix_score = 0.0;       // log prob that the output starts with it
    int last = -1;                   // last label, -1 for the empty prefix
  };

  // `log_probs` [frames x vocab] in row-major order.
  CtcPrefixScorer(std::vector<double> log_probs, int frames, int vocab,
                  int blank);

  State initial() const;
  // State of prefix + `label`; its prefix_score is log P(prefix+label, ...).
  State extend(const State& prefix, int label) const;
  // log P(output == prefix), the score of ending the hypothesis here.
  double final_score(const State& prefix) const;

  int frames() const { return frames_; }

 private:
  double lp(int t, int k) const { return log_probs_[static_cast<size_t>(t) * vocab_ + k]; }

  std::vector<double> log_probs_;
  int frames_;
  int vocab_;
  int blank_;
};

}  // namespace aformer

#endif  // AFORMER_CTC_H_
