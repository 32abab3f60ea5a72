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

#include "aformer/decoding.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aformer/ctc.h"
#include "aformer/errors.h"

namespace aformer {

namespace {

struct LiveHyp {
  std::vector<int> tokens;
  double att = 0.0;
  CtcPrefixScorer::State ctc;
};

struct Candidate {
  size_t parent;
  int token;
  double att;
  double score;
  CtcPrefixScorer::State ctc;
};

// Row-wise log-softmax in double precision.
std::vector<double> log_softmax_rows(const Tensor& logits) {
  const int rows = logits.dim(0), cols = logits.dim(1);
  std::vector<double> out(static_cast<size_t>(rows) * cols);
  const float* p = logits.ptr();
  for (int r = 0; r < rows; ++r) {
    const float* row = p + static_cast<size_t>(r) * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < cols; ++c) mx = std::max(mx, static_cast<double>(row[c]));
    double z = 0.0;
    for (int c = 0; c < cols; ++c) z += std::exp(row[c] - mx);
    const double lse = mx + std::log(z);
    for (int c = 0; c < cols; ++c) out[static_cast<size_t>(r) * cols + c] = row[c] - lse;
  }
  return out;
}

}  // namespace

DecodeResult decode(const AformerModel& model, const Tensor& feats,
                    const DecodeOptions& options) {
  if (options.beam < 1) {
    throw ConfigError("decode: beam must be >= 1, got " + std::to_string(options.beam));
  }
  if (options.max_len && *options.max_len < 1) {
    throw ConfigError("decode: max_len must be >= 1, got " + std::to_string(*options.max_len));
  }
  if (!(options.ctc_weight >= 0.0f && options.ctc_weight <= 1.0f)) {
    throw ConfigError("decode: ctc weight must lie in [0, 1]");
  }
  NoGradGuard no_grad;
  const ModelConfig& cfg = model.config();
  const ForwardContext eval;
  const EncoderOutput enc = model.encode(feats, eval);
  const Tensor ctc_logits = model.ctc_logits(enc.fused);
  const int frames = ctc_logits.dim(0);
  const int vocab = cfg.vocab;
  const int eos = cfg.sos_eos();
  const double w = options.ctc_weight;
  const bool use_ctc = w > 0.0;
  const CtcPrefixScorer scorer(log_softmax_rows(ctc_logits), frames, vocab, cfg.blank());
  const int max_len = options.max_len.value_or(frames);

  std::vector<LiveHyp> live(1);
  live[0].ctc = scorer.initial();
  DecodeResult result;

  for (int step = 0; step <= max_len && !live.empty(); ++step) {
    std::vector<Candidate> cands;
    for (size_t h = 0; h < live.size(); ++h) {
      const LiveHyp& hyp = live[h];
      std::vector<int> inputs{eos};
      inputs.insert(inputs.end(), hyp.tokens.begin(), hyp.tokens.end());
      const Tensor logits = model.decoder_logits(inputs, enc.fused, eval);
      const std::vector<double> lp = log_softmax_rows(
          Tensor({1, vocab}, std::vector<float>(logits.data().end() - vocab, logits.data().end())));
      if (step < max_len) {
        for (int k = 1; k < eos; ++k) {
          Candidate c{h, k, hyp.att + lp[k], 0.0, {}};
          double ctc_score = 0.0;
          if (use_ctc) {
            c.ctc = scorer.extend(hyp.ctc, k);
            ctc_score = c.ctc.prefix_score;
          }
          c.score = (1.0 - w) * c.att + w * ctc_score;
          cands.push_back(std::move(c));
        }
      }
      Candidate end{h, eos, hyp.att + lp[eos], 0.0, {}};
      end.score = (1.0 - w) * end.att + (use_ctc ? w * scorer.final_score(hyp.ctc) : 0.0);
      cands.push_back(std::move(end));
    }
    const size_t keep = std::min(cands.size(), static_cast<size_t>(options.beam));
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    std::vector<LiveHyp> next;
    for (size_t i = 0; i < keep; ++i) {
      Candidate& c = cands[i];
      if (c.token == eos) {
        result.ended.push_back({live[c.parent].tokens, c.score});
      } else {
        LiveHyp n;
        n.tokens = live[c.parent].tokens;
        n.tokens.push_back(c.token);
        n.att = c.att;
        n.ctc = std::move(c.ctc);
        next.push_back(std::move(n));
      }
    }
    live = std::move(next);
    // Extending a prefix never raises either score term, so once a finished
    // hypothesis beats every live one the search is over.
    if (!result.ended.empty() && !live.empty()) {
      double best_end = -std::numeric_limits<double>::infinity();
      for (const Hypothesis& e : result.ended) best_end = std::max(best_end, e.score);
      bool open = false;
      for (size_t i = 0; i < keep && !open; ++i) {
        open = cands[i].token != eos && cands[i].score > best_end;
      }
      if (!open) break;
    }
  }

  std::stable_sort(result.ended.begin(), result.ended.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
  if (!result.ended.empty()) {
    result.tokens = result.ended.front().tokens;
    result.score = result.ended.front().score;
  }
  return result;
}

}  // namespace aformer
