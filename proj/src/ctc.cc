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

#include "aformer/ctc.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "aformer/errors.h"

namespace aformer {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

// Blank-interleaved label sequence: blank, l1, blank, l2, ..., blank.
std::vector<int> expand_target(std::span<const int> target, int blank) {
  std::vector<int> ext(2 * target.size() + 1, blank);
  for (size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  return ext;
}

bool can_skip(const std::vector<int>& ext, size_t s, int blank) {
  return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
}

// alpha[t][s] includes the emission at frame t.
std::vector<double> forward_lattice(std::span<const double> lp, int frames,
                                    int vocab, const std::vector<int>& ext,
                                    int blank) {
  const size_t s_len = ext.size();
  std::vector<double> alpha(static_cast<size_t>(frames) * s_len, kNegInf);
  alpha[0] = lp[ext[0]];
  if (s_len > 1) alpha[1] = lp[ext[1]];
  for (int t = 1; t < frames; ++t) {
    const double* prev = alpha.data() + static_cast<size_t>(t - 1) * s_len;
    double* cur = alpha.data() + static_cast<size_t>(t) * s_len;
    const double* row = lp.data() + static_cast<size_t>(t) * vocab;
    for (size_t s = 0; s < s_len; ++s) {
      double acc = prev[s];
      if (s >= 1) acc = log_add(acc, prev[s - 1]);
      if (can_skip(ext, s, blank)) acc = log_add(acc, prev[s - 2]);
      cur[s] = acc == kNegInf ? kNegInf : acc + row[ext[s]];
    }
  }
  return alpha;
}

double final_log_prob(const std::vector<double>& alpha, int frames,
                      size_t s_len) {
  const double* last = alpha.data() + static_cast<size_t>(frames - 1) * s_len;
  double p = last[s_len - 1];
  if (s_len >= 2) p = log_add(p, last[s_len - 2]);
  return p;
}

void validate_target(std::span<const int> target, int vocab, int blank) {
  for (int label : target) {
    if (label < 0 || label >= vocab) {
      throw DimensionError("ctc: label " + std::to_string(label) +
                           " outside vocabulary of " + std::to_string(vocab));
    }
    if (label == blank) {
      throw ContractError("ctc: target contains the blank label");
    }
  }
}

}  // namespace

int ctc_min_frames(std::span<const int> target) {
  int n = static_cast<int>(target.size());
  for (size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++n;
  }
  return n;
}

double ctc_log_likelihood(std::span<const double> log_probs, int frames,
                          int vocab, std::span<const int> target, int blank) {
  validate_target(target, vocab, blank);
  if (ctc_min_frames(target) > frames) return kNegInf;
  const std::vector<int> ext = expand_target(target, blank);
  const std::vector<double> alpha =
      forward_lattice(log_probs, frames, vocab, ext, blank);
  return final_log_prob(alpha, frames, ext.size());
}

Tensor ctc_loss(const Tensor& logits, std::span<const int> target, int blank) {
  if (logits.rank() != 2) {
    throw DimensionError("ctc_loss: logits must be [T x V], got " +
                         shape_str(logits.shape()));
  }
  const int frames = logits.dim(0), vocab = logits.dim(1);
  if (blank < 0 || blank >= vocab) {
    throw DimensionError("ctc_loss: blank outside vocabulary");
  }
  validate_target(target, vocab, blank);
  const int needed = ctc_min_frames(target);
  if (needed > frames) {
    throw InfeasibleError("ctc_loss: target needs " + std::to_string(needed) +
                          " frames but only " + std::to_string(frames) +
                          " are available");
  }

  std::vector<double> lp(logits.numel());
  const float* x = logits.ptr();
  for (int t = 0; t < frames; ++t) {
    const float* row = x + static_cast<size_t>(t) * vocab;
    double mx = kNegInf;
    for (int k = 0; k < vocab; ++k) {
      if (!std::isfinite(row[k])) throw NumericError("ctc_loss: non-finite logit");
      mx = std::max(mx, static_cast<double>(row[k]));
    }
    double total = 0.0;
    for (int k = 0; k < vocab; ++k) total += std::exp(row[k] - mx);
    const double lse = mx + std::log(total);
    for (int k = 0; k < vocab; ++k) lp[static_cast<size_t>(t) * vocab + k] = row[k] - lse;
  }

  const std::vector<int> ext = expand_target(target, blank);
  const size_t s_len = ext.size();
  const std::vector<double> alpha = forward_lattice(lp, frames, vocab, ext, blank);
  const double log_p = final_log_prob(alpha, frames, s_len);

  // d(-log p)/d logit[t,k] = softmax[t,k] - occupancy[t,k], where occupancy
  // sums alpha*beta/p over lattice states carrying label k.
  std::vector<float> grad(logits.numel());
  {
    std::vector<double> beta(s_len, kNegInf), next(s_len);
    beta[s_len - 1] = 0.0;
    if (s_len >= 2) beta[s_len - 2] = 0.0;
    for (int t = frames - 1; t >= 0; --t) {
      std::vector<double> occ(vocab, kNegInf);
      const double* a = alpha.data() + static_cast<size_t>(t) * s_len;
      for (size_t s = 0; s < s_len; ++s) {
        occ[ext[s]] = log_add(occ[ext[s]], a[s] + beta[s]);
      }
      for (int k = 0; k < vocab; ++k) {
        const size_t idx = static_cast<size_t>(t) * vocab + k;
        const double post = occ[k] == kNegInf ? 0.0 : std::exp(occ[k] - log_p);
        grad[idx] = static_cast<float>(std::exp(lp[idx]) - post);
      }
      if (t == 0) break;
      // beta over frame t-1: successors emit at frame t.
      const double* row = lp.data() + static_cast<size_t>(t) * vocab;
      for (size_t s = 0; s < s_len; ++s) {
        double acc = beta[s] + row[ext[s]];
        if (s + 1 < s_len) acc = log_add(acc, beta[s + 1] + row[ext[s + 1]]);
        if (s + 2 < s_len && can_skip(ext, s + 2, blank)) {
          acc = log_add(acc, beta[s + 2] + row[ext[s + 2]]);
        }
        next[s] = acc;
      }
      std::swap(beta, next);
    }
  }

  return make_result({1}, {static_cast<float>(-log_p)}, {logits},
                     [grad = std::move(grad)](TensorImpl& out) {
                       TensorImpl& p = *out.parents[0];
                       if (!p.requires_grad) return;
                       float* g = p.grad_buffer();
                       const float gy = out.grad[0];
                       for (size_t i = 0; i < grad.size(); ++i) g[i] += gy * grad[i];
                     });
}

CtcPrefixScorer::CtcPrefixScorer(std::vector<double> log_probs, int frames,
                                 int vocab, int blank)
    : log_probs_(std::move(log_probs)),
      frames_(frames),
      vocab_(vocab),
      blank_(blank) {
  if (frames_ < 1 || log_probs_.size() != static_cast<size_t>(frames_) * vocab_) {
    throw DimensionError("CtcPrefixScorer: log-prob table does not match " +
                         std::to_string(frames_) + "x" + std::to_string(vocab_));
  }
}

CtcPrefixScorer::State CtcPrefixScorer::initial() const {
  State s;
  s.r_nonblank.assign(frames_, kNegInf);
  s.r_blank.resize(frames_);
  double acc = 0.0;
  for (int t = 0; t < frames_; ++t) {
    acc += lp(t, blank_);
    s.r_blank[t] = acc;
  }
  s.prefix_score = 0.0;
  s.last = -1;
  return s;
}

CtcPrefixScorer::State CtcPrefixScorer::extend(const State& prefix,
                                               int label) const {
  State h;
  h.last = label;
  h.r_nonblank.assign(frames_, kNegInf);
  h.r_blank.assign(frames_, kNegInf);
  if (prefix.last < 0) h.r_nonblank[0] = lp(0, label);
  // phi[t]: prefix mass at t that may be followed by a new `label` emission.
  auto phi = [&](int t) {
    return label == prefix.last
               ? prefix.r_blank[t]
               : log_add(prefix.r_nonblank[t], prefix.r_blank[t]);
  };
  double psi = h.r_nonblank[0];
  for (int t = 1; t < frames_; ++t) {
    const double ph = phi(t - 1);
    h.r_nonblank[t] = log_add(h.r_nonblank[t - 1], ph) + lp(t, label);
    h.r_blank[t] = log_add(h.r_blank[t - 1], h.r_nonblank[t - 1]) + lp(t, blank_);
    psi = log_add(psi, ph + lp(t, label));
  }
  h.prefix_score = psi;
  return h;
}

double CtcPrefixScorer::final_score(const State& prefix) const {
  return log_add(prefix.r_nonblank[frames_ - 1], prefix.r_blank[frames_ - 1]);
}

}  // namespace aformer
