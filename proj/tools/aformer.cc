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

// Command-line driver: data generation, the training passes, decoding,
// scoring and the ablation run.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "aformer/config.h"
#include "aformer/decoding.h"
#include "aformer/errors.h"
#include "aformer/scoring.h"
#include "aformer/training.h"
#include "json.hpp"

namespace {

using namespace aformer;
namespace fs = std::filesystem;

// Exit status per error category.
enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfigExit = 3,
  kIoExit = 4,
  kDataExit = 5,
  kNumericExit = 6,
  kContractExit = 7,
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return kConfigExit;
    case ErrorKind::kIo: return kIoExit;
    case ErrorKind::kData: return kDataExit;
    case ErrorKind::kNumeric:
    case ErrorKind::kInfeasible: return kNumericExit;
    case ErrorKind::kDimension:
    case ErrorKind::kContract: return kContractExit;
  }
  return kInternal;
}

const char* category(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kData: return "data";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kInfeasible: return "infeasible";
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kContract: return "contract";
  }
  return "internal";
}

struct Common {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config_path, "experiment config (JSON)");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--override", c.overrides, "config override key=value (repeatable)")
      ->allow_extra_args(false);
  auto* out = cmd->add_option("--out", c.out, "output path");
  if (out_required) out->required();
}

ExperimentConfig resolve_config(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig::desk()
                                               : load_experiment_config(c.config_path);
  cfg = apply_overrides(cfg, c.overrides);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

void log_line(const std::string& msg) { std::cerr << msg << std::endl; }

void print_report(const ScoreReport& r) {
  std::cout << std::left << std::setw(14) << "test_set" << std::right << std::setw(8) << "utts"
            << std::setw(8) << "tokens" << std::setw(7) << "sub" << std::setw(7) << "ins"
            << std::setw(7) << "del" << std::setw(10) << "error" << "\n";
  std::ostringstream rate;
  rate << std::fixed << std::setprecision(1) << 100.0 * r.error_rate() << "%";
  std::cout << std::left << std::setw(14) << r.test_set << std::right << std::setw(8)
            << r.utterances << std::setw(8) << r.ref_tokens << std::setw(7) << r.substitutions
            << std::setw(7) << r.insertions << std::setw(7) << r.deletions << std::setw(10)
            << rate.str() << "\n";
  std::cout << nlohmann::json{{"test_set", r.test_set},
                              {"error_rate", r.error_rate()},
                              {"substitutions", r.substitutions},
                              {"insertions", r.insertions},
                              {"deletions", r.deletions},
                              {"ref_tokens", r.ref_tokens},
                              {"utterances", r.utterances}}
                   .dump()
            << "\n";
}

int run_training(PassId id, const Common& c, const std::string& data_dir,
                 const std::string& init) {
  const ExperimentConfig cfg = resolve_config(c);
  const CorpusSet corpora = read_dataset(data_dir);
  const auto data = prepare_dataset(corpora, cfg.data);
  std::vector<std::string> tags;
  switch (id) {
    case PassId::kA1: tags = {"clean_train"}; break;
    case PassId::kPooledPretrain:
    case PassId::kA3: tags = {"clean_train", "accent_train"}; break;
    case PassId::kA2:
    case PassId::kFinetune: tags = {"accent_train"}; break;
  }
  PassSpec spec = make_pass_spec(id, cfg, tags, init);
  spec.out_checkpoint = c.out;
  spec.manifest_path = c.out + ".jsonl";
  const PassResult r = run_pass(spec, data, log_line);
  std::cout << "wrote " << c.out << " (pass " << r.meta.pass_id << ", global step "
            << r.meta.global_step << ")\n";
  return kOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Dual-encoder accented speech recognition toolkit"};
  app.require_subcommand(1);

  Common gen_c, pre_c, adapt_c, re_c, ft_c, dec_c, abl_c;
  std::string pre_data, adapt_data, re_data, ft_data, dec_data;
  std::string adapt_ckpt, re_ckpt, ft_ckpt, dec_ckpt, dec_corpus, dec_ref_out;
  std::optional<int> dec_beam, dec_max_len;
  std::optional<float> dec_ctc;
  bool pooled = false;
  std::string ref_path, hyp_path, test_set = "test";

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpora");
  add_common(gen, gen_c, true);

  auto* pre = app.add_subcommand("pretrain", "pass A1: train on non-accented data");
  add_common(pre, pre_c, true);
  pre->add_option("--data", pre_data, "dataset directory")->required();
  pre->add_flag("--pooled", pooled, "train from scratch on pooled data instead");

  auto* adapt = app.add_subcommand("adapt", "pass A2: adapt with the general encoder frozen");
  add_common(adapt, adapt_c, true);
  adapt->add_option("--data", adapt_data, "dataset directory")->required();
  adapt->add_option("--ckpt", adapt_ckpt, "A1 checkpoint")->required();

  auto* re = app.add_subcommand("retrain", "pass A3: retrain on pooled data");
  add_common(re, re_c, true);
  re->add_option("--data", re_data, "dataset directory")->required();
  re->add_option("--ckpt", re_ckpt, "A2 checkpoint")->required();

  auto* ft = app.add_subcommand("finetune", "finetune every parameter on accented data");
  add_common(ft, ft_c, true);
  ft->add_option("--data", ft_data, "dataset directory")->required();
  ft->add_option("--ckpt", ft_ckpt, "pretrained checkpoint")->required();

  auto* dec = app.add_subcommand("decode", "joint CTC/attention beam search");
  add_common(dec, dec_c, true);
  dec->add_option("--ckpt", dec_ckpt, "model checkpoint")->required();
  dec->add_option("--corpus", dec_corpus, "corpus file (.afc)")->required();
  dec->add_option("--data", dec_data, "dataset directory (corpus-level CMVN)");
  dec->add_option("--beam", dec_beam, "beam size");
  dec->add_option("--ctc-weight", dec_ctc, "CTC weight in the joint score (default 0.3)");
  dec->add_option("--max-len", dec_max_len, "longest hypothesis in tokens");
  dec->add_option("--ref-out", dec_ref_out, "also write reference transcripts here");

  auto* sc = app.add_subcommand("score", "token error rate of hypotheses against references");
  sc->add_option("--ref", ref_path, "reference transcripts")->required();
  sc->add_option("--hyp", hyp_path, "hypothesis transcripts")->required();
  sc->add_option("--test-set", test_set, "name shown in the report");

  auto* abl = app.add_subcommand("ablate", "train and score the five comparison systems");
  add_common(abl, abl_c, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  if (gen->parsed()) {
    ExperimentConfig cfg = resolve_config(gen_c);
    if (gen_c.seed) cfg.data.world_seed = *gen_c.seed;
    const CorpusSet corpora = generate_dataset(cfg.data);
    write_dataset(gen_c.out, corpora, cfg.data);
    for (const auto& [tag, records] : corpora) {
      std::cout << tag << ": " << records.size() << " utterances\n";
    }
    return kOk;
  }
  if (pre->parsed()) {
    return run_training(pooled ? PassId::kPooledPretrain : PassId::kA1, pre_c, pre_data, "");
  }
  if (adapt->parsed()) return run_training(PassId::kA2, adapt_c, adapt_data, adapt_ckpt);
  if (re->parsed()) return run_training(PassId::kA3, re_c, re_data, re_ckpt);
  if (ft->parsed()) return run_training(PassId::kFinetune, ft_c, ft_data, ft_ckpt);
  if (dec->parsed()) {
    const ExperimentConfig cfg = resolve_config(dec_c);
    const AformerModel model = load_checkpoint(dec_ckpt);
    const auto records = load_corpus(dec_corpus);
    CmvnStats stats;
    if (cfg.data.cmvn == CmvnMode::kCorpus) {
      if (dec_data.empty()) throw ConfigError("corpus-level CMVN needs --data for statistics");
      const CorpusSet train = read_dataset(dec_data);
      std::vector<UtteranceRecord> pooled_train = train.at("clean_train");
      pooled_train.insert(pooled_train.end(), train.at("accent_train").begin(),
                          train.at("accent_train").end());
      stats = CmvnStats::of_corpus(pooled_train);
    }
    const Tokenizer tokenizer;
    const auto examples = prepare_examples(records, tokenizer, cfg.data.cmvn, &stats);
    DecodeOptions opts{dec_beam.value_or(cfg.decode.beam),
                       dec_ctc.value_or(cfg.decode.ctc_weight), dec_max_len};
    Transcripts hyps, refs;
    const ScoreReport r = evaluate(model, examples, fs::path(dec_corpus).stem().string(), opts,
                                   &hyps);
    write_transcripts(dec_c.out, hyps);
    if (!dec_ref_out.empty()) {
      for (const Example& e : examples) refs[e.id] = token_symbols(tokenizer, e.tokens);
      write_transcripts(dec_ref_out, refs);
    }
    print_report(r);
    return kOk;
  }
  if (sc->parsed()) {
    print_report(score_transcripts(test_set, read_transcripts(ref_path), read_transcripts(hyp_path)));
    return kOk;
  }
  if (abl->parsed()) {
    const ExperimentConfig cfg = resolve_config(abl_c);
    const AblationReport r = run_ablation(cfg, abl_c.out, log_line);
    std::cout << r.table();
    std::cout << "report written to " << abl_c.out << "/report.txt\n";
    return kOk;
  }
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const aformer::Error& e) {
    std::cerr << "error [" << category(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << "\n";
    return kInternal;
  }
}
