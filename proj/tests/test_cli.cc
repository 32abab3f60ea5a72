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

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>

#include "fixtures.h"

namespace {

struct RunResult {
  int status;
  std::string output;  // stdout and stderr interleaved
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(AFORMER_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string out;
  std::array<char, 4096> buf;
  size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int raw = ::pclose(pipe);
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  os << text;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

TEST(Cli, ScoreIdenticalTranscriptsIsZero) {
  fixtures::TempDir dir("cli_score0");
  write_file(dir.file("ref.txt"), "u1 a b c\nu2 d e\n");
  const RunResult r = run_cli("score --ref " + dir.file("ref.txt") + " --hyp " + dir.file("ref.txt"));
  EXPECT_EQ(r.status, 0) << r.output;
  EXPECT_TRUE(contains(r.output, "0.0%")) << r.output;
}

TEST(Cli, ScoreWorkedExample) {
  fixtures::TempDir dir("cli_score");
  write_file(dir.file("ref.txt"), "u1 a b c\n");
  write_file(dir.file("hyp.txt"), "u1 a x c d\n");
  const RunResult r = run_cli("score --ref " + dir.file("ref.txt") + " --hyp " +
                              dir.file("hyp.txt") + " --test-set demo");
  EXPECT_EQ(r.status, 0) << r.output;
  EXPECT_TRUE(contains(r.output, "66.7%")) << r.output;
  EXPECT_TRUE(contains(r.output, "demo")) << r.output;
}

TEST(Cli, ErrorCategoriesHaveDistinctExitCodes) {
  fixtures::TempDir dir("cli_errors");
  const RunResult usage = run_cli("");
  const RunResult unknown_flag = run_cli("score --nope");
  const RunResult missing = run_cli("score --ref " + dir.file("absent.txt") + " --hyp " +
                                    dir.file("absent.txt"));
  write_file(dir.file("bad.json"), R"({"train": {"batchsize": 3}})");
  const RunResult config = run_cli("gen-data --config " + dir.file("bad.json") + " --out " +
                                   dir.file("data"));
  const RunResult override_err =
      run_cli("gen-data --override model.bogus=1 --out " + dir.file("data"));
  write_file(dir.file("junk.afc"), "JUNKJUNKJUNK");
  write_file(dir.file("junk.ckpt"), "JUNKJUNKJUNK");
  const RunResult data = run_cli("decode --ckpt " + dir.file("junk.ckpt") + " --corpus " +
                                 dir.file("junk.afc") + " --out " + dir.file("h.txt"));

  EXPECT_EQ(usage.status, 2) << usage.output;
  EXPECT_EQ(unknown_flag.status, 2) << unknown_flag.output;
  EXPECT_EQ(missing.status, 4) << missing.output;
  EXPECT_TRUE(contains(missing.output, "error [io]")) << missing.output;
  EXPECT_EQ(config.status, 3) << config.output;
  EXPECT_TRUE(contains(config.output, "batchsize")) << config.output;
  EXPECT_EQ(override_err.status, 3) << override_err.output;
  EXPECT_EQ(data.status, 5) << data.output;
  EXPECT_TRUE(contains(data.output, "error [data]")) << data.output;
}

TEST(Cli, MultiPassPipelineEndToEnd) {
  fixtures::TempDir dir("cli_pipeline");
  const std::string small =
      " --override data.clean_train=12 --override data.accent_train=6"
      " --override data.test_utterances=3 --override train.batch_size=3"
      " --override train.pretrain_steps=3 --override train.adapt_steps=2"
      " --override train.retrain_steps=2 --override train.finetune_steps=2"
      " --override train.warmup=5";
  const std::string data = dir.file("data");
  const RunResult gen = run_cli("gen-data" + small + " --out " + data);
  ASSERT_EQ(gen.status, 0) << gen.output;
  EXPECT_TRUE(contains(gen.output, "accent_in_test")) << gen.output;

  const RunResult a1 = run_cli("pretrain" + small + " --data " + data + " --out " + dir.file("a1.ckpt"));
  ASSERT_EQ(a1.status, 0) << a1.output;
  const RunResult a2 = run_cli("adapt" + small + " --data " + data + " --ckpt " +
                               dir.file("a1.ckpt") + " --out " + dir.file("a2.ckpt"));
  ASSERT_EQ(a2.status, 0) << a2.output;
  const RunResult a3 = run_cli("retrain" + small + " --data " + data + " --ckpt " +
                               dir.file("a2.ckpt") + " --out " + dir.file("a3.ckpt"));
  ASSERT_EQ(a3.status, 0) << a3.output;
  EXPECT_TRUE(contains(a3.output, "pass A3")) << a3.output;

  // A3 from an A1 checkpoint breaks the pass chain.
  const RunResult wrong = run_cli("retrain" + small + " --data " + data + " --ckpt " +
                                  dir.file("a1.ckpt") + " --out " + dir.file("bad.ckpt"));
  EXPECT_EQ(wrong.status, 3) << wrong.output;

  const RunResult dec = run_cli("decode" + small + " --ckpt " + dir.file("a3.ckpt") + " --corpus " +
                                data + "/accent_in_test.afc --beam 2 --out " + dir.file("hyp.txt") +
                                " --ref-out " + dir.file("ref.txt"));
  ASSERT_EQ(dec.status, 0) << dec.output;
  const RunResult sc = run_cli("score --ref " + dir.file("ref.txt") + " --hyp " + dir.file("hyp.txt"));
  ASSERT_EQ(sc.status, 0) << sc.output;
  EXPECT_TRUE(contains(sc.output, "\"utterances\":3")) << sc.output;
}

}  // namespace
