#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <string>

#include <sys/wait.h>

#include "support/test_util.hpp"
#include "vidcensor/censor.hpp"
#include "vidcensor/fsio.hpp"
#include "vidcensor/media_io.hpp"
#include "vidcensor/pipeline.hpp"

#ifndef VIDCENSOR_CLI_PATH
#define VIDCENSOR_CLI_PATH "vidcensor"
#endif

namespace vc = vidcensor;
namespace fs = std::filesystem;
using vc::testing::random_asset;
using vc::testing::TempDir;
using vc::testing::write_cluster_manifest;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args) {
  const std::string command =
      std::string(VIDCENSOR_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(command.c_str(), "r");
  EXPECT_NE(pipe, nullptr);
  CliResult result;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) {
    result.output.append(buf.data(), n);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

TEST(Cli, UnknownFlagIsUsageError) {
  const auto r = run_cli("train --bogus-flag");
  EXPECT_EQ(r.exit_code, 1);
}

TEST(Cli, MissingSubcommandIsUsageError) {
  const auto r = run_cli("");
  EXPECT_EQ(r.exit_code, 1);
}

TEST(Cli, HelpExitsCleanly) {
  const auto r = run_cli("--help");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.output.find("censor"), std::string::npos);
}

TEST(Cli, MissingManifestIsInputError) {
  const auto r = run_cli("train --manifest /does/not/exist.csv --out /tmp/x");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("input error"), std::string::npos);
}

TEST(Cli, BadProviderIsUsageError) {
  TempDir dir("cli-provider");
  const auto manifest =
      write_cluster_manifest(dir.path(), 10, 16, 4, 10.0, 2, 301);
  const fs::path bundle = dir.path() / "m.icmb";
  ASSERT_EQ(run_cli("train --manifest " + manifest.string() + " --out " +
                    bundle.string() + " --kernel linear")
                .exit_code,
            0);
  vc::SplitMix64 rng(302);
  const auto asset = random_asset(8, 8, {10, 1}, 6.0, 8000, rng);
  vc::atomic_write_file(dir.path() / "c.y4m",
                        vc::write_y4m(asset.frame_rate, asset.frames));
  vc::atomic_write_file(dir.path() / "c.wav", vc::write_wav(asset.audio));
  const auto r = run_cli("censor " + (dir.path() / "c.y4m").string() + " " +
                         (dir.path() / "c.wav").string() + " --model " +
                         bundle.string() + " --provider bogus --out " +
                         (dir.path() / "out").string() + " --report " +
                         (dir.path() / "r.xml").string());
  EXPECT_EQ(r.exit_code, 1);
}

TEST(Cli, TrainEvalCensorFlow) {
  TempDir dir("cli-flow");
  const auto manifest =
      write_cluster_manifest(dir.path() / "train", 40, 32, 8, 10.0, 3, 303);
  const fs::path bundle = dir.path() / "model.icmb";

  // train
  auto r = run_cli("train --manifest " + manifest.string() + " --out " +
                   bundle.string() + " --kernel linear --seed 9 --json " +
                   (dir.path() / "train.json").string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("held-out test split"), std::string::npos);
  EXPECT_TRUE(fs::exists(bundle));
  EXPECT_TRUE(fs::exists(dir.path() / "train.json"));

  // eval
  r = run_cli("eval --manifest " + manifest.string() + " --model " +
              bundle.string() + " --k 5 --seed 9 --json " +
              (dir.path() / "eval.json").string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("k-fold cross-validation (k=5)"),
            std::string::npos);
  EXPECT_NE(r.output.find("Appropriate"), std::string::npos);
  EXPECT_NE(r.output.find("Inappropriate"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir.path() / "eval.json"));

  // censor with the synthetic provider: deterministic, structure checked.
  vc::SplitMix64 rng(304);
  const auto asset = random_asset(16, 12, {10, 1}, 10.0, 8000, rng);
  vc::atomic_write_file(dir.path() / "in.y4m",
                        vc::write_y4m(asset.frame_rate, asset.frames));
  vc::atomic_write_file(dir.path() / "in.wav", vc::write_wav(asset.audio));
  const std::string censor_args =
      "censor " + (dir.path() / "in.y4m").string() + " " +
      (dir.path() / "in.wav").string() + " --model " + bundle.string() +
      " --out " + (dir.path() / "out").string() + " --report " +
      (dir.path() / "report.xml").string();
  r = run_cli(censor_args);
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir.path() / "out" / "in.y4m"));
  EXPECT_TRUE(fs::exists(dir.path() / "out" / "in.wav"));
  EXPECT_TRUE(fs::exists(dir.path() / "report.xml"));

  const auto report = vc::parse_xml(vc::read_file(dir.path() / "report.xml"));
  EXPECT_EQ(report.video_name, "in");
  EXPECT_NEAR(report.total_duration, 10.0, 1e-9);

  // Output durations always match the input.
  const auto out_video =
      vc::read_y4m(vc::read_file(dir.path() / "out" / "in.y4m"));
  const auto out_audio =
      vc::read_wav(vc::read_file(dir.path() / "out" / "in.wav"));
  EXPECT_EQ(out_video.frames.size(), asset.frames.size());
  EXPECT_EQ(out_audio.samples.size(), asset.audio.samples.size());

  // Determinism: a second run produces identical artifacts.
  const auto video_bytes = vc::read_file(dir.path() / "out" / "in.y4m");
  const auto report_bytes = vc::read_file(dir.path() / "report.xml");
  r = run_cli(censor_args);
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(vc::read_file(dir.path() / "out" / "in.y4m"), video_bytes);
  EXPECT_EQ(vc::read_file(dir.path() / "report.xml"), report_bytes);
}

TEST(Cli, CorruptMediaIsInputError) {
  TempDir dir("cli-corrupt");
  const auto manifest =
      write_cluster_manifest(dir.path(), 10, 16, 4, 10.0, 2, 305);
  const fs::path bundle = dir.path() / "m.icmb";
  ASSERT_EQ(run_cli("train --manifest " + manifest.string() + " --out " +
                    bundle.string() + " --kernel linear")
                .exit_code,
            0);
  vc::atomic_write_file(dir.path() / "bad.y4m",
                        std::vector<std::uint8_t>{'b', 'a', 'd'});
  vc::SplitMix64 rng(306);
  vc::atomic_write_file(
      dir.path() / "ok.wav",
      vc::write_wav(vc::testing::random_track(8000, 8000, rng)));
  const auto r = run_cli("censor " + (dir.path() / "bad.y4m").string() + " " +
                         (dir.path() / "ok.wav").string() + " --model " +
                         bundle.string() + " --out " +
                         (dir.path() / "out").string() + " --report " +
                         (dir.path() / "r.xml").string());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("not a Y4M stream"), std::string::npos);
}

}  // namespace
