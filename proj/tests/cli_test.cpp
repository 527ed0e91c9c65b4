#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "driveclone/cli/app.hpp"
#include "driveclone/eval/table.hpp"
#include "driveclone/nn/checkpoint.hpp"
#include "driveclone/text.hpp"

namespace dc = driveclone;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dc::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("driveclone_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    unsetenv("DRIVECLONE_SEED");
  }
  void TearDown() override {
    fs::remove_all(dir);
    unsetenv("DRIVECLONE_SEED");
  }
  std::string at(const std::string& name) const { return (dir / name).string(); }

  void synth_tracks(const std::string& sub, int n) {
    fs::create_directories(dir / sub);
    for (int i = 1; i <= n; ++i) {
      const auto r = cli({"synth", "--out", at(sub + "/t" + std::to_string(i) + ".csv"), "--seed", std::to_string(10 + i),
                          "--track-id", std::to_string(i), "--duration", "20", "--vehicles", "12"});
      ASSERT_EQ(r.code, 0) << r.err;
    }
  }

  fs::path dir;
};

}  // namespace

TEST(CliArgs, WidthsParse) {
  EXPECT_EQ(dc::cli::parse_widths("64,64"), (std::vector<int>{64, 64}));
  EXPECT_EQ(dc::cli::parse_widths(" 8 , 4 "), (std::vector<int>{8, 4}));
  EXPECT_THROW(dc::cli::parse_widths("64,x"), dc::cli::UsageError);
  EXPECT_THROW(dc::cli::parse_widths("0"), dc::cli::UsageError);
}

TEST_F(Cli, NoArgumentsPrintsUsageAndFails) {
  const auto r = cli({});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST_F(Cli, HelpSucceeds) {
  const auto r = cli({"train", "gail", "--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--budget"), std::string::npos);
}

TEST_F(Cli, UnknownFlagOrSubcommandFails) {
  EXPECT_EQ(cli({"synth", "--out", at("a.csv"), "--seed", "1", "--warp", "9"}).code, 1);
  EXPECT_EQ(cli({"fly"}).code, 1);
  EXPECT_EQ(cli({"train", "ppo", "--demos", "x", "--out", "y", "--seed", "1"}).code, 1);
  EXPECT_EQ(cli({"train", "bc", "--demos", "x", "--out", "y", "--seed", "1", "--M", "3"}).code, 1);
  EXPECT_FALSE(fs::exists(at("a.csv")));
}

TEST_F(Cli, OutOfRangeValueFails) {
  EXPECT_EQ(cli({"synth", "--out", at("a.csv"), "--seed", "1", "--vehicles", "0"}).code, 1);
  EXPECT_EQ(cli({"synth", "--out", at("a.csv"), "--seed", "1", "--vehicles", "many"}).code, 1);
}

TEST_F(Cli, SeedIsRequiredUnlessInEnvironment) {
  auto r = cli({"synth", "--out", at("a.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--seed"), std::string::npos);
  EXPECT_FALSE(fs::exists(at("a.csv")));

  setenv("DRIVECLONE_SEED", "7", 1);
  ASSERT_EQ(cli({"synth", "--out", at("a.csv")}).code, 0);
  unsetenv("DRIVECLONE_SEED");
  ASSERT_EQ(cli({"synth", "--out", at("b.csv"), "--seed", "7"}).code, 0);
  EXPECT_EQ(dc::text::read_file(at("a.csv")), dc::text::read_file(at("b.csv")));

  setenv("DRIVECLONE_SEED", "seven", 1);
  EXPECT_EQ(cli({"synth", "--out", at("c.csv")}).code, 1);
}

TEST_F(Cli, RuntimeFailureExitsTwo) {
  const auto r = cli({"train", "bc", "--demos", at("missing.csv"), "--out", at("p.ckpt"), "--seed", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("IoFailure"), std::string::npos);
}

TEST_F(Cli, SynthIsByteIdenticalAcrossRuns) {
  for (const char* name : {"a.csv", "b.csv"})
    ASSERT_EQ(cli({"synth", "--out", at(name), "--seed", "5", "--duration", "20"}).code, 0);
  EXPECT_EQ(dc::text::read_file(at("a.csv")), dc::text::read_file(at("b.csv")));
  EXPECT_EQ(dc::text::read_file(at("a.meta")), dc::text::read_file(at("b.meta")));
  ASSERT_EQ(cli({"synth", "--out", at("c.csv"), "--seed", "6", "--duration", "20"}).code, 0);
  EXPECT_NE(dc::text::read_file(at("a.csv")), dc::text::read_file(at("c.csv")));

  const auto m = dc::text::read_file(at("a.csv.manifest"));
  EXPECT_NE(m.find("command=synth\n"), std::string::npos);
  EXPECT_NE(m.find("seed=5\n"), std::string::npos);
  EXPECT_NE(m.find("duration=20\n"), std::string::npos);
  EXPECT_NE(m.find("vehicles=20\n"), std::string::npos);
  EXPECT_NE(m.find("artifact." + at("a.csv") + "="), std::string::npos);
}

TEST_F(Cli, ConfigFileSitsBetweenFlagsAndDefaults) {
  dc::text::write_file(at("run.cfg"), "# synth settings\nseed=5\nduration = 20\nvehicles=9\n");
  ASSERT_EQ(cli({"synth", "--out", at("a.csv"), "--config", at("run.cfg"), "--vehicles", "11"}).code, 0);
  const auto m = dc::text::read_file(at("a.csv.manifest"));
  EXPECT_NE(m.find("vehicles=11\n"), std::string::npos);
  EXPECT_NE(m.find("duration=20\n"), std::string::npos);
  EXPECT_NE(m.find("seed=5\n"), std::string::npos);
  EXPECT_NE(m.find("lanes=3\n"), std::string::npos);

  dc::text::write_file(at("bad.cfg"), "seed=5\nwarp=9\n");
  EXPECT_EQ(cli({"synth", "--out", at("b.csv"), "--config", at("bad.cfg")}).code, 1);
  dc::text::write_file(at("junk.cfg"), "seed 5\n");
  EXPECT_EQ(cli({"synth", "--out", at("b.csv"), "--config", at("junk.cfg")}).code, 1);
  EXPECT_EQ(cli({"synth", "--out", at("b.csv"), "--config", at("none.cfg")}).code, 1);
}

TEST_F(Cli, TrainEvalExportPipelineIsDeterministic) {
  synth_tracks("tracks", 2);
  ASSERT_EQ(cli({"demos", "--tracks", at("tracks"), "--out", at("demos.csv")}).code, 0);

  for (const char* out : {"bc.ckpt", "bc2.ckpt"}) {
    const auto r = cli({"train", "bc", "--demos", at("demos.csv"), "--out", at(out), "--seed", "3", "--epochs", "2",
                        "--hidden", "16,16"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(dc::text::read_file(at("bc.ckpt")), dc::text::read_file(at("bc2.ckpt")));
  EXPECT_EQ(dc::text::read_file(at("bc.ckpt.report.csv")), dc::text::read_file(at("bc2.ckpt.report.csv")));
  EXPECT_EQ(dc::nn::parse_checkpoint(dc::text::read_file(at("bc.ckpt"))).meta_at("name"), "BC");

  ASSERT_EQ(cli({"train", "bcmdn", "--demos", at("demos.csv"), "--out", at("mdn.ckpt"), "--seed", "3", "--epochs", "2",
                 "--hidden", "16,16", "--M", "3"})
                .code,
            0);

  for (const char* out : {"bc.csv", "bc_again.csv"})
    ASSERT_EQ(cli({"eval", "--policy", at("bc.ckpt"), "--tracks", at("tracks"), "--seed", "4", "--insertions", "3",
                   "--max-steps", "100", "--out", at(out)})
                  .code,
              0);
  EXPECT_EQ(dc::text::read_file(at("bc.csv")), dc::text::read_file(at("bc_again.csv")));
  EXPECT_EQ(dc::text::read_file(at("bc.csv.profiles.csv")), dc::text::read_file(at("bc_again.csv.profiles.csv")));
  ASSERT_EQ(cli({"eval", "--policy", at("mdn.ckpt"), "--tracks", at("tracks"), "--seed", "4", "--insertions", "3",
                 "--max-steps", "100", "--out", at("mdn.csv"), "--workers", "2"})
                .code,
            0);

  ASSERT_EQ(cli({"export", "--metrics", at("bc.csv"), at("mdn.csv"), "--out", at("table.csv")}).code, 0);
  const auto rows = dc::eval::parse_table(dc::text::read_file(at("table.csv")));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].policy, "BC");
  EXPECT_EQ(rows[1].policy, "BC MDN");
  EXPECT_EQ(rows[0].episodes, 6);
  const auto prof = dc::eval::parse_profiles(dc::text::read_file(at("table.csv.profiles.csv")));
  ASSERT_EQ(prof.size(), 2u);
  EXPECT_EQ(prof[0].track_id, 1);
  ASSERT_EQ(prof[0].policies.size(), 2u);
  EXPECT_EQ(prof[1].policies[1].first, "BC MDN");
}

TEST_F(Cli, EvalNameOverridesCheckpointAndStillRejectsCommas) {
  synth_tracks("tracks", 1);
  ASSERT_EQ(cli({"demos", "--tracks", at("tracks/t1.csv"), "--out", at("demos.csv")}).code, 0);
  ASSERT_EQ(cli({"train", "bc", "--demos", at("demos.csv"), "--out", at("p.ckpt"), "--seed", "1", "--epochs", "1"}).code, 0);
  const std::vector<std::string> base = {"eval",       "--policy", at("p.ckpt"), "--tracks", at("tracks"), "--seed", "1",
                                         "--insertions", "2",    "--max-steps", "20", "--out", at("m.csv")};
  auto args = base;
  args.insert(args.end(), {"--name", "mine"});
  ASSERT_EQ(cli(args).code, 0);
  EXPECT_EQ(dc::eval::parse_table(dc::text::read_file(at("m.csv")))[0].policy, "mine");
  args = base;
  args.insert(args.end(), {"--name", "a,b"});
  EXPECT_EQ(cli(args).code, 2);
}

TEST_F(Cli, AdversarialTrainersWriteDiscriminatorAndReport) {
  synth_tracks("tracks", 1);
  ASSERT_EQ(cli({"demos", "--tracks", at("tracks"), "--out", at("demos.csv")}).code, 0);
  auto r = cli({"train", "gan", "--demos", at("demos.csv"), "--out", at("gan.ckpt"), "--seed", "2", "--steps", "20",
                "--hidden", "8", "--report-every", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(at("gan.ckpt.disc")));
  EXPECT_EQ(dc::nn::parse_checkpoint(dc::text::read_file(at("gan.ckpt"))).meta_at("name"), "GAN");

  r = cli({"train", "airgail", "--demos", at("demos.csv"), "--tracks", at("tracks"), "--out", at("air.ckpt"), "--seed",
           "2", "--budget", "128", "--steps-per-iter", "64", "--hidden", "8", "--disc-hidden", "8", "--minibatch", "32",
           "--penalty", "-5", "--horizon", "50"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(at("air.ckpt.disc")));
  const auto report = dc::text::read_file(at("air.ckpt.report.csv"));
  EXPECT_EQ(dc::text::lines(report).front(), "iter,disc_loss,mean_surrogate_reward,mean_episode_len,collision_rate,entropy");
  EXPECT_NE(dc::text::read_file(at("air.ckpt.manifest")).find("penalty=-5\n"), std::string::npos);
  EXPECT_EQ(dc::nn::parse_checkpoint(dc::text::read_file(at("air.ckpt"))).meta_at("name"), "AIR-GAIL");

  // budget below one rollout is a runtime configuration error
  EXPECT_EQ(cli({"train", "gail", "--demos", at("demos.csv"), "--tracks", at("tracks"), "--out", at("g.ckpt"), "--seed",
                 "2", "--budget", "10", "--steps-per-iter", "64"})
                .code,
            2);
}
