#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "driveclone/eval/metrics.hpp"
#include "driveclone/eval/table.hpp"
#include "driveclone/text.hpp"
#include "fixtures.hpp"

namespace {

using namespace driveclone;
using namespace driveclone::eval;
using driveclone::testing::Mover;

data::Recording lonely_road(int track_id = 1) {
  // a single vehicle far down the outer lane; the ego never meets it
  auto rec = driveclone::testing::constant_speed_recording({{1, 1900.0, 3, 25.0}}, 300);
  rec.track_id = track_id;
  return rec;
}

data::Recording busy_road(int track_id) {
  std::vector<Mover> m;
  int id = 1;
  for (int lane = 1; lane <= 3; ++lane)
    for (int k = 0; k < 8; ++k) m.push_back({id++, 60.0 + 110.0 * k + 17.0 * lane, lane, 12.0 + 2.0 * lane});
  auto rec = driveclone::testing::constant_speed_recording(m, 400);
  rec.track_id = track_id;
  return rec;
}

const Controller coast = [](const Eigen::VectorXd&) { return sim::Action{0.0, 0.0}; };

TEST(Kmh, ClosedForms) {
  EXPECT_EQ(kmh(0.0), 0.0);
  EXPECT_NEAR(kmh(28.9778), 104.32, 0.005);
  EXPECT_NEAR(kmh(27.49), 98.964, 1e-9);
  EXPECT_EQ(kmh(10.0), 36.0);
  for (double a : {0.5, 3.25, 17.0})
    for (double b : {0.25, 8.0}) EXPECT_DOUBLE_EQ(kmh(a + b), kmh(a) + kmh(b));
}

TEST(LaneChangeRate, ClosedForms) {
  EXPECT_NEAR(lane_change_rate(141, 857), 0.16452, 1e-5);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", lane_change_rate(141, 857));
  EXPECT_STREQ(buf, "0.16");  // 0.1645 rounds down at two decimals
  EXPECT_EQ(lane_change_rate(0, 12), 0.0);
  EXPECT_EQ(lane_change_rate(12, 12), 1.0);
  EXPECT_THROW(lane_change_rate(3, 0), DivisionByZeroDrivers);
}

TEST(ExpertProfiles, Means) {
  auto rec = driveclone::testing::constant_speed_recording({{1, 10.0, 1, 28.9778}, {2, 80.0, 2, 28.9778}}, 40);
  rec.track_id = 4;
  const auto p = expert_profiles({rec});
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].track_id, 4);
  EXPECT_NEAR(p[0].expert_vel_kmph, 104.32, 0.005);

  auto acc = driveclone::testing::constant_speed_recording({{1, 10.0, 1, 20.0}}, 30);
  for (auto& f : acc.frames) f.x_acceleration = 0.13;
  EXPECT_NEAR(expert_profiles({acc})[0].expert_acc, 0.13, 1e-15);

  EXPECT_TRUE(expert_profiles({data::Recording{}}).empty());
  EXPECT_TRUE(expert_profiles({}).empty());
}

TEST(ExpertProfiles, NegativeDirectionReadsAsSpeed) {
  auto rec = driveclone::testing::constant_speed_recording({{1, 1500.0, 1, -30.0}}, 20);
  EXPECT_NEAR(expert_profiles({rec})[0].expert_vel_kmph, 108.0, 1e-9);
}

TEST(RunEvaluation, CoastingOnEmptyRoadKeepsSpawnSpeed) {
  EvalConfig cfg;
  cfg.seed = 5;
  const auto ev = run_evaluation("coast", coast, {lonely_road()}, cfg);
  EXPECT_EQ(ev.row.collisions, 0.0);
  EXPECT_EQ(ev.row.episodes, 30);
  EXPECT_EQ(ev.row.velocity_kmph, 25.0 * 3.6);
  EXPECT_EQ(ev.row.acceleration, 0.0);
  EXPECT_EQ(ev.row.lane_changes, 0);
  EXPECT_GT(ev.row.frames, 30);
  ASSERT_EQ(ev.tracks.size(), 1u);
  EXPECT_EQ(ev.tracks[0].second.vel_kmph, 90.0);
}

TEST(RunEvaluation, SteadyLateralCommandChangesLaneThenLeavesRoad) {
  EvalConfig cfg;
  cfg.seed = 6;
  cfg.insertions_per_track = 10;
  const Controller left = [](const Eigen::VectorXd&) { return sim::Action{0.0, 2.0}; };
  const auto ev = run_evaluation("left", left, {lonely_road()}, cfg);
  EXPECT_EQ(ev.off_road, 10);
  EXPECT_GE(ev.row.lane_changes, 1);
  EXPECT_EQ(ev.row.collisions, 0.0);
}

TEST(RunEvaluation, CollisionsAreCountedAndBounded) {
  EvalConfig cfg;
  cfg.seed = 7;
  const Controller rush = [](const Eigen::VectorXd&) { return sim::Action{4.0, 0.0}; };
  const auto ev = run_evaluation("rush", rush, {busy_road(1), busy_road(2)}, cfg);
  EXPECT_GT(ev.row.collision_episodes, 0);
  EXPECT_LE(ev.row.collision_episodes, ev.row.episodes);
  EXPECT_EQ(ev.row.episodes, 60);
  EXPECT_DOUBLE_EQ(ev.row.collisions, ev.row.collision_episodes / 2.0);
  EXPECT_EQ(ev.row.acceleration, 4.0);
}

TEST(RunEvaluation, DeterministicAndOrderFree) {
  EvalConfig cfg;
  cfg.seed = 8;
  cfg.max_steps = 100;
  const std::vector<data::Recording> recs{busy_road(3), lonely_road(1), busy_road(2)};
  const std::vector<data::Recording> reordered{recs[2], recs[0], recs[1]};
  const Controller mild = [](const Eigen::VectorXd& o) { return sim::Action{0.5 - 0.1 * o(0), 0.0}; };
  const auto a = run_evaluation("mild", mild, recs, cfg);
  const auto b = run_evaluation("mild", mild, recs, cfg);
  const auto c = run_evaluation("mild", mild, reordered, cfg);
  cfg.workers = 3;
  const auto d = run_evaluation("mild", mild, recs, cfg);
  const auto csv = table_csv({a.row});
  EXPECT_EQ(csv, table_csv({b.row}));
  EXPECT_EQ(csv, table_csv({c.row}));
  EXPECT_EQ(csv, table_csv({d.row}));
  EXPECT_EQ(a.tracks.front().first, 1);
  EXPECT_EQ(a.tracks.back().first, 3);
  EXPECT_LE(a.row.frames, 3 * 30 * 100);
}

TEST(RunEvaluation, Errors) {
  EvalConfig cfg;
  EXPECT_THROW(run_evaluation("x", coast, {}, cfg), InvalidConfig);
  EXPECT_THROW(run_evaluation("x", coast, {data::Recording{}}, cfg), NoValidSpawn);
  EXPECT_THROW(run_evaluation("a,b", coast, {lonely_road()}, cfg), InvalidConfig);
}

TEST(RunEvaluation, TrainedPolicyOverload) {
  auto rng = make_rng(1);
  const auto p = bc::make_policy(bc::PolicyKind::ffn, sim::ObservationSpec{}.width(), {8}, rng);
  EvalConfig cfg;
  cfg.insertions_per_track = 3;
  cfg.max_steps = 50;
  const auto ev = run_evaluation("BC", p, {lonely_road()}, cfg);
  EXPECT_EQ(ev.row.episodes, 3);
  EXPECT_GE(ev.row.velocity_kmph, 0.0);
}

MetricsRow row(std::string name, double c, double v, double a, long lc, long ep) {
  MetricsRow r;
  r.policy = std::move(name);
  r.collisions = c;
  r.velocity_kmph = v;
  r.acceleration = a;
  r.lane_changes = lc;
  r.episodes = ep;
  return r;
}

TEST(ExportTable, OnePolicyOneTrack) {
  const auto rows = std::vector<MetricsRow>{row("BC", 11.43, 102.96, 0.123456789, 7, 30)};
  std::vector<TrackProfile> prof{{12, 104.32, 0.13, {{"BC", {102.5, -0.25}}}}};
  const auto table = table_csv(rows);
  const auto profiles = profiles_csv(prof);
  EXPECT_EQ(table,
            "policy,collisions,velocity_kmph,acceleration,lane_changes,lane_change_rate,episodes\n"
            "BC,11.43,102.96,0.123457,7,0.233333,30\n");
  EXPECT_EQ(profiles, "Track,expert_vel_kmph,expert_acc,BC_vel_kmph,BC_acc\n12,104.32,0.13,102.5,-0.25\n");

  const auto dir = std::filesystem::temp_directory_path() / "driveclone_eval_test";
  std::filesystem::create_directories(dir);
  export_table(rows, prof, (dir / "table.csv").string(), (dir / "profiles.csv").string());
  EXPECT_EQ(text::read_file((dir / "table.csv").string()), table);
  EXPECT_EQ(text::read_file((dir / "profiles.csv").string()), profiles);
  EXPECT_THROW(export_table(rows, prof, (dir / "missing" / "t.csv").string(), (dir / "p.csv").string()), IoFailure);
  EXPECT_THROW(table_csv({}), InvalidConfig);
}

TEST(ExportTable, RoundTrip) {
  const std::vector<MetricsRow> rows{row("BC", 11.43, 102.96, 0.021, 3, 30), row("AIR-GAIL", 30.35, 90.82, -0.5, 0, 30)};
  const auto parsed = parse_table(table_csv(rows));
  ASSERT_EQ(parsed.size(), 2u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(parsed[i].policy, rows[i].policy);
    EXPECT_EQ(parsed[i].collisions, rows[i].collisions);
    EXPECT_EQ(parsed[i].velocity_kmph, rows[i].velocity_kmph);
    EXPECT_EQ(parsed[i].acceleration, rows[i].acceleration);
    EXPECT_EQ(parsed[i].lane_changes, rows[i].lane_changes);
    EXPECT_EQ(parsed[i].episodes, rows[i].episodes);
  }
  EXPECT_EQ(table_csv(parsed), table_csv(rows));

  std::vector<TrackProfile> prof{{1, 100.5, 0.1, {{"BC", {99.0, 0.2}}, {"GAN", {98.964, -0.1}}}},
                                 {2, 101.0, 0.0, {{"BC", {97.0, 0.0}}, {"GAN", {96.0, 0.05}}}}};
  const auto back = parse_profiles(profiles_csv(prof));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].track_id, 2);
  EXPECT_EQ(back[0].policies[1].first, "GAN");
  EXPECT_EQ(back[0].policies[1].second.vel_kmph, 98.964);
  EXPECT_EQ(profiles_csv(back), profiles_csv(prof));
  EXPECT_THROW(parse_table("policy,x\n"), ShapeMismatch);
  EXPECT_THROW(parse_profiles("Track,expert_vel_kmph,expert_acc,BC_vel_kmph\n"), ShapeMismatch);
}

TEST(ExportTable, FivePolicyLayout) {
  const std::vector<std::string> names{"BC", "BC MDN", "GAN", "GAIL", "AIR-GAIL"};
  std::vector<Evaluation> evals;
  for (const auto& n : names) {
    Evaluation e;
    e.row.policy = n;
    e.tracks = {{1, {100.0, 0.1}}};
    evals.push_back(e);
  }
  auto rec = driveclone::testing::constant_speed_recording({{1, 10.0, 1, 30.0}}, 10);
  rec.track_id = 1;
  const auto merged = merge_profiles(expert_profiles({rec}), evals);
  const auto head = text::lines(profiles_csv(merged)).front();
  EXPECT_EQ(head,
            "Track,expert_vel_kmph,expert_acc,BC_vel_kmph,BC_acc,BC MDN_vel_kmph,BC MDN_acc,GAN_vel_kmph,GAN_acc,"
            "GAIL_vel_kmph,GAIL_acc,AIR-GAIL_vel_kmph,AIR-GAIL_acc");
  std::vector<MetricsRow> rows;
  for (const auto& e : evals) rows.push_back(e.row);
  const auto t = parse_table(table_csv(rows));
  ASSERT_EQ(t.size(), 5u);
  for (std::size_t i = 0; i < names.size(); ++i) EXPECT_EQ(t[i].policy, names[i]);
}

}  // namespace
