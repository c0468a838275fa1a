#include "grideta/data.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"

using namespace grideta;
using namespace grideta::data;

namespace {

std::string temp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("jsonl trajectories load, clean, and round-trip") {
  const std::string path = temp_file("grideta_traj.jsonl");
  {
    std::ofstream out(path, std::ios::trunc);
    out << R"({"id":"a","domain":"RV","points":[{"lat":39.1,"lon":-84.5,"t":100},)"
        << R"({"lat":39.1001,"lon":-84.5,"t":110},{"lat":39.1002,"lon":-84.5,"t":120}]})"
        << "\n";
  }
  CleanStats stats;
  auto trajs = load_trajectories(path, Format::jsonl, &stats);
  REQUIRE(trajs.size() == 1);
  CHECK(trajs[0].points.size() == 3);
  CHECK(stats.duplicate_timestamps == 0);
  CHECK(stats.dropped_short == 0);

  // 10-minute gap splits into two trajectories
  {
    std::ofstream out(path, std::ios::trunc);
    out << R"({"id":"a","domain":"RV","points":[{"lat":39.1,"lon":-84.5,"t":100},)"
        << R"({"lat":39.1001,"lon":-84.5,"t":110},{"lat":39.2,"lon":-84.5,"t":710},)"
        << R"({"lat":39.2001,"lon":-84.5,"t":720}]})"
        << "\n";
  }
  auto split_trajs = load_trajectories(path, Format::jsonl, &stats);
  CHECK(split_trajs.size() == 2);
  CHECK(stats.gap_splits == 1);
  CHECK(split_trajs[0].id == "a");
  CHECK(split_trajs[1].id == "a#1");

  // unsorted + duplicate timestamps are repaired
  {
    std::ofstream out(path, std::ios::trunc);
    out << R"({"id":"b","domain":"SV","points":[{"lat":39.1,"lon":-84.5,"t":200},)"
        << R"({"lat":39.2,"lon":-84.5,"t":100},{"lat":39.3,"lon":-84.5,"t":200}]})"
        << "\n";
  }
  auto cleaned = load_trajectories(path, Format::jsonl, &stats);
  REQUIRE(cleaned.size() == 1);
  CHECK(cleaned[0].points.size() == 2);
  CHECK(cleaned[0].points[0].t == 100);
  CHECK(stats.duplicate_timestamps == 1);

  // round trip
  save_trajectories_jsonl(cleaned, path);
  auto reloaded = load_trajectories(path, Format::jsonl, nullptr);
  REQUIRE(reloaded.size() == 1);
  CHECK(reloaded[0].id == cleaned[0].id);
  CHECK(reloaded[0].domain == cleaned[0].domain);
  CHECK(reloaded[0].points.size() == cleaned[0].points.size());
  CHECK(reloaded[0].points[1].lat == cleaned[0].points[1].lat);

  std::filesystem::remove(path);
}

TEST_CASE("malformed lines report their line number") {
  const std::string path = temp_file("grideta_bad.jsonl");
  {
    std::ofstream out(path, std::ios::trunc);
    for (int i = 1; i <= 6; ++i)
      out << R"({"id":")" << i
          << R"(","domain":"RV","points":[{"lat":39.1,"lon":-84.5,"t":1},)"
          << R"({"lat":39.2,"lon":-84.5,"t":2}]})"
          << "\n";
    out << "{not json}\n";
  }
  try {
    load_trajectories(path, Format::jsonl, nullptr);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::parse_error);
    CHECK(std::string(e.what()).find("line 7") != std::string::npos);
  }

  const std::string empty = temp_file("grideta_empty.jsonl");
  std::ofstream(empty, std::ios::trunc);
  CHECK_THROWS_AS(load_trajectories(empty, Format::jsonl, nullptr), Error);

  std::filesystem::remove(path);
  std::filesystem::remove(empty);
}

TEST_CASE("csv trajectories group rows by id") {
  const std::string path = temp_file("grideta_traj.csv");
  {
    std::ofstream out(path, std::ios::trunc);
    out << "id,domain,lat,lon,t\n";
    out << "x,RV,39.1,-84.5,100\n";
    out << "y,SV,39.3,-84.6,100\n";
    out << "x,RV,39.1001,-84.5,110\n";
    out << "y,SV,39.3001,-84.6,115\n";
  }
  auto trajs = load_trajectories(path, Format::csv, nullptr);
  REQUIRE(trajs.size() == 2);
  CHECK(trajs[0].id == "x");
  CHECK(trajs[0].domain == "RV");
  CHECK(trajs[0].points.size() == 2);
  CHECK(trajs[1].id == "y");
  std::filesystem::remove(path);
}

TEST_CASE("side data loaders validate their schemas") {
  const std::string wx_path = temp_file("grideta_wx.csv");
  {
    std::ofstream out(wx_path, std::ios::trunc);
    out << "lat,lon,start_t,end_t,rain,snow,hail\n";
    out << "39.1,-84.5,100,200,0.5,0,0\n";
  }
  auto weather = load_weather(wx_path);
  REQUIRE(weather.size() == 1);
  CHECK(weather[0].levels.rain == 0.5);

  {
    std::ofstream out(wx_path, std::ios::trunc);
    out << "39.1,-84.5,100,200,1.5,0,0\n";
  }
  try {
    load_weather(wx_path);
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::schema_error);
  }

  const std::string hol_path = temp_file("grideta_hol.txt");
  {
    std::ofstream out(hol_path, std::ios::trunc);
    out << "2018-01-01\n2018-07-04\n";
  }
  auto holidays = load_holidays(hol_path);
  CHECK(holidays.count(days_from_civil(2018, 1, 1)) == 1);
  CHECK(holidays.count(days_from_civil(2018, 7, 4)) == 1);
  CHECK(holidays.size() == 2);

  // empty paths mean empty collections
  SideData side = load_side_data("", "", "", "");
  CHECK(side.pois.empty());
  CHECK(side.weather.empty());
  CHECK(side.events.empty());
  CHECK(side.holidays.empty());

  std::filesystem::remove(wx_path);
  std::filesystem::remove(hol_path);
}

TEST_CASE("days_from_civil") {
  CHECK(days_from_civil(1970, 1, 1) == 0);
  CHECK(days_from_civil(1970, 1, 2) == 1);
  CHECK(days_from_civil(2018, 1, 1) == 17532);
  CHECK(days_from_civil(1969, 12, 31) == -1);
}

TEST_CASE("dataset split is 70/10/20 and seed-stable") {
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 10; ++i)
    trajs.push_back(Trajectory{"t" + std::to_string(i), "RV", {}});

  DatasetSplit split = split_dataset(trajs, 42);
  CHECK(split.train.size() == 7);
  CHECK(split.val.size() == 1);
  CHECK(split.test.size() == 2);

  // disjoint and complete
  std::set<std::string> all;
  for (const auto& part : {split.train, split.val, split.test})
    for (const auto& id : part) CHECK(all.insert(id).second);
  CHECK(all.size() == 10);

  DatasetSplit again = split_dataset(trajs, 42);
  CHECK(again.train == split.train);
  CHECK(again.val == split.val);
  CHECK(again.test == split.test);

  bool any_moved = false;
  for (std::uint64_t seed = 2; seed <= 6; ++seed) {
    DatasetSplit other = split_dataset(trajs, seed);
    if (other.train != split.train) any_moved = true;
  }
  CHECK(any_moved);

  trajs.resize(9);
  CHECK_THROWS_AS(split_dataset(trajs, 1), Error);
}

TEST_CASE("noiseless synthetic world reproduces the base speed exactly") {
  SynthConfig cfg;
  cfg.grid = geo::GridSpec{39.0, -84.6, 0.001, 24, 24, 96};
  cfg.trajectories_per_domain = 6;
  cfg.points_per_trajectory = 40;
  cfg.domain_multipliers = {{"RV", 1.0}};
  cfg.rush_amplitude = 0.0;
  cfg.noise_level = 0.0;
  cfg.seed = 3;
  SynthWorld world = synth_generate(cfg);
  REQUIRE(world.trajectories.at("RV").size() == 6);

  int checked = 0;
  for (const auto& traj : world.trajectories.at("RV")) {
    auto samples = knowledge::extract_speed_samples(traj.points, cfg.grid, 0);
    for (const auto& s : samples) {
      CHECK(s.speed == doctest::Approx(cfg.base_speed).epsilon(1e-9));
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("domain multipliers show up in extracted speeds") {
  SynthConfig cfg;
  cfg.grid = geo::GridSpec{39.0, -84.6, 0.001, 24, 24, 96};
  cfg.trajectories_per_domain = 10;
  cfg.points_per_trajectory = 40;
  cfg.domain_multipliers = {{"RV", 1.0}, {"SV", 0.6}};
  cfg.seed = 4;
  SynthWorld world = synth_generate(cfg);

  auto mean_speed = [&](const std::string& domain) {
    double sum = 0.0;
    int n = 0;
    for (const auto& traj : world.trajectories.at(domain))
      for (const auto& s : knowledge::extract_speed_samples(traj.points, cfg.grid, 0)) {
        sum += s.speed;
        ++n;
      }
    return sum / n;
  };
  CHECK(mean_speed("SV") / mean_speed("RV") == doctest::Approx(0.6).epsilon(0.02));
}

TEST_CASE("synthetic output files are bit-identical per seed") {
  SynthConfig cfg;
  cfg.grid = geo::GridSpec{39.0, -84.6, 0.001, 12, 12, 96};
  cfg.trajectories_per_domain = 4;
  cfg.points_per_trajectory = 20;
  cfg.rush_amplitude = 0.2;
  cfg.noise_level = 0.1;
  cfg.seed = 99;

  namespace fs = std::filesystem;
  const std::string d1 = (fs::temp_directory_path() / "grideta_w1").string();
  const std::string d2 = (fs::temp_directory_path() / "grideta_w2").string();
  write_world(synth_generate(cfg), d1);
  write_world(synth_generate(cfg), d2);

  for (const auto* name :
       {"RV.jsonl", "SV.jsonl", "poi.csv", "weather.csv", "events.csv", "world.json"}) {
    CHECK(slurp((fs::path(d1) / name).string()) ==
          slurp((fs::path(d2) / name).string()));
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("synthetic ground truth is self-consistent") {
  SynthConfig cfg;
  cfg.grid = geo::GridSpec{39.0, -84.6, 0.001, 24, 24, 96};
  cfg.trajectories_per_domain = 5;
  cfg.points_per_trajectory = 50;
  cfg.domain_multipliers = {{"RV", 1.0}};
  cfg.rush_amplitude = 0.35;  // time-varying field, no stochastic noise
  cfg.noise_level = 0.0;
  cfg.seed = 8;
  SynthWorld world = synth_generate(cfg);

  for (const auto& traj : world.trajectories.at("RV")) {
    const double recorded = traj.points.back().t - traj.points.front().t;
    double analytic = 0.0;
    for (std::size_t i = 0; i + 1 < traj.points.size(); ++i) {
      const double chord = geo::haversine_distance(traj.points[i], traj.points[i + 1]);
      analytic += chord / world.true_speed("RV", traj.points[i].t);
    }
    CHECK(std::abs(analytic - recorded) / recorded < 0.01);
  }
}

TEST_CASE("synth config validation") {
  SynthConfig cfg;
  cfg.cadence_s = 2.5;
  CHECK_THROWS_AS(synth_generate(cfg), Error);

  SynthConfig slow;
  slow.domain_multipliers = {{"X", 0.005}};  // base 10 -> 0.05 m/s, under the window
  CHECK_THROWS_AS(synth_generate(slow), Error);
}
