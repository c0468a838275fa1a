#include "grideta/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

namespace grideta::data {

namespace {

constexpr double kGapSeconds = 300.0;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace
    const auto begin = field.find_first_not_of(" \t\r");
    const auto end = field.find_last_not_of(" \t\r");
    fields.push_back(begin == std::string::npos ? "" : field.substr(begin, end - begin + 1));
  }
  return fields;
}

double parse_double(const std::string& s, int line_no, const char* what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    fail(Errc::parse_error, std::string("line ") + std::to_string(line_no) + ": bad " +
                                what + " '" + s + "'");
  return v;
}

bool looks_numeric(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end != s.c_str() && *end == '\0';
}

void check_point(const geo::GpsPoint& p, int line_no) {
  if (!geo::valid_coordinates(p) || p.t < 0)
    fail(Errc::parse_error,
         "line " + std::to_string(line_no) + ": coordinates out of range");
}

}  // namespace

std::vector<Trajectory> clean_trajectories(std::vector<Trajectory> raw, CleanStats* stats) {
  CleanStats local;
  local.raw_trajectories = static_cast<int>(raw.size());
  std::vector<Trajectory> out;
  for (auto& traj : raw) {
    std::stable_sort(traj.points.begin(), traj.points.end(),
                     [](const geo::GpsPoint& a, const geo::GpsPoint& b) { return a.t < b.t; });
    std::vector<geo::GpsPoint> pts;
    for (const auto& p : traj.points) {
      if (!pts.empty() && p.t == pts.back().t) {
        ++local.duplicate_timestamps;
        continue;
      }
      pts.push_back(p);
    }
    // split at gaps
    std::vector<std::vector<geo::GpsPoint>> pieces;
    std::vector<geo::GpsPoint> current;
    for (const auto& p : pts) {
      if (!current.empty() && p.t - current.back().t > kGapSeconds) {
        pieces.push_back(std::move(current));
        current.clear();
        ++local.gap_splits;
      }
      current.push_back(p);
    }
    if (!current.empty()) pieces.push_back(std::move(current));

    int part = 0;
    for (auto& piece : pieces) {
      if (piece.size() < 2) {
        ++local.dropped_short;
        continue;
      }
      Trajectory t;
      t.id = part == 0 ? traj.id : traj.id + "#" + std::to_string(part);
      ++part;
      t.domain = traj.domain;
      t.points = std::move(piece);
      out.push_back(std::move(t));
    }
  }
  if (stats) *stats = local;
  return out;
}

std::vector<Trajectory> load_trajectories(const std::string& path, Format format,
                                          CleanStats* stats) {
  std::ifstream in(path);
  if (!in) fail(Errc::parse_error, "cannot open '" + path + "'");

  std::vector<Trajectory> raw;
  std::string line;
  int line_no = 0;

  if (format == Format::jsonl) {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json js;
      try {
        js = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        fail(Errc::parse_error, "line " + std::to_string(line_no) + ": " + e.what());
      }
      Trajectory traj;
      try {
        traj.id = js.at("id").is_string() ? js.at("id").get<std::string>()
                                          : std::to_string(js.at("id").get<long long>());
        traj.domain = js.value("domain", std::string("default"));
        for (const auto& pj : js.at("points")) {
          geo::GpsPoint p{pj.at("lon").get<double>(), pj.at("lat").get<double>(),
                          static_cast<double>(pj.at("t").get<std::int64_t>())};
          check_point(p, line_no);
          traj.points.push_back(p);
        }
      } catch (const nlohmann::json::exception& e) {
        fail(Errc::parse_error, "line " + std::to_string(line_no) + ": " + e.what());
      }
      raw.push_back(std::move(traj));
    }
  } else {
    std::map<std::string, std::size_t> index;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto fields = split_csv_line(line);
      if (line_no == 1 && fields.size() >= 5 && !looks_numeric(fields[2])) continue;
      if (fields.size() != 5)
        fail(Errc::parse_error,
             "line " + std::to_string(line_no) + ": expected id,domain,lat,lon,t");
      geo::GpsPoint p{parse_double(fields[3], line_no, "lon"),
                      parse_double(fields[2], line_no, "lat"),
                      parse_double(fields[4], line_no, "t")};
      check_point(p, line_no);
      auto [it, inserted] = index.try_emplace(fields[0], raw.size());
      if (inserted) raw.push_back(Trajectory{fields[0], fields[1], {}});
      raw[it->second].points.push_back(p);
    }
  }
  if (raw.empty()) fail(Errc::empty_file, "'" + path + "' holds no trajectories");
  return clean_trajectories(std::move(raw), stats);
}

void save_trajectories_jsonl(const std::vector<Trajectory>& trajectories,
                             const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::parse_error, "cannot open '" + path + "' for writing");
  for (const auto& traj : trajectories) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : traj.points)
      points.push_back({{"lat", p.lat},
                        {"lon", p.lon},
                        {"t", static_cast<std::int64_t>(std::llround(p.t))}});
    nlohmann::json js{{"id", traj.id}, {"domain", traj.domain}, {"points", points}};
    out << js.dump() << '\n';
  }
}

std::vector<knowledge::PoiRecord> load_pois(const std::string& path) {
  std::vector<knowledge::PoiRecord> out;
  std::ifstream in(path);
  if (!in) fail(Errc::parse_error, "cannot open '" + path + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (line_no == 1 && !fields.empty() && !looks_numeric(fields[0])) continue;
    if (fields.size() < 2)
      fail(Errc::parse_error, "line " + std::to_string(line_no) + ": expected lat,lon,category");
    knowledge::PoiRecord r;
    r.lat = parse_double(fields[0], line_no, "lat");
    r.lon = parse_double(fields[1], line_no, "lon");
    r.category = fields.size() > 2 ? fields[2] : "";
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<knowledge::WeatherRecord> load_weather(const std::string& path) {
  std::vector<knowledge::WeatherRecord> out;
  std::ifstream in(path);
  if (!in) fail(Errc::parse_error, "cannot open '" + path + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (line_no == 1 && !fields.empty() && !looks_numeric(fields[0])) continue;
    if (fields.size() != 7)
      fail(Errc::parse_error, "line " + std::to_string(line_no) +
                                  ": expected lat,lon,start_t,end_t,rain,snow,hail");
    knowledge::WeatherRecord r;
    r.lat = parse_double(fields[0], line_no, "lat");
    r.lon = parse_double(fields[1], line_no, "lon");
    r.start_t = parse_double(fields[2], line_no, "start_t");
    r.end_t = parse_double(fields[3], line_no, "end_t");
    r.levels.rain = parse_double(fields[4], line_no, "rain");
    r.levels.snow = parse_double(fields[5], line_no, "snow");
    r.levels.hail = parse_double(fields[6], line_no, "hail");
    for (double level : {r.levels.rain, r.levels.snow, r.levels.hail})
      if (level < 0.0 || level > 1.0)
        fail(Errc::schema_error,
             "line " + std::to_string(line_no) + ": weather levels must be in [0,1]");
    out.push_back(r);
  }
  return out;
}

std::vector<knowledge::EventRecord> load_events(const std::string& path) {
  std::vector<knowledge::EventRecord> out;
  std::ifstream in(path);
  if (!in) fail(Errc::parse_error, "cannot open '" + path + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (line_no == 1 && !fields.empty() && !looks_numeric(fields[0])) continue;
    if (fields.size() < 4)
      fail(Errc::parse_error,
           "line " + std::to_string(line_no) + ": expected lat,lon,start_t,end_t,kind");
    knowledge::EventRecord r;
    r.lat = parse_double(fields[0], line_no, "lat");
    r.lon = parse_double(fields[1], line_no, "lon");
    r.start_t = parse_double(fields[2], line_no, "start_t");
    r.end_t = parse_double(fields[3], line_no, "end_t");
    r.kind = fields.size() > 4 ? fields[4] : "";
    out.push_back(std::move(r));
  }
  return out;
}

std::int64_t days_from_civil(int year, int month, int day) {
  year -= month <= 2;
  const int era = (year >= 0 ? year : year - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(year - era * 400);
  const unsigned doy =
      static_cast<unsigned>((153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1);
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::set<std::int64_t> load_holidays(const std::string& path) {
  std::set<std::int64_t> out;
  std::ifstream in(path);
  if (!in) fail(Errc::parse_error, "cannot open '" + path + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r");
    const std::string date = line.substr(begin, end - begin + 1);
    int y = 0, m = 0, d = 0;
    if (std::sscanf(date.c_str(), "%d-%d-%d", &y, &m, &d) != 3 || m < 1 || m > 12 ||
        d < 1 || d > 31)
      fail(Errc::parse_error, "line " + std::to_string(line_no) + ": expected YYYY-MM-DD");
    out.insert(days_from_civil(y, m, d));
  }
  return out;
}

SideData load_side_data(const std::string& poi_path, const std::string& weather_path,
                        const std::string& event_path, const std::string& holiday_path) {
  SideData side;
  if (!poi_path.empty()) side.pois = load_pois(poi_path);
  if (!weather_path.empty()) side.weather = load_weather(weather_path);
  if (!event_path.empty()) side.events = load_events(event_path);
  if (!holiday_path.empty()) side.holidays = load_holidays(holiday_path);
  return side;
}

DatasetSplit split_dataset(const std::vector<Trajectory>& trajectories,
                           std::uint64_t seed) {
  const int n = static_cast<int>(trajectories.size());
  if (n < 10) fail(Errc::too_few, "need at least 10 trajectories to split");
  std::vector<std::string> ids;
  ids.reserve(trajectories.size());
  for (const auto& t : trajectories) ids.push_back(t.id);
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  const int n_train = static_cast<int>(std::llround(0.7 * n));
  const int n_val = static_cast<int>(std::llround(0.1 * n));
  DatasetSplit split;
  split.seed = seed;
  split.train.assign(ids.begin(), ids.begin() + n_train);
  split.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
  split.test.assign(ids.begin() + n_train + n_val, ids.end());
  return split;
}

std::vector<Trajectory> select_split(const std::vector<Trajectory>& trajectories,
                                     const std::vector<std::string>& ids) {
  std::set<std::string> wanted(ids.begin(), ids.end());
  std::vector<Trajectory> out;
  for (const auto& t : trajectories)
    if (wanted.count(t.id)) out.push_back(t);
  return out;
}

void SynthConfig::validate() const {
  grid.validate();
  if (road_spacing < 1) fail(Errc::bad_config, "road_spacing must be >= 1");
  if (cadence_s <= 0 || cadence_s != std::floor(cadence_s))
    fail(Errc::bad_config, "cadence must be a positive whole number of seconds");
  if (trajectories_per_domain < 1 || points_per_trajectory < 2)
    fail(Errc::bad_config, "need at least one trajectory of two points per domain");
  if (rush_amplitude < 0 || rush_amplitude >= 1)
    fail(Errc::bad_config, "rush amplitude must be in [0, 1)");
  if (noise_level < 0 || noise_level >= 1)
    fail(Errc::bad_config, "noise level must be in [0, 1)");
  for (const auto& [domain, mult] : domain_multipliers) {
    const double slow = base_speed * mult * (1.0 - rush_amplitude) * (1.0 - noise_level);
    const double fast = base_speed * mult * (1.0 + noise_level);
    if (slow < knowledge::kMinSpeed || fast > knowledge::kMaxSpeed)
      fail(Errc::bad_config, "speeds for domain '" + domain +
                                 "' leave the plausible window after modifiers");
  }
}

double rush_profile(double local_day_seconds) {
  // morning and evening peaks at 07:30 and 18:00, sigma 1.5 h
  const double h = local_day_seconds / 3600.0;
  const double sigma = 1.5;
  auto bump = [&](double center) {
    const double z = (h - center) / sigma;
    return std::exp(-0.5 * z * z);
  };
  return std::min(1.0, bump(7.5) + bump(18.0));
}

double SynthWorld::true_speed(const std::string& domain, double t) const {
  const auto it = cfg.domain_multipliers.find(domain);
  const double mult = it == cfg.domain_multipliers.end() ? 1.0 : it->second;
  const double day_s =
      std::fmod(t + static_cast<double>(cfg.tz_offset), static_cast<double>(86400));
  return cfg.base_speed * mult *
         (1.0 - cfg.rush_amplitude * rush_profile(day_s < 0 ? day_s + 86400 : day_s));
}

namespace {

// Step distances invert the haversine along one axis so that the sample speed
// derived from consecutive points reproduces the commanded speed exactly.
geo::GpsPoint step_north(const geo::GpsPoint& p, double meters) {
  return {p.lon, p.lat + meters / geo::kEarthRadiusM * 180.0 / std::numbers::pi, p.t};
}

geo::GpsPoint step_east(const geo::GpsPoint& p, double meters) {
  const double lat_rad = p.lat * std::numbers::pi / 180.0;
  const double half = std::sin(meters / (2.0 * geo::kEarthRadiusM));
  const double dlon = 2.0 * std::asin(half / std::cos(lat_rad));
  return {p.lon + dlon * 180.0 / std::numbers::pi, p.lat, p.t};
}

}  // namespace

SynthWorld synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthWorld world;
  world.cfg = cfg;

  const geo::GridSpec& g = cfg.grid;
  std::mt19937_64 rng(cfg.seed);

  // road lattice through cell centers
  std::vector<double> road_lats, road_lons;
  for (int r = cfg.road_spacing / 2; r < g.rows; r += cfg.road_spacing)
    road_lats.push_back(g.lat_min + (r + 0.5) * g.phi);
  for (int c = cfg.road_spacing / 2; c < g.cols; c += cfg.road_spacing)
    road_lons.push_back(g.lon_min + (c + 0.5) * g.phi);

  const double lat_lo = g.lat_min + 0.5 * g.phi;
  const double lat_hi = g.lat_min + (g.rows - 0.5) * g.phi;
  const double lon_lo = g.lon_min + 0.5 * g.phi;
  const double lon_hi = g.lon_min + (g.cols - 0.5) * g.phi;

  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (const auto& [domain, mult] : cfg.domain_multipliers) {
    std::vector<Trajectory> trajs;
    for (int k = 0; k < cfg.trajectories_per_domain; ++k) {
      Trajectory traj;
      traj.id = domain + "-" + std::to_string(k);
      traj.domain = domain;

      const std::size_t lat_pick = static_cast<std::size_t>(unit(rng) * road_lats.size());
      const std::size_t lon_pick = static_cast<std::size_t>(unit(rng) * road_lons.size());
      geo::GpsPoint pos;
      pos.lat = road_lats[std::min(lat_pick, road_lats.size() - 1)];
      pos.lon = road_lons[std::min(lon_pick, road_lons.size() - 1)];
      const std::int64_t day = static_cast<std::int64_t>(unit(rng) * cfg.days);
      const std::int64_t sod = static_cast<std::int64_t>(unit(rng) * 86400.0);
      pos.t = static_cast<double>(cfg.start_day_epoch + day * 86400 + sod);

      const double trip_eta = 2.0 * unit(rng) - 1.0;  // per-trip jitter in [-1, 1]
      int axis = unit(rng) < 0.5 ? 0 : 1;             // 0 = north/south, 1 = east/west
      double sign = unit(rng) < 0.5 ? 1.0 : -1.0;

      traj.points.push_back(pos);
      for (int i = 1; i < cfg.points_per_trajectory; ++i) {
        // rush hours carry most of the irreducible trip-to-trip spread
        const double day_s = std::fmod(pos.t + cfg.tz_offset, 86400.0);
        const double gate = 0.15 + 0.85 * rush_profile(day_s < 0 ? day_s + 86400 : day_s);
        double v = world.true_speed(domain, pos.t) +
                   cfg.noise_level * cfg.base_speed * mult * gate * trip_eta;
        v = std::clamp(v, knowledge::kMinSpeed * 2, knowledge::kMaxSpeed);
        const double dist = v * cfg.cadence_s;

        geo::GpsPoint next =
            axis == 0 ? step_north(pos, sign * dist) : step_east(pos, sign * dist);
        if (next.lat < lat_lo || next.lat > lat_hi || next.lon < lon_lo ||
            next.lon > lon_hi) {
          sign = -sign;
          next = axis == 0 ? step_north(pos, sign * dist) : step_east(pos, sign * dist);
        }
        next.t = pos.t + cfg.cadence_s;
        traj.points.push_back(next);
        pos = next;

        if (unit(rng) < 0.05) {  // turn at an emitted point
          axis = 1 - axis;
          sign = unit(rng) < 0.5 ? 1.0 : -1.0;
        }
      }
      trajs.push_back(std::move(traj));
    }
    world.trajectories[domain] = std::move(trajs);
  }

  // light POI / weather / event dressing on the same seed stream
  for (int i = 0; i < static_cast<int>(cfg.poi_count); ++i) {
    knowledge::PoiRecord poi;
    poi.lat = road_lats[static_cast<std::size_t>(unit(rng) * road_lats.size()) %
                        road_lats.size()];
    poi.lon = lon_lo + unit(rng) * (lon_hi - lon_lo);
    poi.category = "poi";
    world.side.pois.push_back(poi);
  }
  for (int d = 0; d < cfg.days; ++d) {
    if (unit(rng) < 0.5) continue;
    knowledge::WeatherRecord wx;
    wx.lat = lat_lo + unit(rng) * (lat_hi - lat_lo);
    wx.lon = lon_lo + unit(rng) * (lon_hi - lon_lo);
    wx.start_t = static_cast<double>(cfg.start_day_epoch + d * 86400 + 6 * 3600);
    wx.end_t = wx.start_t + 4 * 3600;
    wx.levels.rain = 0.25 + 0.5 * unit(rng);
    world.side.weather.push_back(wx);
  }
  for (int i = 0; i < cfg.event_count; ++i) {
    knowledge::EventRecord ev;
    ev.lat = lat_lo + unit(rng) * (lat_hi - lat_lo);
    ev.lon = lon_lo + unit(rng) * (lon_hi - lon_lo);
    const std::int64_t day = static_cast<std::int64_t>(unit(rng) * cfg.days);
    ev.start_t = static_cast<double>(cfg.start_day_epoch + day * 86400) + 36000;
    ev.end_t = ev.start_t + 2 * 3600;
    ev.kind = "event";
    world.side.events.push_back(ev);
  }
  return world;
}

void write_world(const SynthWorld& world, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const auto& [domain, trajs] : world.trajectories)
    save_trajectories_jsonl(trajs, (fs::path(dir) / (domain + ".jsonl")).string());

  {
    std::ofstream out(fs::path(dir) / "poi.csv", std::ios::trunc);
    out << "lat,lon,category\n";
    char buf[128];
    for (const auto& p : world.side.pois) {
      std::snprintf(buf, sizeof(buf), "%.9f,%.9f,%s\n", p.lat, p.lon, p.category.c_str());
      out << buf;
    }
  }
  {
    std::ofstream out(fs::path(dir) / "weather.csv", std::ios::trunc);
    out << "lat,lon,start_t,end_t,rain,snow,hail\n";
    char buf[192];
    for (const auto& w : world.side.weather) {
      std::snprintf(buf, sizeof(buf), "%.9f,%.9f,%.0f,%.0f,%.4f,%.4f,%.4f\n", w.lat, w.lon,
                    w.start_t, w.end_t, w.levels.rain, w.levels.snow, w.levels.hail);
      out << buf;
    }
  }
  {
    std::ofstream out(fs::path(dir) / "events.csv", std::ios::trunc);
    out << "lat,lon,start_t,end_t,kind\n";
    char buf[192];
    for (const auto& e : world.side.events) {
      std::snprintf(buf, sizeof(buf), "%.9f,%.9f,%.0f,%.0f,%s\n", e.lat, e.lon, e.start_t,
                    e.end_t, e.kind.c_str());
      out << buf;
    }
  }
  {
    std::ofstream out(fs::path(dir) / "holidays.txt", std::ios::trunc);
    // none by default; file exists so the full ingestion path can run
  }
  {
    const auto& cfg = world.cfg;
    nlohmann::json js{
        {"grid",
         {{"lat_min", cfg.grid.lat_min},
          {"lon_min", cfg.grid.lon_min},
          {"phi", cfg.grid.phi},
          {"rows", cfg.grid.rows},
          {"cols", cfg.grid.cols},
          {"intervals", cfg.grid.intervals}}},
        {"tz_offset", cfg.tz_offset},
        {"base_speed", cfg.base_speed},
        {"domain_multipliers", cfg.domain_multipliers},
        {"rush_amplitude", cfg.rush_amplitude},
        {"noise_level", cfg.noise_level},
        {"seed", cfg.seed}};
    std::ofstream out(fs::path(dir) / "world.json", std::ios::trunc);
    out << js.dump(2) << '\n';
  }
}

}  // namespace grideta::data
