#include "grideta/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace grideta::knowledge {

int SpeedProfile::observed() const {
  int n = 0;
  for (const auto& slot : dir)
    if (slot) ++n;
  return n;
}

double SpeedProfile::mean_speed() const {
  double sum = 0.0;
  int n = 0;
  for (const auto& slot : dir) {
    if (slot) {
      sum += slot->mean_speed;
      ++n;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

double SpeedProfile::max_speed() const {
  double best = 0.0;
  for (const auto& slot : dir)
    if (slot) best = std::max(best, slot->mean_speed);
  return best;
}

std::uint64_t GpsKnowledgeGrid::pack(const GpsKey& key) {
  // h:24 | w:24 | interval:13 | dir:3
  return (static_cast<std::uint64_t>(key.cell.h) << 40) |
         (static_cast<std::uint64_t>(key.cell.w) << 16) |
         (static_cast<std::uint64_t>(key.interval) << 3) |
         static_cast<std::uint64_t>(key.dir);
}

GpsKey GpsKnowledgeGrid::unpack(std::uint64_t packed) {
  GpsKey key;
  key.cell.h = static_cast<int>(packed >> 40);
  key.cell.w = static_cast<int>((packed >> 16) & 0xffffff);
  key.interval = static_cast<int>((packed >> 3) & 0x1fff);
  key.dir = static_cast<geo::CompassDirection>(packed & 0x7);
  return key;
}

void GpsKnowledgeGrid::insert(const GpsKey& key, const ProfileSlot& slot) {
  entries_[pack(key)] = slot;
  cell_set_.insert(geo::cell_key(key.cell));
}

const ProfileSlot* GpsKnowledgeGrid::find(const GpsKey& key) const {
  auto it = entries_.find(pack(key));
  return it == entries_.end() ? nullptr : &it->second;
}

SpeedProfile GpsKnowledgeGrid::profile(geo::CellIndex cell, int interval) const {
  SpeedProfile p;
  for (int d = 0; d < geo::kDirections; ++d) {
    const ProfileSlot* slot =
        find(GpsKey{cell, interval, static_cast<geo::CompassDirection>(d)});
    if (slot) p.dir[d] = *slot;
  }
  return p;
}

bool GpsKnowledgeGrid::has_any(geo::CellIndex cell, int interval) const {
  for (int d = 0; d < geo::kDirections; ++d)
    if (find(GpsKey{cell, interval, static_cast<geo::CompassDirection>(d)})) return true;
  return false;
}

std::vector<GpsKey> GpsKnowledgeGrid::sorted_keys() const {
  std::vector<std::uint64_t> packed;
  packed.reserve(entries_.size());
  for (const auto& [k, v] : entries_) packed.push_back(k);
  std::sort(packed.begin(), packed.end());
  std::vector<GpsKey> keys;
  keys.reserve(packed.size());
  for (auto k : packed) keys.push_back(unpack(k));
  return keys;
}

std::vector<geo::CellIndex> GpsKnowledgeGrid::cells() const {
  std::vector<geo::CellIndex> out;
  out.reserve(cell_set_.size());
  for (auto k : cell_set_) out.push_back(geo::cell_from_key(k));
  return out;
}

void WeatherGrid::add(geo::CellIndex cell, std::int64_t abs_interval,
                      const WeatherLevels& levels) {
  WeatherLevels& e = entries_[{geo::cell_key(cell), abs_interval}];
  e.rain = std::max(e.rain, levels.rain);
  e.snow = std::max(e.snow, levels.snow);
  e.hail = std::max(e.hail, levels.hail);
  if (max_iv_ < min_iv_) {
    min_iv_ = max_iv_ = abs_interval;
  } else {
    min_iv_ = std::min(min_iv_, abs_interval);
    max_iv_ = std::max(max_iv_, abs_interval);
  }
}

WeatherLevels WeatherGrid::at(geo::CellIndex cell, std::int64_t abs_interval) const {
  auto it = entries_.find({geo::cell_key(cell), abs_interval});
  return it == entries_.end() ? WeatherLevels{} : it->second;
}

bool WeatherGrid::covers(std::int64_t abs_interval) const {
  return max_iv_ >= min_iv_ && abs_interval >= min_iv_ && abs_interval <= max_iv_;
}

void EventGrid::add(geo::CellIndex cell, std::int64_t abs_interval, int count) {
  entries_[{geo::cell_key(cell), abs_interval}] += count;
  if (max_iv_ < min_iv_) {
    min_iv_ = max_iv_ = abs_interval;
  } else {
    min_iv_ = std::min(min_iv_, abs_interval);
    max_iv_ = std::max(max_iv_, abs_interval);
  }
}

int EventGrid::count(geo::CellIndex cell, std::int64_t abs_interval) const {
  auto it = entries_.find({geo::cell_key(cell), abs_interval});
  return it == entries_.end() ? 0 : it->second;
}

bool EventGrid::covers(std::int64_t abs_interval) const {
  return max_iv_ >= min_iv_ && abs_interval >= min_iv_ && abs_interval <= max_iv_;
}

DateFeatures KnowledgeGrids::date_features(double t) const {
  const std::int64_t day = geo::local_day_of(t, tz_offset);
  // 1970-01-01 was a Thursday; dow 0 = Sunday
  const int dow = static_cast<int>(((day + 4) % 7 + 7) % 7);
  DateFeatures f;
  f.weekend = (dow == 0 || dow == 6) ? 1 : 0;
  f.holiday = holidays.count(day) > 0 ? 1 : 0;
  return f;
}

std::vector<SpeedSample> extract_speed_samples(const std::vector<geo::GpsPoint>& points,
                                               const geo::GridSpec& g,
                                               std::int64_t tz_offset) {
  if (points.size() < 2) fail(Errc::empty_trajectory, "need at least 2 usable points");
  std::vector<SpeedSample> samples;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const geo::GpsPoint& p1 = points[i];
    const geo::GpsPoint& p2 = points[i + 1];
    const double dt = p2.t - p1.t;
    if (dt <= 0.0) continue;

    const double speed = geo::haversine_distance(p1, p2) / dt;
    if (speed < kMinSpeed || speed > kMaxSpeed) continue;

    auto pieces = geo::subdivide_segment(p1, p2, g);
    double total_chord = 0.0;
    for (const auto& s : pieces) total_chord += geo::haversine_distance(s.a, s.b);
    if (total_chord <= 0.0) continue;

    double t_entry = p1.t;
    for (const auto& s : pieces) {
      const double chord = geo::haversine_distance(s.a, s.b);
      const double share = dt * chord / total_chord;
      SpeedSample sample;
      sample.cell = s.cell;
      sample.interval = geo::time_interval_of(t_entry, g, tz_offset);
      sample.dir = s.bearing_dir;
      sample.speed = speed;
      sample.traversal_time = share;
      sample.chord_len = chord;
      samples.push_back(sample);
      t_entry += share;
    }
  }
  return samples;
}

std::vector<CellVisit> extract_cell_visits(const std::vector<geo::GpsPoint>& points,
                                           const geo::GridSpec& g) {
  if (points.size() < 2) fail(Errc::empty_trajectory, "need at least 2 usable points");
  std::vector<CellVisit> visits;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const geo::GpsPoint& p1 = points[i];
    const geo::GpsPoint& p2 = points[i + 1];
    const double dt = p2.t - p1.t;
    if (dt <= 0.0) continue;
    auto pieces = geo::subdivide_segment(p1, p2, g);
    double total_chord = 0.0;
    for (const auto& s : pieces) total_chord += geo::haversine_distance(s.a, s.b);
    double t_entry = p1.t;
    for (const auto& s : pieces) {
      const double chord = geo::haversine_distance(s.a, s.b);
      const double share = total_chord > 0.0 ? dt * chord / total_chord : 0.0;
      if (!visits.empty() && visits.back().cell == s.cell) {
        visits.back().chord_len += chord;
        visits.back().seconds += share;
      } else {
        visits.push_back(CellVisit{s.cell, t_entry, chord, share});
      }
      t_entry += share;
    }
  }
  std::vector<CellVisit> usable;
  for (const auto& v : visits) {
    if (v.seconds <= 0.0 || v.chord_len <= 0.0) continue;
    const double speed = v.chord_len / v.seconds;
    if (speed < kMinSpeed || speed > kMaxSpeed) continue;
    usable.push_back(v);
  }
  return usable;
}

GpsKnowledgeGrid build_gps_knowledge(const std::vector<SpeedSample>& samples,
                                     const geo::GridSpec& g) {
  struct Acc {
    double sum = 0.0;
    int count = 0;
  };
  std::map<GpsKey, Acc> acc;
  for (const auto& s : samples) {
    Acc& a = acc[GpsKey{s.cell, s.interval, s.dir}];
    a.sum += s.speed;
    a.count += 1;
  }
  GpsKnowledgeGrid grid(g.intervals);
  for (const auto& [key, a] : acc)
    grid.insert(key, ProfileSlot{a.sum / a.count, a.count, false});
  return grid;
}

AveragedGrid build_averaged_grid(const GpsKnowledgeGrid& gps, int t_a) {
  const int T = gps.intervals();
  if (t_a < 2 || t_a > T / 2)
    fail(Errc::bad_window, "window must satisfy 2 <= T_a <= T/2");

  AveragedGrid out;
  out.grid = GpsKnowledgeGrid(T);
  out.window = t_a;
  for (const geo::CellIndex cell : gps.cells()) {
    // dense per-cell view keyed by (interval, dir)
    std::vector<const ProfileSlot*> slots(
        static_cast<std::size_t>(T) * geo::kDirections, nullptr);
    for (int iv = 0; iv < T; ++iv)
      for (int d = 0; d < geo::kDirections; ++d)
        slots[static_cast<std::size_t>(iv) * geo::kDirections + d] =
            gps.find(GpsKey{cell, iv, static_cast<geo::CompassDirection>(d)});

    for (int iv = 0; iv < T; ++iv) {
      for (int d = 0; d < geo::kDirections; ++d) {
        double weighted = 0.0;
        int count = 0;
        for (int off = -t_a; off <= t_a; ++off) {
          if (off == 0) continue;
          const int src = ((iv + off) % T + T) % T;
          const ProfileSlot* slot =
              slots[static_cast<std::size_t>(src) * geo::kDirections + d];
          if (slot) {
            weighted += slot->mean_speed * slot->count;
            count += slot->count;
          }
        }
        if (count > 0)
          out.grid.insert(GpsKey{cell, iv, static_cast<geo::CompassDirection>(d)},
                          ProfileSlot{weighted / count, count, false});
      }
    }
  }
  return out;
}

namespace {

// Writes a profile as [8 speeds / 60, 8 presence flags] into x at `base`.
void write_profile_block(const SpeedProfile& p, Eigen::VectorXd& x, int base,
                         int masked_dir = -1) {
  for (int d = 0; d < geo::kDirections; ++d) {
    if (p.dir[d] && d != masked_dir) {
      x(base + d) = p.dir[d]->mean_speed / kMaxSpeed;
      x(base + geo::kDirections + d) = 1.0;
    }
  }
}

Eigen::VectorXd interpolator_input(const SpeedProfile& observed,
                                   const std::vector<SpeedProfile>& star_profiles,
                                   int width, int masked_dir) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(width);
  write_profile_block(observed, x, 0, masked_dir);
  for (std::size_t s = 0; s < star_profiles.size(); ++s)
    write_profile_block(star_profiles[s], x,
                        2 * geo::kDirections * static_cast<int>(s + 1));
  return x;
}

}  // namespace

InterpolatorModel train_interpolator(const GpsKnowledgeGrid& gps,
                                     const std::vector<AveragedGrid>& star,
                                     const nn::TrainConfig& cfg) {
  if (star.empty()) fail(Errc::insufficient_data, "need at least one averaged grid");

  InterpolatorModel mi;
  for (const auto& a : star) mi.windows.push_back(a.window);
  const int width = mi.input_width();

  // leave-direction-out: one example per observed direction, with that
  // direction masked out of the observed block and supervised in the output
  std::vector<Eigen::VectorXd> inputs;
  std::vector<int> target_dir;
  std::vector<double> target_speed;

  std::set<std::pair<std::uint64_t, int>> seen;
  for (const GpsKey& key : gps.sorted_keys()) {
    if (!seen.insert({geo::cell_key(key.cell), key.interval}).second) continue;
    const SpeedProfile observed = gps.profile(key.cell, key.interval);
    std::vector<SpeedProfile> star_profiles;
    star_profiles.reserve(star.size());
    for (const auto& a : star)
      star_profiles.push_back(a.grid.profile(key.cell, key.interval));
    for (int d = 0; d < geo::kDirections; ++d) {
      if (!observed.dir[d]) continue;
      inputs.push_back(interpolator_input(observed, star_profiles, width, d));
      target_dir.push_back(d);
      target_speed.push_back(observed.dir[d]->mean_speed / kMaxSpeed);
    }
  }
  if (inputs.empty()) fail(Errc::insufficient_data, "no populated profile entries");

  mi.net = nn::make_net({width, geo::kDirections}, {nn::Activation::identity}, 0.0,
                        cfg.seed);

  const int n = static_cast<int>(inputs.size());
  Eigen::MatrixXd x(width, n);
  for (int j = 0; j < n; ++j) x.col(j) = inputs[j];

  // masked squared error: only the left-out direction is supervised
  std::mt19937_64 rng(cfg.seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  nn::AdamState adam = nn::make_adam(mi.net, cfg.learning_rate);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int count = std::min(cfg.batch_size, n - start);
      Eigen::MatrixXd xb(width, count);
      Eigen::MatrixXd target = Eigen::MatrixXd::Zero(geo::kDirections, count);
      Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(geo::kDirections, count);
      for (int j = 0; j < count; ++j) {
        const int row = order[start + j];
        xb.col(j) = x.col(row);
        target(target_dir[row], j) = target_speed[row];
        mask(target_dir[row], j) = 1.0;
      }
      nn::ForwardCache cache;
      Eigen::MatrixXd out = nn::forward(mi.net, xb, true, rng, &cache);
      Eigen::MatrixXd diff = (out - target).cwiseProduct(mask);
      nn::Gradients grads = nn::backward(mi.net, cache, 2.0 * diff / count);
      nn::adam_step(mi.net, grads, adam);
    }
  }
  return mi;
}

GpsKnowledgeGrid fill_missing(const GpsKnowledgeGrid& gps,
                              const std::vector<AveragedGrid>& star,
                              const InterpolatorModel& mi) {
  if (mi.windows.size() != star.size())
    fail(Errc::shape_mismatch, "star grid count does not match the trained model");
  for (std::size_t i = 0; i < star.size(); ++i)
    if (star[i].window != mi.windows[i])
      fail(Errc::shape_mismatch, "star grid windows do not match the trained model");
  if (mi.net.input_width() != mi.input_width())
    fail(Errc::shape_mismatch, "interpolator net width mismatch");

  GpsKnowledgeGrid out(gps.intervals());
  for (const GpsKey& key : gps.sorted_keys()) out.insert(key, *gps.find(key));

  // candidate cells: anything observed in the base grid or any star grid
  std::set<std::uint64_t> cell_keys;
  for (const auto& c : gps.cells()) cell_keys.insert(geo::cell_key(c));
  for (const auto& a : star)
    for (const auto& c : a.grid.cells()) cell_keys.insert(geo::cell_key(c));

  const int T = gps.intervals();
  for (const auto ck : cell_keys) {
    const geo::CellIndex cell = geo::cell_from_key(ck);
    for (int iv = 0; iv < T; ++iv) {
      std::vector<SpeedProfile> star_profiles;
      star_profiles.reserve(star.size());
      bool star_has_data = false;
      for (const auto& a : star) {
        star_profiles.push_back(a.grid.profile(cell, iv));
        if (star_profiles.back().observed() > 0) star_has_data = true;
      }
      if (!star_has_data) continue;

      const SpeedProfile observed = gps.profile(cell, iv);
      Eigen::VectorXd pred;
      for (int d = 0; d < geo::kDirections; ++d) {
        const GpsKey key{cell, iv, static_cast<geo::CompassDirection>(d)};
        if (gps.find(key)) continue;  // observed entries stay authoritative
        bool star_dir = false;
        for (const auto& p : star_profiles)
          if (p.dir[d]) star_dir = true;
        if (!star_dir) continue;  // no star data anywhere for this key
        if (pred.size() == 0) {
          Eigen::VectorXd x =
              interpolator_input(observed, star_profiles, mi.input_width(), -1);
          pred = nn::forward(mi.net, x);
        }
        const double speed = std::clamp(pred(d) * kMaxSpeed, kMinSpeed, kMaxSpeed);
        out.insert(key, ProfileSlot{speed, 0, true});
      }
    }
  }
  return out;
}

StaticGrid build_static_grid(const std::vector<PoiRecord>& pois, const geo::GridSpec& g) {
  StaticGrid out;
  out.poi_density = Eigen::MatrixXd::Zero(g.rows, g.cols);
  for (const auto& p : pois) {
    const geo::GpsPoint point{p.lon, p.lat, 0.0};
    if (!g.contains(point)) {
      ++out.skipped;
      continue;
    }
    const geo::CellIndex c = geo::cell_of(point, g);
    out.poi_density(c.h - 1, c.w - 1) += 1.0;
  }
  const double peak = out.poi_density.maxCoeff();
  if (peak > 0.0) out.poi_density /= peak;
  return out;
}

namespace {

template <typename Grid, typename Write>
void spread_record(Grid& grid, const geo::GridSpec& g, std::int64_t tz, double lat,
                   double lon, double start_t, double end_t, const Write& write) {
  if (end_t < start_t) fail(Errc::bad_record, "record end precedes start");
  const geo::GpsPoint point{lon, lat, 0.0};
  if (!g.contains(point)) return;
  const geo::CellIndex cell = geo::cell_of(point, g);
  const std::int64_t first = geo::absolute_interval_of(start_t, g, tz);
  const std::int64_t last = geo::absolute_interval_of(end_t, g, tz);
  for (std::int64_t iv = first; iv <= last; ++iv) write(grid, cell, iv);
}

}  // namespace

WeatherGrid build_weather_grid(const std::vector<WeatherRecord>& records,
                               const geo::GridSpec& g, std::int64_t tz_offset) {
  WeatherGrid grid;
  for (const auto& r : records)
    spread_record(grid, g, tz_offset, r.lat, r.lon, r.start_t, r.end_t,
                  [&](WeatherGrid& w, geo::CellIndex c, std::int64_t iv) {
                    w.add(c, iv, r.levels);
                  });
  return grid;
}

EventGrid build_event_grid(const std::vector<EventRecord>& records, const geo::GridSpec& g,
                           std::int64_t tz_offset) {
  EventGrid grid;
  for (const auto& r : records)
    spread_record(grid, g, tz_offset, r.lat, r.lon, r.start_t, r.end_t,
                  [](EventGrid& e, geo::CellIndex c, std::int64_t iv) { e.add(c, iv); });
  return grid;
}

Eigen::VectorXd assemble_cell_vector(geo::CellIndex cell, double t,
                                     const KnowledgeGrids& grids, DateFeatures date) {
  const geo::GridSpec& g = grids.grid;
  if (cell.h < 1 || cell.h > g.rows || cell.w < 1 || cell.w > g.cols)
    fail(Errc::out_of_bounds, "cell outside grid");

  Eigen::VectorXd v = Eigen::VectorXd::Zero(kCellVectorWidth);
  v(0) = date.weekend;
  v(1) = date.holiday;
  if (grids.poi.poi_density.size() > 0)
    v(2) = grids.poi.poi_density(cell.h - 1, cell.w - 1);

  const std::int64_t abs_iv = geo::absolute_interval_of(t, g, grids.tz_offset);
  const WeatherLevels wx = grids.weather.at(cell, abs_iv);
  v(3) = std::clamp(wx.rain, 0.0, 1.0);
  v(4) = std::clamp(wx.snow, 0.0, 1.0);
  v(5) = std::clamp(wx.hail, 0.0, 1.0);
  v(6) = std::min(grids.events.count(cell, abs_iv), kEventCap) /
         static_cast<double>(kEventCap);

  const int iv = geo::time_interval_of(t, g, grids.tz_offset);
  const SpeedProfile profile = grids.gps.profile(cell, iv);
  for (int d = 0; d < geo::kDirections; ++d) {
    if (profile.dir[d]) {
      v(7 + 2 * d) = std::clamp(profile.dir[d]->mean_speed / kMaxSpeed, 0.0, 1.0);
      v(7 + 2 * d + 1) = 1.0;
    }
  }

  const double angle = 2.0 * std::numbers::pi * iv / g.intervals;
  v(kCellVectorWidth - 2) = 0.5 * (std::sin(angle) + 1.0);
  v(kCellVectorWidth - 1) = 0.5 * (std::cos(angle) + 1.0);
  return v;
}

}  // namespace grideta::knowledge
