// Copyright 2026 The gridplan Authors
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

#include "gridplan/synthetic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

namespace gridplan
{

std::string to_string(Layout l)
{
  switch (l) {
    case Layout::kCorridor: return "corridor";
    case Layout::kCurve: return "curve";
    case Layout::kTJunction: return "t_junction";
    case Layout::kCrossroads: return "crossroads";
  }
  return "unknown";
}

Layout parse_layout(const std::string & name)
{
  for (Layout l : {Layout::kCorridor, Layout::kCurve, Layout::kTJunction, Layout::kCrossroads}) {
    if (to_string(l) == name) return l;
  }
  throw std::invalid_argument("unknown layout '" + name + "'");
}

namespace
{

using Rng = std::mt19937_64;

const Vec2 kDirs[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};

int uniform_int(Rng & rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform(Rng & rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

SyntheticScene make_layout(int scene_id, Layout layout, const SyntheticConfig & c, Rng & rng)
{
  SyntheticScene s;
  s.scene_id = scene_id;
  s.layout = layout;
  const int g = c.cells;
  const int mid = g / 2;
  s.junction_x = uniform_int(rng, mid - 3, mid + 3);
  s.junction_y = uniform_int(rng, mid - 3, mid + 3);
  switch (layout) {
    case Layout::kCorridor: {
      const int a = uniform_int(rng, 0, 1);
      s.arms = {a, a + 2};
      break;
    }
    case Layout::kCurve: {
      const int a = uniform_int(rng, 0, 3);
      s.arms = {a, (a + 1) % 4};
      break;
    }
    case Layout::kTJunction: {
      const int missing = uniform_int(rng, 0, 3);
      for (int a = 0; a < 4; ++a) {
        if (a != missing) s.arms.push_back(a);
      }
      break;
    }
    case Layout::kCrossroads: s.arms = {0, 1, 2, 3}; break;
  }
  std::sort(s.arms.begin(), s.arms.end());

  s.cells.assign(static_cast<std::size_t>(g) * g, kTerrain);
  const int half = c.road_width / 2;
  auto mark = [&](int x, int y) {
    if (x >= 0 && y >= 0 && x < g && y < g) s.cells[static_cast<std::size_t>(y) * g + x] = kRoad;
  };
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) mark(s.junction_x + dx, s.junction_y + dy);
  }
  for (int a : s.arms) {
    const int ux = static_cast<int>(kDirs[a].x), uy = static_cast<int>(kDirs[a].y);
    for (int k = 0; k < g; ++k) {
      for (int w = -half; w <= half; ++w) {
        mark(s.junction_x + ux * k + (uy != 0 ? w : 0), s.junction_y + uy * k + (ux != 0 ? w : 0));
      }
    }
  }

  // Obstacles keep at least two free cells to every road cell.
  auto clear_of_road = [&](int x, int y) {
    for (int dy = -2; dy <= 2; ++dy) {
      for (int dx = -2; dx <= 2; ++dx) {
        const int xx = x + dx, yy = y + dy;
        if (xx >= 0 && yy >= 0 && xx < g && yy < g && s.cells[static_cast<std::size_t>(yy) * g + xx] == kRoad) return false;
      }
    }
    return true;
  };
  const int clusters = uniform_int(rng, 4, 8);
  for (int k = 0; k < clusters; ++k) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const int x0 = uniform_int(rng, 0, g - 1), y0 = uniform_int(rng, 0, g - 1);
      if (!clear_of_road(x0, y0)) continue;
      const int w = uniform_int(rng, 1, 3), h = uniform_int(rng, 1, 3);
      for (int y = y0; y < std::min(g, y0 + h); ++y) {
        for (int x = x0; x < std::min(g, x0 + w); ++x) {
          if (clear_of_road(x, y)) s.cells[static_cast<std::size_t>(y) * g + x] = kObstacle;
        }
      }
      break;
    }
  }
  return s;
}

SceneImage render(const SyntheticScene & s, const SyntheticConfig & c)
{
  const int size = static_cast<int>(std::lround(c.world_size()));
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    const int cy = std::min(c.cells - 1, static_cast<int>(y / c.cell_size));
    for (int x = 0; x < size; ++x) {
      const int cx = std::min(c.cells - 1, static_cast<int>(x / c.cell_size));
      labels[static_cast<std::size_t>(y) * size + x] = s.cells[static_cast<std::size_t>(cy) * c.cells + cx];
    }
  }
  return SceneImage::from_labels(s.scene_id, size, size, std::move(labels));
}

/// Dense centerline from the end of the entry arm through the junction to the end of the exit arm.
std::vector<Vec2> centerline(const SyntheticScene & s, int entry, int exit, const SyntheticConfig & c)
{
  const double world = c.world_size();
  const Vec2 j{(s.junction_x + 0.5) * c.cell_size, (s.junction_y + 0.5) * c.cell_size};
  auto reach = [&](int a) {
    switch (a) {
      case 0: return world - j.x;
      case 1: return world - j.y;
      case 2: return j.x;
      default: return j.y;
    }
  };
  const double r = c.cell_size * (c.road_width / 2 + 0.5);
  const Vec2 start = j + kDirs[entry] * (reach(entry) - 1e-6);
  const Vec2 a = j + kDirs[entry] * r;
  const Vec2 b = j + kDirs[exit] * r;
  const Vec2 end = j + kDirs[exit] * (reach(exit) - 1e-6);
  std::vector<Vec2> pts;
  auto line = [&](Vec2 p, Vec2 q) {
    const int n = std::max(1, static_cast<int>(std::ceil(norm(q - p))));
    for (int i = 0; i < n; ++i) pts.push_back(p + (q - p) * (static_cast<double>(i) / n));
  };
  line(start, a);
  for (int i = 0; i < 48; ++i) {
    const double t = i / 48.0;
    pts.push_back(a * ((1 - t) * (1 - t)) + j * (2 * t * (1 - t)) + b * (t * t));
  }
  line(b, end);
  pts.push_back(end);
  return pts;
}

std::vector<Vec2> walk(const std::vector<Vec2> & line, double speed, double lateral, double jitter, double world, Rng & rng)
{
  std::vector<double> arc(line.size(), 0.0);
  for (std::size_t i = 1; i < line.size(); ++i) arc[i] = arc[i - 1] + norm(line[i] - line[i - 1]);
  std::normal_distribution<double> noise(0.0, jitter);
  std::vector<Vec2> out;
  std::size_t seg = 0;
  for (double sarc = uniform(rng, 0.0, speed); sarc < arc.back(); sarc += speed) {
    while (seg + 2 < line.size() && arc[seg + 1] < sarc) ++seg;
    const Vec2 p = line[seg], q = line[seg + 1];
    const double len = std::max(1e-12, arc[seg + 1] - arc[seg]);
    const Vec2 t = (q - p) * (1.0 / len);
    const Vec2 c = p + t * (sarc - arc[seg]);
    const Vec2 pos = c + Vec2{-t.y, t.x} * lateral + Vec2{noise(rng), noise(rng)};
    if (pos.x < 0.0 || pos.y < 0.0 || pos.x >= world || pos.y >= world) continue;
    out.push_back(pos);
  }
  return out;
}

struct SceneOutput
{
  SyntheticScene layout;
  SceneImage image;
  std::vector<DatasetRecord> records;
  std::vector<SyntheticAgent> agents;
};

SceneOutput generate_scene(int index, const SyntheticConfig & c)
{
  std::seed_seq seq{static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32),
                    static_cast<std::uint32_t>(index)};
  Rng rng(seq);
  const std::vector<Layout> all{Layout::kCorridor, Layout::kCurve, Layout::kTJunction, Layout::kCrossroads};
  const std::vector<Layout> & pool = c.layouts.empty() ? all : c.layouts;
  SceneOutput out;
  out.layout = make_layout(index, pool[static_cast<std::size_t>(index) % pool.size()], c, rng);
  out.image = render(out.layout, c);
  const auto & arms = out.layout.arms;
  for (int agent = 0; agent < c.n_agents; ++agent) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == 100) throw std::logic_error("generate_synthetic: could not route a walker around obstacles");
      const int entry = arms[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(arms.size()) - 1))];
      std::vector<int> exits;
      for (int a : arms) {
        if (a != entry) exits.push_back(a);
      }
      const int exit = exits[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(exits.size()) - 1))];
      const double speed = uniform(rng, c.speed_min, c.speed_max);
      const double lateral = uniform(rng, -c.lateral, c.lateral);
      const long start = uniform_int(rng, 0, c.max_start_frame);
      const auto pts = walk(centerline(out.layout, entry, exit, c), speed, lateral, c.jitter, c.world_size(), rng);
      const bool hits = std::any_of(pts.begin(), pts.end(), [&](Vec2 p) { return out.image.label_at(p) == kObstacle; });
      if (hits || pts.empty()) continue;
      for (std::size_t k = 0; k < pts.size(); ++k) {
        out.records.push_back({index, agent, start + static_cast<long>(k), pts[k].x, pts[k].y});
      }
      out.agents.push_back({index, agent, entry, exit});
      break;
    }
  }
  return out;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticConfig & config)
{
  if (config.n_scenes < 1 || config.n_agents < 1) throw std::invalid_argument("generate_synthetic: need n_scenes, n_agents >= 1");
  if (config.cells < 9 || config.road_width < 1 || config.road_width % 2 == 0 || !(config.cell_size > 0.0)) {
    throw std::invalid_argument("generate_synthetic: invalid grid or road width");
  }
  if (!(config.speed_min > 0.0) || config.speed_max < config.speed_min) {
    throw std::invalid_argument("generate_synthetic: invalid speed range");
  }
  std::vector<SceneOutput> scenes(static_cast<std::size_t>(config.n_scenes));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (int i; (i = next.fetch_add(1)) < config.n_scenes;) {
      try {
        scenes[static_cast<std::size_t>(i)] = generate_scene(i, config);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1, std::min(8, config.n_scenes));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto & t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  SyntheticCorpus corpus;
  corpus.config = config;
  for (SceneOutput & s : scenes) {
    corpus.records.insert(corpus.records.end(), s.records.begin(), s.records.end());
    corpus.agents.insert(corpus.agents.end(), s.agents.begin(), s.agents.end());
    corpus.scenes.emplace(s.layout.scene_id, std::move(s.image));
    corpus.layouts.push_back(std::move(s.layout));
  }
  return corpus;
}

void write_corpus(const std::filesystem::path & dir, const SyntheticCorpus & corpus)
{
  write_records(dir / "trajectories.csv", corpus.records);
  for (const auto & [id, scene] : corpus.scenes) {
    write_label_pgm(dir / "scenes" / ("scene_" + std::to_string(id) + ".pgm"), scene);
  }
}

}  // namespace gridplan
