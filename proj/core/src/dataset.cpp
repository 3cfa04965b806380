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

#include "gridplan/dataset.hpp"

#include "gridplan/log.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace gridplan
{

namespace fs = std::filesystem;

SemanticClass SceneImage::label_at(Vec2 p) const
{
  if (!has_labels()) throw std::logic_error("SceneImage: scene " + std::to_string(scene_id) + " has no labels");
  const double fx = std::floor(p.x), fy = std::floor(p.y);
  if (!(fx >= 0.0 && fy >= 0.0 && fx < width && fy < height)) return kTerrain;
  return static_cast<SemanticClass>(labels[static_cast<std::size_t>(fy) * width + static_cast<std::size_t>(fx)]);
}

SceneRaster SceneImage::crop(Vec2 center, double extent, int size) const
{
  if (size <= 0 || !(extent > 0.0)) throw std::invalid_argument("SceneImage::crop: size and extent must be positive");
  SceneRaster r;
  r.size = size;
  r.channels = channels;
  r.extent = extent;
  const std::size_t plane = static_cast<std::size_t>(size) * size;
  const std::size_t scene_plane = static_cast<std::size_t>(width) * height;
  r.pixels.assign(static_cast<std::size_t>(channels) * plane, 0);
  if (has_labels()) r.road.assign(plane, 0);
  const double px = extent / size;
  for (int i = 0; i < size; ++i) {
    const double wy = std::floor(center.y + (i + 0.5) * px - 0.5 * extent);
    for (int j = 0; j < size; ++j) {
      const double wx = std::floor(center.x + (j + 0.5) * px - 0.5 * extent);
      const std::size_t dst = static_cast<std::size_t>(i) * size + j;
      const bool inside = wx >= 0.0 && wy >= 0.0 && wx < width && wy < height;
      if (!inside) {
        if (has_labels()) r.pixels[static_cast<std::size_t>(kTerrain) * plane + dst] = 255;
        continue;
      }
      const std::size_t src = static_cast<std::size_t>(wy) * width + static_cast<std::size_t>(wx);
      for (int c = 0; c < channels; ++c) r.pixels[c * plane + dst] = pixels[c * scene_plane + src];
      if (has_labels()) r.road[dst] = labels[src] == kRoad ? 1 : 0;
    }
  }
  return r;
}

SceneImage SceneImage::from_labels(int scene_id, int width, int height, std::vector<std::uint8_t> labels)
{
  if (labels.size() != static_cast<std::size_t>(width) * height) {
    throw std::invalid_argument("SceneImage::from_labels: label buffer does not match the scene size");
  }
  SceneImage s;
  s.scene_id = scene_id;
  s.width = width;
  s.height = height;
  s.channels = 3;
  const std::size_t plane = labels.size();
  s.pixels.assign(3 * plane, 0);
  for (std::size_t i = 0; i < plane; ++i) {
    if (labels[i] > kObstacle) throw std::invalid_argument("SceneImage::from_labels: unknown label");
    s.pixels[labels[i] * plane + i] = 255;
  }
  s.labels = std::move(labels);
  return s;
}

namespace
{

std::string next_token(std::istream & in)
{
  std::string tok;
  while (in) {
    const int c = in.peek();
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  in >> tok;
  return tok;
}

struct PnmHeader
{
  int width = 0, height = 0, maxval = 0;
};

PnmHeader read_pnm_header(std::istream & in, const std::string & magic, const fs::path & path)
{
  if (next_token(in) != magic) throw DataError(path.string() + ": expected a " + magic + " image");
  PnmHeader h;
  try {
    h.width = std::stoi(next_token(in));
    h.height = std::stoi(next_token(in));
    h.maxval = std::stoi(next_token(in));
  } catch (const std::exception &) {
    throw DataError(path.string() + ": malformed image header");
  }
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 255) {
    throw DataError(path.string() + ": unsupported image dimensions or depth");
  }
  in.get();
  return h;
}

std::vector<std::uint8_t> read_bytes(std::istream & in, std::size_t n, const fs::path & path)
{
  std::vector<std::uint8_t> buf(n);
  in.read(reinterpret_cast<char *>(buf.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw DataError(path.string() + ": truncated image data");
  return buf;
}

std::ofstream open_out(const fs::path & path, bool binary)
{
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_label_pgm(const fs::path & path, const SceneImage & scene)
{
  if (!scene.has_labels()) throw std::invalid_argument("write_label_pgm: scene has no labels");
  std::ofstream out = open_out(path, true);
  out << "P5\n" << scene.width << ' ' << scene.height << "\n2\n";
  for (int r = 0; r < scene.height; ++r) {
    const std::size_t row = static_cast<std::size_t>(scene.height - 1 - r) * scene.width;
    out.write(reinterpret_cast<const char *>(scene.labels.data() + row), scene.width);
  }
}

SceneImage read_label_pgm(const fs::path & path, int scene_id)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const PnmHeader h = read_pnm_header(in, "P5", path);
  const auto raw = read_bytes(in, static_cast<std::size_t>(h.width) * h.height, path);
  std::vector<std::uint8_t> labels(raw.size());
  for (int r = 0; r < h.height; ++r) {
    for (int c = 0; c < h.width; ++c) {
      const std::uint8_t v = raw[static_cast<std::size_t>(r) * h.width + c];
      if (v > kObstacle) throw DataError(path.string() + ": label " + std::to_string(v) + " is not terrain/road/obstacle");
      labels[static_cast<std::size_t>(h.height - 1 - r) * h.width + c] = v;
    }
  }
  return SceneImage::from_labels(scene_id, h.width, h.height, std::move(labels));
}

void write_ppm(const fs::path & path, const SceneImage & scene)
{
  if (scene.channels < 3) throw std::invalid_argument("write_ppm: need three channels");
  std::ofstream out = open_out(path, true);
  out << "P6\n" << scene.width << ' ' << scene.height << "\n255\n";
  const std::size_t plane = static_cast<std::size_t>(scene.width) * scene.height;
  std::vector<char> row(static_cast<std::size_t>(scene.width) * 3);
  for (int r = 0; r < scene.height; ++r) {
    const std::size_t base = static_cast<std::size_t>(scene.height - 1 - r) * scene.width;
    for (int c = 0; c < scene.width; ++c) {
      for (int k = 0; k < 3; ++k) row[c * 3 + k] = static_cast<char>(scene.pixels[k * plane + base + c]);
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

SceneImage read_ppm(const fs::path & path, int scene_id)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const PnmHeader h = read_pnm_header(in, "P6", path);
  const auto raw = read_bytes(in, static_cast<std::size_t>(h.width) * h.height * 3, path);
  SceneImage s;
  s.scene_id = scene_id;
  s.width = h.width;
  s.height = h.height;
  s.channels = 3;
  const std::size_t plane = static_cast<std::size_t>(h.width) * h.height;
  s.pixels.resize(3 * plane);
  for (int r = 0; r < h.height; ++r) {
    for (int c = 0; c < h.width; ++c) {
      const std::size_t src = (static_cast<std::size_t>(r) * h.width + c) * 3;
      const std::size_t dst = static_cast<std::size_t>(h.height - 1 - r) * h.width + c;
      for (int k = 0; k < 3; ++k) {
        s.pixels[k * plane + dst] = static_cast<std::uint8_t>(raw[src + k] * 255 / h.maxval);
      }
    }
  }
  return s;
}

namespace
{

template <class T>
bool parse_field(std::string_view s, T & out)
{
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) return false;
  if constexpr (std::is_floating_point_v<T>) return std::isfinite(out);
  return true;
}

}  // namespace

std::vector<DatasetRecord> read_records(const fs::path & csv)
{
  std::ifstream in(csv);
  if (!in) throw DataError("cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(csv.string() + ": empty file");
  line.erase(std::remove_if(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }), line.end());
  if (line != "scene_id,agent_id,frame,x,y") {
    throw DataError(csv.string() + ": header must be scene_id,agent_id,frame,x,y");
  }
  std::vector<DatasetRecord> records;
  std::vector<long> bad;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
      fields.push_back(rest.substr(0, pos));
    }
    fields.push_back(rest);
    DatasetRecord r;
    const bool ok = fields.size() == 5 && parse_field(fields[0], r.scene_id) &&
                    parse_field(fields[1], r.agent_id) && parse_field(fields[2], r.frame) &&
                    parse_field(fields[3], r.x) && parse_field(fields[4], r.y);
    if (!ok) {
      bad.push_back(lineno);
      continue;
    }
    records.push_back(r);
  }
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << csv.string() << ": " << bad.size() << " malformed row(s) at line";
    for (std::size_t i = 0; i < bad.size() && i < 20; ++i) msg << (i ? ", " : " ") << bad[i];
    if (bad.size() > 20) msg << ", ...";
    throw DataError(msg.str());
  }
  return records;
}

void write_records(const fs::path & csv, const std::vector<DatasetRecord> & records)
{
  std::ofstream out = open_out(csv, false);
  out << "scene_id,agent_id,frame,x,y\n";
  char buf[64];
  for (const DatasetRecord & r : records) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g", r.x, r.y);
    out << r.scene_id << ',' << r.agent_id << ',' << r.frame << ',' << buf << '\n';
  }
}

bool Track::covers(long frame) const
{
  if (frame < first_frame || frame > last_frame()) return false;
  return (frame - first_frame) % frame_step == 0;
}

Vec2 Track::at(long frame) const
{
  if (!covers(frame)) throw std::out_of_range("Track::at: frame not on track");
  return points[static_cast<std::size_t>((frame - first_frame) / frame_step)];
}

Corpus::Corpus(std::vector<DatasetRecord> records, std::map<int, SceneImage> scenes, const DatasetConfig & config)
: config_(config), scenes_(std::move(scenes))
{
  if (config.t_p < 2 || config.t_f < 1 || config.window_stride < 1) {
    throw std::invalid_argument("Corpus: t_p >= 2, t_f >= 1 and window_stride >= 1 required");
  }
  std::sort(records.begin(), records.end(), [](const DatasetRecord & a, const DatasetRecord & b) {
    return std::tie(a.scene_id, a.agent_id, a.frame) < std::tie(b.scene_id, b.agent_id, b.frame);
  });
  // Frame step per scene: smallest positive gap between consecutive frames of one agent.
  std::map<int, long> step;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto & a = records[i - 1];
    const auto & b = records[i];
    if (a.scene_id != b.scene_id || a.agent_id != b.agent_id) continue;
    if (a.frame == b.frame) {
      throw DataError(
        "duplicate frame " + std::to_string(b.frame) + " for agent " + std::to_string(b.agent_id) + " in scene " +
        std::to_string(b.scene_id));
    }
    auto [it, inserted] = step.try_emplace(a.scene_id, b.frame - a.frame);
    if (!inserted) it->second = std::min(it->second, b.frame - a.frame);
  }
  const std::size_t need = static_cast<std::size_t>(config.t_p + config.t_f);
  auto flush = [&](Track & t) {
    if (t.points.size() >= need) {
      tracks_.push_back(std::move(t));
    } else if (!t.points.empty()) {
      ++skipped_;
      short_.push_back(std::move(t));
    }
    t = Track{};
  };
  Track cur;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const DatasetRecord & r = records[i];
    const long s = step.count(r.scene_id) ? step[r.scene_id] : 1;
    const bool continues = !cur.points.empty() && cur.scene_id == r.scene_id && cur.agent_id == r.agent_id &&
                           r.frame == cur.last_frame() + s;
    if (!continues) {
      flush(cur);
      cur.scene_id = r.scene_id;
      cur.agent_id = r.agent_id;
      cur.first_frame = r.frame;
      cur.frame_step = s;
    }
    cur.points.push_back({r.x, r.y});
  }
  flush(cur);
  if (skipped_ > 0) {
    log::info("dataset: skipped " + std::to_string(skipped_) + " track segment(s) shorter than " + std::to_string(need) + " points");
  }
  for (std::size_t i = 0; i < tracks_.size() + short_.size(); ++i) by_scene_[segment(i).scene_id].push_back(i);
  build_windows();
}

void Corpus::build_windows()
{
  const std::size_t need = static_cast<std::size_t>(config_.t_p + config_.t_f);
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    const std::size_t n = tracks_[i].points.size() - need + 1;
    for (std::size_t o = 0; o < n; o += static_cast<std::size_t>(config_.window_stride)) windows_.push_back({i, o});
  }
}

std::vector<int> Corpus::scene_ids() const
{
  std::vector<int> ids;
  for (const auto & [id, idx] : by_scene_) ids.push_back(id);
  for (const auto & [id, scene] : scenes_) {
    if (!by_scene_.count(id)) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

ScenarioObservation Corpus::observation(const WindowRef & w) const
{
  const Track & t = tracks_.at(w.track);
  ScenarioObservation obs;
  obs.scene_id = t.scene_id;
  obs.agent_id = t.agent_id;
  obs.dt = config_.dt;
  const auto begin = t.points.begin() + static_cast<std::ptrdiff_t>(w.offset);
  obs.history.assign(begin, begin + config_.t_p);
  obs.future.assign(begin + config_.t_p, begin + config_.t_p + config_.t_f);
  obs.frame = t.first_frame + t.frame_step * static_cast<long>(w.offset + config_.t_p - 1);
  obs.id = "s" + std::to_string(t.scene_id) + "_a" + std::to_string(t.agent_id) + "_f" + std::to_string(obs.frame);
  const Vec2 origin = obs.origin();
  const double half = 0.5 * config_.crop_extent;

  for (std::size_t j : by_scene_.at(t.scene_id)) {
    const Track & o = segment(j);
    if (o.agent_id == t.agent_id || !o.covers(obs.frame)) continue;
    const Vec2 rel = o.at(obs.frame) - origin;
    if (!(std::abs(rel.x) < half && std::abs(rel.y) < half)) continue;
    NeighborTrack nb;
    nb.agent_id = o.agent_id;
    for (int k = 0; k < config_.t_p; ++k) {
      const long f = obs.frame - t.frame_step * (config_.t_p - 1 - k);
      const bool ok = o.covers(f);
      nb.positions.push_back(ok ? o.at(f) : Vec2{});
      nb.valid.push_back(ok);
    }
    obs.neighbors.push_back(std::move(nb));
  }
  const auto scene = scenes_.find(t.scene_id);
  if (scene != scenes_.end()) {
    obs.raster = scene->second.crop(origin, config_.crop_extent, config_.raster_size);
  } else {
    obs.raster = SceneImage::from_labels(t.scene_id, 1, 1, {kTerrain}).crop(origin, config_.crop_extent, config_.raster_size);
    obs.raster.road.clear();
  }
  return obs;
}

std::vector<ScenarioObservation> Corpus::observations(const std::vector<int> & scene_ids) const
{
  std::vector<ScenarioObservation> out;
  for (const WindowRef & w : windows_) {
    const int sid = tracks_[w.track].scene_id;
    if (!scene_ids.empty() && std::find(scene_ids.begin(), scene_ids.end(), sid) == scene_ids.end()) continue;
    out.push_back(observation(w));
  }
  return out;
}

std::map<int, SceneImage> load_scenes(const fs::path & dir, const std::vector<DatasetRecord> & records)
{
  std::map<int, SceneImage> scenes;
  std::vector<int> ids;
  for (const DatasetRecord & r : records) ids.push_back(r.scene_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (int id : ids) {
    const fs::path base = dir / "scenes" / ("scene_" + std::to_string(id));
    const fs::path pgm = fs::path(base).replace_extension(".pgm");
    const fs::path ppm = fs::path(base).replace_extension(".ppm");
    if (fs::exists(pgm)) {
      scenes.emplace(id, read_label_pgm(pgm, id));
    } else if (fs::exists(ppm)) {
      scenes.emplace(id, read_ppm(ppm, id));
    } else {
      log::warn("dataset: no raster for scene " + std::to_string(id) + "; using an empty terrain crop");
    }
  }
  return scenes;
}

Corpus load_dataset(const fs::path & dir, const DatasetConfig & config)
{
  auto records = read_records(dir / "trajectories.csv");
  auto scenes = load_scenes(dir, records);
  return Corpus(std::move(records), std::move(scenes), config);
}

Vec2 transform_point(Vec2 p, int width, int height, const Augmentation & a)
{
  int w = width, h = height;
  for (int k = 0; k < ((a.rotations % 4) + 4) % 4; ++k) {
    p = {h - p.y, p.x};
    std::swap(w, h);
  }
  if (a.flip) p.x = w - p.x;
  return p;
}

SceneImage transform_scene(const SceneImage & scene, const Augmentation & a)
{
  const int rot = ((a.rotations % 4) + 4) % 4;
  const int w2 = rot % 2 ? scene.height : scene.width;
  const int h2 = rot % 2 ? scene.width : scene.height;
  SceneImage out;
  out.scene_id = scene.scene_id;
  out.width = w2;
  out.height = h2;
  out.channels = scene.channels;
  const std::size_t plane = static_cast<std::size_t>(w2) * h2;
  out.pixels.resize(scene.pixels.size());
  if (scene.has_labels()) out.labels.resize(plane);
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      // Pixel centers map to pixel centers.
      const Vec2 c = transform_point({x + 0.5, y + 0.5}, scene.width, scene.height, a);
      const std::size_t dst = static_cast<std::size_t>(std::floor(c.y)) * w2 + static_cast<std::size_t>(std::floor(c.x));
      const std::size_t src = static_cast<std::size_t>(y) * scene.width + x;
      for (int k = 0; k < scene.channels; ++k) out.pixels[k * plane + dst] = scene.pixels[k * plane + src];
      if (scene.has_labels()) out.labels[dst] = scene.labels[src];
    }
  }
  return out;
}

std::vector<DatasetRecord> augment(
  const std::vector<DatasetRecord> & records, std::map<int, SceneImage> & scenes, const std::vector<int> & scene_ids)
{
  std::vector<DatasetRecord> out = records;
  for (int sid : scene_ids) {
    const auto it = scenes.find(sid);
    if (it == scenes.end()) throw std::invalid_argument("augment: unknown scene " + std::to_string(sid));
    const SceneImage src = it->second;
    for (int k = 1; k < 8; ++k) {
      const Augmentation a{k % 4, k >= 4};
      const int id = sid * 8 + k;
      if (scenes.count(id)) throw std::invalid_argument("augment: scene id " + std::to_string(id) + " already exists");
      SceneImage s = transform_scene(src, a);
      s.scene_id = id;
      scenes.emplace(id, std::move(s));
      for (const DatasetRecord & r : records) {
        if (r.scene_id != sid) continue;
        const Vec2 p = transform_point({r.x, r.y}, src.width, src.height, a);
        out.push_back({id, r.agent_id, r.frame, p.x, p.y});
      }
    }
  }
  return out;
}

const std::vector<int> & SceneSplit::get(const std::string & name) const
{
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split '" + name + "' (expected train, val or test)");
}

SceneSplit split_scenes(const std::vector<int> & scene_ids, double val_fraction, double test_fraction)
{
  if (val_fraction < 0.0 || test_fraction < 0.0 || val_fraction + test_fraction >= 1.0) {
    throw std::invalid_argument("split_scenes: fractions must be non-negative and sum below 1");
  }
  std::vector<int> ids = scene_ids;
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n = static_cast<double>(ids.size());
  auto count = [&](double f) {
    const auto c = static_cast<std::size_t>(std::lround(f * n));
    return f > 0.0 && ids.size() >= 3 ? std::max<std::size_t>(c, 1) : c;
  };
  const std::size_t n_test = count(test_fraction);
  const std::size_t n_val = count(val_fraction);
  SceneSplit s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i < n_test) s.test.push_back(ids[i]);
    else if (i < n_test + n_val) s.val.push_back(ids[i]);
    else s.train.push_back(ids[i]);
  }
  for (auto * v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

}  // namespace gridplan
