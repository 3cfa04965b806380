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

#include "gridplan/figures.hpp"

#include "gridplan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace gridplan
{

namespace fs = std::filesystem;

namespace
{

constexpr Rgb kPalette[] = {
  {230, 25, 75}, {60, 180, 75}, {255, 225, 25}, {0, 130, 200}, {245, 130, 48},
  {145, 30, 180}, {70, 240, 240}, {240, 50, 230}, {210, 245, 60}, {0, 128, 128}};
constexpr Rgb kGroundTruth{255, 255, 255};
constexpr Rgb kHistory{20, 20, 20};

Rgb palette(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

std::string padded(int v)
{
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d", v);
  return buf;
}

}  // namespace

Image::Image(int w, int h, Rgb fill) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3)
{
  for (std::size_t i = 0; i < rgb.size(); i += 3) std::copy(fill.begin(), fill.end(), rgb.begin() + i);
}

void Image::set(int x, int y, Rgb c)
{
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  std::copy(c.begin(), c.end(), rgb.begin() + (static_cast<std::size_t>(y) * width + x) * 3);
}

Rgb Image::get(int x, int y) const
{
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

void Image::line(double x0, double y0, double x1, double y1, Rgb c)
{
  const int n = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    set(static_cast<int>(std::floor(x0 + t * (x1 - x0))), static_cast<int>(std::floor(y0 + t * (y1 - y0))), c);
  }
}

void Image::dot(double x, double y, int radius, Rgb c)
{
  const int cx = static_cast<int>(std::floor(x));
  const int cy = static_cast<int>(std::floor(y));
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) set(cx + dx, cy + dy, c);
    }
  }
}

void Image::write_ppm(const fs::path & path) const
{
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char *>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

Rgb colormap(double t)
{
  static constexpr double stops[5][3] = {
    {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(t));
  const double f = t - i;
  Rgb c;
  for (int k = 0; k < 3; ++k) c[k] = static_cast<std::uint8_t>(std::lround(stops[i][k] + f * (stops[i + 1][k] - stops[i][k])));
  return c;
}

Image heatmap(std::span<const double> values, int grid_size, int scale, double lo, double hi)
{
  const std::size_t cells = static_cast<std::size_t>(grid_size) * grid_size;
  if (values.size() != cells) throw std::invalid_argument("heatmap: expected grid_size^2 values");
  if (lo == hi) {
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    lo = *mn;
    hi = *mx;
  }
  const double range = hi > lo ? hi - lo : 1.0;
  Image img(grid_size * scale, grid_size * scale);
  for (int iy = 0; iy < grid_size; ++iy) {
    for (int ix = 0; ix < grid_size; ++ix) {
      const Rgb c = colormap((values[static_cast<std::size_t>(iy) * grid_size + ix] - lo) / range);
      const int row = grid_size - 1 - iy;
      for (int y = 0; y < scale; ++y) {
        for (int x = 0; x < scale; ++x) img.set(ix * scale + x, row * scale + y, c);
      }
    }
  }
  return img;
}

Image scene_image(const SceneRaster & raster, int scale)
{
  const int r = raster.size;
  const int size = r * std::max(1, scale);
  Image img(size, size);
  const std::size_t plane = static_cast<std::size_t>(r) * r;
  for (int y = 0; y < size; ++y) {
    const int row = r - 1 - y * r / size;
    for (int x = 0; x < size; ++x) {
      const int col = x * r / size;
      const std::size_t i = static_cast<std::size_t>(row) * r + col;
      Rgb c;
      if (raster.has_road_mask() && raster.channels == 3) {
        const double terrain = raster.pixels[i] / 255.0;
        const double road = raster.pixels[plane + i] / 255.0;
        const double obstacle = raster.pixels[2 * plane + i] / 255.0;
        for (int k = 0; k < 3; ++k) {
          const double v = terrain * std::array{196, 190, 168}[k] + road * std::array{128, 128, 136}[k] +
                           obstacle * std::array{70, 50, 45}[k];
          c[k] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
      } else {
        for (int k = 0; k < 3; ++k) c[k] = raster.pixels[std::min(k, raster.channels - 1) * plane + i];
      }
      img.set(x, y, c);
    }
  }
  return img;
}

Vec2 CanvasMapping::pixel(Vec2 world) const
{
  const Vec2 rel = world - origin;
  return {(rel.x / extent + 0.5) * size, (0.5 - rel.y / extent) * size};
}

void draw_trajectory(Image & img, const CanvasMapping & map, const Trajectory & t, Rgb color, int dot)
{
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Vec2 p = map.pixel(t[i]);
    if (i > 0) {
      const Vec2 q = map.pixel(t[i - 1]);
      img.line(q.x, q.y, p.x, p.y, color);
    }
    if (dot > 0) img.dot(p.x, p.y, dot, color);
  }
}

FigureKind parse_figure_kind(const std::string & name)
{
  for (FigureKind k :
       {FigureKind::kOGM, FigureKind::kReward, FigureKind::kPolicy, FigureKind::kPlan, FigureKind::kDist,
        FigureKind::kReps}) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown figure kind '" + name + "' (expected ogm, reward, policy, plan, dist or reps)");
}

std::string to_string(FigureKind k)
{
  switch (k) {
    case FigureKind::kOGM: return "ogm";
    case FigureKind::kReward: return "reward";
    case FigureKind::kPolicy: return "policy";
    case FigureKind::kPlan: return "plan";
    case FigureKind::kDist: return "dist";
    case FigureKind::kReps: return "reps";
  }
  return "?";
}

std::vector<fs::path> render_figures(
  GridPlanModel & model, const ScenarioObservation & obs, const FigureOptions & options, const fs::path & dir)
{
  ag::NoGradGuard guard;
  const ModelConfig & mc = model.config();
  const int g = mc.grid_size;
  const std::size_t cells = static_cast<std::size_t>(g) * g;
  const int n = std::clamp(options.step, 1, mc.horizon);
  nn::Rng rng(options.seed);
  const Encoding enc = model.encode(obs);
  const OGMSequence ogms = model.ogms(enc);
  const PolicyOutput pol = model.policy(enc);
  const std::string stem = obs.id + "_";
  std::vector<fs::path> written;
  auto emit = [&](const Image & img, const std::string & name) {
    const fs::path p = dir / (stem + name + ".ppm");
    img.write_ppm(p);
    written.push_back(p);
  };
  const CanvasMapping canvas{obs.origin(), mc.crop_extent, g * options.scale};
  auto base = [&]() {
    Image img = scene_image(obs.raster, std::max(1, canvas.size / std::max(1, obs.raster.size)));
    if (img.width != canvas.size) {
      // Resample to the canvas so overlays and heatmaps share pixel coordinates.
      Image scaled(canvas.size, canvas.size);
      for (int y = 0; y < canvas.size; ++y) {
        for (int x = 0; x < canvas.size; ++x) scaled.set(x, y, img.get(x * img.width / canvas.size, y * img.height / canvas.size));
      }
      img = std::move(scaled);
    }
    draw_trajectory(img, canvas, obs.history, kHistory, 2);
    return img;
  };

  switch (options.kind) {
    case FigureKind::kOGM:
      for (int t = 0; t < ogms.steps(); ++t) emit(heatmap(ogms.maps[t].data(), g, options.scale), "ogm_t" + padded(t + 1));
      break;
    case FigureKind::kReward:
    case FigureKind::kPolicy: {
      const bool reward = options.kind == FigureKind::kReward;
      std::vector<std::vector<double>> maps(4, std::vector<double>(cells));
      if (reward) {
        const auto r = pol.rewards.rewards.data();
        for (std::size_t s = 0; s < cells; ++s) {
          for (int a = 0; a < 4; ++a) maps[a][s] = r[((static_cast<std::size_t>(n) - 1) * cells + s) * kNumActions + a];
        }
      } else {
        const auto f = policy_fields(pol.policy.log_pi, g)[n - 1].data();
        for (int a = 0; a < 4; ++a) std::copy_n(f.begin() + static_cast<std::ptrdiff_t>(a * cells), cells, maps[a].begin());
      }
      double lo = 0.0, hi = 1.0;
      if (reward) {
        lo = INFINITY;
        hi = -INFINITY;
        for (const auto & m : maps) {
          lo = std::min(lo, *std::min_element(m.begin(), m.end()));
          hi = std::max(hi, *std::max_element(m.begin(), m.end()));
        }
      }
      for (int a = 0; a < 4; ++a) {
        emit(heatmap(maps[a], g, options.scale, lo, hi), std::string(reward ? "reward" : "policy") + "_n" + padded(n) + "_" + action_name(a));
      }
      break;
    }
    case FigureKind::kPlan: {
      Image img = base();
      const SoftPlan plans =
        sample_plan(policy_fields(pol.policy.log_pi, g), center_states(enc.spec, options.count), options.tau, rng);
      for (int b = 0; b < plans.batch(); ++b) {
        double px = (enc.spec.center() + 0.5) * options.scale;
        double py = (g - enc.spec.center() - 0.5) * options.scale;
        for (const ag::Tensor & s : plans.states) {
          const double x = (s[2 * b] + 0.5) * options.scale;
          const double y = (g - s[2 * b + 1] - 0.5) * options.scale;
          img.line(px, py, x, y, palette(b));
          px = x;
          py = y;
        }
        img.dot(px, py, 2, palette(b));
      }
      emit(img, "plans");
      break;
    }
    case FigureKind::kDist:
    case FigureKind::kReps: {
      Image img = base();
      const DecoderContext ctx = model.context(enc, pol, ogms);
      const int c = options.kind == FigureKind::kDist ? options.count : std::max(options.count, mc.k);
      const SampleSet s = model.sample(ctx, pol, c, options.tau, rng);
      std::vector<Trajectory> draw = s.trajectories();
      if (options.kind == FigureKind::kReps) {
        const ag::Tensor reps = model.refine(s.relative(obs.origin()), enc, false, rng);
        draw.clear();
        const int d = 2 * mc.t_f;
        for (int k = 0; k < mc.k; ++k) {
          Trajectory t = unflatten(reps.data().subspan(static_cast<std::size_t>(k) * d, d));
          for (Vec2 & p : t) p = p + obs.origin();
          draw.push_back(std::move(t));
        }
      }
      for (std::size_t i = 0; i < draw.size(); ++i) draw_trajectory(img, canvas, draw[i], palette(i), options.kind == FigureKind::kReps ? 1 : 0);
      draw_trajectory(img, canvas, obs.future, kGroundTruth, 1);
      emit(img, options.kind == FigureKind::kDist ? "dist" : "reps");
      break;
    }
  }
  return written;
}

}  // namespace gridplan
