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

#ifndef GRIDPLAN__FIGURES_HPP_
#define GRIDPLAN__FIGURES_HPP_

#include "gridplan/model.hpp"
#include "gridplan/scenario.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gridplan
{

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB image, row 0 at the top.
struct Image
{
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h, Rgb fill = {0, 0, 0});

  void set(int x, int y, Rgb c);
  Rgb get(int x, int y) const;
  void line(double x0, double y0, double x1, double y1, Rgb c);
  void dot(double x, double y, int radius, Rgb c);
  void write_ppm(const std::filesystem::path & path) const;
};

/// Perceptually ordered colormap on [0, 1] (dark blue to yellow).
Rgb colormap(double t);

/**
 * @brief Heatmap of a G x G field (flat index iy * G + ix), one block of
 * `scale` pixels per cell, north up. Values map linearly from [lo, hi];
 * lo == hi selects the field's own range.
 */
Image heatmap(std::span<const double> values, int grid_size, int scale, double lo = 0.0, double hi = 0.0);

/// Scene crop (terrain, road, obstacle channels) rendered in muted colors, north up.
Image scene_image(const SceneRaster & raster, int scale);

/// Maps world points of a scenario crop to pixel coordinates of an image of `size` pixels.
struct CanvasMapping
{
  Vec2 origin;
  double extent = 200.0;
  int size = 0;

  Vec2 pixel(Vec2 world) const;
};

void draw_trajectory(Image & img, const CanvasMapping & map, const Trajectory & t, Rgb color, int dot = 0);

enum class FigureKind { kOGM, kReward, kPolicy, kPlan, kDist, kReps };

FigureKind parse_figure_kind(const std::string & name);
std::string to_string(FigureKind k);

struct FigureOptions
{
  FigureKind kind = FigureKind::kOGM;
  int step = 10;      // MDP step n (1-based) for reward and policy maps
  int count = 10;     // plans or samples to draw
  int scale = 12;     // pixels per grid cell
  double tau = 1.0;
  std::uint64_t seed = 1;
};

/// Renders one figure family for one scenario into `dir`; returns the written files.
std::vector<std::filesystem::path> render_figures(
  GridPlanModel & model, const ScenarioObservation & obs, const FigureOptions & options,
  const std::filesystem::path & dir);

}  // namespace gridplan

#endif  // GRIDPLAN__FIGURES_HPP_
