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

#ifndef GRIDPLAN__DATASET_HPP_
#define GRIDPLAN__DATASET_HPP_

#include "gridplan/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridplan
{

/// Raised for unreadable or malformed dataset files.
class DataError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/**
 * @brief Whole-scene image in world units (one pixel per unit).
 *
 * `pixels` is [channels, height, width] with row 0 at y = 0. `labels` holds
 * SemanticClass values when the scene comes from a label map; RGB-only
 * scenes have no labels and therefore no road mask.
 */
struct SceneImage
{
  int scene_id = 0;
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> labels;

  bool has_labels() const { return !labels.empty(); }
  /// Label at a world point; points outside the scene are terrain.
  SemanticClass label_at(Vec2 p) const;
  /// Nearest-pixel crop of `size` x `size` pixels covering `extent` world units around `center`.
  SceneRaster crop(Vec2 center, double extent, int size) const;

  /// Builds a 3-channel one-hot image (terrain, road, obstacle) from labels.
  static SceneImage from_labels(int scene_id, int width, int height, std::vector<std::uint8_t> labels);
};

/// Binary PGM (P5) label map; file row 0 is the top of the scene (y = height - 1).
void write_label_pgm(const std::filesystem::path & path, const SceneImage & scene);
SceneImage read_label_pgm(const std::filesystem::path & path, int scene_id);
/// Binary PPM (P6) of the first three channels, same row convention.
void write_ppm(const std::filesystem::path & path, const SceneImage & scene);
SceneImage read_ppm(const std::filesystem::path & path, int scene_id);

/// One row of trajectories.csv.
struct DatasetRecord
{
  int scene_id = 0;
  int agent_id = 0;
  long frame = 0;
  double x = 0.0;
  double y = 0.0;
};

/// Parses `scene_id,agent_id,frame,x,y`; throws DataError listing every malformed line.
std::vector<DatasetRecord> read_records(const std::filesystem::path & csv);
void write_records(const std::filesystem::path & csv, const std::vector<DatasetRecord> & records);

/// A uniformly sampled track segment of one agent.
struct Track
{
  int scene_id = 0;
  int agent_id = 0;
  long first_frame = 0;
  long frame_step = 1;
  std::vector<Vec2> points;

  long last_frame() const { return first_frame + frame_step * (static_cast<long>(points.size()) - 1); }
  bool covers(long frame) const;
  Vec2 at(long frame) const;
};

struct WindowRef
{
  std::size_t track = 0;
  std::size_t offset = 0;  // index of the first history point
};

struct DatasetConfig
{
  int t_p = 8;
  int t_f = 12;
  double dt = 0.4;
  double crop_extent = 200.0;
  int raster_size = 100;
  /// Keep every `window_stride`-th window of a track (1 = all stride-1 windows).
  int window_stride = 1;
};

/**
 * @brief Tracks and scenes of one corpus with stride-1 windowing.
 *
 * Tracks are split where frames are missing; segments shorter than
 * t_p + t_f yield no windows and are counted, but still appear as
 * neighbors. Windows never span agents or scenes.
 */
class Corpus
{
public:
  Corpus() = default;
  Corpus(std::vector<DatasetRecord> records, std::map<int, SceneImage> scenes, const DatasetConfig & config);

  const DatasetConfig & config() const { return config_; }
  const std::vector<Track> & tracks() const { return tracks_; }
  const std::map<int, SceneImage> & scenes() const { return scenes_; }
  const std::vector<WindowRef> & windows() const { return windows_; }
  std::size_t skipped_tracks() const { return skipped_; }
  std::vector<int> scene_ids() const;

  /// Builds the observation of one window: history, future, crop and neighbors present at t = 0 inside the crop.
  ScenarioObservation observation(const WindowRef & w) const;
  /// Observations of every window whose scene is in `scene_ids` (all when empty).
  std::vector<ScenarioObservation> observations(const std::vector<int> & scene_ids = {}) const;

private:
  void build_windows();
  /// Index over tracks_ followed by short_.
  const Track & segment(std::size_t i) const { return i < tracks_.size() ? tracks_[i] : short_[i - tracks_.size()]; }

  DatasetConfig config_;
  std::vector<Track> tracks_;
  std::vector<Track> short_;
  std::map<int, SceneImage> scenes_;
  std::vector<WindowRef> windows_;
  std::map<int, std::vector<std::size_t>> by_scene_;
  std::size_t skipped_ = 0;
};

/// Reads trajectories.csv plus scenes/scene_<id>.pgm (labels) or .ppm (RGB) from a corpus directory.
/// Reads scenes/scene_<id>.pgm (labels) or .ppm (RGB) for every scene referenced by `records`.
std::map<int, SceneImage> load_scenes(const std::filesystem::path & dir, const std::vector<DatasetRecord> & records);
/// trajectories.csv plus load_scenes.
Corpus load_dataset(const std::filesystem::path & dir, const DatasetConfig & config);

/// Dihedral transforms of a scene and its tracks: rotation by k * 90 degrees, then an optional x flip.
struct Augmentation
{
  int rotations = 0;
  bool flip = false;
};

SceneImage transform_scene(const SceneImage & scene, const Augmentation & a);
Vec2 transform_point(Vec2 p, int width, int height, const Augmentation & a);

/**
 * @brief Adds the 7 non-identity dihedral copies of every scene in `scene_ids`.
 *
 * A copy of scene s with transform index k (1..7) gets id s * 8 + k; source
 * scene ids are expected to be < 2^27.
 */
std::vector<DatasetRecord> augment(
  const std::vector<DatasetRecord> & records, std::map<int, SceneImage> & scenes,
  const std::vector<int> & scene_ids);

/// Deterministic partition of scene ids into train / val / test by fraction.
struct SceneSplit
{
  std::vector<int> train, val, test;
  const std::vector<int> & get(const std::string & name) const;
};

SceneSplit split_scenes(const std::vector<int> & scene_ids, double val_fraction, double test_fraction);

}  // namespace gridplan

#endif  // GRIDPLAN__DATASET_HPP_
