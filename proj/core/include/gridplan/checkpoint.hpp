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

#ifndef GRIDPLAN__CHECKPOINT_HPP_
#define GRIDPLAN__CHECKPOINT_HPP_

#include "gridplan/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gridplan
{

/// Corrupt, truncated or foreign checkpoint file.
class IntegrityError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint written for a different model configuration.
class FingerprintMismatch : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);

struct StoredParam
{
  std::string name;
  ag::Shape shape;
  std::vector<double> values;
};

/**
 * @brief Versioned model snapshot.
 *
 * Binary layout (little endian): magic "GRIDPLAN", u32 version, u64
 * fingerprint, stage string, config string, parameter count and
 * (name, rank, dims, values) records, then the FNV-1a hash of all
 * preceding bytes. Strings are u32-length prefixed.
 */
struct Checkpoint
{
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t fingerprint = 0;
  std::string stage;
  std::string config;
  std::vector<StoredParam> params;

  static Checkpoint capture(
    std::uint64_t fingerprint, std::string stage, std::string config, const nn::NamedParams & params);

  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);

  /// Copies stored values into `params` by name. Throws FingerprintMismatch unless
  /// the fingerprints agree or `force` is set; std::invalid_argument on missing or misshaped entries.
  void restore(nn::NamedParams & params, std::uint64_t expected_fingerprint, bool force = false) const;
};

/// Writes atomically (temporary file + rename).
void save_checkpoint(const std::filesystem::path & path, const Checkpoint & ckpt);
Checkpoint load_checkpoint(const std::filesystem::path & path);

}  // namespace gridplan

#endif  // GRIDPLAN__CHECKPOINT_HPP_
