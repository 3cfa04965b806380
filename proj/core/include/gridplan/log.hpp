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

#ifndef GRIDPLAN__LOG_HPP_
#define GRIDPLAN__LOG_HPP_

#include <functional>
#include <string>

namespace gridplan::log
{

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

using Sink = std::function<void(Level, const std::string &)>;

void set_level(Level level);
Level level();
/// Replaces the output sink (stderr by default). Passing nullptr restores stderr.
void set_sink(Sink sink);

void write(Level level, const std::string & message);
inline void debug(const std::string & m) { write(Level::kDebug, m); }
inline void info(const std::string & m) { write(Level::kInfo, m); }
inline void warn(const std::string & m) { write(Level::kWarn, m); }
inline void error(const std::string & m) { write(Level::kError, m); }

}  // namespace gridplan::log

#endif  // GRIDPLAN__LOG_HPP_
