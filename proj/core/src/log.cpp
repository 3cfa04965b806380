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

#include "gridplan/log.hpp"

#include <iostream>
#include <mutex>

namespace gridplan::log
{

namespace
{
std::mutex g_mutex;
Level g_level = Level::kInfo;
Sink g_sink;

const char * tag(Level l)
{
  switch (l) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
    default: return "";
  }
}
}  // namespace

void set_level(Level l)
{
  std::lock_guard lock(g_mutex);
  g_level = l;
}

Level level()
{
  std::lock_guard lock(g_mutex);
  return g_level;
}

void set_sink(Sink sink)
{
  std::lock_guard lock(g_mutex);
  g_sink = std::move(sink);
}

void write(Level l, const std::string & message)
{
  std::lock_guard lock(g_mutex);
  if (l < g_level) return;
  if (g_sink) {
    g_sink(l, message);
  } else {
    std::cerr << "[" << tag(l) << "] " << message << '\n';
  }
}

}  // namespace gridplan::log
