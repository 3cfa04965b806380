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

#include "gridplan/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace gridplan
{

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace
{

constexpr char kMagic[8] = {'G', 'R', 'I', 'D', 'P', 'L', 'A', 'N'};

class Writer
{
public:
  template <class T>
  void pod(T v)
  {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out_.append(b, sizeof(T));
  }
  void str(std::string_view s)
  {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(const void * p, std::size_t n) { out_.append(static_cast<const char *>(p), n); }
  std::string & bytes() { return out_; }

private:
  std::string out_;
};

class Reader
{
public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <class T>
  T pod()
  {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str()
  {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void raw(void * p, std::size_t n)
  {
    need(n);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == in_.size(); }

private:
  void need(std::size_t n) const
  {
    if (n > in_.size() - pos_) throw IntegrityError("checkpoint: truncated record");
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash)
{
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

Checkpoint Checkpoint::capture(
  std::uint64_t fingerprint, std::string stage, std::string config, const nn::NamedParams & params)
{
  Checkpoint c;
  c.fingerprint = fingerprint;
  c.stage = std::move(stage);
  c.config = std::move(config);
  for (const auto & [name, t] : params) c.params.push_back({name, t.shape(), {t.data().begin(), t.data().end()}});
  return c;
}

std::string Checkpoint::serialize() const
{
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.pod(version);
  w.pod(fingerprint);
  w.str(stage);
  w.str(config);
  w.pod(static_cast<std::uint32_t>(params.size()));
  for (const StoredParam & p : params) {
    w.str(p.name);
    w.pod(static_cast<std::uint32_t>(p.shape.size()));
    for (int d : p.shape) w.pod(static_cast<std::int32_t>(d));
    w.pod(static_cast<std::uint64_t>(p.values.size()));
    w.raw(p.values.data(), p.values.size() * sizeof(double));
  }
  const std::uint64_t sum = fnv1a(w.bytes());
  w.pod(sum);
  return std::move(w.bytes());
}

Checkpoint Checkpoint::deserialize(std::string_view bytes)
{
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IntegrityError("checkpoint: not a gridplan checkpoint");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - sizeof(std::uint64_t));
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof(stored));
  if (fnv1a(body) != stored) throw IntegrityError("checkpoint: checksum mismatch (file is corrupt)");

  Reader r(body);
  char magic[sizeof(kMagic)];
  r.raw(magic, sizeof(magic));
  Checkpoint c;
  c.version = r.pod<std::uint32_t>();
  if (c.version != kCheckpointVersion) {
    throw IntegrityError("checkpoint: unsupported version " + std::to_string(c.version));
  }
  c.fingerprint = r.pod<std::uint64_t>();
  c.stage = r.str();
  c.config = r.str();
  const auto n = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    StoredParam p;
    p.name = r.str();
    const auto rank = r.pod<std::uint32_t>();
    if (rank > 8) throw IntegrityError("checkpoint: implausible rank for " + p.name);
    for (std::uint32_t k = 0; k < rank; ++k) p.shape.push_back(r.pod<std::int32_t>());
    const auto count = r.pod<std::uint64_t>();
    if (count != ag::numel(p.shape)) throw IntegrityError("checkpoint: size/shape mismatch for " + p.name);
    if (count > body.size() / sizeof(double)) throw IntegrityError("checkpoint: truncated values for " + p.name);
    p.values.resize(count);
    r.raw(p.values.data(), count * sizeof(double));
    c.params.push_back(std::move(p));
  }
  if (!r.done()) throw IntegrityError("checkpoint: trailing bytes");
  return c;
}

void Checkpoint::restore(nn::NamedParams & params, std::uint64_t expected_fingerprint, bool force) const
{
  if (fingerprint != expected_fingerprint && !force) {
    std::ostringstream msg;
    msg << "checkpoint fingerprint " << std::hex << fingerprint << " does not match the configured model "
        << expected_fingerprint << " (use force to override)";
    throw FingerprintMismatch(msg.str());
  }
  for (auto & [name, t] : params) {
    const auto it = std::find_if(this->params.begin(), this->params.end(), [&](const StoredParam & p) { return p.name == name; });
    if (it == this->params.end()) throw std::invalid_argument("checkpoint: missing parameter " + name);
    if (it->shape != t.shape()) {
      throw std::invalid_argument(
        "checkpoint: parameter " + name + " has shape " + ag::shape_str(it->shape) + ", model expects " +
        ag::shape_str(t.shape()));
    }
    std::copy(it->values.begin(), it->values.end(), t.mutable_data().begin());
  }
}

void save_checkpoint(const std::filesystem::path & path, const Checkpoint & ckpt)
{
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    const std::string bytes = ckpt.serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return Checkpoint::deserialize(bytes);
}

}  // namespace gridplan
