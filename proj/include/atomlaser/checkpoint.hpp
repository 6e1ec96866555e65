#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ensemble.hpp"
#include "error.hpp"
#include "grid.hpp"

// Binary checkpoint of a partially accumulated SpectrumSeries.
//
//   "ATLSCKPT"            8 bytes magic
//   u32 version
//   u64 header length, then that many bytes of JSON (grid, seed, times, ...)
//   u8  completed flag per planned trajectory
//   f64 accumulators: for every time, power[sum, carry] per bin, then
//       power_sq[sum, carry] per bin, then trapped and untrapped [sum, carry]
//   u64 FNV-1a checksum of everything above
//
// Integers and doubles are little-endian. Both halves of every compensated
// sum are stored, so a resumed run continues bit-identically.

namespace atomlaser {

inline constexpr std::uint32_t checkpoint_version = 1;
inline constexpr std::string_view checkpoint_magic = "ATLSCKPT";

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

class ByteWriter {
 public:
  template <class T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void put_bytes(std::string_view s) { buf_.append(s); }
  void put_sum(const CompensatedSum& s) {
    put(s.sum);
    put(s.carry);
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view b) : buf_(b) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view get_bytes(std::size_t n) {
    need(n);
    auto s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  CompensatedSum get_sum() {
    CompensatedSum s;
    s.sum = get<double>();
    s.carry = get<double>();
    return s;
  }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw CheckpointError("checkpoint is truncated");
  }
  std::string_view buf_;
  std::size_t pos_ = 0;
};

inline nlohmann::json grid_to_json(const Grid& g) {
  nlohmann::json j;
  j["dimension"] = g.dimension();
  for (int a = 0; a < g.dimension(); ++a) {
    j["points"].push_back(g.points(a));
    j["extent_m"].push_back(g.extent(a));
    j["origin_m"].push_back(g.origin(a));
  }
  return j;
}

inline Grid grid_from_json(const nlohmann::json& j) {
  const int d = j.at("dimension").get<int>();
  if (d != 1 && d != 2) throw CheckpointError("checkpoint grid has invalid dimension");
  std::array<std::size_t, 2> pts{1, 1};
  std::array<double, 2> ext{1.0, 1.0}, org{0.0, 0.0};
  for (int a = 0; a < d; ++a) {
    pts[a] = j.at("points")[a].get<std::size_t>();
    ext[a] = j.at("extent_m")[a].get<double>();
    org[a] = j.at("origin_m")[a].get<double>();
  }
  return Grid(d, pts, ext, org);
}

}  // namespace detail

inline std::string serialize_checkpoint(const SpectrumSeries& s) {
  nlohmann::json h;
  h["grid"] = detail::grid_to_json(s.grid);
  h["mode"] = s.mode == Mode::wigner ? "wigner" : "semiclassical";
  h["times_s"] = s.times;
  h["seed"] = s.seed;
  h["planned"] = s.planned;
  h["folded"] = s.folded;
  h["excluded"] = s.excluded;
  h["chemical_potential_J"] = s.chemical_potential;
  h["config_hash"] = s.config_hash;
  const std::string header = h.dump();

  detail::ByteWriter w;
  w.put_bytes(checkpoint_magic);
  w.put(checkpoint_version);
  w.put(static_cast<std::uint64_t>(header.size()));
  w.put_bytes(header);
  for (auto c : s.completed) w.put(c);
  for (std::size_t t = 0; t < s.times.size(); ++t) {
    for (const auto& v : s.power[t]) w.put_sum(v);
    for (const auto& v : s.power_sq[t]) w.put_sum(v);
    w.put_sum(s.trapped[t]);
    w.put_sum(s.untrapped[t]);
  }
  std::string out = w.bytes();
  const std::uint64_t sum = fnv1a(out);
  out.append(reinterpret_cast<const char*>(&sum), sizeof(sum));
  return out;
}

inline SpectrumSeries deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < checkpoint_magic.size() + sizeof(std::uint64_t))
    throw CheckpointError("checkpoint is truncated");
  const auto body = bytes.substr(0, bytes.size() - sizeof(std::uint64_t));
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof(stored));
  if (body.substr(0, checkpoint_magic.size()) != checkpoint_magic)
    throw CheckpointError("not a checkpoint file (bad magic)");
  if (fnv1a(body) != stored) throw CheckpointError("checkpoint checksum mismatch (corrupt file)");

  detail::ByteReader r(body);
  r.get_bytes(checkpoint_magic.size());
  const auto version = r.get<std::uint32_t>();
  if (version != checkpoint_version)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto hlen = r.get<std::uint64_t>();
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(r.get_bytes(static_cast<std::size_t>(hlen)));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header unreadable: ") + e.what());
  }

  SpectrumSeries s;
  try {
    const Grid g = detail::grid_from_json(h.at("grid"));
    const Mode mode = h.at("mode").get<std::string>() == "wigner" ? Mode::wigner : Mode::semiclassical;
    s.reset(g, mode, h.at("times_s").get<std::vector<double>>(), h.at("seed").get<std::uint64_t>(),
            h.at("planned").get<std::size_t>());
    s.folded = h.at("folded").get<std::size_t>();
    s.excluded = h.at("excluded").get<std::vector<std::uint64_t>>();
    s.chemical_potential = h.at("chemical_potential_J").get<double>();
    s.config_hash = h.at("config_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header incomplete: ") + e.what());
  } catch (const ParameterError& e) {
    throw CheckpointError(std::string("checkpoint header invalid: ") + e.what());
  }
  for (auto& c : s.completed) c = r.get<std::uint8_t>();
  for (std::size_t t = 0; t < s.times.size(); ++t) {
    for (auto& v : s.power[t]) v = r.get_sum();
    for (auto& v : s.power_sq[t]) v = r.get_sum();
    s.trapped[t] = r.get_sum();
    s.untrapped[t] = r.get_sum();
  }
  if (r.remaining() != 0) throw CheckpointError("checkpoint has trailing bytes");
  if (s.folded + s.excluded.size() != s.done())
    throw CheckpointError("checkpoint bookkeeping is inconsistent");
  return s;
}

/// Writes atomically: to `path`.tmp, then renamed over `path`.
inline void save_checkpoint(const std::filesystem::path& path, const SpectrumSeries& s) {
  const std::string bytes = serialize_checkpoint(s);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline SpectrumSeries load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

/// Refuses to continue `s` under a different configuration.
inline void check_resumable(const SpectrumSeries& s, const std::string& config_hash,
                            std::uint64_t seed, const Grid& grid) {
  if (s.config_hash != config_hash)
    throw CheckpointError("resume refused: config hash " + config_hash + " differs from checkpoint " +
                          s.config_hash);
  if (s.seed != seed) throw CheckpointError("resume refused: master seed differs");
  if (!(s.grid == grid)) throw CheckpointError("resume refused: grid differs");
}

}  // namespace atomlaser
