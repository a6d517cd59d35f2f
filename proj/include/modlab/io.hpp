#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace modlab {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t h);

// Binary snapshot stream: "RMLS", u32 version, u32 kind, u64 count, u32 d, u64 hash,
// then records of (t, extras..., count * d doubles).
enum class SnapshotKind : std::uint32_t { particles = 1, density = 2 };

struct SnapshotHeader {
  SnapshotKind kind = SnapshotKind::particles;
  std::uint64_t count = 0;
  std::uint32_t d = 1;
  std::uint64_t hash = 0;
  std::uint32_t extras = 0;  // doubles stored between t and the payload
};

class SnapshotWriter {
 public:
  SnapshotWriter(std::ostream& os, const SnapshotHeader& h);
  void write(double t, const std::vector<double>& extras, const std::vector<double>& payload);

 private:
  std::ostream& os_;
  SnapshotHeader h_;
};

struct SnapshotRecord {
  double t = 0;
  std::vector<double> extras, payload;
};

struct SnapshotFile {
  SnapshotHeader header;
  std::vector<SnapshotRecord> records;
};
SnapshotFile read_snapshots(std::istream& is);

}  // namespace modlab
