#include "modlab/io.hpp"

#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace modlab {

namespace {

constexpr char kMagic[4] = {'R', 'M', 'L', 'S'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("snapshot: truncated stream");
  return v;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[i] = digits[h & 15];
  return s;
}

SnapshotWriter::SnapshotWriter(std::ostream& os, const SnapshotHeader& h) : os_(os), h_(h) {
  os_.write(kMagic, 4);
  put(os_, kVersion);
  put(os_, static_cast<std::uint32_t>(h.kind));
  put(os_, h.count);
  put(os_, h.d);
  put(os_, h.hash);
  put(os_, h.extras);
}

void SnapshotWriter::write(double t, const std::vector<double>& extras, const std::vector<double>& payload) {
  if (extras.size() != h_.extras || payload.size() != h_.count * h_.d)
    throw std::invalid_argument("snapshot: record size does not match header");
  put(os_, t);
  os_.write(reinterpret_cast<const char*>(extras.data()), static_cast<std::streamsize>(extras.size() * sizeof(double)));
  os_.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
}

SnapshotFile read_snapshots(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("snapshot: bad magic");
  if (get<std::uint32_t>(is) != kVersion) throw std::runtime_error("snapshot: unsupported version");
  SnapshotFile f;
  f.header.kind = static_cast<SnapshotKind>(get<std::uint32_t>(is));
  f.header.count = get<std::uint64_t>(is);
  f.header.d = get<std::uint32_t>(is);
  f.header.hash = get<std::uint64_t>(is);
  f.header.extras = get<std::uint32_t>(is);
  const std::size_t m = f.header.count * f.header.d;
  while (is.peek() != std::char_traits<char>::eof()) {
    SnapshotRecord r;
    r.t = get<double>(is);
    r.extras.resize(f.header.extras);
    r.payload.resize(m);
    for (auto& v : r.extras) v = get<double>(is);
    for (auto& v : r.payload) v = get<double>(is);
    f.records.push_back(std::move(r));
  }
  return f;
}

}  // namespace modlab
