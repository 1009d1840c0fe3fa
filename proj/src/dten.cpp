// SPDX-License-Identifier: MIT
#include "cpd/dten.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "cpd/errors.hpp"

namespace cpd {

namespace {

constexpr char kMagic[4] = {'D', 'T', 'E', 'N'};
constexpr std::uint16_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "DTEN I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw validation_error(std::string("dten: truncated ") + what);
  return v;
}

}  // namespace

void write_dten(std::ostream& os, const DenseTensor& t) {
  os.write(kMagic, 4);
  put<std::uint16_t>(os, kVersion);
  if (t.order() > 255) throw validation_error("dten: order exceeds format limit");
  put<std::uint8_t>(os, static_cast<std::uint8_t>(t.order()));
  for (std::size_t d : t.dims) put<std::uint64_t>(os, static_cast<std::uint64_t>(d));
  os.write(reinterpret_cast<const char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  if (!os) throw validation_error("dten: write failed");
}

DenseTensor read_dten(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw validation_error("dten: bad magic");
  const auto version = get<std::uint16_t>(is, "version");
  if (version != kVersion) throw validation_error("dten: unsupported version");
  const auto order = get<std::uint8_t>(is, "order");
  if (order == 0) throw validation_error("dten: zero order");
  std::vector<std::size_t> dims(order);
  std::size_t total = 1;
  for (auto& d : dims) {
    const auto v = get<std::uint64_t>(is, "dims");
    if (v == 0) throw validation_error("dten: zero dimension");
    d = static_cast<std::size_t>(v);
    if (total > (std::size_t{1} << 40) / d) throw validation_error("dten: payload too large");
    total *= d;
  }
  DenseTensor t(dims);
  is.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(total * sizeof(double)));
  if (!is) throw validation_error("dten: truncated payload");
  return t;
}

void save_dten(const std::string& path, const DenseTensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw validation_error("dten: cannot open for writing: " + path);
  write_dten(os, t);
}

DenseTensor load_dten(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw validation_error("dten: cannot open for reading: " + path);
  return read_dten(is);
}

}  // namespace cpd
