#include "vcd/idx.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

namespace vcd {

namespace {

std::uint32_t read_be32(std::istream& in, const char* what, std::streamoff offset) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) {
    std::ostringstream os;
    os << "idx: truncated file reading " << what << " at offset " << offset;
    throw std::runtime_error(os.str());
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& path, double binarize_threshold) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("idx: cannot open " + path);
  std::uint32_t magic = read_be32(in, "magic", 0);
  int ndims;
  if (magic == 0x00000803u) {
    ndims = 3;
  } else if (magic == 0x00000801u) {
    ndims = 1;
  } else {
    std::ostringstream os;
    os << "idx: bad magic 0x" << std::hex << magic << " at offset 0 in " << path;
    throw std::runtime_error(os.str());
  }
  std::uint64_t dims[3] = {1, 1, 1};
  for (int i = 0; i < ndims; ++i)
    dims[i] = read_be32(in, "dimension size", 4 + 4 * i);
  std::uint64_t n = dims[0];
  std::uint64_t features = dims[1] * dims[2];
  if (n > (1u << 26) || features > (1u << 22) || n * features > (1ull << 32))
    throw std::runtime_error("idx: dimension overflow in " + path);
  std::vector<unsigned char> payload(n * features);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::uint64_t>(in.gcount()) != payload.size())
    throw std::runtime_error("idx: truncated payload in " + path);

  Dataset d;
  d.rows = Mat(n, features);
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < features; ++j) {
      double v = payload[i * features + j] / 255.0;
      d.rows(static_cast<int>(i), static_cast<int>(j)) =
          v >= binarize_threshold ? 1.0 : 0.0;
    }
  return d;
}

void write_idx(const std::string& path, const Dataset& data, int rows, int cols) {
  require(rows * cols == data.dim(), "write_idx: rows*cols != feature count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("idx: cannot write " + path);
  write_be32(out, 0x00000803u);
  write_be32(out, static_cast<std::uint32_t>(data.n()));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  for (int i = 0; i < data.n(); ++i)
    for (int j = 0; j < data.dim(); ++j) {
      unsigned char b = data.rows(i, j) > 0.5 ? 255 : 0;
      out.write(reinterpret_cast<char*>(&b), 1);
    }
}

}  // namespace vcd
