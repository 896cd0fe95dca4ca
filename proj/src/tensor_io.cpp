#include "qsr/tensor_io.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "qsrt I/O assumes a little-endian host");

namespace qsr {
namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}

std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

template <typename Scalar>
void write_impl(std::ostream& os, const GridT<Scalar>& grid, std::uint8_t dtype) {
  os.write("QSRT", 4);
  os.put(static_cast<char>(kQsrtVersion));
  os.put(static_cast<char>(dtype));
  os.put(2);  // rank
  put_u64(os, static_cast<std::uint64_t>(grid.rows()));
  put_u64(os, static_cast<std::uint64_t>(grid.cols()));
  os.write(reinterpret_cast<const char*>(grid.data()),
           static_cast<std::streamsize>(sizeof(Scalar)) * grid.size());
  if (!os) throw std::runtime_error("qsrt: write failed");
}

}  // namespace

void write_qsrt(std::ostream& os, const Grid& grid) { write_impl(os, grid, 0x01); }
void write_qsrt(std::ostream& os, const GridF& grid) { write_impl(os, grid, 0x00); }

Grid read_qsrt(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "QSRT", 4) != 0)
    throw std::runtime_error("qsrt: bad magic");
  const int version = is.get();
  if (version != kQsrtVersion)
    throw std::runtime_error("qsrt: unsupported version " + std::to_string(version));
  const int dtype = is.get();
  if (dtype != 0x00 && dtype != 0x01) throw std::runtime_error("qsrt: unknown dtype");
  const int rank = is.get();
  if (rank != 2) throw std::runtime_error("qsrt: expected rank-2 tensor, got rank " +
                                          std::to_string(rank));
  const std::uint64_t rows = get_u64(is);
  const std::uint64_t cols = get_u64(is);
  if (!is || rows == 0 || cols == 0) throw std::runtime_error("qsrt: bad dimensions");

  Grid out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const std::uint64_t n = rows * cols;
  if (dtype == 0x01) {
    is.read(reinterpret_cast<char*>(out.data()),
            static_cast<std::streamsize>(8 * n));
  } else {
    std::vector<float> buf(n);
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(4 * n));
    for (std::uint64_t i = 0; i < n; ++i) out.data()[i] = buf[i];
  }
  if (!is) {
    const std::uint64_t expect = n * (dtype == 0x01 ? 8 : 4);
    throw std::runtime_error("qsrt: truncated payload, expected " +
                             std::to_string(expect) + " bytes, got " +
                             std::to_string(is.gcount()));
  }
  return out;
}

void save_qsrt(const std::string& path, const Grid& grid) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_qsrt(os, grid);
}

Grid load_qsrt(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_qsrt(is);
}

void save_pgm16(const std::string& path, const Grid& grid) {
  const double lo = grid.minCoeff();
  const double hi = grid.maxCoeff();
  const double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "P5\n" << grid.cols() << " " << grid.rows() << "\n65535\n";
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      const auto v = static_cast<std::uint16_t>(std::lround((grid(i, j) - lo) * scale));
      os.put(static_cast<char>(v >> 8));  // PGM payload is big-endian
      os.put(static_cast<char>(v & 0xFF));
    }
  }

  nlohmann::json side{{"min", lo}, {"max", hi}, {"scale", scale}};
  std::ofstream js(path + ".json");
  js << side.dump(2) << "\n";
}

}  // namespace qsr
