#ifndef QSR_TENSOR_IO_HPP
#define QSR_TENSOR_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qsr/grid.hpp"

namespace qsr {

// Binary tensor container ".qsrt":
//   magic "QSRT" | version 0x01 | dtype (0x00 = f32, 0x01 = f64) |
//   rank byte | rank x u64 LE dims | row-major LE payload.
inline constexpr std::uint8_t kQsrtVersion = 0x01;

void write_qsrt(std::ostream& os, const Grid& grid);
void write_qsrt(std::ostream& os, const GridF& grid);
Grid read_qsrt(std::istream& is);  // f32 payloads are widened to double

void save_qsrt(const std::string& path, const Grid& grid);
Grid load_qsrt(const std::string& path);

// 16-bit binary PGM, auto-scaled to the full range; the scale and
// offset go to <path>.json so the raster stays invertible.
void save_pgm16(const std::string& path, const Grid& grid);

}  // namespace qsr

#endif
