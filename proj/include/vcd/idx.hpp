#pragma once

#include <string>

#include "vcd/dataset.hpp"

namespace vcd {

// IDX binary format: big-endian 32-bit magic (0x00000803 for 3-D image
// tensors, 0x00000801 for 1-D label vectors), big-endian dimension sizes,
// then an unsigned-byte payload in row-major order. Pixels are binarized:
// v/255 >= threshold maps to 1.
Dataset load_idx(const std::string& path, double binarize_threshold);

// Writes a 3-D unsigned-byte IDX image file (values 0 or 255 per the binary
// rows), for round-trip tests and synthetic corpora.
void write_idx(const std::string& path, const Dataset& data, int rows, int cols);

}  // namespace vcd
