// SPDX-License-Identifier: MIT
#pragma once

#include <iosfwd>
#include <string>

#include "cpd/tensor.hpp"

namespace cpd {

// Binary dense-tensor container.
// Layout: magic "DTEN", u16 version (= 1), u8 order, order x u64 dims,
// then the payload as f64 with the last index fastest. All integers and
// doubles are little-endian. Round trips are bit exact.

void write_dten(std::ostream& os, const DenseTensor& t);
DenseTensor read_dten(std::istream& is);

void save_dten(const std::string& path, const DenseTensor& t);
DenseTensor load_dten(const std::string& path);

}  // namespace cpd
