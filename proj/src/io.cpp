// SPDX-License-Identifier: Apache-2.0

#include "xlmimo/io.hpp"

#include <fstream>
#include <vector>

namespace xlm::io {

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open file for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = fnv1a(buf.data(), static_cast<std::size_t>(is.gcount()), h);
  }
  return h;
}

}  // namespace xlm::io
