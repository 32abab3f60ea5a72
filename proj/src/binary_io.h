// Copyright (c) 2026 Aformer Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Little-endian encoders shared by the corpus and checkpoint containers.

#ifndef AFORMER_SRC_BINARY_IO_H_
#define AFORMER_SRC_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <ostream>
#include <span>
#include <string>

namespace aformer::binary {

inline void put_u16(std::ostream& os, uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

inline void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void put_f32s(std::ostream& os, std::span<const float> values) {
  for (float f : values) put_u32(os, std::bit_cast<uint32_t>(f));
}

inline uint16_t get_u16(const char* b) {
  return static_cast<uint16_t>(static_cast<uint8_t>(b[0]) |
                               (static_cast<uint8_t>(b[1]) << 8));
}

inline uint32_t get_u32(const char* b) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(b[i])) << (8 * i);
  return v;
}

inline void get_f32s(const char* b, std::span<float> out) {
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<float>(get_u32(b + 4 * i));
}

}  // namespace aformer::binary

#endif  // AFORMER_SRC_BINARY_IO_H_
