#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace mpath {

// Incremental SHA-256 (FIPS 180-4). Used for frozen-parameter hashing and
// lexicon fingerprints in metric reports.
class Sha256 {
 public:
  Sha256() { reset(); }

  void reset();
  void update(const void* bytes, size_t len);
  // finalizes and returns lowercase hex digest; object must be reset() to reuse
  std::string hex_digest();

 private:
  void process_block(const uint8_t* block);

  uint32_t h_[8];
  uint8_t buf_[64];
  size_t buf_len_ = 0;
  uint64_t total_len_ = 0;
};

std::string sha256_hex(const void* bytes, size_t len);
std::string sha256_hex(const std::string& s);

}  // namespace mpath
