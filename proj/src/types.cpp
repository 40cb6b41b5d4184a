#include "icupred/types.hpp"

#include <cstdio>
#include <cstdlib>

namespace icupred {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state) {
  for (unsigned char c : bytes) {
    state ^= static_cast<std::uint64_t>(c);
    state *= kFnvPrime;
  }
  return state;
}

std::uint64_t split_hash(std::uint64_t seed, std::string_view patient_id) {
  char seed_bytes[8];
  for (int i = 0; i < 8; ++i) {
    seed_bytes[i] = static_cast<char>((seed >> (8 * i)) & 0xff);
  }
  const std::uint64_t h = fnv1a64(std::string_view(seed_bytes, 8));
  return fnv1a64(patient_id, h);
}

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

double parse_double(std::string_view text) {
  if (text.empty()) {
    throw DataError("empty numeric field");
  }
  const std::string owned(text);
  char* end = nullptr;
  const double v = std::strtod(owned.c_str(), &end);
  if (end != owned.c_str() + owned.size()) {
    throw DataError("not a number: '" + owned + "'");
  }
  return v;
}

}  // namespace icupred
