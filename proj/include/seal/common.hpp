#pragma once

#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace seal {

// Error hierarchy. The CLI maps these onto process exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A documented precondition was broken by the caller.
struct ContractViolation : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct InputError : Error {
  using Error::Error;
};

/// Failures that originate in a labeling backend (remote transport, replay misses, parse errors).
struct BackendError : Error {
  using Error::Error;
};

struct UnsupportedTask : BackendError {
  using BackendError::BackendError;
};

struct DecompositionError : BackendError {
  DecompositionError(const std::string& what, std::string raw)
      : BackendError(what), raw_response(std::move(raw)) {}
  std::string raw_response;
};

struct LabelingError : BackendError {
  LabelingError(const std::string& what, std::size_t index)
      : BackendError(what), state_index(index) {}
  std::size_t state_index;
};

// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

/// Unbiased draw in [0, n) from any 64-bit engine. Portable across standard libraries,
/// unlike std::uniform_int_distribution.
template <class Engine>
std::uint64_t uniform_below(Engine& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

/// Uniform double in [0, 1) with 53 random bits.
template <class Engine>
double uniform_unit(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// FNV-1a, 64 bit. Used for cache keys and content pinning, not for security.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace seal
