#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tnv {

template <class T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using Vec3 = Eigen::Matrix<T, 3, 1>;
using Vec3d = Vec3<double>;
using Mat4d = Eigen::Matrix4d;
using Mat3d = Eigen::Matrix3d;

/// Error taxonomy shared across the library. The C API and the CLI map
/// kinds onto status/exit codes (config->2, numeric->3, state->4).
class TnvError : public std::runtime_error {
 public:
  enum class Kind { config, invalid_input, numeric, state, io, parse };

  TnvError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline TnvError config_error(const std::string& msg) { return {TnvError::Kind::config, msg}; }
inline TnvError invalid_input(const std::string& msg) { return {TnvError::Kind::invalid_input, msg}; }
inline TnvError numeric_error(const std::string& msg) { return {TnvError::Kind::numeric, msg}; }
inline TnvError state_error(const std::string& msg) { return {TnvError::Kind::state, msg}; }
inline TnvError io_error(const std::string& msg) { return {TnvError::Kind::io, msg}; }
inline TnvError parse_error(const std::string& msg) { return {TnvError::Kind::parse, msg}; }

/// Deterministic RNG: mt19937_64 (sequence pinned by the standard) plus
/// explicit mappings. std::*_distribution are implementation-defined and
/// would break bitwise reproducibility, so they are not used anywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Lemire's multiply-shift; bias is < n/2^64.
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  /// Standard normal via Box-Muller (two uniforms per pair, no cached spare
  /// so the draw count stays predictable).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  std::string save_state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void load_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    if (is.fail()) throw parse_error("invalid RNG state string");
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tnv
