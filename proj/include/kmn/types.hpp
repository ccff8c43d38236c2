#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace kmn {

using Scalar = double;
using Index = Eigen::Index;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr Scalar kPi = 3.14159265358979323846;
inline constexpr Scalar kTwoPi = 2.0 * kPi;

// Error taxonomy. The CLI maps these to distinct exit codes, so every throw
// site should pick the class that matches what actually went wrong:
// bad arguments or config -> ValidationError, filesystem trouble -> IoError,
// numerical breakdown (divergence, degenerate densities) -> NumericError.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Manifold { real_line, circle };

inline std::string to_string(Manifold m) {
  return m == Manifold::real_line ? "real_line" : "circle";
}

inline Manifold manifold_from_string(const std::string& s) {
  if (s == "real_line") return Manifold::real_line;
  if (s == "circle") return Manifold::circle;
  throw ValidationError("unknown manifold tag: " + s);
}

// Wrap an angle into (-pi, pi]. fmod lands in (-2pi, 2pi), so one
// conditional shift on each side finishes the job; -pi itself maps to +pi.
inline Scalar wrap_angle(Scalar a) {
  a = std::fmod(a, kTwoPi);
  if (a <= -kPi)
    a += kTwoPi;
  else if (a > kPi)
    a -= kTwoPi;
  return a;
}

// Circular distance in [0, pi].
inline Scalar circ_dist(Scalar a, Scalar b) {
  return std::abs(wrap_angle(a - b));
}

}  // namespace kmn
