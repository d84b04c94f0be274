// Copyright 2026 The dncprep Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dncprep {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;

/// Thrown when inputs violate an operation's preconditions.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when two objects that must share a Hilbert space do not.
class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// An iterative method hit its iteration cap without meeting its tolerance.
class ConvergenceFailure : public std::runtime_error {
 public:
  ConvergenceFailure(const std::string& what, int iterations, double residual)
      : std::runtime_error(what), iterations_(iterations), residual_(residual) {}
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

/// A node's ground level is degenerate, so the merge step is ill-defined.
class DegenerateSpectrum : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decimal rendering used by every CSV writer: 17 significant digits.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

// splitmix64 finalizer; used to derive independent per-run seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace dncprep
