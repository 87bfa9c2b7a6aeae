#pragma once

namespace offcut {

/// Accept a constraint correction when |C(X+u+d) - s| falls below this (mm).
inline constexpr double kResidualTolerance = 1e-9;

/// Rank cutoff for orthogonal factorizations, relative to the largest pivot.
inline constexpr double kRankTolerance = 1e-8;

}  // namespace offcut
