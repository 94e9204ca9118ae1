#pragma once

// Numeric defaults of the command-line tool. Library-level defaults
// (model shape, embedding threshold, loss weights) live in ModelConfig and
// EmbedConfig; the values below only cover run plumbing and experiment setup.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gcnv::defaults {

inline constexpr std::uint64_t kSeed = 0;
inline constexpr const char* kOutDir = "out";

// Synthetic phantoms.
inline constexpr std::size_t kPhantomExtent = 16;
inline constexpr double kPhantomBackground = 0.5;
inline constexpr std::size_t kPhantomModalities = 1;
inline const std::vector<double> kStatsBackgrounds{0.2, 0.5, 0.8};
inline constexpr std::size_t kStatsExtent = 32;

// Toy training.
inline constexpr std::size_t kTrainSteps = 50;
inline constexpr double kLearningRate = 0.05;

// End-to-end gradient check. Five-point differences with a step large enough
// to resolve gradients near 1e-9 above loss roundoff, small enough to rarely
// straddle a max-pool switch.
inline constexpr std::size_t kGradcheckExtent = 8;
inline constexpr double kGradcheckJitter = 0.3;
inline constexpr double kGradcheckStep = 3e-4;
inline constexpr int kGradcheckOrder = 4;
inline constexpr double kGradcheckTolerance = 1e-3;

// Evaluation.
inline constexpr double kNsdTolerance = 1.0;
inline constexpr double kAlpha = 0.05;

}  // namespace gcnv::defaults
