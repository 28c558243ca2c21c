#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace gpode {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Seeds are passed explicitly to every stochastic routine.
using Seed = std::uint64_t;

/// Independent stream of a base seed (splitmix64 finalizer).
inline Seed derive_seed(Seed base, std::uint64_t stream) {
  Seed z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace gpode
