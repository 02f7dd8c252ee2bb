#ifndef MORSEM_RNG_H
#define MORSEM_RNG_H

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace morsem {

// All randomness in the library flows through this wrapper so that a run is
// reproducible from its seed alone. The raw engine is pinned to mt19937_64
// and distributions are hand-rolled (std:: distributions are not guaranteed
// to produce identical streams across library versions).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Box-Muller; one draw per call keeps the stream position predictable.
  double Gaussian() {
    double u1 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Uniform integer in [0, n).
  int UniformInt(int n) {
    return static_cast<int>(Uniform() * n) % n;
  }

  // Index drawn proportionally to probs (assumed to sum to ~1).
  int Categorical(const std::vector<double>& probs) {
    double r = Uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (r < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  template <typename T>
  void Shuffle(std::vector<T>* xs) {
    for (int i = static_cast<int>(xs->size()) - 1; i > 0; --i) {
      int j = UniformInt(i + 1);
      std::swap((*xs)[i], (*xs)[j]);
    }
  }

  // Stable derivation of per-item seeds from a run seed (splitmix64 step).
  static std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace morsem

#endif
