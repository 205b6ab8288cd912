#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace rshe {

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// What a stream is used for; keeps unrelated consumers of one seed apart.
enum class StreamPurpose : std::uint32_t {
  noise = 1,
  diagnostic = 2,
  quadrature = 3,
  test = 4,
};

/// Counter-based stream keyed by (seed, replica, step, purpose).
///
/// The sequence depends only on the key, never on which thread draws it or
/// in which order replicas run.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint32_t replica, std::uint32_t step,
               StreamPurpose purpose = StreamPurpose::noise);

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();
  void fill_normal(std::span<double> out);

  std::uint32_t next_u32();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rshe
