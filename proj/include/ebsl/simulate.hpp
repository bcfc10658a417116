#pragma once

// Ring phantom: S generators on a circle of radius r_g, N electrodes on an
// outer circle, three sources A (one voxel), B (five voxels) and C (a
// truncated spatial Gaussian).  The lead field is the potential of a radial
// point dipole in an unbounded homogeneous medium.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "ebsl/errors.hpp"
#include "ebsl/problem.hpp"

namespace ebsl {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Source layout and time courses.  Spatial positions are generator indices
/// on the ring; times are sample indices.  Negative values select defaults
/// that scale with S and T (see resolve()).
struct SourceSpec {
  double amplitude_a = 1.0;
  double amplitude_b = 1.0;
  double amplitude_c = 1.0;
  long center_a = -1;        // default S/8
  long start_b = -1;         // default S/2 - 2, five generators
  long center_c = -1;        // default 3S/4
  double width_c = 2.0;      // spatial std of C, in generators
  double time_a = -1.0;      // default T/4
  double time_width_a = 1.5; // temporal std of A
  long onset_b = -1;         // default 5T/16
  long onset_c = -1;         // default 7T/16
  long duration_b = -1;      // default 5T/16
  long duration_c = -1;      // default 5T/16
  double freq_c = 0.1;       // cycles per sample
  double phase_c = 0.3;      // radians
  double radius_generators = 0.8;
  double radius_electrodes = 1.0;

  SourceSpec resolve(long S, long T) const {
    SourceSpec r = *this;
    if (r.center_a < 0) r.center_a = S / 8;
    if (r.start_b < 0) r.start_b = S / 2 - 2;
    if (r.center_c < 0) r.center_c = 3 * S / 4;
    if (r.time_a < 0) r.time_a = static_cast<double>(T) / 4.0;
    if (r.onset_b < 0) r.onset_b = 5 * T / 16;
    if (r.onset_c < 0) r.onset_c = 7 * T / 16;
    if (r.duration_b < 0) r.duration_b = 5 * T / 16;
    if (r.duration_c < 0) r.duration_c = 5 * T / 16;
    return r;
  }
};

struct RingPhantom {
  long S = 0;
  long N = 0;
  long T = 0;
  Matrix generator_positions;  // S x 2
  Matrix electrode_positions;  // N x 2
  Matrix K;                    // N x S
  Matrix J_true;               // S x T
  Mask support_true;           // S x T
  Matrix V_clean;              // N x T
};

/// Radial point-dipole lead field on two concentric circles.
inline Matrix ring_lead_field(const Matrix& electrodes, const Matrix& generators) {
  Matrix K(electrodes.rows(), generators.rows());
  for (Eigen::Index i = 0; i < generators.rows(); ++i) {
    const Eigen::Vector2d ri = generators.row(i).transpose();
    const Eigen::Vector2d n = ri.normalized();
    for (Eigen::Index e = 0; e < electrodes.rows(); ++e) {
      const Eigen::Vector2d d = electrodes.row(e).transpose() - ri;
      const double dist = d.norm();
      K(e, i) = d.dot(n) / (dist * dist * dist);
    }
  }
  return K;
}

inline Matrix ring_positions(long count, double radius) {
  Matrix p(count, 2);
  for (long i = 0; i < count; ++i) {
    const double th = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
    p(i, 0) = radius * std::cos(th);
    p(i, 1) = radius * std::sin(th);
  }
  return p;
}

inline constexpr double kSupportFraction = 0.01;

/// Half of the spatial support of patch C: generators within this ring
/// distance keep at least 1% of the peak.
inline long patch_c_half_width(double width_c) {
  return static_cast<long>(std::floor(width_c * std::sqrt(2.0 * std::log(100.0))));
}

namespace detail {

inline long ring_offset(long i, long center, long S) {
  long d = ((i - center) % S + S) % S;
  return d > S / 2 ? d - S : d;
}

inline void check_window(long onset, long duration, long T, const char* who) {
  if (duration < 1 || onset < 0 || onset + duration > T) {
    std::ostringstream os;
    os << who << " window [" << onset << ", " << onset + duration << ") does not fit in T = " << T;
    throw ConfigError(os.str());
  }
}

}  // namespace detail

inline RingPhantom make_phantom(long S, long N, long T, const SourceSpec& spec_in = {}) {
  if (S < 20) throw ConfigError("make_phantom: S must be >= 20");
  if (N < 4) throw ConfigError("make_phantom: N must be >= 4");
  if (T < 8) throw ConfigError("make_phantom: T must be >= 8");
  const SourceSpec spec = spec_in.resolve(S, T);
  if (!(spec.radius_generators > 0.0) || !(spec.radius_electrodes > spec.radius_generators))
    throw ConfigError("make_phantom: need 0 < radius_generators < radius_electrodes");
  if (!(spec.width_c > 0.0) || !(spec.time_width_a > 0.0)) throw ConfigError("make_phantom: widths must be > 0");
  detail::check_window(spec.onset_b, spec.duration_b, T, "source B");
  detail::check_window(spec.onset_c, spec.duration_c, T, "source C");

  // Spatial footprints; any generator claimed twice is an overlap.
  std::vector<int> owner(static_cast<std::size_t>(S), 0);
  auto claim = [&](long i, int who) {
    long idx = ((i % S) + S) % S;
    if (owner[static_cast<std::size_t>(idx)] != 0) {
      std::ostringstream os;
      os << "make_phantom: sources overlap at generator " << idx;
      throw ConfigError(os.str());
    }
    owner[static_cast<std::size_t>(idx)] = who;
  };
  claim(spec.center_a, 1);
  for (long j = 0; j < 5; ++j) claim(spec.start_b + j, 2);
  const long half_c = patch_c_half_width(spec.width_c);
  if (2 * half_c + 1 + 6 > S) throw ConfigError("make_phantom: patch C does not fit on the ring");
  for (long j = -half_c; j <= half_c; ++j) claim(spec.center_c + j, 3);

  RingPhantom ph;
  ph.S = S;
  ph.N = N;
  ph.T = T;
  ph.generator_positions = ring_positions(S, spec.radius_generators);
  ph.electrode_positions = ring_positions(N, spec.radius_electrodes);
  ph.K = ring_lead_field(ph.electrode_positions, ph.generator_positions);
  ph.J_true = Matrix::Zero(S, T);

  for (long t = 0; t < T; ++t) {
    const double tt = static_cast<double>(t);
    const double za = (tt - spec.time_a) / spec.time_width_a;
    const double course_a = spec.amplitude_a * std::exp(-0.5 * za * za);
    double course_b = 0.0;
    if (t >= spec.onset_b && t < spec.onset_b + spec.duration_b)
      course_b = spec.amplitude_b *
                 std::sin(std::numbers::pi * static_cast<double>(t - spec.onset_b + 1) /
                          static_cast<double>(spec.duration_b + 1));
    double course_c = 0.0;
    if (t >= spec.onset_c && t < spec.onset_c + spec.duration_c) {
      const double u = static_cast<double>(t - spec.onset_c);
      const double window = std::sin(std::numbers::pi * (u + 1.0) / static_cast<double>(spec.duration_c + 1));
      course_c = spec.amplitude_c * window * std::cos(2.0 * std::numbers::pi * spec.freq_c * u + spec.phase_c);
    }
    for (long i = 0; i < S; ++i) {
      double value = 0.0;
      switch (owner[static_cast<std::size_t>(i)]) {
        case 1:
          value = course_a;
          break;
        case 2:
          value = course_b;
          break;
        case 3: {
          const double z = static_cast<double>(detail::ring_offset(i, spec.center_c, S)) / spec.width_c;
          value = course_c * std::exp(-0.5 * z * z);
          break;
        }
        default:
          break;
      }
      ph.J_true(i, t) = value;
    }
  }
  // Cells under 1% of the peak are cut to zero, so the support is exactly the
  // set a 1% detector would flag on the truth itself.
  const double cut = kSupportFraction * ph.J_true.cwiseAbs().maxCoeff();
  ph.J_true = ph.J_true.unaryExpr([cut](double v) { return std::abs(v) < cut ? 0.0 : v; });
  ph.support_true = ph.J_true.array() != 0.0;
  ph.V_clean = ph.K * ph.J_true;
  return ph;
}

struct NoiseSpec {
  double peak_snr_db = 42.0;  // +inf means no noise
  std::uint64_t seed = 1;
};

/// The SNR presets used in the comparisons.
inline constexpr double kSnrPresets[] = {42.0, 38.0, 34.0};

struct NoisyData {
  Matrix V;
  double sigma = 0.0;
};

/// V = V_clean + eps, eps iid N(0, sigma^2), sigma = max|V_clean| 10^(-dB/20).
inline NoisyData add_noise(const Matrix& V_clean, const NoiseSpec& noise) {
  if (std::isnan(noise.peak_snr_db)) throw ConfigError("add_noise: peak_snr_db is NaN");
  const double peak = V_clean.cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) throw DomainError("add_noise: clean signal is identically zero, SNR undefined");
  NoisyData out;
  out.V = V_clean;
  if (std::isinf(noise.peak_snr_db) && noise.peak_snr_db > 0) return out;
  out.sigma = peak * std::pow(10.0, -noise.peak_snr_db / 20.0);
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> gauss(0.0, out.sigma);
  // Column-major fill order is part of the reproducibility contract.
  for (Eigen::Index t = 0; t < out.V.cols(); ++t)
    for (Eigen::Index e = 0; e < out.V.rows(); ++e) out.V(e, t) += gauss(rng);
  return out;
}

/// 2-norm condition number of K, from its singular values.
inline double condition_number(const Matrix& K) {
  Eigen::BDCSVD<Matrix> svd(K);
  const Vector& d = svd.singularValues();
  const double lo = d(d.size() - 1);
  return lo > 0.0 ? d(0) / lo : std::numeric_limits<double>::infinity();
}

}  // namespace ebsl
