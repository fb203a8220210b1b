#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "mspulse/errors.hpp"

namespace mspulse {

/**
 * C2 cubic spline on uniformly spaced knots with clamped ends
 * (zero first derivative at both endpoints). Stored in Hermite form
 * (knot values + knot first derivatives).
 */
class CubicSpline {
 public:
  CubicSpline() = default;

  CubicSpline(double t0, double tf, Eigen::VectorXd values)
      : t0_(t0), tf_(tf), y_(std::move(values)) {
    const int k = static_cast<int>(y_.size());
    if (k < 2) throw ConfigError("cubic spline needs at least two knots");
    if (!(tf > t0)) throw ConfigError("cubic spline needs tf > t0");
    h_ = (tf_ - t0_) / (k - 1);
    d_ = solve_clamped_derivatives(y_, h_);
  }

  double t0() const { return t0_; }
  double tf() const { return tf_; }
  int n_knots() const { return static_cast<int>(y_.size()); }
  double knot(int j) const { return t0_ + h_ * j; }
  const Eigen::VectorXd& values() const { return y_; }
  const Eigen::VectorXd& derivatives() const { return d_; }

  double operator()(double t) const {
    const auto [j, s] = locate(t);
    const double h00 = (2 * s - 3) * s * s + 1;
    const double h01 = (3 - 2 * s) * s * s;
    const double h10 = ((s - 2) * s + 1) * s;
    const double h11 = (s - 1) * s * s;
    return y_[j] * h00 + y_[j + 1] * h01 + h_ * (d_[j] * h10 + d_[j + 1] * h11);
  }

  double derivative(double t) const {
    const auto [j, s] = locate(t);
    const double g00 = 6 * s * (s - 1) / h_;
    const double g10 = (3 * s - 4) * s + 1;
    const double g11 = (3 * s - 2) * s;
    return (y_[j] - y_[j + 1]) * g00 + d_[j] * g10 + d_[j + 1] * g11;
  }

  double second_derivative(double t) const {
    const auto [j, s] = locate(t);
    return (y_[j] - y_[j + 1]) * (12 * s - 6) / (h_ * h_) +
           (d_[j] * (6 * s - 4) + d_[j + 1] * (6 * s - 2)) / h_;
  }

 private:
  std::pair<int, double> locate(double t) const {
    const double span = tf_ - t0_;
    if (t < t0_ - 16 * std::numeric_limits<double>::epsilon() * span ||
        t > tf_ + 16 * std::numeric_limits<double>::epsilon() * span)
      throw DomainError("evaluation time outside pulse interval");
    int j = static_cast<int>(std::floor((t - t0_) / h_));
    j = std::clamp(j, 0, n_knots() - 2);
    return {j, (t - knot(j)) / h_};
  }

  // Tridiagonal C2 system for knot derivatives with d_0 = d_last = 0:
  //   d_{j-1} + 4 d_j + d_{j+1} = 3 (y_{j+1} - y_{j-1}) / h
  static Eigen::VectorXd solve_clamped_derivatives(const Eigen::VectorXd& y, double h) {
    const int k = static_cast<int>(y.size());
    Eigen::VectorXd d = Eigen::VectorXd::Zero(k);
    const int m = k - 2; // interior unknowns
    if (m <= 0) return d;
    std::vector<double> diag(m, 4.0), rhs(m);
    for (int j = 0; j < m; ++j) rhs[j] = 3.0 * (y[j + 2] - y[j]) / h;
    // Thomas algorithm, sub/super diagonals are all 1
    for (int j = 1; j < m; ++j) {
      const double w = 1.0 / diag[j - 1];
      diag[j] -= w;
      rhs[j] -= w * rhs[j - 1];
    }
    d[m] = rhs[m - 1] / diag[m - 1];
    for (int j = m - 2; j >= 0; --j) d[j + 1] = (rhs[j] - d[j + 2]) / diag[j];
    return d;
  }

  double t0_ = 0.0, tf_ = 1.0, h_ = 1.0;
  Eigen::VectorXd y_, d_;
};

/**
 * Smooth piecewise-cubic basis b_s(t), s = 1..n_seg, on evenly spaced knots
 * t_s = t0 + (tf - t0) s / (n_seg + 1). Every basis function vanishes together
 * with its first derivative at both ends and interpolates b_s(t_{s'}) =
 * delta_{ss'} at the interior knots.
 */
class SplineBasis {
 public:
  SplineBasis(double t0, double tf, int n_seg) : t0_(t0), tf_(tf), n_seg_(n_seg) {
    if (n_seg < 1) throw ConfigError("basis needs n_seg >= 1 free parameters");
    if (!(tf > t0)) throw ConfigError("basis needs tf > t0");
    const int k = n_seg + 2;
    knots_.resize(k);
    for (int j = 0; j < k; ++j) knots_[j] = t0 + (tf - t0) * j / (k - 1);
    b_.reserve(n_seg);
    for (int s = 0; s < n_seg; ++s) {
      Eigen::VectorXd y = Eigen::VectorXd::Zero(k);
      y[s + 1] = 1.0;
      b_.emplace_back(t0, tf, std::move(y));
    }
  }

  double t0() const { return t0_; }
  double tf() const { return tf_; }
  int size() const { return n_seg_; }
  const std::vector<double>& knots() const { return knots_; }

  double eval(int s, double t) const { return b_[s](t); }
  const CubicSpline& basis_function(int s) const { return b_[s]; }

  // The combined spline sum_s c_s b_s(t); same linear solve applied to the
  // combined knot data, so it coincides with the basis expansion.
  CubicSpline combine(const Eigen::VectorXd& coeffs) const {
    if (coeffs.size() != n_seg_)
      throw ConfigError("coefficient count does not match basis size");
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n_seg_ + 2);
    y.segment(1, n_seg_) = coeffs;
    return CubicSpline(t0_, tf_, std::move(y));
  }

 private:
  double t0_, tf_;
  int n_seg_;
  std::vector<double> knots_;
  std::vector<CubicSpline> b_;
};

/// Default number of free spline parameters for an n-ion design:
/// 2 n_ions + 2 segments, i.e. 2 n_ions + 1 interior knots.
inline int default_segments(int n_ions) { return 2 * n_ions + 1; }

enum class PulseKind { linear, transformed, raw_samples };

inline const char* to_string(PulseKind k) {
  switch (k) {
    case PulseKind::linear: return "linear";
    case PulseKind::transformed: return "transformed";
    case PulseKind::raw_samples: return "raw-samples";
  }
  return "?";
}

/**
 * Amplitude envelope Omega(t) in rad/s on the gate interval. Either backed by
 * a spline-basis expansion (kind = linear) or by a dense uniform sampling
 * (kind = transformed / raw-samples); both evaluate through the same clamped
 * C2 spline, so Omega and Omega' vanish at both ends.
 */
class Pulse {
 public:
  Pulse() = default;

  static Pulse from_spline(const SplineBasis& basis, Eigen::VectorXd coeffs,
                           PulseKind kind = PulseKind::linear) {
    Pulse p;
    p.kind_ = kind;
    p.spline_ = basis.combine(coeffs);
    p.coeffs_ = std::move(coeffs);
    p.n_seg_ = basis.size();
    return p;
  }

  static Pulse from_samples(double t0, double tf, Eigen::VectorXd samples,
                            PulseKind kind = PulseKind::raw_samples) {
    if (samples.size() < 4) throw ConfigError("sampled pulse needs >= 4 samples");
    Pulse p;
    p.kind_ = kind;
    p.spline_ = CubicSpline(t0, tf, samples);
    p.samples_ = std::move(samples);
    return p;
  }

  static Pulse zero(double t0, double tf) {
    return from_samples(t0, tf, Eigen::VectorXd::Zero(4), PulseKind::raw_samples);
  }

  double operator()(double t) const { return spline_(t); }

  std::vector<double> evaluate_grid(std::span<const double> times) const {
    std::vector<double> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) out[i] = spline_(times[i]);
    return out;
  }

  PulseKind kind() const { return kind_; }
  double t0() const { return spline_.t0(); }
  double tf() const { return spline_.tf(); }
  int n_seg() const { return n_seg_; }
  const Eigen::VectorXd& coefficients() const { return coeffs_; }
  const Eigen::VectorXd& samples() const { return samples_; }
  const CubicSpline& spline() const { return spline_; }
  bool sample_backed() const { return samples_.size() > 0; }

  // Knot positions that downstream quadrature should not integrate across.
  std::vector<double> breakpoints() const {
    std::vector<double> br;
    const int k = spline_.n_knots();
    br.reserve(k);
    for (int j = 0; j < k; ++j) br.push_back(spline_.knot(j));
    return br;
  }

  double max_abs(int n_probe = 4096) const {
    double m = 0.0;
    for (int i = 0; i <= n_probe; ++i) {
      const double t = t0() + (tf() - t0()) * i / n_probe;
      m = std::max(m, std::abs(spline_(t)));
    }
    return m;
  }

  // True if the envelope takes both signs with non-negligible magnitude.
  bool changes_sign(int n_probe = 4096) const {
    const double scale = max_abs(n_probe);
    if (scale == 0.0) return false;
    bool pos = false, neg = false;
    for (int i = 0; i <= n_probe; ++i) {
      const double v = spline_(t0() + (tf() - t0()) * i / n_probe);
      if (v > 1e-9 * scale) pos = true;
      if (v < -1e-9 * scale) neg = true;
    }
    return pos && neg;
  }

 private:
  PulseKind kind_ = PulseKind::raw_samples;
  CubicSpline spline_;
  Eigen::VectorXd coeffs_;
  Eigen::VectorXd samples_;
  int n_seg_ = 0;
};

} // namespace mspulse
