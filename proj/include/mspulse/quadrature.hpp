#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <type_traits>
#include <vector>

#include "mspulse/errors.hpp"

namespace mspulse::quad {

// 8-point Gauss-Legendre rule on [-1, 1], nodes ascending.
inline constexpr double gl8_nodes[8] = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
    -0.1834346424956498, 0.1834346424956498, 0.5255324099163290,
    0.7966664774136267, 0.9602898564975363};
inline constexpr double gl8_weights[8] = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
    0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
    0.2223810344533745, 0.1012285362903763};

template <class F>
auto gl8(F&& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  auto acc = f(mid + half * gl8_nodes[0]) * (half * gl8_weights[0]);
  for (int j = 1; j < 8; ++j)
    acc += f(mid + half * gl8_nodes[j]) * (half * gl8_weights[j]);
  return acc;
}

// Panel decomposition of [a, b]: splits at the given interior breakpoints and
// then subdivides every piece so no panel is wider than max_width. With the
// 8-point rule and max_width = period/5 this places >= 40 nodes per period.
struct PanelPlan {
  std::vector<double> edges; // ascending, edges.front() = a, edges.back() = b

  static PanelPlan build(double a, double b, std::span<const double> interior,
                         double max_width) {
    if (!(b > a)) throw DomainError("panel plan requires b > a");
    if (!(max_width > 0)) throw DomainError("panel width must be positive");
    std::vector<double> cuts;
    cuts.push_back(a);
    for (double x : interior)
      if (x > a && x < b) cuts.push_back(x);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    PanelPlan plan;
    plan.edges.push_back(a);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double lo = cuts[i], hi = cuts[i + 1];
      if (hi - lo < 1e-300) continue;
      const int nsub = std::max(1, (int)std::ceil((hi - lo) / max_width));
      for (int k = 1; k <= nsub; ++k)
        plan.edges.push_back(lo + (hi - lo) * k / nsub);
    }
    return plan;
  }

  std::size_t n_panels() const { return edges.size() - 1; }
};

template <class F>
auto integrate(F&& f, const PanelPlan& plan) {
  auto acc = gl8(f, plan.edges[0], plan.edges[1]);
  for (std::size_t p = 1; p < plan.n_panels(); ++p)
    acc += gl8(f, plan.edges[p], plan.edges[p + 1]);
  return acc;
}

// Uniform time grid for cumulative tables.
struct UniformGrid {
  double t0 = 0.0;
  double dt = 0.0;
  int n_steps = 0;

  UniformGrid() = default;
  UniformGrid(double start, double end, int steps)
      : t0(start), dt((end - start) / steps), n_steps(steps) {
    if (steps < 1 || !(end > start))
      throw DomainError("uniform grid requires end > start and >= 1 step");
  }

  int n_points() const { return n_steps + 1; }
  double time(int k) const { return t0 + dt * k; }

  std::vector<double> times() const {
    std::vector<double> t(n_points());
    for (int k = 0; k <= n_steps; ++k) t[k] = time(k);
    return t;
  }

  // Grid sized so each oscillation period 2*pi/mu carries at least
  // samples_per_period steps.
  static UniformGrid for_gate(double t0, double tf, double mu,
                              int samples_per_period) {
    const double period = 2.0 * constants_pi() / mu;
    const int n = std::max(samples_per_period,
                           (int)std::ceil((tf - t0) / period * samples_per_period));
    return UniformGrid(t0, tf, n);
  }

 private:
  static constexpr double constants_pi() { return 3.14159265358979323846; }
};

// Neumaier compensated accumulator; keeps cumulative tables reproducible to
// well below the 1e-10 tolerances used downstream.
template <class T>
struct Kahan {
  T sum{};
  T comp{};
  void add(const T& v) {
    const T t = sum + v;
    if constexpr (std::is_same_v<T, double>) {
      comp += (std::abs(sum) >= std::abs(v)) ? (sum - t) + v : (v - t) + sum;
    } else {
      // componentwise for complex
      comp += T((std::abs(sum.real()) >= std::abs(v.real()))
                    ? (sum.real() - t.real()) + v.real()
                    : (v.real() - t.real()) + sum.real(),
                (std::abs(sum.imag()) >= std::abs(v.imag()))
                    ? (sum.imag() - t.imag()) + v.imag()
                    : (v.imag() - t.imag()) + sum.imag());
    }
    sum = t;
  }
  T value() const { return sum + comp; }
};

// Cumulative integral of f over the grid: result[k] = int_{t0}^{t_k} f.
// Each step is integrated with the 8-point rule, so the table inherits
// Gauss accuracy rather than trapezoid accuracy.
template <class T, class F>
std::vector<T> cumulative(const UniformGrid& g, F&& f) {
  std::vector<T> table(g.n_points());
  Kahan<T> acc;
  table[0] = T{};
  for (int k = 0; k < g.n_steps; ++k) {
    acc.add(gl8(f, g.time(k), g.time(k + 1)));
    table[k + 1] = acc.value();
  }
  return table;
}

} // namespace mspulse::quad
