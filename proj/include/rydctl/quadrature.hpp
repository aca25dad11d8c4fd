#ifndef RYDCTL_QUADRATURE_HPP
#define RYDCTL_QUADRATURE_HPP

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace rydctl::quadrature {

struct Result {
  double value = 0.0;
  double error = 0.0;
  double l1 = 0.0;
  std::size_t segments = 0;
  bool converged = false;
};

/// Globally adaptive 61-point Gauss-Kronrod integration over consecutive
/// breakpoints. The segment with the largest error estimate is bisected
/// until the summed error is below rel_tol times the integral of |f|.
/// Endpoints are never evaluated. Summation order depends only on the
/// breakpoints, so results are reproducible.
template <typename F>
Result integrate(F &&f, const std::vector<double> &breaks, double rel_tol,
                 std::size_t max_segments = 20000) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  struct Segment {
    double a, b, value, error, l1;
  };
  auto eval = [&](double a, double b) {
    Segment s{a, b, 0.0, 0.0, 0.0};
    s.value = GK::integrate(f, a, b, 0, 0.0, &s.error, &s.l1);
    return s;
  };

  std::vector<Segment> segs;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    if (breaks[i + 1] > breaks[i]) segs.push_back(eval(breaks[i], breaks[i + 1]));

  auto by_error = [&](std::size_t x, std::size_t y) { return segs[x].error < segs[y].error; };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(by_error)> heap(by_error);
  double err = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    heap.push(i);
    err += segs[i].error;
    l1 += segs[i].l1;
  }

  Result r;
  while (!heap.empty()) {
    if (err <= rel_tol * l1) {
      r.converged = true;
      break;
    }
    if (segs.size() >= max_segments) break;
    const std::size_t i = heap.top();
    heap.pop();
    const Segment old = segs[i];
    const double mid = 0.5 * (old.a + old.b);
    if (!(mid > old.a && mid < old.b)) break;
    segs[i] = eval(old.a, mid);
    segs.push_back(eval(mid, old.b));
    err += segs[i].error + segs.back().error - old.error;
    l1 += segs[i].l1 + segs.back().l1 - old.l1;
    heap.push(i);
    heap.push(segs.size() - 1);
  }

  std::sort(segs.begin(), segs.end(), [](const Segment &x, const Segment &y) { return x.a < y.a; });
  // Pairwise summation in abscissa order.
  std::vector<double> v(segs.size()), e(segs.size()), a(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    v[i] = segs[i].value;
    e[i] = segs[i].error;
    a[i] = segs[i].l1;
  }
  auto pairwise = [](std::vector<double> &x) {
    for (std::size_t stride = 1; stride < x.size(); stride *= 2)
      for (std::size_t i = 0; i + stride < x.size(); i += 2 * stride) x[i] += x[i + stride];
    return x.empty() ? 0.0 : x[0];
  };
  r.value = pairwise(v);
  r.error = pairwise(e);
  r.l1 = pairwise(a);
  r.segments = segs.size();
  r.converged = r.converged || r.error <= rel_tol * r.l1;
  return r;
}

} // namespace rydctl::quadrature

#endif // RYDCTL_QUADRATURE_HPP
