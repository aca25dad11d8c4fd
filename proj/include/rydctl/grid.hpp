#ifndef RYDCTL_GRID_HPP
#define RYDCTL_GRID_HPP

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "rydctl/errors.hpp"

namespace rydctl::grid {

inline double parse_double(const std::string &s) {
  char *end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) throw InputError("not a number: '" + s + "'");
  return v;
}

inline std::vector<double> parse_list(const std::string &s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item));
  if (out.empty()) throw InputError("empty list");
  return out;
}

/// `start:stop:step`, both endpoints included when stop lies within half a
/// step of a grid point. Points are start + k step, not accumulated.
inline std::vector<double> linear(double start, double stop, double step) {
  if (!(step > 0.0)) throw InputError("grid step must be positive");
  if (stop < start) throw InputError("grid stop is below start");
  const auto n = static_cast<long>(std::floor((stop - start) / step + 0.5));
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(n + 1));
  for (long k = 0; k <= n; ++k) g.push_back(start + static_cast<double>(k) * step);
  return g;
}

/// Accepts `a:b:step`, `a:b` (n log-spaced points, for positive ranges) or a
/// comma-separated list. Lists must be strictly increasing.
inline std::vector<double> parse_grid(const std::string &spec, std::size_t default_log_points = 21) {
  if (spec.find(':') == std::string::npos) {
    auto v = parse_list(spec);
    for (std::size_t i = 1; i < v.size(); ++i)
      if (!(v[i] > v[i - 1])) throw InputError("grid values must be strictly increasing");
    return v;
  }
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() == 3) return linear(parse_double(parts[0]), parse_double(parts[1]), parse_double(parts[2]));
  if (parts.size() == 2) {
    const double lo = parse_double(parts[0]), hi = parse_double(parts[1]);
    if (!(lo > 0.0 && hi > lo)) throw InputError("two-field grid needs 0 < start < stop");
    std::vector<double> g(default_log_points);
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * double(i) / double(g.size() - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
  }
  throw InputError("malformed grid '" + spec + "'");
}

} // namespace rydctl::grid

#endif // RYDCTL_GRID_HPP
