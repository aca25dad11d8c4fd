#ifndef RYDCTL_MQDT_HPP
#define RYDCTL_MQDT_HPP

// Five-channel MQDT model of the 6p1/2 ns / nd autoionizing series with a
// single 6s1/2 ep1/2 continuum: reaction matrices, effective quantum numbers
// and the closed-channel amplitudes of the incoming-wave solution.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rydctl/constants.hpp"
#include "rydctl/errors.hpp"

namespace rydctl::mqdt {

enum class JBlock { J0 = 0, J1 = 1 };

inline int block_size(JBlock j) { return j == JBlock::J0 ? 2 : 3; }

/// Maps x into (-0.5, 0.5] by an integer shift.
inline double fold_unit(double x) { return x - std::ceil(x - 0.5); }

/// Distance from x to the nearest half-integer.
inline double distance_to_half_integer(double x) {
  return std::abs(x - (std::floor(x) + 0.5));
}

/// Symmetric matrix of quantum defects for one J block.
///
/// Values are stored exactly as given. K = tan(pi mu) only depends on the
/// eigenvalues of mu modulo 1, so canonical() folds the eigenvalues into
/// (-0.5, 0.5]; every entry of the folded matrix then has magnitude <= 0.5.
class MuMatrix {
public:
  MuMatrix(JBlock j, Eigen::MatrixXd values) : j_(j), values_(std::move(values)) {
    const int n = block_size(j_);
    if (values_.rows() != n || values_.cols() != n)
      throw InputError("mu matrix for J=" + std::to_string(static_cast<int>(j_)) +
                       " must be " + std::to_string(n) + "x" + std::to_string(n));
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < r; ++c)
        if (values_(r, c) != values_(c, r))
          throw InputError("mu matrix is not symmetric");
    if (!values_.allFinite()) throw InputError("mu matrix has non-finite entries");
  }

  /// Builds a block from its upper triangle in row-major order
  /// (3 values for J=0, 6 for J=1).
  static MuMatrix from_upper(JBlock j, const std::vector<double> &upper) {
    const int n = block_size(j);
    if (static_cast<int>(upper.size()) != n * (n + 1) / 2)
      throw InputError("wrong number of upper-triangle mu entries");
    Eigen::MatrixXd m(n, n);
    std::size_t k = 0;
    for (int r = 0; r < n; ++r)
      for (int c = r; c < n; ++c) {
        m(r, c) = upper[k];
        m(c, r) = upper[k];
        ++k;
      }
    return MuMatrix(j, std::move(m));
  }

  std::vector<double> upper() const {
    std::vector<double> out;
    for (int r = 0; r < size(); ++r)
      for (int c = r; c < size(); ++c) out.push_back(values_(r, c));
    return out;
  }

  JBlock block() const { return j_; }
  int size() const { return static_cast<int>(values_.rows()); }
  const Eigen::MatrixXd &values() const { return values_; }

  MuMatrix canonical() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(values_);
    Eigen::VectorXd lambda = es.eigenvalues();
    bool inside = true;
    for (int i = 0; i < lambda.size(); ++i) {
      const double f = fold_unit(lambda(i));
      inside = inside && f == lambda(i);
      lambda(i) = f;
    }
    if (inside) return *this;
    Eigen::MatrixXd m = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
    m = 0.5 * (m + m.transpose()).eval();
    return MuMatrix(j_, m);
  }

  bool operator==(const MuMatrix &o) const { return j_ == o.j_ && values_ == o.values_; }

private:
  JBlock j_;
  Eigen::MatrixXd values_;
};

struct Channel {
  std::string label;
  bool open;
  std::string threshold;
};

/// Ordered channel list; index 0 is the single open channel and index 1 the
/// 6p1/2 ns1/2 channel whose amplitude enters the ICE matrix element.
struct ChannelSet {
  JBlock block;
  std::vector<Channel> channels;

  static ChannelSet for_block(JBlock j) {
    ChannelSet s{j, {{"6s1/2 ep1/2", true, "6s1/2"}, {"6p1/2 ns1/2", false, "6p1/2"}}};
    if (j == JBlock::J1) s.channels.push_back({"6p1/2 nd3/2", false, "6p1/2"});
    return s;
  }

  int open_count() const {
    int n = 0;
    for (const auto &c : channels) n += c.open ? 1 : 0;
    return n;
  }
};

struct ThresholdSet {
  double ionization_limit_cm; // 6p1/2 ion-core threshold
  double e75_cm = 50421.0303;
  double rydberg_cm = constants::rydberg_yb_cm();
  double nu0 = 70.561;
};

/// K = tan(pi mu) as a matrix function, via the eigendecomposition of mu.
inline Eigen::MatrixXd k_matrix(const Eigen::MatrixXd &mu) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mu);
  Eigen::VectorXd t(mu.rows());
  for (int i = 0; i < t.size(); ++i) {
    const double lambda = es.eigenvalues()(i);
    if (distance_to_half_integer(lambda) < 1e-9)
      throw NearPole("mu eigenvalue " + std::to_string(lambda) + " is at a pole of tan(pi x)");
    t(i) = std::tan(constants::pi * lambda);
  }
  Eigen::MatrixXd k = es.eigenvectors() * t.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (k + k.transpose());
}

inline Eigen::MatrixXd k_matrix(const MuMatrix &mu) { return k_matrix(mu.values()); }

/// Effective quantum number relative to the 6p1/2 threshold.
inline double effective_nu(double energy_cm, const ThresholdSet &th) {
  if (!(energy_cm < th.ionization_limit_cm))
    throw AboveThreshold("E = " + std::to_string(energy_cm) + " cm^-1 is not below the 6p1/2 limit");
  return std::sqrt(th.rydberg_cm / (th.ionization_limit_cm - energy_cm));
}

/// Energy (cm^-1) at which the effective quantum number equals nu.
inline double energy_at_nu(double nu, const ThresholdSet &th) {
  return th.ionization_limit_cm - th.rydberg_cm / (nu * nu);
}

/// Adjugate (transposed cofactor matrix) of a small square matrix.
inline Eigen::MatrixXd adjugate(const Eigen::MatrixXd &m) {
  const Eigen::Index n = m.rows();
  if (n == 1) return Eigen::MatrixXd::Ones(1, 1);
  if (n == 2) {
    Eigen::MatrixXd a(2, 2);
    a << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
    return a;
  }
  Eigen::MatrixXd a(n, n);
  Eigen::MatrixXd minor(n - 1, n - 1);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index r = 0, rr = 0; r < n; ++r) {
        if (r == i) continue;
        for (Eigen::Index c = 0, cc = 0; c < n; ++c) {
          if (c == j) continue;
          minor(rr, cc++) = m(r, c);
        }
        ++rr;
      }
      a(j, i) = (((i + j) % 2) ? -1.0 : 1.0) * minor.determinant();
    }
  return a;
}

struct ClosedChannelSolution {
  double tau;               // eigenphase of the open channel, tan(pi tau) = K_phys
  double k_physical;        // reactance after closed-channel elimination
  Eigen::VectorXd z_closed; // one entry per closed channel, in channel order
};

/// Eliminates the closed channels (all attached to the same threshold, so
/// they share nu) from the reactance matrix K whose row/column 0 is the
/// open channel.
///
/// With M = K_cc + tan(pi nu) I, D = det M and N = K_oc adj(M) K_co:
///   K_phys = K_oo - N / D
///   Z      = -adj(M) K_co / sqrt(D^2 + (K_oo D - N)^2)
/// The second form stays finite through D = 0 and equals
/// -cos(pi tau) M^-1 K_co with pi tau = atan2(K_oo D - N, D).
inline ClosedChannelSolution closed_channel_solution(const Eigen::MatrixXd &k, double nu) {
  const Eigen::Index n = k.rows();
  if (n < 2 || k.cols() != n) throw InputError("K must be square with at least one closed channel");
  const Eigen::Index nc = n - 1;
  const double koo = k(0, 0);
  const Eigen::VectorXd kco = k.block(1, 0, nc, 1);
  Eigen::MatrixXd m = k.block(1, 1, nc, nc);
  m.diagonal().array() += std::tan(constants::pi * nu);

  const double d = m.determinant();
  const Eigen::MatrixXd adj = adjugate(m);
  const Eigen::VectorXd adj_kco = adj * kco;
  const double num = kco.dot(adj_kco);
  const double y = koo * d - num;
  const double norm2 = d * d + y * y;
  if (norm2 < 1e-300) throw Degenerate("det(M) and K_oo det(M) - N vanish simultaneously");
  const double norm = std::sqrt(norm2);

  ClosedChannelSolution out;
  out.tau = std::atan2(y, d) / constants::pi;
  out.k_physical = d != 0.0 ? y / d : std::copysign(INFINITY, y);
  out.z_closed = -adj_kco / norm;
  return out;
}

/// 6p1/2 threshold placed so that nu(E_75 + f_resonance) = nu0.
inline double calibrate_threshold(double e75_cm, double f_resonance_hz, double nu0, double rydberg_cm) {
  if (!(e75_cm > 0.0) || !(f_resonance_hz > 0.0) || !(nu0 > 0.0) || !(rydberg_cm > 0.0))
    throw InputError("calibrate_threshold requires positive inputs");
  return e75_cm + constants::hz_to_cm(f_resonance_hz) + rydberg_cm / (nu0 * nu0);
}

/// Complete parameterization of the spectrum model.
struct ChannelModel {
  MuMatrix mu_j0;
  MuMatrix mu_j1;
  double e75_cm = 50421.0303;
  double nu0 = 70.561;
  double f_plus_thz = 811.29150;
  double delta_plus_ghz = -0.73;

  /// Frequency of the main ICE resonance, f+ + Delta+, in Hz.
  double resonance_hz() const { return f_plus_thz * 1e12 + delta_plus_ghz * 1e9; }

  ThresholdSet thresholds() const {
    ThresholdSet th{0.0, e75_cm, constants::rydberg_yb_cm(), nu0};
    th.ionization_limit_cm = calibrate_threshold(e75_cm, resonance_hz(), nu0, th.rydberg_cm);
    return th;
  }

  /// Best-fit quantum defects of the five-channel model.
  static ChannelModel reference() {
    return ChannelModel{
        MuMatrix::from_upper(JBlock::J0, {8.58074e-3, 1.71383e-1, -4.83877e-1}),
        MuMatrix::from_upper(JBlock::J1, {3.68692e-2, -1.37765, 4.42814e-2, -1.35495e-2,
                                          -7.41744e-1, 1.02353e-2})};
  }
};

inline nlohmann::json to_json(const ChannelModel &m) {
  auto rows = [](const MuMatrix &mu) {
    nlohmann::json a = nlohmann::json::array();
    for (int r = 0; r < mu.size(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < mu.size(); ++c) row.push_back(mu.values()(r, c));
      a.push_back(row);
    }
    return a;
  };
  return nlohmann::json{{"mu_j0", rows(m.mu_j0)},     {"mu_j1", rows(m.mu_j1)},
                        {"E_75_cm", m.e75_cm},        {"nu0", m.nu0},
                        {"f_plus_thz", m.f_plus_thz}, {"delta_plus_ghz", m.delta_plus_ghz}};
}

inline ChannelModel model_from_json(const nlohmann::json &j) {
  auto mu = [&](const char *key, JBlock block) {
    if (!j.contains(key)) throw InputError(std::string("model is missing '") + key + "'");
    const auto &a = j.at(key);
    const int n = block_size(block);
    if (!a.is_array() || static_cast<int>(a.size()) != n)
      throw InputError(std::string("'") + key + "' must be an " + std::to_string(n) + "x" +
                       std::to_string(n) + " array");
    Eigen::MatrixXd m(n, n);
    for (int r = 0; r < n; ++r) {
      if (!a[r].is_array() || static_cast<int>(a[r].size()) != n)
        throw InputError(std::string("'") + key + "' row has wrong length");
      for (int c = 0; c < n; ++c) m(r, c) = a[r][c].get<double>();
    }
    return MuMatrix(block, m);
  };
  ChannelModel m{mu("mu_j0", JBlock::J0), mu("mu_j1", JBlock::J1)};
  m.e75_cm = j.value("E_75_cm", m.e75_cm);
  m.nu0 = j.value("nu0", m.nu0);
  m.f_plus_thz = j.value("f_plus_thz", m.f_plus_thz);
  m.delta_plus_ghz = j.value("delta_plus_ghz", m.delta_plus_ghz);
  return m;
}

inline ChannelModel load_model(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file " + path);
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception &e) {
    throw InputError("model file " + path + ": " + e.what());
  }
}

} // namespace rydctl::mqdt

#endif // RYDCTL_MQDT_HPP
