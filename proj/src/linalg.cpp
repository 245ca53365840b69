#include "arlp/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace arlp::linalg {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488;
}

int svec_order(int len) {
  int order = static_cast<int>(std::floor(std::sqrt(2.0 * len)));
  for (int n = std::max(0, order - 2); n <= order + 2; ++n) {
    if (n * (n + 1) / 2 == len) return n;
  }
  return -1;
}

int svec_index(int order, int i, int j) {
  if (j > i) std::swap(i, j);
  // column j contributes (order - j) entries, preceded by columns 0..j-1
  return j * order - j * (j - 1) / 2 + (i - j);
}

VectorXd svec(const MatrixXd& X) {
  const int n = static_cast<int>(X.rows());
  VectorXd v(svec_dim(n));
  int t = 0;
  for (int j = 0; j < n; ++j) {
    v[t++] = X(j, j);
    for (int i = j + 1; i < n; ++i) v[t++] = kSqrt2 * X(i, j);
  }
  return v;
}

MatrixXd smat(const VectorXd& v) {
  const int n = svec_order(static_cast<int>(v.size()));
  if (n < 0) throw std::invalid_argument("smat: length is not triangular");
  MatrixXd X(n, n);
  int t = 0;
  for (int j = 0; j < n; ++j) {
    X(j, j) = v[t++];
    for (int i = j + 1; i < n; ++i) {
      const double x = v[t++] / kSqrt2;
      X(i, j) = x;
      X(j, i) = x;
    }
  }
  return X;
}

VectorXd sym_eigenvalues(const MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double min_eigenvalue(const MatrixXd& S) {
  if (S.rows() == 0) return 0.0;
  return sym_eigenvalues(S)[0];
}

void sym_eigen(const MatrixXd& S, VectorXd& w, MatrixXd& V) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  w = es.eigenvalues();
  V = es.eigenvectors();
}

// -- Rng ---------------------------------------------------------------

namespace {
std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t s = seed;
  for (auto& w : state_) w = splitmix64(s);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 1e-300) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 6.283185307179586476925 * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  // rejection to avoid modulo bias
  const std::uint64_t limit = n * (UINT64_MAX / n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

VectorXd Rng::unit_direction(int dim) {
  VectorXd v(dim);
  double norm = 0.0;
  do {
    for (int i = 0; i < dim; ++i) v[i] = gaussian();
    norm = v.norm();
  } while (norm < 1e-12);
  return v / norm;
}

VectorXd Rng::ball_point(int dim) {
  const double radius = std::pow(uniform(), 1.0 / dim);
  return radius * unit_direction(dim);
}

}  // namespace arlp::linalg
