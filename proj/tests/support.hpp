#pragma once

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>

#include "bearsync/errors.hpp"
#include "bearsync/rng.hpp"
#include "bearsync/simulation.hpp"

namespace testing {

using namespace bearsync;

// Runs f and reports the ErrorKind it threw; fails the test if nothing or a
// foreign exception was thrown.
inline ErrorKind thrown_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected a bearsync::Error");
  return ErrorKind::Io;
}

inline Mat3 random_matrix(Rng& rng) {
  Mat3 m;
  for (int i = 0; i < 9; ++i) m.data()[i] = rng.normal();
  return m;
}

// Rotation from the QR factor of a Gaussian matrix with a determinant fix.
inline Rotation3 qr_rotation(Rng& rng) {
  Eigen::HouseholderQR<Mat3> qr(random_matrix(rng));
  Mat3 q = qr.householderQ();
  if (q.determinant() < 0) q.col(0) = -q.col(0);
  return project_to_rotation(q);
}

inline Scenario scenario(double offset, double sigma, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.true_offset = offset;
  cfg.sigma = sigma;
  return make_scenario(cfg, seed);
}

inline double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace testing
