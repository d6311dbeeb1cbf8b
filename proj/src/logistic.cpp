#include "ctmsm/logistic.hpp"

#include <cmath>

namespace ctmsm {

double LogisticFit::predict(const double* x, std::size_t p) const {
  double eta = beta[0];
  for (std::size_t j = 0; j < p; ++j) eta += beta[static_cast<Eigen::Index>(j + 1)] * x[j];
  return logistic(eta);
}

namespace {

double log_likelihood(const Matrix& Z, const Vector& y, const Vector& beta) {
  const Vector eta = Z * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    // log(1 + e^eta) without overflow
    const double softplus = eta[i] > 0 ? eta[i] + std::log1p(std::exp(-eta[i])) : std::log1p(std::exp(eta[i]));
    ll += y[i] * eta[i] - softplus;
  }
  return ll;
}

}  // namespace

LogisticFit fit_logistic(const RowMatrix& X, const std::vector<std::uint8_t>& y, double tolerance,
                         int max_iterations) {
  const auto n = X.rows();
  if (static_cast<std::size_t>(n) != y.size()) fail(ErrorKind::Config, "logistic inputs differ in length");
  // Constant columns are absorbed by the intercept and held at 0.
  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    if (n > 0 && X.col(j).maxCoeff() != X.col(j).minCoeff()) free.push_back(j);
  const auto p = static_cast<Eigen::Index>(free.size()) + 1;
  Matrix Z(n, p);
  Z.col(0).setOnes();
  for (Eigen::Index a = 1; a < p; ++a) Z.col(a) = X.col(free[static_cast<std::size_t>(a - 1)]);
  Vector yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv[i] = y[static_cast<std::size_t>(i)];
  const double events = yv.sum();
  if (events == 0.0 || events == static_cast<double>(n))
    fail(ErrorKind::Numerical, "separation detected: binary outcome is constant");

  Vector beta = Vector::Zero(p);
  beta[0] = std::log(events / (static_cast<double>(n) - events));
  double ll = log_likelihood(Z, yv, beta);
  for (int it = 0; it <= max_iterations; ++it) {
    const Vector mu = (Z * beta).unaryExpr([](double e) { return logistic(e); });
    const Vector score = Z.transpose() * (yv - mu);
    if (score.cwiseAbs().maxCoeff() < tolerance) {
      LogisticFit fit;
      fit.beta = Vector::Zero(X.cols() + 1);
      fit.beta[0] = beta[0];
      for (Eigen::Index a = 1; a < p; ++a) fit.beta[free[static_cast<std::size_t>(a - 1)] + 1] = beta[a];
      fit.iterations = it;
      return fit;
    }
    if (it == max_iterations) break;
    const Vector wts = mu.array() * (1.0 - mu.array());
    const Matrix info = Z.transpose() * wts.asDiagonal() * Z;
    const Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      fail(ErrorKind::Numerical, "non-identifiable covariates in logistic model");
    const Vector delta = ldlt.solve(score);
    double step = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half) {
      const Vector cand = beta + step * delta;
      const double ll_new = log_likelihood(Z, yv, cand);
      if (std::isfinite(ll_new) && ll_new >= ll - 1e-12 * (1.0 + std::abs(ll))) {
        beta = cand;
        ll = ll_new;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || beta.cwiseAbs().maxCoeff() > 30.0)
      fail(ErrorKind::Numerical, "separation detected in logistic model");
  }
  fail(ErrorKind::Numerical, "logistic model did not converge");
}

}  // namespace ctmsm
