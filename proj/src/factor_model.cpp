#include "macrocast/factor_model.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "macrocast/errors.hpp"

namespace macrocast {

FactorPanel make_panel(const std::vector<TimeSeries>& series, bool standardize) {
  if (series.empty()) throw InvalidArgument("factor panel needs at least one series");
  Period lo = series.front().start(), hi = series.front().end();
  for (const auto& s : series) {
    if (s.empty()) throw DataError("series '" + s.id() + "' is empty");
    lo = std::max(lo, s.start());
    hi = std::min(hi, s.end());
  }
  if (hi < lo) throw DataError("panel series share no common span");
  const auto T = quarters_between(lo, hi) + 1;
  const auto N = static_cast<Eigen::Index>(series.size());
  FactorPanel p;
  p.start = lo;
  p.standardized = standardize;
  p.data.resize(T, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& s = series[static_cast<std::size_t>(i)];
    p.ids.push_back(s.id());
    p.data.col(i) = s.values().segment(*s.index_of(lo), T);
  }
  p.means = p.data.colwise().mean().transpose();
  p.transformed = p.data.rowwise() - p.means.transpose();
  p.stds = Eigen::VectorXd::Ones(N);
  if (standardize) {
    for (Eigen::Index i = 0; i < N; ++i) {
      const double sd = std::sqrt(p.transformed.col(i).squaredNorm() / static_cast<double>(T));
      if (!(sd > 0.0)) throw DataError("series '" + p.ids[static_cast<std::size_t>(i)] + "' is constant on the common span");
      p.stds[i] = sd;
      p.transformed.col(i) /= sd;
    }
  }
  return p;
}

namespace {

struct Spectrum {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // matching columns
  bool over_series = true;  // decomposition of the N x N covariance
};

Spectrum spectrum(const Eigen::MatrixXd& X) {
  const double T = static_cast<double>(X.rows());
  Spectrum s;
  s.over_series = X.cols() <= X.rows();
  const Eigen::MatrixXd C = s.over_series ? Eigen::MatrixXd(X.transpose() * X / T) : Eigen::MatrixXd(X * X.transpose() / T);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.info() != Eigen::Success) throw FitError("eigen-decomposition of the panel covariance failed");
  s.values = es.eigenvalues().reverse();
  s.vectors = es.eigenvectors().rowwise().reverse();
  return s;
}

}  // namespace

FactorFit extract_factors(const FactorPanel& panel, int r) {
  const auto& X = panel.transformed;
  const Eigen::Index T = X.rows(), N = X.cols();
  if (r < 1 || r > N) throw InvalidArgument("factor count must lie in [1, N]");
  if (T <= r) throw InvalidArgument("need more periods than factors");
  const auto sp = spectrum(X);
  const double total = sp.values.sum();
  const double tol = 1e-10 * std::max(sp.values[0], 0.0);
  Eigen::Index rank = 0;
  while (rank < sp.values.size() && sp.values[rank] > tol && sp.values[rank] > 0.0) ++rank;
  if (rank < r)
    throw FitError("panel rank deficient: effective rank " + std::to_string(rank) + " < requested " + std::to_string(r) +
                   " factors");

  FactorFit fit;
  fit.r = r;
  fit.means = panel.means;
  fit.stds = panel.stds;
  fit.explained_share = sp.values.head(std::min(N, T)).cwiseMax(0.0) / total;
  const double Td = static_cast<double>(T);
  if (sp.over_series) {
    const Eigen::VectorXd inv_sqrt = sp.values.head(r).cwiseSqrt().cwiseInverse();
    fit.factors = X * sp.vectors.leftCols(r) * inv_sqrt.asDiagonal();
  } else {
    fit.factors = std::sqrt(Td) * sp.vectors.leftCols(r);
  }
  fit.loadings = X.transpose() * fit.factors / Td;
  for (int k = 0; k < r; ++k) {
    Eigen::Index idx = 0;
    fit.loadings.col(k).cwiseAbs().maxCoeff(&idx);
    if (fit.loadings(idx, k) < 0.0) {
      fit.loadings.col(k) *= -1.0;
      fit.factors.col(k) *= -1.0;
    }
  }
  fit.innovation_cov = fit.factors.transpose() * fit.factors / Td;
  return fit;
}

int choose_factor_count(const FactorPanel& panel, double threshold, int cap) {
  const auto sp = spectrum(panel.transformed);
  const Eigen::Index N = panel.transformed.cols();
  const int limit = static_cast<int>(std::max<Eigen::Index>(1, std::min<Eigen::Index>(N - 1, cap)));
  const double total = sp.values.sum();
  double cum = 0.0;
  for (int r = 1; r <= limit; ++r) {
    cum += sp.values[r - 1] / total;
    if (cum >= threshold) return r;
  }
  return limit;
}

namespace {

struct VarEstimate {
  std::vector<Eigen::MatrixXd> coeffs;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd stderr_;
};

// OLS on rows [first, T) of F with p lags.
VarEstimate estimate_var(const Eigen::MatrixXd& F, int p, Eigen::Index first) {
  const Eigen::Index T = F.rows(), r = F.cols();
  const Eigen::Index n = T - first;
  VarEstimate est;
  if (p == 0) {
    const Eigen::MatrixXd Y = F.bottomRows(n);
    est.sigma = Y.transpose() * Y / static_cast<double>(n);
    return est;
  }
  Eigen::MatrixXd Z(n, r * p);
  for (Eigen::Index t = 0; t < n; ++t)
    for (int l = 1; l <= p; ++l) Z.block(t, (l - 1) * r, 1, r) = F.row(first + t - l);
  const Eigen::MatrixXd Y = F.bottomRows(n);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
  qr.setThreshold(1e-12);
  if (qr.rank() < r * p) throw FitError("singular regressor matrix in factor VAR(" + std::to_string(p) + ")");
  const Eigen::MatrixXd B = qr.solve(Y);  // (r p) x r
  const Eigen::MatrixXd U = Y - Z * B;
  est.sigma = U.transpose() * U / static_cast<double>(n);
  for (int l = 0; l < p; ++l) est.coeffs.push_back(B.middleRows(l * r, r).transpose());
  const double dof = static_cast<double>(std::max<Eigen::Index>(1, n - r * p));
  const Eigen::MatrixXd ZtZinv = (Z.transpose() * Z).inverse();
  const Eigen::VectorXd s2 = (U.transpose() * U).diagonal() / dof;
  est.stderr_.resize(r * p, r);
  for (Eigen::Index i = 0; i < r * p; ++i)
    for (Eigen::Index j = 0; j < r; ++j) est.stderr_(i, j) = std::sqrt(ZtZinv(i, i) * s2[j]);
  return est;
}

double companion_radius(const std::vector<Eigen::MatrixXd>& coeffs, Eigen::Index r) {
  const auto p = static_cast<Eigen::Index>(coeffs.size());
  if (p == 0) return 0.0;
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(r * p, r * p);
  for (Eigen::Index l = 0; l < p; ++l) C.block(0, l * r, r, r) = coeffs[static_cast<std::size_t>(l)];
  if (p > 1) C.block(r, 0, r * (p - 1), r * (p - 1)).setIdentity();
  Eigen::EigenSolver<Eigen::MatrixXd> es(C, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

FactorFit fit_factor_var(FactorFit fit, int p) {
  if (p < 0) throw InvalidArgument("VAR order must be >= 0");
  const Eigen::Index T = fit.factors.rows();
  if (T <= static_cast<Eigen::Index>(fit.r) * p + 1)
    throw InvalidArgument("need T > r*p + 1 observations for the factor VAR");
  auto est = estimate_var(fit.factors, p, p);
  fit.var_order = p;
  fit.var_coeffs = std::move(est.coeffs);
  fit.innovation_cov = std::move(est.sigma);
  fit.coeff_stderr = std::move(est.stderr_);
  fit.spectral_radius = companion_radius(fit.var_coeffs, fit.r);
  fit.stationary = fit.spectral_radius < 1.0;
  fit.dynamics_fitted = true;
  return fit;
}

int select_var_order(const FactorFit& fit, int max_p) {
  const Eigen::Index T = fit.factors.rows();
  const double r = static_cast<double>(fit.r);
  int best = 0;
  double best_aic = std::numeric_limits<double>::infinity();
  for (int p = 0; p <= max_p; ++p) {
    if (T - max_p <= static_cast<Eigen::Index>(fit.r) * p + 1) break;
    try {
      const auto est = estimate_var(fit.factors, p, max_p);
      const double n = static_cast<double>(T - max_p);
      const double det = est.sigma.determinant();
      if (!(det > 0.0)) continue;
      const double aic = std::log(det) + 2.0 * p * r * r / n;
      if (aic < best_aic - 1e-12) {
        best_aic = aic;
        best = p;
      }
    } catch (const FitError&) {
    }
  }
  return best;
}

Eigen::VectorXd factor_forecast(const FactorFit& fit, int target_index, int horizon) {
  if (horizon < 1) throw InvalidArgument("horizon must be >= 1");
  if (target_index < 0 || target_index >= fit.loadings.rows()) throw InvalidArgument("target index out of range");
  if (!fit.dynamics_fitted) throw InvalidArgument("factor dynamics have not been fitted");
  const int p = fit.var_order;
  const Eigen::Index T = fit.factors.rows();
  std::vector<Eigen::VectorXd> path;
  for (int l = p; l >= 1; --l) path.push_back(fit.factors.row(T - l).transpose());
  Eigen::VectorXd out(horizon);
  for (int h = 0; h < horizon; ++h) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(fit.r);
    for (int l = 1; l <= p; ++l) next += fit.var_coeffs[static_cast<std::size_t>(l - 1)] * path[path.size() - l];
    path.push_back(next);
    out[h] = fit.means[target_index] + fit.stds[target_index] * fit.loadings.row(target_index).dot(next);
  }
  return out;
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
  j["data"] = std::move(data);
  return j;
}

Eigen::MatrixXd matrix_from(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw DataError("matrix size mismatch in factor document");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = data[static_cast<std::size_t>(i * cols + k)];
  return m;
}

}  // namespace

std::string factor_fit_to_json(const FactorFit& fit) {
  nlohmann::json j;
  j["format"] = "macrocast.factor";
  j["version"] = 1;
  j["r"] = fit.r;
  j["var_order"] = fit.var_order;
  j["loadings"] = matrix_json(fit.loadings);
  j["factors"] = matrix_json(fit.factors);
  j["explained_share"] = matrix_json(fit.explained_share);
  j["means"] = matrix_json(fit.means);
  j["stds"] = matrix_json(fit.stds);
  auto& coeffs = j["var_coeffs"] = nlohmann::json::array();
  for (const auto& c : fit.var_coeffs) coeffs.push_back(matrix_json(c));
  j["innovation_cov"] = matrix_json(fit.innovation_cov);
  j["coeff_stderr"] = matrix_json(fit.coeff_stderr);
  j["spectral_radius"] = fit.spectral_radius;
  j["stationary"] = fit.stationary;
  j["dynamics_fitted"] = fit.dynamics_fitted;
  return j.dump();
}

FactorFit factor_fit_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "macrocast.factor" || j.at("version") != 1)
      throw DataError("unsupported factor document format/version");
    FactorFit f;
    f.r = j.at("r").get<int>();
    f.var_order = j.at("var_order").get<int>();
    f.loadings = matrix_from(j.at("loadings"));
    f.factors = matrix_from(j.at("factors"));
    f.explained_share = matrix_from(j.at("explained_share"));
    f.means = matrix_from(j.at("means"));
    f.stds = matrix_from(j.at("stds"));
    for (const auto& c : j.at("var_coeffs")) f.var_coeffs.push_back(matrix_from(c));
    f.innovation_cov = matrix_from(j.at("innovation_cov"));
    f.coeff_stderr = matrix_from(j.at("coeff_stderr"));
    f.spectral_radius = j.at("spectral_radius").get<double>();
    f.stationary = j.at("stationary").get<bool>();
    f.dynamics_fitted = j.at("dynamics_fitted").get<bool>();
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed factor document: ") + e.what());
  }
}

}  // namespace macrocast
