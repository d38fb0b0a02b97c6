#include "leosop/nav.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/SVD>

#include "leosop/csv.hpp"
#include "leosop/errors.hpp"

namespace leosop {
namespace {

constexpr const char* kStateNames[7] = {"p_x", "p_y", "p_z", "v_x", "v_y", "v_z", "c*clock_drift"};

std::vector<int> active_columns(NavMode mode) {
  if (mode == NavMode::static_rx) return {0, 1, 2, 6};
  return {0, 1, 2, 3, 4, 5, 6};
}

Eigen::VectorXd residual_vector(const std::vector<RangeRateObservation>& obs, const PVTState& s) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i)
    r(static_cast<Eigen::Index>(i)) = obs[i].range_rate_mps - range_rate_model(obs[i].sv, s);
  return r;
}

std::string weak_directions(const Eigen::MatrixXd& v, const Eigen::VectorXd& sv,
                            const std::vector<int>& cols, double limit) {
  std::ostringstream os;
  bool first_dir = true;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv(k) > 0.0 && sv(0) / sv(k) <= limit) continue;
    os << (first_dir ? "" : "; ");
    first_dir = false;
    bool first = true;
    for (Eigen::Index j = 0; j < v.rows(); ++j) {
      if (std::abs(v(j, k)) < 0.3) continue;
      os << (first ? "" : " ") << (v(j, k) < 0 ? "-" : "+") << kStateNames[cols[static_cast<std::size_t>(j)]];
      first = false;
    }
  }
  return os.str();
}

}  // namespace

void NavConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("nav: epsilon must be > 0");
  if (max_iters < 1) throw ConfigError("nav: max_iters must be >= 1");
  if (!(lambda > 0.0) || lambda > 1.0) throw ConfigError("nav: lambda must lie in (0, 1]");
  if (!(max_condition > 1.0)) throw ConfigError("nav: max_condition must be > 1");
}

double range_rate_model(const StateVector& sv, const PVTState& s) {
  const Vec3 los = sv.position_ecef_m - s.p;
  const double rho = los.norm();
  if (!(rho > 0.0)) throw GeometryError("range_rate_model: receiver and SV positions coincide");
  const Vec3 e = los / rho;
  return (sv.velocity_ecef_mps - s.v).dot(e) + kSpeedOfLight * s.delta_t_dot;
}

Eigen::Matrix<double, 1, 7> range_rate_jacobian(const StateVector& sv, const PVTState& s) {
  const Vec3 los = sv.position_ecef_m - s.p;
  const double rho = los.norm();
  if (!(rho > 0.0)) throw GeometryError("range_rate_jacobian: receiver and SV positions coincide");
  const Vec3 e = los / rho;
  const Vec3 dv = sv.velocity_ecef_mps - s.v;
  Eigen::Matrix<double, 1, 7> row;
  row.segment<3>(0) = ((dv.dot(e)) * e - dv).transpose() / rho;
  row.segment<3>(3) = -e.transpose();
  row(6) = 1.0;
  return row;
}

std::vector<RangeRateObservation> make_observations(const std::vector<DopplerMeasurement>& meas,
                                                    const std::vector<EphemerisTable>& ephemerides,
                                                    double carrier_hz, double time_offset_s) {
  if (!(carrier_hz > 0.0)) throw ConfigError("make_observations: carrier must be > 0");
  std::map<std::string, const EphemerisTable*> by_id;
  for (const auto& e : ephemerides) by_id[e.sv_id()] = &e;
  std::vector<RangeRateObservation> out;
  for (const auto& m : meas) {
    if (!m.sv_id) continue;
    const auto it = by_id.find(*m.sv_id);
    if (it == by_id.end()) throw ConfigError("make_observations: no ephemeris for SV '" + *m.sv_id + "'");
    const double t = m.t + time_offset_s;
    RangeRateObservation o;
    o.sv = it->second->interpolate(t);
    o.range_rate_mps = doppler_to_range_rate(m.f_d_hz, carrier_hz);
    o.sv_id = *m.sv_id;
    o.t = m.t;
    out.push_back(std::move(o));
  }
  return out;
}

NavSolution solve_ls(const std::vector<RangeRateObservation>& obs, const PVTState& s0,
                     const NavConfig& cfg) {
  cfg.validate();
  const std::vector<int> cols = active_columns(cfg.mode);
  const auto u = static_cast<Eigen::Index>(cols.size());
  const auto l = static_cast<Eigen::Index>(obs.size());
  if (l < u)
    throw GeometryError("under-determined system: " + std::to_string(l) + " measurements for " +
                        std::to_string(u) + " unknowns");

  NavSolution sol;
  PVTState& s = sol.state;
  s = s0;
  if (cfg.mode == NavMode::static_rx) s.v = Vec3::Zero();

  Eigen::MatrixXd g(l, u);
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    const Eigen::VectorXd r = residual_vector(obs, s);
    for (Eigen::Index i = 0; i < l; ++i) {
      const auto row = range_rate_jacobian(obs[static_cast<std::size_t>(i)].sv, s);
      for (Eigen::Index j = 0; j < u; ++j) g(i, j) = row(cols[static_cast<std::size_t>(j)]);
    }
    // Column scaling keeps the conditioning test unit independent.
    Eigen::VectorXd scale = g.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < u; ++j)
      if (!(scale(j) > 0.0)) scale(j) = 1.0;
    const Eigen::MatrixXd gs = g * scale.cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(gs, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    if (!(sv(u - 1) > 0.0) || sv(0) / sv(u - 1) > cfg.max_condition)
      throw GeometryError("singular geometry, weak directions: " +
                          weak_directions(svd.matrixV(), sv, cols, cfg.max_condition));
    const Eigen::VectorXd dx = scale.cwiseInverse().asDiagonal() * svd.solve(r);

    for (Eigen::Index j = 0; j < u; ++j) {
      const int c = cols[static_cast<std::size_t>(j)];
      if (c < 3) s.p(c) += dx(j);
      else if (c < 6) s.v(c - 3) += dx(j);
      else s.delta_t_dot += dx(j) / kSpeedOfLight;
    }
    sol.report.iterations = iter;
    sol.report.final_step_norm = dx.norm();
    sol.report.residual_norm_history.push_back(residual_vector(obs, s).norm());
    if (dx.norm() < cfg.epsilon) {
      sol.report.converged = true;
      break;
    }
  }
  const Eigen::VectorXd r = residual_vector(obs, s);
  sol.report.residuals.assign(r.data(), r.data() + r.size());
  sol.report.kept.assign(obs.size(), true);
  return sol;
}

NavSolution solve_ls(const std::vector<DopplerMeasurement>& meas,
                     const std::vector<EphemerisTable>& ephemerides, const PVTState& s0,
                     const NavConfig& cfg, double carrier_hz, double time_offset_s) {
  return solve_ls(make_observations(meas, ephemerides, carrier_hz, time_offset_s), s0, cfg);
}

std::size_t kept_count(double lambda, std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(lambda * static_cast<double>(n))));
}

NavSolution postfit_refine(const std::vector<RangeRateObservation>& obs, const NavSolution& solution,
                           const NavConfig& cfg) {
  cfg.validate();
  if (solution.report.residuals.size() != obs.size())
    throw ConfigError("postfit_refine: residual count does not match the measurements");
  const std::size_t keep = std::min(obs.size(), kept_count(cfg.lambda, obs.size()));
  if (keep == obs.size()) return solution;
  if (keep < static_cast<std::size_t>(cfg.unknowns()))
    throw GeometryError("postfit_refine: keeping " + std::to_string(keep) + " measurements for " +
                        std::to_string(cfg.unknowns()) + " unknowns");

  std::vector<std::size_t> order(obs.size());
  std::iota(order.begin(), order.end(), 0);
  const auto& res = solution.report.residuals;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(res[a]) < std::abs(res[b]); });
  std::vector<bool> kept(obs.size(), false);
  for (std::size_t i = 0; i < keep; ++i) kept[order[i]] = true;
  std::vector<RangeRateObservation> subset;
  for (std::size_t i = 0; i < obs.size(); ++i)
    if (kept[i]) subset.push_back(obs[i]);

  NavSolution refined = solve_ls(subset, solution.state, cfg);
  const Eigen::VectorXd r = residual_vector(obs, refined.state);
  refined.report.residuals.assign(r.data(), r.data() + r.size());
  refined.report.kept = std::move(kept);
  return refined;
}

std::vector<LambdaPoint> lambda_sweep(const std::vector<RangeRateObservation>& obs,
                                      const NavSolution& initial, const NavConfig& cfg,
                                      const std::vector<double>& lambdas, const Vec3& truth) {
  std::vector<LambdaPoint> out;
  for (double lambda : lambdas) {
    NavConfig c = cfg;
    c.lambda = lambda;
    LambdaPoint pt{lambda, std::numeric_limits<double>::quiet_NaN()};
    try {
      pt.pos_error_m = (postfit_refine(obs, initial, c).state.p - truth).norm();
    } catch (const GeometryError&) {
    }
    out.push_back(pt);
  }
  return out;
}

void write_lambda_sweep_csv(const std::filesystem::path& path, const std::vector<LambdaPoint>& pts) {
  CsvWriter out(path, {"lambda", "pos_error_m"});
  for (const auto& p : pts) out.row(p.lambda, p.pos_error_m);
  out.close();
}

void write_residuals_csv(const std::filesystem::path& path,
                         const std::vector<RangeRateObservation>& obs, const ResidualReport& report) {
  CsvWriter out(path, {"t", "sv_id", "residual_mps", "kept"});
  for (std::size_t i = 0; i < obs.size(); ++i)
    out.row(obs[i].t, obs[i].sv_id, report.residuals.at(i), static_cast<bool>(report.kept.at(i)));
  out.close();
}

std::string solution_report(const NavSolution& sol, const NavConfig& cfg, const Vec3* truth) {
  std::ostringstream os;
  os.precision(12);
  const auto& s = sol.state;
  os << "mode: " << (cfg.mode == NavMode::static_rx ? "static" : "full") << '\n';
  os << "converged: " << (sol.report.converged ? "yes" : "no") << '\n';
  os << "iterations: " << sol.report.iterations << '\n';
  os << "final_step_norm: " << sol.report.final_step_norm << '\n';
  os << "position_ecef_m: " << s.p.x() << ' ' << s.p.y() << ' ' << s.p.z() << '\n';
  os << "velocity_ecef_mps: " << s.v.x() << ' ' << s.v.y() << ' ' << s.v.z() << '\n';
  os << "clock_bias_s: " << s.delta_t << " (fixed)\n";
  os << "clock_drift: " << s.delta_t_dot << '\n';
  const auto kept = static_cast<std::size_t>(std::count(sol.report.kept.begin(), sol.report.kept.end(), true));
  os << "measurements: " << sol.report.residuals.size() << " (kept " << kept << ")\n";
  if (!sol.report.residuals.empty()) {
    double ss = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < sol.report.residuals.size(); ++i)
      if (sol.report.kept[i]) {
        ss += sol.report.residuals[i] * sol.report.residuals[i];
        ++n;
      }
    os << "residual_rms_mps: " << (n ? std::sqrt(ss / static_cast<double>(n)) : 0.0) << '\n';
  }
  if (truth) os << "position_error_m: " << (s.p - *truth).norm() << '\n';
  return os.str();
}

}  // namespace leosop
