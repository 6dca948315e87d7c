// SPDX-License-Identifier: Apache-2.0
#include "delaytk/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "delaytk/error.hpp"

namespace delaytk {

namespace {

constexpr double kBlowUp = 1e12;

Eigen::VectorXd history_state(const HistorySpec& hist) {
  Eigen::VectorXd s(hist.x0.size() + hist.v0.size());
  s << hist.x0, hist.v0;
  return s;
}

// Cubic Hermite on [t_j, t_j + h] from samples j and j + 1.
Eigen::VectorXd hermite(const Trajectory& tr, Eigen::Index j, double theta) {
  const double h = tr.h;
  const double t2 = theta * theta, t3 = t2 * theta;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + theta;
  const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  return h00 * tr.states.row(j).transpose() + h10 * h * tr.derivatives.row(j).transpose() +
         h01 * tr.states.row(j + 1).transpose() + h11 * h * tr.derivatives.row(j + 1).transpose();
}

void append_sample(Trajectory& tr, double t, const Eigen::VectorXd& state, const Eigen::VectorXd& deriv) {
  const auto k = tr.states.rows();
  tr.states.conservativeResize(k + 1, Eigen::NoChange);
  tr.derivatives.conservativeResize(k + 1, Eigen::NoChange);
  tr.states.row(k) = state.transpose();
  tr.derivatives.row(k) = deriv.transpose();
  tr.t.push_back(t);
}

}  // namespace

Eigen::VectorXd delayed_state(const Trajectory& traj, const HistorySpec& hist, double s) {
  if (s <= 0.0) return history_state(hist);
  const double pos = s / traj.h;
  auto j = static_cast<Eigen::Index>(std::floor(pos));
  const auto last = traj.states.rows() - 1;
  if (j >= last) {
    if (j == last && pos - static_cast<double>(j) < 1e-9) return traj.states.row(last).transpose();
    throw Error(ErrorCode::InvalidArgument, "delayed time lies beyond the stored samples");
  }
  return hermite(traj, j, pos - static_cast<double>(j));
}

Trajectory integrate(const SystemMatrices& sys, Delay tau, const HistorySpec& hist, double t_f, double h) {
  const double t = tau.value();
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorCode::InvalidArgument, "step must be positive");
  if (h > t / 20.0 * (1.0 + 1e-12))
    throw Error(ErrorCode::StepTooLarge, "step " + std::to_string(h) + " exceeds tau/20");
  if (!(t_f > 0.0) || !std::isfinite(t_f)) throw Error(ErrorCode::InvalidArgument, "t_f must be positive");
  const auto dim = sys.dim();
  if (hist.x0.size() * 2 != dim || hist.v0.size() * 2 != dim)
    throw Error(ErrorCode::InvalidArgument, "history size does not match the system");
  if (!hist.x0.allFinite() || !hist.v0.allFinite()) throw Error(ErrorCode::InvalidArgument, "history must be finite");

  const auto steps = static_cast<long>(std::ceil(t_f / h - 1e-9));
  Trajectory tr;
  tr.h = t_f / static_cast<double>(steps);
  tr.states.resize(0, dim);
  tr.derivatives.resize(0, dim);

  auto rhs = [&](double time, const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return sys.T * y + sys.Td * delayed_state(tr, hist, time - t);
  };

  Eigen::VectorXd y = history_state(hist);
  append_sample(tr, 0.0, y, rhs(0.0, y));
  for (long k = 0; k < steps; ++k) {
    const double tk = static_cast<double>(k) * tr.h;
    const double hh = tr.h;
    const Eigen::VectorXd k1 = tr.derivatives.row(k).transpose();
    const Eigen::VectorXd k2 = rhs(tk + 0.5 * hh, y + 0.5 * hh * k1);
    const Eigen::VectorXd k3 = rhs(tk + 0.5 * hh, y + 0.5 * hh * k2);
    const Eigen::VectorXd k4 = rhs(tk + hh, y + hh * k3);
    y += hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double tn = static_cast<double>(k + 1) * tr.h;
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > kBlowUp) {
      tr.divergent = true;
      break;
    }
    append_sample(tr, tn, y, rhs(tn, y));
  }

  tr.controls = tr.derivatives.rightCols(dim / 2);
  const Energy e = energy(tr);
  tr.rho = e.rho;
  tr.nu = e.nu;
  return tr;
}

Eigen::MatrixXd control_inputs(const Graph& g, double gamma, const Trajectory& traj, const HistorySpec& hist,
                               Delay tau) {
  const Eigen::MatrixXd A = g.adjacency().cast<double>();
  const Eigen::VectorXd d = g.degrees().cast<double>();
  const auto n = A.rows();
  Eigen::MatrixXd u(traj.states.rows(), n);
  for (Eigen::Index k = 0; k < traj.states.rows(); ++k) {
    const Eigen::VectorXd s = traj.states.row(k).transpose();
    const Eigen::VectorXd sd = delayed_state(traj, hist, traj.t[static_cast<std::size_t>(k)] - tau.value());
    const Eigen::VectorXd x = s.head(n), v = s.tail(n), xd = sd.head(n), vd = sd.tail(n);
    u.row(k) = (-(d.asDiagonal() * x) + A * xd - gamma * (d.asDiagonal() * v) + gamma * (A * vd)).transpose();
  }
  return u;
}

Energy energy(const Trajectory& traj) {
  Energy e;
  const auto m = traj.controls.rows();
  e.rho.resize(static_cast<std::size_t>(m));
  for (Eigen::Index k = 0; k < m; ++k) e.rho[static_cast<std::size_t>(k)] = traj.controls.row(k).squaredNorm();
  for (std::size_t k = 1; k < e.rho.size(); ++k)
    e.nu += 0.5 * (traj.t[k] - traj.t[k - 1]) * (e.rho[k] + e.rho[k - 1]);
  return e;
}

std::vector<double> disagreement(const Trajectory& traj) {
  const auto n = traj.agents();
  std::vector<double> out(static_cast<std::size_t>(traj.states.rows()));
  for (Eigen::Index k = 0; k < traj.states.rows(); ++k) {
    const auto x = traj.states.row(k).head(n);
    const auto v = traj.states.row(k).tail(n);
    out[static_cast<std::size_t>(k)] = (x.maxCoeff() - x.minCoeff()) + (v.maxCoeff() - v.minCoeff());
  }
  return out;
}

void write_csv(std::ostream& os, const Trajectory& traj) {
  const auto n = traj.agents();
  os << 't';
  for (const char* p : {"x", "v", "u"})
    for (Eigen::Index i = 1; i <= n; ++i) os << ',' << p << '_' << i;
  os << ",rho\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (Eigen::Index k = 0; k < traj.states.rows(); ++k) {
    put(traj.t[static_cast<std::size_t>(k)]);
    for (Eigen::Index j = 0; j < 2 * n; ++j) os << ',', put(traj.states(k, j));
    for (Eigen::Index j = 0; j < n; ++j) os << ',', put(traj.controls(k, j));
    os << ',';
    put(traj.rho[static_cast<std::size_t>(k)]);
    os << '\n';
  }
}

}  // namespace delaytk
