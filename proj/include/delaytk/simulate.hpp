// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "delaytk/graph.hpp"
#include "delaytk/system.hpp"

namespace delaytk {

// Constant history: (x, v) = (x0, v0) on [-tau, 0].
struct HistorySpec {
  Eigen::VectorXd x0, v0;
};

struct Trajectory {
  double h = 0.0;  // step actually used (t_f / steps)
  std::vector<double> t;
  Eigen::MatrixXd states;       // one row per sample, [x, v]
  Eigen::MatrixXd derivatives;  // d/dt of states, used by the history interpolant
  Eigen::MatrixXd controls;     // one row per sample, u
  std::vector<double> rho;
  double nu = 0.0;
  bool divergent = false;  // truncated after the state blew up

  std::size_t samples() const { return t.size(); }
  Eigen::Index agents() const { return states.cols() / 2; }
};

// Classical RK4 on x' = v, v' = u with the delayed state taken from a cubic
// Hermite interpolant of the stored samples. Requires 0 < h <= tau / 20.
Trajectory integrate(const SystemMatrices& sys, Delay tau, const HistorySpec& hist, double t_f, double h);

// State at time s <= current sample, from the history or the interpolant.
Eigen::VectorXd delayed_state(const Trajectory& traj, const HistorySpec& hist, double s);

// u_i = -sum_j a_ij ((x_i - x_j(t - tau)) + g (v_i - v_j(t - tau))) per sample.
Eigen::MatrixXd control_inputs(const Graph& g, double gamma, const Trajectory& traj, const HistorySpec& hist,
                               Delay tau);

struct Energy {
  std::vector<double> rho;
  double nu = 0.0;
};
Energy energy(const Trajectory& traj);

// max |x_i - x_j| + max |v_i - v_j| per sample.
std::vector<double> disagreement(const Trajectory& traj);

// Header t,x_1..x_n,v_1..v_n,u_1..u_n,rho.
void write_csv(std::ostream& os, const Trajectory& traj);

}  // namespace delaytk
