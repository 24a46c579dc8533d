#pragma once

#include "mfk/field.hpp"
#include "mfk/grid.hpp"
#include "mfk/problem.hpp"

#include <vector>

namespace mfk {

/// N(x; mean, variance + nu t), the heat solution from a Gaussian start.
double heat_oracle(double mean, double variance, double nu, double t, double x);

/// e^{lambda t}.
double exp_mass_oracle(double lambda, double t);

/// Scalings of the Cole-Hopf representation
///   u(t, x) = E[u0(y) e^{-U0(y)/kappa}] / E[e^{-U0(y)/kappa}],  y = x + sigma B_t.
enum class BurgersVariant {
  nu_scaled,  // sigma = nu, kappa = nu^2
  cole_hopf,  // sigma = sqrt(nu), kappa = nu
};

/// Burgers solution for a one-dimensional Gaussian u0 by Gauss-Hermite
/// quadrature over B_t (max-exponent shift before exponentiation).
/// `flip_nodes` negates the Hermite nodes, an internal symmetry check.
double burgers_paper_formula(const InitialDensity& u0, double nu, double t, double x, int quad_nodes = 200,
                             BurgersVariant variant = BurgersVariant::nu_scaled, bool flip_nodes = false);

struct FdOptions {
  int refinement = 4;     // fine cells per solver cell, >= 4
  double cfl = 0.4;       // dt <= cfl h^2 / nu
};

/// Conservative finite-volume solve of d_t u + d_x(u^2/2 - (nu/2) d_x u) = 0
/// with zero boundary flux and SSP-RK2 stepping on a refined grid. Fine cells
/// are centred on fine nodes, so solver node i is fine cell refinement * i.
/// Returns the fine cell averages sampled at the solver nodes and levels.
Field burgers_fd_reference(const InitialDensity& u0, double nu, const GridSpec& grid, const FdOptions& options = {});

/// The same solve, returning the fine-grid cell averages at the levels.
Field burgers_fd_fine(const InitialDensity& u0, double nu, const GridSpec& grid, const FdOptions& options = {});

}  // namespace mfk
