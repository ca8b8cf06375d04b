#pragma once

#include <utility>

#include "bifikle/design.hpp"
#include "bifikle/grid.hpp"

namespace bifikle {

// ---- 1D pulse family ------------------------------------------------------

// Decaying-exponential pulse: exp(-a x) sin(b x).
Field pulse_hf(const GridPtr& grid, double a, double b);

// C1 low-fidelity: the sine argument is replaced by its odd Taylor partial
// sum bx - (bx)^3/3! + (bx)^5/5!, wrapped in the outer sine. Setting
// series_replaces_sine drops the outer sine and uses the partial sum itself.
Field pulse_lf_c1(const GridPtr& grid, double a, double b, bool series_replaces_sine = false);

// C2 low-fidelity: degree-based rational approximation of the sine with the
// modified constants 3.5 / 15000, g = b x * 180 / pi.
Field pulse_lf_c2(const GridPtr& grid, double a, double b);

ParamBounds pulse_bounds_c1();  // a in [40,60], b in [60,80]
ParamBounds pulse_bounds_c2();  // a in [40,60], b in [30,50]
GridPtr pulse_grid();           // 256 points on [0, 0.1]

// ---- 2D convection-diffusion ----------------------------------------------

struct ConvDiffParams {
  double strength;  // theta_s
  double width;     // theta_h
  double cx;        // theta_x
  double cy;        // theta_y
};

ParamBounds convdiff_bounds();

inline constexpr double kConvDiffAlpha = 0.01;
inline constexpr double kConvDiffEndTime = 2.5;
inline constexpr double kConvDiffCfl = 0.8;

struct ConvDiffFidelity {
  int n = 32;        // grid extent per axis
  double dt = 0.02;  // explicit time step
};

// Paper values for the 128/32 grids; the diffusive-limit rule
// dt = cfl * dx^2 / (4 alpha) for any other extent.
ConvDiffFidelity convdiff_fidelity(int n);

// Steady advecting velocity at cell centers.
std::pair<Field, Field> velocity_field(const GridPtr& grid);

// Difference of two shifted Gaussians scaled by strength/(2 pi width^2).
Field source_field(const ConvDiffParams& p, const GridPtr& grid);

// phi(x, t=2.5): upwind convection on averaged face velocities, central
// diffusion, explicit Euler; final step shortened to land exactly on t_end.
// Conservative flux form, so the domain integral of phi equals the
// time-integrated source integral. Throws InstabilityError on |phi| > 1e6.
Field convdiff_solve(const ConvDiffParams& p, const ConvDiffFidelity& fidelity);

// Largest advective CFL number max(|u|/dx + |v|/dy) * dt over cells.
double convdiff_cfl_number(const ConvDiffFidelity& fidelity);

}  // namespace bifikle
