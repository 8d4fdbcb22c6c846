#pragma once

#include <functional>
#include <optional>
#include <string>

#include "material.hpp"
#include "spectral.hpp"

namespace m2d {

// State (D1, D2, H) on a periodic spatial (x1, x2) grid.
using State = std::array<RVec, 3>;
// Source (g1, g2, g3) at time t on the trajectory grid, added to the right-hand side.
using SourceFn = std::function<State(double t)>;

struct Trajectory {
  GridSpec grid;
  double dt = 0;
  RVec times;
  std::vector<State> states;
  std::vector<State> sources;  // samples at the stored times; empty without a source
  nlohmann::json model;
  double max_speed = 0;
};

struct SimulateOptions {
  double cfl = 0.5;
  double blowup = 1e3;  // abort when max |u| exceeds this
  int save_every = 1;
};

// Maxwell system d_t D = grad_perp H, d_t H = -curl(eps^-1 D) with eps^-1 from the model
// (Kerr: eps^-1 = psi(|D|^2) I). Spectral derivatives, classic RK4. Negative dt integrates backward; T and dt
// must have the same sign.
Trajectory simulate(const Permittivity& model, const GridSpec& g, const State& u0, double T, double dt,
                    const SourceFn& source = {}, const SimulateOptions& opt = {});

// Largest characteristic speed of the model over the grid (Kerr: at the given state).
double max_wave_speed(const Permittivity& model, const GridSpec& g, const State& u);

struct ChargeReport {
  RVec times;
  RVec defect;        // ||rho(t) - predicted(t)||_2
  RVec drift;         // ||rho(t) - rho(0)||_2
  double max_defect = 0;
  double max_drift = 0;
  double u0_h1 = 0;   // ||u(0)||_{H^1}
};

// rho = d1 D1 + d2 D2 compared with rho(0) + int_0^t div(g1, g2), integrated with 3-point Gauss-Legendre per step.
ChargeReport charge_check(const Trajectory& traj, const SourceFn& source = {});
RVec charge_density(const GridSpec& g, const State& u);

struct EnergyConfig {
  double s = 0;
  KerrProfile psi{0.0};          // C(u) = diag(psi I + 2 psi' u' u'^T, 1)
  std::optional<Sym2> eps_inv;   // constant linear model: C = diag(eps^-1, 1), psi ignored
};
EnergyConfig energy_config(const Permittivity& model, double s);

// Upper-left 2x2 block of C at a state and its third diagonal entry (always 1).
Sym2 symmetrizer_block(const EnergyConfig& cfg, double u1, double u2);
// <<D'>^s u, C(u) <D'>^s u> with grid volume weights.
double energy_norm(const GridSpec& g, const State& u, const EnergyConfig& cfg);
double sobolev_norm(const GridSpec& g, const State& u, double s);

struct ControlParams {
  RVec times;
  RVec A;  // running sup of max_x max_c |u_c|
  RVec B;  // max_x max_c |grad' u_c|
  RVec int_B;  // trapezoid integral of B from 0
};
ControlParams control_params(const Trajectory& traj);

struct GronwallFit {
  double c = 0;
  RVec times, log_ratio, int_B, margin;  // margin = c int_B - log_ratio >= 0
  RVec energy;
};
GronwallFit energy_gronwall_check(const Trajectory& traj, const EnergyConfig& cfg);

struct FrequencyEnvelope {
  double s = 0, delta = 0.5;
  std::vector<int> blocks;  // dyadic index, -1 is the low block
  RVec block_norms;         // ||P_k u||_{H^s}
  RVec c;
  double norm = 0;          // ||u||_{H^s}
  double sharpness = 0;     // sum c_k^2 / ||u||^2_{H^s}
};
// c_k = max_j 2^{-delta |j-k|} ||P_j u||_{H^s} over the spatial dyadic blocks resolved by the grid.
FrequencyEnvelope frequency_envelope(const GridSpec& g, const State& u, double s, double delta = 0.5);

struct DifferenceReport {
  RVec times, ratio;  // ||u_a - u_b||_2 / ||u_a(0) - u_b(0)||_2
  double max_ratio = 1;
  double int_B = 0;
  double c = 0;  // max_t log(ratio^2) / int_0^t B
};
DifferenceReport difference_bound_check(const Permittivity& model, const GridSpec& g, const State& a0,
                                        const State& b0, double T, double dt);

// Trajectory store: one field snapshot per stored time plus manifest.json.
void write_trajectory(const std::string& dir, const Trajectory& traj, const nlohmann::json& extra = {});

State zero_state(const GridSpec& g);
State state_from(const SpectralField& f);
SpectralField to_field(const GridSpec& g, const State& u);

}  // namespace m2d
