//! Time integration of the regularized 1D moment system.
//!
//! Transport is a first-order characteristic-upwind update of the frozen
//! quasi-linear form `∂w/∂t + A(w) ∂w/∂x = 0`; at each interface `A` is
//! evaluated at the arithmetic mean of the neighbors and split into
//! `A^± = R Λ^± R⁻¹`. The source `G w` is integrated per cell with the
//! relaxation diagonal treated exactly. The two are Strang-composed.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{convection_matrix_1d, wigner_coefficient_1d};
use crate::error::{Error, Result};
use crate::hermite::hermite_roots;
use crate::potential::PotentialModel;
use crate::spectral::eigenvalues;
use crate::state::MomentState1D;

/// Smallest grid accepted by [`Grid1D::new`].
pub const MIN_CELLS: usize = 8;

/// Step reductions allowed when the source half-step raises the wave speeds.
const MAX_STEP_RETRIES: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    /// Ghost cells copy the boundary cell, so no wave enters.
    ZeroGradient,
}

impl Boundary {
    pub fn name(&self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::ZeroGradient => "zero-gradient",
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "zero-gradient" | "outflow" => Ok(Boundary::ZeroGradient),
            other => Err(Error::InvalidArgument(format!(
                "unknown boundary `{other}` (expected periodic or zero-gradient)"
            ))),
        }
    }
}

/// Uniform cell-centered grid on `[x_min, x_max]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub cells: usize,
    pub boundary: Boundary,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, cells: usize, boundary: Boundary) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::InvalidArgument(format!(
                "grid needs x_max > x_min, got [{x_min}, {x_max}]"
            )));
        }
        if cells < MIN_CELLS {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {MIN_CELLS} cells, got {cells}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            cells,
            boundary,
        })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub order: usize,
    pub cfl: f64,
    pub t_end: f64,
    pub hbar: f64,
    /// Relaxation time; `f64::INFINITY` is collisionless.
    pub tau: f64,
    pub potential: PotentialModel,
    /// Record every `output_stride` steps; the first and last states are always kept.
    pub output_stride: usize,
    /// When false the Wigner entries of `G` are zeroed; the force entry stays.
    pub wigner: bool,
    /// Measure the realized CFL number from numerically computed eigenvalues each step.
    pub cfl_diagnostics: bool,
}

impl SolverConfig {
    pub fn new(order: usize, potential: PotentialModel) -> Self {
        Self {
            order,
            cfl: 0.45,
            t_end: 1.0,
            hbar: 0.0,
            tau: f64::INFINITY,
            potential,
            output_stride: 1,
            wigner: true,
            cfl_diagnostics: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(3..=crate::index::MAX_ORDER).contains(&self.order) {
            return Err(Error::InvalidArgument(format!("order must be at least 3, got {}", self.order)));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::InvalidArgument(format!("cfl must lie in (0, 1), got {}", self.cfl)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.hbar >= 0.0 && self.hbar.is_finite()) {
            return Err(Error::InvalidArgument(format!("hbar must be non-negative, got {}", self.hbar)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if self.output_stride == 0 {
            return Err(Error::InvalidArgument("output_stride must be positive".into()));
        }
        if self.potential.max_derivative_order() < self.order {
            return Err(Error::UnsupportedOrder {
                requested: self.order,
                available: self.potential.max_derivative_order(),
            });
        }
        Ok(())
    }
}

/// Totals and balance residuals at one recorded time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub t: f64,
    /// `Σ ρ Δx`
    pub mass: f64,
    /// `Σ ρu Δx`
    pub momentum: f64,
    /// `Σ (ρu²/2 + P/2) Δx`
    pub energy: f64,
    /// `Σ ρ V′ Δx`, the total force is `−forcing`.
    pub forcing: f64,
    /// `Σ ρu V′ Δx`, the total work rate is `−power`.
    pub power: f64,
    /// `|Δ momentum/Δt + mean forcing|` since the previous record; zero for the first.
    pub momentum_residual: f64,
    /// `|Δ energy/Δt + mean power|` since the previous record; zero for the first.
    pub energy_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid1D,
    pub order: usize,
    pub times: Vec<f64>,
    pub fields: Vec<Vec<MomentState1D>>,
    pub diagnostics: Vec<Diagnostics>,
    pub steps: usize,
    /// Largest `max|λ| Δt/Δx` over all steps, when diagnostics are on.
    pub max_cfl_number: Option<f64>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&[MomentState1D]> {
        self.fields.last().map(|f| f.as_slice())
    }
}

/// A failed run together with everything recorded before the failure.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{error}")]
pub struct RunFailure {
    pub error: Error,
    pub partial: Box<Trajectory>,
}

/// `V, V′, …, V^{(M)}` at every cell center.
pub fn potential_jets(potential: &PotentialModel, grid: &Grid1D, order: usize) -> Result<Vec<Vec<f64>>> {
    grid.centers().into_iter().map(|x| potential.jet(order, x)).collect()
}

/// Build a field by sampling `init` at the cell centers.
pub fn field_from<F>(grid: &Grid1D, mut init: F) -> Result<Vec<MomentState1D>>
where
    F: FnMut(f64) -> Result<MomentState1D>,
{
    grid.centers().into_iter().map(&mut init).collect()
}

fn largest_root(order: usize) -> Result<f64> {
    Ok(*hermite_roots(order + 1)?.last().expect("non-empty"))
}

/// `cfl·Δx / max(|u| + c_max √𝒯)` with `c_max` the largest root of `He_{M+1}`.
pub fn stable_dt(field: &[MomentState1D], grid: &Grid1D, cfl: f64) -> Result<f64> {
    let order = field
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty field".into()))?
        .order();
    let c_max = largest_root(order)?;
    let mut speed = 0.0f64;
    for (i, s) in field.iter().enumerate() {
        s.validate()
            .map_err(|e| Error::Inadmissible(format!("cell {i}: {e}")))?;
        speed = speed.max(s.u.abs() + c_max * s.temperature().sqrt());
    }
    Ok(cfl * grid.dx() / speed)
}

/// `(A⁺, A⁻)` with eigenvalues `u + c√𝒯` and null-space eigenvectors.
fn split_convection(state: &MomentState1D, roots: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let a = convection_matrix_1d(state, true);
    let n = a.nrows();
    let sqrt_t = state.temperature().sqrt();
    let mut r = DMatrix::zeros(n, n);
    let mut lambda = Vec::with_capacity(n);
    for (k, c) in roots.iter().enumerate() {
        let l = state.u + c * sqrt_t;
        let svd = (&a - DMatrix::identity(n, n) * l).svd(false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::Numerical("singular vectors unavailable".into()))?;
        let imin = svd.singular_values.imin();
        r.set_column(k, &v_t.row(imin).transpose());
        lambda.push(l);
    }
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("eigenvector matrix is singular".into()))?;
    let plus = &r * DMatrix::from_diagonal(&DVector::from_iterator(n, lambda.iter().map(|l| l.max(0.0)))) * &r_inv;
    let minus = &r * DMatrix::from_diagonal(&DVector::from_iterator(n, lambda.iter().map(|l| l.min(0.0)))) * &r_inv;
    Ok((plus, minus))
}

fn average(a: &DVector<f64>, b: &DVector<f64>, order: usize) -> Result<MomentState1D> {
    let mid = (a + b) * 0.5;
    MomentState1D::from_slice(order, mid.as_slice())
}

fn to_states(order: usize, w: Vec<DVector<f64>>, t: f64) -> Result<Vec<MomentState1D>> {
    w.into_iter()
        .enumerate()
        .map(|(i, v)| {
            let s = MomentState1D::from_slice(order, v.as_slice())?;
            s.validate().map_err(|e| Error::Solver {
                time: t,
                cell: Some(i),
                reason: e.to_string(),
            })?;
            Ok(s)
        })
        .collect()
}

/// One characteristic-upwind transport step of length `dt`, ending at time `t_after`.
pub fn transport_step(field: &[MomentState1D], grid: &Grid1D, dt: f64, t_after: f64) -> Result<Vec<MomentState1D>> {
    let n = field.len();
    if n != grid.cells {
        return Err(Error::InvalidArgument(format!("field has {n} cells, grid has {}", grid.cells)));
    }
    let order = field[0].order();
    let roots = hermite_roots(order + 1)?;
    let w: Vec<DVector<f64>> = field.iter().map(|s| s.to_vector()).collect();
    // interface k sits between cells k−1 and k
    let interfaces: Vec<(usize, usize)> = match grid.boundary {
        Boundary::Periodic => (0..n).map(|k| ((k + n - 1) % n, k)).collect(),
        Boundary::ZeroGradient => (1..n).map(|k| (k - 1, k)).collect(),
    };
    let fluctuations: Vec<(DVector<f64>, DVector<f64>)> = interfaces
        .par_iter()
        .map(|&(l, r)| {
            let jump = &w[r] - &w[l];
            let mean = average(&w[l], &w[r], order)?;
            mean.validate().map_err(|e| Error::Solver {
                time: t_after,
                cell: Some(l),
                reason: format!("interface state: {e}"),
            })?;
            let (plus, minus) = split_convection(&mean, &roots).map_err(|e| Error::Solver {
                time: t_after,
                cell: Some(l),
                reason: e.to_string(),
            })?;
            Ok((&plus * &jump, &minus * &jump))
        })
        .collect::<Result<_>>()?;
    let ratio = dt / grid.dx();
    let mut out = w;
    for (&(l, r), (right_going, left_going)) in interfaces.iter().zip(&fluctuations) {
        out[r].axpy(-ratio, right_going, 1.0);
        out[l].axpy(-ratio, left_going, 1.0);
    }
    to_states(order, out, t_after)
}

fn phi(h: f64, rate: f64) -> f64 {
    if rate == 0.0 {
        h
    } else {
        -(-h * rate).exp_m1() / rate
    }
}

fn wigner_sources(state_f: &dyn Fn(usize) -> f64, order: usize, jet: &[f64], hbar: f64) -> Vec<f64> {
    (3..=order)
        .map(|n| {
            let mut s = 0.0;
            for lambda in (3..=n).step_by(2) {
                let target = n - lambda;
                if target == 1 || target == 2 {
                    continue;
                }
                let c = wigner_coefficient_1d(lambda, hbar).expect("odd order");
                s += c * jet[lambda] * state_f(target);
            }
            s
        })
        .collect()
}

/// Integrate `dw/dt = G(w) w` over `dt` in one cell. The relaxation factor
/// `e^{−dt/τ}` is exact; the Wigner coupling uses an exponential midpoint rule,
/// exact when the lower moments are frozen.
pub fn source_cell(state: &MomentState1D, jet: &[f64], dt: f64, hbar: f64, tau: f64, wigner: bool) -> MomentState1D {
    let order = state.order();
    let rate = if tau.is_infinite() { 0.0 } else { 1.0 / tau };
    let mut out = state.clone();
    out.u -= jet[1] * dt;
    if !wigner || hbar == 0.0 {
        let decay = (-dt * rate).exp();
        for f in out.coeffs_mut() {
            *f *= decay;
        }
        return out;
    }
    let rho = state.rho;
    let start = state.coeffs().to_vec();
    let lookup = |v: &[f64], k: usize| if k == 0 { rho } else { v[k - 3] };
    let h = 0.5 * dt;
    let s0 = wigner_sources(&|k| lookup(&start, k), order, jet, hbar);
    let mid: Vec<f64> = start
        .iter()
        .zip(&s0)
        .map(|(f, s)| (-h * rate).exp() * f + phi(h, rate) * s)
        .collect();
    let s_mid = wigner_sources(&|k| lookup(&mid, k), order, jet, hbar);
    for ((f, f0), s) in out.coeffs_mut().iter_mut().zip(&start).zip(&s_mid) {
        *f = (-dt * rate).exp() * f0 + phi(dt, rate) * s;
    }
    out
}

/// Source update of every cell; `jets[i]` holds `V^{(k)}` at cell `i`, `k = 0..=M`.
pub fn source_step(
    field: &[MomentState1D],
    jets: &[Vec<f64>],
    dt: f64,
    hbar: f64,
    tau: f64,
    wigner: bool,
    t_after: f64,
) -> Result<Vec<MomentState1D>> {
    field
        .par_iter()
        .zip(jets)
        .enumerate()
        .map(|(i, (s, jet))| {
            let next = source_cell(s, jet, dt, hbar, tau, wigner);
            next.validate().map_err(|e| Error::Solver {
                time: t_after,
                cell: Some(i),
                reason: e.to_string(),
            })?;
            Ok(next)
        })
        .collect()
}

fn totals(field: &[MomentState1D], jets: &[Vec<f64>], dx: f64, t: f64) -> Diagnostics {
    let mut d = Diagnostics {
        t,
        mass: 0.0,
        momentum: 0.0,
        energy: 0.0,
        forcing: 0.0,
        power: 0.0,
        momentum_residual: 0.0,
        energy_residual: 0.0,
    };
    for (s, jet) in field.iter().zip(jets) {
        d.mass += s.rho * dx;
        d.momentum += s.rho * s.u * dx;
        d.energy += (0.5 * s.rho * s.u * s.u + s.half_pressure) * dx;
        d.forcing += s.rho * jet[1] * dx;
        d.power += s.rho * s.u * jet[1] * dx;
    }
    d
}

fn with_residuals(mut d: Diagnostics, prev: Option<&Diagnostics>) -> Diagnostics {
    if let Some(p) = prev {
        let span = d.t - p.t;
        d.momentum_residual = ((d.momentum - p.momentum) / span + 0.5 * (d.forcing + p.forcing)).abs();
        d.energy_residual = ((d.energy - p.energy) / span + 0.5 * (d.power + p.power)).abs();
    }
    d
}

/// Largest `max|λ| dt/Δx` using numerically computed eigenvalues of `A` per cell.
fn measured_cfl(field: &[MomentState1D], dt: f64, dx: f64) -> Result<f64> {
    let speeds: Vec<f64> = field
        .par_iter()
        .map(|s| {
            let ev = eigenvalues(&convection_matrix_1d(s, true))?;
            Ok(ev.iter().map(|z| z.norm()).fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(speeds.into_iter().fold(0.0, f64::max) * dt / dx)
}

/// Strang-split time loop `source(dt/2) → transport(dt) → source(dt/2)` up to `t_end`.
pub fn run(config: &SolverConfig, grid: &Grid1D, initial: Vec<MomentState1D>) -> std::result::Result<Trajectory, RunFailure> {
    let mut traj = Trajectory {
        grid: grid.clone(),
        order: config.order,
        times: Vec::new(),
        fields: Vec::new(),
        diagnostics: Vec::new(),
        steps: 0,
        max_cfl_number: config.cfl_diagnostics.then_some(0.0),
    };
    match integrate(config, grid, initial, &mut traj) {
        Ok(()) => Ok(traj),
        Err(error) => Err(RunFailure {
            error,
            partial: Box::new(traj),
        }),
    }
}

fn integrate(config: &SolverConfig, grid: &Grid1D, initial: Vec<MomentState1D>, traj: &mut Trajectory) -> Result<()> {
    config.validate()?;
    if initial.len() != grid.cells {
        return Err(Error::InvalidArgument(format!(
            "initial field has {} cells, grid has {}",
            initial.len(),
            grid.cells
        )));
    }
    if let Some(bad) = initial.iter().position(|s| s.order() != config.order) {
        return Err(Error::InvalidArgument(format!("cell {bad} has the wrong truncation order")));
    }
    for (i, s) in initial.iter().enumerate() {
        s.validate().map_err(|e| Error::Solver {
            time: 0.0,
            cell: Some(i),
            reason: e.to_string(),
        })?;
    }
    let jets = potential_jets(&config.potential, grid, config.order)?;
    let dx = grid.dx();
    let record = |traj: &mut Trajectory, field: &[MomentState1D], t: f64| {
        let d = with_residuals(totals(field, &jets, dx, t), traj.diagnostics.last());
        traj.times.push(t);
        traj.fields.push(field.to_vec());
        traj.diagnostics.push(d);
    };

    let mut field = initial;
    let mut t = 0.0;
    record(traj, &field, t);
    while t < config.t_end {
        let mut dt = stable_dt(&field, grid, config.cfl).map_err(|e| Error::Solver {
            time: t,
            cell: None,
            reason: e.to_string(),
        })?;
        let (hbar, tau, wigner) = (config.hbar, config.tau, config.wigner);
        // the source half-step can speed the flow up, so the bound is re-checked
        // on the field that is actually transported
        let mut attempts = 0;
        let (half, last) = loop {
            let last = t + dt >= config.t_end;
            if last {
                dt = config.t_end - t;
            }
            let t_next = if last { config.t_end } else { t + dt };
            let half = source_step(&field, &jets, 0.5 * dt, hbar, tau, wigner, t_next)?;
            let allowed = stable_dt(&half, grid, config.cfl).map_err(|e| Error::Solver {
                time: t_next,
                cell: None,
                reason: e.to_string(),
            })?;
            if dt <= allowed * (1.0 + 1e-12) {
                break (half, last);
            }
            attempts += 1;
            if attempts > MAX_STEP_RETRIES {
                return Err(Error::Solver {
                    time: t,
                    cell: None,
                    reason: format!("no stable step after {MAX_STEP_RETRIES} reductions (last dt = {dt:e})"),
                });
            }
            dt = allowed.min(0.5 * dt);
        };
        let t_next = if last { config.t_end } else { t + dt };
        if let Some(max) = traj.max_cfl_number.as_mut() {
            *max = max.max(measured_cfl(&half, dt, dx)?);
        }
        field = transport_step(&half, grid, dt, t_next)?;
        field = source_step(&field, &jets, 0.5 * dt, hbar, tau, wigner, t_next)?;
        t = t_next;
        traj.steps += 1;
        if last || traj.steps % config.output_stride == 0 {
            record(traj, &field, t);
        }
    }
    Ok(())
}
