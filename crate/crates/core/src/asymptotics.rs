//! Short-time expansion of the collisionless `M = 3` system started from the
//! classical steady state `ρ₀ = P₀ = e^{−V}`, `u = f₃ = 0`.
//!
//! With `b = ħ²/24` and `W_k = d^k/dx^k (V‴ e^{−V})` the leading corrections are
//!
//! ```text
//! f₃ = b W₀ t
//! P  = ρ₀ − 3b W₁ t²
//! u  = b W₂ t³ / ρ₀
//! ρ  = ρ₀ − (b/4) W₃ t⁴
//! ```
//!
//! Substituted into the system these leave residuals of order `t⁷, t⁴, t³, t²`
//! in the mass, momentum, pressure and `f₃` equations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::binomial;
use crate::potential::PotentialModel;

/// Smallest relaxation time for which the collisionless expansion is used.
pub const MIN_VALID_TAU: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub rho: f64,
    pub u: f64,
    pub pressure: f64,
    pub f3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticPrediction {
    pub rho: f64,
    pub u: f64,
    pub pressure: f64,
    pub f3: f64,
    /// Powers of `t` carried by the corrections of `(ρ, u, P, f₃)`.
    pub orders: [u32; 4],
}

pub const PREDICTION_ORDERS: [u32; 4] = [4, 3, 2, 1];

/// `ρ = P = e^{−V(x)}`, `u = f₃ = 0`.
pub fn steady_classical_state(potential: &PotentialModel, x: f64) -> SteadyState {
    let rho = (-potential.value(x)).exp();
    SteadyState {
        rho,
        u: 0.0,
        pressure: rho,
        f3: 0.0,
    }
}

/// `d^k/dx^k e^{cV}` for `k = 0..=n`, from `E′ = cV′E` and the Leibniz rule.
pub fn exp_potential_derivatives(potential: &PotentialModel, c: f64, x: f64, n: usize) -> Result<Vec<f64>> {
    let v = potential.jet(n, x)?;
    let mut e = Vec::with_capacity(n + 1);
    e.push((c * v[0]).exp());
    for m in 0..n {
        let next: f64 = (0..=m)
            .map(|k| choose(m, k) * c * v[k + 1] * e[m - k])
            .sum();
        e.push(next);
    }
    Ok(e)
}

fn choose(n: usize, k: usize) -> f64 {
    binomial(n as u64, k as u64).expect("small binomial") as f64
}

/// `d^k/dx^k (V‴ e^{cV})`.
pub fn weighted_third_derivative(potential: &PotentialModel, c: f64, x: f64, k: usize) -> Result<f64> {
    if potential.max_derivative_order() < k + 3 {
        return Err(Error::UnsupportedOrder {
            requested: k + 3,
            available: potential.max_derivative_order(),
        });
    }
    let e = exp_potential_derivatives(potential, c, x, k)?;
    (0..=k)
        .map(|i| Ok(choose(k, i) * potential.derivative(3 + i, x)? * e[k - i]))
        .sum()
}

/// `g(x) = −d³/dx³ (V‴ e^{−2V})`.
pub fn g_of_x(potential: &PotentialModel, x: f64) -> Result<f64> {
    Ok(-weighted_third_derivative(potential, -2.0, x, 3)?)
}

/// `−d³/dx³ (V‴ e^{−V})`, the profile with `ρ − ρ₀ = (ħ² t⁴/96) · profile + O(t⁵)`.
pub fn density_profile(potential: &PotentialModel, x: f64) -> Result<f64> {
    Ok(-weighted_third_derivative(potential, -1.0, x, 3)?)
}

/// Leading-order state at `(x, t)`.
pub fn predict(potential: &PotentialModel, x: f64, t: f64, hbar: f64) -> Result<AsymptoticPrediction> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be non-negative, got {t}")));
    }
    let s = steady_classical_state(potential, x);
    let w: Vec<f64> = (0..4)
        .map(|k| weighted_third_derivative(potential, -1.0, x, k))
        .collect::<Result<_>>()?;
    let b = hbar * hbar / 24.0;
    Ok(AsymptoticPrediction {
        rho: s.rho - 0.25 * b * w[3] * t.powi(4),
        u: b * w[2] * t.powi(3) / s.rho,
        pressure: s.pressure - 3.0 * b * w[1] * t * t,
        f3: b * w[0] * t,
        orders: PREDICTION_ORDERS,
    })
}
