use nalgebra::DMatrix;

use super::{wigner_coefficient_1d, QuasiLinearSystem1D};
use crate::error::{Error, Result};
use crate::state::MomentState1D;

/// Convection matrix `A(w)` for `w = (ρ, u, P/2, f_3, …, f_M)`.
///
/// Does not check admissibility; `ρ` must be non-zero.
pub fn convection_matrix_1d(state: &MomentState1D, regularized: bool) -> DMatrix<f64> {
    let m = state.order();
    let rho = state.rho;
    let u = state.u;
    let p = state.pressure();
    let t = p / rho;
    let f = |n: i64| state.coeff(n);
    let mut a = DMatrix::zeros(m + 1, m + 1);

    a[(0, 0)] = u;
    a[(0, 1)] = rho;
    a[(1, 1)] = u;
    a[(1, 2)] = 2.0 / rho;
    a[(2, 1)] = 1.5 * p;
    a[(2, 2)] = u;
    a[(2, 3)] = 3.0;

    for n in 3..=m {
        let ni = n as i64;
        let closing = regularized && n == m;
        if n > 3 {
            a[(n, n - 1)] += t;
        }
        a[(n, n)] += u;
        if n < m {
            a[(n, n + 1)] += (n + 1) as f64;
        }
        if !closing {
            a[(n, 1)] += (n + 1) as f64 * f(ni);
        }
        a[(n, 2)] -= 2.0 * f(ni - 1) / rho;
        a[(n, 3)] -= 3.0 * f(ni - 2) / rho;
        // coefficient of ½∂T
        let mut k = t * f(ni - 3);
        if !closing {
            k += (n + 1) as f64 * f(ni - 1);
        }
        a[(n, 2)] += k / rho;
        a[(n, 0)] -= k * p / (2.0 * rho * rho);
    }
    a
}

/// `A_Grad − A_regularized`; non-zero only in the last row.
pub fn regularization_correction_1d(state: &MomentState1D) -> DMatrix<f64> {
    convection_matrix_1d(state, false) - convection_matrix_1d(state, true)
}

/// Wigner coupling of order `|λ| ≥ 3` for potential derivatives `jet[k] = V^{(k)}`.
pub fn wigner_matrix_1d(order: usize, jet: &[f64], hbar: f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(order + 1, order + 1);
    for n in 3..=order {
        for lambda in (3..=n).step_by(2) {
            let c = wigner_coefficient_1d(lambda, hbar).expect("odd order");
            let target = n - lambda;
            match target {
                0 => g[(n, 0)] += c * jet[lambda],
                // f_1 = f_2 = 0
                1 | 2 => {}
                k => g[(n, k)] += c * jet[lambda],
            }
        }
    }
    g
}

fn check_source_params(tau: f64, hbar: f64) -> Result<()> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("relaxation time must be positive, got {tau}")));
    }
    if !hbar.is_finite() || hbar < 0.0 {
        return Err(Error::InvalidArgument(format!("ħ must be finite and non-negative, got {hbar}")));
    }
    Ok(())
}

pub(crate) fn relaxation_rate(tau: f64) -> f64 {
    if tau.is_infinite() {
        0.0
    } else {
        1.0 / tau
    }
}

/// Assemble `A` and `G` at one point. `jet[k] = V^{(k)}(x)` for `k = 0..=M`;
/// `tau = ∞` disables relaxation.
pub fn assemble_1d(
    state: &MomentState1D,
    jet: &[f64],
    tau: f64,
    hbar: f64,
    regularized: bool,
) -> Result<QuasiLinearSystem1D> {
    state.validate()?;
    check_source_params(tau, hbar)?;
    let m = state.order();
    if jet.len() < m + 1 {
        return Err(Error::UnsupportedOrder {
            requested: m,
            available: jet.len().saturating_sub(1),
        });
    }
    let a = convection_matrix_1d(state, regularized);

    let mut g_relaxation = DMatrix::zeros(m + 1, m + 1);
    let rate = relaxation_rate(tau);
    for n in 3..=m {
        g_relaxation[(n, n)] = -rate;
    }
    let mut g_potential = wigner_matrix_1d(m, jet, hbar);
    g_potential[(1, 0)] = -jet[1] / state.rho;
    let g = &g_relaxation + &g_potential;
    Ok(QuasiLinearSystem1D {
        order: m,
        a,
        g,
        g_relaxation,
        g_potential,
        regularized,
    })
}
