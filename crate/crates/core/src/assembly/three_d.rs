use nalgebra::DMatrix;

use super::one_d::relaxation_rate;
use super::{wigner_source_column, QuasiLinearSystem3D};
use crate::error::{Error, Result};
use crate::index::{enumerate_index_set, MultiIndex};
use crate::potential::Potential3D;
use crate::state::MomentState3D;

fn pos(alpha: MultiIndex) -> usize {
    alpha.position()
}

/// Adds `c · ∂f_β` to `row` as a linear form in the unknowns.
/// `f_{e_i} ≡ 0`, `f_{2e_k} = w_{2e_k} − ⅓Σ_d w_{2e_d}` and `f_β` with `|β| > M` is closed to zero.
fn add_df(mat: &mut DMatrix<f64>, row: usize, beta: Option<MultiIndex>, c: f64, order: usize) {
    let Some(beta) = beta else { return };
    if c == 0.0 {
        return;
    }
    match beta.order() {
        0 => mat[(row, 0)] += c,
        1 => {}
        2 => {
            if beta.0.contains(&2) {
                mat[(row, pos(beta))] += c;
                for d in 0..3 {
                    mat[(row, pos(MultiIndex::axis(d, 2)))] -= c / 3.0;
                }
            } else {
                mat[(row, pos(beta))] += c;
            }
        }
        k if k > order => {}
        _ => mat[(row, pos(beta))] += c,
    }
}

/// `c · ∂p_{jd}`.
fn add_dp(mat: &mut DMatrix<f64>, row: usize, j: usize, d: usize, c: f64) {
    if j == d {
        mat[(row, pos(MultiIndex::axis(d, 2)))] += 2.0 * c;
    } else {
        mat[(row, pos(MultiIndex::unit(j).plus_unit(d)))] += c;
    }
}

/// `c · ½∂𝒯` with `𝒯 = (2/(3ρ)) Σ_d w_{2e_d}`.
fn add_half_dt(mat: &mut DMatrix<f64>, row: usize, c: f64, rho: f64, t: f64) {
    if c == 0.0 {
        return;
    }
    for d in 0..3 {
        mat[(row, pos(MultiIndex::axis(d, 2)))] += c / (3.0 * rho);
    }
    mat[(row, 0)] -= c * t / (2.0 * rho);
}

/// `c · ∂q_j` with `q_j = 2f_{3e_j} + Σ_d f_{2e_d+e_j}`.
fn add_dq(mat: &mut DMatrix<f64>, row: usize, j: usize, c: f64, order: usize) {
    add_df(mat, row, Some(MultiIndex::axis(j, 3)), 2.0 * c, order);
    for d in 0..3 {
        add_df(mat, row, Some(MultiIndex::axis(d, 2).plus_unit(j)), c, order);
    }
}

/// `α + Σ c_d e_d` as an integer vector, `None` if a component is negative.
fn offset(alpha: MultiIndex, terms: &[(usize, i64)]) -> Option<MultiIndex> {
    let mut a = alpha.0.map(|x| x as i64);
    for &(d, c) in terms {
        a[d] += c;
    }
    MultiIndex::from_signed(a).ok()
}

/// `M̂_j` for `j = 0, 1, 2`. Does not check admissibility.
pub(crate) fn convection_matrices_3d(state: &MomentState3D, regularized: bool) -> [DMatrix<f64>; 3] {
    let m = state.order();
    let set = enumerate_index_set(m).expect("validated order");
    let n = set.len();
    let rho = state.rho;
    let t = state.temperature();
    let p = state.pressure;
    let f = |a: Option<MultiIndex>| state.coeff_opt(a);
    let mut out = [DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n)];

    for (j, mj) in out.iter_mut().enumerate() {
        let uj = state.u[j];
        let ej = MultiIndex::unit(j);
        // mass
        mj[(0, 0)] = uj;
        mj[(0, pos(ej))] = rho;
        // momentum
        for d in 0..3 {
            let r = pos(MultiIndex::unit(d));
            mj[(r, r)] += uj;
            add_dp(mj, r, j, d, 1.0 / rho);
        }
        // p_ii / 2
        for i in 0..3 {
            let two_i = MultiIndex::axis(i, 2);
            let r = pos(two_i);
            let dij = if i == j { 1.0 } else { 0.0 };
            mj[(r, r)] += uj;
            mj[(r, pos(ej))] += (0.5 + dij) * rho * t;
            for d in 0..3 {
                let beta = offset(two_i, &[(d, -1), (j, 1)]);
                mj[(r, pos(MultiIndex::unit(d)))] += (2.0 * dij + 1.0) * f(beta);
            }
            add_df(mj, r, Some(two_i.plus_unit(j)), 2.0 * dij + 1.0, m);
        }
        // remaining f_α with |α| ≥ 2
        for &alpha in set.iter() {
            let k = alpha.order();
            if k < 2 || (k == 2 && alpha.0.contains(&2)) {
                continue;
            }
            let r = pos(alpha);
            let closing = regularized && k == m;
            let aj1 = (alpha.0[j] + 1) as f64;
            let s2: f64 = (0..3).map(|kk| f(offset(alpha, &[(kk, -2)]))).sum();

            add_df(mj, r, alpha.minus_unit(j), t, m);
            add_df(mj, r, Some(alpha), uj, m);
            add_df(mj, r, Some(alpha.plus_unit(j)), aj1, m);

            for d in 0..3 {
                let mut cu = t * f(offset(alpha, &[(d, -1), (j, -1)])) - p[j][d] * s2 / (3.0 * rho);
                if !closing {
                    cu += aj1 * f(offset(alpha, &[(d, -1), (j, 1)]));
                }
                mj[(r, pos(MultiIndex::unit(d)))] += cu;
                add_dp(mj, r, j, d, -f(alpha.minus_unit(d)) / rho);
            }
            add_dq(mj, r, j, -s2 / (3.0 * rho), m);

            let mut ct = 0.0;
            for kk in 0..3 {
                ct += t * f(offset(alpha, &[(kk, -2), (j, -1)]));
                if !closing {
                    ct += aj1 * f(offset(alpha, &[(kk, -2), (j, 1)]));
                }
            }
            add_half_dt(mj, r, ct, rho, t);
        }
    }
    out
}

/// `Σ_j n_j M̂_j`.
pub fn directional_matrix(mhat: &[DMatrix<f64>; 3], n: [f64; 3]) -> DMatrix<f64> {
    &mhat[0] * n[0] + &mhat[1] * n[1] + &mhat[2] * n[2]
}

/// `M̂_j^Grad − M̂_j^regularized` for each direction.
pub fn regularization_correction_3d(state: &MomentState3D) -> [DMatrix<f64>; 3] {
    let g = convection_matrices_3d(state, false);
    let r = convection_matrices_3d(state, true);
    [&g[0] - &r[0], &g[1] - &r[1], &g[2] - &r[2]]
}

/// Assemble `M̂_1, M̂_2, M̂_3` and `G` at position `x`.
pub fn assemble_3d(
    state: &MomentState3D,
    potential: &Potential3D,
    x: [f64; 3],
    tau: f64,
    hbar: f64,
    regularized: bool,
) -> Result<QuasiLinearSystem3D> {
    state.validate()?;
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("relaxation time must be positive, got {tau}")));
    }
    if !hbar.is_finite() || hbar < 0.0 {
        return Err(Error::InvalidArgument(format!("ħ must be finite and non-negative, got {hbar}")));
    }
    let m = state.order();
    let set = enumerate_index_set(m)?;
    let n = set.len();
    let mhat = convection_matrices_3d(state, regularized);

    let rate = relaxation_rate(tau);
    let mut g_relaxation = DMatrix::zeros(n, n);
    let mut g_potential = DMatrix::zeros(n, n);
    for i in 0..3 {
        g_potential[(pos(MultiIndex::unit(i)), 0)] = -potential.derivative(MultiIndex::unit(i), x)? / state.rho;
    }
    for &alpha in set.iter() {
        let k = alpha.order();
        if k < 2 {
            continue;
        }
        let r = pos(alpha);
        if k == 2 && alpha.0.contains(&2) {
            for d in 0..3 {
                let c = pos(MultiIndex::axis(d, 2));
                let delta = if c == r { 1.0 } else { 0.0 };
                g_relaxation[(r, c)] = -rate * (delta - 1.0 / 3.0);
            }
        } else {
            g_relaxation[(r, r)] = -rate;
        }
        if k < 3 {
            continue;
        }
        let column = wigner_source_column(alpha, hbar, |l| {
            if l.order() < 3 {
                Ok(0.0)
            } else {
                potential.derivative(l, x)
            }
        })?;
        for (beta, value) in column {
            if alpha.order() - beta.order() < 3 {
                continue;
            }
            add_df(&mut g_potential, r, Some(beta), value, m);
        }
    }
    let g = &g_relaxation + &g_potential;
    Ok(QuasiLinearSystem3D {
        order: m,
        mhat,
        g,
        g_relaxation,
        g_potential,
        regularized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{Combination, PotentialModel};

    fn perturbed(order: usize) -> MomentState3D {
        let p = [[1.1, 0.05, -0.02], [0.05, 0.9, 0.03], [-0.02, 0.03, 1.0]];
        let mut s = MomentState3D::new(order, 1.2, [0.3, -0.1, 0.2], p).unwrap();
        for alpha in enumerate_index_set(order).unwrap().iter() {
            if alpha.order() >= 3 {
                let v = 0.01 * ((alpha.ordinal() * 7 % 11) as f64 - 5.0);
                s.set_coeff(*alpha, v).unwrap();
            }
        }
        s
    }

    #[test]
    fn conservation_rows() {
        let s = perturbed(3);
        let sys = assemble_3d(&s, &Potential3D::zero(), [0.0; 3], 1.0, 0.0, true).unwrap();
        let m1 = &sys.mhat[0];
        assert_eq!(m1[(0, 0)], s.u[0]);
        assert_eq!(m1[(0, 1)], s.rho);
        // u_1 row: u_1 ∂u_1 + (1/ρ)∂p_11
        assert_eq!(m1[(1, 1)], s.u[0]);
        assert!((m1[(1, pos(MultiIndex::axis(0, 2)))] - 2.0 / s.rho).abs() < 1e-15);
        // u_2 row picks ∂p_12
        assert!((m1[(2, pos(MultiIndex::new(1, 1, 0)))] - 1.0 / s.rho).abs() < 1e-15);
    }

    #[test]
    fn grad_correction_lives_in_top_rows() {
        let s = perturbed(4);
        let corr = regularization_correction_3d(&s);
        let set = enumerate_index_set(4).unwrap();
        for c in &corr {
            for (r, alpha) in set.iter().enumerate() {
                if alpha.order() < 4 {
                    assert!(c.row(r).iter().all(|&x| x == 0.0), "{alpha}");
                }
            }
        }
        assert!(corr[0].iter().any(|&x| x != 0.0));
    }

    #[test]
    fn relaxation_and_wigner_structure() {
        let pot = Potential3D::new(
            [PotentialModel::harmonic(1.0), bumpish(), PotentialModel::zero()],
            Combination::Product,
        );
        let s = perturbed(5);
        let sys = assemble_3d(&s, &pot, [0.3, 0.2, 0.1], 2.0, 1.0, true).unwrap();
        let n = sys.dimension();
        for r in 0..n {
            for c in r..n {
                assert_eq!(sys.g_potential[(r, c)], 0.0, "({r},{c})");
            }
        }
        let r = pos(MultiIndex::axis(0, 2));
        assert!((sys.g[(r, r)] + 0.5 * 2.0 / 3.0).abs() < 1e-15);
        assert!((sys.g[(r, pos(MultiIndex::axis(1, 2)))] - 0.5 / 3.0).abs() < 1e-15);
    }

    fn bumpish() -> PotentialModel {
        PotentialModel::new(crate::potential::PotentialKind::Polynomial {
            coeffs: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        })
    }

    #[test]
    fn third_order_wigner_entry() {
        let pot = Potential3D::new(
            [bumpish(), PotentialModel::zero(), PotentialModel::zero()],
            Combination::Sum,
        );
        let s = MomentState3D::maxwellian(3, 1.0, [0.0; 3], 1.0).unwrap();
        let h = 0.8;
        let x = [0.4, 0.0, 0.0];
        let sys = assemble_3d(&s, &pot, x, f64::INFINITY, h, true).unwrap();
        let v3 = pot.derivative(MultiIndex::axis(0, 3), x).unwrap();
        assert!((sys.g[(pos(MultiIndex::axis(0, 3)), 0)] - h * h / 24.0 * v3).abs() < 1e-14);
    }
}
