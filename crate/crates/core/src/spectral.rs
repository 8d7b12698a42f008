//! Eigenstructure of assembled systems and hyperbolicity certification.
//!
//! The regularized 1D matrix has spectrum `u + c√𝒯` over the roots `c` of
//! `He_{M+1}`. In 3D, `Σ_j n_j M̂_j` has spectrum `u·n + c√𝒯` over the roots
//! of `He_m` for every `1 ≤ m ≤ M+1`, where the roots of `He_m` appear with
//! multiplicity `M + 2 − m` each (fixture table below, checked numerically).

use nalgebra::{Complex, DMatrix};
use ndarray::Array2;
use ndarray_linalg::EigVals;
use serde::Serialize;

use crate::assembly::{QuasiLinearSystem1D, QuasiLinearSystem3D};
use crate::error::{Error, Result};
use crate::hermite::hermite_roots;
use crate::state::{MomentState1D, MomentState3D};

/// Largest condition number of the eigenvector matrix still accepted as diagonalizable.
pub const CONDITION_THRESHOLD: f64 = 1e8;

/// Imaginary parts below this multiple of the spectral scale count as zero.
pub const REAL_TOLERANCE: f64 = 1e-8;

const CLUSTER_TOLERANCE: f64 = 1e-5;
const NULL_TOLERANCE: f64 = 1e-6;

/// Multiplicity of each root of `He_m`, `m = 1..=M+1`, indexed by `M − 3`.
const MULTIPLICITIES_3D: [&[usize]; 5] = [
    &[4, 3, 2, 1],
    &[5, 4, 3, 2, 1],
    &[6, 5, 4, 3, 2, 1],
    &[7, 6, 5, 4, 3, 2, 1],
    &[8, 7, 6, 5, 4, 3, 2, 1],
];

/// Orders with a frozen 3D multiplicity table.
pub const SUPPORTED_3D_ORDERS: std::ops::RangeInclusive<usize> = 3..=7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub order: usize,
    pub dimension: usize,
    /// Real parts of the computed eigenvalues, sorted.
    pub eigenvalues: Vec<f64>,
    pub max_imaginary: f64,
    pub predicted: Vec<f64>,
    pub max_abs_deviation: f64,
    /// `σ_max/σ_min` of the unit-column eigenvector matrix; infinite when defective or complex.
    pub eigenvector_condition: f64,
    pub hyperbolic: bool,
}

fn check_temperature(temperature: f64) -> Result<()> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Domain(format!("temperature must be positive, got {temperature}")));
    }
    Ok(())
}

/// `{u + c√𝒯 : He_{M+1}(c) = 0}`, sorted.
pub fn predicted_spectrum_1d(order: usize, u: f64, temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    let s = temperature.sqrt();
    Ok(hermite_roots(order + 1)?.into_iter().map(|c| u + c * s).collect())
}

/// Distinct predicted 3D eigenvalues with multiplicities, sorted by value.
pub fn predicted_spectrum_3d(order: usize, u: [f64; 3], temperature: f64, n: [f64; 3]) -> Result<Vec<(f64, usize)>> {
    check_temperature(temperature)?;
    let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("direction must be a unit vector, |n| = {norm}")));
    }
    if !SUPPORTED_3D_ORDERS.contains(&order) {
        return Err(Error::UnsupportedOrder {
            requested: order,
            available: *SUPPORTED_3D_ORDERS.end(),
        });
    }
    let un: f64 = (0..3).map(|d| u[d] * n[d]).sum();
    let s = temperature.sqrt();
    let mut out: Vec<(f64, usize)> = Vec::new();
    for (k, &mult) in MULTIPLICITIES_3D[order - 3].iter().enumerate() {
        for c in hermite_roots(k + 1)? {
            let value = un + c * s;
            match out.iter_mut().find(|(v, _)| (*v - value).abs() <= 1e-12 * (1.0 + value.abs())) {
                Some(slot) => slot.1 += mult,
                None => out.push((value, mult)),
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Flattened predicted 3D multiset, sorted.
pub fn predicted_values_3d(order: usize, u: [f64; 3], temperature: f64, n: [f64; 3]) -> Result<Vec<f64>> {
    Ok(predicted_spectrum_3d(order, u, temperature, n)?
        .into_iter()
        .flat_map(|(v, m)| std::iter::repeat_n(v, m))
        .collect())
}

/// Greedy nearest pairing of two multisets; returns the largest pair distance,
/// or infinity when the sizes differ.
pub fn match_multisets(computed: &[f64], predicted: &[f64]) -> f64 {
    if computed.len() != predicted.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; predicted.len()];
    let mut worst = 0.0f64;
    for &c in computed {
        let mut best: Option<(usize, f64)> = None;
        for (k, &p) in predicted.iter().enumerate() {
            if used[k] {
                continue;
            }
            let d = (c - p).abs();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((k, d));
            }
        }
        let (k, d) = best.expect("sizes agree");
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}

fn spectral_scale(a: &DMatrix<f64>) -> f64 {
    a.norm().max(1.0)
}

/// Eigenvalues of a general real matrix (LAPACK `dgeev`).
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if !a.iter().all(|x| x.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let dense = Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)]);
    let ev = dense
        .eigvals()
        .map_err(|e| Error::Numerical(format!("eigensolver failed: {e}")))?;
    if !ev.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Numerical("eigensolver did not converge".into()));
    }
    Ok(ev.iter().copied().collect())
}

/// Groups sorted real values whose neighbors lie within `tol`.
fn clusters(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] > tol {
            let group = &values[start..k];
            out.push((group.iter().sum::<f64>() / group.len() as f64, group.len()));
            start = k;
        }
    }
    out
}

/// Unit eigenvectors for a real spectrum given as sorted real values. Each
/// cluster of multiplicity `k` contributes the `k` right singular vectors of
/// `A − λI` with smallest singular values; `None` when one of those singular
/// values is not negligible (defective eigenvalue).
pub fn eigenvectors(a: &DMatrix<f64>, sorted_real: &[f64]) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let scale = spectral_scale(a);
    let mut columns = Vec::with_capacity(n);
    for (lambda, k) in clusters(sorted_real, CLUSTER_TOLERANCE * scale) {
        let shifted = a - DMatrix::identity(n, n) * lambda;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
        for &i in order.iter().take(k) {
            if svd.singular_values[i] > NULL_TOLERANCE * scale {
                return None;
            }
            columns.push(v_t.row(i).transpose());
        }
    }
    Some(DMatrix::from_columns(&columns))
}

/// `σ_max/σ_min`.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Certify an arbitrary matrix against a predicted spectrum.
pub fn certify_matrix(a: &DMatrix<f64>, order: usize, predicted: Vec<f64>) -> Result<SpectralReport> {
    let ev = eigenvalues(a)?;
    let scale = spectral_scale(a);
    let max_imaginary = ev.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let mut real: Vec<f64> = ev.iter().map(|z| z.re).collect();
    real.sort_by(f64::total_cmp);
    let is_real = max_imaginary <= REAL_TOLERANCE * scale;
    let eigenvector_condition = if is_real {
        eigenvectors(a, &real).map_or(f64::INFINITY, |v| condition_number(&v))
    } else {
        f64::INFINITY
    };
    let max_abs_deviation = match_multisets(&real, &predicted);
    Ok(SpectralReport {
        order,
        dimension: a.nrows(),
        eigenvalues: real,
        max_imaginary,
        predicted,
        max_abs_deviation,
        eigenvector_condition,
        hyperbolic: is_real && eigenvector_condition < CONDITION_THRESHOLD,
    })
}

pub fn certify_1d(system: &QuasiLinearSystem1D, state: &MomentState1D) -> Result<SpectralReport> {
    let predicted = predicted_spectrum_1d(system.order, state.u, state.temperature())?;
    certify_matrix(&system.a, system.order, predicted)
}

/// Certify `Σ_j n_j M̂_j` in direction `n`.
pub fn certify_3d(system: &QuasiLinearSystem3D, state: &MomentState3D, n: [f64; 3]) -> Result<SpectralReport> {
    let predicted = predicted_values_3d(system.order, state.u, state.temperature(), n)?;
    certify_matrix(&system.along(n), system.order, predicted)
}
