//! Quasi-linear moment systems `∂w/∂t + Σ_j M̂_j(w) ∂w/∂x_j = G w`.
//!
//! The convection matrices come from the moment equations of the drift term,
//! closed by dropping `∂f_{α+e_j}/∂x_j` for `|α| = M`. Regularization then
//! erases, in the `|α| = M` rows only, the terms carrying the factor
//! `(α_j + 1)`. `G` collects the force entry, the relaxation damping and the
//! Wigner-potential coupling, which only feeds higher moments from lower ones.

mod one_d;
mod three_d;

pub use one_d::{assemble_1d, convection_matrix_1d, regularization_correction_1d, wigner_matrix_1d};
pub use three_d::{assemble_3d, directional_matrix, regularization_correction_3d};

use nalgebra::DMatrix;

use crate::error::Result;
use crate::index::MultiIndex;

/// Assembled 1D system with unknowns `(ρ, u, P/2, f_3, …, f_M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiLinearSystem1D {
    pub order: usize,
    pub a: DMatrix<f64>,
    pub g: DMatrix<f64>,
    /// Relaxation part of `g` (diagonal `−1/τ` on `f_3..f_M`).
    pub g_relaxation: DMatrix<f64>,
    /// Force entry plus Wigner-potential coupling.
    pub g_potential: DMatrix<f64>,
    pub regularized: bool,
}

/// Assembled 3D system with unknowns ordered by ordinal number.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiLinearSystem3D {
    pub order: usize,
    pub mhat: [DMatrix<f64>; 3],
    pub g: DMatrix<f64>,
    pub g_relaxation: DMatrix<f64>,
    pub g_potential: DMatrix<f64>,
    pub regularized: bool,
}

impl QuasiLinearSystem1D {
    pub fn dimension(&self) -> usize {
        self.order + 1
    }
}

impl QuasiLinearSystem3D {
    pub fn dimension(&self) -> usize {
        self.g.nrows()
    }

    /// `Σ_j n_j M̂_j`.
    pub fn along(&self, n: [f64; 3]) -> DMatrix<f64> {
        directional_matrix(&self.mhat, n)
    }
}

/// Coefficient of `∂^λV/∂x^λ · f_{α−λ}` in the source of the `f_α` equation:
/// `−(ħ/2i)^{|λ|−1}/λ!`, real for odd `|λ|`; `None` for even `|λ|`.
pub fn wigner_coefficient(lambda: MultiIndex, hbar: f64) -> Option<f64> {
    let order = lambda.order();
    if order % 2 == 0 {
        return None;
    }
    let k = (order - 1) as i32;
    // (1/i)^k = (−1)^{k/2} for even k
    let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
    Some(-sign * (0.5 * hbar).powi(k) / lambda.factorial())
}

/// 1D version of [`wigner_coefficient`] for `λ = n`.
pub fn wigner_coefficient_1d(lambda: usize, hbar: f64) -> Option<f64> {
    wigner_coefficient(MultiIndex::axis(0, lambda), hbar)
}

/// Source contributions `(α − λ, −(ħ/2i)^{|λ|−1}/λ! ∂^λV)` to the `f_α`
/// equation for every odd `|λ|` with `λ ≤ α`. Includes `|λ| = 1`.
pub fn wigner_source_column<F>(alpha: MultiIndex, hbar: f64, mut derivative: F) -> Result<Vec<(MultiIndex, f64)>>
where
    F: FnMut(MultiIndex) -> Result<f64>,
{
    let mut out = Vec::new();
    for lambda in alpha.sub_indices() {
        if let Some(c) = wigner_coefficient(lambda, hbar) {
            let target = alpha.checked_sub(lambda).expect("λ ≤ α");
            out.push((target, c * derivative(lambda)?));
        }
    }
    out.sort_by_key(|(t, _)| t.ordinal());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wigner_coefficients() {
        let h = 1.3f64;
        let c3 = wigner_coefficient(MultiIndex::axis(0, 3), h).unwrap();
        assert!((c3 - h * h / 24.0).abs() < 1e-15);
        let c5 = wigner_coefficient(MultiIndex::axis(1, 5), h).unwrap();
        assert!((c5 + h.powi(4) / 1920.0).abs() < 1e-15);
        assert_eq!(wigner_coefficient(MultiIndex::unit(2), h), Some(-1.0));
        assert_eq!(wigner_coefficient(MultiIndex::new(1, 1, 0), h), None);
        // λ = (1,1,1): −(ħ/2i)²/1 = ħ²/4
        let c111 = wigner_coefficient(MultiIndex::new(1, 1, 1), h).unwrap();
        assert!((c111 - h * h / 4.0).abs() < 1e-15);
        assert_eq!(wigner_coefficient_1d(3, 0.0), Some(0.0));
    }

    #[test]
    fn source_column_for_third_order_axis() {
        let alpha = MultiIndex::axis(0, 3);
        let col = wigner_source_column(alpha, 2.0, |l| Ok(10.0 * l.order() as f64)).unwrap();
        // λ = e1 → f_{2e1}, λ = 3e1 → f_0
        assert_eq!(col.len(), 2);
        assert_eq!(col[0].0, MultiIndex::ZERO);
        assert!((col[0].1 - 4.0 / 24.0 * 30.0).abs() < 1e-14);
        assert_eq!(col[1].0, MultiIndex::axis(0, 2));
        assert!((col[1].1 + 10.0).abs() < 1e-14);
        for (target, _) in wigner_source_column(MultiIndex::new(2, 1, 2), 1.0, |_| Ok(1.0)).unwrap() {
            assert_eq!((5 - target.order()) % 2, 1);
        }
    }
}
