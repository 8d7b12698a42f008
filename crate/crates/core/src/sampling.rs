//! Random admissible states and directions for seeded reports and tests.

use rand::Rng;

use crate::error::Result;
use crate::index::enumerate_index_set;
use crate::state::{MomentState1D, MomentState3D};

/// `ρ ∈ [0.3, 3)`, `𝒯 ∈ [0.2, 4)`, `u ∈ [−2, 2)` and `|f_n| < 0.2 ρ 𝒯^{n/2}`.
pub fn random_state_1d<R: Rng + ?Sized>(rng: &mut R, order: usize) -> Result<MomentState1D> {
    let rho = rng.random_range(0.3..3.0);
    let t: f64 = rng.random_range(0.2..4.0);
    let u = rng.random_range(-2.0..2.0);
    let coeffs = (3..=order)
        .map(|n| rng.random_range(-0.2..0.2) * rho * t.powf(0.5 * n as f64))
        .collect();
    MomentState1D::new(order, rho, u, 0.5 * rho * t, coeffs)
}

/// Anisotropic pressure `ρ𝒯(I + 0.15 S)` with `|S_ij| < 1`, which stays
/// positive definite by diagonal dominance, and `|f_α| < 0.05 ρ 𝒯^{|α|/2}`.
pub fn random_state_3d<R: Rng + ?Sized>(rng: &mut R, order: usize) -> Result<MomentState3D> {
    let rho = rng.random_range(0.5..2.0);
    let t: f64 = rng.random_range(0.5..2.0);
    let u = [0; 3].map(|_| rng.random_range(-1.0..1.0));
    let mut p = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            p[i][j] = rho * t * (delta + 0.15 * rng.random_range(-1.0..1.0));
            p[j][i] = p[i][j];
        }
    }
    let mut state = MomentState3D::new(order, rho, u, p)?;
    for alpha in enumerate_index_set(order)?.iter() {
        if alpha.order() >= 3 {
            let scale = rho * t.powf(0.5 * alpha.order() as f64);
            state.set_coeff(*alpha, rng.random_range(-0.05..0.05) * scale)?;
        }
    }
    Ok(state)
}

/// Uniformly distributed unit vector, by rejection from the cube.
pub fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v = [0; 3].map(|_| rng.random_range(-1.0..1.0));
        let norm = v.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
        if (1e-3..=1.0).contains(&norm) {
            return v.map(|x| x / norm);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_are_admissible_and_seeded() {
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        for order in 3..=6 {
            let s = random_state_1d(&mut a, order).unwrap();
            assert!(s.is_admissible());
            assert_eq!(s, random_state_1d(&mut b, order).unwrap());
            let s3 = random_state_3d(&mut a, order).unwrap();
            assert!(s3.is_admissible());
            assert_eq!(s3, random_state_3d(&mut b, order).unwrap());
            let n = random_direction(&mut a);
            assert!((n.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
            random_direction(&mut b);
        }
    }
}
