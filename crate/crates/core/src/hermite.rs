//! Probabilists' Hermite polynomials `He_n` and the scaled Hermite basis.
//!
//! `He_n(x) = (-1)^n e^{x²/2} dⁿ/dxⁿ e^{-x²/2}`, generated by the recursion
//! `He_{n+1} = x He_n - n He_{n-1}`. Indices below zero evaluate to zero, so
//! callers may shift multi-indices freely.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest polynomial order accepted by [`hermite_roots`].
pub const MAX_ROOT_ORDER: usize = 64;

const SATURATION: f64 = 1e300;

/// Value of `He_n(x)` together with a flag raised when the recursion had to
/// be clamped at `±1e300`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteValue {
    pub value: f64,
    pub saturated: bool,
}

/// `He_n(x)`, zero for `n < 0`.
pub fn hermite_eval(n: i64, x: f64) -> f64 {
    hermite_eval_flagged(n, x).value
}

/// `He_n(x)` with overflow reporting.
pub fn hermite_eval_flagged(n: i64, x: f64) -> HermiteValue {
    if n < 0 {
        return HermiteValue {
            value: 0.0,
            saturated: false,
        };
    }
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut saturated = false;
    for k in 0..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
        if !cur.is_finite() || cur.abs() > SATURATION {
            saturated = true;
            cur = SATURATION.copysign(if cur.is_nan() { 1.0 } else { cur });
            if prev.abs() > SATURATION || !prev.is_finite() {
                prev = SATURATION.copysign(prev);
            }
        }
    }
    HermiteValue {
        value: cur,
        saturated,
    }
}

/// Normalized values `ψ_k = He_k / √(k!)` for `k = 0..=n`.
///
/// The normalized recursion stays bounded for the orders used here and is
/// what root polishing and quadrature weights rely on.
pub fn normalized_hermite_all(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n == 0 {
        return out;
    }
    out.push(x);
    for k in 1..n {
        let next = (x * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// `Σ_k |c_k| |x|^k` for `He_n = Σ_k c_k x^k`: the magnitude against which
/// the rounding error of evaluating `He_n(x)` should be judged.
pub fn hermite_abs_scale(n: usize, x: f64) -> f64 {
    let ax = x.abs();
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let next = ax * cur + k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// The `n` real roots of `He_n`, strictly increasing and symmetric about 0.
///
/// Eigenvalues of the symmetric Jacobi matrix (zero diagonal, off-diagonal
/// `√k`), followed by one Newton step per root.
pub fn hermite_roots(n: usize) -> Result<Vec<f64>> {
    if n == 0 || n > MAX_ROOT_ORDER {
        return Err(Error::InvalidArgument(format!(
            "Hermite root order must lie in 1..={MAX_ROOT_ORDER}, got {n}"
        )));
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j {
            (j as f64).sqrt()
        } else if j + 1 == i {
            (i as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut roots: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    for r in roots.iter_mut() {
        let psi = normalized_hermite_all(n, *r);
        let deriv = (n as f64).sqrt() * psi[n - 1];
        if deriv != 0.0 {
            *r -= psi[n] / deriv;
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    // exact reflection symmetry
    for i in 0..n / 2 {
        let m = 0.5 * (roots[n - 1 - i] - roots[i]);
        roots[i] = -m;
        roots[n - 1 - i] = m;
    }
    if n % 2 == 1 {
        roots[n / 2] = 0.0;
    }
    Ok(roots)
}

/// Gauss–Hermite rule for the weight `e^{-x²/2}` on the real line.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// `n`-point rule, exact for polynomials of degree `≤ 2n − 1`.
    pub fn new(n: usize) -> Result<Self> {
        let nodes = hermite_roots(n)?;
        let norm = (2.0 * std::f64::consts::PI).sqrt();
        let weights = nodes
            .iter()
            .map(|&x| {
                let psi = normalized_hermite_all(n, x);
                norm / (n as f64 * psi[n - 1] * psi[n - 1])
            })
            .collect();
        Ok(Self { nodes, weights })
    }

    /// `∫ h(x) e^{-x²/2} dx`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, h: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * h(x))
            .sum()
    }
}

/// Parameters `(𝒯, u)` of the scaled Hermite basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteBasisParams {
    temperature_scale: f64,
    shift: Vec<f64>,
}

impl HermiteBasisParams {
    pub fn new(temperature_scale: f64, shift: Vec<f64>) -> Result<Self> {
        if !(temperature_scale > 0.0) || !temperature_scale.is_finite() {
            return Err(Error::Domain(format!(
                "temperature scale must be positive, got {temperature_scale}"
            )));
        }
        Ok(Self {
            temperature_scale,
            shift,
        })
    }

    pub fn temperature_scale(&self) -> f64 {
        self.temperature_scale
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn dimension(&self) -> usize {
        self.shift.len()
    }
}

/// `𝓗_{𝒯,α}((v − u)/√𝒯)`: the product over dimensions of
/// `(2π)^{-1/2} 𝒯^{-(α_d+1)/2} He_{α_d}(ξ_d) e^{-ξ_d²/2}`.
///
/// Returns 0 when any component of `alpha` is negative.
pub fn basis_eval(params: &HermiteBasisParams, alpha: &[i64], v: &[f64]) -> Result<f64> {
    let dim = params.dimension();
    if alpha.len() != dim || v.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: shift has {dim} components, alpha {}, v {}",
            alpha.len(),
            v.len()
        )));
    }
    if alpha.iter().any(|&a| a < 0) {
        return Ok(0.0);
    }
    let t = params.temperature_scale;
    let sqrt_t = t.sqrt();
    let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut value = 1.0;
    for d in 0..dim {
        let xi = (v[d] - params.shift[d]) / sqrt_t;
        value *= inv_sqrt_2pi
            * t.powf(-(alpha[d] as f64 + 1.0) / 2.0)
            * hermite_eval(alpha[d], xi)
            * (-0.5 * xi * xi).exp();
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn low_order_values() {
        assert_eq!(hermite_eval(0, 1.7), 1.0);
        for x in [-2.0, 0.0, 3.0] {
            assert_eq!(hermite_eval(1, x), x);
        }
        // He_3 = x³ − 3x
        assert_eq!(hermite_eval(3, 2.0), 2.0);
        assert_eq!(hermite_eval(-1, 0.3), 0.0);
        assert_eq!(hermite_eval(-5, 10.0), 0.0);
    }

    #[test]
    fn saturation_is_flagged() {
        let v = hermite_eval_flagged(64, 1e6);
        assert!(v.saturated);
        assert!(v.value.is_finite());
        assert!(!hermite_eval_flagged(10, 2.0).saturated);
    }

    #[test]
    fn small_root_sets() {
        assert_eq!(hermite_roots(1).unwrap(), vec![0.0]);
        let r2 = hermite_roots(2).unwrap();
        assert!((r2[0] + 1.0).abs() < 1e-15 && (r2[1] - 1.0).abs() < 1e-15);
        let s6 = 6f64.sqrt();
        let expect = [
            -(3.0 + s6).sqrt(),
            -(3.0 - s6).sqrt(),
            (3.0 - s6).sqrt(),
            (3.0 + s6).sqrt(),
        ];
        let r4 = hermite_roots(4).unwrap();
        for (a, b) in r4.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn root_order_out_of_range() {
        assert!(matches!(hermite_roots(0), Err(Error::InvalidArgument(_))));
        assert!(matches!(hermite_roots(65), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn roots_are_zeros_and_strictly_sorted() {
        for n in 1..=MAX_ROOT_ORDER {
            let roots = hermite_roots(n).unwrap();
            assert_eq!(roots.len(), n);
            for w in roots.windows(2) {
                assert!(w[0] < w[1]);
            }
            for &r in &roots {
                let res = hermite_eval(n as i64, r).abs();
                assert!(res <= 1e-10 * hermite_abs_scale(n, r), "n={n} r={r} res={res}");
            }
        }
    }

    #[test]
    fn orthogonality_by_quadrature() {
        let norm = (2.0 * std::f64::consts::PI).sqrt();
        for l in 0..=10usize {
            for n in 0..=10usize {
                let rule = GaussHermite::new(l + n + 2).unwrap();
                let val = rule.integrate(|x| hermite_eval(l as i64, x) * hermite_eval(n as i64, x));
                let expect = if l == n { factorial(l) * norm } else { 0.0 };
                let scale = factorial(l.max(n)) * norm;
                assert!((val - expect).abs() <= 1e-10 * scale, "l={l} n={n} val={val}");
            }
        }
    }

    #[test]
    fn weighted_derivative_relation() {
        let h = 1e-4;
        let g = |n: i64, x: f64| hermite_eval(n, x) * (-0.5 * x * x).exp();
        for n in 0..6i64 {
            for k in 0..20 {
                let x = -3.0 + 0.3 * k as f64 + 0.01;
                let fd = (g(n, x + h) - g(n, x - h)) / (2.0 * h);
                assert!((fd + g(n + 1, x)).abs() < 1e-6, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn basis_values() {
        let p1 = HermiteBasisParams::new(1.0, vec![0.0]).unwrap();
        let v = basis_eval(&p1, &[0], &[0.0]).unwrap();
        assert!((v - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-16);
        assert_eq!(basis_eval(&p1, &[-1], &[0.4]).unwrap(), 0.0);

        let p3 = HermiteBasisParams::new(1.0, vec![0.0; 3]).unwrap();
        let v3 = basis_eval(&p3, &[0, 0, 0], &[0.0; 3]).unwrap();
        assert!((v3 - (2.0 * std::f64::consts::PI).powf(-1.5)).abs() < 1e-16);
        assert_eq!(basis_eval(&p3, &[1, -1, 0], &[0.1, 0.2, 0.3]).unwrap(), 0.0);
    }

    #[test]
    fn basis_rejects_bad_params() {
        assert!(matches!(
            HermiteBasisParams::new(0.0, vec![0.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            HermiteBasisParams::new(-1.0, vec![0.0]),
            Err(Error::Domain(_))
        ));
        let p = HermiteBasisParams::new(1.0, vec![0.0]).unwrap();
        assert!(basis_eval(&p, &[0, 0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn basis_derivative_shift() {
        let p = HermiteBasisParams::new(0.7, vec![0.2, -0.1, 0.4]).unwrap();
        let h = 1e-5;
        let alphas = [[0, 0, 0], [1, 2, 0], [3, 0, 1], [2, 2, 2]];
        let points = [[0.1, 0.0, 0.3], [-0.5, 0.8, 1.1], [1.2, -0.7, 0.0]];
        for a in alphas {
            for v in points {
                for j in 0..3 {
                    let mut vp = v;
                    let mut vm = v;
                    vp[j] += h;
                    vm[j] -= h;
                    let fd = (basis_eval(&p, &a, &vp).unwrap() - basis_eval(&p, &a, &vm).unwrap())
                        / (2.0 * h);
                    let mut shifted = a;
                    shifted[j] += 1;
                    let exact = -basis_eval(&p, &shifted, &v).unwrap();
                    assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()), "{a:?} {v:?} {j}");
                }
            }
        }
    }
}
