//! Moment unknowns `w` at one spatial point.
//!
//! 1D: `w = (ρ, u, P/2, f_3, …, f_M)`; `f_1 = f_2 = 0` are implicit.
//!
//! 3D: `w_{𝒩(0)} = ρ`, `w_{𝒩(e_i)} = u_i`, `w_{𝒩(2e_i)} = p_ii/2`,
//! `w_{𝒩(e_i+e_j)} = p_ij`, `w_{𝒩(α)} = f_α` for `3 ≤ |α| ≤ M`. The first and
//! second order Hermite coefficients are never stored; they follow from `u`
//! and the pressure tensor through `p_ij = δ_ij ρ𝒯 + (1 + δ_ij) f_{e_i+e_j}`,
//! so `f_{e_i} = 0` and `Σ_d f_{2e_d} = 0` hold by construction.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::hermite::{basis_eval, HermiteBasisParams};
use crate::index::{enumerate_index_set, moment_count, MultiIndex, MAX_ORDER};

fn check_order(order: usize) -> Result<()> {
    if !(3..=MAX_ORDER).contains(&order) {
        return Err(Error::InvalidArgument(format!(
            "truncation order must lie in 3..={MAX_ORDER}, got {order}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentState1D {
    order: usize,
    pub rho: f64,
    pub u: f64,
    pub half_pressure: f64,
    coeffs: Vec<f64>,
}

impl MomentState1D {
    /// `coeffs` holds `f_3 … f_M`.
    pub fn new(order: usize, rho: f64, u: f64, half_pressure: f64, coeffs: Vec<f64>) -> Result<Self> {
        check_order(order)?;
        if coeffs.len() != order - 2 {
            return Err(Error::InvalidArgument(format!(
                "order {order} needs {} coefficients f_3..f_M, got {}",
                order - 2,
                coeffs.len()
            )));
        }
        Ok(Self {
            order,
            rho,
            u,
            half_pressure,
            coeffs,
        })
    }

    /// Local equilibrium with pressure `P = ρ𝒯`.
    pub fn maxwellian(order: usize, rho: f64, u: f64, temperature: f64) -> Result<Self> {
        check_positive("density", rho)?;
        check_positive("temperature", temperature)?;
        Self::new(order, rho, u, 0.5 * rho * temperature, vec![0.0; order - 2])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pressure(&self) -> f64 {
        2.0 * self.half_pressure
    }

    pub fn temperature(&self) -> f64 {
        self.pressure() / self.rho
    }

    /// `q = 3 f_3`.
    pub fn heat_flux(&self) -> f64 {
        3.0 * self.coeffs[0]
    }

    /// `f_3 … f_M`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Hermite coefficient `f_n` with `f_0 = ρ`, `f_1 = f_2 = 0`, and zero
    /// beyond the truncation or below zero.
    pub fn coeff(&self, n: i64) -> f64 {
        match n {
            0 => self.rho,
            n if n < 3 => 0.0,
            n if n as usize > self.order => 0.0,
            n => self.coeffs[n as usize - 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.rho.is_finite()
            && self.u.is_finite()
            && self.half_pressure.is_finite()
            && self.coeffs.iter().all(|c| c.is_finite());
        if !finite {
            return Err(Error::Inadmissible("non-finite moment".into()));
        }
        if !(self.rho > 0.0) {
            return Err(Error::Inadmissible(format!("density {} is not positive", self.rho)));
        }
        if !(self.half_pressure > 0.0) {
            return Err(Error::Inadmissible(format!(
                "pressure {} is not positive",
                self.pressure()
            )));
        }
        Ok(())
    }

    pub fn is_admissible(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut w = DVector::zeros(self.order + 1);
        w[0] = self.rho;
        w[1] = self.u;
        w[2] = self.half_pressure;
        for (k, c) in self.coeffs.iter().enumerate() {
            w[3 + k] = *c;
        }
        w
    }

    pub fn from_slice(order: usize, w: &[f64]) -> Result<Self> {
        check_order(order)?;
        if w.len() != order + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} unknowns, got {}",
                order + 1,
                w.len()
            )));
        }
        Self::new(order, w[0], w[1], w[2], w[3..].to_vec())
    }

    /// Named flat record `rho, u, P, f3, …, fM`.
    pub fn record(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("rho".to_string(), self.rho),
            ("u".to_string(), self.u),
            ("P".to_string(), self.pressure()),
        ];
        for (k, c) in self.coeffs.iter().enumerate() {
            out.push((format!("f{}", k + 3), *c));
        }
        out
    }

    pub fn record_names(order: usize) -> Vec<String> {
        let mut out = vec!["rho".to_string(), "u".to_string(), "P".to_string()];
        out.extend((3..=order).map(|n| format!("f{n}")));
        out
    }

    /// Names of the unknowns in vector order: `rho, u, P/2, f3, …`.
    pub fn unknown_names(order: usize) -> Vec<String> {
        let mut out = vec!["rho".to_string(), "u".to_string(), "P/2".to_string()];
        out.extend((3..=order).map(|n| format!("f{n}")));
        out
    }
}

/// Temperature, heat flux and second-order coefficients of a 1D state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derived1D {
    pub temperature: f64,
    pub heat_flux: f64,
}

pub fn derived_quantities_1d(state: &MomentState1D) -> Result<Derived1D> {
    state.validate()?;
    Ok(Derived1D {
        temperature: state.temperature(),
        heat_flux: state.heat_flux(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentState3D {
    order: usize,
    pub rho: f64,
    pub u: [f64; 3],
    pub pressure: [[f64; 3]; 3],
    /// `f_α` for `3 ≤ |α| ≤ M`, stored at `𝒩(α) − 𝒩(3e_1)`.
    high: Vec<f64>,
}

/// Ordinal position of `3e_1`, the first third-order index.
const FIRST_HIGH: usize = 10;

impl MomentState3D {
    pub fn new(order: usize, rho: f64, u: [f64; 3], pressure: [[f64; 3]; 3]) -> Result<Self> {
        check_order(order)?;
        for i in 0..3 {
            for j in 0..i {
                if pressure[i][j] != pressure[j][i] {
                    return Err(Error::InvalidArgument("pressure tensor must be symmetric".into()));
                }
            }
        }
        let n = moment_count(order)?;
        Ok(Self {
            order,
            rho,
            u,
            pressure,
            high: vec![0.0; n - FIRST_HIGH],
        })
    }

    pub fn maxwellian(order: usize, rho: f64, u: [f64; 3], temperature: f64) -> Result<Self> {
        check_positive("density", rho)?;
        check_positive("temperature", temperature)?;
        let p = rho * temperature;
        Self::new(order, rho, u, [[p, 0.0, 0.0], [0.0, p, 0.0], [0.0, 0.0, p]])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.high.len() + FIRST_HIGH
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn temperature(&self) -> f64 {
        (self.pressure[0][0] + self.pressure[1][1] + self.pressure[2][2]) / (3.0 * self.rho)
    }

    /// Set `f_α` for `3 ≤ |α| ≤ M`.
    pub fn set_coeff(&mut self, alpha: MultiIndex, value: f64) -> Result<()> {
        let k = alpha.order();
        if k < 3 || k > self.order {
            return Err(Error::InvalidArgument(format!(
                "only coefficients with 3 ≤ |α| ≤ {} are stored, got {alpha}",
                self.order
            )));
        }
        self.high[alpha.position() - FIRST_HIGH] = value;
        Ok(())
    }

    /// Hermite coefficient `f_α` in the native `(u, 𝒯)` basis.
    pub fn coeff(&self, alpha: MultiIndex) -> f64 {
        match alpha.order() {
            0 => self.rho,
            1 => 0.0,
            2 => {
                let (i, j) = pair_of(alpha);
                self.second_order(i, j)
            }
            k if k > self.order => 0.0,
            _ => self.high[alpha.position() - FIRST_HIGH],
        }
    }

    /// `f_α` for an index that may have gone negative.
    pub fn coeff_opt(&self, alpha: Option<MultiIndex>) -> f64 {
        alpha.map_or(0.0, |a| self.coeff(a))
    }

    /// `f_{e_i+e_j} = (p_ij − δ_ij ρ𝒯)/(1 + δ_ij)`.
    pub fn second_order(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.5 * (self.pressure[i][i] - self.rho * self.temperature())
        } else {
            self.pressure[i][j]
        }
    }

    /// `q_i = 2 f_{3e_i} + Σ_d f_{2e_d+e_i}`.
    pub fn heat_flux(&self) -> [f64; 3] {
        let mut q = [0.0; 3];
        for (i, qi) in q.iter_mut().enumerate() {
            *qi = 2.0 * self.coeff(MultiIndex::axis(i, 3));
            for d in 0..3 {
                *qi += self.coeff(MultiIndex::axis(d, 2).plus_unit(i));
            }
        }
        q
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.rho.is_finite()
            && self.u.iter().all(|x| x.is_finite())
            && self.pressure.iter().flatten().all(|x| x.is_finite())
            && self.high.iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::Inadmissible("non-finite moment".into()));
        }
        if !(self.rho > 0.0) {
            return Err(Error::Inadmissible(format!("density {} is not positive", self.rho)));
        }
        let t = self.temperature();
        if !(t > 0.0) {
            return Err(Error::Inadmissible(format!("temperature {t} is not positive")));
        }
        Ok(())
    }

    pub fn is_admissible(&self) -> bool {
        self.validate().is_ok()
    }

    /// Unknown vector ordered by ordinal number.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut w = DVector::zeros(self.len());
        w[0] = self.rho;
        for i in 0..3 {
            w[MultiIndex::unit(i).position()] = self.u[i];
            for j in i..3 {
                let pos = MultiIndex::unit(i).plus_unit(j).position();
                w[pos] = if i == j {
                    0.5 * self.pressure[i][i]
                } else {
                    self.pressure[i][j]
                };
            }
        }
        for (k, f) in self.high.iter().enumerate() {
            w[FIRST_HIGH + k] = *f;
        }
        w
    }

    pub fn from_slice(order: usize, w: &[f64]) -> Result<Self> {
        let n = moment_count(order)?;
        if w.len() != n {
            return Err(Error::InvalidArgument(format!("expected {n} unknowns, got {}", w.len())));
        }
        let mut p = [[0.0; 3]; 3];
        let mut u = [0.0; 3];
        for i in 0..3 {
            u[i] = w[MultiIndex::unit(i).position()];
            for j in i..3 {
                let v = w[MultiIndex::unit(i).plus_unit(j).position()];
                if i == j {
                    p[i][i] = 2.0 * v;
                } else {
                    p[i][j] = v;
                    p[j][i] = v;
                }
            }
        }
        let mut s = Self::new(order, w[0], u, p)?;
        s.high.copy_from_slice(&w[FIRST_HIGH..]);
        Ok(s)
    }

    /// Names of the unknowns in ordinal order.
    pub fn unknown_names(order: usize) -> Result<Vec<String>> {
        let set = enumerate_index_set(order)?;
        Ok(set
            .iter()
            .map(|a| match a.order() {
                0 => "rho".to_string(),
                1 => format!("u{}", axis_of(*a) + 1),
                2 => {
                    let (i, j) = pair_of(*a);
                    if i == j {
                        format!("p{}{}/2", i + 1, i + 1)
                    } else {
                        format!("p{}{}", i + 1, j + 1)
                    }
                }
                _ => format!("f{}{}{}", a.0[0], a.0[1], a.0[2]),
            })
            .collect())
    }
}

fn axis_of(alpha: MultiIndex) -> usize {
    (0..3).find(|&d| alpha.0[d] == 1).expect("first order index")
}

/// `(i, j)` with `i ≤ j` such that `α = e_i + e_j`.
pub(crate) fn pair_of(alpha: MultiIndex) -> (usize, usize) {
    let mut dims = Vec::with_capacity(2);
    for d in 0..3 {
        for _ in 0..alpha.0[d] {
            dims.push(d);
        }
    }
    (dims[0], dims[1])
}

/// Temperature, heat flux and the deviatoric coefficients `f_{e_i+e_j}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derived3D {
    pub temperature: f64,
    pub heat_flux: [f64; 3],
    pub second_order: [[f64; 3]; 3],
}

pub fn derived_quantities_3d(state: &MomentState3D) -> Result<Derived3D> {
    state.validate()?;
    let mut second = [[0.0; 3]; 3];
    for (i, row) in second.iter_mut().enumerate() {
        for (j, s) in row.iter_mut().enumerate() {
            *s = state.second_order(i, j);
        }
    }
    Ok(Derived3D {
        temperature: state.temperature(),
        heat_flux: state.heat_flux(),
        second_order: second,
    })
}

/// Pressure tensor rebuilt from `ρ`, `𝒯` and `f_{e_i+e_j}`.
pub fn pressure_from_coefficients(rho: f64, temperature: f64, second: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut p = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            p[i][j] = delta * rho * temperature + (1.0 + delta) * second[i][j];
        }
    }
    p
}

/// Recover `(ρ, u, 𝒯)` from the low-order coefficients of an expansion about
/// a foreign basis `(u', 𝒯')`.
pub fn foreign_expansion_moments(
    f0: f64,
    first: [f64; 3],
    second_diag: [f64; 3],
    u_prime: [f64; 3],
    t_prime: f64,
) -> Result<(f64, [f64; 3], f64)> {
    check_positive("f'_0", f0)?;
    check_positive("foreign temperature", t_prime)?;
    let rho = f0;
    let mut u = [0.0; 3];
    let mut drift2 = 0.0;
    for d in 0..3 {
        u[d] = u_prime[d] + first[d] / rho;
        drift2 += (u[d] - u_prime[d]).powi(2);
    }
    let energy: f64 = (0..3).map(|d| t_prime * f0 + 2.0 * second_diag[d]).sum();
    let t = (energy - rho * drift2) / (3.0 * rho);
    if !(t > 0.0) {
        return Err(Error::Inadmissible(format!(
            "recovered temperature {t} is not positive"
        )));
    }
    Ok((rho, u, t))
}

/// Truncated expansion `Σ_{n≤M} f_n 𝓗_{𝒯,n}((v−u)/√𝒯)` of a 1D state.
pub fn reconstruct_distribution_1d(state: &MomentState1D, v: f64) -> Result<f64> {
    state.validate()?;
    let params = HermiteBasisParams::new(state.temperature(), vec![state.u])?;
    let mut sum = 0.0;
    for n in 0..=state.order() as i64 {
        let c = state.coeff(n);
        if c != 0.0 {
            sum += c * basis_eval(&params, &[n], &[v])?;
        }
    }
    Ok(sum)
}

/// Truncated expansion `Σ_{|α|≤M} f_α 𝓗_{𝒯,α}((v−u)/√𝒯)` of a 3D state.
pub fn reconstruct_distribution_3d(state: &MomentState3D, v: [f64; 3]) -> Result<f64> {
    state.validate()?;
    let params = HermiteBasisParams::new(state.temperature(), state.u.to_vec())?;
    let set = enumerate_index_set(state.order())?;
    let mut sum = 0.0;
    for alpha in set.iter() {
        let c = state.coeff(*alpha);
        if c != 0.0 {
            let a = alpha.0.map(|x| x as i64);
            sum += c * basis_eval(&params, &a, &v)?;
        }
    }
    Ok(sum)
}

fn check_positive(what: &str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::Domain(format!("{what} must be positive, got {value}")));
    }
    Ok(())
}
