//! External potentials `V(x)` with exact spatial derivatives.
//!
//! The smooth bump `V(x) = A exp(−1/(1 − (x/w)²))` on `|x| < w` is
//! differentiated through a two-variable polynomial recurrence: with
//! `y = x/w` and `s = 1/(1 − y²)`, every derivative has the form
//! `R_n(y, s) e^{−s}` and `R_{n+1} = ∂_y R_n + 2y s²(∂_s R_n − R_n)`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::index::MultiIndex;

/// Default highest derivative order made available by [`PotentialModel::new`].
pub const DEFAULT_MAX_ORDER: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Zero,
    /// `V = slope·x + offset`
    Linear { slope: f64, offset: f64 },
    /// `V = ½ k (x − c)²`
    Harmonic { stiffness: f64, center: f64 },
    /// `V = Σ_k c_k x^k`
    Polynomial { coeffs: Vec<f64> },
    /// `V = A exp(−1/(1 − (x/w)²))` for `|x| < w`, zero elsewhere.
    Bump { amplitude: f64, width: f64 },
}

impl PotentialKind {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialKind::Zero => "zero",
            PotentialKind::Linear { .. } => "linear",
            PotentialKind::Harmonic { .. } => "harmonic",
            PotentialKind::Polynomial { .. } => "polynomial",
            PotentialKind::Bump { .. } => "bump",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            PotentialKind::Zero => vec![],
            PotentialKind::Linear { slope, offset } => vec![*slope, *offset],
            PotentialKind::Harmonic { stiffness, center } => vec![*stiffness, *center],
            PotentialKind::Polynomial { coeffs } => coeffs.clone(),
            PotentialKind::Bump { amplitude, width } => vec![*amplitude, *width],
        }
    }

    /// Build a kind from its name and a parameter list (missing trailing
    /// parameters take their defaults).
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let get = |k: usize, default: f64| params.get(k).copied().unwrap_or(default);
        let max_params = |n: usize| {
            if params.len() > n {
                Err(Error::InvalidArgument(format!(
                    "potential '{name}' takes at most {n} parameters, got {}",
                    params.len()
                )))
            } else {
                Ok(())
            }
        };
        let kind = match name {
            "zero" => {
                max_params(0)?;
                PotentialKind::Zero
            }
            "linear" => {
                max_params(2)?;
                PotentialKind::Linear {
                    slope: get(0, 1.0),
                    offset: get(1, 0.0),
                }
            }
            "harmonic" => {
                max_params(2)?;
                PotentialKind::Harmonic {
                    stiffness: get(0, 1.0),
                    center: get(1, 0.0),
                }
            }
            "polynomial" => PotentialKind::Polynomial {
                coeffs: params.to_vec(),
            },
            "bump" => {
                max_params(2)?;
                let width = get(1, 1.0);
                if !(width > 0.0) {
                    return Err(Error::InvalidArgument(format!("bump width must be positive, got {width}")));
                }
                PotentialKind::Bump {
                    amplitude: get(0, 1.0),
                    width,
                }
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown potential kind '{other}' (expected zero, linear, harmonic, polynomial or bump)"
                )))
            }
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("potential parameters must be finite".into()));
        }
        Ok(kind)
    }
}

/// Polynomial in `(y, s)` stored as `(deg_y, deg_s) → coefficient`.
type BumpPoly = BTreeMap<(u32, u32), f64>;

fn differentiate_bump(r: &BumpPoly) -> BumpPoly {
    let mut out = BumpPoly::new();
    for (&(a, b), &c) in r {
        if a > 0 {
            *out.entry((a - 1, b)).or_insert(0.0) += c * a as f64;
        }
        if b > 0 {
            *out.entry((a + 1, b + 1)).or_insert(0.0) += 2.0 * c * b as f64;
        }
        *out.entry((a + 1, b + 2)).or_insert(0.0) -= 2.0 * c;
    }
    out.retain(|_, c| *c != 0.0);
    out
}

fn eval_bump(r: &BumpPoly, y: f64) -> f64 {
    if y.abs() >= 1.0 {
        return 0.0;
    }
    let s = 1.0 / (1.0 - y * y);
    let ln_s = s.ln();
    r.iter()
        .map(|(&(a, b), &c)| c * y.powi(a as i32) * (b as f64 * ln_s - s).exp())
        .sum()
}

/// A static 1D potential with derivatives available up to `max_derivative_order`.
#[derive(Clone, PartialEq)]
pub struct PotentialModel {
    kind: PotentialKind,
    max_derivative_order: usize,
    bump_table: Vec<BumpPoly>,
}

impl fmt::Debug for PotentialModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialModel")
            .field("kind", &self.kind)
            .field("max_derivative_order", &self.max_derivative_order)
            .finish()
    }
}

impl PotentialModel {
    pub fn new(kind: PotentialKind) -> Self {
        Self::with_max_order(kind, DEFAULT_MAX_ORDER)
    }

    pub fn with_max_order(kind: PotentialKind, max_derivative_order: usize) -> Self {
        let bump_table = if matches!(kind, PotentialKind::Bump { .. }) {
            let mut table = Vec::with_capacity(max_derivative_order + 1);
            table.push(BumpPoly::from([((0, 0), 1.0)]));
            for n in 0..max_derivative_order {
                let next = differentiate_bump(&table[n]);
                table.push(next);
            }
            table
        } else {
            Vec::new()
        };
        Self {
            kind,
            max_derivative_order,
            bump_table,
        }
    }

    pub fn zero() -> Self {
        Self::new(PotentialKind::Zero)
    }

    pub fn harmonic(stiffness: f64) -> Self {
        Self::new(PotentialKind::Harmonic {
            stiffness,
            center: 0.0,
        })
    }

    pub fn linear(slope: f64) -> Self {
        Self::new(PotentialKind::Linear { slope, offset: 0.0 })
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn max_derivative_order(&self) -> usize {
        self.max_derivative_order
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(0, x).expect("order 0 is always available")
    }

    /// `dⁿV/dxⁿ` at `x`.
    pub fn derivative(&self, order: usize, x: f64) -> Result<f64> {
        if order > self.max_derivative_order {
            return Err(Error::UnsupportedOrder {
                requested: order,
                available: self.max_derivative_order,
            });
        }
        Ok(match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Linear { slope, offset } => match order {
                0 => slope * x + offset,
                1 => *slope,
                _ => 0.0,
            },
            PotentialKind::Harmonic { stiffness, center } => match order {
                0 => 0.5 * stiffness * (x - center).powi(2),
                1 => stiffness * (x - center),
                2 => *stiffness,
                _ => 0.0,
            },
            PotentialKind::Polynomial { coeffs } => {
                // Horner on the differentiated coefficients
                let mut acc = 0.0;
                for k in (order..coeffs.len()).rev() {
                    let falling: f64 = ((k - order + 1)..=k).map(|m| m as f64).product();
                    acc = acc * x + coeffs[k] * falling;
                }
                acc
            }
            PotentialKind::Bump { amplitude, width } => {
                amplitude * width.powi(-(order as i32)) * eval_bump(&self.bump_table[order], x / width)
            }
        })
    }

    /// `V, V′, …, V^{(n)}` at `x`.
    pub fn jet(&self, n: usize, x: f64) -> Result<Vec<f64>> {
        (0..=n).map(|k| self.derivative(k, x)).collect()
    }
}

/// Compactly supported bump `exp(−1/(1 − x²))` on `(−1, 1)`, zero outside.
pub fn bump_potential() -> PotentialModel {
    PotentialModel::new(PotentialKind::Bump {
        amplitude: 1.0,
        width: 1.0,
    })
}

/// A potential that may change in time. Only static models ship; they ignore `t`.
pub trait PotentialField {
    fn derivative_at(&self, order: usize, x: f64, t: f64) -> Result<f64>;

    fn is_static(&self) -> bool {
        true
    }

    fn max_derivative_order(&self) -> usize;
}

impl PotentialField for PotentialModel {
    fn derivative_at(&self, order: usize, x: f64, _t: f64) -> Result<f64> {
        self.derivative(order, x)
    }

    fn max_derivative_order(&self) -> usize {
        self.max_derivative_order
    }
}

/// How the three per-axis factors of a [`Potential3D`] are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combination {
    /// `V(x) = V₁(x₁) + V₂(x₂) + V₃(x₃)`
    Sum,
    /// `V(x) = V₁(x₁) V₂(x₂) V₃(x₃)`
    Product,
}

/// A separable 3D potential built from three 1D models.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential3D {
    pub factors: [PotentialModel; 3],
    pub combination: Combination,
}

impl Potential3D {
    pub fn new(factors: [PotentialModel; 3], combination: Combination) -> Self {
        Self { factors, combination }
    }

    pub fn zero() -> Self {
        Self::new(
            [PotentialModel::zero(), PotentialModel::zero(), PotentialModel::zero()],
            Combination::Sum,
        )
    }

    pub fn max_derivative_order(&self) -> usize {
        self.factors.iter().map(|f| f.max_derivative_order()).min().unwrap_or(0)
    }

    /// `∂^λ V / ∂x^λ` at `x`.
    pub fn derivative(&self, lambda: MultiIndex, x: [f64; 3]) -> Result<f64> {
        let total = lambda.order();
        if total > self.max_derivative_order() {
            return Err(Error::UnsupportedOrder {
                requested: total,
                available: self.max_derivative_order(),
            });
        }
        match self.combination {
            Combination::Sum => {
                let active: Vec<usize> = (0..3).filter(|&d| lambda.0[d] > 0).collect();
                match active.len() {
                    0 => (0..3).map(|d| self.factors[d].derivative(0, x[d])).sum(),
                    1 => {
                        let d = active[0];
                        self.factors[d].derivative(lambda.0[d], x[d])
                    }
                    _ => Ok(0.0),
                }
            }
            Combination::Product => (0..3)
                .map(|d| self.factors[d].derivative(lambda.0[d], x[d]))
                .product(),
        }
    }
}
