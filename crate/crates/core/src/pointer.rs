//! Measurement pointers: truncated-Fock Gaussian pointers and spin-s pointers.
//!
//! Units have hbar = 1. Fock levels are ordered ascending from `|0>`; spin
//! basis states are ordered by ascending `m`, from `-s` to `+s`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WeakError};
use crate::tensor::{FactorLayout, Operator, StateVector};

/// Default Fock truncation.
pub const DEFAULT_FOCK_DIM: usize = 12;

/// Gaussian pointer with rms position width `sigma`, truncated to `dim` Fock levels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockPointerSpec {
    pub sigma: f64,
    pub dim: usize,
}

impl FockPointerSpec {
    pub fn new(sigma: f64, dim: usize) -> Result<Self> {
        let spec = Self { sigma, dim };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(WeakError::Precondition(format!(
                "Fock pointer sigma must be finite and positive, got {}",
                self.sigma
            )));
        }
        if self.dim < 2 {
            return Err(WeakError::Precondition(format!(
                "Fock dimension must be at least 2, got {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// `m * omega` of the oscillator whose ground state has width sigma,
    /// from `sigma = sqrt(hbar / (2 m omega))`.
    pub fn m_omega(&self) -> f64 {
        1.0 / (2.0 * self.sigma * self.sigma)
    }
}

/// Spin-s pointer, stored as the integer `2s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinPointerSpec {
    two_s: u32,
}

impl SpinPointerSpec {
    pub fn new(s: f64) -> Result<Self> {
        let two_s = 2.0 * s;
        if !(two_s.is_finite() && two_s >= 1.0 && two_s.fract() == 0.0 && two_s <= 1000.0) {
            return Err(WeakError::Precondition(format!(
                "spin must be a positive half-integer, got {s}"
            )));
        }
        Ok(Self {
            two_s: two_s as u32,
        })
    }

    pub fn s(&self) -> f64 {
        self.two_s as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.two_s as usize + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PointerSpec {
    Fock(FockPointerSpec),
    Spin(SpinPointerSpec),
}

impl PointerSpec {
    pub fn dim(&self) -> usize {
        match self {
            PointerSpec::Fock(f) => f.dim,
            PointerSpec::Spin(s) => s.dim(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PointerSpec::Fock(_) => "fock",
            PointerSpec::Spin(_) => "spin",
        }
    }

    pub fn operators(&self) -> Result<PointerOperators> {
        match self {
            PointerSpec::Fock(f) => fock_operators(f),
            PointerSpec::Spin(s) => Ok(spin_operators(s)),
        }
    }

    /// Operator multiplying `g A` in the interaction: `P` for Fock pointers,
    /// `-S_y` for spin pointers.
    pub fn coupling_operator(&self) -> Result<Operator> {
        let ops = self.operators()?;
        match self {
            PointerSpec::Fock(_) => Ok(ops.p.expect("Fock pointers carry P")),
            PointerSpec::Spin(_) => Ok(ops
                .sy
                .expect("spin pointers carry S_y")
                .scale(C64::new(-1.0, 0.0))),
        }
    }

    /// Dimensionless expansion parameter for coupling `gt`: `gt / 2 sigma` for
    /// Fock pointers and `gt / 2` (the rotation half-angle) for spin pointers.
    pub fn lambda(&self, gt: f64) -> f64 {
        match self {
            PointerSpec::Fock(f) => gt / (2.0 * f.sigma),
            PointerSpec::Spin(_) => gt / 2.0,
        }
    }

    /// Inverse of [`PointerSpec::lambda`].
    pub fn gt_for_lambda(&self, lambda: f64) -> f64 {
        match self {
            PointerSpec::Fock(f) => 2.0 * f.sigma * lambda,
            PointerSpec::Spin(_) => 2.0 * lambda,
        }
    }
}

/// Ladder and quadrature operators of one pointer.
///
/// Fock pointers fill `x` and `p`; spin pointers fill `sz` and `sy`.
#[derive(Clone, Debug)]
pub struct PointerOperators {
    pub lower: Operator,
    pub raise: Operator,
    pub x: Option<Operator>,
    pub p: Option<Operator>,
    pub sz: Option<Operator>,
    pub sy: Option<Operator>,
}

/// Truncated lowering operator; `x` and `p` are derived from it so that
/// `a = x / 2 sigma + i sigma p` holds exactly on the truncated space.
pub fn fock_operators(spec: &FockPointerSpec) -> Result<PointerOperators> {
    spec.check()?;
    let d = spec.dim;
    let layout = FactorLayout::single(d)?;
    let mut a = DMatrix::<C64>::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let ad = a.adjoint();
    let x = (&a + &ad) * C64::new(spec.sigma, 0.0);
    let p = (&ad - &a) * C64::new(0.0, 1.0 / (2.0 * spec.sigma));
    Ok(PointerOperators {
        lower: Operator::new(layout.clone(), a)?,
        raise: Operator::new(layout.clone(), ad)?,
        x: Some(Operator::hermitian(layout.clone(), x)?),
        p: Some(Operator::hermitian(layout, p)?),
        sz: None,
        sy: None,
    })
}

pub fn spin_operators(spec: &SpinPointerSpec) -> PointerOperators {
    let d = spec.dim();
    let s = spec.s();
    let layout = FactorLayout::single(d).expect("spin dimension is positive");
    let mut up = DMatrix::<C64>::zeros(d, d);
    let mut sz = DMatrix::<C64>::zeros(d, d);
    for k in 0..d {
        let m = -s + k as f64;
        sz[(k, k)] = C64::new(m, 0.0);
        if k + 1 < d {
            up[(k + 1, k)] = C64::new((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
    }
    let down = up.adjoint();
    let sy = (&up - &down) * C64::new(0.0, -0.5);
    PointerOperators {
        lower: Operator::new(layout.clone(), down).expect("finite"),
        raise: Operator::new(layout.clone(), up).expect("finite"),
        x: None,
        p: None,
        sz: Some(Operator::hermitian(layout.clone(), sz).expect("diagonal real")),
        sy: Some(Operator::hermitian(layout, sy).expect("(S+ - S-)/2i is Hermitian")),
    }
}

/// Fock `|0>`, or spin `|m = -s>`.
pub fn initial_state(spec: &PointerSpec) -> Result<StateVector> {
    if let PointerSpec::Fock(f) = spec {
        f.check()?;
    }
    StateVector::basis(FactorLayout::single(spec.dim())?, 0)
}

/// Position-space wavefunctions `<x|n>` of the first `levels` Fock states of a
/// pointer with width `sigma`, evaluated at each of `xs`. Returned as
/// `out[n][i] = <xs[i]|n>`, all real.
pub fn position_wavefunctions(sigma: f64, levels: usize, xs: &[f64]) -> Vec<Vec<f64>> {
    let scale = std::f64::consts::SQRT_2 * sigma;
    let pre = scale.sqrt().recip();
    let mut out = vec![vec![0.0; xs.len()]; levels];
    for (i, &x) in xs.iter().enumerate() {
        let xi = x / scale;
        let mut prev = 0.0;
        let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * xi * xi).exp();
        for (n, row) in out.iter_mut().enumerate() {
            row[i] = pre * cur;
            let nf = n as f64;
            let next = (2.0 / (nf + 1.0)).sqrt() * xi * cur - (nf / (nf + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
        }
    }
    out
}
