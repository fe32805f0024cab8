//! Dense complex linear algebra over tensor-product Hilbert spaces.
//!
//! Every [`Operator`] and [`StateVector`] carries a [`FactorLayout`] naming the
//! dimensions of its tensor factors. Factor 0 is the most significant index, so
//! for a layout `[d0, d1, .., dk]` the flat index of `|i0 i1 .. ik>` is
//! `((i0 * d1 + i1) * d2 + i2) ...`, the usual Kronecker convention.
//! Scenarios put system factors first and pointers after them, in declaration
//! order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Result, WeakError};

/// Default cap on the total dimension of any layout.
pub const DEFAULT_MAX_DIM: usize = 1 << 20;

/// Relative tolerance for the Hermiticity check: `max|M - M^dag| <= tol * max|M|`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Absolute tolerance for the `normalized` check on state vectors.
pub const NORM_TOL: f64 = 1e-12;

/// Tolerance on `max|U^dag U - I|` for every propagator handed out.
pub const UNITARITY_TOL: f64 = 1e-10;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Ordered list of tensor-factor dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FactorLayout {
    dims: Vec<usize>,
    total: usize,
}

impl FactorLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        Self::with_max(dims, DEFAULT_MAX_DIM)
    }

    /// Builds a layout, rejecting zero dimensions and totals above `max_dim`.
    pub fn with_max(dims: Vec<usize>, max_dim: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(WeakError::Precondition(
                "a layout needs at least one factor".into(),
            ));
        }
        let mut total: usize = 1;
        for &d in &dims {
            if d == 0 {
                return Err(WeakError::Precondition(
                    "factor dimensions must be positive".into(),
                ));
            }
            total = total
                .checked_mul(d)
                .filter(|&t| t <= max_dim)
                .ok_or(WeakError::Capacity {
                    requested: saturating_product(&dims),
                    max: max_dim,
                })?;
        }
        Ok(Self { dims, total })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_factors(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Product of the dimensions after `slot`.
    pub fn stride(&self, slot: usize) -> usize {
        self.dims[slot + 1..].iter().product()
    }

    pub fn concat(&self, other: &FactorLayout) -> Result<FactorLayout> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        FactorLayout::new(dims)
    }

    /// Layout of the factors in `range`.
    pub fn sub(&self, range: std::ops::Range<usize>) -> Result<FactorLayout> {
        FactorLayout::new(self.dims[range].to_vec())
    }

    fn check_slot(&self, slot: usize) -> Result<()> {
        if slot >= self.dims.len() {
            return Err(WeakError::SlotOutOfRange {
                slot,
                factors: self.dims.len(),
            });
        }
        Ok(())
    }
}

fn saturating_product(dims: &[usize]) -> usize {
    dims.iter().fold(1usize, |acc, &d| acc.saturating_mul(d))
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Dense square operator on a factor layout.
#[derive(Clone, Debug)]
pub struct Operator {
    layout: FactorLayout,
    mat: DMatrix<C64>,
    hermitian: bool,
}

impl Operator {
    pub fn new(layout: FactorLayout, mat: DMatrix<C64>) -> Result<Self> {
        let n = layout.total();
        if mat.nrows() != n || mat.ncols() != n {
            return Err(WeakError::DimensionMismatch {
                expected: n,
                found: mat.nrows().max(mat.ncols()),
            });
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(WeakError::Numerical(
                "operator has non-finite entries".into(),
            ));
        }
        Ok(Self {
            layout,
            mat,
            hermitian: false,
        })
    }

    /// Operator on a single factor of dimension `mat.nrows()`.
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(WeakError::DimensionMismatch {
                expected: mat.nrows(),
                found: mat.ncols(),
            });
        }
        let layout = FactorLayout::single(mat.nrows())?;
        Self::new(layout, mat)
    }

    /// Builds from row-major nested rows; used for small literal matrices.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(WeakError::Precondition("empty matrix".into()));
        }
        for r in rows {
            if r.len() != n {
                return Err(WeakError::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Like [`Operator::new`] but verifies and records Hermiticity.
    pub fn hermitian(layout: FactorLayout, mat: DMatrix<C64>) -> Result<Self> {
        let mut op = Self::new(layout, mat)?;
        op.check_hermitian()?;
        op.hermitian = true;
        Ok(op)
    }

    pub fn identity(layout: FactorLayout) -> Self {
        let n = layout.total();
        Self {
            layout,
            mat: DMatrix::identity(n, n),
            hermitian: true,
        }
    }

    pub fn zeros(layout: FactorLayout) -> Self {
        let n = layout.total();
        Self {
            layout,
            mat: DMatrix::zeros(n, n),
            hermitian: true,
        }
    }

    pub fn layout(&self) -> &FactorLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.total()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn is_flagged_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Replaces the layout, keeping entries. Totals must agree.
    pub fn with_layout(mut self, layout: FactorLayout) -> Result<Self> {
        if layout.total() != self.dim() {
            return Err(WeakError::DimensionMismatch {
                expected: self.dim(),
                found: layout.total(),
            });
        }
        self.layout = layout;
        Ok(self)
    }

    /// `max|M - M^dag|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let dev = self.hermiticity_deviation();
        if dev > HERMITIAN_TOL * max_abs(&self.mat) {
            return Err(WeakError::NotHermitian { deviation: dev });
        }
        Ok(())
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            layout: self.layout.clone(),
            mat: self.mat.adjoint(),
            hermitian: self.hermitian,
        }
    }

    fn same_layout(&self, other: &Operator) -> Result<()> {
        if self.layout != other.layout {
            return Err(WeakError::LayoutMismatch {
                left: self.layout.dims().to_vec(),
                right: other.layout.dims().to_vec(),
            });
        }
        Ok(())
    }

    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        self.same_layout(other)?;
        Ok(Operator {
            layout: self.layout.clone(),
            mat: &self.mat * &other.mat,
            hermitian: false,
        })
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.same_layout(other)?;
        Ok(Operator {
            layout: self.layout.clone(),
            mat: &self.mat + &other.mat,
            hermitian: self.hermitian && other.hermitian,
        })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.same_layout(other)?;
        Ok(Operator {
            layout: self.layout.clone(),
            mat: &self.mat - &other.mat,
            hermitian: self.hermitian && other.hermitian,
        })
    }

    pub fn scale(&self, c: C64) -> Operator {
        Operator {
            layout: self.layout.clone(),
            mat: &self.mat * c,
            hermitian: self.hermitian && c.im == 0.0,
        }
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        if self.mat.shape() != other.mat.shape() {
            return f64::INFINITY;
        }
        max_abs(&(&self.mat - &other.mat))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.mat)
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if self.layout != state.layout {
            return Err(WeakError::LayoutMismatch {
                left: self.layout.dims().to_vec(),
                right: state.layout.dims().to_vec(),
            });
        }
        Ok(StateVector {
            layout: self.layout.clone(),
            amps: &self.mat * &state.amps,
        })
    }
}

/// Complex amplitude vector on a factor layout.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    layout: FactorLayout,
    amps: DVector<C64>,
}

impl StateVector {
    pub fn new(layout: FactorLayout, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != layout.total() {
            return Err(WeakError::DimensionMismatch {
                expected: layout.total(),
                found: amps.len(),
            });
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(WeakError::Numerical(
                "state has non-finite amplitudes".into(),
            ));
        }
        Ok(Self {
            layout,
            amps: DVector::from_vec(amps),
        })
    }

    /// Single-factor state.
    pub fn from_amps(amps: Vec<C64>) -> Result<Self> {
        let layout = FactorLayout::single(amps.len())?;
        Self::new(layout, amps)
    }

    /// Computational basis state `|index>`.
    pub fn basis(layout: FactorLayout, index: usize) -> Result<Self> {
        if index >= layout.total() {
            return Err(WeakError::SlotOutOfRange {
                slot: index,
                factors: layout.total(),
            });
        }
        let mut amps = vec![ZERO; layout.total()];
        amps[index] = ONE;
        Self::new(layout, amps)
    }

    /// Tensor product of single states, in order.
    pub fn product(factors: &[StateVector]) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| WeakError::Precondition("product of zero states".into()))?;
        let mut out = first.clone();
        for f in &factors[1..] {
            let layout = out.layout.concat(&f.layout)?;
            let mut amps = Vec::with_capacity(layout.total());
            for a in out.amps.iter() {
                for b in f.amps.iter() {
                    amps.push(a * b);
                }
            }
            out = StateVector {
                layout,
                amps: DVector::from_vec(amps),
            };
        }
        Ok(out)
    }

    pub fn layout(&self) -> &FactorLayout {
        &self.layout
    }

    pub fn amps(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(&self) -> Result<StateVector> {
        let n = self.norm();
        if n == 0.0 {
            return Err(WeakError::DegenerateState);
        }
        Ok(StateVector {
            layout: self.layout.clone(),
            amps: &self.amps / C64::new(n, 0.0),
        })
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.layout != other.layout {
            return Err(WeakError::LayoutMismatch {
                left: self.layout.dims().to_vec(),
                right: other.layout.dims().to_vec(),
            });
        }
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn with_layout(mut self, layout: FactorLayout) -> Result<Self> {
        if layout.total() != self.amps.len() {
            return Err(WeakError::DimensionMismatch {
                expected: self.amps.len(),
                found: layout.total(),
            });
        }
        self.layout = layout;
        Ok(self)
    }

    /// Applies a single-factor operator to factor `slot` without forming the
    /// full embedded matrix.
    pub fn apply_local(&self, op: &DMatrix<C64>, slot: usize) -> Result<StateVector> {
        self.layout.check_slot(slot)?;
        let d = self.layout.dims()[slot];
        if op.nrows() != d || op.ncols() != d {
            return Err(WeakError::DimensionMismatch {
                expected: d,
                found: op.nrows(),
            });
        }
        let inner = self.layout.stride(slot);
        let outer = self.layout.total() / (d * inner);
        let src = self.amps.as_slice();
        let mut out = vec![ZERO; src.len()];
        let mut col = vec![ZERO; d];
        for o in 0..outer {
            let base = o * d * inner;
            for i in 0..inner {
                for (k, c) in col.iter_mut().enumerate() {
                    *c = src[base + k * inner + i];
                }
                for r in 0..d {
                    let mut acc = ZERO;
                    for (k, c) in col.iter().enumerate() {
                        acc += op[(r, k)] * c;
                    }
                    out[base + r * inner + i] = acc;
                }
            }
        }
        Ok(StateVector {
            layout: self.layout.clone(),
            amps: DVector::from_vec(out),
        })
    }

    pub fn scale(&self, c: C64) -> StateVector {
        StateVector {
            layout: self.layout.clone(),
            amps: &self.amps * c,
        }
    }

    pub fn add(&self, other: &StateVector) -> Result<StateVector> {
        if self.layout != other.layout {
            return Err(WeakError::LayoutMismatch {
                left: self.layout.dims().to_vec(),
                right: other.layout.dims().to_vec(),
            });
        }
        Ok(StateVector {
            layout: self.layout.clone(),
            amps: &self.amps + &other.amps,
        })
    }

    /// Euclidean distance `||self - other||`.
    pub fn distance(&self, other: &StateVector) -> f64 {
        (&self.amps - &other.amps).norm()
    }
}

/// Kronecker product of the factors in declared order.
pub fn kron(factors: &[Operator]) -> Result<Operator> {
    kron_capped(factors, DEFAULT_MAX_DIM)
}

pub fn kron_capped(factors: &[Operator], max_dim: usize) -> Result<Operator> {
    let first = factors
        .first()
        .ok_or_else(|| WeakError::Precondition("kron of zero factors".into()))?;
    let dims: Vec<usize> = factors
        .iter()
        .flat_map(|f| f.layout.dims().iter().copied())
        .collect();
    let layout = FactorLayout::with_max(dims, max_dim)?;
    let mut mat = first.mat.clone();
    for f in &factors[1..] {
        mat = mat.kronecker(&f.mat);
    }
    let hermitian = factors.iter().all(|f| f.hermitian);
    Ok(Operator {
        layout,
        mat,
        hermitian,
    })
}

/// Lifts `op` onto factor `slot` of `layout`, identity elsewhere.
pub fn embed(op: &Operator, slot: usize, layout: &FactorLayout) -> Result<Operator> {
    layout.check_slot(slot)?;
    let d = layout.dims()[slot];
    if op.dim() != d {
        return Err(WeakError::DimensionMismatch {
            expected: d,
            found: op.dim(),
        });
    }
    let before: usize = layout.dims()[..slot].iter().product();
    let after = layout.stride(slot);
    let mat = DMatrix::<C64>::identity(before, before)
        .kronecker(&op.mat)
        .kronecker(&DMatrix::<C64>::identity(after, after));
    Ok(Operator {
        layout: layout.clone(),
        mat,
        hermitian: op.hermitian,
    })
}

/// Lifts `op` onto several factors at once. `op` acts on the factors listed in
/// `slots`, in that order (its own layout is the product of those dimensions).
pub fn embed_multi(op: &Operator, slots: &[usize], layout: &FactorLayout) -> Result<Operator> {
    if slots.is_empty() {
        return Err(WeakError::Precondition(
            "embedding needs at least one target slot".into(),
        ));
    }
    for (i, &s) in slots.iter().enumerate() {
        layout.check_slot(s)?;
        if slots[..i].contains(&s) {
            return Err(WeakError::Precondition(format!("slot {s} listed twice")));
        }
    }
    let sub_dims: Vec<usize> = slots.iter().map(|&s| layout.dims()[s]).collect();
    let sub_total: usize = sub_dims.iter().product();
    if op.dim() != sub_total {
        return Err(WeakError::DimensionMismatch {
            expected: sub_total,
            found: op.dim(),
        });
    }
    let n = layout.total();
    let strides: Vec<usize> = (0..layout.num_factors())
        .map(|k| layout.stride(k))
        .collect();
    let mut mat = DMatrix::<C64>::zeros(n, n);
    for col in 0..n {
        // index of col within the targeted factors, and col with those digits cleared
        let mut sub_col = 0;
        let mut rest = col;
        for &s in slots {
            let digit = (col / strides[s]) % layout.dims()[s];
            sub_col = sub_col * layout.dims()[s] + digit;
            rest -= digit * strides[s];
        }
        for sub_row in 0..sub_total {
            let v = op.mat[(sub_row, sub_col)];
            if v == ZERO {
                continue;
            }
            let mut row = rest;
            let mut r = sub_row;
            for (&s, &d) in slots.iter().zip(&sub_dims).rev() {
                row += (r % d) * strides[s];
                r /= d;
            }
            mat[(row, col)] = v;
        }
    }
    Ok(Operator {
        layout: layout.clone(),
        mat,
        hermitian: op.hermitian,
    })
}

/// Eigenvalues and eigenvectors (columns) of a Hermitian operator.
pub fn spectral_decomposition(h: &Operator) -> Result<(DVector<f64>, DMatrix<C64>)> {
    h.check_hermitian()?;
    let eig = h.mat.clone().symmetric_eigen();
    Ok((eig.eigenvalues, eig.eigenvectors))
}

/// `U = exp(-i tau H)` via the spectral decomposition of `H` (hbar = 1).
pub fn hermitian_propagator(h: &Operator, tau: f64) -> Result<Operator> {
    let (vals, vecs) = spectral_decomposition(h)?;
    let phases = DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&e| C64::from_polar(1.0, -tau * e)),
    );
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    let u = scaled * vecs.adjoint();
    let defect = unitarity_defect(&u);
    if defect > UNITARITY_TOL {
        return Err(WeakError::Numerical(format!(
            "propagator unitarity defect {defect:.3e}"
        )));
    }
    Ok(Operator {
        layout: h.layout.clone(),
        mat: u,
        hermitian: false,
    })
}

/// `max|U^dag U - I|`.
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - DMatrix::<C64>::identity(n, n)))
}

/// `<psi|O|psi> / <psi|psi>`; the state need not be normalized.
pub fn expectation(state: &StateVector, op: &Operator) -> Result<C64> {
    let norm_sqr = state.amps.norm_squared();
    if norm_sqr == 0.0 {
        return Err(WeakError::DegenerateState);
    }
    let o_psi = op.apply(state)?;
    Ok(state.amps.dotc(&o_psi.amps) / norm_sqr)
}

/// Common small matrices.
pub mod pauli {
    use super::*;

    pub fn identity(n: usize) -> Operator {
        Operator::identity(FactorLayout::single(n).expect("positive dimension"))
    }

    pub fn x() -> Operator {
        let mut op = Operator::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]]).expect("2x2");
        op.hermitian = true;
        op
    }

    pub fn y() -> Operator {
        let i = C64::new(0.0, 1.0);
        let mut op = Operator::from_rows(&[vec![ZERO, -i], vec![i, ZERO]]).expect("2x2");
        op.hermitian = true;
        op
    }

    /// `diag(+1, -1)` in the basis `(|0>, |1>)`.
    pub fn z() -> Operator {
        let mut op = Operator::from_rows(&[vec![ONE, ZERO], vec![ZERO, -ONE]]).expect("2x2");
        op.hermitian = true;
        op
    }
}
