//! Weak values: analytic oracles and extraction from conditioned pointer states.
//!
//! Extraction routes, all on the exactly evolved and exactly projected state:
//!
//! * lowering: `<prod_j a_j>_fi * prod_j (2 sigma_j / g_j t)`
//! * correlators: the same quantity rebuilt from the `2^N` Hermitian moments
//!   `<prod_j O_j>_fi`, `O_j in {X_j, P_j}`, using `a = X / 2 sigma + i sigma P`
//! * spin: `<prod_j S_j^->_fi * prod_j 1 / (g_j t s_j)` (hbar = 1)
//!
//! Unequal couplings are handled factor-wise.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Result, WeakError};
use crate::evolution::{evolve_exact, PostSelectionResult};
use crate::pointer::{fock_operators, spin_operators, PointerSpec};
use crate::scenario::{Scenario, DEFAULT_OVERLAP_FLOOR};
use crate::tensor::{Operator, StateVector};

/// Largest N accepted by the permutation sum.
pub const MAX_PERMUTATION_ORDER: usize = 8;

/// `<F|A|I> / <F|I>`.
pub fn analytic_weak_value(a: &Operator, pre: &StateVector, post: &StateVector) -> Result<C64> {
    weak_value_with_floor(a, pre, post, DEFAULT_OVERLAP_FLOOR)
}

pub fn weak_value_with_floor(
    a: &Operator,
    pre: &StateVector,
    post: &StateVector,
    floor: f64,
) -> Result<C64> {
    let overlap = post.inner(pre)?;
    if overlap.norm() <= floor {
        return Err(WeakError::DivergentWeakValue {
            overlap: overlap.norm(),
            floor,
        });
    }
    Ok(post.inner(&a.apply(pre)?)? / overlap)
}

/// Calls `f` with every ordering of `0..n` (Heap's algorithm).
fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&perm);
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            f(&perm);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

fn all_commute(ops: &[Operator]) -> Result<bool> {
    for i in 0..ops.len() {
        for j in i + 1..ops.len() {
            let comm = ops[i].commutator(&ops[j])?;
            let scale = ops[i].max_abs() * ops[j].max_abs();
            if comm.max_abs() > 1e-12 * scale.max(1.0) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `<F| sum over orderings of A_1 .. A_N |I> / (N! <F|I>)` by explicit enumeration.
pub fn symmetrized_joint_weak_value(
    ops: &[Operator],
    pre: &StateVector,
    post: &StateVector,
) -> Result<C64> {
    symmetrized_with_floor(ops, pre, post, DEFAULT_OVERLAP_FLOOR)
}

pub fn symmetrized_with_floor(
    ops: &[Operator],
    pre: &StateVector,
    post: &StateVector,
    floor: f64,
) -> Result<C64> {
    let n = ops.len();
    if n == 0 {
        return Err(WeakError::Precondition(
            "at least one observable required".into(),
        ));
    }
    if n > MAX_PERMUTATION_ORDER {
        return Err(WeakError::Capacity {
            requested: n,
            max: MAX_PERMUTATION_ORDER,
        });
    }
    let overlap = post.inner(pre)?;
    if overlap.norm() <= floor {
        return Err(WeakError::DivergentWeakValue {
            overlap: overlap.norm(),
            floor,
        });
    }
    let mut sum = C64::new(0.0, 0.0);
    let mut count = 0usize;
    let mut failure = None;
    for_each_permutation(n, |perm| {
        if failure.is_some() {
            return;
        }
        // rightmost operator acts first
        let mut v = pre.clone();
        for &k in perm.iter().rev() {
            match ops[k].apply(&v) {
                Ok(w) => v = w,
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            }
        }
        match post.inner(&v) {
            Ok(z) => sum += z,
            Err(e) => failure = Some(e),
        }
        count += 1;
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let value = sum / (count as f64 * overlap);
    if cfg!(debug_assertions) && all_commute(ops)? {
        let mut v = pre.clone();
        for op in ops.iter().rev() {
            v = op.apply(&v)?;
        }
        let direct = post.inner(&v)? / overlap;
        debug_assert!((direct - value).norm() <= 1e-9 * (1.0 + value.norm()));
    }
    Ok(value)
}

/// Analytic oracle for a scenario: the symmetrized joint weak value of its observables.
pub fn scenario_weak_value(s: &Scenario) -> Result<C64> {
    let ops = s.system_observables()?;
    symmetrized_with_floor(&ops, &s.pre_state()?, &s.post_state()?, s.overlap_floor)
}

/// `<psi| O_1 .. O_k |psi>` for single-factor operators on distinct slots.
fn local_product_expectation(state: &StateVector, ops: &[(usize, &DMatrix<C64>)]) -> Result<C64> {
    let norm_sqr = state.norm().powi(2);
    if norm_sqr == 0.0 {
        return Err(WeakError::DegenerateState);
    }
    let mut v = state.clone();
    for &(slot, m) in ops.iter().rev() {
        v = v.apply_local(m, slot)?;
    }
    Ok(state.inner(&v)? / norm_sqr)
}

struct FockPointer {
    sigma: f64,
    gt: f64,
    lower: DMatrix<C64>,
    x: DMatrix<C64>,
    p: DMatrix<C64>,
}

fn fock_pointers(r: &PostSelectionResult, s: &Scenario) -> Result<Vec<FockPointer>> {
    if r.pointers.len() != s.couplings.len() {
        return Err(WeakError::Precondition(
            "post-selection result does not belong to this scenario".into(),
        ));
    }
    r.pointers
        .iter()
        .zip(&s.couplings)
        .enumerate()
        .map(|(j, (p, c))| {
            let PointerSpec::Fock(f) = p else {
                return Err(WeakError::Unsupported(format!(
                    "pointer {j} is not a Fock pointer"
                )));
            };
            if c.gt == 0.0 {
                return Err(WeakError::ZeroCoupling { pointer: j });
            }
            let ops = fock_operators(f)?;
            Ok(FockPointer {
                sigma: f.sigma,
                gt: c.gt,
                lower: ops.lower.into_matrix(),
                x: ops.x.expect("Fock").into_matrix(),
                p: ops.p.expect("Fock").into_matrix(),
            })
        })
        .collect()
}

/// `<prod_j a_j>_fi * prod_j (2 sigma_j / g_j t)`.
pub fn extract_joint_fock(r: &PostSelectionResult, s: &Scenario) -> Result<C64> {
    let ptrs = fock_pointers(r, s)?;
    let ops: Vec<(usize, &DMatrix<C64>)> = ptrs
        .iter()
        .enumerate()
        .map(|(j, p)| (j, &p.lower))
        .collect();
    let raw = local_product_expectation(&r.conditioned, &ops)?;
    let scale: f64 = ptrs.iter().map(|p| 2.0 * p.sigma / p.gt).product();
    Ok(raw * scale)
}

/// The `2^N` position/momentum correlators of the conditioned pointers.
///
/// Entry `mask` holds `<prod_j O_j>_fi` with `O_j = P_j` when bit `j` of
/// `mask` is set and `O_j = X_j` otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelatorTable {
    pub num_pointers: usize,
    pub entries: Vec<f64>,
    /// Largest imaginary part discarded when storing the (Hermitian) correlators.
    pub max_imag: f64,
}

impl CorrelatorTable {
    pub fn get(&self, mask: usize) -> f64 {
        self.entries[mask]
    }

    /// Label like `"XP"`: pointer 0 contributes X, pointer 1 contributes P.
    pub fn signature(&self, mask: usize) -> String {
        (0..self.num_pointers)
            .map(|j| if mask >> j & 1 == 1 { 'P' } else { 'X' })
            .collect()
    }

    /// Entry for a signature string such as `"XP"`.
    pub fn by_signature(&self, sig: &str) -> Option<f64> {
        if sig.len() != self.num_pointers {
            return None;
        }
        let mut mask = 0;
        for (j, ch) in sig.chars().enumerate() {
            match ch {
                'X' => {}
                'P' => mask |= 1 << j,
                _ => return None,
            }
        }
        Some(self.entries[mask])
    }
}

/// Moment table and the weak value rebuilt from it. The recombined value is
/// algebraically identical to [`extract_joint_fock`] on the same state.
pub fn correlator_decomposition(
    r: &PostSelectionResult,
    s: &Scenario,
) -> Result<(CorrelatorTable, C64)> {
    let ptrs = fock_pointers(r, s)?;
    let n = ptrs.len();
    if n >= usize::BITS as usize - 1 {
        return Err(WeakError::Capacity {
            requested: n,
            max: usize::BITS as usize - 2,
        });
    }
    let mut entries = Vec::with_capacity(1 << n);
    let mut max_imag: f64 = 0.0;
    let mut total = C64::new(0.0, 0.0);
    for mask in 0..(1usize << n) {
        let ops: Vec<(usize, &DMatrix<C64>)> = ptrs
            .iter()
            .enumerate()
            .map(|(j, p)| (j, if mask >> j & 1 == 1 { &p.p } else { &p.x }))
            .collect();
        let value = local_product_expectation(&r.conditioned, &ops)?;
        max_imag = max_imag.max(value.im.abs());
        entries.push(value.re);
        let weight: C64 = ptrs
            .iter()
            .enumerate()
            .map(|(j, p)| {
                if mask >> j & 1 == 1 {
                    C64::new(0.0, p.sigma)
                } else {
                    C64::new(1.0 / (2.0 * p.sigma), 0.0)
                }
            })
            .product();
        total += weight * value.re;
    }
    let scale: f64 = ptrs.iter().map(|p| 2.0 * p.sigma / p.gt).product();
    Ok((
        CorrelatorTable {
            num_pointers: n,
            entries,
            max_imag,
        },
        total * scale,
    ))
}

/// `(<X>_fi, <P>_fi)` for a single Fock pointer.
pub fn pointer_shift_check(r: &PostSelectionResult, s: &Scenario) -> Result<(f64, f64)> {
    if r.pointers.len() != 1 {
        return Err(WeakError::Unsupported(format!(
            "quadrature shifts need exactly one pointer, scenario has {}",
            r.pointers.len()
        )));
    }
    let PointerSpec::Fock(f) = r.pointers[0] else {
        return Err(WeakError::Unsupported(
            "quadrature shifts need a Fock pointer".into(),
        ));
    };
    let ops = fock_operators(&f)?;
    let x = local_product_expectation(
        &r.conditioned,
        &[(0, ops.x.as_ref().expect("Fock").matrix())],
    )?;
    let p = local_product_expectation(
        &r.conditioned,
        &[(0, ops.p.as_ref().expect("Fock").matrix())],
    )?;
    let _ = s;
    Ok((x.re, p.re))
}

/// `<prod_j S_j^->_fi * prod_j 1 / (g_j t s_j)`, hbar = 1.
pub fn extract_joint_spin(r: &PostSelectionResult, s: &Scenario) -> Result<C64> {
    if r.pointers.len() != s.couplings.len() {
        return Err(WeakError::Precondition(
            "post-selection result does not belong to this scenario".into(),
        ));
    }
    let mut lowers = Vec::with_capacity(r.pointers.len());
    let mut scale = 1.0;
    for (j, (p, c)) in r.pointers.iter().zip(&s.couplings).enumerate() {
        let PointerSpec::Spin(sp) = p else {
            return Err(WeakError::Unsupported(
                "spin extraction needs spin pointers throughout".into(),
            ));
        };
        if c.gt == 0.0 {
            return Err(WeakError::ZeroCoupling { pointer: j });
        }
        lowers.push(spin_operators(sp).lower.into_matrix());
        scale /= c.gt * sp.s();
    }
    let ops: Vec<(usize, &DMatrix<C64>)> = lowers.iter().enumerate().collect();
    Ok(local_product_expectation(&r.conditioned, &ops)? * scale)
}

/// Strong-measurement estimate `<prod_j X_j> * prod_j 1 / (g_j t)` on the
/// evolved state, without post-selection. Observables must commute.
pub fn strong_position_estimate(s: &Scenario) -> Result<C64> {
    if !s.all_fock() {
        return Err(WeakError::Unsupported(
            "position correlations need Fock pointers".into(),
        ));
    }
    let obs = s.system_observables()?;
    if !all_commute(&obs)? {
        return Err(WeakError::Precondition(
            "strong estimate needs pairwise commuting observables".into(),
        ));
    }
    for (j, c) in s.couplings.iter().enumerate() {
        if c.gt == 0.0 {
            return Err(WeakError::ZeroCoupling { pointer: j });
        }
    }
    let evolved = evolve_exact(s)?;
    let nsys = evolved.num_system_factors;
    let xs: Vec<DMatrix<C64>> = s
        .pointers
        .iter()
        .map(|p| match p {
            PointerSpec::Fock(f) => Ok(fock_operators(f)?.x.expect("Fock").into_matrix()),
            PointerSpec::Spin(_) => unreachable!("checked above"),
        })
        .collect::<Result<_>>()?;
    let ops: Vec<(usize, &DMatrix<C64>)> =
        xs.iter().enumerate().map(|(j, m)| (nsys + j, m)).collect();
    let raw = local_product_expectation(&evolved.state, &ops)?;
    let scale: f64 = s.couplings.iter().map(|c| 1.0 / c.gt).product();
    Ok(raw * scale)
}
