//! Interaction Hamiltonian, exact and series propagation, and post-selection.
//!
//! The interaction is `H t = sum_j (g_j t) A_j (x) K_j` with `K_j = P_j` for
//! Fock pointers and `K_j = -S_y` for spin pointers. Scenarios carry the
//! products `g_j t`, so the Hamiltonian returned here already includes the
//! interaction time and is propagated with `tau = 1`.
//!
//! Exact propagation uses the spectral decomposition of `H t` assembled from
//! the eigenbases of the pointer operators: in the joint eigenbasis of
//! `K_1 .. K_N` the Hamiltonian is block diagonal, with system blocks
//! `sum_j g_j t kappa_j A_j`. Each block is diagonalized and exponentiated
//! exactly, so no step depends on the coupling being small.

use multi_index::MultiIndex;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Result, WeakError};
use crate::pointer::{initial_state, PointerSpec};
use crate::scenario::Scenario;
use crate::tensor::{
    embed, embed_multi, hermitian_propagator, FactorLayout, Operator, StateVector,
};

/// Maximum population allowed in the top two Fock levels of any pointer.
pub const LEAKAGE_GUARD: f64 = 1e-8;

/// Post-selection probabilities below this are rejected.
pub const POST_SELECTION_FLOOR: f64 = 1e-12;

/// Joint system-pointer state on `[system factors.., pointer 1, .., pointer N]`.
#[derive(Clone, Debug)]
pub struct CompositeState {
    pub state: StateVector,
    pub num_system_factors: usize,
    pub pointers: Vec<PointerSpec>,
}

impl CompositeState {
    pub fn system_dim(&self) -> usize {
        self.state.layout().dims()[..self.num_system_factors]
            .iter()
            .product()
    }

    /// Layout with the system factors merged into one: `[D_sys, d_1, .., d_N]`.
    fn work_layout(&self) -> Result<FactorLayout> {
        let mut dims = vec![self.system_dim()];
        dims.extend(self.pointers.iter().map(|p| p.dim()));
        FactorLayout::new(dims)
    }

    /// Population in the top two levels of each Fock pointer (`None` for spins).
    pub fn leakage(&self) -> Vec<Option<f64>> {
        let layout = self.state.layout();
        let amps = self.state.amps();
        let total_norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        self.pointers
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let PointerSpec::Fock(f) = p else { return None };
                let slot = self.num_system_factors + j;
                let stride = layout.stride(slot);
                let mut pop = 0.0;
                for (idx, z) in amps.iter().enumerate() {
                    let level = (idx / stride) % f.dim;
                    if level + 2 >= f.dim {
                        pop += z.norm_sqr();
                    }
                }
                Some(pop / total_norm.max(f64::MIN_POSITIVE))
            })
            .collect()
    }

    /// Population of the single top Fock level of pointer `j`.
    pub fn top_level_population(&self, j: usize) -> Option<f64> {
        let PointerSpec::Fock(f) = self.pointers.get(j)? else {
            return None;
        };
        let layout = self.state.layout();
        let stride = layout.stride(self.num_system_factors + j);
        let pop = self
            .state
            .amps()
            .iter()
            .enumerate()
            .filter(|(idx, _)| (idx / stride) % f.dim == f.dim - 1)
            .map(|(_, z)| z.norm_sqr())
            .sum();
        Some(pop)
    }

    /// Fails if any Fock pointer's top-two-level population exceeds `guard`.
    pub fn check_leakage(&self, guard: f64) -> Result<()> {
        for (j, leak) in self.leakage().into_iter().enumerate() {
            if let Some(leak) = leak {
                if leak > guard {
                    return Err(WeakError::TruncationLeakage {
                        pointer: j,
                        leakage: leak,
                        dim: self.pointers[j].dim(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Outcome of projecting the system onto `<F|`.
#[derive(Clone, Debug)]
pub struct PostSelectionResult {
    /// Pointer-space state, unit-normalized.
    pub conditioned: StateVector,
    /// Squared norm of the unnormalized projection.
    pub prob_success: f64,
    /// `<F|I>`, the zero-coupling amplitude of the projection.
    pub pre_post_overlap: C64,
    pub pointers: Vec<PointerSpec>,
}

mod multi_index {
    /// Odometer over `0..dims[0] x 0..dims[1] x ..`, last index fastest.
    pub struct MultiIndex {
        dims: Vec<usize>,
        cur: Vec<usize>,
        done: bool,
    }

    impl MultiIndex {
        pub fn new(dims: &[usize]) -> Self {
            Self {
                dims: dims.to_vec(),
                cur: vec![0; dims.len()],
                done: dims.contains(&0),
            }
        }
    }

    impl Iterator for MultiIndex {
        type Item = Vec<usize>;

        fn next(&mut self) -> Option<Vec<usize>> {
            if self.done {
                return None;
            }
            let out = self.cur.clone();
            let mut k = self.dims.len();
            loop {
                if k == 0 {
                    self.done = true;
                    break;
                }
                k -= 1;
                self.cur[k] += 1;
                if self.cur[k] < self.dims[k] {
                    break;
                }
                self.cur[k] = 0;
            }
            Some(out)
        }
    }
}

/// `H t` on the composite layout as a dense operator.
pub fn build_hamiltonian(s: &Scenario) -> Result<Operator> {
    s.validate()?;
    let layout = s.composite_layout()?;
    let nsys = s.system_dims.len();
    let mut h = Operator::zeros(layout.clone());
    for (j, ((obs, pointer), coupling)) in s
        .observables
        .iter()
        .zip(&s.pointers)
        .zip(&s.couplings)
        .enumerate()
    {
        let sub = FactorLayout::new(obs.target.iter().map(|&t| s.system_dims[t]).collect())?;
        let a = embed_multi(&obs.matrix.clone().with_layout(sub)?, &obs.target, &layout)?;
        let k = embed(&pointer.coupling_operator()?, nsys + j, &layout)?;
        h = h.add(&a.mul(&k)?.scale(C64::new(coupling.gt, 0.0)))?;
    }
    h.check_hermitian().map_err(|e| {
        WeakError::Numerical(format!(
            "assembled Hamiltonian failed the Hermiticity check ({e})"
        ))
    })?;
    Operator::hermitian(layout, h.into_matrix())
}

/// `|I> (x) |0>^N` (spin pointers start in `|m = -s>`).
pub fn initial_composite(s: &Scenario) -> Result<CompositeState> {
    let mut factors = vec![s.pre_state()?];
    for p in &s.pointers {
        factors.push(initial_state(p)?);
    }
    let state = StateVector::product(&factors)?.with_layout(s.composite_layout()?)?;
    Ok(CompositeState {
        state,
        num_system_factors: s.system_dims.len(),
        pointers: s.pointers.clone(),
    })
}

/// Exact propagation without the truncation guard.
pub fn evolve_unguarded(s: &Scenario) -> Result<CompositeState> {
    s.validate()?;
    let init = initial_composite(s)?;
    if s.couplings.iter().all(|c| c.gt == 0.0) {
        return Ok(init);
    }
    let sys_obs = s.system_observables()?;
    let dsys = init.system_dim();
    let mut eig_vals = Vec::with_capacity(s.pointers.len());
    let mut eig_vecs = Vec::with_capacity(s.pointers.len());
    for p in &s.pointers {
        let k = p.coupling_operator()?;
        let eig = k.matrix().clone().symmetric_eigen();
        eig_vals.push(eig.eigenvalues);
        eig_vecs.push(eig.eigenvectors);
    }
    let dims: Vec<usize> = s.pointers.iter().map(|p| p.dim()).collect();
    let pointer_total: usize = dims.iter().product();
    let pre = s.pre_state()?;
    let sys_layout = FactorLayout::single(dsys)?;
    let pre_flat = pre.clone().with_layout(sys_layout.clone())?;

    // amplitudes in the basis |s> (x) |kappa_1> .. |kappa_N>
    let mut work = vec![C64::new(0.0, 0.0); dsys * pointer_total];
    for (flat, ks) in MultiIndex::new(&dims).enumerate() {
        // overlap of the initial pointer product with this eigenvector product
        let weight: C64 = ks
            .iter()
            .enumerate()
            .map(|(j, &k)| eig_vecs[j][(0, k)].conj())
            .product();
        if weight == C64::new(0.0, 0.0) {
            continue;
        }
        let mut block = DMatrix::<C64>::zeros(dsys, dsys);
        for (j, &k) in ks.iter().enumerate() {
            block += sys_obs[j].matrix() * C64::new(s.couplings[j].gt * eig_vals[j][k], 0.0);
        }
        let block = Operator::hermitian(sys_layout.clone(), block)?;
        let u = hermitian_propagator(&block, 1.0)?;
        let evolved = u.apply(&pre_flat)?;
        for (sidx, z) in evolved.amps().iter().enumerate() {
            work[sidx * pointer_total + flat] = z * weight;
        }
    }

    let work_layout = init.work_layout()?;
    let mut state = StateVector::new(work_layout, work)?;
    for (j, v) in eig_vecs.iter().enumerate() {
        state = state.apply_local(v, j + 1)?;
    }
    let state = state.with_layout(s.composite_layout()?)?;
    Ok(CompositeState {
        state,
        num_system_factors: init.num_system_factors,
        pointers: init.pointers,
    })
}

/// Exact propagation `exp(-i H t) |I>|0..0>`, with the truncation-leakage guard.
pub fn evolve_exact(s: &Scenario) -> Result<CompositeState> {
    let out = evolve_unguarded(s)?;
    out.check_leakage(LEAKAGE_GUARD)?;
    Ok(out)
}

/// Reference route: dense `H t`, full spectral propagator, matrix-vector product.
pub fn evolve_dense(s: &Scenario) -> Result<CompositeState> {
    let h = build_hamiltonian(s)?;
    let u = hermitian_propagator(&h, 1.0)?;
    let init = initial_composite(s)?;
    let state = u.apply(&init.state)?;
    Ok(CompositeState { state, ..init })
}

/// `H t |psi>` without forming the dense Hamiltonian.
fn apply_hamiltonian(
    s: &Scenario,
    sys_obs: &[Operator],
    ks: &[Operator],
    psi: &StateVector,
) -> Result<StateVector> {
    let mut acc = psi.scale(C64::new(0.0, 0.0));
    for j in 0..s.pointers.len() {
        let term = psi
            .apply_local(sys_obs[j].matrix(), 0)?
            .apply_local(ks[j].matrix(), j + 1)?;
        acc = acc.add(&term.scale(C64::new(s.couplings[j].gt, 0.0)))?;
    }
    Ok(acc)
}

/// Unnormalized series `sum_{k <= order} (-i H t)^k / k!` applied to the
/// initial state. A structural diagnostic only.
pub fn evolve_taylor(s: &Scenario, order: usize) -> Result<CompositeState> {
    if order < 1 {
        return Err(WeakError::Precondition(
            "Taylor order must be at least 1".into(),
        ));
    }
    s.validate()?;
    let init = initial_composite(s)?;
    let sys_obs = s.system_observables()?;
    let ks = s
        .pointers
        .iter()
        .map(|p| p.coupling_operator())
        .collect::<Result<Vec<_>>>()?;
    let work_layout = init.work_layout()?;
    let mut term = init.state.clone().with_layout(work_layout)?;
    let mut sum = term.clone();
    for k in 1..=order {
        term = apply_hamiltonian(s, &sys_obs, &ks, &term)?.scale(C64::new(0.0, -1.0 / k as f64));
        sum = sum.add(&term)?;
    }
    let state = sum.with_layout(s.composite_layout()?)?;
    Ok(CompositeState { state, ..init })
}

/// Projects the system factors onto `<F|`.
pub fn post_select(c: &CompositeState, s: &Scenario) -> Result<PostSelectionResult> {
    let post = s.post_state()?;
    let dsys = c.system_dim();
    if post.amps().len() != dsys {
        return Err(WeakError::DimensionMismatch {
            expected: dsys,
            found: post.amps().len(),
        });
    }
    let pointer_layout = FactorLayout::new(c.pointers.iter().map(|p| p.dim()).collect())?;
    let ptot = pointer_layout.total();
    let amps = c.state.amps();
    let mut proj = vec![C64::new(0.0, 0.0); ptot];
    for (sidx, f) in post.amps().iter().enumerate() {
        let fc = f.conj();
        if fc == C64::new(0.0, 0.0) {
            continue;
        }
        for (p, out) in proj.iter_mut().enumerate() {
            *out += fc * amps[sidx * ptot + p];
        }
    }
    let prob: f64 = proj.iter().map(|z| z.norm_sqr()).sum();
    if prob.is_nan() || prob < POST_SELECTION_FLOOR {
        return Err(WeakError::PostSelectionFailure {
            prob,
            floor: POST_SELECTION_FLOOR,
        });
    }
    let conditioned = StateVector::new(pointer_layout, proj)?.normalized()?;
    let overlap = post.inner(&s.pre_state()?)?;
    Ok(PostSelectionResult {
        conditioned,
        prob_success: prob,
        pre_post_overlap: overlap,
        pointers: c.pointers.clone(),
    })
}
