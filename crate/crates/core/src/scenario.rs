//! Declarative weak-measurement experiments and their JSON file format.
//!
//! A scenario file is a JSON object:
//!
//! ```json
//! {
//!   "name": "aav_qubit",
//!   "system_dims": [2],
//!   "observables": [
//!     { "name": "sigma_z", "target": [0],
//!       "matrix": [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]] }
//!   ],
//!   "pointers": [ { "kind": "fock", "sigma": 1.0, "dim": 12 } ],
//!   "couplings": [ { "gt": 0.02 } ],
//!   "pre":  [[0.7071067811865476, 0], [0.7071067811865476, 0]],
//!   "post": [[0.3826834323650898, 0], [0.9238795325112867, 0]]
//! }
//! ```
//!
//! Complex numbers are `[re, im]` pairs. Observable matrices act on the listed
//! `target` system factors in the listed order. Spin pointers are written
//! `{ "kind": "spin", "s": 0.5 }`. Optional keys: `description`,
//! `overlap_floor` (default `1e-10`).

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, Violation, ViolationKind, WeakError};
use crate::pointer::{FockPointerSpec, PointerSpec, SpinPointerSpec};
use crate::tensor::{embed_multi, FactorLayout, Operator, StateVector, NORM_TOL};

/// Default lower bound on `|<F|I>|`.
pub const DEFAULT_OVERLAP_FLOOR: f64 = 1e-10;

/// Largest allowed `|lambda|` per pointer.
pub const LAMBDA_LIMIT: f64 = 0.5;

/// `|lambda|` above which a weak-regime warning is logged.
pub const LAMBDA_WARN: f64 = 0.2;

#[derive(Clone, Debug)]
pub struct ObservableSpec {
    pub name: String,
    /// Matrix on the targeted factors, in `target` order.
    pub matrix: Operator,
    /// System-factor indices.
    pub target: Vec<usize>,
}

/// The product `g * t` for one pointer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingSpec {
    pub gt: f64,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub system_dims: Vec<usize>,
    pub observables: Vec<ObservableSpec>,
    pub pointers: Vec<PointerSpec>,
    pub couplings: Vec<CouplingSpec>,
    /// Pre-selected system amplitudes `|I>`.
    pub pre: Vec<C64>,
    /// Post-selected system amplitudes `|F>`.
    pub post: Vec<C64>,
    pub overlap_floor: f64,
}

impl PartialEq for Scenario {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.description == other.description
            && self.system_dims == other.system_dims
            && self.pointers == other.pointers
            && self.couplings == other.couplings
            && self.pre == other.pre
            && self.post == other.post
            && self.overlap_floor == other.overlap_floor
            && self.observables.len() == other.observables.len()
            && self
                .observables
                .iter()
                .zip(&other.observables)
                .all(|(a, b)| {
                    a.name == b.name
                        && a.target == b.target
                        && a.matrix.matrix() == b.matrix.matrix()
                })
    }
}

impl Scenario {
    pub fn num_pointers(&self) -> usize {
        self.pointers.len()
    }

    pub fn system_layout(&self) -> Result<FactorLayout> {
        FactorLayout::new(self.system_dims.clone())
    }

    pub fn pointer_layout(&self) -> Result<FactorLayout> {
        FactorLayout::new(self.pointers.iter().map(|p| p.dim()).collect())
    }

    /// System factors first, then one factor per pointer.
    pub fn composite_layout(&self) -> Result<FactorLayout> {
        self.system_layout()?.concat(&self.pointer_layout()?)
    }

    /// Observable `j` lifted onto the whole system layout.
    pub fn system_observable(&self, j: usize) -> Result<Operator> {
        let obs = self.observables.get(j).ok_or(WeakError::SlotOutOfRange {
            slot: j,
            factors: self.observables.len(),
        })?;
        let layout = self.system_layout()?;
        let sub = obs
            .target
            .iter()
            .map(|&t| self.system_dims.get(t).copied().unwrap_or(0))
            .collect();
        let op = obs.matrix.clone().with_layout(FactorLayout::new(sub)?)?;
        embed_multi(&op, &obs.target, &layout)
    }

    pub fn system_observables(&self) -> Result<Vec<Operator>> {
        (0..self.observables.len())
            .map(|j| self.system_observable(j))
            .collect()
    }

    pub fn pre_state(&self) -> Result<StateVector> {
        StateVector::new(self.system_layout()?, self.pre.clone())
    }

    pub fn post_state(&self) -> Result<StateVector> {
        StateVector::new(self.system_layout()?, self.post.clone())
    }

    /// Expansion parameter of each pointer.
    pub fn lambdas(&self) -> Vec<f64> {
        self.pointers
            .iter()
            .zip(&self.couplings)
            .map(|(p, c)| p.lambda(c.gt))
            .collect()
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambdas().into_iter().map(f64::abs).fold(0.0, f64::max)
    }

    pub fn all_fock(&self) -> bool {
        self.pointers
            .iter()
            .all(|p| matches!(p, PointerSpec::Fock(_)))
    }

    pub fn all_spin(&self) -> bool {
        self.pointers
            .iter()
            .all(|p| matches!(p, PointerSpec::Spin(_)))
    }

    /// Same scenario with every pointer's gt set so that its lambda equals `lambda`.
    pub fn with_lambda(&self, lambda: f64) -> Scenario {
        let mut s = self.clone();
        s.couplings = s
            .pointers
            .iter()
            .map(|p| CouplingSpec {
                gt: p.gt_for_lambda(lambda),
            })
            .collect();
        s
    }

    /// Same scenario with every Fock pointer truncated at `dim`.
    pub fn with_fock_dim(&self, dim: usize) -> Scenario {
        let mut s = self.clone();
        for p in &mut s.pointers {
            if let PointerSpec::Fock(f) = p {
                f.dim = dim;
            }
        }
        s
    }

    /// Every problem with the scenario. Never panics.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |field: String, kind: ViolationKind| out.push(Violation { field, kind });

        if self.system_dims.is_empty() {
            push(
                "system_dims".into(),
                ViolationKind::Empty("at least one system factor required".into()),
            );
        }
        for (i, &d) in self.system_dims.iter().enumerate() {
            if d == 0 {
                push(
                    format!("system_dims[{i}]"),
                    ViolationKind::Empty("factor dimension must be positive".into()),
                );
            }
        }
        let sys_total = FactorLayout::new(self.system_dims.clone())
            .map(|l| l.total())
            .ok();
        if !self.system_dims.is_empty() && !self.system_dims.contains(&0) && sys_total.is_none() {
            push(
                "system_dims".into(),
                ViolationKind::Empty("system dimension exceeds capacity".into()),
            );
        }

        let n = self.observables.len();
        if n == 0 {
            push(
                "observables".into(),
                ViolationKind::Empty("N >= 1 required".into()),
            );
        }
        if self.pointers.len() != n || self.couplings.len() != n {
            push(
                "pointers".into(),
                ViolationKind::LengthMismatch {
                    observables: n,
                    pointers: self.pointers.len(),
                    couplings: self.couplings.len(),
                },
            );
        }

        for (j, obs) in self.observables.iter().enumerate() {
            let field = format!("observables[{j}]");
            if obs.target.is_empty() {
                push(
                    format!("{field}.target"),
                    ViolationKind::Empty("target list is empty".into()),
                );
            }
            let mut ok_targets = true;
            for (k, &t) in obs.target.iter().enumerate() {
                if t >= self.system_dims.len() {
                    push(
                        format!("{field}.target"),
                        ViolationKind::TargetOutOfRange {
                            index: t,
                            factors: self.system_dims.len(),
                        },
                    );
                    ok_targets = false;
                } else if obs.target[..k].contains(&t) {
                    push(
                        format!("{field}.target"),
                        ViolationKind::DuplicateTarget { index: t },
                    );
                    ok_targets = false;
                }
            }
            if ok_targets && !obs.target.is_empty() {
                let expected = obs
                    .target
                    .iter()
                    .try_fold(1usize, |acc, &t| acc.checked_mul(self.system_dims[t]));
                if expected != Some(obs.matrix.dim()) {
                    push(
                        format!("{field}.matrix"),
                        ViolationKind::DimensionMismatch {
                            expected: expected.unwrap_or(usize::MAX),
                            found: obs.matrix.dim(),
                        },
                    );
                }
            }
            let dev = obs.matrix.hermiticity_deviation();
            if obs.matrix.check_hermitian().is_err() {
                push(
                    format!("{field}.matrix"),
                    ViolationKind::NotHermitian { deviation: dev },
                );
            }
        }

        for (j, p) in self.pointers.iter().enumerate() {
            if let PointerSpec::Fock(f) = p {
                if let Err(e) = f.check() {
                    push(
                        format!("pointers[{j}]"),
                        ViolationKind::InvalidPointer(e.to_string()),
                    );
                }
            }
        }
        if self.pointer_layout().is_err() && !self.pointers.is_empty() {
            push(
                "pointers".into(),
                ViolationKind::Empty("pointer space exceeds capacity".into()),
            );
        }

        for (j, c) in self.couplings.iter().enumerate() {
            if !c.gt.is_finite() {
                push(
                    format!("couplings[{j}].gt"),
                    ViolationKind::InvalidCoupling("gt must be finite".into()),
                );
                continue;
            }
            if let Some(p) = self.pointers.get(j) {
                let lambda = p.lambda(c.gt);
                if lambda.abs() > LAMBDA_LIMIT {
                    push(
                        format!("couplings[{j}].gt"),
                        ViolationKind::InvalidCoupling(format!(
                            "|lambda| = {:.3} exceeds {LAMBDA_LIMIT}",
                            lambda.abs()
                        )),
                    );
                } else if lambda.abs() > LAMBDA_WARN {
                    log::warn!(
                        "scenario '{}': pointer {j} has lambda = {lambda:.3}, outside the weak regime",
                        self.name
                    );
                }
            }
        }

        let mut states_ok = true;
        for (field, amps) in [("pre", &self.pre), ("post", &self.post)] {
            if let Some(total) = sys_total {
                if amps.len() != total {
                    push(
                        field.into(),
                        ViolationKind::DimensionMismatch {
                            expected: total,
                            found: amps.len(),
                        },
                    );
                    states_ok = false;
                    continue;
                }
            } else {
                states_ok = false;
            }
            if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                push(field.into(), ViolationKind::NonFinite);
                states_ok = false;
                continue;
            }
            let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > NORM_TOL {
                push(field.into(), ViolationKind::NotNormalized { norm });
                states_ok = false;
            }
        }

        if !(self.overlap_floor.is_finite() && self.overlap_floor >= 0.0) {
            push(
                "overlap_floor".into(),
                ViolationKind::InvalidCoupling(
                    "overlap floor must be finite and non-negative".into(),
                ),
            );
        } else if states_ok {
            let overlap: C64 = self
                .post
                .iter()
                .zip(&self.pre)
                .map(|(f, i)| f.conj() * i)
                .sum();
            if overlap.norm() <= self.overlap_floor {
                push(
                    "post".into(),
                    ViolationKind::DivergentWeakValue {
                        overlap: overlap.norm(),
                        floor: self.overlap_floor,
                    },
                );
            }
        }
        out
    }

    /// Ok, or the list of violations. A scenario whose only problem is a
    /// vanishing `<F|I>` yields [`WeakError::DivergentWeakValue`].
    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            return Ok(());
        }
        if let [Violation {
            kind: ViolationKind::DivergentWeakValue { overlap, floor },
            ..
        }] = v.as_slice()
        {
            return Err(WeakError::DivergentWeakValue {
                overlap: *overlap,
                floor: *floor,
            });
        }
        Err(WeakError::InvalidScenario(v))
    }
}

// --- file format -----------------------------------------------------------

type Pair = [f64; 2];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    description: String,
    system_dims: Vec<usize>,
    observables: Vec<ObservableFile>,
    pointers: Vec<PointerFile>,
    couplings: Vec<CouplingFile>,
    pre: Vec<Pair>,
    post: Vec<Pair>,
    #[serde(default = "default_floor")]
    overlap_floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_OVERLAP_FLOOR
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservableFile {
    name: String,
    target: Vec<usize>,
    matrix: Vec<Vec<Pair>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum PointerFile {
    Fock { sigma: f64, dim: usize },
    Spin { s: f64 },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingFile {
    gt: f64,
}

fn schema(location: impl Into<String>, message: impl Into<String>) -> WeakError {
    WeakError::Schema {
        location: location.into(),
        message: message.into(),
    }
}

fn pairs_to_complex(v: &[Pair]) -> Vec<C64> {
    v.iter().map(|p| C64::new(p[0], p[1])).collect()
}

fn complex_to_pairs(v: &[C64]) -> Vec<Pair> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

/// Parses a scenario document without semantic validation.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| {
        schema(
            format!("line {}, column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    if file.observables.is_empty() {
        return Err(schema("observables", "N >= 1 required"));
    }
    let mut observables = Vec::with_capacity(file.observables.len());
    for (j, o) in file.observables.into_iter().enumerate() {
        let n = o.matrix.len();
        if n == 0 {
            return Err(schema(
                format!("observables[{j}].matrix"),
                "matrix is empty",
            ));
        }
        if let Some((r, row)) = o.matrix.iter().enumerate().find(|(_, row)| row.len() != n) {
            return Err(schema(
                format!("observables[{j}].matrix[{r}]"),
                format!("row has {} entries, matrix needs {n}", row.len()),
            ));
        }
        let mat = DMatrix::from_fn(n, n, |r, c| C64::new(o.matrix[r][c][0], o.matrix[r][c][1]));
        let matrix = Operator::from_matrix(mat)
            .map_err(|e| schema(format!("observables[{j}].matrix"), e.to_string()))?;
        observables.push(ObservableSpec {
            name: o.name,
            matrix,
            target: o.target,
        });
    }
    let mut pointers = Vec::with_capacity(file.pointers.len());
    for (j, p) in file.pointers.into_iter().enumerate() {
        pointers.push(match p {
            PointerFile::Fock { sigma, dim } => PointerSpec::Fock(FockPointerSpec { sigma, dim }),
            PointerFile::Spin { s } => PointerSpec::Spin(
                SpinPointerSpec::new(s)
                    .map_err(|e| schema(format!("pointers[{j}].s"), e.to_string()))?,
            ),
        });
    }
    Ok(Scenario {
        name: file.name,
        description: file.description,
        system_dims: file.system_dims,
        observables,
        pointers,
        couplings: file
            .couplings
            .into_iter()
            .map(|c| CouplingSpec { gt: c.gt })
            .collect(),
        pre: pairs_to_complex(&file.pre),
        post: pairs_to_complex(&file.post),
        overlap_floor: file.overlap_floor,
    })
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let s = parse_scenario(text)?;
    s.validate()?;
    Ok(s)
}

/// Serializes to the scenario file format (pretty JSON).
pub fn scenario_to_json(s: &Scenario) -> String {
    let file = ScenarioFile {
        name: s.name.clone(),
        description: s.description.clone(),
        system_dims: s.system_dims.clone(),
        observables: s
            .observables
            .iter()
            .map(|o| {
                let m = o.matrix.matrix();
                ObservableFile {
                    name: o.name.clone(),
                    target: o.target.clone(),
                    matrix: (0..m.nrows())
                        .map(|r| {
                            (0..m.ncols())
                                .map(|c| [m[(r, c)].re, m[(r, c)].im])
                                .collect()
                        })
                        .collect(),
                }
            })
            .collect(),
        pointers: s
            .pointers
            .iter()
            .map(|p| match p {
                PointerSpec::Fock(f) => PointerFile::Fock {
                    sigma: f.sigma,
                    dim: f.dim,
                },
                PointerSpec::Spin(sp) => PointerFile::Spin { s: sp.s() },
            })
            .collect(),
        couplings: s
            .couplings
            .iter()
            .map(|c| CouplingFile { gt: c.gt })
            .collect(),
        pre: complex_to_pairs(&s.pre),
        post: complex_to_pairs(&s.post),
        overlap_floor: s.overlap_floor,
    };
    serde_json::to_string_pretty(&file).expect("scenario serializes")
}
