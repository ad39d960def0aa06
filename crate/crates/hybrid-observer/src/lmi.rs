//! Affine matrix-inequality problems and their reduction to conic form.
//!
//! This module hosts the generic machinery the analysis and design layers
//! sit on: symmetric/full matrix variables, affine symmetric-matrix
//! constraints tagged with a definiteness sense, affine scalar equalities
//! and objectives, and the canonicalization of all of that into a standard
//! conic program
//!
//! ```text
//! minimize    q·x
//! subject to  A_eq x = b_eq                 (zero cone)
//!             svec(S_i(x)) ∈ PSD triangle   (one block per constraint)
//! ```
//!
//! solved by a pluggable semidefinite-programming backend (Clarabel wired in
//! as the default).
//!
//! Constraints are given as *closures* evaluating the affine matrix
//! expression at an assignment of the declared variables. Canonicalization
//! recovers the coefficient matrices by probing the closure on basis
//! assignments (`K_k = expr(e_k) − expr(0)`), verifies affinity on random
//! assignments, and rejects anything nonlinear. This keeps call sites free
//! of any expression-tree DSL while the canonical form stays exact.
//!
//! Scalarization convention: symmetric matrix variables are packed over the
//! upper triangle, column-major, with off-diagonal entries scaled by √2
//! (`svec`), so the scalarized inner product of two symmetric matrices
//! equals their trace inner product. Full variables are packed column-major
//! without scaling. The packing is a bijection; `scalarize`/`descalarize`
//! round-trip exactly.
//!
//! Strictness policy: strict senses ("negative definite", "positive
//! definite") are implemented by injecting a margin εI at canonicalization
//! (ε = `strict_margin_coeff`·(1 + ‖K₀‖_F) per constraint), so backends ever
//! see only non-strict cones. Solutions are post-validated against the
//! *original* constraints by eigenvalue checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::Result;

/// Square root of two, used by the svec off-diagonal scaling.
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Structural class of a matrix variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStructure {
    /// Square symmetric; only the upper triangle enters the decision vector.
    Symmetric,
    /// Arbitrary rectangular; every entry is a decision scalar.
    Full,
}

/// A named matrix decision variable.
#[derive(Debug, Clone)]
pub struct MatrixVariable {
    /// Unique name within the problem.
    pub name: String,
    /// Row count.
    pub rows: usize,
    /// Column count (equals `rows` for symmetric variables).
    pub cols: usize,
    /// Symmetric or full.
    pub structure: VarStructure,
}

impl MatrixVariable {
    /// Number of decision scalars this variable contributes.
    pub fn scalar_count(&self) -> usize {
        match self.structure {
            VarStructure::Symmetric => self.rows * (self.rows + 1) / 2,
            VarStructure::Full => self.rows * self.cols,
        }
    }
}

/// A value assignment: variable name → matrix value.
pub type Assignment = BTreeMap<String, DMatrix<f64>>;

/// Definiteness sense of a matrix constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintSense {
    /// expr ≺ 0, implemented as expr ⪯ −εI with an injected margin ε > 0.
    NegativeDefinite,
    /// expr ⪯ 0, no margin.
    NegativeSemidefinite,
    /// expr ≻ 0, implemented as expr ⪰ +εI.
    PositiveDefinite,
}

impl ConstraintSense {
    fn label(self) -> &'static str {
        match self {
            ConstraintSense::NegativeDefinite => "negative-definite",
            ConstraintSense::NegativeSemidefinite => "negative-semidefinite",
            ConstraintSense::PositiveDefinite => "positive-definite",
        }
    }
}

type MatrixExpr = Box<dyn Fn(&Assignment) -> DMatrix<f64> + Send + Sync>;
type ScalarExpr = Box<dyn Fn(&Assignment) -> f64 + Send + Sync>;

struct MatrixConstraint {
    name: String,
    sense: ConstraintSense,
    expr: MatrixExpr,
}

struct ScalarEquality {
    name: String,
    expr: ScalarExpr,
}

/// An affine matrix-inequality problem over matrix variables.
///
/// Build with [`LmiProblem::new`], declare variables, add constraints as
/// closures, then [`solve`] or [`canonicalize`].
#[derive(Default)]
pub struct LmiProblem {
    variables: Vec<MatrixVariable>,
    constraints: Vec<MatrixConstraint>,
    equalities: Vec<ScalarEquality>,
    objective: Option<ScalarExpr>,
}

impl LmiProblem {
    /// Empty problem.
    pub fn new() -> Self {
        Self::default()
    }

    /// Declared variables, in declaration order.
    pub fn variables(&self) -> &[MatrixVariable] {
        &self.variables
    }

    /// Total number of decision scalars after scalarization.
    pub fn scalar_count(&self) -> usize {
        self.variables.iter().map(|v| v.scalar_count()).sum()
    }

    fn declare(&mut self, name: &str, rows: usize, cols: usize, structure: VarStructure) -> Result<()> {
        if rows == 0 || cols == 0 {
            return Err(Error::ProblemStructure(format!(
                "variable '{name}' has zero dimension {rows}x{cols}"
            )));
        }
        if structure == VarStructure::Symmetric && rows != cols {
            return Err(Error::ProblemStructure(format!(
                "symmetric variable '{name}' must be square, got {rows}x{cols}"
            )));
        }
        if self.variables.iter().any(|v| v.name == name) {
            return Err(Error::ProblemStructure(format!(
                "variable '{name}' declared twice"
            )));
        }
        self.variables.push(MatrixVariable {
            name: name.to_string(),
            rows,
            cols,
            structure,
        });
        Ok(())
    }

    /// Declares an n×n symmetric variable.
    pub fn add_symmetric(&mut self, name: &str, n: usize) -> Result<()> {
        self.declare(name, n, n, VarStructure::Symmetric)
    }

    /// Declares a rows×cols full variable.
    pub fn add_full(&mut self, name: &str, rows: usize, cols: usize) -> Result<()> {
        self.declare(name, rows, cols, VarStructure::Full)
    }

    /// Declares a scalar variable (a 1×1 full matrix).
    pub fn add_scalar(&mut self, name: &str) -> Result<()> {
        self.declare(name, 1, 1, VarStructure::Full)
    }

    /// Adds a symmetric matrix constraint `expr(assignment) ⟨sense⟩ 0`.
    ///
    /// The closure must be affine in the declared variables and return a
    /// symmetric matrix; both are verified during canonicalization.
    pub fn add_constraint(
        &mut self,
        name: &str,
        sense: ConstraintSense,
        expr: impl Fn(&Assignment) -> DMatrix<f64> + Send + Sync + 'static,
    ) {
        self.constraints.push(MatrixConstraint {
            name: name.to_string(),
            sense,
            expr: Box::new(expr),
        });
    }

    /// Adds a scalar equality `expr(assignment) = 0` (affine).
    pub fn add_equality(
        &mut self,
        name: &str,
        expr: impl Fn(&Assignment) -> f64 + Send + Sync + 'static,
    ) {
        self.equalities.push(ScalarEquality {
            name: name.to_string(),
            expr: Box::new(expr),
        });
    }

    /// Sets the affine scalar objective to minimize. Absent ⇒ feasibility.
    pub fn set_objective(&mut self, expr: impl Fn(&Assignment) -> f64 + Send + Sync + 'static) {
        self.objective = Some(Box::new(expr));
    }

    /// The all-zeros assignment for the declared variables.
    pub fn zero_assignment(&self) -> Assignment {
        self.variables
            .iter()
            .map(|v| (v.name.clone(), DMatrix::zeros(v.rows, v.cols)))
            .collect()
    }

    /// Scalar index map: for each decision scalar, its display name.
    fn scalar_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.scalar_count());
        for v in &self.variables {
            match v.structure {
                VarStructure::Symmetric => {
                    for j in 0..v.cols {
                        for i in 0..=j {
                            names.push(format!("{}[{},{}]", v.name, i, j));
                        }
                    }
                }
                VarStructure::Full => {
                    for j in 0..v.cols {
                        for i in 0..v.rows {
                            names.push(format!("{}[{},{}]", v.name, i, j));
                        }
                    }
                }
            }
        }
        names
    }

    /// The assignment whose scalarization is the k-th standard basis vector.
    fn basis_assignment(&self, k: usize) -> Assignment {
        let mut a = self.zero_assignment();
        let mut idx = 0;
        for v in &self.variables {
            let m = a.get_mut(&v.name).expect("declared variable");
            match v.structure {
                VarStructure::Symmetric => {
                    for j in 0..v.cols {
                        for i in 0..=j {
                            if idx == k {
                                if i == j {
                                    m[(i, j)] = 1.0;
                                } else {
                                    // Unit svec coordinate: the matrix entry
                                    // pair is 1/√2 so that the packed scalar
                                    // (√2·entry) equals one.
                                    m[(i, j)] = 1.0 / SQRT_2;
                                    m[(j, i)] = 1.0 / SQRT_2;
                                }
                                return a;
                            }
                            idx += 1;
                        }
                    }
                }
                VarStructure::Full => {
                    for j in 0..v.cols {
                        for i in 0..v.rows {
                            if idx == k {
                                m[(i, j)] = 1.0;
                                return a;
                            }
                            idx += 1;
                        }
                    }
                }
            }
        }
        panic!("scalar index {k} out of range");
    }
}

/// Packs an assignment into the decision vector (svec scaling applied to
/// symmetric variables). The inverse of [`descalarize`].
pub fn scalarize(p: &LmiProblem, a: &Assignment) -> Result<Vec<f64>> {
    let mut x = Vec::with_capacity(p.scalar_count());
    for v in p.variables() {
        let m = a.get(&v.name).ok_or_else(|| {
            Error::ProblemStructure(format!("assignment missing variable '{}'", v.name))
        })?;
        if m.shape() != (v.rows, v.cols) {
            return Err(Error::dim(&v.name, (v.rows, v.cols), m.shape()));
        }
        match v.structure {
            VarStructure::Symmetric => {
                for j in 0..v.cols {
                    for i in 0..=j {
                        if i == j {
                            x.push(m[(i, j)]);
                        } else {
                            x.push(SQRT_2 * m[(i, j)]);
                        }
                    }
                }
            }
            VarStructure::Full => {
                for j in 0..v.cols {
                    for i in 0..v.rows {
                        x.push(m[(i, j)]);
                    }
                }
            }
        }
    }
    Ok(x)
}

/// Unpacks a decision vector into an assignment. The inverse of
/// [`scalarize`].
pub fn descalarize(p: &LmiProblem, x: &[f64]) -> Result<Assignment> {
    if x.len() != p.scalar_count() {
        return Err(Error::ProblemStructure(format!(
            "decision vector has length {}, problem has {} scalars",
            x.len(),
            p.scalar_count()
        )));
    }
    let mut a = Assignment::new();
    let mut idx = 0;
    for v in p.variables() {
        let mut m = DMatrix::zeros(v.rows, v.cols);
        match v.structure {
            VarStructure::Symmetric => {
                for j in 0..v.cols {
                    for i in 0..=j {
                        if i == j {
                            m[(i, j)] = x[idx];
                        } else {
                            m[(i, j)] = x[idx] / SQRT_2;
                            m[(j, i)] = x[idx] / SQRT_2;
                        }
                        idx += 1;
                    }
                }
            }
            VarStructure::Full => {
                for j in 0..v.cols {
                    for i in 0..v.rows {
                        m[(i, j)] = x[idx];
                        idx += 1;
                    }
                }
            }
        }
        a.insert(v.name.clone(), m);
    }
    Ok(a)
}

/// svec: packs the upper triangle of a symmetric matrix column-major with
/// off-diagonals scaled by √2, so `svec(A)·svec(B) = trace(AB)`.
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                out.push(m[(i, j)]);
            } else {
                out.push(SQRT_2 * m[(i, j)]);
            }
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn unsvec(v: &[f64], n: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), n * (n + 1) / 2);
    let mut m = DMatrix::zeros(n, n);
    let mut idx = 0;
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                m[(i, j)] = v[idx];
            } else {
                m[(i, j)] = v[idx] / SQRT_2;
                m[(j, i)] = v[idx] / SQRT_2;
            }
            idx += 1;
        }
    }
    m
}

/// Tolerances and limits for canonicalization and solving.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Margin coefficient for strict senses: ε = coeff·(1 + ‖K₀‖_F).
    pub strict_margin_coeff: f64,
    /// Backend duality-gap / feasibility tolerance.
    pub tolerance: f64,
    /// Backend iteration limit.
    pub max_iterations: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            strict_margin_coeff: 1e-7,
            tolerance: 1e-8,
            max_iterations: 200,
        }
    }
}

/// One PSD block of the canonical form: `K0 + Σ_k x_k·K_k ⟨sense⟩ margin·I`.
#[derive(Debug, Clone)]
pub struct CanonicalBlock {
    /// Constraint name, carried through for diagnostics.
    pub name: String,
    /// Matrix dimension.
    pub dim: usize,
    /// Original sense.
    pub sense: ConstraintSense,
    /// Injected strictness margin (0 for non-strict senses).
    pub margin: f64,
    /// Constant term.
    pub k0: DMatrix<f64>,
    /// Coefficient matrix per decision scalar (dense; zero matrices kept so
    /// indices line up with the decision vector).
    pub coeffs: Vec<DMatrix<f64>>,
}

/// The canonical conic program extracted from an [`LmiProblem`].
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    /// Decision-scalar display names (index-aligned with the vector).
    pub scalar_names: Vec<String>,
    /// Linear objective coefficients (zeros for feasibility problems).
    pub q: Vec<f64>,
    /// Objective constant term, added back when reporting.
    pub c0: f64,
    /// Whether the problem declared an objective at all.
    pub has_objective: bool,
    /// Equality rows `a·x = b`, with names.
    pub equalities: Vec<(String, Vec<f64>, f64)>,
    /// PSD blocks.
    pub blocks: Vec<CanonicalBlock>,
}

/// Symmetrizes and checks that the closure actually returned a symmetric
/// matrix (within a scale-relative tolerance).
fn symmetrized(name: &str, m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::ProblemStructure(format!(
            "constraint '{name}' returned a non-square matrix {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = 1.0 + m.norm();
    let asym = (&m - m.transpose()).norm();
    if asym > 1e-9 * scale {
        return Err(Error::ProblemStructure(format!(
            "constraint '{name}' returned an asymmetric matrix (asymmetry {asym:.3e})"
        )));
    }
    Ok((&m + m.transpose()) * 0.5)
}

/// Reduces the problem to conic standard form.
///
/// Coefficients are extracted by probing each closure at the zero
/// assignment and at every scalar basis assignment; affinity is then
/// verified at two pseudo-random assignments (seeded, deterministic) and
/// violations are rejected naming the offending constraint. Strictness
/// margins are injected here so the backend sees only non-strict cones.
pub fn canonicalize(p: &LmiProblem, options: &SolveOptions) -> Result<CanonicalForm> {
    let n_scalars = p.scalar_count();
    let zero = p.zero_assignment();
    let bases: Vec<Assignment> = (0..n_scalars).map(|k| p.basis_assignment(k)).collect();

    // Deterministic probe points for the affinity check.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1e1);
    let probes: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..n_scalars).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let probe_assignments: Vec<Assignment> = probes
        .iter()
        .map(|x| descalarize(p, x))
        .collect::<Result<_>>()?;

    // Matrix constraints → PSD blocks.
    let mut blocks = Vec::with_capacity(p.constraints.len());
    for c in &p.constraints {
        let k0 = symmetrized(&c.name, (c.expr)(&zero))?;
        let dim = k0.nrows();
        let mut coeffs = Vec::with_capacity(n_scalars);
        for basis in &bases {
            let kk = symmetrized(&c.name, (c.expr)(basis))? - &k0;
            if kk.nrows() != dim {
                return Err(Error::ProblemStructure(format!(
                    "constraint '{}' changes dimension across assignments",
                    c.name
                )));
            }
            coeffs.push(kk);
        }
        // Affinity check: expr(x) must equal K0 + Σ x_k K_k at the probes.
        for (x, ax) in probes.iter().zip(&probe_assignments) {
            let direct = symmetrized(&c.name, (c.expr)(ax))?;
            let mut predicted = k0.clone();
            for (xk, kk) in x.iter().zip(&coeffs) {
                predicted += kk * *xk;
            }
            let residual = (&direct - &predicted).norm();
            if residual > 1e-9 * (1.0 + direct.norm()) {
                return Err(Error::NonAffineConstraint {
                    constraint: c.name.clone(),
                    residual,
                });
            }
        }
        let margin = match c.sense {
            ConstraintSense::NegativeSemidefinite => 0.0,
            _ => options.strict_margin_coeff * (1.0 + k0.norm()),
        };
        blocks.push(CanonicalBlock {
            name: c.name.clone(),
            dim,
            sense: c.sense,
            margin,
            k0,
            coeffs,
        });
    }

    // Scalar equalities → zero-cone rows.
    let mut equalities = Vec::with_capacity(p.equalities.len());
    for e in &p.equalities {
        let e0 = (e.expr)(&zero);
        let row: Vec<f64> = bases.iter().map(|b| (e.expr)(b) - e0).collect();
        for (x, ax) in probes.iter().zip(&probe_assignments) {
            let direct = (e.expr)(ax);
            let predicted = e0 + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            let residual = (direct - predicted).abs();
            if residual > 1e-9 * (1.0 + direct.abs()) {
                return Err(Error::NonAffineConstraint {
                    constraint: e.name.clone(),
                    residual,
                });
            }
        }
        // expr(x) = e0 + row·x = 0  ⇔  row·x = −e0.
        equalities.push((e.name.clone(), row, -e0));
    }

    // Objective.
    let (q, c0, has_objective) = match &p.objective {
        Some(f) => {
            let c0 = f(&zero);
            let q: Vec<f64> = bases.iter().map(|b| f(b) - c0).collect();
            for (x, ax) in probes.iter().zip(&probe_assignments) {
                let direct = f(ax);
                let predicted = c0 + q.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                let residual = (direct - predicted).abs();
                if residual > 1e-9 * (1.0 + direct.abs()) {
                    return Err(Error::NonAffineConstraint {
                        constraint: "objective".into(),
                        residual,
                    });
                }
            }
            (q, c0, true)
        }
        None => (vec![0.0; n_scalars], 0.0, false),
    };

    Ok(CanonicalForm {
        scalar_names: p.scalar_names(),
        q,
        c0,
        has_objective,
        equalities,
        blocks,
    })
}

/// Cone kinds the backend must support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeSpec {
    /// `s = 0` (equality rows).
    Zero(usize),
    /// svec of an n×n PSD matrix (n(n+1)/2 rows).
    PsdTriangle(usize),
}

/// A fully scalarized conic program: minimize `q·x` subject to
/// `A x + s = b`, `s ∈ K`, with `A` given densely row-by-row and `K` the
/// ordered cone list.
pub struct ConicProblem {
    /// Number of decision scalars.
    pub num_vars: usize,
    /// Objective coefficients.
    pub q: Vec<f64>,
    /// Dense rows of A.
    pub a_rows: Vec<Vec<f64>>,
    /// Right-hand side.
    pub b: Vec<f64>,
    /// Cones, in row order.
    pub cones: Vec<ConeSpec>,
    /// Requested accuracy.
    pub tolerance: f64,
    /// Iteration cap.
    pub max_iterations: u32,
}

/// Backend-reported status, before post-validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawStatus {
    /// Converged to the requested accuracy.
    Solved,
    /// Converged to reduced accuracy; post-validation decides acceptance.
    AlmostSolved,
    /// Primal infeasibility certificate found.
    PrimalInfeasible,
    /// Dual infeasibility certificate (primal unbounded).
    DualInfeasible,
    /// Anything else (iteration limit, numerical breakdown), with detail.
    Failed(String),
}

/// Raw backend answer.
pub struct RawSolution {
    /// Termination status.
    pub status: RawStatus,
    /// Primal decision vector (meaningful on Solved/AlmostSolved).
    pub x: Vec<f64>,
    /// Backend objective value `q·x` (no constant term).
    pub objective: f64,
    /// Iteration count.
    pub iterations: u32,
}

/// A conic-programming backend with semidefinite cone support.
///
/// Implementations must be safe for concurrent independent solves: no
/// shared mutable state between calls.
pub trait SdpBackend: Sync {
    /// Backend display name for diagnostics.
    fn name(&self) -> &'static str;
    /// Solves the conic program.
    fn solve_conic(&self, prob: &ConicProblem) -> Result<RawSolution>;
}

/// Assembles the scalarized conic program (zero cone first, then one PSD
/// triangle block per constraint, in declaration order).
pub fn assemble_conic(canon: &CanonicalForm, options: &SolveOptions) -> ConicProblem {
    let n = canon.q.len();
    let mut a_rows: Vec<Vec<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut cones: Vec<ConeSpec> = Vec::new();

    if !canon.equalities.is_empty() {
        for (_, row, rhs) in &canon.equalities {
            a_rows.push(row.clone());
            b.push(*rhs);
        }
        cones.push(ConeSpec::Zero(canon.equalities.len()));
    }

    for block in &canon.blocks {
        // For ⪯ senses the slack is svec(−margin·I − expr(x)) ∈ PSD:
        //   s = b − A x with A·e_k = svec(K_k), b = svec(−margin·I − K0).
        // For ⪰ the slack is svec(expr(x) − margin·I):
        //   A·e_k = −svec(K_k), b = svec(K0 − margin·I).
        let dim = block.dim;
        let eye = DMatrix::<f64>::identity(dim, dim);
        let (sign, shift) = match block.sense {
            ConstraintSense::NegativeDefinite | ConstraintSense::NegativeSemidefinite => {
                (1.0, &block.k0 * -1.0 - &eye * block.margin)
            }
            ConstraintSense::PositiveDefinite => (-1.0, &block.k0 - &eye * block.margin),
        };
        let rows_base = a_rows.len();
        let tri = dim * (dim + 1) / 2;
        for _ in 0..tri {
            a_rows.push(vec![0.0; n]);
        }
        for (k, kk) in block.coeffs.iter().enumerate() {
            for (r, v) in svec(kk).into_iter().enumerate() {
                a_rows[rows_base + r][k] = sign * v;
            }
        }
        b.extend(svec(&shift));
        cones.push(ConeSpec::PsdTriangle(dim));
    }

    ConicProblem {
        num_vars: n,
        q: canon.q.clone(),
        a_rows,
        b,
        cones,
        tolerance: options.tolerance,
        max_iterations: options.max_iterations,
    }
}

mod clarabel_backend;
pub use clarabel_backend::ClarabelBackend;

/// Solve status after post-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Objective problem solved to optimality (post-validated).
    Optimal,
    /// Feasibility problem solved (post-validated).
    Feasible,
    /// Certified infeasible.
    Infeasible,
    /// Backend breakdown, or an answer that failed post-validation.
    NumericalFailure,
}

/// Outcome of [`solve`]: status, de-canonicalized assignments, objective,
/// and diagnostics including the worst post-validation residual.
pub struct SolveOutcome {
    /// Final status.
    pub status: SolveStatus,
    /// Variable values (empty unless Optimal/Feasible).
    pub assignments: Assignment,
    /// Objective value including the affine constant (None for feasibility
    /// problems and non-solved statuses).
    pub objective_value: Option<f64>,
    /// Human-readable backend + validation diagnostics.
    pub solver_diagnostics: String,
    /// Worst constraint residual beyond its cone, from post-validation
    /// (0 when every constraint holds with slack).
    pub worst_residual: f64,
}

/// Post-validates the original constraints at an assignment.
///
/// Returns (worst residual, per-constraint lines). The residual of a
/// constraint is how far its extreme eigenvalue sits on the wrong side of
/// the *margined* boundary (so a residual ≤ 0 means "holds with the full
/// injected margin").
fn post_validate(canon: &CanonicalForm, x: &[f64]) -> (f64, Vec<String>) {
    let mut worst = f64::NEG_INFINITY;
    let mut lines = Vec::new();
    for block in &canon.blocks {
        let mut m = block.k0.clone();
        for (xk, kk) in x.iter().zip(&block.coeffs) {
            m += kk * *xk;
        }
        let m = (&m + m.transpose()) * 0.5;
        let eigs = m.symmetric_eigen().eigenvalues;
        let (extreme, residual) = match block.sense {
            ConstraintSense::NegativeDefinite | ConstraintSense::NegativeSemidefinite => {
                let lmax = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lmax, lmax + block.margin)
            }
            ConstraintSense::PositiveDefinite => {
                let lmin = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
                (lmin, block.margin - lmin)
            }
        };
        worst = worst.max(residual);
        lines.push(format!(
            "  {} [{}]: extreme eigenvalue {extreme:.6e}, residual {residual:.3e}",
            block.name,
            block.sense.label()
        ));
    }
    for (name, row, rhs) in &canon.equalities {
        let lhs: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
        let residual = (lhs - rhs).abs();
        worst = worst.max(residual);
        lines.push(format!("  {name} [equality]: residual {residual:.3e}"));
    }
    (worst.max(0.0), lines)
}

/// Canonicalizes and solves with the default backend (Clarabel).
pub fn solve(p: &LmiProblem, options: &SolveOptions) -> Result<SolveOutcome> {
    solve_with_backend(p, options, &ClarabelBackend)
}

/// Canonicalizes and solves with an explicit backend.
///
/// On a Solved/AlmostSolved backend status, the original constraints are
/// re-checked by eigenvalue decomposition at the returned assignment; an
/// answer whose worst residual exceeds 10× the solver tolerance is demoted
/// to `NumericalFailure` rather than silently accepted.
pub fn solve_with_backend(
    p: &LmiProblem,
    options: &SolveOptions,
    backend: &dyn SdpBackend,
) -> Result<SolveOutcome> {
    let canon = canonicalize(p, options)?;
    let conic = assemble_conic(&canon, options);
    let raw = backend.solve_conic(&conic)?;

    let accept = |raw: &RawSolution, note: &str| -> Result<SolveOutcome> {
        let assignments = descalarize(p, &raw.x)?;
        let (worst, lines) = post_validate(&canon, &raw.x);
        let tol_gate = 10.0 * options.tolerance;
        let diag_base = format!(
            "backend {} status {:?}, {} iterations{note}\npost-validation (worst residual {worst:.3e}, gate {tol_gate:.3e}):\n{}",
            backend.name(),
            raw.status,
            raw.iterations,
            lines.join("\n")
        );
        if worst > tol_gate {
            return Ok(SolveOutcome {
                status: SolveStatus::NumericalFailure,
                assignments: Assignment::new(),
                objective_value: None,
                solver_diagnostics: format!(
                    "{diag_base}\nrejected: residual exceeds 10x solver tolerance"
                ),
                worst_residual: worst,
            });
        }
        Ok(SolveOutcome {
            status: if canon.has_objective {
                SolveStatus::Optimal
            } else {
                SolveStatus::Feasible
            },
            assignments,
            objective_value: canon
                .has_objective
                .then_some(raw.objective + canon.c0),
            solver_diagnostics: diag_base,
            worst_residual: worst,
        })
    };

    match raw.status {
        RawStatus::Solved => accept(&raw, ""),
        RawStatus::AlmostSolved => accept(&raw, " (reduced accuracy)"),
        RawStatus::PrimalInfeasible => Ok(SolveOutcome {
            status: SolveStatus::Infeasible,
            assignments: Assignment::new(),
            objective_value: None,
            solver_diagnostics: format!(
                "backend {} reported primal infeasibility after {} iterations",
                backend.name(),
                raw.iterations
            ),
            worst_residual: f64::INFINITY,
        }),
        RawStatus::DualInfeasible => Ok(SolveOutcome {
            status: SolveStatus::NumericalFailure,
            assignments: Assignment::new(),
            objective_value: None,
            solver_diagnostics: format!(
                "backend {} reported dual infeasibility (objective unbounded below)",
                backend.name()
            ),
            worst_residual: f64::INFINITY,
        }),
        RawStatus::Failed(detail) => Ok(SolveOutcome {
            status: SolveStatus::NumericalFailure,
            assignments: Assignment::new(),
            objective_value: None,
            solver_diagnostics: format!("backend {} failed: {detail}", backend.name()),
            worst_residual: f64::INFINITY,
        }),
    }
}

fn write_matrix(out: &mut String, label: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "  {label} =");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:+.17e}", m[(i, j)])).collect();
        let _ = writeln!(out, "    [ {} ]", row.join("  "));
    }
}

/// Renders the canonical conic problem as plain text with explicit matrix
/// coefficients, one constraint block per section — for cross-checking
/// against external tools.
pub fn dump_canonical(p: &LmiProblem, options: &SolveOptions) -> Result<String> {
    let canon = canonicalize(p, options)?;
    let mut out = String::new();
    let _ = writeln!(out, "# canonical conic form");
    let _ = writeln!(out, "decision scalars: {}", canon.q.len());
    for (k, name) in canon.scalar_names.iter().enumerate() {
        let _ = writeln!(out, "  x[{k}] = {name}");
    }
    let _ = writeln!(out);
    if canon.has_objective {
        let _ = writeln!(out, "objective: minimize q.x + c0");
        let q: Vec<String> = canon.q.iter().map(|v| format!("{v:+.17e}")).collect();
        let _ = writeln!(out, "  q  = [ {} ]", q.join("  "));
        let _ = writeln!(out, "  c0 = {:+.17e}", canon.c0);
    } else {
        let _ = writeln!(out, "objective: none (feasibility)");
    }
    let _ = writeln!(out);
    if !canon.equalities.is_empty() {
        let _ = writeln!(out, "equalities (zero cone, {} rows):", canon.equalities.len());
        for (name, row, rhs) in &canon.equalities {
            let r: Vec<String> = row.iter().map(|v| format!("{v:+.17e}")).collect();
            let _ = writeln!(out, "  '{name}': a = [ {} ], b = {rhs:+.17e}", r.join("  "));
        }
        let _ = writeln!(out);
    }
    for block in &canon.blocks {
        let _ = writeln!(
            out,
            "block '{}' (dim {}, sense {}, margin {:.17e}):",
            block.name,
            block.dim,
            block.sense.label(),
            block.margin
        );
        write_matrix(&mut out, "K0", &block.k0);
        for (k, kk) in block.coeffs.iter().enumerate() {
            if kk.iter().all(|v| *v == 0.0) {
                continue;
            }
            write_matrix(&mut out, &format!("K[x[{k}] = {}]", canon.scalar_names[k]), kk);
        }
        let _ = writeln!(out);
    }
    Ok(out)
}
