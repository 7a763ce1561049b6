//! Declarative model builder that compiles to [`ProblemData`].
//!
//! Variables are matrices of one of four kinds; expressions are affine maps
//! of their entries with elementwise broadcasting of scalars. Constraints are
//! built with [`Expr::equals`], [`Expr::le`], [`Expr::ge`] and may be chained
//! (`lo <= mid <= hi`).
//!
//! ```
//! use bsdp::modeling::*;
//! let mut m = Model::new("example");
//! let x = m.var_sdp(3, 3).unwrap();
//! m.minimize(trace(x)).unwrap();
//! m.add_affine_constraint(sum(x).equals(1.0)).unwrap();
//! let compiled = m.compile().unwrap();
//! assert_eq!(compiled.data.m(), 1);
//! ```
//!
//! Lowering rules:
//! * SDP variables become PSD blocks, NN variables linear blocks (column-major),
//!   FREE variables the difference of two linear blocks, SYMM variables the
//!   difference of two linear blocks over their upper triangle unless a
//!   `X >= 0` PSD constraint upgrades them to a PSD block.
//! * A constraint between one whole variable (optionally scaled by a positive
//!   number) and constants becomes a bound `L <= X <= U` on PSD and NN blocks.
//! * Equalities become rows of `A`, other inequalities rows of `B`.
//! * `l1_norm(e)` adds a linear block `[x+; x-]` and rows `e - x+ + x- = 0`;
//!   entries of `e` that are identical affine functions share one row with a
//!   summed weight.

use std::collections::{BTreeMap, HashMap};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{svec_index, svec_pair, tri, SQRT2};
use crate::model::{Block, BlockKind, BlockStructure, BlockVars, Bound, Finding, ProblemData, Sense, SparseCols};
use crate::params::SolverParams;
use crate::residuals::IterateState;
use crate::solver::{solve, SolveResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelingError {
    #[error("{kind:?} variable must be square, got {rows}x{cols}")]
    NotSquare { kind: VarKind, rows: usize, cols: usize },
    #[error("variable dimensions must be positive")]
    EmptyVariable,
    #[error("index ({i}, {j}) outside a {rows}x{cols} variable")]
    Index { i: usize, j: usize, rows: usize, cols: usize },
    #[error("shape mismatch: {0}x{1} against {2}x{3}")]
    Shape(usize, usize, usize, usize),
    #[error("{0}")]
    Invalid(String),
    #[error("strict inequalities are not accepted")]
    StrictInequality,
    #[error("the middle of a chained constraint must not contain constants")]
    ConstantInChain,
    #[error("constraint contains no variables")]
    NoVariables,
    #[error("PSD constraints accept only SDP or SYMM variables, found {0:?}")]
    NonSymmetricParticipant(VarKind),
    #[error("the model needs exactly one objective")]
    Objective,
    #[error("the model has no variables")]
    Empty,
    #[error("variable belongs to another model")]
    ForeignVariable,
    #[error("l1_norm can only be minimized")]
    L1Maximized,
    #[error(transparent)]
    Solve(#[from] crate::error::SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Free,
    Sdp,
    Nn,
    Symm,
}

impl VarKind {
    fn symmetric(self) -> bool {
        matches!(self, VarKind::Sdp | VarKind::Symm)
    }
}

/// Handle to a declared variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    model: u64,
    id: usize,
    pub kind: VarKind,
    pub rows: usize,
    pub cols: usize,
}

impl Var {
    /// Index of scalar entry `(i, j)`; symmetric kinds share `(i, j)` and `(j, i)`.
    fn atom(&self, i: usize, j: usize) -> usize {
        if self.kind.symmetric() {
            svec_index(i, j)
        } else {
            i + j * self.rows
        }
    }

    /// Number of distinct scalar entries.
    fn natoms(&self) -> usize {
        if self.kind.symmetric() {
            tri(self.rows)
        } else {
            self.rows * self.cols
        }
    }

    /// `(i, j)` of an atom, `i <= j` for symmetric kinds.
    fn atom_pos(&self, k: usize) -> (usize, usize) {
        if self.kind.symmetric() {
            svec_pair(k)
        } else {
            (k % self.rows, k / self.rows)
        }
    }

    /// The scalar entry `X(i, j)` (0-based).
    pub fn at(&self, i: usize, j: usize) -> Expr {
        self.select(&[i], &[j])
    }

    /// `[X(I[0], J[0]); X(I[1], J[1]); ...]`, a column.
    pub fn select(&self, is: &[usize], js: &[usize]) -> Expr {
        if is.len() != js.len() {
            return Expr::failed(ModelingError::Invalid(format!("index lists of lengths {} and {}", is.len(), js.len())));
        }
        let mut entries = Vec::with_capacity(is.len());
        for (&i, &j) in is.iter().zip(js) {
            if i >= self.rows || j >= self.cols {
                return Expr::failed(ModelingError::Index { i, j, rows: self.rows, cols: self.cols });
            }
            entries.push(Lin::atom(self, i, j, 1.0));
        }
        Expr { rows: entries.len(), cols: 1, entries, whole: None, model: Some(self.model), error: None }
    }
}

type Atom = (usize, usize);

/// One affine function of the variable entries.
#[derive(Debug, Clone, PartialEq, Default)]
struct Lin {
    /// Sorted by atom, no zero coefficients.
    terms: Vec<(Atom, f64)>,
    constant: f64,
}

impl Lin {
    fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    fn atom(v: &Var, i: usize, j: usize, coef: f64) -> Self {
        Self { terms: vec![((v.id, v.atom(i, j)), coef)], constant: 0.0 }
    }

    fn scale(&self, a: f64) -> Self {
        if a == 0.0 {
            return Self::constant(0.0);
        }
        Self { terms: self.terms.iter().map(|&(t, c)| (t, c * a)).collect(), constant: self.constant * a }
    }

    fn axpy(&self, a: f64, other: &Lin) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut p, mut q) = (0, 0);
        while p < self.terms.len() || q < other.terms.len() {
            let next = match (self.terms.get(p), other.terms.get(q)) {
                (Some(&(ta, ca)), Some(&(tb, cb))) if ta == tb => {
                    p += 1;
                    q += 1;
                    (ta, ca + a * cb)
                }
                (Some(&(ta, ca)), Some(&(tb, _))) if ta < tb => {
                    p += 1;
                    (ta, ca)
                }
                (Some(&(ta, ca)), None) => {
                    p += 1;
                    (ta, ca)
                }
                (_, Some(&(tb, cb))) => {
                    q += 1;
                    (tb, a * cb)
                }
                (None, None) => unreachable!(),
            };
            if next.1 != 0.0 {
                terms.push(next);
            }
        }
        Self { terms, constant: self.constant + a * other.constant }
    }

    fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }
}

/// An affine matrix expression, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    rows: usize,
    cols: usize,
    entries: Vec<Lin>,
    /// Set while the expression is `a * X` for a whole variable `X`.
    whole: Option<(Var, f64)>,
    model: Option<u64>,
    /// First error met while building; reported when the expression is used.
    error: Option<ModelingError>,
}

impl Expr {
    fn failed(e: ModelingError) -> Self {
        Self { rows: 0, cols: 0, entries: Vec::new(), whole: None, model: None, error: Some(e) }
    }

    pub fn constant(m: &DMatrix<f64>) -> Self {
        let entries = m.iter().map(|&v| Lin::constant(v)).collect();
        Self { rows: m.nrows(), cols: m.ncols(), entries, whole: None, model: None, error: None }
    }

    pub fn scalar(c: f64) -> Self {
        Self { rows: 1, cols: 1, entries: vec![Lin::constant(c)], whole: None, model: None, error: None }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn is_constant(&self) -> bool {
        self.entries.iter().all(Lin::is_constant)
    }

    fn entry(&self, i: usize, j: usize) -> &Lin {
        &self.entries[i + j * self.rows]
    }

    fn map(self, f: impl Fn(&Lin) -> Lin) -> Self {
        let entries = self.entries.iter().map(f).collect();
        Self { entries, whole: None, ..self }
    }

    fn combine(self, other: Expr, a: f64) -> Self {
        if let Some(e) = self.error.clone().or_else(|| other.error.clone()) {
            return Expr::failed(e);
        }
        let model = match (self.model, other.model) {
            (Some(x), Some(y)) if x != y => return Expr::failed(ModelingError::ForeignVariable),
            (x, y) => x.or(y),
        };
        let (rows, cols, entries) = if (self.rows, self.cols) == (other.rows, other.cols) {
            (self.rows, self.cols, self.entries.iter().zip(&other.entries).map(|(x, y)| x.axpy(a, y)).collect())
        } else if (other.rows, other.cols) == (1, 1) {
            (self.rows, self.cols, self.entries.iter().map(|x| x.axpy(a, &other.entries[0])).collect())
        } else if (self.rows, self.cols) == (1, 1) {
            (other.rows, other.cols, other.entries.iter().map(|y| self.entries[0].axpy(a, y)).collect())
        } else {
            return Expr::failed(ModelingError::Shape(self.rows, self.cols, other.rows, other.cols));
        };
        // `a * X - 0` is still a whole variable.
        let zero = |e: &Expr| e.entries.iter().all(|l| l.is_constant() && l.constant == 0.0);
        let whole = match (self.whole, other.whole) {
            (Some(w), _) if zero(&other) => Some(w),
            (_, Some((v, s))) if zero(&self) => Some((v, a * s)),
            _ => None,
        };
        Self { rows, cols, entries, whole, model, error: None }
    }

    /// Elementwise values at an assignment of the variables. Symmetric kinds
    /// read the upper triangle of their value.
    pub fn evaluate(&self, values: &[(Var, DMatrix<f64>)]) -> Result<DMatrix<f64>, ModelingError> {
        if let Some(e) = &self.error {
            return Err(e.clone());
        }
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for (slot, l) in out.iter_mut().zip(&self.entries) {
            let mut acc = l.constant;
            for &((id, k), c) in &l.terms {
                let (v, val) = values
                    .iter()
                    .find(|(v, _)| v.id == id && Some(v.model) == self.model)
                    .ok_or_else(|| ModelingError::Invalid(format!("no value for variable {id}")))?;
                if val.shape() != (v.rows, v.cols) {
                    return Err(ModelingError::Shape(val.nrows(), val.ncols(), v.rows, v.cols));
                }
                acc += c * val[v.atom_pos(k)];
            }
            *slot = acc;
        }
        Ok(out)
    }

    pub fn equals(self, rhs: impl Into<Expr>) -> Constraint {
        Constraint::new(self, Rel::Eq, rhs.into())
    }

    pub fn le(self, rhs: impl Into<Expr>) -> Constraint {
        Constraint::new(self, Rel::Le, rhs.into())
    }

    pub fn ge(self, rhs: impl Into<Expr>) -> Constraint {
        Constraint::new(self, Rel::Ge, rhs.into())
    }

    pub fn lt(self, rhs: impl Into<Expr>) -> Constraint {
        Constraint::new(self, Rel::Lt, rhs.into())
    }

    pub fn gt(self, rhs: impl Into<Expr>) -> Constraint {
        Constraint::new(self, Rel::Gt, rhs.into())
    }
}

impl From<Var> for Expr {
    fn from(v: Var) -> Self {
        let mut entries = Vec::with_capacity(v.rows * v.cols);
        for j in 0..v.cols {
            for i in 0..v.rows {
                entries.push(Lin::atom(&v, i, j, 1.0));
            }
        }
        Self { rows: v.rows, cols: v.cols, entries, whole: Some((v, 1.0)), model: Some(v.model), error: None }
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::scalar(c)
    }
}

impl From<DMatrix<f64>> for Expr {
    fn from(m: DMatrix<f64>) -> Self {
        Expr::constant(&m)
    }
}

impl From<&DMatrix<f64>> for Expr {
    fn from(m: &DMatrix<f64>) -> Self {
        Expr::constant(m)
    }
}

impl From<DVector<f64>> for Expr {
    fn from(v: DVector<f64>) -> Self {
        Expr::constant(&DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
    }
}

impl From<&DVector<f64>> for Expr {
    fn from(v: &DVector<f64>) -> Self {
        Expr::constant(&DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
    }
}

impl<T: Into<Expr>> Add<T> for Expr {
    type Output = Expr;
    fn add(self, rhs: T) -> Expr {
        self.combine(rhs.into(), 1.0)
    }
}

impl<T: Into<Expr>> Sub<T> for Expr {
    type Output = Expr;
    fn sub(self, rhs: T) -> Expr {
        self.combine(rhs.into(), -1.0)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self * -1.0
    }
}

impl Mul<f64> for Expr {
    type Output = Expr;
    fn mul(self, a: f64) -> Expr {
        let whole = self.whole.map(|(v, s)| (v, s * a));
        let mut out = self.map(|l| l.scale(a));
        out.whole = whole;
        out
    }
}

impl Mul<Expr> for f64 {
    type Output = Expr;
    fn mul(self, e: Expr) -> Expr {
        e * self
    }
}

impl<T: Into<Expr>> Add<T> for Var {
    type Output = Expr;
    fn add(self, rhs: T) -> Expr {
        Expr::from(self) + rhs
    }
}

impl<T: Into<Expr>> Sub<T> for Var {
    type Output = Expr;
    fn sub(self, rhs: T) -> Expr {
        Expr::from(self) - rhs
    }
}

impl Neg for Var {
    type Output = Expr;
    fn neg(self) -> Expr {
        -Expr::from(self)
    }
}

impl Mul<Var> for f64 {
    type Output = Expr;
    fn mul(self, v: Var) -> Expr {
        Expr::from(v) * self
    }
}

impl Var {
    pub fn equals(self, rhs: impl Into<Expr>) -> Constraint {
        Expr::from(self).equals(rhs)
    }

    pub fn le(self, rhs: impl Into<Expr>) -> Constraint {
        Expr::from(self).le(rhs)
    }

    pub fn ge(self, rhs: impl Into<Expr>) -> Constraint {
        Expr::from(self).ge(rhs)
    }
}

/// `<C, e>`, a scalar.
pub fn inprod(c: &DMatrix<f64>, e: impl Into<Expr>) -> Expr {
    let e = e.into();
    if e.error.is_some() {
        return e;
    }
    if (c.nrows(), c.ncols()) != e.shape() {
        return Expr::failed(ModelingError::Shape(c.nrows(), c.ncols(), e.rows, e.cols));
    }
    let mut acc = Lin::default();
    for (l, &w) in e.entries.iter().zip(c.iter()) {
        if w != 0.0 {
            acc = acc.axpy(w, l);
        }
    }
    Expr { rows: 1, cols: 1, entries: vec![acc], whole: None, model: e.model, error: None }
}

/// Sum of all entries.
pub fn sum(e: impl Into<Expr>) -> Expr {
    let e = e.into();
    let (r, c) = e.shape();
    inprod(&DMatrix::from_element(r, c, 1.0), e)
}

pub fn trace(e: impl Into<Expr>) -> Expr {
    let e = e.into();
    if e.error.is_none() && e.rows != e.cols {
        return Expr::failed(ModelingError::Shape(e.rows, e.cols, e.cols, e.rows));
    }
    let n = e.rows;
    inprod(&DMatrix::identity(n, n), e)
}

/// The diagonal as an `n x 1` column.
pub fn map_diag(e: impl Into<Expr>) -> Expr {
    let e = e.into();
    if e.error.is_some() {
        return e;
    }
    if e.rows != e.cols {
        return Expr::failed(ModelingError::Shape(e.rows, e.cols, e.cols, e.rows));
    }
    let entries = (0..e.rows).map(|i| e.entry(i, i).clone()).collect();
    Expr { rows: e.rows, cols: 1, entries, whole: None, model: e.model, error: None }
}

/// Column-major vectorization, `mn x 1`.
pub fn map_vec(e: impl Into<Expr>) -> Expr {
    let e = e.into();
    Expr { rows: e.rows * e.cols, cols: 1, whole: None, ..e }
}

/// `svec` of a symmetric expression: upper triangle column by column,
/// off-diagonal entries scaled by `sqrt(2)`.
pub fn map_svec(e: impl Into<Expr>) -> Expr {
    let e = e.into();
    if e.error.is_some() {
        return e;
    }
    if e.rows != e.cols {
        return Expr::failed(ModelingError::Shape(e.rows, e.cols, e.cols, e.rows));
    }
    let n = e.rows;
    let mut entries = Vec::with_capacity(tri(n));
    for j in 0..n {
        for i in 0..=j {
            if e.entry(i, j) != e.entry(j, i) {
                return Expr::failed(ModelingError::Invalid("map_svec needs a symmetric expression".into()));
            }
            entries.push(if i == j { e.entry(i, j).clone() } else { e.entry(i, j).scale(SQRT2) });
        }
    }
    Expr { rows: entries.len(), cols: 1, entries, whole: None, model: e.model, error: None }
}

/// Elementwise product `A .* e`.
pub fn mask(a: &DMatrix<f64>, e: impl Into<Expr>) -> Expr {
    let e = e.into();
    if e.error.is_some() {
        return e;
    }
    if (a.nrows(), a.ncols()) != e.shape() {
        return Expr::failed(ModelingError::Shape(a.nrows(), a.ncols(), e.rows, e.cols));
    }
    let entries = e.entries.iter().zip(a.iter()).map(|(l, &w)| l.scale(w)).collect();
    Expr { entries, whole: None, ..e }
}

/// `[<A_1, e>; ...; <A_p, e>]`.
pub fn linmap(mats: &[DMatrix<f64>], e: impl Into<Expr>) -> Expr {
    let e = e.into();
    if e.error.is_some() {
        return e;
    }
    let mut entries = Vec::with_capacity(mats.len());
    for a in mats {
        let r = inprod(a, e.clone());
        if let Some(err) = r.error {
            return Expr::failed(err);
        }
        entries.extend(r.entries);
    }
    Expr { rows: entries.len(), cols: 1, entries, whole: None, model: e.model, error: None }
}

/// `A e` for a column expression `e`.
pub fn matmul(a: &DMatrix<f64>, e: impl Into<Expr>) -> Expr {
    let e = e.into();
    if e.error.is_some() {
        return e;
    }
    if e.cols != 1 || a.ncols() != e.rows {
        return Expr::failed(ModelingError::Shape(a.nrows(), a.ncols(), e.rows, e.cols));
    }
    let mats: Vec<DMatrix<f64>> = (0..a.nrows()).map(|k| DMatrix::from_iterator(e.rows, 1, a.row(k).iter().copied())).collect();
    linmap(&mats, e)
}

/// `||e||_1`, usable only in a minimized objective.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Norm {
    expr: Expr,
    weight: f64,
}

pub fn l1_norm(e: impl Into<Expr>) -> L1Norm {
    L1Norm { expr: e.into(), weight: 1.0 }
}

impl Mul<f64> for L1Norm {
    type Output = L1Norm;
    fn mul(self, a: f64) -> L1Norm {
        L1Norm { weight: self.weight * a, ..self }
    }
}

/// A scalar objective: an affine part plus weighted l1 norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    linear: Expr,
    l1: Vec<L1Norm>,
}

impl From<Expr> for Objective {
    fn from(e: Expr) -> Self {
        Self { linear: e, l1: Vec::new() }
    }
}

impl From<Var> for Objective {
    fn from(v: Var) -> Self {
        Expr::from(v).into()
    }
}

impl From<L1Norm> for Objective {
    fn from(l: L1Norm) -> Self {
        Self { linear: Expr::scalar(0.0), l1: vec![l] }
    }
}

impl<T: Into<Objective>> Add<T> for Objective {
    type Output = Objective;
    fn add(mut self, rhs: T) -> Objective {
        let rhs = rhs.into();
        self.linear = self.linear + rhs.linear;
        self.l1.extend(rhs.l1);
        self
    }
}

impl Add<L1Norm> for Expr {
    type Output = Objective;
    fn add(self, rhs: L1Norm) -> Objective {
        Objective::from(self) + rhs
    }
}

impl<T: Into<Objective>> Add<T> for L1Norm {
    type Output = Objective;
    fn add(self, rhs: T) -> Objective {
        Objective::from(self) + rhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Eq,
    Le,
    Ge,
    Lt,
    Gt,
}

/// `e0 r0 e1 r1 e2 ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    exprs: Vec<Expr>,
    rels: Vec<Rel>,
}

impl Constraint {
    pub fn new(lhs: Expr, rel: Rel, rhs: Expr) -> Self {
        Self { exprs: vec![lhs, rhs], rels: vec![rel] }
    }

    fn chain(mut self, rel: Rel, rhs: Expr) -> Self {
        self.exprs.push(rhs);
        self.rels.push(rel);
        self
    }

    pub fn le(self, rhs: impl Into<Expr>) -> Self {
        self.chain(Rel::Le, rhs.into())
    }

    pub fn ge(self, rhs: impl Into<Expr>) -> Self {
        self.chain(Rel::Ge, rhs.into())
    }

    pub fn equals(self, rhs: impl Into<Expr>) -> Self {
        self.chain(Rel::Eq, rhs.into())
    }

    pub fn lt(self, rhs: impl Into<Expr>) -> Self {
        self.chain(Rel::Lt, rhs.into())
    }

    pub fn gt(self, rhs: impl Into<Expr>) -> Self {
        self.chain(Rel::Gt, rhs.into())
    }
}

impl From<f64> for Objective {
    fn from(c: f64) -> Self {
        Expr::scalar(c).into()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct VarInfo {
    var: Var,
    /// Set by `X >= 0` on a SYMM variable.
    upgraded: bool,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Created by the model for a PSD constraint.
    slack: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    lin: Lin,
    lo: f64,
    hi: f64,
}

static NEXT_MODEL: AtomicU64 = AtomicU64::new(1);

/// A model under construction.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    uid: u64,
    vars: Vec<VarInfo>,
    objective: Option<(Sense, Objective)>,
    eq_rows: Vec<Row>,
    ineq_rows: Vec<Row>,
    pub params: SolverParams,
}

/// How a variable occupies the standard form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lowering {
    /// One block; atoms are block coordinates.
    Block(usize),
    /// `x+ - x-` in two linear blocks.
    Split(usize, usize),
}

/// The standard-form image of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledModel {
    pub data: ProblemData,
    pub sense: Sense,
    /// Constant part of the source objective.
    pub offset: f64,
    pub warnings: Vec<Finding>,
    vars: Vec<Var>,
    lowering: Vec<Lowering>,
}

impl CompiledModel {
    /// Source objective value for a standard-form objective value.
    pub fn objective(&self, pobj: f64) -> f64 {
        self.sense.sign() * pobj + self.offset
    }

    /// Value of a variable in a standard-form primal point.
    pub fn value(&self, x: &BlockVars, v: Var) -> DMatrix<f64> {
        let blk = &self.data.blk;
        let atoms: Vec<f64> = match self.lowering[v.id] {
            Lowering::Block(j) => {
                let scale = blk.coord_scale();
                let r = blk.range(j);
                x.block(blk, j).iter().zip(&scale[r]).map(|(v, s)| v / s).collect()
            }
            Lowering::Split(a, b) => x.block(blk, a).iter().zip(x.block(blk, b)).map(|(p, q)| p - q).collect(),
        };
        DMatrix::from_fn(v.rows, v.cols, |i, j| atoms[v.atom(i, j)])
    }

    /// A standard-form primal point holding the given variable values
    /// (free parts split into positive and negative parts, auxiliary
    /// blocks zero).
    pub fn embed(&self, values: &[(Var, DMatrix<f64>)]) -> BlockVars {
        let blk = &self.data.blk;
        let mut x = BlockVars::zeros(blk);
        for (v, val) in values {
            let n = v.natoms();
            let atoms: Vec<f64> = (0..n).map(|k| {
                let (i, j) = v.atom_pos(k);
                val[(i, j)]
            }).collect();
            match self.lowering[v.id] {
                Lowering::Block(j) => {
                    let r = blk.range(j);
                    x.data.rows_mut(r.start, r.len()).copy_from_slice(&atoms);
                }
                Lowering::Split(a, b) => {
                    let (ra, rb) = (blk.range(a), blk.range(b));
                    for (k, &t) in atoms.iter().enumerate() {
                        x.data[ra.start + k] = t.max(0.0);
                        x.data[rb.start + k] = (-t).max(0.0);
                    }
                }
            }
        }
        let scale = blk.coord_scale();
        for (j, b) in blk.blocks().iter().enumerate() {
            if b.kind == BlockKind::Psd {
                for t in blk.range(j) {
                    x.data[t] *= scale[t];
                }
            }
        }
        x
    }

    pub fn variables(&self) -> &[Var] {
        &self.vars
    }
}

/// Result of [`Model::solve`].
#[derive(Debug, Clone)]
pub struct ModelSolution {
    pub compiled: CompiledModel,
    pub result: SolveResult,
    /// Objective in the source sense, including constants.
    pub objective: f64,
}

impl ModelSolution {
    pub fn value(&self, v: Var) -> DMatrix<f64> {
        self.compiled.value(&self.result.state.x, v)
    }

    pub fn state(&self) -> &IterateState {
        &self.result.state
    }
}

fn check(e: &Expr) -> Result<(), ModelingError> {
    match &e.error {
        Some(err) => Err(err.clone()),
        None => Ok(()),
    }
}

impl Model {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            uid: NEXT_MODEL.fetch_add(1, Ordering::Relaxed),
            vars: Vec::new(),
            objective: None,
            eq_rows: Vec::new(),
            ineq_rows: Vec::new(),
            params: SolverParams::default(),
        }
    }

    fn declare(&mut self, kind: VarKind, rows: usize, cols: usize, slack: bool) -> Result<Var, ModelingError> {
        if rows == 0 || cols == 0 {
            return Err(ModelingError::EmptyVariable);
        }
        if kind.symmetric() && rows != cols {
            return Err(ModelingError::NotSquare { kind, rows, cols });
        }
        let var = Var { model: self.uid, id: self.vars.len(), kind, rows, cols };
        let n = var.natoms();
        self.vars.push(VarInfo { var, upgraded: false, lower: vec![f64::NEG_INFINITY; n], upper: vec![f64::INFINITY; n], slack });
        Ok(var)
    }

    pub fn var_free(&mut self, rows: usize, cols: usize) -> Result<Var, ModelingError> {
        self.declare(VarKind::Free, rows, cols, false)
    }

    pub fn var_sdp(&mut self, rows: usize, cols: usize) -> Result<Var, ModelingError> {
        self.declare(VarKind::Sdp, rows, cols, false)
    }

    pub fn var_nn(&mut self, rows: usize, cols: usize) -> Result<Var, ModelingError> {
        self.declare(VarKind::Nn, rows, cols, false)
    }

    pub fn var_symm(&mut self, rows: usize, cols: usize) -> Result<Var, ModelingError> {
        self.declare(VarKind::Symm, rows, cols, false)
    }

    fn own(&self, e: &Expr) -> Result<(), ModelingError> {
        check(e)?;
        match e.model {
            Some(id) if id != self.uid => Err(ModelingError::ForeignVariable),
            _ => Ok(()),
        }
    }

    fn set_objective(&mut self, sense: Sense, obj: Objective) -> Result<(), ModelingError> {
        if self.objective.is_some() {
            return Err(ModelingError::Objective);
        }
        self.own(&obj.linear)?;
        if obj.linear.shape() != (1, 1) {
            return Err(ModelingError::Invalid(format!("objective must be scalar, got {}x{}", obj.linear.rows, obj.linear.cols)));
        }
        for l in &obj.l1 {
            self.own(&l.expr)?;
            if sense == Sense::Maximize && l.weight > 0.0 || sense == Sense::Minimize && l.weight < 0.0 {
                return Err(ModelingError::L1Maximized);
            }
        }
        self.objective = Some((sense, obj));
        Ok(())
    }

    pub fn minimize(&mut self, obj: impl Into<Objective>) -> Result<(), ModelingError> {
        self.set_objective(Sense::Minimize, obj.into())
    }

    pub fn maximize(&mut self, obj: impl Into<Objective>) -> Result<(), ModelingError> {
        self.set_objective(Sense::Maximize, obj.into())
    }

    /// Adds an elementwise affine constraint, possibly chained.
    pub fn add_affine_constraint(&mut self, c: Constraint) -> Result<(), ModelingError> {
        for e in &c.exprs {
            self.own(e)?;
        }
        if c.rels.iter().any(|r| matches!(r, Rel::Lt | Rel::Gt)) {
            return Err(ModelingError::StrictInequality);
        }
        if c.exprs.len() > 2 && c.exprs[1..c.exprs.len() - 1].iter().any(|e| e.entries.iter().any(|l| l.constant != 0.0)) {
            return Err(ModelingError::ConstantInChain);
        }
        // lo <= mid <= hi with constant ends is one two-sided constraint.
        if c.exprs.len() == 3 && c.rels[0] == c.rels[1] && c.rels[0] != Rel::Eq && c.exprs[0].is_constant() && c.exprs[2].is_constant() {
            let (lo, hi) = if c.rels[0] == Rel::Le { (&c.exprs[0], &c.exprs[2]) } else { (&c.exprs[2], &c.exprs[0]) };
            return self.add_two_sided(lo, &c.exprs[1], hi);
        }
        for (k, &rel) in c.rels.iter().enumerate() {
            let (a, b) = (&c.exprs[k], &c.exprs[k + 1]);
            match rel {
                Rel::Eq => self.add_rows(a, b, true)?,
                Rel::Le => self.add_le(a, b)?,
                Rel::Ge => self.add_le(b, a)?,
                Rel::Lt | Rel::Gt => unreachable!(),
            }
        }
        Ok(())
    }

    fn broadcast(c: &Expr, shape: (usize, usize)) -> Result<Vec<f64>, ModelingError> {
        if c.shape() == shape {
            Ok(c.entries.iter().map(|l| l.constant).collect())
        } else if c.shape() == (1, 1) {
            Ok(vec![c.entries[0].constant; shape.0 * shape.1])
        } else {
            Err(ModelingError::Shape(c.rows, c.cols, shape.0, shape.1))
        }
    }

    fn add_two_sided(&mut self, lo: &Expr, mid: &Expr, hi: &Expr) -> Result<(), ModelingError> {
        if mid.is_constant() {
            return Err(ModelingError::NoVariables);
        }
        let los = Self::broadcast(lo, mid.shape())?;
        let his = Self::broadcast(hi, mid.shape())?;
        if self.try_bound(mid, &los, &his) {
            return Ok(());
        }
        for ((l, &a), &b) in mid.entries.iter().zip(&los).zip(&his) {
            self.ineq_rows.push(Row { lin: Lin { terms: l.terms.clone(), constant: 0.0 }, lo: a - l.constant, hi: b - l.constant });
        }
        Ok(())
    }

    /// `a <= b` elementwise.
    fn add_le(&mut self, a: &Expr, b: &Expr) -> Result<(), ModelingError> {
        if b.is_constant() && !a.is_constant() {
            let his = Self::broadcast(b, a.shape())?;
            if self.try_bound(a, &vec![f64::NEG_INFINITY; his.len()], &his) {
                return Ok(());
            }
        }
        if a.is_constant() && !b.is_constant() {
            let los = Self::broadcast(a, b.shape())?;
            if self.try_bound(b, &los, &vec![f64::INFINITY; los.len()]) {
                return Ok(());
            }
        }
        let d = b.clone() - a.clone();
        check(&d)?;
        if d.is_constant() {
            return Err(ModelingError::NoVariables);
        }
        for l in d.entries {
            self.ineq_rows.push(Row { lo: -l.constant, hi: f64::INFINITY, lin: Lin { terms: l.terms, constant: 0.0 } });
        }
        Ok(())
    }

    fn add_rows(&mut self, a: &Expr, b: &Expr, eq: bool) -> Result<(), ModelingError> {
        let d = a.clone() - b.clone();
        check(&d)?;
        if d.is_constant() {
            return Err(ModelingError::NoVariables);
        }
        for l in d.entries {
            let rhs = -l.constant;
            let row = Row { lo: rhs, hi: rhs, lin: Lin { terms: l.terms, constant: 0.0 } };
            if eq {
                self.eq_rows.push(row);
            } else {
                self.ineq_rows.push(row);
            }
        }
        Ok(())
    }

    /// Records `lo <= e <= hi` as a bound when `e` is a positive multiple
    /// of a whole variable.
    fn try_bound(&mut self, e: &Expr, lo: &[f64], hi: &[f64]) -> bool {
        let Some((v, a)) = e.whole else { return false };
        if !(a > 0.0) || e.entries.iter().any(|l| l.constant != 0.0) {
            return false;
        }
        let info = &mut self.vars[v.id];
        for j in 0..v.cols {
            for i in 0..v.rows {
                let k = v.atom(i, j);
                let t = i + j * v.rows;
                info.lower[k] = info.lower[k].max(lo[t] / a);
                info.upper[k] = info.upper[k].min(hi[t] / a);
            }
        }
        true
    }

    /// Adds `lhs >= rhs` (or `<=`, chained) in the semidefinite order.
    pub fn add_psd_constraint(&mut self, c: Constraint) -> Result<(), ModelingError> {
        for e in &c.exprs {
            self.own(e)?;
        }
        for (k, &rel) in c.rels.iter().enumerate() {
            let (a, b) = (&c.exprs[k], &c.exprs[k + 1]);
            let d = match rel {
                Rel::Ge => a.clone() - b.clone(),
                Rel::Le => b.clone() - a.clone(),
                Rel::Eq => return Err(ModelingError::Invalid("use add_affine_constraint for equalities".into())),
                Rel::Lt | Rel::Gt => return Err(ModelingError::StrictInequality),
            };
            self.add_psd_difference(d)?;
        }
        Ok(())
    }

    /// `d >= 0` in the semidefinite order.
    fn add_psd_difference(&mut self, d: Expr) -> Result<(), ModelingError> {
        check(&d)?;
        if d.rows != d.cols {
            return Err(ModelingError::Shape(d.rows, d.cols, d.cols, d.rows));
        }
        if d.is_constant() {
            return Err(ModelingError::NoVariables);
        }
        for l in &d.entries {
            for &((id, _), _) in &l.terms {
                let kind = self.vars[id].var.kind;
                if !kind.symmetric() {
                    return Err(ModelingError::NonSymmetricParticipant(kind));
                }
            }
        }
        for j in 0..d.cols {
            for i in 0..j {
                if d.entry(i, j).constant != d.entry(j, i).constant {
                    return Err(ModelingError::Invalid("constant side of a PSD constraint must be symmetric".into()));
                }
            }
        }
        if let Some((v, a)) = d.whole {
            if a > 0.0 {
                self.vars[v.id].upgraded = true;
                return Ok(());
            }
        }
        let n = d.rows;
        let y = self.declare(VarKind::Sdp, n, n, true)?;
        let lhs = map_svec(d - y);
        self.add_rows(&lhs, &Expr::scalar(0.0), true)
    }

    fn lowering(&self, v: &VarInfo) -> Option<Block> {
        match v.var.kind {
            VarKind::Sdp => Some(Block::psd(v.var.rows)),
            VarKind::Symm if v.upgraded => Some(Block::psd(v.var.rows)),
            VarKind::Nn => Some(Block::linear(v.var.rows * v.var.cols)),
            VarKind::Free | VarKind::Symm => None,
        }
    }

    /// Lowers the model to standard form. The model is not modified.
    pub fn compile(&self) -> Result<CompiledModel, ModelingError> {
        if self.vars.is_empty() {
            return Err(ModelingError::Empty);
        }
        let Some((sense, obj)) = &self.objective else {
            return Err(ModelingError::Objective);
        };
        let mut blocks = Vec::new();
        let mut lowering = Vec::with_capacity(self.vars.len());
        for v in &self.vars {
            match self.lowering(v) {
                Some(b) => {
                    lowering.push(Lowering::Block(blocks.len()));
                    blocks.push(b);
                }
                None => {
                    let n = v.var.natoms();
                    lowering.push(Lowering::Split(blocks.len(), blocks.len() + 1));
                    blocks.push(Block::linear(n));
                    blocks.push(Block::linear(n));
                }
            }
        }
        let mut eq_rows = self.eq_rows.clone();
        let mut ineq_rows = self.ineq_rows.clone();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for (v, low) in self.vars.iter().zip(&lowering) {
            if let Lowering::Block(_) = low {
                lower.push(compress_bound(&v.lower));
                upper.push(compress_bound(&v.upper));
            } else {
                for k in 0..v.var.natoms() {
                    let (lo, hi) = (v.lower[k], v.upper[k]);
                    if lo.is_finite() || hi.is_finite() {
                        let lin = Lin { terms: vec![((v.var.id, k), 1.0)], constant: 0.0 };
                        let row = Row { lin, lo, hi };
                        if lo == hi {
                            eq_rows.push(row);
                        } else {
                            ineq_rows.push(row);
                        }
                    }
                }
                lower.extend([Bound::Free, Bound::Free]);
                upper.extend([Bound::Free, Bound::Free]);
            }
        }
        // l1 terms: one block [x+; x-] per norm, rows e - x+ + x- = 0.
        let mut l1_blocks = Vec::new();
        let mut offset = obj.linear.entries[0].constant;
        let mut l1_rows: Vec<(usize, Lin, f64)> = Vec::new();
        for l in &obj.l1 {
            let mut uniq: Vec<(Lin, f64)> = Vec::new();
            let mut index: HashMap<Vec<(Atom, u64)>, usize> = HashMap::new();
            for lin in &l.expr.entries {
                if lin.is_constant() {
                    offset += l.weight.abs() * lin.constant.abs() * sense.sign();
                    continue;
                }
                let key: Vec<(Atom, u64)> = lin.terms.iter().map(|&(t, c)| (t, c.to_bits())).chain([((usize::MAX, 0), lin.constant.to_bits())]).collect();
                match index.get(&key) {
                    Some(&u) => uniq[u].1 += l.weight.abs(),
                    None => {
                        index.insert(key, uniq.len());
                        uniq.push((lin.clone(), l.weight.abs()));
                    }
                }
            }
            if uniq.is_empty() {
                continue;
            }
            let j = blocks.len();
            blocks.push(Block::linear(2 * uniq.len()));
            lower.push(Bound::Free);
            upper.push(Bound::Free);
            l1_blocks.push((j, uniq.len()));
            l1_rows.extend(uniq.into_iter().map(|(lin, w)| (j, lin, w)));
        }
        let blk = BlockStructure::new(blocks).map_err(|e| ModelingError::Invalid(e.to_string()))?;
        let vars: Vec<Var> = self.vars.iter().map(|v| v.var).collect();
        let place = |lin: &Lin, out: &mut Vec<(usize, f64)>| {
            for &((id, k), c) in &lin.terms {
                match lowering[id] {
                    Lowering::Block(j) => {
                        let t = blk.range(j).start + k;
                        let (i, jj) = vars[id].atom_pos(k);
                        let raw = if blk.block(j).kind == BlockKind::Psd && i != jj { c / 2.0 } else { c };
                        out.push((t, raw));
                    }
                    Lowering::Split(a, b) => {
                        out.push((blk.range(a).start + k, c));
                        out.push((blk.range(b).start + k, -c));
                    }
                }
            }
        };
        let mut c = vec![0.0; blk.dim()];
        let mut obj_terms = Vec::new();
        place(&obj.linear.entries[0], &mut obj_terms);
        for (t, v) in obj_terms {
            c[t] += sense.sign() * v;
        }
        let mut a_trip = Vec::new();
        let mut b = Vec::new();
        for row in &eq_rows {
            let mut terms = Vec::new();
            place(&row.lin, &mut terms);
            let k = b.len();
            a_trip.extend(terms.into_iter().map(|(t, v)| (t, k, v)));
            b.push(row.lo);
        }
        let mut counters: BTreeMap<usize, usize> = BTreeMap::new();
        for (j, lin, w) in &l1_rows {
            let len = l1_blocks.iter().find(|(jj, _)| jj == j).map(|&(_, n)| n).unwrap_or(0);
            let r = counters.entry(*j).or_insert(0);
            let start = blk.range(*j).start;
            let mut terms = Vec::new();
            place(lin, &mut terms);
            let k = b.len();
            a_trip.extend(terms.into_iter().map(|(t, v)| (t, k, v)));
            a_trip.push((start + *r, k, -1.0));
            a_trip.push((start + len + *r, k, 1.0));
            c[start + *r] += w;
            c[start + len + *r] += w;
            b.push(-lin.constant);
            *r += 1;
        }
        let at = SparseCols::from_triplets(blk.dim(), b.len(), a_trip).map_err(|e| ModelingError::Invalid(e.to_string()))?;
        let mut b_trip = Vec::new();
        let (mut l, mut u) = (Vec::new(), Vec::new());
        for row in &ineq_rows {
            let mut terms = Vec::new();
            place(&row.lin, &mut terms);
            let k = l.len();
            b_trip.extend(terms.into_iter().map(|(t, v)| (t, k, v)));
            l.push(row.lo);
            u.push(row.hi);
        }
        let bt = SparseCols::from_triplets(blk.dim(), l.len(), b_trip).map_err(|e| ModelingError::Invalid(e.to_string()))?;
        let mut data = ProblemData::new(blk, at, c, b).with_bounds(lower, upper);
        if !l.is_empty() {
            data = data.with_inequalities(bt, l, u);
        }
        let warnings = self.unbounded_warnings(obj, &eq_rows, &ineq_rows, &lowering);
        Ok(CompiledModel { data, sense: *sense, offset, warnings, vars, lowering })
    }

    fn unbounded_warnings(&self, obj: &Objective, eq: &[Row], ineq: &[Row], lowering: &[Lowering]) -> Vec<Finding> {
        let mut used = vec![false; self.vars.len()];
        for row in eq.iter().chain(ineq) {
            for &((id, _), _) in &row.lin.terms {
                used[id] = true;
            }
        }
        for l in &obj.l1 {
            for lin in &l.expr.entries {
                for &((id, _), _) in &lin.terms {
                    used[id] = true;
                }
            }
        }
        let mut out = Vec::new();
        for &((id, _), _) in &obj.linear.entries[0].terms {
            if !used[id] && matches!(lowering[id], Lowering::Split(..)) {
                let message = format!("free variable {id} appears only in the objective; the problem is unbounded");
                if !out.iter().any(|f: &Finding| f.message == message) {
                    out.push(Finding { message });
                }
            }
        }
        out
    }

    /// Compiles and solves with `self.params`.
    pub fn solve(&self) -> Result<ModelSolution, ModelingError> {
        let compiled = self.compile()?;
        let result = solve(&compiled.data, &self.params, None)?;
        let objective = compiled.objective(result.pobj);
        Ok(ModelSolution { compiled, result, objective })
    }

    pub fn variables(&self) -> Vec<Var> {
        self.vars.iter().filter(|v| !v.slack).map(|v| v.var).collect()
    }
}

fn compress_bound(v: &[f64]) -> Bound {
    if v.iter().all(|x| x.is_infinite()) && v.iter().all(|&x| x == v[0]) {
        return Bound::Free;
    }
    if v.iter().all(|&x| x == v[0]) {
        return Bound::Scalar(v[0]);
    }
    Bound::Dense(v.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn listing1() -> (Model, Var, Var, Var) {
        let mut m = Model::new("Example_simple");
        let x1 = m.var_sdp(6, 6).unwrap();
        let x2 = m.var_nn(5, 5).unwrap();
        let x3 = m.var_nn(7, 1).unwrap();
        m.minimize(trace(x1) + trace(x2) + sum(x3)).unwrap();
        m.add_affine_constraint((-x1.at(0, 1) + 2.0 * x2.at(2, 2) + 2.0 * x3.at(1, 0)).equals(4.0)).unwrap();
        m.add_affine_constraint((2.0 * x1.at(1, 2) + x2.at(3, 1) - x3.at(3, 0)).equals(3.0)).unwrap();
        m.add_affine_constraint(Expr::scalar(2.0).le(-x1.at(0, 1) - 2.0 * x2.at(2, 2) + 2.0 * x3.at(1, 0)).le(7.0)).unwrap();
        m.add_affine_constraint(Expr::scalar(0.0).le(x1).le(10.0)).unwrap();
        m.add_affine_constraint(x2.le(8.0)).unwrap();
        (m, x1, x2, x3)
    }

    #[test]
    fn listing1_shape() {
        let (m, ..) = listing1();
        let c = m.compile().unwrap();
        assert_eq!(c.data.blk.blocks(), &[Block::psd(6), Block::linear(25), Block::linear(7)]);
        assert_eq!((c.data.m(), c.data.p()), (2, 1));
        assert_eq!(c.data.lower[0], Bound::Scalar(0.0));
        assert_eq!(c.data.upper[0], Bound::Scalar(10.0));
        assert_eq!(c.data.upper[1], Bound::Scalar(8.0));
        assert_eq!(c.data.lower[2], Bound::Free);
        // -X1(1,2) is stored as the raw symmetric entry -1/2.
        assert_eq!(c.data.at.col(0).next(), Some((1, -0.5)));
        assert!(c.data.validate().is_empty());
        assert_eq!(m.compile().unwrap(), c);
    }

    #[test]
    fn declaration_rules() {
        let mut m = Model::new("d");
        assert!(matches!(m.var_sdp(2, 3), Err(ModelingError::NotSquare { .. })));
        assert!(m.var_symm(3, 2).is_err());
        let x = m.var_nn(3, 1).unwrap();
        assert_eq!(m.add_affine_constraint(x.le(1.0).lt(2.0)), Err(ModelingError::StrictInequality));
        assert_eq!(m.add_affine_constraint(Expr::scalar(0.0).le(x + 1.0).le(3.0)), Err(ModelingError::ConstantInChain));
        assert!(matches!(m.add_affine_constraint(x.at(5, 0).equals(1.0)), Err(ModelingError::Index { .. })));
        assert_eq!(Model::new("e").compile().unwrap_err(), ModelingError::Empty);
        let mut other = Model::new("o");
        let y = other.var_nn(1, 1).unwrap();
        assert_eq!(m.add_affine_constraint(y.equals(1.0)), Err(ModelingError::ForeignVariable));
    }

    #[test]
    fn theta_model_counts() {
        let mut m = Model::new("theta");
        let x = m.var_sdp(5, 5).unwrap();
        m.maximize(sum(x)).unwrap();
        m.add_affine_constraint(trace(x).equals(1.0)).unwrap();
        let (is, js): (Vec<usize>, Vec<usize>) = (0..5).map(|i| (i, (i + 1) % 5)).map(|(i, j)| (i.min(j), i.max(j))).unzip();
        m.add_affine_constraint(x.select(&is, &js).equals(0.0)).unwrap();
        m.add_affine_constraint(x.ge(0.0)).unwrap();
        let c = m.compile().unwrap();
        assert_eq!(c.data.m(), 6);
        assert_eq!(c.data.lower[0], Bound::Scalar(0.0));
    }

    #[test]
    fn l1_norm_matches_ncm_rows() {
        let n = 4;
        let (g, h) = crate::problems::random_ncm_data(n, 3);
        let mut m = Model::new("ncm");
        let x = m.var_sdp(n, n).unwrap();
        m.minimize(l1_norm(mask(&h, x) - mask(&h, Expr::constant(&g)))).unwrap();
        m.add_affine_constraint(map_diag(x).equals(DVector::from_element(n, 1.0))).unwrap();
        let c = m.compile().unwrap();
        assert_eq!(c.data.m(), n + n * (n + 1) / 2);
        assert_eq!(c.data.blk.blocks(), &[Block::psd(n), Block::linear(n * (n + 1))]);
    }

    #[test]
    fn psd_constraints() {
        let mut m = Model::new("psd");
        let x = m.var_symm(2, 2).unwrap();
        m.minimize(trace(x)).unwrap();
        m.add_psd_constraint(x.ge(0.0)).unwrap();
        let c = m.compile().unwrap();
        assert_eq!(c.data.blk.blocks(), &[Block::psd(2)]);

        let mut m = Model::new("psd2");
        let x = m.var_symm(2, 2).unwrap();
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        m.minimize(trace(x)).unwrap();
        m.add_psd_constraint(x.le(&g)).unwrap();
        let c = m.compile().unwrap();
        assert_eq!(c.data.blk.blocks(), &[Block::linear(3), Block::linear(3), Block::psd(2)]);
        assert_eq!(c.data.m(), 3);

        let mut m = Model::new("chain");
        let x = m.var_symm(2, 2).unwrap();
        m.minimize(trace(x)).unwrap();
        m.add_psd_constraint(Expr::constant(&DMatrix::identity(2, 2)).le(x).le(&g)).unwrap();
        assert_eq!(m.compile().unwrap().data.blk.len(), 4);

        let mut m = Model::new("bad");
        let y = m.var_nn(2, 2).unwrap();
        assert_eq!(m.add_psd_constraint(y.ge(0.0)), Err(ModelingError::NonSymmetricParticipant(VarKind::Nn)));
    }

    #[test]
    fn free_objective_only_warns() {
        let mut m = Model::new("free");
        let x = m.var_free(2, 1).unwrap();
        let y = m.var_nn(1, 1).unwrap();
        m.minimize(sum(x) + sum(y)).unwrap();
        m.add_affine_constraint(y.equals(1.0)).unwrap();
        assert_eq!(m.compile().unwrap().warnings.len(), 1);
    }

    #[test]
    fn value_round_trip() {
        let (m, x1, x2, x3) = listing1();
        let c = m.compile().unwrap();
        let v1 = DMatrix::from_fn(6, 6, |i, j| (i + j) as f64);
        let v2 = DMatrix::from_fn(5, 5, |i, j| (i * 5 + j) as f64);
        let v3 = DMatrix::from_fn(7, 1, |i, _| i as f64);
        let x = c.embed(&[(x1, v1.clone()), (x2, v2.clone()), (x3, v3.clone())]);
        assert!((c.value(&x, x1) - &v1).amax() < 1e-12);
        assert_eq!(c.value(&x, x2), v2);
        assert_eq!(c.value(&x, x3), v3);
        let ax = c.data.apply_a(&x).unwrap();
        assert!((ax[0] - (-1.0 + 2.0 * 12.0 + 2.0 * 1.0)).abs() < 1e-12);
    }
}
