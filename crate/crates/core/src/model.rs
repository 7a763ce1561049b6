//! Standard-form problem container.
//!
//! Every block lives in one flat coordinate space: a PSD block of order `n`
//! occupies `n(n+1)/2` consecutive svec coordinates, a linear block of size
//! `n` occupies `n` coordinates. Constraint matrices, the objective and dense
//! bounds are stored as *raw* symmetric-matrix entries on that layout (an
//! off-diagonal value `r` at `(i, j)` means `A_ij = A_ji = r`); the `sqrt(2)`
//! svec factor is applied when operators are evaluated. Keeping the raw values
//! makes the file formats lossless.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, svec_index, svec_pair, tri, LinalgError, SQRT2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("block structure must contain at least one block")]
    NoBlocks,
    #[error("block {block} has zero size")]
    EmptyBlock { block: usize },
    #[error("{what}: expected length {expected}, found {found}")]
    Length { what: &'static str, expected: usize, found: usize },
    #[error("block index {block} out of range ({nblocks} blocks)")]
    BlockOutOfRange { block: usize, nblocks: usize },
    #[error("entry ({i}, {j}) outside block {block} of size {size}")]
    EntryOutOfRange { block: usize, i: usize, j: usize, size: usize },
    #[error("linear block {block} entry ({i}, {j}) is off-diagonal")]
    LinearOffDiagonal { block: usize, i: usize, j: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Optimization direction of a source model. Standard-form data always
/// minimizes; a maximization is stored with the objective negated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    /// Factor turning a standard-form objective into the source objective.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockKind {
    /// Positive semidefinite cone of symmetric matrices.
    #[serde(rename = "s")]
    Psd,
    /// Nonnegative orthant.
    #[serde(rename = "l")]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub size: usize,
}

impl Block {
    pub fn psd(size: usize) -> Self {
        Self { kind: BlockKind::Psd, size }
    }

    pub fn linear(size: usize) -> Self {
        Self { kind: BlockKind::Linear, size }
    }

    /// Number of flat coordinates the block occupies.
    pub fn dim(&self) -> usize {
        match self.kind {
            BlockKind::Psd => tri(self.size),
            BlockKind::Linear => self.size,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockStructure {
    blocks: Vec<Block>,
    offsets: Vec<usize>,
}

impl BlockStructure {
    pub fn new(blocks: Vec<Block>) -> Result<Self, ModelError> {
        if blocks.is_empty() {
            return Err(ModelError::NoBlocks);
        }
        if let Some(block) = blocks.iter().position(|b| b.size == 0) {
            return Err(ModelError::EmptyBlock { block });
        }
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        offsets.push(0);
        for b in &blocks {
            offsets.push(offsets.last().unwrap() + b.dim());
        }
        Ok(Self { blocks, offsets })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block(&self, j: usize) -> Block {
        self.blocks[j]
    }

    /// Total number of flat coordinates.
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn range(&self, j: usize) -> std::ops::Range<usize> {
        self.offsets[j]..self.offsets[j + 1]
    }

    /// Flat coordinate of entry `(i, j)` of block `block` (zero-based).
    pub fn coord(&self, block: usize, i: usize, j: usize) -> Result<usize, ModelError> {
        let b = *self
            .blocks
            .get(block)
            .ok_or(ModelError::BlockOutOfRange { block, nblocks: self.blocks.len() })?;
        if i >= b.size || j >= b.size {
            return Err(ModelError::EntryOutOfRange { block, i, j, size: b.size });
        }
        match b.kind {
            BlockKind::Psd => Ok(self.offsets[block] + svec_index(i, j)),
            BlockKind::Linear if i == j => Ok(self.offsets[block] + i),
            BlockKind::Linear => Err(ModelError::LinearOffDiagonal { block, i, j }),
        }
    }

    /// Per-coordinate factor turning raw entries into svec coordinates.
    pub fn coord_scale(&self) -> Vec<f64> {
        let mut s = vec![1.0; self.dim()];
        for (j, b) in self.blocks.iter().enumerate() {
            if b.kind == BlockKind::Psd {
                let off = self.offsets[j];
                for col in 0..b.size {
                    for row in 0..col {
                        s[off + svec_index(row, col)] = SQRT2;
                    }
                }
            }
        }
        s
    }

    pub fn has_psd(&self) -> bool {
        self.blocks.iter().any(|b| b.kind == BlockKind::Psd)
    }
}

/// Compressed sparse columns over the flat coordinate space. Column `k` holds
/// the raw entries of constraint matrix `k` across all blocks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseCols {
    nrows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseCols {
    pub fn empty(nrows: usize, ncols: usize) -> Self {
        Self { nrows, col_ptr: vec![0; ncols + 1], row_idx: Vec::new(), values: Vec::new() }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self, ModelError> {
        if let Some(&(row, _, _)) = triplets.iter().find(|t| t.0 >= nrows) {
            return Err(ModelError::Length { what: "sparse row index", expected: nrows, found: row });
        }
        if let Some(&(_, col, _)) = triplets.iter().find(|t| t.1 >= ncols) {
            return Err(ModelError::Length { what: "sparse column index", expected: ncols, found: col });
        }
        triplets.sort_by_key(|t| (t.1, t.0));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (row, col, v) in triplets {
            if last == Some((row, col)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(row);
                values.push(v);
                col_ptr[col + 1] += 1;
                last = Some((row, col));
            }
        }
        for k in 0..ncols {
            col_ptr[k + 1] += col_ptr[k];
        }
        let mut out = Self { nrows, col_ptr, row_idx, values };
        out.drop_zeros();
        Ok(out)
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let ncols = self.ncols();
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for k in 0..ncols {
            for (r, v) in self.col(k) {
                if v != 0.0 {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr[k + 1] = row_idx.len();
        }
        *self = Self { nrows: self.nrows, col_ptr, row_idx, values };
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.col_ptr[k]..self.col_ptr[k + 1];
        self.row_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.ncols()).flat_map(|k| self.col(k).map(move |(r, v)| (r, k, v))).collect()
    }

    /// Copy with every value multiplied by `row_scale[row] * col_scale[col]`.
    pub fn scaled(&self, row_scale: &[f64], col_scale: &[f64]) -> Self {
        assert_eq!(col_scale.len(), self.ncols(), "column scale length");
        let mut out = self.clone();
        for (k, &cs) in col_scale.iter().enumerate() {
            for idx in self.col_ptr[k]..self.col_ptr[k + 1] {
                out.values[idx] *= row_scale[self.row_idx[idx]] * cs;
            }
        }
        out
    }

    /// `out = self^T x`.
    pub fn tr_mul(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.ncols(), (0..self.ncols()).map(|k| self.col(k).map(|(r, v)| v * x[r]).sum()))
    }

    /// `out += self y`.
    pub fn mul_add(&self, y: &[f64], out: &mut [f64]) {
        for (k, &yk) in y.iter().enumerate() {
            if yk != 0.0 {
                for (r, v) in self.col(k) {
                    out[r] += v * yk;
                }
            }
        }
    }

    /// Euclidean norm of every column.
    pub fn col_norms(&self) -> Vec<f64> {
        (0..self.ncols()).map(|k| self.col(k).map(|(_, v)| v * v).sum::<f64>().sqrt()).collect()
    }
}

/// Per-block bound on `X`, in raw-entry units.
#[derive(Debug, Clone, PartialEq)]
pub enum Bound {
    /// No bound on this side.
    Free,
    /// Broadcast to every entry of the block.
    Scalar(f64),
    /// One value per flat coordinate of the block (svec order, raw entries).
    Dense(Vec<f64>),
}

impl Bound {
    pub fn is_free(&self) -> bool {
        match self {
            Bound::Free => true,
            Bound::Scalar(v) => v.is_infinite(),
            Bound::Dense(v) => v.iter().all(|x| x.is_infinite()),
        }
    }

    fn value(&self, t: usize, default: f64) -> f64 {
        match self {
            Bound::Free => default,
            Bound::Scalar(v) => *v,
            Bound::Dense(v) => v[t],
        }
    }
}

/// Values of `X`, `S`, `Z` or `C`, one flat vector in svec coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVars {
    pub data: DVector<f64>,
}

/// One block of a [`BlockVars`] in matrix form.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockValue {
    Matrix(DMatrix<f64>),
    Vector(DVector<f64>),
}

impl BlockVars {
    pub fn zeros(blk: &BlockStructure) -> Self {
        Self { data: DVector::zeros(blk.dim()) }
    }

    pub fn from_blocks(blk: &BlockStructure, values: &[BlockValue]) -> Result<Self, ModelError> {
        if values.len() != blk.len() {
            return Err(ModelError::Length { what: "block values", expected: blk.len(), found: values.len() });
        }
        let mut data = DVector::zeros(blk.dim());
        for (j, v) in values.iter().enumerate() {
            let b = blk.block(j);
            let r = blk.range(j);
            match (b.kind, v) {
                (BlockKind::Psd, BlockValue::Matrix(m)) => {
                    if m.nrows() != b.size || m.ncols() != b.size {
                        return Err(ModelError::Length { what: "PSD block order", expected: b.size, found: m.nrows() });
                    }
                    let s = linalg::svec(m)?;
                    data.rows_mut(r.start, r.len()).copy_from(&s);
                }
                (BlockKind::Linear, BlockValue::Vector(x)) => {
                    if x.len() != b.size {
                        return Err(ModelError::Length { what: "linear block size", expected: b.size, found: x.len() });
                    }
                    data.rows_mut(r.start, r.len()).copy_from(x);
                }
                _ => return Err(ModelError::Length { what: "block kind", expected: j, found: j }),
            }
        }
        Ok(Self { data })
    }

    pub fn block<'a>(&'a self, blk: &BlockStructure, j: usize) -> &'a [f64] {
        &self.data.as_slice()[blk.range(j)]
    }

    pub fn to_blocks(&self, blk: &BlockStructure) -> Vec<BlockValue> {
        (0..blk.len())
            .map(|j| {
                let b = blk.block(j);
                let s = self.block(blk, j);
                match b.kind {
                    BlockKind::Psd => BlockValue::Matrix(linalg::smat_unchecked(s, b.size)),
                    BlockKind::Linear => BlockValue::Vector(DVector::from_column_slice(s)),
                }
            })
            .collect()
    }

    /// Block `j` as a dense symmetric matrix (PSD blocks) or diagonal matrix (linear).
    pub fn matrix(&self, blk: &BlockStructure, j: usize) -> DMatrix<f64> {
        let b = blk.block(j);
        let s = self.block(blk, j);
        match b.kind {
            BlockKind::Psd => linalg::smat_unchecked(s, b.size),
            BlockKind::Linear => DMatrix::from_diagonal(&DVector::from_column_slice(s)),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn dot(&self, other: &BlockVars) -> f64 {
        self.data.dot(&other.data)
    }
}

/// The problem
/// `min <C, X>  s.t.  A(X) = b,  l <= B(X) <= u,  X in K,  L <= X <= U`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub blk: BlockStructure,
    /// `dim x m`, raw entries.
    pub at: SparseCols,
    /// `dim x p`, raw entries; `p = 0` when there are no inequality rows.
    pub bt: SparseCols,
    /// Objective, raw entries on the flat layout.
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    /// Per-block lower bounds on `X`.
    pub lower: Vec<Bound>,
    /// Per-block upper bounds on `X`.
    pub upper: Vec<Bound>,
}

/// A problem the validator considers inadmissible, with a readable reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub message: String,
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl ProblemData {
    /// Equality-constrained problem with no bounds.
    pub fn new(blk: BlockStructure, at: SparseCols, c: Vec<f64>, b: Vec<f64>) -> Self {
        let nb = blk.len();
        let dim = blk.dim();
        Self {
            blk,
            at,
            bt: SparseCols::empty(dim, 0),
            c,
            b,
            l: Vec::new(),
            u: Vec::new(),
            lower: vec![Bound::Free; nb],
            upper: vec![Bound::Free; nb],
        }
    }

    pub fn with_inequalities(mut self, bt: SparseCols, l: Vec<f64>, u: Vec<f64>) -> Self {
        self.bt = bt;
        self.l = l;
        self.u = u;
        self
    }

    pub fn with_bounds(mut self, lower: Vec<Bound>, upper: Vec<Bound>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn m(&self) -> usize {
        self.at.ncols()
    }

    pub fn p(&self) -> usize {
        self.bt.ncols()
    }

    /// Whether any block carries a finite bound (`P` is not the whole space).
    pub fn has_bounds(&self) -> bool {
        self.lower.iter().chain(&self.upper).any(|b| !b.is_free())
    }

    /// Whether `l <= s <= u` restricts anything.
    pub fn has_slack_bounds(&self) -> bool {
        self.l.iter().chain(&self.u).any(|v| v.is_finite())
    }

    /// Objective in svec coordinates.
    pub fn c_svec(&self) -> BlockVars {
        let scale = self.blk.coord_scale();
        BlockVars { data: DVector::from_iterator(self.c.len(), self.c.iter().zip(&scale).map(|(c, s)| c * s)) }
    }

    /// Flat svec-coordinate bound vectors, `None` when every block is free on that side.
    pub fn bounds_svec(&self) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
        let scale = self.blk.coord_scale();
        let build = |bounds: &[Bound], default: f64| -> Option<Vec<f64>> {
            if bounds.iter().all(Bound::is_free) {
                return None;
            }
            let mut out = vec![default; self.blk.dim()];
            for (j, bd) in bounds.iter().enumerate() {
                for (t, idx) in self.blk.range(j).enumerate() {
                    let v = bd.value(t, default);
                    out[idx] = if v.is_finite() { v * scale[idx] } else { v };
                }
            }
            Some(out)
        };
        (build(&self.lower, f64::NEG_INFINITY), build(&self.upper, f64::INFINITY))
    }

    fn check_vars(&self, x: &BlockVars) -> Result<(), ModelError> {
        if x.data.len() != self.blk.dim() {
            return Err(ModelError::Length { what: "block variable", expected: self.blk.dim(), found: x.data.len() });
        }
        Ok(())
    }

    fn apply(&self, op: &SparseCols, x: &BlockVars) -> Result<DVector<f64>, ModelError> {
        self.check_vars(x)?;
        let scale = self.blk.coord_scale();
        let xs: Vec<f64> = x.data.iter().zip(&scale).map(|(v, s)| v * s).collect();
        Ok(op.tr_mul(&xs))
    }

    fn adjoint(&self, op: &SparseCols, y: &[f64], what: &'static str) -> Result<BlockVars, ModelError> {
        if y.len() != op.ncols() {
            return Err(ModelError::Length { what, expected: op.ncols(), found: y.len() });
        }
        let mut out = vec![0.0; self.blk.dim()];
        op.mul_add(y, &mut out);
        let scale = self.blk.coord_scale();
        for (o, s) in out.iter_mut().zip(&scale) {
            *o *= s;
        }
        Ok(BlockVars { data: DVector::from_vec(out) })
    }

    /// `A(X)`, the vector of `sum_j <A_k^(j), X^(j)>`.
    pub fn apply_a(&self, x: &BlockVars) -> Result<DVector<f64>, ModelError> {
        self.apply(&self.at, x)
    }

    pub fn apply_b(&self, x: &BlockVars) -> Result<DVector<f64>, ModelError> {
        self.apply(&self.bt, x)
    }

    /// `A^* y = sum_k y_k A_k`.
    pub fn adjoint_a(&self, y: &[f64]) -> Result<BlockVars, ModelError> {
        self.adjoint(&self.at, y, "A adjoint argument")
    }

    pub fn adjoint_b(&self, y: &[f64]) -> Result<BlockVars, ModelError> {
        self.adjoint(&self.bt, y, "B adjoint argument")
    }

    /// Constraint matrix `k` of block `j` as a dense symmetric matrix (or
    /// diagonal matrix for linear blocks).
    pub fn constraint_matrix(&self, k: usize, j: usize) -> DMatrix<f64> {
        let b = self.blk.block(j);
        let r = self.blk.range(j);
        let mut out = DMatrix::zeros(b.size, b.size);
        for (t, v) in self.at.col(k).filter(|(t, _)| r.contains(t)) {
            let local = t - r.start;
            let (i, jj) = match b.kind {
                BlockKind::Psd => svec_pair(local),
                BlockKind::Linear => (local, local),
            };
            out[(i, jj)] = v;
            out[(jj, i)] = v;
        }
        out
    }

    /// Admissibility findings; an empty list means the data is usable.
    pub fn validate(&self) -> Vec<Finding> {
        let mut out = Vec::new();
        let mut push = |s: String| out.push(Finding { message: s });
        let dim = self.blk.dim();
        if self.at.nrows() != dim {
            push(format!("A row count {} does not match block dimension {dim}", self.at.nrows()));
        }
        if self.bt.nrows() != dim {
            push(format!("B row count {} does not match block dimension {dim}", self.bt.nrows()));
        }
        if self.m() == 0 {
            push("empty A: at least one equality constraint is required".into());
        }
        if self.b.len() != self.m() {
            push(format!("rhs length mismatch: b has {} entries, A has {} columns", self.b.len(), self.m()));
        }
        if self.c.len() != dim {
            push(format!("objective length mismatch: C has {} entries, expected {dim}", self.c.len()));
        }
        if self.l.len() != self.p() || self.u.len() != self.p() {
            push(format!(
                "inequality bound length mismatch: l has {}, u has {}, B has {} columns",
                self.l.len(),
                self.u.len(),
                self.p()
            ));
        } else if let Some(i) = self.l.iter().zip(&self.u).position(|(a, b)| a > b) {
            push(format!("l > u at row {i}"));
        }
        if self.l.iter().any(|v| v.is_nan() || *v == f64::INFINITY)
            || self.u.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY)
        {
            push("inequality bounds contain NaN or wrong-signed infinity".into());
        }
        if self.lower.len() != self.blk.len() || self.upper.len() != self.blk.len() {
            push(format!(
                "bound block count mismatch: L has {}, U has {}, expected {}",
                self.lower.len(),
                self.upper.len(),
                self.blk.len()
            ));
        } else {
            for j in 0..self.blk.len() {
                let n = self.blk.range(j).len();
                for (side, bd) in [("L", &self.lower[j]), ("U", &self.upper[j])] {
                    match bd {
                        Bound::Dense(v) if v.len() != n => {
                            push(format!("{side} block {j} has {} entries, expected {n}", v.len()))
                        }
                        Bound::Dense(v) if v.iter().any(|x| x.is_nan()) => push(format!("{side} block {j} contains NaN")),
                        Bound::Scalar(x) if x.is_nan() => push(format!("{side} block {j} is NaN")),
                        _ => {}
                    }
                }
                let ok_len = |bd: &Bound| !matches!(bd, Bound::Dense(v) if v.len() != n);
                if ok_len(&self.lower[j]) && ok_len(&self.upper[j]) {
                    for t in 0..n {
                        let lo = self.lower[j].value(t, f64::NEG_INFINITY);
                        let hi = self.upper[j].value(t, f64::INFINITY);
                        if lo > hi {
                            push(format!("L > U in block {j} at index {t}"));
                            break;
                        }
                    }
                }
            }
        }
        let nonfinite = |v: &[f64]| v.iter().any(|x| !x.is_finite());
        if nonfinite(&self.b) || nonfinite(&self.c) || nonfinite(&self.at.values) || nonfinite(&self.bt.values) {
            push("non-finite data in A, B, b or C".into());
        }
        out
    }
}

/// `(M + M^T) / 2`.
pub fn symmetrize_input(m: &DMatrix<f64>) -> Result<DMatrix<f64>, ModelError> {
    if m.nrows() != m.ncols() {
        return Err(ModelError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Raw upper-triangle entries (svec order) of a symmetric matrix.
pub fn raw_upper(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(tri(n));
    for j in 0..n {
        for i in 0..=j {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Assembles a constraint store from per-constraint dense block matrices.
/// `mats[k][j]` is the (possibly non-symmetric) matrix of constraint `k` on
/// block `j`; PSD-block matrices are symmetrized, linear-block entries are
/// read from the diagonal (or a column vector).
pub fn store_from_matrices(blk: &BlockStructure, mats: &[Vec<Option<DMatrix<f64>>>]) -> Result<SparseCols, ModelError> {
    let mut trip = Vec::new();
    for (k, row) in mats.iter().enumerate() {
        for (j, m) in row.iter().enumerate() {
            let Some(m) = m else { continue };
            let b = blk.block(j);
            let off = blk.range(j).start;
            match b.kind {
                BlockKind::Psd => {
                    let s = symmetrize_input(m)?;
                    if s.nrows() != b.size {
                        return Err(ModelError::Length { what: "constraint matrix order", expected: b.size, found: s.nrows() });
                    }
                    for (t, v) in raw_upper(&s).into_iter().enumerate() {
                        if v != 0.0 {
                            trip.push((off + t, k, v));
                        }
                    }
                }
                BlockKind::Linear => {
                    let vals: Vec<f64> = if m.ncols() == 1 { m.column(0).iter().copied().collect() } else { m.diagonal().iter().copied().collect() };
                    if vals.len() != b.size {
                        return Err(ModelError::Length { what: "linear constraint size", expected: b.size, found: vals.len() });
                    }
                    for (t, v) in vals.into_iter().enumerate() {
                        if v != 0.0 {
                            trip.push((off + t, k, v));
                        }
                    }
                }
            }
        }
    }
    SparseCols::from_triplets(blk.dim(), mats.len(), trip)
}
