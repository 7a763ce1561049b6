//! Standard-form generators for classic SDP families: Lovász theta numbers,
//! nearest correlation matrices, frequency assignment, Euclidean distance
//! embedding, quadratic assignment and random instances with a known
//! primal-dual solution.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{svec, tri, SQRT2};
use crate::model::{raw_upper, store_from_matrices, Block, BlockStructure, BlockValue, BlockVars, Bound, ProblemData, Sense, SparseCols};
use crate::residuals::IterateState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid generator input: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, GenError> {
    Err(GenError::Invalid(msg.into()))
}

/// A generated problem with the metadata needed to interpret its solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub data: ProblemData,
    pub sense: Sense,
    /// Suggested accuracy; 1e-4 for families that lack a Slater point.
    pub recommended_tol: f64,
    /// Set when the family is known to violate constraint qualifications.
    pub degenerate: bool,
    /// Factor from the scaled standard-form objective to the source objective.
    pub obj_scale: f64,
}

impl Instance {
    fn new(name: impl Into<String>, data: ProblemData, sense: Sense) -> Self {
        Self { name: name.into(), data, sense, recommended_tol: 1e-6, degenerate: false, obj_scale: 1.0 }
    }

    /// Objective value in the source sense and scale.
    pub fn objective(&self, pobj: f64) -> f64 {
        self.sense.sign() * self.obj_scale * pobj
    }
}

/// Undirected graph on `n` nodes; edges are zero-based pairs with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub weights: Option<Vec<f64>>,
}

impl GraphSpec {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self, GenError> {
        let g = Self { n, edges, weights: None };
        g.validate()?;
        Ok(g)
    }

    pub fn with_weights(mut self, w: Vec<f64>) -> Result<Self, GenError> {
        if w.len() != self.edges.len() {
            return invalid(format!("{} weights for {} edges", w.len(), self.edges.len()));
        }
        self.weights = Some(w);
        Ok(self)
    }

    pub fn cycle(n: usize) -> Result<Self, GenError> {
        if n < 3 {
            return invalid("a cycle needs at least 3 nodes");
        }
        let edges = (0..n).map(|i| if i + 1 < n { (i, i + 1) } else { (0, n - 1) }).collect();
        Self::new(n, edges)
    }

    pub fn complete(n: usize) -> Result<Self, GenError> {
        Self::new(n, (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).collect())
    }

    pub fn empty(n: usize) -> Result<Self, GenError> {
        Self::new(n, Vec::new())
    }

    /// Erdős–Rényi graph with edge probability `p`.
    pub fn random(n: usize, p: f64, seed: u64) -> Result<Self, GenError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for j in 0..n {
            for i in 0..j {
                if rng.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        Self::new(n, edges)
    }

    /// Edge-list text: an optional first line `n`, then one `i j [w]` per
    /// line, 1-based. Lines starting with `#` are skipped. Without the
    /// header, `n` is the largest index.
    pub fn parse_edge_list(text: &str) -> Result<Self, GenError> {
        let mut n_decl = None;
        let mut edges = Vec::new();
        let mut weights = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let bad = || GenError::Invalid(format!("line {}: cannot parse `{line}`", lineno + 1));
            match toks.len() {
                1 if edges.is_empty() && n_decl.is_none() => n_decl = Some(toks[0].parse::<usize>().map_err(|_| bad())?),
                2 | 3 => {
                    let i: usize = toks[0].parse().map_err(|_| bad())?;
                    let j: usize = toks[1].parse().map_err(|_| bad())?;
                    if i == 0 || j == 0 || i == j {
                        return Err(bad());
                    }
                    edges.push((i.min(j) - 1, i.max(j) - 1));
                    weights.push(if toks.len() == 3 { toks[2].parse().map_err(|_| bad())? } else { 1.0 });
                }
                _ => return Err(bad()),
            }
        }
        let n = n_decl.unwrap_or_else(|| edges.iter().map(|e| e.1 + 1).max().unwrap_or(0));
        Self::new(n, edges)?.with_weights(weights)
    }

    pub fn read_edge_list(path: &Path) -> Result<Self, GenError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GenError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        Self::parse_edge_list(&text)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.n == 0 {
            return invalid("graph has no nodes");
        }
        let mut seen = std::collections::HashSet::new();
        for &(i, j) in &self.edges {
            if i >= j || j >= self.n {
                return invalid(format!("edge ({}, {}) is not a pair i < j within 1..={}", i + 1, j + 1, self.n));
            }
            if !seen.insert((i, j)) {
                return invalid(format!("duplicate edge ({}, {})", i + 1, j + 1));
            }
        }
        Ok(())
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[k])
    }

    /// Weighted adjacency matrix.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.n, self.n);
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            w[(i, j)] = self.weight(k);
            w[(j, i)] = self.weight(k);
        }
        w
    }
}

/// `max <E, X>  s.t.  <E^ij, X> = 0 for (i,j) in E,  <I, X> = 1,  X psd`,
/// plus `X >= 0` when `plus` is set.
pub fn gen_theta(g: &GraphSpec, plus: bool) -> Result<Instance, GenError> {
    g.validate()?;
    let n = g.n;
    let blk = BlockStructure::new(vec![Block::psd(n)]).map_err(|e| GenError::Invalid(e.to_string()))?;
    let m = g.edges.len() + 1;
    let mut trip = Vec::new();
    for (k, &(i, j)) in g.edges.iter().enumerate() {
        trip.push((blk.coord(0, i, j).unwrap(), k, 1.0));
    }
    for i in 0..n {
        trip.push((blk.coord(0, i, i).unwrap(), m - 1, 1.0));
    }
    let at = SparseCols::from_triplets(blk.dim(), m, trip).unwrap();
    let mut b = vec![0.0; m];
    b[m - 1] = 1.0;
    let c = vec![-1.0; blk.dim()];
    let mut data = ProblemData::new(blk, at, c, b);
    if plus {
        data = data.with_bounds(vec![Bound::Scalar(0.0)], vec![Bound::Free]);
    }
    let name = format!("{}(n={}, |E|={})", if plus { "theta_plus" } else { "theta" }, n, g.edges.len());
    Ok(Instance::new(name, data, Sense::Maximize))
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<(), GenError> {
    if m.nrows() != m.ncols() {
        return invalid(format!("{what} is not square"));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return invalid(format!("{what} is not symmetric"));
    }
    Ok(())
}

/// `min <svec H, x+ + x->  s.t.  diag X = e,  svec X - x+ + x- = svec G`,
/// `X psd`, `x+, x- >= 0`: the weighted l1 nearest correlation matrix.
pub fn gen_ncm(gm: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<Instance, GenError> {
    check_symmetric(gm, "G")?;
    check_symmetric(h, "H")?;
    let n = gm.nrows();
    if h.nrows() != n {
        return invalid("G and H differ in size");
    }
    if h.iter().any(|&v| v < 0.0) {
        return invalid("H has a negative entry");
    }
    let nb = tri(n);
    let blk = BlockStructure::new(vec![Block::psd(n), Block::linear(2 * nb)]).map_err(|e| GenError::Invalid(e.to_string()))?;
    let lin = blk.range(1).start;
    let mut trip = Vec::new();
    for i in 0..n {
        trip.push((blk.coord(0, i, i).unwrap(), i, 1.0));
    }
    let mut t = 0;
    for j in 0..n {
        for i in 0..=j {
            let row = n + t;
            trip.push((t, row, if i == j { 1.0 } else { 1.0 / SQRT2 }));
            trip.push((lin + t, row, -1.0));
            trip.push((lin + nb + t, row, 1.0));
            t += 1;
        }
    }
    let at = SparseCols::from_triplets(blk.dim(), n + nb, trip).unwrap();
    let sg = svec(&((gm + gm.transpose()) * 0.5)).unwrap();
    let sh = svec(&((h + h.transpose()) * 0.5)).unwrap();
    let mut b = vec![1.0; n];
    b.extend(sg.iter());
    let mut c = vec![0.0; nb];
    c.extend(sh.iter());
    c.extend(sh.iter());
    let data = ProblemData::new(blk, at, c, b);
    Ok(Instance::new(format!("ncm(n={n})"), data, Sense::Minimize))
}

fn fap_objective(g: &GraphSpec, k: usize) -> DMatrix<f64> {
    let w = g.adjacency();
    let we = DMatrix::from_diagonal(&(&w * DVector::from_element(g.n, 1.0)));
    let lap = &we - &w;
    lap * ((k as f64 - 1.0) / (2.0 * k as f64)) - we * 0.5
}

fn check_fap(g: &GraphSpec, k: usize, u_subset: &[(usize, usize)]) -> Result<(), GenError> {
    g.validate()?;
    if k < 2 {
        return invalid("k must be at least 2");
    }
    for e in u_subset {
        if !g.edges.contains(e) {
            return invalid(format!("U pair ({}, {}) is not an edge", e.0 + 1, e.1 + 1));
        }
    }
    Ok(())
}

/// With `k = 2` every pair in `U` forces `X_ij = -1`, which makes `X`
/// singular: no Slater point, so the instance is flagged degenerate.
fn fap_instance(name: String, data: ProblemData, k: usize, u_subset: &[(usize, usize)]) -> Instance {
    let mut inst = Instance::new(name, data, Sense::Maximize);
    if k == 2 && !u_subset.is_empty() {
        inst.degenerate = true;
        inst.recommended_tol = 1e-4;
    }
    inst
}

/// Frequency assignment relaxation in bound form:
/// `max <C, X>  s.t.  diag X = e,  X psd,  L <= X <= U` with
/// `L_ij = -1/(k-1)` on edges and `U_ij = -1/(k-1)` on `u_subset`.
pub fn gen_fap(g: &GraphSpec, k: usize, u_subset: &[(usize, usize)]) -> Result<Instance, GenError> {
    check_fap(g, k, u_subset)?;
    let n = g.n;
    let blk = BlockStructure::new(vec![Block::psd(n)]).map_err(|e| GenError::Invalid(e.to_string()))?;
    let trip = (0..n).map(|i| (blk.coord(0, i, i).unwrap(), i, 1.0)).collect();
    let at = SparseCols::from_triplets(blk.dim(), n, trip).unwrap();
    let c: Vec<f64> = raw_upper(&fap_objective(g, k)).into_iter().map(|v| -v).collect();
    let bound = -1.0 / (k as f64 - 1.0);
    let mut lo = vec![f64::NEG_INFINITY; blk.dim()];
    let mut hi = vec![f64::INFINITY; blk.dim()];
    for &(i, j) in &g.edges {
        lo[blk.coord(0, i, j).unwrap()] = bound;
    }
    for &(i, j) in u_subset {
        hi[blk.coord(0, i, j).unwrap()] = bound;
    }
    let lower = if g.edges.is_empty() { Bound::Free } else { Bound::Dense(lo) };
    let upper = if u_subset.is_empty() { Bound::Free } else { Bound::Dense(hi) };
    let data = ProblemData::new(blk, at, c, vec![1.0; n]).with_bounds(vec![lower], vec![upper]);
    Ok(fap_instance(format!("fap(n={n}, k={k})"), data, k, u_subset))
}

/// The same relaxation with explicit rows:
/// `<-E^ij, X> = 2/(k-1)` on `u_subset`, `<-E^ij, X> <= 2/(k-1)` on the
/// remaining edges.
pub fn gen_fap_rows(g: &GraphSpec, k: usize, u_subset: &[(usize, usize)]) -> Result<Instance, GenError> {
    check_fap(g, k, u_subset)?;
    let n = g.n;
    let blk = BlockStructure::new(vec![Block::psd(n)]).map_err(|e| GenError::Invalid(e.to_string()))?;
    let rhs = 2.0 / (k as f64 - 1.0);
    let mut trip: Vec<_> = (0..n).map(|i| (blk.coord(0, i, i).unwrap(), i, 1.0)).collect();
    let mut b = vec![1.0; n];
    for &(i, j) in u_subset {
        trip.push((blk.coord(0, i, j).unwrap(), b.len(), -1.0));
        b.push(rhs);
    }
    let at = SparseCols::from_triplets(blk.dim(), b.len(), trip).unwrap();
    let rest: Vec<_> = g.edges.iter().filter(|e| !u_subset.contains(e)).collect();
    let btrip = rest.iter().enumerate().map(|(r, &&(i, j))| (blk.coord(0, i, j).unwrap(), r, -1.0)).collect();
    let bt = SparseCols::from_triplets(blk.dim(), rest.len(), btrip).unwrap();
    let c: Vec<f64> = raw_upper(&fap_objective(g, k)).into_iter().map(|v| -v).collect();
    let data = ProblemData::new(blk, at, c, b).with_inequalities(
        bt,
        vec![f64::NEG_INFINITY; rest.len()],
        vec![rhs; rest.len()],
    );
    Ok(fap_instance(format!("fap_rows(n={n}, k={k})"), data, k, u_subset))
}

/// `min sum (x+ + x-) - alpha <I, Y>` s.t.
/// `<e_ij e_ij^T, Y> - x+ + x- = d_ij^2` on every edge (`d_ij > 0`, `i < j`),
/// `<E, Y> = 0`, `Y psd`, `x+, x- >= 0`.
pub fn gen_edm(d: &DMatrix<f64>, alpha: f64) -> Result<Instance, GenError> {
    check_symmetric(d, "D")?;
    let n = d.nrows();
    if (0..n).any(|i| d[(i, i)] != 0.0) {
        return invalid("D must have a zero diagonal");
    }
    if !(alpha >= 0.0) {
        return invalid("alpha must be nonnegative");
    }
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).filter(|&(i, j)| d[(i, j)] > 0.0).collect();
    let m = edges.len();
    if m == 0 {
        return invalid("D has no positive entries");
    }
    let blk = BlockStructure::new(vec![Block::psd(n), Block::linear(2 * m)]).map_err(|e| GenError::Invalid(e.to_string()))?;
    let lin = blk.range(1).start;
    let mut trip = Vec::new();
    let mut b = Vec::with_capacity(m + 1);
    for (k, &(i, j)) in edges.iter().enumerate() {
        trip.push((blk.coord(0, i, i).unwrap(), k, 1.0));
        trip.push((blk.coord(0, j, j).unwrap(), k, 1.0));
        trip.push((blk.coord(0, i, j).unwrap(), k, -1.0));
        trip.push((lin + k, k, -1.0));
        trip.push((lin + m + k, k, 1.0));
        b.push(d[(i, j)] * d[(i, j)]);
    }
    for t in 0..tri(n) {
        trip.push((t, m, 1.0));
    }
    b.push(0.0);
    let at = SparseCols::from_triplets(blk.dim(), m + 1, trip).unwrap();
    let mut c = vec![0.0; blk.dim()];
    for i in 0..n {
        c[blk.coord(0, i, i).unwrap()] = -alpha;
    }
    for v in &mut c[lin..] {
        *v = 1.0;
    }
    let data = ProblemData::new(blk, at, c, b);
    let mut inst = Instance::new(format!("edm(n={n}, |E|={m})"), data, Sense::Minimize);
    inst.recommended_tol = 1e-4;
    inst.degenerate = true;
    Ok(inst)
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Doubly nonnegative relaxation of the quadratic assignment problem
/// `min <X, A X B>` over permutations, with `A`, `B` scaled by
/// `max(1, ||.||_F)`; [`Instance::objective`] undoes the scaling.
pub fn gen_qap(a: &DMatrix<f64>, bm: &DMatrix<f64>) -> Result<Instance, GenError> {
    let n = a.nrows();
    if a.ncols() != n || bm.nrows() != n || bm.ncols() != n {
        return invalid("A and B must be square of the same order");
    }
    let ascale = a.norm().max(1.0);
    let bscale = bm.norm().max(1.0);
    let (a, bm) = (a / ascale, bm / bscale);
    let c = kron(&bm, &a);
    let c = (&c + c.transpose()) * 0.5;
    let nn = n * n;
    let blk = BlockStructure::new(vec![Block::psd(nn)]).map_err(|e| GenError::Invalid(e.to_string()))?;
    let eye = DMatrix::<f64>::identity(n, n);
    let ones = DMatrix::<f64>::from_element(n, n, 1.0);
    let unit = |i: usize, j: usize| {
        let mut e = DMatrix::zeros(n, n);
        e[(i, j)] = 1.0;
        e
    };
    let mut mats = Vec::new();
    let mut b = Vec::new();
    for i in 0..n.saturating_sub(1) {
        for j in i..n {
            let eij = unit(i, j);
            let delta = if i == j { 1.0 } else { 0.0 };
            mats.push(vec![Some(kron(&eye, &eij))]);
            b.push(delta);
            mats.push(vec![Some(kron(&eij, &eye))]);
            b.push(delta);
            mats.push(vec![Some(kron(&eij, &ones))]);
            b.push(1.0);
        }
    }
    mats.push(vec![Some(kron(&eye, &unit(n - 1, n - 1)))]);
    b.push(1.0);
    let at = store_from_matrices(&blk, &mats).map_err(|e| GenError::Invalid(e.to_string()))?;
    let data = ProblemData::new(blk, at, raw_upper(&c), b).with_bounds(vec![Bound::Scalar(0.0)], vec![Bound::Free]);
    let mut inst = Instance::new(format!("qap(n={n})"), data, Sense::Minimize);
    inst.obj_scale = ascale * bscale;
    Ok(inst)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, n, n);
    (&g + g.transpose()) * 0.5
}

/// Random `(G, H)` for [`gen_ncm`]: `G` a perturbed correlation matrix with
/// unit diagonal, `H` symmetric with entries in `[0.1, 1]`.
pub fn random_ncm_data(n: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = gaussian_matrix(&mut rng, n, 3.min(n));
    let mut g = &f * f.transpose();
    let d: Vec<f64> = (0..n).map(|i| g[(i, i)].max(1e-12).sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] /= d[i] * d[j];
        }
    }
    let noise = random_symmetric(&mut rng, n) * 0.3;
    g += noise;
    for i in 0..n {
        g[(i, i)] = 1.0;
    }
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = rng.gen_range(0.1..1.0);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    (g, h)
}

/// Random weighted graph with a matching as the `U` set.
pub fn random_fap(n: usize, k: usize, seed: u64) -> Result<Instance, GenError> {
    let (g, u) = random_fap_data(n, seed)?;
    gen_fap(&g, k, &u)
}

pub fn random_fap_data(n: usize, seed: u64) -> Result<(GraphSpec, Vec<(usize, usize)>), GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = GraphSpec::random(n, 0.5, rng.gen())?;
    let w: Vec<f64> = g.edges.iter().map(|_| rng.gen_range(0.5..2.0)).collect();
    let g = g.with_weights(w)?;
    let mut order: Vec<usize> = (0..g.edges.len()).collect();
    order.shuffle(&mut rng);
    let mut used = vec![false; n];
    let mut u = Vec::new();
    for k in order {
        let (i, j) = g.edges[k];
        if !used[i] && !used[j] && u.len() < n / 4 {
            used[i] = true;
            used[j] = true;
            u.push((i, j));
        }
    }
    u.sort();
    Ok((g, u))
}

/// Points uniform in the unit square; edges between pairs closer than
/// `radius` plus a spanning path so the graph is connected.
pub fn random_edm_data(n: usize, radius: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
    let dist = |i: usize, j: usize| ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
    let mut d = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            if dist(i, j) < radius || j == i + 1 {
                let v = dist(i, j).max(1e-3);
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
    }
    d
}

pub fn random_edm(n: usize, seed: u64) -> Result<Instance, GenError> {
    let d = random_edm_data(n, 0.5, seed);
    gen_edm(&d, 0.0)
}

pub fn random_qap_data(n: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            let (x, y): (u32, u32) = (rng.gen_range(0..10), rng.gen_range(0..10));
            a[(i, j)] = x as f64;
            a[(j, i)] = x as f64;
            b[(i, j)] = y as f64;
            b[(j, i)] = y as f64;
        }
    }
    (a, b)
}

pub fn random_qap(n: usize, seed: u64) -> Result<Instance, GenError> {
    let (a, b) = random_qap_data(n, seed);
    gen_qap(&a, &b)
}

/// A primal-dual optimal triple in original coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownSolution {
    pub state: IterateState,
    pub pobj: f64,
}

/// Random problem with blocks `[s n, l n_lin]` built around a strictly
/// complementary `(X*, y*, S*)`: `b = A X*`, `C = A^* y* + S*`. The first
/// constraint is the trace, which keeps the feasible set bounded.
pub fn random_kkt(n: usize, n_lin: usize, m: usize, seed: u64) -> Result<(Instance, KnownSolution), GenError> {
    if n == 0 || m == 0 {
        return invalid("need n >= 1 and m >= 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = vec![Block::psd(n)];
    if n_lin > 0 {
        blocks.push(Block::linear(n_lin));
    }
    let blk = BlockStructure::new(blocks).map_err(|e| GenError::Invalid(e.to_string()))?;
    let q = gaussian_matrix(&mut rng, n, n).qr().q();
    let r = (n / 2).max(1);
    let mut lam = DVector::zeros(n);
    let mut mu = DVector::zeros(n);
    for i in 0..n {
        if i < r {
            lam[i] = rng.gen_range(0.5..2.0);
        } else {
            mu[i] = rng.gen_range(0.5..2.0);
        }
    }
    let xs = &q * DMatrix::from_diagonal(&lam) * q.transpose();
    let ss = &q * DMatrix::from_diagonal(&mu) * q.transpose();
    let xs = (&xs + xs.transpose()) * 0.5;
    let ss = (&ss + ss.transpose()) * 0.5;
    let mut xl = DVector::zeros(n_lin);
    let mut sl = DVector::zeros(n_lin);
    for i in 0..n_lin {
        if rng.gen::<bool>() {
            xl[i] = rng.gen_range(0.5..2.0);
        } else {
            sl[i] = rng.gen_range(0.5..2.0);
        }
    }
    let mut mats = Vec::with_capacity(m);
    for k in 0..m {
        let mut row = vec![Some(if k == 0 { DMatrix::identity(n, n) } else { random_symmetric(&mut rng, n) })];
        if n_lin > 0 {
            let v = if k == 0 {
                DVector::from_element(n_lin, 1.0)
            } else {
                DVector::from_fn(n_lin, |_, _| rng.sample(StandardNormal))
            };
            row.push(Some(DMatrix::from_column_slice(n_lin, 1, v.as_slice())));
        }
        mats.push(row);
    }
    let at = store_from_matrices(&blk, &mats).map_err(|e| GenError::Invalid(e.to_string()))?;
    let y: DVector<f64> = DVector::from_fn(m, |_, _| rng.sample(StandardNormal));

    let mut values = vec![BlockValue::Matrix(xs)];
    let mut svalues = vec![BlockValue::Matrix(ss.clone())];
    if n_lin > 0 {
        values.push(BlockValue::Vector(xl));
        svalues.push(BlockValue::Vector(sl.clone()));
    }
    let xv = BlockVars::from_blocks(&blk, &values).unwrap();
    let sv = BlockVars::from_blocks(&blk, &svalues).unwrap();
    let probe = ProblemData::new(blk.clone(), at.clone(), vec![0.0; blk.dim()], vec![0.0; m]);
    let b: Vec<f64> = probe.apply_a(&xv).unwrap().iter().copied().collect();
    let aty = probe.adjoint_a(y.as_slice()).unwrap();
    let csvec = &aty.data + &sv.data;
    let scale = blk.coord_scale();
    let c: Vec<f64> = csvec.iter().zip(&scale).map(|(v, s)| v / s).collect();
    let data = ProblemData::new(blk, at, c, b);
    let pobj = data.c_svec().dot(&xv);
    let mut state = IterateState::zeros(&data);
    state.x = xv;
    state.y = y;
    state.dual_s = sv;
    let inst = Instance::new(format!("random_kkt(n={n}, l={n_lin}, m={m}, seed={seed})"), data, Sense::Minimize);
    Ok((inst, KnownSolution { state, pobj }))
}

fn parse_args(args: &str, count: usize, name: &str) -> Result<Vec<u64>, GenError> {
    let vals: Result<Vec<u64>, _> = args.split(',').map(|t| t.trim().parse::<u64>()).collect();
    match vals {
        Ok(v) if v.len() == count => Ok(v),
        _ => invalid(format!("{name} expects {count} comma-separated integers, got `{args}`")),
    }
}

fn parse_graph(args: &str) -> Result<GraphSpec, GenError> {
    let (family, rest) = args.split_once(',').ok_or_else(|| GenError::Invalid(format!("graph spec `{args}` needs FAMILY,ARGS")))?;
    match family {
        "cycle" => GraphSpec::cycle(parse_args(rest, 1, "cycle")?[0] as usize),
        "complete" => GraphSpec::complete(parse_args(rest, 1, "complete")?[0] as usize),
        "empty" => GraphSpec::empty(parse_args(rest, 1, "empty")?[0] as usize),
        "file" => GraphSpec::read_edge_list(Path::new(rest)),
        "random" => {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 3 {
                return invalid("random graph expects n,p,seed");
            }
            let n = parts[0].parse().map_err(|_| GenError::Invalid("bad n".into()))?;
            let p = parts[1].parse().map_err(|_| GenError::Invalid("bad p".into()))?;
            let seed = parts[2].parse().map_err(|_| GenError::Invalid("bad seed".into()))?;
            GraphSpec::random(n, p, seed)
        }
        other => invalid(format!("unknown graph family `{other}`")),
    }
}

/// Builds an instance from `NAME:ARGS`:
///
/// | spec | instance |
/// |---|---|
/// | `theta:cycle,5`, `theta:complete,N`, `theta:empty,N`, `theta:random,N,P,SEED`, `theta:file,PATH` | theta number |
/// | `thetaplus:...` | theta with `X >= 0` |
/// | `ncm:N,SEED` | nearest correlation matrix |
/// | `fap:N,K,SEED` | frequency assignment (bound form) |
/// | `edm:N,SEED` | distance embedding |
/// | `qap:N,SEED` | quadratic assignment relaxation |
/// | `random:N,M,SEED` | random SDP with known solution |
pub fn generate(spec: &str) -> Result<Instance, GenError> {
    let (name, args) = spec.split_once(':').ok_or_else(|| GenError::Invalid(format!("generator spec `{spec}` needs NAME:ARGS")))?;
    match name {
        "theta" => gen_theta(&parse_graph(args)?, false),
        "thetaplus" => gen_theta(&parse_graph(args)?, true),
        "ncm" => {
            let v = parse_args(args, 2, "ncm")?;
            let (g, h) = random_ncm_data(v[0] as usize, v[1]);
            gen_ncm(&g, &h)
        }
        "fap" => {
            let v = parse_args(args, 3, "fap")?;
            random_fap(v[0] as usize, v[1] as usize, v[2])
        }
        "edm" => {
            let v = parse_args(args, 2, "edm")?;
            random_edm(v[0] as usize, v[1])
        }
        "qap" => {
            let v = parse_args(args, 2, "qap")?;
            random_qap(v[0] as usize, v[1])
        }
        "random" => {
            let v = parse_args(args, 3, "random")?;
            random_kkt(v[0] as usize, 0, v[1] as usize, v[2]).map(|(i, _)| i)
        }
        other => invalid(format!("unknown generator `{other}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_counts() {
        let inst = gen_theta(&GraphSpec::cycle(5).unwrap(), false).unwrap();
        assert_eq!(inst.data.m(), 6);
        assert!(inst.data.validate().is_empty());
        assert!(!inst.data.has_bounds());
        assert!(gen_theta(&GraphSpec::cycle(5).unwrap(), true).unwrap().data.has_bounds());
    }

    #[test]
    fn ncm_structure() {
        let (g, h) = random_ncm_data(4, 1);
        let inst = gen_ncm(&g, &h).unwrap();
        assert_eq!(inst.data.m(), 4 + 10);
        assert_eq!(inst.data.blk.blocks(), &[Block::psd(4), Block::linear(20)]);
        assert!(inst.data.validate().is_empty());
        let mut hneg = h.clone();
        hneg[(0, 1)] = -1.0;
        hneg[(1, 0)] = -1.0;
        assert!(gen_ncm(&g, &hneg).is_err());
    }

    #[test]
    fn fap_bounds() {
        let g = GraphSpec::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let inst = gen_fap(&g, 2, &[(0, 1)]).unwrap();
        let (lo, hi) = inst.data.bounds_svec();
        let (lo, hi) = (lo.unwrap(), hi.unwrap());
        assert!((lo[1] - (-SQRT2)).abs() < 1e-15);
        assert!((hi[1] - (-SQRT2)).abs() < 1e-15);
        assert_eq!(hi[4], f64::INFINITY);
        assert!(gen_fap(&g, 2, &[(0, 2)]).is_err());
        let empty = gen_fap(&GraphSpec::empty(3).unwrap(), 3, &[]).unwrap();
        assert!(!empty.data.has_bounds());
    }

    #[test]
    fn edm_counts() {
        let d = random_edm_data(8, 0.5, 3);
        let inst = gen_edm(&d, 0.0).unwrap();
        let ne = (0..8).flat_map(|j| (0..j).map(move |i| (i, j))).filter(|&(i, j)| d[(i, j)] > 0.0).count();
        assert_eq!(inst.data.m(), ne + 1);
        assert!(inst.degenerate);
        assert_eq!(inst.recommended_tol, 1e-4);
        let mut bad = d.clone();
        bad[(0, 0)] = 1.0;
        assert!(gen_edm(&bad, 0.0).is_err());
    }

    #[test]
    fn qap_counts() {
        for n in 1..=4 {
            let inst = random_qap(n, 7).unwrap();
            assert_eq!(inst.data.m(), 3 * n * (n + 1) / 2 - 2);
            assert!(inst.data.validate().is_empty());
        }
    }

    #[test]
    fn known_solution_is_kkt() {
        let (inst, sol) = random_kkt(6, 3, 8, 11).unwrap();
        let r = crate::residuals::compute_eta(&inst.data, &sol.state).unwrap();
        assert!(r.eta < 1e-12, "{r:?}");
        assert!(r.eta_g < 1e-12);
    }

    #[test]
    fn generator_grammar() {
        assert_eq!(generate("theta:cycle,5").unwrap().data.m(), 6);
        assert_eq!(generate("thetaplus:complete,4").unwrap().data.m(), 7);
        assert!(generate("theta:cycle").is_err());
        assert!(generate("nope:1").is_err());
        assert_eq!(generate("qap:3,1").unwrap().data.m(), 16);
    }

    #[test]
    fn edge_list_parsing() {
        let g = GraphSpec::parse_edge_list("# header\n4\n1 2\n2 3 0.5\n").unwrap();
        assert_eq!(g.n, 4);
        assert_eq!(g.edges, vec![(0, 1), (1, 2)]);
        assert_eq!(g.weight(1), 0.5);
        assert!(GraphSpec::parse_edge_list("1 1\n").is_err());
    }
}
