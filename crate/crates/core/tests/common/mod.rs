//! Instances, model listings and independent oracles shared by the test
//! targets.

#![allow(dead_code)]

use std::path::PathBuf;

use bsdp::engine::Engine;
use bsdp::linalg::{proj_psd, smat, svec, sym_eig};
use bsdp::model::{Block, BlockKind, BlockStructure, Bound, ProblemData, SparseCols};
use bsdp::modeling::*;
use bsdp::params::AatMethod;
use bsdp::problems::{self, GraphSpec, Instance};
use bsdp::residuals::IterateState;
use bsdp::scaling::ScaledProblem;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

/// Thirty generated instances: theta and theta-plus, NCM, FAP, QAP, EDM and
/// random problems with constructed KKT points.
pub fn corpus() -> Vec<Instance> {
    let mut out = Vec::new();
    let c5 = GraphSpec::cycle(5).unwrap();
    out.push(problems::gen_theta(&c5, false).unwrap());
    out.push(problems::gen_theta(&c5, true).unwrap());
    out.push(problems::gen_theta(&GraphSpec::complete(20).unwrap(), false).unwrap());
    for (n, seed, plus) in [(15, 1, false), (25, 2, false), (20, 3, true), (30, 4, true)] {
        out.push(problems::gen_theta(&GraphSpec::random(n, 0.3, seed).unwrap(), plus).unwrap());
    }
    for (n, seed) in [(10, 1), (20, 2), (40, 3)] {
        let (g, h) = problems::random_ncm_data(n, seed);
        out.push(problems::gen_ncm(&g, &h).unwrap());
    }
    let (g, _) = problems::random_ncm_data(30, 4);
    out.push(problems::gen_ncm(&g, &DMatrix::from_element(30, 30, 1.0)).unwrap());
    for (n, k, seed) in [(6, 2, 1), (8, 3, 2), (10, 4, 3), (12, 3, 4), (12, 5, 5)] {
        out.push(problems::random_fap(n, k, seed).unwrap());
    }
    let (g, u) = problems::random_fap_data(10, 6).unwrap();
    out.push(problems::gen_fap_rows(&g, 3, &u).unwrap());
    for (n, seed) in [(3, 1), (4, 2), (5, 3)] {
        out.push(problems::random_qap(n, seed).unwrap());
    }
    for (n, seed) in [(10, 1), (14, 2)] {
        out.push(problems::random_edm(n, seed).unwrap());
    }
    for (n, nl, m, seed) in [(5, 4, 8, 1), (8, 6, 12, 2), (10, 0, 20, 3), (12, 8, 25, 4), (6, 10, 10, 5), (15, 5, 30, 6), (9, 3, 15, 7), (20, 0, 40, 8)] {
        out.push(problems::random_kkt(n, nl, m, seed).unwrap().0);
    }
    out
}

/// A model rebuilt from a listing, the generator instance it mirrors, and
/// the factor from the model objective to the instance objective.
pub struct Listing {
    pub name: &'static str,
    pub model: Model,
    pub instance: Instance,
    pub scale: f64,
}

fn edge_lists(edges: &[(usize, usize)]) -> (Vec<usize>, Vec<usize>) {
    edges.iter().copied().unzip()
}

pub fn ncm_listing(n: usize, seed: u64) -> Listing {
    let (g, h) = problems::random_ncm_data(n, seed);
    let mut m = Model::new("ncm");
    let x = m.var_sdp(n, n).unwrap();
    m.minimize(l1_norm(mask(&h, x) - mask(&h, &g))).unwrap();
    m.add_affine_constraint(map_diag(x).equals(DVector::from_element(n, 1.0))).unwrap();
    Listing { name: "ncm", model: m, instance: problems::gen_ncm(&g, &h).unwrap(), scale: 1.0 }
}

pub fn theta_listing(g: &GraphSpec, plus: bool) -> Listing {
    let mut m = Model::new(if plus { "theta_plus" } else { "theta" });
    let x = m.var_sdp(g.n, g.n).unwrap();
    m.maximize(sum(x)).unwrap();
    m.add_affine_constraint(trace(x).equals(1.0)).unwrap();
    let (ie, je) = edge_lists(&g.edges);
    if !ie.is_empty() {
        m.add_affine_constraint(x.select(&ie, &je).equals(0.0)).unwrap();
    }
    if plus {
        m.add_affine_constraint(x.ge(0.0)).unwrap();
    }
    Listing { name: if plus { "theta_plus" } else { "theta" }, model: m, instance: problems::gen_theta(g, plus).unwrap(), scale: 1.0 }
}

pub fn fap_objective_matrix(g: &GraphSpec, k: usize) -> DMatrix<f64> {
    let w = g.adjacency();
    let we = DMatrix::from_diagonal(&(&w * DVector::from_element(g.n, 1.0)));
    (&we - &w) * ((k as f64 - 1.0) / (2.0 * k as f64)) - we * 0.5
}

/// FAP with `X(IU, JU) == const` and `X(IE, JE) >= const` rows.
pub fn fap_rows_listing(n: usize, k: usize, seed: u64) -> Listing {
    let (g, u) = problems::random_fap_data(n, seed).unwrap();
    let c = fap_objective_matrix(&g, k);
    let bound = -1.0 / (k as f64 - 1.0);
    let mut m = Model::new("fap_rows");
    let x = m.var_sdp(g.n, g.n).unwrap();
    m.maximize(inprod(&c, x)).unwrap();
    m.add_affine_constraint(map_diag(x).equals(DVector::from_element(g.n, 1.0))).unwrap();
    if !u.is_empty() {
        let (iu, ju) = edge_lists(&u);
        m.add_affine_constraint(x.select(&iu, &ju).equals(bound)).unwrap();
    }
    let (ie, je) = edge_lists(&g.edges);
    m.add_affine_constraint(x.select(&ie, &je).ge(bound)).unwrap();
    Listing { name: "fap_rows", model: m, instance: problems::gen_fap(&g, k, &u).unwrap(), scale: 1.0 }
}

/// FAP with `L <= X <= U`.
pub fn fap_bounds_listing(n: usize, k: usize, seed: u64) -> Listing {
    let (g, u) = problems::random_fap_data(n, seed).unwrap();
    let c = fap_objective_matrix(&g, k);
    let bound = -1.0 / (k as f64 - 1.0);
    let mut m = Model::new("fap_bounds");
    let x = m.var_sdp(g.n, g.n).unwrap();
    m.maximize(inprod(&c, x)).unwrap();
    m.add_affine_constraint(map_diag(x).equals(DVector::from_element(g.n, 1.0))).unwrap();
    let mut lo = DMatrix::from_element(g.n, g.n, f64::NEG_INFINITY);
    let mut hi = DMatrix::from_element(g.n, g.n, f64::INFINITY);
    for &(i, j) in &g.edges {
        lo[(i, j)] = bound;
        lo[(j, i)] = bound;
    }
    for &(i, j) in &u {
        hi[(i, j)] = bound;
        hi[(j, i)] = bound;
    }
    m.add_affine_constraint(Expr::constant(&lo).le(x).le(&hi)).unwrap();
    Listing { name: "fap_bounds", model: m, instance: problems::gen_fap(&g, k, &u).unwrap(), scale: 1.0 }
}

pub fn edm_listing(n: usize, radius: f64, alpha: f64, seed: u64) -> Listing {
    let d = problems::random_edm_data(n, radius, seed);
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).filter(|&(i, j)| d[(i, j)] > 0.0).collect();
    let (id, jd) = edge_lists(&edges);
    let dd = DVector::from_iterator(edges.len(), edges.iter().map(|&(i, j)| d[(i, j)] * d[(i, j)]));
    let mut m = Model::new("edm");
    let x1 = m.var_nn(edges.len(), 1).unwrap();
    let x2 = m.var_nn(edges.len(), 1).unwrap();
    let y = m.var_sdp(n, n).unwrap();
    m.minimize(sum(x1) + sum(x2) - alpha * trace(y)).unwrap();
    let dist = y.select(&id, &id) + y.select(&jd, &jd) - y.select(&id, &jd) - y.select(&jd, &id);
    m.add_affine_constraint((dist - x1 + x2).equals(&dd)).unwrap();
    m.add_affine_constraint(sum(y).equals(0.0)).unwrap();
    Listing { name: "edm", model: m, instance: problems::gen_edm(&d, alpha).unwrap(), scale: 1.0 }
}

pub fn qap_listing(n: usize, seed: u64) -> Listing {
    let (a, b) = problems::random_qap_data(n, seed);
    let instance = problems::gen_qap(&a, &b).unwrap();
    let (sa, sb) = (a.norm().max(1.0), b.norm().max(1.0));
    let c = (&b / sb).kronecker(&(&a / sa));
    let eye = DMatrix::<f64>::identity(n, n);
    let ones = DMatrix::<f64>::from_element(n, n, 1.0);
    let unit = |i: usize, j: usize| {
        let mut e = DMatrix::zeros(n, n);
        e[(i, j)] = 1.0;
        e
    };
    let mut m = Model::new("qap");
    let y = m.var_sdp(n * n, n * n).unwrap();
    m.minimize(inprod(&c, y)).unwrap();
    m.add_affine_constraint(y.ge(0.0)).unwrap();
    for i in 0..n - 1 {
        for j in i..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            m.add_affine_constraint(inprod(&eye.kronecker(&unit(i, j)), y).equals(delta)).unwrap();
            m.add_affine_constraint(inprod(&unit(i, j).kronecker(&eye), y).equals(delta)).unwrap();
            m.add_affine_constraint(inprod(&unit(i, j).kronecker(&ones), y).equals(1.0)).unwrap();
        }
    }
    m.add_affine_constraint(inprod(&eye.kronecker(&unit(n - 1, n - 1)), y).equals(1.0)).unwrap();
    Listing { name: "qap", model: m, instance, scale: sa * sb }
}

/// One listing per application.
pub fn listings() -> Vec<Listing> {
    vec![
        ncm_listing(8, 5),
        theta_listing(&GraphSpec::random(10, 0.3, 4).unwrap(), false),
        theta_listing(&GraphSpec::random(10, 0.3, 4).unwrap(), true),
        fap_rows_listing(10, 3, 2),
        fap_bounds_listing(10, 3, 2),
        edm_listing(8, 0.6, 0.1, 3),
        qap_listing(4, 7),
    ]
}

/// Random data with blocks `[s n, l nl]`, `m` equality rows, `p` two-sided
/// rows and optional box bounds. Not necessarily feasible.
pub fn random_problem(seed: u64, n: usize, nl: usize, m: usize, p: usize, bounds: bool) -> ProblemData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = vec![Block::psd(n)];
    if nl > 0 {
        blocks.push(Block::linear(nl));
    }
    let blk = BlockStructure::new(blocks).unwrap();
    let dim = blk.dim();
    let dense = |cols: usize, rng: &mut ChaCha8Rng| {
        let mut trip = Vec::new();
        for k in 0..cols {
            for t in 0..dim {
                if rng.gen_bool(0.6) {
                    trip.push((t, k, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        SparseCols::from_triplets(dim, cols, trip).unwrap()
    };
    let at = dense(m, &mut rng);
    let bt = dense(p, &mut rng);
    let c = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let l: Vec<f64> = (0..p).map(|j| if j % 3 == 0 { f64::NEG_INFINITY } else { -0.5 }).collect();
    let u: Vec<f64> = (0..p).map(|j| if j % 3 == 1 { f64::INFINITY } else { 0.5 }).collect();
    let mut data = ProblemData::new(blk.clone(), at, c, b);
    if p > 0 {
        data = data.with_inequalities(bt, l, u);
    }
    if bounds {
        let nb = blk.len();
        data = data.with_bounds(vec![Bound::Scalar(-0.3); nb], vec![Bound::Scalar(0.4); nb]);
    }
    data
}

/// A random iterate of matching shape.
pub fn random_state(data: &ProblemData, seed: u64) -> IterateState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut st = IterateState::zeros(data);
    let mut fill = |v: &mut DVector<f64>| v.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
    fill(&mut st.x.data);
    fill(&mut st.s);
    fill(&mut st.y);
    fill(&mut st.ybar);
    fill(&mut st.dual_s.data);
    st.dual_s.data = DVector::from_vec(project(&data.blk, st.dual_s.data.as_slice()));
    st
}

pub fn engine(data: &ProblemData) -> Engine {
    Engine::new(ScaledProblem::new(data, false), AatMethod::Direct, 100_000)
}

/// Projection onto the product cone, block by block through dense matrices.
pub fn project(blk: &BlockStructure, x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for (j, b) in blk.blocks().iter().enumerate() {
        let seg = &x[blk.range(j)];
        match b.kind {
            BlockKind::Psd => out.extend(svec(&proj_psd(&smat(seg).unwrap()).unwrap().0).unwrap().iter()),
            BlockKind::Linear => out.extend(seg.iter().map(|v| v.max(0.0))),
        }
    }
    out
}

/// Smallest eigenvalue magnitude of `x` over PSD blocks and smallest entry
/// magnitude over linear blocks.
pub fn min_abs_eig(blk: &BlockStructure, x: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for (j, b) in blk.blocks().iter().enumerate() {
        let seg = &x[blk.range(j)];
        let m = match b.kind {
            BlockKind::Psd => sym_eig(&smat(seg).unwrap()).unwrap().values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs())),
            BlockKind::Linear => seg.iter().fold(f64::INFINITY, |a, v| a.min(v.abs())),
        };
        best = best.min(m);
    }
    best
}

/// `[A^*; B^*]` as a dense `(m + p) x dim` matrix.
pub fn dense_k(prob: &ScaledProblem) -> DMatrix<f64> {
    let (m, p) = (prob.m(), prob.p());
    let mut k = DMatrix::zeros(m + p, prob.dim());
    for c in 0..m {
        for (t, v) in prob.at.col(c) {
            k[(c, t)] = v;
        }
    }
    for c in 0..p {
        for (t, v) in prob.bt.col(c) {
            k[(m + c, t)] = v;
        }
    }
    k
}

/// Minimizer over `(w, S)`, `S` in the cone, of the augmented Lagrangian
/// plus the proximal term `σ/2 ||S - S_k||^2` in the metric
/// `K^T M^{-1} K`, found by projected gradient on `S` with `w` eliminated
/// through a dense Cholesky solve.
pub fn sgs_proximal_oracle(eng: &Engine, st: &IterateState, z: &DVector<f64>, v: &DVector<f64>, sigma: f64) -> (DVector<f64>, DVector<f64>) {
    let prob = &eng.prob;
    let (m, p) = (prob.m(), prob.p());
    let k = dense_k(prob);
    let mut mm = &k * k.transpose();
    for j in 0..p {
        mm[(m + j, m + j)] += 1.0;
    }
    let chol = mm.cholesky().expect("M is positive definite");
    let fixed = z - &prob.c + &st.x.data / sigma;
    let mut rhs0 = DVector::zeros(m + p);
    for i in 0..m {
        rhs0[i] = prob.b[i] / sigma;
    }
    for j in 0..p {
        rhs0[m + j] = v[j] + st.s[j] / sigma;
    }
    let w_of = |s: &DVector<f64>| chol.solve(&(&rhs0 - &k * (s + &fixed)));
    let metric = k.transpose() * chol.solve(&k);
    let s_k = st.dual_s.data.clone();
    let mut s = s_k.clone();
    for _ in 0..5000 {
        let w = w_of(&s);
        let grad = k.transpose() * &w + &s + &fixed + &metric * (&s - &s_k);
        let next = DVector::from_vec(project(&prob.blk, (&s - grad * 0.5).as_slice()));
        let step = (&next - &s).norm();
        s = next;
        if step <= 1e-15 * (1.0 + s.norm()) {
            break;
        }
    }
    (w_of(&s), s)
}

/// The toy SDPA files and the data each must parse to (minimization sign).
pub fn sdpa_corpus() -> Vec<(&'static str, ProblemData)> {
    let psd2 = BlockStructure::new(vec![Block::psd(2)]).unwrap();
    let basic = ProblemData::new(
        psd2.clone(),
        SparseCols::from_triplets(3, 2, vec![(0, 0, 1.0), (1, 0, 0.5), (2, 1, 1.0)]).unwrap(),
        vec![-1.0, 0.0, -1.0],
        vec![1.0, 2.0],
    );
    let mixed = BlockStructure::new(vec![Block::psd(2), Block::linear(3)]).unwrap();
    let negative = ProblemData::new(
        mixed,
        SparseCols::from_triplets(6, 1, vec![(0, 0, 1.0), (2, 0, 1.0), (3, 0, 1.0), (4, 0, 1.0), (5, 0, 1.0)]).unwrap(),
        vec![0.0, 1.0, 0.0, -2.0, 0.0, 3.5],
        vec![4.0],
    );
    let psd3 = BlockStructure::new(vec![Block::psd(3)]).unwrap();
    let multiline = ProblemData::new(
        psd3,
        SparseCols::from_triplets(6, 4, vec![(0, 0, 1.0), (2, 1, 1.0), (5, 2, 1.0), (3, 3, 0.25)]).unwrap(),
        vec![-1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![1.0, 2.0, 3.0, 4.0],
    );
    let lin_psd = BlockStructure::new(vec![Block::linear(2), Block::psd(1)]).unwrap();
    let duplicates = ProblemData::new(
        lin_psd,
        SparseCols::from_triplets(3, 1, vec![(2, 0, 2.0), (0, 0, 1.0)]).unwrap(),
        vec![-2.0, 0.0, 0.0],
        vec![3.0],
    );
    let feasibility = ProblemData::new(
        psd2,
        SparseCols::from_triplets(3, 2, vec![(0, 0, 1.0), (2, 0, 1.0), (1, 1, 1.0)]).unwrap(),
        vec![0.0; 3],
        vec![1.0, 0.0],
    );
    vec![
        ("basic.dat-s", basic),
        ("negative_block.dat-s", negative),
        ("multiline_b.dat-s", multiline),
        ("duplicates.dat-s", duplicates),
        ("feasibility.dat-s", feasibility),
    ]
}

pub fn read_sdpa_text(name: &str) -> String {
    std::fs::read_to_string(data_dir().join("sdpa").join(name)).unwrap()
}
