//! Generated families: admissibility and relaxation bounds against
//! exhaustive oracles.

use bsdp::params::SolverParams;
use bsdp::problems::{self, GraphSpec};
use bsdp::residuals::StopDecision;
use bsdp::solver::solve;
use nalgebra::DMatrix;

fn params() -> SolverParams {
    SolverParams { tol: 1e-8, printlevel: 0, stopoption: 0, ..SolverParams::default() }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn stability_number(g: &GraphSpec) -> usize {
    (0u32..1 << g.n)
        .filter(|set| {
            g.edges.iter().all(|&(i, j)| set & (1 << i) == 0 || set & (1 << j) == 0)
        })
        .map(|set| set.count_ones() as usize)
        .max()
        .unwrap()
}

#[test]
fn generators_produce_admissible_data() {
    let mut insts = vec![
        problems::gen_theta(&GraphSpec::cycle(6).unwrap(), false).unwrap(),
        problems::gen_theta(&GraphSpec::random(9, 0.4, 2).unwrap(), true).unwrap(),
        problems::random_fap(8, 3, 1).unwrap(),
        problems::random_edm(8, 4).unwrap(),
        problems::random_qap(4, 5).unwrap(),
        problems::random_kkt(6, 3, 8, 6).unwrap().0,
    ];
    let (g, h) = problems::random_ncm_data(7, 3);
    insts.push(problems::gen_ncm(&g, &h).unwrap());
    let (g, u) = problems::random_fap_data(8, 2).unwrap();
    insts.push(problems::gen_fap_rows(&g, 3, &u).unwrap());
    for inst in insts {
        assert!(inst.data.validate().is_empty(), "{}: {:?}", inst.name, inst.data.validate());
    }
}

#[test]
fn qap_relaxation_bounds_every_permutation() {
    for n in 2..=3 {
        for seed in 0..4 {
            let (a, b) = problems::random_qap_data(n, seed);
            let inst = problems::gen_qap(&a, &b).unwrap();
            let res = solve(&inst.data, &params(), None).unwrap();
            assert_eq!(res.info.termination, StopDecision::Converged, "{}", inst.name);
            let bound = inst.objective(res.pobj);
            let best = permutations(n)
                .into_iter()
                .map(|p| {
                    let x = DMatrix::from_fn(n, n, |i, j| if p[i] == j { 1.0 } else { 0.0 });
                    (x.transpose() * &a * &x * &b).trace()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(bound <= best + 1e-5, "n={n} seed={seed}: {bound} > {best}");
        }
    }
}

#[test]
fn theta_sandwich_on_small_graphs() {
    for (n, seed) in [(5, 1), (6, 2), (7, 3), (8, 4), (8, 5)] {
        let g = GraphSpec::random(n, 0.4, seed).unwrap();
        let theta = problems::gen_theta(&g, false).unwrap();
        let plus = problems::gen_theta(&g, true).unwrap();
        let rt = solve(&theta.data, &params(), None).unwrap();
        let rp = solve(&plus.data, &params(), None).unwrap();
        let (t, tp) = (theta.objective(rt.pobj), plus.objective(rp.pobj));
        let alpha = stability_number(&g) as f64;
        assert!(alpha <= tp + 1e-5, "n={n}: alpha {alpha} > theta_plus {tp}");
        assert!(tp <= t + 1e-5, "n={n}: theta_plus {tp} > theta {t}");
    }
}
