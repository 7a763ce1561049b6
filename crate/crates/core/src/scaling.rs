//! Working copy of the problem in svec coordinates with row and magnitude
//! scaling applied, and the maps between original and scaled iterates.
//!
//! Rows of `A` and `B` are normalized to unit norm (`a_k`, `c_j`), then
//! `X~ = X / bs` with `bs = max(1, ||b^||)` and `C~ = C / cs` with
//! `cs = max(1, ||C||)`.

use nalgebra::DVector;

use crate::model::{BlockStructure, ProblemData, SparseCols};
use crate::residuals::IterateState;

#[derive(Debug, Clone)]
pub struct ScaledProblem {
    pub blk: BlockStructure,
    /// `dim x m`, svec coordinates.
    pub at: SparseCols,
    /// `dim x p`, svec coordinates.
    pub bt: SparseCols,
    pub c: DVector<f64>,
    pub b: DVector<f64>,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    /// Norms used to normalize the rows of `A`.
    pub row_a: Vec<f64>,
    /// Norms used to normalize the rows of `B`.
    pub row_b: Vec<f64>,
    pub bscale: f64,
    pub cscale: f64,
}

fn safe_norms(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| if x > 0.0 && x.is_finite() { x } else { 1.0 }).collect()
}

impl ScaledProblem {
    /// Scaled copy; with `scale = false` only the svec conversion is applied.
    pub fn new(data: &ProblemData, scale: bool) -> Self {
        let blk = data.blk.clone();
        let coord = blk.coord_scale();
        let ones_m = vec![1.0; data.m()];
        let ones_p = vec![1.0; data.p()];
        let at_s = data.at.scaled(&coord, &ones_m);
        let bt_s = data.bt.scaled(&coord, &ones_p);
        let (row_a, row_b) = if scale {
            (safe_norms(at_s.col_norms()), safe_norms(bt_s.col_norms()))
        } else {
            (ones_m.clone(), ones_p.clone())
        };
        let inv_a: Vec<f64> = row_a.iter().map(|v| 1.0 / v).collect();
        let inv_b: Vec<f64> = row_b.iter().map(|v| 1.0 / v).collect();
        let at = at_s.scaled(&vec![1.0; blk.dim()], &inv_a);
        let bt = bt_s.scaled(&vec![1.0; blk.dim()], &inv_b);
        let bhat = DVector::from_iterator(data.m(), data.b.iter().zip(&row_a).map(|(b, a)| b / a));
        let c_svec = data.c_svec().data;
        let (bscale, cscale) = if scale { (bhat.norm().max(1.0), c_svec.norm().max(1.0)) } else { (1.0, 1.0) };
        let (lower, upper) = data.bounds_svec();
        let div = |v: Option<Vec<f64>>| v.map(|v| v.into_iter().map(|x| x / bscale).collect::<Vec<_>>());
        let l = data.l.iter().zip(&row_b).map(|(l, c)| l / (c * bscale)).collect();
        let u = data.u.iter().zip(&row_b).map(|(u, c)| u / (c * bscale)).collect();
        Self {
            blk,
            at,
            bt,
            c: c_svec / cscale,
            b: bhat / bscale,
            l,
            u,
            lower: div(lower),
            upper: div(upper),
            row_a,
            row_b,
            bscale,
            cscale,
        }
    }

    pub fn m(&self) -> usize {
        self.at.ncols()
    }

    pub fn p(&self) -> usize {
        self.bt.ncols()
    }

    pub fn dim(&self) -> usize {
        self.blk.dim()
    }

    pub fn has_bounds(&self) -> bool {
        self.lower.is_some() || self.upper.is_some()
    }

    /// Original-space iterate to scaled space.
    pub fn scale_state(&self, st: &IterateState) -> IterateState {
        let (bs, cs) = (self.bscale, self.cscale);
        let mut out = st.clone();
        out.x.data /= bs;
        out.dual_s.data /= cs;
        out.z.data /= cs;
        for (k, a) in self.row_a.iter().enumerate() {
            out.y[k] *= a / cs;
        }
        for (j, c) in self.row_b.iter().enumerate() {
            out.s[j] /= c * bs;
            out.ybar[j] *= c / cs;
            out.v[j] *= c / cs;
        }
        out
    }

    /// Scaled iterate back to the original space.
    pub fn unscale_state(&self, st: &IterateState) -> IterateState {
        let (bs, cs) = (self.bscale, self.cscale);
        let mut out = st.clone();
        out.x.data *= bs;
        out.dual_s.data *= cs;
        out.z.data *= cs;
        for (k, a) in self.row_a.iter().enumerate() {
            out.y[k] *= cs / a;
        }
        for (j, c) in self.row_b.iter().enumerate() {
            out.s[j] *= c * bs;
            out.ybar[j] *= cs / c;
            out.v[j] *= cs / c;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Block, Bound};
    use crate::residuals::compute_eta;

    fn problem() -> ProblemData {
        let blk = BlockStructure::new(vec![Block::psd(2), Block::linear(1)]).unwrap();
        let at = SparseCols::from_triplets(4, 2, vec![(0, 0, 3.0), (1, 0, 1.0), (2, 1, 5.0), (3, 1, 2.0)]).unwrap();
        let bt = SparseCols::from_triplets(4, 1, vec![(1, 0, 4.0), (3, 0, 1.0)]).unwrap();
        ProblemData::new(blk, at, vec![2.0, 0.5, 1.0, -3.0], vec![10.0, 7.0])
            .with_inequalities(bt, vec![-1.0], vec![2.0])
            .with_bounds(vec![Bound::Scalar(-2.0), Bound::Scalar(0.0)], vec![Bound::Scalar(5.0), Bound::Free])
    }

    #[test]
    fn scaled_rows_have_unit_norm() {
        let sp = ScaledProblem::new(&problem(), true);
        for n in sp.at.col_norms().into_iter().chain(sp.bt.col_norms()) {
            assert!((n - 1.0).abs() < 1e-14);
        }
        assert!((sp.b.norm() - 1.0).abs() < 1e-14);
        assert!((sp.c.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scale_unscale_round_trip_preserves_residuals() {
        let data = problem();
        let sp = ScaledProblem::new(&data, true);
        let mut st = IterateState::zeros(&data);
        for (k, v) in st.x.data.iter_mut().enumerate() {
            *v = 0.3 * k as f64 - 0.2;
        }
        st.y[0] = 1.5;
        st.y[1] = -0.7;
        st.s[0] = 0.4;
        st.ybar[0] = 0.9;
        st.v[0] = -0.1;
        st.dual_s.data[0] = 0.25;
        st.z.data[3] = 0.6;
        let back = sp.unscale_state(&sp.scale_state(&st));
        let e0 = compute_eta(&data, &st).unwrap();
        let e1 = compute_eta(&data, &back).unwrap();
        assert!((e0.eta - e1.eta).abs() < 1e-14);
        assert!((back.x.data - &st.x.data).norm() < 1e-14);
    }
}
