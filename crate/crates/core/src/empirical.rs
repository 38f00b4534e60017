//! Rank transforms and the empirical copula.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::Sample;

/// Rank-transformed pairs `(U_i, V_i) = (R_i / n, S_i / n)`.
///
/// Ranks are stored doubled so that mid-ranks stay integral; every
/// comparison against a lattice point `k / m` is done in integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSample {
    n: usize,
    ru2: Vec<u64>,
    rv2: Vec<u64>,
    u: Vec<f64>,
    v: Vec<f64>,
    tie_fraction: f64,
}

/// Doubled mid-ranks of `xs` and the number of entries sharing their value.
fn doubled_midranks(xs: &[f64]) -> (Vec<u64>, usize) {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r2 = vec![0u64; n];
    let mut tied = 0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && xs[idx[end]] == xs[idx[start]] {
            end += 1;
        }
        // positions start+1 ..= end, doubled average
        let r = (start + 1 + end) as u64;
        for &i in &idx[start..end] {
            r2[i] = r;
        }
        if end - start > 1 {
            tied += end - start;
        }
        start = end;
    }
    (r2, tied)
}

impl PseudoSample {
    fn from_ranks(ru2: Vec<u64>, rv2: Vec<u64>, tie_fraction: f64) -> Self {
        let n = ru2.len();
        let d = 2.0 * n as f64;
        let u = ru2.iter().map(|&r| r as f64 / d).collect();
        let v = rv2.iter().map(|&r| r as f64 / d).collect();
        Self {
            n,
            ru2,
            rv2,
            u,
            v,
            tie_fraction,
        }
    }

    /// Wraps pairs that are already pseudo-observations. Each coordinate
    /// must be a multiple of `1 / (2n)` in `(0, 1]`.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let n = pairs.len();
        if n == 0 {
            return Err(Error::EmptySample("pseudo-sample has no observations".into()));
        }
        let d = 2 * n as u64;
        let lattice = |i: usize, x: f64| -> Result<u64> {
            let r = (x * d as f64).round();
            if !(x > 0.0 && x <= 1.0) || (r / d as f64 - x).abs() > 1e-12 {
                return Err(Error::input(format!(
                    "pseudo-observation {i} value {x} is not a multiple of 1/{d} in (0, 1]"
                )));
            }
            Ok(r as u64)
        };
        let mut ru2 = Vec::with_capacity(n);
        let mut rv2 = Vec::with_capacity(n);
        for (i, &(a, b)) in pairs.iter().enumerate() {
            ru2.push(lattice(i, a)?);
            rv2.push(lattice(i, b)?);
        }
        Ok(Self::from_ranks(ru2, rv2, 0.0))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.u.iter().copied().zip(self.v.iter().copied())
    }

    /// Fraction of observations whose x or y value is shared with another.
    pub fn tie_fraction(&self) -> f64 {
        self.tie_fraction
    }

    /// Smallest `k` with `U_i <= k / m`, per observation, for both margins.
    pub(crate) fn lattice_index(&self, m: usize) -> Vec<(usize, usize)> {
        let d = 2 * self.n as u64;
        let m64 = m as u64;
        let up = |r: u64| (r * m64).div_ceil(d) as usize;
        self.ru2.iter().zip(&self.rv2).map(|(&a, &b)| (up(a), up(b))).collect()
    }

    pub fn swapped(&self) -> Self {
        Self {
            n: self.n,
            ru2: self.rv2.clone(),
            rv2: self.ru2.clone(),
            u: self.v.clone(),
            v: self.u.clone(),
            tie_fraction: self.tie_fraction,
        }
    }

    /// Exact count `#{i : U_i <= u, V_i <= v}`.
    pub fn count_below(&self, u: f64, v: f64) -> usize {
        self.u.iter().zip(&self.v).filter(|(a, b)| **a <= u && **b <= v).count()
    }
}

/// Rank transform of a sample with mid-ranks for ties. A tie fraction above
/// zero is logged as a warning.
pub fn pseudo_observations(sample: &Sample) -> PseudoSample {
    let xs: Vec<f64> = sample.xs().collect();
    let ys: Vec<f64> = sample.ys().collect();
    let (ru2, _) = doubled_midranks(&xs);
    let (rv2, _) = doubled_midranks(&ys);
    let n = xs.len();
    let mut shared = vec![false; n];
    for col in [&xs, &ys] {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        for w in idx.windows(2) {
            if col[w[0]] == col[w[1]] {
                shared[w[0]] = true;
                shared[w[1]] = true;
            }
        }
    }
    let tie_fraction = shared.iter().filter(|&&s| s).count() as f64 / n as f64;
    if tie_fraction > 0.0 {
        log::warn!(
            "ties in the data: {:.1}% of observations resolved by mid-ranks",
            100.0 * tie_fraction
        );
    }
    PseudoSample::from_ranks(ru2, rv2, tie_fraction)
}

/// `C_n(u, v) = n^-1 #{i : U_i <= u, V_i <= v}`.
pub fn empirical_copula(ps: &PseudoSample, u: f64, v: f64) -> f64 {
    ps.count_below(u, v) as f64 / ps.len() as f64
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Insert { point: usize, slot: usize },
    Query { query: usize, prefix: usize },
}

/// Weighted lower-orthant sums `sum_j w_j 1(a_j <= q_i, b_j <= r_i)` for a
/// fixed set of points and queries, reusable across weight vectors.
///
/// The plane sweep and Fenwick tree layout are fixed at construction, so the
/// floating-point reduction order does not depend on the weights.
#[derive(Debug, Clone)]
pub struct OrthantSweep {
    events: Vec<Event>,
    slots: usize,
    queries: usize,
}

impl OrthantSweep {
    pub fn new(points: &[(f64, f64)], queries: &[(f64, f64)]) -> Self {
        let mut bs: Vec<f64> = points.iter().map(|p| p.1).collect();
        bs.sort_by(f64::total_cmp);
        bs.dedup();
        let slot = |b: f64| bs.partition_point(|&x| x < b);
        let prefix = |r: f64| bs.partition_point(|&x| x <= r);
        // (key, kind, index): inserts sort before queries at equal keys
        let mut order: Vec<(f64, u8, usize)> = points
            .iter()
            .enumerate()
            .map(|(j, p)| (p.0, 0u8, j))
            .chain(queries.iter().enumerate().map(|(i, q)| (q.0, 1u8, i)))
            .collect();
        order.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let events = order
            .into_iter()
            .map(|(_, kind, i)| {
                if kind == 0 {
                    Event::Insert {
                        point: i,
                        slot: slot(points[i].1),
                    }
                } else {
                    Event::Query {
                        query: i,
                        prefix: prefix(queries[i].1),
                    }
                }
            })
            .collect();
        Self {
            events,
            slots: bs.len(),
            queries: queries.len(),
        }
    }

    pub fn num_queries(&self) -> usize {
        self.queries
    }

    /// Writes the weighted orthant sum of every query into `out`.
    pub fn apply(&self, weights: &[f64], out: &mut [f64]) {
        let mut tree = vec![0.0; self.slots + 1];
        for ev in &self.events {
            match *ev {
                Event::Insert { point, slot } => {
                    let mut i = slot + 1;
                    while i <= self.slots {
                        tree[i] += weights[point];
                        i += i & i.wrapping_neg();
                    }
                }
                Event::Query { query, prefix } => {
                    let mut s = 0.0;
                    let mut i = prefix;
                    while i > 0 {
                        s += tree[i];
                        i -= i & i.wrapping_neg();
                    }
                    out[query] = s;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ps_of(x: &[f64], y: &[f64]) -> PseudoSample {
        pseudo_observations(&Sample::from_columns(x, y).unwrap())
    }

    #[test]
    fn rank_examples() {
        let ps = ps_of(&[3.2, 1.1, 5.0], &[2.0, 9.0, 4.0]);
        assert_eq!(ps.u(), &[2.0 / 3.0, 1.0 / 3.0, 1.0]);
        assert_eq!(ps.v(), &[1.0 / 3.0, 1.0, 2.0 / 3.0]);
        let ps = ps_of(&[0.3], &[-7.0]);
        assert_eq!((ps.u(), ps.v()), (&[1.0][..], &[1.0][..]));
        let ps = ps_of(&[5.0, 5.0], &[1.0, 2.0]);
        assert_eq!(ps.u(), &[0.75, 0.75]);
        assert_eq!(ps.v(), &[0.5, 1.0]);
        assert_eq!(ps.tie_fraction(), 1.0);
    }

    #[test]
    fn empirical_copula_examples() {
        let ps = PseudoSample::from_pairs(&[(0.5, 1.0), (1.0, 0.5)]).unwrap();
        assert_eq!(empirical_copula(&ps, 0.5, 0.5), 0.0);
        assert_eq!(empirical_copula(&ps, 1.0, 1.0), 1.0);
        assert_eq!(empirical_copula(&ps, 0.75, 1.0), 0.5);
    }

    #[test]
    fn from_pairs_rejects_off_lattice() {
        assert!(PseudoSample::from_pairs(&[(0.3, 1.0), (1.0, 0.5)]).is_err());
        assert!(PseudoSample::from_pairs(&[]).is_err());
    }

    #[test]
    fn lattice_index_matches_float_comparison() {
        let ps = ps_of(&[0.1, 0.7, 0.3, 0.3, 2.0, -1.0, 0.5], &[1.0, 2.0, 3.0, 4.0, 0.0, 2.0, 9.0]);
        for m in 1..12 {
            for (i, &(ku, kv)) in ps.lattice_index(m).iter().enumerate() {
                let first = |x: f64| (0..=m).find(|&k| x <= k as f64 / m as f64).unwrap();
                assert_eq!((ku, kv), (first(ps.u()[i]), first(ps.v()[i])));
            }
        }
    }

    proptest! {
        #[test]
        fn ranks_without_ties_are_a_permutation(xs in proptest::collection::hash_set(-1000i32..1000, 1..40)) {
            let x: Vec<f64> = xs.into_iter().map(f64::from).collect();
            let y: Vec<f64> = x.iter().map(|a| -a * 3.0).collect();
            let ps = ps_of(&x, &y);
            let n = x.len();
            let mut u: Vec<f64> = ps.u().to_vec();
            u.sort_by(f64::total_cmp);
            let want: Vec<f64> = (1..=n).map(|k| k as f64 / n as f64).collect();
            prop_assert_eq!(u, want);
            prop_assert_eq!(ps.tie_fraction(), 0.0);
        }

        #[test]
        fn sweep_matches_direct_sums(
            pts in proptest::collection::vec((0u8..8, 0u8..8, -3.0f64..3.0), 1..30),
            qs in proptest::collection::vec((0u8..9, 0u8..9), 1..20),
        ) {
            let points: Vec<(f64, f64)> = pts.iter().map(|p| (p.0 as f64, p.1 as f64)).collect();
            let w: Vec<f64> = pts.iter().map(|p| p.2).collect();
            let queries: Vec<(f64, f64)> = qs.iter().map(|q| (q.0 as f64 - 0.5, q.1 as f64)).collect();
            let sweep = OrthantSweep::new(&points, &queries);
            let mut out = vec![0.0; queries.len()];
            sweep.apply(&w, &mut out);
            for (i, q) in queries.iter().enumerate() {
                let direct: f64 = points.iter().zip(&w)
                    .filter(|(p, _)| p.0 <= q.0 && p.1 <= q.1)
                    .map(|(_, w)| w).sum();
                prop_assert!((out[i] - direct).abs() < 1e-9);
            }
        }
    }
}
