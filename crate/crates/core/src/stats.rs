//! Symmetry statistics of the empirical and empirical Bernstein copulas.
//!
//! With `D(u, v) = C(u, v) - C(v, u)`:
//! `R = N^-2 sum_ij D(u_i, u_j)^2` over the midpoint grid,
//! `S = n^-1 sum_i D(U_i, V_i)^2`, and `T = max_ij |D(u_i, u_j)|`.

use serde::{Deserialize, Serialize};

use crate::bernstein::{pmf_row, BernsteinOrder, EmpiricalBernstein};
use crate::empirical::{OrthantSweep, PseudoSample};
use crate::error::{Error, Result};

/// Midpoint grid `u_i = (2i - 1) / (2N)`, `i = 1..N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec(usize);

impl GridSpec {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::domain(format!("grid resolution must be at least 2, got {resolution}")));
        }
        Ok(Self(resolution))
    }

    pub fn resolution(self) -> usize {
        self.0
    }

    pub fn nodes(self) -> Vec<f64> {
        let d = 2.0 * self.0 as f64;
        (1..=self.0).map(|i| (2 * i - 1) as f64 / d).collect()
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self(20)
    }
}

/// Raw statistics and their scaled versions `nR`, `nS`, `sqrt(n) T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticTriple {
    pub n: usize,
    pub r: f64,
    pub s: f64,
    pub t: f64,
    pub scaled_r: f64,
    pub scaled_s: f64,
    pub scaled_t: f64,
}

impl StatisticTriple {
    pub fn new(n: usize, r: f64, s: f64, t: f64) -> Self {
        let nf = n as f64;
        Self {
            n,
            r,
            s,
            t,
            scaled_r: nf * r,
            scaled_s: nf * s,
            scaled_t: nf.sqrt() * t,
        }
    }

    pub fn scaled(&self) -> [f64; 3] {
        [self.scaled_r, self.scaled_s, self.scaled_t]
    }
}

/// `N^-2 * 2 sum_{i<j} d_ij^2` and `max |d_ij|` of an antisymmetric
/// `N x N` array given through `d(i, j)` for `i < j`.
pub(crate) fn grid_functionals(nn: usize, mut d: impl FnMut(usize, usize) -> f64) -> (f64, f64) {
    let mut sq = 0.0;
    let mut sup: f64 = 0.0;
    for i in 0..nn {
        for j in i + 1..nn {
            let x = d(i, j);
            sq += x * x;
            sup = sup.max(x.abs());
        }
    }
    (2.0 * sq / (nn * nn) as f64, sup)
}

/// Mean of squares, summed in sorted order so that the result does not
/// depend on the order of the terms.
pub(crate) fn mean_square(mut terms: Vec<f64>) -> f64 {
    let n = terms.len() as f64;
    for x in terms.iter_mut() {
        *x *= *x;
    }
    terms.sort_by(f64::total_cmp);
    terms.iter().sum::<f64>() / n
}

fn bernstein_grid(b: &EmpiricalBernstein, grid: GridSpec) -> (f64, f64) {
    let rows: Vec<Vec<f64>> = grid.nodes().iter().map(|&u| pmf_row(b.order(), u)).collect();
    grid_functionals(rows.len(), |i, j| b.asymmetry_rows(&rows[i], &rows[j]))
}

fn bernstein_s(b: &EmpiricalBernstein, ps: &PseudoSample) -> f64 {
    let m = b.order();
    let terms = ps
        .pairs()
        .map(|(u, v)| b.asymmetry_rows(&pmf_row(m, u), &pmf_row(m, v)))
        .collect();
    mean_square(terms)
}

pub fn stat_r(ps: &PseudoSample, order: BernsteinOrder, grid: GridSpec) -> f64 {
    bernstein_grid(&EmpiricalBernstein::new(ps, order), grid).0
}

pub fn stat_s(ps: &PseudoSample, order: BernsteinOrder) -> f64 {
    bernstein_s(&EmpiricalBernstein::new(ps, order), ps)
}

pub fn stat_t(ps: &PseudoSample, order: BernsteinOrder, grid: GridSpec) -> f64 {
    bernstein_grid(&EmpiricalBernstein::new(ps, order), grid).1
}

/// All three Bernstein statistics from one lattice.
pub fn bernstein_statistics(ps: &PseudoSample, order: BernsteinOrder, grid: GridSpec) -> StatisticTriple {
    let b = EmpiricalBernstein::new(ps, order);
    let (r, t) = bernstein_grid(&b, grid);
    StatisticTriple::new(ps.len(), r, bernstein_s(&b, ps), t)
}

/// Index of the first node `>= x`, or `nodes.len()` if there is none.
pub(crate) fn node_index(nodes: &[f64], x: f64) -> usize {
    nodes.partition_point(|&t| t < x)
}

/// `sum_j w_j 1(U_j <= u_a, V_j <= u_b)` for every pair of grid nodes,
/// row-major `N x N`.
pub(crate) fn grid_orthant_sums(ps: &PseudoSample, nodes: &[f64], weights: &[f64]) -> Vec<f64> {
    let nn = nodes.len();
    let mut g = vec![0.0; nn * nn];
    for ((u, v), &w) in ps.pairs().zip(weights) {
        let (a, b) = (node_index(nodes, u), node_index(nodes, v));
        if a < nn && b < nn {
            g[a * nn + b] += w;
        }
    }
    for a in 0..nn {
        for b in 1..nn {
            g[a * nn + b] += g[a * nn + b - 1];
        }
    }
    for a in 1..nn {
        for b in 0..nn {
            g[a * nn + b] += g[(a - 1) * nn + b];
        }
    }
    g
}

fn empirical_grid(ps: &PseudoSample, grid: GridSpec) -> (f64, f64) {
    let nodes = grid.nodes();
    let nn = nodes.len();
    let counts = grid_orthant_sums(ps, &nodes, &vec![1.0; ps.len()]);
    let nf = ps.len() as f64;
    grid_functionals(nn, |i, j| (counts[i * nn + j] - counts[j * nn + i]) / nf)
}

fn empirical_s(ps: &PseudoSample) -> f64 {
    let points: Vec<(f64, f64)> = ps.pairs().collect();
    let queries: Vec<(f64, f64)> = points.iter().map(|&(u, v)| (v, u)).collect();
    let n = points.len();
    let mut mirrored = vec![0.0; n];
    OrthantSweep::new(&points, &queries).apply(&vec![1.0; n], &mut mirrored);
    let mut direct = vec![0.0; n];
    OrthantSweep::new(&points, &points).apply(&vec![1.0; n], &mut direct);
    let nf = n as f64;
    mean_square(direct.iter().zip(&mirrored).map(|(a, b)| (a - b) / nf).collect())
}

pub fn stat_r_empirical(ps: &PseudoSample, grid: GridSpec) -> f64 {
    empirical_grid(ps, grid).0
}

pub fn stat_s_empirical(ps: &PseudoSample) -> f64 {
    empirical_s(ps)
}

pub fn stat_t_empirical(ps: &PseudoSample, grid: GridSpec) -> f64 {
    empirical_grid(ps, grid).1
}

pub fn empirical_statistics(ps: &PseudoSample, grid: GridSpec) -> StatisticTriple {
    let (r, t) = empirical_grid(ps, grid);
    StatisticTriple::new(ps.len(), r, empirical_s(ps), t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::bernstein_pmf;
    use crate::empirical::{empirical_copula, pseudo_observations};
    use crate::rng::Stream;
    use crate::Sample;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn three_point() -> PseudoSample {
        PseudoSample::from_pairs(&[(1.0 / 3.0, 2.0 / 3.0), (2.0 / 3.0, 1.0), (1.0, 1.0 / 3.0)]).unwrap()
    }

    fn brute_bernstein(ps: &PseudoSample, m: usize, u: f64, v: f64) -> f64 {
        let mut total = 0.0;
        for k in 0..=m {
            for l in 0..=m {
                let c = empirical_copula(ps, k as f64 / m as f64, l as f64 / m as f64);
                total += c * bernstein_pmf(m, k, u) * bernstein_pmf(m, l, v);
            }
        }
        total
    }

    fn brute_stats(c: impl Fn(f64, f64) -> f64, ps: &PseudoSample, nn: usize) -> (f64, f64, f64) {
        let nodes: Vec<f64> = (1..=nn).map(|i| (2.0 * i as f64 - 1.0) / (2.0 * nn as f64)).collect();
        let (mut r, mut t) = (0.0, 0.0f64);
        for &a in &nodes {
            for &b in &nodes {
                let d = c(a, b) - c(b, a);
                r += d * d;
                t = t.max(d.abs());
            }
        }
        let s: f64 = ps.pairs().map(|(a, b)| (c(a, b) - c(b, a)).powi(2)).sum::<f64>() / ps.len() as f64;
        (r / (nn * nn) as f64, s, t)
    }

    fn order(m: usize) -> BernsteinOrder {
        BernsteinOrder::new(m).unwrap()
    }

    fn random_sample(n: usize, seed: u64) -> Sample {
        let mut rng = Stream::new(seed).rng();
        let pairs = (0..n)
            .map(|_| {
                let x: f64 = rng.random();
                (x, x * x + 0.3 * rng.random::<f64>())
            })
            .collect();
        Sample::new(pairs).unwrap()
    }

    #[test]
    fn grid_nodes() {
        assert_eq!(GridSpec::new(2).unwrap().nodes(), vec![0.25, 0.75]);
        assert!(GridSpec::new(1).is_err());
        let nodes = GridSpec::default().nodes();
        assert_eq!(nodes.len(), 20);
        assert_eq!(nodes[0], 0.025);
    }

    #[test]
    fn three_point_oracles() {
        let ps = three_point();
        let g = GridSpec::new(20).unwrap();
        let (r, s, t) = brute_stats(|a, b| brute_bernstein(&ps, 2, a, b), &ps, 20);
        assert!((stat_r(&ps, order(2), g) - r).abs() < 1e-12);
        assert!((stat_s(&ps, order(2)) - s).abs() < 1e-12);
        assert!((stat_t(&ps, order(2), g) - t).abs() < 1e-15);
        let (r, s, t) = brute_stats(|a, b| empirical_copula(&ps, a, b), &ps, 20);
        assert!((stat_r_empirical(&ps, g) - r).abs() < 1e-12);
        assert!((stat_s_empirical(&ps) - s).abs() < 1e-12);
        assert!((stat_t_empirical(&ps, g) - t).abs() < 1e-12);
        assert!(t > 0.0);
    }

    #[test]
    fn symmetric_samples_give_exact_zero() {
        let one = PseudoSample::from_pairs(&[(1.0, 1.0)]).unwrap();
        let g = GridSpec::default();
        for m in [1, 2, 7] {
            assert_eq!(bernstein_statistics(&one, order(m), g).scaled(), [0.0; 3]);
        }
        let mut rng = Stream::new(3).rng();
        for _ in 0..20 {
            let mut pairs = Vec::new();
            for _ in 0..15 {
                let (a, b): (f64, f64) = (rng.random(), rng.random());
                pairs.push((a, b));
                pairs.push((b, a));
            }
            let ps = pseudo_observations(&Sample::new(pairs).unwrap());
            for m in [3, 13, 33] {
                let st = bernstein_statistics(&ps, order(m), g);
                assert_eq!([st.r, st.s, st.t], [0.0; 3]);
            }
            let st = empirical_statistics(&ps, g);
            assert_eq!([st.r, st.s, st.t], [0.0; 3]);
        }
    }

    #[test]
    fn refinement_stability() {
        for seed in 0..5 {
            let ps = pseudo_observations(&random_sample(150, seed));
            for m in [5, 15] {
                let coarse = stat_r(&ps, order(m), GridSpec::new(20).unwrap());
                let fine = stat_r(&ps, order(m), GridSpec::new(200).unwrap());
                assert!((coarse - fine).abs() <= 5e-3);
            }
        }
    }

    /// Khoudraji-Clayton: median R_{n,m} approaches the integrated R_C.
    #[test]
    fn consistency_under_alternative() {
        let spec: crate::CopulaSpec = "clayton:tau=0.7:delta=0.5".parse().unwrap();
        let q = 200;
        let mut rc = 0.0;
        for i in 0..q {
            for j in 0..q {
                let (a, b) = ((i as f64 + 0.5) / q as f64, (j as f64 + 0.5) / q as f64);
                rc += (spec.cdf(a, b) - spec.cdf(b, a)).powi(2);
            }
        }
        rc /= (q * q) as f64;
        let mut errs = Vec::new();
        for n in [100usize, 400, 1600] {
            let m = BernsteinOrder::default_for(n);
            let mut r: Vec<f64> = (0..50)
                .map(|rep| {
                    let s = spec.sample(n, Stream::new(21).path(&[n as u64, rep])).unwrap();
                    stat_r(&pseudo_observations(&s), m, GridSpec::default())
                })
                .collect();
            r.sort_by(f64::total_cmp);
            errs.push((0.5 * (r[24] + r[25]) - rc).abs());
        }
        assert!(errs[2] < errs[0], "{errs:?} vs R_C = {rc}");
    }

    proptest! {
        #[test]
        fn invariances(seed in 0u64..10_000, n in 3usize..40, m in 1usize..16, nn in 2usize..12) {
            let sample = random_sample(n, seed);
            let g = GridSpec::new(nn).unwrap();
            let ps = pseudo_observations(&sample);
            let base = bernstein_statistics(&ps, order(m), g);
            let emp = empirical_statistics(&ps, g);

            let sw = pseudo_observations(&sample.swapped());
            prop_assert_eq!(bernstein_statistics(&sw, order(m), g), base);
            prop_assert_eq!(empirical_statistics(&sw, g), emp);

            let mut pairs = sample.pairs().to_vec();
            pairs.shuffle(&mut Stream::new(seed + 1).rng());
            let perm = pseudo_observations(&Sample::new(pairs).unwrap());
            prop_assert_eq!(bernstein_statistics(&perm, order(m), g), base);
            prop_assert_eq!(empirical_statistics(&perm, g), emp);

            let mono: Vec<(f64, f64)> = sample.pairs().iter().map(|&(x, y)| (x.exp() * 3.0 - 1.0, y.powi(3))).collect();
            let mono = pseudo_observations(&Sample::new(mono).unwrap());
            prop_assert_eq!(bernstein_statistics(&mono, order(m), g), base);

            for st in [base, emp] {
                prop_assert!(st.r >= 0.0 && st.s >= 0.0 && (0.0..=1.0).contains(&st.t));
                prop_assert!(st.r <= st.t * st.t + 1e-12);
            }
        }
    }
}
