//! The empirical Bernstein copula of order `m` and its partial derivatives.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::empirical::PseudoSample;
use crate::error::{Error, Result};

const LOG_SPACE_ABOVE: usize = 30;

/// Degree of the Bernstein polynomials, `m >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BernsteinOrder(usize);

impl BernsteinOrder {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            Err(Error::domain("bernstein order m must be at least 1"))
        } else {
            Ok(Self(m))
        }
    }

    /// `ceil(sqrt(n))`, at least 1.
    pub fn default_for(n: usize) -> Self {
        let mut m = (n as f64).sqrt().ceil() as usize;
        while m * m < n {
            m += 1;
        }
        while m > 1 && (m - 1) * (m - 1) >= n {
            m -= 1;
        }
        Self(m.max(1))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

fn binomial(m: usize, k: usize) -> f64 {
    let k = k.min(m - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (m - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Binomial probability `C(m, k) u^k (1 - u)^(m - k)`.
pub fn bernstein_pmf(m: usize, k: usize, u: f64) -> f64 {
    assert!(k <= m, "bernstein_pmf: k = {k} exceeds m = {m}");
    if u <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if u >= 1.0 {
        return if k == m { 1.0 } else { 0.0 };
    }
    if m > LOG_SPACE_ABOVE {
        (ln_binomial(m as u64, k as u64) + k as f64 * u.ln() + (m - k) as f64 * (-u).ln_1p()).exp()
    } else {
        binomial(m, k) * u.powi(k as i32) * (1.0 - u).powi((m - k) as i32)
    }
}

/// `[P_{m,0}(u), ..., P_{m,m}(u)]`.
pub fn pmf_row(m: usize, u: f64) -> Vec<f64> {
    (0..=m).map(|k| bernstein_pmf(m, k, u)).collect()
}

/// `sum_k x_k sum_l g[k][l] y_l` over a row-major `rows x cols` matrix.
#[inline]
pub(crate) fn bilinear(g: &[f64], cols: usize, x: &[f64], y: &[f64]) -> f64 {
    let mut total = 0.0;
    for (k, &xk) in x.iter().enumerate() {
        if xk == 0.0 {
            continue;
        }
        let row = &g[k * cols..(k + 1) * cols];
        let inner: f64 = row.iter().zip(y).map(|(a, b)| a * b).sum();
        total += xk * inner;
    }
    total
}

/// Lattice values `G[k][l] = C_n(k/m, l/m)` and the derived arrays needed to
/// evaluate the Bernstein copula, its asymmetry and its derivatives.
#[derive(Debug, Clone)]
pub struct EmpiricalBernstein {
    m: usize,
    n: usize,
    g: Vec<f64>,
    antisym: Vec<f64>,
    du: Vec<f64>,
    dv: Vec<f64>,
}

impl EmpiricalBernstein {
    pub fn new(ps: &PseudoSample, order: BernsteinOrder) -> Self {
        let m = order.get();
        let n = ps.len();
        let s = m + 1;
        let mut counts = vec![0u64; s * s];
        for (ku, kv) in ps.lattice_index(m) {
            counts[ku * s + kv] += 1;
        }
        for k in 0..s {
            for l in 1..s {
                counts[k * s + l] += counts[k * s + l - 1];
            }
        }
        for k in 1..s {
            for l in 0..s {
                counts[k * s + l] += counts[(k - 1) * s + l];
            }
        }
        let nf = n as f64;
        let g: Vec<f64> = counts.iter().map(|&c| c as f64 / nf).collect();
        let mut antisym = vec![0.0; s * s];
        for k in 0..s {
            for l in 0..s {
                antisym[k * s + l] = (counts[k * s + l] as f64 - counts[l * s + k] as f64) / nf;
            }
        }
        let mut du = vec![0.0; m * s];
        let mut dv = vec![0.0; m * s];
        for k in 0..m {
            for l in 0..s {
                du[k * s + l] = (counts[(k + 1) * s + l] - counts[k * s + l]) as f64 / nf;
                dv[k * s + l] = (counts[l * s + k + 1] - counts[l * s + k]) as f64 / nf;
            }
        }
        if m > n {
            log::warn!("bernstein order m = {m} exceeds the sample size n = {n}");
        }
        Self {
            m,
            n,
            g,
            antisym,
            du,
            dv,
        }
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    /// Row-major `(m+1) x (m+1)` lattice `C_n(k/m, l/m)`.
    pub fn lattice(&self) -> &[f64] {
        &self.g
    }

    /// `C_{n,m}` from precomputed rows `x = P_m(u)`, `y = P_m(v)`.
    ///
    /// Diagonal and mirrored off-diagonal terms are paired so that swapping
    /// the sample and the arguments reproduces the value bit for bit.
    pub fn cdf_rows(&self, x: &[f64], y: &[f64]) -> f64 {
        let s = self.m + 1;
        let g = &self.g;
        let mut total = 0.0;
        for k in 0..s {
            total += g[k * s + k] * (x[k] * y[k]);
            for l in k + 1..s {
                total += g[k * s + l] * (x[k] * y[l]) + g[l * s + k] * (x[l] * y[k]);
            }
        }
        total
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        self.cdf_rows(&pmf_row(self.m, u), &pmf_row(self.m, v))
    }

    /// `C_{n,m}(u,v) - C_{n,m}(v,u)` from rows `x = P_m(u)`, `y = P_m(v)`.
    pub fn asymmetry_rows(&self, x: &[f64], y: &[f64]) -> f64 {
        let s = self.m + 1;
        let a = &self.antisym;
        let mut total = 0.0;
        for k in 0..s {
            for l in k + 1..s {
                total += a[k * s + l] * (x[k] * y[l] - x[l] * y[k]);
            }
        }
        total
    }

    pub fn asymmetry(&self, u: f64, v: f64) -> f64 {
        self.asymmetry_rows(&pmf_row(self.m, u), &pmf_row(self.m, v))
    }

    /// `d/du C_{n,m}` from rows `xd = P_{m-1}(u)` and `y = P_m(v)`.
    pub fn partial_u_rows(&self, xd: &[f64], y: &[f64]) -> f64 {
        self.m as f64 * bilinear(&self.du, self.m + 1, xd, y)
    }

    /// `d/dv C_{n,m}` from rows `x = P_m(u)` and `yd = P_{m-1}(v)`.
    pub fn partial_v_rows(&self, x: &[f64], yd: &[f64]) -> f64 {
        self.m as f64 * bilinear(&self.dv, self.m + 1, yd, x)
    }

    pub fn partial_u(&self, u: f64, v: f64) -> f64 {
        self.partial_u_rows(&pmf_row(self.m - 1, u), &pmf_row(self.m, v))
    }

    pub fn partial_v(&self, u: f64, v: f64) -> f64 {
        self.partial_v_rows(&pmf_row(self.m, u), &pmf_row(self.m - 1, v))
    }
}

pub fn bernstein_copula(ps: &PseudoSample, order: BernsteinOrder, u: f64, v: f64) -> f64 {
    EmpiricalBernstein::new(ps, order).cdf(u, v)
}

pub fn bernstein_partial_u(ps: &PseudoSample, order: BernsteinOrder, u: f64, v: f64) -> f64 {
    EmpiricalBernstein::new(ps, order).partial_u(u, v)
}

pub fn bernstein_partial_v(ps: &PseudoSample, order: BernsteinOrder, u: f64, v: f64) -> f64 {
    EmpiricalBernstein::new(ps, order).partial_v(u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::{empirical_copula, pseudo_observations};
    use crate::{rng::Stream, CopulaSpec};
    use proptest::prelude::*;
    use rand::Rng;

    fn naive_pmf(m: usize, k: usize, u: f64) -> f64 {
        let mut c = 1.0;
        for i in 0..k {
            c *= (m - i) as f64 / (i + 1) as f64;
        }
        c * u.powi(k as i32) * (1.0 - u).powi((m - k) as i32)
    }

    /// Triple loop over observations and lattice points.
    fn brute_copula(ps: &PseudoSample, m: usize, u: f64, v: f64) -> f64 {
        let mut total = 0.0;
        for (a, b) in ps.pairs() {
            for k in 0..=m {
                for l in 0..=m {
                    if a <= k as f64 / m as f64 && b <= l as f64 / m as f64 {
                        total += naive_pmf(m, k, u) * naive_pmf(m, l, v);
                    }
                }
            }
        }
        total / ps.len() as f64
    }

    fn random_ps(n: usize, seed: u64) -> PseudoSample {
        let mut rng = Stream::new(seed).rng();
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        pseudo_observations(&crate::Sample::from_columns(&x, &y).unwrap())
    }

    fn order(m: usize) -> BernsteinOrder {
        BernsteinOrder::new(m).unwrap()
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(bernstein_pmf(2, 1, 0.5), 0.5);
        assert_eq!(bernstein_pmf(7, 0, 0.0), 1.0);
        assert_eq!(bernstein_pmf(70, 0, 0.0), 1.0);
        assert_eq!(bernstein_pmf(70, 70, 1.0), 1.0);
        assert!((bernstein_pmf(3, 2, 0.4) - 0.288).abs() < 1e-15);
        // log-space branch against a direct product
        let direct = naive_pmf(40, 17, 0.37);
        assert!((bernstein_pmf(40, 17, 0.37) - direct).abs() < 1e-14);
    }

    #[test]
    fn order_validation_and_default() {
        assert!(matches!(BernsteinOrder::new(0), Err(Error::Domain(_))));
        assert_eq!(BernsteinOrder::default_for(100).get(), 10);
        assert_eq!(BernsteinOrder::default_for(101).get(), 11);
        assert_eq!(BernsteinOrder::default_for(50).get(), 8);
        assert_eq!(BernsteinOrder::default_for(1).get(), 1);
    }

    #[test]
    fn single_point_examples() {
        let ps = PseudoSample::from_pairs(&[(1.0, 1.0)]).unwrap();
        let m = order(2);
        assert!((bernstein_copula(&ps, m, 0.5, 0.5) - 0.0625).abs() < 1e-15);
        assert!((bernstein_partial_u(&ps, m, 0.5, 0.5) - 0.25).abs() < 1e-15);
        assert!((bernstein_partial_v(&ps, m, 0.5, 0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn brute_force_agreement() {
        let pts = [0.0, 0.1, 0.25, 0.5, 0.6, 0.75, 0.9, 0.99, 1.0];
        for n in 1..=10 {
            let ps = random_ps(n, n as u64);
            for m in 1..=5 {
                let b = EmpiricalBernstein::new(&ps, order(m));
                for &u in &pts {
                    for &v in &pts {
                        let want = brute_copula(&ps, m, u, v);
                        assert!((b.cdf(u, v) - want).abs() < 1e-12);
                        let d = brute_copula(&ps, m, u, v) - brute_copula(&ps, m, v, u);
                        assert!((b.asymmetry(u, v) - d).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn boundary_values() {
        let ps = random_ps(30, 4);
        for m in [1, 3, 8, 31, 45] {
            let b = EmpiricalBernstein::new(&ps, order(m));
            assert_eq!(b.cdf(1.0, 1.0), 1.0);
            for v in [0.0, 0.2, 0.77, 1.0] {
                assert_eq!(b.cdf(0.0, v), 0.0);
                assert_eq!(b.cdf(v, 0.0), 0.0);
                // C_{n,m}(1, v) is the Bernstein smoothing of the second margin
                let margin: f64 = (0..=m)
                    .map(|l| empirical_copula(&ps, 1.0, l as f64 / m as f64) * bernstein_pmf(m, l, v))
                    .sum();
                assert!((b.cdf(1.0, v) - margin).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = Stream::new(11).rng();
        let step = 1e-5;
        for trial in 0..40 {
            let ps = random_ps(20, 100 + trial);
            let b = EmpiricalBernstein::new(&ps, order(7));
            let u: f64 = rng.random_range(0.01..0.99);
            let v: f64 = rng.random_range(0.01..0.99);
            let fu = (b.cdf(u + step, v) - b.cdf(u - step, v)) / (2.0 * step);
            let fv = (b.cdf(u, v + step) - b.cdf(u, v - step)) / (2.0 * step);
            assert!((b.partial_u(u, v) - fu).abs() < 1e-6);
            assert!((b.partial_v(u, v) - fv).abs() < 1e-6);
        }
    }

    #[test]
    fn swap_equivariance_is_exact() {
        for seed in 0..10 {
            let ps = random_ps(25, seed);
            let sw = ps.swapped();
            for m in [2, 9, 13, 40] {
                let (a, b) = (EmpiricalBernstein::new(&ps, order(m)), EmpiricalBernstein::new(&sw, order(m)));
                for &(u, v) in &[(0.1, 0.8), (0.33, 0.34), (0.9, 0.05)] {
                    assert_eq!(b.cdf(u, v).to_bits(), a.cdf(v, u).to_bits());
                    assert_eq!(b.partial_u(u, v).to_bits(), a.partial_v(v, u).to_bits());
                    assert_eq!(b.asymmetry(u, v), -a.asymmetry(u, v));
                    assert_eq!(a.asymmetry(v, u), -a.asymmetry(u, v));
                }
            }
        }
    }

    /// Clayton tau = 0.25: the sup distance to the true copula shrinks with n.
    #[test]
    fn consistency_in_median() {
        let spec: CopulaSpec = "clayton:tau=0.25".parse().unwrap();
        let grid: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        let mut medians_c = Vec::new();
        let mut medians_d = Vec::new();
        for n in [50usize, 200, 800] {
            let m = BernsteinOrder::default_for(n);
            let mut sup_c = Vec::new();
            let mut sup_d = Vec::new();
            for rep in 0..50 {
                let s = spec.sample(n, Stream::new(9).path(&[n as u64, rep])).unwrap();
                let b = EmpiricalBernstein::new(&pseudo_observations(&s), m);
                let mut dc: f64 = 0.0;
                let mut dd: f64 = 0.0;
                for &u in &grid {
                    for &v in &grid {
                        dc = dc.max((b.cdf(u, v) - spec.cdf(u, v)).abs());
                        let h = 1e-6;
                        let true_du = (spec.cdf(u + h, v) - spec.cdf(u - h, v)) / (2.0 * h);
                        dd = dd.max((b.partial_u(u, v) - true_du).abs());
                    }
                }
                sup_c.push(dc);
                sup_d.push(dd);
            }
            let med = |mut x: Vec<f64>| {
                x.sort_by(f64::total_cmp);
                0.5 * (x[24] + x[25])
            };
            medians_c.push(med(sup_c));
            medians_d.push(med(sup_d));
        }
        assert!(medians_c.windows(2).all(|w| w[1] < w[0]), "{medians_c:?}");
        assert!(medians_d.windows(2).all(|w| w[1] < w[0]), "{medians_d:?}");
    }

    proptest! {
        #[test]
        fn pmf_rows_sum_to_one(m in 1usize..120, u in 0.0f64..=1.0) {
            let s: f64 = pmf_row(m, u).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn monotone_in_each_argument(seed in 0u64..1000, m in 1usize..16,
                                     a in 0.0f64..1.0, b in 0.0f64..1.0, v in 0.0f64..1.0) {
            let ps = random_ps(15, seed);
            let e = EmpiricalBernstein::new(&ps, order(m));
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(e.cdf(hi, v) >= e.cdf(lo, v) - 1e-12);
            prop_assert!(e.cdf(v, hi) >= e.cdf(v, lo) - 1e-12);
            prop_assert!(e.partial_u(lo, v) >= 0.0);
            prop_assert!(e.partial_v(v, lo) >= 0.0);
        }
    }
}
