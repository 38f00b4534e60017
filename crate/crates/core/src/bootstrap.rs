//! Multiplier bootstrap replicates of the symmetrized process and p-values.
//!
//! For a draw `xi_1..xi_n ~ Exp(1)` with centered, scaled weights
//! `c_i = (xi_i - mean(xi)) / sqrt(n)`, the smoothed multiplier process is
//! `Bbar(u, v) = sum_i c_i sum_{k,l} 1(U_i <= k/m, V_i <= l/m) P_k(u) P_l(v)`,
//! the replicate process is
//! `B(u, v) = Bbar(u, v) - dC/du(u, v) Bbar(u, 1) - dC/dv(u, v) Bbar(1, v)`,
//! and its symmetrized version is `S(u, v) = B(u, v) - B(v, u)`.

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::{bilinear, pmf_row, BernsteinOrder, EmpiricalBernstein};
use crate::empirical::{pseudo_observations, OrthantSweep, PseudoSample};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::sample::Sample;
use crate::stats::{
    bernstein_statistics, empirical_statistics, grid_functionals, grid_orthant_sums, GridSpec,
    StatisticTriple,
};

/// Smallest sample size accepted by [`run_test`].
pub const MIN_SAMPLE_SIZE: usize = 10;
/// Below this size a warning is attached to the result.
pub const SMALL_SAMPLE_SIZE: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierDraw {
    pub xi: Vec<f64>,
    pub xi_bar: f64,
}

impl MultiplierDraw {
    pub fn new(xi: Vec<f64>) -> Result<Self> {
        if xi.len() < 2 {
            return Err(Error::domain(format!("multiplier draw needs n >= 2, got {}", xi.len())));
        }
        let xi_bar = xi.iter().sum::<f64>() / xi.len() as f64;
        Ok(Self { xi, xi_bar })
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    /// `(xi_i - xi_bar) / sqrt(n)`.
    pub fn centered(&self) -> Vec<f64> {
        let s = (self.xi.len() as f64).sqrt();
        self.xi.iter().map(|x| (x - self.xi_bar) / s).collect()
    }
}

/// `n` i.i.d. Exp(1) multipliers from `stream`.
pub fn draw_multipliers(n: usize, stream: Stream) -> Result<MultiplierDraw> {
    if n < 2 {
        return Err(Error::domain(format!("multiplier draw needs n >= 2, got {n}")));
    }
    let mut rng = stream.rng();
    let xi = (0..n)
        .map(|_| loop {
            let x: f64 = Exp1.sample(&mut rng);
            if x > 0.0 {
                break x;
            }
        })
        .collect();
    MultiplierDraw::new(xi)
}

/// Weighted lattice `W[k][l] = sum_i c_i 1(U_i <= k/m, V_i <= l/m)`.
fn weighted_lattice(index: &[(usize, usize)], c: &[f64], m: usize) -> Vec<f64> {
    let s = m + 1;
    let mut w = vec![0.0; s * s];
    for (&(ku, kv), &ci) in index.iter().zip(c) {
        w[ku * s + kv] += ci;
    }
    for k in 0..s {
        for l in 1..s {
            w[k * s + l] += w[k * s + l - 1];
        }
    }
    for k in 1..s {
        for l in 0..s {
            w[k * s + l] += w[(k - 1) * s + l];
        }
    }
    w
}

fn check_draw(ps: &PseudoSample, draw: &MultiplierDraw) -> Result<()> {
    if draw.len() != ps.len() {
        return Err(Error::input(format!(
            "multiplier draw has {} entries for a sample of size {}",
            draw.len(),
            ps.len()
        )));
    }
    Ok(())
}

/// `Bbar(u, v)` for one draw.
pub fn bbar_process(ps: &PseudoSample, order: BernsteinOrder, draw: &MultiplierDraw, u: f64, v: f64) -> Result<f64> {
    check_draw(ps, draw)?;
    let m = order.get();
    let w = weighted_lattice(&ps.lattice_index(m), &draw.centered(), m);
    Ok(bilinear(&w, m + 1, &pmf_row(m, u), &pmf_row(m, v)))
}

fn require_interior(u: f64, v: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "replicate process is evaluated on the open unit square, got ({u}, {v})"
        )))
    }
}

/// `S(u, v) = B(u, v) - B(v, u)` for one draw; `(u, v)` must be interior.
pub fn replicate_process(
    ps: &PseudoSample,
    order: BernsteinOrder,
    draw: &MultiplierDraw,
    u: f64,
    v: f64,
) -> Result<f64> {
    check_draw(ps, draw)?;
    require_interior(u, v)?;
    let m = order.get();
    let eb = EmpiricalBernstein::new(ps, order);
    let w = weighted_lattice(&ps.lattice_index(m), &draw.centered(), m);
    let b = |a: f64, c: f64| {
        let (x, y) = (pmf_row(m, a), pmf_row(m, c));
        let bbar = bilinear(&w, m + 1, &x, &y);
        let bbar_u1 = bilinear(&w, m + 1, &x, &pmf_row(m, 1.0));
        let bbar_1v = bilinear(&w, m + 1, &pmf_row(m, 1.0), &y);
        bbar - (eb.partial_u(a, c) * bbar_u1 + eb.partial_v(a, c) * bbar_1v)
    };
    Ok(b(u, v) - b(v, u))
}

/// Replicate functionals `(r_h, s_h, t_h)`: replicates of `nR`, `nS` and
/// `sqrt(n) T`.
pub trait Replicator: Sync {
    fn sample_size(&self) -> usize;
    fn statistics(&self) -> StatisticTriple;
    /// Replicate for centered, scaled multipliers `c`.
    fn replicate(&self, c: &[f64]) -> [f64; 3];
}

/// Clamps a pseudo-observation into `[1/(2n), 1 - 1/(2n)]`.
fn clamp_interior(x: f64, n: usize) -> f64 {
    let eps = 0.5 / n as f64;
    x.clamp(eps, 1.0 - eps)
}

/// Derivative plug-ins and process values at one evaluation pair
/// `(a, b)` and its mirror `(b, a)`.
#[derive(Debug, Clone, Copy)]
struct PointDerivatives {
    du_ab: f64,
    dv_ab: f64,
    du_ba: f64,
    dv_ba: f64,
}

/// Bernstein replicates, with every quantity that does not depend on the
/// multipliers computed once.
pub struct BernsteinReplicator {
    n: usize,
    m: usize,
    nn: usize,
    stats: StatisticTriple,
    index: Vec<(usize, usize)>,
    grid_rows: Vec<f64>,
    grid_du: Vec<f64>,
    grid_dv: Vec<f64>,
    obs_a: Vec<f64>,
    obs_b: Vec<f64>,
    obs_d: Vec<PointDerivatives>,
}

impl BernsteinReplicator {
    pub fn new(ps: &PseudoSample, order: BernsteinOrder, grid: GridSpec) -> Self {
        let n = ps.len();
        let m = order.get();
        let s = m + 1;
        let eb = EmpiricalBernstein::new(ps, order);
        let nodes = grid.nodes();
        let nn = nodes.len();
        let rows: Vec<Vec<f64>> = nodes.iter().map(|&u| pmf_row(m, u)).collect();
        let drows: Vec<Vec<f64>> = nodes.iter().map(|&u| pmf_row(m - 1, u)).collect();
        let mut grid_du = vec![0.0; nn * nn];
        let mut grid_dv = vec![0.0; nn * nn];
        for i in 0..nn {
            for j in 0..nn {
                grid_du[i * nn + j] = eb.partial_u_rows(&drows[i], &rows[j]);
                grid_dv[i * nn + j] = eb.partial_v_rows(&rows[i], &drows[j]);
            }
        }
        let mut obs_a = Vec::with_capacity(n * s);
        let mut obs_b = Vec::with_capacity(n * s);
        let mut obs_d = Vec::with_capacity(n);
        for (u, v) in ps.pairs() {
            let (a, b) = (clamp_interior(u, n), clamp_interior(v, n));
            let (xa, xb) = (pmf_row(m, a), pmf_row(m, b));
            let (da, db) = (pmf_row(m - 1, a), pmf_row(m - 1, b));
            obs_d.push(PointDerivatives {
                du_ab: eb.partial_u_rows(&da, &xb),
                dv_ab: eb.partial_v_rows(&xa, &db),
                du_ba: eb.partial_u_rows(&db, &xa),
                dv_ba: eb.partial_v_rows(&xb, &da),
            });
            obs_a.extend_from_slice(&xa);
            obs_b.extend_from_slice(&xb);
        }
        Self {
            n,
            m,
            nn,
            stats: bernstein_statistics(ps, order, grid),
            index: ps.lattice_index(m),
            grid_rows: rows.concat(),
            grid_du,
            grid_dv,
            obs_a,
            obs_b,
            obs_d,
        }
    }
}

/// `out[i][l] = sum_k rows[i][k] w[k][l]` for `rows` of width `s`.
fn rows_times(rows: &[f64], w: &[f64], s: usize) -> Vec<f64> {
    let count = rows.len() / s;
    let mut out = vec![0.0; count * s];
    for i in 0..count {
        let o = &mut out[i * s..(i + 1) * s];
        for k in 0..s {
            let x = rows[i * s + k];
            if x == 0.0 {
                continue;
            }
            for (ol, wl) in o.iter_mut().zip(&w[k * s..(k + 1) * s]) {
                *ol += x * wl;
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Replicator for BernsteinReplicator {
    fn sample_size(&self) -> usize {
        self.n
    }

    fn statistics(&self) -> StatisticTriple {
        self.stats
    }

    fn replicate(&self, c: &[f64]) -> [f64; 3] {
        let (m, s, nn) = (self.m, self.m + 1, self.nn);
        let w = weighted_lattice(&self.index, c, m);
        let top = &w[m * s..];

        // grid: X = P W, Bbar = X P^T, Bbar(u_i, 1) = X[i][m], Bbar(1, u_j) = W[m] . P[j]
        let x = rows_times(&self.grid_rows, &w, s);
        let row = |i: usize| &self.grid_rows[i * s..(i + 1) * s];
        let u1: Vec<f64> = (0..nn).map(|i| x[i * s + m]).collect();
        let one_v: Vec<f64> = (0..nn).map(|j| dot(top, row(j))).collect();
        let b = |i: usize, j: usize| {
            let bbar = dot(&x[i * s..(i + 1) * s], row(j));
            let k = i * nn + j;
            bbar - (self.grid_du[k] * u1[i] + self.grid_dv[k] * one_v[j])
        };
        let (r, t) = grid_functionals(nn, |i, j| b(i, j) - b(j, i));

        // observations
        let za = rows_times(&self.obs_a, &w, s);
        let zb = rows_times(&self.obs_b, &w, s);
        let mut sq = 0.0;
        for (i, d) in self.obs_d.iter().enumerate() {
            let (ra, rb) = (&self.obs_a[i * s..(i + 1) * s], &self.obs_b[i * s..(i + 1) * s]);
            let (zai, zbi) = (&za[i * s..(i + 1) * s], &zb[i * s..(i + 1) * s]);
            let b_ab = dot(zai, rb) - (d.du_ab * zai[m] + d.dv_ab * dot(top, rb));
            let b_ba = dot(zbi, ra) - (d.du_ba * zbi[m] + d.dv_ba * dot(top, ra));
            let diff = b_ab - b_ba;
            sq += diff * diff;
        }
        [r, sq / self.n as f64, t]
    }
}

/// Central-difference derivative estimates of the empirical copula with
/// bandwidth `h = n^-1/2`, arguments clamped to `[h, 1 - h]`.
struct EmpiricalDerivatives<'a> {
    ps: &'a PseudoSample,
    h: f64,
}

impl EmpiricalDerivatives<'_> {
    fn du(&self, u: f64, v: f64) -> f64 {
        let u = u.clamp(self.h, 1.0 - self.h);
        let up = self.ps.count_below(u + self.h, v) as f64;
        let lo = self.ps.count_below(u - self.h, v) as f64;
        (up - lo) / (2.0 * self.h * self.ps.len() as f64)
    }

    fn dv(&self, u: f64, v: f64) -> f64 {
        let v = v.clamp(self.h, 1.0 - self.h);
        let up = self.ps.count_below(u, v + self.h) as f64;
        let lo = self.ps.count_below(u, v - self.h) as f64;
        (up - lo) / (2.0 * self.h * self.ps.len() as f64)
    }
}

/// Empirical-copula replicates with finite-difference derivative plug-ins.
pub struct EmpiricalReplicator {
    n: usize,
    nn: usize,
    stats: StatisticTriple,
    ps: PseudoSample,
    nodes: Vec<f64>,
    node_u: Vec<usize>,
    node_v: Vec<usize>,
    grid_du: Vec<f64>,
    grid_dv: Vec<f64>,
    sweep: OrthantSweep,
    obs_d: Vec<PointDerivatives>,
}

impl EmpiricalReplicator {
    pub fn new(ps: &PseudoSample, grid: GridSpec) -> Self {
        let n = ps.len();
        let nodes = grid.nodes();
        let nn = nodes.len();
        let fd = EmpiricalDerivatives {
            ps,
            h: 1.0 / (n as f64).sqrt(),
        };
        let mut grid_du = vec![0.0; nn * nn];
        let mut grid_dv = vec![0.0; nn * nn];
        for i in 0..nn {
            for j in 0..nn {
                grid_du[i * nn + j] = fd.du(nodes[i], nodes[j]);
                grid_dv[i * nn + j] = fd.dv(nodes[i], nodes[j]);
            }
        }
        let points: Vec<(f64, f64)> = ps.pairs().collect();
        let mut queries = Vec::with_capacity(6 * n);
        let mut obs_d = Vec::with_capacity(n);
        for &(u, v) in &points {
            let (a, b) = (clamp_interior(u, n), clamp_interior(v, n));
            queries.extend_from_slice(&[(a, b), (b, a), (a, 1.0), (1.0, b), (b, 1.0), (1.0, a)]);
            obs_d.push(PointDerivatives {
                du_ab: fd.du(a, b),
                dv_ab: fd.dv(a, b),
                du_ba: fd.du(b, a),
                dv_ba: fd.dv(b, a),
            });
        }
        let node_u = ps.u().iter().map(|&x| crate::stats::node_index(&nodes, x)).collect();
        let node_v = ps.v().iter().map(|&x| crate::stats::node_index(&nodes, x)).collect();
        Self {
            n,
            nn,
            stats: empirical_statistics(ps, grid),
            ps: ps.clone(),
            sweep: OrthantSweep::new(&points, &queries),
            nodes,
            node_u,
            node_v,
            grid_du,
            grid_dv,
            obs_d,
        }
    }
}

impl Replicator for EmpiricalReplicator {
    fn sample_size(&self) -> usize {
        self.n
    }

    fn statistics(&self) -> StatisticTriple {
        self.stats
    }

    fn replicate(&self, c: &[f64]) -> [f64; 3] {
        let nn = self.nn;
        let g = grid_orthant_sums(&self.ps, &self.nodes, c);
        let mut u1 = vec![0.0; nn + 1];
        let mut one_v = vec![0.0; nn + 1];
        for ((&a, &b), &ci) in self.node_u.iter().zip(&self.node_v).zip(c) {
            u1[a] += ci;
            one_v[b] += ci;
        }
        for i in 1..nn {
            u1[i] += u1[i - 1];
            one_v[i] += one_v[i - 1];
        }
        let b = |i: usize, j: usize| {
            let k = i * nn + j;
            g[k] - (self.grid_du[k] * u1[i] + self.grid_dv[k] * one_v[j])
        };
        let (r, t) = grid_functionals(nn, |i, j| b(i, j) - b(j, i));

        let mut q = vec![0.0; self.sweep.num_queries()];
        self.sweep.apply(c, &mut q);
        let mut sq = 0.0;
        for (i, d) in self.obs_d.iter().enumerate() {
            let v = &q[6 * i..6 * i + 6];
            let b_ab = v[0] - (d.du_ab * v[2] + d.dv_ab * v[3]);
            let b_ba = v[1] - (d.du_ba * v[4] + d.dv_ba * v[5]);
            let diff = b_ab - b_ba;
            sq += diff * diff;
        }
        [r, sq / self.n as f64, t]
    }
}

/// Replicate statistics of the Bernstein process for one draw.
pub fn replicate_statistics(
    ps: &PseudoSample,
    order: BernsteinOrder,
    grid: GridSpec,
    draw: &MultiplierDraw,
) -> Result<(f64, f64, f64)> {
    check_draw(ps, draw)?;
    let [r, s, t] = BernsteinReplicator::new(ps, order, grid).replicate(&draw.centered());
    Ok((r, s, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PValueRule {
    /// `H^-1 sum_h 1(replicate_h >= statistic)`.
    #[default]
    Plain,
    /// `(1 + sum_h 1(replicate_h >= statistic)) / (H + 1)`.
    PlusOne,
}

impl PValueRule {
    pub fn p_value(self, statistic: f64, replicates: impl Iterator<Item = f64>) -> f64 {
        let mut h = 0usize;
        let mut k = 0usize;
        for r in replicates {
            h += 1;
            if r >= statistic {
                k += 1;
            }
        }
        match self {
            PValueRule::Plain => k as f64 / h as f64,
            PValueRule::PlusOne => (k + 1) as f64 / (h + 1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSet {
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
}

impl ReplicateSet {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValues {
    pub r: f64,
    pub s: f64,
    pub t: f64,
}

impl PValues {
    pub fn as_array(&self) -> [f64; 3] {
        [self.r, self.s, self.t]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bernstein,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: Method,
    pub n: usize,
    pub m: Option<usize>,
    pub grid: usize,
    pub h: usize,
    pub seed: u64,
    pub statistics: StatisticTriple,
    pub p_values: PValues,
    pub replicates: ReplicateSet,
    pub tie_fraction: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOptions {
    pub grid: GridSpec,
    pub replicates: usize,
    pub seed: u64,
    pub rule: PValueRule,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            replicates: 200,
            seed: 0,
            rule: PValueRule::Plain,
        }
    }
}

fn prepare(sample: &Sample, replicates: usize) -> Result<(PseudoSample, Vec<String>)> {
    let n = sample.len();
    if n < MIN_SAMPLE_SIZE {
        return Err(Error::input(format!(
            "the test needs at least {MIN_SAMPLE_SIZE} observations, got {n}"
        )));
    }
    if replicates == 0 {
        return Err(Error::domain("number of bootstrap replicates H must be at least 1"));
    }
    let p = sample.pairs();
    if p.iter().all(|q| q.0 == p[0].0) {
        return Err(Error::input("degenerate sample: all x values are equal"));
    }
    if p.iter().all(|q| q.1 == p[0].1) {
        return Err(Error::input("degenerate sample: all y values are equal"));
    }
    let mut warnings = Vec::new();
    if n < SMALL_SAMPLE_SIZE {
        warnings.push(format!("small sample: n = {n} < {SMALL_SAMPLE_SIZE}"));
    }
    let ps = pseudo_observations(sample);
    if ps.tie_fraction() > 0.0 {
        warnings.push(format!(
            "ties: {:.1}% of observations share a value, resolved by mid-ranks",
            100.0 * ps.tie_fraction()
        ));
    }
    Ok((ps, warnings))
}

/// Runs `H` replicates on independent substreams of `seed` and computes the
/// p-values. The result does not depend on how rayon schedules the work.
pub fn run_replicates<R: Replicator>(rep: &R, replicates: usize, seed: u64, rule: PValueRule) -> (ReplicateSet, PValues) {
    let n = rep.sample_size();
    let master = Stream::new(seed);
    let triples: Vec<[f64; 3]> = (0..replicates as u64)
        .into_par_iter()
        .map(|h| {
            let draw = draw_multipliers(n, master.substream(h)).expect("n >= 2");
            rep.replicate(&draw.centered())
        })
        .collect();
    let set = ReplicateSet {
        r: triples.iter().map(|x| x[0]).collect(),
        s: triples.iter().map(|x| x[1]).collect(),
        t: triples.iter().map(|x| x[2]).collect(),
    };
    let st = rep.statistics();
    let p = PValues {
        r: rule.p_value(st.scaled_r, set.r.iter().copied()),
        s: rule.p_value(st.scaled_s, set.s.iter().copied()),
        t: rule.p_value(st.scaled_t, set.t.iter().copied()),
    };
    (set, p)
}

/// Bernstein symmetry test. `order` defaults to `ceil(sqrt(n))`.
pub fn run_test(sample: &Sample, order: Option<BernsteinOrder>, opts: &TestOptions) -> Result<TestResult> {
    let (ps, mut warnings) = prepare(sample, opts.replicates)?;
    let n = ps.len();
    let order = order.unwrap_or_else(|| BernsteinOrder::default_for(n));
    if order.get() > n {
        warnings.push(format!("bernstein order m = {} exceeds n = {n}", order.get()));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let rep = BernsteinReplicator::new(&ps, order, opts.grid);
    let (replicates, p_values) = run_replicates(&rep, opts.replicates, opts.seed, opts.rule);
    Ok(TestResult {
        method: Method::Bernstein,
        n,
        m: Some(order.get()),
        grid: opts.grid.resolution(),
        h: opts.replicates,
        seed: opts.seed,
        statistics: rep.statistics(),
        p_values,
        replicates,
        tie_fraction: ps.tie_fraction(),
        warnings,
    })
}

/// Empirical-copula baseline test.
pub fn run_test_empirical(sample: &Sample, opts: &TestOptions) -> Result<TestResult> {
    let (ps, warnings) = prepare(sample, opts.replicates)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let rep = EmpiricalReplicator::new(&ps, opts.grid);
    let (replicates, p_values) = run_replicates(&rep, opts.replicates, opts.seed, opts.rule);
    Ok(TestResult {
        method: Method::Empirical,
        n: ps.len(),
        m: None,
        grid: opts.grid.resolution(),
        h: opts.replicates,
        seed: opts.seed,
        statistics: rep.statistics(),
        p_values,
        replicates,
        tie_fraction: ps.tie_fraction(),
        warnings,
    })
}
