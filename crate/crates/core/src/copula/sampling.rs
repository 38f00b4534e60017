//! Exact samplers.
//!
//! Elliptical families go through a 2x2 Cholesky factor, Clayton and Gumbel
//! through their Marshall-Olkin frailty representations (gamma and positive
//! stable), Frank through closed-form inversion of the conditional law.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Gamma, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{norm_cdf, CopulaFamily, CopulaSpec};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::sample::Sample;

/// Uniform on the open interval (0, 1).
#[inline]
fn open01(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Positive stable variate with Laplace transform `exp(-t^alpha)`,
/// `0 < alpha < 1` (Kanter's representation).
fn positive_stable(alpha: f64, rng: &mut ChaCha8Rng) -> f64 {
    let w = PI * open01(rng);
    let e: f64 = Exp1.sample(rng);
    let a = (alpha * w).sin() / w.sin().powf(1.0 / alpha);
    let b = ((1.0 - alpha) * w).sin() / e;
    a * b.powf((1.0 - alpha) / alpha)
}

fn log_add(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

enum BaseSampler {
    Independence,
    Gaussian { rho: f64, s: f64 },
    Student { rho: f64, s: f64, chi: ChiSquared<f64>, nu: f64, t: StudentsT },
    Clayton { theta: f64, frailty: Gamma<f64> },
    Gumbel { alpha: f64 },
    Frank { theta: f64 },
}

impl BaseSampler {
    fn new(spec: &CopulaSpec) -> Self {
        let th = spec.theta;
        match spec.family {
            CopulaFamily::Independence => BaseSampler::Independence,
            CopulaFamily::Gaussian => BaseSampler::Gaussian {
                rho: th,
                s: (1.0 - th * th).sqrt(),
            },
            CopulaFamily::Student { nu } => BaseSampler::Student {
                rho: th,
                s: (1.0 - th * th).sqrt(),
                chi: ChiSquared::new(nu).expect("validated nu"),
                nu,
                t: StudentsT::new(0.0, 1.0, nu).expect("validated nu"),
            },
            CopulaFamily::Clayton => BaseSampler::Clayton {
                theta: th,
                frailty: Gamma::new(1.0 / th, 1.0).expect("theta > 0"),
            },
            CopulaFamily::Gumbel if th == 1.0 => BaseSampler::Independence,
            CopulaFamily::Gumbel => BaseSampler::Gumbel { alpha: 1.0 / th },
            CopulaFamily::Frank => BaseSampler::Frank { theta: th },
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        match self {
            BaseSampler::Independence => (open01(rng), open01(rng)),
            BaseSampler::Gaussian { rho, s } => {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                (norm_cdf(z1), norm_cdf(rho * z1 + s * z2))
            }
            BaseSampler::Student { rho, s, chi, nu, t } => {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                let w = (chi.sample(rng) / nu).sqrt();
                (t.cdf(z1 / w), t.cdf((rho * z1 + s * z2) / w))
            }
            BaseSampler::Clayton { theta, frailty } => {
                let v = frailty.sample(rng);
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                let psi = |t: f64| (1.0 + t).powf(-1.0 / theta);
                (psi(e1 / v), psi(e2 / v))
            }
            BaseSampler::Gumbel { alpha } => {
                let s = positive_stable(*alpha, rng);
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                let psi = |t: f64| (-t.powf(*alpha)).exp();
                (psi(e1 / s), psi(e2 / s))
            }
            BaseSampler::Frank { theta } => {
                // v = ln[(w + (1-w) e^{-theta u}) / ((1-w) e^{-theta u} + w e^{-theta})] / theta,
                // in log space so that large |theta| cannot overflow
                let u = open01(rng);
                let w = open01(rng);
                let a = (1.0 - w).ln() - theta * u;
                let num = log_add(w.ln(), a);
                let den = log_add(a, w.ln() - theta);
                (u, ((num - den) / theta).clamp(0.0, 1.0))
            }
        }
    }
}

impl CopulaSpec {
    /// Draws `n` i.i.d. pairs from the copula. Deterministic in `stream`.
    pub fn sample(&self, n: usize, stream: Stream) -> Result<Sample> {
        if n == 0 {
            return Err(Error::domain("sample size must be positive"));
        }
        let base = BaseSampler::new(self);
        let mut rng = stream.rng();
        let mut pairs = Vec::with_capacity(n);
        for _ in 0..n {
            let (x1, v) = base.draw(&mut rng);
            let pair = match self.khoudraji_delta {
                None => (x1, v),
                Some(d) => {
                    let x2 = open01(&mut rng);
                    if d == 0.0 {
                        (x1, v)
                    } else if d == 1.0 {
                        (x2, v)
                    } else {
                        (x1.powf(1.0 / (1.0 - d)).max(x2.powf(1.0 / d)), v)
                    }
                }
            };
            pairs.push(pair);
        }
        Sample::new(pairs)
    }
}

/// Draws `n` pairs from `spec` using the stream keyed by `seed`.
pub fn sample_copula(spec: &CopulaSpec, n: usize, seed: u64) -> Result<Sample> {
    spec.sample(n, Stream::new(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// O(n^2) Kendall tau.
    fn kendall_tau(s: &Sample) -> f64 {
        let p = s.pairs();
        let mut acc = 0i64;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let c = (p[i].0 - p[j].0) * (p[i].1 - p[j].1);
                acc += if c > 0.0 { 1 } else if c < 0.0 { -1 } else { 0 };
            }
        }
        let n = p.len() as f64;
        acc as f64 / (n * (n - 1.0) / 2.0)
    }

    fn ecdf(s: &Sample, u: f64, v: f64) -> f64 {
        s.pairs().iter().filter(|p| p.0 <= u && p.1 <= v).count() as f64 / s.len() as f64
    }

    #[test]
    fn zero_size_rejected() {
        let spec = CopulaSpec::independence();
        assert!(matches!(sample_copula(&spec, 0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn reproducible() {
        let spec: CopulaSpec = "gumbel:tau=0.7:delta=0.5".parse().unwrap();
        let a = sample_copula(&spec, 500, 99).unwrap();
        let b = sample_copula(&spec, 500, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_copula(&spec, 500, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn clayton_kendall_tau() {
        let spec = CopulaSpec::new(CopulaFamily::Clayton, 2.0, Some(0.0)).unwrap();
        let s = sample_copula(&spec, 10_000, 2024).unwrap();
        let tau = kendall_tau(&s);
        assert!((tau - 0.5).abs() < 0.03, "{tau}");
    }

    #[test]
    fn every_family_hits_its_tau() {
        for fam in [
            CopulaFamily::Gaussian,
            CopulaFamily::Gumbel,
            CopulaFamily::Frank,
            CopulaFamily::Student { nu: 4.0 },
        ] {
            for tau in [0.25, 0.7, 0.9] {
                let spec = CopulaSpec::from_tau(fam, tau, None).unwrap();
                let s = spec.sample(4000, Stream::new(5)).unwrap();
                let got = kendall_tau(&s);
                assert!((got - tau).abs() < 0.03, "{}: {got} vs {tau}", spec);
            }
        }
    }

    #[test]
    fn extreme_dependence_stays_in_the_unit_square() {
        let mut specs: Vec<CopulaSpec> = [
            CopulaFamily::Gaussian,
            CopulaFamily::Clayton,
            CopulaFamily::Gumbel,
            CopulaFamily::Frank,
            CopulaFamily::Student { nu: 4.0 },
        ]
        .iter()
        .map(|&f| CopulaSpec::from_tau(f, 0.95, Some(0.5)).unwrap())
        .collect();
        specs.push(CopulaSpec::from_tau(CopulaFamily::Frank, -0.9, None).unwrap());
        for spec in specs {
            let s = spec.sample(20_000, Stream::new(3)).unwrap();
            assert!(s.pairs().iter().all(|&(a, b)| (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b)), "{spec}");
        }
        let neg = CopulaSpec::from_tau(CopulaFamily::Frank, -0.5, None).unwrap();
        let got = kendall_tau(&neg.sample(4000, Stream::new(8)).unwrap());
        assert!((got + 0.5).abs() < 0.03, "{got}");
    }

    #[test]
    fn khoudraji_clayton_cdf_point() {
        let spec = CopulaSpec::new(CopulaFamily::Clayton, 2.0, Some(0.5)).unwrap();
        let s = sample_copula(&spec, 10_000, 77).unwrap();
        let got = ecdf(&s, 0.25, 0.25);
        assert!((got - 0.114_7).abs() < 0.01, "{got}");
    }

    #[test]
    fn khoudraji_limits_of_sampler() {
        let base = CopulaSpec::from_tau(CopulaFamily::Frank, 0.5, None).unwrap();
        let zero = CopulaSpec { khoudraji_delta: Some(0.0), ..base };
        // delta = 0 consumes one extra uniform per pair, so compare laws not values.
        let s = zero.sample(20_000, Stream::new(3)).unwrap();
        assert!((kendall_tau(&s) - 0.5).abs() < 0.03);
        let one = CopulaSpec { khoudraji_delta: Some(1.0), ..base };
        let s = one.sample(20_000, Stream::new(3)).unwrap();
        assert!(kendall_tau(&s).abs() < 0.03);
    }

    /// Empirical CDF of 1e5 draws within 3 Kolmogorov-Smirnov bands of the
    /// copula CDF on a 10x10 grid.
    #[test]
    fn empirical_cdf_matches_model() {
        let n = 100_000usize;
        // 3 * 1.36 / sqrt(n): three times the 95% KS half-width.
        let band = 3.0 * 1.36 / (n as f64).sqrt();
        for tok in [
            "gaussian:tau=0.5",
            "student:tau=0.5:nu=4",
            "clayton:tau=0.5:delta=0.5",
            "gumbel:tau=0.7:delta=0.75",
            "frank:tau=0.7:delta=0.25",
        ] {
            let spec: CopulaSpec = tok.parse().unwrap();
            let s = spec.sample(n, Stream::new(8)).unwrap();
            // sort by u once so that each grid row is a prefix
            let mut pts = s.pairs().to_vec();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            for i in 1..=10 {
                let u = i as f64 / 10.0;
                let end = pts.partition_point(|p| p.0 <= u);
                let mut vs: Vec<f64> = pts[..end].iter().map(|p| p.1).collect();
                vs.sort_by(f64::total_cmp);
                for j in 1..=10 {
                    let v = j as f64 / 10.0;
                    let emp = vs.partition_point(|&x| x <= v) as f64 / n as f64;
                    let want = spec.cdf(u, v);
                    assert!((emp - want).abs() < band, "{tok} ({u},{v}): {emp} vs {want}");
                }
            }
        }
    }
}
