//! Parametric bivariate copulas: distribution functions, Kendall-tau
//! parameterization, exact samplers and Khoudraji asymmetrization.

mod bivariate;
mod sampling;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

pub use bivariate::{bivariate_normal_cdf, bvnd, bvtl, norm_cdf};
pub use sampling::sample_copula;

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;

/// Degrees of freedom of the Student family when a token does not name one.
pub const DEFAULT_STUDENT_NU: f64 = 4.0;

const FRANK_THETA_MIN: f64 = 1e-6;
const FRANK_THETA_MAX: f64 = 100.0;
const FRANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CopulaFamily {
    Independence,
    Gaussian,
    Clayton,
    Gumbel,
    Frank,
    Student { nu: f64 },
}

impl CopulaFamily {
    pub fn name(&self) -> &'static str {
        match self {
            CopulaFamily::Independence => "independence",
            CopulaFamily::Gaussian => "gaussian",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Gumbel => "gumbel",
            CopulaFamily::Frank => "frank",
            CopulaFamily::Student { .. } => "student",
        }
    }

    /// Checks that `theta` lies in the family's parameter domain.
    pub fn validate_theta(&self, theta: f64) -> Result<()> {
        let ok = theta.is_finite()
            && match self {
                CopulaFamily::Independence => true,
                CopulaFamily::Gaussian | CopulaFamily::Student { .. } => theta > -1.0 && theta < 1.0,
                CopulaFamily::Clayton => theta > 0.0,
                CopulaFamily::Gumbel => theta >= 1.0,
                CopulaFamily::Frank => theta != 0.0,
            };
        if let CopulaFamily::Student { nu } = self {
            if !(nu.is_finite() && *nu > 0.0) {
                return Err(Error::domain(format!("student degrees of freedom must be > 0, got {nu}")));
            }
        }
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "parameter {theta} outside the {} domain ({})",
                self.name(),
                self.theta_domain()
            )))
        }
    }

    fn theta_domain(&self) -> &'static str {
        match self {
            CopulaFamily::Independence => "any",
            CopulaFamily::Gaussian | CopulaFamily::Student { .. } => "-1 < rho < 1",
            CopulaFamily::Clayton => "theta > 0",
            CopulaFamily::Gumbel => "theta >= 1",
            CopulaFamily::Frank => "theta != 0",
        }
    }

    /// Kendall's tau of the family at parameter `theta`.
    pub fn param_to_tau(&self, theta: f64) -> f64 {
        match self {
            CopulaFamily::Independence => 0.0,
            CopulaFamily::Gaussian | CopulaFamily::Student { .. } => 2.0 / PI * theta.asin(),
            CopulaFamily::Clayton => theta / (theta + 2.0),
            CopulaFamily::Gumbel => 1.0 - 1.0 / theta,
            CopulaFamily::Frank => frank_tau(theta),
        }
    }

    /// Inverts [`CopulaFamily::param_to_tau`].
    pub fn tau_to_param(&self, tau: f64) -> Result<f64> {
        let range_err = |range: &str| {
            Error::domain(format!(
                "kendall tau {tau} not attainable by the {} family (requires {range})",
                self.name()
            ))
        };
        if !tau.is_finite() {
            return Err(range_err("a finite value"));
        }
        match self {
            CopulaFamily::Independence => {
                if tau == 0.0 {
                    Ok(0.0)
                } else {
                    Err(range_err("tau = 0"))
                }
            }
            CopulaFamily::Gaussian | CopulaFamily::Student { .. } => {
                if tau > -1.0 && tau < 1.0 {
                    Ok((PI * tau / 2.0).sin())
                } else {
                    Err(range_err("-1 < tau < 1"))
                }
            }
            CopulaFamily::Clayton => {
                if tau > 0.0 && tau < 1.0 {
                    Ok(2.0 * tau / (1.0 - tau))
                } else {
                    Err(range_err("0 < tau < 1"))
                }
            }
            CopulaFamily::Gumbel => {
                if tau > 0.0 && tau < 1.0 {
                    Ok(1.0 / (1.0 - tau))
                } else {
                    Err(range_err("0 < tau < 1"))
                }
            }
            CopulaFamily::Frank => {
                let lo_tau = frank_tau(FRANK_THETA_MIN);
                let hi_tau = frank_tau(FRANK_THETA_MAX);
                let target = tau.abs();
                if tau == 0.0 || target < lo_tau || target > hi_tau {
                    return Err(range_err(&format!("{lo_tau:.3e} <= |tau| <= {hi_tau:.6}")));
                }
                let (mut lo, mut hi) = (FRANK_THETA_MIN, FRANK_THETA_MAX);
                while hi - lo > FRANK_TOL {
                    let mid = 0.5 * (lo + hi);
                    if frank_tau(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let theta = 0.5 * (lo + hi);
                Ok(if tau < 0.0 { -theta } else { theta })
            }
        }
    }

    fn is_symmetric_family(&self) -> bool {
        true
    }
}

/// First Debye function `D1(x) = x^-1 * int_0^x t / (e^t - 1) dt` for `x > 0`.
pub fn debye1(x: f64) -> f64 {
    let f = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    gauss_legendre(f, 0.0, x, 8) / x
}

fn frank_tau(theta: f64) -> f64 {
    let a = theta.abs();
    let tau = 1.0 - 4.0 / a * (1.0 - debye1(a));
    if theta < 0.0 {
        -tau
    } else {
        tau
    }
}

/// A parametric copula with an optional Khoudraji asymmetrization
/// `K(u, v) = u^delta * C(u^(1 - delta), v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    pub family: CopulaFamily,
    pub theta: f64,
    pub khoudraji_delta: Option<f64>,
    /// Kendall's tau of the base copula when the spec was built from one.
    pub tau: Option<f64>,
}

impl CopulaSpec {
    pub fn new(family: CopulaFamily, theta: f64, khoudraji_delta: Option<f64>) -> Result<Self> {
        family.validate_theta(theta)?;
        if let Some(d) = khoudraji_delta {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::domain(format!("khoudraji delta {d} outside [0, 1]")));
            }
        }
        Ok(Self {
            family,
            theta,
            khoudraji_delta,
            tau: None,
        })
    }

    /// Builds the spec whose base copula has Kendall's tau `tau`.
    pub fn from_tau(family: CopulaFamily, tau: f64, khoudraji_delta: Option<f64>) -> Result<Self> {
        let theta = family.tau_to_param(tau)?;
        let mut spec = Self::new(family, theta, khoudraji_delta)?;
        spec.tau = Some(tau);
        Ok(spec)
    }

    pub fn independence() -> Self {
        Self {
            family: CopulaFamily::Independence,
            theta: 0.0,
            khoudraji_delta: None,
            tau: Some(0.0),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.family.is_symmetric_family() && self.khoudraji_delta.is_none()
    }

    /// Drops the Khoudraji transform.
    pub fn base(&self) -> Self {
        Self {
            khoudraji_delta: None,
            ..*self
        }
    }

    /// `C(u, v)`; arguments are clamped to `[0, 1]`.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let v = v.clamp(0.0, 1.0);
        match self.khoudraji_delta {
            None => self.base_cdf(u, v),
            Some(d) if d == 0.0 => self.base_cdf(u, v),
            Some(d) if d == 1.0 => u * v,
            Some(d) => {
                if u == 0.0 || v == 0.0 {
                    0.0
                } else if u == 1.0 {
                    v
                } else if v == 1.0 {
                    u
                } else {
                    u.powf(d) * self.base_cdf(u.powf(1.0 - d), v)
                }
            }
        }
    }

    fn base_cdf(&self, u: f64, v: f64) -> f64 {
        if u == 0.0 || v == 0.0 {
            return 0.0;
        }
        if u == 1.0 {
            return v;
        }
        if v == 1.0 {
            return u;
        }
        // Every base family is exchangeable; ordering the arguments makes
        // C(u, v) == C(v, u) hold bit for bit.
        let (a, b) = if u <= v { (u, v) } else { (v, u) };
        let th = self.theta;
        let c = match self.family {
            CopulaFamily::Independence => a * b,
            CopulaFamily::Gaussian => {
                if th == 0.0 {
                    a * b
                } else {
                    let n = Normal::new(0.0, 1.0).expect("standard normal");
                    bivariate_normal_cdf(n.inverse_cdf(a), n.inverse_cdf(b), th)
                }
            }
            CopulaFamily::Student { nu } => {
                if nu.fract() == 0.0 && nu <= 1e6 {
                    let t = StudentsT::new(0.0, 1.0, nu).expect("validated nu");
                    bvtl(nu as u32, t.inverse_cdf(a), t.inverse_cdf(b), th)
                } else {
                    bivariate::student_copula_quadrature(a, b, th, nu)
                }
            }
            CopulaFamily::Clayton => (a.powf(-th) + b.powf(-th) - 1.0).powf(-1.0 / th),
            CopulaFamily::Gumbel => {
                let s = (-a.ln()).powf(th) + (-b.ln()).powf(th);
                (-s.powf(1.0 / th)).exp()
            }
            CopulaFamily::Frank => {
                let num = (-th * a).exp_m1() * (-th * b).exp_m1();
                -(num / (-th).exp_m1()).ln_1p() / th
            }
        };
        // Fréchet-Hoeffding bounds absorb last-bit rounding.
        c.clamp((a + b - 1.0).max(0.0), a)
    }
}

/// Free-function form of [`CopulaFamily::tau_to_param`].
pub fn tau_to_param(family: CopulaFamily, tau: f64) -> Result<f64> {
    family.tau_to_param(tau)
}

/// Free-function form of [`CopulaSpec::cdf`].
pub fn copula_cdf(spec: &CopulaSpec, u: f64, v: f64) -> f64 {
    spec.cdf(u, v)
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

impl fmt::Display for CopulaSpec {
    /// Token form, e.g. `gumbel:tau=0.7:delta=0.5`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family.name())?;
        match (self.family, self.tau) {
            (CopulaFamily::Independence, _) => {}
            (_, Some(t)) => write!(f, ":tau={}", fmt_num(t))?,
            (_, None) => write!(f, ":theta={}", fmt_num(self.theta))?,
        }
        if let CopulaFamily::Student { nu } = self.family {
            write!(f, ":nu={}", fmt_num(nu))?;
        }
        if let Some(d) = self.khoudraji_delta {
            write!(f, ":delta={}", fmt_num(d))?;
        }
        Ok(())
    }
}

/// Parses a family name (`gaussian`, `clayton`, ...) with its aliases.
pub fn parse_family(name: &str, nu: Option<f64>) -> Result<CopulaFamily> {
    let fam = match name.trim().to_ascii_lowercase().as_str() {
        "independence" | "indep" | "pi" => CopulaFamily::Independence,
        "gaussian" | "normal" | "ga" => CopulaFamily::Gaussian,
        "clayton" | "cl" => CopulaFamily::Clayton,
        "gumbel" | "gu" => CopulaFamily::Gumbel,
        "frank" | "fr" => CopulaFamily::Frank,
        "student" | "t" | "st" => CopulaFamily::Student {
            nu: nu.unwrap_or(DEFAULT_STUDENT_NU),
        },
        other => return Err(Error::format(format!("unknown copula family '{other}'"))),
    };
    if nu.is_some() && !matches!(fam, CopulaFamily::Student { .. }) {
        return Err(Error::format(format!("nu is only valid for the student family, not {}", fam.name())));
    }
    Ok(fam)
}

/// A partially specified copula token: family (with `nu`) and optional
/// `tau`/`theta`/`delta` fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaToken {
    pub family: CopulaFamily,
    pub tau: Option<f64>,
    pub theta: Option<f64>,
    pub delta: Option<f64>,
}

impl FromStr for CopulaToken {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let name = parts.next().unwrap_or_default();
        let (mut tau, mut theta, mut delta, mut nu) = (None, None, None, None);
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::format(format!("malformed copula field '{part}' in '{s}'")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::format(format!("non-numeric value in '{part}'")))?;
            let slot = match key.trim().to_ascii_lowercase().as_str() {
                "tau" => &mut tau,
                "theta" | "rho" => &mut theta,
                "delta" => &mut delta,
                "nu" | "df" => &mut nu,
                other => return Err(Error::format(format!("unknown copula field '{other}' in '{s}'"))),
            };
            if slot.replace(value).is_some() {
                return Err(Error::format(format!("duplicate field '{key}' in '{s}'")));
            }
        }
        if tau.is_some() && theta.is_some() {
            return Err(Error::format(format!("'{s}' gives both tau and theta")));
        }
        Ok(Self {
            family: parse_family(name, nu)?,
            tau,
            theta,
            delta,
        })
    }
}

impl CopulaToken {
    pub fn into_spec(self) -> Result<CopulaSpec> {
        match (self.family, self.tau, self.theta) {
            (CopulaFamily::Independence, None, None) => {
                CopulaSpec::new(CopulaFamily::Independence, 0.0, self.delta)
            }
            (fam, Some(t), None) => CopulaSpec::from_tau(fam, t, self.delta),
            (fam, None, Some(th)) => CopulaSpec::new(fam, th, self.delta),
            (fam, _, _) => Err(Error::format(format!("{} copula needs tau= or theta=", fam.name()))),
        }
    }
}

impl FromStr for CopulaSpec {
    type Err = Error;

    /// Case-insensitive token such as `student:tau=0.5:nu=4:delta=0.25`.
    fn from_str(s: &str) -> Result<Self> {
        s.parse::<CopulaToken>()?.into_spec()
    }
}
