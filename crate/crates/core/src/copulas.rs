//! Bivariate parametric copula families.
//!
//! All five families have a scalar parameter. Densities, scores and
//! conditional inverses are written in log space so that they stay finite
//! close to the corners of the unit square and for strong dependence.

use crate::error::{Error, Result};
use crate::special::{
    brent_root, debye1, integrate, logaddexp, norm_cdf, norm_quantile, one_minus_exp_neg,
    softplus, t4_cdf, t4_quantile, t5_cdf,
};
use rand::distributions::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Frank parameters closer to zero than this are the independence copula.
pub const FRANK_ZERO: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaFamily {
    Gaussian,
    /// Student-t copula with 4 degrees of freedom.
    Student4,
    Clayton,
    Gumbel,
    Frank,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 5] = [
        CopulaFamily::Gaussian,
        CopulaFamily::Student4,
        CopulaFamily::Clayton,
        CopulaFamily::Gumbel,
        CopulaFamily::Frank,
    ];

    pub fn id(self) -> &'static str {
        match self {
            CopulaFamily::Gaussian => "gaussian",
            CopulaFamily::Student4 => "student4",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Gumbel => "gumbel",
            CopulaFamily::Frank => "frank",
        }
    }

    pub fn contains(self, theta: f64) -> bool {
        if !theta.is_finite() {
            return false;
        }
        match self {
            CopulaFamily::Gaussian | CopulaFamily::Student4 => theta.abs() < 1.0,
            CopulaFamily::Clayton => theta > 0.0,
            CopulaFamily::Gumbel => theta >= 1.0,
            CopulaFamily::Frank => true,
        }
    }

    /// Parameter of the independence member, if the family has one.
    pub fn independence(self) -> Option<f64> {
        match self {
            CopulaFamily::Gaussian => Some(0.0),
            CopulaFamily::Student4 | CopulaFamily::Clayton => None,
            CopulaFamily::Gumbel => Some(1.0),
            CopulaFamily::Frank => Some(0.0),
        }
    }

    /// Map from the unconstrained optimisation scale to θ.
    pub fn from_eta(self, eta: f64) -> f64 {
        match self {
            CopulaFamily::Gaussian | CopulaFamily::Student4 => eta.tanh(),
            CopulaFamily::Clayton => eta.exp(),
            CopulaFamily::Gumbel => 1.0 + eta.exp(),
            CopulaFamily::Frank => eta,
        }
    }

    pub fn to_eta(self, theta: f64) -> f64 {
        match self {
            CopulaFamily::Gaussian | CopulaFamily::Student4 => theta.atanh(),
            CopulaFamily::Clayton => theta.ln(),
            CopulaFamily::Gumbel => (theta - 1.0).ln(),
            CopulaFamily::Frank => theta,
        }
    }

    /// dθ/dη at `eta`.
    pub fn dtheta_deta(self, eta: f64) -> f64 {
        match self {
            CopulaFamily::Gaussian | CopulaFamily::Student4 => {
                let t = eta.tanh();
                1.0 - t * t
            }
            CopulaFamily::Clayton | CopulaFamily::Gumbel => eta.exp(),
            CopulaFamily::Frank => 1.0,
        }
    }

    /// Search interval on the η scale.
    pub fn eta_bounds(self) -> (f64, f64) {
        match self {
            CopulaFamily::Gaussian | CopulaFamily::Student4 => (-7.5, 7.5),
            CopulaFamily::Clayton => (-9.0, 7.0),
            CopulaFamily::Gumbel => (-12.0, 6.5),
            CopulaFamily::Frank => (-700.0, 700.0),
        }
    }

    /// Pre-transformed coordinates of `(u, v)` used by the log-density kernels.
    pub fn coords(self, u: f64, v: f64) -> [f64; 4] {
        match self {
            CopulaFamily::Gaussian => {
                let a = norm_quantile(u);
                let b = norm_quantile(v);
                [a * a + b * b, a * b, a, b]
            }
            CopulaFamily::Student4 => {
                let a = t4_quantile(u);
                let b = t4_quantile(v);
                let marg = 2.5 * ((a * a / 4.0).ln_1p() + (b * b / 4.0).ln_1p());
                [a * a + b * b, a * b, marg, 0.0]
            }
            CopulaFamily::Clayton => [u.ln(), v.ln(), 0.0, 0.0],
            CopulaFamily::Gumbel => {
                let x = -u.ln();
                let y = -v.ln();
                [x, y, x.ln(), y.ln()]
            }
            CopulaFamily::Frank => [u, v, 0.0, 0.0],
        }
    }

    /// Log density at pre-transformed coordinates.
    pub fn log_density_at(self, theta: f64, c: &[f64; 4]) -> f64 {
        match self {
            CopulaFamily::Gaussian => {
                let r2 = 1.0 - theta * theta;
                -0.5 * r2.ln() - (theta * theta * c[0] - 2.0 * theta * c[1]) / (2.0 * r2)
            }
            CopulaFamily::Student4 => {
                let r2 = 1.0 - theta * theta;
                let g = 1.0 + (c[0] - 2.0 * theta * c[1]) / (4.0 * r2);
                -(2.0 * PI).ln() - 0.5 * r2.ln() - 3.0 * g.ln() - 2.0 * 0.375f64.ln() + c[2]
            }
            CopulaFamily::Clayton => {
                let (lu, lv) = (c[0], c[1]);
                (theta).ln_1p() - (1.0 + theta) * (lu + lv)
                    - (2.0 + 1.0 / theta) * clayton_ln_s(theta, lu, lv)
            }
            CopulaFamily::Gumbel => {
                let (x, y, lx, ly) = (c[0], c[1], c[2], c[3]);
                let ln_a = logaddexp(theta * lx, theta * ly);
                let t = (ln_a / theta).exp();
                -t + x + y + (theta - 1.0) * (lx + ly) + (1.0 / theta - 2.0) * ln_a
                    + (t + theta - 1.0).ln()
            }
            CopulaFamily::Frank => {
                if theta.abs() < FRANK_ZERO {
                    return 0.0;
                }
                let (u, v) = if theta > 0.0 { (c[0], c[1]) } else { (c[0], 1.0 - c[1]) };
                let th = theta.abs();
                th.ln() + one_minus_exp_neg(th).ln() - th * (u + v) - 2.0 * frank_ln_d(th, u, v)
            }
        }
    }

    /// ∂/∂θ of the log density at pre-transformed coordinates.
    pub fn score_at(self, theta: f64, c: &[f64; 4]) -> f64 {
        match self {
            CopulaFamily::Gaussian => {
                let r2 = 1.0 - theta * theta;
                theta / r2 - (theta * c[0] - c[1] * (1.0 + theta * theta)) / (r2 * r2)
            }
            CopulaFamily::Student4 => {
                let r2 = 1.0 - theta * theta;
                let g = 1.0 + (c[0] - 2.0 * theta * c[1]) / (4.0 * r2);
                let dg = (2.0 * theta * c[0] - 2.0 * c[1] * (1.0 + theta * theta)) / (4.0 * r2 * r2);
                theta / r2 - 3.0 * dg / g
            }
            CopulaFamily::Clayton => {
                let (lu, lv) = (c[0], c[1]);
                let l = logaddexp(-theta * lu, -theta * lv);
                let ln_s = clayton_ln_s(theta, lu, lv);
                let wu = (-theta * lu - l).exp();
                let wv = (-theta * lv - l).exp();
                let ds_over_s = (-lu * wu - lv * wv) / one_minus_exp_neg(l);
                1.0 / (1.0 + theta) - (lu + lv) + ln_s / (theta * theta)
                    - (2.0 + 1.0 / theta) * ds_over_s
            }
            CopulaFamily::Gumbel => {
                let (lx, ly) = (c[2], c[3]);
                let ln_a = logaddexp(theta * lx, theta * ly);
                let wx = (theta * lx - ln_a).exp();
                let wy = (theta * ly - ln_a).exp();
                let dln_a = lx * wx + ly * wy;
                let t = (ln_a / theta).exp();
                let dt = t * (-ln_a / (theta * theta) + dln_a / theta);
                -dt + lx + ly - ln_a / (theta * theta) + (1.0 / theta - 2.0) * dln_a
                    + (dt + 1.0) / (t + theta - 1.0)
            }
            CopulaFamily::Frank => {
                if theta.abs() < FRANK_ZERO {
                    return 0.5 * (1.0 - 2.0 * c[0]) * (1.0 - 2.0 * c[1]);
                }
                if theta > 0.0 {
                    frank_score_pos(theta, c[0], c[1])
                } else {
                    -frank_score_pos(-theta, c[0], 1.0 - c[1])
                }
            }
        }
    }

    /// Kendall's tau of the member with parameter `theta`.
    pub fn theta_to_tau(self, theta: f64) -> Result<f64> {
        check_theta(self, theta)?;
        Ok(match self {
            CopulaFamily::Gaussian | CopulaFamily::Student4 => 2.0 / PI * theta.asin(),
            CopulaFamily::Clayton => theta / (theta + 2.0),
            CopulaFamily::Gumbel => 1.0 - 1.0 / theta,
            CopulaFamily::Frank => frank_tau(theta),
        })
    }

    /// Parameter whose Kendall's tau equals `tau`.
    pub fn tau_to_theta(self, tau: f64) -> Result<f64> {
        let bad = || Error::Domain(format!("tau {tau} not attainable by the {} family", self.id()));
        if !tau.is_finite() || tau.abs() >= 1.0 {
            return Err(bad());
        }
        match self {
            CopulaFamily::Gaussian | CopulaFamily::Student4 => Ok((PI * tau / 2.0).sin()),
            CopulaFamily::Clayton => {
                if tau <= 0.0 {
                    return Err(bad());
                }
                Ok(2.0 * tau / (1.0 - tau))
            }
            CopulaFamily::Gumbel => {
                if tau < 0.0 {
                    return Err(bad());
                }
                Ok(1.0 / (1.0 - tau))
            }
            CopulaFamily::Frank => {
                if tau == 0.0 {
                    return Ok(0.0);
                }
                let target = tau.abs();
                let mut hi = 1.0;
                while frank_tau(hi) < target {
                    hi *= 2.0;
                    if hi > 1e6 {
                        return Err(bad());
                    }
                }
                let th = brent_root(|t| frank_tau(t) - target, 0.0, hi, 1e-14 * hi)?;
                Ok(th.copysign(tau))
            }
        }
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for CopulaFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CopulaFamily::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown copula family '{s}'")))
    }
}

fn check_theta(family: CopulaFamily, theta: f64) -> Result<()> {
    if family.contains(theta) {
        Ok(())
    } else {
        Err(Error::Domain(format!("theta {theta} outside the {} parameter domain", family.id())))
    }
}

fn clayton_ln_s(theta: f64, lu: f64, lv: f64) -> f64 {
    // S = u^-θ + v^-θ - 1 = e^L - 1
    let l = logaddexp(-theta * lu, -theta * lv);
    if l < 30.0 {
        l.exp_m1().ln()
    } else {
        l + (-(-l).exp()).ln_1p()
    }
}

/// ln D for θ > 0, with D = e^{-θu}(1-e^{-θv}) + e^{-θv}(1-e^{-θ(1-v)}).
fn frank_ln_d(theta: f64, u: f64, v: f64) -> f64 {
    let a = -theta * u + one_minus_exp_neg(theta * v).ln();
    let b = -theta * v + one_minus_exp_neg(theta * (1.0 - v)).ln();
    logaddexp(a, b)
}

fn frank_score_pos(theta: f64, u: f64, v: f64) -> f64 {
    let ln_d = frank_ln_d(theta, u, v);
    let m = (-theta * u).max(-theta * v);
    let e = |z: f64| (z - m).exp();
    let dd = -u * e(-theta * u) - v * e(-theta * v) + (u + v) * e(-theta * (u + v)) + e(-theta);
    let d = (ln_d - m).exp();
    1.0 / theta + 1.0 / theta.exp_m1() - (u + v) - 2.0 * dd / d
}

fn frank_tau(theta: f64) -> f64 {
    if theta.abs() < FRANK_ZERO {
        return 0.0;
    }
    if theta.abs() < 1e-3 {
        return theta / 9.0 - theta.powi(3) / 900.0;
    }
    1.0 - 4.0 / theta * (1.0 - debye1(theta))
}

/// A family together with a parameter value in its domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaModel {
    pub family: CopulaFamily,
    pub theta: f64,
}

fn interior(u: f64) -> bool {
    u > 0.0 && u < 1.0
}

impl CopulaModel {
    pub fn new(family: CopulaFamily, theta: f64) -> Result<Self> {
        check_theta(family, theta)?;
        let theta = if family == CopulaFamily::Frank && theta.abs() < FRANK_ZERO { 0.0 } else { theta };
        Ok(CopulaModel { family, theta })
    }

    /// Member with Kendall's tau `tau`.
    pub fn from_tau(family: CopulaFamily, tau: f64) -> Result<Self> {
        CopulaModel::new(family, family.tau_to_theta(tau)?)
    }

    pub fn tau(&self) -> f64 {
        self.family.theta_to_tau(self.theta).unwrap_or(f64::NAN)
    }

    fn check_interior(&self, u: &[f64]) -> Result<(f64, f64)> {
        match u {
            [a, b] if interior(*a) && interior(*b) => Ok((*a, *b)),
            [_, _] => Err(Error::Domain(format!("point {u:?} not inside the open unit square"))),
            _ => Err(Error::Domain(format!("expected a bivariate point, got dimension {}", u.len()))),
        }
    }

    pub fn log_density(&self, u: &[f64]) -> Result<f64> {
        let (a, b) = self.check_interior(u)?;
        Ok(self.family.log_density_at(self.theta, &self.family.coords(a, b)))
    }

    pub fn density(&self, u: &[f64]) -> Result<f64> {
        self.log_density(u).map(f64::exp)
    }

    /// Derivative of the log density with respect to θ.
    pub fn log_density_score(&self, u: &[f64]) -> Result<f64> {
        let (a, b) = self.check_interior(u)?;
        if self.family == CopulaFamily::Gumbel && self.theta == 1.0 {
            return Err(Error::Domain("score requires an interior parameter".into()));
        }
        Ok(self.family.score_at(self.theta, &self.family.coords(a, b)))
    }

    /// Conditional cdf `∂C/∂u` of the second coordinate given the first.
    pub fn h(&self, u: f64, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        if v >= 1.0 {
            return 1.0;
        }
        if u <= 0.0 || u >= 1.0 {
            // limits at the edges are degenerate for most families
            let e = 1e-300f64.max(f64::EPSILON * 1e-3);
            return self.h(u.clamp(e, 1.0 - f64::EPSILON / 2.0), v);
        }
        let th = self.theta;
        match self.family {
            CopulaFamily::Gaussian => {
                let (a, b) = (norm_quantile(u), norm_quantile(v));
                norm_cdf((b - th * a) / (1.0 - th * th).sqrt())
            }
            CopulaFamily::Student4 => {
                let (a, b) = (t4_quantile(u), t4_quantile(v));
                let scale = ((4.0 + a * a) * (1.0 - th * th) / 5.0).sqrt();
                t5_cdf((b - th * a) / scale)
            }
            CopulaFamily::Clayton => {
                let (lu, lv) = (u.ln(), v.ln());
                (-(th + 1.0) * lu - (1.0 / th + 1.0) * clayton_ln_s(th, lu, lv)).exp()
            }
            CopulaFamily::Gumbel => {
                let (x, y) = (-u.ln(), -v.ln());
                let ln_a = logaddexp(th * x.ln(), th * y.ln());
                let t = (ln_a / th).exp();
                (-t + (1.0 - th) * t.ln() + (th - 1.0) * x.ln() + x).exp().min(1.0)
            }
            CopulaFamily::Frank => {
                if th == 0.0 {
                    v
                } else if th > 0.0 {
                    frank_h_pos(th, u, v)
                } else {
                    1.0 - frank_h_pos(-th, u, 1.0 - v)
                }
            }
        }
    }

    /// Inverse of `v ↦ h(u, v)`.
    pub fn h_inverse(&self, u: f64, w: f64) -> Result<f64> {
        let th = self.theta;
        Ok(match self.family {
            CopulaFamily::Gaussian => {
                let a = norm_quantile(u);
                norm_cdf(th * a + (1.0 - th * th).sqrt() * norm_quantile(w))
            }
            CopulaFamily::Student4 => {
                let a = t4_quantile(u);
                let scale = ((4.0 + a * a) * (1.0 - th * th) / 5.0).sqrt();
                let q = brent_root(|z| t5_cdf(z) - w, -1e4, 1e4, 1e-13)?;
                t4_cdf(th * a + scale * q)
            }
            CopulaFamily::Clayton => clayton_h_inverse(th, u, w),
            CopulaFamily::Gumbel => gumbel_h_inverse(th, u, w)?,
            CopulaFamily::Frank => {
                if th == 0.0 {
                    w
                } else if th > 0.0 {
                    frank_h_inverse_pos(th, u, w)
                } else {
                    1.0 - frank_h_inverse_pos(-th, u, 1.0 - w)
                }
            }
        })
    }

    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        let (a, b) = match u {
            [a, b] => (*a, *b),
            _ => return Err(Error::Domain(format!("expected a bivariate point, got dimension {}", u.len()))),
        };
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
            return Err(Error::Domain(format!("point {u:?} outside the unit square")));
        }
        if a == 0.0 || b == 0.0 {
            return Ok(0.0);
        }
        if a == 1.0 {
            return Ok(b);
        }
        if b == 1.0 {
            return Ok(a);
        }
        let th = self.theta;
        let c = match self.family {
            CopulaFamily::Gaussian | CopulaFamily::Student4 => {
                if th == 0.0 && self.family == CopulaFamily::Gaussian {
                    a * b
                } else {
                    integrate(|s| self.h(s, b), 0.0, a, 1e-12)?
                }
            }
            CopulaFamily::Clayton => (-clayton_ln_s(th, a.ln(), b.ln()) / th).exp(),
            CopulaFamily::Gumbel => {
                let (x, y) = (-a.ln(), -b.ln());
                (-(logaddexp(th * x.ln(), th * y.ln()) / th).exp()).exp()
            }
            CopulaFamily::Frank => {
                if th == 0.0 {
                    a * b
                } else if th > 0.0 {
                    frank_cdf_pos(th, a, b)
                } else {
                    a - frank_cdf_pos(-th, a, 1.0 - b)
                }
            }
        };
        Ok(c.clamp(0.0, a.min(b)))
    }

    /// One draw from the copula.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let th = self.theta;
        match self.family {
            CopulaFamily::Gaussian => {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let x2 = th * z1 + (1.0 - th * th).sqrt() * z2;
                [norm_cdf(z1), norm_cdf(x2)]
            }
            CopulaFamily::Student4 => {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let x2 = th * z1 + (1.0 - th * th).sqrt() * z2;
                let a: f64 = rng.sample(Open01);
                let b: f64 = rng.sample(Open01);
                // chi-square with 4 degrees of freedom
                let chi = -2.0 * (a.ln() + b.ln());
                let s = (4.0 / chi).sqrt();
                [t4_cdf(z1 * s), t4_cdf(x2 * s)]
            }
            _ => {
                let u: f64 = rng.sample(Open01);
                let w: f64 = rng.sample(Open01);
                let v = match self.family {
                    CopulaFamily::Clayton => clayton_h_inverse(th, u, w),
                    CopulaFamily::Gumbel => gumbel_h_inverse(th, u, w).unwrap_or(w),
                    _ => {
                        if th == 0.0 {
                            w
                        } else if th > 0.0 {
                            frank_h_inverse_pos(th, u, w)
                        } else {
                            1.0 - frank_h_inverse_pos(-th, u, 1.0 - w)
                        }
                    }
                };
                [u, v]
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<[f64; 2]> {
        (0..n).map(|_| self.sample_pair(rng)).collect()
    }

    /// `n` draws from the stream determined by `seed`.
    pub fn sample_seeded(&self, n: usize, seed: u64) -> Vec<[f64; 2]> {
        self.sample(n, &mut crate::rng::stream(seed, 0))
    }
}

fn frank_h_pos(theta: f64, u: f64, v: f64) -> f64 {
    (-theta * u + one_minus_exp_neg(theta * v).ln() - frank_ln_d(theta, u, v)).exp().min(1.0)
}

fn frank_cdf_pos(theta: f64, u: f64, v: f64) -> f64 {
    -(frank_ln_d(theta, u, v) - one_minus_exp_neg(theta).ln()) / theta
}

fn frank_h_inverse_pos(theta: f64, u: f64, w: f64) -> f64 {
    let (lw, l1w) = (w.ln(), (-w).ln_1p());
    let num = logaddexp(l1w - theta * u, lw - theta);
    let den = logaddexp(lw, l1w - theta * u);
    (-(num - den) / theta).clamp(0.0, 1.0)
}

fn clayton_h_inverse(theta: f64, u: f64, w: f64) -> f64 {
    let a = -theta * u.ln();
    let b = (-theta / (1.0 + theta) * w.ln()).exp_m1().ln();
    (-softplus(a + b) / theta).exp()
}

fn gumbel_h_inverse(theta: f64, u: f64, w: f64) -> Result<f64> {
    let x = -u.ln();
    if theta == 1.0 {
        return Ok(w);
    }
    let k = theta - 1.0;
    // ln h = ln w  <=>  g(t) = t + (θ-1) ln t - [x + (θ-1) ln x - ln w] = 0, t >= x
    let c0 = x + k * x.ln() - w.ln();
    let g = |t: f64| t + k * t.ln() - c0;
    let mut lo = x;
    let mut hi = x.max(1e-300) * 2.0 + 1.0;
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numerical("gumbel conditional inverse diverged".into()));
        }
    }
    let mut t = 0.5 * (lo + hi);
    let mut converged = false;
    for _ in 0..200 {
        let gt = g(t);
        if gt > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let mut next = t - gt / (1.0 + k / t);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-10 * t.max(1e-300) || hi - lo <= 1e-15 * hi {
            t = next;
            converged = true;
            break;
        }
        t = next;
    }
    if !converged {
        return Err(Error::Numerical("gumbel conditional inverse did not converge".into()));
    }
    // y = t (1 - (x/t)^θ)^{1/θ}
    let r = theta * (x / t).ln();
    let ln_y = t.ln() + (-r.exp_m1()).ln() / theta;
    Ok((-ln_y.exp()).exp().clamp(0.0, 1.0))
}
