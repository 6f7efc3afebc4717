//! Simulation designs with a univariate conditioning variable.
//!
//! `X3 ~ N(0,1)`; given `X3 = x`, `(U1, U2)` follows a copula of the chosen
//! family whose Kendall tau is `τ(x)`, and `X_k = μ(x) + Φ⁻¹(U_k)`.
//!
//! * pointwise alternative: `τ(x) = τ_max Φ(x)`, `μ(x) = x`;
//! * boxed alternative: `τ(x) = τ_max ⌊mΦ(x)⌋/m`, `μ = γ`;
//! * null: constant `τ₀`, with `μ(x) = x` (pointwise) or `μ = γ` (boxed),
//!
//! where `γ(x) = Φ⁻¹(clamp(⌊mΦ(x)⌋/m, 1/(2m), 1 − 1/(2m)))` is constant on the
//! `m` equiprobable boxes of `X3`. A zero tau gives the independence copula.

use crate::copulas::{CopulaFamily, CopulaModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::special::{norm_cdf, norm_quantile};
use rand::distributions::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DgpMode {
    Pointwise,
    Boxed { m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DgpVariant {
    NullConstant { tau0: f64 },
    Alternative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub family: CopulaFamily,
    pub tau_max: f64,
    pub mode: DgpMode,
    pub n: usize,
    pub variant: DgpVariant,
}

impl DgpSpec {
    pub fn alternative(family: CopulaFamily, tau_max: f64, mode: DgpMode, n: usize) -> Self {
        DgpSpec { family, tau_max, mode, n, variant: DgpVariant::Alternative }
    }

    pub fn null(family: CopulaFamily, tau0: f64, mode: DgpMode, n: usize) -> Self {
        DgpSpec { family, tau_max: tau0, mode, n, variant: DgpVariant::NullConstant { tau0 } }
    }

    pub fn validate(&self) -> Result<()> {
        let tau = match self.variant {
            DgpVariant::NullConstant { tau0 } => tau0,
            DgpVariant::Alternative => self.tau_max,
        };
        if !(0.0..1.0).contains(&tau) && !(tau == 1.0 && self.variant == DgpVariant::Alternative) {
            return Err(Error::Config(format!("tau {tau} outside [0, 1)")));
        }
        if let DgpMode::Boxed { m } = self.mode {
            if m == 0 {
                return Err(Error::Config("boxed design needs at least one box".into()));
            }
        }
        Ok(())
    }

    fn box_level(&self, x: f64) -> Option<(usize, usize)> {
        match self.mode {
            DgpMode::Pointwise => None,
            DgpMode::Boxed { m } => Some((((m as f64) * norm_cdf(x)).floor().min(m as f64 - 1.0) as usize, m)),
        }
    }

    /// Conditional Kendall tau at `X3 = x`.
    pub fn tau_at(&self, x: f64) -> f64 {
        match (self.variant, self.box_level(x)) {
            (DgpVariant::NullConstant { tau0 }, _) => tau0,
            (DgpVariant::Alternative, None) => self.tau_max * norm_cdf(x),
            (DgpVariant::Alternative, Some((k, m))) => self.tau_max * k as f64 / m as f64,
        }
    }

    /// Conditional mean of `X1` and `X2` at `X3 = x`.
    pub fn mu_at(&self, x: f64) -> f64 {
        match self.box_level(x) {
            None => x,
            Some((k, m)) => {
                let mf = m as f64;
                norm_quantile((k as f64 / mf).clamp(0.5 / mf, 1.0 - 0.5 / mf))
            }
        }
    }

    /// Conditional copula at `X3 = x`; `None` is the independence copula.
    pub fn copula_at(&self, x: f64) -> Result<Option<CopulaModel>> {
        let tau = self.tau_at(x).min(0.999);
        if tau == 0.0 {
            return Ok(None);
        }
        CopulaModel::from_tau(self.family, tau).map(Some)
    }

    /// Interior breakpoints of `τ` and `μ` on the `X3` axis.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.mode {
            DgpMode::Pointwise => Vec::new(),
            DgpMode::Boxed { m } => (1..m).map(|k| norm_quantile(k as f64 / m as f64)).collect(),
        }
    }

    /// Draws a dataset with columns `x1, x2, x3` (conditioned `x1, x2`).
    pub fn simulate(&self, seed: u64) -> Result<Dataset> {
        self.validate()?;
        let mut rng = stream(seed, 0);
        let mut cols = vec![Vec::with_capacity(self.n); 3];
        let mut cache: Vec<(usize, Option<CopulaModel>)> = Vec::new();
        for _ in 0..self.n {
            let x: f64 = rng.sample(StandardNormal);
            let model = match self.box_level(x) {
                Some((k, _)) => match cache.iter().find(|(j, _)| *j == k) {
                    Some((_, c)) => *c,
                    None => {
                        let c = self.copula_at(x)?;
                        cache.push((k, c));
                        c
                    }
                },
                None if matches!(self.variant, DgpVariant::NullConstant { .. }) => match cache.first() {
                    Some((_, c)) => *c,
                    None => {
                        let c = self.copula_at(x)?;
                        cache.push((0, c));
                        c
                    }
                },
                None => self.copula_at(x)?,
            };
            let [u, v] = match model {
                Some(c) => c.sample_pair(&mut rng),
                None => [rng.sample(Open01), rng.sample(Open01)],
            };
            let mu = self.mu_at(x);
            cols[0].push(mu + norm_quantile(u));
            cols[1].push(mu + norm_quantile(v));
            cols[2].push(x);
        }
        Dataset::with_names(cols, vec!["x1".into(), "x2".into(), "x3".into()], vec![0, 1], vec![2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_and_mean_curves() {
        let p = DgpSpec::alternative(CopulaFamily::Gaussian, 1.0, DgpMode::Pointwise, 10);
        assert!((p.tau_at(0.0) - 0.5).abs() < 1e-15);
        assert_eq!(p.mu_at(1.3), 1.3);
        let b = DgpSpec::alternative(CopulaFamily::Clayton, 1.0, DgpMode::Boxed { m: 5 }, 10);
        assert_eq!(b.tau_at(-3.0), 0.0);
        assert!((b.tau_at(0.0) - 0.4).abs() < 1e-15);
        assert!((b.mu_at(-3.0) - norm_quantile(0.1)).abs() < 1e-12);
        assert!((b.mu_at(3.0) - norm_quantile(0.8)).abs() < 1e-12);
        assert_eq!(b.breakpoints().len(), 4);
        let n = DgpSpec::null(CopulaFamily::Frank, 0.5, DgpMode::Boxed { m: 5 }, 10);
        assert_eq!(n.tau_at(2.0), 0.5);
    }

    #[test]
    fn simulation_is_deterministic() {
        let spec = DgpSpec::alternative(CopulaFamily::Gumbel, 1.0, DgpMode::Pointwise, 50);
        assert_eq!(spec.simulate(4).unwrap(), spec.simulate(4).unwrap());
        assert_ne!(spec.simulate(4).unwrap(), spec.simulate(5).unwrap());
        let empty = DgpSpec { n: 0, ..spec };
        assert_eq!(empty.simulate(1).unwrap().n(), 0);
    }
}
