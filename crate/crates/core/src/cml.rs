//! Weighted canonical maximum likelihood for one-parameter bivariate copulas.
//!
//! The likelihood is maximised by solving the weighted score equation on the
//! unconstrained scale η of [`CopulaFamily::from_eta`]: the score is bracketed
//! by stepping away from the start point in the uphill direction, then the
//! root is polished with Brent's method. When that fails the fit is retried
//! from three fixed starting points.

use crate::copulas::CopulaFamily;
use crate::error::{Error, Result};
use crate::special::brent_root;
use serde::{Deserialize, Serialize};

/// Mean-score tolerance for declaring convergence.
pub const SCORE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmlStatus {
    Converged,
    /// The likelihood keeps increasing up to the edge of the search interval.
    Boundary,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmlFit {
    pub theta: f64,
    pub status: CmlStatus,
    /// Weighted mean of the score at `theta`.
    pub mean_score: f64,
}

impl CmlFit {
    pub fn ok(&self) -> bool {
        self.status != CmlStatus::Failed
    }

    /// The estimate, or an estimation error when the optimiser failed.
    pub fn theta(&self) -> Result<f64> {
        if self.ok() {
            Ok(self.theta)
        } else {
            Err(Error::Estimation(format!(
                "likelihood maximisation failed (mean score {:e})",
                self.mean_score
            )))
        }
    }
}

/// Pseudo-observations prepared for repeated likelihood evaluations.
#[derive(Debug, Clone)]
pub struct CmlSample {
    family: CopulaFamily,
    coords: Vec<[f64; 4]>,
}

impl CmlSample {
    pub fn new<I: IntoIterator<Item = [f64; 2]>>(family: CopulaFamily, points: I) -> Result<Self> {
        let coords = points
            .into_iter()
            .map(|[u, v]| {
                if u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0 {
                    Ok(family.coords(u, v))
                } else {
                    Err(Error::Domain(format!("pseudo-observation ({u}, {v}) outside (0,1)^2")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CmlSample { family, coords })
    }

    pub fn family(&self) -> CopulaFamily {
        self.family
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Weighted log-likelihood `Σ w_i log c_θ(Z_i)`.
    pub fn log_lik(&self, theta: f64, w: Option<&[f64]>) -> f64 {
        match w {
            None => self.coords.iter().map(|c| self.family.log_density_at(theta, c)).sum(),
            Some(w) => self
                .coords
                .iter()
                .zip(w)
                .filter(|(_, &wi)| wi > 0.0)
                .map(|(c, &wi)| wi * self.family.log_density_at(theta, c))
                .sum(),
        }
    }

    /// Maximises the (weighted) likelihood, starting from `start` when given.
    pub fn fit(&self, w: Option<&[f64]>, start: Option<f64>) -> Result<CmlFit> {
        if let Some(w) = w {
            if w.len() != self.coords.len() {
                return Err(Error::Config("weight vector length mismatch".into()));
            }
        }
        let active = match w {
            None => self.coords.len(),
            Some(w) => w.iter().filter(|&&x| x > 0.0).count(),
        };
        if active < 2 {
            return Err(Error::Estimation("fewer than two observations with positive weight".into()));
        }
        let score = Score::new(self, w);
        let fam = self.family;
        let (lo, hi) = fam.eta_bounds();
        let first = start
            .filter(|&t| fam.contains(t))
            .map(|t| fam.to_eta(t))
            .filter(|e| e.is_finite())
            .unwrap_or(0.0)
            .clamp(lo + 1e-3, hi - 1e-3);
        let fit = solve(&score, first);
        if fit.ok() {
            return Ok(fit);
        }
        let mut best = fit;
        for tau in [0.1, 0.5, 0.8] {
            let e = fam.to_eta(fam.tau_to_theta(tau)?).clamp(lo + 1e-3, hi - 1e-3);
            let f = solve(&score, e);
            if f.ok() {
                return Ok(f);
            }
            if f.mean_score.abs() < best.mean_score.abs() {
                best = f;
            }
        }
        Ok(best)
    }
}

/// Weighted mean score as a function of θ.
struct Score<'a> {
    family: CopulaFamily,
    coords: &'a [[f64; 4]],
    w: Option<&'a [f64]>,
    total: f64,
    /// Gaussian sufficient statistics; the Gaussian score is linear in them.
    gauss: Option<[f64; 4]>,
}

impl<'a> Score<'a> {
    fn new(s: &'a CmlSample, w: Option<&'a [f64]>) -> Self {
        let total = w.map_or(s.coords.len() as f64, |w| w.iter().filter(|&&x| x > 0.0).sum());
        let gauss = (s.family == CopulaFamily::Gaussian).then(|| {
            let (mut a, mut b) = (0.0, 0.0);
            for (i, c) in s.coords.iter().enumerate() {
                let wi = w.map_or(1.0, |w| w[i]);
                if wi > 0.0 {
                    a += wi * c[0];
                    b += wi * c[1];
                }
            }
            [a / total, b / total, 0.0, 0.0]
        });
        Score { family: s.family, coords: &s.coords, w, total, gauss }
    }

    fn at(&self, theta: f64) -> f64 {
        if let Some(g) = &self.gauss {
            return self.family.score_at(theta, g);
        }
        let sum: f64 = match self.w {
            None => self.coords.iter().map(|c| self.family.score_at(theta, c)).sum(),
            Some(w) => self
                .coords
                .iter()
                .zip(w)
                .filter(|(_, &wi)| wi > 0.0)
                .map(|(c, &wi)| wi * self.family.score_at(theta, c))
                .sum(),
        };
        sum / self.total
    }
}

fn solve(score: &Score, start: f64) -> CmlFit {
    let fam = score.family;
    let (lo, hi) = fam.eta_bounds();
    let g = |eta: f64| score.at(fam.from_eta(eta));
    let failed = |eta: f64, s: f64| CmlFit {
        theta: fam.from_eta(eta),
        status: CmlStatus::Failed,
        mean_score: if s.is_nan() { f64::INFINITY } else { s },
    };
    let g0 = g(start);
    if !g0.is_finite() {
        return failed(start, g0);
    }
    if g0 == 0.0 {
        return CmlFit { theta: fam.from_eta(start), status: CmlStatus::Converged, mean_score: 0.0 };
    }
    let dir = g0.signum();
    let (mut a, mut step) = (start, 0.25);
    let (b, gb) = loop {
        let b = (a + dir * step).clamp(lo, hi);
        let gb = g(b);
        if !gb.is_finite() {
            return failed(b, gb);
        }
        if gb.signum() != dir {
            break (b, gb);
        }
        if b == lo || b == hi {
            return CmlFit { theta: fam.from_eta(b), status: CmlStatus::Boundary, mean_score: gb };
        }
        a = b;
        step *= 2.0;
    };
    let root = if gb == 0.0 {
        b
    } else {
        match brent_root(g, a.min(b), a.max(b), 1e-12) {
            Ok(r) => r,
            Err(_) => return failed(b, gb),
        }
    };
    let s = g(root);
    let pinned = {
        let (l, r) = (g(root - 1e-9), g(root + 1e-9));
        l.signum() != r.signum()
    };
    let status = if s.abs() <= SCORE_TOL || pinned { CmlStatus::Converged } else { CmlStatus::Failed };
    CmlFit { theta: fam.from_eta(root), status, mean_score: s }
}
