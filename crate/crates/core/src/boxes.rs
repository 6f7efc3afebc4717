//! Box framework: partitions of the conditioning space, copulas of `X_I`
//! given `X_J ∈ A`, box-wise likelihood fits and the statistics comparing them.

use crate::cml::CmlSample;
use crate::copulas::{CopulaFamily, CopulaModel};
use crate::data::Dataset;
use crate::dgp::DgpSpec;
use crate::error::{Error, Result};
use crate::grid::TensorGrid;
use crate::np_tests::{quantile_edges, Discrepancy, Norm};
use crate::smoothing::ecdf_counts;
use crate::special::{brent_root, integrate, norm_cdf, norm_pdf};
use serde::{Deserialize, Serialize};

/// Default minimum number of observations per box.
pub const MIN_COUNT: usize = 20;

/// Product partition of the conditioning space by interior edges along each
/// conditioning column. A value equal to an edge belongs to the lower box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxPartition {
    pub edges: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl BoxPartition {
    pub fn new(edges: Vec<Vec<f64>>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::Config("a partition needs at least one conditioning column".into()));
        }
        if edges.iter().any(|e| e.windows(2).any(|w| !(w[0] < w[1])) || e.iter().any(|v| !v.is_finite())) {
            return Err(Error::Config("box edges must be finite and strictly increasing".into()));
        }
        let m: usize = edges.iter().map(|e| e.len() + 1).product();
        Ok(BoxPartition { edges, weights: vec![1.0 / m as f64; m] })
    }

    /// Equal-mass boxes with `splits[l]` groups along conditioning column `l`;
    /// every box must hold at least `min_count` rows.
    pub fn equal_mass(ds: &Dataset, splits: &[usize], min_count: usize) -> Result<Self> {
        if splits.len() != ds.q() || splits.iter().any(|&s| s == 0) {
            return Err(Error::Config("one positive split count per conditioning column is required".into()));
        }
        let m: usize = splits.iter().product();
        if ds.n() < m * min_count {
            return Err(Error::Config(format!(
                "{} observations cannot fill {m} boxes of at least {min_count}",
                ds.n()
            )));
        }
        let mut edges: Vec<Vec<f64>> = (0..ds.q()).map(|l| quantile_edges(ds.j_column(l), splits[l])).collect();
        for e in &mut edges {
            e.dedup();
        }
        let part = BoxPartition::new(edges)?;
        let counts = part.counts(ds);
        if counts.len() != m || counts.iter().any(|&c| c < min_count) {
            return Err(Error::Config(format!("a box holds fewer than {min_count} observations")));
        }
        Ok(part)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Box index of a conditioning point.
    pub fn index(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (e, &v) in self.edges.iter().zip(x) {
            idx += e.partition_point(|&b| b < v) * stride;
            stride *= e.len() + 1;
        }
        idx
    }

    /// Box index of every row.
    pub fn labels(&self, ds: &Dataset) -> Vec<usize> {
        let q = ds.q();
        let mut x = vec![0.0; q];
        (0..ds.n())
            .map(|i| {
                for (l, v) in x.iter_mut().enumerate() {
                    *v = ds.j_column(l)[i];
                }
                self.index(&x)
            })
            .collect()
    }

    pub fn counts(&self, ds: &Dataset) -> Vec<usize> {
        let mut c = vec![0; self.len()];
        for k in self.labels(ds) {
            c[k] += 1;
        }
        c
    }
}

/// Equal-probability boxes along the first conditioning column.
pub fn make_equiprob_boxes(ds: &Dataset, m: usize) -> Result<BoxPartition> {
    let mut splits = vec![1; ds.q()];
    if let Some(s) = splits.first_mut() {
        *s = m;
    }
    BoxPartition::equal_mass(ds, &splits, MIN_COUNT)
}

/// Within-box empirical cdf counts of the conditioned columns.
#[derive(Debug, Clone)]
struct BoxRanks {
    rows: Vec<usize>,
    /// Row-major `n_k × p` counts.
    counts: Vec<u32>,
}

impl BoxRanks {
    /// Rows are stored sorted by their count tuple.
    fn new(ds: &Dataset, rows: Vec<usize>) -> Self {
        let p = ds.p();
        let mut raw = vec![0u32; rows.len() * p];
        for k in 0..p {
            let col: Vec<f64> = rows.iter().map(|&i| ds.i_column(k)[i]).collect();
            for (j, c) in ecdf_counts(&col).into_iter().enumerate() {
                raw[j * p + k] = c;
            }
        }
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|&a, &b| raw[a * p..(a + 1) * p].cmp(&raw[b * p..(b + 1) * p]));
        let counts = order.iter().flat_map(|&j| raw[j * p..(j + 1) * p].iter().copied()).collect();
        BoxRanks { rows: order.iter().map(|&j| rows[j]).collect(), counts }
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    fn copula(&self, p: usize, u: &[f64]) -> f64 {
        let nk = self.len();
        if nk == 0 {
            return f64::NAN;
        }
        if u.iter().any(|&x| x <= 0.0) {
            return 0.0;
        }
        // generalized inverse: smallest occurring count reaching u·n_k
        let q: Vec<u32> = (0..p)
            .map(|k| {
                let target = u[k] * nk as f64 * (1.0 - 1e-12);
                self.counts
                    .chunks(p)
                    .map(|c| c[k])
                    .filter(|&c| c as f64 >= target)
                    .min()
                    .unwrap_or(nk as u32)
            })
            .collect();
        let hit = self.counts.chunks(p).filter(|c| c.iter().zip(&q).all(|(a, b)| a <= b)).count();
        hit as f64 / nk as f64
    }

    fn pseudo(&self, p: usize, denom_extra: f64) -> Vec<f64> {
        let d = self.len() as f64 + denom_extra;
        self.counts.iter().map(|&c| c as f64 / d).take(self.len() * p).collect()
    }
}

/// Copula of `X_I` given that the row belongs to `rows`, from plain
/// within-set empirical cdfs.
pub fn box_cond_copula(ds: &Dataset, rows: &[usize], u: &[f64]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::Data("empty box".into()));
    }
    if u.len() != ds.p() {
        return Err(Error::Config("copula argument has the wrong dimension".into()));
    }
    Ok(BoxRanks::new(ds, rows.to_vec()).copula(ds.p(), u))
}

/// A dataset split by a partition, with within-box ranks.
#[derive(Debug, Clone)]
pub struct BoxFit {
    pub part: BoxPartition,
    p: usize,
    n: usize,
    boxes: Vec<BoxRanks>,
}

impl BoxFit {
    /// Every box must hold at least two rows.
    pub fn new(ds: &Dataset, part: BoxPartition) -> Result<Self> {
        let mut members = vec![Vec::new(); part.len()];
        for (i, k) in part.labels(ds).into_iter().enumerate() {
            members[k].push(i);
        }
        if members.iter().any(|m| m.len() < 2) {
            return Err(Error::Estimation("a box holds fewer than two observations".into()));
        }
        let boxes = members.into_iter().map(|rows| BoxRanks::new(ds, rows)).collect();
        Ok(BoxFit { part, p: ds.p(), n: ds.n(), boxes })
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn members(&self, k: usize) -> &[usize] {
        &self.boxes[k].rows
    }

    /// `Ĉ^{A_k}(u)`.
    pub fn cond_copula(&self, k: usize, u: &[f64]) -> f64 {
        self.boxes[k].copula(self.p, u)
    }

    /// Within-box pseudo-observations of box `k`, `count / (n_k + 1)`.
    pub fn pseudo(&self, k: usize) -> Vec<f64> {
        self.boxes[k].pseudo(self.p, 1.0)
    }

    /// Pseudo-observations `count / (n_k + 1)` of every row, in row order.
    pub fn row_pseudo(&self) -> Vec<f64> {
        let p = self.p;
        let mut out = vec![0.0; self.n * p];
        for b in &self.boxes {
            for (j, z) in b.pseudo(p, 1.0).chunks(p).enumerate() {
                out[b.rows[j] * p..(b.rows[j] + 1) * p].copy_from_slice(z);
            }
        }
        out
    }

    /// Pooled within-box empirical cdf values `count / n_k` (row-major).
    pub fn pooled_points(&self) -> Vec<f64> {
        self.boxes.iter().flat_map(|b| b.pseudo(self.p, 0.0)).collect()
    }

    /// Likelihood fits in every box and on the pooled pseudo-sample.
    pub fn thetas(&self, family: CopulaFamily) -> Result<BoxThetas> {
        if self.p != 2 {
            return Err(Error::Config("parametric statistics need exactly two conditioned columns".into()));
        }
        let pairs = |z: Vec<f64>| z.chunks(2).map(|c| [c[0], c[1]]).collect::<Vec<_>>();
        let pooled: Vec<[f64; 2]> = (0..self.len()).flat_map(|k| pairs(self.pseudo(k))).collect();
        let theta0 = CmlSample::new(family, pooled)?.fit(None, None)?.theta()?;
        let boxes = (0..self.len())
            .map(|k| CmlSample::new(family, pairs(self.pseudo(k)))?.fit(None, Some(theta0))?.theta())
            .collect::<Result<Vec<_>>>()?;
        Ok(BoxThetas { family, boxes, pooled: theta0 })
    }
}

/// Box-wise and pooled likelihood estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxThetas {
    pub family: CopulaFamily,
    pub boxes: Vec<f64>,
    pub pooled: f64,
}

/// Likelihood estimate in box `k`, or on the pooled pseudo-sample when `k` is `None`.
pub fn box_cml(ds: &Dataset, part: &BoxPartition, family: CopulaFamily, k: Option<usize>) -> Result<f64> {
    let th = BoxFit::new(ds, part.clone())?.thetas(family)?;
    match k {
        None => Ok(th.pooled),
        Some(k) => th.boxes.get(k).copied().ok_or_else(|| Error::Config(format!("no box {k}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxNpKind {
    Ks,
    Cvm,
    Dist,
}

/// Pairwise differences of box copulas at row-major points `pts`.
pub fn box_np_disc(fit: &BoxFit, pts: &[f64], norm: Norm, weight: f64) -> Discrepancy {
    let p = fit.p;
    let vals: Vec<Vec<f64>> = (0..fit.len()).map(|k| pts.chunks(p).map(|u| fit.cond_copula(k, u)).collect()).collect();
    let mut values = Vec::new();
    for a in 0..fit.len() {
        for b in a + 1..fit.len() {
            values.extend(vals[a].iter().zip(&vals[b]).map(|(x, y)| x - y));
        }
    }
    let n = values.len();
    Discrepancy::new(values, vec![weight; n], norm, 1.0)
}

/// Midpoint grid for the integrated box distance.
pub fn dist_points(p: usize, m: usize) -> Result<(Vec<f64>, f64)> {
    let g = TensorGrid::midpoints(m, p)?;
    Ok(((0..g.len()).flat_map(|i| g.point(i)).collect(), 1.0 / g.len() as f64))
}

/// Pairwise comparison of box copulas. `Cvm` integrates against the pooled
/// within-box pseudo-observations, `Dist` over a 20-point midpoint grid per axis.
pub fn box_np_stat(ds: &Dataset, part: &BoxPartition, kind: BoxNpKind) -> Result<f64> {
    let fit = BoxFit::new(ds, part.clone())?;
    let pts = fit.pooled_points();
    let m = pts.len() / ds.p();
    Ok(match kind {
        BoxNpKind::Ks => box_np_disc(&fit, &pts, Norm::Sup, 1.0).value(),
        BoxNpKind::Cvm => box_np_disc(&fit, &pts, Norm::L2, 1.0 / m as f64).value(),
        BoxNpKind::Dist => {
            let (g, w) = dist_points(ds.p(), 20)?;
            box_np_disc(&fit, &g, Norm::L2, w).value()
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    T2,
    Tinf,
    Dist,
    Dens,
}

/// `θ_k − θ₀` with weights `ω_k`.
pub fn theta_disc(thetas: &[f64], theta0: f64, weights: &[f64], norm: Norm, scale: f64) -> Discrepancy {
    Discrepancy::new(thetas.iter().map(|t| t - theta0).collect(), weights.to_vec(), norm, scale)
}

/// Copula cdf on the 21×21 closed uniform grid.
pub fn cdf_on_grid(model: &CopulaModel) -> Result<Vec<f64>> {
    let g = TensorGrid::uniform_closed(21, 2)?;
    (0..g.len()).map(|i| model.cdf(&g.point(i))).collect()
}

/// Copula density on the 20×20 midpoint grid.
pub fn density_on_grid(model: &CopulaModel) -> Result<Vec<f64>> {
    let g = TensorGrid::midpoints(20, 2)?;
    (0..g.len()).map(|i| model.density(&g.point(i))).collect()
}

/// Differences `C_{θ_k}(u) − C_{θ₀}(u)` on the cdf grid, weighted by `ω_k / 441`.
pub fn cdf_disc(family: CopulaFamily, thetas: &[f64], theta0: f64, weights: &[f64]) -> Result<Discrepancy> {
    let c0 = cdf_on_grid(&CopulaModel::new(family, theta0)?)?;
    let g = c0.len() as f64;
    let mut values = Vec::with_capacity(thetas.len() * c0.len());
    let mut w = Vec::with_capacity(values.capacity());
    for (t, wk) in thetas.iter().zip(weights) {
        let c = cdf_on_grid(&CopulaModel::new(family, *t)?)?;
        values.extend(c.iter().zip(&c0).map(|(a, b)| a - b));
        w.extend(std::iter::repeat(wk / g).take(c.len()));
    }
    Ok(Discrepancy::new(values, w, Norm::L2, 1.0))
}

/// Differences of copula densities on the midpoint grid, weighted by `ω_k / 400`.
pub fn density_disc(family: CopulaFamily, thetas: &[f64], theta0: f64, weights: &[f64]) -> Result<Discrepancy> {
    let c0 = density_on_grid(&CopulaModel::new(family, theta0)?)?;
    let g = c0.len() as f64;
    let mut values = Vec::with_capacity(thetas.len() * c0.len());
    let mut w = Vec::with_capacity(values.capacity());
    for (t, wk) in thetas.iter().zip(weights) {
        let c = density_on_grid(&CopulaModel::new(family, *t)?)?;
        values.extend(c.iter().zip(&c0).map(|(a, b)| a - b));
        w.extend(std::iter::repeat(wk / g).take(c.len()));
    }
    Ok(Discrepancy::new(values, w, Norm::L2, 1.0))
}

/// Box parametric discrepancy for `kind` given fitted parameters.
pub fn box_param_disc(th: &BoxThetas, weights: &[f64], n: usize, kind: ParamKind) -> Result<Discrepancy> {
    let nf = n as f64;
    match kind {
        ParamKind::T2 => Ok(theta_disc(&th.boxes, th.pooled, weights, Norm::L2, nf)),
        ParamKind::Tinf => Ok(theta_disc(&th.boxes, th.pooled, weights, Norm::Sup, nf.sqrt())),
        ParamKind::Dist => cdf_disc(th.family, &th.boxes, th.pooled, weights),
        ParamKind::Dens => density_disc(th.family, &th.boxes, th.pooled, weights),
    }
}

/// Box parametric statistics.
pub fn box_param_stat(ds: &Dataset, part: &BoxPartition, family: CopulaFamily, kind: ParamKind) -> Result<f64> {
    let fit = BoxFit::new(ds, part.clone())?;
    let th = fit.thetas(family)?;
    Ok(box_param_disc(&th, &part.weights, ds.n(), kind)?.value())
}

/// Copula of `(X1, X2)` given `lo < X3 <= hi` under a simulation design,
/// by numerical integration over the box.
pub fn box_copula_oracle(spec: &DgpSpec, u: [f64; 2], lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::Config("empty box".into()));
    }
    if u.iter().any(|&x| x <= 0.0) {
        return Ok(0.0);
    }
    if u.iter().all(|&x| x >= 1.0) {
        return Ok(1.0);
    }
    let (a, b) = (lo.max(-9.0), hi.min(9.0));
    let mut cuts = vec![a];
    cuts.extend(spec.breakpoints().into_iter().filter(|&c| c > a && c < b));
    cuts.push(b);
    let over_box = |f: &dyn Fn(f64) -> f64| -> Result<f64> {
        let mut s = 0.0;
        for w in cuts.windows(2) {
            s += integrate(|x| f(x) * norm_pdf(x), w[0], w[1], tol)?;
        }
        Ok(s)
    };
    let mass = norm_cdf(hi) - norm_cdf(lo);
    let margin = |y: f64| over_box(&|x| norm_cdf(y - spec.mu_at(x))).map(|v| v / mass);
    let inverse = |t: f64| -> Result<f64> {
        if t >= 1.0 {
            return Ok(f64::INFINITY);
        }
        let (mut l, mut r) = (-12.0, 12.0);
        while margin(l)? > t {
            l *= 2.0;
        }
        while margin(r)? < t {
            r *= 2.0;
        }
        brent_root(|y| margin(y).unwrap_or(f64::NAN) - t, l, r, tol * 1e-2)
    };
    let (y1, y2) = (inverse(u[0])?, inverse(u[1])?);
    let joint = |x: f64| -> f64 {
        let mu = spec.mu_at(x);
        let (a1, a2) = (norm_cdf(y1 - mu), norm_cdf(y2 - mu));
        match spec.copula_at(x) {
            Ok(None) => a1 * a2,
            Ok(Some(c)) => c.cdf(&[a1, a2]).unwrap_or(f64::NAN),
            Err(_) => f64::NAN,
        }
    };
    let h = over_box(&joint)? / mass;
    if !h.is_finite() {
        return Err(Error::Numerical("box copula integral did not converge".into()));
    }
    Ok(h.clamp(0.0, 1.0))
}
