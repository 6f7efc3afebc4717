//! Rank-space kernel estimators of conditional margins, conditional copulas
//! and simplified-copula estimates.
//!
//! Every column is replaced by its empirical cdf counts before smoothing, so
//! all estimates are exactly invariant under strictly increasing transforms
//! of any column. Rows are also put in a canonical order (sorted by their
//! rank tuple) so that floating-point sums do not depend on the input order.
//!
//! Conventions:
//! * the empirical cdf of a column at `x` is `#{j : X_j <= x} / n`; tied
//!   values therefore share the largest count;
//! * the kernel acts on differences of `F̂_J` values, `K_h(a - b) = K((a-b)/h)/h`,
//!   with a product kernel when there are several conditioning columns;
//! * with trimming on, rows whose `F̂_J` value lies outside `(h, 1-h)` in any
//!   coordinate still contribute to the kernel sums but are excluded from
//!   averages, pseudo-samples and likelihoods.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grid::TensorGrid;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// Standard normal density, cut at eight standard deviations.
    Gaussian,
    Epanechnikov,
}

impl KernelKind {
    pub fn eval(self, z: f64) -> f64 {
        match self {
            KernelKind::Gaussian => {
                if z.abs() > 8.0 {
                    0.0
                } else {
                    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
                }
            }
            KernelKind::Epanechnikov => {
                if z.abs() >= 1.0 {
                    0.0
                } else {
                    0.75 * (1.0 - z * z)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub h: f64,
    pub trim: bool,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, h: f64, trim: bool) -> Result<Self> {
        if !(h > 0.0 && h < 0.5) {
            return Err(Error::Config(format!("bandwidth {h} outside (0, 0.5)")));
        }
        Ok(KernelSpec { kind, h, trim })
    }

    /// Rule-of-thumb bandwidth for uniform `F̂_J` values, `1 / (√12 n^{1/5})`.
    pub fn rule_of_thumb(n: usize) -> f64 {
        1.0 / (12f64.sqrt() * (n as f64).powf(0.2))
    }

    /// Gaussian kernel, rule-of-thumb bandwidth, trimming on.
    pub fn default_for(n: usize) -> Self {
        KernelSpec { kind: KernelKind::Gaussian, h: KernelSpec::rule_of_thumb(n.max(1)), trim: true }
    }

    /// `K_h(d) = K(d/h)/h`.
    pub fn weight(&self, d: f64) -> f64 {
        self.kind.eval(d / self.h) / self.h
    }
}

/// Empirical cdf counts `#{j : x_j <= x_i}`.
pub fn ecdf_counts(col: &[f64]) -> Vec<u32> {
    let n = col.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
    let mut out = vec![0u32; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && col[idx[end]] == col[idx[start]] {
            end += 1;
        }
        for &i in &idx[start..end] {
            out[i] = end as u32;
        }
        start = end;
    }
    out
}

/// Marginal empirical cdf of `column` at `x`; with `rescale` the count is
/// divided by `n + 1` instead of `n`.
pub fn empirical_margin_cdf(column: &[f64], x: f64, rescale: bool) -> f64 {
    let c = column.iter().filter(|&&v| v <= x).count() as f64;
    let n = column.len() as f64;
    if rescale {
        c / (n + 1.0)
    } else {
        c / n
    }
}

/// A dataset reduced to empirical cdf counts, in canonical row order.
#[derive(Debug, Clone)]
pub struct RankedSample {
    n: usize,
    /// `ri[k][row]`: count of conditioned column `k`.
    pub ri: Vec<Vec<u32>>,
    /// `rj[l][row]`: count of conditioning column `l`.
    pub rj: Vec<Vec<u32>>,
    /// Raw values in canonical order.
    pub xi: Vec<Vec<f64>>,
    pub xj: Vec<Vec<f64>>,
    sorted_i: Vec<Vec<f64>>,
    sorted_j: Vec<Vec<f64>>,
    /// `order[row]` is the input row stored at canonical position `row`.
    pub order: Vec<usize>,
}

impl RankedSample {
    pub fn new(ds: &Dataset) -> Self {
        let n = ds.n();
        let ri0: Vec<Vec<u32>> = (0..ds.p()).map(|k| ecdf_counts(ds.i_column(k))).collect();
        let rj0: Vec<Vec<u32>> = (0..ds.q()).map(|l| ecdf_counts(ds.j_column(l))).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            rj0.iter()
                .chain(&ri0)
                .map(|r| r[a].cmp(&r[b]))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let perm_u = |v: &Vec<u32>| order.iter().map(|&r| v[r]).collect::<Vec<u32>>();
        let perm_f = |v: &[f64]| order.iter().map(|&r| v[r]).collect::<Vec<f64>>();
        let sorted = |v: &[f64]| {
            let mut s = v.to_vec();
            s.sort_by(f64::total_cmp);
            s
        };
        RankedSample {
            n,
            ri: ri0.iter().map(perm_u).collect(),
            rj: rj0.iter().map(perm_u).collect(),
            xi: (0..ds.p()).map(|k| perm_f(ds.i_column(k))).collect(),
            xj: (0..ds.q()).map(|l| perm_f(ds.j_column(l))).collect(),
            sorted_i: (0..ds.p()).map(|k| sorted(ds.i_column(k))).collect(),
            sorted_j: (0..ds.q()).map(|l| sorted(ds.j_column(l))).collect(),
            order,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.ri.len()
    }

    pub fn q(&self) -> usize {
        self.rj.len()
    }

    /// `#{j : X_{j,k} <= x}` for conditioned column `k`.
    pub fn level_i(&self, k: usize, x: f64) -> u32 {
        self.sorted_i[k].partition_point(|&v| v <= x) as u32
    }

    /// `F̂_{J_l}(x)`.
    pub fn position_j(&self, l: usize, x: f64) -> f64 {
        self.sorted_j[l].partition_point(|&v| v <= x) as f64 / self.n as f64
    }

    /// `F̂_J` values of row `row`.
    pub fn row_position(&self, row: usize) -> Vec<f64> {
        self.rj.iter().map(|r| r[row] as f64 / self.n as f64).collect()
    }

    /// Raw value of conditioning column `l` whose `F̂_J` value is closest to `v`.
    pub fn quantile_j(&self, l: usize, v: f64) -> f64 {
        let k = (v * self.n as f64).round().clamp(1.0, self.n as f64) as usize;
        self.sorted_j[l][k - 1]
    }

    /// Raw order statistic `k` (1-based) of conditioning column `l`.
    pub fn order_stat_j(&self, l: usize, k: usize) -> f64 {
        self.sorted_j[l][k.clamp(1, self.n) - 1]
    }
}

/// Kernel-weighted conditional law: cumulative weights of every conditioned
/// column over its count levels `0..=n`.
#[derive(Debug, Clone, Default)]
pub struct CondLaw {
    acc: Vec<Vec<f64>>,
    total: f64,
}

impl CondLaw {
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Cumulative weight of column `k` up to count `level`.
    pub fn cumulative(&self, k: usize, level: u32) -> f64 {
        self.acc[k][level as usize]
    }

    /// Recomputes the law for weights `w` (one per row, canonical order).
    pub fn fill(&mut self, s: &RankedSample, w: &[f64]) -> Result<()> {
        let n = s.n();
        self.acc.resize_with(s.p(), Vec::new);
        for (k, acc) in self.acc.iter_mut().enumerate() {
            acc.clear();
            acc.resize(n + 1, 0.0);
            for (j, &wj) in w.iter().enumerate() {
                acc[s.ri[k][j] as usize] += wj;
            }
            for r in 1..=n {
                acc[r] += acc[r - 1];
            }
        }
        self.total = w.iter().sum();
        if !(self.total > 0.0) {
            return Err(Error::Estimation("zero kernel mass at the conditioning point".into()));
        }
        Ok(())
    }

    /// `F̂_{k|J}` at count level `level`.
    pub fn margin(&self, k: usize, level: u32) -> f64 {
        (self.acc[k][level as usize] / self.total).min(1.0)
    }

    /// Smallest count level whose conditional cdf reaches `u` (generalized inverse).
    ///
    /// A relative slack of 1e-12 absorbs rounding in the cumulative sums.
    pub fn quantile_level(&self, k: usize, u: f64) -> u32 {
        let acc = &self.acc[k];
        if u <= 0.0 {
            return 0;
        }
        if u >= 1.0 {
            return (acc.len() - 1) as u32;
        }
        let target = u * self.total * (1.0 - 1e-12);
        acc.partition_point(|&a| a < target) as u32
    }
}

/// Scratch buffers for grid evaluations.
#[derive(Debug, Default)]
pub struct GridScratch {
    lut: Vec<Vec<u32>>,
    bins: Vec<f64>,
    thresholds: Vec<u32>,
}

/// Which estimate of the simplified copula to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimplifiedVariant {
    /// Average of the conditional copula estimates over the retained rows.
    Avg,
    /// Empirical cdf of the conditional pseudo-observations.
    EcdfZ,
    /// Empirical copula of the conditional pseudo-observations.
    EmpcopZ,
}

/// Conditional pseudo-observations for all rows (canonical order).
#[derive(Debug, Clone)]
pub struct PseudoObs {
    p: usize,
    /// `F̂_{k|J}(X_{i,k} | X_{i,J})`, row-major `n × p`.
    pub z: Vec<f64>,
    /// Same, with denominator `W_i + K_h(0)` so that values stay below one.
    pub z_cml: Vec<f64>,
}

impl PseudoObs {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.p..(i + 1) * self.p]
    }

    pub fn row_cml(&self, i: usize) -> &[f64] {
        &self.z_cml[i * self.p..(i + 1) * self.p]
    }
}

/// Rank-space kernel smoother over one dataset.
#[derive(Debug)]
pub struct Smoother {
    pub sample: RankedSample,
    pub kern: KernelSpec,
    tab: Vec<f64>,
    retained: Vec<usize>,
    /// Rows sorted by the count of the first conditioned column.
    by_first: Vec<u32>,
    pseudo: OnceLock<std::result::Result<PseudoObs, Error>>,
}

impl Smoother {
    pub fn new(ds: &Dataset, kern: KernelSpec) -> Result<Self> {
        if ds.n() == 0 {
            return Err(Error::Data("empty dataset".into()));
        }
        let sample = RankedSample::new(ds);
        let n = sample.n();
        let tab = (0..=n).map(|d| kern.weight(d as f64 / n as f64)).collect();
        let retained = (0..n)
            .filter(|&i| {
                !kern.trim
                    || sample.rj.iter().all(|r| {
                        let v = r[i] as f64 / n as f64;
                        v > kern.h && v < 1.0 - kern.h
                    })
            })
            .collect();
        let mut by_first: Vec<u32> = (0..n as u32).collect();
        by_first.sort_by_key(|&j| sample.ri[0][j as usize]);
        Ok(Smoother { sample, kern, tab, retained, by_first, pseudo: OnceLock::new() })
    }

    pub fn n(&self) -> usize {
        self.sample.n()
    }

    pub fn p(&self) -> usize {
        self.sample.p()
    }

    /// Rows kept after trimming (all rows when trimming is off).
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    /// `K_h(0)^q`.
    pub fn self_weight(&self) -> f64 {
        self.tab[0].powi(self.sample.q() as i32)
    }

    /// Kernel weights of every row relative to row `i`.
    pub fn row_weights(&self, i: usize, out: &mut Vec<f64>) {
        let s = &self.sample;
        out.clear();
        out.resize(s.n(), 1.0);
        for r in &s.rj {
            let ki = r[i] as i64;
            for (o, &kj) in out.iter_mut().zip(r) {
                *o *= self.tab[(ki - kj as i64).unsigned_abs() as usize];
            }
        }
    }

    /// Kernel weights of every row relative to the `F̂_J` position `pos`.
    pub fn point_weights(&self, pos: &[f64], out: &mut Vec<f64>) {
        let s = &self.sample;
        let n = s.n() as f64;
        out.clear();
        out.resize(s.n(), 1.0);
        for (r, &v) in s.rj.iter().zip(pos) {
            for (o, &kj) in out.iter_mut().zip(r) {
                *o *= self.kern.weight(v - kj as f64 / n);
            }
        }
    }

    /// Kernel weights relative to a raw conditioning point `x_j`.
    pub fn raw_point_weights(&self, x_j: &[f64], out: &mut Vec<f64>) {
        let pos: Vec<f64> = x_j.iter().enumerate().map(|(l, &x)| self.sample.position_j(l, x)).collect();
        self.point_weights(&pos, out)
    }

    pub fn law(&self, w: &[f64]) -> Result<CondLaw> {
        let mut law = CondLaw::default();
        law.fill(&self.sample, w)?;
        Ok(law)
    }

    /// `Ĉ_{I|J}(u)` for the conditional law with weights `w`.
    pub fn cond_copula_point(&self, w: &[f64], law: &CondLaw, u: &[f64]) -> f64 {
        if u.iter().any(|&x| x <= 0.0) {
            return 0.0;
        }
        let q: Vec<u32> = u.iter().enumerate().map(|(k, &x)| law.quantile_level(k, x)).collect();
        let s = &self.sample;
        let mut acc = 0.0;
        for (j, &wj) in w.iter().enumerate() {
            if s.ri.iter().zip(&q).all(|(r, &qk)| r[j] <= qk) {
                acc += wj;
            }
        }
        (acc / law.total()).min(1.0)
    }

    /// `Ĉ_{I|J}` at many points (row-major, dimension `p`).
    pub fn cond_copula_points(&self, w: &[f64], law: &CondLaw, pts: &[f64]) -> Vec<f64> {
        let s = &self.sample;
        let p = s.p();
        let npts = pts.len() / p;
        let levels: Vec<u32> = pts
            .chunks(p)
            .flat_map(|u| u.iter().enumerate().map(|(k, &x)| law.quantile_level(k, x)).collect::<Vec<_>>())
            .collect();
        let total = law.total();
        if p != 2 {
            return levels
                .chunks(p)
                .map(|q| {
                    let mut acc = 0.0;
                    for (j, &wj) in w.iter().enumerate() {
                        if s.ri.iter().zip(q).all(|(r, &qk)| r[j] <= qk) {
                            acc += wj;
                        }
                    }
                    (acc / total).min(1.0)
                })
                .collect();
        }
        let n = s.n();
        let mut queries: Vec<usize> = (0..npts).collect();
        queries.sort_by_key(|&a| levels[2 * a]);
        let mut fen = vec![0.0; n + 1];
        let mut out = vec![0.0; npts];
        let mut next = 0;
        for &a in &queries {
            let (q1, q2) = (levels[2 * a], levels[2 * a + 1]);
            while next < n && s.ri[0][self.by_first[next] as usize] <= q1 {
                let j = self.by_first[next] as usize;
                let mut idx = s.ri[1][j] as usize;
                while idx <= n {
                    fen[idx] += w[j];
                    idx += idx & idx.wrapping_neg();
                }
                next += 1;
            }
            let mut acc = 0.0;
            let mut idx = q2 as usize;
            while idx > 0 {
                acc += fen[idx];
                idx &= idx - 1;
            }
            out[a] = (acc / total).min(1.0);
        }
        out
    }

    /// `Ĉ_{I|J}` at every point of `grid` (dimension `p`), written to `out`.
    pub fn cond_copula_grid(
        &self,
        w: &[f64],
        law: &CondLaw,
        grid: &TensorGrid,
        scratch: &mut GridScratch,
        out: &mut [f64],
    ) {
        let s = &self.sample;
        let p = s.p();
        let m = grid.m();
        let n = s.n();
        scratch.lut.resize_with(p, Vec::new);
        for k in 0..p {
            scratch.thresholds.clear();
            scratch.thresholds.extend(grid.nodes.iter().map(|&u| law.quantile_level(k, u)));
            let lut = &mut scratch.lut[k];
            lut.clear();
            let mut a = 0;
            for r in 0..=n as u32 {
                while a < m && scratch.thresholds[a] < r {
                    a += 1;
                }
                lut.push(a as u32);
            }
        }
        let side = m + 1;
        let cells = side.pow(p as u32);
        scratch.bins.clear();
        scratch.bins.resize(cells, 0.0);
        for (j, &wj) in w.iter().enumerate() {
            let mut idx = 0;
            let mut stride = 1;
            for k in 0..p {
                idx += scratch.lut[k][s.ri[k][j] as usize] as usize * stride;
                stride *= side;
            }
            scratch.bins[idx] += wj;
        }
        cumulate(&mut scratch.bins, side, p);
        let total = law.total();
        for (flat, o) in out.iter_mut().enumerate() {
            let mut rem = flat;
            let mut idx = 0;
            let mut stride = 1;
            for _ in 0..p {
                idx += (rem % m) * stride;
                rem /= m;
                stride *= side;
            }
            *o = (scratch.bins[idx] / total).min(1.0);
        }
    }

    /// Conditional pseudo-observations `Ẑ_{i,I|J}` for every row.
    pub fn pseudo_obs(&self) -> Result<&PseudoObs> {
        self.pseudo
            .get_or_init(|| self.compute_pseudo())
            .as_ref()
            .map_err(Clone::clone)
    }

    fn compute_pseudo(&self) -> Result<PseudoObs> {
        let s = &self.sample;
        let (n, p) = (s.n(), s.p());
        let mut z = vec![0.0; n * p];
        let mut z_cml = vec![0.0; n * p];
        let mut w = Vec::new();
        let mut law = CondLaw::default();
        let k0 = self.self_weight();
        for i in 0..n {
            self.row_weights(i, &mut w);
            law.fill(s, &w)?;
            for k in 0..p {
                let a = law.acc[k][s.ri[k][i] as usize];
                z[i * p + k] = (a / law.total).min(1.0);
                z_cml[i * p + k] = (a / (law.total + k0)).min(1.0);
            }
        }
        Ok(PseudoObs { p, z, z_cml })
    }

    /// Simplified-copula estimate on every point of `grid`.
    pub fn simplified_grid(&self, variant: SimplifiedVariant, grid: &TensorGrid) -> Result<Vec<f64>> {
        let len = grid.len();
        let rows = self.retained();
        if rows.is_empty() {
            return Err(Error::Data("no rows left after trimming".into()));
        }
        match variant {
            SimplifiedVariant::Avg => {
                let mut sum = vec![0.0; len];
                let mut buf = vec![0.0; len];
                let mut w = Vec::new();
                let mut law = CondLaw::default();
                let mut scratch = GridScratch::default();
                for &i in rows {
                    self.row_weights(i, &mut w);
                    law.fill(&self.sample, &w)?;
                    self.cond_copula_grid(&w, &law, grid, &mut scratch, &mut buf);
                    for (a, b) in sum.iter_mut().zip(&buf) {
                        *a += b;
                    }
                }
                let r = rows.len() as f64;
                Ok(sum.into_iter().map(|v| v / r).collect())
            }
            SimplifiedVariant::EcdfZ | SimplifiedVariant::EmpcopZ => {
                let pts = self.retained_pseudo(variant == SimplifiedVariant::EmpcopZ)?;
                Ok(ecdf_on_grid(&pts, self.p(), grid))
            }
        }
    }

    /// Simplified-copula estimate at a single point.
    pub fn simplified_at(&self, variant: SimplifiedVariant, u: &[f64]) -> Result<f64> {
        let rows = self.retained();
        if rows.is_empty() {
            return Err(Error::Data("no rows left after trimming".into()));
        }
        match variant {
            SimplifiedVariant::Avg => {
                let mut w = Vec::new();
                let mut law = CondLaw::default();
                let mut sum = 0.0;
                for &i in rows {
                    self.row_weights(i, &mut w);
                    law.fill(&self.sample, &w)?;
                    sum += self.cond_copula_point(&w, &law, u);
                }
                Ok(sum / rows.len() as f64)
            }
            SimplifiedVariant::EcdfZ | SimplifiedVariant::EmpcopZ => {
                let p = self.p();
                let pts = self.retained_pseudo(variant == SimplifiedVariant::EmpcopZ)?;
                let c = pts.chunks(p).filter(|z| z.iter().zip(u).all(|(a, b)| a <= b)).count();
                Ok(c as f64 / rows.len() as f64)
            }
        }
    }

    /// Simplified-copula estimate at many points (row-major, dimension `p`).
    pub fn simplified_points(&self, variant: SimplifiedVariant, pts: &[f64]) -> Result<Vec<f64>> {
        let rows = self.retained();
        if rows.is_empty() {
            return Err(Error::Data("no rows left after trimming".into()));
        }
        let p = self.p();
        match variant {
            SimplifiedVariant::Avg => {
                let mut sum = vec![0.0; pts.len() / p];
                let mut w = Vec::new();
                let mut law = CondLaw::default();
                for &i in rows {
                    self.row_weights(i, &mut w);
                    law.fill(&self.sample, &w)?;
                    for (a, b) in sum.iter_mut().zip(self.cond_copula_points(&w, &law, pts)) {
                        *a += b;
                    }
                }
                let r = rows.len() as f64;
                Ok(sum.into_iter().map(|v| v / r).collect())
            }
            SimplifiedVariant::EcdfZ | SimplifiedVariant::EmpcopZ => {
                let z = self.retained_pseudo(variant == SimplifiedVariant::EmpcopZ)?;
                Ok(ecdf_at_points(&z, p, pts))
            }
        }
    }

    /// Retained pseudo-observations paired with raw conditioning values.
    pub fn pseudo_sample(&self) -> Result<PseudoSample> {
        let s = &self.sample;
        let z = self.retained_pseudo(false)?;
        let x = self.retained.iter().flat_map(|&i| s.xj.iter().map(move |c| c[i])).collect();
        Ok(PseudoSample { p: s.p(), q: s.q(), z, x })
    }

    /// Pseudo-observations of the retained rows (row-major), optionally
    /// replaced by their normalized ranks among the retained rows.
    pub fn retained_pseudo(&self, reranked: bool) -> Result<Vec<f64>> {
        let ps = self.pseudo_obs()?;
        let p = self.p();
        let rows = self.retained();
        let mut pts: Vec<f64> = rows.iter().flat_map(|&i| ps.row(i).iter().copied()).collect();
        if reranked {
            rerank_rows(&mut pts, p);
        }
        Ok(pts)
    }
}

/// Empirical cdf of row-major `pts` (dimension `p`) at row-major `at`.
pub fn ecdf_at_points(pts: &[f64], p: usize, at: &[f64]) -> Vec<f64> {
    let r = (pts.len() / p) as f64;
    at.chunks(p)
        .map(|u| pts.chunks(p).filter(|z| z.iter().zip(u).all(|(a, b)| a <= b)).count() as f64 / r)
        .collect()
}

/// Conditional pseudo-observations paired with raw conditioning values.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSample {
    pub p: usize,
    pub q: usize,
    /// Row-major `n × p` values in `[0,1]`.
    pub z: Vec<f64>,
    /// Row-major `n × q` raw conditioning values.
    pub x: Vec<f64>,
}

impl PseudoSample {
    pub fn new(p: usize, q: usize, z: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        if p == 0 || q == 0 || z.len() % p != 0 || x.len() % q != 0 || z.len() / p != x.len() / q {
            return Err(Error::Data("pseudo-sample shape mismatch".into()));
        }
        if z.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Data("pseudo-observations must lie in [0,1]".into()));
        }
        Ok(PseudoSample { p, q, z, x })
    }

    pub fn len(&self) -> usize {
        self.z.len() / self.p
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn z_row(&self, i: usize) -> &[f64] {
        &self.z[i * self.p..(i + 1) * self.p]
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.q..(i + 1) * self.q]
    }
}

/// Replaces each coordinate of row-major points by its empirical cdf value.
pub fn rerank_rows(pts: &mut [f64], p: usize) {
    let r = pts.len() / p;
    for k in 0..p {
        let col: Vec<f64> = pts.chunks(p).map(|z| z[k]).collect();
        let c = ecdf_counts(&col);
        for (i, z) in pts.chunks_mut(p).enumerate() {
            z[k] = c[i] as f64 / r as f64;
        }
    }
}

/// In-place cumulative sums of a `side^dim` array along every axis.
pub fn cumulate(bins: &mut [f64], side: usize, dim: usize) {
    let mut stride = 1;
    for _ in 0..dim {
        for idx in 0..bins.len() {
            if (idx / stride) % side != 0 {
                bins[idx] += bins[idx - stride];
            }
        }
        stride *= side;
    }
}

/// Empirical cdf of row-major points (dimension `p`) at every grid point.
pub fn ecdf_on_grid(pts: &[f64], p: usize, grid: &TensorGrid) -> Vec<f64> {
    let m = grid.m();
    let side = m + 1;
    let mut bins = vec![0.0; side.pow(p as u32)];
    let r = pts.len() / p;
    for z in pts.chunks(p) {
        let mut idx = 0;
        let mut stride = 1;
        for &v in z {
            // node a counts the point iff v <= nodes[a]
            idx += grid.nodes.partition_point(|&u| u < v) * stride;
            stride *= side;
        }
        bins[idx] += 1.0;
    }
    cumulate(&mut bins, side, p);
    (0..grid.len())
        .map(|flat| {
            let mut rem = flat;
            let mut idx = 0;
            let mut stride = 1;
            for _ in 0..p {
                idx += (rem % m) * stride;
                rem /= m;
                stride *= side;
            }
            bins[idx] / r as f64
        })
        .collect()
}

/// `F̂_{k|J}(x | x_J)` (normalized Nadaraya–Watson form).
pub fn cond_margin_cdf(ds: &Dataset, k: usize, x: f64, x_j: &[f64], kern: KernelSpec) -> Result<f64> {
    let sm = Smoother::new(ds, kern)?;
    let mut w = Vec::new();
    sm.raw_point_weights(x_j, &mut w);
    let law = sm.law(&w)?;
    Ok(law.margin(k, sm.sample.level_i(k, x)))
}

/// `F̂_{I|J}(x_I | x_J)`. With `normalized` the kernel sum is divided by the
/// total kernel mass; otherwise by `n`.
pub fn cond_joint_cdf(ds: &Dataset, x_i: &[f64], x_j: &[f64], kern: KernelSpec, normalized: bool) -> Result<f64> {
    let sm = Smoother::new(ds, kern)?;
    let s = &sm.sample;
    let mut w = Vec::new();
    sm.raw_point_weights(x_j, &mut w);
    let total: f64 = w.iter().sum();
    if normalized && !(total > 0.0) {
        return Err(Error::Estimation("zero kernel mass at the conditioning point".into()));
    }
    let lv: Vec<u32> = x_i.iter().enumerate().map(|(k, &x)| s.level_i(k, x)).collect();
    let num: f64 = w
        .iter()
        .enumerate()
        .filter(|&(j, _)| s.ri.iter().zip(&lv).all(|(r, &l)| r[j] <= l))
        .map(|(_, &wj)| wj)
        .sum();
    Ok(if normalized { num / total } else { num / s.n() as f64 })
}

/// `Ĉ_{I|J}(u | x_J)`.
pub fn cond_copula(ds: &Dataset, u: &[f64], x_j: &[f64], kern: KernelSpec) -> Result<f64> {
    let sm = Smoother::new(ds, kern)?;
    let mut w = Vec::new();
    sm.raw_point_weights(x_j, &mut w);
    let law = sm.law(&w)?;
    Ok(sm.cond_copula_point(&w, &law, u))
}

/// Simplified-copula estimate `Ĉ_{s,I|J}(u)`.
pub fn simplified_copula(ds: &Dataset, u: &[f64], kern: KernelSpec, variant: SimplifiedVariant) -> Result<f64> {
    Smoother::new(ds, kern)?.simplified_at(variant, u)
}

/// Conditional pseudo-observations in the input row order (row-major `n × p`).
pub fn cond_pseudo_obs(ds: &Dataset, kern: KernelSpec) -> Result<Vec<Vec<f64>>> {
    let sm = Smoother::new(ds, kern)?;
    let ps = sm.pseudo_obs()?;
    let mut out = vec![Vec::new(); ds.n()];
    for (row, &orig) in sm.sample.order.iter().enumerate() {
        out[orig] = ps.row(row).to_vec();
    }
    Ok(out)
}
