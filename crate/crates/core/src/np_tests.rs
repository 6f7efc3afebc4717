//! Nonparametric statistics: direct comparisons of conditional and simplified
//! copula estimates, and independence statistics between the conditional
//! pseudo-observations and the conditioning variables.
//!
//! Every statistic is first produced as a [`Discrepancy`], the vector of
//! pointwise differences it aggregates, so that the same evaluation points can
//! be reused when the statistic is recomputed on a bootstrap sample.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grid::TensorGrid;
use crate::smoothing::{
    cumulate, rerank_rows, CondLaw, GridScratch, KernelSpec, PseudoSample, RankedSample,
    SimplifiedVariant, Smoother,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    /// `scale · max |v|`.
    Sup,
    /// `scale · Σ w v²`.
    L2,
}

/// Pointwise differences aggregated by a statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub norm: Norm,
    pub scale: f64,
}

impl Discrepancy {
    pub fn new(values: Vec<f64>, weights: Vec<f64>, norm: Norm, scale: f64) -> Self {
        debug_assert_eq!(values.len(), weights.len());
        Discrepancy { values, weights, norm, scale }
    }

    fn aggregate<I: Iterator<Item = (f64, f64)>>(&self, it: I) -> f64 {
        match self.norm {
            Norm::Sup => self.scale * it.map(|(v, _)| v.abs()).fold(0.0, f64::max),
            Norm::L2 => self.scale * it.map(|(v, w)| w * v * v).sum::<f64>(),
        }
    }

    pub fn value(&self) -> f64 {
        self.aggregate(self.values.iter().copied().zip(self.weights.iter().copied()))
    }

    /// The statistic of `self − orig`, keeping the weights of `self`.
    pub fn centered(&self, orig: &Discrepancy) -> Result<f64> {
        if orig.values.len() != self.values.len() {
            return Err(Error::Numerical("centered discrepancy evaluated on a different plan".into()));
        }
        Ok(self.aggregate(
            self.values.iter().zip(&orig.values).map(|(a, b)| a - b).zip(self.weights.iter().copied()),
        ))
    }
}

/// Conditioning nodes given per dimension as raw values, with one-dimensional
/// quadrature weights; the node set is their tensor product.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    pub dim_nodes: Vec<Vec<f64>>,
    pub weights_1d: Vec<f64>,
}

impl NodeSet {
    /// Maps a rank-space grid to raw values of the sample's conditioning columns.
    pub fn from_rank_grid(sample: &RankedSample, grid: &TensorGrid) -> Result<Self> {
        if grid.dim != sample.q() {
            return Err(Error::Config(format!(
                "conditioning grid has dimension {}, data has {}",
                grid.dim,
                sample.q()
            )));
        }
        let dim_nodes = (0..sample.q())
            .map(|l| grid.nodes.iter().map(|&v| sample.quantile_j(l, v)).collect())
            .collect();
        Ok(NodeSet { dim_nodes, weights_1d: grid.weights.clone() })
    }

    pub fn m(&self) -> usize {
        self.weights_1d.len()
    }

    pub fn len(&self) -> usize {
        self.m().pow(self.dim_nodes.len() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, mut idx: usize) -> Vec<f64> {
        let m = self.m();
        self.dim_nodes
            .iter()
            .map(|d| {
                let a = idx % m;
                idx /= m;
                d[a]
            })
            .collect()
    }

    pub fn weight(&self, mut idx: usize) -> f64 {
        let m = self.m();
        (0..self.dim_nodes.len())
            .map(|_| {
                let a = idx % m;
                idx /= m;
                self.weights_1d[a]
            })
            .product()
    }
}

/// Copula-argument grid and rank-space conditioning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub u: TensorGrid,
    pub x: TensorGrid,
}

impl GridSpec {
    /// Gauss–Legendre nodes on `(0,1)^p` and on `[h, 1-h]^q`.
    pub fn gauss_legendre(m: usize, p: usize, q: usize, h: f64) -> Result<Self> {
        Ok(GridSpec { u: TensorGrid::unit(m, p)?, x: TensorGrid::gauss_legendre(m, q, h, 1.0 - h)? })
    }
}

/// `Ĉ_{I|J}(· | x)` on `ugrid` for every conditioning node.
pub fn node_curves(sm: &Smoother, nodes: &NodeSet, ugrid: &TensorGrid) -> Result<Vec<Vec<f64>>> {
    let mut w = Vec::new();
    let mut law = CondLaw::default();
    let mut scratch = GridScratch::default();
    (0..nodes.len())
        .map(|a| {
            sm.raw_point_weights(&nodes.point(a), &mut w);
            law.fill(&sm.sample, &w)?;
            let mut out = vec![0.0; ugrid.len()];
            sm.cond_copula_grid(&w, &law, ugrid, &mut scratch, &mut out);
            Ok(out)
        })
        .collect()
}

/// Conditional minus simplified copula at every (node, u) pair.
pub fn t0_grid_disc(curves: &[Vec<f64>], simplified: &[f64], nodes: &NodeSet, ugrid: &TensorGrid, norm: Norm) -> Discrepancy {
    let uw = ugrid.all_weights();
    let mut values = Vec::with_capacity(curves.len() * uw.len());
    let mut weights = Vec::with_capacity(values.capacity());
    for (a, c) in curves.iter().enumerate() {
        let wa = nodes.weight(a);
        for ((x, s), w) in c.iter().zip(simplified).zip(&uw) {
            values.push(x - s);
            weights.push(wa * w);
        }
    }
    Discrepancy::new(values, weights, norm, 1.0)
}

/// Differences of conditional copulas between every ordered pair of distinct nodes.
pub fn t0_pairwise_disc(curves: &[Vec<f64>], nodes: &NodeSet, ugrid: &TensorGrid, norm: Norm) -> Discrepancy {
    let uw = ugrid.all_weights();
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for (a, ca) in curves.iter().enumerate() {
        for (b, cb) in curves.iter().enumerate() {
            if a == b {
                continue;
            }
            let wab = nodes.weight(a) * nodes.weight(b);
            for ((x, y), w) in ca.iter().zip(cb).zip(&uw) {
                values.push(x - y);
                weights.push(wab * w);
            }
        }
    }
    Discrepancy::new(values, weights, norm, 1.0)
}

/// Differences `Ĉ(U_i | x_j) − Ĉ_s(U_i)` over all conditioning points `x_j`
/// and copula points `U_i`. With `own_rows`, the conditioning points are the
/// retained rows of `sm` itself, which lets the averaged simplified estimate
/// reuse the conditional evaluations.
pub fn t_cvm_1_disc(
    sm: &Smoother,
    u_pts: &[f64],
    cond: &[Vec<f64>],
    variant: SimplifiedVariant,
    own_rows: bool,
) -> Result<Discrepancy> {
    let npts = u_pts.len() / sm.p();
    let mut w = Vec::new();
    let mut law = CondLaw::default();
    let mut mat = Vec::with_capacity(cond.len());
    for x in cond {
        sm.raw_point_weights(x, &mut w);
        law.fill(&sm.sample, &w)?;
        mat.push(sm.cond_copula_points(&w, &law, u_pts));
    }
    let simp = if own_rows && variant == SimplifiedVariant::Avg {
        let mut s = vec![0.0; npts];
        for row in &mat {
            for (a, b) in s.iter_mut().zip(row) {
                *a += b;
            }
        }
        s.into_iter().map(|v| v / cond.len() as f64).collect()
    } else {
        sm.simplified_points(variant, u_pts)?
    };
    let wt = 1.0 / (cond.len() * npts) as f64;
    let values: Vec<f64> = mat.iter().flat_map(|row| row.iter().zip(&simp).map(|(a, b)| a - b)).collect();
    let n = values.len();
    Ok(Discrepancy::new(values, vec![wt; n], Norm::L2, 1.0))
}

/// Differences `Ĉ(Ẑ_i | X_{i,J}) − Ĉ_s(Ẑ_i)` at the retained rows.
pub fn t_cvm_2_disc(sm: &Smoother, variant: SimplifiedVariant) -> Result<Discrepancy> {
    let ps = sm.pseudo_obs()?;
    let rows = sm.retained();
    let z = sm.retained_pseudo(false)?;
    let simp = sm.simplified_points(variant, &z)?;
    let mut w = Vec::new();
    let mut law = CondLaw::default();
    let mut values = Vec::with_capacity(rows.len());
    for (&i, s) in rows.iter().zip(&simp) {
        sm.row_weights(i, &mut w);
        law.fill(&sm.sample, &w)?;
        values.push(sm.cond_copula_point(&w, &law, ps.row(i)) - s);
    }
    let r = values.len();
    Ok(Discrepancy::new(values, vec![1.0 / r as f64; r], Norm::L2, 1.0))
}

/// Centered bootstrap version of the single-sum statistic: at every original
/// row `(x_I, x_J)`, with `z* = F̂*(x_I | x_J)`,
/// `Ĉ*(z*|x_J) − Ĉ(z*|x_J) − Ĉ*_s(z*) + Ĉ_s(z*)`.
pub fn t_cvm_2_centered(
    orig: &Smoother,
    boot: &Smoother,
    rows: &[(Vec<f64>, Vec<f64>)],
    variant: SimplifiedVariant,
) -> Result<f64> {
    let p = boot.p();
    let mut w = Vec::new();
    let mut wo = Vec::new();
    let mut law = CondLaw::default();
    let mut lawo = CondLaw::default();
    let mut zs = Vec::with_capacity(rows.len() * p);
    let mut diff = Vec::with_capacity(rows.len());
    for (xi, xj) in rows {
        boot.raw_point_weights(xj, &mut w);
        law.fill(&boot.sample, &w)?;
        let z: Vec<f64> = (0..p).map(|k| law.margin(k, boot.sample.level_i(k, xi[k]))).collect();
        orig.raw_point_weights(xj, &mut wo);
        lawo.fill(&orig.sample, &wo)?;
        diff.push(boot.cond_copula_point(&w, &law, &z) - orig.cond_copula_point(&wo, &lawo, &z));
        zs.extend(z);
    }
    let sb = boot.simplified_points(variant, &zs)?;
    let so = orig.simplified_points(variant, &zs)?;
    let total: f64 = diff.iter().zip(sb.iter().zip(&so)).map(|(d, (b, o))| (d - b + o).powi(2)).sum();
    Ok(total / rows.len() as f64)
}

/// Cells for the chi-square statistic: each pseudo-observation coordinate is
/// split at a cut point, each conditioning coordinate at interior edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiPartition {
    pub z_cuts: Vec<Vec<f64>>,
    pub x_edges: Vec<Vec<f64>>,
}

fn cell_of(v: f64, edges: &[f64]) -> usize {
    edges.partition_point(|&e| e < v)
}

/// Interior edges splitting `col` into `parts` groups of equal empirical mass.
pub fn quantile_edges(col: &[f64], parts: usize) -> Vec<f64> {
    let mut s = col.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    (1..parts).map(|k| s[((k * n).div_ceil(parts)).clamp(1, n) - 1]).collect()
}

impl ChiPartition {
    /// Equal-mass cells: `z_parts` per pseudo-observation coordinate and
    /// `x_parts[l]` per conditioning coordinate.
    pub fn equal_mass(ps: &PseudoSample, z_parts: usize, x_parts: &[usize]) -> Result<Self> {
        if ps.is_empty() {
            return Err(Error::Data("empty pseudo-sample".into()));
        }
        if x_parts.len() != ps.q {
            return Err(Error::Config("one split count per conditioning column is required".into()));
        }
        if x_parts.iter().product::<usize>() < 2 || z_parts.pow(ps.p as u32) < 2 {
            return Err(Error::Config("the chi-square statistic needs at least two cells per side".into()));
        }
        let n = ps.len();
        let z_cuts = (0..ps.p)
            .map(|k| quantile_edges(&(0..n).map(|i| ps.z_row(i)[k]).collect::<Vec<_>>(), z_parts))
            .collect();
        let x_edges = (0..ps.q)
            .map(|l| quantile_edges(&(0..n).map(|i| ps.x_row(i)[l]).collect::<Vec<_>>(), x_parts[l]))
            .collect();
        Ok(ChiPartition { z_cuts, x_edges })
    }

    fn z_cells(&self) -> usize {
        self.z_cuts.iter().map(|c| c.len() + 1).product()
    }

    fn x_cells(&self) -> usize {
        self.x_edges.iter().map(|c| c.len() + 1).product()
    }

    fn index(cuts: &[Vec<f64>], v: &[f64]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (c, &x) in cuts.iter().zip(v) {
            idx += cell_of(x, c) * stride;
            stride *= c.len() + 1;
        }
        idx
    }
}

/// `Ĝ(B×A) − Ĝ(B)Ĝ(A)` per cell, weighted by `1/(Ĝ(B)Ĝ(A))` (0 for empty margins).
pub fn i_chi_disc(ps: &PseudoSample, part: &ChiPartition) -> Result<Discrepancy> {
    if part.x_cells() < 2 {
        return Err(Error::Config("the chi-square statistic needs at least two conditioning cells".into()));
    }
    let (nb, na) = (part.z_cells(), part.x_cells());
    let n = ps.len();
    if n == 0 {
        return Err(Error::Data("empty pseudo-sample".into()));
    }
    let mut counts = vec![0usize; nb * na];
    for i in 0..n {
        let b = ChiPartition::index(&part.z_cuts, ps.z_row(i));
        let a = ChiPartition::index(&part.x_edges, ps.x_row(i));
        counts[b * na + a] += 1;
    }
    let nf = n as f64;
    let gb: Vec<f64> = (0..nb).map(|b| counts[b * na..(b + 1) * na].iter().sum::<usize>() as f64 / nf).collect();
    let ga: Vec<f64> = (0..na).map(|a| (0..nb).map(|b| counts[b * na + a]).sum::<usize>() as f64 / nf).collect();
    let mut values = Vec::with_capacity(nb * na);
    let mut weights = Vec::with_capacity(nb * na);
    for b in 0..nb {
        for a in 0..na {
            let d = gb[b] * ga[a];
            values.push(counts[b * na + a] as f64 / nf - d);
            weights.push(if d > 0.0 { 1.0 / d } else { 0.0 });
        }
    }
    Ok(Discrepancy::new(values, weights, Norm::L2, nf))
}

/// `Ĝ(z,x) − Ĝ(z,∞)Ĝ(∞,x)` at the rows of `at`, where `Ĝ` is the joint
/// empirical cdf of `ps`.
pub fn i_points_disc(ps: &PseudoSample, at: &PseudoSample, norm: Norm) -> Result<Discrepancy> {
    if ps.is_empty() || at.is_empty() {
        return Err(Error::Data("empty pseudo-sample".into()));
    }
    let n = ps.len() as f64;
    let values: Vec<f64> = (0..at.len())
        .map(|j| {
            let (zj, xj) = (at.z_row(j), at.x_row(j));
            let (mut both, mut zc, mut xc) = (0usize, 0usize, 0usize);
            for i in 0..ps.len() {
                let zi = ps.z_row(i).iter().zip(zj).all(|(a, b)| a <= b);
                let xi = ps.x_row(i).iter().zip(xj).all(|(a, b)| a <= b);
                zc += zi as usize;
                xc += xi as usize;
                both += (zi && xi) as usize;
            }
            both as f64 / n - (zc as f64 / n) * (xc as f64 / n)
        })
        .collect();
    let m = values.len();
    Ok(Discrepancy::new(values, vec![1.0 / m as f64; m], norm, 1.0))
}

/// Cumulative counts of `d`-dimensional rows on a tensor grid whose
/// per-dimension nodes are `axes[k]` (all of equal length `m`), normalised by
/// the number of rows. Index `m` along an axis stands for `+∞`.
fn cumulative_cells(rows: &[f64], d: usize, axes: &[&[f64]]) -> Vec<f64> {
    let side = axes[0].len() + 1;
    let mut bins = vec![0.0; side.pow(d as u32)];
    let n = rows.len() / d;
    for r in rows.chunks(d) {
        let mut idx = 0;
        let mut stride = 1;
        for (k, &v) in r.iter().enumerate() {
            idx += axes[k].partition_point(|&u| u < v) * stride;
            stride *= side;
        }
        bins[idx] += 1.0;
    }
    cumulate(&mut bins, side, d);
    for b in &mut bins {
        *b /= n as f64;
    }
    bins
}

/// Independence discrepancy on the tensor grid `zgrid × nodes`.
pub fn i_2n_disc(ps: &PseudoSample, zgrid: &TensorGrid, nodes: &NodeSet) -> Result<Discrepancy> {
    if ps.is_empty() {
        return Err(Error::Data("empty pseudo-sample".into()));
    }
    if zgrid.m() != nodes.m() || zgrid.dim != ps.p || nodes.dim_nodes.len() != ps.q {
        return Err(Error::Config("grid shape does not match the pseudo-sample".into()));
    }
    let (p, q, m) = (ps.p, ps.q, zgrid.m());
    let d = p + q;
    let rows: Vec<f64> = (0..ps.len()).flat_map(|i| ps.z_row(i).iter().chain(ps.x_row(i)).copied()).collect();
    let axes: Vec<&[f64]> = (0..p).map(|_| zgrid.nodes.as_slice()).chain(nodes.dim_nodes.iter().map(Vec::as_slice)).collect();
    let bins = cumulative_cells(&rows, d, &axes);
    Ok(grid_independence(&bins, p, q, m, |a| zgrid.weight(a), |b| nodes.weight(b)))
}

/// Reads `G(a,b) − G(a,∞)G(∞,b)` off cumulative cells for every grid point.
fn grid_independence<F: Fn(usize) -> f64, H: Fn(usize) -> f64>(
    bins: &[f64],
    p: usize,
    q: usize,
    m: usize,
    wz: F,
    wx: H,
) -> Discrepancy {
    let side = m + 1;
    let offset = |mut flat: usize, dims: usize, start_stride: usize| {
        let mut idx = 0;
        let mut stride = start_stride;
        for _ in 0..dims {
            idx += (flat % m) * stride;
            flat /= m;
            stride *= side;
        }
        idx
    };
    let zs = side.pow(p as u32);
    let z_inf: usize = (0..p).map(|k| m * side.pow(k as u32)).sum();
    let x_inf: usize = (0..q).map(|l| m * zs * side.pow(l as u32)).sum();
    let (nz, nx) = (m.pow(p as u32), m.pow(q as u32));
    let mut values = Vec::with_capacity(nz * nx);
    let mut weights = Vec::with_capacity(nz * nx);
    for b in 0..nx {
        let xb = offset(b, q, zs);
        for a in 0..nz {
            let za = offset(a, p, 1);
            values.push(bins[za + xb] - bins[za + x_inf] * bins[z_inf + xb]);
            weights.push(wz(a) * wx(b));
        }
    }
    Discrepancy::new(values, weights, Norm::L2, 1.0)
}

/// Rows of the pseudo-sample mapped to their empirical copula scale,
/// `(Ẑ_i, X_{i,J})` re-ranked coordinatewise (row-major, dimension `p + q`).
pub fn copula_points(ps: &PseudoSample) -> Vec<f64> {
    let mut rows: Vec<f64> = (0..ps.len()).flat_map(|i| ps.z_row(i).iter().chain(ps.x_row(i)).copied()).collect();
    rerank_rows(&mut rows, ps.p + ps.q);
    rows
}

/// `C̆(u) − Ĉ_s(u_I) Ĉ_J(u_J)` at the rows of `at` (dimension `p + q`);
/// `s_at[j]` is the simplified-copula estimate at the first `p` coordinates of row `j`.
pub fn ib_points_disc(cop: &[f64], p: usize, d: usize, at: &[f64], s_at: &[f64], norm: Norm) -> Result<Discrepancy> {
    let n = (cop.len() / d) as f64;
    if n == 0.0 {
        return Err(Error::Data("empty pseudo-sample".into()));
    }
    let values: Vec<f64> = at
        .chunks(d)
        .zip(s_at)
        .map(|(u, s)| {
            let (mut both, mut xc) = (0usize, 0usize);
            for r in cop.chunks(d) {
                let xi = r[p..].iter().zip(&u[p..]).all(|(a, b)| a <= b);
                let zi = r[..p].iter().zip(&u[..p]).all(|(a, b)| a <= b);
                xc += xi as usize;
                both += (xi && zi) as usize;
            }
            both as f64 / n - s * xc as f64 / n
        })
        .collect();
    let m = values.len();
    Ok(Discrepancy::new(values, vec![1.0 / m as f64; m], norm, 1.0))
}

/// Copula-based independence discrepancy on the tensor grid `grid^(p+q)`;
/// `s_grid` holds the simplified-copula estimate on `grid^p`.
pub fn ib_grid_disc(cop: &[f64], p: usize, d: usize, grid: &TensorGrid, s_grid: &[f64]) -> Result<Discrepancy> {
    if cop.is_empty() {
        return Err(Error::Data("empty pseudo-sample".into()));
    }
    let m = grid.m();
    let q = d - p;
    let axes: Vec<&[f64]> = (0..d).map(|_| grid.nodes.as_slice()).collect();
    let bins = cumulative_cells(cop, d, &axes);
    let zg = TensorGrid { dim: p, nodes: grid.nodes.clone(), weights: grid.weights.clone() };
    let xg = TensorGrid { dim: q, nodes: grid.nodes.clone(), weights: grid.weights.clone() };
    let mut disc = grid_independence(&bins, p, q, m, |a| zg.weight(a), |b| xg.weight(b));
    // replace the empirical I-margin by the simplified estimate
    let side = m + 1;
    let zs = side.pow(p as u32);
    let z_inf: usize = (0..p).map(|k| m * side.pow(k as u32)).sum();
    let nz = m.pow(p as u32);
    for b in 0..m.pow(q as u32) {
        let mut flat = b;
        let mut xb = 0;
        let mut stride = zs;
        for _ in 0..q {
            xb += (flat % m) * stride;
            flat /= m;
            stride *= side;
        }
        let cj = bins[z_inf + xb];
        for a in 0..nz {
            let mut f = a;
            let mut za = 0;
            let mut st = 1;
            for _ in 0..p {
                za += (f % m) * st;
                f /= m;
                st *= side;
            }
            disc.values[b * nz + a] = bins[za + xb] - s_grid[a] * cj;
        }
    }
    Ok(disc)
}

/// Aggregation used by the grid statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridNorm {
    Ks,
    Cvm,
}

impl GridNorm {
    fn norm(self) -> Norm {
        match self {
            GridNorm::Ks => Norm::Sup,
            GridNorm::Cvm => Norm::L2,
        }
    }
}

/// Grid comparison of the conditional copula with the simplified copula.
pub fn t0_grid(ds: &Dataset, kern: KernelSpec, grid: &GridSpec, norm: GridNorm, variant: SimplifiedVariant) -> Result<f64> {
    let sm = Smoother::new(ds, kern)?;
    let nodes = NodeSet::from_rank_grid(&sm.sample, &grid.x)?;
    let curves = node_curves(&sm, &nodes, &grid.u)?;
    let simp = sm.simplified_grid(variant, &grid.u)?;
    Ok(t0_grid_disc(&curves, &simp, &nodes, &grid.u, norm.norm()).value())
}

/// Grid comparison of conditional copulas between pairs of conditioning nodes.
pub fn t0_pairwise(ds: &Dataset, kern: KernelSpec, grid: &GridSpec, norm: GridNorm) -> Result<f64> {
    let sm = Smoother::new(ds, kern)?;
    let nodes = NodeSet::from_rank_grid(&sm.sample, &grid.x)?;
    let curves = node_curves(&sm, &nodes, &grid.u)?;
    Ok(t0_pairwise_disc(&curves, &nodes, &grid.u, norm.norm()).value())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomWeight {
    /// Double sum over conditioning rows and marginal pseudo-observations.
    V1,
    /// Single sum at the conditional pseudo-observations.
    V2,
}

/// Cramér–von Mises statistics with random weights.
pub fn t_cvm_randomweight(ds: &Dataset, kern: KernelSpec, variant: RandomWeight, simplified: SimplifiedVariant) -> Result<f64> {
    let sm = Smoother::new(ds, kern)?;
    match variant {
        RandomWeight::V1 => {
            let (u, cond) = marginal_points(&sm);
            Ok(t_cvm_1_disc(&sm, &u, &cond, simplified, true)?.value())
        }
        RandomWeight::V2 => Ok(t_cvm_2_disc(&sm, simplified)?.value()),
    }
}

/// Marginal empirical cdf values `Û_i` and raw `X_{i,J}` of the retained rows.
pub fn marginal_points(sm: &Smoother) -> (Vec<f64>, Vec<Vec<f64>>) {
    let s = &sm.sample;
    let n = s.n() as f64;
    let u = sm.retained().iter().flat_map(|&i| s.ri.iter().map(move |r| r[i] as f64 / n)).collect();
    let cond = sm.retained().iter().map(|&i| s.xj.iter().map(|c| c[i]).collect()).collect();
    (u, cond)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndepKind {
    Chi,
    Ks,
    L2,
    Cvm,
}

/// Settings of the independence statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct IndepConfig {
    /// Equal-mass splits per pseudo-observation coordinate (chi-square).
    pub z_parts: usize,
    /// Equal-mass splits per conditioning coordinate (chi-square).
    pub x_parts: Vec<usize>,
    /// Pseudo-observation quadrature grid (L2).
    pub zgrid: TensorGrid,
    /// Conditioning nodes as raw values (L2).
    pub nodes: NodeSet,
}

/// Independence statistics between pseudo-observations and conditioning values.
pub fn indep_stat(ps: &PseudoSample, kind: IndepKind, cfg: &IndepConfig) -> Result<f64> {
    Ok(match kind {
        IndepKind::Chi => i_chi_disc(ps, &ChiPartition::equal_mass(ps, cfg.z_parts, &cfg.x_parts)?)?.value(),
        IndepKind::Ks => i_points_disc(ps, ps, Norm::Sup)?.value(),
        IndepKind::Cvm => i_points_disc(ps, ps, Norm::L2)?.value(),
        IndepKind::L2 => i_2n_disc(ps, &cfg.zgrid, &cfg.nodes)?.value(),
    })
}

/// Copula-based independence statistics. The averaged simplified estimate
/// needs the full data and is only available through the test pipeline.
pub fn indep_copula_stat(ps: &PseudoSample, kind: IndepKind, variant: SimplifiedVariant, grid_m: usize) -> Result<f64> {
    let (p, d) = (ps.p, ps.p + ps.q);
    let z_simplified = |pts: &[f64]| -> Result<Vec<f64>> {
        let mut z = ps.z.clone();
        match variant {
            SimplifiedVariant::EcdfZ => {}
            SimplifiedVariant::EmpcopZ => rerank_rows(&mut z, p),
            SimplifiedVariant::Avg => {
                return Err(Error::Config("the averaged simplified copula needs the original data".into()))
            }
        }
        Ok(crate::smoothing::ecdf_at_points(&z, p, pts))
    };
    let cop = copula_points(ps);
    match kind {
        IndepKind::Ks | IndepKind::Cvm => {
            let heads: Vec<f64> = cop.chunks(d).flat_map(|r| r[..p].iter().copied()).collect();
            let s = z_simplified(&heads)?;
            let norm = if kind == IndepKind::Ks { Norm::Sup } else { Norm::L2 };
            Ok(ib_points_disc(&cop, p, d, &cop, &s, norm)?.value())
        }
        IndepKind::L2 => {
            let g = TensorGrid::unit(grid_m, 1)?;
            let ug = TensorGrid { dim: p, nodes: g.nodes.clone(), weights: g.weights.clone() };
            let pts: Vec<f64> = (0..ug.len()).flat_map(|i| ug.point(i)).collect();
            let s = z_simplified(&pts)?;
            Ok(ib_grid_disc(&cop, p, d, &g, &s)?.value())
        }
        IndepKind::Chi => Err(Error::Config("no copula-based chi-square statistic".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::KernelKind;

    fn sample(n: usize, seed: u64) -> Dataset {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, 0);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let x3: f64 = rng.gen();
                let a: f64 = rng.gen();
                let b: f64 = 0.5 * a + 0.5 * rng.gen::<f64>() + 0.2 * x3;
                vec![a, b, x3]
            })
            .collect();
        Dataset::from_rows(&rows, 2).unwrap()
    }

    #[test]
    fn chi_square_hand_example() {
        let mut z = Vec::new();
        let mut x = Vec::new();
        for (zz, xx, c) in [(0.25, 0.0, 20), (0.25, 1.0, 10), (0.75, 0.0, 10), (0.75, 1.0, 20)] {
            for _ in 0..c {
                z.extend([zz, 0.5]);
                x.push(xx);
            }
        }
        let ps = PseudoSample::new(2, 1, z, x).unwrap();
        let part = ChiPartition { z_cuts: vec![vec![0.5], vec![]], x_edges: vec![vec![0.5]] };
        let v = i_chi_disc(&ps, &part).unwrap().value();
        let cells = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0];
        let hand: f64 = 60.0 * cells.iter().map(|p| (p - 0.25f64).powi(2) / 0.25).sum::<f64>();
        assert!((v - hand).abs() < 1e-12);
        // factorizing counts
        let mut z = Vec::new();
        let mut x = Vec::new();
        for (zz, xx) in [(0.25, 0.0), (0.25, 1.0), (0.75, 0.0), (0.75, 1.0)] {
            for _ in 0..5 {
                z.extend([zz, 0.5]);
                x.push(xx);
            }
        }
        let ps = PseudoSample::new(2, 1, z, x).unwrap();
        assert_eq!(i_chi_disc(&ps, &part).unwrap().value(), 0.0);
        let one = ChiPartition { z_cuts: vec![vec![0.5], vec![]], x_edges: vec![vec![]] };
        assert!(matches!(i_chi_disc(&ps, &one), Err(Error::Config(_))));
    }

    #[test]
    fn discrepancy_aggregation() {
        let d = Discrepancy::new(vec![0.5, -1.0], vec![0.25, 2.0], Norm::L2, 3.0);
        assert_eq!(d.value(), 3.0 * (0.25 * 0.25 + 2.0));
        assert_eq!(d.centered(&d).unwrap(), 0.0);
        let s = Discrepancy::new(vec![0.5, -1.0], vec![0.0, 0.0], Norm::Sup, 2.0);
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn single_node_and_pairwise_definitions() {
        let ds = sample(60, 3);
        let kern = KernelSpec::new(KernelKind::Gaussian, 0.2, true).unwrap();
        let u = TensorGrid { dim: 2, nodes: vec![0.4], weights: vec![0.7] };
        let x = TensorGrid { dim: 1, nodes: vec![0.5], weights: vec![0.9] };
        let grid = GridSpec { u: u.clone(), x: x.clone() };
        let sm = Smoother::new(&ds, kern).unwrap();
        let node = NodeSet::from_rank_grid(&sm.sample, &x).unwrap();
        let c = cond_copula_at(&sm, &node.point(0), &[0.4, 0.4]);
        let s = sm.simplified_at(SimplifiedVariant::Avg, &[0.4, 0.4]).unwrap();
        let v = t0_grid(&ds, kern, &grid, GridNorm::Cvm, SimplifiedVariant::Avg).unwrap();
        assert!((v - 0.9 * 0.49 * (c - s).powi(2)).abs() < 1e-14);
        assert_eq!(t0_pairwise(&ds, kern, &grid, GridNorm::Cvm).unwrap(), 0.0);
        let full = GridSpec::gauss_legendre(5, 2, 1, 0.2).unwrap();
        let rev = GridSpec {
            u: full.u.clone(),
            x: TensorGrid {
                dim: 1,
                nodes: full.x.nodes.iter().rev().copied().collect(),
                weights: full.x.weights.iter().rev().copied().collect(),
            },
        };
        for norm in [GridNorm::Ks, GridNorm::Cvm] {
            let a = t0_pairwise(&ds, kern, &full, norm).unwrap();
            let b = t0_pairwise(&ds, kern, &rev, norm).unwrap();
            assert!(a > 0.0 && (a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }

    fn cond_copula_at(sm: &Smoother, x: &[f64], u: &[f64]) -> f64 {
        let mut w = Vec::new();
        sm.raw_point_weights(x, &mut w);
        let law = sm.law(&w).unwrap();
        sm.cond_copula_point(&w, &law, u)
    }

    #[test]
    fn three_point_double_sum_by_hand() {
        let ds = Dataset::from_rows(
            &[vec![0.3, 1.5, -1.0], vec![-0.2, 0.7, 0.4], vec![1.1, -0.4, 2.0]],
            2,
        )
        .unwrap();
        let kern = KernelSpec::new(KernelKind::Gaussian, 0.3, false).unwrap();
        let sm = Smoother::new(&ds, kern).unwrap();
        let u = [[2.0 / 3.0, 1.0], [1.0 / 3.0, 2.0 / 3.0], [1.0, 1.0 / 3.0]];
        let xs = [-1.0, 0.4, 2.0];
        let mut hand = 0.0;
        let c: Vec<Vec<f64>> = xs.iter().map(|&x| u.iter().map(|ui| cond_copula_at(&sm, &[x], ui)).collect()).collect();
        for i in 0..3 {
            let s = (c[0][i] + c[1][i] + c[2][i]) / 3.0;
            for row in &c {
                hand += (row[i] - s).powi(2);
            }
        }
        hand /= 9.0;
        let v = t_cvm_randomweight(&ds, kern, RandomWeight::V1, SimplifiedVariant::Avg).unwrap();
        assert!((v - hand).abs() < 1e-12);
    }

    #[test]
    fn independence_statistics_are_nonnegative_and_consistent() {
        for seed in 0..10 {
            let ds = sample(80, seed);
            let kern = KernelSpec::default_for(80);
            let sm = Smoother::new(&ds, kern).unwrap();
            let ps = sm.pseudo_sample().unwrap();
            let cfg = IndepConfig {
                z_parts: 2,
                x_parts: vec![5],
                zgrid: TensorGrid::unit(6, 2).unwrap(),
                nodes: NodeSet::from_rank_grid(&sm.sample, &TensorGrid::gauss_legendre(6, 1, kern.h, 1.0 - kern.h).unwrap())
                    .unwrap(),
            };
            for kind in [IndepKind::Chi, IndepKind::Ks, IndepKind::L2, IndepKind::Cvm] {
                assert!(indep_stat(&ps, kind, &cfg).unwrap() >= 0.0);
            }
            for kind in [IndepKind::Ks, IndepKind::L2, IndepKind::Cvm] {
                for v in [SimplifiedVariant::EcdfZ, SimplifiedVariant::EmpcopZ] {
                    assert!(indep_copula_stat(&ps, kind, v, 6).unwrap() >= 0.0);
                }
            }
            let ks = indep_stat(&ps, IndepKind::Ks, &cfg).unwrap();
            let d = i_points_disc(&ps, &ps, Norm::Sup).unwrap();
            assert!(d.values.iter().all(|v| v.abs() <= ks));
            for v in [RandomWeight::V1, RandomWeight::V2] {
                assert!(t_cvm_randomweight(&ds, kern, v, SimplifiedVariant::Avg).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn grid_independence_matches_direct_count() {
        let ds = sample(50, 9);
        let sm = Smoother::new(&ds, KernelSpec::default_for(50)).unwrap();
        let ps = sm.pseudo_sample().unwrap();
        let zgrid = TensorGrid::unit(4, 2).unwrap();
        let nodes = NodeSet { dim_nodes: vec![vec![0.1, 0.3, 0.5, 0.8]], weights_1d: vec![0.25; 4] };
        let d = i_2n_disc(&ps, &zgrid, &nodes).unwrap();
        let n = ps.len() as f64;
        let g = |z: &[f64], x: Option<f64>| {
            (0..ps.len())
                .filter(|&i| ps.z_row(i).iter().zip(z).all(|(a, b)| a <= b) && x.map_or(true, |x| ps.x_row(i)[0] <= x))
                .count() as f64
                / n
        };
        for b in 0..4 {
            for a in 0..16 {
                let z = zgrid.point(a);
                let x = nodes.dim_nodes[0][b];
                let direct = g(&z, Some(x)) - g(&z, None) * g(&[1.0, 1.0], Some(x));
                assert!((d.values[b * 16 + a] - direct).abs() < 1e-12, "{b} {a} {} {direct} {} {} {}", d.values[b * 16 + a], g(&z, Some(x)), g(&z, None), g(&[1.0, 1.0], Some(x)));
            }
        }
        // copula version with the empirical-copula margin equals the plain independence form
        let cop = copula_points(&ps);
        let grid = TensorGrid::unit(4, 1).unwrap();
        let zp = TensorGrid { dim: 2, nodes: grid.nodes.clone(), weights: grid.weights.clone() };
        let pts: Vec<f64> = (0..zp.len()).flat_map(|i| zp.point(i)).collect();
        let heads: Vec<f64> = cop.chunks(3).flat_map(|r| r[..2].to_vec()).collect();
        let s = crate::smoothing::ecdf_at_points(&heads, 2, &pts);
        let ib = ib_grid_disc(&cop, 2, 3, &grid, &s).unwrap();
        let axes: Vec<&[f64]> = vec![&grid.nodes, &grid.nodes, &grid.nodes];
        let bins = cumulative_cells(&cop, 3, &axes);
        let plain = grid_independence(&bins, 2, 1, 4, |a| zp.weight(a), |b| grid.weights[b]);
        assert!(ib.values.iter().zip(&plain.values).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
