//! Statistic identifiers, test configuration and the evaluation pipeline
//! shared by observed and bootstrapped statistics.
//!
//! A [`Context`] holds one sample and its lazily computed estimates. Its
//! [`Plan`] fixes every evaluation point of a statistic (grid nodes as raw
//! conditioning values, chi-square cells, box edges, ...), so that a
//! bootstrap sample can be evaluated on the plan of the original sample.

use crate::boxes::{box_np_disc, box_param_disc, dist_points, BoxFit, BoxPartition, BoxThetas, ParamKind};
use crate::copulas::CopulaFamily;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grid::TensorGrid;
use crate::np_tests::{
    copula_points, i_2n_disc, i_chi_disc, i_points_disc, ib_grid_disc, ib_points_disc, marginal_points, node_curves,
    t0_grid_disc, t0_pairwise_disc, t_cvm_1_disc, t_cvm_2_centered, t_cvm_2_disc, ChiPartition, Discrepancy, NodeSet,
    Norm,
};
use crate::param_tests::{param_disc, LocalFitter, LocalWeighting};
use crate::smoothing::{KernelKind, KernelSpec, PseudoSample, SimplifiedVariant, Smoother};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

macro_rules! stat_ids {
    ($($v:ident => $s:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum StatId {
            $(#[serde(rename = $s)] $v,)*
        }

        impl StatId {
            pub const ALL: [StatId; 23] = [$(StatId::$v,)*];

            pub fn id(self) -> &'static str {
                match self {
                    $(StatId::$v => $s,)*
                }
            }
        }
    };
}

stat_ids! {
    T0KsGrid => "T0_KS_grid",
    T0CvmGrid => "T0_CvM_grid",
    T0tKs => "T0t_KS",
    T0tCvm => "T0t_CvM",
    TCvm1 => "T_CvM_1",
    TCvm2 => "T_CvM_2",
    IChi => "I_chi",
    IKs => "I_KS",
    I2n => "I_2n",
    ICvm => "I_CvM",
    IbKs => "Ib_KS",
    Ib2n => "Ib_2n",
    IbCvm => "Ib_CvM",
    T2c => "T2_c",
    TinfC => "Tinf_c",
    TdistC => "Tdist_c",
    TdensC => "Tdens_c",
    BarTKs => "barT_KS",
    BarTCvm => "barT_CvM",
    BarTDist => "barT_dist",
    BarT2c => "barT2_c",
    BarTinfC => "barTinf_c",
    BarTdistC => "barTdist_c",
}

impl StatId {
    /// Box-based statistics.
    pub fn is_box(self) -> bool {
        matches!(
            self,
            StatId::BarTKs | StatId::BarTCvm | StatId::BarTDist | StatId::BarT2c | StatId::BarTinfC | StatId::BarTdistC
        )
    }

    /// Statistics assuming a parametric copula family.
    pub fn is_param(self) -> bool {
        matches!(
            self,
            StatId::T2c
                | StatId::TinfC
                | StatId::TdistC
                | StatId::TdensC
                | StatId::BarT2c
                | StatId::BarTinfC
                | StatId::BarTdistC
        )
    }

    fn param_kind(self) -> Option<ParamKind> {
        match self {
            StatId::T2c | StatId::BarT2c => Some(ParamKind::T2),
            StatId::TinfC | StatId::BarTinfC => Some(ParamKind::Tinf),
            StatId::TdistC | StatId::BarTdistC => Some(ParamKind::Dist),
            StatId::TdensC => Some(ParamKind::Dens),
            _ => None,
        }
    }
}

impl fmt::Display for StatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for StatId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StatId::ALL
            .into_iter()
            .find(|x| x.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown statistic '{s}'")))
    }
}

/// Settings shared by all statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestConfig {
    pub kernel: KernelKind,
    /// Bandwidth on the rank scale; rule of thumb when absent.
    pub h: Option<f64>,
    pub trim: bool,
    /// Quadrature nodes per axis.
    pub grid_m: usize,
    pub simplified: SimplifiedVariant,
    /// Copula family of the parametric statistics and parametric bootstraps.
    pub family: CopulaFamily,
    pub local: LocalWeighting,
    pub boxes_m: usize,
    pub box_min_count: usize,
    pub chi_z_parts: usize,
    /// Chi-square splits per conditioning column; five on the first, none elsewhere when absent.
    pub chi_x_parts: Option<Vec<usize>>,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            kernel: KernelKind::Gaussian,
            h: None,
            trim: true,
            grid_m: 20,
            simplified: SimplifiedVariant::Avg,
            family: CopulaFamily::Gaussian,
            local: LocalWeighting::AtObs,
            boxes_m: 5,
            box_min_count: crate::boxes::MIN_COUNT,
            chi_z_parts: 2,
            chi_x_parts: None,
        }
    }
}

impl TestConfig {
    pub fn kernel_for(&self, n: usize) -> Result<KernelSpec> {
        KernelSpec::new(self.kernel, self.h.unwrap_or_else(|| KernelSpec::rule_of_thumb(n)), self.trim)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(h) = self.h {
            KernelSpec::new(self.kernel, h, self.trim)?;
        }
        if self.grid_m == 0 || self.boxes_m == 0 || self.chi_z_parts == 0 {
            return Err(Error::Config("grid, box and cell counts must be positive".into()));
        }
        Ok(())
    }

    fn x_parts(&self, q: usize) -> Vec<usize> {
        self.chi_x_parts.clone().unwrap_or_else(|| {
            let mut v = vec![1; q];
            v[0] = 5;
            v
        })
    }

    fn partition(&self, ds: &Dataset) -> Result<BoxPartition> {
        let mut splits = vec![1; ds.q()];
        splits[0] = self.boxes_m;
        BoxPartition::equal_mass(ds, &splits, self.box_min_count)
    }
}

/// Evaluation points of a statistic, fixed by one sample.
#[derive(Debug, Clone)]
pub enum Plan {
    Grid { nodes: NodeSet, ugrid: TensorGrid },
    Cvm1 { u: Vec<f64>, cond: Vec<Vec<f64>> },
    /// Raw retained rows `(x_I, x_J)`.
    Cvm2 { rows: Vec<(Vec<f64>, Vec<f64>)> },
    Chi(ChiPartition),
    Points(PseudoSample),
    I2n { zgrid: TensorGrid, nodes: NodeSet },
    /// Copula-scale points of dimension `p + q`.
    IbPoints(Vec<f64>),
    IbGrid(TensorGrid),
    Local { nodes: NodeSet },
    Boxes { part: BoxPartition, pts: Vec<f64> },
}

/// Estimates of one sample shared by every statistic computed on it.
#[derive(Debug)]
struct Shared {
    ds: Dataset,
    cfg: TestConfig,
    kern: KernelSpec,
    sm: OnceLock<Result<Smoother>>,
    boxes: OnceLock<Result<BoxFit>>,
    box_thetas: OnceLock<Result<BoxThetas>>,
    theta0: OnceLock<Result<f64>>,
}

/// One sample with its estimates, viewed through a given statistic.
#[derive(Debug)]
pub struct Context {
    sh: Arc<Shared>,
    stat: StatId,
    plan: OnceLock<Result<Plan>>,
    disc: OnceLock<Result<Discrepancy>>,
}

fn get<T>(cell: &OnceLock<Result<T>>, f: impl FnOnce() -> Result<T>) -> Result<&T> {
    cell.get_or_init(f).as_ref().map_err(Clone::clone)
}

impl Context {
    /// Context with the bandwidth chosen for this sample's size.
    pub fn new(ds: Dataset, cfg: TestConfig, stat: StatId) -> Result<Self> {
        cfg.validate()?;
        let kern = cfg.kernel_for(ds.n())?;
        Self::with_kernel(ds, cfg, stat, kern)
    }

    pub fn with_kernel(ds: Dataset, cfg: TestConfig, stat: StatId, kern: KernelSpec) -> Result<Self> {
        if ds.n() < 2 {
            return Err(Error::Data("at least two observations are required".into()));
        }
        let sh = Shared {
            ds,
            cfg,
            kern,
            sm: OnceLock::new(),
            boxes: OnceLock::new(),
            box_thetas: OnceLock::new(),
            theta0: OnceLock::new(),
        };
        Self::from_shared(Arc::new(sh), stat)
    }

    fn from_shared(sh: Arc<Shared>, stat: StatId) -> Result<Self> {
        if stat.is_param() && sh.ds.p() != 2 {
            return Err(Error::Config(format!("{stat} needs exactly two conditioned columns")));
        }
        Ok(Context { sh, stat, plan: OnceLock::new(), disc: OnceLock::new() })
    }

    /// The same sample and estimates viewed through another statistic.
    pub fn for_stat(&self, stat: StatId) -> Result<Self> {
        Self::from_shared(Arc::clone(&self.sh), stat)
    }

    /// A context for another sample sharing the statistic, settings and bandwidth.
    pub fn sibling(&self, ds: Dataset) -> Result<Self> {
        Self::with_kernel(ds, self.sh.cfg.clone(), self.stat, self.sh.kern)
    }

    pub fn dataset(&self) -> &Dataset {
        &self.sh.ds
    }

    pub fn config(&self) -> &TestConfig {
        &self.sh.cfg
    }

    pub fn stat(&self) -> StatId {
        self.stat
    }

    pub fn kernel(&self) -> KernelSpec {
        self.sh.kern
    }

    pub fn smoother(&self) -> Result<&Smoother> {
        get(&self.sh.sm, || Smoother::new(&self.sh.ds, self.sh.kern))
    }

    /// Box split of this sample with equal-mass boxes.
    pub fn box_fit(&self) -> Result<&BoxFit> {
        get(&self.sh.boxes, || BoxFit::new(&self.sh.ds, self.sh.cfg.partition(&self.sh.ds)?))
    }

    pub fn box_thetas(&self) -> Result<&BoxThetas> {
        get(&self.sh.box_thetas, || self.box_fit()?.thetas(self.sh.cfg.family))
    }

    /// Global likelihood estimate from the kernel pseudo-observations.
    pub fn theta0(&self) -> Result<f64> {
        get(&self.sh.theta0, || LocalFitter::new(self.smoother()?, self.sh.cfg.family)?.global()?.theta()).copied()
    }

    /// Local likelihood estimates at the raw conditioning points `xs`.
    pub fn local_thetas(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let sm = self.smoother()?;
        let fitter = LocalFitter::new(sm, self.sh.cfg.family)?;
        let theta0 = self.theta0()?;
        let pos: Vec<Vec<f64>> =
            xs.iter().map(|x| x.iter().enumerate().map(|(l, &v)| sm.sample.position_j(l, v)).collect()).collect();
        Ok(fitter.curve(&pos, self.sh.cfg.local, Some(theta0))?.theta_hat)
    }

    fn rank_node_set(&self) -> Result<NodeSet> {
        let sm = self.smoother()?;
        let x = TensorGrid::gauss_legendre(self.sh.cfg.grid_m, self.sh.ds.q(), self.sh.kern.h, 1.0 - self.sh.kern.h)?;
        NodeSet::from_rank_grid(&sm.sample, &x)
    }

    pub fn plan(&self) -> Result<&Plan> {
        get(&self.plan, || self.make_plan())
    }

    fn make_plan(&self) -> Result<Plan> {
        use StatId::*;
        let p = self.sh.ds.p();
        Ok(match self.stat {
            T0KsGrid | T0CvmGrid | T0tKs | T0tCvm => {
                Plan::Grid { nodes: self.rank_node_set()?, ugrid: TensorGrid::unit(self.sh.cfg.grid_m, p)? }
            }
            TCvm1 => {
                let (u, cond) = marginal_points(self.smoother()?);
                Plan::Cvm1 { u, cond }
            }
            TCvm2 => {
                let sm = self.smoother()?;
                let s = &sm.sample;
                let rows = sm
                    .retained()
                    .iter()
                    .map(|&i| (s.xi.iter().map(|c| c[i]).collect(), s.xj.iter().map(|c| c[i]).collect()))
                    .collect();
                Plan::Cvm2 { rows }
            }
            IChi => {
                let ps = self.smoother()?.pseudo_sample()?;
                Plan::Chi(ChiPartition::equal_mass(&ps, self.sh.cfg.chi_z_parts, &self.sh.cfg.x_parts(self.sh.ds.q()))?)
            }
            IKs | ICvm => Plan::Points(self.smoother()?.pseudo_sample()?),
            I2n => Plan::I2n { zgrid: TensorGrid::unit(self.sh.cfg.grid_m, p)?, nodes: self.rank_node_set()? },
            IbKs | IbCvm => Plan::IbPoints(copula_points(&self.smoother()?.pseudo_sample()?)),
            Ib2n => Plan::IbGrid(TensorGrid::unit(self.sh.cfg.grid_m, 1)?),
            T2c | TinfC | TdistC | TdensC => Plan::Local { nodes: self.rank_node_set()? },
            BarTKs | BarTCvm | BarTDist | BarT2c | BarTinfC | BarTdistC => {
                let fit = self.box_fit()?;
                let pts = match self.stat {
                    BarTDist => dist_points(p, 20)?.0,
                    _ => fit.pooled_points(),
                };
                Plan::Boxes { part: fit.part.clone(), pts }
            }
        })
    }

    /// Discrepancy of this sample on its own plan.
    pub fn discrepancy(&self) -> Result<&Discrepancy> {
        get(&self.disc, || self.discrepancy_on(self.plan()?, true))
    }

    /// The statistic.
    pub fn value(&self) -> Result<f64> {
        Ok(self.discrepancy()?.value())
    }

    /// Discrepancy of this sample evaluated on `plan`; `own` when the plan
    /// was built from this sample.
    pub fn discrepancy_on(&self, plan: &Plan, own: bool) -> Result<Discrepancy> {
        use StatId::*;
        let p = self.sh.ds.p();
        let variant = self.sh.cfg.simplified;
        match (self.stat, plan) {
            (T0KsGrid | T0CvmGrid | T0tKs | T0tCvm, Plan::Grid { nodes, ugrid }) => {
                let sm = self.smoother()?;
                let curves = node_curves(sm, nodes, ugrid)?;
                let norm = if matches!(self.stat, T0KsGrid | T0tKs) { Norm::Sup } else { Norm::L2 };
                if matches!(self.stat, T0KsGrid | T0CvmGrid) {
                    let simp = sm.simplified_grid(variant, ugrid)?;
                    Ok(t0_grid_disc(&curves, &simp, nodes, ugrid, norm))
                } else {
                    Ok(t0_pairwise_disc(&curves, nodes, ugrid, norm))
                }
            }
            (TCvm1, Plan::Cvm1 { u, cond }) => t_cvm_1_disc(self.smoother()?, u, cond, variant, own),
            (TCvm2, Plan::Cvm2 { .. }) => {
                if !own {
                    return Err(Error::Config("T_CvM_2 is only recentred through its own display".into()));
                }
                t_cvm_2_disc(self.smoother()?, variant)
            }
            (IChi, Plan::Chi(part)) => i_chi_disc(&self.smoother()?.pseudo_sample()?, part),
            (IKs | ICvm, Plan::Points(at)) => {
                let norm = if self.stat == IKs { Norm::Sup } else { Norm::L2 };
                i_points_disc(&self.smoother()?.pseudo_sample()?, at, norm)
            }
            (I2n, Plan::I2n { zgrid, nodes }) => i_2n_disc(&self.smoother()?.pseudo_sample()?, zgrid, nodes),
            (IbKs | IbCvm, Plan::IbPoints(at)) => {
                let sm = self.smoother()?;
                let ps = sm.pseudo_sample()?;
                let d = p + self.sh.ds.q();
                let cop = copula_points(&ps);
                let heads: Vec<f64> = at.chunks(d).flat_map(|r| r[..p].iter().copied()).collect();
                let s = sm.simplified_points(variant, &heads)?;
                let norm = if self.stat == IbKs { Norm::Sup } else { Norm::L2 };
                ib_points_disc(&cop, p, d, at, &s, norm)
            }
            (Ib2n, Plan::IbGrid(g)) => {
                let sm = self.smoother()?;
                let ps = sm.pseudo_sample()?;
                let ug = TensorGrid { dim: p, nodes: g.nodes.clone(), weights: g.weights.clone() };
                let s = sm.simplified_grid(variant, &ug)?;
                ib_grid_disc(&copula_points(&ps), p, p + self.sh.ds.q(), g, &s)
            }
            (T2c | TinfC | TdistC | TdensC, Plan::Local { nodes }) => {
                let xs: Vec<Vec<f64>> = (0..nodes.len()).map(|a| nodes.point(a)).collect();
                let weights: Vec<f64> = (0..nodes.len()).map(|a| nodes.weight(a)).collect();
                let thetas = self.local_thetas(&xs)?;
                let kind = self.stat.param_kind().expect("parametric statistic");
                param_disc(self.sh.cfg.family, &thetas, self.theta0()?, &weights, kind)
            }
            (BarTKs | BarTCvm | BarTDist | BarT2c | BarTinfC | BarTdistC, Plan::Boxes { part, pts }) => {
                let foreign;
                let (fit, thetas) = if own {
                    (self.box_fit()?, None)
                } else {
                    foreign = BoxFit::new(&self.sh.ds, part.clone())?;
                    (&foreign, Some(()))
                };
                let m = pts.len() / p;
                match self.stat {
                    BarTKs => Ok(box_np_disc(fit, pts, Norm::Sup, 1.0)),
                    BarTCvm => Ok(box_np_disc(fit, pts, Norm::L2, 1.0 / m as f64)),
                    BarTDist => Ok(box_np_disc(fit, pts, Norm::L2, 1.0 / m as f64)),
                    _ => {
                        let th = match thetas {
                            None => self.box_thetas()?.clone(),
                            Some(()) => fit.thetas(self.sh.cfg.family)?,
                        };
                        let kind = self.stat.param_kind().expect("parametric statistic");
                        box_param_disc(&th, &part.weights, self.sh.ds.n(), kind)
                    }
                }
            }
            _ => Err(Error::Config(format!("plan does not belong to {}", self.stat))),
        }
    }

    /// Bootstrap statistic recentred by the original sample `orig`.
    pub fn centered_value(&self, orig: &Context) -> Result<f64> {
        if self.stat == StatId::TCvm2 {
            let Plan::Cvm2 { rows } = orig.plan()? else {
                return Err(Error::Config("plan does not belong to T_CvM_2".into()));
            };
            return t_cvm_2_centered(orig.smoother()?, self.smoother()?, rows, self.sh.cfg.simplified);
        }
        let d = self.discrepancy_on(orig.plan()?, false)?;
        d.centered(orig.discrepancy()?)
    }
}

/// Computes a statistic on a dataset.
pub fn compute_stat(ds: &Dataset, stat: StatId, cfg: &TestConfig) -> Result<f64> {
    Context::new(ds.clone(), cfg.clone(), stat)?.value()
}
