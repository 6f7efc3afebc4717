//! Resampling schemes, bootstrapped statistics and p-values.
//!
//! Every scheme produces a full dataset of the original size whose
//! conditioned columns are raw values (nonparametric and conditional
//! schemes) or draws on `(0,1)` (pseudo-observation and parametric schemes);
//! the statistic is then recomputed on it by the usual pipeline.

use crate::copulas::{CopulaFamily, CopulaModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, StreamRng};
use crate::statistic::{Context, StatId};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Environment variable fixing the number of worker threads.
pub const THREADS_ENV: &str = "CONDCOP_THREADS";

/// Largest tolerated fraction of dropped replicates.
pub const MAX_DROP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeId {
    #[serde(rename = "bootNP")]
    BootNP,
    #[serde(rename = "bootPseudoInd")]
    BootPseudoInd,
    #[serde(rename = "bootPseudoNP")]
    BootPseudoNP,
    #[serde(rename = "bootCond")]
    BootCond,
    #[serde(rename = "bootPI")]
    BootPI,
    #[serde(rename = "bootPC")]
    BootPC,
}

impl SchemeId {
    pub const ALL: [SchemeId; 6] = [
        SchemeId::BootNP,
        SchemeId::BootPseudoInd,
        SchemeId::BootPseudoNP,
        SchemeId::BootCond,
        SchemeId::BootPI,
        SchemeId::BootPC,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SchemeId::BootNP => "bootNP",
            SchemeId::BootPseudoInd => "bootPseudoInd",
            SchemeId::BootPseudoNP => "bootPseudoNP",
            SchemeId::BootCond => "bootCond",
            SchemeId::BootPI => "bootPI",
            SchemeId::BootPC => "bootPC",
        }
    }

    pub fn default_recentering(self) -> Recentering {
        match self {
            SchemeId::BootPI | SchemeId::BootPseudoInd => Recentering::Raw,
            _ => Recentering::Centered,
        }
    }

    /// Whether the scheme draws from fitted or estimated quantities that
    /// differ between kernel and box statistics.
    fn depends_on_framework(self) -> bool {
        !matches!(self, SchemeId::BootNP | SchemeId::BootCond)
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|x| x.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown bootstrap scheme '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recentering {
    /// Recomputed on the bootstrap sample and recentred by the original estimates.
    Centered,
    /// Recomputed on the bootstrap sample alone.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub scheme: SchemeId,
    /// Scheme default when absent.
    #[serde(default)]
    pub recentering: Option<Recentering>,
    pub n_boot: usize,
}

impl SchemeSpec {
    pub fn new(scheme: SchemeId, n_boot: usize) -> Self {
        SchemeSpec { scheme, recentering: None, n_boot }
    }

    pub fn recentering(&self) -> Recentering {
        self.recentering.unwrap_or(self.scheme.default_recentering())
    }
}

/// Outcome of a bootstrap test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub stat_id: StatId,
    pub value: f64,
    pub p_value: Option<f64>,
    pub boot_values: Vec<f64>,
    pub scheme: SchemeId,
    pub recentering: Recentering,
    pub seed: u64,
    pub n_boot: usize,
    pub n_dropped: usize,
    /// False when more than a tenth of the replicates were dropped.
    pub valid: bool,
}

/// `(1 + #{T* ≥ T}) / (N + 1)`.
pub fn p_value(t_obs: f64, boot: &[f64]) -> Result<f64> {
    if boot.is_empty() {
        return Err(Error::Numerical("no valid bootstrap replicate".into()));
    }
    let above = boot.iter().filter(|&&t| t >= t_obs).count();
    Ok((1 + above) as f64 / (boot.len() + 1) as f64)
}

/// Original-sample quantities a scheme draws from.
enum Source {
    Rows,
    Cond,
    Pseudo { p: usize, z: Vec<f64>, x: Vec<f64>, paired: bool },
    Indep { family: CopulaFamily, theta: f64 },
    KernelCond { family: CopulaFamily, thetas: Vec<f64> },
    BoxCond { family: CopulaFamily, thetas: Vec<f64>, labels: Vec<usize> },
}

/// Draws bootstrap samples for a statistic's framework.
pub struct Resampler<'a> {
    orig: &'a Context,
    scheme: SchemeId,
    source: Source,
}

fn j_rows(ds: &Dataset) -> Vec<f64> {
    (0..ds.n()).flat_map(|i| (0..ds.q()).map(move |l| ds.j_column(l)[i])).collect()
}

impl<'a> Resampler<'a> {
    /// Fits what the scheme needs on the original sample of `orig`. The
    /// framework (kernel or boxes) follows `orig`'s statistic.
    pub fn new(orig: &'a Context, scheme: SchemeId) -> Result<Self> {
        let ds = orig.dataset();
        let boxed = orig.stat().is_box();
        let family = orig.config().family;
        let need_pair = || {
            if ds.p() != 2 {
                Err(Error::Config(format!("{scheme} needs exactly two conditioned columns")))
            } else {
                Ok(())
            }
        };
        let source = match scheme {
            SchemeId::BootNP => Source::Rows,
            SchemeId::BootCond => {
                orig.smoother()?;
                Source::Cond
            }
            SchemeId::BootPseudoInd | SchemeId::BootPseudoNP => {
                let paired = scheme == SchemeId::BootPseudoNP;
                if boxed {
                    Source::Pseudo { p: ds.p(), z: orig.box_fit()?.row_pseudo(), x: j_rows(ds), paired }
                } else {
                    let ps = orig.smoother()?.pseudo_sample()?;
                    Source::Pseudo { p: ds.p(), z: ps.z, x: ps.x, paired }
                }
            }
            SchemeId::BootPI => {
                need_pair()?;
                let theta = if boxed { orig.box_thetas()?.pooled } else { orig.theta0()? };
                Source::Indep { family, theta }
            }
            SchemeId::BootPC => {
                need_pair()?;
                if boxed {
                    let fit = orig.box_fit()?;
                    Source::BoxCond { family, thetas: orig.box_thetas()?.boxes.clone(), labels: fit.part.labels(ds) }
                } else {
                    let xs: Vec<Vec<f64>> =
                        (0..ds.n()).map(|i| (0..ds.q()).map(|l| ds.j_column(l)[i]).collect()).collect();
                    Source::KernelCond { family, thetas: orig.local_thetas(&xs)? }
                }
            }
        };
        Ok(Resampler { orig, scheme, source })
    }

    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    /// One bootstrap sample.
    pub fn draw(&self, rng: &mut StreamRng) -> Result<Dataset> {
        let ds = self.orig.dataset();
        let (n, p, q) = (ds.n(), ds.p(), ds.q());
        let mut cols = vec![Vec::with_capacity(n); p + q];
        let push_j = |cols: &mut Vec<Vec<f64>>, r: usize| {
            for l in 0..q {
                cols[p + l].push(ds.j_column(l)[r]);
            }
        };
        match &self.source {
            Source::Rows => return Ok(resample_rows(ds, rng)),
            Source::Cond => {
                let sm = self.orig.smoother()?;
                let s = &sm.sample;
                let mut w = Vec::new();
                for _ in 0..n {
                    let i = rng.gen_range(0..n);
                    sm.row_weights(i, &mut w);
                    let mut acc = 0.0;
                    for v in w.iter_mut() {
                        acc += *v;
                        *v = acc;
                    }
                    let t = rng.gen::<f64>() * acc;
                    let j = w.partition_point(|&c| c <= t).min(n - 1);
                    for k in 0..p {
                        cols[k].push(s.xi[k][j]);
                    }
                    for l in 0..q {
                        cols[p + l].push(s.xj[l][i]);
                    }
                }
            }
            Source::Pseudo { p: pz, z, x, paired } => {
                let m = z.len() / pz;
                for _ in 0..n {
                    let a = rng.gen_range(0..m);
                    let b = if *paired { a } else { rng.gen_range(0..m) };
                    for k in 0..p {
                        cols[k].push(z[a * p + k]);
                    }
                    for l in 0..q {
                        cols[p + l].push(x[b * q + l]);
                    }
                }
            }
            Source::Indep { family, theta } => {
                let model = CopulaModel::new(*family, *theta)?;
                for _ in 0..n {
                    let r = rng.gen_range(0..n);
                    push_j(&mut cols, r);
                    let [u, v] = model.sample_pair(rng);
                    cols[0].push(u);
                    cols[1].push(v);
                }
            }
            Source::KernelCond { family, thetas } | Source::BoxCond { family, thetas, .. } => {
                let labels = match &self.source {
                    Source::BoxCond { labels, .. } => Some(labels),
                    _ => None,
                };
                for _ in 0..n {
                    let r = rng.gen_range(0..n);
                    push_j(&mut cols, r);
                    let theta = match labels {
                        Some(l) => thetas[l[r]],
                        None => thetas[r],
                    };
                    let [u, v] = CopulaModel::new(*family, theta)?.sample_pair(rng);
                    cols[0].push(u);
                    cols[1].push(v);
                }
            }
        }
        Dataset::new(cols, (0..p).collect(), (p..p + q).collect())
    }
}

/// Rows drawn with replacement.
pub fn resample_rows(ds: &Dataset, rng: &mut StreamRng) -> Dataset {
    let n = ds.n();
    let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    ds.select(&rows)
}

/// Bootstrapped statistic of `boot` relative to the original context.
pub fn boot_statistic(orig: &Context, boot: &Context, recentering: Recentering) -> Result<f64> {
    match recentering {
        Recentering::Raw => boot.value(),
        Recentering::Centered => boot.centered_value(orig),
    }
}

fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()).filter(|&t| t > 0)
}

/// Runs `f` on a pool of `threads` workers, or on the current pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads.or_else(threads_from_env) {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn check_scheme(stat: StatId, spec: &SchemeSpec) -> Result<()> {
    if spec.n_boot == 0 {
        return Err(Error::Config("at least one bootstrap replicate is required".into()));
    }
    if stat == StatId::TCvm2
        && spec.recentering() == Recentering::Centered
        && !matches!(spec.scheme, SchemeId::BootNP | SchemeId::BootCond)
    {
        return Err(Error::Config(format!("centered {stat} is only available with bootNP or bootCond")));
    }
    Ok(())
}

/// Bootstrap tests of several statistics on one sample. Statistics whose
/// scheme draws from the same fitted quantities share replicates; replicate
/// `b` of a group uses a random stream derived from `seed`, the group and `b`
/// only, so results do not depend on the other statistics or on threading.
pub fn run_tests(orig: &[Context], spec: &SchemeSpec, seed: u64) -> Result<Vec<TestResult>> {
    for c in orig {
        check_scheme(c.stat(), spec)?;
    }
    let recentering = spec.recentering();
    let group_of = |c: &Context| if spec.scheme.depends_on_framework() && c.stat().is_box() { 1u64 } else { 0 };
    let mut out: Vec<Option<TestResult>> = vec![None; orig.len()];
    for g in [0u64, 1] {
        let members: Vec<usize> = (0..orig.len()).filter(|&i| group_of(&orig[i]) == g).collect();
        if members.is_empty() {
            continue;
        }
        let values: Vec<f64> = members.iter().map(|&i| orig[i].value()).collect::<Result<_>>()?;
        let lead = &orig[members[0]];
        let sampler = Resampler::new(lead, spec.scheme)?;
        let gseed = derive_seed(seed, 0xB007 + g);
        let reps: Vec<Vec<Option<f64>>> = (0..spec.n_boot as u64)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream(gseed, b);
                let Ok(ds) = sampler.draw(&mut rng) else {
                    return vec![None; members.len()];
                };
                let Ok(base) = lead.sibling(ds) else {
                    return vec![None; members.len()];
                };
                members
                    .iter()
                    .map(|&i| {
                        let boot = base.for_stat(orig[i].stat()).ok()?;
                        boot_statistic(&orig[i], &boot, recentering).ok().filter(|v| v.is_finite())
                    })
                    .collect()
            })
            .collect();
        for (slot, &i) in members.iter().enumerate() {
            let boot_values: Vec<f64> = reps.iter().filter_map(|r| r[slot]).collect();
            let n_dropped = spec.n_boot - boot_values.len();
            let p = p_value(values[slot], &boot_values)?;
            out[i] = Some(TestResult {
                stat_id: orig[i].stat(),
                value: values[slot],
                p_value: Some(p),
                boot_values,
                scheme: spec.scheme,
                recentering,
                seed,
                n_boot: spec.n_boot,
                n_dropped,
                valid: n_dropped as f64 <= MAX_DROP_FRACTION * spec.n_boot as f64,
            });
        }
    }
    Ok(out.into_iter().map(|r| r.expect("every statistic belongs to a group")).collect())
}

/// Bootstrap test of one statistic.
pub fn run_test(orig: &Context, spec: &SchemeSpec, seed: u64) -> Result<TestResult> {
    Ok(run_tests(std::slice::from_ref(orig), spec, seed)?.remove(0))
}
