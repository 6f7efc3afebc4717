//! Monte Carlo rejection rates of bootstrap tests under simulation designs.

use crate::bootstrap::{run_tests, SchemeSpec, TestResult};
use crate::copulas::CopulaFamily;
use crate::dgp::{DgpMode, DgpSpec, DgpVariant};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::statistic::{Context, StatId, TestConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;

/// Per-replication outcome of one statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub value: f64,
    pub p_value: f64,
    pub boot_values: Vec<f64>,
}

/// Rejection summary of one (design, statistic, scheme) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub family: CopulaFamily,
    pub stat_id: StatId,
    pub scheme: String,
    pub tau_max: f64,
    pub n: usize,
    pub reps: usize,
    pub rejections: usize,
    /// Replications whose test failed or was flagged invalid.
    pub invalid: usize,
    pub mean_p: f64,
    pub runtime_seconds: f64,
    pub p_values: Vec<f64>,
    pub stat_values: Vec<f64>,
    /// Bootstrap replicates of the first valid replication.
    pub first_boot_values: Vec<f64>,
}

impl McCell {
    /// Rejection fraction among valid replications.
    pub fn rate(&self) -> f64 {
        let valid = self.reps - self.invalid;
        if valid == 0 {
            f64::NAN
        } else {
            self.rejections as f64 / valid as f64
        }
    }

    /// Binomial standard error of the rejection fraction.
    pub fn std_error(&self) -> f64 {
        let r = self.rate();
        (r * (1.0 - r) / (self.reps - self.invalid).max(1) as f64).sqrt()
    }

    /// Sorted Monte Carlo statistics against sorted bootstrap replicates,
    /// matched at common probability levels.
    pub fn qq(&self) -> Vec<(f64, f64)> {
        qq_pairs(&self.stat_values, &self.first_boot_values)
    }
}

/// Quantile pairs of two samples at levels `(i + 0.5)/k`, `k` the smaller size.
pub fn qq_pairs(a: &[f64], b: &[f64]) -> Vec<(f64, f64)> {
    let sort = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s
    };
    let (sa, sb) = (sort(a), sort(b));
    let k = sa.len().min(sb.len());
    let at = |s: &[f64], t: f64| s[((t * s.len() as f64) as usize).min(s.len() - 1)];
    (0..k)
        .map(|i| {
            let t = (i as f64 + 0.5) / k as f64;
            (at(&sa, t), at(&sb, t))
        })
        .collect()
}

/// Runs `reps` replications of `f` in parallel and tallies rejections at
/// level `alpha` for each of the `labels`. `f(r)` returns one outcome per
/// label, `None` for failed or invalid tests.
pub fn mc_with<F>(labels: &[StatId], reps: usize, alpha: f64, f: F) -> Result<Vec<Tally>>
where
    F: Fn(u64) -> Result<Vec<Option<RepOutcome>>> + Sync,
{
    if reps == 0 {
        return Err(Error::Config("at least one Monte Carlo replication is required".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("level {alpha} outside [0, 1]")));
    }
    let start = Instant::now();
    let rows: Vec<Vec<Option<RepOutcome>>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| f(r).unwrap_or_else(|_| vec![None; labels.len()]))
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    Ok((0..labels.len())
        .map(|j| {
            let outs: Vec<&RepOutcome> = rows.iter().filter_map(|r| r.get(j).and_then(Option::as_ref)).collect();
            let p_values: Vec<f64> = outs.iter().map(|o| o.p_value).collect();
            Tally {
                stat_id: labels[j],
                reps,
                rejections: p_values.iter().filter(|&&p| p <= alpha).count(),
                invalid: reps - outs.len(),
                mean_p: if p_values.is_empty() { f64::NAN } else { p_values.iter().sum::<f64>() / p_values.len() as f64 },
                runtime_seconds: elapsed,
                stat_values: outs.iter().map(|o| o.value).collect(),
                first_boot_values: outs.first().map(|o| o.boot_values.clone()).unwrap_or_default(),
                p_values,
            }
        })
        .collect())
}

/// Design-free part of a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    pub stat_id: StatId,
    pub reps: usize,
    pub rejections: usize,
    pub invalid: usize,
    pub mean_p: f64,
    pub runtime_seconds: f64,
    pub p_values: Vec<f64>,
    pub stat_values: Vec<f64>,
    pub first_boot_values: Vec<f64>,
}

fn outcome(r: TestResult) -> Option<RepOutcome> {
    match (r.valid, r.p_value) {
        (true, Some(p)) => Some(RepOutcome { value: r.value, p_value: p, boot_values: r.boot_values }),
        _ => None,
    }
}

/// Rejection rates of bootstrap tests of `stats` on data simulated from
/// `spec`. Replication `r` simulates with a seed derived from `seed` and `r`;
/// all statistics of a replication share the simulated dataset.
pub fn mc_rejection(
    spec: &DgpSpec,
    stats: &[StatId],
    cfg: &TestConfig,
    scheme: &SchemeSpec,
    reps: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<McCell>> {
    spec.validate()?;
    cfg.validate()?;
    let tallies = mc_with(stats, reps, alpha, |r| {
        let ds = spec.simulate(derive_seed(seed, 2 * r))?;
        let first = Context::new(ds, cfg.clone(), stats[0])?;
        let ctxs: Vec<Context> = stats.iter().map(|&s| first.for_stat(s)).collect::<Result<_>>()?;
        let res = run_tests(&ctxs, scheme, derive_seed(seed, 2 * r + 1))?;
        Ok(res.into_iter().map(outcome).collect())
    })?;
    Ok(tallies
        .into_iter()
        .map(|t| McCell {
            family: spec.family,
            stat_id: t.stat_id,
            scheme: scheme.scheme.id().to_string(),
            tau_max: spec.tau_max,
            n: spec.n,
            reps: t.reps,
            rejections: t.rejections,
            invalid: t.invalid,
            mean_p: t.mean_p,
            runtime_seconds: t.runtime_seconds,
            p_values: t.p_values,
            stat_values: t.stat_values,
            first_boot_values: t.first_boot_values,
        })
        .collect())
}

/// Design used for a statistic: boxed designs for box statistics,
/// pointwise designs otherwise.
pub fn design_for(stat: StatId, family: CopulaFamily, tau_max: f64, null: bool, n: usize, boxes_m: usize) -> DgpSpec {
    let mode = if stat.is_box() { DgpMode::Boxed { m: boxes_m } } else { DgpMode::Pointwise };
    let variant = if null { DgpVariant::NullConstant { tau0: tau_max } } else { DgpVariant::Alternative };
    DgpSpec { family, tau_max, mode, n, variant }
}

#[derive(Debug, Serialize)]
struct Row<'a> {
    family: &'a str,
    stat_id: &'a str,
    scheme: &'a str,
    tau_max: f64,
    n: usize,
    #[serde(rename = "R")]
    reps: usize,
    rejections: usize,
    mean_p: f64,
    runtime_seconds: f64,
}

/// Writes the results table.
pub fn write_table<W: Write>(cells: &[McCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in cells {
        w.serialize(Row {
            family: c.family.id(),
            stat_id: c.stat_id.id(),
            scheme: &c.scheme,
            tau_max: c.tau_max,
            n: c.n,
            reps: c.reps,
            rejections: c.rejections,
            mean_p: c.mean_p,
            runtime_seconds: c.runtime_seconds,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Writes QQ pairs and per-replication p-values, one line per point.
pub fn write_qq<W: Write>(cells: &[McCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["family", "stat_id", "scheme", "tau_max", "kind", "index", "x", "y"])?;
    for c in cells {
        let head = [c.family.id().to_string(), c.stat_id.id().to_string(), c.scheme.clone(), c.tau_max.to_string()];
        for (i, (a, b)) in c.qq().into_iter().enumerate() {
            let mut rec = head.to_vec();
            rec.extend(["qq".into(), i.to_string(), a.to_string(), b.to_string()]);
            w.write_record(&rec)?;
        }
        for (i, p) in c.p_values.iter().enumerate() {
            let mut rec = head.to_vec();
            rec.extend(["p_value".into(), i.to_string(), p.to_string(), String::new()]);
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::SchemeId;

    fn forced(p: f64) -> impl Fn(u64) -> Result<Vec<Option<RepOutcome>>> + Sync {
        move |_| Ok(vec![Some(RepOutcome { value: 1.0, p_value: p, boot_values: vec![] })])
    }

    #[test]
    fn forced_p_values() {
        let t = mc_with(&[StatId::IChi], 7, 0.05, forced(1.0)).unwrap();
        assert_eq!(t[0].rejections, 0);
        let t = mc_with(&[StatId::IChi], 7, 0.05, forced(0.0)).unwrap();
        assert_eq!(t[0].rejections, 7);
        let t = mc_with(&[StatId::IChi], 3, 0.05, |_| Err(Error::Numerical("x".into()))).unwrap();
        assert_eq!(t[0].invalid, 3);
    }

    #[test]
    fn single_replication_table() {
        let spec = design_for(StatId::BarT2c, CopulaFamily::Gaussian, 0.5, true, 200, 2);
        let cfg = TestConfig { boxes_m: 2, ..TestConfig::default() };
        let cells = mc_rejection(&spec, &[StatId::BarT2c], &cfg, &SchemeSpec::new(SchemeId::BootPI, 19), 1, 0.05, 3).unwrap();
        assert_eq!(cells.len(), 1);
        assert!(cells[0].rejections <= 1);
        let mut buf = Vec::new();
        write_table(&cells, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("family,stat_id,scheme,tau_max,n,R,rejections,mean_p,runtime_seconds\n"));
        assert_eq!(text.lines().count(), 2);
        let again = mc_rejection(&spec, &[StatId::BarT2c], &cfg, &SchemeSpec::new(SchemeId::BootPI, 19), 1, 0.05, 3).unwrap();
        assert_eq!(again[0].p_values, cells[0].p_values);
    }

    #[test]
    fn qq_pairs_are_sorted_quantiles() {
        let q = qq_pairs(&[3.0, 1.0, 2.0], &[30.0, 10.0, 20.0, 40.0]);
        assert_eq!(q.len(), 3);
        assert_eq!(q[0].0, 1.0);
        assert!(q.windows(2).all(|w| w[0].1 <= w[1].1));
    }
}
