//! One statistic under every resampling scheme.
use condcop::bootstrap::{run_test, SchemeId, SchemeSpec};
use condcop::dgp::{DgpMode, DgpSpec};
use condcop::statistic::{Context, StatId, TestConfig};
use condcop::CopulaFamily;

fn main() -> condcop::Result<()> {
    let ds = DgpSpec::null(CopulaFamily::Clayton, 0.5, DgpMode::Boxed { m: 5 }, 500).simulate(21)?;
    let cfg = TestConfig { family: CopulaFamily::Clayton, ..TestConfig::default() };
    let ctx = Context::new(ds, cfg, StatId::BarT2c)?;
    println!("barT2_c = {:.4}", ctx.value()?);
    for scheme in SchemeId::ALL {
        let r = run_test(&ctx, &SchemeSpec::new(scheme, 200), 3)?;
        println!(
            "{:<14} {:?}  p = {:.3}  dropped {}",
            scheme.id(),
            r.recentering,
            r.p_value.unwrap_or(f64::NAN),
            r.n_dropped
        );
    }
    Ok(())
}
