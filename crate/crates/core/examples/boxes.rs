//! Box conditioning: estimated box copulas against the integrated model, and barT2_c.
use condcop::boxes::{box_cond_copula, box_copula_oracle, make_equiprob_boxes, BoxFit};
use condcop::dgp::{DgpMode, DgpSpec};
use condcop::statistic::{compute_stat, StatId, TestConfig};
use condcop::CopulaFamily;

fn main() -> condcop::Result<()> {
    let cond_indep = DgpSpec::alternative(CopulaFamily::Gaussian, 0.0, DgpMode::Pointwise, 20_000);
    let ds = cond_indep.simulate(4)?;
    let rows: Vec<usize> = (0..ds.n()).filter(|&i| ds.j_column(0)[i] <= 0.0).collect();
    let est = box_cond_copula(&ds, &rows, &[0.75, 0.75])?;
    let truth = box_copula_oracle(&cond_indep, [0.75, 0.75], f64::NEG_INFINITY, 0.0, 1e-10)?;
    println!("C(0.75, 0.75 | X3 <= 0): estimate {est:.4}, model {truth:.4}, product 0.5625");

    let spec = DgpSpec::alternative(CopulaFamily::Gumbel, 1.0, DgpMode::Boxed { m: 5 }, 1000);
    let ds = spec.simulate(8)?;
    let fit = BoxFit::new(&ds, make_equiprob_boxes(&ds, 5)?)?;
    let th = fit.thetas(CopulaFamily::Gumbel)?;
    for (k, t) in th.boxes.iter().enumerate() {
        println!("box {k}: {} rows, theta = {t:.3}", fit.members(k).len());
    }
    println!("pooled theta = {:.3}", th.pooled);
    let cfg = TestConfig { family: CopulaFamily::Gumbel, ..TestConfig::default() };
    println!("barT2_c = {:.3}", compute_stat(&ds, StatId::BarT2c, &cfg)?);
    Ok(())
}
