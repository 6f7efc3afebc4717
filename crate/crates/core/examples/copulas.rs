//! Families calibrated to a common Kendall tau.
use condcop::stats::kendall_tau;
use condcop::{CopulaFamily, CopulaModel};

fn main() -> condcop::Result<()> {
    println!("{:<9} {:>9} {:>10} {:>10} {:>12}", "family", "theta", "c(.5,.5)", "C(.3,.7)", "sample tau");
    for f in CopulaFamily::ALL {
        let m = CopulaModel::from_tau(f, 0.5)?;
        let pts = m.sample_seeded(20_000, 1);
        let (a, b): (Vec<f64>, Vec<f64>) = pts.iter().map(|p| (p[0], p[1])).unzip();
        println!(
            "{:<9} {:>9.4} {:>10.4} {:>10.4} {:>12.4}",
            f.id(),
            m.theta,
            m.density(&[0.5, 0.5])?,
            m.cdf(&[0.3, 0.7])?,
            kendall_tau(&a, &b)
        );
    }
    Ok(())
}
