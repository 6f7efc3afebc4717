//! A small power curve written as a results table.
use condcop::bootstrap::{SchemeId, SchemeSpec};
use condcop::mc::{design_for, mc_rejection, write_table};
use condcop::statistic::{StatId, TestConfig};
use condcop::CopulaFamily;

fn main() -> condcop::Result<()> {
    let cfg = TestConfig::default();
    let mut cells = Vec::new();
    for tau in [0.0, 0.5, 1.0] {
        let design = design_for(StatId::BarT2c, CopulaFamily::Gaussian, tau, false, 500, 5);
        cells.extend(mc_rejection(&design, &[StatId::BarT2c], &cfg, &SchemeSpec::new(SchemeId::BootPI, 100), 20, 0.05, 1)?);
    }
    write_table(&cells, std::io::stdout())
}
