//! Kernel estimates of a conditional copula along the conditioning variable.
use condcop::dgp::{DgpMode, DgpSpec};
use condcop::smoothing::{cond_copula, simplified_copula, KernelSpec, SimplifiedVariant};
use condcop::CopulaFamily;

fn main() -> condcop::Result<()> {
    let spec = DgpSpec::alternative(CopulaFamily::Clayton, 1.0, DgpMode::Pointwise, 2000);
    let ds = spec.simulate(3)?;
    let kern = KernelSpec::default_for(ds.n());
    println!("n = {}, h = {:.4}", ds.n(), kern.h);
    let u = [0.5, 0.5];
    for x in [-1.5, -0.5, 0.0, 0.5, 1.5] {
        let truth = spec.copula_at(x)?.map_or(0.25, |m| m.cdf(&u).unwrap());
        println!("x3 = {x:>4}: C(0.5, 0.5 | x3) = {:.3} (model {truth:.3})", cond_copula(&ds, &u, &[x], kern)?);
    }
    for v in [SimplifiedVariant::Avg, SimplifiedVariant::EcdfZ, SimplifiedVariant::EmpcopZ] {
        println!("simplified {v:?}: {:.3}", simplified_copula(&ds, &u, kern, v)?);
    }
    Ok(())
}
