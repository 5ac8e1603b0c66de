//! A flow that leaves the box: the fiber escapes exactly when the base does.
use vbflow::flow::{flow_pointwise, integrate_base, integrate_linear, IntegratorConfig};
use vbflow::geometry::{BoxDomain, DerivationSpec};
use vbflow::Error;

fn main() -> vbflow::Result<()> {
    let base = BoxDomain::new(vec![-1.0], vec![2.0])?;
    let d = DerivationSpec::parse(base.clone(), &["x1 + 0.5"], &[["sin(x1)"]])?;
    let cfg = IntegratorConfig::default();

    let x = [1.0];
    let b = integrate_base(d.symbol(), &base, &x, 2.0, &cfg)?;
    let l = integrate_linear(&d, &x, 2.0, &cfg)?;
    let p = flow_pointwise(&d, &x, &[3.0], 2.0, &cfg)?;
    println!("base   {:?} escape at {:?}", b.status, b.escape_time);
    println!("linear {:?} escape at {:?}", l.status, l.escape_time);
    println!("fiber  {:?} escape at {:?}", p.status, p.escape_time);

    // asking for the complete flow turns the escape into an error
    match l.complete(2.0) {
        Err(Error::Escaped { escape_time, .. }) => println!("escaped at t = {escape_time:.6}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
