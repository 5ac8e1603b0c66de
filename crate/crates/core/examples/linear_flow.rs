//! Flow of a derivation: base trajectory plus fundamental matrix, checked
//! against integrating a single fiber vector on the total space.
use vbflow::flow::{flow_pointwise, integrate_linear, IntegratorConfig};
use vbflow::geometry::{BoxDomain, DerivationSpec};
use vbflow::linalg::Vector;

fn main() -> vbflow::Result<()> {
    let base = BoxDomain::cube(2, -1.0, 1.0)?;
    let d = DerivationSpec::parse(base, &["x2", "-x1"], &[["0", "x1"], ["-x1", "0.3"]])?;
    let cfg = IntegratorConfig::default();

    let (x, t, v) = ([0.4, 0.1], 0.8, [1.0, -2.0]);
    let lin = integrate_linear(&d, &x, t, &cfg)?.complete(t)?;
    println!("phi_t(x) = {:?}", lin.base_point);
    println!("F_t(x) = {}", lin.fundamental);

    let fv = &lin.fundamental * Vector::from_column_slice(&v);
    let p = flow_pointwise(&d, &x, &v, t, &cfg)?;
    println!("F v          = {:?}", fv.as_slice());
    println!("pointwise v  = {:?}", p.fiber);
    Ok(())
}
