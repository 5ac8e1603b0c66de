//! A section is flat for D exactly when every pullback along the flow
//! leaves it unchanged. The derivative of the pullback at t = 0 is De.
use vbflow::flow::{pullback_section, IntegratorConfig};
use vbflow::geometry::{apply_derivation, BoxDomain, DerivationSpec, SectionSpec};
use vbflow::linalg::vec_max_abs_diff;

fn main() -> vbflow::Result<()> {
    let base = BoxDomain::cube(2, -1.0, 1.0)?;
    let d = DerivationSpec::parse(base, &["1", "0"], &[["0", "1"], ["-1", "0"]])?;
    let cfg = IntegratorConfig::default();
    let x = [-0.3, 0.2];

    for (name, comps) in [("flat", ["cos(x1)", "sin(x1)"]), ("bent", ["x1", "x2^2 + 1"])] {
        let e = SectionSpec::parse(&comps, 2)?;
        let de = apply_derivation(&d, &e, &x)?;
        let moved = (1..=5)
            .map(|i| {
                let t = 0.1 * i as f64;
                Ok(vec_max_abs_diff(&pullback_section(&d, &e, t, &x, &cfg)?, &e.eval(&x)?))
            })
            .collect::<vbflow::Result<Vec<_>>>()?;
        println!("{name}: De = {de:?}");
        println!("{name}: max_t |pullback - e| = {:.2e}", moved.iter().cloned().fold(0.0, f64::max));

        let h = 1e-4;
        let p = pullback_section(&d, &e, h, &x, &cfg)?;
        let m = pullback_section(&d, &e, -h, &x, &cfg)?;
        let cd: Vec<f64> = p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        println!("{name}: central difference = {cd:?}");
    }
    Ok(())
}
