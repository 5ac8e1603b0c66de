//! Brackets of lifted vector fields on the total space against the
//! algebraic commutator of derivations.
use vbflow::flow::bracket_vf;
use vbflow::geometry::{apply_derivation, commutator, core_lift, point_hat, vertical, BoxDomain, DerivationSpec, SectionSpec, TotalField};
use vbflow::linalg::vec_max_abs_diff;

fn main() -> vbflow::Result<()> {
    let base = BoxDomain::cube(2, -1.0, 1.0)?;
    let d1 = DerivationSpec::parse(base.clone(), &["1", "x1"], &[["0", "1"], ["-1", "x2"]])?;
    let d2 = DerivationSpec::parse(base, &["x2", "0.5"], &[["x1", "0"], ["cos(x2)", "0"]])?;
    let e = SectionSpec::parse(&["x1*x2", "sin(x1)"], 2)?;

    // a point of the total space: base coordinates then fiber coordinates
    let p = [0.2, -0.4, 1.0, 0.5];

    let lhs = bracket_vf(&d1.hat(), &d2.hat(), &p)?;
    let c = commutator(&d1, &d2)?;
    let rhs = point_hat(&c).eval(&p)?;
    println!("[D1^, D2^]   residual {:.2e}", vec_max_abs_diff(&lhs, &rhs));

    let lhs = bracket_vf(&d1.hat(), &core_lift(&e), &p)?;
    let rhs = vertical(2, &apply_derivation(&d1, &e, &p[..2])?);
    println!("[D1^, e^]    residual {:.2e}", vec_max_abs_diff(&lhs, &rhs));

    let zero = bracket_vf(&core_lift(&e), &core_lift(&e), &p)?;
    println!("[e^, e^]     = {zero:?}");
    Ok(())
}
