//! so(3) bundle with an inner connection: structure and flatness checks,
//! then bracket preservation of the flow-built fiber isomorphisms. A
//! connection that is not a derivation of the bracket is refused.
use vbflow::algebroid::{certify_lab, AlgebroidSpec, CertTolerances};
use vbflow::expr::ScalarExpr;
use vbflow::flow::IntegratorConfig;
use vbflow::geometry::{BoxDomain, ExprMatrix};
use vbflow::sampling::sample_points;

fn so3(base: BoxDomain, conns: Vec<ExprMatrix>) -> vbflow::Result<AlgebroidSpec> {
    let m = base.dim();
    let mut c = Vec::new();
    for (i, j, l) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        c.push((i, j, l, ScalarExpr::constant(1.0, m)));
        c.push((j, i, l, ScalarExpr::constant(-1.0, m)));
    }
    AlgebroidSpec::from_sparse(base, 3, &c, conns)
}

// ad of xi in the basis with [k_i, k_j] = eps_ijl k_l
fn ad(xi: [&str; 3]) -> vbflow::Result<ExprMatrix> {
    let neg = |s: &str| format!("-({s})");
    ExprMatrix::parse(
        &[
            ["0".to_string(), neg(xi[2]), xi[1].to_string()],
            [xi[2].to_string(), "0".to_string(), neg(xi[0])],
            [neg(xi[1]), xi[0].to_string(), "0".to_string()],
        ],
        2,
    )
}

fn main() -> vbflow::Result<()> {
    let base = BoxDomain::cube(2, -1.0, 1.0)?;
    let cfg = IntegratorConfig::default();
    let pts = sample_points(&base, 64, 0, 0);

    let good = so3(base.clone(), vec![ad(["0.3", "0", "0.1"])?, ad(["0", "-0.2", "0.4"])?])?;
    let report = certify_lab(&good, &[0.0, 0.0], &pts, &CertTolerances::default(), &cfg)?;
    report.write_text(&mut std::io::stdout()).map_err(|e| vbflow::Error::Io(e.to_string()))?;

    let broken = ExprMatrix::parse(&[["0.5", "0", "0"], ["0", "0", "0"], ["0", "0", "0"]], 2)?;
    let bad = so3(base, vec![broken.clone(), broken])?;
    match certify_lab(&bad, &[0.0, 0.0], &pts, &CertTolerances::default(), &cfg) {
        Err(e) => println!("refused: {e}"),
        Ok(_) => println!("unexpectedly certified"),
    }
    Ok(())
}
