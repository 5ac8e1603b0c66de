//! Parse an expression, print it back, and compare the forward-mode
//! gradient with a finite difference.
use vbflow::expr::ScalarExpr;
use vbflow::verify::fd_gradient;

fn main() -> vbflow::Result<()> {
    let e = ScalarExpr::parse("sin(x1*x2) + exp(-x2^2)/ (1 + x1^2)", 2, false)?;
    println!("printed: {e}");
    let again = ScalarExpr::parse(&e.to_string(), 2, false)?;
    assert_eq!(again.to_string(), e.to_string());

    let x = [0.3, -0.7];
    let jet = e.eval_jet(&x, None)?;
    let fd = fd_gradient(&e, &x, 1e-3)?;
    println!("value    {:.12}", jet.value);
    println!("ad grad  {:?}", jet.partials);
    println!("fd grad  {fd:?}");

    // parse errors carry an offset into the source
    let bad = ScalarExpr::parse("x1 + * 2", 1, false).unwrap_err();
    println!("error at offset {}: {bad}", bad.offset());
    Ok(())
}
