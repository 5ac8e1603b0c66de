//! v' = A(t) v solved through the suspended derivation, compared with the
//! rotation by (t^2 - t0^2)/2 that this commuting family produces.
use vbflow::flow::IntegratorConfig;
use vbflow::odesolve::{expm, propagator, solve_nonautonomous, TimeMatrixSpec};
use vbflow::linalg::Matrix;

fn main() -> vbflow::Result<()> {
    let a = TimeMatrixSpec::parse((-2.0, 2.0), &[["0", "t"], ["-t", "0"]])?;
    let cfg = IntegratorConfig::default();
    let (t0, t) = (0.25, 1.5);
    let v0 = [1.0, 0.5];

    let v = solve_nonautonomous(&a, t0, &v0, t, &cfg)?;
    let th = (t * t - t0 * t0) / 2.0;
    let exact = [th.cos() * v0[0] + th.sin() * v0[1], -th.sin() * v0[0] + th.cos() * v0[1]];
    println!("solution {v:?}");
    println!("rotation {exact:?}");

    let p = propagator(&a, t0, t, &cfg)?;
    println!("det P = {:.15} (trace A = 0)", p.determinant());

    // constant coefficients: the solution is a matrix exponential
    let c = Matrix::from_row_slice(2, 2, &[-0.5, 2.0, -2.0, -0.5]);
    println!("expm(A) = {}", expm(&c)?);
    Ok(())
}
