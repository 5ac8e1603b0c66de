//! Trivializing a bundle over a cylinder I × U by flowing along the time
//! direction back to the slice t = t0.
use vbflow::flow::IntegratorConfig;
use vbflow::geometry::BoxDomain;
use vbflow::linalg::{max_abs_diff, Matrix};
use vbflow::trivialize::{sample_cylinder, trivialize_cylinder, trivialize_cylinder_inverse, CylinderBundle};

fn main() -> vbflow::Result<()> {
    let base = BoxDomain::new(vec![-1.0], vec![1.0])?;
    let b = CylinderBundle::parse((0.0, 2.0), base, &[["0", "1 + 0.5*x1"], ["-t", "sin(x1*t)"]])?;
    let cfg = IntegratorConfig::default();
    let t0 = 1.0;

    let th = trivialize_cylinder(&b, t0, 1.7, &[0.3], &cfg)?;
    let inv = trivialize_cylinder_inverse(&b, t0, 1.7, &[0.3], &cfg)?;
    println!("Theta(1.7, 0.3) = {th}");
    println!("|Theta^-1 Theta - I| = {:.2e}", max_abs_diff(&(&inv * &th), &Matrix::identity(2, 2)));
    println!("Theta(t0, 0.3) = {}", trivialize_cylinder(&b, t0, t0, &[0.3], &cfg)?);

    let s = sample_cylinder(&b, t0, 16, &cfg)?;
    println!("{} grid samples, worst inverse residual {:.2e}", s.records.len(), s.max_inverse_residual);
    Ok(())
}
