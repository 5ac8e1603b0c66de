//! Dual and tensor flows: the closed forms F^{-T} and F_E ⊗ F_F against
//! integrating the dual and tensor derivations directly.
use vbflow::flow::{dual_flow, integrate_linear, tensor_flow, IntegratorConfig};
use vbflow::geometry::{dual_derivation, pairing, tensor_derivation, BoxDomain, DerivationSpec};
use vbflow::linalg::{max_abs_diff, Vector};

fn main() -> vbflow::Result<()> {
    let base = BoxDomain::cube(2, -1.0, 1.0)?;
    let de = DerivationSpec::parse(base.clone(), &["1", "-0.3*x1"], &[["x1", "1"], ["-1", "0.5*x2"]])?;
    let df = DerivationSpec::parse(base, &["1", "-0.3*x1"], &[["0", "cos(x2)"], ["x1*x2", "-0.4"]])?;
    let cfg = IntegratorConfig::default();
    let (x, t) = ([0.1, 0.2], 0.6);

    let g = dual_flow(&de, &x, t, &cfg)?;
    let g_int = integrate_linear(&dual_derivation(&de), &x, t, &cfg)?.complete(t)?.fundamental;
    println!("dual two-route   {:.2e}", max_abs_diff(&g, &g_int));

    let f = integrate_linear(&de, &x, t, &cfg)?.complete(t)?.fundamental;
    let (eps, v) = (Vector::from_vec(vec![0.3, -1.0]), Vector::from_vec(vec![2.0, 0.5]));
    let before = pairing(eps.as_slice(), v.as_slice());
    let after = pairing((&g * &eps).as_slice(), (&f * &v).as_slice());
    println!("pairing {before:.15} -> {after:.15}");

    let k = tensor_flow(&de, &df, &x, t, &cfg)?;
    let k_int = integrate_linear(&tensor_derivation(&de, &df)?, &x, t, &cfg)?.complete(t)?.fundamental;
    println!("tensor two-route {:.2e}", max_abs_diff(&k, &k_int));
    Ok(())
}
