//! Gluing a connection from a two-patch cocycle and transporting a frame
//! over the whole rectangle.
use std::collections::BTreeMap;

use vbflow::flow::IntegratorConfig;
use vbflow::geometry::{BoxDomain, ExprMatrix};
use vbflow::trivialize::{global_frame, CocycleBundle};

fn main() -> vbflow::Result<()> {
    let u1 = BoxDomain::new(vec![-1.0, -1.0], vec![0.5, 1.0])?;
    let u2 = BoxDomain::new(vec![-0.5, -1.0], vec![1.0, 1.0])?;
    let a = "x1*x2 + x2";
    let g = ExprMatrix::parse(
        &[[format!("cos({a})"), format!("-sin({a})")], [format!("sin({a})"), format!("cos({a})")]],
        2,
    )?;
    let bundle = CocycleBundle::new(vec![u1, u2], 2, BTreeMap::from([((0, 1), g)]))?;

    let target = BoxDomain::cube(2, -0.95, 0.95)?;
    let frame = global_frame(&bundle, &[-0.75, 0.0], &target, 8, &IntegratorConfig::default())?;
    println!("{} frame records", frame.records.len());
    println!("overlap residual {:.2e} at {:?}", frame.max_overlap_residual, frame.worst_overlap_point);

    let mut doc = Vec::new();
    frame.write_document(&mut doc).map_err(|e| vbflow::Error::Io(e.to_string()))?;
    let text = String::from_utf8_lossy(&doc);
    for line in text.lines().take(16) {
        println!("{line}");
    }
    Ok(())
}
