//! Load a bundled scene and run every applicable verification suite.
//! Pass another scene path as the first argument to try it instead.
use std::path::PathBuf;

use vbflow::scene::load_scene;
use vbflow::verify::{run_verify, VerifyOptions};

fn main() -> vbflow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/scenes/dual_tensor.toml")));
    let scene = load_scene(&path)?;
    let mut opts = VerifyOptions::from_scene(&scene);
    opts.samples = 32;
    let report = run_verify(&scene, &opts)?;
    report.write_text(&mut std::io::stdout()).map_err(|e| vbflow::Error::Io(e.to_string()))?;
    Ok(())
}
