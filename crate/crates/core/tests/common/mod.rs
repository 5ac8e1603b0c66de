#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vbflow::scene::{load_scene, Scene};

pub fn scene_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenes").join(name)
}

pub fn scene(name: &str) -> Scene {
    load_scene(&scene_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Random expression in `x1..x{dim}` that is smooth on `[-1, 1]^dim`.
/// Logs, roots and quotients are guarded to stay away from singularities.
pub fn random_expr(rng: &mut ChaCha8Rng, dim: usize, depth: u32) -> String {
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.7) {
            format!("x{}", rng.random_range(1..=dim))
        } else {
            format!("{:.3}", rng.random_range(-2.0..2.0))
        };
    }
    let a = random_expr(rng, dim, depth - 1);
    match rng.random_range(0..12) {
        0 => format!("({a}) + ({})", random_expr(rng, dim, depth - 1)),
        1 => format!("({a}) - ({})", random_expr(rng, dim, depth - 1)),
        2 | 3 => format!("({a}) * ({})", random_expr(rng, dim, depth - 1)),
        4 => format!("({a}) / (1.5 + cos({}))", random_expr(rng, dim, depth - 1)),
        5 => format!("sin({a})"),
        6 => format!("cos({a})"),
        7 => format!("exp(0.5 * sin({a}))"),
        8 => format!("log(1 + ({a})^2)"),
        9 => format!("sqrt(2 + sin({a}))"),
        10 => format!("tanh({a})"),
        _ => format!("({a})^{}", rng.random_range(2..=3)),
    }
}

pub fn expression_corpus(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_expr(&mut rng, 3, 4)).collect()
}
