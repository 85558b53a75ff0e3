//! Fixtures shared by the stage benchmarks in `benches/`.

use defurnish::synthgen::{make_eval_case, procedural_room, EvalCase, SynthConfig};

/// A furnished synthetic panorama of the given width.
pub fn fixture(width: usize, seed: u64) -> EvalCase {
    let empty = procedural_room(width, 1.5, seed);
    let cfg = SynthConfig {
        width,
        ..SynthConfig::default()
    };
    make_eval_case(&empty, &cfg, seed).expect("synthetic fixture")
}
