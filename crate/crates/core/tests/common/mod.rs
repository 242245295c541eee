#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};

use sciwealth::synth::{self, SynthParams};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Writes a small synthetic input set and returns its directory.
pub fn small_synth(dir: &Path, seed: u64, publications: usize) -> PathBuf {
    let params = SynthParams { seed, publications, professors_per_unit: 2, ..SynthParams::default() };
    synth::generate(&params).write(dir).unwrap();
    dir.to_path_buf()
}
