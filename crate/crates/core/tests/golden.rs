//! The report tree for the checked-in synthetic inputs, byte for byte.
//! Run with `UPDATE_GOLDEN=1` to regenerate after an intended change.

mod common;

use std::collections::BTreeMap;
use std::path::Path;

use sciwealth::pipeline::{self, InputPaths, Mode, RunOptions};

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn report_tree_matches_golden() {
    let inputs = InputPaths::in_dir(&common::fixture("synth"));
    let golden = common::fixture("synth_expected");
    let out = tempfile::tempdir().unwrap();
    pipeline::run_pipeline(&inputs, out.path(), &RunOptions::default(), Mode::Report).unwrap();

    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        let _ = std::fs::remove_dir_all(&golden);
        std::fs::create_dir_all(&golden).unwrap();
        for (name, bytes) in tree(out.path()) {
            std::fs::write(golden.join(name), bytes).unwrap();
        }
        return;
    }
    let got = tree(out.path());
    let want = tree(&golden);
    assert_eq!(got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>());
    for (name, bytes) in &want {
        assert!(got[name] == *bytes, "{name} differs from the golden copy");
    }
}

#[test]
fn golden_inputs_agree_with_oracle() {
    let root = common::fixture("synth");
    let o = common::oracle::run(&root);
    let inputs = pipeline::load_inputs(&InputPaths::in_dir(&root)).unwrap();
    let scored = pipeline::score(&inputs, &RunOptions::default()).unwrap();
    for p in &scored.professors.scores {
        assert!(
            common::oracle::close(p.normalized_fss, o.normalized_fss[&p.professor_id], 1e-12),
            "{}",
            p.professor_id
        );
    }
    for rows in &scored.territory[&sciwealth::territory::Level::Nuts2] {
        for r in rows {
            let k = (r.specialty.clone(), r.code.clone());
            assert!(common::oracle::close(r.kc, o.kc.get(&k).copied().unwrap_or(0.0), 1e-12), "{k:?}");
            assert!(common::oracle::close(r.normalized_kc_pc, o.normalized_kc_pc[&k], 1e-12), "{k:?}");
        }
    }
}
