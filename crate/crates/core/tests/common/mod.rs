#![allow(dead_code)]

use std::path::PathBuf;

use tbsynth::format::SpecDocument;

pub fn corpus_dir(kind: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(kind)
}

/// Every document of one corpus directory, sorted by file name.
pub fn load(kind: &str) -> Vec<(String, SpecDocument)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(corpus_dir(kind))
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let text = std::fs::read_to_string(&p).unwrap();
            (name, SpecDocument::parse(&text).unwrap())
        })
        .collect()
}

pub mod checks;
