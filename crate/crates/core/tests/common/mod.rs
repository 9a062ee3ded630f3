#![allow(dead_code)]

pub mod corpus;
pub mod mock;
pub mod oracle;

use synprobe_core::io::{read_treebank_files, treebank_files_in};
use synprobe_core::{parse_bracketed, Sentence};

/// Sentences from `SYNPROBE_TREEBANK` (a file or a directory of treebank
/// files) when set, otherwise `n` synthetic trees.
pub fn treebank_or_synthetic(n: usize, seed: u64) -> (Vec<Sentence>, String) {
    if let Ok(path) = std::env::var("SYNPROBE_TREEBANK") {
        let path = std::path::PathBuf::from(path);
        let files = if path.is_dir() {
            treebank_files_in(&path).expect("list treebank directory")
        } else {
            vec![path.clone()]
        };
        let sentences = read_treebank_files(&files).expect("read treebank");
        return (sentences, format!("treebank at {}", path.display()));
    }
    let text = corpus::synthetic_treebank(n, seed);
    let sentences = parse_bracketed(&text)
        .expect("synthetic corpus parses")
        .iter()
        .filter_map(Sentence::strip_empty_elements)
        .collect();
    (sentences, format!("synthetic corpus of {n} sentences, seed {seed}"))
}
