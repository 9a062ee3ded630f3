//! Inputs shared by the pipeline benchmarks in `benches/`.

use synprobe_core::fixtures;

/// `n` bracketed trees cycling through the built-in fixtures.
pub fn fixture_corpus(n: usize) -> String {
    fixtures::ALL.iter().cycle().take(n).copied().collect::<Vec<_>>().join("\n")
}
