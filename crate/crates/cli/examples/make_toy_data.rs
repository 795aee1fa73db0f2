//! Writes the templated toy corpus and a sentiment train/test split.
//!
//! Usage: `cargo run -p linda-cli --example make_toy_data -- <dir> [seed]`

use std::path::PathBuf;

use linda_core::synthetic::{sentiment_dataset, to_tsv, toy_corpus};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "toy".into()));
    let seed: u64 = args.next().map_or(Ok(0), |s| s.parse())?;
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("corpus.txt"), toy_corpus(2000, seed).join("\n") + "\n")?;
    std::fs::write(dir.join("train.tsv"), to_tsv(&sentiment_dataset(200, seed + 1)))?;
    std::fs::write(dir.join("test.tsv"), to_tsv(&sentiment_dataset(200, seed + 2)))?;
    println!("wrote corpus.txt, train.tsv and test.tsv to {}", dir.display());
    Ok(())
}
