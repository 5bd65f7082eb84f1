//! CSV export and ingestion, then the text and JSON reports the `covtest`
//! binary prints.
//!
//! The same run from a shell:
//! `covtest --data groups.csv --group-column group --hypothesis equal --seed 1`

use clap::Parser;
use covtest::cli::{ingest, render_json, render_text, run_on, write_csv, Args, Grouping, RunConfig};
use covtest::linalg::SymMatrix;
use covtest::sampling::{substream, GaussianSampler};
use covtest::GroupedSample;

fn main() -> covtest::Result<()> {
    let cov = SymMatrix::from_row_slice(2, &[1.0, 0.4, 0.4, 2.0])?;
    let sampler = GaussianSampler::new(&cov)?;
    let sample = GroupedSample::new(vec![
        sampler.sample_columns(30, &mut substream(2, 0)),
        sampler.sample_columns(35, &mut substream(2, 1)),
    ])?;

    let path = std::env::temp_dir().join("covtest_groups.csv");
    let file = std::fs::File::create(&path).map_err(|source| covtest::Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_csv(file, &sample, &["height".into(), "weight".into()])?;
    let data = ingest(&path, &Grouping::Column("group".into()))?;
    assert_eq!(data.sample, sample);

    let args = Args::parse_from([
        "covtest",
        "--data",
        path.to_str().unwrap_or_default(),
        "--group-column",
        "group",
        "--seed",
        "1",
    ]);
    let cfg = RunConfig::from_args(args)?;
    let outcome = run_on(&cfg, &data.sample)?;
    print!("{}", render_text(&outcome));
    println!();
    print!("{}", render_json(&outcome, cfg.alpha));
    Ok(())
}
