//! CSV output: `samples.csv`, `dispositions.csv` and `summary.csv`.
//!
//! Reals are written with three decimals and `.` as separator; records end
//! in `\n`. Runs are sorted by category (first appearance) then run id, so
//! the files do not depend on the order runs finished in.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::runner::LabeledRun;
use super::stats::{category_stats, StatsError};
use super::ScenarioError;

pub const SAMPLES_FILE: &str = "samples.csv";
pub const DISPOSITIONS_FILE: &str = "dispositions.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

const SAMPLES_HEADER: [&str; 6] = [
    "run_id",
    "category",
    "time_ms",
    "ue_id",
    "slice",
    "throughput_mbps",
];
const DISPOSITIONS_HEADER: [&str; 10] = [
    "run_id",
    "category",
    "time_ms",
    "xapp_id",
    "cell",
    "slice",
    "value",
    "disposition",
    "conflict_id",
    "winner",
];
const SUMMARY_HEADER: [&str; 4] = ["category", "run_id", "run_mean", "run_sd"];

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("statistics: {0}")]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Scenario(#[from] Box<ScenarioError>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportedFiles {
    pub samples: PathBuf,
    pub dispositions: PathBuf,
    pub summary: PathBuf,
}

fn fmt3(x: f64) -> String {
    format!("{x:.3}")
}

struct CsvFile {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvFile {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, ExportError> {
        let path = dir.join(name);
        let file = File::create(&path).map_err(|source| ExportError::Io {
            path: path.clone(),
            source,
        })?;
        let writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(BufWriter::new(file));
        let mut out = Self { path, writer };
        out.row(header)?;
        Ok(out)
    }

    fn row<I, T>(&mut self, fields: I) -> Result<(), ExportError>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|source| ExportError::Csv {
                path: self.path.clone(),
                source,
            })
    }

    fn finish(self) -> Result<PathBuf, ExportError> {
        let Self { path, writer } = self;
        let mut inner = writer.into_inner().map_err(|e| ExportError::Io {
            path: path.clone(),
            source: io::Error::other(e.to_string()),
        })?;
        inner.flush().map_err(|source| ExportError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}

pub fn export_csv(runs: &[LabeledRun], out_dir: &Path) -> Result<ExportedFiles, ExportError> {
    std::fs::create_dir_all(out_dir).map_err(|source| ExportError::Io {
        path: out_dir.to_owned(),
        source,
    })?;

    let mut categories: Vec<&str> = Vec::new();
    for r in runs {
        if !categories.contains(&r.category.as_str()) {
            categories.push(&r.category);
        }
    }
    let mut ordered: Vec<&LabeledRun> = runs.iter().collect();
    ordered.sort_by_key(|r| {
        let cat = categories
            .iter()
            .position(|c| *c == r.category)
            .unwrap_or(0);
        (cat, r.run_id)
    });

    let mut samples = CsvFile::create(out_dir, SAMPLES_FILE, &SAMPLES_HEADER)?;
    let mut dispositions = CsvFile::create(out_dir, DISPOSITIONS_FILE, &DISPOSITIONS_HEADER)?;
    for r in &ordered {
        let run_id = r.run_id.to_string();
        for s in &r.result.samples {
            samples.row([
                run_id.as_str(),
                &r.category,
                &s.time.to_string(),
                s.ue_id.as_str(),
                s.slice.as_str(),
                &fmt3(s.throughput_mbps),
            ])?;
        }
        for a in &r.result.dispositions {
            let d = &a.decision;
            dispositions.row([
                run_id.as_str(),
                &r.category,
                &a.time.to_string(),
                d.xapp_id().as_str(),
                d.target().cell_id.as_str(),
                d.target().slice_id.as_str(),
                &d.value().to_string(),
                a.disposition.as_str(),
                &a.conflict_id.map(|c| c.to_string()).unwrap_or_default(),
                a.winner.as_ref().map(|w| w.as_str()).unwrap_or_default(),
            ])?;
        }
    }

    let mut summary = CsvFile::create(out_dir, SUMMARY_FILE, &SUMMARY_HEADER)?;
    for cat in &categories {
        let mut stats = Vec::new();
        for r in ordered.iter().filter(|r| r.category == *cat) {
            let s = r.result.run_stats().map_err(Box::new)?;
            summary.row([*cat, &r.run_id.to_string(), &fmt3(s.mean), &fmt3(s.sd)])?;
            stats.push(s);
        }
        let avg = category_stats(cat, &stats)?;
        summary.row([*cat, "Average", &fmt3(avg.avg_mean), &fmt3(avg.avg_sd)])?;
    }

    Ok(ExportedFiles {
        samples: samples.finish()?,
        dispositions: dispositions.finish()?,
        summary: summary.finish()?,
    })
}
