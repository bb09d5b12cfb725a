//! Request-count traces in `timestamp_s,count` CSV form.

use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;

use super::WorkloadModel;
use crate::error::{FogError, Result};

const HEADER: [&str; 2] = ["timestamp_s", "count"];

/// Loads a request trace and turns per-bucket request counts into workload
/// samples (`count * cycles_per_task` Gigacycles per slot).
///
/// Timestamps must be non-decreasing integers. Buckets are anchored at the
/// first timestamp; buckets with no rows contribute a zero sample.
pub fn load_trace(path: impl AsRef<Path>, bucket_s: u64, cycles_per_task: f64) -> Result<WorkloadModel> {
    let path = path.as_ref();
    if bucket_s == 0 {
        return Err(FogError::param("bucket must be >= 1 second"));
    }
    let parse_err = |line: usize, msg: String| FogError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => FogError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => parse_err(0, format!("{other:?}")),
        })?;

    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.is_empty() {
        return Err(FogError::EmptyInput(path.to_path_buf()));
    }
    if headers.iter().collect::<Vec<_>>() != HEADER {
        let line = headers.position().map_or(1, |p| p.line() as usize);
        return Err(parse_err(line, format!("expected header `timestamp_s,count`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }

    let mut counts: Vec<u64> = Vec::new();
    let mut first: Option<u64> = None;
    let mut last_ts = 0u64;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, got {}", record.len())));
        }
        let ts: u64 = record[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad timestamp `{}`", &record[0])))?;
        let count: u64 = record[1]
            .parse()
            .map_err(|_| parse_err(line, format!("bad count `{}`", &record[1])))?;
        let t0 = *first.get_or_insert(ts);
        if ts < last_ts {
            return Err(parse_err(line, format!("timestamp {ts} decreases (previous {last_ts})")));
        }
        last_ts = ts;
        let bucket = ((ts - t0) / bucket_s) as usize;
        if counts.len() <= bucket {
            counts.resize(bucket + 1, 0);
        }
        counts[bucket] += count;
    }
    if counts.is_empty() {
        return Err(FogError::EmptyInput(path.to_path_buf()));
    }
    let model = WorkloadModel::EmpiricalTrace {
        samples: counts.iter().map(|&c| c as f64 * cycles_per_task).collect(),
        cycles_per_task,
    };
    model.validate()?;
    Ok(model)
}

/// Writes one row per second starting at timestamp 0.
pub fn write_trace(path: impl AsRef<Path>, counts: &[u64]) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| FogError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    writeln!(out, "{}", HEADER.join(",")).map_err(io_err)?;
    for (t, c) in counts.iter().enumerate() {
        writeln!(out, "{t},{c}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Per-second request counts standing in for a one-hour web-server log:
/// Poisson arrivals around `mean_rate` with a slow sinusoidal trend
/// (10% amplitude, one period per hour, seed-dependent phase).
pub fn synthetic_request_counts(mean_rate: f64, seconds: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase = TAU * rng.random::<f64>();
    (0..seconds)
        .map(|t| {
            let rate = mean_rate * (1.0 + 0.1 * (TAU * t as f64 / 3600.0 + phase).sin());
            if rate <= 0.0 {
                return 0;
            }
            let d = Poisson::new(rate).expect("positive rate");
            rng.sample(d) as u64
        })
        .collect()
}
