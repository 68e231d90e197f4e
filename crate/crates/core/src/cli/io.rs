//! Versioned output formats: JSONL trajectories and measures, CSV reports.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{EmpiricalMeasure, MeasureMeta, Observable, ReportRow};
use crate::segment::Segment;
use crate::solver::Trajectory;

pub const FORMAT_VERSION: u32 = 1;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub stream: u64,
    pub n_modes: usize,
    pub h: f64,
    pub dt: f64,
    pub store_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub t: f64,
    pub coeffs: Vec<f64>,
    pub seg_norm: f64,
}

/// Header line followed by one `{t, coeffs, seg_norm}` record per snapshot.
pub fn write_trajectory(path: &Path, traj: &Trajectory, h: f64, dt: f64, store_stride: usize) -> Result<()> {
    let mut w = create(path)?;
    let header = TrajectoryHeader {
        format: "nsfde-trajectory".into(),
        version: FORMAT_VERSION,
        seed: traj.seed,
        stream: traj.stream,
        n_modes: traj.snapshots.first().map_or(0, Vec::len),
        h,
        dt,
        store_stride,
    };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    for ((t, c), s) in traj.times.iter().zip(&traj.snapshots).zip(&traj.seg_norms) {
        serde_json::to_writer(&mut w, &SnapshotRecord { t: *t, coeffs: c.clone(), seg_norm: *s })?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<(TrajectoryHeader, Vec<SnapshotRecord>)> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let first = lines.next().ok_or_else(|| Error::Config(format!("{} is empty", path.display())))??;
    let header: TrajectoryHeader = serde_json::from_str(&first)?;
    check_format(&header.format, header.version, "nsfde-trajectory")?;
    let records = lines
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect::<Result<Vec<SnapshotRecord>>>()?;
    Ok((header, records))
}

fn check_format(format: &str, version: u32, expected: &str) -> Result<()> {
    if format != expected || version != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "expected {expected} version {FORMAT_VERSION}, found {format} version {version}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureHeader {
    pub format: String,
    pub version: u32,
    /// Resolved configuration of the runs, as TOML.
    pub config: String,
    pub observables: Vec<Observable>,
    pub meta: MeasureMeta,
    pub blocks: Vec<usize>,
    pub n_samples: usize,
    pub n_segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MeasureRecord {
    Sample(Vec<f64>),
    Segment(Segment),
}

/// Header with the embedded configuration, then sample rows, then window checkpoints.
pub fn write_measure(path: &Path, mu: &EmpiricalMeasure, config_toml: &str) -> Result<()> {
    let mut w = create(path)?;
    let header = MeasureHeader {
        format: "nsfde-measure".into(),
        version: FORMAT_VERSION,
        config: config_toml.to_string(),
        observables: mu.observables.clone(),
        meta: mu.meta.clone(),
        blocks: mu.blocks.clone(),
        n_samples: mu.samples.len(),
        n_segments: mu.segments.len(),
    };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    for row in &mu.samples {
        serde_json::to_writer(&mut w, &MeasureRecord::Sample(row.clone()))?;
        writeln!(w)?;
    }
    for seg in &mu.segments {
        serde_json::to_writer(&mut w, &MeasureRecord::Segment(seg.clone()))?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a measure file; returns the measure and the embedded configuration.
pub fn read_measure(path: &Path) -> Result<(EmpiricalMeasure, String)> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let first = lines.next().ok_or_else(|| Error::Config(format!("{} is empty", path.display())))??;
    let header: MeasureHeader = serde_json::from_str(&first)?;
    check_format(&header.format, header.version, "nsfde-measure")?;
    let (mut samples, mut segments) = (Vec::new(), Vec::new());
    for line in lines {
        match serde_json::from_str(&line?)? {
            MeasureRecord::Sample(row) => samples.push(row),
            MeasureRecord::Segment(seg) => segments.push(seg),
        }
    }
    if samples.len() != header.n_samples || segments.len() != header.n_segments {
        return Err(Error::Config(format!(
            "{}: header announces {} samples and {} segments, found {} and {}",
            path.display(),
            header.n_samples,
            header.n_segments,
            samples.len(),
            segments.len()
        )));
    }
    let n = samples.len();
    let mu = EmpiricalMeasure {
        observables: header.observables,
        samples,
        weights: vec![1.0 / n.max(1) as f64; n],
        blocks: header.blocks,
        segments,
        meta: header.meta,
    };
    Ok((mu, header.config))
}

/// Writes `# format=<kind> version=1`, then the CSV header and rows.
pub fn write_csv<S: Serialize>(path: &Path, kind: &str, rows: &[S]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# format={kind} version={FORMAT_VERSION}")?;
    let mut csv = csv::Writer::from_writer(w);
    for row in rows {
        csv.serialize(row)?;
    }
    csv.flush()?;
    Ok(())
}

/// Reads a file written by [`write_csv`].
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    write_csv(path, "nsfde-report", rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{default_observables, krylov_bogoliubov};
    use crate::solver::Checkpoint;

    fn trajectory() -> Trajectory {
        let seg = Segment::from_values(0.1, 0.05, vec![vec![0.0, 1.0], vec![0.5, -0.25], vec![1.0, 0.125]]).unwrap();
        Trajectory {
            seed: 3,
            stream: 4,
            times: vec![0.0, 0.05, 0.1],
            snapshots: vec![vec![1.0, 2.0], vec![0.1 + 0.2, 1e-300], vec![-3.5, 0.0]],
            seg_norms: vec![2.0, 0.3, 3.5],
            checkpoints: vec![Checkpoint { time: 0.1, segment: seg.clone() }],
            max_fp_iters: 0,
            final_segment: seg,
        }
    }

    #[test]
    fn trajectory_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let traj = trajectory();
        write_trajectory(&path, &traj, 0.1, 0.05, 1).unwrap();
        let (header, records) = read_trajectory(&path).unwrap();
        assert_eq!((header.seed, header.stream, header.version), (3, 4, FORMAT_VERSION));
        for (r, (t, c)) in records.iter().zip(traj.times.iter().zip(&traj.snapshots)) {
            assert_eq!(r.t.to_bits(), t.to_bits());
            assert!(r.coeffs.iter().zip(c).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn measure_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let mu = krylov_bogoliubov(&[trajectory()], 0.0, 1, &default_observables(2)).unwrap();
        write_measure(&path, &mu, "seed = 3\n").unwrap();
        let (back, config) = read_measure(&path).unwrap();
        assert_eq!(back, mu);
        assert_eq!(config, "seed = 3\n");
    }

    #[test]
    fn report_has_version_line_and_quotes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = vec![ReportRow {
            statistic: "a,\"b\"".into(),
            estimate: 0.5,
            stderr: 0.1,
            threshold: 1.0,
            verdict: true,
        }];
        write_report(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# format=nsfde-report version=1"));
        assert_eq!(lines.next(), Some("statistic,estimate,stderr,threshold,verdict"));
        assert_eq!(lines.next(), Some("\"a,\"\"b\"\"\",0.5,0.1,1.0,true"));
        #[derive(Deserialize)]
        struct Row {
            statistic: String,
            verdict: bool,
        }
        let back: Vec<Row> = read_csv(&path).unwrap();
        assert_eq!(back[0].statistic, "a,\"b\"");
        assert!(back[0].verdict);
    }
}
