//! CSV ingestion and persistence: datasets, posterior samples (one file per
//! parameter family plus a manifest), posterior summaries, simulation truth
//! files, and fit-vs-truth validation.


use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{adjusted_rand_index, coclustering_matrix, point_partition, Partition};
use crate::error::{DriftError, Result};
use crate::model::{Dataset, Field4, TrialRecord};
use crate::numeric::quantile_sorted;
use crate::sampler::{Draw, PosteriorSamples, SamplesMeta, Variances};
use crate::simulate::{GroundTruth, SimDesign};

const DATASET_HEADER: [&str; 5] = ["subject", "block", "trial", "stimulus", "response"];

/// Read a dataset from CSV with header `subject,block,trial,stimulus,response`
/// (1-based integers). Malformed rows are reported with their line number.
pub fn read_dataset<P: AsRef<Path>>(path: P, d0_override: Option<usize>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    {
        let got: Vec<&str> = reader.headers()?.iter().collect();
        if got != DATASET_HEADER {
            return Err(DriftError::Data {
                line: 1,
                message: format!("expected header {DATASET_HEADER:?}, found {got:?}"),
            });
        }
    }
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 5 {
            return Err(DriftError::Data {
                line,
                message: format!("expected 5 fields, found {}", row.len()),
            });
        }
        let parse = |idx: usize, name: &str| -> Result<u32> {
            row[idx].parse::<u32>().map_err(|_| DriftError::Data {
                line,
                message: format!("cannot parse {name} from {:?}", &row[idx]),
            })
        };
        records.push(TrialRecord {
            subject: parse(0, "subject")?,
            block: parse(1, "block")?,
            trial: parse(2, "trial")?,
            stimulus: parse(3, "stimulus")?,
            response: parse(4, "response")?,
        });
        lines.push(line);
    }
    // dataset validation reports record indices; map them back to file lines
    Dataset::new(records, d0_override).map_err(|e| match e {
        DriftError::Data { line, message } => DriftError::Data {
            line: lines.get(line as usize - 1).copied().unwrap_or(line),
            message,
        },
        other => other,
    })
}

pub fn write_dataset<P: AsRef<Path>>(path: P, ds: &Dataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(DATASET_HEADER)?;
    for r in ds.records() {
        writer.write_record(&[
            r.subject.to_string(),
            r.block.to_string(),
            r.trial.to_string(),
            r.stimulus.to_string(),
            r.response.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    draw_count: usize,
    meta: SamplesMeta,
}

fn field_to_csv(path: &Path, field_per_draw: Vec<(usize, &Field4)>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["draw", "d", "s", "subject", "block", "value"])?;
    for (draw_idx, field) in field_per_draw {
        for d in 0..field.d0 {
            for s in 0..field.d0 {
                for i in 0..field.n {
                    for t in 0..field.t_blocks {
                        writer.write_record(&[
                            draw_idx.to_string(),
                            (d + 1).to_string(),
                            (s + 1).to_string(),
                            (i + 1).to_string(),
                            (t + 1).to_string(),
                            field.get(d, s, i, t).to_string(),
                        ])?;
                    }
                }
            }
        }
    }
    writer.flush()?;
    Ok(())
}

/// Persist samples into a directory: a JSON manifest plus one CSV per
/// parameter family, with drift and probability fields in long format.
pub fn write_samples<P: AsRef<Path>>(samples: &PosteriorSamples, dir: P) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let manifest = Manifest {
        format: "driftmix-samples-v1".to_string(),
        draw_count: samples.draws.len(),
        meta: samples.meta.clone(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;

    let d0 = samples.meta.d0;

    let mut draws_csv = csv::Writer::from_path(dir.join("draws.csv"))?;
    draws_csv.write_record(["draw", "iteration"])?;
    for (idx, draw) in samples.draws.iter().enumerate() {
        draws_csv.write_record(&[idx.to_string(), draw.iteration.to_string()])?;
    }
    draws_csv.flush()?;

    let mut labels_csv = csv::Writer::from_path(dir.join("labels.csv"))?;
    labels_csv.write_record(["draw", "d", "s", "label"])?;
    for (idx, draw) in samples.draws.iter().enumerate() {
        for (x, &z) in draw.labels.iter().enumerate() {
            let combo = crate::model::Combo::from_index(x, d0);
            labels_csv.write_record(&[
                idx.to_string(),
                (combo.d + 1).to_string(),
                (combo.s + 1).to_string(),
                (z + 1).to_string(),
            ])?;
        }
    }
    labels_csv.flush()?;

    let mut weights_csv = csv::Writer::from_path(dir.join("weights.csv"))?;
    weights_csv.write_record(["draw", "z", "weight"])?;
    for (idx, draw) in samples.draws.iter().enumerate() {
        for (z, &w) in draw.weights.iter().enumerate() {
            weights_csv.write_record(&[idx.to_string(), (z + 1).to_string(), w.to_string()])?;
        }
    }
    weights_csv.flush()?;

    let mut atoms_csv = csv::Writer::from_path(dir.join("atoms.csv"))?;
    atoms_csv.write_record(["draw", "z", "k", "value"])?;
    for (idx, draw) in samples.draws.iter().enumerate() {
        for (z, atom) in draw.atoms.iter().enumerate() {
            for (k, &v) in atom.iter().enumerate() {
                atoms_csv.write_record(&[
                    idx.to_string(),
                    (z + 1).to_string(),
                    (k + 1).to_string(),
                    v.to_string(),
                ])?;
            }
        }
    }
    atoms_csv.flush()?;

    let mut re_csv = csv::Writer::from_path(dir.join("random_effects.csv"))?;
    re_csv.write_record(["draw", "subject", "class", "k", "value"])?;
    for (idx, draw) in samples.draws.iter().enumerate() {
        for (class, coeffs) in [("C", &draw.beta_c), ("I", &draw.beta_i)] {
            for (i, vec) in coeffs.iter().enumerate() {
                for (k, &v) in vec.iter().enumerate() {
                    re_csv.write_record(&[
                        idx.to_string(),
                        (i + 1).to_string(),
                        class.to_string(),
                        (k + 1).to_string(),
                        v.to_string(),
                    ])?;
                }
            }
        }
    }
    re_csv.flush()?;

    let mut var_csv = csv::Writer::from_path(dir.join("variances.csv"))?;
    var_csv.write_record([
        "draw", "sigma_a2", "sigma_s2", "sigma_c_a2", "sigma_c_s2", "sigma_i_a2", "sigma_i_s2",
    ])?;
    for (idx, draw) in samples.draws.iter().enumerate() {
        let v = &draw.variances;
        var_csv.write_record(&[
            idx.to_string(),
            v.sigma_a2.to_string(),
            v.sigma_s2.to_string(),
            v.sigma_c_a2.to_string(),
            v.sigma_c_s2.to_string(),
            v.sigma_i_a2.to_string(),
            v.sigma_i_s2.to_string(),
        ])?;
    }
    var_csv.flush()?;

    field_to_csv(
        &dir.join("drifts.csv"),
        samples.draws.iter().enumerate().map(|(i, d)| (i, &d.drift)).collect(),
    )?;
    field_to_csv(
        &dir.join("probabilities.csv"),
        samples.draws.iter().enumerate().map(|(i, d)| (i, &d.prob)).collect(),
    )?;
    Ok(())
}

fn csv_rows(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    Ok(reader.records().collect::<std::result::Result<Vec<_>, _>>()?)
}

fn parse_cell<T: std::str::FromStr>(row: &csv::StringRecord, idx: usize, what: &str) -> Result<T> {
    row.get(idx)
        .ok_or_else(|| DriftError::Integrity(format!("missing column {idx} in {what}")))?
        .parse::<T>()
        .map_err(|_| DriftError::Integrity(format!("cannot parse {what} column {idx}: {row:?}")))
}

/// Load samples persisted by [`write_samples`].
pub fn read_samples<P: AsRef<Path>>(dir: P) -> Result<PosteriorSamples> {
    let dir = dir.as_ref();
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.format != "driftmix-samples-v1" {
        return Err(DriftError::Integrity(format!(
            "unknown samples format {:?}",
            manifest.format
        )));
    }
    let meta = manifest.meta;
    let (d0, n, t_blocks) = (meta.d0, meta.n, meta.t_blocks);
    let k_basis = meta.config.k_basis;
    let z_max = meta.config.z_max;
    let count = manifest.draw_count;

    let mut draws: Vec<Draw> = (0..count)
        .map(|_| Draw {
            iteration: 0,
            labels: vec![0; d0 * d0],
            weights: vec![0.0; z_max],
            atoms: vec![DVector::zeros(k_basis); z_max],
            beta_c: vec![DVector::zeros(k_basis); n],
            beta_i: vec![DVector::zeros(k_basis); n],
            variances: Variances {
                sigma_a2: 0.0,
                sigma_s2: 0.0,
                sigma_c_a2: 0.0,
                sigma_c_s2: 0.0,
                sigma_i_a2: 0.0,
                sigma_i_s2: 0.0,
            },
            drift: Field4::zeros(d0, n, t_blocks),
            prob: Field4::zeros(d0, n, t_blocks),
        })
        .collect();

    let draw_idx = |row: &csv::StringRecord, what: &str| -> Result<usize> {
        let idx: usize = parse_cell(row, 0, what)?;
        if idx >= count {
            return Err(DriftError::Integrity(format!(
                "{what} references draw {idx}, but the manifest records {count}"
            )));
        }
        Ok(idx)
    };

    for row in csv_rows(&dir.join("draws.csv"))? {
        let idx = draw_idx(&row, "draws.csv")?;
        draws[idx].iteration = parse_cell(&row, 1, "draws.csv")?;
    }
    for row in csv_rows(&dir.join("labels.csv"))? {
        let idx = draw_idx(&row, "labels.csv")?;
        let d: usize = parse_cell(&row, 1, "labels.csv")?;
        let s: usize = parse_cell(&row, 2, "labels.csv")?;
        let z: usize = parse_cell(&row, 3, "labels.csv")?;
        let x = crate::model::Combo { d: d - 1, s: s - 1 }.index(d0);
        draws[idx].labels[x] = z - 1;
    }
    for row in csv_rows(&dir.join("weights.csv"))? {
        let idx = draw_idx(&row, "weights.csv")?;
        let z: usize = parse_cell(&row, 1, "weights.csv")?;
        draws[idx].weights[z - 1] = parse_cell(&row, 2, "weights.csv")?;
    }
    for row in csv_rows(&dir.join("atoms.csv"))? {
        let idx = draw_idx(&row, "atoms.csv")?;
        let z: usize = parse_cell(&row, 1, "atoms.csv")?;
        let k: usize = parse_cell(&row, 2, "atoms.csv")?;
        draws[idx].atoms[z - 1][k - 1] = parse_cell(&row, 3, "atoms.csv")?;
    }
    for row in csv_rows(&dir.join("random_effects.csv"))? {
        let idx = draw_idx(&row, "random_effects.csv")?;
        let i: usize = parse_cell(&row, 1, "random_effects.csv")?;
        let class: String = parse_cell(&row, 2, "random_effects.csv")?;
        let k: usize = parse_cell(&row, 3, "random_effects.csv")?;
        let v: f64 = parse_cell(&row, 4, "random_effects.csv")?;
        match class.as_str() {
            "C" => draws[idx].beta_c[i - 1][k - 1] = v,
            "I" => draws[idx].beta_i[i - 1][k - 1] = v,
            other => {
                return Err(DriftError::Integrity(format!(
                    "unknown random-effect class {other:?}"
                )))
            }
        }
    }
    for row in csv_rows(&dir.join("variances.csv"))? {
        let idx = draw_idx(&row, "variances.csv")?;
        draws[idx].variances = Variances {
            sigma_a2: parse_cell(&row, 1, "variances.csv")?,
            sigma_s2: parse_cell(&row, 2, "variances.csv")?,
            sigma_c_a2: parse_cell(&row, 3, "variances.csv")?,
            sigma_c_s2: parse_cell(&row, 4, "variances.csv")?,
            sigma_i_a2: parse_cell(&row, 5, "variances.csv")?,
            sigma_i_s2: parse_cell(&row, 6, "variances.csv")?,
        };
    }
    for (file, pick) in [("drifts.csv", 0usize), ("probabilities.csv", 1)] {
        for row in csv_rows(&dir.join(file))? {
            let idx = draw_idx(&row, file)?;
            let d: usize = parse_cell(&row, 1, file)?;
            let s: usize = parse_cell(&row, 2, file)?;
            let i: usize = parse_cell(&row, 3, file)?;
            let t: usize = parse_cell(&row, 4, file)?;
            let v: f64 = parse_cell(&row, 5, file)?;
            let target = if pick == 0 { &mut draws[idx].drift } else { &mut draws[idx].prob };
            target.set(d - 1, s - 1, i - 1, t - 1, v);
        }
    }
    Ok(PosteriorSamples { draws, meta })
}

/// Posterior mean and equal-tailed interval of one scalar summary cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub d: usize,
    pub s: usize,
    pub subject: Option<usize>,
    pub block: usize,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Posterior summaries: population-level cells average the projected drifts
/// (and probabilities) over subjects before quantiles are taken.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub level: f64,
    pub population_drift: Vec<CellSummary>,
    pub subject_drift: Vec<CellSummary>,
    pub population_prob: Vec<CellSummary>,
    pub subject_prob: Vec<CellSummary>,
    pub coclustering: Vec<Vec<f64>>,
    pub partition: Vec<usize>,
}

fn summarize_series(
    series: &mut [f64],
    d: usize,
    s: usize,
    subject: Option<usize>,
    block: usize,
    level: f64,
) -> CellSummary {
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    series.sort_by(|a, b| a.partial_cmp(b).expect("NaN in summary series"));
    let tail = (1.0 - level) / 2.0;
    CellSummary {
        d,
        s,
        subject,
        block,
        mean,
        lo: quantile_sorted(series, tail),
        hi: quantile_sorted(series, 1.0 - tail),
    }
}

pub fn summarize(samples: &PosteriorSamples, level: f64) -> Result<Summary> {
    if samples.draws.is_empty() {
        return Err(DriftError::Domain("no stored draws to summarize".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(DriftError::Config(format!("credible level must be in (0, 1), got {level}")));
    }
    let (d0, n, t_blocks) = (samples.meta.d0, samples.meta.n, samples.meta.t_blocks);
    let mut population_drift = Vec::new();
    let mut subject_drift = Vec::new();
    let mut population_prob = Vec::new();
    let mut subject_prob = Vec::new();
    for d in 0..d0 {
        for s in 0..d0 {
            for t in 0..t_blocks {
                for (pick, pop_rows, subj_rows) in [
                    (0usize, &mut population_drift, &mut subject_drift),
                    (1, &mut population_prob, &mut subject_prob),
                ] {
                    fn field_of(draw: &Draw, pick: usize) -> &Field4 {
                        if pick == 0 {
                            &draw.drift
                        } else {
                            &draw.prob
                        }
                    }
                    let mut pop_series: Vec<f64> = samples
                        .draws
                        .iter()
                        .map(|draw| {
                            (0..n).map(|i| field_of(draw, pick).get(d, s, i, t)).sum::<f64>()
                                / n as f64
                        })
                        .collect();
                    pop_rows.push(summarize_series(&mut pop_series, d + 1, s + 1, None, t + 1, level));
                    for i in 0..n {
                        let mut series: Vec<f64> = samples
                            .draws
                            .iter()
                            .map(|draw| field_of(draw, pick).get(d, s, i, t))
                            .collect();
                        subj_rows.push(summarize_series(
                            &mut series,
                            d + 1,
                            s + 1,
                            Some(i + 1),
                            t + 1,
                            level,
                        ));
                    }
                }
            }
        }
    }
    Ok(Summary {
        level,
        population_drift,
        subject_drift,
        population_prob,
        subject_prob,
        coclustering: coclustering_matrix(samples)?,
        partition: point_partition(samples)?.labels,
    })
}

fn write_cells(path: &Path, rows: &[CellSummary]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["d", "s", "subject", "block", "mean", "lo", "hi"])?;
    for r in rows {
        writer.write_record(&[
            r.d.to_string(),
            r.s.to_string(),
            r.subject.map(|i| i.to_string()).unwrap_or_default(),
            r.block.to_string(),
            r.mean.to_string(),
            r.lo.to_string(),
            r.hi.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Write summary CSVs into a directory.
pub fn write_summary<P: AsRef<Path>>(summary: &Summary, d0: usize, dir: P) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_cells(&dir.join("population_drifts.csv"), &summary.population_drift)?;
    write_cells(&dir.join("subject_drifts.csv"), &summary.subject_drift)?;
    write_cells(&dir.join("population_probabilities.csv"), &summary.population_prob)?;
    write_cells(&dir.join("subject_probabilities.csv"), &summary.subject_prob)?;

    let mut co_csv = csv::Writer::from_path(dir.join("coclustering.csv"))?;
    co_csv.write_record(["d_a", "s_a", "d_b", "s_b", "share"])?;
    for (a, row) in summary.coclustering.iter().enumerate() {
        for (b, &v) in row.iter().enumerate() {
            let ca = crate::model::Combo::from_index(a, d0);
            let cb = crate::model::Combo::from_index(b, d0);
            co_csv.write_record(&[
                (ca.d + 1).to_string(),
                (ca.s + 1).to_string(),
                (cb.d + 1).to_string(),
                (cb.s + 1).to_string(),
                v.to_string(),
            ])?;
        }
    }
    co_csv.flush()?;

    let mut part_csv = csv::Writer::from_path(dir.join("partition.csv"))?;
    part_csv.write_record(["d", "s", "cluster"])?;
    for (x, &z) in summary.partition.iter().enumerate() {
        let combo = crate::model::Combo::from_index(x, d0);
        part_csv.write_record(&[
            (combo.d + 1).to_string(),
            (combo.s + 1).to_string(),
            (z + 1).to_string(),
        ])?;
    }
    part_csv.flush()?;
    Ok(())
}

/// Fit-vs-truth report: probability mean squared error over all
/// `(d, s, i, t)` cells, partition agreement indices, and credible-interval
/// coverage of the truth (over cells with truth inside `[0.05, 0.95]`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub mse: f64,
    pub rand_index: f64,
    pub adjusted_rand_index: f64,
    pub coverage: f64,
    pub coverage_cells: usize,
    pub level: f64,
}

pub fn validate_samples(
    samples: &PosteriorSamples,
    truth_prob: &Field4,
    truth_labels: &[usize],
    level: f64,
) -> Result<ValidationReport> {
    if samples.draws.is_empty() {
        return Err(DriftError::Domain("no stored draws to validate".into()));
    }
    let (d0, n, t_blocks) = (samples.meta.d0, samples.meta.n, samples.meta.t_blocks);
    if truth_prob.d0 != d0 || truth_prob.n != n || truth_prob.t_blocks != t_blocks {
        return Err(DriftError::Config(format!(
            "truth field ({}, {}, {}) does not match samples ({d0}, {n}, {t_blocks})",
            truth_prob.d0, truth_prob.n, truth_prob.t_blocks
        )));
    }
    let tail = (1.0 - level) / 2.0;
    let mut sq_sum = 0.0;
    let mut cells = 0usize;
    let mut covered = 0usize;
    let mut assessed = 0usize;
    let mut series = vec![0.0; samples.draws.len()];
    for d in 0..d0 {
        for s in 0..d0 {
            for i in 0..n {
                for t in 0..t_blocks {
                    for (slot, draw) in series.iter_mut().zip(samples.draws.iter()) {
                        *slot = draw.prob.get(d, s, i, t);
                    }
                    let mean = series.iter().sum::<f64>() / series.len() as f64;
                    let truth = truth_prob.get(d, s, i, t);
                    sq_sum += (mean - truth) * (mean - truth);
                    cells += 1;
                    if truth >= 0.05 && truth <= 0.95 {
                        series.sort_by(|a, b| a.partial_cmp(b).expect("NaN in probability draw"));
                        let lo = quantile_sorted(&series, tail);
                        let hi = quantile_sorted(&series, 1.0 - tail);
                        assessed += 1;
                        if truth >= lo && truth <= hi {
                            covered += 1;
                        }
                    }
                }
            }
        }
    }
    let estimate = point_partition(samples)?;
    let truth_partition = Partition::new(truth_labels.to_vec())?;
    Ok(ValidationReport {
        mse: sq_sum / cells as f64,
        rand_index: crate::diagnostics::rand_index(&estimate, &truth_partition)?,
        adjusted_rand_index: adjusted_rand_index(&estimate, &truth_partition)?,
        coverage: if assessed > 0 { covered as f64 / assessed as f64 } else { f64::NAN },
        coverage_cells: assessed,
        level,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthManifest {
    design: SimDesign,
}

/// Persist simulation ground truth next to the dataset.
pub fn write_truth<P: AsRef<Path>>(dir: P, design: &SimDesign, truth: &GroundTruth) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("design.json"),
        serde_json::to_string_pretty(&TruthManifest { design: design.clone() })?,
    )?;
    field_to_csv(&dir.join("truth_drifts.csv"), vec![(0, &truth.drift)])?;
    field_to_csv(&dir.join("truth_probabilities.csv"), vec![(0, &truth.prob)])?;
    let mut cl_csv = csv::Writer::from_path(dir.join("truth_clusters.csv"))?;
    cl_csv.write_record(["d", "s", "cluster"])?;
    for (x, &z) in truth.cluster_labels.iter().enumerate() {
        let combo = crate::model::Combo::from_index(x, design.d0);
        cl_csv.write_record(&[
            (combo.d + 1).to_string(),
            (combo.s + 1).to_string(),
            (z + 1).to_string(),
        ])?;
    }
    cl_csv.flush()?;
    Ok(())
}

fn field_from_csv(path: &Path, d0: usize, n: usize, t_blocks: usize) -> Result<Field4> {
    let mut field = Field4::zeros(d0, n, t_blocks);
    for row in csv_rows(path)? {
        let d: usize = parse_cell(&row, 1, "field")?;
        let s: usize = parse_cell(&row, 2, "field")?;
        let i: usize = parse_cell(&row, 3, "field")?;
        let t: usize = parse_cell(&row, 4, "field")?;
        let v: f64 = parse_cell(&row, 5, "field")?;
        field.set(d - 1, s - 1, i - 1, t - 1, v);
    }
    Ok(field)
}

/// Load ground truth written by [`write_truth`].
pub fn read_truth<P: AsRef<Path>>(dir: P) -> Result<(SimDesign, GroundTruth)> {
    let dir = dir.as_ref();
    let manifest: TruthManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("design.json"))?)?;
    let design = manifest.design;
    let (d0, n, t_blocks) = (design.d0, design.n, design.t_blocks);
    let drift = field_from_csv(&dir.join("truth_drifts.csv"), d0, n, t_blocks)?;
    let prob = field_from_csv(&dir.join("truth_probabilities.csv"), d0, n, t_blocks)?;
    let mut cluster_labels = vec![0usize; d0 * d0];
    for row in csv_rows(&dir.join("truth_clusters.csv"))? {
        let d: usize = parse_cell(&row, 0, "truth_clusters.csv")?;
        let s: usize = parse_cell(&row, 1, "truth_clusters.csv")?;
        let z: usize = parse_cell(&row, 2, "truth_clusters.csv")?;
        cluster_labels[crate::model::Combo { d: d - 1, s: s - 1 }.index(d0)] = z - 1;
    }
    Ok((design, GroundTruth { drift, prob, cluster_labels }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, StreamTag};
    use crate::sampler::{run_chain, McmcConfig};
    use crate::simulate::{default_design, generate, SimDesign};
    use tempfile::tempdir;

    fn small_fit() -> (Dataset, PosteriorSamples) {
        let design = SimDesign { n: 2, t_blocks: 3, l_trials: 6, ..default_design() };
        let mut rng = substream(31, StreamTag::Simulate, &[]);
        let (ds, _) = generate(&design, &mut rng).unwrap();
        let mut cfg = McmcConfig::default_for(ds.d0, ds.t_blocks, 77).unwrap();
        cfg.n_iter = 6;
        cfg.burn_in = 2;
        cfg.thin = 2;
        cfg.m_prob = 100;
        let samples = run_chain(&ds, &cfg).unwrap();
        (ds, samples)
    }

    #[test]
    fn one_row_file_parses_to_a_degenerate_dataset() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("tiny.csv");
        std::fs::write(&path, "subject,block,trial,stimulus,response\n1,1,1,1,2\n").unwrap();
        let ds = read_dataset(&path, None).unwrap();
        assert_eq!((ds.n, ds.t_blocks, ds.l_trials, ds.d0), (1, 1, 1, 2));
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "subject,block,trial,stimulus,response\n1,1,1,1,2\n1,1,2,0,2\n",
        )
        .unwrap();
        match read_dataset(&path, None) {
            Err(DriftError::Data { line, message }) => {
                assert_eq!(line, 3, "{message}");
                assert!(message.contains("stimulus"));
            }
            other => panic!("expected a data error, got {other:?}"),
        }
        std::fs::write(&path, "subject,block,trial,stimulus,response\n1,1,x,1,2\n").unwrap();
        assert!(matches!(read_dataset(&path, None), Err(DriftError::Data { line: 2, .. })));
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        assert!(read_dataset(&path, None).is_err());
    }

    #[test]
    fn dataset_round_trips_through_csv() {
        let design = SimDesign { n: 3, t_blocks: 2, l_trials: 4, ..default_design() };
        let mut rng = substream(32, StreamTag::Simulate, &[]);
        let (ds, _) = generate(&design, &mut rng).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_dataset(&path, &ds).unwrap();
        let back = read_dataset(&path, None).unwrap();
        assert_eq!(ds, back);
        assert_eq!(ds.digest(), back.digest());
    }

    #[test]
    fn samples_round_trip_through_the_directory_layout() {
        let (_, samples) = small_fit();
        let dir = tempdir().unwrap();
        write_samples(&samples, dir.path()).unwrap();
        let back = read_samples(dir.path()).unwrap();
        assert_eq!(samples, back);
    }

    #[test]
    fn probability_file_has_the_documented_shape() {
        let (_, samples) = small_fit();
        let dir = tempdir().unwrap();
        write_samples(&samples, dir.path()).unwrap();
        let rows = csv_rows(&dir.path().join("probabilities.csv")).unwrap();
        let per_draw = samples.meta.d0 * samples.meta.d0 * samples.meta.n * samples.meta.t_blocks;
        assert_eq!(rows.len(), per_draw * samples.draws.len());
    }

    #[test]
    fn digest_mismatch_is_an_integrity_error() {
        let (ds, samples) = small_fit();
        samples.verify_dataset(&ds).unwrap();
        let mut records = ds.records().to_vec();
        records[0].response = 1 + records[0].response % 4;
        let edited = Dataset::new(records, Some(ds.d0)).unwrap();
        assert!(matches!(
            samples.verify_dataset(&edited),
            Err(DriftError::Integrity(_))
        ));
    }

    #[test]
    fn summary_quantiles_are_the_empirical_percentiles() {
        let (_, samples) = small_fit();
        let summary = summarize(&samples, 0.95).unwrap();
        // reconstruct one subject-level probability cell by hand
        let row = summary
            .subject_prob
            .iter()
            .find(|r| r.d == 1 && r.s == 1 && r.subject == Some(1) && r.block == 1)
            .unwrap();
        let mut series: Vec<f64> = samples
            .draws
            .iter()
            .map(|draw| draw.prob.get(0, 0, 0, 0))
            .collect();
        series.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(row.lo, quantile_sorted(&series, 0.025));
        assert_eq!(row.hi, quantile_sorted(&series, 0.975));
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        assert!((row.mean - mean).abs() < 1e-15);
    }

    #[test]
    fn constant_series_collapse_their_interval() {
        let (_, mut samples) = small_fit();
        let constant = samples.draws[0].clone();
        for draw in &mut samples.draws {
            draw.prob = constant.prob.clone();
        }
        let summary = summarize(&samples, 0.95).unwrap();
        for row in &summary.subject_prob {
            assert_eq!(row.lo, row.hi);
            assert!((row.mean - row.lo).abs() < 1e-15);
        }
    }

    #[test]
    fn truth_files_round_trip() {
        let design = SimDesign { n: 2, t_blocks: 3, l_trials: 5, ..default_design() };
        let mut rng = substream(33, StreamTag::Simulate, &[]);
        let (_, truth) = generate(&design, &mut rng).unwrap();
        let dir = tempdir().unwrap();
        write_truth(dir.path(), &design, &truth).unwrap();
        let (design2, truth2) = read_truth(dir.path()).unwrap();
        assert_eq!(design, design2);
        assert_eq!(truth, truth2);
    }

    #[test]
    fn validation_report_is_exact_for_a_perfect_fit() {
        let (_, mut samples) = small_fit();
        // pretend the truth equals the posterior mean of a constant chain
        let constant = samples.draws[0].clone();
        for draw in &mut samples.draws {
            draw.prob = constant.prob.clone();
            draw.labels = vec![0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3];
        }
        let truth_labels = samples.draws[0].labels.clone();
        let report =
            validate_samples(&samples, &constant.prob, &truth_labels, 0.95).unwrap();
        assert!(report.mse < 1e-30);
        assert_eq!(report.rand_index, 1.0);
        assert_eq!(report.adjusted_rand_index, 1.0);
        assert!(report.coverage >= 1.0 - 1e-12 || report.coverage_cells == 0);
    }
}
