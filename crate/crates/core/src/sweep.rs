//! Parameter scans over the couplings, crossover search and label intervals.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate, SolverConfig};
use crate::error::{Error, Result};
use crate::measures::{measure, MeasureReport};
use crate::model::{validate, ModelParams, ScanParameter};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub parameter: ScanParameter,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(parameter: ScanParameter, min: f64, max: f64, count: usize) -> Self {
        Axis {
            parameter,
            min,
            max,
            count,
        }
    }

    /// `count` evenly spaced values with exact endpoints.
    pub fn values(&self) -> Vec<f64> {
        let last = self.count - 1;
        (0..self.count)
            .map(|j| {
                if j == last {
                    self.max
                } else {
                    self.min + (self.max - self.min) * j as f64 / last as f64
                }
            })
            .collect()
    }

    pub fn resolution(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    fn validate(&self) -> Result<()> {
        if !self.min.is_finite() || !self.max.is_finite() || self.min > self.max {
            return Err(Error::InvalidSweep(format!(
                "axis `{}` needs finite min <= max, got [{}, {}]",
                self.parameter.name(),
                self.min,
                self.max
            )));
        }
        if self.count < 2 {
            return Err(Error::InvalidSweep(format!(
                "axis `{}` needs at least 2 points, got {}",
                self.parameter.name(),
                self.count
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// A point is non-Markovian when N exceeds this floor.
    pub eps_nm: f64,
    /// A point shows speedup when τ_QSL/τ < 1 − eps_qsl.
    pub eps_qsl: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            eps_nm: 1e-6,
            eps_qsl: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: ModelParams,
    pub solver: SolverConfig,
    pub axis1: Axis,
    pub axis2: Option<Axis>,
    pub thresholds: Thresholds,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        validate(self.base)?;
        self.solver.validate()?;
        self.axis1.validate()?;
        if let Some(axis2) = &self.axis2 {
            axis2.validate()?;
            if axis2.parameter == self.axis1.parameter {
                return Err(Error::InvalidSweep("both axes scan the same parameter".into()));
            }
        }
        let t = &self.thresholds;
        if !(t.eps_nm > 0.0 && t.eps_qsl > 0.0) {
            return Err(Error::InvalidSweep("thresholds must be positive".into()));
        }
        Ok(())
    }

    /// Grid coordinates in row-major order (axis1 outer, axis2 inner).
    pub fn coordinates(&self) -> Vec<Vec<f64>> {
        let v1 = self.axis1.values();
        match &self.axis2 {
            None => v1.into_iter().map(|x| vec![x]).collect(),
            Some(axis2) => {
                let v2 = axis2.values();
                v1.iter()
                    .flat_map(|&x| v2.iter().map(move |&y| vec![x, y]))
                    .collect()
            }
        }
    }

    pub fn params_at(&self, coords: &[f64]) -> ModelParams {
        let mut p = self.base.with(self.axis1.parameter, coords[0]);
        if let (Some(axis2), Some(&y)) = (&self.axis2, coords.get(1)) {
            p = p.with(axis2.parameter, y);
        }
        p
    }

    pub fn axis_names(&self) -> Vec<&'static str> {
        let mut names = vec![self.axis1.parameter.name()];
        if let Some(axis2) = &self.axis2 {
            names.push(axis2.parameter.name());
        }
        names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MarkovLabel {
    Markovian,
    NonMarkovian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpeedLabel {
    Speedup,
    NoSpeedup,
    Degenerate,
}

impl MarkovLabel {
    pub fn name(&self) -> &'static str {
        match self {
            MarkovLabel::Markovian => "Markovian",
            MarkovLabel::NonMarkovian => "NonMarkovian",
        }
    }
}

impl SpeedLabel {
    pub fn name(&self) -> &'static str {
        match self {
            SpeedLabel::Speedup => "Speedup",
            SpeedLabel::NoSpeedup => "NoSpeedup",
            SpeedLabel::Degenerate => "Degenerate",
        }
    }
}

pub fn markov_label(report: &MeasureReport, thresholds: &Thresholds) -> MarkovLabel {
    if report.n_blp > thresholds.eps_nm {
        MarkovLabel::NonMarkovian
    } else {
        MarkovLabel::Markovian
    }
}

pub fn speed_label(report: &MeasureReport, thresholds: &Thresholds) -> SpeedLabel {
    if report.degenerate {
        SpeedLabel::Degenerate
    } else if report.qsl_ratio_general < 1.0 - thresholds.eps_qsl {
        SpeedLabel::Speedup
    } else {
        SpeedLabel::NoSpeedup
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PointOutcome {
    Measured {
        report: MeasureReport,
        markov: MarkovLabel,
        speed: SpeedLabel,
    },
    /// The point could not be evaluated; the rest of the sweep is unaffected.
    Failed { kind: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub coords: Vec<f64>,
    pub outcome: PointOutcome,
}

impl SweepPoint {
    pub fn report(&self) -> Option<&MeasureReport> {
        match &self.outcome {
            PointOutcome::Measured { report, .. } => Some(report),
            PointOutcome::Failed { .. } => None,
        }
    }

    pub fn markov(&self) -> Option<MarkovLabel> {
        match &self.outcome {
            PointOutcome::Measured { markov, .. } => Some(*markov),
            PointOutcome::Failed { .. } => None,
        }
    }

    pub fn speed(&self) -> Option<SpeedLabel> {
        match &self.outcome {
            PointOutcome::Measured { speed, .. } => Some(*speed),
            PointOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub points: Vec<SweepPoint>,
}

/// Integrates and measures a single parameter point.
pub fn evaluate_point(params: &ModelParams, solver: &SolverConfig) -> Result<MeasureReport> {
    let traj = simulate(params, solver)?;
    Ok(measure(&traj))
}

fn evaluate_cell(spec: &SweepSpec, coords: Vec<f64>) -> SweepPoint {
    let params = spec.params_at(&coords);
    let outcome = match evaluate_point(&params, &spec.solver) {
        Ok(report) => PointOutcome::Measured {
            markov: markov_label(&report, &spec.thresholds),
            speed: speed_label(&report, &spec.thresholds),
            report,
        },
        Err(e) => PointOutcome::Failed {
            kind: e.kind().to_string(),
            message: e.to_string(),
        },
    };
    SweepPoint { coords, outcome }
}

/// Evaluates every grid point on a pool of `workers` threads.
///
/// Results are assembled in grid order whatever the completion order, and a
/// failing point becomes a [`PointOutcome::Failed`] cell.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    spec.validate()?;
    let coords = spec.coordinates();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidSweep(format!("cannot start worker pool: {e}")))?;
    let points = pool.install(|| {
        coords
            .into_par_iter()
            .map(|c| evaluate_cell(spec, c))
            .collect::<Vec<_>>()
    });
    Ok(SweepResult {
        spec: *spec,
        points,
    })
}

const CSV_MEASURE_COLUMNS: [&str; 11] = [
    "status",
    "n_blp",
    "n_population",
    "qsl_ratio_general",
    "qsl_ratio_closed",
    "survival_tau",
    "degenerate",
    "crossing_times",
    "markov_label",
    "speed_label",
    "error",
];

impl SweepResult {
    /// One row per grid point: coordinates, every report field, labels.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.spec.axis_names();
        header.extend(CSV_MEASURE_COLUMNS);
        w.write_record(&header)?;
        for p in &self.points {
            let mut row: Vec<String> = p.coords.iter().map(|c| c.to_string()).collect();
            match &p.outcome {
                PointOutcome::Measured {
                    report,
                    markov,
                    speed,
                } => {
                    let crossings: Vec<String> =
                        report.crossing_times.iter().map(|t| t.to_string()).collect();
                    row.extend([
                        "ok".to_string(),
                        report.n_blp.to_string(),
                        report.n_population.to_string(),
                        report.qsl_ratio_general.to_string(),
                        report.qsl_ratio_closed.to_string(),
                        report.survival_tau.to_string(),
                        report.degenerate.to_string(),
                        crossings.join(";"),
                        markov.name().to_string(),
                        speed.name().to_string(),
                        String::new(),
                    ]);
                }
                PointOutcome::Failed { kind, .. } => {
                    row.push("failed".to_string());
                    row.extend(std::iter::repeat_n(String::new(), 9));
                    row.push(kind.clone());
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Compact whitespace-separated matrix of N for plotting: a header line,
    /// a line of axis2 values, then one line per axis1 value. Failed cells
    /// are written as `nan`.
    pub fn write_grid<W: Write>(&self, mut out: W) -> Result<()> {
        let names = self.spec.axis_names();
        let cols = self.spec.axis2.map(|a| a.count).unwrap_or(1);
        let col_values = self.spec.axis2.map(|a| a.values()).unwrap_or_else(|| vec![0.0]);
        writeln!(
            out,
            "# n_blp rows={} cols={}",
            names[0],
            names.get(1).copied().unwrap_or("-")
        )?;
        let header: Vec<String> = col_values.iter().map(|v| v.to_string()).collect();
        writeln!(out, "- {}", header.join(" "))?;
        for row in self.points.chunks(cols) {
            let cells: Vec<String> = row
                .iter()
                .map(|p| p.report().map(|r| r.n_blp.to_string()).unwrap_or_else(|| "nan".into()))
                .collect();
            writeln!(out, "{} {}", row[0].coords[0], cells.join(" "))?;
        }
        Ok(())
    }

    /// Points of the axis1 row at index `i` of a 2-D sweep (or the whole 1-D sweep).
    pub fn row(&self, i: usize) -> &[SweepPoint] {
        let cols = self.spec.axis2.map(|a| a.count).unwrap_or(self.points.len());
        &self.points[i * cols..(i + 1) * cols]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Predicate {
    /// Non-Markovianity rises above `eps_nm`.
    NmOnset,
    /// τ_QSL/τ drops below 1 − `eps_qsl`.
    SpeedupOnset,
}

impl Predicate {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nm_onset" | "nm-onset" => Ok(Predicate::NmOnset),
            "speedup_onset" | "speedup-onset" => Ok(Predicate::SpeedupOnset),
            other => Err(Error::Config(format!(
                "unknown predicate `{other}` (expected nm_onset or speedup_onset)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Predicate::NmOnset => "nm_onset",
            Predicate::SpeedupOnset => "speedup_onset",
        }
    }

    pub fn holds(&self, report: &MeasureReport, thresholds: &Thresholds) -> bool {
        match self {
            Predicate::NmOnset => markov_label(report, thresholds) == MarkovLabel::NonMarkovian,
            Predicate::SpeedupOnset => speed_label(report, thresholds) == SpeedLabel::Speedup,
        }
    }

    fn label(&self, holds: bool) -> &'static str {
        match (self, holds) {
            (Predicate::NmOnset, true) => MarkovLabel::NonMarkovian.name(),
            (Predicate::NmOnset, false) => MarkovLabel::Markovian.name(),
            (Predicate::SpeedupOnset, true) => SpeedLabel::Speedup.name(),
            (Predicate::SpeedupOnset, false) => SpeedLabel::NoSpeedup.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverResult {
    pub parameter: ScanParameter,
    pub predicate: Predicate,
    /// Final bracket `[lo, hi]`; its ends carry different labels.
    pub bracket: (f64, f64),
    pub critical: f64,
    /// Width of the final bracket.
    pub achieved_tol: f64,
    pub lower_label: String,
    pub upper_label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverSearch {
    pub parameter: ScanParameter,
    pub bracket: (f64, f64),
    pub predicate: Predicate,
    pub tol: f64,
}

/// Bisection on the predicate indicator along one parameter.
pub fn find_crossover(
    base: &ModelParams,
    solver: &SolverConfig,
    thresholds: &Thresholds,
    search: &CrossoverSearch,
) -> Result<CrossoverResult> {
    let (mut lo, mut hi) = search.bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidSweep(format!(
            "bracket must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    if !(search.tol > 0.0) {
        return Err(Error::InvalidSweep(format!("tol must be positive, got {}", search.tol)));
    }
    let indicator = |value: f64| -> Result<bool> {
        let params = validate(base.with(search.parameter, value))?;
        let report = evaluate_point(&params, solver)?;
        Ok(search.predicate.holds(&report, thresholds))
    };

    let at_lo = indicator(lo)?;
    let at_hi = indicator(hi)?;
    if at_lo == at_hi {
        return Err(Error::NoCrossoverInBracket {
            parameter: search.parameter.name().to_string(),
            lo,
            hi,
            label: search.predicate.label(at_lo).to_string(),
        });
    }
    while hi - lo >= search.tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if indicator(mid)? == at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CrossoverResult {
        parameter: search.parameter,
        predicate: search.predicate,
        bracket: (lo, hi),
        critical: 0.5 * (lo + hi),
        achieved_tol: hi - lo,
        lower_label: search.predicate.label(at_lo).to_string(),
        upper_label: search.predicate.label(at_hi).to_string(),
    })
}

/// Maximal run of equal labels along a 1-D slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelInterval<L> {
    /// `None` for a run of failed points.
    pub label: Option<L>,
    pub start: f64,
    pub end: f64,
    pub first_index: usize,
    pub last_index: usize,
}

/// Run-length encodes labels along coordinates.
pub fn label_intervals<L: Copy + PartialEq>(coords: &[f64], labels: &[Option<L>]) -> Vec<LabelInterval<L>> {
    let mut out: Vec<LabelInterval<L>> = Vec::new();
    for (k, (&x, &label)) in coords.iter().zip(labels).enumerate() {
        match out.last_mut() {
            Some(run) if run.label == label => {
                run.end = x;
                run.last_index = k;
            }
            _ => out.push(LabelInterval {
                label,
                start: x,
                end: x,
                first_index: k,
                last_index: k,
            }),
        }
    }
    out
}

/// Markovian / non-Markovian intervals along a 1-D slice of points.
pub fn multi_interval_detection(slice: &[SweepPoint], axis_index: usize) -> Vec<LabelInterval<MarkovLabel>> {
    let coords: Vec<f64> = slice.iter().map(|p| p.coords[axis_index]).collect();
    let labels: Vec<Option<MarkovLabel>> = slice.iter().map(|p| p.markov()).collect();
    label_intervals(&coords, &labels)
}

/// Speedup / no-speedup intervals along a 1-D slice of points.
pub fn speed_intervals(slice: &[SweepPoint], axis_index: usize) -> Vec<LabelInterval<SpeedLabel>> {
    let coords: Vec<f64> = slice.iter().map(|p| p.coords[axis_index]).collect();
    let labels: Vec<Option<SpeedLabel>> = slice.iter().map(|p| p.speed()).collect();
    label_intervals(&coords, &labels)
}
