//! Command-line front end.
//!
//! Parameters come from a flat TOML file (`--config`) whose keys match the
//! long flag names with underscores; flags given on the command line win.
//! Every rate is in units of Γ₀ and every time in units of 1/Γ₀.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate, SolverConfig};
use crate::error::{Error, Result};
use crate::measures::measure;
use crate::model::{validate, ModelParams, ScanParameter, SecondLayerEnv};
use crate::svg::{heat_map, line_plot, Series};
use crate::sweep::{
    find_crossover, run_sweep, Axis, CrossoverSearch, MarkovLabel, Predicate, SweepResult,
    SweepSpec, Thresholds,
};

#[derive(Debug, Parser)]
#[command(
    name = "qubit-hierarchy",
    version,
    about = "Qubit dynamics in a hierarchical cavity environment: non-Markovianity and QSL sweeps"
)]
pub struct Cli {
    /// Flat TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Write the fully resolved configuration to this path before running.
    #[arg(long, global = true)]
    pub echo_config: Option<PathBuf>,

    #[command(flatten)]
    pub overrides: ConfigOverrides,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Integrate the amplitudes and write the trajectory CSV.
    Simulate,
    /// Print the non-Markovianity and QSL report for one parameter point.
    Measure,
    /// Bisect for the parameter value where a label changes.
    Crossover,
    /// Sweep one or two parameters and write the phase grid.
    Phase,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Measure => "measure",
            Command::Crossover => "crossover",
            Command::Phase => "phase",
        }
    }
}

macro_rules! overrides {
    ($( $(#[$doc:meta])* $field:ident : $ty:ty $([$($arg:tt)*])? ),* $(,)?) => {
        /// Optional values from a config file or the command line.
        #[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct ConfigOverrides {
            $(
                $(#[$doc])*
                #[arg(long, global = true $(, $($arg)*)?)]
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        impl ConfigOverrides {
            /// Values from `self` take precedence over `base`.
            pub fn over(self, base: ConfigOverrides) -> ConfigOverrides {
                ConfigOverrides { $( $field: self.$field.or(base.$field), )* }
            }
        }
    };
}

overrides! {
    /// Qubit ↔ m₀ coupling κ₀.
    kappa0: f64,
    /// m₀ ↔ m₁,m₂ coupling κ.
    kappa: f64,
    /// m₁ ↔ m₂ coupling Ω.
    omega_c: f64,
    /// Second-layer reservoirs: `memoryless` or `memory_keeping`.
    env: String,
    /// Loss rate Γ of m₁ and m₂ (memoryless).
    gamma: f64,
    /// Lorentzian coupling Υ₁ (memory-keeping).
    upsilon1: f64,
    upsilon2: f64,
    /// Lorentzian width λ₁ (memory-keeping).
    lambda1: f64,
    lambda2: f64,
    /// Evolution horizon Γ₀τ.
    tau: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_step: f64,
    dense_grid_points: usize,
    /// Outer sweep parameter: kappa, omega_c or kappa0.
    axis1: String,
    axis1_min: f64,
    axis1_max: f64,
    axis1_count: usize,
    /// Inner sweep parameter, or `none` for a 1-D sweep.
    axis2: String,
    axis2_min: f64,
    axis2_max: f64,
    axis2_count: usize,
    eps_nm: f64,
    eps_qsl: f64,
    crossover_parameter: String,
    bracket_lo: f64,
    bracket_hi: f64,
    /// `nm_onset` or `speedup_onset`.
    predicate: String,
    crossover_tol: f64,
    out_dir: String,
    /// Also render SVG plots.
    plot: bool [num_args = 0..=1, default_missing_value = "true"],
    /// Worker threads for sweeps.
    workers: usize,
}

/// Fully resolved run configuration. Serialises to the canonical config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub kappa0: f64,
    pub kappa: f64,
    pub omega_c: f64,
    pub env: String,
    pub gamma: f64,
    pub upsilon1: f64,
    pub upsilon2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub tau: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub dense_grid_points: usize,
    pub axis1: String,
    pub axis1_min: f64,
    pub axis1_max: f64,
    pub axis1_count: usize,
    pub axis2: String,
    pub axis2_min: f64,
    pub axis2_max: f64,
    pub axis2_count: usize,
    pub eps_nm: f64,
    pub eps_qsl: f64,
    pub crossover_parameter: String,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub predicate: String,
    pub crossover_tol: f64,
    pub out_dir: String,
    pub plot: bool,
    pub workers: usize,
}

fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

impl RunConfig {
    pub fn resolve(o: ConfigOverrides) -> Result<RunConfig> {
        let solver = SolverConfig::default();
        let thresholds = Thresholds::default();
        let cfg = RunConfig {
            kappa0: o.kappa0.unwrap_or(0.2),
            kappa: o.kappa.unwrap_or(0.0),
            omega_c: o.omega_c.unwrap_or(0.0),
            env: o.env.unwrap_or_else(|| "memoryless".into()),
            gamma: o.gamma.unwrap_or(1.0),
            upsilon1: o.upsilon1.unwrap_or(1.0),
            upsilon2: o.upsilon2.unwrap_or(1.0),
            lambda1: o.lambda1.unwrap_or(0.1),
            lambda2: o.lambda2.unwrap_or(0.1),
            tau: o.tau.unwrap_or(4.0),
            rel_tol: o.rel_tol.unwrap_or(solver.rel_tol),
            abs_tol: o.abs_tol.unwrap_or(solver.abs_tol),
            max_step: o.max_step.unwrap_or(solver.max_step),
            dense_grid_points: o.dense_grid_points.unwrap_or(solver.dense_grid_points),
            axis1: o.axis1.unwrap_or_else(|| "kappa".into()),
            axis1_min: o.axis1_min.unwrap_or(0.0),
            axis1_max: o.axis1_max.unwrap_or(3.0),
            axis1_count: o.axis1_count.unwrap_or(121),
            axis2: o.axis2.unwrap_or_else(|| "omega_c".into()),
            axis2_min: o.axis2_min.unwrap_or(0.0),
            axis2_max: o.axis2_max.unwrap_or(3.0),
            axis2_count: o.axis2_count.unwrap_or(121),
            eps_nm: o.eps_nm.unwrap_or(thresholds.eps_nm),
            eps_qsl: o.eps_qsl.unwrap_or(thresholds.eps_qsl),
            crossover_parameter: o.crossover_parameter.unwrap_or_else(|| "kappa".into()),
            bracket_lo: o.bracket_lo.unwrap_or(0.5),
            bracket_hi: o.bracket_hi.unwrap_or(3.0),
            predicate: o.predicate.unwrap_or_else(|| "nm_onset".into()),
            crossover_tol: o.crossover_tol.unwrap_or(1e-4),
            out_dir: o.out_dir.unwrap_or_else(|| ".".into()),
            plot: o.plot.unwrap_or(false),
            workers: o.workers.unwrap_or_else(default_workers),
        };
        // fail early on unparseable enumerations
        cfg.env()?;
        cfg.sweep_axes()?;
        cfg.crossover_search()?;
        Ok(cfg)
    }

    /// Reads a flat TOML config file.
    pub fn read_overrides(path: &Path) -> Result<ConfigOverrides> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Canonical TOML form; re-reading it reproduces this configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serialises to TOML")
    }

    fn env(&self) -> Result<SecondLayerEnv> {
        match self.env.as_str() {
            "memoryless" => Ok(SecondLayerEnv::Memoryless { gamma: self.gamma }),
            "memory_keeping" => Ok(SecondLayerEnv::MemoryKeeping {
                upsilon1: self.upsilon1,
                upsilon2: self.upsilon2,
                lambda1: self.lambda1,
                lambda2: self.lambda2,
            }),
            other => Err(Error::Config(format!(
                "unknown env `{other}` (expected memoryless or memory_keeping)"
            ))),
        }
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        validate(ModelParams {
            kappa0: self.kappa0,
            kappa: self.kappa,
            omega_c: self.omega_c,
            env: self.env()?,
            tau: self.tau,
        })
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            dense_grid_points: self.dense_grid_points,
        }
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            eps_nm: self.eps_nm,
            eps_qsl: self.eps_qsl,
        }
    }

    fn sweep_axes(&self) -> Result<(Axis, Option<Axis>)> {
        let axis1 = Axis::new(
            ScanParameter::parse(&self.axis1)?,
            self.axis1_min,
            self.axis1_max,
            self.axis1_count,
        );
        let axis2 = if self.axis2 == "none" {
            None
        } else {
            Some(Axis::new(
                ScanParameter::parse(&self.axis2)?,
                self.axis2_min,
                self.axis2_max,
                self.axis2_count,
            ))
        };
        Ok((axis1, axis2))
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let (axis1, axis2) = self.sweep_axes()?;
        let spec = SweepSpec {
            base: self.model_params()?,
            solver: self.solver(),
            axis1,
            axis2,
            thresholds: self.thresholds(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn crossover_search(&self) -> Result<CrossoverSearch> {
        Ok(CrossoverSearch {
            parameter: ScanParameter::parse(&self.crossover_parameter)?,
            bracket: (self.bracket_lo, self.bracket_hi),
            predicate: Predicate::parse(&self.predicate)?,
            tol: self.crossover_tol,
        })
    }

    fn out_path(&self, name: &str) -> Result<PathBuf> {
        let dir = PathBuf::from(&self.out_dir);
        fs::create_dir_all(&dir)?;
        Ok(dir.join(name))
    }
}

/// What a command printed and wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    /// JSON record printed on stdout.
    pub record: serde_json::Value,
    pub files: Vec<PathBuf>,
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<CommandOutput> {
    let params = cfg.model_params()?;
    let traj = simulate(&params, &cfg.solver())?;
    let csv_path = cfg.out_path("trajectory.csv")?;
    traj.write_csv(BufWriter::new(File::create(&csv_path)?))?;
    let mut files = vec![csv_path];
    if cfg.plot {
        let pts: Vec<(f64, f64)> = traj.times.iter().copied().zip(traj.survival.iter().copied()).collect();
        let svg = line_plot(
            "Qubit survival amplitude",
            "Γ₀ t",
            "|a(t)|",
            &[Series {
                name: "|a(t)|",
                points: &pts,
            }],
        );
        let svg_path = cfg.out_path("trajectory.svg")?;
        fs::write(&svg_path, svg)?;
        files.push(svg_path);
    }
    Ok(CommandOutput {
        record: serde_json::json!({
            "command": "simulate",
            "rows": traj.len(),
            "survival_tau": traj.survival_tau(),
            "files": files,
        }),
        files,
    })
}

pub fn cmd_measure(cfg: &RunConfig) -> Result<CommandOutput> {
    let params = cfg.model_params()?;
    let traj = simulate(&params, &cfg.solver())?;
    let report = measure(&traj);
    let record = serde_json::to_value(&report)?;
    let path = cfg.out_path("measure.json")?;
    write_json(&path, &record)?;
    Ok(CommandOutput {
        record,
        files: vec![path],
    })
}

pub fn cmd_crossover(cfg: &RunConfig) -> Result<CommandOutput> {
    let params = cfg.model_params()?;
    let result = find_crossover(&params, &cfg.solver(), &cfg.thresholds(), &cfg.crossover_search()?)?;
    let record = serde_json::to_value(&result)?;
    let path = cfg.out_path("crossover.json")?;
    write_json(&path, &record)?;
    Ok(CommandOutput {
        record,
        files: vec![path],
    })
}

/// SVG renderings of a sweep: a heat map with the Markovian boundary for 2-D
/// sweeps, curves of N and τ_QSL/τ for 1-D sweeps.
pub fn phase_svgs(result: &SweepResult) -> Vec<(&'static str, String)> {
    let spec = &result.spec;
    let names = spec.axis_names();
    match &spec.axis2 {
        Some(axis2) => {
            let xs = spec.axis1.values();
            let ys = axis2.values();
            let values: Vec<Vec<f64>> = (0..xs.len())
                .map(|i| {
                    result
                        .row(i)
                        .iter()
                        .map(|p| p.report().map(|r| r.n_blp).unwrap_or(f64::NAN))
                        .collect()
                })
                .collect();
            let mask: Vec<Vec<bool>> = (0..xs.len())
                .map(|i| {
                    result
                        .row(i)
                        .iter()
                        .map(|p| p.markov() == Some(MarkovLabel::NonMarkovian))
                        .collect()
                })
                .collect();
            vec![(
                "phase.svg",
                heat_map("Non-Markovianity N", names[0], names[1], &xs, &ys, &values, &mask),
            )]
        }
        None => {
            let curve = |f: fn(&crate::measures::MeasureReport) -> f64| -> Vec<(f64, f64)> {
                result
                    .points
                    .iter()
                    .filter_map(|p| p.report().map(|r| (p.coords[0], f(r))))
                    .collect()
            };
            let n = curve(|r| r.n_blp);
            let q = curve(|r| r.qsl_ratio_general);
            vec![
                (
                    "phase.svg",
                    line_plot("Non-Markovianity N", names[0], "N", &[Series { name: "N", points: &n }]),
                ),
                (
                    "phase_qsl.svg",
                    line_plot(
                        "QSL ratio",
                        names[0],
                        "τ_QSL/τ",
                        &[Series {
                            name: "τ_QSL/τ",
                            points: &q,
                        }],
                    ),
                ),
            ]
        }
    }
}

pub fn cmd_phase(cfg: &RunConfig) -> Result<CommandOutput> {
    let spec = cfg.sweep_spec()?;
    let result = run_sweep(&spec, cfg.workers)?;
    let csv_path = cfg.out_path("phase.csv")?;
    result.write_csv(BufWriter::new(File::create(&csv_path)?))?;
    let grid_path = cfg.out_path("phase_grid.txt")?;
    result.write_grid(BufWriter::new(File::create(&grid_path)?))?;
    let mut files = vec![csv_path, grid_path];
    if cfg.plot {
        for (name, svg) in phase_svgs(&result) {
            let svg_path = cfg.out_path(name)?;
            fs::write(&svg_path, svg)?;
            files.push(svg_path);
        }
    }
    let failed = result.points.iter().filter(|p| p.report().is_none()).count();
    let non_markovian = result
        .points
        .iter()
        .filter(|p| p.markov() == Some(MarkovLabel::NonMarkovian))
        .count();
    Ok(CommandOutput {
        record: serde_json::json!({
            "command": "phase",
            "points": result.points.len(),
            "non_markovian": non_markovian,
            "failed": failed,
            "files": files,
        }),
        files,
    })
}

/// Process exit code for an error: 2 invalid input, 3 solver failure,
/// 4 empty crossover bracket, 1 anything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonPhysicalParameter { .. }
        | Error::InvalidSolverConfig(_)
        | Error::InvalidSweep(_)
        | Error::InvalidState(_)
        | Error::VariantMismatch { .. }
        | Error::Config(_) => 2,
        Error::StepSizeUnderflow { .. } => 3,
        Error::NoCrossoverInBracket { .. } => 4,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
    }
}

/// Machine-readable error record written to stderr.
pub fn error_record(err: &Error) -> serde_json::Value {
    serde_json::json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": exit_code(err),
    })
}

/// Resolves the configuration and runs the selected command.
pub fn run(cli: Cli) -> Result<CommandOutput> {
    let file = match &cli.config {
        Some(path) => RunConfig::read_overrides(path)?,
        None => ConfigOverrides::default(),
    };
    let cfg = RunConfig::resolve(cli.overrides.over(file))?;
    if let Some(path) = &cli.echo_config {
        fs::write(path, cfg.to_toml())?;
    }
    match cli.command {
        Command::Simulate => cmd_simulate(&cfg),
        Command::Measure => cmd_measure(&cfg),
        Command::Crossover => cmd_crossover(&cfg),
        Command::Phase => cmd_phase(&cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file = ConfigOverrides {
            kappa: Some(1.0),
            tau: Some(2.0),
            ..Default::default()
        };
        let flags = ConfigOverrides {
            kappa: Some(2.4),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(flags.over(file)).unwrap();
        assert_eq!(cfg.kappa, 2.4);
        assert_eq!(cfg.tau, 2.0);
        assert_eq!(cfg.kappa0, 0.2);
    }

    #[test]
    fn canonical_form_round_trips() {
        let cfg = RunConfig::resolve(ConfigOverrides {
            env: Some("memory_keeping".into()),
            lambda1: Some(0.1),
            rel_tol: Some(3e-11),
            workers: Some(3),
            axis2: Some("none".into()),
            ..Default::default()
        })
        .unwrap();
        let text = cfg.to_toml();
        let again: ConfigOverrides = toml::from_str(&text).unwrap();
        let cfg2 = RunConfig::resolve(again).unwrap();
        assert_eq!(cfg2, cfg);
        assert_eq!(cfg2.to_toml(), text);
    }

    #[test]
    fn unknown_keys_and_enums_are_rejected() {
        assert!(toml::from_str::<ConfigOverrides>("kapa = 1.0").is_err());
        let bad_env = ConfigOverrides {
            env: Some("lossy".into()),
            ..Default::default()
        };
        assert!(matches!(RunConfig::resolve(bad_env), Err(Error::Config(_))));
        let bad_axis = ConfigOverrides {
            axis1: Some("gamma".into()),
            ..Default::default()
        };
        assert!(matches!(RunConfig::resolve(bad_axis), Err(Error::Config(_))));
    }

    #[test]
    fn exit_codes_are_distinct() {
        let v = exit_code(&Error::NonPhysicalParameter {
            field: "kappa",
            value: -1.0,
        });
        let s = exit_code(&Error::StepSizeUnderflow { t: 0.0, h: 0.0 });
        let b = exit_code(&Error::NoCrossoverInBracket {
            parameter: "kappa".into(),
            lo: 0.0,
            hi: 1.0,
            label: "Markovian".into(),
        });
        assert_eq!((v, s, b), (2, 3, 4));
    }
}
