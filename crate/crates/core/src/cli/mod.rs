//! Experiment runner: scenario registry, configuration, the full pipeline
//! and report emission.

mod scenarios;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::chainmap::{compare, Comparison};
use crate::dec::{assemble, BoundaryCondition};
use crate::error::{Error, Result};
use crate::geometry::{mesh_report, MeshReport};
use crate::model::{oscillator_1d, robin_halfline, HalfLineCondition};
use crate::morse::{homology_ranks, morse_complex, morse_inequalities, CriticalPoint, HomologyRanks, MorseCounts, MorseInequalities};
use crate::spectral::{
    fmt12, gap_scan, lowest_eigenpairs, write_gap_csv, DegreeFit, GapRow, ScanOptions, RESOLUTION_CONTRACT,
};

pub use scenarios::*;

/// Eigensolver residual tolerance for every run.
pub const EIGEN_TOL: f64 = 1e-10;
/// Largest admissible chain commutation residual.
pub const COMMUTATION_TOL: f64 = 1e-2;
/// Model-suite tolerances: Robin ground eigenvalue, Robin eigenvector L²
/// error, oscillator eigenvalues relative to max(1, T).
pub const ROBIN_GROUND_TOL: f64 = 1e-5;
pub const ROBIN_PROFILE_TOL: f64 = 1e-3;
pub const OSCILLATOR_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: String,
    pub bc: BoundaryCondition,
    #[serde(rename = "T")]
    pub t_list: Vec<f64>,
    pub h: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    pub k: usize,
    pub seed: u64,
    /// Output directory; reports go to stdout when absent.
    pub out: Option<String>,
    pub format: OutputFormat,
    pub override_resolution_contract: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: "disk_linear".into(),
            bc: BoundaryCondition::Absolute,
            t_list: vec![4.0, 8.0, 16.0],
            h: 0.05,
            c0: 1.0,
            k: 6,
            seed: 0,
            out: None,
            format: OutputFormat::Json,
            override_resolution_contract: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Configuration(format!("{key}: cannot parse '{value}'")))
}

impl RunConfig {
    /// Sets one field from its flag or config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "scenario" => self.scenario = v.to_string(),
            "bc" => self.bc = v.parse()?,
            "T" => self.t_list = v.split(',').map(|s| parse("T", s)).collect::<Result<_>>()?,
            "h" => self.h = parse(key, v)?,
            "C0" => self.c0 = parse(key, v)?,
            "k" => self.k = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "out" => self.out = (!v.is_empty()).then(|| v.to_string()),
            "format" => {
                self.format = match v {
                    "json" => OutputFormat::Json,
                    "csv" => OutputFormat::Csv,
                    _ => return Err(Error::Configuration(format!("format must be json or csv, not '{v}'"))),
                }
            }
            "override_resolution_contract" => self.override_resolution_contract = parse(key, v)?,
            _ => return Err(Error::Configuration(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; blank lines and `#` comments are
    /// ignored.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Configuration(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Checks the contract before any heavy work; returns warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let scenario = find_scenario(&self.scenario)?;
        let t = &self.t_list;
        if t.is_empty() || t.iter().any(|v| !v.is_finite()) || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Configuration(format!("T list {t:?} must be finite and strictly ascending")));
        }
        let zero_ok = scenario.is_surface();
        if t[0] < 0.0 || (t[0] == 0.0 && !zero_ok) {
            return Err(Error::Configuration(format!("T list {t:?} must be positive (0 only for surface Hodge runs)")));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::Configuration(format!("h = {} must be positive", self.h)));
        }
        if !(self.c0.is_finite() && self.c0 > 0.0) {
            return Err(Error::Configuration(format!("C0 = {} must be positive", self.c0)));
        }
        if self.k == 0 {
            return Err(Error::Configuration("k must be at least 1".into()));
        }
        let mut warnings = Vec::new();
        let contract = self.h * t.last().unwrap().sqrt();
        if contract > RESOLUTION_CONTRACT {
            if !self.override_resolution_contract {
                return Err(Error::Configuration(format!(
                    "h·√T = {contract:.4} exceeds {RESOLUTION_CONTRACT}; refine h or pass --override-resolution-contract"
                )));
            }
            warnings.push(format!("resolution contract overridden: h·√T = {contract:.4} > {RESOLUTION_CONTRACT}"));
        }
        Ok(warnings)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseSummary {
    pub counts: MorseCounts,
    /// c_j + p_j or c_j + q_{j-1} for the run's boundary condition.
    pub expected: [usize; 3],
    pub critical_points: Vec<CriticalPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexSummary {
    pub generators: [Vec<[f64; 2]>; 3],
    pub boundary: [Vec<Vec<i64>>; 2],
    pub boundary_squared_zero: bool,
    pub homology: HomologyRanks,
    /// Simplicial Betti numbers of the mesh for the same boundary condition.
    pub mesh_betti: [i64; 3],
    pub diagnostics: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonOutcome {
    #[serde(rename = "T")]
    pub t: f64,
    pub comparison: Option<Comparison>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    #[serde(rename = "T")]
    pub t: f64,
    pub robin_lowest: Vec<f64>,
    /// L² distance of the Robin ground state from e^{-Tz}.
    pub robin_profile_error: f64,
    pub oscillator_lowest: Vec<f64>,
    /// 0, 2T, 4T.
    pub oscillator_exact: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub scenario: Scenario,
    pub warnings: Vec<String>,
    pub mesh: Option<MeshReport>,
    pub morse: Option<MorseSummary>,
    pub gaps: Vec<GapRow>,
    pub fits: Vec<DegreeFit>,
    pub inequalities: Option<MorseInequalities>,
    pub complex: Option<ComplexSummary>,
    pub comparisons: Vec<ComparisonOutcome>,
    pub model: Vec<ModelRow>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed, detail: detail.into() }
}

fn log_step(label: &str, start: Instant) {
    eprintln!("[wml] {label}: {:.2}s", start.elapsed().as_secs_f64());
}

/// Runs the pipeline for one configuration. Timings go to stderr so that
/// the report itself is deterministic.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let warnings = cfg.validate()?;
    for w in &warnings {
        eprintln!("[wml] warning: {w}");
    }
    let scenario = find_scenario(&cfg.scenario)?;
    let mut report = RunReport {
        config: cfg.clone(),
        scenario: scenario.clone(),
        warnings,
        mesh: None,
        morse: None,
        gaps: vec![],
        fits: vec![],
        inequalities: None,
        complex: None,
        comparisons: vec![],
        model: vec![],
        checks: vec![],
        passed: false,
    };
    if scenario.is_surface() {
        run_surface(cfg, &scenario, &mut report)?;
    } else {
        run_model_suite(cfg, &mut report)?;
    }
    report.passed = report.checks.iter().all(|c| c.passed);
    Ok(report)
}

fn run_surface(cfg: &RunConfig, scenario: &Scenario, report: &mut RunReport) -> Result<()> {
    let start = Instant::now();
    let f = scenario.morse_function()?;
    let domain = scenario.surface_domain()?;
    let mesh = scenario.mesh(cfg.h)?;
    report.mesh = Some(mesh_report(&mesh)?);
    log_step("mesh", start);

    let data = morse_complex(&f, &domain, cfg.bc, &scenario.complex_settings())?;
    let expected = match cfg.bc {
        BoundaryCondition::Absolute => data.counts.absolute(),
        BoundaryCondition::Relative => data.counts.relative(),
    };
    log_step("Morse complex", start);

    let opts = ScanOptions {
        k: cfg.k,
        tol: EIGEN_TOL,
        seed: cfg.seed,
        mesh_id: format!("{}:h={}", scenario.name, fmt12(cfg.h)),
        expected: Some(expected),
        override_contract: cfg.override_resolution_contract,
    };
    let scan = gap_scan(&mesh, &f, &cfg.t_list, cfg.c0, cfg.bc, &opts)?;
    log_step("spectra", start);

    let homology = homology_ranks(&data.complex);
    let (betti_abs, betti_rel) = mesh.betti();
    let mesh_betti = match cfg.bc {
        BoundaryCondition::Absolute => betti_abs,
        BoundaryCondition::Relative => betti_rel,
    };
    let ineq = morse_inequalities(&data.counts, homology.betti, cfg.bc);
    let squared_zero = data.complex.boundary_squared().iter().flatten().all(|&v| v == 0);

    let checks = &mut report.checks;
    if let Some(reg) = scenario.expected(cfg.bc) {
        checks.push(check("registry_counts", reg == expected, format!("registry {reg:?}, computed {expected:?}")));
    }
    checks.push(check(
        "eigenvalue_counts",
        scan.findings.is_empty(),
        if scan.findings.is_empty() { format!("{expected:?} at every T") } else { scan.findings.join("; ") },
    ));
    checks.push(check("boundary_squared_zero", squared_zero, format!("{:?}", data.complex.boundary_squared())));
    checks.push(check(
        "homology_matches_mesh",
        homology.betti == mesh_betti,
        format!("Thom-Smale {:?}, mesh {:?}", homology.betti, mesh_betti),
    ));
    checks.push(check(
        "morse_inequalities",
        ineq.all_hold(),
        format!("counts {:?}, betti {:?}", ineq.counts, ineq.betti),
    ));

    if cfg.bc == BoundaryCondition::Absolute {
        let asm = assemble(&mesh, &f, BoundaryCondition::Absolute)?;
        for &t in cfg.t_list.iter().filter(|&&t| t > 0.0) {
            let entries: Vec<_> = (0..3).map(|j| scan.report.entry(j, t).expect("scan covers every (degree, T)")).collect();
            let outcome = compare(&asm, &mesh, &data, [entries[0], entries[1], entries[2]], cfg.c0, scenario.quasimode_radius);
            let name = format!("chain_map_T={}", fmt12(t));
            match outcome {
                Ok(c) => {
                    let ok_iso = c.isomorphism.isomorphism;
                    let ok_comm = c.commutation.max_residual <= COMMUTATION_TOL;
                    let ok_hom = c.induced_betti == homology.betti;
                    report.checks.push(check(
                        name,
                        ok_iso && ok_comm && ok_hom,
                        format!(
                            "isomorphism {ok_iso}, commutation {:.3e}, induced homology {:?}",
                            c.commutation.max_residual, c.induced_betti
                        ),
                    ));
                    report.comparisons.push(ComparisonOutcome { t, comparison: Some(c), error: None });
                }
                Err(e) => {
                    report.checks.push(check(name, false, e.to_string()));
                    report.comparisons.push(ComparisonOutcome { t, comparison: None, error: Some(e.to_string()) });
                }
            }
        }
        log_step("chain map", start);
    }

    report.morse = Some(MorseSummary { counts: data.counts, expected, critical_points: data.criticals.clone() });
    report.gaps = scan.rows;
    report.fits = scan.fits;
    report.inequalities = Some(ineq);
    report.complex = Some(ComplexSummary {
        generators: std::array::from_fn(|j| data.complex.generators[j].iter().map(|g| g.location).collect()),
        boundary: data.complex.boundary.clone(),
        boundary_squared_zero: squared_zero,
        homology,
        mesh_betti,
        diagnostics: data.complex.diagnostics.clone(),
    });
    Ok(())
}

/// Robin half-line and harmonic oscillator at every T of the run.
fn run_model_suite(cfg: &RunConfig, report: &mut RunReport) -> Result<()> {
    let start = Instant::now();
    for &t in &cfg.t_list {
        let robin = robin_halfline(t, (12.5 / t).max(10.0), cfg.h, HalfLineCondition::Robin)?;
        let rp = lowest_eigenpairs(&robin.pencil.a, &robin.pencil.m, 2, EIGEN_TOL, cfg.seed)?;
        let robin_profile_error = robin.profile_error(&rp.vectors[0], |z| (-t * z).exp());
        let osc = oscillator_1d(t, (5.5 / t.sqrt()).max(8.0), cfg.h)?;
        let op = lowest_eigenpairs(&osc.pencil.a, &osc.pencil.m, 3, EIGEN_TOL, cfg.seed)?;
        let oscillator_exact: Vec<f64> = (0..3).map(|n| 2.0 * n as f64 * t).collect();
        let row = ModelRow {
            t,
            robin_lowest: rp.values.clone(),
            robin_profile_error,
            oscillator_lowest: op.values.clone(),
            oscillator_exact: oscillator_exact.clone(),
        };
        let tag = fmt12(t);
        report.checks.push(check(
            format!("robin_ground_T={tag}"),
            rp.values[0] <= ROBIN_GROUND_TOL && robin_profile_error <= ROBIN_PROFILE_TOL,
            format!("lowest {:.3e}, profile error {:.3e}", rp.values[0], robin_profile_error),
        ));
        let osc_err = op.values.iter().zip(&oscillator_exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        report.checks.push(check(
            format!("oscillator_T={tag}"),
            osc_err <= OSCILLATOR_TOL * t.max(1.0),
            format!("max deviation from (0, 2T, 4T) {osc_err:.3e}"),
        ));
        report.model.push(row);
    }
    log_step("model suite", start);
    Ok(())
}

fn round_numbers(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) if n.is_f64() => {
            let x: f64 = fmt12(n.as_f64().unwrap()).parse().unwrap_or(0.0);
            if let Some(m) = serde_json::Number::from_f64(x) {
                *n = m;
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_numbers),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_numbers),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 12 significant digits.
pub fn report_json(report: &RunReport) -> Result<String> {
    let io = |e: serde_json::Error| Error::Io(std::io::Error::other(e));
    let mut v = serde_json::to_value(report).map_err(io)?;
    round_numbers(&mut v);
    Ok(serde_json::to_string_pretty(&v).map_err(io)? + "\n")
}

pub fn gap_csv(report: &RunReport) -> Result<String> {
    let mut buf = Vec::new();
    write_gap_csv(&report.gaps, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(std::io::Error::other(e)))
}

/// Writes the report in the requested format into `dir` and returns the
/// file written.
pub fn emit(report: &RunReport, format: OutputFormat, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let (name, body) = match format {
        OutputFormat::Json => ("report.json", report_json(report)?),
        OutputFormat::Csv => ("gaps.csv", gap_csv(report)?),
    };
    let path = dir.join(name);
    std::fs::write(&path, body)?;
    Ok(path)
}

#[derive(Parser, Debug)]
#[command(name = "wml", version, about = "Witten-Morse numerical lab for planar surfaces with boundary")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the pipeline for one scenario.
    Run(RunArgs),
    /// List the shipped scenarios whose name contains FILTER.
    ListScenarios {
        filter: Option<String>,
        /// Print the registry as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Flat key = value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// absolute or relative.
    #[arg(long)]
    bc: Option<String>,
    /// Comma-separated ascending list.
    #[arg(long = "T")]
    t: Option<String>,
    /// Target mesh size.
    #[arg(long)]
    h: Option<String>,
    #[arg(long = "C0")]
    c0: Option<String>,
    /// Eigenpairs requested per degree (raised automatically until C0 is reached).
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory; stdout when omitted.
    #[arg(long)]
    out: Option<String>,
    /// json or csv.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    override_resolution_contract: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_config_text(&std::fs::read_to_string(p)?)?;
        }
        let flags = [
            ("scenario", &self.scenario),
            ("bc", &self.bc),
            ("T", &self.t),
            ("h", &self.h),
            ("C0", &self.c0),
            ("k", &self.k),
            ("seed", &self.seed),
            ("out", &self.out),
            ("format", &self.format),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if self.override_resolution_contract {
            cfg.override_resolution_contract = true;
        }
        Ok(cfg)
    }
}

/// Caps the worker pool at WML_THREADS if set.
fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("WML_THREADS") {
        let n: usize = parse("WML_THREADS", &v)?;
        if n == 0 {
            return Err(Error::Configuration("WML_THREADS must be at least 1".into()));
        }
        // A pool that is already configured is left alone.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<i32> {
    configure_threads()?;
    match cmd {
        Command::ListScenarios { filter, json } => {
            let list = list_scenarios(filter.as_deref().unwrap_or(""));
            if json {
                println!("{}", serde_json::to_string_pretty(&list).map_err(|e| Error::Io(std::io::Error::other(e)))?);
            } else {
                for s in &list {
                    let counts = |c: Option<[usize; 3]>| c.map_or("-".to_string(), |c| format!("{c:?}"));
                    println!(
                        "{:<18} {:<34} f = {:<24} absolute {} relative {}",
                        s.name,
                        s.domain,
                        s.f,
                        counts(s.expected_absolute),
                        counts(s.expected_relative)
                    );
                }
            }
            Ok(0)
        }
        Command::Run(args) => {
            let cfg = args.config()?;
            let report = run(&cfg)?;
            match &cfg.out {
                Some(dir) => {
                    let path = emit(&report, cfg.format, Path::new(dir))?;
                    eprintln!("[wml] wrote {}", path.display());
                }
                None => match cfg.format {
                    OutputFormat::Json => print!("{}", report_json(&report)?),
                    OutputFormat::Csv => print!("{}", gap_csv(&report)?),
                },
            }
            for c in &report.checks {
                eprintln!("[wml] {} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if report.passed { 0 } else { 1 })
        }
    }
}

/// Entry point of the `wml` binary; returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("[wml] error: {e}");
            e.exit_code()
        }
    }
}
