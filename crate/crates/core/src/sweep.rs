//! Experiment drivers: frequency sweeps, resonance tables, the impedance
//! averaging experiment, and report output.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};
use crate::farfield::{
    bounding_radius, ClosedForm, CrossSectionReport, CubeOptions, FarField, GridOptions, SphericalGrid, SurfaceField,
};
use crate::geometry::{mirror, Obstacle};
use crate::kirchhoff::KirchhoffField;
use crate::potentials::QuadratureSpec;
use crate::quadrature::gauss_legendre;
use crate::rays::Impedance;

/// The surface route is only run up to this wavenumber.
pub const SURFACE_K_MAX: f64 = 60.0;

/// Gauss nodes in `λ` for the averaging experiment.
pub const AVERAGE_NODES: usize = 21;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub k_min: f64,
    pub k_max: f64,
    pub samples: usize,
    pub lambda: Impedance,
    pub quadrature: QuadratureSpec,
    pub grid: GridOptions,
    pub cube: CubeOptions,
    pub output_path: Option<PathBuf>,
}

impl SweepConfig {
    pub fn new(k_min: f64, k_max: f64, samples: usize, lambda: Impedance) -> SweepConfig {
        SweepConfig {
            k_min,
            k_max,
            samples,
            lambda,
            quadrature: QuadratureSpec::default(),
            grid: GridOptions::default(),
            cube: CubeOptions::default(),
            output_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_min >= 1.0 && self.k_min.is_finite() && self.k_max.is_finite()) {
            return Err(ScatterError::Config(format!("kmin must be at least 1, got {}", self.k_min)));
        }
        if self.samples < 2 {
            return Err(ScatterError::Config(format!("samples must be at least 2, got {}", self.samples)));
        }
        self.quadrature.validate()
    }

    /// Equispaced wavenumbers; empty when `k_max < k_min`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        if self.k_max < self.k_min {
            return Vec::new();
        }
        let n = self.samples;
        (0..n).map(|i| self.k_min + (self.k_max - self.k_min) * i as f64 / (n - 1) as f64).collect()
    }
}

/// One row of a sweep: a report, or the error that replaced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub k: f64,
    pub outcome: std::result::Result<CrossSectionReport, SampleFailure>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleFailure {
    pub message: String,
    /// What the command-line front end would exit with.
    pub exit_code: i32,
}

/// Cross sections at one wavenumber; the surface route is added for
/// `k ≤ SURFACE_K_MAX`.
pub fn cross_section_report(obstacle: &Obstacle, k: f64, lambda: Impedance, config: &SweepConfig) -> Result<CrossSectionReport> {
    let mut ff = FarField::closed_form(obstacle, k, lambda, &config.quadrature.cutoff, &config.grid)?;
    if k <= SURFACE_K_MAX {
        let field = KirchhoffField::new(obstacle, k, lambda, &config.quadrature)?;
        ff = ff.with_surface(Arc::new(SurfaceField::compute(&field, &config.cube)?));
    }
    CrossSectionReport::from_far_field(&ff, obstacle)
}

/// Runs the sweep in index order. With an output path, each CSV row is
/// written and flushed as soon as it is known, so a failure part-way keeps
/// the finished rows.
pub fn run_sweep(obstacle: &Obstacle, config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let mut sink = match &config.output_path {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).map_err(|e| io_error(path, e))?);
            writeln!(w, "{}", CSV_HEADER).map_err(|e| io_error(path, e))?;
            Some((path.clone(), w))
        }
        None => None,
    };
    let mut rows = Vec::new();
    for k in config.wavenumbers() {
        let outcome = cross_section_report(obstacle, k, config.lambda, config)
            .map_err(|e| SampleFailure { message: e.to_string(), exit_code: e.exit_code() });
        if let Err(f) = &outcome {
            eprintln!("k = {k}: {}", f.message);
        }
        let row = SweepRow { k, outcome };
        if let Some((path, w)) = sink.as_mut() {
            writeln!(w, "{}", csv_row(&row, config.lambda)).map_err(|e| io_error(path, e))?;
            w.flush().map_err(|e| io_error(path, e))?;
        }
        rows.push(row);
    }
    Ok(rows)
}

fn io_error(path: &Path, source: std::io::Error) -> ScatterError {
    ScatterError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceTable {
    pub lambda0: f64,
    pub delta: f64,
    pub entries: Vec<(i64, f64)>,
}

/// `k_n = (−2 arg A(λ₀) + 2πn)/Δ`, keeping the positive ones.
pub fn resonant_frequencies(lambda0: f64, n_range: std::ops::RangeInclusive<i64>, delta: f64) -> Result<ResonanceTable> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(ScatterError::Config(format!("phase shift must be positive, got {delta}")));
    }
    if !lambda0.is_finite() {
        return Err(ScatterError::Config("lambda0 must be finite".into()));
    }
    let arg = Impedance::real(lambda0).reflection().arg();
    let entries = n_range
        .map(|n| (n, (-2.0 * arg + TAU * n as f64) / delta))
        .filter(|&(_, k)| k > 0.0)
        .collect();
    Ok(ResonanceTable { lambda0, delta, entries })
}

/// `ε_n = k_n^{-1/4}`.
pub fn default_eps_schedule(ks: &[f64]) -> Vec<f64> {
    ks.iter().map(|k| k.powf(-0.25)).collect()
}

/// Per-`k` data for evaluating `σ_λ` at many real `λ`: the polygon
/// integrals do not depend on `λ`, only `Ψ` does.
struct ImpedanceScan {
    form: ClosedForm,
    grid: SphericalGrid,
    direct: Vec<Complex64>,
    mirrored: Vec<Complex64>,
}

impl ImpedanceScan {
    fn new(obstacle: &Obstacle, k: f64, spec: &QuadratureSpec, opts: &GridOptions) -> Result<ImpedanceScan> {
        let form = ClosedForm::new(obstacle, k, &spec.cutoff)?;
        let grid = SphericalGrid::new(k, bounding_radius(obstacle), opts)?;
        let direct = grid.nodes.par_iter().map(|t| form.polygon_integral(t)).collect();
        let mirrored = grid.nodes.par_iter().map(|t| form.polygon_integral(&mirror(t))).collect();
        Ok(ImpedanceScan { form, grid, direct, mirrored })
    }

    fn sigma(&self, lambda: Impedance) -> f64 {
        let a = lambda.reflection();
        let scale = self.form.k / (4.0 * PI);
        self.grid.integrate(|i, t| {
            let v = self.form.psi(t, a) * self.direct[i] + self.form.psi(&mirror(t), a) * self.mirrored[i];
            scale * scale * v.norm_sqr()
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub n: i64,
    pub k: f64,
    pub eps: f64,
    /// `(1/2ε)∫_{λ₀−ε}^{λ₀+ε} σ_λ(k_n) dλ`
    pub average: f64,
    /// `σ_{λ₀}(k_n)`
    pub sigma_center: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageTable {
    pub lambda0: f64,
    pub rows: Vec<AverageRow>,
}

/// Interval averages of `σ_λ(k_n)` over real `λ` near `λ₀`.
pub fn impedance_average_experiment(
    obstacle: &Obstacle,
    lambda0: f64,
    n_list: &[i64],
    eps_schedule: &[f64],
    spec: &QuadratureSpec,
    grid: &GridOptions,
) -> Result<AverageTable> {
    if n_list.len() != eps_schedule.len() {
        return Err(ScatterError::Config("n list and eps schedule differ in length".into()));
    }
    if eps_schedule.iter().any(|&e| !(e > 0.0)) {
        return Err(ScatterError::Config("eps schedule must be positive".into()));
    }
    let rule = gauss_legendre(AVERAGE_NODES);
    let mut rows = Vec::with_capacity(n_list.len());
    for (&n, &eps) in n_list.iter().zip(eps_schedule) {
        let table = resonant_frequencies(lambda0, n..=n, obstacle.delta)?;
        let &(_, k) = table
            .entries
            .first()
            .ok_or_else(|| ScatterError::Config(format!("k_{n} is not positive for lambda0 = {lambda0}")))?;
        let scan = ImpedanceScan::new(obstacle, k, spec, grid)?;
        let average = 0.5 * rule.iter().map(|&(x, w)| w * scan.sigma(Impedance::real(lambda0 + eps * x))).sum::<f64>();
        rows.push(AverageRow { n, k, eps, average, sigma_center: scan.sigma(Impedance::real(lambda0)) });
    }
    Ok(AverageTable { lambda0, rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = ScatterError;

    fn from_str(s: &str) -> Result<Format> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(ScatterError::Config(format!("unknown format '{other}' (expected csv or json)"))),
        }
    }
}

pub const CSV_HEADER: &str = "k,lambda_re,lambda_im,sigma_grid,sigma_surface,sigma_asym,sigma_transport,forward_re,forward_im";

/// `x` with 12 significant digits, without trailing zeros.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, exp) = s.split_once('e').unwrap_or((&s, "0"));
        let mantissa = if mantissa.contains('.') { mantissa.trim_end_matches('0').trim_end_matches('.') } else { mantissa };
        format!("{mantissa}e{exp}")
    }
}

fn report_cells(r: &CrossSectionReport) -> String {
    let surface = r.sigma_surface.map(fmt_sig).unwrap_or_default();
    [
        fmt_sig(r.k),
        fmt_sig(r.lambda_re),
        fmt_sig(r.lambda_im),
        fmt_sig(r.sigma_grid),
        surface,
        fmt_sig(r.sigma_asym),
        fmt_sig(r.sigma_transport),
        fmt_sig(r.forward_re),
        fmt_sig(r.forward_im),
    ]
    .join(",")
}

/// A failed sample keeps `k` and `λ`; the other cells stay empty.
fn csv_row(row: &SweepRow, lambda: Impedance) -> String {
    match &row.outcome {
        Ok(r) => report_cells(r),
        Err(_) => format!("{},{},{},,,,,,", fmt_sig(row.k), fmt_sig(lambda.value().re), fmt_sig(lambda.value().im)),
    }
}

pub fn reports_to_csv(reports: &[CrossSectionReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&report_cells(r));
        out.push('\n');
    }
    out
}

pub fn reports_to_json(reports: &[CrossSectionReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

/// Writes `reports` to `path`, or to standard output when `path` is `None`.
pub fn emit_report(reports: &[CrossSectionReport], format: Format, path: Option<&Path>) -> Result<()> {
    if reports.is_empty() {
        return Err(ScatterError::Config("nothing to report".into()));
    }
    let text = match format {
        Format::Csv => reports_to_csv(reports),
        Format::Json => reports_to_json(reports)? + "\n",
    };
    write_output(&text, path)
}

pub fn write_output(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_error(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| io_error(Path::new("<stdout>"), e))
        }
    }
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ScatterError::Config(format!("line {}: expected key=value, got '{line}'", i + 1)))?;
        let key = key.trim().trim_start_matches("--").to_string();
        if key.is_empty() {
            return Err(ScatterError::Config(format!("line {}: empty key", i + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_config(&text)
}

/// Parses `RE` or `RE,IM` into an impedance.
pub fn parse_lambda(s: &str) -> Result<Impedance> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|_| ScatterError::Config(format!("bad impedance component '{p}'")));
    let value = match parts.as_slice() {
        [re] => Complex64::new(num(re)?, 0.0),
        [re, im] => Complex64::new(num(re)?, num(im)?),
        _ => return Err(ScatterError::Config(format!("impedance must be RE or RE,IM, got '{s}'"))),
    };
    Impedance::new(value)
}
