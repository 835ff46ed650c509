use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use polyscatter::farfield::{bounding_radius, ClosedForm, CrossSectionReport, CubeOptions, FarField, GridOptions, SurfaceField};
use polyscatter::geometry::{build_obstacle, Vec3, DEFAULT_NOTCH};
use polyscatter::kirchhoff::KirchhoffField;
use polyscatter::potentials::QuadratureSpec;
use polyscatter::rays::eikonal_total_field;
use polyscatter::sweep::{
    default_eps_schedule, emit_report, fmt_sig, impedance_average_experiment, parse_lambda, read_config,
    resonant_frequencies, run_sweep, write_output, Format, SweepConfig, SURFACE_K_MAX,
};
use polyscatter::{Obstacle, Result, ScatterError};

#[derive(Parser, Debug)]
#[command(name = "polyscatter", version, about = "Scattering by a ray-invisible polyhedron")]
#[command(args_override_self = true)]
struct Cli {
    /// Plain-text key=value file; keys are long flag names, flags on the
    /// command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long, default_value_t = 1.0)]
    width: f64,
    #[arg(long, default_value_t = 1.0)]
    depth: f64,
    #[arg(long, default_value_t = DEFAULT_NOTCH)]
    notch: f64,
    /// Quadrature points per wavelength on the faces.
    #[arg(long, default_value_t = 10.0)]
    ppw: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
}

impl Common {
    fn obstacle(&self) -> Result<Obstacle> {
        build_obstacle(self.width, self.depth, self.notch)
    }

    fn spec(&self) -> Result<QuadratureSpec> {
        let spec = QuadratureSpec { points_per_wavelength: self.ppw, ..QuadratureSpec::default() };
        spec.validate()?;
        Ok(spec)
    }

    fn write(&self, text: &str) -> Result<()> {
        write_output(text, self.out.as_deref())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Eikonal,
    Kirchhoff,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Obstacle vertices, faces and derived constants as JSON.
    Geom {
        #[command(flatten)]
        common: Common,
    },
    /// Field samples on a grid in the mid-depth plane, or at given points.
    Nearfield {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "eikonal")]
        mode: Mode,
        #[arg(long, default_value_t = 50.0)]
        k: f64,
        /// RE or RE,IM
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        lambda: String,
        /// File of `x,y,z` lines; overrides the grid.
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long, default_value_t = 41)]
        nx: usize,
        #[arg(long, default_value_t = 41)]
        nz: usize,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        xmin: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        xmax: f64,
        #[arg(long, default_value_t = -0.6, allow_hyphen_values = true)]
        zmin: f64,
        #[arg(long, default_value_t = 1.6, allow_hyphen_values = true)]
        zmax: f64,
    },
    /// Far-field amplitude on quasi-uniform directions, or a cross-section
    /// report.
    Farfield {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50.0)]
        k: f64,
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        lambda: String,
        #[arg(long, default_value_t = 200)]
        directions: usize,
        /// Emit a CrossSectionReport JSON object instead.
        #[arg(long)]
        report: bool,
    },
    /// Cross sections over a range of wavenumbers.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 14.0)]
        kmin: f64,
        #[arg(long, default_value_t = 90.0)]
        kmax: f64,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        lambda: String,
    },
    /// Resonant wavenumbers for a real impedance.
    Resonances {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        lambda0: f64,
        #[arg(long, default_value_t = 1)]
        nmin: i64,
        #[arg(long, default_value_t = 20)]
        nmax: i64,
    },
    /// Cross section at resonances averaged over nearby real impedances.
    Average {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        lambda0: f64,
        #[arg(long, default_value_t = 17)]
        nmin: i64,
        #[arg(long, default_value_t = 5)]
        count: usize,
        /// Fixed half-width; the default shrinks like k_n^{-1/4}.
        #[arg(long)]
        eps: Option<f64>,
    },
}

/// Splices `--key=value` pairs from the config file in right after the
/// subcommand name, so that later command-line flags override them.
fn with_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut config = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut iter = args.into_iter();
    while let Some(a) = iter.next() {
        match a.to_str() {
            Some("--config") => config = iter.next().map(PathBuf::from),
            Some(s) if s.starts_with("--config=") => config = Some(PathBuf::from(&s["--config=".len()..])),
            _ => rest.push(a),
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let map = read_config(&path)?;
    let cmd = Cli::command();
    let Some(pos) = rest.iter().position(|a| cmd.find_subcommand(a.to_str().unwrap_or("")).is_some()) else {
        return Ok(rest);
    };
    let sub = cmd.find_subcommand(rest[pos].to_str().unwrap_or("")).expect("found above");
    let known: Vec<&str> = sub.get_arguments().filter_map(|a| a.get_long()).collect();
    let mut injected = Vec::new();
    for (key, value) in &map {
        if !known.contains(&key.as_str()) {
            return Err(ScatterError::Config(format!(
                "{}: '{key}' is not a flag of '{}'",
                path.display(),
                sub.get_name()
            )));
        }
        injected.push(OsString::from(if value.is_empty() { format!("--{key}") } else { format!("--{key}={value}") }));
    }
    rest.splice(pos + 1..pos + 1, injected);
    Ok(rest)
}

fn grid_points(obstacle: &Obstacle, nx: usize, nz: usize, x: (f64, f64), z: (f64, f64)) -> Result<Vec<Vec3>> {
    if nx < 1 || nz < 1 {
        return Err(ScatterError::Config("nx and nz must be positive".into()));
    }
    let lerp = |(a, b): (f64, f64), i: usize, n: usize| if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 };
    let y = obstacle.depth / 2.0;
    Ok((0..nz)
        .flat_map(|j| (0..nx).map(move |i| Vec3::new(lerp(x, i, nx), y, lerp(z, j, nz))))
        .collect())
}

fn read_points(path: &Path) -> Result<Vec<Vec3>> {
    let text = std::fs::read_to_string(path).map_err(|e| ScatterError::Io { path: path.to_path_buf(), source: e })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
            continue;
        }
        let v: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| ScatterError::Config(format!("{}:{}: bad number", path.display(), i + 1)))?;
        if v.len() != 3 {
            return Err(ScatterError::Config(format!("{}:{}: expected x,y,z", path.display(), i + 1)));
        }
        out.push(Vec3::new(v[0], v[1], v[2]));
    }
    Ok(out)
}

/// Quasi-uniform directions on the sphere (golden-angle spiral).
fn fibonacci_directions(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(s * phi.cos(), s * phi.sin(), z)
        })
        .collect()
}

/// Rounds to 12 significant digits for the report output.
fn round12(x: f64) -> f64 {
    fmt_sig(x).parse().unwrap_or(x)
}

fn check_k(k: f64) -> Result<()> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(ScatterError::Config(format!("k must be at least 1, got {k}")));
    }
    Ok(())
}

/// Returns the exit code; only a sweep with failed samples reports a
/// nonzero code without an error.
fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Geom { common } => {
            let json = serde_json::to_string_pretty(&common.obstacle()?.to_json())?;
            common.write(&(json + "\n")).map(|_| 0)
        }
        Command::Nearfield { common, mode, k, lambda, points, nx, nz, xmin, xmax, zmin, zmax } => {
            check_k(k)?;
            let obstacle = common.obstacle()?;
            let lambda = parse_lambda(&lambda)?;
            let all = match points {
                Some(p) => read_points(&p)?,
                None => grid_points(&obstacle, nx, nz, (xmin, xmax), (zmin, zmax))?,
            };
            let (pts, inside): (Vec<Vec3>, Vec<Vec3>) = all.into_iter().partition(|r| !obstacle.contains(r));
            if !inside.is_empty() {
                eprintln!("skipped {} points inside the obstacle", inside.len());
            }
            let mut out = String::new();
            match mode {
                Mode::Eikonal => {
                    out.push_str("x,y,z,Re,Im,branches\n");
                    let rows: Vec<_> =
                        pts.par_iter().map(|r| eikonal_total_field(r, k, lambda, &obstacle)).collect::<Result<_>>()?;
                    for (r, v) in pts.iter().zip(rows) {
                        let cells = [r.x, r.y, r.z, v.value.re, v.value.im].map(fmt_sig).join(",");
                        writeln!(out, "{cells},{}", v.branch_count).unwrap();
                    }
                }
                Mode::Kirchhoff => {
                    out.push_str("x,y,z,Re,Im,gradRe_x,gradRe_y,gradRe_z,gradIm_x,gradIm_y,gradIm_z,zone\n");
                    let field = KirchhoffField::new(&obstacle, k, lambda, &common.spec()?)?;
                    for s in field.sample_many(&pts)? {
                        let g = s.gradient;
                        let cells = [
                            s.position.x, s.position.y, s.position.z, s.value.re, s.value.im, g[0].re, g[1].re, g[2].re,
                            g[0].im, g[1].im, g[2].im,
                        ]
                        .map(fmt_sig)
                        .join(",");
                        writeln!(out, "{cells},{}", format!("{:?}", s.zone).to_lowercase()).unwrap();
                    }
                }
            }
            common.write(&out).map(|_| 0)
        }
        Command::Farfield { common, k, lambda, directions, report } => {
            check_k(k)?;
            let obstacle = common.obstacle()?;
            let lambda = parse_lambda(&lambda)?;
            let spec = common.spec()?;
            if report {
                let mut ff = FarField::closed_form(&obstacle, k, lambda, &spec.cutoff, &GridOptions::default())?;
                if k <= SURFACE_K_MAX {
                    let field = KirchhoffField::new(&obstacle, k, lambda, &spec)?;
                    ff = ff.with_surface(std::sync::Arc::new(SurfaceField::compute(&field, &CubeOptions::default())?));
                }
                let mut r = CrossSectionReport::from_far_field(&ff, &obstacle)?;
                for x in [
                    &mut r.k, &mut r.lambda_re, &mut r.lambda_im, &mut r.sigma_grid, &mut r.sigma_asym,
                    &mut r.sigma_transport, &mut r.forward_re, &mut r.forward_im,
                ] {
                    *x = round12(*x);
                }
                r.sigma_surface = r.sigma_surface.map(round12);
                return common.write(&(serde_json::to_string_pretty(&r)? + "\n")).map(|_| 0);
            }
            // Checks the lobe resolution the same way the report would.
            polyscatter::farfield::SphericalGrid::new(k, bounding_radius(&obstacle), &GridOptions::default())?;
            let form = ClosedForm::new(&obstacle, k, &spec.cutoff)?;
            let dirs = fibonacci_directions(directions.max(1));
            let values: Vec<_> = dirs.par_iter().map(|t| form.amplitude(t, lambda)).collect();
            let mut out = String::from("theta_x,theta_y,theta_z,Re,Im\n");
            for (t, v) in dirs.iter().zip(values) {
                writeln!(out, "{}", [t.x, t.y, t.z, v.re, v.im].map(fmt_sig).join(",")).unwrap();
            }
            common.write(&out).map(|_| 0)
        }
        Command::Sweep { common, kmin, kmax, samples, lambda } => {
            let obstacle = common.obstacle()?;
            let mut config = SweepConfig::new(kmin, kmax, samples, parse_lambda(&lambda)?);
            config.quadrature = common.spec()?;
            // Stream CSV rows straight to the file; JSON is written at the end.
            if common.format == Format::Csv {
                config.output_path = common.out.clone();
            }
            let rows = run_sweep(&obstacle, &config)?;
            let failures: Vec<_> = rows.iter().filter_map(|r| r.outcome.as_ref().err().cloned()).collect();
            let reports: Vec<CrossSectionReport> = rows.into_iter().filter_map(|r| r.outcome.ok()).collect();
            if config.output_path.is_none() {
                if reports.is_empty() {
                    eprintln!("no samples in range");
                } else {
                    emit_report(&reports, common.format, common.out.as_deref())?;
                }
            }
            match failures.iter().map(|f| f.exit_code).max() {
                Some(code) => {
                    eprintln!("error: {} of the samples failed", failures.len());
                    Ok(code as u8)
                }
                None => Ok(0),
            }
        }
        Command::Resonances { common, lambda0, nmin, nmax } => {
            let obstacle = common.obstacle()?;
            let table = resonant_frequencies(lambda0, nmin..=nmax, obstacle.delta)?;
            let text = match common.format {
                Format::Json => serde_json::to_string_pretty(&table)? + "\n",
                Format::Csv => {
                    let mut s = String::from("n,k_n\n");
                    for (n, k) in &table.entries {
                        writeln!(s, "{n},{}", fmt_sig(*k)).unwrap();
                    }
                    s
                }
            };
            common.write(&text).map(|_| 0)
        }
        Command::Average { common, lambda0, nmin, count, eps } => {
            let obstacle = common.obstacle()?;
            let ns: Vec<i64> = (0..count as i64).map(|i| nmin + i).collect();
            let table = resonant_frequencies(lambda0, nmin..=nmin + count as i64 - 1, obstacle.delta)?;
            if table.entries.len() != ns.len() {
                return Err(ScatterError::Config("some requested resonances are not positive".into()));
            }
            let ks: Vec<f64> = table.entries.iter().map(|e| e.1).collect();
            let schedule = match eps {
                Some(e) => vec![e; ks.len()],
                None => default_eps_schedule(&ks),
            };
            let spec = common.spec()?;
            let result = impedance_average_experiment(&obstacle, lambda0, &ns, &schedule, &spec, &GridOptions::default())?;
            let text = match common.format {
                Format::Json => serde_json::to_string_pretty(&result)? + "\n",
                Format::Csv => {
                    let mut s = String::from("n,k,eps,average,sigma_center\n");
                    for r in &result.rows {
                        let cells = [r.k, r.eps, r.average, r.sigma_center].map(fmt_sig).join(",");
                        writeln!(s, "{},{cells}", r.n).unwrap();
                    }
                    s
                }
            };
            common.write(&text).map(|_| 0)
        }
    }
}

fn main() -> ExitCode {
    let args = match with_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
