//! `ftm`: command-line front end for `ftm-core`.
//!
//! Exit codes: 0 success, 2 bad input, 3 numerical failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use ftm_core::central::{all_central_configurations, central_configuration, CcKind};
use ftm_core::flow::manifold::{displaced_state, stable_subspace};
use ftm_core::flow::{
    integrate, BlownUpState, Chart, IntegratorOptions, RestpointState, STATE_DIM,
};
use ftm_core::jm::{action, jm_length, local_minimizer_probe, zero_energy_timing, DiscretePath};
use ftm_core::secondvar::{conjugate_points, indicial, negative_direction, negative_profile_value};
use ftm_core::spectra::{
    checked_restpoint_eigenvalues, classify_nu, nu_parameter, spiraling_region_scan,
    write_mass_map_csv, Sign, DEFAULT_SCAN_MARGIN,
};
use ftm_core::{Error, MassTriple};

#[derive(Parser, Debug)]
#[command(
    name = "ftm",
    version,
    about = "Free-time minimizer toolkit for the planar three-body problem"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Relative integrator tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol_rel: f64,
    /// Absolute integrator tolerance.
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol_abs: f64,
    /// Seed for randomized batteries; recorded in metadata.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// The five central configurations with residuals.
    Cc {
        #[arg(long)]
        masses: String,
    },
    /// Closed-form restpoint exponents with a numeric cross-check.
    Spectra {
        #[arg(long)]
        masses: String,
        /// lagrange+, lagrange-, euler1, euler2 or euler3.
        #[arg(long)]
        cc: String,
        /// Sign of v0: + or -.
        #[arg(long, default_value = "+", allow_hyphen_values = true)]
        sign: String,
        /// Restpoint at infinity instead of at collision.
        #[arg(long)]
        infinity: bool,
    },
    /// Spiraling classification over the mass simplex.
    Massmap {
        /// Lattice points per edge.
        #[arg(long, default_value_t = 101)]
        resolution: usize,
        /// Cells with a barycentric mass below this are skipped.
        #[arg(long, default_value_t = DEFAULT_SCAN_MARGIN)]
        margin: f64,
    },
    /// Integrate the blown-up flow.
    Integrate(IntegrateArgs),
    /// Second-variation certificate along a homothetic Euler orbit.
    Secondvar {
        #[arg(long)]
        masses: String,
        /// Body in the middle of the collinear configuration.
        #[arg(long)]
        middle: usize,
        /// Left end of the variation window.
        #[arg(long, default_value_t = 1.0)]
        start: f64,
        /// Profile intervals (even, at least 64).
        #[arg(long, default_value_t = ftm_core::secondvar::DEFAULT_PROFILE_INTERVALS)]
        intervals: usize,
    },
    /// Local-minimality probe of a discrete path read from JSON.
    Probe {
        /// JSON file `{masses, nodes, times?}`.
        #[arg(long)]
        path: PathBuf,
        /// Sine modes per direction.
        #[arg(long, default_value_t = 4)]
        modes: usize,
        /// Start time used to retime an untimed path at zero energy.
        #[arg(long, default_value_t = 1.0)]
        t_start: f64,
    },
}

#[derive(Args, Debug)]
struct IntegrateArgs {
    #[arg(long)]
    masses: String,
    /// Restpoint `KIND,infinity|collision[,+|-]`.
    #[arg(long, conflicts_with = "state", allow_hyphen_values = true)]
    restpoint: Option<String>,
    /// Explicit state: 13 comma-separated numbers `radial, s (6), z (6)`.
    #[arg(long, allow_hyphen_values = true)]
    state: Option<String>,
    /// Chart of an explicit state: r (collision) or u (infinity).
    #[arg(long, default_value = "r")]
    chart: String,
    /// Scaled energy `h` of an explicit state in the collision chart.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    energy: f64,
    /// Radial coordinate of the homothetic state built on the restpoint.
    #[arg(long, default_value_t = 0.0)]
    radial: f64,
    /// Size of the displacement from the restpoint.
    #[arg(long, requires = "dir")]
    offset: Option<f64>,
    /// Displacement direction `stableK`, the K-th real stable direction.
    #[arg(long, requires = "offset")]
    dir: Option<String>,
    /// End of the span `[0, tau]`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "tau_span")]
    tau: Option<f64>,
    /// Explicit span `start,end`.
    #[arg(long, allow_hyphen_values = true)]
    tau_span: Option<String>,
    #[arg(long, default_value_t = f64::INFINITY)]
    max_step: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_steps: usize,
    #[arg(long, default_value_t = 1e12)]
    radial_max: f64,
    #[arg(long, default_value_t = 1e-4)]
    collision_distance: f64,
}

/// Failure of a subcommand with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_invalid_input() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::input(format!("i/o error: {e}"))
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let c = &cli.common;
    if !(c.tol_rel > 0.0 && c.tol_abs > 0.0) {
        return Err(Failure::input("tolerances must be positive"));
    }
    match &cli.command {
        Command::Cc { masses } => {
            json_only(c, "cc")?;
            let m = parse_masses(masses)?;
            emit_json(c, &all_central_configurations(&m)?)
        }
        Command::Spectra {
            masses,
            cc,
            sign,
            infinity,
        } => {
            json_only(c, "spectra")?;
            let m = parse_masses(masses)?;
            let kind: CcKind = cc.parse()?;
            let sign: Sign = sign.parse()?;
            let conf = central_configuration(&m, kind)?;
            emit_json(c, &checked_restpoint_eigenvalues(&conf, sign, *infinity)?)
        }
        Command::Massmap { resolution, margin } => {
            let cells = spiraling_region_scan(*resolution, *margin)?;
            match c.format.unwrap_or(Format::Csv) {
                Format::Csv => with_output(c, |w| write_mass_map_csv(&cells, w)),
                Format::Json => emit_json(c, &cells),
            }
        }
        Command::Integrate(args) => cmd_integrate(c, args),
        Command::Secondvar {
            masses,
            middle,
            start,
            intervals,
        } => {
            json_only(c, "secondvar")?;
            cmd_secondvar(c, &parse_masses(masses)?, *middle, *start, *intervals)
        }
        Command::Probe {
            path,
            modes,
            t_start,
        } => {
            json_only(c, "probe")?;
            cmd_probe(c, path, *modes, *t_start)
        }
    }
}

fn json_only(c: &Common, name: &str) -> Outcome {
    match c.format {
        Some(Format::Csv) => Err(Failure::input(format!(
            "{name} only supports --format json"
        ))),
        _ => Ok(()),
    }
}

fn parse_numbers(text: &str, what: &str) -> std::result::Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Failure::input(format!("{what}: '{x}' is not a number")))
        })
        .collect()
}

fn parse_masses(text: &str) -> std::result::Result<MassTriple, Failure> {
    let v = parse_numbers(text, "masses")?;
    if v.len() != 3 {
        return Err(Failure::input(format!(
            "masses: expected 3 values, got {}",
            v.len()
        )));
    }
    Ok(MassTriple::new(v[0], v[1], v[2])?)
}

fn with_output(c: &Common, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Outcome {
    match &c.output {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> std::result::Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure {
        code: 3,
        message: format!("serialization: {e}"),
    })
}

fn emit_json<T: Serialize>(c: &Common, value: &T) -> Outcome {
    let text = to_json(value)?;
    with_output(c, |w| writeln!(w, "{text}"))
}

fn cmd_integrate(c: &Common, a: &IntegrateArgs) -> Outcome {
    let m = parse_masses(&a.masses)?;
    let span = match (&a.tau, &a.tau_span) {
        (Some(t), None) => (0.0, *t),
        (None, Some(s)) => {
            let v = parse_numbers(s, "tau-span")?;
            if v.len() != 2 {
                return Err(Failure::input("tau-span: expected start,end"));
            }
            (v[0], v[1])
        }
        _ => return Err(Failure::input("one of --tau or --tau-span is required")),
    };
    let (initial, origin) = match (&a.restpoint, &a.state) {
        (Some(spec), None) => {
            let rp = parse_restpoint(spec, &m)?;
            let origin =
                json!({ "restpoint": spec, "radial": a.radial, "offset": a.offset, "dir": a.dir });
            let state = match (a.offset, &a.dir) {
                (Some(eps), Some(dir)) => {
                    if a.radial != 0.0 {
                        return Err(Failure::input(
                            "--offset displaces the restpoint itself; drop --radial",
                        ));
                    }
                    let k: usize = dir
                        .strip_prefix("stable")
                        .and_then(|k| k.parse().ok())
                        .ok_or_else(|| {
                            Failure::input(format!("dir: expected stableK, got '{dir}'"))
                        })?;
                    let vectors = stable_subspace(&rp)?.real_vectors();
                    let (_, d) = vectors.get(k).ok_or_else(|| {
                        Failure::input(format!("dir: only {} stable directions", vectors.len()))
                    })?;
                    displaced_state(&rp, eps, d)?
                }
                _ => rp.at_radial(a.radial),
            };
            (state, origin)
        }
        (None, Some(text)) => {
            let y = parse_numbers(text, "state")?;
            if y.len() != STATE_DIM {
                return Err(Failure::input(format!(
                    "state: expected {STATE_DIM} values, got {}",
                    y.len()
                )));
            }
            let chart: Chart = a.chart.parse()?;
            let s = std::array::from_fn(|k| y[1 + k]);
            let z = std::array::from_fn(|k| y[7 + k]);
            let state = BlownUpState::new(chart, y[0], s, z, a.energy, m)?;
            (state, json!({ "state": y, "chart": chart, "h": a.energy }))
        }
        _ => return Err(Failure::input("one of --restpoint or --state is required")),
    };
    let opts = IntegratorOptions {
        rtol: c.tol_rel,
        atol: c.tol_abs,
        max_step: a.max_step,
        max_steps: a.max_steps,
        radial_max: a.radial_max,
        collision_distance: a.collision_distance,
        ..IntegratorOptions::default()
    };
    let traj = integrate(&initial, span, &opts)?;
    let summary = traj.summary();
    let metadata = json!({
        "masses": m,
        "initial": origin,
        "tau_span": [span.0, span.1],
        "options": opts,
        "seed": c.seed,
        "termination": traj.termination,
        "accepted_steps": traj.accepted_steps,
        "rejected_steps": traj.rejected_steps,
        "summary": summary,
    });
    eprintln!(
        "samples {}  max energy residual {:e}  v-monotonicity violations {}",
        summary.samples, summary.max_energy_residual, summary.v_monotonicity_violations
    );
    match c.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            with_output(c, |w| traj.write_csv(w))?;
            if let Some(p) = &c.output {
                let text = to_json(&metadata)?;
                std::fs::write(sidecar(p), text + "\n")?;
            }
            Ok(())
        }
        Format::Json => emit_json(c, &json!({ "metadata": metadata, "samples": traj.samples })),
    }
}

/// `<output>.json` next to a CSV output.
fn sidecar(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn parse_restpoint(spec: &str, m: &MassTriple) -> std::result::Result<RestpointState, Failure> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(Failure::input(
            "restpoint: expected KIND,infinity|collision[,+|-]",
        ));
    }
    let kind: CcKind = parts[0].parse()?;
    let at_infinity = match parts[1] {
        "infinity" | "u" => true,
        "collision" | "r" => false,
        other => {
            return Err(Failure::input(format!(
                "restpoint: unknown location '{other}'"
            )))
        }
    };
    let sign = match parts.get(2) {
        Some(s) => s.parse()?,
        None => Sign::Plus,
    };
    Ok(RestpointState::new(
        &central_configuration(m, kind)?,
        sign,
        at_infinity,
    ))
}

fn cmd_secondvar(
    c: &Common,
    m: &MassTriple,
    middle: usize,
    start: f64,
    intervals: usize,
) -> Outcome {
    let kind = CcKind::Euler(middle);
    let cc = central_configuration(m, kind)?;
    let nu = nu_parameter(m, middle)?;
    let data = indicial(nu);
    let spiraling = match classify_nu(nu) {
        Ok(s) => Some(s),
        Err(Error::Boundary { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    if spiraling != Some(true) {
        return emit_json(
            c,
            &json!({
                "masses": m,
                "middle": middle,
                "nu": nu,
                "indicial": data,
                "spiraling": spiraling,
            }),
        );
    }
    let (profile, q) = negative_direction(&cc, start, intervals)?;
    let rate = data
        .oscillation_rate
        .expect("spiraling has an oscillation rate");
    let closed = negative_profile_value(&cc, nu, start)?;
    emit_json(
        c,
        &json!({
            "masses": m,
            "middle": middle,
            "nu": nu,
            "indicial": data,
            "spiraling": true,
            "oscillation_rate": rate,
            "conjugate_ratio": (std::f64::consts::PI / rate).exp(),
            "conjugate_points": conjugate_points(nu, profile.a, profile.b)?,
            "window": [profile.a, profile.b],
            "intervals": profile.n,
            "z_direction": profile.z_direction,
            "Q": q.value,
            "quadrature_error": q.quadrature_error,
            "Q_closed_form": closed,
            "margin": q.value.abs() / q.quadrature_error.max(f64::MIN_POSITIVE),
            "seed": c.seed,
        }),
    )
}

fn cmd_probe(c: &Common, file: &Path, modes: usize, t_start: f64) -> Outcome {
    let text = std::fs::read_to_string(file)?;
    let raw: DiscretePath =
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("path file: {e}")))?;
    let path = DiscretePath::new(raw.masses, raw.nodes, raw.times)?;
    let timed = path.is_timed();
    let path = if timed {
        path
    } else {
        zero_energy_timing(&path, t_start)?
    };
    let probe = local_minimizer_probe(&path, modes)?;
    emit_json(
        c,
        &json!({
            "timed_input": timed,
            "action": action(&path)?,
            "jm_length": jm_length(&path)?,
            "probe": probe,
        }),
    )
}
