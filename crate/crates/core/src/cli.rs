//! Command-line front end.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a
//! computation errors, 2 on usage or configuration errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::dyadic::DyadicLadder;
use crate::elliptic::{solve_pressure_with, SolveOptions, SolverMethod};
use crate::error::{Error, Result};
use crate::evolution::{ns_integrate, StateSnapshot, TransportScheme};
use crate::io::{evaluate, load_snapshot, save_snapshot, ExperimentConfig, OutputDir};
use crate::lab::{
    check_bernstein, check_commutator, check_elliptic_estimate, check_elliptic_sweep,
    check_heat_decay, check_ij_sweep, check_product_law, check_transport_estimate,
    default_heat_times, fit_growth_envelope, gaussian_field, gaussian_vector, random_coefficient,
    refinement_drift, shear_benchmark, trial_seed, GaussianEnsemble, LabSetup, RatioReport,
};
use crate::lagrangian::{
    benchmark_snapshots, check_div_identity, delta_estimates, integrate_flow, jacobian_series,
    to_lagrangian, BenchmarkFlow,
};
use crate::norms::{
    besov_norm, besov_norm_vector, chemin_lerner, lebesgue_besov, BesovSpec, TimeNormSpec,
};
use crate::spectral::{Grid, SpectralField, VectorField};

/// Largest accepted Neumann-series mismatch against direct inversion.
pub const SERIES_AGREEMENT: f64 = 1e-8;
/// Largest accepted `L^inf` range excess per unit time for the spectral scheme.
pub const TRANSPORT_DRIFT: f64 = 1e-3;
/// Largest accepted gap between the two `I_j` quadratures at `p = 2`.
pub const IJ_ROUTE_GAP: f64 = 1e-8;
const RECONSTRUCTION: f64 = 1e-12;

#[derive(Parser, Debug)]
#[command(name = "besovlab", version, about = "Besov-space toolkit and inhomogeneous Navier-Stokes lab")]
struct Cli {
    /// TOML experiment file; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV, JSON and snapshot outputs.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid size.
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    q: Option<f64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Littlewood-Paley block profile of a field.
    Decompose(DecomposeArgs),
    /// Besov or Chemin-Lerner norm.
    Norm(NormArgs),
    /// Run one experiment of the inequality lab.
    Verify(VerifyArgs),
    /// Solve one variable-coefficient pressure problem.
    Elliptic(EllipticArgs),
    /// Integrate the configured initial data.
    Simulate,
    /// Flow map and Lagrangian identity checks.
    Lagrangian(LagrangianArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FieldName {
    A,
    U,
    Ux,
    Uy,
    Pi,
}

#[derive(Args, Debug)]
struct FieldSource {
    /// BSNS snapshot(s); without one a seeded random field is used.
    #[arg(long, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "a")]
    field: FieldName,
    /// Use the constant field with this value.
    #[arg(long, conflicts_with = "input")]
    constant: Option<f64>,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[command(flatten)]
    source: FieldSource,
    /// Regularity weight `2^{js}`, possibly in terms of `p` and `q`.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    s: String,
    #[arg(long)]
    inhomogeneous: bool,
}

#[derive(Args, Debug)]
struct NormArgs {
    #[command(flatten)]
    source: FieldSource,
    /// Comma-separated `s[,p=..][,r=..][,homog|inhom]`.
    #[arg(long, allow_hyphen_values = true)]
    spec: String,
    /// Time exponent; selects the Chemin-Lerner and Lebesgue-Besov norms over the inputs.
    #[arg(long)]
    sigma: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Check {
    Bernstein,
    Heat,
    Product,
    Commutator,
    Ij,
    Transport,
    Elliptic,
    Envelope,
    Deltas,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(value_enum)]
    check: Check,
    /// Block index or scale exponent.
    #[arg(long, allow_hyphen_values = true)]
    j: Option<i32>,
    /// Derivative order.
    #[arg(long, default_value_t = 1)]
    k: u32,
    #[arg(long, allow_hyphen_values = true)]
    s: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    s1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    s2: Option<String>,
    /// Repeat at twice the resolution and require a stable ratio.
    #[arg(long)]
    refine: bool,
    /// Largest `|a|` of random coefficients.
    #[arg(long, default_value_t = 0.7)]
    amplitude: f64,
    /// Diagnostics CSV for `envelope`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Column of the diagnostics CSV to fit.
    #[arg(long, default_value = "global_norm")]
    column: String,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, value_parser = parse_scheme, default_value = "spectral-rk3")]
    scheme: TransportScheme,
}

#[derive(Args, Debug)]
struct EllipticArgs {
    #[arg(long, default_value_t = 0.7)]
    amplitude: f64,
    /// `pcg`, `richardson` or `split:M`.
    #[arg(long, value_parser = parse_method, default_value = "pcg")]
    method: SolverMethod,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 4000)]
    max_iter: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FlowChoice {
    Shear,
    TaylorGreen,
    /// Velocity from integrating the configured initial data.
    Simulate,
}

#[derive(Args, Debug)]
struct LagrangianArgs {
    #[arg(long, value_enum, default_value = "shear")]
    flow: FlowChoice,
    #[arg(long, default_value_t = 0.5)]
    t_end: f64,
    /// Time between stored velocity snapshots.
    #[arg(long, default_value_t = 0.05)]
    spacing: f64,
    /// Characteristic step.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 200)]
    k_max: usize,
}

fn parse_scheme(s: &str) -> std::result::Result<TransportScheme, String> {
    match s {
        "spectral-rk3" => Ok(TransportScheme::SpectralRk3),
        "semi-lagrangian" => Ok(TransportScheme::SemiLagrangian),
        "semi-lagrangian-monotone" => Ok(TransportScheme::SemiLagrangianMonotone),
        _ => Err(format!(
            "unknown scheme `{s}` (spectral-rk3, semi-lagrangian, semi-lagrangian-monotone)"
        )),
    }
}

fn parse_method(s: &str) -> std::result::Result<SolverMethod, String> {
    match s {
        "pcg" => Ok(SolverMethod::Pcg),
        "richardson" => Ok(SolverMethod::Richardson),
        _ => s
            .strip_prefix("split:")
            .and_then(|m| m.parse().ok())
            .map(SolverMethod::Split)
            .ok_or_else(|| format!("unknown method `{s}` (pcg, richardson, split:M)")),
    }
}

/// Parsed `--spec` of the `norm` command.
#[derive(Clone, Debug, PartialEq)]
struct NormSpec {
    s: String,
    p: Option<f64>,
    r: f64,
    homogeneous: bool,
}

fn parse_norm_spec(text: &str) -> Result<NormSpec> {
    let bad = |msg: String| Error::Config(format!("--spec `{text}`: {msg}"));
    let mut spec = NormSpec {
        s: String::new(),
        p: None,
        r: 1.0,
        homogeneous: true,
    };
    for (i, item) in text.split(',').map(str::trim).enumerate() {
        let number = |v: &str| -> Result<f64> {
            evaluate(v, f64::NAN, f64::NAN).map_err(|e| bad(e.to_string()))
        };
        match item.split_once('=') {
            Some(("p", v)) => spec.p = Some(number(v)?),
            Some(("r", v)) => spec.r = number(v)?,
            Some((k, _)) => return Err(bad(format!("unknown key `{k}`"))),
            None if item == "homog" => spec.homogeneous = true,
            None if item == "inhom" => spec.homogeneous = false,
            None if i == 0 && !item.is_empty() => spec.s = item.to_string(),
            None => return Err(bad(format!("unexpected item `{item}`"))),
        }
    }
    if spec.s.is_empty() {
        return Err(bad("missing regularity index".into()));
    }
    Ok(spec)
}

struct Context {
    cfg: ExperimentConfig,
    config_text: String,
    out: PathBuf,
}

impl Context {
    fn setup(&self) -> Result<LabSetup> {
        LabSetup::new(self.cfg.grid.n, self.cfg.grid.length, self.cfg.seed)
    }

    fn p(&self) -> f64 {
        self.cfg.exponents.p
    }

    fn q(&self) -> f64 {
        self.cfg.exponents.q
    }

    fn exponent(&self, src: &str) -> Result<f64> {
        evaluate(src, self.p(), self.q()).map_err(|e| Error::Config(e.to_string()))
    }

    fn output(&self) -> Result<OutputDir> {
        OutputDir::create(&self.out)
    }

    fn finish(&self, out: OutputDir, command: &str) -> Result<()> {
        out.finish(command, &self.config_text, self.cfg.seed)?;
        Ok(())
    }
}

fn build_context(cli: &Cli) -> Result<Context> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.n {
        cfg.grid.n = n;
    }
    if let Some(p) = cli.p {
        cfg.exponents.p = p;
    }
    if let Some(q) = cli.q {
        cfg.exponents.q = q;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    cfg.validate().map_err(|e| match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    })?;
    let config_text = cfg.to_toml()?;
    Ok(Context {
        cfg,
        config_text,
        out: cli.out.clone(),
    })
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    let result = pool.install(|| build_context(&cli).and_then(|ctx| dispatch(&cli.command, &ctx)));
    match result {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("check failed; see {}", cli.out.display());
            1
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn thread_pool() -> std::result::Result<rayon::ThreadPool, String> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("BESOVLAB_THREADS") {
        let k: usize = v
            .parse()
            .ok()
            .filter(|k| *k > 0)
            .ok_or_else(|| format!("BESOVLAB_THREADS = `{v}` is not a positive integer"))?;
        builder = builder.num_threads(k);
    }
    builder.build().map_err(|e| e.to_string())
}

fn dispatch(command: &Command, ctx: &Context) -> Result<bool> {
    log::info!("seed {} on n = {}", ctx.cfg.seed, ctx.cfg.grid.n);
    match command {
        Command::Decompose(a) => decompose(a, ctx),
        Command::Norm(a) => norm(a, ctx),
        Command::Verify(a) => verify(a, ctx),
        Command::Elliptic(a) => elliptic(a, ctx),
        Command::Simulate => simulate(ctx),
        Command::Lagrangian(a) => lagrangian(a, ctx),
    }
}

enum Loaded {
    Scalar(SpectralField),
    Vector(VectorField),
}

fn pick(state: &StateSnapshot, field: FieldName) -> Result<Loaded> {
    Ok(match field {
        FieldName::A => Loaded::Scalar(state.a.clone()),
        FieldName::U => Loaded::Vector(state.u.clone()),
        FieldName::Ux => Loaded::Scalar(state.u.x.clone()),
        FieldName::Uy => Loaded::Scalar(state.u.y.clone()),
        FieldName::Pi => Loaded::Scalar(crate::elliptic::potential(&state.grad_pi)?),
    })
}

fn random_state(ctx: &Context) -> Result<StateSnapshot> {
    let g = ctx.cfg.make_grid()?;
    let ens = GaussianEnsemble::broadband(&g, ctx.cfg.initial.slope);
    let f = gaussian_field(&g, &ens, ctx.cfg.seed);
    let u = gaussian_vector(&g, &ens, ctx.cfg.seed ^ 0x5eed);
    let mut state = StateSnapshot::new(0.0, f.clone(), u)?;
    state.grad_pi = crate::spectral::gradient(&f);
    Ok(state)
}

/// States named by `source`, in input order.
fn load_states(source: &FieldSource, ctx: &Context) -> Result<Vec<(f64, Loaded)>> {
    if let Some(c) = source.constant {
        let g = ctx.cfg.make_grid()?;
        let f = SpectralField::constant(&g, c);
        let loaded = match source.field {
            FieldName::U => Loaded::Vector(VectorField::new(f.clone(), f)?),
            _ => Loaded::Scalar(f),
        };
        return Ok(vec![(0.0, loaded)]);
    }
    if source.input.is_empty() {
        let s = random_state(ctx)?;
        return Ok(vec![(s.t, pick(&s, source.field)?)]);
    }
    source
        .input
        .iter()
        .map(|path| {
            let s = load_snapshot(path)?;
            Ok((s.t, pick(&s, source.field)?))
        })
        .collect()
}

fn decompose(args: &DecomposeArgs, ctx: &Context) -> Result<bool> {
    let states = load_states(&args.source, ctx)?;
    let (t, field) = states.into_iter().next().expect("at least one state");
    let u = match field {
        Loaded::Scalar(u) => u,
        Loaded::Vector(_) => {
            return Err(Error::Config("decompose takes a scalar field (a, ux, uy, pi)".into()))
        }
    };
    let s = ctx.exponent(&args.s)?;
    let ladder = DyadicLadder::new(u.grid())?;
    let mean = u.mean().re;
    let spec = BesovSpec::new(s, ctx.p(), 1.0, !args.inhomogeneous)?;
    let target = if args.inhomogeneous { u.clone() } else { u.without_mean() };
    let (norm, profile) = besov_norm(&target, &spec, &ladder)?;

    let mut sum = ladder.low_block(&u)?;
    for (_, b) in ladder.blocks(&u)? {
        sum.axpy(1.0, &b);
    }
    let defect = (&sum - &u).max_coefficient() / u.max_coefficient().max(f64::MIN_POSITIVE);
    let passed = defect <= RECONSTRUCTION;

    let mut out = ctx.output()?;
    out.write_text("blocks.csv", &profile.to_csv())?;
    out.write_json(
        "decompose.json",
        &json!({
            "t": t,
            "s": s,
            "p": ctx.p(),
            "homogeneous": !args.inhomogeneous,
            "mean": mean,
            "norm_r1": norm,
            "reconstruction_defect": defect,
            "passed": passed,
        }),
    )?;
    ctx.finish(out, "decompose")?;
    Ok(passed)
}

fn norm(args: &NormArgs, ctx: &Context) -> Result<bool> {
    let spec = parse_norm_spec(&args.spec)?;
    let p = spec.p.unwrap_or(ctx.p());
    let s = evaluate(&spec.s, p, ctx.q()).map_err(|e| Error::Config(e.to_string()))?;
    let besov = BesovSpec::new(s, p, spec.r, spec.homogeneous)?;
    let states = load_states(&args.source, ctx)?;
    let grid: Grid = match &states[0].1 {
        Loaded::Scalar(f) => f.grid().clone(),
        Loaded::Vector(v) => v.grid().clone(),
    };
    let ladder = DyadicLadder::new(&grid)?;
    let mut out = ctx.output()?;
    let mut summary = json!({
        "spec": args.spec, "s": s, "p": p, "r": spec.r, "homogeneous": spec.homogeneous,
    });
    if let Some(sigma_src) = &args.sigma {
        let sigma = ctx.exponent(sigma_src)?;
        let snapshots = states
            .into_iter()
            .map(|(t, f)| match f {
                Loaded::Scalar(f) => Ok((t, f)),
                Loaded::Vector(_) => {
                    Err(Error::Config("time norms take scalar fields (a, ux, uy, pi)".into()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let horizon = snapshots.last().map(|s| s.0).unwrap_or(0.0);
        let tspec = TimeNormSpec::new(besov, sigma, horizon)?;
        summary["sigma"] = json!(sigma);
        summary["chemin_lerner"] = json!(chemin_lerner(&snapshots, &tspec, &ladder)?);
        summary["lebesgue_besov"] = json!(lebesgue_besov(&snapshots, &tspec, &ladder)?);
    } else {
        let mut csv = String::from("t,j,value\n");
        let mut norms = Vec::new();
        for (t, f) in &states {
            let (v, profile) = match f {
                Loaded::Scalar(f) => besov_norm(f, &besov, &ladder)?,
                Loaded::Vector(u) => besov_norm_vector(u, &besov, &ladder)?,
            };
            for (j, b) in profile.entries() {
                csv.push_str(&format!("{t:.17e},{j},{b:.17e}\n"));
            }
            norms.push(json!({ "t": t, "norm": v }));
        }
        out.write_text("profile.csv", &csv)?;
        summary["norms"] = json!(norms);
    }
    out.write_json("norm.json", &summary)?;
    ctx.finish(out, "norm")?;
    Ok(true)
}

#[derive(Serialize)]
struct Verdict<T: Serialize> {
    check: &'static str,
    passed: bool,
    refinement_drift: Option<f64>,
    details: T,
}

fn check_name(c: Check) -> &'static str {
    match c {
        Check::Bernstein => "bernstein",
        Check::Heat => "heat",
        Check::Product => "product",
        Check::Commutator => "commutator",
        Check::Ij => "ij",
        Check::Transport => "transport",
        Check::Elliptic => "elliptic",
        Check::Envelope => "envelope",
        Check::Deltas => "deltas",
    }
}

/// Runs `measure` at the configured resolution and, with `refine`, at twice it.
fn with_refinement<T>(
    refine: bool,
    setup: &LabSetup,
    measure: impl Fn(&LabSetup) -> Result<(RatioReport, T)>,
) -> Result<(RatioReport, T, Option<RatioReport>)> {
    let (mut report, extra) = measure(setup)?;
    let fine = if refine {
        let (fine, _) = measure(&setup.refined()?)?;
        report.compare_refined(&fine);
        Some(fine)
    } else {
        None
    };
    Ok((report, extra, fine))
}

fn write_reports(out: &mut OutputDir, name: &str, report: &RatioReport, fine: Option<&RatioReport>) -> Result<()> {
    let mut csv = report.to_csv(true);
    if let Some(f) = fine {
        csv.push_str(&f.to_csv(false));
    }
    out.write_text(&format!("{name}.csv"), &csv)?;
    Ok(())
}

fn verify(args: &VerifyArgs, ctx: &Context) -> Result<bool> {
    let name = check_name(args.check);
    let setup = ctx.setup()?;
    let (p, q, trials) = (ctx.p(), ctx.q(), ctx.cfg.trials);
    let tol = ctx.cfg.tolerances.refinement;
    let mut out = ctx.output()?;
    let stable = |r: &RatioReport| r.refinement_drift.is_none_or(|d| d <= tol);
    let (passed, drift, details) = match args.check {
        Check::Bernstein => {
            let top = setup.ladder.j_max() - 1;
            let scales = match args.j {
                Some(j) => j..=j,
                None => 2.min(top)..=top,
            };
            let r = check_bernstein(&setup, args.k, p, q, trials, scales)?;
            let mut csv = r.direct.to_csv(true);
            csv.push_str(&r.reverse.to_csv(false));
            out.write_text("bernstein.csv", &csv)?;
            let passed = r.direct.is_valid()
                && r.reverse.is_valid()
                && (p != q || r.scale_drift <= tol);
            (passed, None, json!({ "k": args.k, "scale_drift": r.scale_drift,
                "direct_max": r.direct.max(), "reverse_max": r.reverse.max() }))
        }
        Check::Heat => {
            let j = args.j.unwrap_or(3);
            let times = default_heat_times(j);
            let r = check_heat_decay(&setup, j, &times, p, trials)?;
            out.write_text("heat.csv", &r.report.to_csv(true))?;
            let mut fits = String::from("trial,seed,j,c,C,slope\n");
            for (i, f) in r.fits.iter().enumerate() {
                fits.push_str(&format!(
                    "{i},{},{j},{:.17e},{:.17e},{:.17e}\n",
                    trial_seed(setup.seed, i),
                    f.c,
                    f.big_c,
                    f.slope
                ));
            }
            out.write_text("heat_fit.csv", &fits)?;
            let passed = r.all_in_window() && r.report.is_valid();
            (passed, None, json!({ "j": j, "fits": r.fits }))
        }
        Check::Product => {
            let s1 = ctx.exponent(args.s1.as_deref().unwrap_or("2/q"))?;
            let s2 = ctx.exponent(args.s2.as_deref().unwrap_or("2/p-1"))?;
            let (r, _, fine) = with_refinement(args.refine, &setup, |s| {
                Ok((check_product_law(s, p, q, s1, s2, trials)?, ()))
            })?;
            write_reports(&mut out, name, &r, fine.as_ref())?;
            (r.is_valid() && stable(&r), r.refinement_drift,
                json!({ "s1": s1, "s2": s2, "max": r.max(), "median": r.median() }))
        }
        Check::Commutator => {
            let s = ctx.exponent(args.s.as_deref().unwrap_or("2/p-1"))?;
            let (r, _, fine) = with_refinement(args.refine, &setup, |st| {
                Ok((check_commutator(st, p, q, s, trials)?, ()))
            })?;
            write_reports(&mut out, name, &r, fine.as_ref())?;
            (r.is_valid() && stable(&r), r.refinement_drift,
                json!({ "s": s, "max": r.max(), "median": r.median() }))
        }
        Check::Ij => {
            let (r, gap, fine) =
                with_refinement(args.refine, &setup, |s| check_ij_sweep(s, p, q, trials))?;
            write_reports(&mut out, name, &r, fine.as_ref())?;
            let passed = r.is_valid() && stable(&r) && (p != 2.0 || gap <= IJ_ROUTE_GAP);
            (passed, r.refinement_drift, json!({ "route_gap": gap, "max": r.max() }))
        }
        Check::Transport => {
            let ms = [0, 1, 2, 3];
            let run = |n: usize| -> Result<_> {
                let every = ((args.t_end / args.dt) / 20.0).round().max(1.0) as usize;
                let (snaps, nodal) = shear_benchmark(n, args.dt, args.t_end, args.scheme, every)?;
                let est = check_transport_estimate(&snaps, p, q, &ms)?;
                Ok((est, nodal))
            };
            let (est, nodal) = run(setup.grid.n())?;
            let drift = if args.refine {
                let (fine, _) = run(2 * setup.grid.n())?;
                Some(refinement_drift(est.c, fine.c))
            } else {
                None
            };
            let mut csv = est.report.to_csv(true);
            csv.push_str(&est.high_frequency.to_csv(false));
            out.write_text("transport.csv", &csv)?;
            let range_ok = match args.scheme {
                TransportScheme::SpectralRk3 => nodal <= TRANSPORT_DRIFT,
                TransportScheme::SemiLagrangianMonotone => nodal == 0.0,
                TransportScheme::SemiLagrangian => true,
            };
            let passed = range_ok
                && est.c.is_finite()
                && est.report.is_valid()
                && drift.is_none_or(|d| d <= tol);
            (passed, drift, json!({ "c": est.c, "linf_drift_per_time": nodal,
                "scheme": args.scheme, "high_frequency_max": est.high_frequency.max() }))
        }
        Check::Elliptic => {
            let (r, estimates, fine) = with_refinement(args.refine, &setup, |s| {
                check_elliptic_sweep(s, p, trials, args.amplitude)
            })?;
            write_reports(&mut out, name, &r, fine.as_ref())?;
            let l2 = estimates.iter().all(|e| e.l2_holds());
            (r.is_valid() && stable(&r) && l2, r.refinement_drift,
                json!({ "amplitude": args.amplitude, "l2_holds": l2, "estimates": estimates }))
        }
        Check::Envelope => {
            let path = args
                .input
                .as_ref()
                .ok_or_else(|| Error::Config("verify envelope needs --input diagnostics.csv".into()))?;
            let (times, values) = read_column(path, &args.column)?;
            let fit = fit_growth_envelope(&times, &values)?;
            let violations = fit.violations(&times, &values);
            let mut csv = String::from("t,value,envelope\n");
            for (t, v) in times.iter().zip(&values) {
                csv.push_str(&format!(
                    "{t:.17e},{v:.17e},{:.17e}\n",
                    crate::lab::envelope(fit.c, *t)
                ));
            }
            out.write_text("envelope.csv", &csv)?;
            (violations == 0, None, json!({ "column": args.column, "fit": fit, "violations": violations }))
        }
        Check::Deltas => {
            let (v1, v2) = delta_velocities(&setup.grid, setup.seed, args.t_end.min(0.5))?;
            let r = delta_estimates(&v1, &v2, p, 200)?;
            let reports = [&r.u1, &r.u2, &r.u3, &r.u4];
            let mut csv = r.u1.to_csv(true);
            for rep in &reports[1..] {
                csv.push_str(&rep.to_csv(false));
            }
            out.write_text("deltas.csv", &csv)?;
            let passed = reports.iter().all(|r| r.is_valid());
            let maxima: Vec<f64> = reports.iter().map(|r| r.max()).collect();
            (passed, None, json!({ "max_ratios": maxima }))
        }
    };
    out.write_json(
        "summary.json",
        &Verdict {
            check: name,
            passed,
            refinement_drift: drift,
            details,
        },
    )?;
    ctx.finish(out, &format!("verify {name}"))?;
    log::info!("verify {name}: passed = {passed}");
    Ok(passed)
}

type VelocityHistory = Vec<(f64, VectorField)>;

/// Two nearby Lagrangian velocities: a decaying vortex and a small solenoidal perturbation of it.
fn delta_velocities(
    g: &Grid,
    seed: u64,
    t_end: f64,
) -> Result<(VelocityHistory, VelocityHistory)> {
    let w = std::f64::consts::TAU / g.length();
    let ens = GaussianEnsemble::new(1.0, 4.0, 0.0);
    let pert = crate::lab::solenoidal_field(g, &ens, seed);
    let pmax = pert.magnitude_physical().into_iter().fold(0.0, f64::max).max(1e-300);
    let pert = pert.scale(0.01 / pmax);
    let steps = 10;
    let mut v1 = Vec::with_capacity(steps + 1);
    let mut v2 = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = t_end * i as f64 / steps as f64;
        let e = 0.1 * (-2.0 * w * w * t).exp();
        let base = VectorField::from_fn(g, |x, y| {
            [e * (w * x).sin() * (w * y).cos(), -e * (w * x).cos() * (w * y).sin()]
        });
        let mut other = base.clone();
        other.axpy((-t).exp(), &pert);
        v1.push((t, base));
        v2.push((t, other));
    }
    Ok((v1, v2))
}

/// Reads `(t, column)` pairs from a diagnostics CSV.
fn read_column(path: &Path, column: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Invalid(format!("{}: empty file", path.display())))?
        .split(',')
        .collect();
    let find = |name: &str| {
        header.iter().position(|h| *h == name).ok_or_else(|| {
            Error::Config(format!("{}: no column `{name}`", path.display()))
        })
    };
    let (ti, ci) = (find("t")?, find(column)?);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<f64> {
            cells.get(i).and_then(|c| c.parse().ok()).ok_or_else(|| {
                Error::Invalid(format!("{}: bad value on data row {}", path.display(), row + 1))
            })
        };
        times.push(get(ti)?);
        values.push(get(ci)?);
    }
    Ok((times, values))
}

fn elliptic(args: &EllipticArgs, ctx: &Context) -> Result<bool> {
    let setup = ctx.setup()?;
    let g = &setup.grid;
    let a = random_coefficient(g, setup.seed, args.amplitude)?;
    let ens = GaussianEnsemble::broadband(g, ctx.cfg.initial.slope);
    let f = gaussian_vector(g, &ens, setup.seed ^ 0xf0);
    let opts = SolveOptions {
        method: args.method,
        ..SolveOptions::new(args.tol, args.max_iter)
    };
    let sol = solve_pressure_with(&a, &f, &opts)?;
    let est = check_elliptic_estimate(&a, &f, &sol.grad_pi, ctx.p(), &setup.ladder)?;
    let passed = est.l2_holds() && est.ratio.is_finite();
    let mut out = ctx.output()?;
    out.write_json(
        "elliptic.json",
        &json!({
            "amplitude": args.amplitude,
            "method": format!("{:?}", args.method),
            "stats": sol.stats,
            "estimate": est,
            "passed": passed,
        }),
    )?;
    let mut state = StateSnapshot::new(0.0, a, f)?;
    state.grad_pi = sol.grad_pi;
    let bytes = crate::io::encode_snapshot(&state)?;
    out.write_bytes("solution.bsns", &bytes)?;
    ctx.finish(out, "elliptic")?;
    Ok(passed)
}

fn simulate(ctx: &Context) -> Result<bool> {
    let (a0, u0) = ctx.cfg.initial_data()?;
    let traj = ns_integrate(&ctx.cfg.integrator(), &a0, &u0)?;
    let mut out = ctx.output()?;
    out.write_text("diagnostics.csv", &traj.diagnostics.to_csv())?;
    if let Some(e) = &traj.energy {
        out.write_text("energy.csv", &e.to_csv())?;
    }
    for (k, s) in traj.snapshots.iter().enumerate() {
        let bytes = crate::io::encode_snapshot(s)?;
        out.write_bytes(&format!("snap_{k:04}.bsns"), &bytes)?;
    }
    let passed = traj.completed();
    out.write_json(
        "summary.json",
        &json!({
            "stop": traj.stop,
            "stats": traj.stats,
            "final_t": traj.final_state().t,
            "snapshots": traj.snapshots.len(),
            "passed": passed,
        }),
    )?;
    ctx.finish(out, "simulate")?;
    Ok(passed)
}

fn lagrangian(args: &LagrangianArgs, ctx: &Context) -> Result<bool> {
    let n = ctx.cfg.grid.n;
    let snaps = match args.flow {
        FlowChoice::Shear => benchmark_snapshots(BenchmarkFlow::Shear, n, args.t_end, args.spacing)?,
        FlowChoice::TaylorGreen => {
            benchmark_snapshots(BenchmarkFlow::TaylorGreen, n, args.t_end, args.spacing)?
        }
        FlowChoice::Simulate => {
            let mut sim = ctx.cfg.integrator();
            sim.horizon = args.t_end;
            sim.snapshot_every = ((args.spacing / sim.dt).round() as usize).max(1);
            let (a0, u0) = ctx.cfg.initial_data()?;
            ns_integrate(&sim, &a0, &u0)?.snapshots
        }
    };
    let flow = integrate_flow(&snaps, args.dt.min(args.spacing))?;
    let tol = &ctx.cfg.tolerances;
    let mut csv = String::from("t,volume_defect,inverse_defect,div_trace,div_piola,eta_residual\n");
    let mut worst_volume = 0.0f64;
    let mut worst_div = 0.0f64;
    let mut velocities = Vec::with_capacity(snaps.len());
    for (k, s) in snaps.iter().enumerate() {
        let d = check_div_identity(s, &flow)?;
        let l = to_lagrangian(s, &flow)?;
        let (vol, inv) = (flow.volume_defect(k), flow.inverse_defect(k));
        let eta = l.eta_residual(&snaps[0].a);
        worst_volume = worst_volume.max(vol);
        worst_div = worst_div.max(d.trace).max(d.piola);
        csv.push_str(&format!(
            "{:.17e},{vol:.17e},{inv:.17e},{:.17e},{:.17e},{eta:.17e}\n",
            s.t, d.trace, d.piola
        ));
        velocities.push((s.t, l.v));
    }
    let t_last = flow.times[flow.times.len() - 1];
    let series = jacobian_series(&velocities, t_last, args.k_max)?;
    let passed = worst_volume <= tol.volume
        && worst_div <= tol.div_identity
        && series.agreement <= SERIES_AGREEMENT;
    let mut out = ctx.output()?;
    out.write_text("lagrangian.csv", &csv)?;
    out.write_json(
        "summary.json",
        &json!({
            "flow": format!("{:?}", args.flow),
            "volume_defect": worst_volume,
            "div_identity": worst_div,
            "series_terms": series.terms,
            "series_agreement": series.agreement,
            "series_monitor": series.monitor,
            "passed": passed,
        }),
    )?;
    ctx.finish(out, "lagrangian")?;
    Ok(passed)
}

/// Writes `states` as numbered snapshots into `dir`.
pub fn save_states(states: &[StateSnapshot], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir.as_ref())?;
    states
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let path = dir.as_ref().join(format!("snap_{k:04}.bsns"));
            save_snapshot(s, &path)?;
            Ok(path)
        })
        .collect()
}
