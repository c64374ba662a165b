//! `cwp`: experiment runner for the Curie-Weiss-Potts thermodynamic formalism engine.
//!
//! Every command writes a `#` header block (version, config hash, seed, parameters,
//! generation time) followed by a CSV or JSON body.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sha2::{Digest, Sha256};

use cwp_core::config::ModelConfig;
use cwp_core::observable::ObservableSpec;
use cwp_core::pgm::{
    convergence_test, hubbard_stratonovich_check, ConvergenceMethod, ConvergenceOptions, McOptions, Proposal,
    DEFAULT_EXACT_CAP,
};
use cwp_core::pressure::{entropy_profile_csv, num, pressure_surface_csv, EntropyOptions, PressureMap};
use cwp_core::quadratic::{find_maxima, quadratic_pressure, MaximaOptions};
use cwp_core::transfer::Model;
use cwp_core::xy::{laplace_tail, xy_critical_point};
use cwp_core::Error;

#[derive(Parser, Debug)]
#[command(name = "cwp", version, about = "Thermodynamic formalism for generalized Curie-Weiss-Potts models")]
struct Cli {
    /// Model configuration (JSON).
    #[arg(long, global = true, alias = "model")]
    config: Option<PathBuf>,
    /// Write the result into this directory instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Solver tolerance; for `pgm-converge` the PASS tolerance on the final gap.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Leading eigendata of the transfer operator at `t`.
    Spectral(SpectralArgs),
    /// P and its gradient on a tensor grid of `t`.
    PressureSurface(GridArgs),
    /// H(z) and its status on a tensor grid of `z`.
    Entropy(GridArgs),
    /// Maximizers of the auxiliary function.
    Maxima(MaximaArgs),
    /// Quadratic pressure and maximizer count over a range of beta.
    P2Sweep(SweepArgs),
    /// Finite-n Gibbs expectations against the limit mixture.
    PgmConverge(PgmArgs),
    /// Quadrature check of the Gaussian linearization identity.
    HsCheck(HsArgs),
    /// Spontaneous magnetization curve of the mean-field XY model.
    XyPhase(SweepArgs),
    /// Laplace-method tail integrals against their asymptotics.
    LaplaceCheck(LaplaceArgs),
}

#[derive(Args, Debug)]
struct SpectralArgs {
    /// Comma-separated parameter vector (default: zero).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    t: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
    min: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    max: f64,
    /// Points per axis.
    #[arg(long, default_value_t = 41)]
    steps: usize,
}

#[derive(Args, Debug)]
struct MaximaArgs {
    #[arg(long)]
    beta: Option<f64>,
    /// Search box half-width.
    #[arg(long = "K")]
    k: Option<f64>,
    /// Grid step of the initial scan.
    #[arg(long)]
    grid: Option<f64>,
    #[arg(long, default_value_t = 8)]
    multistarts: usize,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, default_value_t = 0.5)]
    beta_min: f64,
    #[arg(long, default_value_t = 6.0)]
    beta_max: f64,
    /// Number of intervals (steps + 1 points).
    #[arg(long, default_value_t = 100)]
    steps: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Exact,
    Mc,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProposalArg {
    Product,
    LatentField,
    Auto,
}

#[derive(Args, Debug)]
struct PgmArgs {
    #[arg(long)]
    beta: Option<f64>,
    /// Observable as inline JSON or a path to a JSON file (default: the config's observable).
    #[arg(long)]
    obs: Option<String>,
    /// Comma-separated system sizes.
    #[arg(long, value_delimiter = ',', default_value = "100,400,1600")]
    n: Vec<usize>,
    #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
    method: MethodArg,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, value_enum, default_value_t = ProposalArg::Auto)]
    proposal: ProposalArg,
    /// Work cap for exact enumeration.
    #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
    cap: usize,
}

#[derive(Args, Debug)]
struct HsArgs {
    /// Comma-separated vector xi.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "1,2")]
    xi: Vec<f64>,
    #[arg(long, default_value_t = 64)]
    nodes: usize,
}

#[derive(Args, Debug)]
struct LaplaceArgs {
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Comma-separated n values.
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,100000")]
    n: Vec<f64>,
    /// Cutoff exponent: b_n = n^(-b_exp); default 1/(2 alpha).
    #[arg(long)]
    b_exp: Option<f64>,
}

/// Failure carrying its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::CapExceeded { .. } => 4,
            Error::NotMixing { .. }
            | Error::NoConvergence { .. }
            | Error::NonSimpleLeading { .. }
            | Error::AmbiguousBoundary { .. }
            | Error::DegenerateMaximum { .. }
            | Error::LowEss { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

struct Output {
    name: &'static str,
    ext: &'static str,
    params: serde_json::Value,
    body: String,
}

struct Context {
    config: Option<ModelConfig>,
    seed: u64,
    tol: Option<f64>,
}

impl Context {
    fn config(&self) -> Result<&ModelConfig, Failure> {
        self.config
            .as_ref()
            .ok_or_else(|| config_error("this command needs --config"))
    }

    fn pressure_map(&self) -> Result<PressureMap, Failure> {
        let cfg = self.config()?;
        let mut solver = cfg.solver;
        if let Some(tol) = self.tol {
            solver.tol = tol;
        }
        let model: Model = cfg.build_model()?;
        Ok(PressureMap::with_options(std::sync::Arc::new(model), solver))
    }
}

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

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| config_error(format!("thread pool: {e}")))?;
    }
    let config = match &cli.config {
        Some(path) => Some(ModelConfig::load(path)?),
        None => None,
    };
    let seed = cli.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0);
    let ctx = Context {
        config,
        seed,
        tol: cli.tol,
    };
    let output = match &cli.command {
        Command::Spectral(a) => spectral(&ctx, a)?,
        Command::PressureSurface(a) => pressure_surface(&ctx, a)?,
        Command::Entropy(a) => entropy(&ctx, a)?,
        Command::Maxima(a) => maxima(&ctx, a)?,
        Command::P2Sweep(a) => p2_sweep(&ctx, a)?,
        Command::PgmConverge(a) => pgm_converge(&ctx, a)?,
        Command::HsCheck(a) => hs_check(a)?,
        Command::XyPhase(a) => xy_phase(a)?,
        Command::LaplaceCheck(a) => laplace_check(a)?,
    };
    emit(&ctx, &output, cli.out.as_deref())
}

fn header(ctx: &Context, out: &Output) -> String {
    let config_json = ctx
        .config
        .as_ref()
        .map(|c| serde_json::to_string(c).expect("config serializes"))
        .unwrap_or_else(|| "null".to_string());
    let hash = hex::encode(Sha256::digest(config_json.as_bytes()));
    let generated = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut h = String::new();
    let _ = writeln!(h, "# cwp {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(h, "# command: {}", out.name);
    let _ = writeln!(h, "# config-sha256: {hash}");
    let _ = writeln!(h, "# seed: {}", ctx.seed);
    let _ = writeln!(h, "# params: {}", out.params);
    let _ = writeln!(h, "# config: {config_json}");
    let _ = writeln!(h, "# generated-unix: {generated}");
    h
}

fn emit(ctx: &Context, out: &Output, dir: Option<&Path>) -> Result<(), Failure> {
    let text = format!("{}{}", header(ctx, out), out.body);
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| config_error(format!("{}: {e}", dir.display())))?;
            let path = dir.join(format!("{}.{}", out.name, out.ext));
            std::fs::write(&path, text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn axis(min: f64, max: f64, steps: usize) -> Result<Vec<f64>, Failure> {
    if steps < 2 || !(max > min) {
        return Err(config_error("grid needs steps >= 2 and max > min"));
    }
    Ok((0..steps)
        .map(|i| min + (max - min) * i as f64 / (steps - 1) as f64)
        .collect())
}

fn tensor_grid(q: usize, a: &GridArgs) -> Result<Vec<Vec<f64>>, Failure> {
    let ax = axis(a.min, a.max, a.steps)?;
    let total = (a.steps as f64).powi(q as i32);
    if total > 1e6 {
        return Err(config_error(format!("grid of {total} points exceeds 1e6")));
    }
    let mut grid = vec![vec![]];
    for _ in 0..q {
        grid = grid
            .into_iter()
            .flat_map(|p| {
                ax.iter().map(move |&x| {
                    let mut v = p.clone();
                    v.push(x);
                    v
                })
            })
            .collect();
    }
    Ok(grid)
}

fn spectral(ctx: &Context, a: &SpectralArgs) -> Result<Output, Failure> {
    let pm = ctx.pressure_map()?;
    let t = a.t.clone().unwrap_or_else(|| vec![0.0; pm.q()]);
    let sd = pm.spectral(&t)?;
    Ok(Output {
        name: "spectral",
        ext: "json",
        params: json!({ "t": t }),
        body: format!("{}\n", sd.to_json()),
    })
}

fn pressure_surface(ctx: &Context, a: &GridArgs) -> Result<Output, Failure> {
    let pm = ctx.pressure_map()?;
    let grid = tensor_grid(pm.q(), a)?;
    Ok(Output {
        name: "pressure-surface",
        ext: "csv",
        params: json!({ "min": a.min, "max": a.max, "steps": a.steps }),
        body: pressure_surface_csv(&pm, &grid)?,
    })
}

fn entropy(ctx: &Context, a: &GridArgs) -> Result<Output, Failure> {
    let pm = ctx.pressure_map()?;
    let grid = tensor_grid(pm.q(), a)?;
    Ok(Output {
        name: "entropy",
        ext: "csv",
        params: json!({ "min": a.min, "max": a.max, "steps": a.steps }),
        body: entropy_profile_csv(&pm, &grid, &EntropyOptions::default())?,
    })
}

fn maxima_options(ctx: &Context, k: Option<f64>, grid: Option<f64>, multistarts: usize) -> Result<MaximaOptions, Failure> {
    Ok(MaximaOptions {
        k,
        grid_step: grid,
        multistarts,
        radial: ctx.config()?.radial,
    })
}

fn maxima(ctx: &Context, a: &MaximaArgs) -> Result<Output, Failure> {
    let pm = ctx.pressure_map()?;
    let beta = a.beta.unwrap_or(ctx.config()?.beta);
    let opts = maxima_options(ctx, a.k, a.grid, a.multistarts)?;
    let set = find_maxima(&pm, beta, &opts)?;
    Ok(Output {
        name: "maxima",
        ext: "json",
        params: json!({ "beta": beta, "options": opts }),
        body: format!("{}\n", serde_json::to_string_pretty(&set).expect("maxima serialize")),
    })
}

fn p2_sweep(ctx: &Context, a: &SweepArgs) -> Result<Output, Failure> {
    let pm = ctx.pressure_map()?;
    let opts = maxima_options(ctx, None, None, 8)?;
    let betas = axis(a.beta_min, a.beta_max, a.steps + 1)?;
    let mut body = String::from("beta,P2,maxima,degenerate\n");
    for beta in betas {
        let qp = quadratic_pressure(&pm, beta, &opts)?;
        let _ = writeln!(
            body,
            "{},{},{},{}",
            num(beta),
            num(qp.p2),
            qp.maxima.maxima.len(),
            qp.maxima.any_degenerate()
        );
    }
    Ok(Output {
        name: "p2-sweep",
        ext: "csv",
        params: json!({ "betaMin": a.beta_min, "betaMax": a.beta_max, "steps": a.steps }),
        body,
    })
}

fn parse_observable(arg: &str) -> Result<ObservableSpec, Failure> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| config_error(format!("{arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| config_error(format!("observable JSON: {e}")))
}

fn pgm_converge(ctx: &Context, a: &PgmArgs) -> Result<Output, Failure> {
    let pm = ctx.pressure_map()?;
    let cfg = ctx.config()?;
    let beta = a.beta.unwrap_or(cfg.beta);
    let spec = match &a.obs {
        Some(arg) => parse_observable(arg)?,
        None => cfg
            .observable
            .clone()
            .ok_or_else(|| config_error("no observable: pass --obs or set it in the config"))?,
    };
    let f = spec.build(pm.model().alphabet())?;
    let method = match a.method {
        MethodArg::Exact => ConvergenceMethod::Exact { cap: a.cap },
        MethodArg::Mc => ConvergenceMethod::Mc(McOptions {
            samples: a.samples,
            seed: ctx.seed,
            proposal: match a.proposal {
                ProposalArg::Product => Proposal::Product,
                ProposalArg::LatentField => Proposal::LatentField,
                ProposalArg::Auto => Proposal::Auto,
            },
        }),
    };
    let opts = ConvergenceOptions {
        tol: ctx.tol.unwrap_or(ConvergenceOptions::default().tol),
        maxima: maxima_options(ctx, None, None, 8)?,
    };
    let table = convergence_test(&pm, beta, &f, &a.n, &method, &opts)?;
    let mut body = String::from("n,value,stderr,prediction,gap\n");
    for r in &table.rows {
        let _ = writeln!(
            body,
            "{},{},{},{},{}",
            r.n,
            num(r.value),
            r.stderr.map(num).unwrap_or_default(),
            num(r.prediction),
            num(r.gap)
        );
    }
    let verdict = if table.pass { "PASS" } else { "FAIL" };
    let last = table.rows.last().map(|r| r.gap).unwrap_or(f64::NAN);
    let _ = writeln!(body, "# {verdict}: final gap {} (tolerance {})", num(last), num(table.tol));
    Ok(Output {
        name: "pgm-converge",
        ext: "csv",
        params: json!({ "beta": beta, "observable": spec, "n": a.n, "method": method, "tol": table.tol }),
        body,
    })
}

fn hs_check(a: &HsArgs) -> Result<Output, Failure> {
    let err = hubbard_stratonovich_check(&a.xi, a.nodes)?;
    let xi: Vec<String> = a.xi.iter().map(|x| num(*x)).collect();
    Ok(Output {
        name: "hs-check",
        ext: "csv",
        params: json!({ "xi": a.xi, "nodes": a.nodes }),
        body: format!("xi,nodes,relative_error\n{},{},{}\n", xi.join(";"), a.nodes, num(err)),
    })
}

fn xy_phase(a: &SweepArgs) -> Result<Output, Failure> {
    if !(a.beta_min > 0.0) {
        return Err(config_error("beta-min must be positive"));
    }
    let mut body = String::from("beta,regime,rStar,phiMax,phi2\n");
    for beta in axis(a.beta_min, a.beta_max, a.steps + 1)? {
        let c = xy_critical_point(beta)?;
        let _ = writeln!(
            body,
            "{},{},{},{},{}",
            num(beta),
            c.regime.as_str(),
            num(c.r_star),
            num(c.phi_max),
            num(c.second_deriv)
        );
    }
    Ok(Output {
        name: "xy-phase",
        ext: "csv",
        params: json!({ "betaMin": a.beta_min, "betaMax": a.beta_max, "steps": a.steps }),
        body,
    })
}

fn laplace_check(a: &LaplaceArgs) -> Result<Output, Failure> {
    let b_exp = a.b_exp.unwrap_or(0.5 / a.alpha);
    let mut body = String::from("n,b_n,integral,asymptotic,ratio\n");
    for &n in &a.n {
        let b = n.powf(-b_exp);
        let lt = laplace_tail(a.alpha, a.gamma, n, b)?;
        let _ = writeln!(
            body,
            "{},{},{},{},{}",
            num(n),
            num(b),
            num(lt.integral),
            num(lt.asymptotic),
            num(lt.ratio)
        );
    }
    Ok(Output {
        name: "laplace-check",
        ext: "csv",
        params: json!({ "alpha": a.alpha, "gamma": a.gamma, "n": a.n, "bExp": b_exp }),
        body,
    })
}
