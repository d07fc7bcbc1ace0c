//! Experiment runner behind the `gausshardy` binary.
//!
//! Every subcommand produces an [`ExperimentResult`]: a parameter echo, a
//! table of rows and a `meta` block. Rows never depend on the thread count.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use gausshardy::gauss_geometry::{
    boundary_shell_ratio, doubling_ratio_scan, maximal_ball_1d, shell_family, GaussBall, RadiusGrid,
};
use gausshardy::hardy_atoms::{
    admissible_ball_grid, bmo_mean_oscillation, h1_lower_bound_duality, h1_upper_bound_greedy,
    Atom, AtomicSpace, BmoDictionary, SampledFunction,
};
use gausshardy::impow_kernel::{
    kernel_closed_form_1d, kernel_quadrature, lemma_components, spectral_action_check, ImpowParams,
    SPECTRAL_ACTION_TOL,
};
use gausshardy::ou_spectral::{
    apply_multiplier, mehler_eval, mehler_series_eval_precise, semigroup_compose,
    shipped_test_functions, Multiplier, SpectralFunction,
};
use gausshardy::parallel::{ordered_map, thread_count, with_threads};
use gausshardy::quadrature::{QuadOptions, QuadratureGrid};
use gausshardy::singular_estimators::{
    atom_image_norm, check_implications, divergence_scan, hormander_estimate, i_infinity_estimate,
    tay_identity_residual, AtomImage, BallGrid, ConstantKernel, HypersingularKernel, ImpowKernel,
    KernelHandle, MehlerKernel, ReciprocalKernel, TailWindow, TruncatedIdentityKernel,
};
use gausshardy::tree_analysis::{
    adjacent_atom_image_norm, cheeger_ratio, equivalence_report, shipped_kernels, tree_gradient_l1,
    tree_hormander_sum, tree_l1_norm, RadialTreeKernel,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Pairs `(x, y)` for the kernel cross-check: `0.1 <= |x - y|`, `|x|, |y| <= 5`.
pub const CROSS_CHECK_PAIRS: [(f64, f64); 20] = [
    (0.0, 0.5),
    (0.3, -0.4),
    (1.0, 1.1),
    (-1.0, -1.1),
    (1.5, -0.7),
    (2.0, 1.0),
    (0.6, 2.2),
    (-2.5, -2.0),
    (3.0, 2.7),
    (-3.0, 1.0),
    (2.4, -2.9),
    (4.0, 3.6),
    (-4.5, -4.0),
    (5.0, 4.5),
    (4.8, -0.2),
    (0.2, 3.9),
    (-1.7, 4.4),
    (3.3, 3.45),
    (-0.05, 0.12),
    (1.2, 5.0),
];

pub const LEMMA_A: [f64; 7] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
pub const LEMMA_SIGMA: [f64; 6] = [0.005, 0.01, 0.05, 0.1, 0.25, 0.5];

#[derive(Parser, Debug, Clone)]
#[command(
    name = "gausshardy",
    version,
    about = "Experiments on Hardy spaces of the Gauss measure"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output file (standard output when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads (overrides GAUSSHARDY_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    /// Mehler kernel: series oracle, semigroup law, stochasticity.
    Mehler(MehlerArgs),
    /// Kernel of (rI + L)^{iu}.
    Impow(ImpowArgs),
    /// Empirical local Hörmander constant.
    Hormander(KernelArgs),
    /// Mass of a kernel off 2B_y.
    Iinf(KernelArgs),
    /// Growth of the mass at infinity of (rI + L)^{iu}.
    Diverge(DivergeArgs),
    /// Atoms, BMO scans and norm estimates.
    Hardy(HardyArgs),
    /// Radial kernels on homogeneous trees.
    Tree(TreeArgs),
    /// Boundary shells and doubling of the Gauss measure.
    Isoperimetric(IsoArgs),
}

fn parse_list(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|e| format!("'{s}': {e}"))
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MehlerAction {
    /// Closed form against the series oracle.
    Check,
    /// h_{t} * h_{t} against h_{2t}.
    Compose,
    /// Gauss-Hermite sums of h_t(x, .).
    Stochastic,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MehlerArgs {
    #[arg(value_enum)]
    pub action: MehlerAction,
    #[arg(long, value_delimiter = ',', value_parser = parse_list, default_value = "0.2,0.5,1,2")]
    pub t: Vec<f64>,
    /// Points -g, -g/2, 0, g/2, g.
    #[arg(long, default_value_t = 3.0)]
    pub grid: f64,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Gauss-Hermite nodes.
    #[arg(long, default_value_t = 200)]
    pub nodes: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ImpowAction {
    /// Quadrature route against the closed form, and u -> -u.
    Cross,
    /// Normalization fixed by the action on a Gaussian bump.
    Action,
    /// Components I, J, H on the (a, sigma) grid.
    Lemma,
    /// Norms of (rI + L)^{iu} f and L^{iu} f.
    Isometry,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ImpowArgs {
    #[arg(value_enum)]
    pub action: ImpowAction,
    #[arg(long, default_value_t = 1.0)]
    pub u: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelChoice {
    Impow,
    Mehler,
    Reciprocal,
    Hypersingular,
    Constant,
    TruncatedIdentity,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value_t = KernelChoice::Impow)]
    pub kernel: KernelChoice,
    #[arg(long, default_value_t = 1.0)]
    pub u: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Semigroup time of the Mehler kernel.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Grid doublings of the Hörmander scan.
    #[arg(long, default_value_t = 2)]
    pub refinements: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_list, default_value = "2,4,8,16")]
    pub ys: Vec<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DivergeArgs {
    #[arg(long, default_value_t = 1.0)]
    pub u: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long, value_delimiter = ',', value_parser = parse_list, default_value = "4,6,8,12,16")]
    pub ys: Vec<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HardyAction {
    /// h^1 bound against the H^1 duality bound for 1_{B_y}/gamma(B_y).
    Strict,
    /// Mean oscillation of x^2 over admissible intervals.
    Bmo,
    /// Atomic decomposition of 1_{B_y}/gamma(B_y).
    Decompose,
    /// L^1 norms of atom images under a kernel.
    Images,
    /// Kernel criteria and the implications between them.
    Implications,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceChoice {
    H1,
    H1loc,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct HardyArgs {
    #[arg(value_enum)]
    pub action: HardyAction,
    #[arg(long, value_delimiter = ',', value_parser = parse_list, default_value = "4,8,16")]
    pub ys: Vec<f64>,
    #[arg(long, value_enum, default_value_t = KernelChoice::Impow)]
    pub kernel: KernelChoice,
    #[arg(long, default_value_t = 1.0)]
    pub u: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 2)]
    pub refinements: usize,
    #[arg(long, value_enum, default_value_t = SpaceChoice::H1)]
    pub space: SpaceChoice,
    #[arg(long, default_value_t = 100_000)]
    pub budget: usize,
    /// Largest |centre| of the BMO scan.
    #[arg(long, default_value_t = 50.0)]
    pub max_center: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeAction {
    /// Verdicts of the three boundedness criteria.
    Equivalence,
    /// Partial sums shell by shell.
    Sums,
    /// Vertex enumeration against shell sums, shipped kernels.
    Exactness,
    /// Gradient to l^1 ratios over indicator and geometric kernels.
    Cheeger,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TreeArgs {
    #[arg(value_enum)]
    pub action: TreeAction,
    #[arg(long, default_value_t = 2)]
    pub q: u32,
    /// delta, indicator:R, geometric:RHO, power:P, shifted-power, inverse-sphere
    #[arg(long, default_value = "geometric:0.25")]
    pub kernel: String,
    #[arg(long, default_value_t = gausshardy::tree_analysis::DEFAULT_DEPTH)]
    pub depth: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IsoAction {
    /// Boundary-shell ratios over the documented family.
    Shell,
    /// gamma(2B)/gamma(B) over maximal balls.
    Doubling,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct IsoArgs {
    #[arg(value_enum)]
    pub action: IsoAction,
    /// Largest centre of the doubling scan.
    #[arg(long, default_value_t = 10.0)]
    pub grid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub columns: Vec<String>,
    pub tolerances: Map<String, Value>,
    pub refinement: Value,
    pub summary: Map<String, Value>,
    pub partial: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub params: Value,
    pub rows: Vec<Map<String, Value>>,
    pub meta: Meta,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("convergence failure: {message}")]
    Convergence {
        message: String,
        partial: Box<ExperimentResult>,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Convergence { .. } => 3,
        }
    }
}

/// Rows under construction, with a fixed column order.
struct Table {
    columns: Vec<String>,
    rows: Vec<Map<String, Value>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, values: Vec<Value>) {
        assert_eq!(values.len(), self.columns.len(), "row width");
        self.rows
            .push(self.columns.iter().cloned().zip(values).collect());
    }
}

struct Outcome {
    table: Table,
    tolerances: Map<String, Value>,
    refinement: Value,
    summary: Map<String, Value>,
}

impl Outcome {
    fn new(table: Table) -> Self {
        Self {
            table,
            tolerances: Map::new(),
            refinement: Value::Null,
            summary: Map::new(),
        }
    }

    fn tol(mut self, key: &str, v: impl Serialize) -> Self {
        self.tolerances.insert(key.into(), json!(v));
        self
    }

    fn sum(mut self, key: &str, v: impl Serialize) -> Self {
        self.summary.insert(key.into(), json!(v));
        self
    }
}

type Core<T> = gausshardy::Result<T>;

fn experiment_name(cmd: &Command) -> String {
    let v = serde_json::to_value(cmd).unwrap_or(Value::Null);
    let sub = v["subcommand"].as_str().unwrap_or("unknown").to_string();
    match v.get("action").and_then(Value::as_str) {
        Some(a) => format!("{sub}-{a}"),
        None => sub,
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

fn positive(name: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => {
            Err(invalid(format!("--{name} must be positive, got {x}")))
        }
        _ => Ok(()),
    }
}

fn validate(cmd: &Command) -> Result<(), CliError> {
    let nonempty = |name: &str, v: &[f64]| {
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            Err(invalid(format!(
                "--{name} must be a nonempty list of finite numbers"
            )))
        } else {
            Ok(())
        }
    };
    let nonzero_u = |u: f64| {
        if u == 0.0 || !u.is_finite() {
            Err(invalid("--u must be nonzero"))
        } else {
            Ok(())
        }
    };
    match cmd {
        Command::Mehler(a) => {
            nonempty("t", &a.t)?;
            for &t in &a.t {
                positive("t", Some(t))?;
            }
            positive("tol", a.tol)?;
            positive("grid", Some(a.grid))?;
            if a.nodes == 0 {
                return Err(invalid("--nodes must be positive"));
            }
        }
        Command::Impow(a) => {
            nonzero_u(a.u)?;
            positive("r", Some(a.r))?;
            positive("tol", a.tol)?;
        }
        Command::Hormander(a) | Command::Iinf(a) => {
            nonempty("ys", &a.ys)?;
            if a.kernel == KernelChoice::Impow {
                nonzero_u(a.u)?;
                positive("r", Some(a.r))?;
            }
            positive("t", Some(a.t))?;
        }
        Command::Diverge(a) => {
            nonempty("ys", &a.ys)?;
            nonzero_u(a.u)?;
            positive("r", Some(a.r))?;
        }
        Command::Hardy(a) => {
            nonempty("ys", &a.ys)?;
            if a.kernel == KernelChoice::Impow {
                nonzero_u(a.u)?;
                positive("r", Some(a.r))?;
            }
            positive("t", Some(a.t))?;
            positive("max-center", Some(a.max_center))?;
        }
        Command::Tree(a) => {
            if a.q < 2 {
                return Err(invalid("--q must be at least 2"));
            }
            if a.depth < 2 {
                return Err(invalid("--depth must be at least 2"));
            }
        }
        Command::Isoperimetric(a) => positive("grid", Some(a.grid))?,
    }
    Ok(())
}

/// Runs the configured experiment inside a pool of the requested size.
pub fn run_experiment(cli: &Cli) -> Result<ExperimentResult, CliError> {
    validate(&cli.command)?;
    let threads = thread_count(cli.threads);
    let name = experiment_name(&cli.command);
    let params = serde_json::to_value(&cli.command).unwrap_or(Value::Null);
    let outcome = with_threads(threads, || dispatch(&cli.command));
    let wrap = |o: Outcome, partial: bool, error: Option<String>| ExperimentResult {
        experiment: name.clone(),
        params: params.clone(),
        rows: o.table.rows,
        meta: Meta {
            version: VERSION.into(),
            columns: o.table.columns,
            tolerances: o.tolerances,
            refinement: o.refinement,
            summary: o.summary,
            partial,
            error,
        },
    };
    match outcome {
        Ok(o) => Ok(wrap(o, false, None)),
        Err(gausshardy::Error::Convergence {
            message,
            best,
            error,
        }) => {
            let mut t = Table::new(&["best_re", "best_im", "error"]);
            t.push(vec![json!(best.re), json!(best.im), json!(error)]);
            let partial = wrap(Outcome::new(t), true, Some(message.clone()));
            Err(CliError::Convergence {
                message,
                partial: Box::new(partial),
            })
        }
        Err(e) => Err(invalid(e.to_string())),
    }
}

fn dispatch(cmd: &Command) -> Core<Outcome> {
    match cmd {
        Command::Mehler(a) => match a.action {
            MehlerAction::Check => mehler_check(a),
            MehlerAction::Compose => mehler_compose(a),
            MehlerAction::Stochastic => mehler_stochastic(a),
        },
        Command::Impow(a) => match a.action {
            ImpowAction::Cross => impow_cross(a),
            ImpowAction::Action => impow_action(a),
            ImpowAction::Lemma => impow_lemma(a),
            ImpowAction::Isometry => impow_isometry(a),
        },
        Command::Hormander(a) => hormander(a),
        Command::Iinf(a) => iinf(a),
        Command::Diverge(a) => diverge(a),
        Command::Hardy(a) => match a.action {
            HardyAction::Strict => hardy_strict(a),
            HardyAction::Bmo => hardy_bmo(a),
            HardyAction::Decompose => hardy_decompose(a),
            HardyAction::Images => hardy_images(a),
            HardyAction::Implications => hardy_implications(a),
        },
        Command::Tree(a) => match a.action {
            TreeAction::Equivalence => tree_equivalence(a),
            TreeAction::Sums => tree_sums(a),
            TreeAction::Exactness => tree_exactness(),
            TreeAction::Cheeger => tree_cheeger(),
        },
        Command::Isoperimetric(a) => match a.action {
            IsoAction::Shell => iso_shell(),
            IsoAction::Doubling => iso_doubling(a),
        },
    }
}

fn five_points(g: f64) -> [f64; 5] {
    [-g, -0.5 * g, 0.0, 0.5 * g, g]
}

fn mehler_check(a: &MehlerArgs) -> Core<Outcome> {
    let tol = a.tol.unwrap_or(1e-12);
    let pts = five_points(a.grid);
    let mut cases = Vec::new();
    for &t in &a.t {
        for &x in &pts {
            for &y in &pts {
                cases.push((t, x, y));
            }
        }
    }
    let rows = ordered_map(&cases, |&(t, x, y)| -> Core<Vec<Value>> {
        let closed = mehler_eval(t, x, y)?;
        let s = mehler_series_eval_precise(t, x, y, tol)?;
        let rel = (s.value - closed).abs() / closed;
        Ok(vec![
            json!(t),
            json!(x),
            json!(y),
            json!(closed),
            json!(s.value),
            json!(s.terms),
            json!(s.tail_bound),
            json!(rel),
        ])
    });
    let mut table = Table::new(&[
        "t",
        "x",
        "y",
        "closed_form",
        "series",
        "terms",
        "tail_bound",
        "rel_discrepancy",
    ]);
    let mut worst: f64 = 0.0;
    for r in rows {
        let r = r?;
        worst = worst.max(r[7].as_f64().unwrap_or(f64::INFINITY));
        table.push(r);
    }
    Ok(Outcome::new(table)
        .tol("series_rel_tol", tol)
        .sum("max_rel_discrepancy", worst))
}

fn mehler_compose(a: &MehlerArgs) -> Core<Outcome> {
    let tol = a.tol.unwrap_or(1e-6);
    let grid = QuadratureGrid::gauss_hermite(a.nodes);
    let pts = five_points(a.grid);
    let mut cases = Vec::new();
    for &t in &a.t {
        for &x in &pts {
            for &y in &pts {
                cases.push((t, x, y));
            }
        }
    }
    let rows = ordered_map(&cases, |&(t, x, y)| -> Core<Vec<Value>> {
        let c = semigroup_compose(t, t, &grid, x, y, tol)?;
        let direct = mehler_eval(2.0 * t, x, y)?;
        let residual = (c.value - direct).abs() / direct.max(1.0);
        Ok(vec![
            json!(t),
            json!(t),
            json!(x),
            json!(y),
            json!(c.value),
            json!(direct),
            json!(residual),
            json!(c.error_estimate),
        ])
    });
    let mut table = Table::new(&[
        "t1",
        "t2",
        "x",
        "y",
        "composed",
        "direct",
        "residual",
        "error_estimate",
    ]);
    let mut worst: f64 = 0.0;
    for r in rows {
        let r = r?;
        worst = worst.max(r[6].as_f64().unwrap_or(f64::INFINITY));
        table.push(r);
    }
    Ok(Outcome::new(table)
        .tol("compose_tol", tol)
        .tol("nodes", a.nodes)
        .sum("max_residual", worst))
}

fn mehler_stochastic(a: &MehlerArgs) -> Core<Outcome> {
    let grid = QuadratureGrid::gauss_hermite(a.nodes);
    let n = 12;
    let mut table = Table::new(&["t", "x", "sum", "deviation"]);
    let mut worst: f64 = 0.0;
    for &t in &a.t {
        for k in 0..=n {
            let x = -a.grid + 2.0 * a.grid * k as f64 / n as f64;
            let mut total = 0.0;
            for (&v, &w) in grid.nodes.iter().zip(&grid.weights) {
                total += w * mehler_eval(t, x, v)?;
            }
            worst = worst.max((total - 1.0).abs());
            table.push(vec![
                json!(t),
                json!(x),
                json!(total),
                json!((total - 1.0).abs()),
            ]);
        }
    }
    Ok(Outcome::new(table)
        .tol("nodes", a.nodes)
        .sum("max_deviation", worst))
}

fn params(a: &ImpowArgs) -> Core<ImpowParams> {
    ImpowParams::new(a.u, a.r)
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

fn impow_cross(a: &ImpowArgs) -> Core<Outcome> {
    let p = params(a)?;
    let pc = p.conjugate();
    let rows = ordered_map(&CROSS_CHECK_PAIRS, |&(x, y)| -> Core<Vec<Value>> {
        let q = kernel_quadrature(&p, x, y)?.value;
        let c = kernel_closed_form_1d(&p, x, y)?.value;
        let qc = kernel_quadrature(&pc, x, y)?.value;
        let cc = kernel_closed_form_1d(&pc, x, y)?.value;
        Ok(vec![
            json!(x),
            json!(y),
            json!(q.re),
            json!(q.im),
            json!(c.re),
            json!(c.im),
            json!(rel(q, c)),
            json!(rel(qc, q.conj())),
            json!(rel(cc, c.conj())),
        ])
    });
    let mut table = Table::new(&[
        "x",
        "y",
        "quadrature_re",
        "quadrature_im",
        "closed_form_re",
        "closed_form_im",
        "rel_discrepancy",
        "conjugation_quadrature",
        "conjugation_closed_form",
    ]);
    let (mut worst, mut conj): (f64, f64) = (0.0, 0.0);
    for r in rows {
        let r = r?;
        worst = worst.max(r[6].as_f64().unwrap_or(f64::INFINITY));
        conj = conj
            .max(r[7].as_f64().unwrap_or(f64::INFINITY))
            .max(r[8].as_f64().unwrap_or(f64::INFINITY));
        table.push(r);
    }
    let opts = QuadOptions::default();
    Ok(Outcome::new(table)
        .tol("abs_tol", opts.abs_tol)
        .tol("rel_tol", opts.rel_tol)
        .sum("max_rel_discrepancy", worst)
        .sum("max_conjugation_deviation", conj))
}

fn impow_action(a: &ImpowArgs) -> Core<Outcome> {
    let p = params(a)?;
    let rep = spectral_action_check(&p, -1.0, 2.0, 8.0)?;
    let mut table = Table::new(&["normalization", "relative_error"]);
    for (n, e) in &rep.candidates {
        table.push(vec![json!(n), json!(e)]);
    }
    Ok(Outcome::new(table)
        .tol("spectral_action_tol", SPECTRAL_ACTION_TOL)
        .sum("x0", rep.x0)
        .sum("bump_center", rep.bump_center)
        .sum("beta", rep.beta)
        .sum("raw_action", [rep.raw_action.re, rep.raw_action.im])
        .sum(
            "spectral_action",
            [rep.spectral_action.re, rep.spectral_action.im],
        )
        .sum(
            "fitted_factor",
            [rep.fitted_factor.re, rep.fitted_factor.im],
        )
        .sum("resolved", rep.resolved))
}

fn impow_lemma(a: &ImpowArgs) -> Core<Outcome> {
    let tol = a.tol.unwrap_or(1e-10);
    let base = QuadOptions {
        abs_tol: tol,
        rel_tol: tol,
        ..QuadOptions::default()
    };
    let half = QuadOptions {
        abs_tol: 0.5 * tol,
        rel_tol: 0.5 * tol,
        ..base
    };
    let mut cases = Vec::new();
    for &x in &LEMMA_A {
        for &s in &LEMMA_SIGMA {
            cases.push((x, s));
        }
    }
    let rows = ordered_map(&cases, |&(aa, s)| -> Core<Vec<Value>> {
        let c = lemma_components(a.u, aa, s, &base)?;
        let h = lemma_components(a.u, aa, s, &half)?;
        let si = (aa * s).sqrt() * c.i.value.norm();
        let si_half = (aa * s).sqrt() * h.i.value.norm();
        Ok(vec![
            json!(aa),
            json!(s),
            json!(c.i.value.re),
            json!(c.i.value.im),
            json!(si),
            json!(si_half),
            json!((aa * s).sqrt() * c.j.value.norm()),
            json!(aa * s.sqrt() * c.h.value.norm()),
        ])
    });
    let mut table = Table::new(&[
        "a",
        "sigma",
        "i_re",
        "i_im",
        "scaled_i",
        "scaled_i_half_tol",
        "scaled_j",
        "scaled_h",
    ]);
    let (mut min_i, mut min_half, mut max_h) = (f64::INFINITY, f64::INFINITY, 0.0f64);
    for r in rows {
        let r = r?;
        min_i = min_i.min(r[4].as_f64().unwrap_or(0.0));
        min_half = min_half.min(r[5].as_f64().unwrap_or(0.0));
        max_h = max_h.max(r[7].as_f64().unwrap_or(f64::INFINITY));
        table.push(r);
    }
    Ok(Outcome::new(table)
        .tol("quad_tol", tol)
        .sum("min_scaled_i", min_i)
        .sum("min_scaled_i_half_tol", min_half)
        .sum("relative_change", (min_i - min_half).abs() / min_i)
        .sum("max_scaled_h", max_h))
}

fn impow_isometry(a: &ImpowArgs) -> Core<Outcome> {
    let shifted = Multiplier::shifted(a.u, a.r)?;
    let plain = Multiplier::ImaginaryPower { u: a.u };
    let mut table = Table::new(&[
        "function",
        "norm",
        "shifted_norm",
        "shifted_deviation",
        "plain_norm",
        "centered_norm",
        "plain_deviation",
    ]);
    let mut worst: f64 = 0.0;
    for (name, f) in shipped_test_functions() {
        let s = apply_multiplier(&shifted, &f).norm();
        let m = apply_multiplier(&plain, &f).norm();
        let centered = f.add(&SpectralFunction::new(vec![-f.coeffs()[0]])).norm();
        let (d1, d2) = ((s - f.norm()).abs(), (m - centered).abs());
        worst = worst.max(d1).max(d2);
        table.push(vec![
            json!(name),
            json!(f.norm()),
            json!(s),
            json!(d1),
            json!(m),
            json!(centered),
            json!(d2),
        ]);
    }
    Ok(Outcome::new(table).sum("max_deviation", worst))
}

fn make_kernel(choice: KernelChoice, u: f64, r: f64, t: f64) -> Core<Box<dyn KernelHandle>> {
    Ok(match choice {
        KernelChoice::Impow => Box::new(ImpowKernel::new(ImpowParams::new(u, r)?)),
        KernelChoice::Mehler => Box::new(MehlerKernel { t }),
        KernelChoice::Reciprocal => Box::new(ReciprocalKernel),
        KernelChoice::Hypersingular => Box::new(HypersingularKernel),
        KernelChoice::Constant => Box::new(ConstantKernel { value: 1.0 }),
        KernelChoice::TruncatedIdentity => Box::new(TruncatedIdentityKernel),
    })
}

fn tail_tolerances(o: Outcome) -> Outcome {
    let tail = TailWindow::default();
    o.tol("tail_margin", tail.margin)
        .tol("tail_step", tail.step)
        .tol("tail_rel_increment", tail.rel_increment)
}

fn hormander(a: &KernelArgs) -> Core<Outcome> {
    let k = make_kernel(a.kernel, a.u, a.r, a.t)?;
    let rep = hormander_estimate(
        &*k,
        &BallGrid::design(),
        &TailWindow::default(),
        a.refinements,
    )?;
    let mut table = Table::new(&["center", "radius", "y", "y_prime", "value"]);
    for r in &rep.rows {
        table.push(vec![
            json!(r.center),
            json!(r.radius),
            json!(r.y),
            json!(r.y_prime),
            json!(r.value),
        ]);
    }
    let mut o = tail_tolerances(Outcome::new(table))
        .sum("kernel", &rep.kernel)
        .sum("supremum", rep.supremum)
        .sum("verdict", rep.verdict);
    o.refinement = json!(rep.refinement);
    Ok(o)
}

fn iinf(a: &KernelArgs) -> Core<Outcome> {
    let k = make_kernel(a.kernel, a.u, a.r, a.t)?;
    let rep = i_infinity_estimate(&*k, &a.ys, &TailWindow::default())?;
    let mut table = Table::new(&["y", "radius", "phi"]);
    for r in &rep.rows {
        table.push(vec![json!(r.y), json!(r.radius), json!(r.value)]);
    }
    let values: Vec<f64> = rep.rows.iter().map(|r| r.value).collect();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    Ok(tail_tolerances(Outcome::new(table))
        .sum("kernel", &rep.kernel)
        .sum("supremum", rep.supremum)
        .sum(
            "relative_variation",
            if hi > 0.0 { (hi - lo) / hi } else { 0.0 },
        )
        .sum("verdict", rep.verdict))
}

fn diverge(a: &DivergeArgs) -> Core<Outcome> {
    let p = ImpowParams::new(a.u, a.r)?;
    let d = divergence_scan(&p, &a.ys, &TailWindow::default())?;
    let mut table = Table::new(&["y", "phi", "window_phi", "ln_y", "comparator"]);
    for r in &d.rows {
        table.push(vec![
            json!(r.y),
            json!(r.phi),
            json!(r.window_phi),
            json!(r.ln_y),
            json!(r.comparator),
        ]);
    }
    Ok(tail_tolerances(Outcome::new(table))
        .sum("strictly_increasing", d.strictly_increasing)
        .sum("slope", d.slope)
        .sum("intercept", d.intercept)
        .sum("r_squared", d.r_squared))
}

fn indicator(y: f64) -> SampledFunction {
    SampledFunction::normalized_indicator(&maximal_ball_1d(y))
}

fn hardy_strict(a: &HardyArgs) -> Core<Outcome> {
    let rows = ordered_map(&a.ys, |&y| -> Core<Vec<Value>> {
        let b = maximal_ball_1d(y);
        let f = indicator(y);
        let dual = h1_lower_bound_duality(&f, &BmoDictionary::standard(y, b.radius()));
        let h1 = h1_upper_bound_greedy(&f, AtomicSpace::H1, a.budget)?.total;
        let loc = h1_upper_bound_greedy(&f, AtomicSpace::H1Local, a.budget)?.total;
        Ok(vec![json!(y), json!(dual.bound), json!(h1), json!(loc)])
    });
    let mut table = Table::new(&[
        "y",
        "h1_duality_lower_bound",
        "h1_greedy_upper_bound",
        "h1loc_upper_bound",
    ]);
    for r in rows {
        table.push(r?);
    }
    let lower: Vec<f64> = table
        .rows
        .iter()
        .map(|r| r["h1_duality_lower_bound"].as_f64().unwrap_or(0.0))
        .collect();
    let growth: Vec<f64> = lower.windows(2).map(|w| w[1] / w[0]).collect();
    let loc_max = table
        .rows
        .iter()
        .map(|r| r["h1loc_upper_bound"].as_f64().unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    Ok(Outcome::new(table)
        .tol("budget", a.budget)
        .sum("duality_growth", growth)
        .sum("max_h1loc_bound", loc_max)
        .sum(
            "note",
            "duality bounds hold modulo the duality normalization constant",
        ))
}

fn hardy_bmo(a: &HardyArgs) -> Core<Outcome> {
    let balls = admissible_ball_grid(a.max_center, 0.5, &[1.0, 0.5, 0.25, 0.125]);
    let rep = bmo_mean_oscillation(&|x: f64| x * x, &balls);
    let mut table = Table::new(&["center", "radius", "mean", "oscillation"]);
    for r in &rep.rows {
        table.push(vec![
            json!(r.center),
            json!(r.radius),
            json!(r.mean),
            json!(r.oscillation),
        ]);
    }
    Ok(Outcome::new(table)
        .sum("function", "x^2")
        .sum("sup_oscillation", rep.sup_oscillation)
        .sum("l1_norm", rep.l1_norm)
        .sum("norm", rep.norm))
}

fn hardy_decompose(a: &HardyArgs) -> Core<Outcome> {
    let space = match a.space {
        SpaceChoice::H1 => AtomicSpace::H1,
        SpaceChoice::H1loc => AtomicSpace::H1Local,
    };
    let mut table = Table::new(&["y", "kind", "center", "radius", "coefficient"]);
    let mut totals = Vec::new();
    for &y in &a.ys {
        let d = h1_upper_bound_greedy(&indicator(y), space, a.budget)?;
        for (lambda, atom) in &d.terms {
            table.push(vec![
                json!(y),
                json!(atom.kind),
                json!(atom.center()),
                json!(atom.radius()),
                json!(lambda),
            ]);
        }
        totals.push(json!({ "y": y, "total": d.total, "residual": d.residual }));
    }
    Ok(Outcome::new(table)
        .tol("budget", a.budget)
        .sum("totals", totals))
}

fn atom_images(k: &dyn KernelHandle, ys: &[f64]) -> Core<(Vec<AtomImage>, Vec<AtomImage>)> {
    let tail = TailWindow::default();
    let pairs = ordered_map(ys, |&y| -> Core<(AtomImage, AtomImage)> {
        let g = atom_image_norm(k, &Atom::global_indicator(y), &tail)?;
        let b = GaussBall::new_1d(y, maximal_ball_1d(y).radius())?;
        let s = atom_image_norm(k, &Atom::standard_haar(&b)?, &tail)?;
        Ok((g, s))
    });
    let mut global = Vec::new();
    let mut standard = Vec::new();
    for p in pairs {
        let (g, s) = p?;
        global.push(g);
        standard.push(s);
    }
    Ok((global, standard))
}

fn image_table(global: &[AtomImage], standard: &[AtomImage]) -> Table {
    let mut table = Table::new(&[
        "y",
        "kind",
        "radius",
        "near",
        "near_is_bound",
        "far",
        "total",
    ]);
    for img in global.iter().chain(standard) {
        table.push(vec![
            json!(img.center),
            json!(img.kind),
            json!(img.radius),
            json!(img.near),
            json!(img.near_is_bound),
            json!(img.far),
            json!(img.total),
        ]);
    }
    table
}

fn hardy_images(a: &HardyArgs) -> Core<Outcome> {
    let k = make_kernel(a.kernel, a.u, a.r, a.t)?;
    let (global, standard) = atom_images(&*k, &a.ys)?;
    let verdict = |v: &[AtomImage]| {
        gausshardy::singular_estimators::trend_verdict(
            &v.iter().map(|i| i.total).collect::<Vec<_>>(),
        )
    };
    let (gv, sv) = (verdict(&global), verdict(&standard));
    Ok(
        tail_tolerances(Outcome::new(image_table(&global, &standard)))
            .sum("kernel", k.label())
            .sum("global_verdict", gv)
            .sum("standard_verdict", sv),
    )
}

fn hardy_implications(a: &HardyArgs) -> Core<Outcome> {
    let k = make_kernel(a.kernel, a.u, a.r, a.t)?;
    let tail = TailWindow::default();
    let h = hormander_estimate(&*k, &BallGrid::design(), &tail, a.refinements)?;
    let i = i_infinity_estimate(&*k, &a.ys, &tail)?;
    let (global, standard) = atom_images(&*k, &a.ys)?;
    let check = check_implications(&h, &i, &global, &standard, k.l2_norm_bound());
    let y0 = a.ys[0];
    let r0 = maximal_ball_1d(y0).radius();
    let xs: Vec<f64> = [-3.0, -1.0, 0.0, y0 - 2.0 * r0 - 0.5, y0 + 2.0 * r0 + 1.0]
        .into_iter()
        .filter(|&x| (x - y0).abs() > r0)
        .collect();
    let tay = tay_identity_residual(&*k, y0, &xs)?;
    let mut table = image_table(&global, &standard);
    for r in &i.rows {
        table.push(vec![
            json!(r.y),
            json!("phi"),
            json!(r.radius),
            Value::Null,
            Value::Null,
            json!(r.value),
            json!(r.value),
        ]);
    }
    let mut o = tail_tolerances(Outcome::new(table))
        .sum("kernel", k.label())
        .sum("hormander_supremum", h.supremum)
        .sum("hormander_verdict", h.verdict)
        .sum("i_infinity_verdict", i.verdict)
        .sum("tay_residual", tay)
        .sum("implications", &check);
    o.refinement = json!(h.refinement);
    Ok(o)
}

fn tree_verdict_row(
    name: &str,
    q: u32,
    e: &gausshardy::tree_analysis::EquivalenceReport,
) -> Vec<Value> {
    vec![
        json!(name),
        json!(q),
        json!(e.atom_image),
        json!(e.hormander),
        json!(e.l1),
        json!(e.consistent),
    ]
}

fn tree_equivalence(a: &TreeArgs) -> Core<Outcome> {
    let k = RadialTreeKernel::parse(a.q, &a.kernel, a.depth)?;
    let e = equivalence_report(&k);
    let mut table = Table::new(&["kernel", "q", "atom_image", "hormander", "l1", "consistent"]);
    table.push(tree_verdict_row(&k.name, k.q, &e));
    Ok(Outcome::new(table)
        .sum("l1_bound", tree_l1_norm(&k).bound)
        .sum("hormander_bound", tree_hormander_sum(&k).sum.bound)
        .sum("atom_image_bound", adjacent_atom_image_norm(&k).bound))
}

fn tree_sums(a: &TreeArgs) -> Core<Outcome> {
    let k = RadialTreeKernel::parse(a.q, &a.kernel, a.depth)?;
    let l1 = tree_l1_norm(&k);
    let g = tree_gradient_l1(&k);
    let h = tree_hormander_sum(&k).sum;
    let at = adjacent_atom_image_norm(&k);
    let mut table = Table::new(&["j", "l1", "gradient", "hormander", "adjacent_atom_image"]);
    for j in 0..l1.partial_sums.len() {
        table.push(vec![
            json!(j),
            json!(l1.partial_sums[j]),
            json!(g.partial_sums[j]),
            json!(h.partial_sums[j]),
            json!(at.partial_sums[j]),
        ]);
    }
    let report = |r: &gausshardy::tree_analysis::TreeSumReport| json!({ "value": r.value, "tail_bound": r.tail_bound, "verdict": r.verdict });
    Ok(Outcome::new(table)
        .sum("l1", report(&l1))
        .sum("gradient", report(&g))
        .sum("hormander", report(&h))
        .sum("adjacent_atom_image", report(&at)))
}

fn tree_exactness() -> Core<Outcome> {
    let mut table = Table::new(&[
        "kernel",
        "q",
        "depth",
        "direct",
        "reorganized",
        "abs_difference",
    ]);
    let mut worst: f64 = 0.0;
    let mut consistent = true;
    for k in shipped_kernels() {
        for c in tree_hormander_sum(&k).direct {
            let diff = (c.direct - c.reorganized).abs();
            worst = worst.max(diff / c.direct.abs().max(1.0));
            table.push(vec![
                json!(k.name),
                json!(k.q),
                json!(c.depth),
                json!(c.direct),
                json!(c.reorganized),
                json!(diff),
            ]);
        }
        consistent &= equivalence_report(&k).consistent;
    }
    let ind = RadialTreeKernel::indicator(2, 1)?;
    Ok(Outcome::new(table)
        .sum("max_relative_difference", worst)
        .sum("all_consistent", consistent)
        .sum("indicator_gradient", tree_gradient_l1(&ind).value)
        .sum("indicator_l1", tree_l1_norm(&ind).value))
}

/// Indicator kernels of radius 1..=6 and geometric kernels, `q = 2`.
pub fn cheeger_family() -> Vec<RadialTreeKernel> {
    let mut out: Vec<RadialTreeKernel> = (1..=6)
        .filter_map(|r| RadialTreeKernel::indicator(2, r).ok())
        .collect();
    for rho in [0.05, 0.1, 0.2, 0.3, 0.4, 0.45] {
        out.extend(
            RadialTreeKernel::geometric(
                2,
                Complex64::new(rho, 0.0),
                gausshardy::tree_analysis::DEFAULT_DEPTH,
            )
            .ok(),
        );
    }
    out
}

fn tree_cheeger() -> Core<Outcome> {
    let mut table = Table::new(&["kernel", "q", "ratio"]);
    let mut floor = f64::INFINITY;
    for k in cheeger_family() {
        let r = cheeger_ratio(&k)?;
        floor = floor.min(r);
        table.push(vec![json!(k.name), json!(k.q), json!(r)]);
    }
    Ok(Outcome::new(table).sum("min_ratio", floor))
}

fn iso_shell() -> Core<Outcome> {
    let mut table = Table::new(&["base", "kappa", "ratio"]);
    let mut floor = f64::INFINITY;
    for s in shell_family() {
        let r = boundary_shell_ratio(&s)?;
        floor = floor.min(r);
        let base: Vec<String> = s
            .base
            .iter()
            .map(|p| format!("({}, {})", p.lo, p.hi))
            .collect();
        table.push(vec![json!(base.join(" u ")), json!(s.kappa), json!(r)]);
    }
    Ok(Outcome::new(table).sum("min_ratio", floor))
}

fn iso_doubling(a: &IsoArgs) -> Core<Outcome> {
    let n = (a.grid / 0.1).round() as usize;
    let centers: Vec<f64> = (0..=n).map(|k| k as f64 * 0.1).collect();
    let scan = doubling_ratio_scan(&centers, &RadiusGrid::FractionOfMaximal(vec![1.0]))?;
    let mut table = Table::new(&["center", "radius", "ratio"]);
    for r in &scan.rows {
        table.push(vec![json!(r.center), json!(r.radius), json!(r.ratio)]);
    }
    Ok(Outcome::new(table).sum("max_ratio", scan.max_ratio))
}

fn csv_field(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Serializes a result: pretty JSON, or CSV with a header row.
pub fn emit(result: &ExperimentResult, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(result).map_err(|e| invalid(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            w.write_record(&result.meta.columns)
                .map_err(|e| invalid(e.to_string()))?;
            for row in &result.rows {
                let fields: Vec<String> = result
                    .meta
                    .columns
                    .iter()
                    .map(|c| csv_field(row.get(c).unwrap_or(&Value::Null)))
                    .collect();
                w.write_record(&fields)
                    .map_err(|e| invalid(e.to_string()))?;
            }
            w.into_inner().map_err(|e| invalid(e.to_string()))
        }
    }
}

/// Writes `bytes` to `out`, or to standard output.
pub fn write_output(out: Option<&PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

/// Parses, runs and writes; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (payload, err) = match run_experiment(&cli) {
        Ok(r) => (Some(r), None),
        Err(CliError::Convergence { message, partial }) => (Some(*partial), Some(message)),
        Err(e) => {
            eprintln!("gausshardy: {e}");
            return e.exit_code();
        }
    };
    if let Some(r) = payload {
        if let Err(e) = emit(&r, cli.format).and_then(|b| write_output(cli.out.as_ref(), &b)) {
            eprintln!("gausshardy: {e}");
            return e.exit_code();
        }
    }
    match err {
        Some(message) => {
            eprintln!("gausshardy: convergence failure: {message}");
            3
        }
        None => 0,
    }
}
