//! `segcs`: bound sweeps, sequence groups, sampling matrices, oracle checks
//! and recovery experiments for segmented compressive sampling.
//!
//! Every output starts with a `#`-prefixed manifest. Nothing in it depends on
//! the wall clock; the timestamp comes from `SOURCE_DATE_EPOCH` when set.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use segcs::bounds::{db_to_linear, rate_distortion_sparse, BoundQuery, SweepRow};
use segcs::export::{sequence_provenance, write_dense};
use segcs::permgroup::{congruence_groups, cyclic_grouping, groups_to_text};
use segcs::recovery::{mse_experiment, DistortionReport, RecoveryConfig, Solver};
use segcs::rng::DEFAULT_SEED;
use segcs::sampler::{generate, EntryDistribution, MatrixSpec, SignalModel};
use segcs::verify::{self, Suite, VerifyOptions};
use segcs::{Extension, Ratio};

#[derive(Parser, Debug)]
#[command(name = "segcs", version, about = "Segmented compressive sampling toolkit")]
struct Cli {
    /// Directory for output files; without it results go to stdout.
    #[arg(long, global = true, env = "SEGCS_OUT_DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Capacity and sampling-rate bound sweeps.
    Bounds(BoundsArgs),
    /// Segment-source sequence groups.
    Groups(GroupsArgs),
    /// Draw a segmented sampling matrix.
    Matrix(MatrixArgs),
    /// Run the oracle suites; exits 1 if any check fails.
    Verify(VerifyArgs),
    /// Paired sparse-recovery experiment across extension rates.
    Recover(RecoverArgs),
}

#[derive(Args, Debug)]
struct BoundsArgs {
    /// Parameter preset for figures 4 to 8.
    #[arg(long, value_parser = clap::value_parser!(u8).range(4..=8))]
    figure: Option<u8>,
    /// SNR values in dB; items may be ranges `start:stop:step`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "gamma")]
    gamma_db: Vec<String>,
    /// Linear SNR values.
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    /// Extension rates, e.g. `0,1/3,1,5`.
    #[arg(long, visible_alias = "alphas", value_delimiter = ',')]
    alpha: Vec<Ratio>,
    #[arg(long, default_value_t = 3)]
    m_o: usize,
    /// Signal lengths.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Rate-distortion value in bits per symbol.
    #[arg(long, conflicts_with = "sparsity_ratio")]
    rd: Option<f64>,
    /// Derive R(D) from the sparsity ratio s/n of a spike signal.
    #[arg(long)]
    sparsity_ratio: Option<f64>,
}

#[derive(Args, Debug)]
struct GroupsArgs {
    #[arg(long)]
    m_o: usize,
    /// Number of congruence groups (prime m_o); omit for the full cyclic partition.
    #[arg(long)]
    alpha: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Distribution {
    Gaussian,
    Rademacher,
}

impl From<Distribution> for EntryDistribution {
    fn from(d: Distribution) -> Self {
        match d {
            Distribution::Gaussian => EntryDistribution::Gaussian,
            Distribution::Rademacher => EntryDistribution::Rademacher,
        }
    }
}

#[derive(Args, Debug)]
struct MatrixArgs {
    #[arg(long)]
    m_o: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "0")]
    alpha: Ratio,
    #[arg(long, value_enum, default_value_t = Distribution::Gaussian)]
    distribution: Distribution,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(value_parser = ["groups", "covariance", "capacity", "all"])]
    suite: String,
    #[arg(long)]
    m_o: Option<usize>,
    /// Restrict covariance/capacity checks to one extension rate (needs --m-o).
    #[arg(long, requires = "m_o")]
    alpha: Option<Ratio>,
    /// Restrict to one linear SNR (signal variance).
    #[arg(long, conflicts_with = "gamma_db")]
    gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma_db: Option<f64>,
    /// Minimal grid for a quick smoke run.
    #[arg(long)]
    small: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverArg {
    Omp,
    Ista,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    #[arg(long, default_value_t = 32)]
    m_o: usize,
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// Number of spikes in the signal; also the OMP atom budget.
    #[arg(long, default_value_t = 3)]
    s: usize,
    #[arg(long, visible_alias = "alphas", value_delimiter = ',', default_value = "0,1")]
    alpha: Vec<Ratio>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Per-sample SNR in dB; sets the spike amplitude to sqrt(gamma n / s).
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    gamma_db: f64,
    #[arg(long, value_enum, default_value_t = SolverArg::Omp)]
    solver: SolverArg,
    #[arg(long, value_enum, default_value_t = Distribution::Gaussian)]
    distribution: Distribution,
    #[arg(long)]
    seed: Option<u64>,
}

/// Invalid parameter combination; reported with exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

struct Manifest {
    lines: Vec<String>,
}

impl Manifest {
    fn new(subcommand: &str) -> Self {
        let timestamp = std::env::var("SOURCE_DATE_EPOCH").unwrap_or_else(|_| "unset".into());
        Self {
            lines: vec![
                format!("segcs {subcommand}"),
                format!("version: {}", env!("CARGO_PKG_VERSION")),
                format!("timestamp: {timestamp}"),
            ],
        }
    }

    fn param(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.lines.push(format!("{key}: {value}"));
        self
    }

    fn seed(&mut self, seed: Option<u64>) -> u64 {
        let resolved = seed.unwrap_or(DEFAULT_SEED);
        let note = if seed.is_none() { " (default)" } else { "" };
        self.lines.push(format!("seed: {resolved}{note}"));
        resolved
    }

    fn render(&self, output: &str) -> String {
        let mut out = String::new();
        for l in &self.lines {
            let _ = writeln!(out, "# {l}");
        }
        let _ = writeln!(out, "# output: {output}");
        out
    }
}

/// Writes named artifacts into the output directory, or concatenates them on stdout.
struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    fn emit(&self, manifest: &Manifest, name: &str, body: &str) -> anyhow::Result<()> {
        match &self.dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(name);
                let text = manifest.render(name) + body;
                std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
            None => print!("{}{}", manifest.render("stdout"), body),
        }
        Ok(())
    }
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn expand_db_grid(items: &[String]) -> anyhow::Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in items {
        let parts: Vec<&str> = item.split(':').collect();
        let num = |s: &str| -> anyhow::Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("bad SNR value '{s}'")))
        };
        match parts[..] {
            [v] => out.push(num(v)?),
            [a, b, step] => {
                let (a, b, step) = (num(a)?, num(b)?, num(step)?);
                if step.is_nan() || step <= 0.0 || b < a {
                    return Err(usage(format!(
                        "bad SNR range '{item}': need start <= stop and step > 0"
                    )));
                }
                let count = ((b - a) / step + 1e-9).floor() as usize;
                out.extend((0..=count).map(|i| a + i as f64 * step));
            }
            _ => return Err(usage(format!("bad SNR item '{item}': use a value or start:stop:step"))),
        }
    }
    Ok(out)
}

/// `(dB label, linear)` pairs; the label is kept as given so columns stay exact.
type SnrGrid = Vec<(Option<f64>, f64)>;

struct Sweep {
    snr: SnrGrid,
    alphas: Vec<Ratio>,
    m_o: usize,
    ns: Vec<usize>,
    rd: f64,
    /// Continuous single-group samples `alpha = i / steps`.
    continuous_steps: Option<usize>,
}

fn sweep_rows(s: &Sweep) -> anyhow::Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for alpha in &s.alphas {
        let extension = Extension::from_ratio(*alpha, s.m_o).map_err(|e| {
            usage(format!(
                "{e}; alpha <= 1 must be a multiple of 1/m_o, alpha > 1 an integer below m_o"
            ))
        })?;
        for &n in &s.ns {
            for &(db, gamma) in &s.snr {
                let q = BoundQuery {
                    gamma,
                    m_o: s.m_o,
                    n,
                    rd: s.rd,
                    extension,
                };
                let mut row = SweepRow::from_query(&q).map_err(|e| usage(e.to_string()))?;
                if let Some(db) = db {
                    row.gamma_db = db;
                }
                rows.push(row.fields().to_vec());
            }
        }
    }
    if let Some(steps) = s.continuous_steps {
        for &n in &s.ns {
            for &(db, gamma) in &s.snr {
                for i in 0..=steps {
                    let mut row = SweepRow::single_continuous(gamma, i as f64 / steps as f64, s.m_o, n, s.rd)
                        .map_err(|e| usage(e.to_string()))?;
                    if let Some(db) = db {
                        row.gamma_db = db;
                    }
                    rows.push(row.fields().to_vec());
                }
            }
        }
    }
    Ok(rows)
}

fn ratio(text: &str) -> Ratio {
    text.parse().expect("preset ratio")
}

fn figure_preset(figure: u8, m: &mut Manifest) -> Sweep {
    match figure {
        4 | 5 => {
            let plot = if figure == 4 {
                "capacity_ub vs alpha"
            } else {
                "delta_o_lb vs alpha"
            };
            m.param("figure", format!("{figure} ({plot})"))
                .param("gamma_db", 20)
                .param("m_o", 3)
                .param("n", 100)
                .param("rd", 0.2)
                .param("alpha", "0,1/3,2/3,1 (single_group rows)")
                .param("continuous", "alpha = i/100, i = 0..=100 (continuous rows)");
            Sweep {
                snr: vec![(Some(20.0), db_to_linear(20.0))],
                alphas: ["0", "1/3", "2/3", "1"].map(ratio).to_vec(),
                m_o: 3,
                ns: vec![100],
                rd: 0.2,
                continuous_steps: Some(100),
            }
        }
        _ => {
            let (n, plot) = match figure {
                6 => (100_000, "delta_lb vs gamma_db"),
                7 => (10_000_000, "delta_lb vs gamma_db"),
                _ => (10_000_000, "delta_o_lb vs gamma_db"),
            };
            m.param("figure", format!("{figure} ({plot})"))
                .param("gamma_db", "0:30:1")
                .param("m_o", 7)
                .param("n", n)
                .param("rd", 0.0013)
                .param("alpha", "0,1,5");
            Sweep {
                snr: (0..=30).map(|d| (Some(d as f64), db_to_linear(d as f64))).collect(),
                alphas: ["0", "1", "5"].map(ratio).to_vec(),
                m_o: 7,
                ns: vec![n],
                rd: 0.0013,
                continuous_steps: None,
            }
        }
    }
}

fn cmd_bounds(a: &BoundsArgs, sink: &Sink) -> anyhow::Result<ExitCode> {
    let mut m = Manifest::new("bounds");
    let sweep = if let Some(fig) = a.figure {
        if !a.gamma_db.is_empty() || !a.gamma.is_empty() || !a.alpha.is_empty() || !a.n.is_empty() || a.rd.is_some() {
            return Err(usage("--figure fixes every sweep parameter; drop the other grid flags"));
        }
        figure_preset(fig, &mut m)
    } else {
        let rd = match (a.rd, a.sparsity_ratio) {
            (Some(rd), _) => rd,
            (None, Some(r)) => rate_distortion_sparse(r).map_err(|e| usage(e.to_string()))?,
            (None, None) => return Err(usage("one of --rd or --sparsity-ratio is required")),
        };
        let snr: SnrGrid = if !a.gamma.is_empty() {
            a.gamma.iter().map(|&g| (None, g)).collect()
        } else if !a.gamma_db.is_empty() {
            expand_db_grid(&a.gamma_db)?
                .into_iter()
                .map(|d| (Some(d), db_to_linear(d)))
                .collect()
        } else {
            return Err(usage("one of --gamma-db or --gamma is required"));
        };
        let alphas = if a.alpha.is_empty() {
            vec![ratio("0")]
        } else {
            a.alpha.clone()
        };
        let ns = if a.n.is_empty() { vec![100] } else { a.n.clone() };
        if a.gamma.is_empty() {
            m.param("gamma_db", a.gamma_db.join(","));
        } else {
            m.param("gamma", join(&a.gamma));
        }
        m.param("alpha", join(&alphas))
            .param("m_o", a.m_o)
            .param("n", join(&ns));
        if let Some(r) = a.sparsity_ratio {
            m.param("sparsity_ratio", r);
        }
        m.param("rd", rd);
        Sweep {
            snr,
            alphas,
            m_o: a.m_o,
            ns,
            rd,
            continuous_steps: None,
        }
    };
    let name = a
        .figure
        .map_or_else(|| "bounds.csv".to_string(), |f| format!("figure{f}.csv"));
    let body = csv_text(&SweepRow::HEADER, sweep_rows(&sweep)?)?;
    sink.emit(&m, &name, &body)?;
    Ok(ExitCode::SUCCESS)
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn cmd_groups(a: &GroupsArgs, sink: &Sink) -> anyhow::Result<ExitCode> {
    let mut m = Manifest::new("groups");
    m.param("m_o", a.m_o);
    let text = match a.alpha {
        Some(alpha) => {
            m.param("construction", "congruence").param("alpha", alpha);
            congruence_groups(a.m_o, alpha)
                .map_err(|e| usage(e.to_string()))?
                .to_text()
        }
        None => {
            m.param("construction", "cyclic partition");
            groups_to_text(&cyclic_grouping(a.m_o).map_err(|e| usage(e.to_string()))?)
        }
    };
    sink.emit(&m, "groups.txt", &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_matrix(a: &MatrixArgs, sink: &Sink) -> anyhow::Result<ExitCode> {
    let mut m = Manifest::new("matrix");
    let seed = m.seed(a.seed);
    let extension = Extension::from_ratio(a.alpha, a.m_o).map_err(|e| usage(e.to_string()))?;
    m.param("m_o", a.m_o)
        .param("n", a.n)
        .param("alpha", a.alpha)
        .param("case", extension.case_name())
        .param("distribution", format!("{:?}", a.distribution).to_lowercase());
    let spec = MatrixSpec::new(a.m_o, a.n, a.distribution.into(), seed).map_err(|e| usage(e.to_string()))?;
    let sequences = extension.sequences(a.m_o).map_err(|e| usage(e.to_string()))?;
    let matrix = generate(&spec, &sequences).map_err(|e| usage(e.to_string()))?;
    sink.emit(&m, "matrix.txt", &write_dense(&matrix.full()))?;
    sink.emit(&m, "sequences.csv", &sequence_provenance(&matrix))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: &VerifyArgs, sink: &Sink) -> anyhow::Result<ExitCode> {
    let suite: Suite = a.suite.parse().map_err(|e: segcs::Error| usage(e.to_string()))?;
    let mut m = Manifest::new("verify");
    m.param("suite", &a.suite).param("small", a.small);
    let extension = match (a.alpha, a.m_o) {
        (Some(alpha), Some(m_o)) => {
            m.param("alpha", alpha);
            Some(Extension::from_ratio(alpha, m_o).map_err(|e| usage(e.to_string()))?)
        }
        _ => None,
    };
    if let Some(m_o) = a.m_o {
        m.param("m_o", m_o);
    }
    let gamma = a.gamma.or(a.gamma_db.map(db_to_linear));
    if let Some(g) = gamma {
        m.param("gamma", g);
    }
    let opts = VerifyOptions {
        m_o: a.m_o,
        extension,
        gamma,
        small: a.small,
    };
    let checks = verify::run(suite, &opts).map_err(|e| usage(e.to_string()))?;
    for c in &checks {
        eprintln!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    eprintln!("{} checks, {} failed", checks.len(), failed);
    let rows = checks.iter().map(|c| {
        vec![
            if c.passed { "pass" } else { "fail" }.to_string(),
            c.suite.to_string(),
            c.name.clone(),
            c.detail.clone(),
        ]
    });
    sink.emit(
        &m,
        "verify.csv",
        &csv_text(&["status", "suite", "check", "detail"], rows)?,
    )?;
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn report_rows(r: &DistortionReport) -> Vec<Vec<String>> {
    let alpha = r.alpha.to_string();
    let mut rows: Vec<Vec<String>> = r
        .outcomes
        .iter()
        .map(|o| {
            vec![
                alpha.clone(),
                o.trial.to_string(),
                o.distortion.map(|d| d.to_string()).unwrap_or_default(),
                o.converged.to_string(),
            ]
        })
        .collect();
    let converged = r.outcomes.iter().filter(|o| o.converged).count();
    rows.push(vec![
        alpha.clone(),
        "mean".into(),
        r.mean.to_string(),
        format!("{converged}/{}", r.outcomes.len()),
    ]);
    rows.push(vec![
        alpha.clone(),
        "std_err".into(),
        r.std_err.to_string(),
        String::new(),
    ]);
    rows.push(vec![alpha, "failures".into(), r.failures.to_string(), String::new()]);
    rows
}

fn cmd_recover(a: &RecoverArgs, sink: &Sink) -> anyhow::Result<ExitCode> {
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if a.s == 0 || a.s > a.n {
        return Err(usage(format!("--s must lie in 1..={}", a.n)));
    }
    let mut m = Manifest::new("recover");
    let seed = m.seed(a.seed);
    let extensions: Vec<Extension> = a
        .alpha
        .iter()
        .map(|r| Extension::from_ratio(*r, a.m_o))
        .collect::<segcs::Result<_>>()
        .map_err(|e| usage(e.to_string()))?;
    let gamma = db_to_linear(a.gamma_db);
    let amplitude = (gamma * a.n as f64 / a.s as f64).sqrt();
    let solver = match a.solver {
        SolverArg::Omp => Solver::Omp,
        SolverArg::Ista => Solver::ista_default(),
    };
    m.param("m_o", a.m_o)
        .param("n", a.n)
        .param("s", a.s)
        .param("alpha", join(&a.alpha))
        .param("trials", a.trials)
        .param("gamma_db", a.gamma_db)
        .param("spike_amplitude", amplitude)
        .param("noise_std", 1)
        .param("solver", format!("{solver:?}"))
        .param("distribution", format!("{:?}", a.distribution).to_lowercase());
    let base = MatrixSpec::new(a.m_o, a.n, a.distribution.into(), seed).map_err(|e| usage(e.to_string()))?;
    let signal = SignalModel::sparse_spikes(a.s, amplitude, a.n);
    let config = RecoveryConfig {
        solver,
        sparsity: a.s,
        trials: a.trials,
        seed,
        noise_std: 1.0,
    };
    let reports = mse_experiment(&base, &signal, &extensions, &config).map_err(|e| usage(e.to_string()))?;
    let rows = reports.iter().flat_map(report_rows);
    sink.emit(
        &m,
        "recover.csv",
        &csv_text(&["alpha", "trial", "distortion", "converged"], rows)?,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    let sink = Sink { dir: cli.out.clone() };
    match &cli.command {
        Command::Bounds(a) => cmd_bounds(a, &sink),
        Command::Groups(a) => cmd_groups(a, &sink),
        Command::Matrix(a) => cmd_matrix(a, &sink),
        Command::Verify(a) => cmd_verify(a, &sink),
        Command::Recover(a) => cmd_recover(a, &sink),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_grid_expansion() {
        let g = expand_db_grid(&["0:30:1".into()]).unwrap();
        assert_eq!(g.len(), 31);
        assert_eq!(g[30], 30.0);
        assert_eq!(expand_db_grid(&["5".into(), "-3".into()]).unwrap(), vec![5.0, -3.0]);
        assert!(expand_db_grid(&["3:1:1".into()]).is_err());
        assert!(expand_db_grid(&["x".into()]).is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
