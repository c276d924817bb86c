use clap::{Parser, Subcommand, ValueEnum};
use factorfit::pipeline::{
    self, fmt_real, render_text, AssociationSection, FactorPopulationSection, PipelineConfig,
    PooledFit, GOF_HEADER,
};
use factorfit::table::ContingencyTable;
use factorfit::Error;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Writes to stdout, treating a closed pipe as a normal end of output so
/// `factorfit ... | head` terminates cleanly instead of panicking.
fn emit_raw(text: &str) {
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stdout.write_all(text.as_bytes()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("cannot write to stdout: {e}");
        std::process::exit(4);
    }
}

macro_rules! out {
    ($($arg:tt)*) => { emit_raw(&format!("{}\n", format_args!($($arg)*))) };
}

/// Analysis toolkit for two-way contingency tables: independence screening,
/// rank-1 factorization, distribution fitting, goodness-of-fit batteries,
/// association fits, entropy, and density curves.
#[derive(Parser)]
#[command(name = "factorfit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// CSV table to analyze (first row column labels, first column row
    /// labels); the embedded dataset when omitted.
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Stdout format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Screening threshold: rows whose contribution has p below this are
    /// withdrawn before the other stages. Use a tiny value to disable.
    #[arg(long, global = true, default_value_t = 0.05)]
    alpha: f64,

    /// Upper bound for integer shape searches.
    #[arg(long, global = true, default_value_t = 64)]
    r_max: u32,

    /// Factorization convergence tolerance.
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol: f64,

    /// Reserved; no stage of the default pipeline draws random numbers.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Chi-square independence test with worst-first row withdrawal.
    Independence,
    /// Rank-1 multiplicative factorization of the screened table.
    Factorize,
    /// Fit one family to the pooled counts of the screened table.
    Fit {
        #[arg(value_enum)]
        family: Family,
    },
    /// Fit and test every applicable family on the pooled counts.
    Gof,
    /// Joint and coupled association fits across counts and series rates.
    Associate,
    /// Gamma fits and differential entropies of the factor populations.
    Entropy,
    /// Run every stage and emit the full report.
    Pipeline,
    /// Write the factor-population density curves as FB.csv, FP.csv, AA.csv.
    Curves {
        /// Directory the three files are written into.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Family {
    Uniform,
    Geometric,
    Logarithmic,
    Negbin,
    Poisson,
}

impl Family {
    fn section_name(self) -> &'static str {
        match self {
            Family::Uniform => "discrete_uniform",
            Family::Geometric => "geometric",
            Family::Logarithmic => "logarithmic",
            Family::Negbin => "negbin",
            Family::Poisson => "poisson",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(match e {
                Error::Numeric { .. } => 4u8,
                _ => 3u8,
            })
        }
    }
}

fn usage_error(message: &str) -> ! {
    eprintln!("{message}");
    std::process::exit(2);
}

fn load_table(cli: &Cli) -> factorfit::Result<ContingencyTable> {
    match &cli.input {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            ContingencyTable::parse_csv(&text)
        }
        None => Ok(ContingencyTable::bundled_dataset()),
    }
}

fn run(cli: &Cli) -> factorfit::Result<()> {
    let table = load_table(cli)?;
    let config = PipelineConfig {
        alpha: cli.alpha,
        r_max: cli.r_max,
        tol: cli.tol,
        seed: cli.seed,
        ..PipelineConfig::default()
    };
    match &cli.command {
        Command::Independence => independence_cmd(&table, &config, cli.format),
        Command::Factorize => factorize_cmd(&table, &config, cli.format),
        Command::Fit { family } => fit_cmd(&table, &config, cli.format, *family),
        Command::Gof => gof_cmd(&table, &config, cli.format),
        Command::Associate => associate_cmd(&table, &config, cli.format),
        Command::Entropy => entropy_cmd(&table, &config, cli.format),
        Command::Pipeline => pipeline_cmd(&table, &config, cli.format),
        Command::Curves { out_dir } => curves_cmd(&table, &config, cli.format, out_dir),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> factorfit::Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::numeric("serialize", e.to_string()))?;
    out!("{text}");
    Ok(())
}

fn independence_cmd(
    table: &ContingencyTable,
    config: &PipelineConfig,
    format: Format,
) -> factorfit::Result<()> {
    let (section, _) = pipeline::screening_stage(table, config.alpha)?;
    match format {
        Format::Json => print_json(&section)?,
        Format::Csv => {
            out!("kind,label,statistic,df,p_value");
            let line = |kind: &str, label: &str, r: &factorfit::independence::ChiSquareResult| {
                out!("{kind},{label},{},{},{}", r.statistic, r.df, r.p_value);
            };
            line("full", "", &section.full);
            for row in &section.row_contributions {
                line("row", &row.label, &row.result);
            }
            for row in &section.removed {
                line("removed", &row.label, &row.result);
            }
            line("reduced", "", &section.reduced);
        }
        Format::Text => {
            let chi = |r: &factorfit::independence::ChiSquareResult| {
                format!(
                    "X2 = {:>9}  df = {:>3}  p = {}",
                    fmt_real(r.statistic),
                    r.df,
                    fmt_real(r.p_value)
                )
            };
            out!("full table       {}", chi(&section.full));
            out!("row contributions:");
            for row in &section.row_contributions {
                out!("  {:<18} {}", row.label, chi(&row.result));
            }
            if section.removed.is_empty() {
                out!("removed: none");
            } else {
                for row in &section.removed {
                    out!("removed {:<18} {}", row.label, chi(&row.result));
                }
            }
            out!("reduced table    {}", chi(&section.reduced));
        }
    }
    Ok(())
}

fn factorize_cmd(
    table: &ContingencyTable,
    config: &PipelineConfig,
    format: Format,
) -> factorfit::Result<()> {
    let (_, retained) = pipeline::screening_stage(table, config.alpha)?;
    let section = pipeline::factor_stage(&retained, config)?;
    match format {
        Format::Json => print_json(&section)?,
        Format::Csv => {
            out!("kind,label,value");
            for (label, v) in section.row_labels.iter().zip(&section.factors.a) {
                out!("row,{label},{v}");
            }
            for (label, v) in section.col_labels.iter().zip(&section.factors.b) {
                out!("col,{label},{v}");
            }
            out!("stat,s_squared,{}", section.factors.s_squared);
        }
        Format::Text => {
            out!(
                "residual S2 = {} after {} iterations ({})",
                fmt_real(section.factors.s_squared),
                section.factors.iterations,
                if section.factors.converged {
                    "converged"
                } else {
                    "iteration cap hit"
                }
            );
            out!("row factors:");
            for (label, v) in section.row_labels.iter().zip(&section.factors.a) {
                out!("  {:<18} {:>9}", label, fmt_real(*v));
            }
            out!("col factors:");
            for (label, v) in section.col_labels.iter().zip(&section.factors.b) {
                out!("  {:<18} {:>9}", label, fmt_real(*v));
            }
        }
    }
    Ok(())
}

fn pooled_fit_text(fit: &PooledFit) {
    let chisq = match &fit.gof.chisq {
        Some(c) => format!(
            "{:>8}({:>2}) {:>9}",
            fmt_real(c.statistic),
            c.df,
            fmt_real(c.p_value)
        ),
        None => format!("{:>12} {:>9}", "-", "-"),
    };
    out!(
        "{:<17} {:<24} {:>10}  {} {}",
        fit.family,
        params_text(&fit.gof_params),
        fmt_real(fit.fit.log_likelihood),
        pipeline::gof_columns(&fit.gof),
        chisq
    );
}

fn pooled_fit_csv(fit: &PooledFit) {
    let (x2, df, px2) = match &fit.gof.chisq {
        Some(c) => (
            c.statistic.to_string(),
            c.df.to_string(),
            c.p_value.to_string(),
        ),
        None => (String::new(), String::new(), String::new()),
    };
    out!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        fit.family,
        params_text(&fit.gof_params).replace(' ', ";"),
        fit.fit.log_likelihood,
        fit.gof.ks_d,
        fit.gof.p_ks,
        fit.gof.ad_a2,
        fit.gof.p_ad,
        x2,
        df,
        px2,
        fit.gof.cs,
        fit.gof.p_cs
    );
}

const POOLED_CSV_HEADER: &str =
    "family,params,log_likelihood,ks_d,p_ks,ad_a2,p_ad,chisq,chisq_df,p_chisq,cs,p_cs";

fn params_text(params: &factorfit::distributions::DistributionParams) -> String {
    use factorfit::distributions::DistributionParams as P;
    match params {
        P::DiscreteUniform(d) => format!("a={} b={}", d.a, d.b),
        P::Geometric(d) => format!("p={}", fmt_real(d.p)),
        P::Logarithmic(d) => format!("theta={}", fmt_real(d.theta)),
        P::Poisson(d) => format!("lambda={}", fmt_real(d.lambda)),
        P::NegBin(d) => format!("r={} p={}", d.r, fmt_real(d.p)),
        P::Gamma(d) => format!("shape={} scale={}", fmt_real(d.shape), fmt_real(d.scale)),
    }
}

fn fit_cmd(
    table: &ContingencyTable,
    config: &PipelineConfig,
    format: Format,
    family: Family,
) -> factorfit::Result<()> {
    let (_, retained) = pipeline::screening_stage(table, config.alpha)?;
    let section = pipeline::pooled_stage(&retained.pooled_values(), config)?;
    let name = family.section_name();
    let Some(fit) = section.fits.iter().find(|f| f.family == name) else {
        let reason = section
            .skipped
            .iter()
            .find(|s| s.family == name)
            .map(|s| s.reason.clone())
            .unwrap_or_else(|| "family not applicable to this sample".into());
        return Err(Error::validation(format!("cannot fit {name}: {reason}")));
    };
    match format {
        Format::Json => print_json(fit)?,
        Format::Csv => {
            out!("{POOLED_CSV_HEADER}");
            pooled_fit_csv(fit);
        }
        Format::Text => {
            out!(
                "{:<17} {:<24} {:>10}  {}    X2(df)      p_X2",
                "family",
                "params",
                "LE",
                GOF_HEADER
            );
            pooled_fit_text(fit);
        }
    }
    Ok(())
}

fn gof_cmd(
    table: &ContingencyTable,
    config: &PipelineConfig,
    format: Format,
) -> factorfit::Result<()> {
    let (_, retained) = pipeline::screening_stage(table, config.alpha)?;
    let section = pipeline::pooled_stage(&retained.pooled_values(), config)?;
    match format {
        Format::Json => print_json(&section)?,
        Format::Csv => {
            out!("{POOLED_CSV_HEADER}");
            for fit in &section.fits {
                pooled_fit_csv(fit);
            }
        }
        Format::Text => {
            out!(
                "pooled counts: n = {}, mean = {}, range {}..{}",
                section.n,
                fmt_real(section.mean),
                section.min,
                section.max
            );
            out!(
                "{:<17} {:<24} {:>10}  {}    X2(df)      p_X2",
                "family",
                "params",
                "LE",
                GOF_HEADER
            );
            for fit in &section.fits {
                pooled_fit_text(fit);
            }
            for sk in &section.skipped {
                out!("skipped {}: {}", sk.family, sk.reason);
            }
            for v in &section.unfittable {
                let verdict = if v.rejected { "no fit" } else { "fit exists" };
                out!("{:?}: {} ({})", v.family, verdict, v.reason);
            }
        }
    }
    Ok(())
}

fn association_text(section: &AssociationSection) {
    out!(
        "joint fit: r = {}  p = {}  LE = {}",
        fmt_real(section.joint.r_a),
        fmt_real(section.joint.p_a),
        fmt_real(section.joint.log_likelihood)
    );
    for row in &section.joint_gof {
        out!(
            "  r = {:<3} p = {}  scale = {}  LE = {}  counts p_KS/p_AD = {}/{}  \
             rates p_KS/p_AD = {}/{}  global p = {}",
            row.r,
            fmt_real(row.p),
            fmt_real(row.scale),
            fmt_real(row.log_likelihood),
            fmt_real(row.counts.p_ks),
            fmt_real(row.counts.p_ad),
            fmt_real(row.rates.p_ks),
            fmt_real(row.rates.p_ad),
            fmt_real(row.global.p_cs)
        );
    }
    out!(
        "coupled fit: r_b = {}  r_p = {}  q = {}  p = {}  LE = {}",
        fmt_real(section.coupled.r_b),
        fmt_real(section.coupled.r_p),
        fmt_real(section.coupled.q),
        fmt_real(section.coupled.p_bp),
        fmt_real(section.coupled.log_likelihood)
    );
    for row in &section.coupled_gof {
        out!(
            "  r_b = {:<3} r_p = {:<3} q = {}  p = {}  LE = {}  rows p_KS/p_AD = {}/{}  \
             cols p_KS/p_AD = {}/{}  global p = {}",
            row.r_b,
            row.r_p,
            fmt_real(row.q),
            fmt_real(row.p),
            fmt_real(row.log_likelihood),
            fmt_real(row.rows.p_ks),
            fmt_real(row.rows.p_ad),
            fmt_real(row.cols.p_ks),
            fmt_real(row.cols.p_ad),
            fmt_real(row.global.p_cs)
        );
    }
}

fn associate_cmd(
    table: &ContingencyTable,
    config: &PipelineConfig,
    format: Format,
) -> factorfit::Result<()> {
    let (_, retained) = pipeline::screening_stage(table, config.alpha)?;
    let series = pipeline::series_stage(&retained)?;
    let row_rates: Vec<f64> = series.rows.iter().map(|f| f.lambda).collect();
    let col_rates: Vec<f64> = series.cols.iter().map(|f| f.lambda).collect();
    let pooled = retained.pooled_values();
    let section = pipeline::association_stage(&pooled, &row_rates, &col_rates, config)?;
    match format {
        Format::Json => print_json(&section)?,
        Format::Csv => {
            out!("kind,r_b,r_p,p,q,scale,log_likelihood,global_p_cs");
            out!(
                "joint,{},,{},,{},{},",
                section.joint.r_a,
                section.joint.p_a,
                section.joint.p_a / (1.0 - section.joint.p_a),
                section.joint.log_likelihood
            );
            for row in &section.joint_gof {
                out!(
                    "joint_natural,{},,{},,{},{},{}",
                    row.r,
                    row.p,
                    row.scale,
                    row.log_likelihood,
                    row.global.p_cs
                );
            }
            out!(
                "coupled,{},{},{},{},,{},",
                section.coupled.r_b,
                section.coupled.r_p,
                section.coupled.p_bp,
                section.coupled.q,
                section.coupled.log_likelihood
            );
            for row in &section.coupled_gof {
                out!(
                    "coupled_natural,{},{},{},{},,{},{}",
                    row.r_b,
                    row.r_p,
                    row.p,
                    row.q,
                    row.log_likelihood,
                    row.global.p_cs
                );
            }
        }
        Format::Text => association_text(&section),
    }
    Ok(())
}

fn population_section(
    table: &ContingencyTable,
    config: &PipelineConfig,
) -> factorfit::Result<FactorPopulationSection> {
    let (_, retained) = pipeline::screening_stage(table, config.alpha)?;
    let factors = pipeline::factor_stage(&retained, config)?;
    pipeline::factor_population_stage(&factors.factors)
}

fn entropy_cmd(
    table: &ContingencyTable,
    config: &PipelineConfig,
    format: Format,
) -> factorfit::Result<()> {
    let section = population_section(table, config)?;
    match format {
        Format::Json => print_json(&section)?,
        Format::Csv => {
            out!("kind,shape,scale,proportion,log_likelihood,entropy,p_ks,p_ad,p_cs");
            for (name, pop) in [("rows", &section.rows), ("cols", &section.cols)] {
                out!(
                    "{name},{},{},{},{},{},{},{},{}",
                    pop.shape,
                    pop.scale,
                    pop.proportion,
                    pop.log_likelihood,
                    pop.entropy,
                    pop.gof.p_ks,
                    pop.gof.p_ad,
                    pop.gof.p_cs
                );
            }
            out!("ratio,,,,,{},,,", section.entropy_ratio);
        }
        Format::Text => {
            for (name, pop) in [("rows", &section.rows), ("cols", &section.cols)] {
                out!(
                    "{name}: shape {}  scale {}  p {}  LE {}  h {}  (p_KS {}, p_AD {}, p_CS {})",
                    fmt_real(pop.shape),
                    fmt_real(pop.scale),
                    fmt_real(pop.proportion),
                    fmt_real(pop.log_likelihood),
                    fmt_real(pop.entropy),
                    fmt_real(pop.gof.p_ks),
                    fmt_real(pop.gof.p_ad),
                    fmt_real(pop.gof.p_cs)
                );
            }
            out!(
                "entropy ratio (cols/rows) = {}",
                fmt_real(section.entropy_ratio)
            );
        }
    }
    Ok(())
}

fn pipeline_cmd(
    table: &ContingencyTable,
    config: &PipelineConfig,
    format: Format,
) -> factorfit::Result<()> {
    if format == Format::Csv {
        usage_error("the pipeline report has no single-table CSV form; use --format json or text");
    }
    let report = pipeline::run_pipeline(table, config)?;
    match format {
        Format::Json => print_json(&report)?,
        Format::Text => emit_raw(&render_text(&report)),
        Format::Csv => unreachable!(),
    }
    Ok(())
}

fn curves_cmd(
    table: &ContingencyTable,
    config: &PipelineConfig,
    format: Format,
    out_dir: &Path,
) -> factorfit::Result<()> {
    let populations = population_section(table, config)?;
    let g_rows = factorfit::distributions::GammaParams {
        shape: populations.rows.shape,
        scale: populations.rows.scale,
    };
    let g_cols = factorfit::distributions::GammaParams {
        shape: populations.cols.shape,
        scale: populations.cols.scale,
    };
    let section = pipeline::curve_stage(&g_rows, &g_cols, config)?;
    std::fs::create_dir_all(out_dir)?;
    let named = [
        ("FB", &section.fb),
        ("FP", &section.fp),
        ("AA", &section.aa),
    ];
    for (name, curve) in named {
        std::fs::write(out_dir.join(format!("{name}.csv")), curve.to_csv())?;
    }
    match format {
        Format::Json => {
            #[derive(serde::Serialize)]
            struct CurveSummary<'a> {
                file: String,
                points: usize,
                mass: f64,
                mean: f64,
                variance: f64,
                method: &'a str,
            }
            let summaries: Vec<CurveSummary> = named
                .iter()
                .map(|(name, curve)| CurveSummary {
                    file: out_dir.join(format!("{name}.csv")).display().to_string(),
                    points: curve.grid.len(),
                    mass: curve.mass,
                    mean: curve.mean(),
                    variance: curve.variance(),
                    method: &section.method,
                })
                .collect();
            print_json(&summaries)?;
        }
        Format::Csv => {
            out!("file,points,mass,mean,variance");
            for (name, curve) in named {
                out!(
                    "{},{},{},{},{}",
                    out_dir.join(format!("{name}.csv")).display(),
                    curve.grid.len(),
                    curve.mass,
                    curve.mean(),
                    curve.variance()
                );
            }
        }
        Format::Text => {
            for (name, curve) in named {
                out!(
                    "wrote {} ({} points, mass {}, mean {})",
                    out_dir.join(format!("{name}.csv")).display(),
                    curve.grid.len(),
                    fmt_real(curve.mass),
                    fmt_real(curve.mean())
                );
            }
        }
    }
    Ok(())
}
