use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lcirt::estimation::{fit_model, FitOptions, InitStrategy};
use lcirt::inference::{
    posterior_classify, predict_item_probs, select_classes, standard_errors, standardize_fit, test_group_homogeneity,
    test_ignorability, NestedTest, TestReport,
};
use lcirt::rng::DEFAULT_SEED;
use lcirt::simulate::generate;
use serde::Serialize;

use crate::data::{read_dataset, write_to, Table};
use crate::design::Design;
use crate::error::{CliError, CliResult};
use crate::output::{load_fit, num, se_rows, write_json, write_table, FitOutput, FitSummary, InputRecord, RunConfig};
use crate::params::load_params;

#[derive(Debug, Parser)]
#[command(name = "lcirt", version, about = "Latent-class IRT with non-ignorable missingness")]
pub struct Cli {
    /// Maximum worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset from a design and parameter values.
    Simulate(SimulateArgs),
    /// Fit the model and write estimates, standard errors and BIC.
    Fit(FitArgs),
    /// Fit a grid of class counts and flag the BIC-minimal model.
    Select(SelectArgs),
    /// Likelihood-ratio test of ignorable answering (gamma_u = 0).
    TestIgnorability(TestArgs),
    /// Likelihood-ratio test that the items of one group share parameters.
    TestHomogeneity(HomogeneityArgs),
    /// Tabulate passing and answering probabilities from a fit.
    Predict(PredictArgs),
    /// Posterior class memberships from a fit.
    Classify(ClassifyArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub design: PathBuf,
    /// Parameter file (.toml or .json) or a fit result.
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the generating classes of every subject.
    #[arg(long)]
    pub classes_out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct EstimationArgs {
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Total EM runs; the first uses `--init`, the others random starts.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// `deterministic` or `random`.
    #[arg(long, default_value = "deterministic")]
    pub init: String,
}

impl EstimationArgs {
    pub fn options(&self) -> CliResult<FitOptions> {
        let init_strategy: InitStrategy = self.init.parse()?;
        let opts = FitOptions {
            max_iter: self.max_iter,
            tol: self.tol,
            n_restarts: self.restarts,
            seed: self.seed,
            init_strategy,
            ..FitOptions::default()
        };
        opts.validate()?;
        Ok(opts)
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Override the design's number of U-classes.
    #[arg(long)]
    pub ku: Option<usize>,
    /// Override the design's number of V-classes.
    #[arg(long)]
    pub kv: Option<usize>,
    /// Skip standard errors.
    #[arg(long)]
    pub no_se: bool,
    #[command(flatten)]
    pub estimation: EstimationArgs,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Range such as `2..5` (inclusive) or a list `2,3,4`.
    #[arg(long)]
    pub ku: String,
    #[arg(long)]
    pub kv: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub estimation: EstimationArgs,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub estimation: EstimationArgs,
}

#[derive(Debug, Args)]
pub struct HomogeneityArgs {
    /// Group label of the items to tie.
    #[arg(long)]
    pub block: String,
    #[command(flatten)]
    pub test: TestArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub fit: PathBuf,
    /// Comma-separated U values, e.g. `-1,0,1`.
    #[arg(long, allow_hyphen_values = true)]
    pub u: String,
    /// Comma-separated V values.
    #[arg(long, allow_hyphen_values = true, default_value = "-1,0,1")]
    pub v: String,
    /// Lowest category counted as passing.
    #[arg(long, default_value_t = 2)]
    pub pass: usize,
    /// Use raw instead of standardized parameters.
    #[arg(long)]
    pub raw: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `a..b` (inclusive), `a,b,c` or `a`.
pub fn parse_range(text: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::user("arguments", format!("`{text}` is not a range like 2..5 or a list like 2,3"));
    let t = text.trim();
    let out: Vec<usize> = if let Some((a, b)) = t.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        t.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<CliResult<_>>()?
    };
    if out.is_empty() || out.contains(&0) {
        return Err(bad());
    }
    Ok(out)
}

pub fn parse_values(text: &str) -> CliResult<Vec<f64>> {
    let out = text
        .split(',')
        .map(|s| match s.trim().parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(CliError::user("arguments", format!("`{s}` is not a number"))),
        })
        .collect::<CliResult<Vec<f64>>>()?;
    if out.is_empty() {
        return Err(CliError::user("arguments", "empty value list"));
    }
    Ok(out)
}

fn design_config(command: &str, seed: u64, threads: Option<usize>, design_path: &Path) -> CliResult<(RunConfig, Design)> {
    let text = std::fs::read_to_string(design_path).map_err(|e| CliError::io(design_path, e))?;
    let design = Design::parse(&text, design_path)?;
    let mut config = RunConfig::new(command, seed, threads);
    config.design = Some(text);
    config.inputs.insert("design".into(), InputRecord::of(design_path)?);
    Ok((config, design))
}

fn load_data(config: &mut RunConfig, path: &Path, design: &Design) -> CliResult<Table> {
    let table = read_dataset(path, design)?;
    config.inputs.insert("data".into(), InputRecord::of(path)?);
    Ok(table)
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("options serialize")
}

/// Runs a parsed command line. Returns a short JSON summary for stdout.
pub fn run(cli: &Cli) -> CliResult<serde_json::Value> {
    let threads = cli.threads;
    match &cli.command {
        Command::Simulate(a) => simulate(a, threads),
        Command::Fit(a) => fit(a, threads),
        Command::Select(a) => select(a, threads),
        Command::TestIgnorability(a) => test(a, None, threads),
        Command::TestHomogeneity(a) => test(&a.test, Some(&a.block), threads),
        Command::Predict(a) => predict(a, threads),
        Command::Classify(a) => classify(a, threads),
    }
}

fn simulate(a: &SimulateArgs, threads: Option<usize>) -> CliResult<serde_json::Value> {
    let (mut config, design) = design_config("simulate", a.seed, threads, &a.design)?;
    config.inputs.insert("params".into(), InputRecord::of(&a.params)?);
    config.options = serde_json::json!({ "n": a.n });
    let spec = design.spec()?;
    let params = load_params(&a.params, &spec, design.n_cov())?;
    let sim_spec = design.simulation_spec()?;
    let sim = generate(&params, &spec.design, &spec.config, a.n, &sim_spec, a.seed)?;
    let width = a.n.to_string().len();
    let ids: Vec<String> = (1..=a.n).map(|i| format!("s{i:0width$}")).collect();
    let table = Table { ids: ids.clone(), data: sim.data };
    let line = serde_json::to_string(&config).map_err(|e| CliError::Internal(e.to_string()))?;
    let mut bytes = format!("# config: {line}\n").into_bytes();
    write_to(&mut bytes, &design, &table).map_err(|e| CliError::io(&a.out, e))?;
    std::fs::write(&a.out, bytes).map_err(|e| CliError::io(&a.out, e))?;
    if let Some(path) = &a.classes_out {
        let rows: Vec<Vec<String>> = (0..a.n)
            .map(|i| vec![ids[i].clone(), (sim.class_u[i] + 1).to_string(), (sim.class_v[i] + 1).to_string()])
            .collect();
        write_table(path, &config, &["id".into(), "class_u".into(), "class_v".into()], &rows)?;
    }
    Ok(serde_json::json!({ "command": "simulate", "out": a.out, "n": a.n, "seed": a.seed }))
}

fn fit(a: &FitArgs, threads: Option<usize>) -> CliResult<serde_json::Value> {
    let e = &a.estimation;
    let (mut config, design) = design_config("fit", e.seed, threads, &a.design)?;
    let options = e.options()?;
    let k_u = a.ku.unwrap_or(design.k_u);
    let k_v = a.kv.unwrap_or(design.k_v);
    config.options = serde_json::json!({ "fit": to_json(&options), "k_u": k_u, "k_v": k_v, "standard_errors": !a.no_se });
    let table = load_data(&mut config, &a.data, &design)?;
    let spec = design.spec_for(k_u, k_v)?;
    let result = fit_model(&spec, &table.data, &options, &[])?;
    let standardized = standardize_fit(&result.params, &spec.design, &table.data).ok();
    let (rows, asym, pd) = if a.no_se {
        (Vec::new(), 0.0, false)
    } else {
        let se = standard_errors(&result.params, &spec.design, &table.data)?;
        (se_rows(&se), se.hessian.max_asymmetry, se.hessian.positive_definite)
    };
    let summary = FitSummary::of(&result);
    let out = FitOutput {
        config,
        summary: summary.clone(),
        trace: result.trace,
        params: result.params,
        standardized,
        standard_errors: rows,
        hessian_max_asymmetry: asym,
        hessian_positive_definite: pd,
    };
    write_json(&a.out, &out)?;
    Ok(serde_json::json!({
        "command": "fit", "out": a.out, "loglik": summary.loglik, "npar": summary.npar,
        "bic": summary.bic, "converged": summary.converged,
    }))
}

fn select(a: &SelectArgs, threads: Option<usize>) -> CliResult<serde_json::Value> {
    let e = &a.estimation;
    let (mut config, design) = design_config("select", e.seed, threads, &a.design)?;
    let options = e.options()?;
    let ku = parse_range(&a.ku)?;
    let kv = parse_range(&a.kv)?;
    config.options = serde_json::json!({ "fit": to_json(&options), "k_u": ku, "k_v": kv });
    let table = load_data(&mut config, &a.data, &design)?;
    let s = design.items.u_dims;
    let grid = select_classes(&design.items, s, &table.data, &ku, &kv, &options)?;
    let header: Vec<String> = ["k_u", "k_v", "loglik", "npar", "bic", "converged", "selected"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = grid
        .rows
        .iter()
        .map(|r| {
            vec![
                r.k_u.to_string(),
                r.k_v.to_string(),
                format!("{:.3}", r.loglik),
                r.npar.to_string(),
                format!("{:.3}", r.bic),
                r.converged.to_string(),
                r.selected.to_string(),
            ]
        })
        .collect();
    write_table(&a.out, &config, &header, &rows)?;
    let best = grid.best().map(|r| (r.k_u, r.k_v));
    Ok(serde_json::json!({ "command": "select", "out": a.out, "selected": best }))
}

#[derive(Serialize)]
struct TestOutput<'a> {
    config: RunConfig,
    test: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    block: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    items: Option<Vec<String>>,
    report: TestReport,
    full: FitSummary,
    restricted: FitSummary,
}

fn test(a: &TestArgs, block: Option<&str>, threads: Option<usize>) -> CliResult<serde_json::Value> {
    let e = &a.estimation;
    let name = if block.is_some() { "test-homogeneity" } else { "test-ignorability" };
    let (mut config, design) = design_config(name, e.seed, threads, &a.design)?;
    let options = e.options()?;
    config.options = serde_json::json!({ "fit": to_json(&options), "block": block });
    let table = load_data(&mut config, &a.data, &design)?;
    let spec = design.spec()?;
    let nested: NestedTest = match block {
        None => test_ignorability(&spec.design, &spec.config, &table.data, &options)?,
        Some(b) => {
            if !design.items.group_labels().iter().any(|g| g == b) {
                return Err(CliError::user("arguments", format!("no items carry group `{b}`")));
            }
            test_group_homogeneity(&spec.design, &spec.config, &table.data, b, &options)?
        }
    };
    let items = block.map(|b| design.items.group_items(b).iter().map(|&j| design.items.names[j].clone()).collect());
    let out = TestOutput {
        config,
        test: if block.is_some() { "group_homogeneity" } else { "ignorability" },
        block,
        items,
        report: nested.report.clone(),
        full: FitSummary::of(&nested.full),
        restricted: FitSummary::of(&nested.restricted),
    };
    write_json(&a.out, &out)?;
    let r = &nested.report;
    Ok(serde_json::json!({ "command": name, "out": a.out, "statistic": r.statistic, "df": r.df, "p_value": r.p_value }))
}

fn predict(a: &PredictArgs, threads: Option<usize>) -> CliResult<serde_json::Value> {
    let loaded = load_fit(&a.fit, None)?;
    let fit = &loaded.output;
    let u = parse_values(&a.u)?;
    let v = parse_values(&a.v)?;
    let mut config = RunConfig::new("predict", fit.config.seed, threads);
    config.design = fit.config.design.clone();
    config.inputs.insert("fit".into(), InputRecord::of(&a.fit)?);
    let (params, scale) = match (&fit.standardized, a.raw) {
        (Some(s), false) => (s, "standardized"),
        _ => (&fit.params, "raw"),
    };
    config.options = serde_json::json!({ "u": u, "v": v, "pass": a.pass, "scale": scale });
    let spec = loaded.design.spec_for(fit.summary.k_u, fit.summary.k_v)?;
    let tables = predict_item_probs(params, &spec.design, &u, &v, a.pass)?;
    let v_side = params.v_enabled();
    let mut header: Vec<String> = vec!["item".into(), "group".into()];
    header.extend(u.iter().map(|x| format!("pass_u={x}")));
    header.push("pass_range".into());
    let v_cols: &[f64] = if v_side { &tables.v_values } else { &[] };
    for x in &u {
        if v_side {
            header.extend(v_cols.iter().map(|y| format!("answer_u={x}_v={y}")));
        } else {
            header.push(format!("answer_u={x}"));
        }
    }
    header.push("answer_range_u".into());
    if v_side {
        header.push("answer_range_v".into());
    }
    let rows: Vec<Vec<String>> = tables
        .items
        .iter()
        .map(|it| {
            let mut r = vec![it.name.clone(), it.group.clone().unwrap_or_default()];
            r.extend(it.tail.iter().map(|&p| num(p)));
            r.push(num(it.tail_range));
            for row in &it.answer.probs {
                r.extend(row.iter().map(|&p| num(p)));
            }
            r.push(num(it.answer.range_u));
            if v_side {
                r.push(num(it.answer.range_v));
            }
            r
        })
        .collect();
    write_table(&a.out, &config, &header, &rows)?;
    Ok(serde_json::json!({ "command": "predict", "out": a.out, "scale": scale }))
}

fn classify(a: &ClassifyArgs, threads: Option<usize>) -> CliResult<serde_json::Value> {
    let text = std::fs::read_to_string(&a.fit).map_err(|e| CliError::io(&a.fit, e))?;
    // the design is needed to read the data before the full self-check
    let design_text: Option<String> = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .and_then(|v| v["config"]["design"].as_str().map(String::from));
    let design = Design::parse(&design_text.unwrap_or_default(), &a.fit)?;
    let table = read_dataset(&a.data, &design)?;
    let loaded = load_fit(&a.fit, Some((&a.data, &table)))?;
    let fit = &loaded.output;
    let mut config = RunConfig::new("classify", fit.config.seed, threads);
    config.design = fit.config.design.clone();
    config.inputs.insert("fit".into(), InputRecord::of(&a.fit)?);
    config.inputs.insert("data".into(), InputRecord::of(&a.data)?);
    config.options = serde_json::json!({ "loglik_verified": loaded.loglik_verified });
    let spec = loaded.design.spec_for(fit.summary.k_u, fit.summary.k_v)?;
    let c = posterior_classify(&fit.params, &spec.design, &table.data);
    let (ku, kv) = (fit.params.k_u, fit.params.k_v);
    let mut header: Vec<String> = vec!["id".into(), "class_u".into(), "class_v".into()];
    header.extend((1..=ku).map(|h| format!("post_u_{h}")));
    header.extend((1..=kv).map(|h| format!("post_v_{h}")));
    let rows: Vec<Vec<String>> = (0..table.data.n)
        .map(|i| {
            let mut r = vec![table.ids[i].clone(), (c.map_u[i] + 1).to_string(), (c.map_v[i] + 1).to_string()];
            r.extend(c.post_u[i].iter().map(|&p| num(p)));
            r.extend(c.post_v[i].iter().map(|&p| num(p)));
            r
        })
        .collect();
    write_table(&a.out, &config, &header, &rows)?;
    Ok(serde_json::json!({ "command": "classify", "out": a.out, "loglik_verified": loaded.loglik_verified }))
}
