use crate::{Cli, CmdError, Command};
use nmm_core::fit::{bic, q_fit, Dataset, FitConfig, FitError};
use nmm_core::params::ParamError;
use nmm_core::search::{tabu_search, SearchConfig};
use nmm_core::sim::{
    random_parameters, recovery_csv, recovery_experiment, trial_parameter_seed,
    FaithfulnessConfig, SimModel,
};
use nmm_core::{Admg, KernelTable, Parameterization};
use std::path::Path;

pub(crate) fn run(cli: &Cli) -> Result<(), CmdError> {
    match &cli.command {
        Command::Fit { graph, data } => cmd_fit(cli, graph, data, false),
        Command::Score { graph, data } => cmd_fit(cli, graph, data, true),
        Command::Search { data, start, max_expansions } => {
            cmd_search(cli, data, start.as_deref(), *max_expansions)
        }
        Command::Simulate { model, sizes, reps, gap, edge_gap, alpha, dump_cpts } => {
            cmd_simulate(cli, model, sizes, *reps, *gap, *edge_gap, *alpha, dump_cpts.as_deref())
        }
        Command::Census { n, csv } => cmd_census(cli, *n, csv.as_deref()),
        Command::Kernel { graph, joint, fix } => cmd_kernel(cli, graph, joint, fix),
    }
}

fn fit_config(cli: &Cli) -> FitConfig {
    FitConfig {
        tol: cli.tol,
        max_cycles: cli.max_cycles,
        smoothing: cli.smoothing,
        ..FitConfig::default()
    }
}

fn read(path: &Path) -> Result<String, CmdError> {
    std::fs::read_to_string(path)
        .map_err(|e| CmdError::io(format!("reading {}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<Admg, CmdError> {
    Admg::from_json(&read(path)?).map_err(|e| CmdError::io(format!("{}: {e}", path.display())))
}

fn load_data(path: &Path) -> Result<Dataset, CmdError> {
    Dataset::from_csv(&read(path)?).map_err(|e| CmdError::io(format!("{}: {e}", path.display())))
}

fn emit(cli: &Cli, content: &str) -> Result<(), CmdError> {
    emit_to(cli, cli.out.as_deref(), content)
}

fn emit_to(cli: &Cli, path: Option<&Path>, content: &str) -> Result<(), CmdError> {
    match path {
        None => {
            println!("{content}");
            Ok(())
        }
        Some(p) => {
            if p.exists() && !cli.force {
                return Err(CmdError::io(format!(
                    "{} exists; pass --force to overwrite",
                    p.display()
                )));
            }
            std::fs::write(p, content)
                .map_err(|e| CmdError::io(format!("writing {}: {e}", p.display())))
        }
    }
}

fn fit_error(e: FitError) -> CmdError {
    match e {
        FitError::ZeroCounts(_) | FitError::Infeasible(_) => CmdError::model(e.to_string()),
        FitError::Param(ParamError::Infeasible { .. })
        | FitError::Param(ParamError::DivisionByZero { .. }) => CmdError::model(e.to_string()),
        FitError::VariableMismatch(_, _) | FitError::Malformed(_) | FitError::Param(_) => {
            CmdError::io(e.to_string())
        }
    }
}

fn cmd_fit(cli: &Cli, graph: &Path, data: &Path, score_only: bool) -> Result<(), CmdError> {
    let g = load_graph(graph)?;
    let data = load_data(data)?;
    data.check_matches(g.names()).map_err(|e| CmdError::io(e.to_string()))?;
    let param = Parameterization::new(&g).map_err(|e| CmdError::io(e.to_string()))?;
    let fit = q_fit(&param, &data, &fit_config(cli)).map_err(fit_error)?;
    let out = if score_only {
        serde_json::json!({
            "loglik": fit.loglik,
            "bic": bic(fit.loglik, param.param_count(), data.total()),
            "dims": param.param_count(),
            "n": data.total(),
            "cycles": fit.cycles,
            "converged": fit.converged,
        })
        .to_string()
    } else {
        fit.to_json(&param, data.total())
    };
    emit(cli, &out)
}

fn cmd_search(
    cli: &Cli,
    data: &Path,
    start: Option<&Path>,
    max_expansions: usize,
) -> Result<(), CmdError> {
    let data = load_data(data)?;
    let cfg = SearchConfig {
        start: start.map(load_graph).transpose()?,
        max_expansions,
        fit: fit_config(cli),
        ..SearchConfig::default()
    };
    let report = tabu_search(&data, &cfg).map_err(fit_error)?;
    emit(cli, &report.to_json())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    cli: &Cli,
    model: &str,
    sizes: &str,
    reps: usize,
    gap: f64,
    edge_gap: f64,
    alpha: f64,
    dump_cpts: Option<&Path>,
) -> Result<(), CmdError> {
    let model = SimModel::parse(model)
        .ok_or_else(|| CmdError::io(format!("unknown model `{model}` (verma4 or chain5)")))?;
    let sizes: Vec<usize> = sizes
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| CmdError::io(format!("bad sizes: {e}")))?;
    let faith = FaithfulnessConfig { gap, edge_gap, alpha, ..FaithfulnessConfig::default() };
    let search = SearchConfig { fit: fit_config(cli), ..SearchConfig::default() };
    let rows = recovery_experiment(model, &sizes, reps, cli.seed, &faith, &search)
        .map_err(|e| CmdError::model(e.to_string()))?;
    if let Some(path) = dump_cpts {
        let mut dumps = Vec::new();
        for (si, &n) in sizes.iter().enumerate() {
            for rep in 0..reps {
                let params = random_parameters(
                    &model.skeleton(),
                    trial_parameter_seed(cli.seed, si, rep),
                    &faith,
                )
                .map_err(|e| CmdError::model(e.to_string()))?;
                let cpts: serde_json::Value =
                    serde_json::from_str(&params.cpts_to_json()).expect("cpt json");
                dumps.push(serde_json::json!({"n": n, "rep": rep, "model": cpts}));
            }
        }
        emit_to(cli, Some(path), &serde_json::Value::Array(dumps).to_string())?;
    }
    emit(cli, recovery_csv(&rows).trim_end())
}

fn cmd_census(cli: &Cli, n: usize, csv: Option<&Path>) -> Result<(), CmdError> {
    if n == 0 || n > 5 {
        return Err(CmdError::io("census supports 1 <= n <= 5".to_string()));
    }
    let census = nmm_core::census(n).map_err(|e| CmdError::census(e.to_string()))?;
    if let Some(path) = csv {
        emit_to(cli, Some(path), &census.to_csv())?;
    }
    emit(cli, &census.summary_json())?;
    if n == 4 {
        census.check_expected().map_err(|e| CmdError::census(e.to_string()))?;
    }
    Ok(())
}

fn cmd_kernel(cli: &Cli, graph: &Path, joint: &Path, fix: &str) -> Result<(), CmdError> {
    let g = load_graph(graph)?;
    let table = KernelTable::from_csv(g.clone(), &read(joint)?)
        .map_err(|e| CmdError::io(e.to_string()))?;
    let mut q = table;
    for name in fix.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let v = q.graph.vertex(name).map_err(|e| CmdError::io(e.to_string()))?;
        q = q.fix_kernel(v).map_err(|e| CmdError::model(e.to_string()))?;
    }
    emit(cli, q.to_csv().trim_end())
}
