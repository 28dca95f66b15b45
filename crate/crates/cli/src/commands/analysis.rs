use coarse_switch::meanfield::{bifurcation_scan, fold_brackets, scan_table, trace_separatrix};
use serde_json::json;

use super::Run;
use crate::error::{CliError, CliResult};

pub fn bifurcation(run: &mut Run, param: Option<&str>, from: f64, to: f64, points: usize) -> CliResult<()> {
    let model = run.config.model;
    let param = param.unwrap_or(model.control_name());
    if !(from.is_finite() && to.is_finite()) || to < from {
        return Err(CliError::Config(format!("empty parameter range [{from}, {to}]")));
    }
    let rows = bifurcation_scan(&model, param, from, to, points)?;
    run.out.text("bifurcation.csv", &scan_table(&model, param, &rows).render())?;
    let folds = fold_brackets(&rows);
    run.out.json("folds.json", &json!({ "param": param, "brackets": folds }))?;
    println!(
        "{} rows over {param} in [{from}, {to}], {} fold bracket(s)",
        rows.iter().map(|r| r.states.len()).sum::<usize>(),
        folds.len()
    );
    Ok(())
}

pub fn separatrix(run: &mut Run) -> CliResult<()> {
    let sep = trace_separatrix(&run.config.model)?;
    run.out.text("separatrix.csv", &sep.to_csv().render())?;
    run.out
        .json("steady-states.json", &json!({ "saddle": sep.saddle, "attractors": sep.attractors }))?;
    println!(
        "separatrix through saddle {:?}: {} points",
        sep.saddle.state.as_slice(),
        sep.points.len()
    );
    Ok(())
}
