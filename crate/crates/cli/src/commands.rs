use std::io::Write;

use serde_json::{json, Value};

use rsp_core::ensemble::{ed_compare, realization_seed, rsrg_ensemble, sweep_ensemble};
use rsp_core::fidelity::optimize_f_paired;
use rsp_core::flow::{run_flow, run_joint_flow, FlowConfig, FlowHistory, FlowPoint};
use rsp_core::lattice::sample_chain;
use rsp_core::rsrg::{run_no_rg, run_rsrg};
use rsp_core::sweep::{
    lz_fit, omega_grid, two_atom_scan, write_records_csv, Censoring, SweepRecord,
};
use rsp_core::{Error, Filling, LatticeParams};

use crate::config::{RunConfig, SweepMode};
use crate::error::CliError;
use crate::output::Outputs;

pub fn sample(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let lattice = cfg.lattice.clone().with_seed(cfg.seed);
    let chain = sample_chain(&lattice)?;
    out.csv("chain.csv", |w| {
        writeln!(w, "atom,site")?;
        for (k, x) in chain.positions().iter().enumerate() {
            writeln!(w, "{k},{x}")?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(json!({ "atoms": chain.len(), "positions": chain.positions() }))
}

fn first_chain(lattice: &LatticeParams, seed: u64) -> Result<rsp_core::AtomChain, CliError> {
    Ok(sample_chain(
        &lattice.clone().with_seed(realization_seed(seed, 0)),
    )?)
}

pub fn rsrg(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let ens = rsrg_ensemble(&cfg.rsrg, cfg.seed, cfg.workers)?;
    out.csv("rsrg.csv", |w| ens.write_csv(w))?;
    let chain = first_chain(&cfg.rsrg.lattice, cfg.seed)?;
    let report = run_rsrg(&chain, cfg.rsrg.lattice.interaction_range)?;
    out.csv("bonds_0.csv", |w| report.write_csv(w))?;
    Ok(json!({
        "realizations": ens.realizations,
        "atoms": ens.atoms,
        "rsrg_final": ens.rsrg_final,
        "no_rg_final": ens.no_rg_final,
        "nesting_crossover": ens.nesting_crossover(),
    }))
}

pub fn norg(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let ens = rsrg_ensemble(&cfg.rsrg, cfg.seed, cfg.workers)?;
    let curve = FlowHistory {
        points: ens
            .curve
            .points
            .iter()
            .map(|p| FlowPoint {
                survival: p.norg_survival.unwrap_or(f64::NAN),
                fractions: None,
                ..*p
            })
            .collect(),
        ..ens.curve.clone()
    };
    out.csv("norg.csv", |w| curve.write_csv(w))?;
    let report = run_no_rg(&first_chain(&cfg.rsrg.lattice, cfg.seed)?);
    out.csv("bonds_0.csv", |w| report.write_csv(w))?;
    Ok(json!({
        "realizations": ens.realizations,
        "atoms": ens.atoms,
        "no_rg_final": ens.no_rg_final,
    }))
}

fn crossover(history: &FlowHistory) -> Option<f64> {
    history
        .points
        .iter()
        .find(|p| p.fractions.is_some_and(|f| f[1] > f[0]))
        .map(|p| p.l_m)
}

fn write_history(out: &mut Outputs, name: &str, history: &FlowHistory) -> Result<(), CliError> {
    out.csv(&format!("{name}.csv"), |w| history.write_csv(w))?;
    out.json("flow_history.json", history)
}

pub fn flow(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let history = run_flow(cfg.flow.p_fill, &cfg.flow.solver)?;
    write_history(out, "flow", &history)?;
    let last = history.points.last().map(|p| (p.l_m, p.survival));
    Ok(json!({
        "final": last,
        "norm_drift": history.norm_drift(),
    }))
}

pub fn jointflow(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let history = run_joint_flow(cfg.flow.p_fill, &cfg.flow.solver)?;
    write_history(out, "jointflow", &history)?;
    let last = history.points.last().map(|p| (p.l_m, p.survival));
    Ok(json!({
        "final": last,
        "no_rg_unpaired": history.no_rg_unpaired().ok(),
        "nesting_crossover": crossover(&history),
        "norm_drift": history.norm_drift(),
    }))
}

pub fn ed_compare_cmd(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let cmp = ed_compare(&cfg.ed, cfg.seed, cfg.workers)?;
    out.csv("ed_compare.csv", |w| cmp.write_csv(w))?;
    Ok(json!({
        "realizations": cmp.rows.len(),
        "complete_rate": cmp.complete_rate,
        "match_rate": cmp.match_rate,
    }))
}

/// Returns the summary and, when the fit failed, the error to report after
/// the records and manifest are on disk.
pub fn sweep(cfg: &RunConfig, out: &mut Outputs) -> Result<(Value, Option<Error>), CliError> {
    let s = &cfg.sweep;
    let (rows, skipped, fit_req): (Vec<(u64, SweepRecord)>, usize, _) = match s.mode {
        SweepMode::TwoAtom => {
            let recs = two_atom_scan(&s.two_atom)?;
            (
                recs.into_iter().map(|r| (0, r)).collect(),
                0,
                &s.two_atom_fit,
            )
        }
        SweepMode::Ensemble => {
            let mut ens = s.ensemble.clone();
            if s.full_scale {
                ens.lattice = LatticeParams {
                    n_sites: 100,
                    filling: Filling::Fixed(12),
                    ..ens.lattice
                };
                ens.realizations = 1000;
            }
            let runs = sweep_ensemble(&ens, cfg.seed, cfg.workers)?;
            let skipped = runs.iter().filter(|r| r.report.is_none()).count();
            let rows = runs
                .into_iter()
                .filter_map(|r| r.report.map(|rep| (r.seed, rep.records)))
                .flat_map(|(seed, recs)| recs.into_iter().map(move |rec| (seed, rec)))
                .collect();
            (rows, skipped, &s.ensemble_fit)
        }
    };
    out.csv("sweep.csv", |w| write_records_csv(w, &rows))?;
    let records: Vec<SweepRecord> = rows.into_iter().map(|(_, r)| r).collect();
    let censored = records
        .iter()
        .filter(|r| r.censored != Censoring::None)
        .count();
    let (fit, err) = match lz_fit(&records, fit_req) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e)),
    };
    let summary = json!({
        "records": records.len(),
        "censored": censored,
        "skipped_realizations": skipped,
        "fit": fit,
        "fit_error": err.as_ref().map(|e| e.to_string()),
    });
    Ok((summary, err))
}

pub fn fidelity(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let f = &cfg.fidelity;
    f.params.validate()?;
    let history = match &f.curve {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => run_flow(
            f.params.filling,
            &FlowConfig {
                interaction_range: f.params.interaction_range,
                ..f.solver.clone()
            },
        )?,
    };
    let grid = omega_grid(f.omega_min, f.omega_max, f.per_decade)?;
    let opt = optimize_f_paired(&f.params, Some(&history), &grid)?;
    out.csv("fidelity.csv", |w| opt.write_csv(w))?;
    Ok(json!({
        "omega_star": opt.omega_star,
        "f_paired_star": opt.f_paired_star,
        "unimodal": opt.unimodal,
    }))
}
