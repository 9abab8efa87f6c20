//! Disorder averaging. Realization `k` of a run with master seed `s` uses
//! its own ChaCha stream, so results do not depend on scheduling or on the
//! number of workers.

use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowHistory, FlowPoint};
use crate::lattice::{sample_chain, AtomChain, Filling, LatticeParams};
use crate::rsrg::{csv_err, run_no_rg, run_rsrg, PairingReport};
use crate::spinsim::{ground_state, identify_pairs, GroundStateOptions, XYHamiltonian};
use crate::sweep::{adaptive_bond_break_scan, ScanOptions, ScanReport, SweepParams};

/// Seed of realization `index` under `master`.
pub fn realization_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Runs `f(index, seed)` for every realization on `workers` threads (0 = all
/// cores) and returns the results in index order.
pub fn run_indexed<T, F>(count: usize, master: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|k| f(k, realization_seed(master, k as u64)))
            .collect()
    }))
}

/// Log-spaced cutoffs `l_m / L` from `lo` to `hi`.
pub fn cutoff_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let r = (hi / lo).ln() / (points.max(2) - 1) as f64;
    (0..points.max(2))
        .map(|k| lo * (r * k as f64).exp())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RsrgEnsembleConfig {
    pub lattice: LatticeParams,
    pub realizations: usize,
    /// Cutoff grid `l_m / L` for the survival curves.
    pub lm_min: f64,
    pub lm_max: f64,
    pub points: usize,
    /// Nesting fractions at cutoff `l` pool the bonds decimated in
    /// `(l / w, l w]`.
    pub nesting_window: f64,
}

impl Default for RsrgEnsembleConfig {
    fn default() -> Self {
        Self {
            lattice: LatticeParams::new(100, 5.0, Filling::Fixed(30)),
            realizations: 10_000,
            lm_min: 0.2,
            lm_max: 10.0,
            points: 120,
            nesting_window: 1.25,
        }
    }
}

/// Monte Carlo curves in the same layout as a flow history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsrgEnsemble {
    pub realizations: usize,
    pub atoms: usize,
    /// Survival, nesting fractions and no-RG survival per cutoff.
    pub curve: FlowHistory,
    /// Unpaired fraction once no-RG pairing has finished.
    pub no_rg_final: f64,
    /// Unpaired fraction once RSRG has finished.
    pub rsrg_final: f64,
}

impl RsrgEnsemble {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.curve.write_csv(out)
    }

    /// First cutoff at which unnested decimations stop being the majority.
    pub fn nesting_crossover(&self) -> Option<f64> {
        self.curve
            .points
            .iter()
            .find(|p| p.fractions.is_some_and(|f| f[1] > f[0]))
            .map(|p| p.l_m)
    }
}

/// Samples chains, runs RSRG and no-RG pairing on each, and aggregates:
/// survival is the fraction of atoms not yet decimated at cutoff `l_m`;
/// nesting fractions are measured on the bonds decimated within a
/// multiplicative window around each cutoff.
pub fn rsrg_ensemble(
    cfg: &RsrgEnsembleConfig,
    master: u64,
    workers: usize,
) -> Result<RsrgEnsemble> {
    cfg.lattice.validate()?;
    if cfg.realizations == 0 {
        return Err(Error::InvalidParameter(
            "need at least one realization".into(),
        ));
    }
    if !(cfg.nesting_window >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "nesting window must be at least 1, got {}",
            cfg.nesting_window
        )));
    }
    let range = cfg.lattice.interaction_range;
    let runs: Vec<Result<(usize, PairingReport, PairingReport)>> =
        run_indexed(cfg.realizations, master, workers, |_, seed| {
            let chain = sample_chain(&cfg.lattice.clone().with_seed(seed))?;
            Ok((chain.len(), run_rsrg(&chain, range)?, run_no_rg(&chain)))
        })?;
    let grid = cutoff_grid(cfg.lm_min, cfg.lm_max, cfg.points);
    let n = grid.len();
    let mut paired = vec![0usize; n];
    let mut paired_norg = vec![0usize; n];
    let mut decimated: Vec<(f64, usize)> = Vec::new();
    let (mut atoms, mut left_rsrg, mut left_norg) = (0usize, 0usize, 0usize);
    for run in runs {
        let (na, rs, nr) = run?;
        atoms += na;
        left_rsrg += rs.unpaired.len();
        left_norg += nr.unpaired.len();
        for b in &rs.bonds {
            let l = b.l_m / range;
            let k = grid.partition_point(|&g| g < l);
            if k < n {
                paired[k] += 2;
            }
            decimated.push((l, b.nesting.min(3)));
        }
        for b in &nr.bonds {
            let k = grid.partition_point(|&g| g < b.l_m / range);
            if k < n {
                paired_norg[k] += 2;
            }
        }
    }
    if atoms == 0 {
        return Err(Error::InvalidParameter("no atoms were sampled".into()));
    }
    decimated.sort_by(|a, b| a.0.total_cmp(&b.0));
    let counts = class_counts(&decimated);
    let (mut cum, mut cum_norg) = (0usize, 0usize);
    let points = (0..n)
        .map(|k| {
            cum += paired[k];
            cum_norg += paired_norg[k];
            let fractions = window_fractions(&decimated, &counts, grid[k], cfg.nesting_window);
            FlowPoint {
                l_m: grid[k],
                survival: 1.0 - cum as f64 / atoms as f64,
                q0: f64::NAN,
                norm: f64::NAN,
                fractions,
                norg_survival: Some(1.0 - cum_norg as f64 / atoms as f64),
            }
        })
        .collect();
    let p_fill = match cfg.lattice.filling {
        Filling::Fixed(m) => m as f64 / cfg.lattice.n_sites as f64,
        Filling::Bernoulli(p) => p,
    };
    Ok(RsrgEnsemble {
        realizations: cfg.realizations,
        atoms,
        curve: FlowHistory {
            p_fill,
            config: crate::flow::FlowConfig {
                interaction_range: range,
                lm_end: cfg.lm_max,
                ..Default::default()
            },
            points,
        },
        no_rg_final: left_norg as f64 / atoms as f64,
        rsrg_final: left_rsrg as f64 / atoms as f64,
    })
}

/// Running count of nesting 0, 1, 2 and higher over bonds sorted by cutoff.
fn class_counts(sorted: &[(f64, usize)]) -> Vec<[usize; 4]> {
    let mut acc = [0usize; 4];
    let mut out = Vec::with_capacity(sorted.len() + 1);
    out.push(acc);
    for &(_, c) in sorted {
        acc[c] += 1;
        out.push(acc);
    }
    out
}

fn window_fractions(
    sorted: &[(f64, usize)],
    counts: &[[usize; 4]],
    l: f64,
    w: f64,
) -> Option<[f64; 3]> {
    let lo = sorted.partition_point(|b| b.0 <= l / w);
    let hi = sorted.partition_point(|b| b.0 <= l * w);
    let c: Vec<f64> = (0..4)
        .map(|k| (counts[hi][k] - counts[lo][k]) as f64)
        .collect();
    let t = c.iter().sum::<f64>();
    (t > 0.0).then(|| [c[0] / t, c[1] / t, c[2] / t])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdCompareConfig {
    pub lattice: LatticeParams,
    pub realizations: usize,
    pub ground_state: GroundStateOptions,
}

impl Default for EdCompareConfig {
    fn default() -> Self {
        Self {
            lattice: LatticeParams::new(27, 5.0, Filling::Fixed(8)),
            realizations: 500,
            ground_state: GroundStateOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdCompareRow {
    pub seed: u64,
    pub positions: Vec<usize>,
    pub energy: f64,
    pub exact_pairs: Vec<(usize, usize)>,
    pub rsrg_pairs: Vec<(usize, usize)>,
    pub complete: bool,
    pub matches: bool,
    /// Smallest singlet fraction among the exact pairs.
    pub min_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdCompare {
    pub rows: Vec<EdCompareRow>,
    pub complete_rate: f64,
    pub match_rate: f64,
}

fn pairs_str(p: &[(usize, usize)]) -> String {
    p.iter()
        .map(|(i, j)| format!("{i}-{j}"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl EdCompare {
    /// CSV with columns `seed, positions, energy, complete, matches,
    /// min_fraction, exact_pairs, rsrg_pairs`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "seed",
            "positions",
            "energy",
            "complete",
            "matches",
            "min_fraction",
            "exact_pairs",
            "rsrg_pairs",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            let pos: Vec<String> = r.positions.iter().map(|x| x.to_string()).collect();
            w.write_record([
                r.seed.to_string(),
                pos.join(" "),
                r.energy.to_string(),
                r.complete.to_string(),
                r.matches.to_string(),
                r.min_fraction.to_string(),
                pairs_str(&r.exact_pairs),
                pairs_str(&r.rsrg_pairs),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Ground state of each sampled chain compared with its RSRG pairing.
pub fn ed_compare(cfg: &EdCompareConfig, master: u64, workers: usize) -> Result<EdCompare> {
    cfg.lattice.validate()?;
    if cfg.realizations == 0 {
        return Err(Error::InvalidParameter(
            "need at least one realization".into(),
        ));
    }
    let rows = run_indexed(cfg.realizations, master, workers, |_, seed| {
        let chain = sample_chain(&cfg.lattice.clone().with_seed(seed))?;
        ed_row(&chain, &cfg.lattice, &cfg.ground_state, seed)
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let k = rows.len() as f64;
    Ok(EdCompare {
        complete_rate: rows.iter().filter(|r| r.complete).count() as f64 / k,
        match_rate: rows.iter().filter(|r| r.matches).count() as f64 / k,
        rows,
    })
}

fn ed_row(
    chain: &AtomChain,
    lattice: &LatticeParams,
    opts: &GroundStateOptions,
    seed: u64,
) -> Result<EdCompareRow> {
    let h = XYHamiltonian::interaction(chain, lattice)?;
    let (energy, state) = ground_state(&h, opts)?;
    let exact = identify_pairs(&state);
    let mut rsrg = run_rsrg(chain, lattice.interaction_range)?.pairs();
    rsrg.sort_unstable();
    let exact_pairs = exact.sorted_pairs();
    Ok(EdCompareRow {
        seed,
        positions: chain.positions().to_vec(),
        energy,
        complete: exact.is_complete(),
        matches: exact_pairs == rsrg,
        min_fraction: exact
            .pair_fractions
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
        exact_pairs,
        rsrg_pairs: rsrg,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepEnsembleConfig {
    pub lattice: LatticeParams,
    pub realizations: usize,
    pub sweep: SweepParams,
    pub scan: ScanOptions,
    pub omega_min: f64,
    pub omega_max: f64,
    pub per_decade: usize,
}

impl Default for SweepEnsembleConfig {
    fn default() -> Self {
        Self {
            lattice: LatticeParams::new(60, 5.0, Filling::Fixed(8)),
            realizations: 100,
            sweep: SweepParams {
                tolerance: 1e-6,
                ..SweepParams::default()
            },
            scan: ScanOptions {
                require_baseline: false,
                ..ScanOptions::default()
            },
            omega_min: 3e-4,
            omega_max: 10.0,
            per_decade: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRealization {
    pub seed: u64,
    pub positions: Vec<usize>,
    pub report: Option<ScanReport>,
    /// Why the realization produced no records.
    pub skipped: Option<String>,
}

/// Bond-breaking scans over sampled chains. Realizations whose exact
/// pairing cannot be assigned effective couplings, or that never reach the
/// adiabatic baseline, are kept with the reason and no records.
pub fn sweep_ensemble(
    cfg: &SweepEnsembleConfig,
    master: u64,
    workers: usize,
) -> Result<Vec<SweepRealization>> {
    cfg.lattice.validate()?;
    cfg.sweep.validate()?;
    let grid = crate::sweep::omega_grid(cfg.omega_min, cfg.omega_max, cfg.per_decade)?;
    run_indexed(cfg.realizations, master, workers, |_, seed| {
        let lattice = cfg.lattice.clone().with_seed(seed);
        let chain = sample_chain(&lattice)?;
        let positions = chain.positions().to_vec();
        match adaptive_bond_break_scan(&chain, &lattice, &grid, &cfg.sweep, &cfg.scan) {
            Ok(report) => Ok(SweepRealization {
                seed,
                positions,
                report: Some(report),
                skipped: None,
            }),
            Err(
                e @ (Error::Baseline { .. }
                | Error::CrossingBonds { .. }
                | Error::EnclosedUnpaired { .. }),
            ) => Ok(SweepRealization {
                seed,
                positions,
                report: None,
                skipped: Some(e.to_string()),
            }),
            Err(e) => Err(e),
        }
    })?
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_depend_only_on_index() {
        let a = run_indexed(16, 7, 1, |k, s| (k, s)).unwrap();
        let b = run_indexed(16, 7, 3, |k, s| (k, s)).unwrap();
        assert_eq!(a, b);
        let seeds: std::collections::HashSet<u64> = a.iter().map(|x| x.1).collect();
        assert_eq!(seeds.len(), 16);
        assert_ne!(realization_seed(7, 0), realization_seed(8, 0));
    }

    #[test]
    fn small_rsrg_ensemble() {
        let cfg = RsrgEnsembleConfig {
            realizations: 200,
            ..Default::default()
        };
        let e = rsrg_ensemble(&cfg, 1, 1).unwrap();
        assert_eq!(e.atoms, 200 * 30);
        let s: Vec<f64> = e.curve.points.iter().map(|p| p.survival).collect();
        assert!(s.windows(2).all(|w| w[1] <= w[0]));
        assert!(e.rsrg_final == 0.0);
        assert!(e.no_rg_final > 0.05 && e.no_rg_final < 0.3);
        let again = rsrg_ensemble(&cfg, 1, 2).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        e.write_csv(&mut a).unwrap();
        again.write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            (e.no_rg_final, e.rsrg_final),
            (again.no_rg_final, again.rsrg_final)
        );
    }

    #[test]
    fn single_realization() {
        let cfg = RsrgEnsembleConfig {
            realizations: 1,
            ..Default::default()
        };
        let e = rsrg_ensemble(&cfg, 3, 1).unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().lines().count(),
            cfg.points + 1
        );
    }

    #[test]
    fn small_ed_compare() {
        let cfg = EdCompareConfig {
            realizations: 6,
            lattice: LatticeParams::new(14, 5.0, Filling::Fixed(4)),
            ..Default::default()
        };
        let r = ed_compare(&cfg, 2, 1).unwrap();
        assert_eq!(r.rows.len(), 6);
        for row in &r.rows {
            assert!(row.complete);
            assert_eq!(row.exact_pairs.len(), 2);
        }
    }

    #[test]
    fn small_sweep_ensemble() {
        let cfg = SweepEnsembleConfig {
            lattice: LatticeParams::new(12, 5.0, Filling::Fixed(4)),
            realizations: 2,
            omega_min: 1e-2,
            per_decade: 5,
            ..Default::default()
        };
        let a = sweep_ensemble(&cfg, 9, 1).unwrap();
        assert_eq!(a.len(), 2);
        for r in &a {
            assert_eq!(r.positions.len(), 4);
            if let Some(rep) = &r.report {
                assert_eq!(rep.records.len(), 2);
            }
        }
        assert_eq!(a, sweep_ensemble(&cfg, 9, 2).unwrap());
    }
}
