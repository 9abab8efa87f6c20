use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{SweepParams, SweepSystem};
use crate::error::{Error, Result};
use crate::lattice::{AtomChain, Filling, LatticeParams};
use crate::rsrg::{assign_effective_couplings, csv_err};
use crate::spinsim::{
    ground_state, identify_pairs, rdm2, singlet_fraction, GroundStateOptions, StateVector,
    PAIRING_FLOOR,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Censoring {
    None,
    /// Still paired at the fastest scanned rate.
    NeverBroke,
    /// Already broken at the slowest scanned rate, or weaker than it.
    AlwaysBroken,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub bond: (usize, usize),
    pub j_eff: f64,
    /// First scanned rate whose final singlet fraction is below 1/2.
    pub omega_break: Option<f64>,
    pub censored: Censoring,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanOptions {
    /// Ground-state overlap required at the slowest rate.
    pub baseline_overlap: f64,
    /// Stop scanning once every bond has broken.
    pub stop_when_all_broken: bool,
    /// Adaptive start: the first rate tried is the largest grid value below
    /// `start_factor · min J̃`.
    pub start_factor: f64,
    /// When false, a missed baseline is flagged in the report instead of
    /// failing; bonds not formed at the slowest rate are censored.
    pub require_baseline: bool,
    pub ground_state: GroundStateOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            baseline_overlap: 0.99,
            stop_when_all_broken: true,
            start_factor: 0.1,
            require_baseline: true,
            ground_state: GroundStateOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub records: Vec<SweepRecord>,
    pub ground_energy: f64,
    pub baseline_omega: f64,
    pub baseline_overlap: f64,
    /// Whether the slowest rate reached the required overlap.
    pub baseline_ok: bool,
    /// Rates actually evolved, ascending, and the final singlet fraction of
    /// every bond at each of them.
    pub omegas: Vec<f64>,
    pub fractions: Vec<Vec<f64>>,
}

struct Target {
    system: SweepSystem,
    ground: StateVector,
    energy: f64,
    bonds: Vec<(usize, usize)>,
    j_eff: Vec<f64>,
}

impl Target {
    fn new(
        chain: &AtomChain,
        lattice: &LatticeParams,
        params: &SweepParams,
        opts: &ScanOptions,
    ) -> Result<Self> {
        params.validate()?;
        let system = SweepSystem::new(chain, lattice, params)?;
        let h_int = crate::spinsim::XYHamiltonian::interaction(chain, lattice)?;
        let (energy, ground) = ground_state(&h_int, &opts.ground_state)?;
        let bonds = identify_pairs(&ground).sorted_pairs();
        let eff = assign_effective_couplings(&bonds, chain, lattice.interaction_range, lattice.j0)?;
        let j_eff = bonds
            .iter()
            .map(|&(i, j)| {
                eff.iter()
                    .find(|e| (e.bond.left, e.bond.right) == (i, j))
                    .map(|e| e.j_eff)
                    .expect("every bond receives a coupling")
            })
            .collect();
        Ok(Self {
            system,
            ground,
            energy,
            bonds,
            j_eff,
        })
    }

    /// Final ground-state overlap and bond singlet fractions at `omega`.
    fn run(&self, omega: f64, tolerance: f64) -> Result<(f64, Vec<f64>)> {
        let out = self.system.evolve(omega, tolerance)?;
        let overlap = out.state.overlap(&self.ground)?;
        let fr = self
            .bonds
            .iter()
            .map(|&(i, j)| Ok(singlet_fraction(&rdm2(&out.state, i, j)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok((overlap, fr))
    }

    fn scan(
        &self,
        grid: &[f64],
        mut known: Vec<Option<(f64, Vec<f64>)>>,
        tolerance: f64,
        opts: &ScanOptions,
    ) -> Result<ScanReport> {
        let nb = self.bonds.len();
        let mut broken: Vec<Option<f64>> = vec![None; nb];
        let mut omegas = Vec::new();
        let mut fractions = Vec::new();
        known.resize(grid.len(), None);
        let mut baseline_overlap = f64::NAN;
        for (k, &omega) in grid.iter().enumerate() {
            let (overlap, fr) = match known[k].take() {
                Some(r) => r,
                None => self.run(omega, tolerance)?,
            };
            if k == 0 {
                baseline_overlap = overlap;
            }
            for (b, &f) in broken.iter_mut().zip(&fr) {
                if b.is_none() && f < PAIRING_FLOOR {
                    *b = Some(omega);
                }
            }
            omegas.push(omega);
            fractions.push(fr);
            if opts.stop_when_all_broken && broken.iter().all(Option::is_some) && k + 1 < grid.len()
            {
                break;
            }
        }
        let lowest = grid[0];
        let records = (0..nb)
            .map(|b| {
                let (omega_break, censored) = match broken[b] {
                    _ if self.j_eff[b] < lowest => (None, Censoring::AlwaysBroken),
                    None => (None, Censoring::NeverBroke),
                    Some(w) if w == lowest => (None, Censoring::AlwaysBroken),
                    Some(w) => (Some(w), Censoring::None),
                };
                SweepRecord {
                    bond: self.bonds[b],
                    j_eff: self.j_eff[b],
                    omega_break,
                    censored,
                }
            })
            .collect();
        Ok(ScanReport {
            records,
            ground_energy: self.energy,
            baseline_omega: lowest,
            baseline_overlap,
            baseline_ok: baseline_overlap >= opts.baseline_overlap,
            omegas,
            fractions,
        })
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.iter().any(|&w| !(w > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "omega grid must be positive and increasing".into(),
        ));
    }
    Ok(())
}

/// Sweeps `chain` at every rate of `omega_grid` (increasing) and records
/// where each bond of the interacting ground state breaks. The slowest rate
/// must reach the required ground-state overlap.
pub fn bond_break_scan(
    chain: &AtomChain,
    lattice: &LatticeParams,
    omega_grid: &[f64],
    params: &SweepParams,
    opts: &ScanOptions,
) -> Result<ScanReport> {
    check_grid(omega_grid)?;
    let target = Target::new(chain, lattice, &params.with_omega(omega_grid[0]), opts)?;
    let (overlap, fr) = target.run(omega_grid[0], params.tolerance)?;
    if overlap < opts.baseline_overlap && opts.require_baseline {
        return Err(Error::Baseline {
            omega: omega_grid[0],
            overlap,
            required: opts.baseline_overlap,
        });
    }
    target.scan(
        omega_grid,
        vec![Some((overlap, fr))],
        params.tolerance,
        opts,
    )
}

/// Like [`bond_break_scan`], but starts from the grid point just below
/// `start_factor · min J̃` and steps down the grid until the baseline
/// overlap is reached, instead of always starting at the first grid point.
pub fn adaptive_bond_break_scan(
    chain: &AtomChain,
    lattice: &LatticeParams,
    omega_grid: &[f64],
    params: &SweepParams,
    opts: &ScanOptions,
) -> Result<ScanReport> {
    check_grid(omega_grid)?;
    let target = Target::new(chain, lattice, &params.with_omega(omega_grid[0]), opts)?;
    let j_min = target.j_eff.iter().copied().fold(f64::INFINITY, f64::min);
    let mut idx = omega_grid
        .partition_point(|&w| w <= opts.start_factor * j_min)
        .saturating_sub(1);
    let mut known = vec![None; omega_grid.len()];
    loop {
        let (overlap, fr) = target.run(omega_grid[idx], params.tolerance)?;
        if overlap >= opts.baseline_overlap {
            known[idx] = Some((overlap, fr));
            return target.scan(
                &omega_grid[idx..],
                known.split_off(idx),
                params.tolerance,
                opts,
            );
        }
        known[idx] = Some((overlap, fr));
        if idx == 0 {
            if !opts.require_baseline {
                return target.scan(omega_grid, known, params.tolerance, opts);
            }
            return Err(Error::Baseline {
                omega: omega_grid[0],
                overlap,
                required: opts.baseline_overlap,
            });
        }
        idx -= 1;
    }
}

/// Isolated pairs at a list of separations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoAtomConfig {
    /// Separations in lattice sites.
    pub separations: Vec<usize>,
    pub interaction_range: f64,
    pub j0: f64,
    pub sweep: SweepParams,
    pub scan: ScanOptions,
    pub omega_min: f64,
    pub omega_max: f64,
    pub per_decade: usize,
}

impl Default for TwoAtomConfig {
    fn default() -> Self {
        Self {
            separations: (1..=10).collect(),
            interaction_range: 5.0,
            j0: 1.0,
            sweep: SweepParams::default(),
            scan: ScanOptions::default(),
            omega_min: 1e-4,
            omega_max: 10.0,
            per_decade: 40,
        }
    }
}

/// One [`bond_break_scan`] per separation; records are in separation order.
pub fn two_atom_scan(cfg: &TwoAtomConfig) -> Result<Vec<SweepRecord>> {
    if cfg.separations.is_empty() || cfg.separations.contains(&0) {
        return Err(Error::InvalidParameter(
            "separations must be non-empty and positive".into(),
        ));
    }
    let grid = super::omega_grid(cfg.omega_min, cfg.omega_max, cfg.per_decade)?;
    let mut out = Vec::with_capacity(cfg.separations.len());
    for &d in &cfg.separations {
        let chain = AtomChain::new(vec![0, d])?;
        let lattice =
            LatticeParams::new(d + 1, cfg.interaction_range, Filling::Fixed(2)).with_j0(cfg.j0);
        lattice.validate()?;
        out.extend(bond_break_scan(&chain, &lattice, &grid, &cfg.sweep, &cfg.scan)?.records);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitRequirements {
    pub min_records: usize,
    /// Minimum span of `j_eff` in decades.
    pub min_decades: f64,
}

impl Default for FitRequirements {
    fn default() -> Self {
        Self {
            min_records: 10,
            min_decades: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LzFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of `ln ω_break`.
    pub spread: f64,
    pub count: usize,
    pub decades: f64,
}

/// Least-squares fit of `ln ω_break` against `ln j_eff` over uncensored
/// records.
pub fn lz_fit(records: &[SweepRecord], req: &FitRequirements) -> Result<LzFit> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.censored == Censoring::None && r.j_eff > 0.0)
        .filter_map(|r| r.omega_break.map(|w| (r.j_eff.ln(), w.ln())))
        .collect();
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.0), b.max(p.0))
        });
    let decades = if pts.is_empty() {
        0.0
    } else {
        (hi - lo) / std::f64::consts::LN_10
    };
    if pts.len() < req.min_records || decades < req.min_decades {
        return Err(Error::FitRange(format!(
            "{} uncensored records spanning {decades:.2} decades; need {} spanning {}",
            pts.len(),
            req.min_records,
            req.min_decades
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let spread = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(LzFit {
        slope,
        intercept,
        spread,
        count: pts.len(),
        decades,
    })
}

/// CSV with columns `seed, bond_i, bond_j, j_eff, omega_break, censored`.
pub fn write_records_csv<W: Write>(out: W, rows: &[(u64, SweepRecord)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "seed",
        "bond_i",
        "bond_j",
        "j_eff",
        "omega_break",
        "censored",
    ])
    .map_err(csv_err)?;
    for (seed, r) in rows {
        let flag = match r.censored {
            Censoring::None => "none",
            Censoring::NeverBroke => "never_broke",
            Censoring::AlwaysBroken => "always_broken",
        };
        w.write_record([
            seed.to_string(),
            r.bond.0.to_string(),
            r.bond.1.to_string(),
            r.j_eff.to_string(),
            r.omega_break.map(|x| x.to_string()).unwrap_or_default(),
            flag.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
