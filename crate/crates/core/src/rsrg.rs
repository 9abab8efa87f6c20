//! Strong-disorder renormalization of the exponentially coupled XY chain.
//!
//! The chain is represented by the effective gaps between consecutive active
//! atoms. Decimating the shortest gap `l_m` freezes its two atoms into a
//! singlet and replaces the three gaps `(l_left, l_m, l_right)` by a single
//! gap `l_left + l_m + l_right - d_eff(l_m)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{AtomChain, CouplingMatrix};

/// Relative tolerance under which two gaps count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Shrinkage of the gap spanning a decimated pair of effective length `l_m`.
///
/// `d_eff = 2 l_m + L ln(1 - 2e^{-l_m/L} + 2e^{-2 l_m/L})`. The log argument is
/// at least 1/2, so the result is finite for every positive input.
pub fn d_eff(l_m: f64, range: f64) -> Result<f64> {
    if !(l_m > 0.0) || !(range > 0.0) {
        return Err(Error::Domain(format!(
            "d_eff needs positive lengths, got l_m = {l_m}, L = {range}"
        )));
    }
    let u = (-l_m / range).exp();
    // ln(1 - 2u(1 - u)) written with ln_1p for accuracy as u -> 0 or u -> 1
    Ok(2.0 * l_m + range * (-2.0 * u * (1.0 - u)).ln_1p())
}

/// A decimated singlet pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    /// Atom index (position order) of the left partner.
    pub left: usize,
    pub right: usize,
    /// Effective length at decimation, in units of `a`.
    pub l_m: f64,
    /// Number of earlier bonds nested strictly inside this one.
    pub nesting: usize,
    /// Decimation step index.
    pub order: usize,
}

impl Bond {
    /// True when `other` lies strictly inside this bond.
    pub fn contains(&self, other: &Bond) -> bool {
        self.left < other.left && other.right < self.right
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub bonds: Vec<Bond>,
    pub unpaired: Vec<usize>,
}

impl PairingReport {
    /// Unordered partner pairs, each as `(left, right)`, sorted.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut p: Vec<_> = self.bonds.iter().map(|b| (b.left, b.right)).collect();
        p.sort_unstable();
        p
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `(l_m, nesting)` rows for histogramming.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["l_m", "nesting"]).map_err(csv_err)?;
        for b in &self.bonds {
            w.write_record([b.l_m.to_string(), b.nesting.to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Active atoms and the effective gaps between them.
#[derive(Clone, Debug, PartialEq)]
pub struct GapList {
    atoms: Vec<usize>,
    gaps: Vec<f64>,
    /// Number of decimated bonds lying inside each gap.
    inner: Vec<usize>,
    decimated: usize,
}

impl GapList {
    pub fn from_chain(chain: &AtomChain) -> Self {
        let gaps: Vec<f64> = chain.gaps().into_iter().map(|g| g as f64).collect();
        Self {
            atoms: (0..chain.len()).collect(),
            inner: vec![0; gaps.len()],
            gaps,
            decimated: 0,
        }
    }

    /// Builds a gap list from explicit real-valued gaps; atoms are numbered
    /// `0..=gaps.len()`.
    pub fn from_gaps(gaps: Vec<f64>) -> Result<Self> {
        if gaps.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::InvalidParameter("gaps must be positive".into()));
        }
        Ok(Self {
            atoms: (0..=gaps.len()).collect(),
            inner: vec![0; gaps.len()],
            gaps,
            decimated: 0,
        })
    }

    pub fn atoms(&self) -> &[usize] {
        &self.atoms
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// Index of the shortest gap, leftmost among ties.
    fn shortest(&self) -> Option<usize> {
        let min = self.gaps.iter().copied().fold(f64::INFINITY, f64::min);
        self.gaps
            .iter()
            .position(|&g| g <= min * (1.0 + TIE_TOLERANCE))
    }

    /// Decimates the strongest pair and renormalizes the gap across it.
    pub fn decimate_step(&mut self, range: f64) -> Result<Bond> {
        let k = self
            .shortest()
            .ok_or(Error::NothingToDecimate(self.atoms.len()))?;
        self.decimate_at(k, range)
    }

    /// Decimates the pair separated by gap `k`.
    fn decimate_at(&mut self, k: usize, range: f64) -> Result<Bond> {
        let l_m = self.gaps[k];
        let bond = Bond {
            left: self.atoms[k],
            right: self.atoms[k + 1],
            l_m,
            nesting: self.inner[k],
            order: self.decimated,
        };
        let last = self.gaps.len() - 1;
        if k > 0 && k < last {
            let merged = self.gaps[k - 1] + l_m + self.gaps[k + 1] - d_eff(l_m, range)?;
            let nested = self.inner[k - 1] + self.inner[k] + self.inner[k + 1] + 1;
            self.gaps.splice(k - 1..=k + 1, [merged]);
            self.inner.splice(k - 1..=k + 1, [nested]);
        } else {
            // boundary pair: drop it with its one neighbouring gap
            let lo = k.saturating_sub(1);
            let hi = (k + 1).min(last);
            self.gaps.drain(lo..=hi);
            self.inner.drain(lo..=hi);
        }
        self.atoms.drain(k..=k + 1);
        self.decimated += 1;
        Ok(bond)
    }
}

/// Full RSRG: decimate until fewer than two atoms remain.
pub fn run_rsrg(chain: &AtomChain, range: f64) -> Result<PairingReport> {
    if !(range > 0.0) {
        return Err(Error::Domain(format!(
            "interaction range must be positive, got {range}"
        )));
    }
    let mut state = GapList::from_chain(chain);
    let mut bonds = Vec::with_capacity(chain.len() / 2);
    while state.atoms.len() >= 2 {
        let bond = state.decimate_step(range)?;
        if let Some(prev) = bonds.last() {
            let prev: &Bond = prev;
            assert!(
                bond.l_m >= prev.l_m * (1.0 - 1e-9),
                "RG cutoff decreased from {} to {}",
                prev.l_m,
                bond.l_m
            );
        }
        bonds.push(bond);
    }
    Ok(PairingReport {
        bonds,
        unpaired: state.atoms,
    })
}

/// Greedy nearest-neighbour pairing without renormalization or nesting.
///
/// Adjacent atoms are paired in order of increasing bare separation
/// (leftmost first on ties) as long as both are still free. Atoms whose
/// neighbours are all taken stay unpaired.
pub fn run_no_rg(chain: &AtomChain) -> PairingReport {
    let gaps = chain.gaps();
    let mut order: Vec<usize> = (0..gaps.len()).collect();
    order.sort_by_key(|&k| (gaps[k], k));
    let mut paired = vec![false; chain.len()];
    let mut bonds = Vec::new();
    for k in order {
        if !paired[k] && !paired[k + 1] {
            paired[k] = true;
            paired[k + 1] = true;
            bonds.push(Bond {
                left: k,
                right: k + 1,
                l_m: gaps[k] as f64,
                nesting: 0,
                order: bonds.len(),
            });
        }
    }
    let unpaired = (0..chain.len()).filter(|&i| !paired[i]).collect();
    PairingReport { bonds, unpaired }
}

/// Second-order Schrieffer–Wolff coupling between `j` and `jp` after the
/// pair `(p1, p2)` is frozen into a singlet:
/// `J_jj' - (J_2j - J_1j)(J_2j' - J_1j') / J_12`.
pub fn sw_coupling(
    couplings: &CouplingMatrix,
    pair: (usize, usize),
    j: usize,
    jp: usize,
) -> Result<f64> {
    let (p1, p2) = pair;
    let n = couplings.len();
    if [p1, p2, j, jp].iter().any(|&x| x >= n) {
        return Err(Error::Domain(format!(
            "atom index out of range for {n} atoms"
        )));
    }
    if p1 == p2 || j == jp || [p1, p2].contains(&j) || [p1, p2].contains(&jp) {
        return Err(Error::Domain(format!(
            "indices collide: pair ({p1}, {p2}), j = {j}, j' = {jp}"
        )));
    }
    let j12 = couplings.get(p1, p2);
    let dj = couplings.get(p2, j) - couplings.get(p1, j);
    let djp = couplings.get(p2, jp) - couplings.get(p1, jp);
    Ok(couplings.get(j, jp) - dj * djp / j12)
}

/// A bond together with its renormalized coupling `J0 exp(-l_m / L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveBond {
    pub bond: Bond,
    pub j_eff: f64,
}

/// Replays the RG gap merging under a prescribed pairing and assigns each
/// bond its effective length and coupling.
///
/// At every step the candidate bonds are those whose partners are adjacent
/// among the still-active atoms; the one with the shortest current gap is
/// decimated (leftmost on ties). For a pairing produced by [`run_rsrg`] this
/// reproduces the original decimation sequence.
pub fn assign_effective_couplings(
    pairs: &[(usize, usize)],
    chain: &AtomChain,
    range: f64,
    j0: f64,
) -> Result<Vec<EffectiveBond>> {
    let n = chain.len();
    let mut partner = vec![None; n];
    let mut normalized = Vec::with_capacity(pairs.len());
    for &(a, b) in pairs {
        let (l, r) = (a.min(b), a.max(b));
        if r >= n || l == r || partner[l].is_some() || partner[r].is_some() {
            return Err(Error::InvalidParameter(format!(
                "pair ({a}, {b}) is not a valid disjoint pair of {n} atoms"
            )));
        }
        partner[l] = Some(r);
        partner[r] = Some(l);
        normalized.push((l, r));
    }
    for (x, &p) in normalized.iter().enumerate() {
        for &q in &normalized[x + 1..] {
            let (a, b) = if p.0 < q.0 { (p, q) } else { (q, p) };
            if a.0 < b.0 && b.0 < a.1 && a.1 < b.1 {
                return Err(Error::CrossingBonds {
                    first: a,
                    second: b,
                });
            }
        }
    }

    let mut state = GapList::from_chain(chain);
    let mut out = Vec::with_capacity(normalized.len());
    while out.len() < normalized.len() {
        let mut best: Option<usize> = None;
        for k in 0..state.gaps.len() {
            if partner[state.atoms[k]] == Some(state.atoms[k + 1]) {
                let better = match best {
                    None => true,
                    Some(b) => state.gaps[k] < state.gaps[b] * (1.0 - TIE_TOLERANCE),
                };
                if better {
                    best = Some(k);
                }
            }
        }
        let Some(k) = best else {
            // every remaining bond encloses an unpaired atom
            let stuck = normalized
                .iter()
                .copied()
                .find(|&(l, _)| state.atoms.contains(&l))
                .expect("an unreplayed bond remains");
            return Err(Error::EnclosedUnpaired { bond: stuck });
        };
        let bond = state.decimate_at(k, range)?;
        out.push(EffectiveBond {
            bond,
            j_eff: j0 * (-bond.l_m / range).exp(),
        });
    }
    Ok(out)
}
