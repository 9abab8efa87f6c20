//! Disorder realizations on a 1D trap lattice and the bare exponential
//! coupling `J_ij = J0 exp(-|x_i - x_j| / L)`.
//!
//! All lengths are in units of the lattice constant `a`; energies are in
//! units of `J0` unless a different `j0` is configured.

use rand::seq::index;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How trap sites get occupied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filling {
    /// Exactly this many atoms, placed uniformly without replacement.
    Fixed(usize),
    /// Every site is occupied independently with this probability.
    Bernoulli(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub n_sites: usize,
    /// Interaction range `L` in units of `a`.
    pub interaction_range: f64,
    #[serde(default = "default_j0")]
    pub j0: f64,
    pub filling: Filling,
    #[serde(default)]
    pub seed: u64,
}

fn default_j0() -> f64 {
    1.0
}

impl LatticeParams {
    /// Parameters with `J0 = 1` and seed 0.
    pub fn new(n_sites: usize, interaction_range: f64, filling: Filling) -> Self {
        Self {
            n_sites,
            interaction_range,
            j0: 1.0,
            filling,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_j0(mut self, j0: f64) -> Self {
        self.j0 = j0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::InvalidParameter("n_sites must be positive".into()));
        }
        if !(self.interaction_range > 0.0 && self.interaction_range.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "interaction range must be positive, got {}",
                self.interaction_range
            )));
        }
        if !(self.j0 > 0.0 && self.j0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "j0 must be positive, got {}",
                self.j0
            )));
        }
        match self.filling {
            Filling::Fixed(n) if n > self.n_sites => Err(Error::InvalidParameter(format!(
                "{n} atoms do not fit on {} sites",
                self.n_sites
            ))),
            Filling::Bernoulli(p) if !(p > 0.0 && p < 1.0) => Err(Error::InvalidParameter(
                format!("filling probability must lie in (0, 1), got {p}"),
            )),
            _ => Ok(()),
        }
    }

    /// Bare coupling between two sites.
    pub fn coupling(&self, xi: usize, xj: usize) -> Result<f64> {
        if xi == xj {
            return Err(Error::Domain(format!(
                "self-coupling of site {xi} is undefined"
            )));
        }
        Ok(self.coupling_at_distance(xi.abs_diff(xj) as f64))
    }

    /// `J0 exp(-d / L)` for a real-valued (possibly renormalized) distance.
    pub fn coupling_at_distance(&self, distance: f64) -> f64 {
        self.j0 * (-distance / self.interaction_range).exp()
    }
}

/// Sorted, distinct occupied sites.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AtomChain {
    positions: Vec<usize>,
}

impl AtomChain {
    /// Builds a chain from arbitrary positions, checking they are strictly
    /// increasing.
    pub fn new(positions: Vec<usize>) -> Result<Self> {
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "atom positions must be strictly increasing".into(),
            ));
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Bare separations between consecutive atoms.
    pub fn gaps(&self) -> Vec<usize> {
        self.positions.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let positions: Vec<usize> = serde_json::from_str(s)?;
        Self::new(positions)
    }
}

/// Draws one realization using the seed stored in `params`.
pub fn sample_chain(params: &LatticeParams) -> Result<AtomChain> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    sample_chain_with(params, &mut rng)
}

/// Draws one realization from a caller-owned generator.
pub fn sample_chain_with<R: Rng + ?Sized>(
    params: &LatticeParams,
    rng: &mut R,
) -> Result<AtomChain> {
    params.validate()?;
    let positions = match params.filling {
        Filling::Fixed(n) => {
            let mut v = index::sample(rng, params.n_sites, n).into_vec();
            v.sort_unstable();
            v
        }
        Filling::Bernoulli(p) => (0..params.n_sites).filter(|_| rng.random_bool(p)).collect(),
    };
    Ok(AtomChain { positions })
}

/// One entry of the all-pairs coupling table: atom indices `i < j` and `J_ij`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCoupling {
    pub i: usize,
    pub j: usize,
    pub coupling: f64,
}

/// All unordered pairs in lexicographic `(i, j)` order.
pub fn coupling_list(chain: &AtomChain, params: &LatticeParams) -> Vec<PairCoupling> {
    let x = chain.positions();
    let mut out = Vec::with_capacity(x.len() * x.len().saturating_sub(1) / 2);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            out.push(PairCoupling {
                i,
                j,
                coupling: params.coupling_at_distance((x[j] - x[i]) as f64),
            });
        }
    }
    out
}

/// Dense symmetric table of bare couplings indexed by atom number.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CouplingMatrix {
    pub fn from_chain(chain: &AtomChain, params: &LatticeParams) -> Self {
        let n = chain.len();
        let mut values = vec![0.0; n * n];
        for c in coupling_list(chain, params) {
            values[c.i * n + c.j] = c.coupling;
            values[c.j * n + c.i] = c.coupling;
        }
        Self { n, values }
    }

    /// Wraps an explicit row-major table. The diagonal is ignored.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Ok(Self { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}
