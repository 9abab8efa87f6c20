//! RG flow equations for the distribution of effective bond lengths.
//!
//! With lengths in units of `L`, the distribution `Q(λ, l_m)` of rescaled
//! gaps `λ = l / l_m - 1` obeys, in `s = ln l_m`,
//!
//! ```text
//! ∂Q/∂s = Q + (λ + 1) ∂Q/∂λ + Q(0) ∫_0^{λ+g} Q(λ1) Q(λ + g - λ1) dλ1
//! ```
//!
//! where `l_m g(l_m) = ln[1 - 2e^{-l_m}(1 - e^{-l_m})]`. The nesting-resolved
//! version splits `Q` into channels `Q(n, λ)` and routes the production of a
//! merged bond into channel `n0 + nx + ny + 1`.
//!
//! Two advection treatments are available. [`AdvectionScheme::Upwind`] is a
//! first-order upwind difference on the uniform λ grid and is limited by a
//! CFL condition. [`AdvectionScheme::Characteristics`] stores `Q` on a grid
//! uniform in `ln(1 + λ)` with spacing equal to the step, so the advection
//! over one step is an exact shift by one node. In both cases the nonlocal
//! production term is computed by FFT convolution on the uniform λ grid and
//! integrated with Strang splitting (Heun half steps around the advection).

mod conv;
mod solver;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rsrg::csv_err;

pub use solver::FlowSolver;

/// Values below this are treated as roundoff and clamped to zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvectionScheme {
    Upwind,
    Characteristics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub lambda_max: f64,
    /// Points of the uniform λ grid (snapshots and convolutions).
    pub n_lambda: usize,
    /// Step in `ln l_m`.
    pub dlnlm: f64,
    pub scheme: AdvectionScheme,
    /// `L / a`; the flow starts at `l_m = a / L`.
    pub interaction_range: f64,
    /// Final cutoff in units of `L`.
    pub lm_end: f64,
    /// Highest nesting order with its own channel in the joint flow.
    pub n_max: usize,
    /// Store a history point every this many steps.
    pub record_every: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            lambda_max: 60.0,
            n_lambda: 6000,
            dlnlm: 1e-3,
            scheme: AdvectionScheme::Characteristics,
            interaction_range: 5.0,
            lm_end: 10.0,
            n_max: 8,
            record_every: 10,
        }
    }
}

impl FlowConfig {
    pub fn dlambda(&self) -> f64 {
        self.lambda_max / (self.n_lambda - 1) as f64
    }

    pub fn lm_start(&self) -> f64 {
        1.0 / self.interaction_range
    }

    /// Largest stable upwind step: `0.5 Δλ / (λmax + 1)`.
    pub fn cfl_limit(&self) -> f64 {
        0.5 * self.dlambda() / (self.lambda_max + 1.0)
    }

    /// Same run with grid spacing and step both halved.
    pub fn refined(&self) -> Self {
        Self {
            n_lambda: 2 * self.n_lambda - 1,
            dlnlm: 0.5 * self.dlnlm,
            record_every: 2 * self.record_every,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.lambda_max > 0.0) || self.n_lambda < 16 {
            return bad(format!(
                "need lambda_max > 0 and n_lambda >= 16, got {} and {}",
                self.lambda_max, self.n_lambda
            ));
        }
        if !(self.dlnlm > 0.0) || self.record_every == 0 {
            return bad("dlnlm and record_every must be positive".into());
        }
        if !(self.interaction_range > 0.0) || !(self.lm_end > self.lm_start()) {
            return bad(format!(
                "need 0 < a/L < lm_end, got a/L = {} and lm_end = {}",
                self.lm_start(),
                self.lm_end
            ));
        }
        if self.scheme == AdvectionScheme::Upwind && self.dlnlm > self.cfl_limit() {
            return Err(Error::StepSize {
                step: self.dlnlm,
                limit: self.cfl_limit(),
            });
        }
        Ok(())
    }
}

/// `g(l_m) = ln[1 - 2e^{-l_m}(1 - e^{-l_m})] / l_m` with `l_m` in units of `L`.
pub fn g_of_lm(l_m: f64) -> Result<f64> {
    if !(l_m > 0.0) {
        return Err(Error::Domain(format!("g(l_m) needs l_m > 0, got {l_m}")));
    }
    let u = (-l_m).exp();
    Ok((-2.0 * u * (1.0 - u)).ln_1p() / l_m)
}

fn trapezoid_uniform(q: &[f64], dl: f64) -> f64 {
    match q {
        [] | [_] => 0.0,
        [first, .., last] => dl * (q.iter().sum::<f64>() - 0.5 * (first + last)),
    }
}

/// `Q(λ)` on a uniform λ grid at one value of the cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowGrid {
    pub lambda_max: f64,
    pub n_lambda: usize,
    pub q: Vec<f64>,
    /// Current cutoff in units of `L`.
    pub l_m: f64,
    pub p_fill: f64,
    /// Running `N(l_m) / N`.
    pub survival: f64,
}

impl FlowGrid {
    pub fn dlambda(&self) -> f64 {
        self.lambda_max / (self.n_lambda - 1) as f64
    }

    pub fn lambda(&self, i: usize) -> f64 {
        i as f64 * self.dlambda()
    }

    /// Trapezoidal `∫ Q dλ`.
    pub fn norm(&self) -> f64 {
        trapezoid_uniform(&self.q, self.dlambda())
    }

    /// Boundary density `Q(0, l_m)`.
    pub fn q0(&self) -> f64 {
        self.q[0]
    }
}

/// Initial distribution `Q(λ, a) = -ln(1 - P) (1 - P)^λ` at `l_m = l_m0`.
pub fn init_q(p_fill: f64, lambda_max: f64, n_lambda: usize, l_m0: f64) -> Result<FlowGrid> {
    if !(p_fill > 0.0 && p_fill < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "filling probability must lie in (0, 1), got {p_fill}"
        )));
    }
    if !(lambda_max > 0.0) || n_lambda < 2 || !(l_m0 > 0.0) {
        return Err(Error::InvalidParameter(
            "degenerate λ grid or start cutoff".into(),
        ));
    }
    let rate = -(-p_fill).ln_1p();
    let dl = lambda_max / (n_lambda - 1) as f64;
    let q = (0..n_lambda)
        .map(|i| rate * (-rate * i as f64 * dl).exp())
        .collect();
    Ok(FlowGrid {
        lambda_max,
        n_lambda,
        q,
        l_m: l_m0,
        p_fill,
        survival: 1.0,
    })
}

/// Nesting-resolved distributions `Q(n, λ)` for `n = 0..=n_max`, followed by
/// one overflow channel holding every `n > n_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointFlowGrid {
    pub n_max: usize,
    pub q_n: Vec<Vec<f64>>,
    pub lambda_max: f64,
    pub n_lambda: usize,
    pub l_m: f64,
    pub p_fill: f64,
    pub survival: f64,
    /// Running unpaired fraction counting only unnested decimations.
    pub norg_survival: f64,
}

impl JointFlowGrid {
    /// Initial joint distribution: everything in channel 0.
    pub fn init(
        p_fill: f64,
        lambda_max: f64,
        n_lambda: usize,
        l_m0: f64,
        n_max: usize,
    ) -> Result<Self> {
        let base = init_q(p_fill, lambda_max, n_lambda, l_m0)?;
        let mut q_n = vec![vec![0.0; n_lambda]; n_max + 2];
        q_n[0] = base.q;
        Ok(Self {
            n_max,
            q_n,
            lambda_max,
            n_lambda,
            l_m: l_m0,
            p_fill,
            survival: 1.0,
            norg_survival: 1.0,
        })
    }

    pub fn dlambda(&self) -> f64 {
        self.lambda_max / (self.n_lambda - 1) as f64
    }

    pub fn channel_sum(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.n_lambda];
        for ch in &self.q_n {
            for (t, v) in total.iter_mut().zip(ch) {
                *t += v;
            }
        }
        total
    }

    pub fn norm(&self) -> f64 {
        trapezoid_uniform(&self.channel_sum(), self.dlambda())
    }

    /// `Q(n, 0)` for every channel, overflow last.
    pub fn boundary(&self) -> Vec<f64> {
        self.q_n.iter().map(|ch| ch[0]).collect()
    }
}

/// Composition of the bonds being decimated at the current cutoff:
/// `f_n = Q(n, 0) / Σ_m Q(m, 0)` for `n = 0, 1, 2`.
pub fn nesting_fractions(grid: &JointFlowGrid) -> Result<[f64; 3]> {
    fractions_from_boundary(&grid.boundary()).ok_or(Error::UndefinedFraction(grid.l_m))
}

pub(crate) fn fractions_from_boundary(b: &[f64]) -> Option<[f64; 3]> {
    let total: f64 = b.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let f = |n: usize| b.get(n).copied().unwrap_or(0.0) / total;
    Some([f(0), f(1), f(2)])
}

/// One recorded state of a flow run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    /// Cutoff in units of `L`.
    pub l_m: f64,
    pub survival: f64,
    pub q0: f64,
    pub norm: f64,
    pub fractions: Option<[f64; 3]>,
    pub norg_survival: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowHistory {
    pub p_fill: f64,
    pub config: FlowConfig,
    pub points: Vec<FlowPoint>,
}

impl FlowHistory {
    /// `(l_m / L, N(l_m) / N)` for every recorded point.
    pub fn unpaired_fraction(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.l_m, p.survival)).collect()
    }

    /// Survival at an arbitrary cutoff: 1 before the flow starts, linear
    /// interpolation in `ln l_m` inside the run, the last value beyond it.
    pub fn survival_at(&self, l_m: f64) -> f64 {
        self.interpolate(l_m, |p| Some(p.survival)).unwrap_or(1.0)
    }

    pub fn norg_survival_at(&self, l_m: f64) -> Option<f64> {
        self.interpolate(l_m, |p| p.norg_survival)
    }

    pub fn fractions_at(&self, l_m: f64) -> Option<[f64; 3]> {
        let f = |k: usize| self.interpolate(l_m, move |p| p.fractions.map(|f| f[k]));
        Some([f(0)?, f(1)?, f(2)?])
    }

    fn interpolate(&self, l_m: f64, field: impl Fn(&FlowPoint) -> Option<f64>) -> Option<f64> {
        let first = self.points.first()?;
        if l_m <= first.l_m {
            return field(first);
        }
        let k = self.points.partition_point(|p| p.l_m < l_m);
        if k == self.points.len() {
            return field(self.points.last()?);
        }
        let (a, b) = (&self.points[k - 1], &self.points[k]);
        let t = (l_m.ln() - a.l_m.ln()) / (b.l_m.ln() - a.l_m.ln());
        Some(field(a)? * (1.0 - t) + field(b)? * t)
    }

    /// Largest deviation of `∫Q dλ` from its initial value.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.points.first().map_or(1.0, |p| p.norm);
        self.points
            .iter()
            .map(|p| (p.norm - n0).abs())
            .fold(0.0, f64::max)
    }

    /// Asymptotic unpaired fraction when only unnested decimations pair atoms.
    pub fn no_rg_unpaired(&self) -> Result<f64> {
        let last = self
            .points
            .last()
            .ok_or_else(|| Error::MissingDependency("empty flow history".into()))?;
        if last.l_m < 10.0 * (1.0 - 1e-6) {
            return Err(Error::Precondition(format!(
                "no-RG asymptote needs the flow run to l_m/L >= 10, it stopped at {:.3}",
                last.l_m
            )));
        }
        last.norg_survival
            .ok_or_else(|| Error::MissingDependency("no-RG survival needs a joint flow run".into()))
    }

    /// CSV with columns `l_m_over_L, survival, Q0, f0, f1, f2, norm,
    /// norg_survival`; values a run did not produce (missing or NaN) are
    /// left empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "l_m_over_L",
            "survival",
            "Q0",
            "f0",
            "f1",
            "f2",
            "norm",
            "norg_survival",
        ])
        .map_err(csv_err)?;
        let opt = |v: Option<f64>| {
            v.filter(|x| x.is_finite())
                .map(|x| x.to_string())
                .unwrap_or_default()
        };
        for p in &self.points {
            let f = p.fractions;
            w.write_record([
                p.l_m.to_string(),
                p.survival.to_string(),
                opt(Some(p.q0)),
                opt(f.map(|f| f[0])),
                opt(f.map(|f| f[1])),
                opt(f.map(|f| f[2])),
                opt(Some(p.norm)),
                opt(p.norg_survival),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Solves the scalar flow from `l_m = a/L` to `lm_end`.
pub fn run_flow(p_fill: f64, config: &FlowConfig) -> Result<FlowHistory> {
    FlowSolver::scalar(p_fill, config)?.run()
}

/// Solves the nesting-resolved flow from `l_m = a/L` to `lm_end`.
pub fn run_joint_flow(p_fill: f64, config: &FlowConfig) -> Result<FlowHistory> {
    FlowSolver::joint(p_fill, config)?.run()
}

/// Advances a uniform-grid snapshot by one step of `dlnlm`.
pub fn step_flow(grid: &FlowGrid, dlnlm: f64, scheme: AdvectionScheme) -> Result<FlowGrid> {
    let mut solver = FlowSolver::from_grid(grid, dlnlm, scheme)?;
    solver.step()?;
    Ok(solver.grid())
}

/// Advances a nesting-resolved snapshot by one step of `dlnlm`.
pub fn step_joint_flow(
    grid: &JointFlowGrid,
    dlnlm: f64,
    scheme: AdvectionScheme,
) -> Result<JointFlowGrid> {
    let mut solver = FlowSolver::from_joint_grid(grid, dlnlm, scheme)?;
    solver.step()?;
    Ok(solver.joint_grid().expect("joint solver"))
}
