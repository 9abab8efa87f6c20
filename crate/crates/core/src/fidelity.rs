//! Error budget for the prepared singlet state: incoherent loss during the
//! sweep against unpaired atoms left by a finite slew rate.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowHistory;
use crate::rsrg::csv_err;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FidelityParams {
    pub cooperativity: f64,
    pub j0: f64,
    pub filling: f64,
    /// `L / a`.
    pub interaction_range: f64,
    /// A bond forms when `J̃ ≥ threshold · ω`.
    pub threshold: f64,
}

impl Default for FidelityParams {
    fn default() -> Self {
        Self {
            cooperativity: 1e4,
            j0: 1.0,
            filling: 0.12,
            interaction_range: 5.0,
            threshold: 1.0,
        }
    }
}

impl FidelityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cooperativity > 0.0) || !(self.j0 > 0.0) || !(self.threshold > 0.0) {
            return Err(Error::InvalidParameter(
                "cooperativity, j0 and threshold must be positive".into(),
            ));
        }
        if !(self.filling > 0.0 && self.filling < 1.0) || !(self.interaction_range > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < filling < 1 and a positive range, got {} and {}",
                self.filling, self.interaction_range
            )));
        }
        Ok(())
    }

    /// Cutoff `l_m / L = ln(J0 / (threshold · ω))` reached by a sweep at `omega`.
    pub fn cutoff(&self, omega: f64) -> f64 {
        (self.j0 / (self.threshold * omega)).ln()
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "omega must be positive, got {omega}"
        )));
    }
    Ok(())
}

/// Probability that a singlet is lost by photon scattering during a sweep of
/// duration `π/2ω`, `min(1, J0 T / √C)`.
pub fn p_inc(omega: f64, params: &FidelityParams) -> Result<f64> {
    check_omega(omega)?;
    Ok((params.j0 * FRAC_PI_2 / omega / params.cooperativity.sqrt()).min(1.0))
}

/// Unpaired fraction left by a sweep at `omega`: the flow survival at the
/// cutoff where `J̃ = threshold · ω`.
pub fn f_unpaired(omega: f64, params: &FidelityParams, curve: Option<&FlowHistory>) -> Result<f64> {
    check_omega(omega)?;
    let curve = curve
        .ok_or_else(|| Error::MissingDependency("f_unpaired needs a flow survival curve".into()))?;
    if (curve.p_fill - params.filling).abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "flow curve is for filling {}, parameters say {}",
            curve.p_fill, params.filling
        )));
    }
    Ok(curve.survival_at(params.cutoff(omega)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityPoint {
    pub omega: f64,
    pub p_inc: f64,
    pub f_unpaired: f64,
    pub f_paired: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityOptimum {
    pub omega_star: f64,
    pub f_paired_star: f64,
    /// Whether `F_paired` rises then falls along the grid.
    pub unimodal: bool,
    pub table: Vec<FidelityPoint>,
}

impl FidelityOptimum {
    /// CSV with columns `omega, p_inc, f_unpaired, f_paired`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["omega", "p_inc", "f_unpaired", "f_paired"])
            .map_err(csv_err)?;
        for p in &self.table {
            w.write_record([
                p.omega.to_string(),
                p.p_inc.to_string(),
                p.f_unpaired.to_string(),
                p.f_paired.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn f_paired(
    omega: f64,
    params: &FidelityParams,
    curve: Option<&FlowHistory>,
) -> Result<FidelityPoint> {
    let pi = p_inc(omega, params)?;
    let fu = f_unpaired(omega, params, curve)?;
    Ok(FidelityPoint {
        omega,
        p_inc: pi,
        f_unpaired: fu,
        f_paired: (1.0 - fu) * (1.0 - pi),
    })
}

/// Maximizes `F_paired = (1 - F_unpaired)(1 - P_inc)` over a log grid
/// spanning at least four decades. Ties go to the slowest rate.
pub fn optimize_f_paired(
    params: &FidelityParams,
    curve: Option<&FlowHistory>,
    omega_grid: &[f64],
) -> Result<FidelityOptimum> {
    params.validate()?;
    let (&lo, &hi) = match (omega_grid.first(), omega_grid.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::EmptyGrid),
    };
    if !(lo > 0.0) || (hi / lo).log10() < 4.0 - 1e-9 {
        return Err(Error::Precondition(format!(
            "omega grid [{lo:e}, {hi:e}] must be positive and span at least 4 decades"
        )));
    }
    let table = omega_grid
        .iter()
        .map(|&w| f_paired(w, params, curve))
        .collect::<Result<Vec<_>>>()?;
    let best = table.iter().enumerate().fold(
        0,
        |b, (k, p)| if p.f_paired > table[b].f_paired { k } else { b },
    );
    let f: Vec<f64> = table.iter().map(|p| p.f_paired).collect();
    let unimodal =
        f[..=best].windows(2).all(|w| w[1] >= w[0]) && f[best..].windows(2).all(|w| w[1] <= w[0]);
    Ok(FidelityOptimum {
        omega_star: table[best].omega,
        f_paired_star: table[best].f_paired,
        unimodal,
        table,
    })
}

/// Default optimization grid: `[1e-5, 10] J0` at 400 points per decade.
pub fn default_fidelity_grid(j0: f64) -> Vec<f64> {
    crate::sweep::omega_grid(1e-5 * j0, 10.0 * j0, 400).expect("valid default grid")
}
