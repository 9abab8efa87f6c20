use num_complex::Complex64;

use super::conv::Convolver;
use super::{
    fractions_from_boundary, g_of_lm, AdvectionScheme, FlowConfig, FlowGrid, FlowHistory,
    FlowPoint, JointFlowGrid, NEGATIVE_TOLERANCE,
};
use crate::error::{Error, Result};

/// Linear interpolation weights; indices past the end read as zero.
#[derive(Clone, Copy, Debug)]
struct Interp {
    j: usize,
    w: f64,
}

impl Interp {
    fn eval(self, v: &[f64]) -> f64 {
        let a = v.get(self.j).copied().unwrap_or(0.0);
        let b = v.get(self.j + 1).copied().unwrap_or(0.0);
        a + self.w * (b - a)
    }
}

fn interp_map(from: &[f64], to: &[f64]) -> Vec<Interp> {
    let last = from.len() - 1;
    to.iter()
        .map(|&x| {
            let j = from.partition_point(|&y| y <= x).saturating_sub(1);
            if j >= last {
                let tol = 1e-12 * (1.0 + from[last].abs());
                if x <= from[last] + tol {
                    Interp { j: last, w: 0.0 }
                } else {
                    Interp {
                        j: from.len(),
                        w: 0.0,
                    }
                }
            } else {
                Interp {
                    j,
                    w: (x - from[j]) / (from[j + 1] - from[j]),
                }
            }
        })
        .collect()
}

/// Nodes on which `Q` is stored and the map onto the uniform λ grid.
struct Nodes {
    lambda: Vec<f64>,
    /// `None` when the nodes already are the uniform grid.
    to_uniform: Option<Vec<Interp>>,
}

impl Nodes {
    fn new(config: &FlowConfig) -> Self {
        let uniform: Vec<f64> = (0..config.n_lambda)
            .map(|i| i as f64 * config.dlambda())
            .collect();
        match config.scheme {
            AdvectionScheme::Upwind => Self {
                lambda: uniform,
                to_uniform: None,
            },
            AdvectionScheme::Characteristics => {
                let du = config.dlnlm;
                let m = ((config.lambda_max.ln_1p() / du) - 1e-9).ceil() as usize;
                let lambda: Vec<f64> = (0..=m).map(|i| (i as f64 * du).exp_m1()).collect();
                let map = interp_map(&lambda, &uniform);
                Self {
                    lambda,
                    to_uniform: Some(map),
                }
            }
        }
    }

    fn to_uniform(&self, q: &[f64], out: &mut [f64]) {
        match &self.to_uniform {
            None => out.copy_from_slice(q),
            Some(map) => {
                for (o, it) in out.iter_mut().zip(map) {
                    *o = it.eval(q);
                }
            }
        }
    }

    fn sample_uniform(&self, q: &[f64], dl: f64) -> Vec<f64> {
        match &self.to_uniform {
            None => q.to_vec(),
            Some(_) => {
                let uniform: Vec<f64> = (0..q.len()).map(|i| i as f64 * dl).collect();
                interp_map(&uniform, &self.lambda)
                    .into_iter()
                    .map(|it| it.eval(q))
                    .collect()
            }
        }
    }

    fn trapezoid(&self, q: &[f64]) -> f64 {
        self.lambda
            .windows(2)
            .zip(q.windows(2))
            .map(|(l, v)| 0.5 * (l[1] - l[0]) * (v[0] + v[1]))
            .sum()
    }
}

struct Workspace {
    conv: Convolver,
    dl: f64,
    res: Vec<Vec<f64>>,
    res_total: Vec<f64>,
    spec: Vec<Vec<Complex64>>,
    acc: Vec<Complex64>,
    cbuf: Vec<f64>,
    /// Sampled partial convolutions on the nodes; the last entry is the total.
    sampled: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(n_c: usize, dl: f64, channels: usize, n_nodes: usize, n_partial: usize) -> Self {
        let conv = Convolver::new(n_c);
        let sl = conv.spectrum_len();
        Self {
            conv,
            dl,
            res: vec![vec![0.0; n_c]; channels],
            res_total: vec![0.0; n_c],
            spec: vec![vec![Complex64::default(); sl]; channels],
            acc: vec![Complex64::default(); sl],
            cbuf: vec![0.0; n_c],
            sampled: vec![vec![0.0; n_nodes]; n_partial + 1],
        }
    }

    /// Inverse of `acc`, trapezoid-corrected with `corr`, sampled at `λ + g`.
    fn finish(&mut self, corr: &[f64], lambda: &[f64], g: f64, slot: usize) {
        self.conv.inverse(&self.acc, &mut self.cbuf);
        let dl = self.dl;
        for (c, k) in self.cbuf.iter_mut().zip(corr) {
            *c = dl * (*c - k);
        }
        let n_c = self.cbuf.len();
        let out = &mut self.sampled[slot];
        for (o, &l) in out.iter_mut().zip(lambda) {
            let x = (l + g) / dl;
            *o = if x < 0.0 {
                0.0
            } else {
                let j = x.floor() as usize;
                if j + 1 >= n_c {
                    self.cbuf[n_c - 1]
                } else {
                    let w = x - j as f64;
                    self.cbuf[j] + w * (self.cbuf[j + 1] - self.cbuf[j])
                }
            };
        }
    }
}

/// `Q` at `beyond`, past the top node, extrapolating `ln Q` linearly in `λ`
/// so that exponential tails keep flowing in.
fn tail_value(lambda: &[f64], q: &[f64], beyond: f64) -> f64 {
    let n = q.len();
    let (a, b) = (q[n - 2], q[n - 1]);
    if !(a > 0.0 && b > 0.0) || b >= a {
        return 0.0;
    }
    let slope = (b / a).ln() / (lambda[n - 1] - lambda[n - 2]);
    b * (slope * (beyond - lambda[n - 1])).exp()
}

/// Right-hand side of the production term for every channel.
fn production(
    ws: &mut Workspace,
    nodes: &Nodes,
    n_max: Option<usize>,
    q: &[Vec<f64>],
    l_m: f64,
    out: &mut [Vec<f64>],
) -> Result<()> {
    let g = g_of_lm(l_m)?;
    for c in 0..q.len() {
        nodes.to_uniform(&q[c], &mut ws.res[c]);
        ws.conv.forward(&ws.res[c], &mut ws.spec[c]);
    }
    let b: Vec<f64> = q.iter().map(|ch| ch[0]).collect();
    let b_t: f64 = b.iter().sum();
    let total_slot = ws.sampled.len() - 1;

    ws.acc.iter_mut().for_each(|a| *a = Complex64::default());
    for s in &ws.spec {
        for (a, v) in ws.acc.iter_mut().zip(s) {
            *a += v;
        }
    }
    ws.acc.iter_mut().for_each(|a| *a = *a * *a);
    ws.res_total.iter_mut().for_each(|r| *r = 0.0);
    for r in &ws.res {
        for (t, v) in ws.res_total.iter_mut().zip(r) {
            *t += v;
        }
    }
    let corr: Vec<f64> = ws.res_total.iter().map(|r| b_t * r).collect();
    ws.finish(&corr, &nodes.lambda, g, total_slot);

    let Some(n_max) = n_max else {
        for (o, s) in out[0].iter_mut().zip(&ws.sampled[total_slot]) {
            *o = b_t * s;
        }
        return Ok(());
    };

    let mut corr = vec![0.0; ws.cbuf.len()];
    for k in 0..n_max {
        ws.acc.iter_mut().for_each(|a| *a = Complex64::default());
        corr.iter_mut().for_each(|c| *c = 0.0);
        for nx in 0..=k {
            let (sx, sy) = (&ws.spec[nx], &ws.spec[k - nx]);
            for ((a, x), y) in ws.acc.iter_mut().zip(sx).zip(sy) {
                *a += x * y;
            }
            for (c, r) in corr.iter_mut().zip(&ws.res[k - nx]) {
                *c += b[nx] * r;
            }
        }
        ws.finish(&corr, &nodes.lambda, g, k);
    }

    out[0].iter_mut().for_each(|o| *o = 0.0);
    for n in 1..=n_max {
        let dst = &mut out[n];
        dst.iter_mut().for_each(|o| *o = 0.0);
        for n0 in 0..n {
            let src = &ws.sampled[n - 1 - n0];
            for (o, s) in dst.iter_mut().zip(src) {
                *o += b[n0] * s;
            }
        }
    }
    let (named, overflow) = out.split_at_mut(n_max + 1);
    for (i, o) in overflow[0].iter_mut().enumerate() {
        let named_sum: f64 = named[1..].iter().map(|ch| ch[i]).sum();
        *o = b_t * ws.sampled[total_slot][i] - named_sum;
    }
    Ok(())
}

/// Time stepper shared by the scalar flow (one channel) and the
/// nesting-resolved flow (`n_max + 2` channels).
pub struct FlowSolver {
    config: FlowConfig,
    p_fill: f64,
    n_max: Option<usize>,
    nodes: Nodes,
    channels: Vec<Vec<f64>>,
    lm_start: f64,
    steps: usize,
    survival: f64,
    norg_survival: f64,
    ws: Workspace,
    k1: Vec<Vec<f64>>,
    k2: Vec<Vec<f64>>,
    stage: Vec<Vec<f64>>,
}

impl FlowSolver {
    fn build(
        config: FlowConfig,
        p_fill: f64,
        n_max: Option<usize>,
        lm_start: f64,
        init: impl Fn(&Nodes, usize) -> Vec<f64>,
    ) -> Result<Self> {
        config.validate()?;
        let nodes = Nodes::new(&config);
        let n_ch = n_max.map_or(1, |n| n + 2);
        let channels: Vec<Vec<f64>> = (0..n_ch).map(|c| init(&nodes, c)).collect();
        let n_nodes = nodes.lambda.len();
        let ws = Workspace::new(
            config.n_lambda,
            config.dlambda(),
            n_ch,
            n_nodes,
            n_max.unwrap_or(0),
        );
        let zeros = vec![vec![0.0; n_nodes]; n_ch];
        Ok(Self {
            config,
            p_fill,
            n_max,
            nodes,
            channels,
            lm_start,
            steps: 0,
            survival: 1.0,
            norg_survival: 1.0,
            ws,
            k1: zeros.clone(),
            k2: zeros.clone(),
            stage: zeros,
        })
    }

    fn check_fill(p_fill: f64) -> Result<f64> {
        if !(p_fill > 0.0 && p_fill < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "filling probability must lie in (0, 1), got {p_fill}"
            )));
        }
        Ok(-(-p_fill).ln_1p())
    }

    pub fn scalar(p_fill: f64, config: &FlowConfig) -> Result<Self> {
        let rate = Self::check_fill(p_fill)?;
        Self::build(
            config.clone(),
            p_fill,
            None,
            config.lm_start(),
            |nodes, _| {
                nodes
                    .lambda
                    .iter()
                    .map(|l| rate * (-rate * l).exp())
                    .collect()
            },
        )
    }

    pub fn joint(p_fill: f64, config: &FlowConfig) -> Result<Self> {
        let rate = Self::check_fill(p_fill)?;
        Self::build(
            config.clone(),
            p_fill,
            Some(config.n_max),
            config.lm_start(),
            |nodes, c| {
                if c == 0 {
                    nodes
                        .lambda
                        .iter()
                        .map(|l| rate * (-rate * l).exp())
                        .collect()
                } else {
                    vec![0.0; nodes.lambda.len()]
                }
            },
        )
    }

    fn snapshot_config(
        lambda_max: f64,
        n_lambda: usize,
        l_m: f64,
        dlnlm: f64,
        scheme: AdvectionScheme,
    ) -> FlowConfig {
        FlowConfig {
            lambda_max,
            n_lambda,
            dlnlm,
            scheme,
            interaction_range: 1.0 / l_m,
            lm_end: f64::INFINITY,
            ..FlowConfig::default()
        }
    }

    /// Solver initialised from a uniform-grid snapshot.
    pub fn from_grid(grid: &FlowGrid, dlnlm: f64, scheme: AdvectionScheme) -> Result<Self> {
        if grid.q.len() != grid.n_lambda {
            return Err(Error::DimensionMismatch {
                expected: grid.n_lambda,
                found: grid.q.len(),
            });
        }
        let config = Self::snapshot_config(grid.lambda_max, grid.n_lambda, grid.l_m, dlnlm, scheme);
        let dl = config.dlambda();
        let mut s = Self::build(config, grid.p_fill, None, grid.l_m, |nodes, _| {
            nodes.sample_uniform(&grid.q, dl)
        })?;
        s.survival = grid.survival;
        Ok(s)
    }

    /// Solver initialised from a nesting-resolved snapshot.
    pub fn from_joint_grid(
        grid: &JointFlowGrid,
        dlnlm: f64,
        scheme: AdvectionScheme,
    ) -> Result<Self> {
        if grid.q_n.len() != grid.n_max + 2 {
            return Err(Error::DimensionMismatch {
                expected: grid.n_max + 2,
                found: grid.q_n.len(),
            });
        }
        if let Some(bad) = grid.q_n.iter().find(|ch| ch.len() != grid.n_lambda) {
            return Err(Error::DimensionMismatch {
                expected: grid.n_lambda,
                found: bad.len(),
            });
        }
        let mut config =
            Self::snapshot_config(grid.lambda_max, grid.n_lambda, grid.l_m, dlnlm, scheme);
        config.n_max = grid.n_max;
        let dl = config.dlambda();
        let mut s = Self::build(
            config,
            grid.p_fill,
            Some(grid.n_max),
            grid.l_m,
            |nodes, c| nodes.sample_uniform(&grid.q_n[c], dl),
        )?;
        s.survival = grid.survival;
        s.norg_survival = grid.norg_survival;
        Ok(s)
    }

    /// Current cutoff in units of `L`.
    pub fn l_m(&self) -> f64 {
        self.lm_start * (self.steps as f64 * self.config.dlnlm).exp()
    }

    pub fn survival(&self) -> f64 {
        self.survival
    }

    fn boundary(&self) -> Vec<f64> {
        self.channels.iter().map(|ch| ch[0]).collect()
    }

    fn total(&self) -> Vec<f64> {
        let mut t = self.channels[0].clone();
        for ch in &self.channels[1..] {
            for (a, b) in t.iter_mut().zip(ch) {
                *a += b;
            }
        }
        t
    }

    /// `∫ Q dλ` over the storage nodes.
    pub fn norm(&self) -> f64 {
        self.nodes.trapezoid(&self.total())
    }

    fn source_half(&mut self, la: f64, lb: f64) -> Result<()> {
        let hh = 0.5 * self.config.dlnlm;
        production(
            &mut self.ws,
            &self.nodes,
            self.n_max,
            &self.channels,
            la,
            &mut self.k1,
        )?;
        for ((s, q), k) in self.stage.iter_mut().zip(&self.channels).zip(&self.k1) {
            for ((s, q), k) in s.iter_mut().zip(q).zip(k) {
                *s = q + hh * k;
            }
        }
        production(
            &mut self.ws,
            &self.nodes,
            self.n_max,
            &self.stage,
            lb,
            &mut self.k2,
        )?;
        for ((q, a), b) in self.channels.iter_mut().zip(&self.k1).zip(&self.k2) {
            for ((q, a), b) in q.iter_mut().zip(a).zip(b) {
                *q += 0.5 * hh * (a + b);
            }
        }
        Ok(())
    }

    fn advect(&mut self) {
        let h = self.config.dlnlm;
        match self.config.scheme {
            AdvectionScheme::Characteristics => {
                let grow = h.exp();
                let lambda = &self.nodes.lambda;
                let beyond = (lambda[lambda.len() - 1] + 1.0) * h.exp() - 1.0;
                for ch in &mut self.channels {
                    let ghost = tail_value(lambda, ch, beyond);
                    ch.rotate_left(1);
                    let last = ch.len() - 1;
                    ch[last] = ghost;
                    ch.iter_mut().for_each(|v| *v *= grow);
                }
            }
            AdvectionScheme::Upwind => {
                let dl = self.config.dlambda();
                let lambda = &self.nodes.lambda;
                for ch in &mut self.channels {
                    let n = ch.len();
                    let ghost = tail_value(lambda, ch, lambda[n - 1] + dl);
                    for i in 0..n {
                        let next = if i + 1 < n { ch[i + 1] } else { ghost };
                        ch[i] += h * (ch[i] + (lambda[i] + 1.0) * (next - ch[i]) / dl);
                    }
                }
            }
        }
    }

    /// Advances the cutoff by one step of `dlnlm`.
    pub fn step(&mut self) -> Result<()> {
        let h = self.config.dlnlm;
        let l0 = self.l_m();
        let b_start: f64 = self.boundary().iter().sum();
        let b0_start = self.channels[0][0];
        let l_half = l0 * (0.5 * h).exp();
        self.source_half(l0, l_half)?;
        self.advect();
        self.source_half(l_half, l0 * h.exp())?;
        self.steps += 1;

        let mut min_q = f64::INFINITY;
        for ch in &self.channels {
            for &v in ch {
                if !v.is_finite() {
                    return Err(Error::Instability {
                        l_m: self.l_m(),
                        min_q: v,
                    });
                }
                min_q = min_q.min(v);
            }
        }
        if min_q < -NEGATIVE_TOLERANCE {
            return Err(Error::Instability {
                l_m: self.l_m(),
                min_q,
            });
        }
        for ch in &mut self.channels {
            ch.iter_mut().for_each(|v| *v = v.max(0.0));
        }

        let b_end: f64 = self.boundary().iter().sum();
        self.survival *= (-h * (b_start + b_end)).exp();
        if self.n_max.is_some() {
            self.norg_survival *= (-h * (b0_start + self.channels[0][0])).exp();
        }
        Ok(())
    }

    pub fn point(&self) -> FlowPoint {
        let b = self.boundary();
        let joint = self.n_max.is_some();
        FlowPoint {
            l_m: self.l_m(),
            survival: self.survival,
            q0: b.iter().sum(),
            norm: self.norm(),
            fractions: if joint {
                fractions_from_boundary(&b)
            } else {
                None
            },
            norg_survival: joint.then_some(self.norg_survival),
        }
    }

    fn uniform(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.config.n_lambda];
        self.nodes.to_uniform(q, &mut out);
        out
    }

    /// Snapshot of the total distribution on the uniform λ grid.
    pub fn grid(&self) -> FlowGrid {
        FlowGrid {
            lambda_max: self.config.lambda_max,
            n_lambda: self.config.n_lambda,
            q: self.uniform(&self.total()),
            l_m: self.l_m(),
            p_fill: self.p_fill,
            survival: self.survival,
        }
    }

    /// Snapshot of every channel on the uniform λ grid (joint runs only).
    pub fn joint_grid(&self) -> Option<JointFlowGrid> {
        let n_max = self.n_max?;
        Some(JointFlowGrid {
            n_max,
            q_n: self.channels.iter().map(|ch| self.uniform(ch)).collect(),
            lambda_max: self.config.lambda_max,
            n_lambda: self.config.n_lambda,
            l_m: self.l_m(),
            p_fill: self.p_fill,
            survival: self.survival,
            norg_survival: self.norg_survival,
        })
    }

    /// Integrates to `lm_end`, recording every `record_every` steps and at
    /// both ends.
    pub fn run(mut self) -> Result<FlowHistory> {
        let span = (self.config.lm_end / self.lm_start).ln();
        let n_steps = (span / self.config.dlnlm - 1e-9).ceil().max(0.0) as usize;
        let mut points = vec![self.point()];
        for k in 1..=n_steps {
            self.step()?;
            if k % self.config.record_every == 0 || k == n_steps {
                points.push(self.point());
            }
        }
        Ok(FlowHistory {
            p_fill: self.p_fill,
            config: self.config,
            points,
        })
    }
}
