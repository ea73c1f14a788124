//! Model predictive path integral optimizer.
//!
//! Each iteration perturbs a nominal control sequence with Gaussian noise,
//! rolls every sample out through the dynamics while summing a
//! [`CostStack`], and replaces the nominal with the exponentially weighted
//! average of the samples. The first command of the average is executed and
//! the rest is shifted forward by one control period to warm-start the next
//! iteration.

use nalgebra::Vector4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::{CostBreakdown, CostStack};
use crate::dynamics::{ControlCommand, QuadModel, QuadState};
use crate::error::{Error, Result};

fn d_samples() -> usize {
    10_000
}
fn d_horizon() -> usize {
    15
}
fn d_temperature() -> f64 {
    0.05
}
fn d_dt_pred() -> f64 {
    0.1
}
fn d_dt_ctrl() -> f64 {
    0.02
}
fn d_sigma() -> [f64; 4] {
    [0.3, 1.0, 1.0, 0.3]
}
fn d_correlation() -> f64 {
    0.9
}
fn d_sentinel() -> f64 {
    1e9
}
fn d_true() -> bool {
    true
}

/// Optimizer settings. `sigma` is the per-channel noise standard deviation
/// over (c, ωx, ωy, ωz).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MppiConfig {
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_horizon")]
    pub horizon: usize,
    #[serde(default = "d_temperature")]
    pub temperature: f64,
    #[serde(default = "d_dt_pred")]
    pub dt_pred: f64,
    #[serde(default = "d_dt_ctrl")]
    pub dt_ctrl: f64,
    #[serde(default = "d_sigma")]
    pub sigma: [f64; 4],
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_sentinel")]
    pub sentinel_cost: f64,
    /// Lag-one correlation of the noise along the horizon. The noise starts
    /// from rest, so entry k has deviation `sigma * sqrt(1 - rho^(2k + 2))`;
    /// zero gives independent entries.
    #[serde(default = "d_correlation")]
    pub noise_correlation: f64,
    /// Replace the first sample with the unperturbed nominal.
    #[serde(default = "d_true")]
    pub keep_nominal: bool,
}

impl Default for MppiConfig {
    fn default() -> Self {
        Self {
            samples: d_samples(),
            horizon: d_horizon(),
            temperature: d_temperature(),
            dt_pred: d_dt_pred(),
            dt_ctrl: d_dt_ctrl(),
            sigma: d_sigma(),
            seed: 0,
            sentinel_cost: d_sentinel(),
            noise_correlation: d_correlation(),
            keep_nominal: true,
        }
    }
}

impl MppiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.horizon == 0 {
            return Err(Error::InvalidParameter("samples and horizon must be at least 1".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidParameter("temperature must be positive".into()));
        }
        if !(self.dt_ctrl > 0.0 && self.dt_pred >= self.dt_ctrl && self.dt_pred.is_finite()) {
            return Err(Error::InvalidParameter("time steps must satisfy dt_pred >= dt_ctrl > 0".into()));
        }
        if self.sigma.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter("sigma entries must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.noise_correlation) {
            return Err(Error::InvalidParameter("noise_correlation must lie in [0, 1)".into()));
        }
        if !(self.sentinel_cost > 0.0 && self.sentinel_cost.is_finite()) {
            return Err(Error::InvalidParameter("sentinel cost must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Commands spaced `dt_pred` apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence {
    pub commands: Vec<ControlCommand>,
}

impl ControlSequence {
    pub fn constant(u: ControlCommand, horizon: usize) -> Self {
        Self { commands: vec![u; horizon] }
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn first(&self) -> ControlCommand {
        self.commands[0]
    }

    pub fn is_finite(&self) -> bool {
        self.commands.iter().all(ControlCommand::is_finite)
    }
}

/// Adds zero-mean Gaussian noise with per-channel deviation `sigma` to every
/// entry of the nominal. Along the horizon the noise follows a first-order
/// autoregression with coefficient `noise_correlation`, started from zero.
///
/// With `keep_nominal` the first sample is the nominal itself; the noise
/// stream is drawn identically either way.
pub fn sample_controls<R: Rng + ?Sized>(
    nominal: &ControlSequence,
    cfg: &MppiConfig,
    rng: &mut R,
) -> Vec<ControlSequence> {
    let sigma = Vector4::from(cfg.sigma);
    let rho = cfg.noise_correlation;
    let innovation = (1.0 - rho * rho).sqrt();
    let mut batch: Vec<ControlSequence> = (0..cfg.samples)
        .map(|_| {
            let mut eps = Vector4::<f64>::zeros();
            let commands = nominal
                .commands
                .iter()
                .map(|u| {
                    let fresh = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                    eps = eps * rho + fresh * innovation;
                    ControlCommand::from_vector(&(u.as_vector() + eps.component_mul(&sigma)))
                })
                .collect();
            ControlSequence { commands }
        })
        .collect();
    if cfg.keep_nominal {
        batch[0] = nominal.clone();
    }
    batch
}

/// Summed cost of one sample and the breakdown of its first stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutOutcome {
    pub total_cost: f64,
    pub first_stage: CostBreakdown,
}

/// Simulates `seq` from `x0` at `dt_pred` and sums stage and terminal costs.
///
/// A rollout whose state or cost becomes non-finite is assigned
/// `cfg.sentinel_cost`.
pub fn rollout<C: CostStack + ?Sized>(
    model: &QuadModel,
    x0: &QuadState,
    seq: &ControlSequence,
    u_last: &ControlCommand,
    costs: &C,
    cfg: &MppiConfig,
) -> RolloutOutcome {
    let sentinel = RolloutOutcome { total_cost: cfg.sentinel_cost, first_stage: CostBreakdown::default() };
    let mut x = *x0;
    let mut prev = *u_last;
    let mut total = 0.0;
    let mut first_stage = CostBreakdown::default();
    for (i, u) in seq.commands.iter().enumerate() {
        let stage = costs.stage(&x, u, &prev, i);
        if i == 0 {
            first_stage = stage;
        }
        total += stage.total();
        x = match model.step(&x, u, cfg.dt_pred) {
            Ok(next) => next,
            Err(_) => return sentinel,
        };
        prev = *u;
    }
    total += costs.terminal(&x);
    if total.is_finite() && total < cfg.sentinel_cost {
        RolloutOutcome { total_cost: total, first_stage }
    } else {
        sentinel
    }
}

/// Softmax weights `exp(-(L - L_min) / λ)`, normalized.
///
/// Costs at or above `sentinel` get zero weight; if every cost does, the
/// optimizer is starved.
pub fn weights(costs: &[f64], temperature: f64, sentinel: f64) -> Result<Vec<f64>> {
    let valid = |c: f64| c.is_finite() && c < sentinel;
    let l_min = costs.iter().copied().filter(|&c| valid(c)).fold(f64::INFINITY, f64::min);
    if !l_min.is_finite() {
        return Err(Error::Starvation(costs.len()));
    }
    let mut w: Vec<f64> = costs
        .iter()
        .map(|&c| if valid(c) { (-(c - l_min) / temperature).exp() } else { 0.0 })
        .collect();
    let sum: f64 = w.iter().sum();
    for x in &mut w {
        *x /= sum;
    }
    Ok(w)
}

/// Weighted average of the samples, accumulated in sample order.
///
/// The average is formed relative to the first sample, so a batch of
/// identical samples reproduces that sample exactly.
pub fn update(samples: &[ControlSequence], w: &[f64]) -> ControlSequence {
    let pivot = &samples[0];
    let mut acc = vec![Vector4::<f64>::zeros(); pivot.len()];
    for (seq, &wj) in samples.iter().zip(w) {
        if wj == 0.0 {
            continue;
        }
        for (a, (u, p)) in acc.iter_mut().zip(seq.commands.iter().zip(&pivot.commands)) {
            *a += (u.as_vector() - p.as_vector()) * wj;
        }
    }
    ControlSequence {
        commands: pivot
            .commands
            .iter()
            .zip(&acc)
            .map(|(p, a)| ControlCommand::from_vector(&(p.as_vector() + a)))
            .collect(),
    }
}

/// Shifts a sequence forward by `dt_ctrl`, resampling at the `dt_pred`
/// knots by linear interpolation and holding the last command past the end.
pub fn shift_warmstart(seq: &ControlSequence, dt_ctrl: f64, dt_pred: f64) -> ControlSequence {
    let h = seq.len();
    let shift = dt_ctrl / dt_pred;
    let commands = (0..h)
        .map(|i| {
            let x = i as f64 + shift;
            let k = x.floor() as usize;
            if k + 1 >= h {
                return seq.commands[h - 1];
            }
            let f = x - k as f64;
            let a = seq.commands[k].as_vector();
            let b = seq.commands[k + 1].as_vector();
            ControlCommand::from_vector(&(a + (b - a) * f))
        })
        .collect();
    ControlSequence { commands }
}

/// Per-iteration optimizer statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub l_min: f64,
    /// Effective sample size `1 / Σ w²`.
    pub ess: f64,
    pub mean_cost: f64,
    /// Cost of the averaged sequence, re-rolled on the same stack.
    pub updated_cost: f64,
    /// Stage cost of the executed command at the current state.
    pub executed: CostBreakdown,
    pub valid_samples: usize,
}

/// Result of one optimizer iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub command: ControlCommand,
    pub updated: ControlSequence,
    pub next_nominal: ControlSequence,
    pub diagnostics: Diagnostics,
}

/// One full iteration: sample, roll out in parallel, weight, average.
#[allow(clippy::too_many_arguments)]
pub fn control_step<C: CostStack + ?Sized, R: Rng + ?Sized>(
    model: &QuadModel,
    x: &QuadState,
    nominal: &ControlSequence,
    u_last: &ControlCommand,
    costs: &C,
    cfg: &MppiConfig,
    rng: &mut R,
) -> Result<StepOutput> {
    let samples = sample_controls(nominal, cfg, rng);
    let outcomes: Vec<f64> = samples
        .par_iter()
        .map(|seq| rollout(model, x, seq, u_last, costs, cfg).total_cost)
        .collect();
    let w = weights(&outcomes, cfg.temperature, cfg.sentinel_cost)?;
    let updated = update(&samples, &w);

    let valid: Vec<f64> = outcomes.iter().copied().filter(|&c| c < cfg.sentinel_cost).collect();
    let l_min = valid.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_cost = valid.iter().sum::<f64>() / valid.len() as f64;
    let ess = 1.0 / w.iter().map(|x| x * x).sum::<f64>();
    let updated_outcome = rollout(model, x, &updated, u_last, costs, cfg);
    let command = updated.first();
    let diagnostics = Diagnostics {
        l_min,
        ess,
        mean_cost,
        updated_cost: updated_outcome.total_cost,
        executed: costs.stage(x, &command, u_last, 0),
        valid_samples: valid.len(),
    };
    let next_nominal = shift_warmstart(&updated, cfg.dt_ctrl, cfg.dt_pred);
    Ok(StepOutput { command, updated, next_nominal, diagnostics })
}

/// Stateful controller carrying the warm start, the last executed command
/// and a seeded noise source.
#[derive(Clone, Debug)]
pub struct Mppi {
    model: QuadModel,
    cfg: MppiConfig,
    nominal: ControlSequence,
    u_last: ControlCommand,
    rng: ChaCha8Rng,
}

impl Mppi {
    /// Starts from a hover nominal.
    pub fn new(model: QuadModel, cfg: MppiConfig) -> Result<Self> {
        cfg.validate()?;
        let hover = model.params().hover_command();
        Ok(Self {
            nominal: ControlSequence::constant(hover, cfg.horizon),
            u_last: hover,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            model,
            cfg,
        })
    }

    pub fn config(&self) -> &MppiConfig {
        &self.cfg
    }

    pub fn model(&self) -> &QuadModel {
        &self.model
    }

    pub fn nominal(&self) -> &ControlSequence {
        &self.nominal
    }

    pub fn last_command(&self) -> ControlCommand {
        self.u_last
    }

    /// Runs one iteration and advances the warm start.
    pub fn step<C: CostStack + ?Sized>(&mut self, x: &QuadState, costs: &C) -> Result<StepOutput> {
        let out = control_step(&self.model, x, &self.nominal, &self.u_last, costs, &self.cfg, &mut self.rng)?;
        self.nominal = out.next_nominal.clone();
        self.u_last = out.command;
        Ok(out)
    }
}
