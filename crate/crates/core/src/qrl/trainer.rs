use alloc::vec::Vec;

use crate::env::{Obs, TransitionDataset, TransitionRecord};
use crate::error::{check_len, Error, Result};
use crate::nn::{cosine_lr, sigmoid, AdamConfig, AdamState};
use crate::quasimetric::{CriticGrads, CriticSpec, HeadKind, QuasimetricCritic};
use crate::rng::{self, Rng};
use crate::{Matrix, Real};

use super::config::{DualState, QrlConfig};
use super::objective::{obs_matrix, phi, phi_grad};
use super::sampler::{sample_goals, sample_transitions};

/// One logged training step.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRow {
    /// Number of completed updates.
    pub step: u64,
    pub lambda: f64,
    /// `E[φ(d(s, g))]` on the batch.
    pub pull: f64,
    /// `E[relu(d(s, s') + r)²]` on the batch.
    pub constraint: f64,
    pub transition: f64,
    pub lr_model: f64,
    pub lr_lambda: f64,
    /// `max(0, max_batch(d(s, s') + r))`.
    pub max_overshoot: f64,
}

/// Batch terms of the Lagrangian at the current parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub pull: f64,
    pub constraint: f64,
    pub transition: f64,
    pub max_overshoot: f64,
    /// `-pull + λ (constraint - ε²) + w_T · transition`.
    pub total: f64,
}

/// A transition batch with an index-aligned goal batch.
#[derive(Clone, Debug, PartialEq)]
pub struct QrlBatch {
    pub records: Vec<TransitionRecord>,
    pub goals: Vec<Obs>,
}

/// Value of the Lagrangian on `batch` at multiplier `lambda`, and its
/// gradient with respect to every critic parameter (λ held constant).
pub fn loss_and_grads<T: Real>(
    critic: &QuasimetricCritic<T>,
    batch: &QrlBatch,
    lambda: f64,
    config: &QrlConfig,
) -> Result<(LossParts, CriticGrads<T>)> {
    let b = batch.records.len();
    check_len("goal batch", b, batch.goals.len())?;
    if b == 0 {
        return Err(Error::EmptyBatch);
    }
    let recs = &batch.records;
    let x = obs_matrix::<T>(
        recs.iter()
            .map(|r| &r.s)
            .chain(recs.iter().map(|r| &r.s_next))
            .chain(batch.goals.iter()),
    );
    let (z, enc_tape) = critic.encode_tape(&x)?;
    let real: Vec<usize> = (0..b).filter(|&i| recs[i].is_real()).collect();
    let nr = real.len();
    let d = critic.spec().latent_dim;
    let mut zr = Matrix::zeros(nr, d);
    for (j, &i) in real.iter().enumerate() {
        zr.row_mut(j).copy_from_slice(z.row(i));
    }
    let actions: Vec<usize> = real.iter().map(|&i| recs[i].a as usize).collect();
    let (zhat, trans_tape) = critic.transition_tape(&zr, &actions)?;
    let (p, proj_tape) = critic.project_tape(&Matrix::vstack(&[&z, &zhat])?)?;

    let mut pairs = Vec::with_capacity(2 * b + 2 * nr);
    pairs.extend((0..b).map(|i| (i, 2 * b + i)));
    pairs.extend((0..b).map(|i| (i, b + i)));
    for (j, &i) in real.iter().enumerate() {
        pairs.push((3 * b + j, b + i));
        pairs.push((b + i, 3 * b + j));
    }
    let (dist, head_tape) = critic.head_distances_tape(&p, &pairs)?;

    let bf = b as f64;
    let (c, beta) = (config.phi_offset, config.phi_beta);
    let mut dout = vec![T::zero(); pairs.len()];
    let mut parts = LossParts::default();
    for i in 0..b {
        let dv = dist[i].as_f64();
        parts.pull += phi(dv, c, beta) / bf;
        dout[i] = T::of(-phi_grad(dv, c, beta) / bf);
    }
    for i in 0..b {
        let over = dist[b + i].as_f64() + recs[i].r as f64;
        parts.max_overshoot = parts.max_overshoot.max(over);
        let h = over.max(0.0);
        parts.constraint += h * h / bf;
        dout[b + i] = T::of(lambda * 2.0 * h / bf);
    }
    if nr > 0 {
        let w = config.transition_loss_weight;
        for k in 2 * b..pairs.len() {
            let dv = dist[k].as_f64();
            parts.transition += 0.5 * dv * dv / nr as f64;
            dout[k] = T::of(w * dv / nr as f64);
        }
    }
    let eps2 = config.epsilon * config.epsilon;
    parts.total =
        -parts.pull + lambda * (parts.constraint - eps2) + config.transition_loss_weight * parts.transition;
    if !parts.total.is_finite() {
        return Err(Error::Divergence {
            step: 0,
            what: alloc::format!("non-finite loss {:?}", parts),
        });
    }

    let mut grads = CriticGrads::zeros_like(critic);
    let mut gp = Matrix::zeros(p.rows(), p.cols());
    head_tape.backward_into(&dout, &mut gp, &mut grads.head)?;
    let gzz = proj_tape.backward_into(&gp, &mut grads.projector)?;
    let mut gz = gzz.slice_rows(0, 3 * b);
    if nr > 0 {
        let gzhat = gzz.slice_rows(3 * b, 3 * b + nr);
        let gzr = trans_tape.backward_into(&gzhat, &mut grads.transition)?;
        for (j, &i) in real.iter().enumerate() {
            for (x, &y) in gz.row_mut(i).iter_mut().zip(gzr.row(j)) {
                *x += y;
            }
        }
    }
    enc_tape.backward_into(&gz, &mut grads.encoder)?;
    Ok((parts, grads))
}

/// Joint primal-dual optimizer state for one QRL run.
#[derive(Clone, Debug)]
pub struct QrlTrainer {
    critic: QuasimetricCritic<f32>,
    dual: DualState,
    config: QrlConfig,
    optim: [AdamState<f32>; 4],
    dual_optim: AdamState<f64>,
    rng: Rng,
    step: u64,
}

impl QrlTrainer {
    /// Fresh critic and multiplier. With `symmetric_ablation` the head is
    /// replaced by a symmetric Euclidean one of the same width.
    pub fn new(mut spec: CriticSpec, config: QrlConfig) -> Result<Self> {
        if config.epsilon <= 0.0 || config.lambda_init <= 0.0 {
            return Err(Error::InvalidSpec("epsilon and lambda_init must be positive"));
        }
        if !(0.0..=1.0).contains(&config.goal_mix_prob) {
            return Err(Error::InvalidSpec("goal_mix_prob must lie in [0, 1]"));
        }
        if config.batch_size == 0 {
            return Err(Error::InvalidSpec("batch_size must be positive"));
        }
        if config.symmetric_ablation {
            spec.head = HeadKind::SymmetricL2 {
                width: spec.head.width(),
            };
        }
        let critic = QuasimetricCritic::new(spec, config.seed)?;
        Ok(Self::from_critic(critic, config))
    }

    pub fn from_critic(critic: QuasimetricCritic<f32>, config: QrlConfig) -> Self {
        let cfg = AdamConfig::with_lr(config.lr_model);
        let optim = critic.param_groups().map(|g| AdamState::new(g.len(), cfg));
        Self {
            dual: DualState::new(config.lambda_init),
            dual_optim: AdamState::new(1, AdamConfig::with_lr(config.lr_lambda)),
            rng: rng::substream(config.seed, u64::MAX - 1),
            critic,
            config,
            optim,
            step: 0,
        }
    }

    pub fn critic(&self) -> &QuasimetricCritic<f32> {
        &self.critic
    }

    pub fn into_critic(self) -> QuasimetricCritic<f32> {
        self.critic
    }

    pub fn dual(&self) -> DualState {
        self.dual
    }

    pub fn config(&self) -> &QrlConfig {
        &self.config
    }

    pub fn steps_done(&self) -> u64 {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.config.total_steps
    }

    /// Draws the next batch from the trainer's stream.
    pub fn sample_batch(&mut self, dataset: &TransitionDataset) -> Result<QrlBatch> {
        let idx = sample_transitions(dataset, self.config.batch_size, &mut self.rng)?;
        let goals = sample_goals(dataset, self.config.batch_size, self.config.goal_mix_prob, &mut self.rng)?;
        Ok(QrlBatch {
            records: idx.iter().map(|&i| dataset.records[i]).collect(),
            goals,
        })
    }

    /// One simultaneous update of θ (descent, cosine learning rate) and
    /// `lambda_raw` (ascent, constant learning rate) on `batch`.
    pub fn step_on(&mut self, batch: &QrlBatch) -> Result<TraceRow> {
        let lambda = self.dual.lambda();
        let (parts, grads) = loss_and_grads(&self.critic, batch, lambda, &self.config).map_err(|e| match e {
            Error::Divergence { what, .. } => Error::Divergence { step: self.step, what },
            e => e,
        })?;
        let lr = cosine_lr(self.step, self.config.total_steps.max(1), self.config.lr_model)?;
        for ((params, g), opt) in self
            .critic
            .param_groups_mut()
            .into_iter()
            .zip(grads.groups())
            .zip(self.optim.iter_mut())
        {
            opt.step_with_lr(params, g, lr).map_err(|e| match e {
                Error::Divergence { what, .. } => Error::Divergence { step: self.step, what },
                e => e,
            })?;
        }
        let eps2 = self.config.epsilon * self.config.epsilon;
        let raw = self.dual.lambda_raw;
        // Ascent on λ expressed as descent on the negated objective.
        let g = -(parts.constraint - eps2) * sigmoid(raw);
        let mut p = [raw];
        self.dual_optim.step(&mut p, &[g])?;
        self.dual.lambda_raw = p[0];
        self.step += 1;
        Ok(TraceRow {
            step: self.step,
            lambda: self.dual.lambda(),
            pull: parts.pull,
            constraint: parts.constraint,
            transition: parts.transition,
            lr_model: lr,
            lr_lambda: self.config.lr_lambda,
            max_overshoot: parts.max_overshoot.max(0.0),
        })
    }

    pub fn step(&mut self, dataset: &TransitionDataset) -> Result<TraceRow> {
        let batch = self.sample_batch(dataset)?;
        self.step_on(&batch)
    }

    /// Runs to `total_steps`, passing every `log_interval`-th row (and the
    /// last) to `on_log` together with the current critic.
    pub fn run(
        &mut self,
        dataset: &TransitionDataset,
        mut on_log: impl FnMut(&TraceRow, &QuasimetricCritic<f32>),
    ) -> Result<Vec<TraceRow>> {
        let every = self.config.log_interval.max(1);
        let mut trace = Vec::new();
        while !self.is_done() {
            let row = self.step(dataset)?;
            if row.step % every == 0 || row.step == self.config.total_steps {
                on_log(&row, &self.critic);
                trace.push(row);
            }
        }
        Ok(trace)
    }
}

/// Trains a fresh critic on `dataset` and returns it with the logged trace.
pub fn train(
    dataset: &TransitionDataset,
    spec: CriticSpec,
    config: &QrlConfig,
) -> Result<(QuasimetricCritic<f32>, Vec<TraceRow>)> {
    if config.goal_mix_prob > 0.0 && dataset.goal_record_count() == 0 {
        return Err(Error::InvalidSpec("goal mixing needs goal-set coverage in the dataset"));
    }
    let mut t = QrlTrainer::new(spec, config.clone())?;
    let trace = t.run(dataset, |_, _| {})?;
    Ok((t.into_critic(), trace))
}
