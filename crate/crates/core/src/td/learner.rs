use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::env::{DiscreteEnv, Obs, TransitionDataset, TransitionRecord, GOAL_TOKEN};
use crate::error::{check_len, Error, Result};
use crate::nn::{AdamConfig, AdamState, InputNorm, MlpParams, MlpSpec};
use crate::qrl::{EvalGoal, GoalPolicy};
use crate::quasimetric::{CriticSpec, QuasimetricCritic};
use crate::rng::{self, Rng};
use crate::{Matrix, Real};

use super::relabel::relabel_goal;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum QHeadKind {
    /// `(s, g) ↦ Q(s, ·; g)` with a plain MLP.
    MonolithicMlp,
    /// `Q(s, a; g) = -(d^z(T(f(s), a), f(g)) + 1)` with the QRL critic.
    Quasimetric,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QLearnConfig {
    pub discount: f64,
    pub target_update_interval: u64,
    pub target_ema: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub total_steps: u64,
    pub relabel_geometric_p: f64,
    /// Probability of relabeling with the goal token instead of a future state.
    pub goal_mix_prob: f64,
    pub seed: u64,
    pub head: QHeadKind,
    /// Weight of the latent transition loss (quasimetric head only).
    pub transition_loss_weight: f64,
    pub log_interval: u64,
}

impl QLearnConfig {
    pub fn full_scale() -> Self {
        Self {
            discount: 0.95,
            target_update_interval: 2,
            target_ema: 0.005,
            lr: 1e-3,
            batch_size: 4096,
            total_steps: 500_000,
            relabel_geometric_p: 0.3,
            goal_mix_prob: 0.05,
            seed: 0,
            head: QHeadKind::MonolithicMlp,
            transition_loss_weight: 5.0,
            log_interval: 1000,
        }
    }

    pub fn desk() -> Self {
        Self {
            batch_size: 512,
            total_steps: 30_000,
            log_interval: 500,
            ..Self::full_scale()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::InvalidSpec("discount must lie in (0, 1]"));
        }
        if !(self.target_ema > 0.0 && self.target_ema <= 1.0) {
            return Err(Error::InvalidSpec("target_ema must lie in (0, 1]"));
        }
        if !(self.relabel_geometric_p > 0.0 && self.relabel_geometric_p < 1.0) {
            return Err(Error::InvalidSpec("relabel_geometric_p must lie in (0, 1)"));
        }
        if self.batch_size == 0 || self.target_update_interval == 0 {
            return Err(Error::InvalidSpec("batch_size and target_update_interval must be positive"));
        }
        Ok(())
    }
}

/// Goal-conditioned action-value network.
#[derive(Clone, Debug, PartialEq)]
pub enum QNetwork<T> {
    Monolithic { input_norm: InputNorm, mlp: MlpParams<T> },
    Quasimetric(QuasimetricCritic<T>),
}

fn obs_rows<T: Real>(obs: &[Obs]) -> Matrix<T> {
    let data = obs.iter().flat_map(|o| o.iter().map(|&x| T::of(x as f64))).collect();
    Matrix::from_vec(obs.len(), 3, data).expect("three columns")
}

impl<T: Real> QNetwork<T> {
    /// MLP over the concatenated (normalized) state and goal.
    pub fn monolithic(input_norm: InputNorm, hidden: &[usize], num_actions: usize, seed: u64) -> Result<Self> {
        if input_norm.dim() != 3 {
            return Err(Error::InvalidSpec("monolithic head expects three-dimensional observations"));
        }
        let mut widths = vec![6];
        widths.extend_from_slice(hidden);
        widths.push(num_actions);
        let mlp = MlpParams::init(MlpSpec::relu(&widths)?, seed)?;
        Ok(QNetwork::Monolithic { input_norm, mlp })
    }

    pub fn quasimetric(spec: CriticSpec, seed: u64) -> Result<Self> {
        Ok(QNetwork::Quasimetric(QuasimetricCritic::new(spec, seed)?))
    }

    pub fn kind(&self) -> QHeadKind {
        match self {
            QNetwork::Monolithic { .. } => QHeadKind::MonolithicMlp,
            QNetwork::Quasimetric(_) => QHeadKind::Quasimetric,
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            QNetwork::Monolithic { mlp, .. } => mlp.spec().output_width(),
            QNetwork::Quasimetric(c) => c.spec().num_actions,
        }
    }

    pub fn param_groups(&self) -> Vec<&[T]> {
        match self {
            QNetwork::Monolithic { mlp, .. } => vec![mlp.as_slice()],
            QNetwork::Quasimetric(c) => c.param_groups().to_vec(),
        }
    }

    pub fn param_groups_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            QNetwork::Monolithic { mlp, .. } => vec![mlp.as_mut_slice()],
            QNetwork::Quasimetric(c) => c.param_groups_mut().into_iter().collect(),
        }
    }

    /// `θ ← (1 - τ) θ + τ θ_src`.
    pub fn ema_from(&mut self, src: &Self, tau: f64) -> Result<()> {
        let tau = T::of(tau);
        let one = T::one();
        let groups = src.param_groups();
        let mine = self.param_groups_mut();
        check_len("ema parameter groups", groups.len(), mine.len())?;
        for (dst, s) in mine.into_iter().zip(groups) {
            check_len("ema group", s.len(), dst.len())?;
            for (d, &x) in dst.iter_mut().zip(s) {
                *d = (one - tau) * *d + tau * x;
            }
        }
        Ok(())
    }

    fn monolithic_input(input_norm: &InputNorm, s: &[Obs], g: &[Obs]) -> Result<Matrix<T>> {
        let ns = input_norm.apply(&obs_rows::<T>(s))?;
        let ng = input_norm.apply(&obs_rows::<T>(g))?;
        let mut x = Matrix::zeros(s.len(), 6);
        for i in 0..s.len() {
            x.row_mut(i)[..3].copy_from_slice(ns.row(i));
            x.row_mut(i)[3..].copy_from_slice(ng.row(i));
        }
        Ok(x)
    }

    /// `Q(s_i, a; g_i)` for every action, row-major `B × |A|`, assuming unit
    /// step cost for the quasimetric head.
    pub fn q_values(&self, s: &[Obs], g: &[Obs]) -> Result<Vec<f64>> {
        check_len("q_values goals", s.len(), g.len())?;
        let b = s.len();
        match self {
            QNetwork::Monolithic { input_norm, mlp } => Ok(mlp
                .infer(&Self::monolithic_input(input_norm, s, g)?)?
                .into_vec()
                .into_iter()
                .map(|x| x.as_f64())
                .collect()),
            QNetwork::Quasimetric(c) => {
                let na = c.spec().num_actions;
                let x = obs_rows::<T>(s);
                let z = c.encode(&Matrix::vstack(&[&x, &obs_rows::<T>(g)])?)?;
                let mut zs = Matrix::zeros(b * na, z.cols());
                let mut actions = Vec::with_capacity(b * na);
                for i in 0..b {
                    for a in 0..na {
                        zs.row_mut(i * na + a).copy_from_slice(z.row(i));
                        actions.push(a);
                    }
                }
                let zhat = c.transition_batch(&zs, &actions)?;
                let p = c.project(&Matrix::vstack(&[&zhat, &z.slice_rows(b, 2 * b)])?)?;
                let pairs: Vec<_> = (0..b * na).map(|k| (k, b * na + k / na)).collect();
                Ok(c.head_distances(&p, &pairs)?
                    .into_iter()
                    .map(|d| -(d.as_f64() + 1.0))
                    .collect())
            }
        }
    }

    /// `max_a Q(s, a; g)` for every concrete state of `env`.
    pub fn value_table(&self, env: &dyn DiscreteEnv, goal: &Obs) -> Result<Vec<f64>> {
        let n = env.num_states();
        let na = self.num_actions();
        let s: Vec<Obs> = (0..n).map(|i| env.observe(i)).collect();
        let q = self.q_values(&s, &vec![*goal; n])?;
        Ok(q.chunks(na).map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect())
    }

    /// TD and transition losses on `batch` and their parameter gradients,
    /// one buffer per parameter group.
    pub fn loss_and_grads(&self, batch: &TdBatch, transition_weight: f64) -> Result<(f64, f64, Vec<Vec<T>>)> {
        let b = batch.records.len();
        check_len("td goals", b, batch.goals.len())?;
        check_len("td targets", b, batch.targets.len())?;
        if b == 0 {
            return Err(Error::EmptyBatch);
        }
        let na = self.num_actions();
        for r in &batch.records {
            if !r.is_real() || r.a as usize >= na {
                return Err(Error::InvalidAction {
                    action: r.a as i64,
                    num_actions: na,
                });
            }
        }
        let bf = b as f64;
        let mut grads: Vec<Vec<T>> = self.param_groups().iter().map(|g| vec![T::zero(); g.len()]).collect();
        let s: Vec<Obs> = batch.records.iter().map(|r| r.s).collect();
        match self {
            QNetwork::Monolithic { input_norm, mlp } => {
                let (out, tape) = mlp.forward(&Self::monolithic_input(input_norm, &s, &batch.goals)?)?;
                let mut dout = Matrix::zeros(b, na);
                let mut td = 0.0;
                for (i, r) in batch.records.iter().enumerate() {
                    let a = r.a as usize;
                    let err = out.get(i, a).as_f64() - batch.targets[i];
                    td += 0.5 * err * err / bf;
                    dout.set(i, a, T::of(err / bf));
                }
                tape.backward_into(&dout, &mut grads[0])?;
                Ok((td, 0.0, grads))
            }
            QNetwork::Quasimetric(c) => {
                let sn: Vec<Obs> = batch.records.iter().map(|r| r.s_next).collect();
                let x = Matrix::vstack(&[&obs_rows::<T>(&s), &obs_rows(&sn), &obs_rows(&batch.goals)])?;
                let (z, enc) = c.encode_tape(&x)?;
                let actions: Vec<usize> = batch.records.iter().map(|r| r.a as usize).collect();
                let (zhat, tr) = c.transition_tape(&z.slice_rows(0, b), &actions)?;
                let (p, proj) = c.project_tape(&Matrix::vstack(&[&z, &zhat])?)?;
                let mut pairs: Vec<(usize, usize)> = (0..b).map(|i| (3 * b + i, 2 * b + i)).collect();
                for i in 0..b {
                    pairs.push((3 * b + i, b + i));
                    pairs.push((b + i, 3 * b + i));
                }
                let (dist, head) = c.head_distances_tape(&p, &pairs)?;
                let mut dout = vec![T::zero(); pairs.len()];
                let (mut td, mut trans) = (0.0, 0.0);
                for (i, r) in batch.records.iter().enumerate() {
                    let q = r.r as f64 - dist[i].as_f64();
                    let err = q - batch.targets[i];
                    td += 0.5 * err * err / bf;
                    dout[i] = T::of(-err / bf);
                }
                for k in b..pairs.len() {
                    let d = dist[k].as_f64();
                    trans += 0.5 * d * d / bf;
                    dout[k] = T::of(transition_weight * d / bf);
                }
                let [ge, gp, gt, gh] = &mut grads[..] else {
                    unreachable!("critic has four parameter groups")
                };
                let mut gpm = Matrix::zeros(p.rows(), p.cols());
                head.backward_into(&dout, &mut gpm, gh)?;
                let gzz = proj.backward_into(&gpm, gp)?;
                let mut gz = gzz.slice_rows(0, 3 * b);
                let gzs = tr.backward_into(&gzz.slice_rows(3 * b, 4 * b), gt)?;
                for i in 0..b {
                    for (x, &y) in gz.row_mut(i).iter_mut().zip(gzs.row(i)) {
                        *x += y;
                    }
                }
                enc.backward_into(&gz, ge)?;
                Ok((td, trans, grads))
            }
        }
    }
}

impl<T: Real> GoalPolicy for QNetwork<T> {
    fn action_table(&self, env: &dyn DiscreteEnv, goal: &EvalGoal) -> Result<Vec<usize>> {
        let n = env.num_states();
        let na = self.num_actions();
        let s: Vec<Obs> = (0..n).map(|i| env.observe(i)).collect();
        let q = self.q_values(&s, &vec![goal.observation(env); n])?;
        Ok(q.chunks(na)
            .map(|row| {
                let mut best = 0;
                for (a, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = a;
                    }
                }
                best
            })
            .collect())
    }
}

fn obs_key(o: &Obs) -> [u32; 3] {
    [o[0].to_bits(), o[1].to_bits(), o[2].to_bits()]
}

/// Dataset views shared by every TD step.
#[derive(Clone, Debug)]
pub struct TdData<'a> {
    pub dataset: &'a TransitionDataset,
    pub ends: Vec<usize>,
    /// Real records with at least one future state.
    pub real: Vec<usize>,
    goal_set: BTreeSet<[u32; 3]>,
}

impl<'a> TdData<'a> {
    pub fn new(dataset: &'a TransitionDataset) -> Result<Self> {
        let ends = dataset.real_episode_ends();
        let real: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.records[i].is_real() && i < ends[i])
            .collect();
        if real.is_empty() {
            return Err(Error::EmptyBatch);
        }
        // Goal-absorption records start from goal-set states.
        let goal_set = dataset
            .records
            .iter()
            .filter(|r| !r.is_real())
            .map(|r| obs_key(&r.s))
            .collect();
        Ok(Self {
            dataset,
            ends,
            real,
            goal_set,
        })
    }

    /// Whether arriving in `s_next` attains `goal`.
    pub fn reaches(&self, s_next: &Obs, goal: &Obs) -> bool {
        if *goal == GOAL_TOKEN {
            self.goal_set.contains(&obs_key(s_next))
        } else {
            s_next == goal
        }
    }
}

/// `r + γ max_a Q_target(s', a; g)`, with no bootstrap once `s'` attains `g`.
pub fn td_target<T: Real>(
    target: &QNetwork<T>,
    data: &TdData<'_>,
    records: &[TransitionRecord],
    goals: &[Obs],
    gamma: f64,
) -> Result<Vec<f64>> {
    let sn: Vec<Obs> = records.iter().map(|r| r.s_next).collect();
    let q = target.q_values(&sn, goals)?;
    let na = target.num_actions();
    Ok(records
        .iter()
        .zip(goals)
        .enumerate()
        .map(|(i, (r, g))| {
            if data.reaches(&r.s_next, g) {
                r.r as f64
            } else {
                let best = q[i * na..(i + 1) * na].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                r.r as f64 + gamma * best
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TdBatch {
    pub records: Vec<TransitionRecord>,
    pub goals: Vec<Obs>,
    pub targets: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TdTraceRow {
    pub step: u64,
    pub td_loss: f64,
    pub transition: f64,
    pub mean_target: f64,
    pub lr: f64,
}

/// Q-learning with a target network and hindsight relabeling.
#[derive(Clone, Debug)]
pub struct QLearner {
    net: QNetwork<f32>,
    target: QNetwork<f32>,
    config: QLearnConfig,
    optim: Vec<AdamState<f32>>,
    rng: Rng,
    step: u64,
}

impl QLearner {
    pub fn new(net: QNetwork<f32>, config: QLearnConfig) -> Result<Self> {
        config.validate()?;
        if net.kind() != config.head {
            return Err(Error::InvalidSpec("network head differs from the configured head"));
        }
        let adam = AdamConfig::with_lr(config.lr);
        let optim = net.param_groups().iter().map(|g| AdamState::new(g.len(), adam)).collect();
        Ok(Self {
            target: net.clone(),
            rng: rng::substream(config.seed, u64::MAX - 2),
            net,
            config,
            optim,
            step: 0,
        })
    }

    pub fn network(&self) -> &QNetwork<f32> {
        &self.net
    }

    pub fn target(&self) -> &QNetwork<f32> {
        &self.target
    }

    pub fn into_network(self) -> QNetwork<f32> {
        self.net
    }

    pub fn config(&self) -> &QLearnConfig {
        &self.config
    }

    pub fn steps_done(&self) -> u64 {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.config.total_steps
    }

    pub fn sample_batch(&mut self, data: &TdData<'_>) -> Result<TdBatch> {
        let cfg = &self.config;
        let mut records = Vec::with_capacity(cfg.batch_size);
        let mut goals = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let i = data.real[self.rng.random_range(0..data.real.len())];
            records.push(data.dataset.records[i]);
            goals.push(relabel_goal(
                data.dataset,
                &data.ends,
                i,
                cfg.relabel_geometric_p,
                cfg.goal_mix_prob,
                &mut self.rng,
            )?);
        }
        let targets = td_target(&self.target, data, &records, &goals, cfg.discount)?;
        Ok(TdBatch {
            records,
            goals,
            targets,
        })
    }

    pub fn step(&mut self, data: &TdData<'_>) -> Result<TdTraceRow> {
        let batch = self.sample_batch(data)?;
        let (td, trans, grads) = self.net.loss_and_grads(&batch, self.config.transition_loss_weight)?;
        if !(td.is_finite() && trans.is_finite()) {
            return Err(Error::Divergence {
                step: self.step,
                what: alloc::format!("td loss {td}, transition loss {trans}"),
            });
        }
        for ((p, g), opt) in self.net.param_groups_mut().into_iter().zip(&grads).zip(&mut self.optim) {
            opt.step(p, g).map_err(|e| match e {
                Error::Divergence { what, .. } => Error::Divergence { step: self.step, what },
                e => e,
            })?;
        }
        self.step += 1;
        if self.step % self.config.target_update_interval == 0 {
            self.target.ema_from(&self.net, self.config.target_ema)?;
        }
        Ok(TdTraceRow {
            step: self.step,
            td_loss: td,
            transition: trans,
            mean_target: batch.targets.iter().sum::<f64>() / batch.targets.len() as f64,
            lr: self.config.lr,
        })
    }

    pub fn run(
        &mut self,
        data: &TdData<'_>,
        mut on_log: impl FnMut(&TdTraceRow, &QNetwork<f32>),
    ) -> Result<Vec<TdTraceRow>> {
        let every = self.config.log_interval.max(1);
        let mut trace = Vec::new();
        while !self.is_done() {
            let row = self.step(data)?;
            if row.step % every == 0 || row.step == self.config.total_steps {
                on_log(&row, &self.net);
                trace.push(row);
            }
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{exhaustive_dataset, generate_dataset, GridWorld, MountainCar};
    use crate::oracle::{check_quasimetric, DistanceMatrix};
    use crate::quasimetric::HeadKind;
    use crate::td::discounted_cost;
    use approx::assert_abs_diff_eq;

    fn qspec(num_actions: usize) -> CriticSpec {
        CriticSpec {
            obs_dim: 3,
            input_norm: InputNorm::identity(3),
            num_actions,
            encoder_hidden: vec![10],
            latent_dim: 6,
            projector_hidden: vec![10],
            head: HeadKind::Iqe {
                components: 3,
                component_size: 4,
            },
            transition_hidden: vec![8],
        }
    }

    fn fd_check(mut net: QNetwork<f64>, batch: &TdBatch) {
        let w = 2.0;
        let (_, _, grads) = net.loss_and_grads(batch, w).unwrap();
        let loss = |n: &QNetwork<f64>| {
            let (a, b, _) = n.loss_and_grads(batch, w).unwrap();
            a + w * b
        };
        let (mut diff, mut norm) = (0.0, 0.0);
        let h = 1e-6;
        for gi in 0..grads.len() {
            for k in 0..grads[gi].len() {
                let orig = net.param_groups()[gi][k];
                net.param_groups_mut()[gi][k] = orig + h;
                let up = loss(&net);
                net.param_groups_mut()[gi][k] = orig - h;
                let down = loss(&net);
                net.param_groups_mut()[gi][k] = orig;
                let num = (up - down) / (2.0 * h);
                diff += (num - grads[gi][k]).powi(2);
                norm += num * num;
            }
        }
        assert!(norm > 0.0);
        assert!(diff.sqrt() / norm.sqrt() < 1e-4, "{}", diff.sqrt() / norm.sqrt());
    }

    fn batch(n: usize, na: usize) -> TdBatch {
        let mut r = rng::seeded(9);
        let mut o = || [r.random_range(-1.0f32..1.0), r.random_range(-1.0f32..1.0), 0.0];
        let records: Vec<_> = (0..n)
            .map(|i| TransitionRecord {
                s: o(),
                a: (i % na) as i8,
                s_next: o(),
                r: -1.0,
                episode: 0,
            })
            .collect();
        let goals = (0..n).map(|_| o()).collect();
        let targets = (0..n).map(|i| -(i as f64) * 0.3).collect();
        TdBatch {
            records,
            goals,
            targets,
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let b = batch(10, 3);
        fd_check(QNetwork::monolithic(InputNorm::identity(3), &[12, 8], 3, 1).unwrap(), &b);
        let mut q = QNetwork::<f64>::quasimetric(qspec(3), 2).unwrap();
        if let QNetwork::Quasimetric(c) = &mut q {
            let mut r = rng::seeded(4);
            for x in c.transition_mut().as_mut_slice() {
                *x = r.random_range(-0.3..0.3);
            }
        }
        fd_check(q, &b);
    }

    #[test]
    fn terminal_targets_and_gamma_zero() {
        let env = GridWorld::open(3, 1).unwrap();
        let d = exhaustive_dataset(&env, 0.25).unwrap();
        let data = TdData::new(&d).unwrap();
        let net = QNetwork::<f32>::monolithic(InputNorm::identity(3), &[8], 4, 0).unwrap();
        let rec = d.records[3]; // from cell 0, action right
        assert_eq!(rec.s_next, env.observe(1));
        let t = td_target(&net, &data, &[rec, rec], &[env.observe(1), env.observe(2)], 0.95).unwrap();
        assert_eq!(t[0], -1.0);
        let q = net.value_table(&env, &env.observe(2)).unwrap()[1];
        assert_abs_diff_eq!(t[1], -1.0 + 0.95 * q, epsilon = 1e-9);
        let t0 = td_target(&net, &data, &[rec], &[env.observe(2)], 0.0).unwrap();
        assert_eq!(t0[0], -1.0);
    }

    #[test]
    fn target_network_lags_and_tracks_by_ema() {
        let env = GridWorld::open(3, 3).unwrap();
        let d = generate_dataset(&env, 20, 10, 0, 0.25).unwrap();
        let data = TdData::new(&d).unwrap();
        let cfg = QLearnConfig {
            batch_size: 8,
            total_steps: 4,
            goal_mix_prob: 0.0,
            ..QLearnConfig::full_scale()
        };
        let net = QNetwork::monolithic(InputNorm::identity(3), &[8], 4, 0).unwrap();
        let mut l = QLearner::new(net, cfg).unwrap();
        let before = l.target().clone();
        l.step(&data).unwrap();
        // Odd step: target untouched while the learner moved.
        assert_eq!(l.target(), &before);
        assert_ne!(l.network(), &before);
        let mut expected = before.clone();
        l.step(&data).unwrap();
        expected.ema_from(l.network(), 0.005).unwrap();
        assert_eq!(l.target(), &expected);
    }

    #[test]
    fn monolithic_learner_recovers_discounted_values_on_tiny_grid() {
        let env = GridWorld::open(3, 3).unwrap();
        let d = generate_dataset(&env, 300, 12, 3, 0.25).unwrap();
        let data = TdData::new(&d).unwrap();
        let cfg = QLearnConfig {
            batch_size: 128,
            total_steps: 6000,
            target_ema: 0.05,
            goal_mix_prob: 0.0,
            ..QLearnConfig::full_scale()
        };
        let net = QNetwork::monolithic(InputNorm::identity(3), &[64, 64], 4, 0).unwrap();
        let mut l = QLearner::new(net, cfg).unwrap();
        l.run(&data, |_, _| {}).unwrap();
        let (mut err, mut count) = (0.0, 0);
        for g in 0..9 {
            let v = l.network().value_table(&env, &env.observe(g)).unwrap();
            for s in 0..9 {
                if s != g {
                    let (sr, sc) = env.cell(s);
                    let (gr, gc) = env.cell(g);
                    let n = (sr.abs_diff(gr) + sc.abs_diff(gc)) as f64;
                    let truth = -discounted_cost(n, 0.95);
                    err += ((v[s] - truth) / truth).abs();
                    count += 1;
                }
            }
        }
        let mre = err / count as f64;
        assert!(mre < 0.05, "mean relative error {mre}");
    }

    #[test]
    fn quasimetric_head_distances_are_quasimetric() {
        let env = MountainCar::new(12).unwrap();
        let d = generate_dataset(&env, 40, 60, 1, 0.25).unwrap();
        let data = TdData::new(&d).unwrap();
        let cfg = QLearnConfig {
            batch_size: 32,
            total_steps: 50,
            head: QHeadKind::Quasimetric,
            ..QLearnConfig::full_scale()
        };
        let mut spec = qspec(3);
        spec.input_norm = env.input_norm();
        let mut l = QLearner::new(QNetwork::quasimetric(spec, 0).unwrap(), cfg).unwrap();
        l.run(&data, |_, _| {}).unwrap();
        let QNetwork::Quasimetric(c) = l.network() else { unreachable!() };
        let n = 40;
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                rows[i][j] = c.state_distance(&env.observe(i * 3), &env.observe(j * 3)).unwrap() as f64;
            }
        }
        let dm = DistanceMatrix::from_rows(&rows).unwrap();
        assert!(check_quasimetric(&dm, 1e-5).unwrap().is_empty());
    }

    #[test]
    fn head_mismatch_is_rejected() {
        let net = QNetwork::<f32>::monolithic(InputNorm::identity(3), &[8], 4, 0).unwrap();
        let cfg = QLearnConfig {
            head: QHeadKind::Quasimetric,
            ..QLearnConfig::full_scale()
        };
        assert!(QLearner::new(net, cfg).is_err());
    }
}
