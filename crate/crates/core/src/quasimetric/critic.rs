use alloc::vec;
use alloc::vec::Vec;

use super::iqe::{component_sweep, maxmean, IqeScratch};
use crate::error::{check_len, Error, Result};
use crate::nn::{InputNorm, MlpParams, MlpSpec, MlpTape};
use crate::{Matrix, Real};

/// The latent distance head placed after the projector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum HeadKind {
    /// IQE with max/mean pooling over `components` blocks of `component_size`.
    Iqe {
        components: usize,
        component_size: usize,
    },
    /// Euclidean distance between projections. Symmetric, so only used as
    /// an ablation.
    SymmetricL2 { width: usize },
}

impl HeadKind {
    /// Projector output width the head consumes.
    pub fn width(&self) -> usize {
        match *self {
            HeadKind::Iqe {
                components,
                component_size,
            } => components * component_size,
            HeadKind::SymmetricL2 { width } => width,
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            HeadKind::Iqe { .. } => 1,
            HeadKind::SymmetricL2 { .. } => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CriticSpec {
    pub obs_dim: usize,
    /// Fixed scaling applied to observations before the encoder.
    pub input_norm: InputNorm,
    pub num_actions: usize,
    pub encoder_hidden: Vec<usize>,
    pub latent_dim: usize,
    pub projector_hidden: Vec<usize>,
    pub head: HeadKind,
    pub transition_hidden: Vec<usize>,
}

fn widths(first: usize, hidden: &[usize], last: usize) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(first);
    w.extend_from_slice(hidden);
    w.push(last);
    w
}

impl CriticSpec {
    /// Default desk-scale sizes: encoder `obs-256-256-128`, projector
    /// `128-256-(8·16)`, transition `(128+|A|)-256-256-128`.
    pub fn desk(obs_dim: usize, num_actions: usize) -> Self {
        Self {
            obs_dim,
            input_norm: InputNorm::identity(obs_dim),
            num_actions,
            encoder_hidden: vec![256, 256],
            latent_dim: 128,
            projector_hidden: vec![256],
            head: HeadKind::Iqe {
                components: 8,
                component_size: 16,
            },
            transition_hidden: vec![256, 256],
        }
    }

    pub fn encoder_spec(&self) -> Result<MlpSpec> {
        MlpSpec::relu(&widths(self.obs_dim, &self.encoder_hidden, self.latent_dim))
    }

    pub fn projector_spec(&self) -> Result<MlpSpec> {
        MlpSpec::relu(&widths(self.latent_dim, &self.projector_hidden, self.head.width()))
    }

    pub fn transition_spec(&self) -> Result<MlpSpec> {
        MlpSpec::relu(&widths(
            self.latent_dim + self.num_actions,
            &self.transition_hidden,
            self.latent_dim,
        ))
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_actions == 0 {
            return Err(Error::InvalidSpec("critic needs at least one action"));
        }
        if self.input_norm.dim() != self.obs_dim {
            return Err(Error::InvalidSpec("input normalization width differs from observation width"));
        }
        if self.head.width() == 0 {
            return Err(Error::InvalidSpec("head width must be positive"));
        }
        self.encoder_spec()?;
        self.projector_spec()?;
        self.transition_spec()?;
        Ok(())
    }
}

/// Encoder `f`, projector, latent head `d^z`, and residual transition
/// `T(z, a) = z + g(z, one_hot(a))`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasimetricCritic<T> {
    spec: CriticSpec,
    encoder: MlpParams<T>,
    projector: MlpParams<T>,
    transition: MlpParams<T>,
    head_params: Vec<T>,
}

/// Gradient buffers shaped like a critic's parameter groups.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticGrads<T> {
    pub encoder: Vec<T>,
    pub projector: Vec<T>,
    pub transition: Vec<T>,
    pub head: Vec<T>,
}

impl<T: Real> CriticGrads<T> {
    pub fn zeros_like(critic: &QuasimetricCritic<T>) -> Self {
        Self {
            encoder: vec![T::zero(); critic.encoder.len()],
            projector: vec![T::zero(); critic.projector.len()],
            transition: vec![T::zero(); critic.transition.len()],
            head: vec![T::zero(); critic.head_params.len()],
        }
    }

    pub fn groups(&self) -> [&[T]; 4] {
        [&self.encoder, &self.projector, &self.transition, &self.head]
    }
}

impl<T: Real> QuasimetricCritic<T> {
    /// Fresh critic. The transition network's last layer starts at zero so
    /// `T` is the identity at initialization; the max/mean mix starts at 0.5.
    pub fn new(spec: CriticSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let encoder = MlpParams::init(spec.encoder_spec()?, seed.wrapping_mul(4).wrapping_add(1))?;
        let projector = MlpParams::init(spec.projector_spec()?, seed.wrapping_mul(4).wrapping_add(2))?;
        let mut transition =
            MlpParams::init(spec.transition_spec()?, seed.wrapping_mul(4).wrapping_add(3))?;
        transition.zero_last_layer();
        let head_params = vec![T::zero(); spec.head.num_params()];
        Ok(Self {
            spec,
            encoder,
            projector,
            transition,
            head_params,
        })
    }

    pub fn from_parts(
        spec: CriticSpec,
        encoder: MlpParams<T>,
        projector: MlpParams<T>,
        transition: MlpParams<T>,
        head_params: Vec<T>,
    ) -> Result<Self> {
        spec.validate()?;
        if encoder.spec() != &spec.encoder_spec()?
            || projector.spec() != &spec.projector_spec()?
            || transition.spec() != &spec.transition_spec()?
        {
            return Err(Error::InvalidSpec("sub-network shapes disagree with critic spec"));
        }
        check_len("critic head params", spec.head.num_params(), head_params.len())?;
        Ok(Self {
            spec,
            encoder,
            projector,
            transition,
            head_params,
        })
    }

    pub fn spec(&self) -> &CriticSpec {
        &self.spec
    }

    pub fn encoder(&self) -> &MlpParams<T> {
        &self.encoder
    }

    pub fn projector(&self) -> &MlpParams<T> {
        &self.projector
    }

    pub fn transition(&self) -> &MlpParams<T> {
        &self.transition
    }

    pub fn head_params(&self) -> &[T] {
        &self.head_params
    }

    pub fn transition_mut(&mut self) -> &mut MlpParams<T> {
        &mut self.transition
    }

    /// Raw max/mean mixing parameter, if the head has one.
    pub fn mix_raw(&self) -> Option<T> {
        self.head_params.first().copied()
    }

    pub fn set_mix_raw(&mut self, value: T) {
        if let Some(m) = self.head_params.first_mut() {
            *m = value;
        }
    }

    /// Parameter groups in checkpoint order: encoder, projector, transition, head.
    pub fn param_groups(&self) -> [&[T]; 4] {
        [
            self.encoder.as_slice(),
            self.projector.as_slice(),
            self.transition.as_slice(),
            &self.head_params,
        ]
    }

    pub fn param_groups_mut(&mut self) -> [&mut [T]; 4] {
        [
            self.encoder.as_mut_slice(),
            self.projector.as_mut_slice(),
            self.transition.as_mut_slice(),
            &mut self.head_params,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.param_groups().iter().map(|g| g.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.param_groups().iter().all(|g| g.iter().all(|x| x.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> QuasimetricCritic<U> {
        QuasimetricCritic {
            spec: self.spec.clone(),
            encoder: self.encoder.cast(),
            projector: self.projector.cast(),
            transition: self.transition.cast(),
            head_params: self.head_params.iter().map(|&x| U::of(x.as_f64())).collect(),
        }
    }

    /// Latents `z = f(s)` for a batch of observations.
    pub fn encode(&self, obs: &Matrix<T>) -> Result<Matrix<T>> {
        self.encoder.infer(&self.spec.input_norm.apply(obs)?)
    }

    pub fn encode_tape(&self, obs: &Matrix<T>) -> Result<(Matrix<T>, MlpTape<'_, T>)> {
        self.encoder.forward(&self.spec.input_norm.apply(obs)?)
    }

    pub fn project(&self, z: &Matrix<T>) -> Result<Matrix<T>> {
        self.projector.infer(z)
    }

    pub fn project_tape(&self, z: &Matrix<T>) -> Result<(Matrix<T>, MlpTape<'_, T>)> {
        self.projector.forward(z)
    }

    fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.spec.num_actions {
            return Err(Error::InvalidAction {
                action: a as i64,
                num_actions: self.spec.num_actions,
            });
        }
        Ok(())
    }

    fn transition_input(&self, z: &Matrix<T>, actions: &[usize]) -> Result<Matrix<T>> {
        let d = self.spec.latent_dim;
        check_len("transition latent width", d, z.cols())?;
        check_len("transition actions", z.rows(), actions.len())?;
        let na = self.spec.num_actions;
        let mut x = Matrix::zeros(z.rows(), d + na);
        for (r, &a) in actions.iter().enumerate() {
            self.check_action(a)?;
            let row = x.row_mut(r);
            row[..d].copy_from_slice(z.row(r));
            row[d + a] = T::one();
        }
        Ok(x)
    }

    /// `ẑ' = T(z, a)` for aligned rows of latents and actions.
    pub fn transition_batch(&self, z: &Matrix<T>, actions: &[usize]) -> Result<Matrix<T>> {
        let mut out = self.transition.infer(&self.transition_input(z, actions)?)?;
        out.add_assign(z)?;
        Ok(out)
    }

    pub fn transition_tape(
        &self,
        z: &Matrix<T>,
        actions: &[usize],
    ) -> Result<(Matrix<T>, TransitionTape<'_, T>)> {
        let (mut out, mlp) = self.transition.forward(&self.transition_input(z, actions)?)?;
        out.add_assign(z)?;
        Ok((
            out,
            TransitionTape {
                mlp,
                latent_dim: self.spec.latent_dim,
            },
        ))
    }

    pub fn transition_predict(&self, z: &[T], action: usize) -> Result<Vec<T>> {
        let zm = Matrix::from_vec(1, z.len(), z.to_vec())?;
        Ok(self.transition_batch(&zm, &[action])?.into_vec())
    }

    /// Head distances between rows of a projection matrix, one per `(a, b)` pair.
    pub fn head_distances(&self, p: &Matrix<T>, pairs: &[(usize, usize)]) -> Result<Vec<T>> {
        Ok(self.head_eval(p, pairs, false)?.0)
    }

    pub fn head_distances_tape(
        &self,
        p: &Matrix<T>,
        pairs: &[(usize, usize)],
    ) -> Result<(Vec<T>, HeadTape<T>)> {
        let (d, tape) = self.head_eval(p, pairs, true)?;
        Ok((d, tape.expect("tape requested")))
    }

    fn head_eval(
        &self,
        p: &Matrix<T>,
        pairs: &[(usize, usize)],
        record: bool,
    ) -> Result<(Vec<T>, Option<HeadTape<T>>)> {
        let width = self.spec.head.width();
        check_len("head input width", width, p.cols())?;
        if let Some(&(a, b)) = pairs.iter().find(|(a, b)| *a >= p.rows() || *b >= p.rows()) {
            return Err(Error::ShapeMismatch {
                context: "head pair index",
                expected: p.rows(),
                found: a.max(b),
            });
        }
        let n = pairs.len();
        let mut out = Vec::with_capacity(n);
        let (mut la, mut lb, mut lmix) = if record {
            (vec![T::zero(); n * width], vec![T::zero(); n * width], vec![T::zero(); n])
        } else {
            (Vec::new(), Vec::new(), Vec::new())
        };
        match self.spec.head {
            HeadKind::Iqe {
                components,
                component_size: m,
            } => {
                let mix_raw = self.head_params[0];
                let mut scratch = IqeScratch::new();
                let mut comp = vec![T::zero(); components];
                let mut wcomp = vec![T::zero(); components];
                for (i, &(a, b)) in pairs.iter().enumerate() {
                    let (pa, pb) = (p.row(a), p.row(b));
                    for c in 0..components {
                        let r = c * m..(c + 1) * m;
                        comp[c] = if record {
                            let ga = &mut la[i * width..(i + 1) * width][r.clone()];
                            let gb = &mut lb[i * width..(i + 1) * width][r.clone()];
                            component_sweep(&pa[r.clone()], &pb[r], &mut scratch, Some((ga, gb)))
                        } else {
                            component_sweep(&pa[r.clone()], &pb[r], &mut scratch, None)
                        };
                    }
                    if record {
                        let (d, dmix) = maxmean(&comp, mix_raw, Some(&mut wcomp));
                        out.push(d);
                        lmix[i] = dmix;
                        for c in 0..components {
                            let r = i * width + c * m..i * width + (c + 1) * m;
                            la[r.clone()].iter_mut().for_each(|x| *x *= wcomp[c]);
                            lb[r].iter_mut().for_each(|x| *x *= wcomp[c]);
                        }
                    } else {
                        out.push(maxmean(&comp, mix_raw, None).0);
                    }
                }
            }
            HeadKind::SymmetricL2 { .. } => {
                for (i, &(a, b)) in pairs.iter().enumerate() {
                    let (pa, pb) = (p.row(a), p.row(b));
                    let d = pa
                        .iter()
                        .zip(pb)
                        .map(|(&x, &y)| (x - y) * (x - y))
                        .sum::<T>()
                        .sqrt();
                    out.push(d);
                    if record && d > T::zero() {
                        for j in 0..width {
                            let g = (pa[j] - pb[j]) / d;
                            la[i * width + j] = g;
                            lb[i * width + j] = -g;
                        }
                    }
                }
            }
        }
        let tape = record.then(|| HeadTape {
            pairs: pairs.to_vec(),
            width,
            rows: p.rows(),
            local_a: la,
            local_b: lb,
            local_mix: lmix,
        });
        Ok((out, tape))
    }

    /// `d^z(z_a, z_b)` for single latents.
    pub fn latent_distance(&self, z_a: &[T], z_b: &[T]) -> Result<T> {
        check_len("latent_distance", z_a.len(), z_b.len())?;
        let z = Matrix::from_rows(&[z_a, z_b])?;
        let p = self.project(&z)?;
        Ok(self.head_distances(&p, &[(0, 1)])?[0])
    }

    /// `d^z` over aligned rows.
    pub fn latent_distances(&self, z_a: &Matrix<T>, z_b: &Matrix<T>) -> Result<Vec<T>> {
        check_len("latent_distances rows", z_a.rows(), z_b.rows())?;
        let n = z_a.rows();
        let p = self.project(&Matrix::vstack(&[z_a, z_b])?)?;
        let pairs: Vec<_> = (0..n).map(|i| (i, n + i)).collect();
        self.head_distances(&p, &pairs)
    }

    /// `d_θ(s, g) = d^z(f(s), f(g))`.
    pub fn state_distance(&self, s: &[T], g: &[T]) -> Result<T> {
        check_len("state_distance", s.len(), g.len())?;
        let z = self.encode(&Matrix::from_rows(&[s, g])?)?;
        self.latent_distance(z.row(0), z.row(1))
    }

    /// `d_θ` over aligned rows.
    pub fn state_distances(&self, s: &Matrix<T>, g: &Matrix<T>) -> Result<Vec<T>> {
        check_len("state_distances rows", s.rows(), g.rows())?;
        let n = s.rows();
        let z = self.encode(&Matrix::vstack(&[s, g])?)?;
        self.latent_distances(&z.slice_rows(0, n), &z.slice_rows(n, 2 * n))
    }

    /// `d^z(T(f(s), a), f(g)) + cost`: the estimate of `-Q*(s, a; g)` for a
    /// constant per-step cost.
    pub fn q_distance(&self, s: &[T], action: usize, g: &[T], cost: T) -> Result<T> {
        self.check_action(action)?;
        let z = self.encode(&Matrix::from_rows(&[s, g])?)?;
        let zhat = self.transition_predict(z.row(0), action)?;
        Ok(self.latent_distance(&zhat, z.row(1))? + cost)
    }
}

/// Backward record of a batch of head distances.
#[derive(Debug, Clone)]
pub struct HeadTape<T> {
    pairs: Vec<(usize, usize)>,
    width: usize,
    rows: usize,
    local_a: Vec<T>,
    local_b: Vec<T>,
    local_mix: Vec<T>,
}

impl<T: Real> HeadTape<T> {
    /// Accumulates `Σ_i dout_i · ∂d_i` into the projection gradient and the
    /// head parameter gradient.
    pub fn backward_into(&self, dout: &[T], grad_p: &mut Matrix<T>, grad_head: &mut [T]) -> Result<()> {
        check_len("head backward", self.pairs.len(), dout.len())?;
        check_len("head grad rows", self.rows, grad_p.rows())?;
        check_len("head grad cols", self.width, grad_p.cols())?;
        let w = self.width;
        for (i, (&(a, b), &g)) in self.pairs.iter().zip(dout).enumerate() {
            if g == T::zero() {
                continue;
            }
            for (x, &l) in grad_p.row_mut(a).iter_mut().zip(&self.local_a[i * w..(i + 1) * w]) {
                *x += g * l;
            }
            for (x, &l) in grad_p.row_mut(b).iter_mut().zip(&self.local_b[i * w..(i + 1) * w]) {
                *x += g * l;
            }
            if let Some(h) = grad_head.first_mut() {
                *h += g * self.local_mix[i];
            }
        }
        Ok(())
    }
}

/// Backward record of `T(z, a)`.
#[derive(Debug)]
pub struct TransitionTape<'a, T> {
    mlp: MlpTape<'a, T>,
    latent_dim: usize,
}

impl<'a, T: Real> TransitionTape<'a, T> {
    /// Adds parameter gradients into `grads`; returns the gradient wrt `z`
    /// (residual path plus the latent slice of the network input).
    pub fn backward_into(self, grad_out: &Matrix<T>, grads: &mut [T]) -> Result<Matrix<T>> {
        let d = self.latent_dim;
        let gin = self.mlp.backward_into(grad_out, grads)?;
        let mut gz = grad_out.clone();
        for r in 0..gz.rows() {
            for (x, &y) in gz.row_mut(r).iter_mut().zip(&gin.row(r)[..d]) {
                *x += y;
            }
        }
        Ok(gz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny_spec(head: HeadKind) -> CriticSpec {
        CriticSpec {
            obs_dim: 3,
            input_norm: InputNorm::identity(3),
            num_actions: 3,
            encoder_hidden: vec![8],
            latent_dim: 4,
            projector_hidden: vec![8],
            head,
            transition_hidden: vec![8],
        }
    }

    fn iqe(k: usize, m: usize) -> HeadKind {
        HeadKind::Iqe {
            components: k,
            component_size: m,
        }
    }

    #[test]
    fn identical_inputs_are_at_zero_distance() {
        let c = QuasimetricCritic::<f32>::new(tiny_spec(iqe(2, 4)), 1).unwrap();
        let s = [0.3f32, -0.2, 0.0];
        assert_eq!(c.state_distance(&s, &s).unwrap(), 0.0);
        let z = [0.1f32, 0.5, -1.0, 2.0];
        assert_eq!(c.latent_distance(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn transition_is_identity_at_init() {
        let c = QuasimetricCritic::<f32>::new(tiny_spec(iqe(2, 4)), 4).unwrap();
        let z = [0.1f32, 0.5, -1.0, 2.0];
        for a in 0..3 {
            assert_eq!(c.transition_predict(&z, a).unwrap(), z.to_vec());
        }
        assert!(matches!(
            c.transition_predict(&z, 3),
            Err(Error::InvalidAction { .. })
        ));
    }

    #[test]
    fn identity_projector_reproduces_component_fixture() {
        // k = 1, m = 2 with an identity projector: d((0,0), (1,2)) = 2.
        let spec = CriticSpec {
            obs_dim: 2,
            input_norm: InputNorm::identity(2),
            num_actions: 1,
            encoder_hidden: vec![],
            latent_dim: 2,
            projector_hidden: vec![],
            head: iqe(1, 2),
            transition_hidden: vec![],
        };
        let mut c = QuasimetricCritic::<f64>::new(spec.clone(), 0).unwrap();
        let proj = MlpParams::from_flat(
            spec.projector_spec().unwrap(),
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        c = QuasimetricCritic::from_parts(
            spec,
            c.encoder().clone(),
            proj,
            c.transition().clone(),
            vec![0.0],
        )
        .unwrap();
        assert_eq!(c.latent_distance(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(c.latent_distance(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn q_distance_goal_at_next_latent_is_transition_gap() {
        let c = QuasimetricCritic::<f64>::new(tiny_spec(iqe(2, 4)), 2).unwrap();
        let s = [0.2, 0.1, 0.0];
        // At init T is the identity, so the goal s itself is at distance 0.
        assert_abs_diff_eq!(c.q_distance(&s, 1, &s, 1.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_head_is_symmetric() {
        let c = QuasimetricCritic::<f64>::new(tiny_spec(HeadKind::SymmetricL2 { width: 6 }), 3).unwrap();
        let (a, b) = ([0.3, 0.2, 0.0], [-0.4, 0.9, 0.0]);
        assert_abs_diff_eq!(
            c.state_distance(&a, &b).unwrap(),
            c.state_distance(&b, &a).unwrap(),
            epsilon = 1e-12
        );
        assert!(c.mix_raw().is_none());
    }

    #[test]
    fn from_parts_rejects_mismatched_shapes() {
        let c = QuasimetricCritic::<f32>::new(tiny_spec(iqe(2, 4)), 1).unwrap();
        let other = QuasimetricCritic::<f32>::new(tiny_spec(iqe(2, 3)), 1).unwrap();
        assert!(QuasimetricCritic::from_parts(
            c.spec().clone(),
            c.encoder().clone(),
            other.projector().clone(),
            c.transition().clone(),
            vec![0.0],
        )
        .is_err());
    }
}
