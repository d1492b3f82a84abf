use num_traits::Float;

use crate::nn::{zeros_like, Params};
use crate::tensor::Real;

use super::{LrDecay, OptimizerConfig};

/// Adam with bias correction, warmup, optional linear decay and global
/// gradient-norm clipping. Moment buffers mirror the parameter structure.
#[derive(Debug, Clone)]
pub struct Adam<P> {
    config: OptimizerConfig,
    first: P,
    second: P,
    step: usize,
    total_steps: usize,
}

impl<P: Clone> Adam<P> {
    pub fn new<T: Real>(params: &P, config: OptimizerConfig, total_steps: usize) -> Self
    where
        P: Params<T>,
    {
        Adam {
            config,
            first: zeros_like(params),
            second: zeros_like(params),
            step: 0,
            total_steps,
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn learning_rate(&self, step: usize) -> f64 {
        let base = self.config.learning_rate;
        let warm = self.config.warmup_steps;
        if warm > 0 && step < warm {
            return base * (step + 1) as f64 / warm as f64;
        }
        match self.config.decay {
            LrDecay::Constant => base,
            LrDecay::Linear => {
                let span = self.total_steps.saturating_sub(warm).max(1);
                let done = step.saturating_sub(warm).min(span);
                base * (1.0 - done as f64 / span as f64).max(0.0)
            }
        }
    }

    /// Applies one update. Returns the gradient norm before clipping.
    pub fn step<T: Real>(&mut self, params: &mut P, grad: &mut P) -> f64
    where
        P: Params<T>,
    {
        let norm = grad
            .tensors_mut()
            .iter()
            .map(|m| m.sum_squares().f64())
            .sum::<f64>()
            .sqrt();
        let clip = self.config.grad_clip;
        let factor = if clip > 0.0 && norm > clip { clip / norm } else { 1.0 };

        let lr = self.learning_rate(self.step);
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps) = (self.config.beta1, self.config.beta2, self.config.epsilon);
        let c1 = 1.0 - Float::powi(b1, t);
        let c2 = 1.0 - Float::powi(b2, t);

        let ps = params.tensors_mut();
        let gs = grad.tensors_mut();
        let ms = self.first.tensors_mut();
        let vs = self.second.tensors_mut();
        let (b1t, b2t, f) = (T::of(b1), T::of(b2), T::of(factor));
        let (lr_t, c1_t, c2_t, eps_t) = (T::of(lr), T::of(c1), T::of(c2), T::of(eps));
        for (((p, g), m), v) in ps.into_iter().zip(gs).zip(ms).zip(vs) {
            let iter = p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice().iter_mut()));
            for ((pv, &gv), (mv, vv)) in iter {
                let gv = gv * f;
                *mv = b1t * *mv + (T::one() - b1t) * gv;
                *vv = b2t * *vv + (T::one() - b2t) * gv * gv;
                let mhat = *mv / c1_t;
                let vhat = *vv / c2_t;
                *pv -= lr_t * mhat / (vhat.sqrt() + eps_t);
            }
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Mat;

    #[test]
    fn minimizes_quadratic() {
        let mut x = Mat::from_vec(1, 2, alloc::vec![3.0f64, -2.0]);
        let config = OptimizerConfig { learning_rate: 0.1, grad_clip: 0.0, ..OptimizerConfig::default() };
        let mut adam = Adam::new(&x, config, 500);
        for _ in 0..500 {
            let mut g = x.map(|v| 2.0 * v);
            adam.step(&mut x, &mut g);
        }
        assert!(x.as_slice().iter().all(|v| v.abs() < 1e-2), "{x:?}");
    }

    #[test]
    fn schedule() {
        let x = Mat::<f64>::zeros(1, 1);
        let config = OptimizerConfig {
            learning_rate: 1.0,
            warmup_steps: 4,
            decay: LrDecay::Linear,
            ..OptimizerConfig::default()
        };
        let adam = Adam::new(&x, config, 14);
        assert_eq!(adam.learning_rate(0), 0.25);
        assert_eq!(adam.learning_rate(3), 1.0);
        assert_eq!(adam.learning_rate(4), 1.0);
        assert_eq!(adam.learning_rate(9), 0.5);
        assert_eq!(adam.learning_rate(14), 0.0);
    }
}
