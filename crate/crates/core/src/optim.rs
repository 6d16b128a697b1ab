//! Adam with bias correction and global gradient-norm clipping.

use crate::error::{GlossError, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// L2 norm over the concatenation of all blocks.
pub fn global_norm(blocks: &[&[f64]]) -> f64 {
    blocks
        .iter()
        .flat_map(|b| b.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Rescales every block by `max_norm / norm` when the global norm exceeds
/// `max_norm`. Returns the norm measured before clipping.
pub fn clip_global_norm(blocks: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = blocks
        .iter()
        .flat_map(|b| b.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let factor = max_norm / norm;
        for block in blocks.iter_mut() {
            block.iter_mut().for_each(|x| *x *= factor);
        }
    }
    norm
}

/// Moment buffers for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    pub fn step(&mut self, param: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        if param.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(GlossError::ShapeMismatch(format!(
                "adam state has {} entries, got param {} and grad {}",
                self.m.len(),
                param.len(),
                grad.len()
            )));
        }
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - BETA1.powi(t);
        let bc2 = 1.0 - BETA2.powi(t);
        for (((p, &g), m), v) in param
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
        Ok(())
    }
}

/// One Adam state per parameter block, stepped together.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockAdam {
    states: Vec<AdamState>,
}

impl BlockAdam {
    pub fn new(block_lens: &[usize]) -> Self {
        BlockAdam {
            states: block_lens.iter().map(|&n| AdamState::new(n)).collect(),
        }
    }

    pub fn states(&self) -> &[AdamState] {
        &self.states
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>, lr: f64) -> Result<()> {
        if params.len() != self.states.len() || grads.len() != self.states.len() {
            return Err(GlossError::ShapeMismatch("parameter block count".into()));
        }
        for ((state, p), g) in self.states.iter_mut().zip(params).zip(grads) {
            state.step(p, g, lr)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clip_examples() {
        let mut g = vec![3.0, 4.0];
        let n = clip_global_norm(&mut [&mut g], 25.0);
        assert_eq!(n, 5.0);
        assert_eq!(g, [3.0, 4.0]);

        let mut g = vec![30.0, 40.0];
        clip_global_norm(&mut [&mut g], 25.0);
        assert_eq!(g, [15.0, 20.0]);

        let mut g = vec![0.0; 4];
        clip_global_norm(&mut [&mut g], 25.0);
        assert_eq!(g, [0.0; 4]);
    }

    #[test]
    fn clip_is_global_across_blocks() {
        let mut a = vec![30.0];
        let mut b = vec![40.0];
        clip_global_norm(&mut [&mut a, &mut b], 25.0);
        assert_eq!((a[0], b[0]), (15.0, 20.0));
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = AdamState::new(1);
        let mut p = [1.0];
        s.step(&mut p, &[0.1], 0.001).unwrap();
        let expected = 1.0 - 0.001 * (0.1 / (0.1 + 1e-8));
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - 0.999).abs() < 1e-9);
        assert_eq!(s.steps(), 1);
    }

    #[test]
    fn zero_grad_is_a_no_op() {
        let mut s = AdamState::new(3);
        let mut p = [1.0, -2.0, 0.5];
        s.step(&mut p, &[0.0; 3], 0.1).unwrap();
        assert_eq!(p, [1.0, -2.0, 0.5]);
    }

    #[test]
    fn identical_inputs_give_identical_outputs() {
        let mut s1 = AdamState::new(2);
        let mut s2 = AdamState::new(2);
        let mut p1 = [0.3, 0.4];
        let mut p2 = [0.3, 0.4];
        for g in [[0.1, -0.2], [1.0, 3.0], [-0.5, 0.0]] {
            s1.step(&mut p1, &g, 0.01).unwrap();
            s2.step(&mut p2, &g, 0.01).unwrap();
        }
        assert_eq!(p1, p2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut s = AdamState::new(2);
        assert!(s.step(&mut [0.0; 3], &[0.0; 3], 0.1).is_err());
        assert!(s.step(&mut [0.0; 2], &[0.0; 1], 0.1).is_err());
        assert_eq!(s.steps(), 0);
    }

    proptest! {
        #[test]
        fn update_is_bounded(
            grads in prop::collection::vec(prop::collection::vec(-1e4f64..1e4, 3), 1..40),
            lr in 1e-5f64..1.0,
        ) {
            let mut s = AdamState::new(3);
            let mut p = vec![0.0; 3];
            for g in &grads {
                let before = p.clone();
                s.step(&mut p, g, lr).unwrap();
                for (a, b) in p.iter().zip(&before) {
                    prop_assert!((a - b).abs() <= 3.0 * lr);
                }
                prop_assert!(s.second_moment().iter().all(|&v| v >= 0.0));
            }
            prop_assert_eq!(s.steps(), grads.len() as u64);
        }

        #[test]
        fn clipping_never_increases_norm(
            a in prop::collection::vec(-100f64..100.0, 0..8),
            b in prop::collection::vec(-100f64..100.0, 0..8),
            max_norm in 0.01f64..200.0,
        ) {
            let (mut a, mut b) = (a, b);
            let before = global_norm(&[&a, &b]);
            clip_global_norm(&mut [&mut a, &mut b], max_norm);
            let after = global_norm(&[&a, &b]);
            prop_assert!(after <= before + 1e-12);
            prop_assert!(after <= max_norm * (1.0 + 1e-12));
        }
    }
}
