//! Adam with bias correction over named parameter blocks.

use super::ParamBlock;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { alpha: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamParams {
    pub fn with_alpha(alpha: f64) -> AdamParams {
        AdamParams { alpha, ..AdamParams::default() }
    }
}

/// First/second moment buffers aligned with a fixed block layout.
pub struct AdamState {
    hp: AdamParams,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(hp: AdamParams, block_lens: &[usize]) -> AdamState {
        AdamState {
            hp,
            t: 0,
            m: block_lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: block_lens.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn params(&self) -> AdamParams {
        self.hp
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update over all blocks. Rejects non-finite gradients before any
    /// parameter is touched, so a failed step leaves parameters intact.
    pub fn step(&mut self, blocks: &mut [ParamBlock]) -> Result<()> {
        if blocks.len() != self.m.len() {
            return Err(Error::invalid(format!(
                "adam: expected {} blocks, got {}",
                self.m.len(),
                blocks.len()
            )));
        }
        for (k, b) in blocks.iter().enumerate() {
            if b.values.len() != self.m[k].len() {
                return Err(Error::invalid(format!(
                    "adam: block `{}` has {} values, state holds {}",
                    b.name,
                    b.values.len(),
                    self.m[k].len()
                )));
            }
            if b.grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of block `{}`", b.name)));
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.hp.beta1.powi(t);
        let bc2 = 1.0 - self.hp.beta2.powi(t);
        for (k, b) in blocks.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..b.values.len() {
                let g = b.grads[i];
                m[i] = self.hp.beta1 * m[i] + (1.0 - self.hp.beta1) * g;
                v[i] = self.hp.beta2 * v[i] + (1.0 - self.hp.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                b.values[i] -= self.hp.alpha * mhat / (vhat.sqrt() + self.hp.eps);
            }
        }
        Ok(())
    }

    /// Checkpoint accessors: moments and step counter round-trip exactly.
    pub fn snapshot(&self) -> (u64, &[Vec<f64>], &[Vec<f64>]) {
        (self.t, &self.m, &self.v)
    }

    pub fn restore(&mut self, t: u64, m: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> Result<()> {
        let lens: Vec<usize> = self.m.iter().map(|b| b.len()).collect();
        let got_m: Vec<usize> = m.iter().map(|b| b.len()).collect();
        let got_v: Vec<usize> = v.iter().map(|b| b.len()).collect();
        if got_m != lens || got_v != lens {
            return Err(Error::Checkpoint("adam moment layout mismatch".into()));
        }
        self.t = t;
        self.m = m;
        self.v = v;
        Ok(())
    }

    /// Moments are stored flattened; the block layout is implied by the
    /// state's own lens, which must match at load time.
    pub fn save_into(&self, ck: &mut crate::checkpoint::Checkpoint, prefix: &str) -> Result<()> {
        ck.put_u64(&format!("{prefix}.steps"), vec![self.t])?;
        let m: Vec<f64> = self.m.iter().flatten().copied().collect();
        let v: Vec<f64> = self.v.iter().flatten().copied().collect();
        ck.put_f64(&format!("{prefix}.m"), &[m.len()], m)?;
        ck.put_f64(&format!("{prefix}.v"), &[v.len()], v)
    }

    pub fn load_from(&mut self, ck: &crate::checkpoint::Checkpoint, prefix: &str) -> Result<()> {
        let steps = ck.u64s(&format!("{prefix}.steps"))?;
        if steps.len() != 1 {
            return Err(Error::Checkpoint(format!("`{prefix}.steps` must hold one value")));
        }
        let (_, m_flat) = ck.f64s(&format!("{prefix}.m"))?;
        let (_, v_flat) = ck.f64s(&format!("{prefix}.v"))?;
        let total: usize = self.m.iter().map(|b| b.len()).sum();
        if m_flat.len() != total || v_flat.len() != total {
            return Err(Error::Checkpoint(format!(
                "`{prefix}` moments hold {}/{} values, expected {total}",
                m_flat.len(),
                v_flat.len()
            )));
        }
        let split = |flat: &[f64]| {
            let mut out = Vec::with_capacity(self.m.len());
            let mut at = 0;
            for b in &self.m {
                out.push(flat[at..at + b.len()].to_vec());
                at += b.len();
            }
            out
        };
        let (m, v) = (split(m_flat), split(v_flat));
        self.restore(steps[0], m, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_block<'a>(values: &'a mut [f64], grads: &'a mut [f64]) -> Vec<ParamBlock<'a>> {
        vec![ParamBlock { name: "p".into(), values, grads }]
    }

    #[test]
    fn first_step_matches_closed_form() {
        // g = 1, defaults: m_hat = 1, v_hat = 1, delta = alpha / (1 + eps).
        let mut vals = [0.0];
        let mut grads = [1.0];
        let mut st = AdamState::new(AdamParams::default(), &[1]);
        st.step(&mut one_block(&mut vals, &mut grads)).unwrap();
        let expected = -1e-3 * 1.0 / (1.0 + 1e-8);
        assert!((vals[0] - expected).abs() < 1e-18, "{} vs {expected}", vals[0]);
    }

    #[test]
    fn matches_scalar_recursion_oracle() {
        // Independent scalar reimplementation of the update recursion.
        let hp = AdamParams { alpha: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        let gradient_of = |x: f64| 2.0 * (x - 3.0); // d/dx (x-3)^2
        let mut theta = 0.0;
        let (mut m, mut v) = (0.0, 0.0);
        let mut expected = Vec::new();
        for t in 1..=25 {
            let g = gradient_of(theta);
            m = hp.beta1 * m + (1.0 - hp.beta1) * g;
            v = hp.beta2 * v + (1.0 - hp.beta2) * g * g;
            let mhat = m / (1.0 - hp.beta1.powi(t));
            let vhat = v / (1.0 - hp.beta2.powi(t));
            theta -= hp.alpha * mhat / (vhat.sqrt() + hp.eps);
            expected.push(theta);
        }

        let mut vals = [0.0];
        let mut st = AdamState::new(hp, &[1]);
        for e in expected {
            let mut grads = [gradient_of(vals[0])];
            st.step(&mut one_block(&mut vals, &mut grads)).unwrap();
            assert!((vals[0] - e).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_gradient_step_size_approaches_alpha() {
        let hp = AdamParams::default();
        let mut vals = [0.0];
        let mut st = AdamState::new(hp, &[1]);
        let mut prev = vals[0];
        let mut last_delta = 0.0;
        for _ in 0..500 {
            let mut grads = [1.0];
            st.step(&mut one_block(&mut vals, &mut grads)).unwrap();
            last_delta = vals[0] - prev;
            prev = vals[0];
        }
        assert!((last_delta.abs() - hp.alpha).abs() < 1e-6, "delta {last_delta}");
    }

    #[test]
    fn non_finite_gradients_are_rejected_without_update() {
        let mut vals = [1.0, 2.0];
        let mut grads = [f64::NAN, 0.0];
        let mut st = AdamState::new(AdamParams::default(), &[2]);
        let err = st.step(&mut one_block(&mut vals, &mut grads)).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(vals, [1.0, 2.0]);
        assert_eq!(st.steps(), 0);
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let mut vals = [0.0; 3];
        let mut grads = [0.0; 3];
        let mut st = AdamState::new(AdamParams::default(), &[2]);
        assert!(st.step(&mut one_block(&mut vals, &mut grads)).is_err());
    }

    #[test]
    fn snapshot_restore_round_trips() {
        let mut vals = [0.5];
        let mut st = AdamState::new(AdamParams::default(), &[1]);
        for _ in 0..3 {
            let mut grads = [0.7];
            st.step(&mut one_block(&mut vals, &mut grads)).unwrap();
        }
        let (t, m, v) = st.snapshot();
        let (m, v) = (m.to_vec(), v.to_vec());
        let mut st2 = AdamState::new(AdamParams::default(), &[1]);
        st2.restore(t, m.clone(), v.clone()).unwrap();
        let mut a = vals;
        let mut b = vals;
        let mut ga = [0.3];
        let mut gb = [0.3];
        st.step(&mut one_block(&mut a, &mut ga)).unwrap();
        st2.step(&mut one_block(&mut b, &mut gb)).unwrap();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }
}
