//! Appraisal network: a recurrent attention model that reads an image through
//! a short sequence of foveated glimpses and regresses its affect (valence,
//! arousal). Glimpse locations are chosen by a stochastic policy trained with
//! REINFORCE against a hit-band reward; the regression head trains with
//! plain squared error through the same core.

use rand::RngExt;
use rand_chacha::ChaCha12Rng;

use crate::checkpoint::Checkpoint;
use crate::config::Config;
use crate::env::Corpus;
use crate::error::{Error, Result};
use crate::nn::{AdamParams, AdamState};
use crate::nn::{linear_backward, linear_forward, matvec_acc, sample_standard_normal, Param, ParamBlock};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Ram {
    side: usize,
    scales: usize,
    patch: usize,
    scale_factor: usize,
    glimpses: usize,
    hidden: usize,
    feature: usize,
    sigma: f64,
    reward_band: f64,
    w_rho: Param,
    b_rho: Param,
    w_loc_in: Param,
    b_loc_in: Param,
    w_g_hg: Param,
    w_g_hl: Param,
    b_g: Param,
    w_hh: Param,
    w_gh: Param,
    b_h: Param,
    w_mean: Param,
    b_mean: Param,
    w_est: Param,
    b_est: Param,
    baseline: f64,
}

/// Everything recorded during one episode, enough to run the exact backward
/// pass and to re-evaluate the surrogate loss under parameter nudges.
#[derive(Debug, Clone)]
pub struct Trace {
    pub locs: Vec<[f64; 2]>,    // attended locations, locs[0] is the fixed start
    pub rho: Vec<Vec<f64>>,     // glimpse vectors
    hg: Vec<Vec<f64>>,
    hl: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    means: Vec<[f64; 2]>,       // policy means for locs[1..]
    samples: Vec<[f64; 2]>,     // pre-clamp draws for locs[1..]
    pub estimate: [f64; 2],
}

#[derive(Clone, Copy)]
enum LocSource<'a> {
    Sample(&'a [f64]),
    Replay { locs: &'a [[f64; 2]], samples: &'a [[f64; 2]] },
}

#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: u64,
    pub train_mse: f64,
    pub reward_rate: f64,
    pub holdout_mae: [f64; 2],
}

impl Ram {
    pub fn from_config(cfg: &Config) -> Ram {
        let r = &cfg.ram;
        let gdim = r.scales * r.patch * r.patch;
        Ram {
            side: cfg.image.side,
            scales: r.scales,
            patch: r.patch,
            scale_factor: r.scale_factor,
            glimpses: r.glimpses,
            hidden: r.hidden,
            feature: r.feature,
            sigma: r.location_sigma,
            reward_band: r.reward_band,
            w_rho: Param::new("w_rho", &[r.feature, gdim]),
            b_rho: Param::new("b_rho", &[r.feature]),
            w_loc_in: Param::new("w_loc_in", &[r.feature, 2]),
            b_loc_in: Param::new("b_loc_in", &[r.feature]),
            w_g_hg: Param::new("w_g_hg", &[r.hidden, r.feature]),
            w_g_hl: Param::new("w_g_hl", &[r.hidden, r.feature]),
            b_g: Param::new("b_g", &[r.hidden]),
            w_hh: Param::new("w_hh", &[r.hidden, r.hidden]),
            w_gh: Param::new("w_gh", &[r.hidden, r.hidden]),
            b_h: Param::new("b_h", &[r.hidden]),
            w_mean: Param::new("w_mean", &[2, r.hidden]),
            b_mean: Param::new("b_mean", &[2]),
            w_est: Param::new("w_est", &[2, r.hidden]),
            b_est: Param::new("b_est", &[2]),
            baseline: 0.0,
        }
    }

    pub fn init(&mut self, rng: &mut ChaCha12Rng) {
        // Weights and biases share the layer's 1/sqrt(fan_in) bound. Nonzero
        // biases also keep relu pre-activations off the exact kink at the
        // fixed centered first location.
        let gdim = self.scales * self.patch * self.patch;
        let f = self.feature;
        let h = self.hidden;
        for (p, fan_in) in [
            (&mut self.w_rho, gdim),
            (&mut self.b_rho, gdim),
            (&mut self.w_loc_in, 2),
            (&mut self.b_loc_in, 2),
            (&mut self.w_g_hg, f),
            (&mut self.w_g_hl, f),
            (&mut self.b_g, f),
            (&mut self.w_hh, h),
            (&mut self.w_gh, h),
            (&mut self.b_h, h),
            (&mut self.w_mean, h),
            (&mut self.b_mean, h),
            (&mut self.w_est, h),
            (&mut self.b_est, h),
        ] {
            p.init_uniform(rng, 1.0 / (fan_in as f64).sqrt());
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.w_rho,
            &mut self.b_rho,
            &mut self.w_loc_in,
            &mut self.b_loc_in,
            &mut self.w_g_hg,
            &mut self.w_g_hl,
            &mut self.b_g,
            &mut self.w_hh,
            &mut self.w_gh,
            &mut self.b_h,
            &mut self.w_mean,
            &mut self.b_mean,
            &mut self.w_est,
            &mut self.b_est,
        ]
    }

    fn params(&self) -> Vec<&Param> {
        vec![
            &self.w_rho,
            &self.b_rho,
            &self.w_loc_in,
            &self.b_loc_in,
            &self.w_g_hg,
            &self.w_g_hl,
            &self.b_g,
            &self.w_hh,
            &self.w_gh,
            &self.b_h,
            &self.w_mean,
            &self.b_mean,
            &self.w_est,
            &self.b_est,
        ]
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(ParamBlock)) {
        for p in self.params_mut() {
            f(p.block());
        }
    }

    pub fn param_lens(&mut self) -> Vec<usize> {
        self.params_mut().iter().map(|p| p.len()).collect()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn set_baseline(&mut self, b: f64) {
        self.baseline = b;
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn noise_len(&self) -> usize {
        2 * (self.glimpses.saturating_sub(1))
    }

    /// Multi-scale retina read-out at a location in [-1, 1]^2 (row, col).
    /// Scale j covers a patch * factor^j window averaged down to patch^2
    /// cells; pixels outside the image count as zero.
    pub fn glimpse(&self, img: &Tensor, loc: [f64; 2]) -> Vec<f64> {
        let side = self.side as isize;
        let data = img.data();
        let mut out = Vec::with_capacity(self.scales * self.patch * self.patch);
        let cy = (loc[0] + 1.0) / 2.0 * (self.side - 1) as f64;
        let cx = (loc[1] + 1.0) / 2.0 * (self.side - 1) as f64;
        for j in 0..self.scales {
            let block = self.scale_factor.pow(j as u32) as isize;
            let win = self.patch as isize * block;
            let top = (cy - (win - 1) as f64 / 2.0).round() as isize;
            let left = (cx - (win - 1) as f64 / 2.0).round() as isize;
            let inv = 1.0 / (block * block) as f64;
            for py in 0..self.patch as isize {
                for px in 0..self.patch as isize {
                    let mut acc = 0.0;
                    for by in 0..block {
                        let r = top + py * block + by;
                        if r < 0 || r >= side {
                            continue;
                        }
                        for bx in 0..block {
                            let c = left + px * block + bx;
                            if c >= 0 && c < side {
                                acc += data[(r * side + c) as usize];
                            }
                        }
                    }
                    out.push(acc * inv);
                }
            }
        }
        out
    }

    /// Runs one episode. `eps` supplies the (glimpses-1)*2 standard-normal
    /// draws for the location policy, making the pass a deterministic
    /// function of parameters, image and noise.
    pub fn forward_trace(&self, img: &Tensor, eps: &[f64]) -> Trace {
        assert_eq!(eps.len(), self.noise_len(), "noise buffer length");
        self.forward_inner(img, LocSource::Sample(eps))
    }

    /// Re-runs an episode with the attended locations pinned to a previous
    /// trace. The surrogate loss of the result is a differentiable function
    /// of the parameters alone, which is what the backward pass accumulates;
    /// finite-difference checks must go through this path.
    pub fn replay_trace(&self, img: &Tensor, base: &Trace) -> Trace {
        self.forward_inner(img, LocSource::Replay { locs: &base.locs, samples: &base.samples })
    }

    fn forward_inner(&self, img: &Tensor, source: LocSource) -> Trace {
        let t_total = self.glimpses;
        let mut trace = Trace {
            locs: Vec::with_capacity(t_total),
            rho: Vec::with_capacity(t_total),
            hg: Vec::with_capacity(t_total),
            hl: Vec::with_capacity(t_total),
            g: Vec::with_capacity(t_total),
            h: Vec::with_capacity(t_total),
            means: Vec::with_capacity(t_total.saturating_sub(1)),
            samples: Vec::with_capacity(t_total.saturating_sub(1)),
            estimate: [0.0; 2],
        };
        let mut loc = [0.0f64; 2]; // first glimpse is centered
        let mut h_prev = vec![0.0f64; self.hidden];
        for t in 0..t_total {
            let rho = self.glimpse(img, loc);
            let mut hg = vec![0.0; self.feature];
            linear_forward(&self.w_rho.w, &self.b_rho.w, &rho, &mut hg);
            for v in &mut hg {
                *v = v.max(0.0);
            }
            let mut hl = vec![0.0; self.feature];
            linear_forward(&self.w_loc_in.w, &self.b_loc_in.w, &loc, &mut hl);
            for v in &mut hl {
                *v = v.max(0.0);
            }
            let mut g = vec![0.0; self.hidden];
            linear_forward(&self.w_g_hg.w, &self.b_g.w, &hg, &mut g);
            matvec_acc(&self.w_g_hl.w, &hl, &mut g);
            for v in &mut g {
                *v = v.max(0.0);
            }
            let mut h = vec![0.0; self.hidden];
            linear_forward(&self.w_hh.w, &self.b_h.w, &h_prev, &mut h);
            matvec_acc(&self.w_gh.w, &g, &mut h);
            for v in &mut h {
                *v = v.max(0.0);
            }
            trace.locs.push(loc);
            trace.rho.push(rho);
            trace.hg.push(hg);
            trace.hl.push(hl);
            trace.g.push(g);
            if t + 1 < t_total {
                let mut mean = [0.0; 2];
                linear_forward(&self.w_mean.w, &self.b_mean.w, &h, &mut mean);
                mean[0] = mean[0].tanh();
                mean[1] = mean[1].tanh();
                let u = match source {
                    LocSource::Sample(eps) => [
                        mean[0] + self.sigma * eps[2 * t],
                        mean[1] + self.sigma * eps[2 * t + 1],
                    ],
                    LocSource::Replay { samples, .. } => samples[t],
                };
                loc = match source {
                    LocSource::Sample(_) => [u[0].clamp(-1.0, 1.0), u[1].clamp(-1.0, 1.0)],
                    LocSource::Replay { locs, .. } => locs[t + 1],
                };
                trace.means.push(mean);
                trace.samples.push(u);
            }
            trace.h.push(h.clone());
            h_prev = h;
        }
        let mut est = [0.0; 2];
        linear_forward(&self.w_est.w, &self.b_est.w, &h_prev, &mut est);
        trace.estimate = est;
        trace
    }

    pub fn estimate(&self, img: &Tensor, rng: &mut ChaCha12Rng) -> [f64; 2] {
        let eps = self.draw_noise(rng);
        self.forward_trace(img, &eps).estimate
    }

    pub fn draw_noise(&self, rng: &mut ChaCha12Rng) -> Vec<f64> {
        if self.sigma == 0.0 {
            vec![0.0; self.noise_len()]
        } else {
            (0..self.noise_len()).map(|_| sample_standard_normal(rng)).collect()
        }
    }

    pub fn mse(&self, trace: &Trace, label: [f64; 2]) -> f64 {
        let e0 = trace.estimate[0] - label[0];
        let e1 = trace.estimate[1] - label[1];
        (e0 * e0 + e1 * e1) / 2.0
    }

    /// Hit reward: 1 when both estimate errors are inside the band.
    pub fn hit(&self, trace: &Trace, label: [f64; 2]) -> f64 {
        let in_band = (trace.estimate[0] - label[0]).abs() < self.reward_band
            && (trace.estimate[1] - label[1]).abs() < self.reward_band;
        if in_band {
            1.0
        } else {
            0.0
        }
    }

    fn log_prob_sum(&self, trace: &Trace) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let norm = -(self.sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
        let inv2s2 = 1.0 / (2.0 * self.sigma * self.sigma);
        trace
            .means
            .iter()
            .zip(&trace.samples)
            .map(|(m, u)| {
                let d0 = u[0] - m[0];
                let d1 = u[1] - m[1];
                2.0 * norm - (d0 * d0 + d1 * d1) * inv2s2
            })
            .sum()
    }

    /// The quantity whose gradient the backward pass accumulates:
    /// mse - advantage * sum of location log-densities.
    pub fn surrogate_loss(&self, trace: &Trace, label: [f64; 2], advantage: f64) -> f64 {
        self.mse(trace, label) - advantage * self.log_prob_sum(trace)
    }

    /// Accumulates gradients of `surrogate_loss` into the parameter grads.
    pub fn backward(&mut self, trace: &Trace, label: [f64; 2], advantage: f64) {
        let t_total = self.glimpses;
        let mut dh: Vec<Vec<f64>> = (0..t_total).map(|_| vec![0.0; self.hidden]).collect();
        let dest = [trace.estimate[0] - label[0], trace.estimate[1] - label[1]];
        linear_backward(
            &self.w_est.w,
            &trace.h[t_total - 1],
            &dest,
            &mut self.w_est.g,
            Some(&mut self.b_est.g),
            Some(&mut dh[t_total - 1]),
        );
        let inv_s2 = if self.sigma > 0.0 { 1.0 / (self.sigma * self.sigma) } else { 0.0 };
        for t in (0..t_total).rev() {
            if t + 1 < t_total && self.sigma > 0.0 {
                let mean = trace.means[t];
                let u = trace.samples[t];
                // d/dmean of -advantage * logpi, through the tanh squash.
                let dmean = [
                    -advantage * (u[0] - mean[0]) * inv_s2 * (1.0 - mean[0] * mean[0]),
                    -advantage * (u[1] - mean[1]) * inv_s2 * (1.0 - mean[1] * mean[1]),
                ];
                linear_backward(
                    &self.w_mean.w,
                    &trace.h[t],
                    &dmean,
                    &mut self.w_mean.g,
                    Some(&mut self.b_mean.g),
                    Some(&mut dh[t]),
                );
            }
            // Core relu mask, then split the pre-activation gradient into
            // the recurrent path (toward dh[t-1]) and the glimpse path.
            let dpre: Vec<f64> = dh[t]
                .iter()
                .zip(&trace.h[t])
                .map(|(d, h)| if *h > 0.0 { *d } else { 0.0 })
                .collect();
            let mut dg = vec![0.0; self.hidden];
            linear_backward(
                &self.w_gh.w,
                &trace.g[t],
                &dpre,
                &mut self.w_gh.g,
                None,
                Some(&mut dg),
            );
            if t > 0 {
                let mut dh_prev = std::mem::take(&mut dh[t - 1]);
                linear_backward(
                    &self.w_hh.w,
                    &trace.h[t - 1],
                    &dpre,
                    &mut self.w_hh.g,
                    Some(&mut self.b_h.g),
                    Some(&mut dh_prev),
                );
                dh[t - 1] = dh_prev;
            } else {
                let zeros = vec![0.0; self.hidden];
                linear_backward(
                    &self.w_hh.w,
                    &zeros,
                    &dpre,
                    &mut self.w_hh.g,
                    Some(&mut self.b_h.g),
                    None,
                );
            }
            // dg through the glimpse-net output relu.
            let dg_pre: Vec<f64> = dg
                .iter()
                .zip(&trace.g[t])
                .map(|(d, g)| if *g > 0.0 { *d } else { 0.0 })
                .collect();
            let mut dhg = vec![0.0; self.feature];
            let mut dhl = vec![0.0; self.feature];
            linear_backward(
                &self.w_g_hg.w,
                &trace.hg[t],
                &dg_pre,
                &mut self.w_g_hg.g,
                Some(&mut self.b_g.g),
                Some(&mut dhg),
            );
            linear_backward(
                &self.w_g_hl.w,
                &trace.hl[t],
                &dg_pre,
                &mut self.w_g_hl.g,
                None,
                Some(&mut dhl),
            );
            let dhg_pre: Vec<f64> = dhg
                .iter()
                .zip(&trace.hg[t])
                .map(|(d, v)| if *v > 0.0 { *d } else { 0.0 })
                .collect();
            linear_backward(
                &self.w_rho.w,
                &trace.rho[t],
                &dhg_pre,
                &mut self.w_rho.g,
                Some(&mut self.b_rho.g),
                None,
            );
            let dhl_pre: Vec<f64> = dhl
                .iter()
                .zip(&trace.hl[t])
                .map(|(d, v)| if *v > 0.0 { *d } else { 0.0 })
                .collect();
            linear_backward(
                &self.w_loc_in.w,
                &trace.locs[t],
                &dhl_pre,
                &mut self.w_loc_in.g,
                Some(&mut self.b_loc_in.g),
                None,
            );
        }
    }

    fn train_batch(
        &mut self,
        corpus: &Corpus,
        batch: &[usize],
        rng: &mut ChaCha12Rng,
        adam: &mut AdamState,
        baseline_lr: f64,
    ) -> Result<(f64, f64)> {
        self.zero_grads();
        let mut mse_sum = 0.0;
        let mut reward_sum = 0.0;
        let advantage_base = self.baseline;
        for &i in batch {
            let eps = self.draw_noise(rng);
            let trace = self.forward_trace(&corpus.images[i], &eps);
            let label = corpus.labels[i];
            let r = self.hit(&trace, label);
            mse_sum += self.mse(&trace, label);
            reward_sum += r;
            self.backward(&trace, label, r - advantage_base);
        }
        let inv = 1.0 / batch.len() as f64;
        for p in self.params_mut() {
            for g in p.g.data_mut() {
                *g *= inv;
            }
        }
        let mut blocks = Vec::new();
        for p in self.params_mut() {
            blocks.push(p.block());
        }
        adam.step(&mut blocks)?;
        let mean_r = reward_sum * inv;
        self.baseline += baseline_lr * (mean_r - self.baseline);
        Ok((mse_sum * inv, mean_r))
    }

    /// Mean absolute estimate error per affect dimension over `idx`.
    pub fn mae(&self, corpus: &Corpus, idx: &[usize], rng: &mut ChaCha12Rng) -> [f64; 2] {
        let mut acc = [0.0f64; 2];
        for &i in idx {
            let est = self.estimate(&corpus.images[i], rng);
            acc[0] += (est[0] - corpus.labels[i][0]).abs();
            acc[1] += (est[1] - corpus.labels[i][1]).abs();
        }
        let inv = 1.0 / idx.len().max(1) as f64;
        [acc[0] * inv, acc[1] * inv]
    }

    pub fn save_into(&self, ck: &mut Checkpoint, prefix: &str) -> Result<()> {
        for p in self.params() {
            ck.put_tensor(&format!("{prefix}.{}", p.name), &p.w)?;
        }
        ck.put_scalar(&format!("{prefix}.baseline"), self.baseline)
    }

    pub fn load_from(&mut self, ck: &Checkpoint, prefix: &str) -> Result<()> {
        for p in self.params_mut() {
            let name = format!("{prefix}.{}", p.name);
            let t = ck.tensor(&name)?;
            if t.shape() != p.w.shape() {
                return Err(Error::Checkpoint(format!(
                    "`{name}`: shape {:?} does not match model {:?}",
                    t.shape(),
                    p.w.shape()
                )));
            }
            p.w = t;
        }
        self.baseline = ck.scalar(&format!("{prefix}.baseline"))?;
        Ok(())
    }
}

fn shuffle(idx: &mut [usize], rng: &mut ChaCha12Rng) {
    for i in (1..idx.len()).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
}

/// Trains an appraisal network on a labelled corpus. Stops early once the
/// held-out MAE falls below `stop_mae` on both dimensions, otherwise runs the
/// configured number of epochs. Returns the model and per-epoch history.
pub fn train(
    cfg: &Config,
    corpus: &Corpus,
    rng: &mut ChaCha12Rng,
    stop_mae: Option<f64>,
) -> Result<(Ram, Vec<EpochStats>)> {
    let (mut train_idx, held_idx) = corpus.split(cfg.env.holdout_fraction);
    let mut ram = Ram::from_config(cfg);
    ram.init(rng);
    let lens = ram.param_lens();
    let mut adam = AdamState::new(AdamParams::with_alpha(cfg.ram.alpha), &lens);
    let mut history = Vec::new();
    for epoch in 0..cfg.ram.epochs {
        shuffle(&mut train_idx, rng);
        let mut mse = 0.0;
        let mut reward = 0.0;
        let mut batches = 0usize;
        for batch in train_idx.chunks(cfg.ram.batch) {
            let (m, r) = ram.train_batch(corpus, batch, rng, &mut adam, cfg.ram.baseline_lr)?;
            mse += m;
            reward += r;
            batches += 1;
        }
        let inv = 1.0 / batches.max(1) as f64;
        let holdout_mae = ram.mae(corpus, &held_idx, rng);
        history.push(EpochStats {
            epoch,
            train_mse: mse * inv,
            reward_rate: reward * inv,
            holdout_mae,
        });
        if let Some(t) = stop_mae {
            if holdout_mae[0] < t && holdout_mae[1] < t {
                break;
            }
        }
    }
    Ok((ram, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_difference_check;
    use crate::rng::derive_stream;
    use crate::stats::normal_cdf;

    fn small_cfg() -> Config {
        let mut cfg = Config::default();
        cfg.image.side = 16;
        cfg.ram.patch = 4;
        cfg.ram.scales = 2;
        cfg.ram.scale_factor = 2;
        cfg.ram.glimpses = 3;
        cfg.ram.hidden = 12;
        cfg.ram.feature = 10;
        cfg
    }

    #[test]
    fn glimpse_extracts_multiscale_patches() {
        let mut cfg = Config::default();
        cfg.image.side = 4;
        cfg.ram.patch = 2;
        cfg.ram.scales = 2;
        cfg.ram.scale_factor = 2;
        let ram = Ram::from_config(&cfg);
        let img = Tensor::from_vec(
            &[1, 4, 4],
            (1..=16).map(|v| v as f64).collect(),
        )
        .unwrap();
        // Centered: fine scale reads the middle 2x2, coarse scale averages
        // the four quadrants.
        let v = ram.glimpse(&img, [0.0, 0.0]);
        assert_eq!(v, vec![6.0, 7.0, 10.0, 11.0, 3.5, 5.5, 11.5, 13.5]);
        // Top-left corner: out-of-image cells read as zero.
        let v = ram.glimpse(&img, [-1.0, -1.0]);
        assert_eq!(&v[..4], &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn surrogate_gradients_match_finite_differences() {
        let mut rng = derive_stream(11, "ram-fd");
        let cfg = small_cfg();
        let mut ram = Ram::from_config(&cfg);
        ram.init(&mut rng);
        ram.set_baseline(0.37); // nonzero advantage so the policy term is live
        let mut img = Tensor::zeros(&[1, 16, 16]);
        for v in img.data_mut() {
            *v = rng.random_range(0.0..1.0);
        }
        let eps = ram.draw_noise(&mut rng);
        let label = [7.3, 2.6];
        let trace = ram.forward_trace(&img, &eps);
        let advantage = ram.hit(&trace, label) - ram.baseline();
        ram.zero_grads();
        ram.backward(&trace, label, advantage);
        let base = trace.clone();
        let report = finite_difference_check(
            &mut ram,
            |m| {
                let t = m.replay_trace(&img, &base);
                m.surrogate_loss(&t, label, advantage)
            },
            |m, f| m.visit_params(f),
            1e-5,
        );
        assert!(report.passes(1e-4), "{report:?}");
    }

    #[test]
    fn reinforce_estimator_matches_analytic_gradient() {
        // Bandit check of the score-function identity the location policy
        // relies on: u ~ N(m, s^2), R = 1[u > 0], so dE[R]/dm is the normal
        // density at m/s over s. The estimator (R - b)(u - m)/s^2 must agree.
        let mut rng = derive_stream(12, "bandit");
        let m = 0.3f64;
        let s = 0.8f64;
        let b = normal_cdf(m / s); // optimal constant baseline
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let u = m + s * sample_standard_normal(&mut rng);
            let r = if u > 0.0 { 1.0 } else { 0.0 };
            acc += (r - b) * (u - m) / (s * s);
        }
        let estimate = acc / n as f64;
        let z = m / s;
        let analytic = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() / s;
        assert!(
            (estimate - analytic).abs() < 0.05 * analytic,
            "estimate {estimate} vs analytic {analytic}"
        );
    }

    #[test]
    fn training_reduces_holdout_error() {
        let mut cfg = small_cfg();
        // Three scales so the coarsest glimpse covers the full image; the
        // half-difference (arousal) code is unreadable otherwise.
        cfg.ram.scales = 3;
        cfg.ram.hidden = 48;
        cfg.ram.feature = 48;
        cfg.ram.batch = 12;
        cfg.ram.epochs = 40;
        let mut rng = derive_stream(13, "ram-train");
        let corpus = Corpus::generate(240, cfg.image.side, 0.05, &mut rng).unwrap();
        let (_, history) = train(&cfg, &corpus, &mut rng, None).unwrap();
        let first = history.first().unwrap().holdout_mae;
        let last = history.last().unwrap().holdout_mae;
        assert!(last[0] < first[0] && last[1] < first[1], "{first:?} -> {last:?}");
        assert!(last[0] < 1.5 && last[1] < 1.5, "{last:?}");
    }

    #[test]
    fn checkpoint_round_trip_preserves_estimates() {
        let cfg = small_cfg();
        let mut rng = derive_stream(14, "ram-ck");
        let mut ram = Ram::from_config(&cfg);
        ram.init(&mut rng);
        ram.set_baseline(0.25);
        let mut ck = Checkpoint::new();
        ram.save_into(&mut ck, "ram").unwrap();
        let mut back = Ram::from_config(&cfg);
        back.load_from(&Checkpoint::from_slice(&ck.to_vec()).unwrap(), "ram").unwrap();
        let mut img = Tensor::zeros(&[1, 16, 16]);
        for v in img.data_mut() {
            *v = rng.random_range(0.0..1.0);
        }
        let mut r1 = derive_stream(15, "eval");
        let mut r2 = derive_stream(15, "eval");
        let a = ram.estimate(&img, &mut r1);
        let b = back.estimate(&img, &mut r2);
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
        assert_eq!(back.baseline(), 0.25);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let mut cfg = small_cfg();
        cfg.ram.epochs = 2;
        cfg.ram.batch = 16;
        let run = || {
            let mut rng = derive_stream(16, "ram-det");
            let corpus = Corpus::generate(64, cfg.image.side, 0.05, &mut rng).unwrap();
            let (_, h) = train(&cfg, &corpus, &mut rng, None).unwrap();
            h.last().unwrap().holdout_mae
        };
        let a = run();
        let b = run();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }
}
