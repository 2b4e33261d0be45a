//! Next-step prediction of what the agent will see and feel.
//!
//! Two stacked convolutional LSTM layers consume one observation per epoch:
//! the current image as one channel plus the two felt-affect dimensions as
//! constant channels on a unit scale. Every gate sums an input convolution,
//! a hidden convolution and a per-pixel peephole weight on the cell map.
//! The top hidden state feeds two heads: a convolution with a sigmoid for
//! the next image, and a dense readout for the next affect in raw units.
//!
//! Inference carries hidden state across the whole run. Training replays a
//! short window of recent observation pairs from a zero state and takes one
//! Adam step on the mean image and affect errors.

use std::collections::VecDeque;

use crate::checkpoint::Checkpoint;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::nn::{
    conv_acc, conv_grad_input, conv_grad_weights, linear_backward, linear_forward, sigmoid,
    AdamParams, AdamState, Param, ParamBlock,
};
use crate::tensor::Tensor;

/// Maps raw affect onto the unit input scale. Raw values normally sit in
/// 1..9 and can rise a few units further once the body signal is added.
pub fn scale_affect(v: f64) -> f64 {
    (v - 1.0) / 12.0
}

/// Hidden and cell maps of one layer, both [channels, side, side].
#[derive(Clone)]
pub struct CellState {
    pub h: Tensor,
    pub c: Tensor,
}

/// Everything the backward pass needs about one forward step.
pub struct CellCache {
    x: Tensor,
    h_prev: Tensor,
    c_prev: Tensor,
    i: Tensor,
    f: Tensor,
    g: Tensor,
    c: Tensor,
    o: Tensor,
    tc: Tensor,
}

pub struct ConvLstmCell {
    in_ch: usize,
    ch: usize,
    k: usize,
    side: usize,
    w_xi: Param,
    w_hi: Param,
    w_ci: Param,
    b_i: Param,
    w_xf: Param,
    w_hf: Param,
    w_cf: Param,
    b_f: Param,
    w_xc: Param,
    w_hc: Param,
    b_c: Param,
    w_xo: Param,
    w_ho: Param,
    w_co: Param,
    b_o: Param,
}

impl ConvLstmCell {
    pub fn new(tag: &str, in_ch: usize, ch: usize, k: usize, side: usize) -> ConvLstmCell {
        let name = |n: &str| format!("{tag}.{n}");
        ConvLstmCell {
            in_ch,
            ch,
            k,
            side,
            w_xi: Param::new(&name("w_xi"), &[ch, in_ch, k, k]),
            w_hi: Param::new(&name("w_hi"), &[ch, ch, k, k]),
            w_ci: Param::new(&name("w_ci"), &[ch, side, side]),
            b_i: Param::new(&name("b_i"), &[ch]),
            w_xf: Param::new(&name("w_xf"), &[ch, in_ch, k, k]),
            w_hf: Param::new(&name("w_hf"), &[ch, ch, k, k]),
            w_cf: Param::new(&name("w_cf"), &[ch, side, side]),
            b_f: Param::new(&name("b_f"), &[ch]),
            w_xc: Param::new(&name("w_xc"), &[ch, in_ch, k, k]),
            w_hc: Param::new(&name("w_hc"), &[ch, ch, k, k]),
            b_c: Param::new(&name("b_c"), &[ch]),
            w_xo: Param::new(&name("w_xo"), &[ch, in_ch, k, k]),
            w_ho: Param::new(&name("w_ho"), &[ch, ch, k, k]),
            w_co: Param::new(&name("w_co"), &[ch, side, side]),
            b_o: Param::new(&name("b_o"), &[ch]),
        }
    }

    pub fn init(&mut self, rng: &mut impl rand::Rng) {
        let bx = 1.0 / ((self.in_ch * self.k * self.k) as f64).sqrt();
        let bh = 1.0 / ((self.ch * self.k * self.k) as f64).sqrt();
        // Peepholes multiply the unbounded cell map pixel by pixel; they
        // start small so early gating stays input-driven.
        let bp = 0.1;
        for (p, bound) in [
            (&mut self.w_xi, bx),
            (&mut self.w_hi, bh),
            (&mut self.w_ci, bp),
            (&mut self.b_i, bx),
            (&mut self.w_xf, bx),
            (&mut self.w_hf, bh),
            (&mut self.w_cf, bp),
            (&mut self.b_f, bx),
            (&mut self.w_xc, bx),
            (&mut self.w_hc, bh),
            (&mut self.b_c, bx),
            (&mut self.w_xo, bx),
            (&mut self.w_ho, bh),
            (&mut self.w_co, bp),
            (&mut self.b_o, bx),
        ] {
            p.init_uniform(rng, bound);
        }
    }

    pub fn zero_state(&self) -> CellState {
        CellState {
            h: Tensor::zeros(&[self.ch, self.side, self.side]),
            c: Tensor::zeros(&[self.ch, self.side, self.side]),
        }
    }

    pub fn forward(&self, x: &Tensor, state: &CellState) -> Result<(CellState, CellCache)> {
        x.expect_shape(&[self.in_ch, self.side, self.side])?;
        state.h.expect_shape(&[self.ch, self.side, self.side])?;
        state.c.expect_shape(&[self.ch, self.side, self.side])?;

        let mut pre_i = bias_map(&self.b_i.w, self.ch, self.side);
        conv_acc(&self.w_xi.w, x, &mut pre_i);
        conv_acc(&self.w_hi.w, &state.h, &mut pre_i);
        had_acc(&self.w_ci.w, &state.c, &mut pre_i);
        let i = pre_i.map(sigmoid);

        let mut pre_f = bias_map(&self.b_f.w, self.ch, self.side);
        conv_acc(&self.w_xf.w, x, &mut pre_f);
        conv_acc(&self.w_hf.w, &state.h, &mut pre_f);
        had_acc(&self.w_cf.w, &state.c, &mut pre_f);
        let f = pre_f.map(sigmoid);

        let mut pre_g = bias_map(&self.b_c.w, self.ch, self.side);
        conv_acc(&self.w_xc.w, x, &mut pre_g);
        conv_acc(&self.w_hc.w, &state.h, &mut pre_g);
        let g = pre_g.map(f64::tanh);

        let mut c = had(&f, &state.c);
        had_acc(&i, &g, &mut c);

        let mut pre_o = bias_map(&self.b_o.w, self.ch, self.side);
        conv_acc(&self.w_xo.w, x, &mut pre_o);
        conv_acc(&self.w_ho.w, &state.h, &mut pre_o);
        had_acc(&self.w_co.w, &c, &mut pre_o);
        let o = pre_o.map(sigmoid);

        let tc = c.map(f64::tanh);
        let h = had(&o, &tc);

        let cache = CellCache {
            x: x.clone(),
            h_prev: state.h.clone(),
            c_prev: state.c.clone(),
            i,
            f,
            g,
            c: c.clone(),
            o: o.clone(),
            tc,
        };
        Ok((CellState { h, c }, cache))
    }

    /// Pushes gradients on this step's outputs back one step. `dh` and `dc`
    /// are gradients on the new hidden and cell maps; parameter gradients
    /// accumulate in place. Returns (dx, dh_prev, dc_prev).
    pub fn backward(&mut self, cache: &CellCache, dh: &Tensor, dc_out: &Tensor) -> (Tensor, Tensor, Tensor) {
        let n = dh.len();
        let shape = [self.ch, self.side, self.side];
        let mut dpre_o = Tensor::zeros(&shape);
        let mut dc = dc_out.clone();
        {
            let dpo = dpre_o.data_mut();
            let dcd = dc.data_mut();
            for idx in 0..n {
                let dhv = dh.data()[idx];
                let ov = cache.o.data()[idx];
                let tcv = cache.tc.data()[idx];
                dpo[idx] = dhv * tcv * ov * (1.0 - ov);
                dcd[idx] += dhv * ov * (1.0 - tcv * tcv);
            }
            // The output gate peeks at the current cell map.
            for idx in 0..n {
                dcd[idx] += dpo[idx] * self.w_co.w.data()[idx];
                self.w_co.g.data_mut()[idx] += dpo[idx] * cache.c.data()[idx];
            }
        }

        let mut dpre_i = Tensor::zeros(&shape);
        let mut dpre_f = Tensor::zeros(&shape);
        let mut dpre_g = Tensor::zeros(&shape);
        let mut dc_prev = Tensor::zeros(&shape);
        for idx in 0..n {
            let dcv = dc.data()[idx];
            let iv = cache.i.data()[idx];
            let fv = cache.f.data()[idx];
            let gv = cache.g.data()[idx];
            let cpv = cache.c_prev.data()[idx];
            let dpi = dcv * gv * iv * (1.0 - iv);
            let dpf = dcv * cpv * fv * (1.0 - fv);
            dpre_i.data_mut()[idx] = dpi;
            dpre_f.data_mut()[idx] = dpf;
            dpre_g.data_mut()[idx] = dcv * iv * (1.0 - gv * gv);
            dc_prev.data_mut()[idx] =
                dcv * fv + dpi * self.w_ci.w.data()[idx] + dpf * self.w_cf.w.data()[idx];
            self.w_ci.g.data_mut()[idx] += dpi * cpv;
            self.w_cf.g.data_mut()[idx] += dpf * cpv;
        }

        let mut dx = Tensor::zeros(&[self.in_ch, self.side, self.side]);
        let mut dh_prev = Tensor::zeros(&shape);
        for (dpre, wx, wh, b) in [
            (&dpre_i, &mut self.w_xi, &mut self.w_hi, &mut self.b_i),
            (&dpre_f, &mut self.w_xf, &mut self.w_hf, &mut self.b_f),
            (&dpre_g, &mut self.w_xc, &mut self.w_hc, &mut self.b_c),
            (&dpre_o, &mut self.w_xo, &mut self.w_ho, &mut self.b_o),
        ] {
            conv_grad_weights(&cache.x, dpre, &mut wx.g, Some(&mut b.g));
            conv_grad_weights(&cache.h_prev, dpre, &mut wh.g, None);
            conv_grad_input(&wx.w, dpre, &mut dx);
            conv_grad_input(&wh.w, dpre, &mut dh_prev);
        }
        (dx, dh_prev, dc_prev)
    }

    fn params(&self) -> Vec<&Param> {
        vec![
            &self.w_xi,
            &self.w_hi,
            &self.w_ci,
            &self.b_i,
            &self.w_xf,
            &self.w_hf,
            &self.w_cf,
            &self.b_f,
            &self.w_xc,
            &self.w_hc,
            &self.b_c,
            &self.w_xo,
            &self.w_ho,
            &self.w_co,
            &self.b_o,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.w_xi,
            &mut self.w_hi,
            &mut self.w_ci,
            &mut self.b_i,
            &mut self.w_xf,
            &mut self.w_hf,
            &mut self.w_cf,
            &mut self.b_f,
            &mut self.w_xc,
            &mut self.w_hc,
            &mut self.b_c,
            &mut self.w_xo,
            &mut self.w_ho,
            &mut self.w_co,
            &mut self.b_o,
        ]
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(ParamBlock)) {
        for p in self.params_mut() {
            f(p.block());
        }
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

/// What the network expects to observe next.
pub struct Prediction {
    pub image: Tensor,
    pub affect: [f64; 2],
}

/// Loss components of one training pass, each a mean over the window.
#[derive(Debug, Clone, Copy)]
pub struct TrainReport {
    pub loss: f64,
    pub image_term: f64,
    pub affect_term: f64,
}

struct Frame {
    /// Stacked [image, affect0, affect1] input, affect on the unit scale.
    input: Tensor,
    /// The observation that followed; affect in raw units.
    target_image: Tensor,
    target_affect: [f64; 2],
}

pub struct Predictor {
    side: usize,
    channels: usize,
    train_window: usize,
    l1: ConvLstmCell,
    l2: ConvLstmCell,
    w_img: Param,
    b_img: Param,
    w_aff: Param,
    b_aff: Param,
    state1: CellState,
    state2: CellState,
    window: VecDeque<Frame>,
    pending: Option<Tensor>,
    adam: AdamState,
}

impl Predictor {
    pub fn from_config(cfg: &Config) -> Predictor {
        let side = cfg.image.side;
        let (k, ch) = (cfg.predictor.kernel, cfg.predictor.channels);
        let l1 = ConvLstmCell::new("l1", 3, ch, k, side);
        let l2 = ConvLstmCell::new("l2", ch, ch, k, side);
        let w_img = Param::new("w_img", &[1, ch, k, k]);
        let b_img = Param::new("b_img", &[1]);
        let w_aff = Param::new("w_aff", &[2, ch * side * side]);
        let b_aff = Param::new("b_aff", &[2]);
        let lens: Vec<usize> = l1
            .params()
            .into_iter()
            .chain(l2.params())
            .map(|p| p.len())
            .chain([w_img.len(), b_img.len(), w_aff.len(), b_aff.len()])
            .collect();
        let state1 = l1.zero_state();
        let state2 = l2.zero_state();
        Predictor {
            side,
            channels: ch,
            train_window: cfg.predictor.train_window,
            l1,
            l2,
            w_img,
            b_img,
            w_aff,
            b_aff,
            state1,
            state2,
            window: VecDeque::new(),
            pending: None,
            adam: AdamState::new(AdamParams::with_alpha(cfg.predictor.alpha), &lens),
        }
    }

    pub fn init(&mut self, rng: &mut impl rand::Rng) {
        self.l1.init(rng);
        self.l2.init(rng);
        let bi = 1.0 / ((self.channels * self.l1.k * self.l1.k) as f64).sqrt();
        let ba = 1.0 / ((self.channels * self.side * self.side) as f64).sqrt();
        self.w_img.init_uniform(rng, bi);
        self.b_img.init_uniform(rng, bi);
        self.w_aff.init_uniform(rng, ba);
        self.b_aff.init_uniform(rng, ba);
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn states(&self) -> (&CellState, &CellState) {
        (&self.state1, &self.state2)
    }

    /// Feeds the current observation and returns the prediction for the
    /// next one. Affect arrives in raw units. The previous observation's
    /// pending input is completed into the training window with this
    /// observation as its target.
    pub fn observe(&mut self, image: &Tensor, affect: [f64; 2]) -> Result<Prediction> {
        image.expect_shape(&[1, self.side, self.side])?;
        let input = self.build_input(image, affect);
        if let Some(prev) = self.pending.take() {
            self.window.push_back(Frame {
                input: prev,
                target_image: image.clone(),
                target_affect: affect,
            });
            while self.window.len() > self.train_window {
                self.window.pop_front();
            }
        }
        self.pending = Some(input.clone());
        let (s1, _) = self.l1.forward(&input, &self.state1)?;
        let (s2, _) = self.l2.forward(&s1.h, &self.state2)?;
        let pred = self.predict_heads(&s2.h);
        self.state1 = s1;
        self.state2 = s2;
        Ok(pred)
    }

    fn build_input(&self, image: &Tensor, affect: [f64; 2]) -> Tensor {
        let plane = self.side * self.side;
        let mut data = Vec::with_capacity(3 * plane);
        data.extend_from_slice(image.data());
        data.extend(std::iter::repeat(scale_affect(affect[0])).take(plane));
        data.extend(std::iter::repeat(scale_affect(affect[1])).take(plane));
        Tensor::from_vec(&[3, self.side, self.side], data).expect("sized above")
    }

    fn predict_heads(&self, h2: &Tensor) -> Prediction {
        let mut pre = bias_map(&self.b_img.w, 1, self.side);
        conv_acc(&self.w_img.w, h2, &mut pre);
        let image = pre.map(sigmoid);
        let mut affect = [0.0; 2];
        linear_forward(&self.w_aff.w, &self.b_aff.w, h2.data(), &mut affect);
        Prediction { image, affect }
    }

    /// Forward-only loss over the current window; used by gradient checks.
    pub fn window_loss(&mut self) -> Result<f64> {
        Ok(self.window_pass(false)?.loss)
    }

    /// Accumulates window gradients without stepping; used by gradient
    /// checks. Training goes through `train_step`.
    pub fn accumulate_window_grads(&mut self) -> Result<TrainReport> {
        self.zero_grads();
        self.window_pass(true)
    }

    /// One Adam step on the current window, replayed from a zero state.
    pub fn train_step(&mut self) -> Result<TrainReport> {
        self.zero_grads();
        let report = self.window_pass(true)?;
        let Predictor { l1, l2, w_img, b_img, w_aff, b_aff, adam, .. } = self;
        let mut blocks: Vec<ParamBlock> = Vec::new();
        for p in l1.params_mut() {
            blocks.push(p.block());
        }
        for p in l2.params_mut() {
            blocks.push(p.block());
        }
        for p in [w_img, b_img, w_aff, b_aff] {
            blocks.push(p.block());
        }
        adam.step(&mut blocks)?;
        Ok(report)
    }

    fn window_pass(&mut self, accumulate: bool) -> Result<TrainReport> {
        let n = self.window.len();
        if n == 0 {
            return Err(Error::state("predictor training window is empty"));
        }
        let inv_n = 1.0 / n as f64;
        let plane = (self.side * self.side) as f64;
        let mut s1 = self.l1.zero_state();
        let mut s2 = self.l2.zero_state();
        let mut steps: Vec<(CellCache, CellCache, Tensor, Prediction)> = Vec::with_capacity(n);
        let (mut image_term, mut affect_term) = (0.0, 0.0);
        for frame in &self.window {
            let (ns1, c1) = self.l1.forward(&frame.input, &s1)?;
            let (ns2, c2) = self.l2.forward(&ns1.h, &s2)?;
            let pred = self.predict_heads(&ns2.h);
            let mut acc = 0.0;
            for (p, t) in pred.image.data().iter().zip(frame.target_image.data()) {
                acc += (p - t) * (p - t);
            }
            image_term += acc / plane;
            let da0 = pred.affect[0] - frame.target_affect[0];
            let da1 = pred.affect[1] - frame.target_affect[1];
            affect_term += 0.5 * (da0 * da0 + da1 * da1);
            steps.push((c1, c2, ns2.h.clone(), pred));
            s1 = ns1;
            s2 = ns2;
        }
        image_term *= inv_n;
        affect_term *= inv_n;
        let report =
            TrainReport { loss: image_term + affect_term, image_term, affect_term };
        if !accumulate {
            return Ok(report);
        }

        let shape_h = [self.channels, self.side, self.side];
        let mut dh2_next = Tensor::zeros(&shape_h);
        let mut dc2_next = Tensor::zeros(&shape_h);
        let mut dh1_next = Tensor::zeros(&shape_h);
        let mut dc1_next = Tensor::zeros(&shape_h);
        for t in (0..n).rev() {
            let (c1, c2, h2, pred) = &steps[t];
            let frame = &self.window[t];
            let mut dh2 = dh2_next;
            let mut dpre_img = Tensor::zeros(&[1, self.side, self.side]);
            {
                let dp = dpre_img.data_mut();
                for idx in 0..dp.len() {
                    let y = pred.image.data()[idx];
                    let diff = y - frame.target_image.data()[idx];
                    dp[idx] = 2.0 * diff * inv_n / plane * y * (1.0 - y);
                }
            }
            conv_grad_weights(h2, &dpre_img, &mut self.w_img.g, Some(&mut self.b_img.g));
            conv_grad_input(&self.w_img.w, &dpre_img, &mut dh2);
            let da = [
                (pred.affect[0] - frame.target_affect[0]) * inv_n,
                (pred.affect[1] - frame.target_affect[1]) * inv_n,
            ];
            linear_backward(
                &self.w_aff.w,
                h2.data(),
                &da,
                &mut self.w_aff.g,
                Some(&mut self.b_aff.g),
                Some(dh2.data_mut()),
            );
            let (dx2, dh2_prev, dc2_prev) = self.l2.backward(c2, &dh2, &dc2_next);
            dh2_next = dh2_prev;
            dc2_next = dc2_prev;
            let mut dh1 = dh1_next;
            dh1.add_scaled(&dx2, 1.0)?;
            let (_, dh1_prev, dc1_prev) = self.l1.backward(c1, &dh1, &dc1_next);
            dh1_next = dh1_prev;
            dc1_next = dc1_prev;
        }
        Ok(report)
    }

    fn params(&self) -> Vec<&Param> {
        let mut v = self.l1.params();
        v.extend(self.l2.params());
        v.push(&self.w_img);
        v.push(&self.b_img);
        v.push(&self.w_aff);
        v.push(&self.b_aff);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let Predictor { l1, l2, w_img, b_img, w_aff, b_aff, .. } = self;
        let mut v = l1.params_mut();
        v.extend(l2.params_mut());
        v.push(w_img);
        v.push(b_img);
        v.push(w_aff);
        v.push(b_aff);
        v
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(ParamBlock)) {
        for p in self.params_mut() {
            f(p.block());
        }
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn save_into(&self, ck: &mut Checkpoint, prefix: &str) -> Result<()> {
        for p in self.params() {
            ck.put_tensor(&format!("{prefix}.{}", p.name), &p.w)?;
        }
        self.adam.save_into(ck, &format!("{prefix}.adam"))?;
        ck.put_tensor(&format!("{prefix}.state1.h"), &self.state1.h)?;
        ck.put_tensor(&format!("{prefix}.state1.c"), &self.state1.c)?;
        ck.put_tensor(&format!("{prefix}.state2.h"), &self.state2.h)?;
        ck.put_tensor(&format!("{prefix}.state2.c"), &self.state2.c)?;
        let n = self.window.len();
        ck.put_u64(&format!("{prefix}.window.len"), vec![n as u64])?;
        if n > 0 {
            let plane = self.side * self.side;
            let mut inputs = Vec::with_capacity(n * 3 * plane);
            let mut targets = Vec::with_capacity(n * plane);
            let mut affects = Vec::with_capacity(n * 2);
            for frame in &self.window {
                inputs.extend_from_slice(frame.input.data());
                targets.extend_from_slice(frame.target_image.data());
                affects.extend_from_slice(&frame.target_affect);
            }
            ck.put_f64(&format!("{prefix}.window.inputs"), &[n, 3, self.side, self.side], inputs)?;
            ck.put_f64(&format!("{prefix}.window.targets"), &[n, 1, self.side, self.side], targets)?;
            ck.put_f64(&format!("{prefix}.window.affects"), &[n, 2], affects)?;
        }
        match &self.pending {
            Some(x) => {
                ck.put_u64(&format!("{prefix}.pending.some"), vec![1])?;
                ck.put_tensor(&format!("{prefix}.pending.input"), x)?;
            }
            None => ck.put_u64(&format!("{prefix}.pending.some"), vec![0])?,
        }
        Ok(())
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
        self.adam.load_from(ck, &format!("{prefix}.adam"))?;
        let shape = [self.channels, self.side, self.side];
        for (name, slot) in [
            ("state1.h", &mut self.state1.h),
            ("state1.c", &mut self.state1.c),
            ("state2.h", &mut self.state2.h),
            ("state2.c", &mut self.state2.c),
        ] {
            let t = ck.tensor(&format!("{prefix}.{name}"))?;
            t.expect_shape(&shape)?;
            *slot = t;
        }
        let n_block = ck.u64s(&format!("{prefix}.window.len"))?;
        if n_block.len() != 1 {
            return Err(Error::Checkpoint(format!("`{prefix}.window.len` must hold one value")));
        }
        let n = n_block[0] as usize;
        self.window.clear();
        if n > 0 {
            let plane = self.side * self.side;
            let (_, inputs) = ck.f64s(&format!("{prefix}.window.inputs"))?;
            let (_, targets) = ck.f64s(&format!("{prefix}.window.targets"))?;
            let (_, affects) = ck.f64s(&format!("{prefix}.window.affects"))?;
            if inputs.len() != n * 3 * plane || targets.len() != n * plane || affects.len() != n * 2
            {
                return Err(Error::Checkpoint(format!(
                    "`{prefix}.window` blocks do not match {n} frames"
                )));
            }
            for t in 0..n {
                self.window.push_back(Frame {
                    input: Tensor::from_vec(
                        &[3, self.side, self.side],
                        inputs[t * 3 * plane..(t + 1) * 3 * plane].to_vec(),
                    )?,
                    target_image: Tensor::from_vec(
                        &[1, self.side, self.side],
                        targets[t * plane..(t + 1) * plane].to_vec(),
                    )?,
                    target_affect: [affects[t * 2], affects[t * 2 + 1]],
                });
            }
        }
        let pending = ck.u64s(&format!("{prefix}.pending.some"))?;
        self.pending = if pending.first() == Some(&1) {
            let t = ck.tensor(&format!("{prefix}.pending.input"))?;
            t.expect_shape(&[3, self.side, self.side])?;
            Some(t)
        } else {
            None
        };
        Ok(())
    }
}

/// [ch, side, side] map with each channel filled with its bias value.
fn bias_map(b: &Tensor, ch: usize, side: usize) -> Tensor {
    let mut t = Tensor::zeros(&[ch, side, side]);
    let plane = side * side;
    for c in 0..ch {
        t.data_mut()[c * plane..(c + 1) * plane].fill(b.data()[c]);
    }
    t
}

fn had(a: &Tensor, b: &Tensor) -> Tensor {
    debug_assert_eq!(a.shape(), b.shape());
    let mut out = a.clone();
    for (o, y) in out.data_mut().iter_mut().zip(b.data()) {
        *o *= y;
    }
    out
}

fn had_acc(a: &Tensor, b: &Tensor, y: &mut Tensor) {
    debug_assert_eq!(a.shape(), b.shape());
    for ((yo, av), bv) in y.data_mut().iter_mut().zip(a.data()).zip(b.data()) {
        *yo += av * bv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::nn::finite_difference_check;
    use crate::rng::derive_stream;
    use rand::RngExt;

    fn expect_map(got: &Tensor, want: &[f64]) {
        for (g, w) in got.data().iter().zip(want) {
            assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0), "{g} vs {w}");
        }
    }

    #[test]
    fn gate_maps_match_hand_computed_values() {
        let mut cell = ConvLstmCell::new("t", 1, 1, 3, 2);
        let set = |p: &mut Param, vals: &[f64]| p.w.data_mut().copy_from_slice(vals);
        set(&mut cell.w_xi, &[0.05, -0.10, 0.15, 0.20, 0.25, -0.30, 0.10, 0.00, 0.05]);
        set(&mut cell.w_hi, &[-0.05, 0.10, 0.05, 0.15, -0.20, 0.10, 0.00, 0.05, -0.10]);
        set(&mut cell.w_ci, &[0.30, -0.20, 0.10, 0.40]);
        set(&mut cell.b_i, &[0.10]);
        set(&mut cell.w_xf, &[0.10, 0.05, -0.05, -0.15, 0.30, 0.20, 0.05, -0.10, 0.15]);
        set(&mut cell.w_hf, &[0.20, -0.10, 0.00, 0.05, 0.15, -0.25, 0.10, 0.05, 0.00]);
        set(&mut cell.w_cf, &[-0.10, 0.20, 0.30, 0.00]);
        set(&mut cell.b_f, &[-0.05]);
        set(&mut cell.w_xc, &[0.15, 0.10, -0.20, 0.00, 0.35, 0.05, -0.10, 0.20, 0.10]);
        set(&mut cell.w_hc, &[0.05, 0.00, 0.10, -0.20, 0.25, 0.15, 0.10, -0.05, 0.00]);
        set(&mut cell.b_c, &[0.20]);
        set(&mut cell.w_xo, &[-0.10, 0.15, 0.05, 0.25, -0.05, 0.10, 0.00, 0.20, -0.15]);
        set(&mut cell.w_ho, &[0.10, 0.05, -0.10, 0.00, 0.30, 0.05, -0.15, 0.10, 0.20]);
        set(&mut cell.w_co, &[0.25, -0.15, 0.05, 0.10]);
        set(&mut cell.b_o, &[0.05]);

        let x = Tensor::from_vec(&[1, 2, 2], vec![0.30, -0.20, 0.50, 0.10]).unwrap();
        let state = CellState {
            h: Tensor::from_vec(&[1, 2, 2], vec![0.10, 0.40, -0.30, 0.20]).unwrap(),
            c: Tensor::from_vec(&[1, 2, 2], vec![0.20, -0.10, 0.00, 0.30]).unwrap(),
        };
        let (next, cache) = cell.forward(&x, &state).unwrap();

        expect_map(
            &cache.i,
            &[0.57077161189449177, 0.53120937337375629, 0.56094545032471621, 0.58175937684183632],
        );
        expect_map(
            &cache.f,
            &[0.46132739479349194, 0.47128164304856029, 0.50999866687996553, 0.48001065984441826],
        );
        expect_map(
            &cache.g,
            &[0.46604029847771511, 0.13909244787845804, 0.41778034513223983, 0.35835739835078595],
        );
        expect_map(
            &next.c,
            &[0.35826805132861395, 0.026759047773681516, 0.23435198383701963, 0.35248097470454043],
        );
        expect_map(
            &cache.o,
            &[0.56206992511887499, 0.58321518075404111, 0.4916801677862504, 0.55854228741447243],
        );
        expect_map(
            &next.h,
            &[0.19317644975908876, 0.015602559008588467, 0.11316211513564164, 0.1891078747933333],
        );
    }

    fn random_tensor(rng: &mut impl RngExt, shape: &[usize], lo: f64, hi: f64) -> Tensor {
        let len = shape.iter().product();
        Tensor::from_vec(shape, (0..len).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
    }

    #[test]
    fn cell_gradients_match_finite_differences() {
        let mut rng = derive_stream(11, "cell-fd");
        let mut cell = ConvLstmCell::new("t", 2, 2, 3, 4);
        cell.init(&mut rng);
        let x = random_tensor(&mut rng, &[2, 4, 4], -0.8, 0.8);
        let state = CellState {
            h: random_tensor(&mut rng, &[2, 4, 4], -0.6, 0.6),
            c: random_tensor(&mut rng, &[2, 4, 4], -0.6, 0.6),
        };
        // Fixed projections turn both outputs into one scalar loss.
        let u = random_tensor(&mut rng, &[2, 4, 4], -1.0, 1.0);
        let wc = random_tensor(&mut rng, &[2, 4, 4], -1.0, 1.0);

        cell.zero_grads();
        let (_, cache) = cell.forward(&x, &state).unwrap();
        cell.backward(&cache, &u, &wc);

        let report = finite_difference_check(
            &mut cell,
            |m| {
                let (next, _) = m.forward(&x, &state).unwrap();
                let mut loss = 0.0;
                for (hv, uv) in next.h.data().iter().zip(u.data()) {
                    loss += hv * uv;
                }
                for (cv, wv) in next.c.data().iter().zip(wc.data()) {
                    loss += cv * wv;
                }
                loss
            },
            |m, f| m.visit_params(f),
            1e-5,
        );
        assert!(report.passes(1e-4), "worst {} at {}", report.worst_block, report.max_rel_err);
    }

    fn tiny_cfg() -> Config {
        let mut cfg = Config::default();
        cfg.image.side = 4;
        cfg.predictor.kernel = 3;
        cfg.predictor.channels = 2;
        cfg.predictor.train_window = 3;
        cfg
    }

    #[test]
    fn window_gradients_match_finite_differences() {
        let mut rng = derive_stream(7, "predictor-fd");
        let mut p = Predictor::from_config(&tiny_cfg());
        p.init(&mut rng);
        for _ in 0..4 {
            let img = random_tensor(&mut rng, &[1, 4, 4], 0.05, 0.95);
            let aff = [rng.random_range(1.0..9.0), rng.random_range(1.0..9.0)];
            p.observe(&img, aff).unwrap();
        }
        assert_eq!(p.window_len(), 3);
        p.accumulate_window_grads().unwrap();
        let report = finite_difference_check(
            &mut p,
            |m| m.window_loss().unwrap(),
            |m, f| m.visit_params(f),
            1e-5,
        );
        assert!(report.passes(1e-4), "worst {} at {}", report.worst_block, report.max_rel_err);
    }

    #[test]
    fn training_fits_an_alternating_sequence() {
        let mut rng = derive_stream(3, "predictor-train");
        let mut cfg = tiny_cfg();
        cfg.predictor.alpha = 0.01;
        let mut p = Predictor::from_config(&cfg);
        p.init(&mut rng);
        let img_a = Tensor::full(&[1, 4, 4], 0.2);
        let img_b = Tensor::full(&[1, 4, 4], 0.8);
        for t in 0..4 {
            if t % 2 == 0 {
                p.observe(&img_a, [2.0, 6.0]).unwrap();
            } else {
                p.observe(&img_b, [7.0, 3.0]).unwrap();
            }
        }
        let first = p.window_loss().unwrap();
        let mut last = first;
        for _ in 0..1200 {
            last = p.train_step().unwrap().loss;
        }
        assert!(last < first * 0.05, "{first} -> {last}");
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut rng = derive_stream(5, "predictor-ck");
        let mut a = Predictor::from_config(&tiny_cfg());
        a.init(&mut rng);
        for _ in 0..5 {
            let img = random_tensor(&mut rng, &[1, 4, 4], 0.05, 0.95);
            let aff = [rng.random_range(1.0..9.0), rng.random_range(1.0..9.0)];
            a.observe(&img, aff).unwrap();
        }
        a.train_step().unwrap();

        let mut ck = Checkpoint::new();
        a.save_into(&mut ck, "pred").unwrap();
        let ck2 = Checkpoint::from_slice(&ck.to_vec()).unwrap();
        let mut b = Predictor::from_config(&tiny_cfg());
        b.load_from(&ck2, "pred").unwrap();

        let img = Tensor::full(&[1, 4, 4], 0.42);
        let pa = a.observe(&img, [4.2, 5.1]).unwrap();
        let pb = b.observe(&img, [4.2, 5.1]).unwrap();
        assert_eq!(pa.affect[0].to_bits(), pb.affect[0].to_bits());
        assert_eq!(pa.affect[1].to_bits(), pb.affect[1].to_bits());
        for (x, y) in pa.image.data().iter().zip(pb.image.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let ra = a.train_step().unwrap();
        let rb = b.train_step().unwrap();
        assert_eq!(ra.loss.to_bits(), rb.loss.to_bits());
    }

    #[test]
    fn window_keeps_the_latest_pairs() {
        let mut p = Predictor::from_config(&tiny_cfg());
        assert!(p.window_loss().is_err());
        for t in 0..6 {
            let img = Tensor::full(&[1, 4, 4], t as f64 / 10.0);
            p.observe(&img, [t as f64, 1.0]).unwrap();
        }
        assert_eq!(p.window_len(), 3);
        // Six observations make five pairs; the window keeps the last three,
        // so the oldest kept input was observation 2 with target 3.
        assert_eq!(p.window[0].target_affect[0], 3.0);
        assert_eq!(p.window[2].target_affect[0], 5.0);
        let plane = 16;
        assert_eq!(p.window[0].input.data()[plane], scale_affect(2.0));
        assert_eq!(p.window[0].input.data()[0], 0.2);
    }
}
