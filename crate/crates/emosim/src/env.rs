//! Caregiver-mirroring environment.
//!
//! The agent's action is a four-channel facial pose. The caregiver reads the
//! pose as an expression and mirrors it with one of two stimulus images from
//! the matching category; in the richer condition she shows an unrelated
//! natural image half of the time instead. Closing the eyes blacks out the
//! view entirely.
//!
//! Every stimulus carries a ground-truth affect target (valence, arousal on a
//! 1..9 scale) that is written into the image itself through a linear
//! brightness code: the global mean encodes valence and the top-minus-bottom
//! half difference encodes arousal. The appraisal network is trained on a
//! synthetic corpus drawn from the same code, so its reading of any stimulus
//! approximates the stimulus's target.

use rand::RngExt;
use rand_chacha::ChaCha12Rng;

use crate::config::{Condition, Config};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CONTROL_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceControls {
    pub eyelid_open: f64,
    pub eyebrow_knit: f64,
    pub mouth_open: f64,
    pub mouth_corner: f64,
}

impl FaceControls {
    pub fn neutral() -> FaceControls {
        FaceControls { eyelid_open: 0.5, eyebrow_knit: 0.5, mouth_open: 0.5, mouth_corner: 0.5 }
    }

    pub fn from_array(a: [f64; CONTROL_DIM]) -> FaceControls {
        FaceControls { eyelid_open: a[0], eyebrow_knit: a[1], mouth_open: a[2], mouth_corner: a[3] }
    }

    pub fn to_array(self) -> [f64; CONTROL_DIM] {
        [self.eyelid_open, self.eyebrow_knit, self.mouth_open, self.mouth_corner]
    }

    pub fn clamped(self) -> FaceControls {
        let a = self.to_array().map(|v| v.clamp(0.0, 1.0));
        FaceControls::from_array(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Expression {
    Neutral,
    Pleasure,
    Anger,
    Sadness,
}

pub const EXPRESSIONS: [Expression; 4] =
    [Expression::Neutral, Expression::Pleasure, Expression::Anger, Expression::Sadness];

impl Expression {
    pub fn index(self) -> usize {
        match self {
            Expression::Neutral => 0,
            Expression::Pleasure => 1,
            Expression::Anger => 2,
            Expression::Sadness => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Expression::Neutral => "neutral",
            Expression::Pleasure => "pleasure",
            Expression::Anger => "anger",
            Expression::Sadness => "sadness",
        }
    }
}

/// Membership tests for the four expression classes, written out separately
/// so exclusivity and coverage can be checked rather than assumed. Raised
/// mouth corners read as pleasure; lowered corners with knitted brows split
/// into anger (eyes wide) and sadness (eyes lowered); everything else is
/// neutral.
pub fn expression_predicates(c: &FaceControls) -> [bool; 4] {
    let pleasure = c.mouth_corner > 0.5;
    let anger = c.mouth_corner < 0.5 && c.eyebrow_knit > 0.5 && c.eyelid_open > 0.5;
    let sadness = c.mouth_corner < 0.5 && c.eyebrow_knit > 0.5 && c.eyelid_open <= 0.5;
    let neutral = c.mouth_corner <= 0.5 && !(c.mouth_corner < 0.5 && c.eyebrow_knit > 0.5);
    [neutral, pleasure, anger, sadness]
}

pub fn classify_expression(c: &FaceControls) -> Expression {
    let p = expression_predicates(c);
    debug_assert_eq!(p.iter().filter(|&&b| b).count(), 1);
    if p[1] {
        Expression::Pleasure
    } else if p[2] {
        Expression::Anger
    } else if p[3] {
        Expression::Sadness
    } else {
        Expression::Neutral
    }
}

// Brightness code shared by the stimulus set and the training corpus:
// mean = 0.3 + 0.05 (v - 1), top-bottom difference = 0.1 (a - 5).
const MEAN_BASE: f64 = 0.3;
const MEAN_GAIN: f64 = 0.05;
const DELTA_GAIN: f64 = 0.1;

pub fn affect_to_half_means(valence: f64, arousal: f64) -> (f64, f64) {
    let mu = MEAN_BASE + MEAN_GAIN * (valence - 1.0);
    let delta = DELTA_GAIN * (arousal - 5.0);
    (mu + 0.5 * delta, mu - 0.5 * delta)
}

/// Rewrites the image so its two half means are exactly the coded targets.
/// Pixel deviations around each half mean are kept (scaled down if needed to
/// stay inside [0.02, 0.98]), so the drawn content survives the coding.
pub fn encode_affect(img: &mut Tensor, valence: f64, arousal: f64) -> Result<()> {
    let shape = img.shape().to_vec();
    if shape.len() != 3 || shape[0] != 1 || shape[1] % 2 != 0 {
        return Err(Error::invalid(format!("expected [1, 2k, w] image, got {shape:?}")));
    }
    let (t_top, t_bot) = affect_to_half_means(valence, arousal);
    let half = shape[1] / 2 * shape[2];
    let data = img.data_mut();
    for (target, part) in [(t_top, 0..half), (t_bot, half..2 * half)] {
        let slice = &mut data[part];
        let mean = slice.iter().sum::<f64>() / slice.len() as f64;
        let mut hi = 0.0f64;
        let mut lo = 0.0f64;
        for v in slice.iter() {
            hi = hi.max(*v - mean);
            lo = lo.min(*v - mean);
        }
        let mut k = 1.0f64;
        if hi > 0.0 {
            k = k.min((0.98 - target) / hi);
        }
        if lo < 0.0 {
            k = k.min((target - 0.02) / -lo);
        }
        let k = k.max(0.0);
        for v in slice.iter_mut() {
            *v = target + k * (*v - mean);
        }
    }
    Ok(())
}

/// Inverse of the brightness code; the ideal appraisal of an image.
pub fn decode_affect(img: &Tensor) -> (f64, f64) {
    let shape = img.shape();
    let half = shape[1] / 2 * shape[2];
    let data = img.data();
    let top = data[..half].iter().sum::<f64>() / half as f64;
    let bot = data[half..2 * half].iter().sum::<f64>() / half as f64;
    let mu = 0.5 * (top + bot);
    let delta = top - bot;
    ((mu - MEAN_BASE) / MEAN_GAIN + 1.0, delta / DELTA_GAIN + 5.0)
}

// Procedural drawing on a [1, side, side] buffer.

struct Canvas {
    side: usize,
    img: Tensor,
}

impl Canvas {
    fn new(side: usize, background: f64) -> Canvas {
        Canvas { side, img: Tensor::full(&[1, side, side], background) }
    }

    fn set(&mut self, r: isize, c: isize, v: f64) {
        if r >= 0 && c >= 0 && (r as usize) < self.side && (c as usize) < self.side {
            let idx = r as usize * self.side + c as usize;
            self.img.data_mut()[idx] = v;
        }
    }

    fn fill_ellipse(&mut self, cy: f64, cx: f64, ry: f64, rx: f64, v: f64) {
        let side = self.side as isize;
        for r in 0..side {
            for c in 0..side {
                let dy = (r as f64 - cy) / ry.max(1e-9);
                let dx = (c as f64 - cx) / rx.max(1e-9);
                if dy * dy + dx * dx <= 1.0 {
                    self.set(r, c, v);
                }
            }
        }
    }

    fn line(&mut self, y0: f64, x0: f64, y1: f64, x1: f64, thickness: usize, v: f64) {
        let steps = ((y1 - y0).abs().max((x1 - x0).abs()).ceil() as usize).max(1) * 2;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let y = y0 + t * (y1 - y0);
            let x = x0 + t * (x1 - x0);
            for dy in 0..thickness {
                self.set(y.round() as isize + dy as isize, x.round() as isize, v);
            }
        }
    }
}

const INK: f64 = 0.15;
const SKIN: f64 = 0.62;

/// Schematic face for a control pose. `variant` nudges geometry so each
/// expression category has two distinguishable stimuli.
pub fn render_face(controls: &FaceControls, variant: usize, side: usize) -> Tensor {
    let s = side as f64;
    let mut cv = Canvas::new(side, 0.5);
    cv.fill_ellipse(0.5 * s, 0.5 * s, 0.46 * s, 0.42 * s, SKIN);
    let eye_dx = if variant == 0 { 0.17 } else { 0.20 };
    let eye_r = if variant == 0 { 0.065 } else { 0.075 };
    let eye_y = 0.40 * s;
    for sign in [-1.0, 1.0] {
        let ex = 0.5 * s + sign * eye_dx * s;
        // Eyelid openness scales the vertical eye radius down to a slit.
        let ry = (0.012 + 0.085 * controls.eyelid_open) * s;
        cv.fill_ellipse(eye_y, ex, ry, eye_r * s, INK);
        // Brow: knitting dips the inner end toward the nose.
        let inner = ex - sign * 0.07 * s;
        let outer = ex + sign * 0.07 * s;
        let dip = 0.10 * s * (controls.eyebrow_knit - 0.5);
        let by = 0.27 * s;
        cv.line(by + dip, inner, by - dip * 0.4, outer, 1, INK);
    }
    // Mouth: a curved band; raised corners bend it upward at the ends.
    let my = 0.70 * s;
    let hw = 0.16 * s;
    let bend = (0.5 - controls.mouth_corner) * 0.22 * s;
    let thickness = (1.0 + controls.mouth_open * 0.10 * s).round() as usize;
    let steps = (2.0 * hw) as isize;
    for i in 0..=steps {
        let xr = i as f64 / steps as f64 * 2.0 - 1.0;
        let x = 0.5 * s + xr * hw;
        let y = my + bend * (xr * xr - 0.5);
        for dy in 0..thickness {
            cv.set(y.round() as isize + dy as isize, x.round() as isize, INK);
        }
    }
    cv.img
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextureKind {
    HStripes,
    VStripes,
    DiagStripes,
    Checker,
    Dots,
    Rings,
    Coil,
    Blobs,
    Gradient,
}

pub const TEXTURE_KINDS: [TextureKind; 9] = [
    TextureKind::HStripes,
    TextureKind::VStripes,
    TextureKind::DiagStripes,
    TextureKind::Checker,
    TextureKind::Dots,
    TextureKind::Rings,
    TextureKind::Coil,
    TextureKind::Blobs,
    TextureKind::Gradient,
];

pub fn render_texture(kind: TextureKind, period: usize, phase: usize, side: usize) -> Tensor {
    let p = period.max(2);
    let mut cv = Canvas::new(side, 0.3);
    let s = side as f64;
    match kind {
        TextureKind::HStripes | TextureKind::VStripes | TextureKind::DiagStripes
        | TextureKind::Checker => {
            for r in 0..side {
                for c in 0..side {
                    let q = match kind {
                        TextureKind::HStripes => (r + phase) / p,
                        TextureKind::VStripes => (c + phase) / p,
                        TextureKind::DiagStripes => (r + c + phase) / p,
                        _ => (r + phase) / p + (c + phase) / p,
                    };
                    if q % 2 == 0 {
                        cv.set(r as isize, c as isize, 0.7);
                    }
                }
            }
        }
        TextureKind::Dots => {
            let step = (p * 2).max(4);
            for gy in (phase % step..side).step_by(step) {
                for gx in (phase % step..side).step_by(step) {
                    cv.fill_ellipse(gy as f64, gx as f64, p as f64 * 0.6, p as f64 * 0.6, 0.75);
                }
            }
        }
        TextureKind::Rings => {
            let cy = 0.5 * s;
            let cx = 0.5 * s;
            for r in 0..side {
                for c in 0..side {
                    let d = ((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2)).sqrt();
                    if ((d as usize + phase) / p) % 2 == 0 {
                        cv.set(r as isize, c as isize, 0.7);
                    }
                }
            }
        }
        TextureKind::Coil => {
            // Archimedean spiral; reads as a coiled elongated body.
            let cy = 0.5 * s;
            let cx = 0.5 * s;
            let turns = 3.0;
            let n = 600;
            for i in 0..n {
                let t = i as f64 / n as f64;
                let theta = t * turns * std::f64::consts::TAU + phase as f64 * 0.3;
                let radius = 0.04 * s + t * 0.42 * s;
                let y = cy + radius * theta.sin();
                let x = cx + radius * theta.cos();
                cv.fill_ellipse(y, x, p as f64 * 0.45, p as f64 * 0.45, 0.78);
            }
        }
        TextureKind::Blobs => {
            let spots = [(0.3, 0.28, 0.13), (0.62, 0.7, 0.17), (0.75, 0.3, 0.10), (0.28, 0.72, 0.08)];
            for (fy, fx, fr) in spots {
                let r = fr * s * (0.7 + 0.1 * (phase % 4) as f64);
                cv.fill_ellipse(fy * s, fx * s, r, r * 1.2, 0.74);
            }
        }
        TextureKind::Gradient => {
            for r in 0..side {
                for c in 0..side {
                    let t = match phase % 2 {
                        0 => c as f64 / (side - 1) as f64,
                        _ => (r + c) as f64 / (2 * side - 2) as f64,
                    };
                    cv.set(r as isize, c as isize, 0.25 + 0.5 * t);
                }
            }
        }
    }
    cv.img
}

// Canonical caregiver poses, one per expression, each with a nearby second
// pose. Both members of a pair classify to their own category.
fn caregiver_poses(expr: Expression) -> [FaceControls; 2] {
    match expr {
        Expression::Neutral => [
            FaceControls { eyelid_open: 0.7, eyebrow_knit: 0.3, mouth_open: 0.25, mouth_corner: 0.5 },
            FaceControls { eyelid_open: 0.6, eyebrow_knit: 0.4, mouth_open: 0.35, mouth_corner: 0.45 },
        ],
        Expression::Pleasure => [
            FaceControls { eyelid_open: 0.8, eyebrow_knit: 0.2, mouth_open: 0.5, mouth_corner: 0.9 },
            FaceControls { eyelid_open: 0.7, eyebrow_knit: 0.3, mouth_open: 0.65, mouth_corner: 0.8 },
        ],
        Expression::Anger => [
            FaceControls { eyelid_open: 0.95, eyebrow_knit: 0.9, mouth_open: 0.55, mouth_corner: 0.15 },
            FaceControls { eyelid_open: 0.85, eyebrow_knit: 0.8, mouth_open: 0.4, mouth_corner: 0.25 },
        ],
        Expression::Sadness => [
            FaceControls { eyelid_open: 0.35, eyebrow_knit: 0.85, mouth_open: 0.2, mouth_corner: 0.15 },
            FaceControls { eyelid_open: 0.45, eyebrow_knit: 0.75, mouth_open: 0.3, mouth_corner: 0.25 },
        ],
    }
}

fn face_affect(expr: Expression, variant: usize) -> [f64; 2] {
    let table = match expr {
        Expression::Neutral => [[5.0, 4.6], [5.4, 5.0]],
        Expression::Pleasure => [[7.6, 6.4], [8.2, 7.0]],
        Expression::Anger => [[2.2, 7.6], [2.8, 8.2]],
        Expression::Sadness => [[2.4, 2.6], [3.0, 3.2]],
    };
    table[variant]
}

// Natural stimuli: texture kind, period, phase, affect target. The coil is
// the threat-like outlier (very low valence, very high arousal).
const NATURAL_TABLE: [(TextureKind, usize, usize, [f64; 2]); 8] = [
    (TextureKind::Coil, 2, 0, [1.4, 8.4]),
    (TextureKind::Dots, 3, 1, [8.0, 7.2]),
    (TextureKind::Gradient, 4, 0, [7.0, 3.0]),
    (TextureKind::HStripes, 5, 2, [2.6, 3.4]),
    (TextureKind::Checker, 4, 0, [5.0, 8.0]),
    (TextureKind::DiagStripes, 3, 1, [3.8, 6.2]),
    (TextureKind::Rings, 4, 2, [6.6, 5.4]),
    (TextureKind::Blobs, 3, 0, [8.6, 2.2]),
];

#[derive(Debug, Clone)]
pub struct Stimulus {
    pub name: String,
    pub image: Tensor,
    pub category: usize,
    pub affect: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct StimulusSet {
    stimuli: Vec<Stimulus>,
    face_ids: [[usize; 2]; 4],
    natural_ids: Vec<usize>,
    black_id: usize,
}

impl StimulusSet {
    /// Builds the full deterministic stimulus inventory: two faces per
    /// expression (categories 0..4), each natural image as its own category,
    /// and a final all-black "eyes shut" category.
    pub fn build(cfg: &Config) -> Result<StimulusSet> {
        let side = cfg.image.side;
        if side < 16 || side % 2 != 0 {
            return Err(Error::config("image.side", "must be even and at least 16"));
        }
        let mut stimuli = Vec::new();
        let mut face_ids = [[0usize; 2]; 4];
        for expr in EXPRESSIONS {
            let poses = caregiver_poses(expr);
            for (variant, pose) in poses.iter().enumerate() {
                let mut image = render_face(pose, variant, side);
                let [v, a] = face_affect(expr, variant);
                encode_affect(&mut image, v, a)?;
                face_ids[expr.index()][variant] = stimuli.len();
                stimuli.push(Stimulus {
                    name: format!("face_{}_{}", expr.name(), variant),
                    image,
                    category: expr.index(),
                    affect: [v, a],
                });
            }
        }
        let mut natural_ids = Vec::new();
        for i in 0..cfg.env.natural_count {
            let (kind, period, phase, affect) = if i < NATURAL_TABLE.len() {
                NATURAL_TABLE[i]
            } else {
                // Past the curated set, spread affect targets with a
                // golden-ratio sequence so extra naturals stay diverse.
                let k = TEXTURE_KINDS[i % TEXTURE_KINDS.len()];
                let f = |x: f64| x - x.floor();
                let v = 1.0 + 8.0 * f(0.6180339887498949 * (i as f64 + 1.0));
                let a = 1.0 + 8.0 * f(0.3819660112501051 * (i as f64 + 1.0) * 1.7);
                (k, 2 + i % 5, i % 3, [v, a])
            };
            let mut image = render_texture(kind, period, phase, side);
            encode_affect(&mut image, affect[0], affect[1])?;
            natural_ids.push(stimuli.len());
            stimuli.push(Stimulus {
                name: format!("natural_{i}"),
                image,
                category: 4 + i,
                affect,
            });
        }
        let black_id = stimuli.len();
        stimuli.push(Stimulus {
            name: "black".to_string(),
            image: Tensor::zeros(&[1, side, side]),
            category: 4 + cfg.env.natural_count,
            affect: decode_affect(&Tensor::zeros(&[1, side, side])).into_array(),
        });
        Ok(StimulusSet { stimuli, face_ids, natural_ids, black_id })
    }

    pub fn n_categories(&self) -> usize {
        self.stimuli[self.black_id].category + 1
    }

    pub fn len(&self) -> usize {
        self.stimuli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stimuli.is_empty()
    }

    pub fn get(&self, id: usize) -> &Stimulus {
        &self.stimuli[id]
    }

    pub fn black_id(&self) -> usize {
        self.black_id
    }

    pub fn face_ids(&self, expr: Expression) -> [usize; 2] {
        self.face_ids[expr.index()]
    }

    pub fn natural_ids(&self) -> &[usize] {
        &self.natural_ids
    }

    pub fn manifest_csv(&self) -> String {
        let mut out = String::from("id,name,category,valence,arousal\n");
        for (id, s) in self.stimuli.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                id, s.name, s.category, s.affect[0], s.affect[1]
            ));
        }
        out
    }
}

trait IntoArray2 {
    fn into_array(self) -> [f64; 2];
}

impl IntoArray2 for (f64, f64) {
    fn into_array(self) -> [f64; 2] {
        [self.0, self.1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub image_id: usize,
    pub category: usize,
    pub expression: Expression,
    pub eyes_closed: bool,
    pub action_cost: f64,
}

#[derive(Debug)]
pub struct Environment {
    stimuli: StimulusSet,
    condition: Condition,
    prev_controls: FaceControls,
    eyelid_threshold: f64,
    cost_scale: f64,
}

impl Environment {
    pub fn new(stimuli: StimulusSet, cfg: &Config) -> Environment {
        Environment {
            stimuli,
            condition: cfg.run.condition,
            prev_controls: FaceControls::neutral(),
            eyelid_threshold: cfg.appraisal.eyelid_threshold,
            cost_scale: cfg.env.action_cost_scale,
        }
    }

    pub fn stimuli(&self) -> &StimulusSet {
        &self.stimuli
    }

    pub fn prev_controls(&self) -> FaceControls {
        self.prev_controls
    }

    pub fn set_prev_controls(&mut self, c: FaceControls) {
        self.prev_controls = c;
    }

    pub fn image(&self, id: usize) -> &Tensor {
        &self.stimuli.get(id).image
    }

    /// One exchange: the agent takes a pose, the caregiver answers with a
    /// stimulus. Shut eyes black out the view and no caregiver draw happens.
    pub fn step(&mut self, controls: FaceControls, rng: &mut ChaCha12Rng) -> StepOutcome {
        let controls = controls.clamped();
        let expression = classify_expression(&controls);
        let eyes_closed = controls.eyelid_open < self.eyelid_threshold;
        let prev = self.prev_controls.to_array();
        let now = controls.to_array();
        let action_cost: f64 =
            self.cost_scale * prev.iter().zip(&now).map(|(p, n)| (p - n).abs()).sum::<f64>();
        self.prev_controls = controls;
        let image_id = if eyes_closed {
            self.stimuli.black_id()
        } else {
            let show_natural =
                self.condition == Condition::FaceNatural && rng.random::<f64>() < 0.5;
            if show_natural {
                let ids = self.stimuli.natural_ids();
                ids[rng.random_range(0..ids.len())]
            } else {
                let pair = self.stimuli.face_ids(expression);
                pair[rng.random_range(0..2usize)]
            }
        };
        StepOutcome {
            image_id,
            category: self.stimuli.get(image_id).category,
            expression,
            eyes_closed,
            action_cost,
        }
    }
}

/// Labelled synthetic corpus for training the appraisal network. Half the
/// samples are schematic faces with random poses, half are textures; every
/// image is coded to a label drawn uniformly from the 1..9 affect square,
/// then perturbed with pixel noise.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub images: Vec<Tensor>,
    pub labels: Vec<[f64; 2]>,
}

impl Corpus {
    pub fn generate(n: usize, side: usize, noise: f64, rng: &mut ChaCha12Rng) -> Result<Corpus> {
        let mut images = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let v = rng.random_range(1.0..9.0);
            let a = rng.random_range(1.0..9.0);
            let mut img = if i % 2 == 0 {
                let pose = FaceControls {
                    eyelid_open: rng.random(),
                    eyebrow_knit: rng.random(),
                    mouth_open: rng.random(),
                    mouth_corner: rng.random(),
                };
                render_face(&pose, rng.random_range(0..2usize), side)
            } else {
                let kind = TEXTURE_KINDS[rng.random_range(0..TEXTURE_KINDS.len())];
                render_texture(kind, rng.random_range(2..8usize), rng.random_range(0..8usize), side)
            };
            encode_affect(&mut img, v, a)?;
            for px in img.data_mut() {
                *px += noise * crate::nn::sample_standard_normal(rng);
            }
            images.push(img);
            labels.push([v, a]);
        }
        Ok(Corpus { images, labels })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Deterministic split: every k-th sample is held out, k chosen from the
    /// fraction. Labels are i.i.d. so striding is as good as shuffling.
    pub fn split(&self, holdout_fraction: f64) -> (Vec<usize>, Vec<usize>) {
        let k = (1.0 / holdout_fraction).round().max(2.0) as usize;
        let mut train = Vec::new();
        let mut held = Vec::new();
        for i in 0..self.len() {
            if i % k == 0 {
                held.push(i);
            } else {
                train.push(i);
            }
        }
        (train, held)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::rng::derive_stream;

    #[test]
    fn expression_rules_match_hand_cases() {
        let mk = |e, b, o, c| FaceControls {
            eyelid_open: e,
            eyebrow_knit: b,
            mouth_open: o,
            mouth_corner: c,
        };
        assert_eq!(classify_expression(&mk(0.5, 0.5, 0.5, 0.9)), Expression::Pleasure);
        assert_eq!(classify_expression(&mk(0.9, 0.9, 0.5, 0.1)), Expression::Anger);
        assert_eq!(classify_expression(&mk(0.3, 0.9, 0.5, 0.1)), Expression::Sadness);
        assert_eq!(classify_expression(&mk(0.9, 0.2, 0.5, 0.1)), Expression::Neutral);
        assert_eq!(classify_expression(&mk(0.5, 0.5, 0.5, 0.5)), Expression::Neutral);
        // Boundary: eyelid exactly 0.5 with knit brows and low corners.
        assert_eq!(classify_expression(&mk(0.5, 0.9, 0.5, 0.1)), Expression::Sadness);
    }

    #[test]
    fn expression_predicates_partition_the_control_space() {
        let mut rng = derive_stream(1, "partition");
        for _ in 0..100_000 {
            let c = FaceControls {
                eyelid_open: rng.random(),
                eyebrow_knit: rng.random(),
                mouth_open: rng.random(),
                mouth_corner: rng.random(),
            };
            let p = expression_predicates(&c);
            assert_eq!(p.iter().filter(|&&b| b).count(), 1, "{c:?} -> {p:?}");
        }
    }

    #[test]
    fn affect_code_round_trips_exactly() {
        let mut rng = derive_stream(2, "affect");
        for _ in 0..50 {
            let v = rng.random_range(1.0..9.0);
            let a = rng.random_range(1.0..9.0);
            let mut img = Tensor::zeros(&[1, 16, 16]);
            for px in img.data_mut() {
                *px = rng.random_range(0.0..1.0);
            }
            encode_affect(&mut img, v, a).unwrap();
            let (dv, da) = decode_affect(&img);
            assert!((dv - v).abs() < 1e-9 && (da - a).abs() < 1e-9, "{v},{a} vs {dv},{da}");
            assert!(img.data().iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn stimuli_carry_their_affect_targets() {
        let cfg = Config::default();
        let set = StimulusSet::build(&cfg).unwrap();
        assert_eq!(set.len(), 8 + 8 + 1);
        assert_eq!(set.n_categories(), 13);
        for id in 0..set.len() - 1 {
            let s = set.get(id);
            let (dv, da) = decode_affect(&s.image);
            assert!(
                (dv - s.affect[0]).abs() < 1e-9 && (da - s.affect[1]).abs() < 1e-9,
                "{}",
                s.name
            );
        }
        // Caregiver poses classify into the expression they depict.
        for expr in EXPRESSIONS {
            for pose in caregiver_poses(expr) {
                assert_eq!(classify_expression(&pose), expr, "{expr:?}");
            }
        }
        let manifest = set.manifest_csv();
        assert_eq!(manifest.lines().count(), set.len() + 1);
    }

    #[test]
    fn caregiver_mirrors_the_expression() {
        let cfg = Config::default();
        let set = StimulusSet::build(&cfg).unwrap();
        let mut env = Environment::new(set, &cfg);
        let mut rng = derive_stream(3, "env");
        let smile = FaceControls { eyelid_open: 0.9, eyebrow_knit: 0.2, mouth_open: 0.5, mouth_corner: 0.95 };
        for _ in 0..50 {
            let out = env.step(smile, &mut rng);
            assert_eq!(out.expression, Expression::Pleasure);
            assert_eq!(out.category, Expression::Pleasure.index());
            assert!(env.stimuli().face_ids(Expression::Pleasure).contains(&out.image_id));
        }
    }

    #[test]
    fn shut_eyes_black_out_the_view() {
        let cfg = Config::default();
        let set = StimulusSet::build(&cfg).unwrap();
        let black = set.black_id();
        let mut env = Environment::new(set, &cfg);
        let mut rng = derive_stream(4, "env");
        let shut = FaceControls { eyelid_open: 0.1, eyebrow_knit: 0.9, mouth_open: 0.0, mouth_corner: 0.1 };
        let out = env.step(shut, &mut rng);
        assert!(out.eyes_closed);
        assert_eq!(out.image_id, black);
        assert!(env.image(black).data().iter().all(|&p| p == 0.0));
        // At the threshold the view stays on.
        let border = FaceControls { eyelid_open: 0.25, ..shut };
        assert!(!env.step(border, &mut rng).eyes_closed);
    }

    #[test]
    fn face_only_never_shows_naturals_and_the_coin_is_fair_otherwise() {
        let mut cfg = Config::default();
        let mut rng = derive_stream(5, "cond");
        let open_pose = FaceControls::neutral();
        let set = StimulusSet::build(&cfg).unwrap();
        let mut env = Environment::new(set, &cfg);
        for _ in 0..500 {
            let out = env.step(open_pose, &mut rng);
            assert!(out.category < 4, "natural shown in face-only condition");
        }
        cfg.run.condition = Condition::FaceNatural;
        let set = StimulusSet::build(&cfg).unwrap();
        let mut env = Environment::new(set, &cfg);
        let naturals = (0..4000)
            .filter(|_| env.step(open_pose, &mut rng).category >= 4)
            .count();
        let frac = naturals as f64 / 4000.0;
        assert!((frac - 0.5).abs() < 0.05, "natural fraction {frac}");
    }

    #[test]
    fn action_cost_is_scaled_total_control_change() {
        let cfg = Config::default();
        let set = StimulusSet::build(&cfg).unwrap();
        let mut env = Environment::new(set, &cfg);
        let mut rng = derive_stream(6, "cost");
        // From neutral (all 0.5) to this pose: |0.4|+|0.1|+|0.2|+|0.3| = 1.0.
        let pose = FaceControls { eyelid_open: 0.9, eyebrow_knit: 0.6, mouth_open: 0.3, mouth_corner: 0.8 };
        let out = env.step(pose, &mut rng);
        assert!((out.action_cost - 0.5).abs() < 1e-12);
        // Repeating the pose costs nothing.
        let out = env.step(pose, &mut rng);
        assert_eq!(out.action_cost, 0.0);
    }

    #[test]
    fn corpus_is_decodable_and_reproducible() {
        let mut rng = derive_stream(7, "corpus");
        let corpus = Corpus::generate(60, 32, 0.05, &mut rng).unwrap();
        assert_eq!(corpus.len(), 60);
        for (img, label) in corpus.images.iter().zip(&corpus.labels) {
            let (dv, da) = decode_affect(img);
            assert!((dv - label[0]).abs() < 0.25, "{dv} vs {}", label[0]);
            assert!((da - label[1]).abs() < 0.25, "{da} vs {}", label[1]);
        }
        let mut rng2 = derive_stream(7, "corpus");
        let again = Corpus::generate(60, 32, 0.05, &mut rng2).unwrap();
        for (a, b) in corpus.images.iter().zip(&again.images) {
            assert_eq!(a.data(), b.data());
        }
        let (train, held) = corpus.split(0.1);
        assert_eq!(held.len(), 6);
        assert_eq!(train.len() + held.len(), 60);
    }
}
