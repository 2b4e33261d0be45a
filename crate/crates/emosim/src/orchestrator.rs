//! The interaction loop: every epoch the agent poses its face, the caregiver
//! answers with a stimulus, the stimulus is appraised innately plus any
//! learned per-category compensation, fatigue shifts the result, and the
//! composite interoception drives reward, prediction and the policy update.
//! Slower loops train the predictor every `t_lstm` epochs and move mood and
//! the compensation table every `t_l2`.
//!
//! A run owns a directory with a config snapshot, the stimulus manifest, an
//! append-only run log, per-epoch policy activations, and a checkpoint that
//! restores every piece of state bit-exactly, including RNG positions.

use std::fs;
use std::io::{BufWriter, Write as IoWrite};
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha12Rng;

use crate::appraisal::{classify_action, Fatigue};
use crate::checkpoint::Checkpoint;
use crate::config::{Config, IaMode};
use crate::ddpg::{DdpgAgent, Transition, ACTION_DIM};
use crate::env::{Environment, Expression, FaceControls, StimulusSet, EXPRESSIONS};
use crate::error::{Error, Result};
use crate::homeostasis::Mood;
use crate::memory::CompensationMemory;
use crate::predictor::{scale_affect, Prediction, Predictor};
use crate::ram::Ram;
use crate::rng::{derive_stream, restore, snapshot, RngSnapshot};
use crate::tensor::Tensor;

pub const RUNLOG_FILE: &str = "runlog.csv";
pub const ACTIVATIONS_FILE: &str = "activations.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.emck";
pub const CONFIG_FILE: &str = "config.txt";
pub const STIMULI_FILE: &str = "stimuli.csv";
pub const VERSION_FILE: &str = "version.txt";

const RUN_SCHEMA: &[u8] = b"emosim-run-v1";

/// Documented run log header. `critic_loss` stays empty until the replay
/// warm-up passes and `lstm_loss` is filled only on predictor-update epochs.
pub const RUNLOG_HEADER: &str = "epoch,category,expression,eyes_closed,action_0,action_1,\
action_2,action_3,action_cost,appraisal_v,appraisal_a,ia,intero_v,intero_a,reward,\
critic_loss,lstm_loss,mood_v,mood_a";

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub epoch: u64,
    pub category: usize,
    pub expression: Expression,
    pub eyes_closed: bool,
    pub action: [f64; ACTION_DIM],
    pub action_cost: f64,
    /// External appraisal: innate estimate plus compensation offset.
    pub appraisal: [f64; 2],
    pub ia: f64,
    /// Full interoception: appraisal with the fatigue term applied.
    pub intero: [f64; 2],
    pub reward: f64,
    pub critic_loss: Option<f64>,
    pub lstm_loss: Option<f64>,
    pub mood: [f64; 2],
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| Error::invalid(format!("bad float `{s}` in log")))
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse::<T>().map_err(|_| Error::invalid(format!("bad {what} `{s}` in log")))
}

fn expression_from_name(s: &str) -> Result<Expression> {
    EXPRESSIONS
        .into_iter()
        .find(|e| e.name() == s)
        .ok_or_else(|| Error::invalid(format!("unknown expression `{s}` in log")))
}

impl LogRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.category,
            self.expression.name(),
            self.eyes_closed as u8,
            self.action[0],
            self.action[1],
            self.action[2],
            self.action[3],
            self.action_cost,
            self.appraisal[0],
            self.appraisal[1],
            self.ia,
            self.intero[0],
            self.intero[1],
            self.reward,
            opt_field(self.critic_loss),
            opt_field(self.lstm_loss),
            self.mood[0],
            self.mood[1],
        )
    }

    pub fn parse_csv_row(line: &str) -> Result<LogRecord> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 19 {
            return Err(Error::invalid(format!("log row has {} fields, expected 19", f.len())));
        }
        Ok(LogRecord {
            epoch: parse_num(f[0], "epoch")?,
            category: parse_num(f[1], "category")?,
            expression: expression_from_name(f[2])?,
            eyes_closed: f[3] == "1",
            action: [
                parse_num(f[4], "action")?,
                parse_num(f[5], "action")?,
                parse_num(f[6], "action")?,
                parse_num(f[7], "action")?,
            ],
            action_cost: parse_num(f[8], "action_cost")?,
            appraisal: [parse_num(f[9], "appraisal")?, parse_num(f[10], "appraisal")?],
            ia: parse_num(f[11], "ia")?,
            intero: [parse_num(f[12], "intero")?, parse_num(f[13], "intero")?],
            reward: parse_num(f[14], "reward")?,
            critic_loss: parse_opt(f[15])?,
            lstm_loss: parse_opt(f[16])?,
            mood: [parse_num(f[17], "mood")?, parse_num(f[18], "mood")?],
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunLog {
    pub records: Vec<LogRecord>,
}

impl RunLog {
    pub fn read(path: &Path) -> Result<RunLog> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid(format!("{} is empty", path.display())))?;
        if header != RUNLOG_HEADER {
            let present: Vec<&str> = header.split(',').collect();
            for want in RUNLOG_HEADER.split(',') {
                if !present.contains(&want) {
                    return Err(Error::invalid(format!(
                        "{}: missing column `{want}`",
                        path.display()
                    )));
                }
            }
            return Err(Error::invalid(format!(
                "{}: unexpected column order",
                path.display()
            )));
        }
        let records = lines.map(LogRecord::parse_csv_row).collect::<Result<Vec<_>>>()?;
        Ok(RunLog { records })
    }
}

/// Block-averages a square single-channel image down to `out_side`.
fn pool_image(img: &Tensor, out_side: usize) -> Result<Vec<f64>> {
    let s = img.shape();
    if s.len() != 3 || s[0] != 1 || s[1] != s[2] {
        return Err(Error::ShapeMismatch { expected: vec![1, 0, 0], got: s.to_vec() });
    }
    let side = s[1];
    if out_side == 0 || side % out_side != 0 {
        return Err(Error::invalid("pooling target must divide the image side"));
    }
    let block = side / out_side;
    let inv = 1.0 / (block * block) as f64;
    let mut out = Vec::with_capacity(out_side * out_side);
    for oy in 0..out_side {
        for ox in 0..out_side {
            let mut acc = 0.0;
            for by in 0..block {
                let row = (oy * block + by) * side + ox * block;
                for bx in 0..block {
                    acc += img.data()[row + bx];
                }
            }
            out.push(acc * inv);
        }
    }
    Ok(out)
}

/// Policy input: pooled view, unit-scaled interoception, pooled predicted
/// view, unit-scaled predicted interoception, concatenated in that order.
fn build_state(
    img: &Tensor,
    intero: [f64; 2],
    pred: &Prediction,
    state_side: usize,
) -> Result<Vec<f64>> {
    let mut s = pool_image(img, state_side)?;
    s.push(scale_affect(intero[0]));
    s.push(scale_affect(intero[1]));
    s.extend(pool_image(&pred.image, state_side)?);
    s.push(scale_affect(pred.affect[0]));
    s.push(scale_affect(pred.affect[1]));
    Ok(s)
}

struct LogWriters {
    runlog: BufWriter<fs::File>,
    activations: BufWriter<fs::File>,
}

pub struct Runner {
    cfg: Config,
    dir: PathBuf,
    ram: Ram,
    predictor: Predictor,
    agent: DdpgAgent,
    env: Environment,
    fatigue: Fatigue,
    mood: Mood,
    memory: CompensationMemory,
    rng_env: ChaCha12Rng,
    rng_ddpg: ChaCha12Rng,
    /// Policy state carried into the next epoch.
    state: Vec<f64>,
    /// Last completed epoch; 0 right after initialization.
    epoch: u64,
    writers: Option<LogWriters>,
}

fn activations_header(width: usize) -> String {
    let mut h = String::from("epoch,expression");
    for i in 0..width {
        h.push_str(&format!(",m_{i}"));
    }
    h
}

impl Runner {
    /// Starts a fresh run in `dir`: writes the config snapshot, stimulus
    /// manifest and log headers, performs the initialization step (epoch 0),
    /// and leaves the runner ready to step to `run.epochs`.
    pub fn create(cfg: Config, dir: &Path) -> Result<Runner> {
        cfg.validate()?;
        if cfg.run.ram_checkpoint.is_empty() {
            return Err(Error::config("run.ram_checkpoint", "an appraisal checkpoint is required"));
        }
        let ck = Checkpoint::load(Path::new(&cfg.run.ram_checkpoint)).map_err(|e| {
            Error::state(format!("appraisal checkpoint {}: {e}", cfg.run.ram_checkpoint))
        })?;
        let mut ram = Ram::from_config(&cfg);
        ram.load_from(&ck, "ram")?;

        fs::create_dir_all(dir)?;
        fs::write(dir.join(CONFIG_FILE), cfg.to_text())?;
        fs::write(dir.join(VERSION_FILE), concat!(env!("CARGO_PKG_VERSION"), "\n"))?;
        let stimuli = StimulusSet::build(&cfg)?;
        fs::write(dir.join(STIMULI_FILE), stimuli.manifest_csv())?;

        let seed = cfg.run.seed;
        let mut rng_init = derive_stream(seed, "init");
        let mut predictor = Predictor::from_config(&cfg);
        predictor.init(&mut rng_init);
        let mut agent = DdpgAgent::from_config(&cfg);
        agent.init(&mut rng_init)?;

        let n_categories = stimuli.n_categories();
        let mut runner = Runner {
            env: Environment::new(stimuli, &cfg),
            memory: CompensationMemory::new(n_categories, cfg.memory.gamma),
            mood: Mood::new(cfg.homeostasis.window),
            fatigue: Fatigue::new(),
            rng_env: derive_stream(seed, "env"),
            rng_ddpg: derive_stream(seed, "ddpg"),
            state: Vec::new(),
            epoch: 0,
            writers: None,
            cfg,
            dir: dir.to_path_buf(),
            ram,
            predictor,
            agent,
        };
        runner.initial_step()?;

        let mut runlog = BufWriter::new(fs::File::create(dir.join(RUNLOG_FILE))?);
        writeln!(runlog, "{RUNLOG_HEADER}")?;
        let mut activations = BufWriter::new(fs::File::create(dir.join(ACTIVATIONS_FILE))?);
        writeln!(activations, "{}", activations_header(runner.middle_width()))?;
        runner.writers = Some(LogWriters { runlog, activations });
        Ok(runner)
    }

    /// Reopens the run in `dir` from its checkpoint and prepares the log
    /// files for appending, discarding any rows past the checkpointed epoch.
    /// `epochs_override` replaces the run's target epoch count.
    pub fn resume(dir: &Path, epochs_override: Option<u64>) -> Result<Runner> {
        let mut cfg = Config::from_file(&dir.join(CONFIG_FILE))?;
        if let Some(m) = epochs_override {
            cfg.run.epochs = m;
        }
        cfg.validate()?;
        let mut runner = Runner::load(cfg, dir)?;
        if runner.cfg.run.epochs < runner.epoch {
            return Err(Error::state(format!(
                "target epoch {} is before the checkpoint at {}",
                runner.cfg.run.epochs, runner.epoch
            )));
        }
        fs::write(dir.join(CONFIG_FILE), runner.cfg.to_text())?;
        let runlog = reopen_truncated(&dir.join(RUNLOG_FILE), runner.epoch)?;
        let activations = reopen_truncated(&dir.join(ACTIVATIONS_FILE), runner.epoch)?;
        runner.writers = Some(LogWriters { runlog, activations });
        Ok(runner)
    }

    /// Reopens the run read-only for evaluation: no files are written and
    /// the environment stream is a fresh, purpose-derived one so evaluation
    /// does not depend on where training left the training streams.
    pub fn reload_for_eval(dir: &Path) -> Result<Runner> {
        let cfg = Config::from_file(&dir.join(CONFIG_FILE))?;
        cfg.validate()?;
        let mut runner = Runner::load(cfg, dir)?;
        runner.rng_env = derive_stream(runner.cfg.run.seed, "eval-env");
        Ok(runner)
    }

    fn load(cfg: Config, dir: &Path) -> Result<Runner> {
        let ck = Checkpoint::load(&dir.join(CHECKPOINT_FILE))?;
        if ck.bytes("run.schema")? != RUN_SCHEMA {
            return Err(Error::Checkpoint("unknown run checkpoint schema".to_string()));
        }
        let mut ram = Ram::from_config(&cfg);
        ram.load_from(&ck, "ram")?;
        let mut predictor = Predictor::from_config(&cfg);
        predictor.load_from(&ck, "predictor")?;
        let mut agent = DdpgAgent::from_config(&cfg);
        agent.load_from(&ck, "ddpg")?;

        let stimuli = StimulusSet::build(&cfg)?;
        let n_categories = stimuli.n_categories();
        let mut env = Environment::new(stimuli, &cfg);
        let (_, prev) = ck.f64s("env.prev_controls")?;
        if prev.len() != ACTION_DIM {
            return Err(Error::Checkpoint("previous controls block size mismatch".to_string()));
        }
        env.set_prev_controls(FaceControls::from_array([prev[0], prev[1], prev[2], prev[3]]));

        let mut fatigue = Fatigue::new();
        let (_, acc) = ck.f64s("fatigue.acc")?;
        if acc.len() != 4 {
            return Err(Error::Checkpoint("fatigue block size mismatch".to_string()));
        }
        fatigue.set_accumulators([acc[0], acc[1], acc[2], acc[3]]);

        let mut mood = Mood::new(cfg.homeostasis.window);
        let (_, cur) = ck.f64s("mood.current")?;
        if cur.len() != 2 {
            return Err(Error::Checkpoint("mood block size mismatch".to_string()));
        }
        mood.set_current([cur[0], cur[1]]);
        let (dims, recent) = ck.f64s("mood.recent")?;
        if dims.len() != 2 || dims[1] != 2 {
            return Err(Error::Checkpoint("mood window block shape mismatch".to_string()));
        }
        for pair in recent.chunks_exact(2) {
            mood.push_recent([pair[0], pair[1]]);
        }

        let mut memory = CompensationMemory::new(n_categories, cfg.memory.gamma);
        let (_, table) = ck.f64s("memory.table")?;
        let (_, recs) = ck.f64s("memory.records")?;
        memory.import(table, recs)?;

        let rng_env = restore(&RngSnapshot::from_block(ck.bytes("rng.env")?)?);
        let rng_ddpg = restore(&RngSnapshot::from_block(ck.bytes("rng.ddpg")?)?);

        let epoch_block = ck.u64s("run.epoch")?;
        if epoch_block.len() != 1 {
            return Err(Error::Checkpoint("`run.epoch` must hold one value".to_string()));
        }
        let (_, state) = ck.f64s("run.state")?;
        if state.len() != agent.state_dim() {
            return Err(Error::Checkpoint("carried state length mismatch".to_string()));
        }

        Ok(Runner {
            state: state.to_vec(),
            epoch: epoch_block[0],
            writers: None,
            cfg,
            dir: dir.to_path_buf(),
            ram,
            predictor,
            agent,
            env,
            fatigue,
            mood,
            memory,
            rng_env,
            rng_ddpg,
        })
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn target_epochs(&self) -> u64 {
        self.cfg.run.epochs
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn memory(&self) -> &CompensationMemory {
        &self.memory
    }

    pub fn mood(&self) -> &Mood {
        &self.mood
    }

    fn middle_width(&self) -> usize {
        let h = &self.cfg.ddpg.actor_hidden;
        h[h.len() / 2]
    }

    /// Innate appraisal of a stimulus. The attention path is read out along
    /// its mean locations so a given image always appraises identically;
    /// location sampling is a training-time device.
    fn appraise_innate(&self, img: &Tensor) -> [f64; 2] {
        let eps = vec![0.0; self.ram.noise_len()];
        self.ram.forward_trace(img, &eps).estimate
    }

    fn compose_intero(&self, category: usize, innate: [f64; 2]) -> ([f64; 2], f64, [f64; 2]) {
        let mut appraisal = innate;
        if self.cfg.run.with_second_layer {
            let off = self.memory.offset(category);
            appraisal = [appraisal[0] + off[0], appraisal[1] + off[1]];
        }
        let ia = self.fatigue.internal_appraisal(self.cfg.appraisal.tau);
        let signed = match self.cfg.appraisal.ia_mode {
            IaMode::Add => ia,
            IaMode::Subtract => -ia,
        };
        let intero = [appraisal[0] + signed, appraisal[1] + signed];
        (appraisal, ia, intero)
    }

    /// Epoch 0: present an initial exchange with a neutral pose and build
    /// the first carried policy state.
    fn initial_step(&mut self) -> Result<()> {
        let outcome = self.env.step(FaceControls::neutral(), &mut self.rng_env);
        let class = classify_action(outcome.expression, outcome.eyes_closed);
        self.fatigue.update(class, outcome.action_cost, &self.cfg.appraisal);
        let img = self.env.image(outcome.image_id).clone();
        let innate = self.appraise_innate(&img);
        let (_, _, intero) = self.compose_intero(outcome.category, innate);
        self.check_finite(0, intero)?;
        self.mood.observe(intero);
        if self.cfg.run.with_second_layer {
            self.memory.record(outcome.category, intero)?;
        }
        let pred = self.predictor.observe(&img, intero)?;
        self.state = build_state(&img, intero, &pred, self.cfg.ddpg.state_side)?;
        Ok(())
    }

    fn check_finite(&self, epoch: u64, intero: [f64; 2]) -> Result<()> {
        if intero.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("interoception diverged at epoch {epoch}")))
        }
    }

    /// One full epoch: act, observe the caregiver, appraise, reward, predict,
    /// learn. Returns the log record for the epoch.
    fn step_once(&mut self) -> Result<LogRecord> {
        let e = self.epoch + 1;
        let action = self.agent.act_noisy(&self.state, &mut self.rng_ddpg)?;
        let outcome = self.env.step(FaceControls::from_array(action), &mut self.rng_env);
        let class = classify_action(outcome.expression, outcome.eyes_closed);
        self.fatigue.update(class, outcome.action_cost, &self.cfg.appraisal);

        let img = self.env.image(outcome.image_id).clone();
        let innate = self.appraise_innate(&img);
        let (appraisal, ia, intero) = self.compose_intero(outcome.category, innate);
        self.check_finite(e, intero)?;
        let mood_now = self.mood.current();
        let reward = self.mood.reward_for(intero, &self.cfg.homeostasis);

        let pred = self.predictor.observe(&img, intero)?;
        let next_state = build_state(&img, intero, &pred, self.cfg.ddpg.state_side)?;
        self.agent.record(Transition {
            state: std::mem::replace(&mut self.state, next_state.clone()),
            action,
            reward,
            next_state,
        })?;
        let report = self.agent.update(&mut self.rng_ddpg)?;

        self.mood.observe(intero);
        if self.cfg.run.with_second_layer {
            self.memory.record(outcome.category, intero)?;
        }
        let lstm_loss = if e % self.cfg.run.t_lstm == 0 {
            Some(self.predictor.train_step()?.loss)
        } else {
            None
        };
        if e % self.cfg.run.t_l2 == 0 {
            self.mood.update();
            if self.cfg.run.with_second_layer {
                self.memory.update();
            }
        }

        self.epoch = e;
        Ok(LogRecord {
            epoch: e,
            category: outcome.category,
            expression: outcome.expression,
            eyes_closed: outcome.eyes_closed,
            action,
            action_cost: outcome.action_cost,
            appraisal,
            ia,
            intero,
            reward,
            critic_loss: report.map(|r| r.critic_loss),
            lstm_loss,
            mood: mood_now,
        })
    }

    fn write_epoch(&mut self, rec: &LogRecord) -> Result<()> {
        let mid = self.agent.actor_middle_activations(&self.state)?;
        let w = self.writers.as_mut().ok_or_else(|| Error::state("run is not writable"))?;
        writeln!(w.runlog, "{}", rec.to_csv_row())?;
        let mut row = format!("{},{}", rec.epoch, rec.expression.name());
        for v in mid {
            row.push(',');
            row.push_str(&v.to_string());
        }
        writeln!(w.activations, "{row}")?;
        Ok(())
    }

    /// Steps to the configured epoch count, checkpointing on the configured
    /// cadence and always once at the end.
    pub fn run_to_completion(&mut self) -> Result<()> {
        let target = self.cfg.run.epochs;
        let every = self.cfg.run.checkpoint_every;
        while self.epoch < target {
            let rec = self.step_once()?;
            self.write_epoch(&rec)?;
            if every > 0 && self.epoch % every == 0 && self.epoch < target {
                self.flush()?;
                self.save_checkpoint()?;
            }
        }
        self.flush()?;
        self.save_checkpoint()
    }

    fn flush(&mut self) -> Result<()> {
        if let Some(w) = self.writers.as_mut() {
            w.runlog.flush()?;
            w.activations.flush()?;
        }
        Ok(())
    }

    pub fn save_checkpoint(&mut self) -> Result<()> {
        let mut ck = Checkpoint::new();
        ck.put_bytes("run.schema", RUN_SCHEMA.to_vec())?;
        ck.put_u64("run.epoch", vec![self.epoch])?;
        ck.put_f64("run.state", &[self.state.len()], self.state.clone())?;
        self.ram.save_into(&mut ck, "ram")?;
        self.predictor.save_into(&mut ck, "predictor")?;
        self.agent.save_into(&mut ck, "ddpg")?;
        ck.put_f64("env.prev_controls", &[ACTION_DIM], self.env.prev_controls().to_array().to_vec())?;
        ck.put_f64("fatigue.acc", &[4], self.fatigue.accumulators().to_vec())?;
        ck.put_f64("mood.current", &[2], self.mood.current().to_vec())?;
        let recent: Vec<f64> = self.mood.recent().flat_map(|a| a.iter().copied()).collect();
        ck.put_f64("mood.recent", &[recent.len() / 2, 2], recent)?;
        let (table, recs) = self.memory.export();
        ck.put_f64("memory.table", &[table.len() / 2, 2], table)?;
        ck.put_f64("memory.records", &[recs.len() / 3, 3], recs)?;
        ck.put_bytes("rng.env", snapshot(&self.rng_env).to_block())?;
        ck.put_bytes("rng.ddpg", snapshot(&self.rng_ddpg).to_block())?;
        ck.save(&self.dir.join(CHECKPOINT_FILE))
    }

    /// Frozen-policy rollout: exploration noise off, no parameter, mood,
    /// or table updates; fatigue and the environment keep their dynamics.
    /// Returns the interoception series.
    pub fn eval_series(&mut self, epochs: u64) -> Result<Vec<[f64; 2]>> {
        let mut out = Vec::with_capacity(epochs as usize);
        for k in 0..epochs {
            let action = self.agent.act(&self.state)?;
            let outcome = self.env.step(FaceControls::from_array(action), &mut self.rng_env);
            let class = classify_action(outcome.expression, outcome.eyes_closed);
            self.fatigue.update(class, outcome.action_cost, &self.cfg.appraisal);
            let img = self.env.image(outcome.image_id).clone();
            let innate = self.appraise_innate(&img);
            let (_, _, intero) = self.compose_intero(outcome.category, innate);
            self.check_finite(self.epoch + k + 1, intero)?;
            let pred = self.predictor.observe(&img, intero)?;
            self.state = build_state(&img, intero, &pred, self.cfg.ddpg.state_side)?;
            out.push(intero);
        }
        Ok(out)
    }
}

/// Rewrites a log file keeping only the header and rows with epoch at most
/// `keep_to`, then reopens it for appending.
fn reopen_truncated(path: &Path, keep_to: u64) -> Result<BufWriter<fs::File>> {
    let text = fs::read_to_string(path)?;
    let mut kept = String::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            kept.push_str(line);
            kept.push('\n');
            continue;
        }
        let epoch: u64 = line
            .split(',')
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::invalid(format!("{}: malformed row", path.display())))?;
        if epoch <= keep_to {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    fs::write(path, kept)?;
    Ok(BufWriter::new(fs::OpenOptions::new().append(true).open(path)?))
}
