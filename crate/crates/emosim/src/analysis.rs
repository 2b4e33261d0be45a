//! Post-hoc analysis of finished runs: learning curves, smoothness of the
//! interoception trace (mean absolute successive differences with a Welch
//! test between runs), expression frequencies, and a two-component PCA of
//! the policy's middle-layer activations with per-band scatter plots.
//!
//! Everything here is read-only over run directories.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use crate::env::{Expression, EXPRESSIONS};
use crate::error::{Error, Result};
use crate::orchestrator::{LogRecord, RunLog, ACTIVATIONS_FILE, RUNLOG_FILE};
use crate::stats::student_t_cdf;
use crate::svg::{value_range, Panel, Svg};

/// Scatter colors per expression, indexed by `Expression::index`.
pub const EXPRESSION_COLORS: [&str; 4] = ["#8a8a8a", "#e6a817", "#d2422e", "#3a6fd8"];

/// Splits `0..n` into `bands` contiguous, near-equal ranges.
pub fn band_ranges(n: usize, bands: usize) -> Vec<Range<usize>> {
    assert!(bands > 0, "at least one band");
    (0..bands).map(|b| (b * n / bands)..((b + 1) * n / bands)).collect()
}

/// Mean absolute successive difference, per component.
pub fn mad(series: &[[f64; 2]]) -> Result<[f64; 2]> {
    if series.len() < 2 {
        return Err(Error::invalid("a smoothness measure needs at least two points"));
    }
    let n = (series.len() - 1) as f64;
    let mut acc = [0.0; 2];
    for pair in series.windows(2) {
        acc[0] += (pair[1][0] - pair[0][0]).abs();
        acc[1] += (pair[1][1] - pair[0][1]).abs();
    }
    Ok([acc[0] / n, acc[1] / n])
}

fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sided Welch t-test. Returns (t, p). With zero variance on both sides
/// the statistic degenerates: equal means give (0, 1) by convention, unequal
/// means give (signed infinity, 0).
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("both samples need at least two points"));
    }
    let (ma, va) = mean_and_var(a);
    let (mb, vb) = mean_and_var(b);
    let sa = va / a.len() as f64;
    let sb = vb / b.len() as f64;
    if sa + sb == 0.0 {
        return Ok(if ma == mb {
            (0.0, 1.0)
        } else {
            ((ma - mb).signum() * f64::INFINITY, 0.0)
        });
    }
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb) * (sa + sb)
        / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let p = 2.0 * (1.0 - student_t_cdf(t.abs(), df));
    Ok((t, p.clamp(0.0, 1.0)))
}

/// Principal components of a sample, kept to the top two directions. All
/// eigenvalues are retained for variance accounting.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Orthonormal rows, at most two, fewer when the data are rank-deficient.
    pub components: Vec<Vec<f64>>,
    /// All sample-covariance eigenvalues, nonincreasing.
    pub eigenvalues: Vec<f64>,
    pub rank_deficient: bool,
}

impl PcaModel {
    pub fn explained_fraction(&self, i: usize) -> f64 {
        let total: f64 = self.eigenvalues.iter().sum();
        if total == 0.0 {
            0.0
        } else {
            self.eigenvalues[i] / total
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((ci, xi), mi)| ci * (xi - mi)).sum())
            .collect()
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors as rows), sorted by descending eigenvalue.
fn sym_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = a.len();
    let mut v = vec![vec![0.0; d]; d];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..64 {
        let mut off = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a[p][q] * a[p][q];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let eigenvectors: Vec<Vec<f64>> =
        order.iter().map(|&i| v.iter().map(|row| row[i]).collect()).collect();
    (eigenvalues, eigenvectors)
}

/// Fits a two-component PCA on row-major samples. Directions whose
/// eigenvalue is numerically zero are dropped and the model is flagged.
pub fn fit_pca(data: &[Vec<f64>]) -> Result<PcaModel> {
    if data.len() < 3 {
        return Err(Error::invalid("need at least 3 samples for a covariance"));
    }
    let d = data[0].len();
    if d < 2 {
        return Err(Error::invalid("need at least 2 dimensions"));
    }
    if data.iter().any(|x| x.len() != d) {
        return Err(Error::invalid("ragged sample matrix"));
    }
    let n = data.len() as f64;
    let mut mean = vec![0.0; d];
    for x in data {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = vec![vec![0.0; d]; d];
    for x in data {
        for i in 0..d {
            let xi = x[i] - mean[i];
            for j in i..d {
                cov[i][j] += xi * (x[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= n - 1.0;
            cov[j][i] = cov[i][j];
        }
    }
    let (eigenvalues, vectors) = sym_eigen(cov);
    let scale = eigenvalues[0].max(0.0);
    let tol = scale * 1e-12;
    let mut components = Vec::new();
    let mut rank_deficient = false;
    for (lambda, vec) in eigenvalues.iter().zip(vectors).take(2) {
        if *lambda > tol && *lambda > 0.0 {
            components.push(vec);
        } else {
            rank_deficient = true;
        }
    }
    Ok(PcaModel { mean, components, eigenvalues, rank_deficient })
}

/// Mean silhouette over 2-D points with integer labels. Singleton clusters
/// score zero. Requires at least two distinct labels.
pub fn silhouette(points: &[[f64; 2]], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() || points.len() < 2 {
        return Err(Error::invalid("need matching points and labels, at least two"));
    }
    let mut present: Vec<usize> = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::invalid("silhouette needs at least two clusters"));
    }
    let n = points.len();
    let dist = |i: usize, j: usize| {
        let dx = points[i][0] - points[j][0];
        let dy = points[i][1] - points[j][1];
        (dx * dx + dy * dy).sqrt()
    };
    let mut cluster_sizes = std::collections::HashMap::new();
    for &l in labels {
        *cluster_sizes.entry(l).or_insert(0usize) += 1;
    }
    let mut total = 0.0;
    for i in 0..n {
        if cluster_sizes[&labels[i]] == 1 {
            continue;
        }
        let mut sums = std::collections::HashMap::new();
        for j in 0..n {
            if i != j {
                *sums.entry(labels[j]).or_insert(0.0) += dist(i, j);
            }
        }
        let own = cluster_sizes[&labels[i]];
        let a = sums.get(&labels[i]).copied().unwrap_or(0.0) / (own - 1) as f64;
        let b = present
            .iter()
            .filter(|&&l| l != labels[i])
            .map(|l| sums.get(l).copied().unwrap_or(0.0) / cluster_sizes[l] as f64)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b).max(1e-300);
    }
    Ok(total / n as f64)
}

/// Normalized expression counts over a slice of log records. Sums to one.
pub fn expression_frequency(records: &[LogRecord]) -> Result<[f64; 4]> {
    if records.is_empty() {
        return Err(Error::invalid("expression frequencies need a nonempty window"));
    }
    let mut counts = [0usize; 4];
    for r in records {
        counts[r.expression.index()] += 1;
    }
    let inv = 1.0 / records.len() as f64;
    let mut out = [0.0; 4];
    for (o, c) in out.iter_mut().zip(counts) {
        *o = c as f64 * inv;
    }
    Ok(out)
}

/// The per-epoch middle-layer activations of one run, with the caregiver's
/// expression at that epoch.
pub struct ActivationDump {
    pub epochs: Vec<u64>,
    pub labels: Vec<Expression>,
    pub vectors: Vec<Vec<f64>>,
}

pub fn read_activations(path: &Path) -> Result<ActivationDump> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::invalid("empty activations file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    for required in ["epoch", "expression"] {
        if !cols.contains(&required) {
            return Err(Error::invalid(format!(
                "{}: missing column `{required}`",
                path.display()
            )));
        }
    }
    let width = cols.len() - 2;
    if width == 0 {
        return Err(Error::invalid(format!("{}: missing column `m_0`", path.display())));
    }
    let mut dump =
        ActivationDump { epochs: Vec::new(), labels: Vec::new(), vectors: Vec::new() };
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(Error::invalid(format!("{}: ragged row", path.display())));
        }
        dump.epochs.push(
            f[0].parse().map_err(|_| Error::invalid(format!("bad epoch `{}`", f[0])))?,
        );
        dump.labels.push(
            EXPRESSIONS
                .into_iter()
                .find(|e| e.name() == f[1])
                .ok_or_else(|| Error::invalid(format!("unknown expression `{}`", f[1])))?,
        );
        let v = f[2..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| Error::invalid(format!("bad value `{s}`"))))
            .collect::<Result<Vec<f64>>>()?;
        dump.vectors.push(v);
    }
    Ok(dump)
}

struct LoadedRun {
    name: String,
    log: RunLog,
}

fn run_name(dir: &Path) -> String {
    dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| {
        dir.to_string_lossy().into_owned()
    })
}

fn intero_series(log: &RunLog) -> Vec<[f64; 2]> {
    log.records.iter().map(|r| r.intero).collect()
}

fn abs_diffs(series: &[[f64; 2]], component: usize) -> Vec<f64> {
    series.windows(2).map(|p| (p[1][component] - p[0][component]).abs()).collect()
}

/// Writes the full report bundle for a set of run directories into `out`:
/// curves.svg (predictor loss, reward, expression frequency), one PCA
/// scatter per epoch band for the first run, mad.csv with Welch comparisons
/// against the first run, and freq.csv per band for every run.
pub fn emit_reports(runs: &[PathBuf], out: &Path, bands: usize) -> Result<()> {
    if runs.is_empty() {
        return Err(Error::invalid("no run directories given"));
    }
    if bands == 0 {
        return Err(Error::invalid("need at least one epoch band"));
    }
    let loaded = runs
        .iter()
        .map(|dir| {
            let log = RunLog::read(&dir.join(RUNLOG_FILE))?;
            Ok(LoadedRun { name: run_name(dir), log })
        })
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(out)?;

    emit_curves(&loaded, out)?;
    emit_mad(&loaded, out)?;
    emit_freq(&loaded, out, bands)?;
    emit_pca_bands(&runs[0], out, bands)?;
    Ok(())
}

const SERIES_COLORS: [&str; 6] =
    ["#1f6fb2", "#d2422e", "#3c9d46", "#8a5fb0", "#c0702a", "#5a5a5a"];

fn moving_average(xs: &[(f64, f64)], window: usize) -> Vec<(f64, f64)> {
    if window <= 1 || xs.len() < window {
        return xs.to_vec();
    }
    let mut out = Vec::with_capacity(xs.len() - window + 1);
    let mut acc: f64 = xs[..window].iter().map(|p| p.1).sum();
    out.push((xs[window - 1].0, acc / window as f64));
    for i in window..xs.len() {
        acc += xs[i].1 - xs[i - window].1;
        out.push((xs[i].0, acc / window as f64));
    }
    out
}

fn emit_curves(runs: &[LoadedRun], out: &Path) -> Result<()> {
    let mut svg = Svg::new(720.0, 860.0);

    let loss_series: Vec<Vec<(f64, f64)>> = runs
        .iter()
        .map(|r| {
            r.log
                .records
                .iter()
                .filter_map(|rec| rec.lstm_loss.map(|l| (rec.epoch as f64, l)))
                .collect()
        })
        .collect();
    let reward_series: Vec<Vec<(f64, f64)>> = runs
        .iter()
        .map(|r| {
            let raw: Vec<(f64, f64)> =
                r.log.records.iter().map(|rec| (rec.epoch as f64, rec.reward)).collect();
            moving_average(&raw, (raw.len() / 100).max(1))
        })
        .collect();

    let x_hi = runs.iter().map(|r| r.log.records.len() as f64).fold(1.0, f64::max);
    let loss_range = value_range(loss_series.iter().flatten().map(|p| p.1));
    let p1 = Panel::new(70.0, 40.0, 580.0, 200.0, (0.0, x_hi), loss_range);
    p1.frame(&mut svg, "predictor loss at update epochs", "epoch", "loss");
    for (i, s) in loss_series.iter().enumerate() {
        p1.polyline(&mut svg, s, SERIES_COLORS[i % SERIES_COLORS.len()], 1.2);
    }

    let reward_range = value_range(reward_series.iter().flatten().map(|p| p.1));
    let p2 = Panel::new(70.0, 320.0, 580.0, 200.0, (0.0, x_hi), reward_range);
    p2.frame(&mut svg, "reward, moving average", "epoch", "reward");
    for (i, s) in reward_series.iter().enumerate() {
        p2.polyline(&mut svg, s, SERIES_COLORS[i % SERIES_COLORS.len()], 1.2);
    }
    let entries: Vec<(&str, &str)> = runs
        .iter()
        .enumerate()
        .map(|(i, r)| (r.name.as_str(), SERIES_COLORS[i % SERIES_COLORS.len()]))
        .collect();
    p2.legend(&mut svg, &entries);

    // Expression frequency bars for the first run, split into five fixed
    // spans so drift over learning is visible at a glance.
    let first = &runs[0];
    let spans = band_ranges(first.log.records.len(), 5.min(first.log.records.len().max(1)));
    let p3 = Panel::new(70.0, 600.0, 580.0, 180.0, (0.0, spans.len() as f64), (0.0, 1.0));
    p3.frame(&mut svg, "expression frequency by learning phase (first run)", "phase", "ratio");
    for (b, span) in spans.iter().enumerate() {
        if span.is_empty() {
            continue;
        }
        let freq = expression_frequency(&first.log.records[span.clone()])?;
        for (e, f) in freq.iter().enumerate() {
            let x = b as f64 + 0.14 + 0.18 * e as f64;
            p3.vbar(&mut svg, x, 0.16, *f, EXPRESSION_COLORS[e]);
        }
    }
    let expr_entries: Vec<(&str, &str)> =
        EXPRESSIONS.iter().enumerate().map(|(i, e)| (e.name(), EXPRESSION_COLORS[i])).collect();
    p3.legend(&mut svg, &expr_entries);

    fs::write(out.join("curves.svg"), svg.finish())?;
    Ok(())
}

fn emit_mad(runs: &[LoadedRun], out: &Path) -> Result<()> {
    let mut csv = String::from(
        "run,mad_valence,mad_arousal,t_valence_vs_first,p_valence_vs_first,\
         t_arousal_vs_first,p_arousal_vs_first\n",
    );
    if runs.len() == 1 {
        eprintln!("note: only one run given, the stability comparison columns stay empty");
    }
    let first_series = intero_series(&runs[0].log);
    for (i, run) in runs.iter().enumerate() {
        let series = intero_series(&run.log);
        if series.len() < 2 {
            return Err(Error::invalid(format!("run {} is too short for MAD", run.name)));
        }
        let m = mad(&series)?;
        if i == 0 {
            csv.push_str(&format!("{},{},{},,,,\n", run.name, m[0], m[1]));
        } else {
            let (tv, pv) = welch_t_test(&abs_diffs(&series, 0), &abs_diffs(&first_series, 0))?;
            let (ta, pa) = welch_t_test(&abs_diffs(&series, 1), &abs_diffs(&first_series, 1))?;
            csv.push_str(&format!("{},{},{},{tv},{pv},{ta},{pa}\n", run.name, m[0], m[1]));
        }
    }
    fs::write(out.join("mad.csv"), csv)?;
    Ok(())
}

fn emit_freq(runs: &[LoadedRun], out: &Path, bands: usize) -> Result<()> {
    let mut csv = String::from("run,band,neutral,pleasure,anger,sadness\n");
    for run in runs {
        for (b, span) in band_ranges(run.log.records.len(), bands).into_iter().enumerate() {
            if span.is_empty() {
                continue;
            }
            let f = expression_frequency(&run.log.records[span])?;
            csv.push_str(&format!("{},{b},{},{},{},{}\n", run.name, f[0], f[1], f[2], f[3]));
        }
    }
    fs::write(out.join("freq.csv"), csv)?;
    Ok(())
}

fn emit_pca_bands(run_dir: &Path, out: &Path, bands: usize) -> Result<()> {
    let dump = read_activations(&run_dir.join(ACTIVATIONS_FILE))?;
    if dump.vectors.len() < 3 {
        return Err(Error::invalid(format!(
            "{}: too few activation rows for a PCA",
            run_dir.display()
        )));
    }
    // One model over the whole run keeps the axes comparable across bands.
    let pca = fit_pca(&dump.vectors)?;
    let projected: Vec<Vec<f64>> = dump.vectors.iter().map(|v| pca.project(v)).collect();
    let xr = value_range(projected.iter().map(|p| p[0]));
    let yr = value_range(projected.iter().filter(|p| p.len() > 1).map(|p| p[1]));
    for (b, span) in band_ranges(projected.len(), bands).into_iter().enumerate() {
        let mut svg = Svg::new(520.0, 520.0);
        let panel = Panel::new(70.0, 40.0, 400.0, 400.0, xr, yr);
        let title = format!(
            "policy middle layer, epochs {}..{} ({:.0}% + {:.0}% variance)",
            span.start,
            span.end,
            100.0 * pca.explained_fraction(0),
            100.0 * if pca.eigenvalues.len() > 1 { pca.explained_fraction(1) } else { 0.0 }
        );
        panel.frame(&mut svg, &title, "component 1", "component 2");
        for i in span {
            let p = &projected[i];
            let y = if p.len() > 1 { p[1] } else { 0.0 };
            let (cx, cy) = panel.map(p[0], y);
            svg.circle(cx, cy, 1.4, EXPRESSION_COLORS[dump.labels[i].index()]);
        }
        let entries: Vec<(&str, &str)> = EXPRESSIONS
            .iter()
            .enumerate()
            .map(|(i, e)| (e.name(), EXPRESSION_COLORS[i]))
            .collect();
        panel.legend(&mut svg, &entries);
        fs::write(out.join(format!("pca_band_{b}.svg")), svg.finish())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use rand::RngExt;

    #[test]
    fn band_ranges_cover_everything_evenly() {
        let r = band_ranges(20000, 5);
        assert_eq!(r.len(), 5);
        assert_eq!(r[0], 0..4000);
        assert_eq!(r[4], 16000..20000);
        let r = band_ranges(10, 3);
        let total: usize = r.iter().map(|x| x.len()).sum();
        assert_eq!(total, 10);
        assert!(r.iter().all(|x| x.len() >= 3));
    }

    #[test]
    fn mad_matches_hand_cases() {
        let constant = vec![[3.0, 4.0]; 10];
        assert_eq!(mad(&constant).unwrap(), [0.0, 0.0]);
        let mut alternating = Vec::new();
        for i in 0..10 {
            alternating.push(if i % 2 == 0 { [5.0, 5.0] } else { [6.0, 6.0] });
        }
        assert_eq!(mad(&alternating).unwrap(), [1.0, 1.0]);
        assert!(mad(&[[1.0, 1.0]]).is_err());
    }

    #[test]
    fn mad_of_doubled_series_differs_only_by_the_junction_term() {
        let half: Vec<[f64; 2]> =
            (0..7).map(|i| [(i as f64 * 1.3).sin() * 4.0, (i as f64 * 0.7).cos()]).collect();
        let mut doubled = half.clone();
        doubled.extend_from_slice(&half);
        let m1 = mad(&half).unwrap();
        let m2 = mad(&doubled).unwrap();
        let n = half.len() as f64;
        for c in 0..2 {
            let junction = (half[0][c] - half[half.len() - 1][c]).abs();
            let expected = (2.0 * (n - 1.0) * m1[c] + junction) / (2.0 * n - 1.0);
            assert!((m2[c] - expected).abs() < 1e-12, "component {c}");
        }
    }

    #[test]
    fn welch_matches_the_frozen_reference() {
        // scipy.stats.ttest_ind([1,2,3,4,5], [2,4,6,8,10], equal_var=False)
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 4.0, 6.0, 8.0, 10.0];
        let (t, p) = welch_t_test(&a, &b).unwrap();
        assert!((t - -1.8973665961010275).abs() < 1e-12, "t={t}");
        assert!((p - 0.10753119493062718).abs() < 1e-10, "p={p}");
    }

    #[test]
    fn welch_degenerate_cases_follow_convention() {
        let a = [2.0, 2.0, 2.0];
        let (t, p) = welch_t_test(&a, &a).unwrap();
        assert_eq!((t, p), (0.0, 1.0));
        let b = [3.0, 3.0, 3.0];
        let (t, p) = welch_t_test(&a, &b).unwrap();
        assert!(t.is_infinite() && t < 0.0);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn welch_separates_shifted_gaussians() {
        let mut rng = derive_stream(3, "welch");
        let draw = |rng: &mut rand_chacha::ChaCha12Rng, shift: f64| -> Vec<f64> {
            (0..100).map(|_| shift + crate::nn::sample_standard_normal(rng)).collect()
        };
        let a = draw(&mut rng, 0.0);
        let b = draw(&mut rng, 5.0);
        let (_, p) = welch_t_test(&a, &b).unwrap();
        assert!(p < 1e-10, "p={p}");
    }

    #[test]
    fn pca_finds_a_line_and_flags_the_missing_rank() {
        let dir = [0.2, -0.4, 0.1, 0.7, 0.5];
        let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let data: Vec<Vec<f64>> =
            (0..40).map(|i| dir.iter().map(|d| d * i as f64).collect()).collect();
        let pca = fit_pca(&data).unwrap();
        assert!(pca.rank_deficient);
        assert_eq!(pca.components.len(), 1);
        let dot: f64 =
            pca.components[0].iter().zip(&dir).map(|(c, d)| c * d / norm).sum::<f64>().abs();
        assert!((dot - 1.0).abs() < 1e-9, "alignment {dot}");
        assert!(pca.eigenvalues[1].abs() < 1e-9 * pca.eigenvalues[0]);
    }

    #[test]
    fn pca_splits_an_isotropic_cloud_evenly() {
        let mut rng = derive_stream(4, "pca-iso");
        let data: Vec<Vec<f64>> = (0..10000)
            .map(|_| {
                vec![
                    crate::nn::sample_standard_normal(&mut rng),
                    crate::nn::sample_standard_normal(&mut rng),
                ]
            })
            .collect();
        let pca = fit_pca(&data).unwrap();
        assert!(!pca.rank_deficient);
        let f0 = pca.explained_fraction(0);
        assert!((f0 - 0.5).abs() < 0.05, "fraction {f0}");
    }

    #[test]
    fn pca_projections_satisfy_the_eigen_identities() {
        let mut rng = derive_stream(5, "pca-id");
        // Anisotropic 3-D cloud with a known-ish spread per axis.
        let data: Vec<Vec<f64>> = (0..500)
            .map(|_| {
                let g = |r: &mut rand_chacha::ChaCha12Rng| crate::nn::sample_standard_normal(r);
                let (a, b, c) = (g(&mut rng), g(&mut rng), g(&mut rng));
                vec![3.0 * a + 0.5 * b, 1.5 * b + 0.2 * c, 0.4 * c + 0.1 * a]
            })
            .collect();
        let pca = fit_pca(&data).unwrap();
        let proj: Vec<Vec<f64>> = data.iter().map(|x| pca.project(x)).collect();
        let n = proj.len() as f64;
        for k in 0..2 {
            let mean = proj.iter().map(|p| p[k]).sum::<f64>() / n;
            assert!(mean.abs() < 1e-8, "projection mean {mean}");
            let var = proj.iter().map(|p| (p[k] - mean) * (p[k] - mean)).sum::<f64>() / (n - 1.0);
            let lambda = pca.eigenvalues[k];
            assert!((var - lambda).abs() <= 1e-8 * lambda.max(1.0), "{var} vs {lambda}");
        }
        // Reconstruction residual from the top-2 subspace equals the energy
        // in the dropped directions.
        let mut residual = 0.0;
        for (x, p) in data.iter().zip(&proj) {
            let mut rec: Vec<f64> = pca.mean.clone();
            for (k, comp) in pca.components.iter().enumerate() {
                for (ri, ci) in rec.iter_mut().zip(comp) {
                    *ri += p[k] * ci;
                }
            }
            residual += x.iter().zip(&rec).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        residual /= n - 1.0;
        let dropped: f64 = pca.eigenvalues[2..].iter().sum();
        assert!((residual - dropped).abs() <= 1e-8 * dropped.max(1.0), "{residual} vs {dropped}");
    }

    #[test]
    fn silhouette_ranks_separation() {
        let mut tight = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let j = (i % 5) as f64 * 0.01;
            tight.push([j, 0.0]);
            labels.push(0);
            tight.push([10.0 + j, 0.0]);
            labels.push(1);
        }
        let separated = silhouette(&tight, &labels).unwrap();
        assert!(separated > 0.9, "separated {separated}");
        // Same points, each label split evenly across the two blobs: near
        // zero or negative.
        let mixed_labels: Vec<usize> = (0..40).map(|i| (i / 2) % 2).collect();
        let mixed = silhouette(&tight, &mixed_labels).unwrap();
        assert!(mixed < separated - 0.5, "mixed {mixed}");
        assert!(silhouette(&tight, &vec![0; 40]).is_err());
    }

    #[test]
    fn frequency_counts_normalize() {
        use crate::orchestrator::LogRecord;
        let rec = |e: Expression| LogRecord {
            epoch: 0,
            category: 0,
            expression: e,
            eyes_closed: false,
            action: [0.5; 4],
            action_cost: 0.0,
            appraisal: [5.0, 5.0],
            ia: 0.0,
            intero: [5.0, 5.0],
            reward: 0.0,
            critic_loss: None,
            lstm_loss: None,
            mood: [5.0, 5.0],
        };
        let records: Vec<LogRecord> =
            vec![rec(Expression::Pleasure), rec(Expression::Pleasure), rec(Expression::Anger), rec(Expression::Neutral)];
        let f = expression_frequency(&records).unwrap();
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(f[Expression::Pleasure.index()], 0.5);
        assert_eq!(f[Expression::Sadness.index()], 0.0);
        assert!(expression_frequency(&[]).is_err());

        let mut rng = derive_stream(6, "freq");
        let uniform: Vec<LogRecord> =
            (0..10000).map(|_| rec(EXPRESSIONS[rng.random_range(0..4)])).collect();
        let f = expression_frequency(&uniform).unwrap();
        for r in f {
            assert!((r - 0.25).abs() < 0.02, "ratio {r}");
        }
    }
}
