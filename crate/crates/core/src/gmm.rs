//! Gaussian mixture clustering of 2-D load-composition points.
//!
//! EM fitting with seeded restarts, membership scoring, the average
//! silhouette coefficient and silhouette-driven choice of the component
//! count.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

/// Where a clustered point came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Observed {
        transformer_id: String,
        date: chrono::NaiveDate,
    },
    ForecastTarget,
}

/// (R, C) of a transformer day after min-max scaling to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionPoint {
    pub r: f64,
    pub c: f64,
    pub provenance: Provenance,
}

impl CompositionPoint {
    pub fn xy(&self) -> Point2 {
        [self.r, self.c]
    }
}

/// Min-max scaling of raw (R, C) pairs. A constant coordinate maps to 0 and
/// out-of-range values are clamped to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositionScaler {
    pub min: Point2,
    pub max: Point2,
}

impl CompositionScaler {
    pub fn fit(raw: &[Point2]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidInput("no composition points to scale".into()));
        }
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in raw {
            for d in 0..2 {
                min[d] = min[d].min(p[d]);
                max[d] = max[d].max(p[d]);
            }
        }
        Ok(Self { min, max })
    }

    pub fn scale(&self, raw: Point2) -> Point2 {
        let mut out = [0.0; 2];
        for d in 0..2 {
            let span = self.max[d] - self.min[d];
            out[d] = if span > 0.0 {
                ((raw[d] - self.min[d]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        out
    }
}

/// Symmetric 2×2 covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cov2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Cov2 {
    pub const IDENTITY: Cov2 = Cov2 { xx: 1.0, xy: 0.0, yy: 1.0 };

    pub fn scaled_identity(s: f64) -> Self {
        Cov2 { xx: s, xy: 0.0, yy: s }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Smaller eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        let half_trace = 0.5 * (self.xx + self.yy);
        let r = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        half_trace - r
    }

    /// The nearest covariance whose eigenvalues are all at least `floor`.
    /// Among such matrices it is also the one maximizing the Gaussian
    /// likelihood of data with scatter `self`.
    pub fn with_eigenvalue_floor(&self, floor: f64) -> Self {
        let lo = self.min_eigenvalue();
        if lo >= floor {
            return *self;
        }
        let half_trace = 0.5 * (self.xx + self.yy);
        let hi = (2.0 * half_trace - lo).max(floor);
        // unit eigenvector of the larger eigenvalue
        let (vx, vy) = if self.xy.abs() > 0.0 {
            let (x, y) = (self.xy, hi - self.xx);
            let norm = x.hypot(y);
            (x / norm, y / norm)
        } else if self.xx >= self.yy {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        // floor·I + (hi − floor)·v vᵀ
        let extra = hi - floor;
        Cov2 {
            xx: floor + extra * vx * vx,
            xy: extra * vx * vy,
            yy: floor + extra * vy * vy,
        }
    }

    /// Squared Mahalanobis distance of `d` under this covariance.
    fn mahalanobis2(&self, d: Point2, det: f64) -> f64 {
        (self.yy * d[0] * d[0] - 2.0 * self.xy * d[0] * d[1] + self.xx * d[1] * d[1]) / det
    }

    fn log_pdf(&self, x: Point2, mean: Point2) -> Result<f64> {
        let det = self.det();
        if !(det > 0.0) || !(self.xx > 0.0) || !det.is_finite() {
            return Err(Error::SingularCovariance(det));
        }
        let d = [x[0] - mean[0], x[1] - mean[1]];
        Ok(-(2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * self.mahalanobis2(d, det))
    }
}

/// Bivariate normal density.
pub fn gaussian_pdf(x: Point2, mean: Point2, cov: &Cov2) -> Result<f64> {
    cov.log_pdf(x, mean).map(f64::exp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub mean: Point2,
    pub covariance: Cov2,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub components: Vec<GmmComponent>,
    pub log_likelihood: f64,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
}

impl GmmModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }
}

/// Posterior component probabilities for one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub probabilities: Vec<f64>,
}

impl Membership {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, p) in self.probabilities.iter().enumerate() {
            if *p > self.probabilities[best] {
                best = k;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.probabilities[self.argmax()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmOptions {
    pub n_init: usize,
    pub max_iter: usize,
    /// Absolute log-likelihood change that ends EM.
    pub tol: f64,
    /// Lower bound on covariance eigenvalues after every M-step.
    pub reg_covar: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            n_init: 5,
            max_iter: 500,
            tol: 1e-6,
            reg_covar: 1e-6,
        }
    }
}

/// Seed for one restart of one component count.
fn restart_seed(seed: u64, k: usize, restart: usize) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed
        ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (restart as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn distinct_points(points: &[Point2]) -> Vec<Point2> {
    let mut v: Vec<Point2> = points.to_vec();
    v.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    v.dedup();
    v
}

/// Log of w_k · N_k(x) for every component.
fn weighted_log_densities(components: &[GmmComponent], x: Point2, out: &mut [f64]) -> Result<()> {
    for (slot, c) in out.iter_mut().zip(components) {
        *slot = c.weight.ln() + c.covariance.log_pdf(x, c.mean)?;
    }
    Ok(())
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Log-likelihood trace of a single EM run.
#[derive(Debug, Clone, PartialEq)]
pub struct EmRun {
    pub model: GmmModel,
    pub log_likelihoods: Vec<f64>,
}

/// One EM run from a seeded initialization.
pub fn run_em(points: &[Point2], k: usize, seed: u64, opts: &GmmOptions) -> Result<EmRun> {
    let n = points.len();
    if k == 0 || n < k {
        return Err(Error::TooFewPoints { k, points: n });
    }
    let distinct = distinct_points(points);
    if distinct.len() < k {
        return Err(Error::DegenerateFit(format!(
            "{} distinct points cannot seed {k} components",
            distinct.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = mean_of(points);
    let spread = {
        let mut s = 0.0;
        for p in points {
            s += (p[0] - mean[0]).powi(2) + (p[1] - mean[1]).powi(2);
        }
        (s / (2.0 * n as f64)).max(opts.reg_covar)
    };
    let mut components: Vec<GmmComponent> = sample(&mut rng, distinct.len(), k)
        .into_iter()
        .map(|i| GmmComponent {
            mean: distinct[i],
            covariance: Cov2::scaled_identity(spread),
            weight: 1.0 / k as f64,
        })
        .collect();

    let mut resp = vec![0.0; n * k];
    let mut scratch = vec![0.0; k];
    let mut lls = Vec::new();
    let mut converged = false;
    let mut prev = f64::NEG_INFINITY;
    let mut iterations = 0;

    loop {
        // E-step
        let mut ll = 0.0;
        for (i, x) in points.iter().enumerate() {
            weighted_log_densities(&components, *x, &mut scratch)?;
            let norm = log_sum_exp(&scratch);
            ll += norm;
            for j in 0..k {
                resp[i * k + j] = (scratch[j] - norm).exp();
            }
        }
        lls.push(ll);
        if (ll - prev).abs() < opts.tol {
            converged = true;
            break;
        }
        if iterations == opts.max_iter {
            break;
        }
        prev = ll;
        iterations += 1;

        // M-step
        for (j, comp) in components.iter_mut().enumerate() {
            let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            comp.weight = nk / n as f64;
            if nk <= f64::MIN_POSITIVE {
                // an abandoned component keeps its shape with zero weight
                continue;
            }
            let mut mu = [0.0; 2];
            for (i, x) in points.iter().enumerate() {
                let r = resp[i * k + j];
                mu[0] += r * x[0];
                mu[1] += r * x[1];
            }
            mu[0] /= nk;
            mu[1] /= nk;
            let mut cov = Cov2 { xx: 0.0, xy: 0.0, yy: 0.0 };
            for (i, x) in points.iter().enumerate() {
                let r = resp[i * k + j];
                let d = [x[0] - mu[0], x[1] - mu[1]];
                cov.xx += r * d[0] * d[0];
                cov.xy += r * d[0] * d[1];
                cov.yy += r * d[1] * d[1];
            }
            cov.xx /= nk;
            cov.xy /= nk;
            cov.yy /= nk;
            comp.mean = mu;
            comp.covariance = cov.with_eigenvalue_floor(opts.reg_covar);
        }
        let wsum: f64 = components.iter().map(|c| c.weight).sum();
        for c in &mut components {
            c.weight /= wsum;
        }
    }

    let model = GmmModel {
        components,
        log_likelihood: *lls.last().expect("at least one E-step"),
        seed,
        iterations,
        converged,
    };
    Ok(EmRun {
        model,
        log_likelihoods: lls,
    })
}

fn mean_of(points: &[Point2]) -> Point2 {
    let n = points.len() as f64;
    let mut m = [0.0; 2];
    for p in points {
        m[0] += p[0];
        m[1] += p[1];
    }
    [m[0] / n, m[1] / n]
}

/// Fits a `k`-component mixture, keeping the best of `opts.n_init` restarts
/// by final log-likelihood.
pub fn fit_gmm(points: &[Point2], k: usize, seed: u64, opts: &GmmOptions) -> Result<GmmModel> {
    if points.len() < k {
        return Err(Error::TooFewPoints { k, points: points.len() });
    }
    if k > 1 && distinct_points(points).len() == 1 {
        return Err(Error::DegenerateFit(format!(
            "all {} points coincide; cannot fit {k} components",
            points.len()
        )));
    }
    let mut best: Option<GmmModel> = None;
    for restart in 0..opts.n_init.max(1) {
        let run = run_em(points, k, restart_seed(seed, k, restart), opts)?;
        if best
            .as_ref()
            .map_or(true, |b| run.model.log_likelihood > b.log_likelihood)
        {
            best = Some(run.model);
        }
    }
    let mut model = best.expect("n_init >= 1");
    model.seed = seed;
    Ok(model)
}

/// Posterior membership of `x` in each component.
pub fn membership(model: &GmmModel, x: Point2) -> Membership {
    let k = model.k();
    let mut logs = vec![f64::NEG_INFINITY; k];
    if weighted_log_densities(&model.components, x, &mut logs).is_ok() {
        let norm = log_sum_exp(&logs);
        if norm.is_finite() {
            let probabilities = logs.iter().map(|l| (l - norm).exp()).collect();
            return Membership { probabilities };
        }
    }
    // every density vanished: hard-assign to the nearest mean
    let nearest = model
        .components
        .iter()
        .enumerate()
        .map(|(j, c)| (j, (x[0] - c.mean[0]).powi(2) + (x[1] - c.mean[1]).powi(2)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(j, _)| j)
        .unwrap_or(0);
    let mut probabilities = vec![0.0; k];
    probabilities[nearest] = 1.0;
    Membership { probabilities }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Silhouette coefficient of every point. Members of singleton clusters score 0.
pub fn silhouette_samples<P: AsRef<[f64]>>(points: &[P], labels: &[usize]) -> Result<Vec<f64>> {
    if points.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} points but {} labels",
            points.len(),
            labels.len()
        )));
    }
    let n_labels = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; n_labels];
    for l in labels {
        sizes[*l] += 1;
    }
    if sizes.iter().filter(|s| **s > 0).count() < 2 {
        return Err(Error::InvalidInput("silhouette needs at least 2 clusters".into()));
    }

    let mut out = Vec::with_capacity(points.len());
    let mut sums = vec![0.0; n_labels];
    for (i, p) in points.iter().enumerate() {
        let own = labels[i];
        if sizes[own] == 1 {
            out.push(0.0);
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (j, q) in points.iter().enumerate() {
            if i != j {
                sums[labels[j]] += euclid(p.as_ref(), q.as_ref());
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..n_labels)
            .filter(|l| *l != own && sizes[*l] > 0)
            .map(|l| sums[l] / sizes[l] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        out.push(if denom > 0.0 { (b - a) / denom } else { 0.0 });
    }
    Ok(out)
}

/// Mean silhouette coefficient over all points.
pub fn silhouette_avg<P: AsRef<[f64]>>(points: &[P], labels: &[usize]) -> Result<f64> {
    let q = silhouette_samples(points, labels)?;
    Ok(q.iter().sum::<f64>() / q.len() as f64)
}

/// Outcome of [`select_k`].
#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub k_star: usize,
    pub model: GmmModel,
    pub q_avg: f64,
    /// Average silhouette per tried k; `None` when the hard labels collapsed
    /// into a single cluster.
    pub scores: Vec<(usize, Option<f64>)>,
}

/// Fits every k in `k_min..=k_max` and keeps the one with the highest average
/// silhouette of its argmax labels. Ties go to the smaller k.
pub fn select_k(
    points: &[Point2],
    k_min: usize,
    k_max: usize,
    seed: u64,
    opts: &GmmOptions,
) -> Result<KSelection> {
    if k_min < 2 || k_min > k_max || k_max > points.len() {
        return Err(Error::InvalidInput(format!(
            "k range {k_min}..={k_max} invalid for {} points",
            points.len()
        )));
    }
    let mut models = Vec::new();
    let mut scores = Vec::new();
    for k in k_min..=k_max {
        let model = fit_gmm(points, k, seed, opts)?;
        let labels: Vec<usize> = points.iter().map(|p| membership(&model, *p).argmax()).collect();
        scores.push((k, silhouette_avg(points, &labels).ok()));
        models.push(model);
    }
    let (idx, q_avg) = best_score(&scores).ok_or_else(|| {
        Error::DegenerateFit(format!(
            "no k in {k_min}..={k_max} produced two or more hard clusters"
        ))
    })?;
    let k_star = scores[idx].0;
    let model = models.swap_remove(idx);
    Ok(KSelection {
        k_star,
        model,
        q_avg,
        scores,
    })
}

/// Index and value of the highest score; the earliest entry wins ties.
fn best_score(scores: &[(usize, Option<f64>)]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (_, score)) in scores.iter().enumerate() {
        if let Some(q) = score {
            if best.map_or(true, |(_, b)| *q > b) {
                best = Some((i, *q));
            }
        }
    }
    best
}

/// Text export of a selected model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelExport {
    pub k_star: usize,
    pub q_avg: f64,
    pub model: GmmModel,
}

impl ModelExport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("model file: {e}")))
    }
}
