//! Output-embedding gradient checks and norm dynamics under weight decay.
//!
//! Three pieces: the closed-form softmax cross-entropy gradient for each
//! embedding row, a central finite-difference verifier for it, and a small
//! SGD simulation that tracks how per-row norms evolve when rows are sampled
//! as targets at different frequencies with decoupled weight decay.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kahan::KahanSum;

/// Dense V × d matrix of row embeddings, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Vec<f64>,
    v: usize,
    d: usize,
}

impl EmbeddingMatrix {
    pub fn zeros(v: usize, d: usize) -> Result<Self> {
        if v == 0 || d == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix dimensions must be positive, got {v}×{d}"
            )));
        }
        Ok(EmbeddingMatrix {
            data: vec![0.0; v * d],
            v,
            d,
        })
    }

    pub fn from_flat(v: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if v == 0 || d == 0 || data.len() != v * d {
            return Err(Error::InvalidArgument(format!(
                "expected {v}×{d} = {} entries, got {}",
                v * d,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "matrix entries must all be finite".into(),
            ));
        }
        Ok(EmbeddingMatrix { data, v, d })
    }

    /// Rows drawn i.i.d. N(0, std²), deterministic under the caller's rng.
    pub fn gaussian<R: Rng>(v: usize, d: usize, std: f64, rng: &mut R) -> Result<Self> {
        if !(std > 0.0 && std.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "std must be finite and positive, got {std}"
            )));
        }
        let mut m = Self::zeros(v, d)?;
        for x in &mut m.data {
            *x = std * rng.sample::<f64, _>(StandardNormal);
        }
        Ok(m)
    }

    #[must_use]
    pub fn v(&self) -> usize {
        self.v
    }

    #[must_use]
    pub fn d(&self) -> usize {
        self.d
    }

    #[must_use]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.d..(j + 1) * self.d]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.d..(j + 1) * self.d]
    }

    #[must_use]
    pub fn row_norm(&self, j: usize) -> f64 {
        self.row(j).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[must_use]
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.v).map(|j| self.row_norm(j)).collect()
    }

    /// Rescales every row to unit Euclidean norm, preserving direction.
    pub fn norm_constrain(&mut self) -> Result<()> {
        for j in 0..self.v {
            let norm = self.row_norm(j);
            if norm == 0.0 {
                return Err(Error::ZeroNormRow { row: j });
            }
            for x in self.row_mut(j) {
                *x /= norm;
            }
        }
        Ok(())
    }
}

fn check_hidden(h: &[f64], d: usize) -> Result<()> {
    if h.len() != d {
        return Err(Error::InvalidArgument(format!(
            "hidden vector has {} entries, matrix is {d}-dimensional",
            h.len()
        )));
    }
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "hidden vector entries must all be finite".into(),
        ));
    }
    Ok(())
}

/// Softmax probabilities of the logits E·h, max-shifted for stability.
fn softmax_probs(e: &EmbeddingMatrix, h: &[f64]) -> Vec<f64> {
    let logits: Vec<f64> = (0..e.v())
        .map(|j| e.row(j).iter().zip(h).map(|(a, b)| a * b).sum())
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|x| x / z).collect()
}

/// Cross-entropy loss −ln softmax(E·h)_target.
pub fn softmax_xent_loss(h: &[f64], e: &EmbeddingMatrix, target: u32) -> Result<f64> {
    check_hidden(h, e.d())?;
    if target as usize >= e.v() {
        return Err(Error::InvalidArgument(format!(
            "target {target} out of range for {} rows",
            e.v()
        )));
    }
    let probs = softmax_probs(e, h);
    Ok(-probs[target as usize].ln())
}

/// Gradient of the cross-entropy loss with respect to every embedding row:
/// row `target` gets (p_target − 1)·h, every other row j gets p_j·h.
pub fn softmax_xent_grads(
    h: &[f64],
    e: &EmbeddingMatrix,
    target: u32,
) -> Result<EmbeddingMatrix> {
    check_hidden(h, e.d())?;
    if target as usize >= e.v() {
        return Err(Error::InvalidArgument(format!(
            "target {target} out of range for {} rows",
            e.v()
        )));
    }
    let probs = softmax_probs(e, h);
    let mut grad = EmbeddingMatrix::zeros(e.v(), e.d())?;
    for (j, &p) in probs.iter().enumerate() {
        let coef = if j == target as usize { p - 1.0 } else { p };
        for (g, &hk) in grad.row_mut(j).iter_mut().zip(h) {
            *g = coef * hk;
        }
    }
    Ok(grad)
}

/// Central finite differences over every entry of E; returns the maximum of
/// |analytic − numeric| / max(|analytic|, 1e-12).
pub fn finite_diff_check(
    h: &[f64],
    e: &EmbeddingMatrix,
    target: u32,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be finite and positive, got {eps}"
        )));
    }
    let analytic = softmax_xent_grads(h, e, target)?;
    let mut probe = e.clone();
    let mut max_rel: f64 = 0.0;
    for j in 0..e.v() {
        for k in 0..e.d() {
            let original = probe.row(j)[k];
            probe.row_mut(j)[k] = original + eps;
            let plus = softmax_xent_loss(h, &probe, target)?;
            probe.row_mut(j)[k] = original - eps;
            let minus = softmax_xent_loss(h, &probe, target)?;
            probe.row_mut(j)[k] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.row(j)[k];
            let rel = (a - numeric).abs() / a.abs().max(1e-12);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenSampler {
    /// A fresh uniform random direction with ‖h‖ = 1 each step.
    FixedNorm,
    /// Raw N(0, I) draw each step.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// Every row receives its softmax gradient (output-embedding picture).
    FullSoftmax,
    /// Only the sampled target row receives its gradient; all other rows
    /// see pure weight decay (input-embedding picture).
    TargetRowOnly,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Relative sampling frequency per row; must sum to 1.
    pub freqs: Vec<f64>,
    /// Number of SGD steps; 0 returns the initial norms unchanged.
    pub steps: u64,
    pub lr: f64,
    pub weight_decay: f64,
    pub hidden_sampler: HiddenSampler,
    pub update_rule: UpdateRule,
    /// Project every row back to unit norm after each step.
    pub constrain_norms: bool,
    pub seed: u64,
}

impl SimConfig {
    fn validate(&self, e0: &EmbeddingMatrix) -> Result<()> {
        if self.freqs.is_empty() {
            return Err(Error::InvalidArgument("freqs must be non-empty".into()));
        }
        if self.freqs.len() != e0.v() {
            return Err(Error::InvalidArgument(format!(
                "freqs has {} entries but the matrix has {} rows",
                self.freqs.len(),
                e0.v()
            )));
        }
        if self.freqs.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::InvalidArgument(
                "freqs must be finite and non-negative".into(),
            ));
        }
        let mut sum = KahanSum::new();
        self.freqs.iter().for_each(|&f| sum.add(f));
        if (sum.value() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "freqs sum to {}, not 1",
                sum.value()
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lr must be finite and positive, got {}",
                self.lr
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight_decay must be finite and non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Norm limit beyond which the simulation is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct SimResult {
    /// `norms[k][j]` is row j's norm after k steps; index 0 holds the
    /// initial norms, so the outer length is steps + 1.
    pub norms: Vec<Vec<f64>>,
    pub final_norms: Vec<f64>,
    /// Spearman rank correlation between sampling frequency and final norm
    /// (0.0 when either side is constant, e.g. under norm constraints).
    pub freq_norm_spearman: f64,
    pub final_embeddings: EmbeddingMatrix,
}

/// Runs sampled softmax SGD with decoupled weight decay from `e0`:
/// each step draws target ∼ freqs and a hidden vector, applies
/// row ← (1 − lr·wd)·row − lr·grad_row, then optionally re-normalizes.
/// Bit-reproducible for a fixed seed.
pub fn simulate_norm_dynamics(config: &SimConfig, e0: &EmbeddingMatrix) -> Result<SimResult> {
    config.validate(e0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sampler = WeightedIndex::new(&config.freqs)
        .map_err(|e| Error::InvalidArgument(format!("freqs are not sampleable: {e}")))?;
    let mut e = e0.clone();
    let mut norms = Vec::with_capacity(config.steps as usize + 1);
    norms.push(e.row_norms());
    let decay = 1.0 - config.lr * config.weight_decay;
    let mut h = vec![0.0f64; e.d()];

    for step in 1..=config.steps {
        let target = sampler.sample(&mut rng);
        sample_hidden(&mut h, config.hidden_sampler, &mut rng);
        let probs = softmax_probs(&e, &h);
        match config.update_rule {
            UpdateRule::FullSoftmax => {
                for (j, &p) in probs.iter().enumerate() {
                    let coef = if j == target { p - 1.0 } else { p };
                    let row = e.row_mut(j);
                    for (x, &hk) in row.iter_mut().zip(&h) {
                        *x = decay * *x - config.lr * coef * hk;
                    }
                }
            }
            UpdateRule::TargetRowOnly => {
                let target_coef = probs[target] - 1.0;
                for j in 0..e.v() {
                    let row = e.row_mut(j);
                    if j == target {
                        for (x, &hk) in row.iter_mut().zip(&h) {
                            *x = decay * *x - config.lr * target_coef * hk;
                        }
                    } else {
                        for x in row.iter_mut() {
                            *x *= decay;
                        }
                    }
                }
            }
        }
        if config.constrain_norms {
            e.norm_constrain()?;
        }
        let step_norms = e.row_norms();
        if let Some(&bad) = step_norms.iter().find(|n| **n > DIVERGENCE_LIMIT) {
            log::error!("norm {bad} exceeded {DIVERGENCE_LIMIT} at step {step}");
            return Err(Error::Diverged {
                step,
                limit: DIVERGENCE_LIMIT,
            });
        }
        norms.push(step_norms);
    }

    let final_norms = norms.last().expect("at least the initial entry").clone();
    // With norms pinned to 1 the correlation is undefined up to rounding
    // noise; report the constant-vector convention (0.0) directly.
    let freq_norm_spearman = if config.constrain_norms {
        0.0
    } else {
        spearman(&config.freqs, &final_norms)?
    };
    Ok(SimResult {
        norms,
        final_norms,
        freq_norm_spearman,
        final_embeddings: e,
    })
}

fn sample_hidden<R: Rng>(h: &mut [f64], sampler: HiddenSampler, rng: &mut R) {
    loop {
        for x in h.iter_mut() {
            *x = rng.sample::<f64, _>(StandardNormal);
        }
        match sampler {
            HiddenSampler::Gaussian => return,
            HiddenSampler::FixedNorm => {
                let norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    for x in h.iter_mut() {
                        *x /= norm;
                    }
                    return;
                }
                // Astronomically unlikely zero draw: resample.
            }
        }
    }
}

/// Zipf-distributed frequencies: weight 1/i^s for rank i, normalized.
pub fn zipf_freqs(v: usize, s: f64) -> Result<Vec<f64>> {
    if v == 0 {
        return Err(Error::InvalidArgument("need at least one rank".into()));
    }
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Zipf exponent must be finite and non-negative, got {s}"
        )));
    }
    let weights: Vec<f64> = (1..=v).map(|i| (i as f64).powf(-s)).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Spearman rank correlation with tie-averaged ranks. Returns 0.0 when
/// either input is constant (rank variance zero).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two observations".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "observations must be finite".into(),
        ));
    }
    let rx = tie_averaged_ranks(x);
    let ry = tie_averaged_ranks(y);
    Ok(pearson(&rx, &ry))
}

fn tie_averaged_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share the average rank.
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let da = a - mx;
        let db = b - my;
        cov += da * db;
        vx += da * da;
        vy += db * db;
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_logit_gradient_is_symmetric() {
        let e = EmbeddingMatrix::zeros(2, 2).unwrap();
        let grad = softmax_xent_grads(&[1.0, 0.0], &e, 0).unwrap();
        assert_eq!(grad.row(0), &[-0.5, 0.0]);
        assert_eq!(grad.row(1), &[0.5, 0.0]);
    }

    #[test]
    fn every_gradient_row_lies_along_h() {
        let mut r = rng(3);
        let e = EmbeddingMatrix::gaussian(6, 4, 0.7, &mut r).unwrap();
        let h = [0.3, -1.2, 0.5, 2.0];
        let grad = softmax_xent_grads(&h, &e, 2).unwrap();
        for j in 0..6 {
            let row = grad.row(j);
            // row = c·h ⇒ cross terms vanish: row[k]·h[k'] = row[k']·h[k].
            for k in 0..4 {
                for k2 in 0..4 {
                    let diff = row[k] * h[k2] - row[k2] * h[k];
                    assert!(diff.abs() < 1e-12, "row {j}: {diff}");
                }
            }
        }
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let mut r = rng(11);
        let e = EmbeddingMatrix::gaussian(8, 5, 1.1, &mut r).unwrap();
        let h: Vec<f64> = (0..5).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let grad = softmax_xent_grads(&h, &e, 5).unwrap();
        for k in 0..5 {
            let col_sum: f64 = (0..8).map(|j| grad.row(j)[k]).sum();
            assert!(col_sum.abs() < 1e-12, "column {k} sums to {col_sum}");
        }
    }

    #[test]
    fn finite_differences_confirm_the_closed_form() {
        let e = EmbeddingMatrix::zeros(2, 2).unwrap();
        let err = finite_diff_check(&[1.0, 0.0], &e, 0, 1e-5).unwrap();
        assert!(err < 1e-9, "zero-matrix error {err}");

        let mut r = rng(5);
        let e = EmbeddingMatrix::gaussian(5, 3, 0.8, &mut r).unwrap();
        let h: Vec<f64> = (0..3).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let err = finite_diff_check(&h, &e, 4, 1e-5).unwrap();
        assert!(err < 1e-6, "random-instance error {err}");
    }

    #[test]
    fn bad_probe_inputs_are_rejected() {
        let e = EmbeddingMatrix::zeros(2, 2).unwrap();
        assert!(finite_diff_check(&[1.0, 0.0], &e, 0, 0.0).is_err());
        assert!(finite_diff_check(&[1.0, 0.0], &e, 0, -1e-5).is_err());
        assert!(softmax_xent_grads(&[1.0], &e, 0).is_err());
        assert!(softmax_xent_grads(&[1.0, f64::NAN], &e, 0).is_err());
        assert!(softmax_xent_grads(&[1.0, 0.0], &e, 2).is_err());
        assert!(EmbeddingMatrix::from_flat(2, 2, vec![0.0, 0.0, f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn norm_constrain_rescales_and_preserves_direction() {
        let mut e = EmbeddingMatrix::from_flat(1, 2, vec![3.0, 4.0]).unwrap();
        e.norm_constrain().unwrap();
        assert_eq!(e.row(0), &[0.6, 0.8]);
        let before = e.clone();
        e.norm_constrain().unwrap();
        for k in 0..2 {
            assert!((e.row(0)[k] - before.row(0)[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn norm_constrain_names_the_zero_row() {
        let mut e = EmbeddingMatrix::from_flat(3, 2, vec![1.0, 0.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        match e.norm_constrain() {
            Err(Error::ZeroNormRow { row }) => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn base_config(v: usize) -> SimConfig {
        SimConfig {
            freqs: zipf_freqs(v, 1.0).unwrap(),
            steps: 100,
            lr: 0.1,
            weight_decay: 0.01,
            hidden_sampler: HiddenSampler::FixedNorm,
            update_rule: UpdateRule::FullSoftmax,
            constrain_norms: false,
            seed: 42,
        }
    }

    #[test]
    fn zero_steps_returns_initial_norms() {
        let mut r = rng(9);
        let e0 = EmbeddingMatrix::gaussian(4, 3, 0.5, &mut r).unwrap();
        let mut cfg = base_config(4);
        cfg.steps = 0;
        let out = simulate_norm_dynamics(&cfg, &e0).unwrap();
        assert_eq!(out.norms.len(), 1);
        assert_eq!(out.final_norms, e0.row_norms());
    }

    #[test]
    fn never_sampled_rows_decay_strictly() {
        let mut r = rng(13);
        let e0 = EmbeddingMatrix::gaussian(5, 4, 1.0, &mut r).unwrap();
        let mut cfg = base_config(5);
        cfg.freqs = vec![1.0, 0.0, 0.0, 0.0, 0.0];
        cfg.update_rule = UpdateRule::TargetRowOnly;
        cfg.steps = 50;
        let out = simulate_norm_dynamics(&cfg, &e0).unwrap();
        for j in 1..5 {
            for w in out.norms.windows(2) {
                assert!(
                    w[1][j] < w[0][j],
                    "row {j} norm failed to decrease: {} → {}",
                    w[0][j],
                    w[1][j]
                );
            }
        }
    }

    #[test]
    fn simulation_is_bit_reproducible() {
        let mut r = rng(21);
        let e0 = EmbeddingMatrix::gaussian(6, 4, 0.3, &mut r).unwrap();
        let cfg = base_config(6);
        let a = simulate_norm_dynamics(&cfg, &e0).unwrap();
        let b = simulate_norm_dynamics(&cfg, &e0).unwrap();
        assert_eq!(a.final_norms, b.final_norms);
        assert_eq!(a.final_embeddings, b.final_embeddings);
        let mut cfg2 = cfg;
        cfg2.seed = 43;
        let c = simulate_norm_dynamics(&cfg2, &e0).unwrap();
        assert_ne!(a.final_norms, c.final_norms);
    }

    #[test]
    fn constrained_run_pins_all_norms_at_one() {
        let mut r = rng(33);
        let e0 = EmbeddingMatrix::gaussian(5, 3, 0.4, &mut r).unwrap();
        let mut cfg = base_config(5);
        cfg.constrain_norms = true;
        cfg.steps = 60;
        let out = simulate_norm_dynamics(&cfg, &e0).unwrap();
        for step_norms in &out.norms[1..] {
            for &n in step_norms {
                assert!((n - 1.0).abs() < 1e-12, "norm {n}");
            }
        }
        assert_eq!(out.freq_norm_spearman, 0.0);
    }

    #[test]
    fn oversized_norms_report_divergence() {
        let e0 = EmbeddingMatrix::from_flat(2, 2, vec![2e6, 0.0, 0.0, 1.0]).unwrap();
        let mut cfg = base_config(2);
        cfg.lr = 1e-9;
        cfg.weight_decay = 0.0;
        cfg.steps = 3;
        match simulate_norm_dynamics(&cfg, &e0) {
            Err(Error::Diverged { step, .. }) => assert_eq!(step, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn frequency_skew_orders_final_norms() {
        let mut r = rng(55);
        let e0 = EmbeddingMatrix::gaussian(10, 8, 0.05, &mut r).unwrap();
        let mut cfg = base_config(10);
        cfg.steps = 4000;
        let out = simulate_norm_dynamics(&cfg, &e0).unwrap();
        // Zipf rank 1 vs rank 10: an order of magnitude in sampling rate
        // must separate the equilibrium norms decisively.
        assert!(
            out.final_norms[0] > out.final_norms[9],
            "norms {:?}",
            out.final_norms
        );
        assert!(out.freq_norm_spearman > 0.5, "ρ = {}", out.freq_norm_spearman);
    }

    #[test]
    fn config_validation_catches_bad_fields() {
        let e0 = EmbeddingMatrix::zeros(3, 2).unwrap();
        let ok = SimConfig {
            freqs: vec![0.5, 0.3, 0.2],
            steps: 1,
            lr: 0.1,
            weight_decay: 0.0,
            hidden_sampler: HiddenSampler::Gaussian,
            update_rule: UpdateRule::FullSoftmax,
            constrain_norms: false,
            seed: 0,
        };
        assert!(simulate_norm_dynamics(&ok, &e0).is_ok());
        for tweak in [
            |c: &mut SimConfig| c.freqs = vec![0.5, 0.5],
            |c: &mut SimConfig| c.freqs = vec![0.5, 0.3, 0.3],
            |c: &mut SimConfig| c.freqs = vec![0.5, 0.6, -0.1],
            |c: &mut SimConfig| c.lr = 0.0,
            |c: &mut SimConfig| c.lr = f64::NAN,
            |c: &mut SimConfig| c.weight_decay = -0.01,
        ] {
            let mut bad = ok.clone();
            tweak(&mut bad);
            assert!(simulate_norm_dynamics(&bad, &e0).is_err());
        }
    }

    #[test]
    fn zipf_freqs_are_a_decreasing_distribution() {
        let f = zipf_freqs(100, 1.0).unwrap();
        let sum: f64 = f.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for w in f.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!((f[0] / f[9] - 10.0).abs() < 1e-9);
        assert!(zipf_freqs(0, 1.0).is_err());
        assert!(zipf_freqs(10, f64::NAN).is_err());
    }

    #[test]
    fn spearman_handles_monotone_reversed_and_tied_data() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&x, &[10.0, 20.0, 30.0, 40.0]).unwrap(), 1.0);
        assert_eq!(spearman(&x, &[9.0, 7.0, 5.0, 3.0]).unwrap(), -1.0);
        assert_eq!(
            spearman(&[1.0, 2.0, 2.0, 3.0], &[10.0, 20.0, 20.0, 30.0]).unwrap(),
            1.0
        );
        assert_eq!(spearman(&x, &[5.0, 5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert!(spearman(&x, &[1.0]).is_err());
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn nonlinear_monotone_data_still_scores_one() {
        let x: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert_eq!(spearman(&x, &y).unwrap(), 1.0);
    }
}
