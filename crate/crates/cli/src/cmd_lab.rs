//! Embedding-lab subcommands: gradient verification and norm-dynamics runs.

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tokscope_core::embedding::{
    finite_diff_check, simulate_norm_dynamics, softmax_xent_grads, zipf_freqs, EmbeddingMatrix,
    HiddenSampler, SimConfig, UpdateRule,
};
use tokscope_core::Error;

use crate::manifest::ManifestBuilder;

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Number of random (V, d, E, h, target) instances to check.
    #[arg(long, default_value_t = 100)]
    pub instances: u32,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Central finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,

    /// Largest vocabulary size sampled per instance.
    #[arg(long, default_value_t = 64)]
    pub max_v: usize,

    /// Largest hidden dimension sampled per instance.
    #[arg(long, default_value_t = 32)]
    pub max_d: usize,

    /// Output report JSON.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct GradcheckReport {
    instances: u32,
    seed: u64,
    eps: f64,
    max_v: usize,
    max_d: usize,
    /// Worst |analytic − numeric| / max(|analytic|, 1e-12) over all entries.
    max_rel_err: f64,
    /// Worst |Σ_j grad_j| component; zero up to rounding by softmax
    /// normalization.
    max_row_sum_abs: f64,
}

pub fn gradcheck(args: &GradcheckArgs) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::start();
    manifest.set_seed(args.seed);
    if args.instances == 0 {
        return Err(Error::InvalidArgument("--instances must be ≥ 1".into()).into());
    }
    if args.max_v < 2 || args.max_d < 1 {
        return Err(Error::InvalidArgument(
            "--max-v must be ≥ 2 and --max-d ≥ 1".into(),
        )
        .into());
    }

    let mut max_rel_err: f64 = 0.0;
    let mut max_row_sum_abs: f64 = 0.0;
    for i in 0..args.instances {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed.wrapping_add(u64::from(i)));
        let v = rng.gen_range(2..=args.max_v);
        let d = rng.gen_range(1..=args.max_d);
        let e = EmbeddingMatrix::gaussian(v, d, 0.5, &mut rng)?;
        // Keep |h_k| well away from zero: an analytic entry p_j·h_k near the
        // finite-difference roundoff floor (~1e-11) would turn benign
        // absolute noise into a large relative error.
        let mut h: Vec<f64> = (0..d)
            .map(|_| {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                sign * rng.gen_range(0.1..=1.0)
            })
            .collect();
        let norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = rng.gen_range(0.2..=1.0) / norm;
        for x in &mut h {
            *x *= scale;
        }
        let target = rng.gen_range(0..v) as u32;

        let rel_err = finite_diff_check(&h, &e, target, args.eps)?;
        max_rel_err = max_rel_err.max(rel_err);

        let grads = softmax_xent_grads(&h, &e, target)?;
        for k in 0..d {
            let column_sum: f64 = (0..v).map(|j| grads.row(j)[k]).sum();
            max_row_sum_abs = max_row_sum_abs.max(column_sum.abs());
        }
    }

    let report = GradcheckReport {
        instances: args.instances,
        seed: args.seed,
        eps: args.eps,
        max_v: args.max_v,
        max_d: args.max_d,
        max_rel_err,
        max_row_sum_abs,
    };
    println!("max relative error: {max_rel_err:.3e}");
    let mut file = File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    serde_json::to_writer_pretty(&mut file, &report)?;
    file.write_all(b"\n")?;
    manifest.write_beside(&args.out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    /// Fresh unit-norm random direction each step.
    FixedNorm,
    /// Raw N(0, I) draw each step.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    /// Every row receives its softmax gradient.
    Full,
    /// Only the sampled target row does; the rest see pure decay.
    TargetOnly,
}

#[derive(Debug, Args)]
pub struct SimnormArgs {
    /// Simulation RNG seed (target and hidden-vector draws).
    #[arg(long)]
    pub seed: u64,

    /// Number of token rows.
    #[arg(long, default_value_t = 50)]
    pub tokens: usize,

    /// Embedding dimension.
    #[arg(long, default_value_t = 64)]
    pub dim: usize,

    #[arg(long, default_value_t = 20_000)]
    pub steps: u64,

    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,

    #[arg(long, default_value_t = 0.01)]
    pub wd: f64,

    /// Zipf exponent for the sampling frequencies.
    #[arg(long, default_value_t = 1.0, conflicts_with = "uniform")]
    pub zipf_s: f64,

    /// Sample all tokens equally often instead of Zipf.
    #[arg(long)]
    pub uniform: bool,

    #[arg(long, value_enum, default_value = "fixed-norm")]
    pub sampler: SamplerArg,

    #[arg(long, value_enum, default_value = "full")]
    pub update_rule: RuleArg,

    /// Re-normalize every row to unit norm after each step.
    #[arg(long)]
    pub constrain_norms: bool,

    /// Standard deviation of the Gaussian initial embeddings.
    #[arg(long, default_value_t = 0.01)]
    pub init_std: f64,

    /// Seed for the initial embeddings; defaults to --seed + 1.
    #[arg(long)]
    pub init_seed: Option<u64>,

    /// Write every n-th step to the trajectory (step 0 and the final step
    /// are always written).
    #[arg(long, default_value_t = 1)]
    pub record_every: u64,

    /// Output trajectory CSV of (step, token_id, norm).
    #[arg(long, value_name = "FILE")]
    pub out_trajectory: PathBuf,

    /// Output summary JSON.
    #[arg(long, value_name = "FILE")]
    pub out_summary: PathBuf,
}

#[derive(Debug, Serialize)]
struct TrajectoryRow {
    step: u64,
    token_id: usize,
    norm: f64,
}

#[derive(Debug, Serialize)]
struct SimnormSummary {
    freq_norm_spearman: f64,
    final_norms: Vec<f64>,
}

pub fn simnorm(args: &SimnormArgs) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::start();
    manifest.set_seed(args.seed);
    if args.record_every == 0 {
        return Err(Error::InvalidArgument("--record-every must be ≥ 1".into()).into());
    }

    let freqs = if args.uniform {
        vec![1.0 / args.tokens as f64; args.tokens]
    } else {
        zipf_freqs(args.tokens, args.zipf_s)?
    };
    let config = SimConfig {
        freqs,
        steps: args.steps,
        lr: args.lr,
        weight_decay: args.wd,
        hidden_sampler: match args.sampler {
            SamplerArg::FixedNorm => HiddenSampler::FixedNorm,
            SamplerArg::Gaussian => HiddenSampler::Gaussian,
        },
        update_rule: match args.update_rule {
            RuleArg::Full => UpdateRule::FullSoftmax,
            RuleArg::TargetOnly => UpdateRule::TargetRowOnly,
        },
        constrain_norms: args.constrain_norms,
        seed: args.seed,
    };
    let init_seed = args.init_seed.unwrap_or_else(|| args.seed.wrapping_add(1));
    let mut init_rng = ChaCha8Rng::seed_from_u64(init_seed);
    let e0 = EmbeddingMatrix::gaussian(args.tokens, args.dim, args.init_std, &mut init_rng)?;
    let result = simulate_norm_dynamics(&config, &e0)?;

    let mut writer = csv::Writer::from_path(&args.out_trajectory)
        .with_context(|| format!("creating {}", args.out_trajectory.display()))?;
    let last = result.norms.len() as u64 - 1;
    for (step, norms) in result.norms.iter().enumerate() {
        let step = step as u64;
        if step % args.record_every != 0 && step != last {
            continue;
        }
        for (token_id, &norm) in norms.iter().enumerate() {
            writer.serialize(TrajectoryRow { step, token_id, norm })?;
        }
    }
    writer.flush()?;

    let summary = SimnormSummary {
        freq_norm_spearman: result.freq_norm_spearman,
        final_norms: result.final_norms.clone(),
    };
    let mut file = File::create(&args.out_summary)
        .with_context(|| format!("creating {}", args.out_summary.display()))?;
    serde_json::to_writer_pretty(&mut file, &summary)?;
    file.write_all(b"\n")?;
    log::info!(
        "{} steps over {} tokens; frequency-norm Spearman {:.4}",
        args.steps,
        args.tokens,
        result.freq_norm_spearman
    );
    manifest.write_beside(&args.out_trajectory)?;
    manifest.write_beside(&args.out_summary)
}
