use rand::Rng as _;

use super::{
    build_specs, discriminator_loss, generator_loss, CtesModel, DiscriminatorModel, GeneratorModel,
    LossRecord, Normalization, TrainConfig,
};
use crate::datagen::{low_pass_filter, PairedDataset};
use crate::error::{input, Error, Result};
use crate::ndnet::{init_params, optimizer_step, Batch, OptState};
use crate::rng::{self, derive_seed, Rng};

const REJECTION_ATTEMPTS: usize = 32;

/// What the trainer saw in one iteration, for monitoring and auditing.
#[derive(Debug, Clone)]
pub struct IterationRecord<'a> {
    pub iteration: usize,
    pub losses: LossRecord,
    /// Training-row indices of the matched pairs.
    pub batch: &'a [usize],
    /// Training-row indices whose characteristics were used as mismatches.
    pub mismatch: &'a [usize],
    /// Every discriminator score produced this iteration.
    pub scores: &'a [f64],
}

/// For each batch row draws the index of a row with a different
/// characteristic vector, uniformly among the eligible rows.
pub fn sample_mismatch(
    batch: &[usize],
    characteristics: &[Vec<f64>],
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    let n = characteristics.len();
    if let Some(&bad) = batch.iter().find(|&&i| i >= n) {
        return Err(input(format!("batch index {bad} outside 0..{n}")));
    }
    let first = characteristics.first().ok_or(Error::MismatchImpossible)?;
    if characteristics.iter().all(|x| x == first) {
        return Err(Error::MismatchImpossible);
    }
    let mut out = Vec::with_capacity(batch.len());
    for &i in batch {
        let own = &characteristics[i];
        let mut pick = None;
        for _ in 0..REJECTION_ATTEMPTS {
            let j = rng.random_range(0..n);
            if characteristics[j] != *own {
                pick = Some(j);
                break;
            }
        }
        let j = match pick {
            Some(j) => j,
            None => {
                let eligible: Vec<usize> = (0..n).filter(|&j| characteristics[j] != *own).collect();
                eligible[rng.random_range(0..eligible.len())]
            }
        };
        out.push(j);
    }
    Ok(out)
}

fn gather(rows: &[Vec<f64>], idx: &[usize], width: usize) -> Batch {
    let mut b = Batch::zeros(idx.len(), width);
    for (k, &i) in idx.iter().enumerate() {
        b.row_mut(k).copy_from_slice(&rows[i]);
    }
    b
}

fn moving_average_below(history: &[f64], window: usize, tol: f64) -> bool {
    if history.len() <= window {
        return false;
    }
    let tail = &history[history.len() - window - 1..];
    let mean = tail.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / window as f64;
    mean < tol
}

pub fn train_ctes(dataset: &PairedDataset, cfg: &TrainConfig) -> Result<CtesModel> {
    train_ctes_monitored(dataset, cfg, |_| {})
}

/// Trains one generator/discriminator pair, calling `monitor` after every
/// iteration. One discriminator step is followed by one generator step.
pub fn train_ctes_monitored<F>(
    dataset: &PairedDataset,
    cfg: &TrainConfig,
    mut monitor: F,
) -> Result<CtesModel>
where
    F: FnMut(&IterationRecord<'_>),
{
    cfg.validate()?;
    dataset.validate()?;
    if dataset.is_empty() {
        return Err(input("cannot train on an empty dataset"));
    }
    cfg.warn_if_weak_beta();
    let (m, n) = (dataset.char_dim(), dataset.expr_dim());
    let specs = build_specs(
        cfg.architecture,
        m,
        n,
        dataset.image_shape,
        cfg.z_dim,
        cfg.hidden,
    )?;
    let norm = Normalization::fit(&dataset.characteristics, &dataset.expressions);
    let xn: Vec<Vec<f64>> = dataset
        .characteristics
        .iter()
        .map(|x| norm.normalize_x(x))
        .collect();
    let yn: Vec<Vec<f64>> = dataset
        .expressions
        .iter()
        .map(|y| norm.normalize_y(y))
        .collect();

    let init = |specs: &[_], tag: &str| init_params(specs, derive_seed(cfg.seed, &["init", tag]));
    let mut gen = GeneratorModel {
        hidden: init(&specs.hidden, "hidden")?,
        decoder: init(&specs.decoder, "decoder")?,
        z_dim: cfg.z_dim,
        norm: norm.clone(),
        image_shape: dataset.image_shape,
    };
    let mut disc = DiscriminatorModel {
        encoder: init(&specs.encoder, "encoder")?,
        head: init(&specs.head, "head")?,
        norm,
    };
    let mut st_hidden = OptState::new(cfg.optimizer, &gen.hidden);
    let mut st_decoder = OptState::new(cfg.optimizer, &gen.decoder);
    let mut st_encoder = OptState::new(cfg.optimizer, &disc.encoder);
    let mut st_head = OptState::new(cfg.optimizer, &disc.head);

    let mut rng = rng::seeded(derive_seed(cfg.seed, &["batches"]));
    let s = cfg.batch_size.min(dataset.len());
    let beta = cfg.beta;
    let inv_s = 1.0 / s as f64;
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut d_hist = Vec::with_capacity(cfg.iterations);
    let mut g_hist = Vec::with_capacity(cfg.iterations);
    let mut converged = false;
    let mut scores = Vec::with_capacity(4 * s);

    for iteration in 0..cfg.iterations {
        let diverged = |reason: String| Error::Diverged { iteration, reason };
        let batch = rand::seq::index::sample(&mut rng, dataset.len(), s).into_vec();
        let mismatch = sample_mismatch(&batch, &dataset.characteristics, &mut rng)?;
        let xb = gather(&xn, &batch, m);
        let yb = gather(&yn, &batch, n);
        let xhat = gather(&xn, &mismatch, m);
        let mut z = Batch::zeros(s, cfg.z_dim);
        rng::fill_standard_normal(&mut rng, &mut z.data);

        // discriminator step
        let gp = gen.pass(&z, &xb)?;
        let real = disc.pass(&xb, &yb)?;
        let fake = disc.pass(&xb, gp.output())?;
        let mis = disc.pass(&xhat, &yb)?;
        let (dr, df, dm) = (real.scores(), fake.scores(), mis.scores());
        let d_loss = (0..s)
            .map(|j| discriminator_loss(dr[j], df[j], dm[j], beta))
            .sum::<f64>()
            * inv_s;
        if !d_loss.is_finite() {
            return Err(diverged(format!("discriminator loss is {d_loss}")));
        }
        let grad_of = |scores: &[f64], f: &dyn Fn(f64) -> f64| {
            Batch::new(s, 1, scores.iter().map(|&d| f(d) * inv_s).collect())
                .expect("one score per row")
        };
        let (mut g_enc, mut g_head, _) = disc.backward(&real, &grad_of(dr, &|d| -1.0 / d))?;
        for (pass, w) in [(&fake, beta), (&mis, 1.0 - beta)] {
            if w == 0.0 {
                continue;
            }
            let (ge, gh, _) = disc.backward(pass, &grad_of(pass.scores(), &|d| w / (1.0 - d)))?;
            g_enc.accumulate(&ge);
            g_head.accumulate(&gh);
        }
        scores.clear();
        scores.extend_from_slice(dr);
        scores.extend_from_slice(df);
        scores.extend_from_slice(dm);
        let fault = |e: Error| match e {
            Error::TrainingFault(reason) => Error::Diverged { iteration, reason },
            other => other,
        };
        optimizer_step(&mut disc.encoder, &g_enc, &mut st_encoder).map_err(fault)?;
        optimizer_step(&mut disc.head, &g_head, &mut st_head).map_err(fault)?;

        // generator step against the updated discriminator
        let fake = disc.pass(&xb, gp.output())?;
        let g_loss = fake
            .scores()
            .iter()
            .map(|&d| generator_loss(d))
            .sum::<f64>()
            * inv_s;
        if !g_loss.is_finite() {
            return Err(diverged(format!("generator loss is {g_loss}")));
        }
        let (_, _, dy) = disc.backward(&fake, &grad_of(fake.scores(), &|d| -1.0 / d))?;
        let (g_hidden, g_dec) = gen.backward(&gp, &dy)?;
        optimizer_step(&mut gen.hidden, &g_hidden, &mut st_hidden).map_err(fault)?;
        optimizer_step(&mut gen.decoder, &g_dec, &mut st_decoder).map_err(fault)?;
        scores.extend_from_slice(fake.scores());

        let losses = LossRecord { d_loss, g_loss };
        trace.push(losses);
        monitor(&IterationRecord {
            iteration,
            losses,
            batch: &batch,
            mismatch: &mismatch,
            scores: &scores,
        });
        d_hist.push(d_loss);
        g_hist.push(g_loss);
        if moving_average_below(&d_hist, cfg.convergence_window, cfg.convergence_tol)
            && moving_average_below(&g_hist, cfg.convergence_window, cfg.convergence_tol)
        {
            log::debug!("losses converged after {} iterations", iteration + 1);
            converged = true;
            break;
        }
    }
    Ok(CtesModel {
        generator: gen,
        discriminator: disc,
        config: cfg.clone(),
        loss_trace: trace,
        converged,
    })
}

const SYNTH_CHUNK: usize = 256;

/// One expression per characteristic row, each from a fresh `z` and, when
/// `jitter > 0`, a perturbed copy of the characteristic.
pub fn synthesize_for(
    model: &CtesModel,
    xs: &[Vec<f64>],
    rng: &mut Rng,
    jitter: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(input("jitter must be finite and non-negative"));
    }
    let gen = &model.generator;
    let m = model.char_dim();
    if let Some(bad) = xs.iter().find(|x| x.len() != m) {
        return Err(input(format!(
            "characteristic vector has {} entries, expected {m}",
            bad.len()
        )));
    }
    let filter = match gen.image_shape {
        Some(shape) if model.config.low_pass => Some(shape),
        _ => None,
    };
    let mut out = Vec::with_capacity(xs.len());
    for chunk in xs.chunks(SYNTH_CHUNK) {
        let mut z = Batch::zeros(chunk.len(), gen.z_dim);
        let mut xb = Batch::zeros(chunk.len(), m);
        for (k, x) in chunk.iter().enumerate() {
            rng::fill_standard_normal(rng, z.row_mut(k));
            let mut xv = x.clone();
            if jitter > 0.0 {
                xv.iter_mut()
                    .for_each(|v| *v += jitter * rng::standard_normal(rng));
            }
            xb.row_mut(k).copy_from_slice(&gen.norm.normalize_x(&xv));
        }
        let pass = gen.pass(&z, &xb)?;
        for row in pass.output().rows() {
            let y = gen.norm.denormalize_y(row);
            out.push(match filter {
                Some((h, w)) => low_pass_filter(&y, h, w)?,
                None => y,
            });
        }
    }
    Ok(out)
}

/// `count` expressions for the single characteristic vector `x`.
pub fn synthesize(
    model: &CtesModel,
    x: &[f64],
    count: usize,
    rng: &mut Rng,
    jitter: f64,
) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(input("count must be at least 1"));
    }
    synthesize_for(model, &vec![x.to_vec(); count], rng, jitter)
}
