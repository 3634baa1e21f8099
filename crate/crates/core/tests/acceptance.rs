//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p vesselforge --test acceptance`. Pass criterion
//! numbers as arguments to run a subset. Criteria listed in
//! `KNOWN_FAILURES` are still run and reported as FAIL but do not fail the
//! process unless `VESSELFORGE_ACCEPTANCE_STRICT` is set. Criterion 12 runs
//! only when `VESSELFORGE_DRIVE_ROOT` points at a DRIVE tree;
//! `VESSELFORGE_PROTOCOL_EPOCHS` shortens its training for smoke runs.

mod common;

use std::collections::VecDeque;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng as _, SeedableRng};
use vesselforge::dataset::{load_dataset, resize_to_model, synth_vessels, Checkpoint, Layout, Sample, MODEL_SIZE};
use vesselforge::image::clahe::ClaheConfig;
use vesselforge::image::{
    area_open, augment_all, clahe, postprocess, preprocess, resize_prob, AugmentRecipe, Connectivity, ImageBuffer,
    PreprocessConfig, ProbMask,
};
use vesselforge::metrics::{roc_auc_scores, Evaluation};
use vesselforge::networks::{DiscriminatorConfig, DiscriminatorParams, GeneratorConfig, GeneratorParams, GeneratorTrace};
use vesselforge::nn::{compose_rank1, Ctx, FactorizedBlock, Init};
use vesselforge::train::loss::bce_against;
use vesselforge::train::{discriminator_loss, generator_loss, no_observer, stack_samples, TrainConfig, Trainer};
use vesselforge::{Conv2dOptions, Mode, ParamStore, Rng, Tape, Tensor};

use common::grad_suite::{uniform, CASES};
use common::oracles::{max_abs_diff, naive_conv2d, random_conv_case};

const KNOWN_FAILURES: &[u32] = &[6];
const STRICT_VAR: &str = "VESSELFORGE_ACCEPTANCE_STRICT";
const DRIVE_VAR: &str = "VESSELFORGE_DRIVE_ROOT";
const EPOCHS_VAR: &str = "VESSELFORGE_PROTOCOL_EPOCHS";

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: String) -> Self {
        let status = if pass { Status::Pass } else { Status::Fail };
        Outcome { status, detail }
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    gating: bool,
    run: fn() -> Outcome,
}

const fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

const CRITERIA: [Criterion; 12] = [
    Criterion { id: 1, name: "separability oracle", budget: secs(10), gating: true, run: separability },
    Criterion { id: 2, name: "convolution oracle", budget: secs(30), gating: true, run: convolution },
    Criterion { id: 3, name: "gradient suite", budget: secs(120), gating: true, run: gradients },
    Criterion { id: 4, name: "architecture ledger", budget: secs(10), gating: true, run: architecture },
    Criterion { id: 5, name: "loss analytics", budget: None, gating: true, run: loss_analytics },
    Criterion { id: 6, name: "desk-scale learning", budget: secs(900), gating: true, run: desk_learning },
    Criterion { id: 7, name: "determinism", budget: None, gating: true, run: determinism },
    Criterion { id: 8, name: "AUC oracle", budget: None, gating: true, run: auc_oracle },
    Criterion { id: 9, name: "morphology oracle", budget: None, gating: true, run: morphology_oracle },
    Criterion { id: 10, name: "CLAHE degenerate case", budget: None, gating: true, run: clahe_degenerate },
    Criterion { id: 11, name: "FLOP accounting", budget: None, gating: true, run: flop_accounting },
    Criterion { id: 12, name: "protocol harness", budget: None, gating: false, run: protocol },
];

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let strict = std::env::var_os(STRICT_VAR).is_some();
    let mut blocking = Vec::new();
    for c in CRITERIA.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let start = Instant::now();
        let mut out = (c.run)();
        let elapsed = start.elapsed();
        if let (Some(b), Status::Pass) = (c.budget, &out.status) {
            if elapsed > b {
                out.status = Status::Fail;
                out.detail.push_str(&format!("; over the {}s budget", b.as_secs()));
            }
        }
        let known = KNOWN_FAILURES.contains(&c.id);
        let tag = match out.status {
            Status::Pass => "PASS",
            Status::Skip => "SKIP",
            Status::Fail if known => "FAIL (known)",
            Status::Fail => "FAIL",
        };
        println!(
            "criterion {:>2} {:<22} {:<12} [{:>7.1}s] {}",
            c.id,
            c.name,
            tag,
            elapsed.as_secs_f64(),
            out.detail
        );
        if matches!(out.status, Status::Fail) && c.gating && (strict || !known) {
            blocking.push(c.id);
        }
    }
    if !blocking.is_empty() {
        println!("blocking failures: {blocking:?}");
        std::process::exit(1);
    }
}

fn conv<S: vesselforge::Scalar>(x: &Tensor<S>, w: Tensor<S>, opts: Conv2dOptions) -> Tensor<S> {
    let mut tape = Tape::new();
    let (xv, wv) = (tape.constant(x.clone()), tape.constant(w));
    let y = tape.conv2d(xv, wv, None, opts).unwrap();
    tape.value(y).clone()
}

fn separable_error<S: vesselforge::Scalar>(rng: &mut Rng) -> f64 {
    let filter = |rng: &mut Rng| -> Vec<S> { (0..3).map(|_| S::of(rng.random_range(-1.0..1.0))).collect() };
    let (v, h) = (filter(rng), filter(rng));
    let sigma = S::of(rng.random_range(0.1..2.0));
    let d = [1, 2, 4][rng.random_range(0..3)];
    let (hh, ww) = (rng.random_range(3..24), rng.random_range(3..24));
    let x: Tensor<S> = uniform(&[1, 1, hh, ww], -1.0, 1.0, rng.random()).cast();
    let k = compose_rank1(&[sigma], &[v.clone()], &[h.clone()]).unwrap();
    let dense = conv(&x, k.reshape(vec![1, 1, 3, 3]).unwrap(), Conv2dOptions {
        stride: (1, 1),
        padding: (d, d),
        dilation: (d, d),
    });
    let hs: Vec<S> = h.iter().map(|&t| t * sigma).collect();
    let vert = conv(&x, Tensor::new(vec![1, 1, 3, 1], v).unwrap(), Conv2dOptions {
        stride: (1, 1),
        padding: (d, 0),
        dilation: (d, 1),
    });
    let both = conv(&vert, Tensor::new(vec![1, 1, 1, 3], hs).unwrap(), Conv2dOptions {
        stride: (1, 1),
        padding: (0, d),
        dilation: (1, d),
    });
    both.max_abs_diff(&dense)
}

fn separability() -> Outcome {
    let mut rng = Rng::seed_from_u64(1);
    let (mut e32, mut e64) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        e32 = e32.max(separable_error::<f32>(&mut rng));
        e64 = e64.max(separable_error::<f64>(&mut rng));
    }
    Outcome::check(
        e32 < 1e-5 && e64 < 1e-12,
        format!("100 kernels, max error {e32:.2e} (32-bit) / {e64:.2e} (64-bit)"),
    )
}

fn convolution() -> Outcome {
    let mut rng = Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (x, w, b, o) = random_conv_case(&mut rng);
        let mut tape = Tape::new();
        let (xv, wv, bv) = (tape.constant(x.clone()), tape.constant(w.clone()), tape.constant(b.clone()));
        let y = tape.conv2d(xv, wv, Some(bv), o).unwrap();
        worst = worst.max(max_abs_diff(tape.value(y), &naive_conv2d(&x, &w, Some(&b), o)));
    }
    Outcome::check(worst < 1e-5, format!("50 cases, max error {worst:.2e}"))
}

fn gradients() -> Outcome {
    let mut failed = Vec::new();
    let (mut checked, mut worst) = (0, 0.0f64);
    for (name, case) in CASES {
        let r = case();
        checked += r.checked;
        worst = worst.max(r.max_rel_error);
        if !r.passed(1e-6) {
            failed.push(name);
        }
    }
    let mut detail = format!("{} components, {checked} samples, max relative error {worst:.2e}", CASES.len());
    if !failed.is_empty() {
        detail.push_str(&format!("; failing: {failed:?}"));
    }
    Outcome::check(failed.is_empty(), detail)
}

fn architecture() -> Outcome {
    let mut gen = GeneratorParams::<f32>::seeded(GeneratorConfig::with_base(8), 0).unwrap();
    let wiring = gen.check_wiring().is_ok();
    let mut tape = Tape::new();
    let x = tape.constant(uniform(&[1, 1, 256, 256], -1.0, 1.0, 3).cast());
    let mut trace = GeneratorTrace::default();
    let mut rng = Rng::seed_from_u64(0);
    let y = gen.forward_traced(&mut tape, x, Mode::Eval, &mut rng, Some(&mut trace)).unwrap();
    let enc: Vec<usize> = trace.encoder.iter().map(|s| s[2]).collect();
    let dec: Vec<usize> = trace.decoder.iter().map(|s| s[2]).collect();
    let out_shape = tape.shape(y).to_vec();
    let in_range = tape.value(y).data().iter().all(|v| (-1.0..=1.0).contains(v));

    let mut disc = DiscriminatorParams::<f32>::seeded(DiscriminatorConfig { base_channels: 8 }, 0).unwrap();
    let mut tape = Tape::new();
    let x = tape.constant(uniform(&[1, 1, 256, 256], -1.0, 1.0, 4).cast());
    let m = tape.constant(uniform(&[1, 1, 256, 256], -1.0, 1.0, 5).cast());
    let d = disc.forward(&mut tape, x, m, Mode::Eval, &mut rng, false).unwrap();
    let grid = tape.shape(d).to_vec();
    let probs = tape.value(d).data().iter().all(|&p| p > 0.0 && p < 1.0);

    let pass = wiring
        && enc == [128, 64, 32, 16, 8, 4, 2, 1]
        && dec == [2, 4, 8, 16, 32, 64, 128, 256]
        && out_shape == [1, 1, 256, 256]
        && in_range
        && grid == [1, 1, 30, 30]
        && DiscriminatorConfig::default().patch_grid(256) == Some(30)
        && probs;
    Outcome::check(
        pass,
        format!("encoder {enc:?}, decoder {dec:?}, output {out_shape:?} in [-1,1]: {in_range}, patch grid {grid:?}"),
    )
}

fn loss_analytics() -> Outcome {
    let ln2 = std::f64::consts::LN_2;
    let mut tape = Tape::<f64>::new();
    let half = tape.constant(Tensor::full(vec![2, 1, 30, 30], 0.5));
    let adv = bce_against(&mut tape, true, half).unwrap();
    let dl = discriminator_loss(&mut tape, half, half).unwrap();
    let g = tape.constant(Tensor::full(vec![2, 1, 16, 16], 0.3));
    let y = tape.constant(Tensor::full(vec![2, 1, 16, 16], 0.2));
    let gl = generator_loss(&mut tape, half, g, y, 100.0).unwrap();
    let v = |var| tape.value(var).data()[0];
    let (a, d, total) = (v(adv), v(dl), v(gl.total));
    let pass = (a - ln2).abs() < 1e-9 && (d - 2.0 * ln2).abs() < 1e-9 && (total - (ln2 + 10.0)).abs() < 1e-6;
    Outcome::check(
        pass,
        format!("adversarial {a:.12}, discriminator {d:.12}, generator objective {total:.9}"),
    )
}

const DESK_SEED: u64 = 1;
const DESK_ITERATIONS: u64 = 200;

struct DeskRun {
    l1_at_10: f64,
    l1_at_end: f64,
    dice: f64,
    disc_sensitive: bool,
    checkpoint: Vec<u8>,
}

fn desk_trainer(max_iterations: u64) -> Trainer {
    let config = TrainConfig {
        batch_size: 2,
        epochs: DESK_ITERATIONS as usize,
        max_iterations: Some(max_iterations),
        seed: DESK_SEED,
        ..TrainConfig::default()
    };
    Trainer::new(GeneratorConfig::with_base(8), DiscriminatorConfig { base_channels: 8 }, config).unwrap()
}

fn desk_data() -> Vec<Sample> {
    synth_vessels(DESK_SEED, 256, 2).unwrap()
}

fn dice(pred: &[bool], gt: &[bool]) -> f64 {
    let inter = pred.iter().zip(gt).filter(|(p, g)| **p && **g).count();
    let total = pred.iter().filter(|&&p| p).count() + gt.iter().filter(|&&g| g).count();
    if total == 0 {
        1.0
    } else {
        2.0 * inter as f64 / total as f64
    }
}

fn desk_run() -> &'static DeskRun {
    static RUN: OnceLock<DeskRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let data = desk_data();
        let mut trainer = desk_trainer(DESK_ITERATIONS);
        let log = trainer.train_loop(&data, &mut no_observer).unwrap();
        let l1 = |it: u64| log.entries.iter().find(|e| e.iteration == it).map_or(f64::NAN, |e| e.l1_term);
        let (x, y) = stack_samples::<f32>(&data).unwrap();
        let out = trainer.predict(&x).unwrap();
        let pred: Vec<bool> = out.data().iter().map(|&v| v > 0.0).collect();
        let gt: Vec<bool> = y.data().iter().map(|&v| v > 0.0).collect();

        let mut tape = Tape::new();
        let mut rng = Rng::seed_from_u64(0);
        let (xv, yv, ov) = (tape.constant(x), tape.constant(y), tape.constant(out));
        let d_real = trainer.disc.forward(&mut tape, xv, yv, Mode::Eval, &mut rng, false).unwrap();
        let d_fake = trainer.disc.forward(&mut tape, xv, ov, Mode::Eval, &mut rng, false).unwrap();
        let disc_sensitive = tape.value(d_real).max_abs_diff(tape.value(d_fake)) > 0.0;

        DeskRun {
            l1_at_10: l1(10),
            l1_at_end: l1(DESK_ITERATIONS),
            dice: dice(&pred, &gt),
            disc_sensitive,
            checkpoint: trainer.to_checkpoint().to_bytes(),
        }
    })
}

fn desk_learning() -> Outcome {
    let r = desk_run();
    let ratio = r.l1_at_end / r.l1_at_10;
    Outcome::check(
        ratio <= 0.5 && r.dice >= 0.8,
        format!(
            "L1 {:.3} at 10 -> {:.3} at {DESK_ITERATIONS} (ratio {ratio:.3}, need <= 0.5); training Dice {:.3} (need >= 0.8); discriminator separates real/generated masks: {}",
            r.l1_at_10, r.l1_at_end, r.dice, r.disc_sensitive
        ),
    )
}

fn determinism() -> Outcome {
    let first = &desk_run().checkpoint;
    let data = desk_data();
    let mut again = desk_trainer(DESK_ITERATIONS);
    again.train_loop(&data, &mut no_observer).unwrap();
    let repeat = again.to_checkpoint().to_bytes() == *first;

    let mut half = desk_trainer(DESK_ITERATIONS / 2);
    half.train_loop(&data, &mut no_observer).unwrap();
    let saved = Checkpoint::from_bytes(&half.to_checkpoint().to_bytes()).unwrap();
    let mut resumed = Trainer::<f32>::from_checkpoint(&saved).unwrap();
    resumed.config.max_iterations = Some(DESK_ITERATIONS);
    resumed.train_loop(&data, &mut no_observer).unwrap();
    let split = resumed.to_checkpoint().to_bytes() == *first;
    Outcome::check(
        repeat && split,
        format!(
            "repeat run identical: {repeat}; save/resume at {} identical: {split} ({} checkpoint bytes)",
            DESK_ITERATIONS / 2,
            first.len()
        ),
    )
}

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn auc_oracle() -> Outcome {
    let mut rng = Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut cases = 0;
    while cases < 50 {
        let levels = rng.random_range(2..30) as f64;
        let p = rng.random_range(0.05..0.6);
        let scores: Vec<f64> = (0..200).map(|_| (rng.random::<f64>() * levels).floor() / levels).collect();
        let labels: Vec<bool> = (0..200).map(|_| rng.random_bool(p)).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        cases += 1;
        worst = worst.max((roc_auc_scores(&scores, &labels).unwrap() - pairwise_auc(&scores, &labels)).abs());
    }
    Outcome::check(worst < 1e-12, format!("50 tied instances, max |diff| {worst:.2e}"))
}

fn flood_fill_open(mask: &ImageBuffer, min_area: usize, eight: bool) -> ImageBuffer {
    let (w, h) = mask.dims();
    let fg = |x: usize, y: usize| mask.get(x, y, 0) != 0;
    let mut seen = vec![false; w * h];
    let mut out = mask.clone();
    for sy in 0..h {
        for sx in 0..w {
            if !fg(sx, sy) || seen[sy * w + sx] {
                continue;
            }
            let mut component = vec![(sx, sy)];
            let mut queue = VecDeque::from([(sx, sy)]);
            seen[sy * w + sx] = true;
            while let Some((x, y)) = queue.pop_front() {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if (dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0) {
                            continue;
                        }
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if fg(nx, ny) && !seen[ny * w + nx] {
                            seen[ny * w + nx] = true;
                            component.push((nx, ny));
                            queue.push_back((nx, ny));
                        }
                    }
                }
            }
            if component.len() < min_area {
                for (x, y) in component {
                    out.set(x, y, 0, 0);
                }
            }
        }
    }
    out
}

fn morphology_oracle() -> Outcome {
    let mut rng = Rng::seed_from_u64(9);
    let mut mismatches = 0;
    for _ in 0..100 {
        let density = rng.random_range(0.2..0.65);
        let mask = ImageBuffer::gray_from_fn(64, 64, |_, _| if rng.random_bool(density) { 255 } else { 0 });
        let min_area = rng.random_range(1..40);
        for (conn, eight) in [(Connectivity::Four, false), (Connectivity::Eight, true)] {
            if area_open(&mask, min_area, conn) != flood_fill_open(&mask, min_area, eight) {
                mismatches += 1;
            }
        }
    }
    Outcome::check(mismatches == 0, format!("200 comparisons, {mismatches} mismatches"))
}

fn global_equalization(img: &ImageBuffer) -> ImageBuffer {
    let mut hist = [0u64; 256];
    img.data().iter().for_each(|&v| hist[v as usize] += 1);
    let mut cdf = [0u64; 256];
    let mut acc = 0;
    for (c, h) in cdf.iter_mut().zip(hist) {
        acc += h;
        *c = acc;
    }
    let cdf_min = *cdf.iter().find(|&&c| c > 0).unwrap();
    let n = acc;
    let data = img
        .data()
        .iter()
        .map(|&v| {
            if n == cdf_min {
                v
            } else {
                ((cdf[v as usize] - cdf_min) as f64 / (n - cdf_min) as f64 * 255.0).round() as u8
            }
        })
        .collect();
    ImageBuffer::new(img.width(), img.height(), 1, data).unwrap()
}

fn clahe_degenerate() -> Outcome {
    let cfg = ClaheConfig {
        tiles: Some((1, 1)),
        clip: None,
        ..ClaheConfig::default()
    };
    let mut rng = Rng::seed_from_u64(10);
    let mut mismatches = 0;
    for _ in 0..20 {
        let (w, h) = (rng.random_range(8..90), rng.random_range(8..90));
        let lo = rng.random_range(0..200u8);
        let hi = rng.random_range(lo + 1..=255);
        let img = ImageBuffer::gray_from_fn(w, h, |_, _| rng.random_range(lo..=hi));
        if clahe(&img, &cfg).unwrap() != global_equalization(&img) {
            mismatches += 1;
        }
    }
    let flat = ImageBuffer::filled(37, 23, 1, 140);
    let fixed = clahe(&flat, &ClaheConfig::default()).unwrap() == flat && clahe(&flat, &cfg).unwrap() == flat;
    Outcome::check(
        mismatches == 0 && fixed,
        format!("20 images, {mismatches} differ from global equalization; constant image fixed: {fixed}"),
    )
}

fn flop_accounting() -> Outcome {
    let c = 16;
    let mut store = ParamStore::<f32>::new();
    let mut rng = Rng::seed_from_u64(11);
    let block = FactorizedBlock::new(&mut Init::new(&mut store, &mut rng), "fb", c, 1).unwrap();
    let x: Tensor<f32> = uniform(&[1, c, 32, 32], -1.0, 1.0, 12).cast();
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let mut ctx = Ctx::new(&mut tape, &mut store, Mode::Eval, &mut rng);
    block.forward(&mut ctx, xv).unwrap();
    let factorized = tape.macs();

    let mut tape = Tape::new();
    let xv = tape.constant(x);
    let same = Conv2dOptions {
        stride: (1, 1),
        padding: (1, 1),
        dilation: (1, 1),
    };
    let w1 = tape.constant(Tensor::zeros(vec![c, c, 3, 3]));
    let w2 = tape.constant(Tensor::zeros(vec![c, c, 3, 3]));
    let y = tape.conv2d(xv, w1, None, same).unwrap();
    tape.conv2d(y, w2, None, same).unwrap();
    let dense = tape.macs();
    Outcome::check(
        factorized > 0 && 3 * factorized <= 2 * dense,
        format!(
            "factorized {factorized} MACs vs dense {dense} (ratio {:.4}, need <= 0.6667)",
            factorized as f64 / dense as f64
        ),
    )
}

/// DRIVE test-set row as published: AUC, F1, Sen, Spe, Acc.
const PUBLISHED_DRIVE: [f64; 5] = [0.9890, 0.8003, 0.7851, 0.9834, 0.9659];

fn protocol() -> Outcome {
    let Some(root) = std::env::var_os(DRIVE_VAR) else {
        return Outcome {
            status: Status::Skip,
            detail: format!("set {DRIVE_VAR} to a converted DRIVE tree to run"),
        };
    };
    let epochs = match std::env::var(EPOCHS_VAR).map(|v| v.parse::<usize>()) {
        Err(_) => 100,
        Ok(Ok(n)) => n,
        Ok(Err(e)) => return Outcome::check(false, format!("{EPOCHS_VAR}: {e}")),
    };
    match run_protocol(std::path::Path::new(&root), epochs) {
        Ok(detail) => Outcome::check(true, detail),
        Err(e) => Outcome::check(false, format!("pipeline error: {e}")),
    }
}

fn run_protocol(root: &std::path::Path, epochs: usize) -> vesselforge::Result<String> {
    let (train, test) = load_dataset(root, Layout::Drive, None)?;
    let pre = PreprocessConfig::default();
    let enhanced: Vec<Sample> = train
        .into_iter()
        .map(|mut s| {
            s.image = preprocess(&s.image, &pre)?;
            resize_to_model(&s, MODEL_SIZE)
        })
        .collect::<vesselforge::Result<_>>()?;
    let seed = 0;
    let data = augment_all(&enhanced, &AugmentRecipe::default(), seed)?;
    let config = TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    };
    let mut trainer: Trainer = Trainer::new(GeneratorConfig::default(), DiscriminatorConfig::default(), config)?;
    trainer.train_loop(&data, &mut no_observer)?;

    let mut eval = Evaluation::new();
    for s in &test {
        let grid = resize_to_model(
            &Sample {
                image: preprocess(&s.image, &pre)?,
                ..s.clone()
            },
            MODEL_SIZE,
        )?;
        let g = trainer.predict(&grid.input_tensor()?)?;
        let g: Vec<f64> = g.data().iter().map(|&v| v as f64).collect();
        let p = ProbMask::from_tanh(MODEL_SIZE, MODEL_SIZE, &g)?;
        let (w, h) = s.image.dims();
        let p = resize_prob(&p, w, h)?;
        eval.add(&s.id, &postprocess(&p), Some(&p), &s.gt_mask, s.fov_mask.as_ref())?;
    }
    let r = eval.aggregate().report;
    let ours = [r.auc.unwrap_or(f64::NAN), r.f1, r.sensitivity, r.specificity, r.accuracy];
    let row = |v: &[f64; 5]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" & ");
    Ok(format!(
        "{epochs} epochs, {} test images; AUC & F1-score & Sen & Spe & Acc: measured {} | published {}",
        test.len(),
        row(&ours),
        row(&PUBLISHED_DRIVE)
    ))
}
