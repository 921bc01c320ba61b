//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Set `SHIFTBENCH_BLESS=1` to rewrite the pinned stability fixture.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use shiftbench::audio::{temporal_shift, ShiftDirection, Waveform};
use shiftbench::benchmark::{
    build_benchmark, enumerate_criteria, BuildOptions, Criterion, EVALUATION_SEED, GENERATION_SEED, KNOWN_DATASETS,
};
use shiftbench::corruption::{
    derive_seed, mix_components, pitch_shift, sample_severity, time_stretch, CorruptionId, Level, NoiseLibrary,
    NoiseSource, Tables, VocoderConfig,
};
use shiftbench::metrics::{
    accuracy_ovr, accuracy_top1, confusion_counts, f1_aggregated, macro_roc_auc, roc_auc_class, silhouette,
    PredictionSet,
};
use shiftbench::toymodel::{
    adapt_source, corrupted_copies, gen_toy_dataset, grad_check, prepare_source, synth_split, GradObjective,
    PipelineConfig, PipelineOutcome, SourceModel, ToyArch, ToyModel, ToySplit, ToyTaskConfig,
};
use shiftbench::tta::{
    combined_loss, consistency_loss, entropy_min_loss, generalized_entropy_loss, nuclear_norm_loss, run_stability,
    AdaptationCurve, ConsistencyNorm, LossConfig, StabilityAxis,
};

// Pinned tolerances and budgets.
const SEVERITY_DRAWS: usize = 10_000;
// Two-sided 3-sigma level (p = 0.0027) split across all grid cells.
const UNIFORMITY_SIGMAS: f64 = 4.0;
const SNR_CASES: usize = 1_000;
const SNR_TOLERANCE_DB: f64 = 1e-6;
const DSP_CASES: usize = 50;
const PITCH_RATIO_TOLERANCE: f64 = 0.02;
const BENCHMARK_SAMPLES: usize = 200;
const METRIC_INSTANCES: usize = 500;
const METRIC_TOLERANCE: f64 = 1e-9;
const GRAD_INSTANCES: usize = 50;
const GRAD_REL_TOLERANCE: f64 = 1e-3;
const FD_STEP: f64 = 1e-5;
const GRAD_FLOOR: f64 = 1e-6;
const MODEL_GRAD_COORDS: usize = 200;
const MAX_KINK_FRACTION: f64 = 0.05;
const MIN_CLEAN_TOP1: f64 = 0.95;
const MIN_CORRUPTION_DROP: f64 = 0.15;
const MIN_ADAPT_GAIN: f64 = 0.05;
const MIN_BLOB_SILHOUETTE: f64 = 0.9;
const MAX_SHUFFLED_SILHOUETTE: f64 = 0.1;
const FIXTURE_TOLERANCE: f64 = 1e-6;

type Check = fn(&mut Shared) -> Result<String, String>;

/// Expensive state reused across criteria.
#[derive(Default)]
struct Shared {
    cfg: PipelineConfig,
    source: Option<SourceModel>,
    outcome: Option<PipelineOutcome>,
}

impl Shared {
    fn source(&mut self) -> Result<&SourceModel, String> {
        if self.source.is_none() {
            self.source = Some(prepare_source(&self.cfg).map_err(|e| e.to_string())?);
        }
        Ok(self.source.as_ref().expect("just set"))
    }

    fn outcome(&mut self) -> Result<&PipelineOutcome, String> {
        if self.outcome.is_none() {
            let cfg = self.cfg.clone();
            let src = self.source()?;
            self.outcome = Some(adapt_source(&cfg, src).map_err(|e| e.to_string())?.1);
        }
        Ok(self.outcome.as_ref().expect("just set"))
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn registry(_: &mut Shared) -> Result<String, String> {
    let all = enumerate_criteria(&KNOWN_DATASETS).map_err(|e| e.to_string())?;
    let us8 = all.iter().filter(|c| c.dataset_id == "US8").count();
    let per: BTreeMap<&str, usize> = KNOWN_DATASETS
        .iter()
        .map(|d| (*d, all.iter().filter(|c| c.dataset_id == *d).count()))
        .collect();
    ensure(all.len() == 50 && us8 == 8, || format!("{} criteria, {us8} for US8", all.len()))?;
    Ok(format!("{} criteria, per dataset {per:?}", all.len()))
}

fn severity_fidelity(_: &mut Shared) -> Result<String, String> {
    let tables = Tables::defaults();
    let mut worst_z: f64 = 0.0;
    let (mut cells, mut beyond_3) = (0, 0);
    for ((family, level), grid) in &tables.grids {
        let label = format!("{}-{}", family.as_str(), level.as_str());
        let mut counts = vec![0usize; grid.values.len()];
        for i in 0..SEVERITY_DRAWS {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(GENERATION_SEED, "VS", &label, i as u64));
            let v = sample_severity(grid, &mut rng).map_err(|e| e.to_string())?;
            let k = grid
                .values
                .iter()
                .position(|&g| g == v)
                .ok_or_else(|| format!("{label}: off-grid value {v}"))?;
            counts[k] += 1;
        }
        let p = 1.0 / grid.values.len() as f64;
        let mean = SEVERITY_DRAWS as f64 * p;
        let sd = (SEVERITY_DRAWS as f64 * p * (1.0 - p)).sqrt();
        for (k, &c) in counts.iter().enumerate() {
            ensure(c > 0, || format!("{label}: value {} never drawn", grid.values[k]))?;
            let z = (c as f64 - mean).abs() / sd;
            cells += 1;
            beyond_3 += usize::from(z > 3.0);
            worst_z = worst_z.max(z);
            ensure(z <= UNIFORMITY_SIGMAS, || format!("{label}: value {} drawn {c} times (z = {z:.2})", grid.values[k]))?;
        }
    }
    Ok(format!(
        "{} grids x {SEVERITY_DRAWS} draws, worst |z| = {worst_z:.2}, {beyond_3} of {cells} cells beyond 3 sigma ({:.2} expected)",
        tables.grids.len(),
        cells as f64 * 0.0027
    ))
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

fn snr_exactness(_: &mut Shared) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(EVALUATION_SEED);
    let mut worst: f64 = 0.0;
    for case in 0..SNR_CASES {
        let n = rng.random_range(16..4000);
        let amp: f64 = rng.random_range(1e-3..2.0);
        let clean: Vec<f64> = (0..n).map(|_| amp * rng.random_range(-1.0..1.0)).collect();
        let noise: Vec<f64> = (0..n).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let snr = rng.random_range(-20.0..40.0);
        let c = Waveform::new(clean, 16000).map_err(|e| e.to_string())?;
        let nz = Waveform::new(noise, 16000).map_err(|e| e.to_string())?;
        let m = mix_components(&c, &nz, snr).map_err(|e| format!("case {case}: {e}"))?;
        let measured = 10.0 * (power(c.samples()) / power(&m.scaled_noise)).log10();
        worst = worst.max((measured - snr).abs());
    }
    ensure(worst < SNR_TOLERANCE_DB, || format!("worst SNR error {worst:.3e} dB"))?;
    Ok(format!("{SNR_CASES} mixes, worst SNR error {worst:.2e} dB"))
}

fn tone(freq: f64, rate: u32, len: usize) -> Waveform {
    Waveform::new(
        (0..len)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect(),
        rate,
    )
    .expect("finite tone")
}

/// Spectral peak of a zero-padded, Hann-windowed FFT with parabolic refinement.
fn peak_hz(w: &Waveform) -> f64 {
    let n = (w.len() * 4).next_power_of_two();
    let len = w.len() as f64;
    let mut buf: Vec<Complex<f64>> = w
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &s)| Complex::new(s * (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / len).cos()), 0.0))
        .collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mag: Vec<f64> = buf[..n / 2].iter().map(|c| c.norm()).collect();
    let k = (1..n / 2 - 1).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).expect("non-empty");
    let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
    let offset = 0.5 * (a - c) / (a - 2.0 * b + c);
    (k as f64 + offset) * w.sample_rate() as f64 / n as f64
}

fn dsp_tolerances(_: &mut Shared) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(GENERATION_SEED);
    let rate = 16000;
    let hop = VocoderConfig::for_rate(rate).hop as f64;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_len: f64 = 0.0;
    for case in 0..DSP_CASES {
        let f0 = rng.random_range(200.0..1500.0);
        let semis = if case < 2 { [12.0, -12.0][case] } else { rng.random_range(-12.0..=12.0) };
        let shifted = pitch_shift(&tone(f0, rate, rate as usize), semis).map_err(|e| e.to_string())?;
        ensure(shifted.len() == rate as usize, || format!("pitch shift changed length to {}", shifted.len()))?;
        let expected = f0 * 2f64.powf(semis / 12.0);
        let err = (peak_hz(&shifted) / expected - 1.0).abs();
        worst_ratio = worst_ratio.max(err);
        ensure(err < PITCH_RATIO_TOLERANCE, || {
            format!("{f0:.1} Hz by {semis:.2} st: ratio error {:.2}%", 100.0 * err)
        })?;

        let len = rng.random_range(4000..32000);
        let percent = rng.random_range(-40.0..40.0);
        let out = time_stretch(&tone(f0, rate, len), percent).map_err(|e| e.to_string())?;
        let expected_len = len as f64 / (1.0 + percent / 100.0);
        let dev = (out.len() as f64 - expected_len).abs();
        worst_len = worst_len.max(dev);
        ensure(dev <= hop, || format!("stretch {percent:.2}% of {len}: off by {dev:.1} samples"))?;
    }
    Ok(format!(
        "{DSP_CASES}+{DSP_CASES} cases, worst pitch ratio error {:.3}%, worst length error {worst_len:.1} samples (hop {hop})",
        100.0 * worst_ratio
    ))
}

fn sc2_library() -> NoiseLibrary {
    let mut lib = NoiseLibrary::new();
    let types = ["exercise_bike", "running_tap", "white_noise", "pink_noise", "doing_the_dishes", "dude_miaowing"];
    for (i, t) in types.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let w = Waveform::new((0..24000).map(|_| rng.random_range(-0.5..0.5)).collect(), 16000).expect("finite noise");
        lib.add(*t, NoiseSource::memory(format!("{t}/0.wav"), w));
    }
    lib
}

fn determinism(_: &mut Shared) -> Result<String, String> {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let task = ToyTaskConfig {
        train_per_class: 2,
        test_per_class: BENCHMARK_SAMPLES / 4,
        ..ToyTaskConfig::default()
    };
    let data = gen_toy_dataset(&task, tmp.path().join("data")).map_err(|e| e.to_string())?;
    ensure(data.test.entries.len() == BENCHMARK_SAMPLES, || "wrong test size".into())?;
    let lib = sc2_library();
    let tables = Tables::defaults();
    let mut labels = Vec::new();
    for (c, l) in [
        (CorruptionId::Whn, Level::L2),
        (CorruptionId::Ensc, Level::L2),
        (CorruptionId::Tst, Level::L2),
        (CorruptionId::Psh, Level::L1),
    ] {
        let crit = Criterion::for_dataset(&data.test.dataset_id, c, l).map_err(|e| e.to_string())?;
        let build = |workers: usize, dir: &str| {
            let opts = BuildOptions {
                global_seed: GENERATION_SEED,
                workers,
            };
            build_benchmark(&data.test, &crit, &tables, &lib, opts, tmp.path().join(dir)).map_err(|e| e.to_string())
        };
        let one = build(1, &format!("{}-w1", crit.label()))?;
        let eight = build(8, &format!("{}-w8", crit.label()))?;
        ensure(one.records == eight.records, || format!("{crit}: records differ between 1 and 8 workers"))?;
        ensure(
            (&one.dataset_id, &one.class_names, one.global_seed, &one.criterion)
                == (&eight.dataset_id, &eight.class_names, eight.global_seed, &eight.criterion),
            || format!("{crit}: headers differ"),
        )?;
        ensure(one.digest() == eight.digest(), || format!("{crit}: digests differ"))?;
        for (a, b) in one.records.iter().zip(&eight.records) {
            let bytes = |m: &shiftbench::benchmark::BenchmarkManifest, r| std::fs::read(m.resolve(r)).map_err(|e| e.to_string());
            ensure(bytes(&one, a)? == bytes(&eight, b)?, || format!("{crit}: audio for {} differs", a.entry.sample_id))?;
        }
        labels.push(crit.label());
    }
    Ok(format!("{BENCHMARK_SAMPLES} samples x {{{}}}: identical records, digests and audio", labels.join(", ")))
}

/// Pair-counting AUC with ties worth one half.
fn oracle_auc(scores: &[f64], pos: &[bool]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if pos[i] && !pos[j] {
                pairs += 1.0;
                num += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / pairs
}

/// Pooled one-vs-rest counts by walking every (sample, class) cell.
fn oracle_counts(rows: &[Vec<f64>], labels: &[usize]) -> (f64, f64, f64, f64) {
    let (mut tp, mut fp, mut fn_, mut tn) = (0.0, 0.0, 0.0, 0.0);
    for (row, &y) in rows.iter().zip(labels) {
        let mut pred = 0;
        for (k, &v) in row.iter().enumerate() {
            if v > row[pred] {
                pred = k;
            }
        }
        for c in 0..row.len() {
            match (pred == c, y == c) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
                (false, false) => tn += 1.0,
            }
        }
    }
    (tp, fp, fn_, tn)
}

fn random_instance(rng: &mut ChaCha8Rng, with_ties: bool) -> (Vec<Vec<f64>>, Vec<usize>) {
    let c = rng.random_range(2..=6);
    let n = rng.random_range(c + 1..=30);
    let fresh = |rng: &mut ChaCha8Rng| {
        let raw: Vec<f64> = (0..c).map(|_| rng.random_range(1..=5) as f64).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect::<Vec<f64>>()
    };
    let pool: Vec<Vec<f64>> = (0..4).map(|_| fresh(rng)).collect();
    let rows = (0..n)
        .map(|_| if with_ties { pool[rng.random_range(0..pool.len())].clone() } else { fresh(rng) })
        .collect();
    let mut labels: Vec<usize> = (0..c).chain((c..n).map(|_| rng.random_range(0..c))).collect();
    labels.shuffle(rng);
    (rows, labels)
}

fn metric_oracles(_: &mut Shared) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(EVALUATION_SEED);
    let mut worst: f64 = 0.0;
    for inst in 0..METRIC_INSTANCES {
        let (rows, labels) = random_instance(&mut rng, inst % 2 == 0);
        let p = PredictionSet::from_rows(&rows, labels.clone()).map_err(|e| e.to_string())?;
        let c = rows[0].len();
        let mut aucs = Vec::new();
        for k in 0..c {
            let scores: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            let pos: Vec<bool> = labels.iter().map(|&l| l == k).collect();
            let got = roc_auc_class(&scores, &pos).map_err(|e| e.to_string())?;
            let want = oracle_auc(&scores, &pos);
            worst = worst.max((got - want).abs());
            aucs.push(want);
        }
        let macro_want = aucs.iter().sum::<f64>() / c as f64;
        worst = worst.max((macro_roc_auc(&p).map_err(|e| e.to_string())? - macro_want).abs());

        let counts = confusion_counts(&p.predicted(), &labels, c).map_err(|e| e.to_string())?;
        let (tp, fp, fn_, tn) = oracle_counts(&rows, &labels);
        let f1_want = 2.0 * tp / (2.0 * tp + fp + fn_);
        let acc_want = (tp + tn) / (tp + fp + fn_ + tn);
        let f1 = f1_aggregated(&counts).map_err(|e| e.to_string())?;
        worst = worst.max((f1 - f1_want).abs());
        worst = worst.max((accuracy_ovr(&counts).map_err(|e| e.to_string())? - acc_want).abs());
        ensure((f1 - accuracy_top1(&p)).abs() < METRIC_TOLERANCE, || {
            format!("instance {inst}: f1_aggregated {f1} != accuracy_top1 {}", accuracy_top1(&p))
        })?;
    }
    ensure(worst < METRIC_TOLERANCE, || format!("worst disagreement {worst:.3e}"))?;
    Ok(format!("{METRIC_INSTANCES} instances, worst disagreement {worst:.1e}, pooled F1 = top-1 on all"))
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(GRAD_FLOOR)
}

/// Worst central-difference error of `grad` against `f` over every entry.
fn fd_check(p: &DMatrix<f64>, grad: &DMatrix<f64>, f: &dyn Fn(&DMatrix<f64>) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for idx in 0..p.len() {
        let mut up = p.clone();
        up[idx] += FD_STEP;
        let mut down = p.clone();
        down[idx] -= FD_STEP;
        let numeric = (f(&up) - f(&down)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(grad[idx], numeric));
    }
    worst
}

fn random_probs(rng: &mut ChaCha8Rng, b: usize, c: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(b, c, |_, _| rng.random_range(-3.0..3.0f64).exp());
    for mut row in m.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    m
}

/// Two probability matrices whose entries differ by at least `gap` everywhere.
fn separated_pair(rng: &mut ChaCha8Rng, b: usize, c: usize, gap: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    loop {
        let (l, r) = (random_probs(rng, b, c), random_probs(rng, b, c));
        if (&l - &r).iter().all(|d| d.abs() > gap) {
            return (l, r);
        }
    }
}

fn gradient_correctness(_: &mut Shared) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(GENERATION_SEED);
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut note = |name, e: f64| {
        let w = worst.entry(name).or_insert(0.0);
        *w = w.max(e);
    };
    for _ in 0..GRAD_INSTANCES {
        let (b, c) = (rng.random_range(2..=8), rng.random_range(2..=6));
        let p = random_probs(&mut rng, b, c);
        note("em", fd_check(&p, &entropy_min_loss(&p).grad, &|q| entropy_min_loss(q).value));
        let alpha = [0.5, 1.5, 2.0, 3.0][rng.random_range(0..4)];
        let ge = generalized_entropy_loss(&p, alpha).map_err(|e| e.to_string())?;
        note("ge", fd_check(&p, &ge.grad, &|q| generalized_entropy_loss(q, alpha).expect("valid").value));
        let nnm = nuclear_norm_loss(&p).map_err(|e| e.to_string())?;
        note("nnm", fd_check(&p, &nnm.grad, &|q| nuclear_norm_loss(q).expect("svd").value));

        let (pl, pr) = separated_pair(&mut rng, b, c, 1e-3);
        for norm in [ConsistencyNorm::Literal, ConsistencyNorm::PerSampleL2] {
            let con = consistency_loss(&pl, &pr, norm).map_err(|e| e.to_string())?;
            note("con", fd_check(&pl, &con.grad_l, &|q| consistency_loss(q, &pr, norm).expect("shape").value));
            note("con", fd_check(&pr, &con.grad_r, &|q| consistency_loss(&pl, q, norm).expect("shape").value));
        }
        let cfg = LossConfig {
            lambda: rng.random_range(0.1..2.0),
            alpha,
            ..LossConfig::default()
        };
        let comb = combined_loss(&pl, &pr, &cfg).map_err(|e| e.to_string())?;
        note("combined", fd_check(&pl, &comb.grad_l, &|q| combined_loss(q, &pr, &cfg).expect("valid").total));
        note("combined", fd_check(&pr, &comb.grad_r, &|q| combined_loss(&pl, q, &cfg).expect("valid").total));
    }

    let task = ToyTaskConfig {
        train_per_class: 1,
        test_per_class: 1,
        clip_seconds: 0.25,
        ..ToyTaskConfig::default()
    };
    let (waves, labels) = synth_split(&task, ToySplit::Train).map_err(|e| e.to_string())?;
    let (mut kinks, mut coords) = (0, 0);
    for i in 0..GRAD_INSTANCES {
        let model = ToyModel::new(ToyArch::default(), 1000 + i as u64).map_err(|e| e.to_string())?;
        let ce = grad_check(&model, &waves, GradObjective::CrossEntropy { labels: &labels }, MODEL_GRAD_COORDS, i as u64)
            .map_err(|e| e.to_string())?;
        note("model_ce", ce.max_rel_error);
        kinks += ce.kinks;
        coords += ce.coords;
        let right: Vec<Waveform> = waves
            .iter()
            .map(|w| temporal_shift(w, ShiftDirection::Right, 0.05, 0.1).expect("in range"))
            .collect();
        let obj = GradObjective::Combined {
            cfg: LossConfig::default(),
            right: &right,
        };
        let comb = grad_check(&model, &waves, obj, MODEL_GRAD_COORDS, i as u64).map_err(|e| e.to_string())?;
        note("model_combined", comb.max_rel_error);
        kinks += comb.kinks;
        coords += comb.coords;
    }
    let summary = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect::<Vec<_>>().join(", ");
    let kink_note = format!("{kinks} of {coords} model coordinates straddle a kink");
    ensure(worst.values().all(|&v| v < GRAD_REL_TOLERANCE), || format!("worst relative errors: {summary}; {kink_note}"))?;
    ensure(kinks as f64 <= MAX_KINK_FRACTION * coords as f64, || kink_note.clone())?;
    Ok(format!("{GRAD_INSTANCES} instances each, worst relative errors: {summary}; {kink_note}"))
}

fn toy_pipeline(s: &mut Shared) -> Result<String, String> {
    let a = s.cfg.adapt;
    ensure(
        a.epochs == 20
            && a.batch_size >= 32
            && a.optimizer.momentum == 0.7
            && a.optimizer.lr_ratio == 0.5
            && a.loss.lambda == 1.0
            && s.cfg.snr_db == 5.0,
        || "pipeline configuration drifted from the pinned settings".into(),
    )?;
    let o = s.outcome()?;
    let drop = o.clean_top1 - o.corrupted_top1;
    let gain = o.adapted_top1 - o.corrupted_top1;
    let detail = format!(
        "clean {:.3}, WHN 5 dB {:.3} (drop {drop:.3}), adapted {:.3} (gain {gain:.3})",
        o.clean_top1, o.corrupted_top1, o.adapted_top1
    );
    ensure(
        o.clean_top1 >= MIN_CLEAN_TOP1 && drop >= MIN_CORRUPTION_DROP && gain >= MIN_ADAPT_GAIN,
        || detail.clone(),
    )?;
    Ok(detail)
}

fn fixture_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/stability_pinned.tsv")
}

fn parse_fixture(text: &str) -> BTreeMap<(String, String), (f64, bool)> {
    text.lines()
        .skip(1)
        .filter_map(|l| {
            let c: Vec<&str> = l.split('\t').collect();
            Some(((c[0].to_string(), c[1].to_string()), (c[2].parse().ok()?, c[3] == "true")))
        })
        .collect()
}

fn stability(s: &mut Shared) -> Result<String, String> {
    let cfg = s.cfg.clone();
    let src = s.source()?;
    let (data, eval) = corrupted_copies(&cfg, src).map_err(|e| e.to_string())?;
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let mut pinned = String::from("axis\tsetting\tdrawdown\texpectation_held\n");
    let mut notes = Vec::new();
    for axis in [StabilityAxis::Momentum, StabilityAxis::LrRatio] {
        let report = run_stability(&src.model, &data, &eval, &cfg.adapt, axis).map_err(|e| e.to_string())?;
        let dir = tmp.path().join(axis.as_str());
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        for r in &report.runs {
            let path = dir.join(format!("curve_{}.tsv", r.label));
            std::fs::write(&path, r.curve.to_tsv()).map_err(|e| e.to_string())?;
            let back = AdaptationCurve::from_tsv(&std::fs::read_to_string(&path).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            ensure(back.points.len() == cfg.adapt.epochs + 1, || format!("{}: {} curve rows", r.label, back.points.len()))?;
            ensure((back.drawdown() - r.drawdown).abs() < 1e-6, || format!("{}: drawdown does not survive the file", r.label))?;
            ensure((r.drawdown - (r.curve.peak() - r.curve.final_value())).abs() < 1e-12, || "drawdown is not peak minus final".into())?;
            let _ = writeln!(pinned, "{}\t{}\t{:.6}\t{}", axis.as_str(), r.label, r.drawdown, report.expectation_held);
        }
        let summary = report.summary_tsv();
        std::fs::write(dir.join("summary.tsv"), &summary).map_err(|e| e.to_string())?;
        ensure(summary.lines().count() == 3, || format!("{} summary rows", summary.lines().count() - 1))?;
        let [a, b] = [&report.runs[0], &report.runs[1]];
        notes.push(format!(
            "{} drawdown {:.3} vs {} {:.3}, expectation {}",
            a.label,
            a.drawdown,
            b.label,
            b.drawdown,
            match (report.expectation_held, a.drawdown == b.drawdown) {
                (true, true) => "held (tie)",
                (true, false) => "held",
                _ => "not held",
            }
        ));
    }
    if std::env::var_os("SHIFTBENCH_BLESS").is_some() {
        std::fs::create_dir_all(fixture_path().parent().expect("has parent")).map_err(|e| e.to_string())?;
        std::fs::write(fixture_path(), &pinned).map_err(|e| e.to_string())?;
        notes.push("fixture rewritten".into());
    } else {
        let want = std::fs::read_to_string(fixture_path()).map_err(|e| format!("pinned fixture: {e}"))?;
        let (want, got) = (parse_fixture(&want), parse_fixture(&pinned));
        let same = want.len() == got.len()
            && want.iter().all(|(k, (d, h))| got.get(k).is_some_and(|(d2, h2)| (d - d2).abs() < FIXTURE_TOLERANCE && h == h2));
        // The pinned outcome is recorded, not asserted.
        notes.push(if same { "matches pinned fixture".into() } else { format!("differs from pinned fixture:\n{pinned}") });
    }
    Ok(notes.join("; "))
}

fn silhouette_checks(s: &mut Shared) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(EVALUATION_SEED);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for class in 0..2 {
        for _ in 0..50 {
            points.push((0..8).map(|_| 20.0 * class as f64 + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect::<Vec<f64>>());
            labels.push(class);
        }
    }
    let blobs = silhouette(&points, &labels).map_err(|e| e.to_string())?;
    labels.shuffle(&mut rng);
    let shuffled = silhouette(&points, &labels).map_err(|e| e.to_string())?;
    let o = s.outcome()?;
    let change = o.silhouette_after - o.silhouette_before;
    let detail = format!(
        "two blobs {blobs:.3}, shuffled labels {shuffled:.3}, toy embeddings {:.3} -> {:.3} (change {change:+.3})",
        o.silhouette_before, o.silhouette_after
    );
    ensure(
        blobs >= MIN_BLOB_SILHOUETTE && shuffled.abs() < MAX_SHUFFLED_SILHOUETTE && change >= 0.0,
        || detail.clone(),
    )?;
    Ok(detail)
}

fn main() {
    let criteria: [(u32, &str, u64, Check); 10] = [
        (1, "criteria registry", 1, registry),
        (2, "severity fidelity", 10, severity_fidelity),
        (3, "SNR exactness", 30, snr_exactness),
        (4, "DSP tolerances", 60, dsp_tolerances),
        (5, "build determinism", 120, determinism),
        (6, "metric oracles", 30, metric_oracles),
        (7, "gradient correctness", 120, gradient_correctness),
        (8, "toy pipeline", 300, toy_pipeline),
        (9, "stability artifacts", 600, stability),
        (10, "silhouette", 60, silhouette_checks),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut shared = Shared::default();
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        // Shared work is charged to the first criterion that needs it.
        let pre = match id {
            8 | 10 => shared.outcome().err(),
            9 => shared.source().err(),
            _ => None,
        };
        let result = match pre {
            Some(e) => Err(e),
            None => check(&mut shared),
        };
        let elapsed = start.elapsed();
        let result = result.and_then(|d| {
            if elapsed <= Duration::from_secs(budget) {
                Ok(d)
            } else {
                Err(format!("{d}; took {:.1} s, budget {budget} s", elapsed.as_secs_f64()))
            }
        });
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {id:>2} {tag} {name}: {detail} [{:.2} s / {budget} s]",
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
