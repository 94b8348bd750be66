//! Acceptance checks. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any of them failed.

mod common;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use dualcloak::attacks::{masked_pgd, age_attack, AttackConfig, AttackContext, AttackMode, StrategyRegistry};
use dualcloak::embedding::{
    calibrate_threshold, DistanceObjective, EmbedderEnsemble, FaceEmbedder, ToyLinear,
};
use dualcloak::evaluation::{fid, mean_api_confidence, VerificationServiceClient};
use dualcloak::image::load_image;
use dualcloak::manifold::{AttributeDirection, GenerativeModel, ToyIdentity};
use dualcloak::masking::{BinaryMask, LabelSet, StaticParser};
use dualcloak::synth::{stream_rng, Population};
use dualcloak::zoo::{Zoo, DEFAULT_HOLDOUT, EMBED_DIM, IMAGE_SHAPE};
use dualcloak::ImageTensor;
use dualcloak_cli::commands::calibrate::{cmd_calibrate, write_thresholds};
use dualcloak_cli::commands::evaluate::{cmd_evaluate, EvaluateOptions};
use dualcloak_cli::commands::protect::{cmd_protect, Manifest, TIMINGS_FILE};
use dualcloak_cli::config::{load, LoadedConfig};
use dualcloak_cli::fixtures::{write_fixture_set, FixtureOptions, PAIRS_FILE};
use dualcloak_cli::util::list_images;
use dualcloak_service::{ClientOptions, HttpVerificationClient, MockServer};
use rand::Rng;
use rand_distr::StandardNormal;

const ALL_MODES: [AttackMode; 6] = [
    AttackMode::Pgd,
    AttackMode::Tma,
    AttackMode::Ftm,
    AttackMode::Age,
    AttackMode::AgeTma,
    AttackMode::AgeFtm,
];
const SUITE_SIZE: usize = 50;
const BUDGET_SLACK: f64 = 1e-6;

/// Smallest relative loss decrease `(initial - final) / initial` allowed per
/// mode, pinned at roughly half of the smallest value measured on the
/// fixture runs below.
const LOSS_MARGINS: [(&str, f64); 6] = [
    ("pgd", 0.45),
    ("tma", 0.46),
    ("ftm", 0.04),
    ("age", 0.04),
    ("age-tma", 0.22),
    ("age-ftm", 0.06),
];

/// Black-box ASR measured once on the default 50-pair fixture (clean, ftm,
/// age-tma, age-ftm). Runs must stay within two pairs of these.
const PINNED_ASR: [(&str, f64); 4] = [("clean", 0.0), ("ftm", 0.10), ("age-tma", 0.56), ("age-ftm", 0.20)];
const PIN_TOLERANCE: f64 = 0.04 + 1e-9;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Statistics of one attack run that later criteria need.
#[derive(Debug, Clone)]
struct RunStats {
    mode: String,
    source: &'static str,
    initial: f64,
    last: f64,
    delta_linf: f64,
    latent_linf: Option<f64>,
    in_range: bool,
}

#[derive(Default)]
struct Shared {
    suite_runs: Vec<RunStats>,
    fixture_runs: Vec<RunStats>,
    fixture: Option<FixtureRun>,
}

struct FixtureRun {
    _dir: tempfile::TempDir,
    root: PathBuf,
    protected: BTreeMap<String, PathBuf>,
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn linear_ensemble(shape: (usize, usize, usize), dim: usize, seeds: &[u64]) -> EmbedderEnsemble {
    EmbedderEnsemble::new(
        seeds
            .iter()
            .map(|s| Arc::new(ToyLinear::seeded(format!("lin-{s}"), shape, dim, *s)) as Arc<dyn FaceEmbedder>)
            .collect(),
    )
    .unwrap()
}

// 1. Mask restriction over a 50-image suite and every mode.
fn mask_restriction(shared: &mut Shared) -> Verdict {
    let start = Instant::now();
    let zoo = common::zoo();
    let gen = zoo.generator("toy-decoder").unwrap();
    let attr = zoo.attribute("toy-decoder", "smile").unwrap();
    let ens = linear_ensemble(IMAGE_SHAPE, EMBED_DIM, &[101, 102, 103]);
    let people = Population::new(0xacce97, "acceptance-suite", 2 * SUITE_SIZE);
    let registry = StrategyRegistry::with_builtins();
    let (mut checked, mut changed, mut runs) = (0usize, 0usize, 0usize);
    for i in 0..SUITE_SIZE {
        let (src, labels) = people.face(i, 0, IMAGE_SHAPE.0).unwrap();
        let target = people.face(SUITE_SIZE + i, 0, IMAGE_SHAPE.0).unwrap().0;
        let parser = StaticParser::new(labels, LabelSet::celebamask_hq());
        let id = format!("suite_{i:02}");
        let ctx = AttackContext::new(&src, &target, &ens)
            .with_generator(gen.as_ref())
            .with_attribute(&attr)
            .with_parser(&parser, &id);
        for mode in ALL_MODES {
            let r = registry.run(&ctx, &AttackConfig::default().with_mode(mode)).unwrap();
            runs += 1;
            let stage_input = r.pixel_stage_input(&src);
            if mode != AttackMode::Age {
                let full;
                let mask = match &r.mask_used {
                    Some(m) => m,
                    None => {
                        full = BinaryMask::ones(src.height(), src.width());
                        &full
                    }
                };
                let c = src.channels();
                for (k, (a, b)) in stage_input.as_slice().iter().zip(r.protected_image.as_slice()).enumerate() {
                    if !mask.bits()[k / c] {
                        checked += 1;
                        if a.to_bits() != b.to_bits() {
                            changed += 1;
                        }
                    }
                }
            }
            shared.suite_runs.push(RunStats {
                mode: mode.as_str().to_string(),
                source: "suite",
                initial: r.initial_loss(),
                last: r.final_loss(),
                delta_linf: if mode == AttackMode::Age {
                    0.0
                } else {
                    linf(r.protected_image.as_slice(), stage_input.as_slice())
                },
                latent_linf: r.latent_offset.as_ref().map(|l| l.iter().fold(0.0f64, |m, v| m.max(v.abs()))),
                in_range: r.protected_image.as_slice().iter().all(|v| (0.0..=1.0).contains(v)),
            });
        }
    }
    let elapsed = start.elapsed();
    verdict(
        changed == 0 && checked > 0 && elapsed < Duration::from_secs(120),
        format!("{runs} runs, {changed} of {checked} masked-out samples changed, {:.1} s (limit 120 s)", elapsed.as_secs_f64()),
    )
}

// 2. Budgets and range on every fixture run.
fn budgets(shared: &Shared) -> Verdict {
    let eps = AttackConfig::default().epsilon;
    let eta = AttackConfig::default().eta;
    let runs: Vec<&RunStats> = shared.suite_runs.iter().chain(&shared.fixture_runs).collect();
    let worst_delta = runs.iter().map(|r| r.delta_linf).fold(0.0, f64::max);
    let latent: Vec<f64> = runs.iter().filter_map(|r| r.latent_linf).collect();
    let worst_latent = latent.iter().cloned().fold(0.0, f64::max);
    let out_of_range = runs.iter().filter(|r| !r.in_range).count();
    let pass = !runs.is_empty()
        && !shared.fixture_runs.is_empty()
        && worst_delta <= eps + BUDGET_SLACK
        && worst_latent <= eta + BUDGET_SLACK
        && out_of_range == 0;
    verdict(
        pass,
        format!(
            "{} runs: max |delta| {worst_delta:.6} (<= {:.6}), max |lambda| {worst_latent:.6} over {} AGE runs (<= {eta}), {out_of_range} out of range",
            runs.len(),
            eps + BUDGET_SLACK,
            latent.len()
        ),
    )
}

// 3. Masked gradients against central differences.
fn gradient_check() -> Verdict {
    let mut worst: f64 = 0.0;
    let instances = 24;
    for t in 0..instances {
        let mut rng = stream_rng(3, "gradient-check", t);
        let shape = (8, 8, if t % 2 == 0 { 3 } else { 1 });
        let members = 1 + (t as usize % 3);
        let seeds: Vec<u64> = (0..members as u64).map(|m| 1000 + 10 * t + m).collect();
        let ens = linear_ensemble(shape, 6 + (t as usize % 5), &seeds);
        let n = shape.0 * shape.1 * shape.2;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
        let target = ImageTensor::from_fn(8, 8, shape.2, |_, _, _| rng.random::<f64>()).unwrap();
        let img = ImageTensor::new(8, 8, shape.2, x.clone()).unwrap();
        let mask = BinaryMask::from_fn(8, 8, |_, _| rng.random_bool(0.6));
        let active: Vec<bool> = (0..n).map(|i| mask.bits()[i / shape.2]).collect();
        let delta: Vec<f64> = (0..n).map(|_| rng.random_range(-0.05..0.05)).collect();
        let obj = DistanceObjective::toward(&ens, &target).unwrap();
        let at = |d: &[f64]| -> ImageTensor {
            img.with_data((0..n).map(|i| x[i] + if active[i] { d[i] } else { 0.0 }).collect()).unwrap()
        };
        let (_, grad) = obj.value_and_grad(&at(&delta)).unwrap();
        let masked: Vec<f64> = (0..n).map(|i| if active[i] { grad[i] } else { 0.0 }).collect();
        let h = 1e-5;
        let fd: Vec<f64> = (0..n)
            .map(|i| {
                let mut p = delta.clone();
                let mut m = delta.clone();
                p[i] += h;
                m[i] -= h;
                (obj.value(&at(&p)).unwrap() - obj.value(&at(&m)).unwrap()) / (2.0 * h)
            })
            .collect();
        let num = masked.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(num / den);
    }
    verdict(worst < 1e-4, format!("{instances} instances, worst relative error {worst:.2e} (limit 1e-4)"))
}

// 4. AGE with the identity generator equals unmasked PGD.
fn identity_equivalence() -> Verdict {
    let mut worst: f64 = 0.0;
    let instances = 20;
    let cfg = AttackConfig::default().with_mode(AttackMode::Age);
    for t in 0..instances {
        let mut rng = stream_rng(4, "identity-equivalence", t);
        let shape = (10, 10, 3);
        let ens = linear_ensemble(shape, 12, &[2000 + 3 * t, 2001 + 3 * t, 2002 + 3 * t]);
        // Pixels at least eta from the range ends, so clamping never engages.
        let x = ImageTensor::from_fn(10, 10, 3, |_, _, _| rng.random_range(0.1..=0.9)).unwrap();
        let target = ImageTensor::from_fn(10, 10, 3, |_, _, _| rng.random::<f64>()).unwrap();
        let gen = ToyIdentity::new(shape);
        let attr = AttributeDirection::none(gen.latent_dim());
        let age = age_attack(&x, &target, &ens, &gen, &attr, &cfg).unwrap();
        let pgd_cfg = AttackConfig {
            epsilon: cfg.eta,
            epsilon_iter: cfg.eta_iter,
            off_steps: cfg.n_latent_steps,
            ..cfg.clone().with_mode(AttackMode::Pgd)
        };
        let pgd = masked_pgd(&x, &target, &ens, None, &pgd_cfg).unwrap();
        worst = worst.max(age.protected_image.max_abs_diff(&pgd.protected_image));
    }
    verdict(worst <= 1e-6, format!("{instances} instances, max pixel difference {worst:.2e} (limit 1e-6)"))
}

fn quantile_oracle(scores: &[f64], far: f64) -> f64 {
    let mut s = scores.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    let rank = n as f64 * (1.0 - far) + 0.5;
    if rank <= 1.0 {
        s[0]
    } else if rank >= n as f64 {
        s[n - 1]
    } else {
        let i = rank.floor() as usize;
        let t = rank - i as f64;
        (1.0 - t) * s[i - 1] + t * s[i]
    }
}

// 5. Quantile calibration against the oracle, and monotonicity in FAR.
fn calibration() -> Verdict {
    let (mut mismatches, mut non_monotone) = (0, 0);
    let mut worst: f64 = 0.0;
    for t in 0..1000u64 {
        let mut rng = stream_rng(5, "calibration", t);
        let n = rng.random_range(1..=300);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let mut fars: Vec<f64> = (0..6).map(|_| rng.random_range(1e-4..=1.0)).collect();
        fars.push(0.01);
        fars.push(1.0);
        fars.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let taus: Vec<f64> = fars.iter().map(|f| calibrate_threshold(&scores, *f).unwrap().tau).collect();
        for (f, tau) in fars.iter().zip(&taus) {
            let err = (tau - quantile_oracle(&scores, *f)).abs();
            worst = worst.max(err);
            if err > 1e-9 {
                mismatches += 1;
            }
        }
        if taus.windows(2).any(|w| w[0] < w[1]) {
            non_monotone += 1;
        }
    }
    verdict(
        mismatches == 0 && non_monotone == 0,
        format!("1000 lists: {mismatches} oracle mismatches (worst {worst:.1e}), {non_monotone} non-monotone"),
    )
}

fn with_overrides(config: &Path, pairs: &[(&str, &str)]) -> LoadedConfig {
    let o: Vec<(String, String)> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    load(config, &o).unwrap()
}

fn holdout_asr(loaded: &LoadedConfig, zoo: &Zoo, protected: &Path) -> f64 {
    let opts = EvaluateOptions {
        protected: protected.to_path_buf(),
        targets: None,
        thresholds: None,
        api: None,
        allow_partial: false,
    };
    let report = cmd_evaluate(loaded, zoo, &opts).unwrap().report;
    report.per_model.iter().find(|m| m.black_box).unwrap().asr
}

fn manifest_stats(manifest: &Manifest, mode: &str, eval_dir: &Path) -> Vec<RunStats> {
    manifest
        .images
        .iter()
        .map(|rec| {
            let img = load_image(eval_dir.join(rec.protected.as_ref().unwrap())).unwrap();
            RunStats {
                mode: mode.to_string(),
                source: "fixture",
                initial: rec.loss_trace[0],
                last: *rec.loss_trace.last().unwrap(),
                delta_linf: rec.delta_linf.unwrap(),
                latent_linf: rec.latent_offset_linf,
                in_range: img.as_slice().iter().all(|v| (0.0..=1.0).contains(v)),
            }
        })
        .collect()
}

// 6. Black-box effectiveness ordering on the 50-pair convnet fixture.
fn effectiveness(shared: &mut Shared) -> Verdict {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let config = write_fixture_set(&root, &FixtureOptions::default()).unwrap();
    let zoo = common::zoo();
    let base = with_overrides(&config, &[]);
    let table = cmd_calibrate(&base, &zoo, &root.join(PAIRS_FILE)).unwrap();
    write_thresholds(&root.join("out/thresholds.json"), &table).unwrap();
    let tau = table[DEFAULT_HOLDOUT].tau;

    let clean = holdout_asr(&base, &zoo, &root.join("sources"));
    let mut asr = BTreeMap::new();
    asr.insert("clean", clean);
    let mut protected = BTreeMap::new();
    for mode in ["ftm", "age-tma", "age-ftm"] {
        let out = format!("out-{mode}");
        let loaded = with_overrides(&config, &[("attack.mode", mode), ("io.output", &out)]);
        let run = cmd_protect(&loaded, &zoo).unwrap();
        assert_eq!(run.manifest.n_failed, 0, "{mode} had failures");
        shared.fixture_runs.extend(manifest_stats(&run.manifest, mode, &run.output_dir));
        asr.insert(mode, holdout_asr(&loaded, &zoo, &run.output_dir.join("protected")));
        protected.insert(mode.to_string(), run.output_dir.join("protected"));
    }
    shared.fixture = Some(FixtureRun { _dir: dir, root, protected });
    let elapsed = start.elapsed();
    let (ftm, age_tma) = (asr["ftm"], asr["age-tma"]);
    let drifted: Vec<&str> = PINNED_ASR
        .iter()
        .filter(|(m, v)| (asr[m] - v).abs() > PIN_TOLERANCE)
        .map(|(m, _)| *m)
        .collect();
    verdict(
        ftm > clean && age_tma >= ftm && drifted.is_empty() && elapsed < Duration::from_secs(600),
        format!(
            "holdout {DEFAULT_HOLDOUT} tau {tau:.4}: clean {clean:.2}, ftm {ftm:.2}, age-tma {age_tma:.2} (age-ftm {:.2}), drifted from pins: {drifted:?}, {:.0} s (limit 600 s)",
            asr["age-ftm"],
            elapsed.as_secs_f64()
        ),
    )
}

// 7. Loss descent with pinned per-mode margins.
fn loss_descent(shared: &Shared) -> Verdict {
    let runs: Vec<&RunStats> = shared.suite_runs.iter().chain(&shared.fixture_runs).collect();
    let margins: BTreeMap<&str, f64> = LOSS_MARGINS.into_iter().collect();
    let mut worst: BTreeMap<(String, &str), f64> = BTreeMap::new();
    let mut failures = 0;
    for r in &runs {
        let rel = (r.initial - r.last) / r.initial.abs().max(1e-12);
        if !(r.last < r.initial) || rel < margins[r.mode.as_str()] {
            failures += 1;
        }
        let w = worst.entry((r.mode.clone(), r.source)).or_insert(f64::INFINITY);
        *w = w.min(rel);
    }
    let summary: Vec<String> = worst.iter().map(|((m, s), v)| format!("{m}/{s} {v:.4}")).collect();
    verdict(
        failures == 0 && !shared.fixture_runs.is_empty(),
        format!("{} runs, {failures} below margin; smallest relative decrease: {}", runs.len(), summary.join(", ")),
    )
}

// 8. FID sanity.
fn fid_sanity() -> Verdict {
    let mut rng = stream_rng(8, "fid", 0);
    let mut sample = |n: usize, mean: &[f64]| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| mean.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)).collect())
            .collect()
    };
    let a = sample(500, &[0.0; 4]);
    let self_fid = fid(&a, &a).unwrap();
    let m = [0.8, -0.6, 0.5, 0.3];
    let expected: f64 = m.iter().map(|v| v * v).sum();
    let x = sample(10_000, &[0.0; 4]);
    let y = sample(10_000, &m);
    let offset = fid(&x, &y).unwrap();
    let rel = (offset - expected).abs() / expected;
    verdict(
        self_fid.abs() <= 1e-6 && rel <= 0.05,
        format!("fid(A,A) = {self_fid:.2e}; offset check {offset:.4} vs {expected:.4} ({:.2}% off, limit 5%)", 100.0 * rel),
    )
}

// 9. Mock verification service: protected pairs score above clean pairs.
fn service_round_trip(shared: &Shared) -> Verdict {
    let fx = shared.fixture.as_ref().expect("criterion 6 fixture outputs");
    let zoo = common::zoo();
    let addr: SocketAddr = "127.0.0.1:0".parse().unwrap();
    let server = MockServer::start(zoo.embedder(DEFAULT_HOLDOUT).unwrap(), addr).unwrap();
    let client = HttpVerificationClient::new(&server.url(), ClientOptions::default()).unwrap();
    let load_dir = |p: &Path| -> BTreeMap<String, ImageTensor> {
        list_images(p).unwrap().into_iter().map(|(k, v)| (k, load_image(v).unwrap())).collect()
    };
    let sources = load_dir(&fx.root.join("sources"));
    let targets = load_dir(&fx.root.join("targets"));
    let protected = load_dir(&fx.protected["age-ftm"]);
    fn pairs<'a>(
        set: &'a BTreeMap<String, ImageTensor>,
        targets: &'a BTreeMap<String, ImageTensor>,
    ) -> Vec<(&'a ImageTensor, &'a ImageTensor)> {
        set.iter().map(|(k, v)| (v, &targets[k])).collect()
    }
    let c = &client as &dyn VerificationServiceClient;
    let clean = mean_api_confidence(c, &pairs(&sources, &targets), 4).unwrap();
    let prot = mean_api_confidence(c, &pairs(&protected, &targets), 4).unwrap();
    server.stop();
    verdict(
        prot > clean,
        format!("POST /verify on {} pairs: mean confidence clean {clean:.2}, age-ftm {prot:.2}", protected.len()),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else if path.file_name().unwrap() != TIMINGS_FILE {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

// 10. Two identical protect runs give identical output trees.
fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let opts = FixtureOptions { pairs: 6, impostor_ids: 4, impostor_pairs: 10, seed: 1234, ..FixtureOptions::default() };
    let config = write_fixture_set(dir.path(), &opts).unwrap();
    let zoo = common::zoo();
    let loaded = with_overrides(&config, &[]);
    let first = cmd_protect(&loaded, &zoo).unwrap();
    let a = snapshot(&first.output_dir);
    let second = cmd_protect(&with_overrides(&config, &[]), &common::zoo()).unwrap();
    let b = snapshot(&second.output_dir);
    let differing = a.keys().chain(b.keys()).filter(|k| a.get(*k) != b.get(*k)).count();
    verdict(
        a == b && a.len() > 3 * opts.pairs,
        format!("{} files compared ({} mode), {differing} differ", a.len(), loaded.config.attack.mode),
    )
}

fn main() {
    let names = [
        "mask restriction",
        "budget and range",
        "gradient correctness",
        "identity-generator equivalence",
        "quantile calibration",
        "attack effectiveness ordering",
        "loss descent",
        "FID sanity",
        "mock service round trip",
        "determinism",
    ];
    let mut shared = Shared::default();
    let mut results: BTreeMap<usize, Verdict> = BTreeMap::new();
    let order = [3, 4, 5, 8, 1, 6, 2, 7, 9, 10];
    for n in order {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| match n {
            1 => mask_restriction(&mut shared),
            2 => budgets(&shared),
            3 => gradient_check(),
            4 => identity_equivalence(),
            5 => calibration(),
            6 => effectiveness(&mut shared),
            7 => loss_descent(&shared),
            8 => fid_sanity(),
            9 => service_round_trip(&shared),
            10 => determinism(),
            _ => unreachable!(),
        }));
        let v = outcome.unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            verdict(false, format!("aborted: {msg}"))
        });
        eprintln!("criterion {n} finished in {:.1} s", started.elapsed().as_secs_f64());
        results.insert(n, v);
    }
    let mut failed = 0;
    for (n, v) in &results {
        if !v.pass {
            failed += 1;
        }
        println!("{} criterion {n:>2} {}: {}", if v.pass { "PASS" } else { "FAIL" }, names[n - 1], v.detail);
    }
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
