//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit status
//! when any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;

use homeostat_core::degradation::{quantize_loihi8, zero_mask, InputPerturbation};
use homeostat_core::experiments::{
    classify_trace, run_degradation_suite, run_toy, AdapterSetup, ClassifierConfig, ConditionSpec,
    StabilityVerdict, SuiteConfig, ToyAdapter, ToyScenario,
};
use homeostat_core::homeostasis::{
    dwam_theta, dwam_weight_update, phi, theta_bio_update, AdapterConfig, AdapterState, RateTracker,
};
use homeostat_core::metrics::{hm_metrics, legacy_fr_metrics, TrialRecord};
use homeostat_core::rng::rng_from_seed;
use homeostat_core::snn::weights::uniform_layer;
use homeostat_core::snn::{Checkpoint, NeuronModel, RandomInit, WeightMatrix};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn toy_trichotomy() -> Outcome {
    let classifier = ClassifierConfig::default();
    let seeds = 0..5u64;
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut none_ok = 0;
    let mut bio_ok = 0;
    let mut dwam_ok = 0;
    for seed in seeds.clone() {
        for adapter in [ToyAdapter::None, ToyAdapter::BioDwam, ToyAdapter::Dwam] {
            let log = match run_toy(&ToyScenario::default().with_adapter(adapter).with_seed(seed)) {
                Ok(l) => l,
                Err(e) => return outcome(false, format!("{} seed {seed}: {e}", adapter.name())),
            };
            let verdict = match classify_trace(&log, &classifier) {
                Ok(v) => v,
                Err(e) => return outcome(false, format!("{} seed {seed}: {e}", adapter.name())),
            };
            let ok = match (adapter, verdict) {
                (ToyAdapter::None, StabilityVerdict::Converged { final_rate, .. }) => {
                    final_rate >= 0.95
                }
                (
                    ToyAdapter::BioDwam,
                    StabilityVerdict::Oscillating {
                        crossings,
                        amplitude,
                    },
                ) => crossings >= 6 && amplitude >= 0.1,
                (ToyAdapter::Dwam, StabilityVerdict::Converged { final_gap, .. }) => {
                    final_gap <= 0.02
                }
                _ => false,
            };
            match adapter {
                ToyAdapter::None => none_ok += ok as usize,
                ToyAdapter::BioDwam => bio_ok += ok as usize,
                ToyAdapter::Dwam => dwam_ok += ok as usize,
            }
            if !ok {
                notes.push(format!(
                    "{} seed {seed} -> {}",
                    adapter.name(),
                    verdict.name()
                ));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let n = seeds.count();
    let pass = none_ok == n && bio_ok == n && dwam_ok == n && elapsed < 10.0;
    let mut detail = format!(
        "none {none_ok}/{n} converged >= 0.95, biodwam {bio_ok}/{n} oscillating, dwam {dwam_ok}/{n} converged |c-theta| <= 0.02, {elapsed:.2}s"
    );
    if !notes.is_empty() {
        notes.dedup();
        detail.push_str(&format!("; unmet: {}", notes.join(", ")));
    }
    outcome(pass, detail)
}

fn worked_metric_example() -> Outcome {
    let rec = |p: usize, c: &str, r: [f64; 4]| TrialRecord::new(p, c, 100, r.to_vec()).unwrap();
    let base = [
        rec(0, "base", [0.3, 0.5, 0.5, 0.7]),
        rec(1, "base", [0.2, 0.5, 0.5, 0.8]),
    ];
    let degraded = [
        rec(0, "d", [0.7, 0.5, 0.5, 0.3]),
        rec(1, "d", [0.8, 0.5, 0.5, 0.2]),
    ];
    let lb = legacy_fr_metrics(&base).unwrap();
    let ld = legacy_fr_metrics(&degraded).unwrap();
    let delta = ld.delta(&lb);
    let hm = hm_metrics(&base, &degraded).unwrap();
    let legacy_zero = delta.fr_m == 0.0 && delta.fr_std_m == 0.0 && delta.fr_std_s == 0.0;
    let hm_ok = (hm.hm_m - 0.25).abs() <= 1e-6 && (hm.hm_std - 0.259808).abs() <= 1e-6;
    outcome(
        legacy_zero && hm_ok,
        format!(
            "legacy deltas ({:e}, {:e}, {:e}), HM_m {:.7}, HM_std {:.7}",
            delta.fr_m, delta.fr_std_m, delta.fr_std_s, hm.hm_m, hm.hm_std
        ),
    )
}

fn ema_exactness() -> Outcome {
    let mut worst: f64 = 0.0;
    for &(c, alpha, start) in &[
        (0.6, 0.5, 0.0),
        (0.9, 0.5, 1.0),
        (0.3, 0.2, 0.5),
        (1.0, 0.9, 0.0),
        (0.0, 0.5, 0.8),
    ] {
        let target = c * c;
        let mut theta_m = start;
        for t in 1..=50 {
            theta_m = theta_bio_update(theta_m, c, alpha);
            let expected = (1.0f64 - alpha).powi(t) * (start - target).abs();
            worst = worst.max(((theta_m - target).abs() - expected).abs());
        }
    }
    // the same recursion as run by an adapter on a neuron that always fires
    let mut state = AdapterState::new(1, AdapterConfig::biodwam());
    let mut post = RateTracker::new(1, 5);
    for t in 1..=50 {
        post.update(&[1]).unwrap();
        state.update_thresholds(&post).unwrap();
        let expected = 0.5f64.powi(t);
        worst = worst.max(((state.theta_m()[0] - 1.0).abs() - expected).abs());
    }
    outcome(
        worst <= 1e-12,
        format!("max deviation from (1-alpha)^t decay {worst:.3e} over 50 steps"),
    )
}

fn fixed_points() -> Outcome {
    let mut failures = Vec::new();

    // constant window: a neuron that always fires, and one that never fires
    let mut state = AdapterState::new(2, AdapterConfig::dwam());
    let mut post = RateTracker::new(2, 5);
    let mut pre = RateTracker::new(3, 5);
    let mut weights =
        WeightMatrix::new(2, 3, vec![0.4, -0.2, 0.7, 0.1, 0.3, -0.5], Vec::new()).unwrap();
    let mut checked = 0;
    for t in 1..=20 {
        post.update(&[1, 0]).unwrap();
        pre.update(&[1, 1, 0]).unwrap();
        let before = weights.clone();
        state.step(&post, &pre, &mut weights).unwrap();
        if t >= 5 {
            checked += 1;
            for i in 0..2 {
                if state.theta()[i].to_bits() != post.rate(i).to_bits() {
                    failures.push(format!(
                        "step {t} neuron {i}: theta {} != c {}",
                        state.theta()[i],
                        post.rate(i)
                    ));
                }
            }
            if weights != before {
                failures.push(format!("step {t}: weights moved with a constant window"));
            }
        }
    }

    // saturated mixing: zeta is large enough that zeta * cv >= 1 whenever the rate moves
    let zeta = 20.0;
    let mut dwam = AdapterState::new(
        1,
        AdapterConfig {
            zeta_cv: zeta,
            ..AdapterConfig::dwam()
        },
    );
    let mut bio = AdapterState::new(1, AdapterConfig::biodwam());
    let mut post = RateTracker::new(1, 5);
    let mut pre = RateTracker::new(2, 5);
    let mut wd = WeightMatrix::filled(1, 2, 0.5);
    let mut wb = wd.clone();
    let mut saturated = 0;
    for (t, s) in [1u8, 0, 0, 1, 0, 1, 1, 0, 0, 0, 1, 0]
        .into_iter()
        .enumerate()
    {
        post.update(&[s]).unwrap();
        pre.update(&[1, 1]).unwrap();
        let window: Vec<f64> = post.window_of(0).collect();
        let mean = window.iter().sum::<f64>() / window.len() as f64;
        let var = window.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / window.len() as f64;
        let cv = var.sqrt() / mean;
        let before_d = wd.clone();
        let before_b = wb.clone();
        dwam.step(&post, &pre, &mut wd).unwrap();
        bio.step(&post, &pre, &mut wb).unwrap();
        let saturated_now = zeta * cv >= 1.0 && post.window_len() >= 5;
        if saturated_now {
            saturated += 1;
        }
        let delta_d: Vec<u64> = wd
            .weights()
            .iter()
            .zip(before_d.weights())
            .map(|(a, b)| (a - b).to_bits())
            .collect();
        let delta_b: Vec<u64> = wb
            .weights()
            .iter()
            .zip(before_b.weights())
            .map(|(a, b)| (a - b).to_bits())
            .collect();
        if saturated_now && delta_d != delta_b {
            failures.push(format!(
                "step {}: DWAM and BioDWAM deltas differ under saturation",
                t + 1
            ));
        }
    }
    if dwam_theta(0.3, 0.9, 0.7, 2.0).to_bits() != 0.3f64.to_bits() {
        failures.push("dwam_theta with zeta*cv >= 1 did not return theta_M".into());
    }

    outcome(
        failures.is_empty() && checked > 0 && saturated >= 6,
        if failures.is_empty() {
            format!("{checked} constant-window steps exact, {saturated} saturated steps bit-equal to BioDWAM")
        } else {
            failures.join("; ")
        },
    )
}

fn sign_suite() -> Outcome {
    let mut rng = rng_from_seed(0xACCE);
    let mut failures = 0usize;

    let mut zero = WeightMatrix::filled(3, 4, 0.0);
    for _ in 0..100 {
        let phis: Vec<f64> = (0..3).map(|_| rng.random_range(-0.25..=0.25)).collect();
        let pre: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        dwam_weight_update(&mut zero, &phis, &pre, 0.01).unwrap();
    }
    let zero_absorbing = zero.weights().iter().all(|&w| w == 0.0);

    let mut w = uniform_layer(3, 4, 1.0, &mut rng);
    let before = w.clone();
    dwam_weight_update(&mut w, &[0.2, -0.1, 0.05], &[0.0; 4], 1.0).unwrap();
    let silent_identity = w == before;

    let cases = 10_000;
    let mut negative_checked = 0;
    for _ in 0..cases {
        let c_post: f64 = rng.random_range(1e-6..=1.0);
        let theta: f64 = rng.random_range(0.0..=1.0);
        let c_pre: f64 = rng.random_range(1e-6..=1.0);
        let w0: f64 = rng.random_range(1e-3..=2.0);
        let psi: f64 = rng.random_range(1e-5..=1e-2);
        let mut m = WeightMatrix::filled(1, 1, w0);
        dwam_weight_update(&mut m, &[phi(c_post, theta)], &[c_pre], psi).unwrap();
        let dw = m.get(0, 0) - w0;
        let want = (c_post - theta).signum() * w0.signum();
        if c_post != theta && dw.signum() != want {
            failures += 1;
        }

        // a negative weight moves by the same |w|-scaled amount
        let mut neg = WeightMatrix::filled(1, 1, -w0);
        dwam_weight_update(&mut neg, &[phi(c_post, theta)], &[c_pre], psi).unwrap();
        let dneg = neg.get(0, 0) + w0;
        let same_sign = c_post == theta || dneg.signum() == (c_post - theta).signum();
        if !same_sign || (dneg - dw).abs() > 1e-9 * dw.abs().max(1e-300) {
            negative_checked += 1;
        }
    }
    let pass = zero_absorbing && silent_identity && failures == 0 && negative_checked == 0;
    outcome(
        pass,
        format!(
            "zero weights absorbing: {zero_absorbing}, silent presynaptic identity: {silent_identity}, \
             sign mismatches {failures}/{cases} (w > 0), |w|-scaling mismatches for w < 0: {negative_checked}"
        ),
    )
}

fn quantizer() -> Outcome {
    let mut rng = rng_from_seed(6);
    let mut worst_ratio: f64 = 0.0;
    let mut problems = Vec::new();
    for k in 0..100u64 {
        let sizes = [
            rng.random_range(1..20),
            rng.random_range(1..20),
            rng.random_range(1..10),
        ];
        let init = RandomInit {
            gain: rng.random_range(0.1..3.0),
            ..RandomInit::default()
        };
        let ck = Checkpoint::random(&sizes, k, &init).unwrap();
        for (l, layer) in ck.layers().iter().enumerate() {
            let layer = zero_mask(layer, 0.2, &mut rng).unwrap();
            let q = quantize_loihi8(&layer);
            let bound = layer.max_abs() / 254.0;
            for (a, b) in layer.weights().iter().zip(q.weights()) {
                let err = (a - b).abs();
                if bound > 0.0 {
                    worst_ratio = worst_ratio.max(err / bound);
                }
                if err > bound {
                    problems.push(format!(
                        "checkpoint {k} layer {l}: error {err:e} > bound {bound:e}"
                    ));
                }
                if *a == 0.0 && *b != 0.0 {
                    problems.push(format!("checkpoint {k} layer {l}: zero not preserved"));
                }
            }
            if quantize_loihi8(&q) != q {
                problems.push(format!("checkpoint {k} layer {l}: not idempotent"));
            }
        }
    }
    problems.truncate(3);
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "100 checkpoints: worst error/bound {worst_ratio:.6}, idempotent, zeros preserved"
            )
        } else {
            problems.join("; ")
        },
    )
}

fn zero_mask_exact() -> Outcome {
    let mut rng = rng_from_seed(7);
    let mut bad = Vec::new();
    for k in 0..100 {
        let rows = rng.random_range(1..40);
        let cols = rng.random_range(1..40);
        let layer = uniform_layer(rows, cols, 1.0, &mut rng);
        let before = layer.weights().iter().filter(|&&w| w == 0.0).count();
        let out = zero_mask(&layer, 0.3, &mut rng).unwrap();
        let zeros = out.weights().iter().filter(|&&w| w == 0.0).count();
        let expected = (0.3 * layer.len() as f64).floor() as usize;
        if before != 0 || zeros != expected {
            bad.push(format!(
                "layer {k} ({rows}x{cols}): {zeros} zeros, expected {expected}"
            ));
        }
    }
    bad.truncate(3);
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            "100 layers, each with exactly floor(0.3 N) zeros".to_string()
        } else {
            bad.join("; ")
        },
    )
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("suite.json");
    std::fs::write(
        &config,
        r#"{
  "layer_sizes": [12, 16, 4],
  "timesteps": 80,
  "trials": 6,
  "bank_size": 4,
  "conditions": [
    { "name": "gn_obs", "input": { "kind": "gaussian_obs", "sigma": 0.5 } },
    { "name": "max_obs", "input": { "kind": "replace_random_dim", "extreme": "max" } },
    { "name": "gn_weights", "weights": { "kind": "gaussian_weights" } },
    { "name": "zero_30", "weights": { "kind": "zero_fraction" } },
    { "name": "loihi", "weights": { "kind": "loihi8_bit" } }
  ],
  "adapters": [
    { "name": "none" },
    { "name": "dwam", "weight_adapter": { "kind": "dwam" } },
    { "name": "bdett-dwam", "weight_adapter": { "kind": "dwam" }, "threshold": { "kind": "bdett" } }
  ],
  "master_seed": 99
}"#,
    )
    .unwrap();
    let checkpoint = tmp.path().join("ck.json");
    Checkpoint::random(&[12, 16, 4], 3, &RandomInit::default())
        .unwrap()
        .save(&checkpoint)
        .unwrap();

    let run = |name: &str, threads: &str| {
        let out = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_homeostat"))
            .args(["suite", "-q", "--emit-plot-data", "--config"])
            .arg(&config)
            .arg("--checkpoint")
            .arg(&checkpoint)
            .arg("--out")
            .arg(&out)
            .env("HOMEOSTAT_THREADS", threads)
            .status()
            .unwrap();
        (status.success(), read_tree(&out))
    };
    let (ok1, a) = run("run1", "1");
    let (ok2, b) = run("run2", "1");
    let (ok3, c) = run("run3", "4");
    let pass = ok1 && ok2 && ok3 && !a.is_empty() && a == b && a == c;
    outcome(
        pass,
        format!(
            "{} artifacts; repeat identical: {}, 1 vs 4 threads identical: {}",
            a.len(),
            a == b,
            a == c
        ),
    )
}

fn homeostasis_direction() -> Outcome {
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let cfg = SuiteConfig {
            layer_sizes: vec![16, 32, 8],
            neuron: NeuronModel::default(),
            timesteps: 200,
            trials: 20,
            bank_size: 10,
            conditions: vec![ConditionSpec {
                name: "gn_obs_0.5".into(),
                input: Some(InputPerturbation::GaussianObs { sigma: 0.5 }),
                weights: None,
            }],
            adapters: vec![
                AdapterSetup::none(),
                AdapterSetup::with_weight_adapter("dwam", AdapterConfig::dwam()),
            ],
            master_seed: seed,
        };
        let ck = Checkpoint::random(&cfg.layer_sizes, seed, &RandomInit::default()).unwrap();
        let out = match run_degradation_suite(&cfg, &ck, None) {
            Ok(o) => o,
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        };
        let hm = |name: &str| out.report.report(name).unwrap().conditions[0].hm_m;
        let (none, dwam) = (hm("none"), hm("dwam"));
        if dwam <= none {
            wins += 1;
        }
        lines.push(format!("{seed}:{:+.2e}", dwam - none));
    }
    outcome(
        wins >= 4,
        format!(
            "DWAM HM_m <= none on {wins}/5 seeds (dwam - none: {})",
            lines.join(" ")
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("toy trichotomy", toy_trichotomy),
        ("worked metric example", worked_metric_example),
        ("EMA exactness", ema_exactness),
        ("adaptive threshold fixed points", fixed_points),
        ("weight update sign and fixed points", sign_suite),
        ("8-bit quantizer", quantizer),
        ("zero mask count", zero_mask_exact),
        ("suite determinism", cli_determinism),
        ("homeostasis direction", homeostasis_direction),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} - {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
