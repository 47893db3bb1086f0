//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Criteria 5 and 10 need the UCR AbnormalHeartbeat files; point
//! `KANAE_UCR_DIR` at them. Without the data those lines print FAIL marked
//! "not evaluated" and do not change the exit status; any evaluated FAIL
//! exits 1.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kanae::cli::bench_run_config;
use kanae::config::RunConfig;
use kanae::data::{spike_fixture, synthetic_heartbeats, ucr_paths_from_env, Dataset, NormStats};
use kanae::kan::{KanConv1d, KanLinear};
use kanae::models::{build, expected_param_count, Family, ModelSpec};
use kanae::nn::{Ctx, Layer, Tensor};
use kanae::optim::{per_sample_losses, train, Objective, TrainConfig};
use kanae::splines::SplineGrid;
use kanae::suite::{gradcheck_suite, SuiteOptions};
use kanae::tasks::metrics::{auc, median};
use kanae::tasks::timing::{time_linear_pair, TimingOptions};
use kanae::tasks::{run, Task, TaskReport, TaskSettings};

enum Verdict {
    Pass(String),
    Fail(String),
    NotEvaluated(String),
}

use Verdict::*;

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn c1_gradients() -> Verdict {
    let entries = match gradcheck_suite(SuiteOptions::default()) {
        Ok(e) => e,
        Err(e) => return Fail(e.to_string()),
    };
    let failed: Vec<&str> = entries.iter().filter(|e| !e.report.passed).map(|e| e.layer_type.as_str()).collect();
    let worst = |prefix: bool| {
        entries
            .iter()
            .filter(|e| e.layer_type.starts_with("model_") == prefix)
            .map(|e| e.report.max_rel_error)
            .fold(0.0, f64::max)
    };
    verdict(
        failed.is_empty(),
        format!(
            "{} checks, worst layer rel {:.1e} (< 1e-5), worst model rel {:.1e} (< 1e-4){}",
            entries.len(),
            worst(false),
            worst(true),
            if failed.is_empty() { String::new() } else { format!(", failed: {failed:?}") }
        ),
    )
}

fn c2_splines() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut unity, mut deriv) = (0.0f64, 0.0f64);
    let mut support_violations = 0;
    for (k, g) in [(2, 1), (4, 5), (4, 12)] {
        let grid = SplineGrid::new(k, g, -2.0, 2.0).unwrap();
        let knots = grid.knots().to_vec();
        let mut n = 0;
        while n < 1000 {
            let x: f64 = rng.random_range(-2.0..2.0);
            // Degree-1 splines have kinks at knots; keep the difference stencil off them.
            if knots.iter().any(|t| (x - t).abs() < 1e-4) {
                continue;
            }
            n += 1;
            let b = grid.basis_eval(x);
            unity = unity.max((b.iter().sum::<f64>() - 1.0).abs());
            for (i, v) in b.iter().enumerate() {
                let inside = knots[i] <= x && x < knots[i + k];
                if (*v != 0.0 && !inside) || *v < 0.0 {
                    support_violations += 1;
                }
            }
            if b.iter().filter(|v| **v != 0.0).count() > k {
                support_violations += 1;
            }
            let h = 1e-6;
            let (bp, bm) = (grid.basis_eval(x + h), grid.basis_eval(x - h));
            for (i, d) in grid.basis_derivative(x).iter().enumerate() {
                deriv = deriv.max((d - (bp[i] - bm[i]) / (2.0 * h)).abs());
            }
        }
    }
    verdict(
        unity < 1e-9 && deriv < 1e-5 && support_violations == 0,
        format!("unity err {unity:.1e}, derivative err {deriv:.1e}, support violations {support_violations}"),
    )
}

fn c3_reductions() -> Verdict {
    // Width-one KAN conv against a KAN dense layer applied at every position.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = SplineGrid::new(4, 5, -2.0, 2.0).unwrap();
    let (ci, co, len, batch) = (3, 4, 11, 2);
    let mut conv = KanConv1d::new(ci, co, 1, 1, 0, grid.clone(), &mut rng).unwrap();
    conv.visit_params_mut("", &mut |_, p| {
        p.value = Tensor::normal(p.value.shape(), 0.7, &mut rng);
    });
    let mut parts = Vec::new();
    conv.visit_params("", &mut |_, p| parts.push(p.value.clone()));
    let nb = grid.num_basis();
    let mut dense = KanLinear::from_parts(
        grid,
        parts[0].clone().reshape(&[co, ci, nb]).unwrap(),
        parts[1].clone().reshape(&[co, ci]).unwrap(),
        parts[2].clone().reshape(&[co, ci]).unwrap(),
    )
    .unwrap();
    let x = Tensor::normal(&[batch, ci, len], 1.5, &mut rng);
    let yc = conv.forward(&x, &mut Ctx::eval()).unwrap();
    let rows: Vec<Vec<f64>> = (0..batch * len)
        .map(|r| (0..ci).map(|c| x.data()[((r / len) * ci + c) * len + r % len]).collect())
        .collect();
    let yd = dense.forward(&Tensor::from_rows(&rows).unwrap(), &mut Ctx::eval()).unwrap();
    let conv_exact = (0..batch * len).all(|r| (0..co).all(|o| yc.data()[((r / len) * co + o) * len + r % len] == yd.data()[r * co + o]));

    let data = Dataset::from_raw(synthetic_heartbeats(8, 8, 187, 1), synthetic_heartbeats(6, 6, 187, 2)).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let zero = TaskSettings {
        noise_sigma: 0.0,
        mask_ratio: 0.0,
        ..TaskSettings::default()
    };
    let mut mismatched = Vec::new();
    for family in Family::ALL {
        let spec = ModelSpec::new(family);
        let base = run(Task::Reconstruction, &spec, &cfg, &TaskSettings::default(), &data).unwrap().report;
        for task in [Task::Denoising, Task::Inpainting] {
            let r = run(task, &spec, &cfg, &zero, &data).unwrap().report;
            if r.epoch_loss != base.epoch_loss {
                mismatched.push(format!("{task}/{family}"));
            }
        }
    }
    verdict(
        conv_exact && mismatched.is_empty(),
        format!(
            "kan conv w=1 exact: {conv_exact}; sigma=0 and ratio=0 traces bitwise equal for all families: {}",
            if mismatched.is_empty() { "yes".to_string() } else { format!("no {mismatched:?}") }
        ),
    )
}

fn c4_param_counts() -> Verdict {
    let mut counts = Vec::new();
    let mut formula_ok = true;
    for family in Family::ALL {
        let spec = ModelSpec::new(family);
        let n = build(&spec, 0).unwrap().param_count();
        formula_ok &= expected_param_count(&spec).unwrap() == n;
        counts.push(n);
    }
    let [ae, kae, cae, kcae] = counts[..] else { unreachable!() };
    let ok = ae > 8_000_000
        && (3_000_000..=5_000_000).contains(&kae)
        && (1_100_000..=1_900_000).contains(&cae)
        && kcae < cae
        && formula_ok;
    verdict(ok, format!("AE {ae}, KAE {kae}, CAE {cae}, KCAE {kcae}; closed form matches: {formula_ok}"))
}

fn c5_benchmark() -> Verdict {
    let Some((train_path, test_path)) = ucr_paths_from_env() else {
        return NotEvaluated("KANAE_UCR_DIR not set; the AbnormalHeartbeat files are required".into());
    };
    let data = match Dataset::load(&train_path, &test_path) {
        Ok(d) => d,
        Err(e) => return Fail(e.to_string()),
    };
    let base = RunConfig {
        train_path: Some(train_path),
        test_path: Some(test_path),
        ..RunConfig::default()
    };
    let runs: Vec<RunConfig> = Family::ALL
        .iter()
        .flat_map(|&f| (0..5).map(move |s| (f, s)))
        .map(|(f, s)| bench_run_config(&base, Task::Reconstruction, f, s))
        .collect();
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results = std::sync::Mutex::new(Vec::new());
    let started = Instant::now();
    std::thread::scope(|s| {
        for _ in 0..jobs.min(runs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                let Some(c) = runs.get(i) else { break };
                let r = run(c.task, &c.model, &c.train, &c.settings, &data).map(|o| o.report);
                results.lock().unwrap().push(r);
            });
        }
    });
    let minutes = started.elapsed().as_secs_f64() / 60.0;
    let reports: Vec<TaskReport> = match results.into_inner().unwrap().into_iter().collect() {
        Ok(r) => r,
        Err(e) => return Fail(e.to_string()),
    };
    let med = |f: Family| median(&reports.iter().filter(|r| r.family == f).map(|r| r.test_mse).collect::<Vec<_>>());
    let [ae, kae, cae, kcae] = Family::ALL.map(med);
    let in_band = [ae, kae, cae, kcae].iter().all(|m| (0.03..=0.5).contains(m));
    verdict(
        kcae < cae && kcae < kae && in_band && minutes < 30.0,
        format!("median test MSE AE {ae:.4}, KAE {kae:.4}, CAE {cae:.4}, KCAE {kcae:.4}; sweep {minutes:.1} min on {jobs} threads"),
    )
}

fn c6_overfit() -> Verdict {
    let raw = synthetic_heartbeats(4, 4, 187, 11);
    let stats = NormStats::fit(&raw).unwrap();
    let batch: Vec<Vec<f64>> = stats.apply(&raw).into_iter().map(|s| s.values).collect();
    let cfg = TrainConfig {
        epochs: 500,
        batch_size: 8,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let started = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for family in Family::ALL {
        let spec = ModelSpec {
            dropout: 0.0,
            ..ModelSpec::new(family)
        };
        let mut model = build(&spec, 0).unwrap();
        let trace = train(&mut model, &batch, &cfg, Objective::Mse, &|_, _, _| None).unwrap();
        let eval = per_sample_losses(&mut model, &batch, &batch, 8).unwrap().iter().sum::<f64>() / 8.0;
        let first = trace.epoch_loss.iter().position(|l| *l < 1e-2);
        ok &= first.is_some();
        parts.push(match first {
            Some(e) => format!("{family} <1e-2 at epoch {} (eval {eval:.1e})", e + 1),
            None => format!("{family} never <1e-2 (final {:.1e})", trace.epoch_loss[499]),
        });
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(ok && secs < 180.0, format!("{}; dropout off; {secs:.0} s", parts.join(", ")))
}

fn pairwise_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &p) in positive.iter().enumerate() {
        for (j, &q) in positive.iter().enumerate() {
            if p && !q {
                pairs += 1.0;
                wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
    }
    wins / pairs
}

fn c7_anomaly() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(2..300);
        let mut positive: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        positive[0] = true;
        positive[1] = false;
        // Coarse scores force ties.
        let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0.0..1.0f64) * 20.0).round() / 20.0).collect();
        worst = worst.max((auc(&scores, &positive).unwrap() - pairwise_auc(&scores, &positive)).abs());
    }

    let (train_set, test_set) = spike_fixture(60, 100, 100, 187, 1.0, 7);
    let data = Dataset::from_raw(train_set, test_set).unwrap();
    let cfg = TrainConfig {
        epochs: 100,
        ..TrainConfig::default()
    };
    let out = run(Task::Anomaly, &ModelSpec::new(Family::Kcae), &cfg, &TaskSettings::default(), &data);
    let spike_auc = match out {
        Ok(o) => o.report.anomaly.map_or(f64::NAN, |a| a.auc),
        Err(e) => return Fail(e.to_string()),
    };
    verdict(
        worst < 1e-12 && spike_auc > 0.9,
        format!("max |AUC - pairwise oracle| over 50 fixtures {worst:.1e}; spike fixture AUC with KCAE {spike_auc:.4}"),
    )
}

fn c8_timing() -> Verdict {
    match time_linear_pair(256, &TimingOptions::default()) {
        Ok(r) => verdict(
            r.ratio > 1.0,
            format!(
                "width 256: KAN-linear {:.1} us, linear {:.1} us, ratio {:.1}",
                r.kan_seconds * 1e6,
                r.standard_seconds * 1e6,
                r.ratio
            ),
        ),
        Err(e) => Fail(e.to_string()),
    }
}

fn c9_determinism() -> Verdict {
    let data = Dataset::from_raw(synthetic_heartbeats(10, 10, 64, 1), synthetic_heartbeats(8, 8, 64, 2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    let mut count = 0;
    for task in Task::ALL {
        for family in Family::ALL {
            let mut spec = ModelSpec::new(family);
            spec.input_length = 64;
            spec.hidden = vec![32];
            spec.channels = vec![4, 8];
            spec.latent_dim = 8;
            spec.variational = task == Task::Generation;
            let cfg = TrainConfig {
                epochs: 3,
                seed: 9,
                ..TrainConfig::default()
            };
            let mut fields = Vec::new();
            for rep in 0..2 {
                let out = run(task, &spec, &cfg, &TaskSettings::default(), &data).unwrap();
                let d = dir.path().join(format!("{task}-{family}-{rep}"));
                kanae::tasks::write_artifacts(&d, &out).unwrap();
                let text = std::fs::read_to_string(d.join("report.json")).unwrap();
                let r: TaskReport = serde_json::from_str(&text).unwrap();
                fields.push(serde_json::to_string(&r.loss_fields()).unwrap());
            }
            count += 1;
            if fields[0] != fields[1] {
                differing.push(format!("{task}/{family}"));
            }
        }
    }
    verdict(
        differing.is_empty(),
        format!("{count} (task, family) pairs run twice; report.json loss fields differ for {differing:?}"),
    )
}

fn c10_loader() -> Verdict {
    let Some((train_path, test_path)) = ucr_paths_from_env() else {
        return NotEvaluated("KANAE_UCR_DIR not set; the AbnormalHeartbeat files are required".into());
    };
    let data = match Dataset::load(&train_path, &test_path) {
        Ok(d) => d,
        Err(e) => return Fail(e.to_string()),
    };
    let mut labels = std::collections::BTreeMap::new();
    for s in &data.train {
        *labels.entry(s.label).or_insert(0usize) += 1;
    }
    let balanced = labels.len() == 2 && labels.values().all(|&c| c == 50);
    let configured = ModelSpec::new(Family::Kcae).input_length;
    verdict(
        data.train.len() == 100 && balanced && data.test.len() == 1089,
        format!(
            "train {} {:?}, test {}; series length {} vs configured {configured}{}",
            data.train.len(),
            labels,
            data.test.len(),
            data.observed_length,
            if data.observed_length == configured { "" } else { " (mismatch, reported)" }
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("gradient correctness", c1_gradients),
        ("spline properties", c2_splines),
        ("structural reductions", c3_reductions),
        ("parameter counts", c4_param_counts),
        ("benchmark ordering", c5_benchmark),
        ("overfit smoke test", c6_overfit),
        ("anomaly AUC oracle", c7_anomaly),
        ("timing ratio", c8_timing),
        ("determinism", c9_determinism),
        ("loader fidelity", c10_loader),
    ];
    let (mut failed, mut unevaluated) = (0, 0);
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let v = check();
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match v {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            NotEvaluated(d) => {
                unevaluated += 1;
                ("FAIL", format!("not evaluated: {d}"))
            }
        };
        println!("criterion {:>2} {name}: {tag} ({detail}) [{secs:.1} s]", i + 1);
    }
    println!(
        "{} passed, {failed} failed, {unevaluated} not evaluated",
        criteria.len() - failed - unevaluated
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
