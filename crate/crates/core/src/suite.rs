//! Gradient-check suite: every layer type once, then each full default
//! model, on seeded batches of two.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::kan::{KanConv1d, KanLinear};
use crate::models::{build, Family, ModelSpec};
use crate::nn::{gradcheck, BatchNorm1d, Conv1d, ConvTranspose1d, GradcheckOptions, GradcheckReport, Layer, Linear, Tensor};
use crate::splines::{GridParams, SplineGrid};

pub const LAYER_TOLERANCE: f64 = 1e-5;
pub const MODEL_TOLERANCE: f64 = 1e-4;
/// Checked entries per full model (parameters and input together).
pub const MODEL_BUDGET: usize = 400;

#[derive(Debug, Clone, Copy, Default)]
pub struct SuiteOptions {
    /// Test hook: corrupt one analytic gradient in every check.
    pub corrupt_analytic: bool,
    /// Check scaled-down models instead of the default architectures.
    pub small_models: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub layer_type: String,
    pub report: GradcheckReport,
    pub seconds: f64,
}

/// Move running statistics away from (0, 1) so evaluation-mode batch norm
/// is a nontrivial affine map.
fn perturb_buffers(layer: &mut dyn Layer, rng: &mut ChaCha8Rng) {
    layer.visit_buffers_mut("", &mut |name, t| {
        let v = Tensor::uniform(t.shape(), 0.3, rng);
        *t = if name.ends_with("running_var") { v.map(|x| x + 1.0) } else { v };
    });
}

fn small_spec(family: Family) -> ModelSpec {
    let mut s = ModelSpec::new(family);
    s.input_length = 40;
    s.latent_dim = 6;
    s.hidden = vec![24];
    s.channels = vec![3, 5];
    s
}

pub fn gradcheck_suite(opts: SuiteOptions) -> Result<Vec<SuiteEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let grid = SplineGrid::try_from(GridParams::default())?;
    let layer_opts = GradcheckOptions {
        corrupt_analytic: opts.corrupt_analytic,
        ..GradcheckOptions::exhaustive(LAYER_TOLERANCE)
    };
    let model_opts = GradcheckOptions {
        corrupt_analytic: opts.corrupt_analytic,
        ..GradcheckOptions::sampled(MODEL_TOLERANCE, MODEL_BUDGET)
    };

    let mut bn = BatchNorm1d::new(4);
    perturb_buffers(&mut bn, &mut rng);
    let mut cases: Vec<(String, Box<dyn Layer>, Vec<usize>, GradcheckOptions)> = vec![
        ("linear".into(), Box::new(Linear::new(4, 3, &mut rng)?), vec![2, 4], layer_opts.clone()),
        ("conv1d".into(), Box::new(Conv1d::new(2, 3, 3, 2, 1, &mut rng)?), vec![2, 2, 9], layer_opts.clone()),
        (
            "conv_transpose1d".into(),
            Box::new(ConvTranspose1d::new(3, 2, 3, 2, 1, 1, &mut rng)?),
            vec![2, 3, 5],
            layer_opts.clone(),
        ),
        ("batchnorm".into(), Box::new(bn), vec![2, 4, 3], layer_opts.clone()),
        (
            "kan_linear".into(),
            Box::new(KanLinear::new(4, 3, grid.clone(), &mut rng)?),
            vec![2, 4],
            layer_opts.clone(),
        ),
        (
            "kan_conv1d".into(),
            Box::new(KanConv1d::new(2, 2, 3, 1, 1, grid, &mut rng)?),
            vec![2, 2, 8],
            layer_opts,
        ),
    ];
    for family in Family::ALL {
        let spec = if opts.small_models { small_spec(family) } else { ModelSpec::new(family) };
        let mut model = build(&spec, 1)?;
        perturb_buffers(&mut model, &mut rng);
        let n = spec.input_length;
        cases.push((format!("model_{}", family.tag()), Box::new(model), vec![2, n], model_opts.clone()));
    }

    let mut out = Vec::new();
    for (label, mut layer, shape, o) in cases {
        let x = Tensor::normal(&shape, 0.8, &mut rng);
        let started = std::time::Instant::now();
        let report = gradcheck(&label, layer.as_mut(), &x, &o)?;
        out.push(SuiteEntry {
            layer_type: label,
            report,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes_and_corruption_fails() {
        let ok = gradcheck_suite(SuiteOptions {
            small_models: true,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(ok.len(), 10);
        for e in &ok {
            assert!(e.report.passed, "{}: {:?}", e.layer_type, e.report.worst.first());
        }
        let bad = gradcheck_suite(SuiteOptions {
            small_models: true,
            corrupt_analytic: true,
        })
        .unwrap();
        assert!(bad.iter().all(|e| !e.report.passed));
    }
}
