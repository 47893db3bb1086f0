use rand::Rng;

use super::{edge_backward, edge_value, init_bank, kan_prefix, smoothness, Edge, EdgeGrad, Point};
use crate::error::{Error, Result};
use crate::nn::activation::Activation;
use crate::nn::layer::{join, missing_cache, Ctx, Layer, Param};
use crate::nn::tensor::Tensor;
use crate::splines::SplineGrid;

/// Dense KAN layer `[batch, in] -> [batch, out]`.
#[derive(Debug, Clone)]
pub struct KanLinear {
    grid: SplineGrid,
    /// `[out, in, B]`
    pub spline_coeffs: Param,
    /// `[out, in]`
    pub base_weights: Param,
    /// `[out, in]`
    pub scales: Param,
    pub node: Activation,
    /// Weight of the coefficient-difference penalty applied by
    /// [`Layer::regularize`]; zero disables it.
    pub smoothness: f64,
    cache: Option<Cache>,
}

#[derive(Debug, Clone)]
struct Cache {
    batch: usize,
    points: Vec<Point>,
    z: Vec<f64>,
    y: Vec<f64>,
}

impl KanLinear {
    pub fn new<R: Rng + ?Sized>(
        in_features: usize,
        out_features: usize,
        grid: SplineGrid,
        rng: &mut R,
    ) -> Result<Self> {
        let (c, b, s) = init_bank(&[out_features, in_features], in_features, &grid, rng)?;
        Self::from_parts(grid, c, b, s)
    }

    pub fn from_parts(grid: SplineGrid, coeffs: Tensor, base: Tensor, scales: Tensor) -> Result<Self> {
        let (out, inp) = match base.shape() {
            [o, i] => (*o, *i),
            s => return Err(Error::dim(format!("kan_linear base weights must be 2-D, got {s:?}"))),
        };
        coeffs.expect_shape(&[out, inp, grid.num_basis()], "kan_linear spline_coeffs")?;
        scales.expect_shape(&[out, inp], "kan_linear scales")?;
        Ok(Self {
            grid,
            spline_coeffs: Param::new(coeffs),
            base_weights: Param::new(base),
            scales: Param::new(scales),
            node: Activation::Identity,
            smoothness: 0.0,
            cache: None,
        })
    }

    pub fn with_node(mut self, node: Activation) -> Self {
        self.node = node;
        self
    }

    pub fn grid(&self) -> &SplineGrid {
        &self.grid
    }

    pub fn in_features(&self) -> usize {
        self.base_weights.value.dim(1)
    }

    pub fn out_features(&self) -> usize {
        self.base_weights.value.dim(0)
    }
}

impl Layer for KanLinear {
    fn kind(&self) -> &'static str {
        "kan_linear"
    }

    fn forward(&mut self, input: &Tensor, _ctx: &mut Ctx) -> Result<Tensor> {
        let (out, inp) = (self.out_features(), self.in_features());
        if input.ndim() != 2 || input.dim(1) != inp {
            return Err(Error::dim(format!(
                "kan_linear expects [batch, {inp}], got {:?}",
                input.shape()
            )));
        }
        let batch = input.dim(0);
        let order = self.grid.order();
        let nb = self.grid.num_basis();
        let points: Vec<Point> = input.data().iter().map(|&x| Point::new(&self.grid, x)).collect();
        let c = self.spline_coeffs.value.data();
        let bw = self.base_weights.value.data();
        let sc = self.scales.value.data();

        let mut z = vec![0.0; batch * out];
        for b in 0..batch {
            let pts = &points[b * inp..][..inp];
            for i in 0..out {
                let mut acc = 0.0;
                for (j, p) in pts.iter().enumerate() {
                    let e = i * inp + j;
                    let edge = Edge {
                        coeffs: &c[e * nb..][..nb],
                        base: bw[e],
                        scale: sc[e],
                    };
                    acc += edge_value(p, &edge, order);
                }
                z[b * out + i] = acc;
            }
        }
        let node = self.node;
        let y: Vec<f64> = z.iter().map(|&v| node.apply(v)).collect();
        let t = Tensor::new(&[batch, out], y.clone())?;
        t.check_finite(self.kind())?;
        self.cache = Some(Cache { batch, points, z, y });
        Ok(t)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or_else(|| missing_cache("kan_linear"))?;
        let (out, inp) = (self.out_features(), self.in_features());
        let batch = cache.batch;
        grad_output.expect_shape(&[batch, out], "kan_linear backward")?;
        let order = self.grid.order();
        let nb = self.grid.num_basis();
        let c = self.spline_coeffs.value.data();
        let bw = self.base_weights.value.data();
        let sc = self.scales.value.data();
        let dc = self.spline_coeffs.grad.data_mut();
        let dbw = self.base_weights.grad.data_mut();
        let dsc = self.scales.grad.data_mut();

        let mut dx = vec![0.0; batch * inp];
        for b in 0..batch {
            let pts = &cache.points[b * inp..][..inp];
            let dxr = &mut dx[b * inp..][..inp];
            for i in 0..out {
                let k = b * out + i;
                let g = grad_output.data()[k] * self.node.grad(cache.z[k], cache.y[k]);
                if g == 0.0 {
                    continue;
                }
                for (j, p) in pts.iter().enumerate() {
                    let e = i * inp + j;
                    let edge = Edge {
                        coeffs: &c[e * nb..][..nb],
                        base: bw[e],
                        scale: sc[e],
                    };
                    let (dbe, dse) = (&mut dbw[e], &mut dsc[e]);
                    let grad = EdgeGrad {
                        coeffs: &mut dc[e * nb..][..nb],
                        base: dbe,
                        scale: dse,
                    };
                    dxr[j] += edge_backward(p, &edge, grad, g, order);
                }
            }
        }
        Tensor::new(&[batch, inp], dx)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input != [self.in_features()] {
            return Err(Error::dim(format!(
                "kan_linear expects [{}] per sample, got {input:?}",
                self.in_features()
            )));
        }
        Ok(vec![self.out_features()])
    }

    fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        let p = kan_prefix(prefix);
        f(&join(&p, "spline_coeffs"), &self.spline_coeffs);
        f(&join(&p, "base_weights"), &self.base_weights);
        f(&join(&p, "scales"), &self.scales);
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        let p = kan_prefix(prefix);
        f(&join(&p, "spline_coeffs"), &mut self.spline_coeffs);
        f(&join(&p, "base_weights"), &mut self.base_weights);
        f(&join(&p, "scales"), &mut self.scales);
    }

    fn visit_grids(&self, prefix: &str, f: &mut dyn FnMut(&str, &SplineGrid)) {
        f(&kan_prefix(prefix), &self.grid);
    }

    fn regularize(&mut self) -> f64 {
        if self.smoothness == 0.0 {
            return 0.0;
        }
        let nb = self.grid.num_basis();
        smoothness(&self.spline_coeffs.value, &mut self.spline_coeffs.grad, nb, self.smoothness)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{gradcheck, GradcheckOptions};
    use crate::nn::layer::zero_grad;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> SplineGrid {
        SplineGrid::new(4, 5, -2.0, 2.0).unwrap()
    }

    fn layer(inp: usize, out: usize, seed: u64) -> KanLinear {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut l = KanLinear::new(inp, out, grid(), &mut rng).unwrap();
        l.scales.value = Tensor::uniform(&[out, inp], 1.0, &mut rng).map(|v| v + 1.0);
        l.spline_coeffs.value = Tensor::normal(l.spline_coeffs.value.shape(), 1.0, &mut rng);
        l
    }

    #[test]
    fn zero_parameters_give_zero() {
        let g = grid();
        let mut l = KanLinear::from_parts(
            g.clone(),
            Tensor::zeros(&[2, 3, g.num_basis()]),
            Tensor::zeros(&[2, 3]),
            Tensor::full(&[2, 3], 1.0),
        )
        .unwrap();
        let x = Tensor::new(&[1, 3], vec![0.5, -3.0, 1.9]).unwrap();
        assert_eq!(l.forward(&x, &mut Ctx::eval()).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn unit_coefficients_give_one() {
        let g = grid();
        let mut l = KanLinear::from_parts(
            g.clone(),
            Tensor::full(&[1, 1, g.num_basis()], 1.0),
            Tensor::zeros(&[1, 1]),
            Tensor::full(&[1, 1], 1.0),
        )
        .unwrap();
        let x = Tensor::new(&[1, 1], vec![0.37]).unwrap();
        let y = l.forward(&x, &mut Ctx::eval()).unwrap();
        assert!((y.data()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_per_edge_oracle() {
        let mut l = layer(3, 2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::normal(&[4, 3], 1.5, &mut rng);
        let y = l.forward(&x, &mut Ctx::eval()).unwrap();
        let g = grid();
        for b in 0..4 {
            for i in 0..2 {
                let mut z = 0.0;
                for j in 0..3 {
                    let xj = x.row(b)[j];
                    let e = i * 3 + j;
                    let c = &l.spline_coeffs.value.data()[e * 8..][..8];
                    let s = g.spline_eval(c, xj).unwrap();
                    let bw = l.base_weights.value.data()[e];
                    let silu = xj / (1.0 + (-xj).exp());
                    z += l.scales.value.data()[e] * (bw * silu + s);
                }
                assert!((y.row(b)[i] - z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_edge_coefficient_gradient() {
        let mut l = layer(1, 1, 3);
        let x = Tensor::new(&[1, 1], vec![0.8]).unwrap();
        l.forward(&x, &mut Ctx::eval()).unwrap();
        let up = 1.7;
        l.backward(&Tensor::new(&[1, 1], vec![up]).unwrap()).unwrap();
        let basis = grid().basis_eval(0.8);
        let s = l.scales.value.data()[0];
        for (g, b) in l.spline_coeffs.grad.data().iter().zip(&basis) {
            assert!((g - up * s * b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_upstream_and_backward_before_forward() {
        let mut l = layer(3, 2, 4);
        assert!(matches!(
            l.backward(&Tensor::zeros(&[1, 2])),
            Err(Error::State(_))
        ));
        let x = Tensor::full(&[2, 3], 0.3);
        l.forward(&x, &mut Ctx::eval()).unwrap();
        let dx = l.backward(&Tensor::zeros(&[2, 2])).unwrap();
        assert_eq!(dx.max_abs(), 0.0);
        let mut total = 0.0;
        l.visit_params("", &mut |_, p| total += p.grad.max_abs());
        assert_eq!(total, 0.0);
    }

    #[test]
    fn clamped_inputs_pass_only_base_gradient() {
        let mut l = layer(1, 1, 5);
        let x = Tensor::new(&[1, 1], vec![3.5]).unwrap();
        l.forward(&x, &mut Ctx::eval()).unwrap();
        let dx = l.backward(&Tensor::new(&[1, 1], vec![1.0]).unwrap()).unwrap();
        let want = l.scales.value.data()[0] * l.base_weights.value.data()[0] * crate::nn::silu_grad(3.5);
        assert!((dx.data()[0] - want).abs() < 1e-14);
    }

    #[test]
    fn gradcheck_all_nodes() {
        for node in [Activation::Identity, Activation::Silu, Activation::Tanh] {
            let mut l = layer(4, 3, 6).with_node(node);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let x = Tensor::normal(&[2, 4], 1.0, &mut rng);
            let rep = gradcheck("kan_linear", &mut l, &x, &GradcheckOptions::exhaustive(1e-5)).unwrap();
            assert!(rep.passed, "{rep:?}");
            assert_eq!(rep.checked, 3 * 4 * 10 + 8);
        }
    }

    #[test]
    fn smoothness_penalty_reaches_gradients() {
        let mut l = layer(2, 2, 8);
        zero_grad(&mut l);
        assert_eq!(l.regularize(), 0.0);
        l.smoothness = 0.5;
        let pen = l.regularize();
        assert!(pen > 0.0);
        assert!(l.spline_coeffs.grad.max_abs() > 0.0);
    }

    #[test]
    fn zero_width_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(KanLinear::new(0, 3, grid(), &mut rng).is_err());
        assert!(KanLinear::new(3, 0, grid(), &mut rng).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn output_is_linear_in_coefficients(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let g = grid();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Tensor::normal(&[3, 4], 1.2, &mut rng);
            let (c1, w1) = (Tensor::normal(&[2, 4, 8], 1.0, &mut rng), Tensor::normal(&[2, 4], 1.0, &mut rng));
            let (c2, w2) = (Tensor::normal(&[2, 4, 8], 1.0, &mut rng), Tensor::normal(&[2, 4], 1.0, &mut rng));
            let s = Tensor::full(&[2, 4], 1.0);
            let run = |c: &Tensor, w: &Tensor| {
                let mut l = KanLinear::from_parts(g.clone(), c.clone(), w.clone(), s.clone()).unwrap();
                l.forward(&x, &mut Ctx::eval()).unwrap()
            };
            let mix = |p: &Tensor, q: &Tensor| {
                Tensor::new(p.shape(), p.data().iter().zip(q.data()).map(|(u, v)| a * u + b * v).collect()).unwrap()
            };
            let y1 = run(&c1, &w1);
            let y2 = run(&c2, &w2);
            let y = run(&mix(&c1, &c2), &mix(&w1, &w2));
            for ((y, y1), y2) in y.data().iter().zip(y1.data()).zip(y2.data()) {
                prop_assert!((y - (a * y1 + b * y2)).abs() < 1e-12);
            }
        }
    }
}
