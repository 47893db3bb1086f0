//! Print the cubic B-spline basis on the default grid at a few points,
//! with the partition-of-unity sum and the derivative of a random spline.
//!
//! cargo run --example spline_basis

use kanae::splines::SplineGrid;

fn main() -> kanae::Result<()> {
    let grid = SplineGrid::new(4, 5, -2.0, 2.0)?;
    println!("order {}, intervals {}, basis {}", grid.order(), grid.grid_size(), grid.num_basis());
    println!("knots {:?}", grid.knots());
    let coeffs: Vec<f64> = (0..grid.num_basis()).map(|i| (i as f64 * 0.7).sin()).collect();
    for x in [-2.5, -2.0, -1.3, 0.0, 0.55, 1.99, 3.0] {
        let b = grid.basis_eval(x);
        let shown: Vec<String> = b.iter().map(|v| format!("{v:.3}")).collect();
        println!(
            "x={x:>5}: [{}] sum {:.15} s(x) {:.4} s'(x) {:.4}",
            shown.join(" "),
            b.iter().sum::<f64>(),
            grid.spline_eval(&coeffs, x)?,
            grid.spline_derivative(&coeffs, x)?
        );
    }
    Ok(())
}
