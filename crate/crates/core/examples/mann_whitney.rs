//! Exact and large-sample Mann-Whitney U tests on small samples, ties
//! included.

use nailforce::analysis::{mann_whitney_u, UTestMode};

fn main() -> nailforce::Result<()> {
    let cases: [(&str, Vec<f64>, Vec<f64>); 3] = [
        ("separated", vec![1.1, 1.4, 1.2, 1.6, 1.3], vec![2.2, 2.9, 2.4, 2.6, 3.1]),
        ("overlapping", vec![3.0, 5.0, 4.0, 6.0, 2.0, 7.0], vec![4.5, 5.5, 3.5, 6.5, 2.5, 8.0]),
        ("tied", vec![1.0, 2.0, 2.0, 3.0, 3.0], vec![2.0, 3.0, 3.0, 4.0, 4.0, 5.0]),
    ];
    for (name, xs, ys) in &cases {
        let exact = mann_whitney_u(xs, ys, UTestMode::Exact)?;
        let approx = mann_whitney_u(xs, ys, UTestMode::NormalApprox)?;
        println!(
            "{name:>11}: U = {:4.1} (U1 = {:4.1})  exact p = {:.5}  normal p = {:.5}",
            exact.u, exact.u1, exact.p, approx.p
        );
    }
    Ok(())
}
