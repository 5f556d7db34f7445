//! Exponential-quadratic approximation of the Gaussian tail.
//!
//! `cargo run --example q_fit`

use vlc_noma::analytic::{fit_q_exp, fit_q_exp_least_squares, q_function, FitGrid, QExpFit};

fn main() -> vlc_noma::Result<()> {
    let std = QExpFit::standard();
    let ls = fit_q_exp_least_squares(FitGrid::new(0.0, 8.0, 0.01)?)?;
    let minimax = fit_q_exp(FitGrid::new(0.5, 8.0, 0.01)?)?;

    for (name, fit) in [
        ("standard", std),
        ("least squares", &ls),
        ("minimax", &minimax),
    ] {
        let err = fit.rel_error_over((0..=7500).map(|i| 0.5 + 1e-3 * f64::from(i)));
        println!(
            "{name:>14}: a = {:+.6}  b = {:+.6}  c = {:+.6}  max rel error on [0.5, 8] = {:.3}%",
            fit.a,
            fit.b,
            fit.c,
            100.0 * err
        );
    }
    println!();
    println!("{:>4} {:>12} {:>12}", "x", "Q(x)", "fit");
    for x in [0.5, 1.0, 2.0, 4.0, 6.0, 8.0] {
        println!("{x:>4.1} {:>12.5e} {:>12.5e}", q_function(x), std.eval(x));
    }
    Ok(())
}
