//! Empirical convergence orders of the fixed-step integrators on the test
//! equation dx/dt = -x, x(0) = 1, whose solution at t=1 is 1/e.
//!
//!     cargo run --release --example ode_orders

use periodwave::sampler::{integrate, OdeMethod};

fn main() {
    let exact = (-1.0f64).exp();
    println!("{:<10} {:>6} {:>14} {:>8}", "method", "steps", "abs error", "order");
    for method in [OdeMethod::Euler, OdeMethod::Midpoint, OdeMethod::Rk4] {
        let mut prev: Option<f64> = None;
        for steps in [8usize, 16, 32, 64] {
            let out = integrate(|_, x| Ok(vec![-x[0]]), &[1.0], method, steps).unwrap();
            let err = (out[0] - exact).abs();
            let order = prev.map(|p| (p / err).log2());
            match order {
                Some(o) => println!("{method:<10} {steps:>6} {err:>14.3e} {o:>8.2}"),
                None => println!("{method:<10} {steps:>6} {err:>14.3e} {:>8}", "-"),
            }
            prev = Some(err);
        }
    }
}
