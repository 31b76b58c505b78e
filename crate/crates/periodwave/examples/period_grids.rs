//! Period reshaping arithmetic: grid shapes, padding, and the middle-block
//! resolution for each period at the training segment length.
//!
//!     cargo run --release --example period_grids

use periodwave::periodify::{deperiodify, periodify};

fn main() -> periodwave::Result<()> {
    let len = 32_768usize;
    let x: Vec<f64> = (0..len).map(|i| (i as f64 * 0.01).sin()).collect();
    println!("signal length {len}");
    println!(
        "{:>6} {:>8} {:>6} {:>8} {:>10}",
        "period", "height", "pad", "padded", "mid (T/64p)"
    );
    for p in [1usize, 2, 3, 5, 7] {
        let g = periodify(&x, p, p * 64)?;
        assert_eq!(deperiodify(&g)?, x);
        println!(
            "{:>6} {:>8} {:>6} {:>8} {:>10}",
            p,
            g.height,
            g.pad,
            g.original_len + g.pad,
            g.height / 64
        );
    }
    println!("roundtrip identity verified for every period");
    Ok(())
}
