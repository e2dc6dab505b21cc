//! Fixtures shared by the benchmarks.

use bombieri_core::{fibonacci_points, BombieriPolynomial, Complex64, MultiplicityArray};

/// Simple Fibonacci nodes with `⌈density·k⌉` points.
pub fn fibonacci_array(k: usize, density: f64) -> MultiplicityArray {
    let n = (density * k as f64).ceil() as usize;
    MultiplicityArray::uniform(k, &fibonacci_points(n), 1).expect("valid array")
}

/// A fixed polynomial with slowly varying coordinates.
pub fn test_poly(k: usize) -> BombieriPolynomial {
    let coords = (0..=k)
        .map(|j| Complex64::from_polar(1.0 / (1.0 + j as f64).sqrt(), 0.7 * j as f64))
        .collect();
    BombieriPolynomial::new(coords).expect("nonempty")
}
