//! Central differences with Richardson extrapolation, and polynomial
//! extrapolation to zero of a sequence in a small parameter.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

/// Default base step `ε^{1/4}·max(1, |x|)`.
pub fn default_step(x: f64) -> f64 {
    f64::EPSILON.powf(0.25) * x.abs().max(1.0)
}

/// `∂f/∂x_index` (or the second derivative) at `x` with the default step.
pub fn fd_partial<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], index: usize, order: Order) -> f64 {
    fd_partial_with_step(f, x, index, order, default_step(x[index]))
}

/// Richardson-extrapolated central difference from steps `h` and `h/2`;
/// the leading error is O(h⁴).
pub fn fd_partial_with_step<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], index: usize, order: Order, h: f64) -> f64 {
    assert!(index < x.len(), "fd_partial index out of range");
    let mut p = x.to_vec();
    let x0 = x[index];
    let f0 = if order == Order::Second { f(x) } else { 0.0 };
    let mut central = |h: f64| {
        p[index] = x0 + h;
        let fp = f(&p);
        p[index] = x0 - h;
        let fm = f(&p);
        p[index] = x0;
        match order {
            Order::First => (fp - fm) / (2.0 * h),
            Order::Second => (fp - 2.0 * f0 + fm) / (h * h),
        }
    };
    let coarse = central(h);
    let fine = central(0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

/// Scalar convenience wrapper.
pub fn derivative<F: Fn(f64) -> f64>(f: F, x: f64, order: Order) -> f64 {
    fd_partial(|v: &[f64]| f(v[0]), &[x], 0, order)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolated {
    pub value: f64,
    /// Difference between the two highest-order extrapolants.
    pub spread: f64,
}

/// Neville extrapolation to `x = 0` of samples `ys` taken at `xs`, treating
/// `y(x)` as a polynomial in `x`. Pass `x = λ²` for even expansions.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> Extrapolated {
    assert_eq!(xs.len(), ys.len());
    assert!(!xs.is_empty());
    let n = xs.len();
    // table[j] after pass m holds the extrapolant through points j..=j+m
    let mut table = ys.to_vec();
    let mut prev_top = table[0];
    let mut top = table[0];
    for m in 1..n {
        for j in 0..n - m {
            let (xa, xb) = (xs[j], xs[j + m]);
            table[j] = (xa * table[j + 1] - xb * table[j]) / (xa - xb);
        }
        prev_top = top;
        top = table[0];
    }
    let spread = if n == 1 { f64::INFINITY } else { (top - prev_top).abs() };
    Extrapolated { value: top, spread }
}
