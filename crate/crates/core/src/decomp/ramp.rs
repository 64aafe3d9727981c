//! One-dimensional smooth ramp from 0 to 1 over `[0, δ]`.
//!
//! The piecewise-linear ramp rising from `a` to `δ − a`, `a = pδ/(2(p+2))`, is
//! convolved with `2p` centred boxes of width `δ/(2(p+2))` (equivalently `p`
//! hats of width `δ/(p+2)`). The result is a piecewise polynomial of degree
//! `2p + 1`, `C^{2p}`, exactly 0 for `s ≤ 0` and exactly 1 for `s ≥ δ`, and
//! satisfies `g(s) + g(δ − s) = 1`.

/// Smooth ramp of width `delta` and smoothing order `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothRamp {
    pub delta: f64,
    pub p: usize,
    a: f64,
    w: f64,
    m: usize,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

impl SmoothRamp {
    pub fn new(delta: f64, p: usize) -> Self {
        assert!(delta > 0.0 && p >= 1, "ramp needs delta > 0 and p >= 1");
        let m = 2 * p;
        let w = delta / (2.0 * (p as f64 + 2.0));
        Self {
            delta,
            p,
            a: 0.5 * m as f64 * w,
            w,
            m,
        }
    }

    /// `d`-th derivative of the ramp `s_+` smoothed by the box kernel (centred).
    fn smoothed(&self, s: f64, d: usize) -> f64 {
        if s <= -self.a {
            return 0.0;
        }
        if s >= self.a {
            return match d {
                0 => s,
                1 => 1.0,
                _ => 0.0,
            };
        }
        let m = self.m;
        if d > m + 1 {
            return 0.0;
        }
        let e = m + 1 - d;
        let mut acc = 0.0;
        for j in 0..=m {
            let t = s - (-self.a + j as f64 * self.w);
            if t > 0.0 {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * binomial(m, j) * t.powi(e as i32);
            }
        }
        acc / (factorial(e) * self.w.powi(m as i32))
    }

    /// `g^{(d)}(s)`.
    pub fn derivative(&self, s: f64, d: usize) -> f64 {
        let slope = 1.0 / (self.delta - 2.0 * self.a);
        slope * (self.smoothed(s - self.a, d) - self.smoothed(s - (self.delta - self.a), d))
    }

    pub fn value(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else if s >= self.delta {
            1.0
        } else {
            self.derivative(s, 0).clamp(0.0, 1.0)
        }
    }

    /// Highest derivative order that is bounded (piecewise continuous).
    pub fn max_derivative(&self) -> usize {
        self.m + 1
    }
}
