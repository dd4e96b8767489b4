//! One-dimensional quadrature: fixed-node composite Simpson and adaptive
//! Simpson with user-supplied breakpoints.

/// Composite Simpson rule with `nodes` equispaced nodes (`nodes` odd, ≥ 3).
pub fn composite_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, nodes: usize) -> f64 {
    assert!(nodes >= 3 && nodes % 2 == 1, "Simpson needs an odd node count >= 3");
    let panels = nodes - 1;
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Adaptive Simpson settings.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    /// Absolute tolerance on the whole integral.
    pub tol: f64,
    /// Each piece between breakpoints is first cut into this many panels.
    pub min_panels: usize,
    pub max_depth: u32,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self { tol: 1e-10, min_panels: 8, max_depth: 40 }
    }
}

impl Adaptive {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    pub fn min_panels(mut self, panels: usize) -> Self {
        self.min_panels = panels.max(1);
        self
    }

    /// Integrates `f` over `[a, b]`, splitting at every breakpoint strictly
    /// inside the interval so discontinuities fall on panel edges.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64, breakpoints: &[f64]) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut cuts: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
        cuts.push(a);
        cuts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));

        let total_len = b - a;
        let mut sum = 0.0;
        let mut comp = 0.0;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                continue;
            }
            let panels = self.min_panels;
            let h = (hi - lo) / panels as f64;
            for p in 0..panels {
                let x0 = lo + h * p as f64;
                let x1 = if p + 1 == panels { hi } else { x0 + h };
                let tol = self.tol * (x1 - x0) / total_len;
                let fa = f(x0);
                let fb = f(x1);
                let xm = 0.5 * (x0 + x1);
                let fm = f(xm);
                let whole = (x1 - x0) / 6.0 * (fa + 4.0 * fm + fb);
                let v = recurse(&f, x0, x1, fa, fm, fb, whole, tol, self.max_depth);
                // Kahan summation keeps thousands of panels accurate.
                let y = v - comp;
                let t = sum + y;
                comp = (t - sum) - y;
                sum = t;
            }
        }
        sum
    }
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || !delta.is_finite() {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson with default settings.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breakpoints: &[f64], tol: f64) -> f64 {
    Adaptive::with_tol(tol).integrate(f, a, b, breakpoints)
}
