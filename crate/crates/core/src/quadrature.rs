//! Gauss–Legendre rules.

use std::sync::OnceLock;

/// Nodes per composite panel.
pub const PANEL: usize = 16;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [−1,1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "empty Gauss-Legendre rule");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL))
}

/// Composite rule with `panels` equal panels of [`PANEL`] nodes on `[a,b]`.
pub fn composite_nodes(a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = panel_rule();
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * PANEL);
    let mut weights = Vec::with_capacity(panels * PANEL);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(w) {
            nodes.push(lo + 0.5 * h * (xi + 1.0));
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}

/// Panels needed for at least `nodes` nodes.
pub fn panels_for(nodes: usize) -> usize {
    nodes.div_ceil(PANEL).max(1)
}

pub fn integrate_real(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = composite_nodes(a, b, panels);
    x.iter().zip(&w).map(|(xi, wi)| wi * f(*xi)).sum()
}

/// Neumaier-compensated sum, so results do not depend on summation order
/// beyond the last bit.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(PANEL);
        for deg in 0..2 * PANEL {
            let q: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(deg as i32)).sum();
            let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - want).abs() < 1e-14, "degree {deg}: {q} vs {want}");
        }
    }

    #[test]
    fn small_rules() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15 && (w[0] - 1.0).abs() < 1e-15);
        let (x, _) = gauss_legendre(3);
        assert!(x[1].abs() < 1e-15);
    }

    #[test]
    fn composite_oscillatory() {
        let v = integrate_real(|x| (50.0 * x).cos(), 0.0, 1.0, 8);
        assert!((v - 50f64.sin() / 50.0).abs() < 1e-13);
    }

    #[test]
    fn compensated_sum() {
        let mut k = KahanSum::default();
        for x in [1e16, 1.0, -1e16, 1.0] {
            k.add(x);
        }
        assert_eq!(k.value(), 2.0);
    }
}
