//! Quadrature helpers: adaptive Simpson integration and cumulative
//! kernel-moment tables used by the likelihood hot path.

use crate::error::{Error, Result};
use crate::model::KernelParams;

/// Adaptive Simpson integration of `f` over `[a, b]`.
///
/// Recursion splits an interval until the Richardson error estimate drops
/// below the local share of `tol` (interpreted relative to the running
/// magnitude, with a small absolute floor).
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(b >= a) {
        return Err(Error::invalid("integration bounds", format!("[{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let scale = whole.abs().max(1e-12);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol * scale, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol || (b - a) < 1e-14 {
        return Ok(left + right + err / 15.0);
    }
    if depth == 0 {
        return Err(Error::Numerical(format!(
            "adaptive quadrature failed to converge on [{a}, {b}] (residual {err:.3e})"
        )));
    }
    let half_tol = 0.5 * tol;
    Ok(simpson_rec(f, a, m, fa, flm, fm, left, half_tol, depth - 1)?
        + simpson_rec(f, m, b, fm, frm, fb, right, half_tol, depth - 1)?)
}

/// Number of cumulative moments tracked by [`KernelMomentTable`].
pub(crate) const N_MOMENTS: usize = 6;

/// Cumulative integrals of `exp(-u/tau) phi(u)` against the weights
/// `{1, cos(w u), sin(w u), u, u cos(w u), u sin(w u)}` on `[0, x]`.
///
/// The time-shift identity
/// `sin(w (t_j + u + c)) = sin(w (t_j + c)) cos(w u) + cos(w (t_j + c)) sin(w u)`
/// turns every per-event integral of `p(s) phi(s - t_j)` into a fixed
/// combination of these six functions evaluated at `x = T - t_j`, so one
/// table per decay constant serves the whole event list. The `u`-weighted
/// moments supply the derivative with respect to `tau`.
///
/// Nodes are dense across the kernel plateau and geometric beyond it; each
/// cell is integrated with Simpson's rule, and queries add a partial-cell
/// Simpson term, keeping the relative error near 1e-8.
pub(crate) struct KernelMomentTable {
    tau: f64,
    omega: f64,
    kernel: KernelParams,
    nodes: Vec<f64>,
    /// `base[i] = exp(-nodes[i]/tau) * phi(nodes[i])`.
    base: Vec<f64>,
    /// Cumulative integrals at each node, per moment.
    cum: Vec<[f64; N_MOMENTS]>,
}

impl KernelMomentTable {
    pub fn build(kernel: &KernelParams, tau: f64, omega: f64, u_max: f64) -> Self {
        let mut nodes = Vec::with_capacity(128);
        nodes.push(0.0);
        let s0 = kernel.s0.min(u_max);
        for i in 1..=4 {
            nodes.push(s0 * i as f64 / 4.0);
        }
        if u_max > kernel.s0 {
            // Graded steps: the power-law's higher derivatives are largest
            // right past the plateau edge; the upper cap keeps the trig
            // factors resolved far out.
            let mut u = kernel.s0;
            loop {
                let step = (0.05 * (u - kernel.s0)).clamp(1.5e-3, 0.5);
                u += step;
                if u >= u_max {
                    nodes.push(u_max);
                    break;
                }
                nodes.push(u);
            }
        }
        nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

        let base: Vec<f64> = nodes
            .iter()
            .map(|&u| (-u / tau).exp() * kernel.density_unchecked(u))
            .collect();

        let mut cum = vec![[0.0; N_MOMENTS]; nodes.len()];
        let mut acc = [0.0; N_MOMENTS];
        for i in 1..nodes.len() {
            let (a, b) = (nodes[i - 1], nodes[i]);
            let m = 0.5 * (a + b);
            let fm = (-m / tau).exp() * kernel.density_unchecked(m);
            let w = (b - a) / 6.0;
            let (fa, fb) = (base[i - 1], base[i]);
            for (mom, slot) in acc.iter_mut().enumerate() {
                let ga = fa * weight(mom, a, omega);
                let gm = fm * weight(mom, m, omega);
                let gb = fb * weight(mom, b, omega);
                *slot += w * (ga + 4.0 * gm + gb);
            }
            cum[i] = acc;
        }

        KernelMomentTable {
            tau,
            omega,
            kernel: *kernel,
            nodes,
            base,
            cum,
        }
    }

    /// All six cumulative moments at `x` (clamped into the tabulated range).
    pub fn query(&self, x: f64) -> [f64; N_MOMENTS] {
        if x <= 0.0 {
            return [0.0; N_MOMENTS];
        }
        let x = x.min(*self.nodes.last().unwrap());
        let idx = match self
            .nodes
            .binary_search_by(|n| n.partial_cmp(&x).unwrap())
        {
            Ok(i) => return self.cum[i],
            Err(i) => i - 1,
        };
        let a = self.nodes[idx];
        let mut out = self.cum[idx];
        if x - a < 1e-15 {
            return out;
        }
        let m = 0.5 * (a + x);
        let fa = self.base[idx];
        let fm = (-m / self.tau).exp() * self.kernel.density_unchecked(m);
        let fx = (-x / self.tau).exp() * self.kernel.density_unchecked(x);
        let w = (x - a) / 6.0;
        for (mom, slot) in out.iter_mut().enumerate() {
            let ga = fa * weight(mom, a, self.omega);
            let gm = fm * weight(mom, m, self.omega);
            let gb = fx * weight(mom, x, self.omega);
            *slot += w * (ga + 4.0 * gm + gb);
        }
        out
    }
}

#[inline]
fn weight(moment: usize, u: f64, omega: f64) -> f64 {
    match moment {
        0 => 1.0,
        1 => (omega * u).cos(),
        2 => (omega * u).sin(),
        3 => u,
        4 => u * (omega * u).cos(),
        5 => u * (omega * u).sin(),
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_is_exact() {
        let got = adaptive_simpson(&|x: f64| 3.0 * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((got - 8.0).abs() < 1e-10);
    }

    #[test]
    fn simpson_matches_kernel_closed_form() {
        let k = KernelParams::default();
        for x in [0.02, k.s0, 0.5, 4.0, 40.0] {
            let got = adaptive_simpson(&|s| k.density_unchecked(s), 0.0, x, 1e-10).unwrap();
            let want = k.mass_up_to(x);
            assert!(
                (got - want).abs() <= 1e-8 * want.abs(),
                "x = {x}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn moment_table_matches_adaptive_quadrature() {
        let k = KernelParams::default();
        let omega = std::f64::consts::TAU / 24.0;
        let tau = 13.0;
        let table = KernelMomentTable::build(&k, tau, omega, 72.0);
        for x in [0.03, 0.1, 1.37, 7.0, 33.3, 72.0] {
            let got = table.query(x);
            for mom in 0..N_MOMENTS {
                let f = |u: f64| {
                    (-u / tau).exp() * k.density_unchecked(u) * weight(mom, u, omega)
                };
                // Integrate the plateau and tail separately; the kernel has
                // a derivative kink at s0.
                let split = k.s0.min(x);
                let want = adaptive_simpson(&f, 0.0, split, 1e-12).unwrap()
                    + adaptive_simpson(&f, split, x, 1e-12).unwrap();
                let scale = want.abs().max(1e-9);
                assert!(
                    (got[mom] - want).abs() <= 2e-7 * scale,
                    "moment {mom} at x = {x}: {} vs {want}",
                    got[mom]
                );
            }
        }
    }
}
