//! Small dense optimizers: bounded Brent line minimization and a BFGS
//! quasi-Newton method with backtracking line search.

/// Classic Brent minimization of `f` on `[lo, hi]`.
///
/// Combines golden-section steps with parabolic interpolation. Returns the
/// abscissa and value of the best point found.
pub fn brent_min<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    const GOLD: f64 = 0.381_966_011_250_105;
    let (mut a, mut b) = if lo < hi { (lo, hi) } else { (hi, lo) };
    let tol = tol.abs().max(1e-12);

    let mut x = a + GOLD * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }

        let mut use_golden = true;
        if e.abs() > tol1 {
            // Parabolic fit through (v, w, x).
            let r = (x - w) * (fx - fv);
            let q0 = (x - v) * (fx - fw);
            let mut p = (x - v) * q0 - (x - w) * r;
            let mut q = 2.0 * (q0 - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if (u - a) < tol2 || (b - u) < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else if d >= 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);

        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

/// Outcome of a BFGS run.
#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `f` (value and gradient) from `x0` with BFGS and an Armijo
/// backtracking line search. Non-finite objective values are treated as
/// out-of-bounds: the line search backs off from them.
pub fn bfgs_min<F>(mut f: F, x0: &[f64], grad_tol: f64, max_iter: usize) -> BfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    let mut h = identity(n);
    let mut converged = false;
    let mut iterations = 0;

    if !fx.is_finite() {
        return BfgsResult {
            x,
            f: fx,
            grad_norm: f64::INFINITY,
            iterations,
            converged: false,
        };
    }

    for iter in 0..max_iter {
        iterations = iter + 1;
        let gnorm = inf_norm(&g);
        if gnorm <= grad_tol {
            converged = true;
            break;
        }

        // Search direction d = -H g.
        let mut d = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += h[i][j] * g[j];
            }
            d[i] = -s;
        }
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            // Curvature got corrupted; restart along steepest descent.
            h = identity(n);
            for i in 0..n {
                d[i] = -g[i];
            }
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }

        // Keep the first trial step modest.
        let dnorm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut step = if dnorm > 5.0 { 5.0 / dnorm } else { 1.0 };

        let mut accepted = false;
        let mut x_new = x.clone();
        let mut f_new = fx;
        let mut g_new = g.clone();
        for _ in 0..28 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            let (fv, gv) = f(&x_new);
            if fv.is_finite() && fv <= fx + 1e-4 * step * slope {
                f_new = fv;
                g_new = gv;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No progress possible along this direction.
            converged = inf_norm(&g) <= grad_tol * 10.0;
            break;
        }

        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            bfgs_update(&mut h, &s, &y, sy);
        }

        let f_drop = fx - f_new;
        x = x_new;
        g = g_new;
        fx = f_new;
        if f_drop <= 1e-9 * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
    }

    BfgsResult {
        grad_norm: inf_norm(&g),
        x,
        f: fx,
        iterations,
        converged,
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// BFGS inverse-Hessian update:
/// `H <- (I - s y^T / sy) H (I - y s^T / sy) + s s^T / sy`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let mut hy = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            hy[i] += h[i][j] * y[j];
        }
    }
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    let c = (1.0 + yhy / sy) / sy;
    for i in 0..n {
        for j in 0..n {
            h[i][j] += c * s[i] * s[j] - (hy[i] * s[j] + s[i] * hy[j]) / sy;
        }
    }
}
