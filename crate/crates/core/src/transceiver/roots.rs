//! Scalar root finders used by the dual solvers.

/// One term `alpha / (beta w + gamma)^2` of a decreasing convex sum.
#[derive(Debug, Clone, Copy)]
pub(crate) struct InvSquareTerm {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl InvSquareTerm {
    #[inline]
    fn value_and_slope(&self, w: f64) -> (f64, f64) {
        let d = self.beta * w + self.gamma;
        let v = self.alpha / (d * d);
        (v, -2.0 * v * self.beta / d)
    }
}

const MAX_ITERS: usize = 200;

fn eval(terms: &[InvSquareTerm], w: f64) -> (f64, f64) {
    terms
        .iter()
        .filter(|t| t.alpha > 0.0)
        .fold((0.0, 0.0), |(f, df), t| {
            let (v, s) = t.value_and_slope(w);
            (f + v, df + s)
        })
}

/// Solves `sum_i alpha_i / (beta_i w + gamma_i)^2 = target` for `w >= 0`.
///
/// Terms with `alpha = 0` vanish for every `w > 0` and are skipped. Returns 0
/// when the sum at the origin already sits at or below `target`. The bracket
/// `[0, R]` grows by doubling; inside it, Newton steps (monotone from the
/// left for a convex decreasing sum) are used and bisection takes over when a
/// step leaves the bracket.
pub(crate) fn solve_inverse_square_sum(terms: &[InvSquareTerm], target: f64) -> f64 {
    let (f0, _) = eval(terms, 0.0);
    if !(f0 > target) {
        return 0.0;
    }
    let mut hi: f64 = 1.0;
    let mut doublings = 0;
    while eval(terms, hi).0 > target {
        hi *= 2.0;
        doublings += 1;
        if doublings > 2000 || !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    let mut lo: f64 = 0.0;
    let mut w: f64 = 0.0;
    for _ in 0..MAX_ITERS {
        let (f, df) = eval(terms, w);
        let g = f - target;
        if g == 0.0 {
            return w;
        }
        if g > 0.0 {
            lo = lo.max(w);
        } else {
            hi = hi.min(w);
        }
        let mut next = if df < 0.0 { w - g / df } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 1e-15 * next.abs().max(f64::MIN_POSITIVE) || hi - lo <= 1e-15 * hi {
            return next;
        }
        w = next;
    }
    w
}

/// Root of a nonincreasing function on `[lo, hi]` with `f(lo) > 0 >= f(hi)`.
/// `f(lo)` may be infinite. Returns the right end of the final bracket, so
/// the result satisfies `f <= 0` up to the function's own rounding.
///
/// Illinois-style false position with a bisection fallback.
pub(crate) fn decreasing_root<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if !(f_lo > 0.0) {
        return lo;
    }
    if f_hi > 0.0 {
        return hi;
    }
    let mut side = 0i8;
    for _ in 0..MAX_ITERS {
        if hi - lo <= rel_tol * hi.abs() {
            break;
        }
        let secant = if f_lo.is_finite() && f_hi.is_finite() && f_lo != f_hi {
            (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        } else {
            f64::NAN
        };
        let mid = if lo > 0.0 && hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        let x = if secant > lo && secant < hi { secant } else { mid };
        let fx = f(x);
        if fx > 0.0 {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_square_single_term_has_closed_form() {
        // 4 / (2 w + 1)^2 = 1  ->  w = 0.5
        let t = [InvSquareTerm {
            alpha: 4.0,
            beta: 2.0,
            gamma: 1.0,
        }];
        assert!((solve_inverse_square_sum(&t, 1.0) - 0.5).abs() < 1e-14);
        assert_eq!(solve_inverse_square_sum(&t, 5.0), 0.0);
    }

    #[test]
    fn inverse_square_skips_vanishing_terms() {
        let t = [
            InvSquareTerm {
                alpha: 0.0,
                beta: 1.0,
                gamma: 0.0,
            },
            InvSquareTerm {
                alpha: 9.0,
                beta: 1.0,
                gamma: 1.0,
            },
        ];
        // 9 / (w + 1)^2 = 1 -> w = 2
        assert!((solve_inverse_square_sum(&t, 1.0) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn inverse_square_matches_bisection_on_random_sums() {
        let terms: Vec<InvSquareTerm> = (1..6)
            .map(|i| InvSquareTerm {
                alpha: 0.3 * i as f64,
                beta: 1.0 / i as f64,
                gamma: 0.1 + 0.05 * i as f64,
            })
            .collect();
        let target = 0.7;
        let w = solve_inverse_square_sum(&terms, target);
        let (mut lo, mut hi) = (0.0f64, 1e6f64);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if eval(&terms, mid).0 > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((w - lo).abs() < 1e-10 * lo);
    }

    #[test]
    fn decreasing_root_handles_infinite_left_end() {
        let f = |x: f64| if x == 0.0 { f64::INFINITY } else { 1.0 / x - 4.0 };
        let r = decreasing_root(f, 0.0, 10.0, 1e-15);
        assert!((r - 0.25).abs() < 1e-13);
        assert!(f(r) <= 0.0);
    }
}
