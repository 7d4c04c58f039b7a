//! Closed-form cell integrals against power weights `s^p`.

/// Below this relative cell width the moments are summed as a binomial series.
const SERIES_WIDTH: f64 = 0.05;

/// `[M0, M1, M2]` with `Mk = ∫_a^b s^p (s-a)^k ds`, `0 <= a < b`.
///
/// For `a = 0` the integrals require `p + k + 1 > 0`; divergent entries are
/// returned as `+inf` and must only be used with a zero coefficient.
pub(crate) fn moments(a: f64, b: f64, p: f64) -> [f64; 3] {
    debug_assert!(a >= 0.0 && b > a);
    if a == 0.0 {
        return [0.0, 1.0, 2.0].map(|k| {
            let e = p + k + 1.0;
            if e > 0.0 {
                b.powf(e) / e
            } else {
                f64::INFINITY
            }
        });
    }
    let x = (b - a) / a;
    let unit = if x <= SERIES_WIDTH {
        series_moments(x, p)
    } else {
        closed_moments(x, p)
    };
    [
        a.powf(p + 1.0) * unit[0],
        a.powf(p + 2.0) * unit[1],
        a.powf(p + 3.0) * unit[2],
    ]
}

/// `∫_0^x (1+y)^p y^k dy` for `k = 0, 1, 2` via `E(m) = ∫_0^x (1+y)^{m-1} dy`.
fn closed_moments(x: f64, p: f64) -> [f64; 3] {
    let l = x.ln_1p();
    let e = |m: f64| {
        if m == 0.0 {
            l
        } else {
            (m * l).exp_m1() / m
        }
    };
    let (e1, e2, e3) = (e(p + 1.0), e(p + 2.0), e(p + 3.0));
    [e1, e2 - e1, e3 - 2.0 * e2 + e1]
}

/// Same integrals as [`closed_moments`] by the binomial series of `(1+y)^p`.
fn series_moments(x: f64, p: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let k = k as f64;
        let mut binom = 1.0;
        let mut xpow = x.powf(k + 1.0);
        let mut sum = 0.0;
        for j in 0..60 {
            let jf = f64::from(j);
            let term = binom * xpow / (jf + k + 1.0);
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            binom *= (p - jf) / (jf + 1.0);
            xpow *= x;
        }
        *slot = sum;
    }
    out
}

/// `∫_0^{end} s^p (c0 + c1 s) g(s) ds` where `g` is the piecewise-linear
/// interpolant of `g` on the nodes `s`; `end` may fall inside a cell.
///
/// On a first cell starting at 0 the divergent moments are skipped when their
/// coefficient vanishes, which is the case for `g(0) = 0`.
pub(crate) fn weighted_linear(s: &[f64], g: &[f64], end: f64, p: f64, c0: f64, c1: f64) -> f64 {
    let mut total = 0.0;
    for j in 0..s.len() - 1 {
        let a = s[j];
        if a >= end {
            break;
        }
        let b = s[j + 1].min(end);
        let slope = (g[j + 1] - g[j]) / (s[j + 1] - s[j]);
        // (c0 + c1 a + c1 x)(g_a + slope x) with x = s - a
        let base = c0 + c1 * a;
        let coef = [base * g[j], base * slope + c1 * g[j], c1 * slope];
        let m = moments(a, b, p);
        for (c, mk) in coef.iter().zip(m) {
            if *c != 0.0 {
                total += c * mk;
            }
        }
    }
    total
}

/// Eight-point Gauss-Legendre rule on `[a, b]`.
pub(crate) fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for (x, w) in X.iter().zip(W) {
        sum += w * (f(mid - half * x) + f(mid + half * x));
    }
    sum * half
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(a: f64, b: f64, p: f64, k: i32) -> f64 {
        // composite Gauss-Legendre on a smooth integrand
        let n = 200;
        let h = (b - a) / f64::from(n);
        (0..n)
            .map(|i| {
                let lo = a + h * f64::from(i);
                gauss_legendre(lo, lo + h, |s| s.powf(p) * (s - a).powi(k))
            })
            .sum()
    }

    #[test]
    fn moments_match_direct_quadrature() {
        for &(a, b) in &[(0.5, 0.9), (0.1, 0.1001), (1e-6, 3e-6), (2.0, 2.09)] {
            for &p in &[-0.9, -0.35, 0.0, 0.7, 2.5] {
                let m = moments(a, b, p);
                for k in 0..3 {
                    let d = direct(a, b, p, k);
                    let rel = (m[k as usize] - d).abs() / d.abs();
                    assert!(
                        rel < 1e-11,
                        "a={a} b={b} p={p} k={k}: {} vs {d}",
                        m[k as usize]
                    );
                }
            }
        }
    }

    #[test]
    fn series_and_closed_forms_agree_at_switch() {
        for &p in &[-0.7, 0.3, 1.5] {
            let x = SERIES_WIDTH;
            let s = series_moments(x, p);
            let c = closed_moments(x, p);
            for k in 0..3 {
                assert!((s[k] - c[k]).abs() <= 1e-12 * s[k].abs());
            }
        }
    }

    #[test]
    fn origin_cell_uses_power_rule() {
        let m = moments(0.0, 0.25, -0.5);
        assert!((m[0] - 2.0 * 0.5).abs() < 1e-15);
        assert!(moments(0.0, 1.0, -1.5)[0].is_infinite());
    }

    #[test]
    fn weighted_linear_is_exact_for_linear_data() {
        // ∫_0^1 s^{-1/2} (1 - s) s ds = 2/3 - 2/5
        let s: Vec<f64> = (0..=37).map(|j| (f64::from(j) / 37.0).powi(2)).collect();
        let got = weighted_linear(&s, &s, 1.0, -0.5, 1.0, -1.0);
        assert!((got - (2.0 / 3.0 - 0.4)).abs() < 1e-14);
        // truncated at an interior point
        let got = weighted_linear(&s, &s, 0.3, -0.5, 0.3, -1.0);
        let exact = 0.3 * 0.3f64.powf(1.5) / 1.5 - 0.3f64.powf(2.5) / 2.5;
        assert!((got - exact).abs() < 1e-15);
    }
}
