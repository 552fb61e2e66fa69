//! Adaptive Gauss–Kronrod (7/15) integration and the sine integral.

// 15-point Kronrod abscissae (non-negative half) and weights; the odd
// entries are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrates `f` over `[a, b]`, starting from `panels` equal subintervals
/// and bisecting the worst one until the summed error estimate is below
/// `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, abs_tol: f64) -> Integral {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut intervals: Vec<(f64, f64, f64, f64)> = (0..panels)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == panels { b } else { lo + width };
            let (v, e) = gk15(&f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();

    loop {
        let error: f64 = intervals.iter().map(|iv| iv.3).sum();
        if error <= abs_tol || intervals.len() >= MAX_INTERVALS {
            // Summing in position order keeps results independent of the
            // refinement history.
            intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
            return Integral {
                value: intervals.iter().map(|iv| iv.2).sum(),
                error,
                intervals: intervals.len(),
            };
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Sine integral Si(x) = ∫₀ˣ sin t / t dt.
///
/// Power series for |x| ≤ 2, continued fraction for the complex exponential
/// integral above that.
pub fn sine_integral(x: f64) -> f64 {
    use num_complex::Complex64;
    use std::f64::consts::FRAC_PI_2;

    let t = x.abs();
    if t == 0.0 {
        return 0.0;
    }
    let si = if t > 2.0 {
        let fpmin = f64::MIN_POSITIVE / f64::EPSILON;
        let mut b = Complex64::new(1.0, t);
        let mut c = Complex64::new(1.0 / fpmin, 0.0);
        let mut d = Complex64::new(1.0, 0.0) / b;
        let mut h = d;
        for i in 2..200 {
            let a = -((i - 1) as f64).powi(2);
            b += Complex64::new(2.0, 0.0);
            d = Complex64::new(1.0, 0.0) / (d * a + b);
            c = b + c.inv() * a;
            let del = c * d;
            h *= del;
            if (del.re - 1.0).abs() + del.im.abs() < f64::EPSILON {
                break;
            }
        }
        h *= Complex64::new(t.cos(), -t.sin());
        FRAC_PI_2 + h.im
    } else {
        // Si(t) = Σ (−1)^k t^(2k+1) / ((2k+1)·(2k+1)!)
        let mut sum = 0.0;
        let mut term = t;
        let mut k = 0;
        loop {
            let contrib = term / (2 * k + 1) as f64;
            sum += contrib;
            if contrib.abs() < f64::EPSILON * sum.abs() {
                break;
            }
            k += 1;
            term *= -t * t / ((2 * k) as f64 * (2 * k + 1) as f64);
        }
        sum
    };
    if x < 0.0 {
        -si
    } else {
        si
    }
}

/// ∫_U^∞ cos(ωu)/u² du for U > 0.
pub fn cosine_tail_over_u2(omega: f64, u: f64) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    let w = omega.abs();
    (w * u).cos() / u - w * (FRAC_PI_2 - sine_integral(w * u))
}
