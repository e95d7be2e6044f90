//! Adaptive Gauss–Kronrod (7/15) quadrature for smooth complex integrands.

use rustfft::num_complex::Complex64;

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: usize = 50;

/// Tolerances for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct QuadTolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for QuadTolerance {
    fn default() -> Self {
        Self {
            abs: 1e-300,
            rel: 1e-12,
        }
    }
}

fn kronrod<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += pair * w;
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let kron = kron * half;
    let gauss = gauss * half;
    (kron, (kron - gauss).norm())
}

/// Integrates `f` over `[a, b]` by recursive bisection until the Kronrod
/// error estimate meets `tol` on every panel.
pub fn integrate<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, tol: QuadTolerance) -> Complex64 {
    let (whole, err) = kronrod(f, a, b);
    let target = tol.abs.max(tol.rel * whole.norm());
    refine(f, a, b, whole, err, target, 0)
}

fn refine<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    estimate: Complex64,
    err: f64,
    target: f64,
    depth: usize,
) -> Complex64 {
    if err <= target || depth >= MAX_DEPTH || (b - a).abs() < 1e-300 {
        return estimate;
    }
    let mid = 0.5 * (a + b);
    let (left, left_err) = kronrod(f, a, mid);
    let (right, right_err) = kronrod(f, mid, b);
    // The refined pair is often far better than the parent estimate; split
    // the remaining budget evenly between the halves.
    let half_target = 0.5 * target;
    refine(f, a, mid, left, left_err, half_target, depth + 1)
        + refine(f, mid, b, right, right_err, half_target, depth + 1)
}

/// Integrates over `[0, ∞)` on doubling panels `[0, h], [h, 2h], [2h, 4h], …`
/// until `bound(t)`, an upper bound on `|f|` beyond `t`, makes the remainder
/// negligible against the accumulated value.
pub fn integrate_half_line<F, B>(f: &F, bound: B, first_panel: f64, tol: QuadTolerance) -> Complex64
where
    F: Fn(f64) -> Complex64,
    B: Fn(f64) -> f64,
{
    let mut total = integrate(f, 0.0, first_panel, tol);
    let mut lo = first_panel;
    for _ in 0..200 {
        let hi = 2.0 * lo;
        let panel = integrate(f, lo, hi, tol);
        total += panel;
        // bound(hi) * hi over-approximates the tail mass for integrands that
        // decay at least exponentially beyond `hi`.
        let tail = bound(hi) * hi;
        if tail <= tol.abs.max(tol.rel * total.norm()) {
            break;
        }
        lo = hi;
    }
    total
}
