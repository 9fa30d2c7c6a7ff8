//! Branch-free `exp`, sigmoid and tanh that the compiler can vectorize.
//!
//! `exp` splits `x = k ln2 + r` with `|r| <= ln2 / 2`, evaluates a degree-13
//! Taylor polynomial for `e^r` (truncation error below 1e-17) and scales by
//! `2^k` through the exponent bits. No fused multiply-add is used, so the
//! AVX2 and baseline code paths round identically.

const LOG2E: f64 = std::f64::consts::LOG2_E;
const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
// 1.5 * 2^52: adding it rounds to an integer held in the low mantissa bits.
const SHIFTER: f64 = 6_755_399_441_055_744.0;
const CLAMP: f64 = 708.0;

const C: [f64; 14] = [
    1.0,
    1.0,
    1.0 / 2.0,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5040.0,
    1.0 / 40320.0,
    1.0 / 362_880.0,
    1.0 / 3_628_800.0,
    1.0 / 39_916_800.0,
    1.0 / 479_001_600.0,
    1.0 / 6_227_020_800.0,
];

/// `e^x` for finite `x`, saturating outside ±708. NaN propagates.
#[inline(always)]
pub fn exp(x: f64) -> f64 {
    let x = x.clamp(-CLAMP, CLAMP);
    let shifted = x * LOG2E + SHIFTER;
    let k = shifted - SHIFTER;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    let mut p = C[13];
    for c in C[..13].iter().rev() {
        p = p * r + c;
    }
    // Low 11 bits of the shifted mantissa are k (two's complement), so
    // adding the bias and shifting yields the bits of 2^k.
    let scale = f64::from_bits(shifted.to_bits().wrapping_add(1023) << 52);
    p * scale
}

#[inline(always)]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + exp(-x))
}

#[inline(always)]
pub fn tanh(x: f64) -> f64 {
    let e = exp(-2.0 * x.abs());
    ((1.0 - e) / (1.0 + e)).copysign(x)
}

#[inline(always)]
fn gates_generic(block: &mut [f64], h: usize) {
    for row in block.chunks_exact_mut(4 * h) {
        let (sig, cand) = row.split_at_mut(3 * h);
        sig.iter_mut().for_each(|v| *v = sigmoid(*v));
        cand.iter_mut().for_each(|v| *v = tanh(*v));
    }
}

#[inline(always)]
fn cell_generic(gates: &[f64], c_prev: Option<&[f64]>, c: &mut [f64], tanh_c: &mut [f64], out: &mut [f64], h: usize) {
    for (r, g) in gates.chunks_exact(4 * h).enumerate() {
        let span = r * h..(r + 1) * h;
        let (i, rest) = g.split_at(h);
        let (f, rest) = rest.split_at(h);
        let (o, cand) = rest.split_at(h);
        let c = &mut c[span.clone()];
        match c_prev {
            Some(cp) => {
                let cp = &cp[span.clone()];
                for j in 0..h {
                    c[j] = f[j] * cp[j] + i[j] * cand[j];
                }
            }
            None => {
                for j in 0..h {
                    c[j] = i[j] * cand[j];
                }
            }
        }
        let tc = &mut tanh_c[span.clone()];
        let hv = &mut out[span];
        for j in 0..h {
            tc[j] = tanh(c[j]);
            hv[j] = o[j] * tc[j];
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
fn gates_avx2(block: &mut [f64], h: usize) {
    gates_generic(block, h)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
fn cell_avx2(gates: &[f64], c_prev: Option<&[f64]>, c: &mut [f64], tanh_c: &mut [f64], out: &mut [f64], h: usize) {
    cell_generic(gates, c_prev, c, tanh_c, out, h)
}

/// Applies sigmoid to the input/forget/output blocks and tanh to the
/// candidate block of every `4h`-wide row.
pub(crate) fn activate_gates(block: &mut [f64], h: usize) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the required CPU feature was detected at runtime.
        return unsafe { gates_avx2(block, h) };
    }
    gates_generic(block, h)
}

/// Cell and hidden state update from activated gates; `c_prev` is `None` at
/// the first step (zero state).
pub(crate) fn cell_update(
    gates: &[f64],
    c_prev: Option<&[f64]>,
    c: &mut [f64],
    tanh_c: &mut [f64],
    out: &mut [f64],
    h: usize,
) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the required CPU feature was detected at runtime.
        return unsafe { cell_avx2(gates, c_prev, c, tanh_c, out, h) };
    }
    cell_generic(gates, c_prev, c, tanh_c, out, h)
}
