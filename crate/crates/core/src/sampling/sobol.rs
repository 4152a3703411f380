//! Sobol sequence generator.
//!
//! Direction numbers are built at first use: one primitive polynomial over
//! GF(2) per dimension (enumerated in ascending (degree, value) order) with
//! initial direction integers drawn odd from a fixed seeded stream. Any odd
//! m_k < 2^k yields a valid digital (t, s)-sequence in base 2; the table is
//! therefore Joe–Kuo style in construction, not value.
//!
//! Points are indexed in gray-code order, so index 1 is the all-0.5 vector
//! and the one-dimensional prefix of length 2^k - 1 (skip = 1) is a
//! permutation of {i / 2^k}. Index 0 (the all-zeros point) is always
//! skipped by the public API.

use crate::error::{Error, Result};
use crate::seeding::splitmix64;
use std::sync::OnceLock;

/// Fractional bits carried per coordinate; exact in f64.
pub const SOBOL_BITS: u32 = 53;

/// Largest supported dimension.
pub const SOBOL_MAX_DIM: usize = 64;

const SCALE: f64 = 1.0 / ((1u64 << SOBOL_BITS) as f64);

/// Direction integers for one coordinate: v[k] occupies the top bits so that
/// point = XOR of v[k] over set gray-code bits, interpreted as /2^53.
type Directions = Vec<u64>;

fn gf2_mulmod(a: u64, b: u64, p: u64, deg: u32) -> u64 {
    let mut a = a;
    let mut b = b;
    let mut r = 0u64;
    while b != 0 {
        if b & 1 != 0 {
            r ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & (1 << deg) != 0 {
            a ^= p;
        }
    }
    r
}

fn gf2_powmod(mut base: u64, mut e: u64, p: u64, deg: u32) -> u64 {
    let mut r = 1u64;
    while e > 0 {
        if e & 1 != 0 {
            r = gf2_mulmod(r, base, p, deg);
        }
        base = gf2_mulmod(base, base, p, deg);
        e >>= 1;
    }
    r
}

fn gf2_gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let da = 63 - a.leading_zeros() as i32;
        let db = 63 - b.leading_zeros() as i32;
        if da < db {
            std::mem::swap(&mut a, &mut b);
            continue;
        }
        if a == 0 {
            break;
        }
        let sa = 63 - a.leading_zeros();
        let sb = 63 - b.leading_zeros();
        a ^= b << (sa - sb);
    }
    a
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Primitive over GF(2): irreducible and x generates the full multiplicative group.
fn is_primitive(p: u64, deg: u32) -> bool {
    if deg == 0 || p & 1 == 0 {
        return false;
    }
    if deg == 1 {
        return p == 0b11; // x + 1
    }
    // Irreducibility: x^(2^deg) == x mod p and gcd(x^(2^(deg/q)) - x, p) == 1.
    let xq = |k: u32| -> u64 {
        let mut t = 0b10u64; // x
        for _ in 0..k {
            t = gf2_mulmod(t, t, p, deg);
        }
        t
    };
    if xq(deg) != 0b10 {
        return false;
    }
    for q in prime_factors(deg as u64) {
        let t = xq(deg / q as u32);
        if gf2_gcd(t ^ 0b10, p) != 1 {
            return false;
        }
    }
    // Order of x equals 2^deg - 1.
    let group = (1u64 << deg) - 1;
    if gf2_powmod(0b10, group, p, deg) != 1 {
        return false;
    }
    for q in prime_factors(group) {
        if gf2_powmod(0b10, group / q, p, deg) == 1 {
            return false;
        }
    }
    true
}

/// Primitive polynomials in ascending (degree, value) order.
fn primitive_polynomials(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut deg = 1u32;
    while out.len() < count {
        let lo = 1u64 << deg;
        let hi = 1u64 << (deg + 1);
        for p in lo..hi {
            if is_primitive(p, deg) {
                out.push(p);
                if out.len() == count {
                    break;
                }
            }
        }
        deg += 1;
    }
    out
}

fn build_directions(dim_index: usize, poly: Option<u64>) -> Directions {
    let bits = SOBOL_BITS as usize;
    let mut m = vec![0u64; bits + 1]; // 1-based
    match poly {
        None => {
            // First coordinate: van der Corput, m_k = 1.
            for k in 1..=bits {
                m[k] = 1;
            }
        }
        Some(p) => {
            let s = (63 - p.leading_zeros()) as usize;
            let mut state = splitmix64(0x50B0_1D17 ^ (dim_index as u64).wrapping_mul(0x9e3779b97f4a7c15));
            for k in 1..=s.min(bits) {
                state = splitmix64(state);
                // odd and < 2^k
                m[k] = if k == 1 { 1 } else { ((state >> 8) % (1u64 << (k - 1))) * 2 + 1 };
            }
            for k in (s + 1)..=bits {
                let mut v = m[k - s] ^ (m[k - s] << s);
                for i in 1..s {
                    let a_i = (p >> (s - i)) & 1;
                    if a_i != 0 {
                        v ^= m[k - i] << i;
                    }
                }
                m[k] = v;
            }
        }
    }
    (1..=bits).map(|k| m[k] << (bits - k)).collect()
}

fn table() -> &'static Vec<Directions> {
    static TABLE: OnceLock<Vec<Directions>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let polys = primitive_polynomials(SOBOL_MAX_DIM - 1);
        let mut t = Vec::with_capacity(SOBOL_MAX_DIM);
        t.push(build_directions(0, None));
        for (j, &p) in polys.iter().enumerate() {
            t.push(build_directions(j + 1, Some(p)));
        }
        t
    })
}

/// Raw integer Sobol point at `index` (gray-code order), one u64 per coordinate.
fn raw_point(index: u64, dimension: usize, out: &mut [u64]) {
    let t = table();
    let g = index ^ (index >> 1);
    for (j, o) in out.iter_mut().enumerate().take(dimension) {
        let dirs = &t[j];
        let mut x = 0u64;
        let mut bits = g;
        let mut k = 0usize;
        while bits != 0 {
            if bits & 1 != 0 {
                x ^= dirs[k];
            }
            bits >>= 1;
            k += 1;
        }
        *o = x;
    }
}

/// A Sobol stream over `dimension` coordinates with an optional digital
/// (XOR) shift per coordinate. Value-semantic; each task owns its state.
#[derive(Debug, Clone)]
pub struct SobolSeq {
    dimension: usize,
    next_index: u64,
    shift: Vec<u64>,
}

impl SobolSeq {
    /// Unshifted stream starting at `skip` (index 0 is always excluded;
    /// `skip` of 0 is promoted to 1).
    pub fn new(dimension: usize, skip: u64) -> Result<Self> {
        if dimension == 0 || dimension > SOBOL_MAX_DIM {
            return Err(Error::Capability(format!(
                "sobol dimension {dimension} outside supported range 1..={SOBOL_MAX_DIM}"
            )));
        }
        Ok(SobolSeq {
            dimension,
            next_index: skip.max(1),
            shift: vec![0; dimension],
        })
    }

    /// Stream whose output is digitally shifted by per-coordinate masks
    /// derived from `key`; decorrelates independent repetitions.
    pub fn new_shifted(dimension: usize, skip: u64, key: u64) -> Result<Self> {
        let mut s = Self::new(dimension, skip)?;
        let mut state = splitmix64(key);
        for v in s.shift.iter_mut() {
            state = splitmix64(state);
            *v = state & ((1u64 << SOBOL_BITS) - 1);
        }
        Ok(s)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Next point in [0,1)^dimension.
    pub fn next_point(&mut self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dimension);
        let mut raw = vec![0u64; self.dimension];
        raw_point(self.next_index, self.dimension, &mut raw);
        self.next_index += 1;
        for j in 0..self.dimension {
            out[j] = ((raw[j] ^ self.shift[j]) as f64) * SCALE;
        }
    }
}

/// `count` Sobol points starting at index `skip`, row-major count x dimension.
pub fn sobol_points(dimension: usize, count: usize, skip: u64) -> Result<Vec<Vec<f64>>> {
    let mut seq = SobolSeq::new(dimension, skip)?;
    let mut rows = Vec::with_capacity(count);
    for _ in 0..count {
        let mut row = vec![0.0; dimension];
        seq.next_point(&mut row);
        rows.push(row);
    }
    Ok(rows)
}
