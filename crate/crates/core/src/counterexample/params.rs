//! Exact level parameters and scalar recursions of the nested construction.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Correctly scaled conversion that does not overflow for large numerators and
/// denominators.
pub fn to_f64(v: &Q) -> f64 {
    if v.is_zero() {
        return 0.0;
    }
    let (n, d) = (v.numer().abs(), v.denom().clone());
    let shift = 64i64 + d.bits() as i64 - n.bits() as i64;
    let scaled = if shift >= 0 { (n << shift as usize) / d } else { n / (d << (-shift) as usize) };
    let m: f64 = scaled.to_string().parse().expect("integer conversion");
    let r = m * 2f64.powi(-(shift as i32));
    if v.is_negative() {
        -r
    } else {
        r
    }
}

/// `p/q` in lowest terms.
pub fn to_string(v: &Q) -> String {
    if v.denom().is_one() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

/// `c_n = 1/(n² 2ⁿ)`.
pub fn side(n: u32) -> Q {
    assert!(n >= 1);
    Q::new(BigInt::one(), BigInt::from(n as u64 * n as u64) << n as usize)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LevelParams {
    pub n: u32,
    #[serde(serialize_with = "ser_q")]
    pub c: Q,
    #[serde(serialize_with = "ser_q")]
    pub a: Q,
    #[serde(serialize_with = "ser_q")]
    pub r: Q,
}

pub(crate) fn ser_q<S: serde::Serializer>(v: &Q, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&to_string(v))
}

/// Parameters by the closed formulas: `a = ((n−1)/(2n))(c/2 − c_{n+1})`,
/// `r = (1/(2n))(c/2 − c_{n+1})`. At `n = 1` this gives `a = 0`.
pub fn formula_params(n: u32) -> LevelParams {
    let c = side(n);
    let gap = &c / q(2, 1) - side(n + 1);
    let a = &gap * q(n as i64 - 1, 2 * n as i64);
    let r = &gap * q(1, 2 * n as i64);
    LevelParams { n, c, a, r }
}

/// Parameters used by the construction: the formulas for `n ≥ 2`, and
/// `a₁ = r₁ = (c₁/2 − c₂)/4 = 3/64`, which keeps the packing identity and gives the
/// first level fast channels of positive width.
pub fn level_params(n: u32) -> LevelParams {
    if n == 1 {
        let c = side(1);
        let quarter = (&c / q(2, 1) - side(2)) / q(4, 1);
        LevelParams { n, c, a: quarter.clone(), r: quarter }
    } else {
        formula_params(n)
    }
}

/// Oscillations `s_n`, speeds `v_n`, `v'_n` and block heights, exact.
#[derive(Clone, Debug)]
pub struct Scalars {
    n_max: u32,
    params: Vec<LevelParams>,
    s: Vec<Q>,
    v: Vec<Q>,
    vp: Vec<Q>,
}

impl Scalars {
    /// Levels `1..=n_max`; `s` and `c` are also available at `n_max + 1`.
    pub fn new(n_max: u32) -> Self {
        assert!(n_max >= 1);
        let mut params = vec![level_params(1)];
        params.push(level_params(1));
        for n in 2..=n_max + 1 {
            params.push(level_params(n));
        }
        let mut s = vec![Q::zero(), params[1].c.clone()];
        let mut v = vec![Q::one()];
        let mut vp = vec![Q::zero()];
        for n in 1..=n_max as usize {
            let c_next = &params[n + 1].c;
            let hd = c_next + &params[n].r * q(2, 1);
            let s_next = &s[n] * c_next / (hd * q(4, 1));
            v.push(&s_next / c_next);
            vp.push(&s[n] / (&params[n].a * q(8, 1)));
            s.push(s_next);
        }
        Self { n_max, params, s, v, vp }
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }
    pub fn params(&self, n: u32) -> &LevelParams {
        &self.params[n as usize]
    }
    pub fn c(&self, n: u32) -> &Q {
        &self.params[n as usize].c
    }
    /// `s_n`, defined for `1 ≤ n ≤ n_max + 1`.
    pub fn s(&self, n: u32) -> &Q {
        &self.s[n as usize]
    }
    /// `v_n` with `v₀ = 1`.
    pub fn v(&self, n: u32) -> &Q {
        &self.v[n as usize]
    }
    pub fn vp(&self, n: u32) -> &Q {
        &self.vp[n as usize]
    }
    /// Height (and width) of a slow block, `c_{n+1} + 2 r_n`.
    pub fn block(&self, n: u32) -> Q {
        self.c(n + 1) + &self.params(n).r * q(2, 1)
    }
}

/// Logarithm of the factor `c_l/(c_l + 2 r_{l−1})` of σ, `l ≥ 2`.
///
/// For `l ≥ 3`, `2 r_{l−1}/c_l = (2l − 1)/(l − 1)³`; for `l = 2` the override
/// `r₁ = 3/64` gives `3/2`.
pub fn sigma_log_factor(l: u32) -> f64 {
    assert!(l >= 2);
    let ratio = if l == 2 {
        1.5
    } else {
        let m = (l - 1) as f64;
        (2.0 * l as f64 - 1.0) / (m * m * m)
    };
    -ratio.ln_1p()
}

/// `Π_{l=2}^{n} c_l/(c_l + 2 r_{l−1})`.
pub fn sigma(n: u32) -> f64 {
    sigma_log_sum(n).exp()
}

fn sigma_log_sum(n: u32) -> f64 {
    assert!(n >= 2);
    // Kahan summation keeps the long sums reproducible to the last bits.
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for l in 2..=n {
        let y = sigma_log_factor(l) - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Limit of the partial products by repeated Richardson extrapolation of the
/// log-sums at `N = base·2^k`, `k = 0..levels`; the tail expands in powers of `1/N`.
pub fn sigma_limit_with(base: u32, levels: usize) -> f64 {
    let mut table: Vec<f64> = (0..levels).map(|k| sigma_log_sum(base << k)).collect();
    for j in 1..levels {
        let f = (1u64 << j) as f64;
        for k in (j..levels).rev() {
            table[k] = (f * table[k] - table[k - 1]) / (f - 1.0);
        }
    }
    table[levels - 1].exp()
}

pub fn sigma_limit() -> f64 {
    sigma_limit_with(1000, 6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_parameter_examples() {
        let p1 = formula_params(1);
        assert_eq!((p1.c.clone(), p1.a.clone(), p1.r.clone()), (q(1, 2), q(0, 1), q(3, 32)));
        let p2 = level_params(2);
        assert_eq!((p2.c.clone(), p2.a.clone(), p2.r.clone()), (q(1, 16), q(5, 1152), q(5, 1152)));
        let o1 = level_params(1);
        assert_eq!((o1.a.clone(), o1.r.clone()), (q(3, 64), q(3, 64)));
    }

    #[test]
    fn packing_identity_exact() {
        for n in 1..=30 {
            let p = level_params(n);
            assert_eq!(p.c, side(n + 1) * q(2, 1) + (&p.a + &p.r) * q(4, 1), "n={n}");
        }
    }

    #[test]
    fn scalar_values() {
        let s = Scalars::new(4);
        assert_eq!(*s.s(1), q(1, 2));
        assert_eq!(*s.s(2), q(1, 20));
        assert_eq!(*s.v(1), q(4, 5));
        assert_eq!(*s.vp(1), q(4, 3));
        assert_eq!(*s.vp(2), q(36, 25));
        for n in 1..=4 {
            // 4 s_{n+1} = c_{n+1}/(c_{n+1} + 2 r_n) s_n
            assert_eq!(s.s(n + 1) * q(4, 1), s.c(n + 1) / s.block(n) * s.s(n));
            assert_eq!(s.v(n - 1) * s.c(n), *s.s(n));
        }
    }

    #[test]
    fn conversion_matches_std() {
        for (n, d) in [(1, 3), (-7, 9), (123456789, 1000), (5, 1152)] {
            assert_eq!(to_f64(&q(n, d)), n as f64 / d as f64);
        }
        let tiny = Q::new(BigInt::one(), BigInt::one() << 1100usize);
        assert_eq!(to_f64(&tiny), 0.0f64.max(2f64.powi(-1100)));
        assert_eq!(to_string(&q(6, 4)), "3/2");
        assert_eq!(to_string(&q(4, 2)), "2");
    }

    #[test]
    fn sigma_factors_match_rationals() {
        let s = Scalars::new(12);
        for l in 2..=12u32 {
            let f = s.c(l) / (s.c(l) + &s.params(l - 1).r * q(2, 1));
            assert!((sigma_log_factor(l) - to_f64(&f).ln()).abs() < 1e-14, "l={l}");
        }
        assert!((sigma(2) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn sigma_limit_is_stable() {
        let a = sigma_limit_with(1000, 5);
        let b = sigma_limit_with(1000, 6);
        let c = sigma_limit_with(2000, 6);
        assert!(((a - b) / b).abs() < 1e-11);
        assert!(((c - b) / b).abs() < 1e-11);
        assert!(b < sigma(100_000) && b > 0.0);
    }
}
