//! Lebesgue exponents on `[1, inf]` and the conjugate relation
//! `1/p + 1 = 1/q + 1/r` that links a solution norm `p`, a residual
//! norm `q`, and the kernel norm `r` used by every constant in this crate.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An exponent in `[1, inf]`. Infinity is a first-class variant, never a
/// floating-point sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    /// Builds a finite exponent, rejecting values below one and non-finite
    /// floats.
    pub fn finite(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 1.0 {
            return Err(Error::invalid(format!(
                "exponent must be finite and >= 1, got {value}"
            )));
        }
        Ok(Exponent::Finite(value))
    }

    pub const fn infinity() -> Self {
        Exponent::Infinity
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    /// `1/p`, with `1/inf = 0`.
    pub fn reciprocal(&self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    /// The finite value, if any.
    pub fn as_finite(&self) -> Option<f64> {
        match self {
            Exponent::Finite(p) => Some(*p),
            Exponent::Infinity => None,
        }
    }

    /// Total order with infinity on top.
    pub fn ge(&self, other: &Exponent) -> bool {
        match (self, other) {
            (Exponent::Infinity, _) => true,
            (Exponent::Finite(_), Exponent::Infinity) => false,
            (Exponent::Finite(a), Exponent::Finite(b)) => a >= b,
        }
    }

    /// `x^(1/p)`, which is `1` when `p = inf` regardless of `x > 0`.
    /// The convention `x^0 = 1` is applied even for `x = 0`.
    pub fn root(&self, x: f64) -> f64 {
        match self {
            Exponent::Finite(p) => x.powf(1.0 / p),
            Exponent::Infinity => 1.0,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => serializer.serialize_f64(*p),
            Exponent::Infinity => serializer.serialize_str("inf"),
        }
    }
}

struct ExponentVisitor;

impl<'de> Visitor<'de> for ExponentVisitor {
    type Value = Exponent;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number >= 1 or the string \"inf\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Exponent, E> {
        Exponent::finite(v).map_err(|e| E::custom(e.to_string()))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Exponent, E> {
        self.visit_f64(v as f64)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Exponent, E> {
        self.visit_f64(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Exponent, E> {
        match v {
            "inf" | "infinity" | "Inf" => Ok(Exponent::Infinity),
            other => other
                .parse::<f64>()
                .map_err(|_| E::custom(format!("not an exponent: {other:?}")))
                .and_then(|x| self.visit_f64(x)),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        deserializer.deserialize_any(ExponentVisitor)
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "Inf" => Ok(Exponent::Infinity),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("not an exponent: {other:?}")))
                .and_then(Exponent::finite),
        }
    }
}

/// A solution exponent `p`, residual exponent `q`, and the kernel exponent
/// `r` solving `1/p + 1 = 1/q + 1/r`. Requires `p >= q`, which keeps
/// `r` inside `[1, inf]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugateTriple {
    pub p: Exponent,
    pub q: Exponent,
    pub r: Exponent,
}

impl ConjugateTriple {
    /// Computes `r` from `(p, q)`. Fails with a precedence error when
    /// `p < q`: the identity would demand `r < 1`.
    pub fn new(p: Exponent, q: Exponent) -> Result<Self> {
        if !p.ge(&q) {
            return Err(Error::Precedence {
                p: p.to_string(),
                q: q.to_string(),
            });
        }
        let r = match (p, q) {
            (Exponent::Finite(pv), Exponent::Finite(qv)) => {
                let denom = qv - pv + pv * qv;
                // denom = q - p + pq >= q >= 1 whenever 1 <= q <= p
                Exponent::finite(pv * qv / denom)?
            }
            (Exponent::Infinity, Exponent::Finite(qv)) => {
                if qv == 1.0 {
                    Exponent::Infinity
                } else {
                    Exponent::finite(qv / (qv - 1.0))?
                }
            }
            (Exponent::Infinity, Exponent::Infinity) => Exponent::finite(1.0)?,
            (Exponent::Finite(_), Exponent::Infinity) => unreachable!("p >= q was checked"),
        };
        Ok(ConjugateTriple { p, q, r })
    }

    /// Convenience constructor from plain floats, `f64::INFINITY` allowed.
    pub fn from_f64(p: f64, q: f64) -> Result<Self> {
        let pe = if p.is_infinite() {
            Exponent::Infinity
        } else {
            Exponent::finite(p)?
        };
        let qe = if q.is_infinite() {
            Exponent::Infinity
        } else {
            Exponent::finite(q)?
        };
        ConjugateTriple::new(pe, qe)
    }

    /// Defect of the defining identity, `1/p + 1 - 1/q - 1/r`.
    pub fn identity_defect(&self) -> f64 {
        self.p.reciprocal() + 1.0 - self.q.reciprocal() - self.r.reciprocal()
    }

    /// The classical uniform case `p = q = inf`, for which `r = 1`.
    pub fn uniform() -> Self {
        ConjugateTriple::new(Exponent::Infinity, Exponent::Infinity).expect("always valid")
    }

    /// The diagonal case `p = q`, for which `r = 1`.
    pub fn diagonal(p: Exponent) -> Result<Self> {
        ConjugateTriple::new(p, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fin(x: f64) -> Exponent {
        Exponent::finite(x).unwrap()
    }

    #[test]
    fn uniform_pair_gives_r_one() {
        let t = ConjugateTriple::new(Exponent::Infinity, Exponent::Infinity).unwrap();
        assert_eq!(t.r, Exponent::Finite(1.0));
    }

    #[test]
    fn infinite_p_unit_q_gives_infinite_r() {
        let t = ConjugateTriple::new(Exponent::Infinity, fin(1.0)).unwrap();
        assert!(t.r.is_infinite());
    }

    #[test]
    fn p_four_q_two_gives_four_thirds() {
        // independent route: r = 1 / (1/p + 1 - 1/q)
        let direct = 1.0 / (0.25 + 1.0 - 0.5);
        let t = ConjugateTriple::new(fin(4.0), fin(2.0)).unwrap();
        let r = t.r.as_finite().unwrap();
        assert!((r - direct).abs() < 1e-15);
        assert!((r - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn precedence_violation_is_rejected() {
        let err = ConjugateTriple::new(fin(1.0), fin(2.0)).unwrap_err();
        assert!(matches!(err, Error::Precedence { .. }));
        let err = ConjugateTriple::new(fin(3.0), Exponent::Infinity).unwrap_err();
        assert!(matches!(err, Error::Precedence { .. }));
    }

    #[test]
    fn identity_holds_on_rational_pairs() {
        for (pn, pd) in [(3u32, 2u32), (7, 3), (5, 1), (12, 5), (9, 4)] {
            for (qn, qd) in [(1u32, 1u32), (4, 3), (2, 1), (5, 4)] {
                let p = pn as f64 / pd as f64;
                let q = qn as f64 / qd as f64;
                if q > p {
                    continue;
                }
                let t = ConjugateTriple::new(fin(p), fin(q)).unwrap();
                assert!(
                    t.identity_defect().abs() < 1e-14,
                    "defect {} for p={p} q={q}",
                    t.identity_defect()
                );
            }
        }
    }

    #[test]
    fn infinite_p_finite_q_identity() {
        for q in [1.5, 2.0, 3.0, 10.0] {
            let t = ConjugateTriple::new(Exponent::Infinity, fin(q)).unwrap();
            assert!(t.identity_defect().abs() < 1e-15);
        }
    }

    #[test]
    fn exponent_tokens_roundtrip_through_json() {
        let inf: Exponent = serde_json::from_str("\"inf\"").unwrap();
        assert!(inf.is_infinite());
        let two: Exponent = serde_json::from_str("2.0").unwrap();
        assert_eq!(two, Exponent::Finite(2.0));
        assert_eq!(serde_json::to_string(&inf).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&two).unwrap(), "2.0");
    }

    #[test]
    fn degenerate_root_convention() {
        // x^(1/r) with r = inf is 1, even for x = 0
        assert_eq!(Exponent::Infinity.root(0.0), 1.0);
        assert_eq!(Exponent::Infinity.root(123.4), 1.0);
    }
}
