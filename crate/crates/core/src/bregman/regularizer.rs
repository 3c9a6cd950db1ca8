use std::f64::consts::{E, FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Separable entropic regularizer `Ω(p) = Σ_a f(p_a) + c`.
///
/// | kind    | f(x)                    | c          |
/// |---------|-------------------------|------------|
/// | shannon | x ln x                  | 0          |
/// | tsallis | k x^q / (q-1)           | -k / (q-1) |
/// | exp     | x e^x                   | -e         |
/// | cos     | -x cos(πx/2)            | 0          |
/// | sin     | x sin(πx/2)             | -1         |
///
/// On the simplex each row equals `-Σ p φ(p)` (or `+Σ p ln p` for Shannon),
/// and every kernel except `sin` is strictly convex on `(0, 1]`. The `sin`
/// kernel is convex only up to [`sin_convex_limit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    Shannon,
    Tsallis { q: f64, k: f64 },
    Exp,
    Cos,
    Sin,
}

impl Regularizer {
    pub fn tsallis(q: f64, k: f64) -> Result<Self> {
        if !(q.is_finite() && q > 1.0) {
            return Err(Error::ParseRegularizer(format!("tsallis q must be > 1, got {q}")));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::ParseRegularizer(format!("tsallis k must be > 0, got {k}")));
        }
        Ok(Regularizer::Tsallis { q, k })
    }

    /// Shannon, Tsallis(q=2, k=1), exp, cos, sin.
    pub fn all_default() -> [Regularizer; 5] {
        [
            Regularizer::Shannon,
            Regularizer::Tsallis { q: 2.0, k: 1.0 },
            Regularizer::Exp,
            Regularizer::Cos,
            Regularizer::Sin,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::Shannon => "shannon",
            Regularizer::Tsallis { .. } => "tsallis",
            Regularizer::Exp => "exp",
            Regularizer::Cos => "cos",
            Regularizer::Sin => "sin",
        }
    }

    /// Sign relative to `-E[φ(p)]` that makes the kernel convex.
    pub fn sign(&self) -> f64 {
        match self {
            Regularizer::Shannon => -1.0,
            _ => 1.0,
        }
    }

    /// Upper edge of the convex region of the kernel, if it ends before 1.
    pub fn convex_limit(&self) -> Option<f64> {
        match self {
            Regularizer::Sin => Some(sin_convex_limit()),
            _ => None,
        }
    }

    fn constant(&self) -> f64 {
        match *self {
            Regularizer::Tsallis { q, k } => -k / (q - 1.0),
            Regularizer::Exp => -E,
            Regularizer::Sin => -1.0,
            Regularizer::Shannon | Regularizer::Cos => 0.0,
        }
    }

    /// Kernel `f(x)`.
    pub fn f(&self, x: f64) -> f64 {
        match *self {
            Regularizer::Shannon => x * x.ln(),
            Regularizer::Tsallis { q, k } => k * x.powf(q) / (q - 1.0),
            Regularizer::Exp => x * x.exp(),
            Regularizer::Cos => -x * (FRAC_PI_2 * x).cos(),
            Regularizer::Sin => x * (FRAC_PI_2 * x).sin(),
        }
    }

    /// Kernel derivative `f'(x)`, the coordinate of `∇Ω`.
    pub fn df(&self, x: f64) -> f64 {
        match *self {
            Regularizer::Shannon => 1.0 + x.ln(),
            Regularizer::Tsallis { q, k } => k * q * x.powf(q - 1.0) / (q - 1.0),
            Regularizer::Exp => (1.0 + x) * x.exp(),
            Regularizer::Cos => {
                let a = FRAC_PI_2 * x;
                -a.cos() + a * a.sin()
            }
            Regularizer::Sin => {
                let a = FRAC_PI_2 * x;
                a.sin() + a * a.cos()
            }
        }
    }

    /// Kernel second derivative `f''(x)`.
    pub fn d2f(&self, x: f64) -> f64 {
        match *self {
            Regularizer::Shannon => 1.0 / x,
            Regularizer::Tsallis { q, k } => k * q * x.powf(q - 2.0),
            Regularizer::Exp => (2.0 + x) * x.exp(),
            Regularizer::Cos => {
                let a = FRAC_PI_2 * x;
                PI * a.sin() + FRAC_PI_2 * a * a.cos()
            }
            Regularizer::Sin => {
                let a = FRAC_PI_2 * x;
                PI * a.cos() - FRAC_PI_2 * a * a.sin()
            }
        }
    }

    /// `f'` continued to `x ≤ 0`, used when projecting infeasible points.
    pub(crate) fn df_extended(&self, x: f64) -> f64 {
        if x > 0.0 {
            return self.df(x);
        }
        match *self {
            Regularizer::Shannon => f64::NEG_INFINITY,
            Regularizer::Tsallis { q, k } => -k * q * (-x).powf(q - 1.0) / (q - 1.0),
            Regularizer::Exp => 1.0 + 2.0 * x,
            Regularizer::Cos => -1.0,
            Regularizer::Sin => PI * x,
        }
    }

    /// Right end of the interval on which `f'` is inverted.
    pub(crate) fn inverse_domain_max(&self) -> f64 {
        self.convex_limit().unwrap_or(1.0)
    }

    /// Inverse of `f'` on `[0, inverse_domain_max]`, saturating at both ends.
    pub(crate) fn df_inverse(&self, v: f64) -> f64 {
        match *self {
            Regularizer::Shannon => (v - 1.0).exp().min(1.0),
            Regularizer::Tsallis { q, k } => {
                if v <= 0.0 {
                    0.0
                } else {
                    ((q - 1.0) * v / (k * q)).powf(1.0 / (q - 1.0)).min(1.0)
                }
            }
            _ => self.df_inverse_numeric(v, f64::NAN),
        }
    }

    /// [`Regularizer::df_inverse`] with Newton started from `guess` when it
    /// lies inside the domain.
    pub(crate) fn df_inverse_near(&self, v: f64, guess: f64) -> f64 {
        match *self {
            Regularizer::Shannon | Regularizer::Tsallis { .. } => self.df_inverse(v),
            _ => self.df_inverse_numeric(v, guess),
        }
    }

    fn df_inverse_numeric(&self, v: f64, guess: f64) -> f64 {
        let hi_x = self.inverse_domain_max();
        if v.is_nan() {
            return f64::NAN;
        }
        if v <= self.df(0.0) {
            return 0.0;
        }
        if v >= self.df(hi_x) {
            return hi_x;
        }
        let (mut lo, mut hi) = (0.0, hi_x);
        let mut x = if guess > 0.0 && guess < hi_x { guess } else { 0.5 * hi_x };
        for _ in 0..100 {
            let r = self.df(x) - v;
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let slope = self.d2f(x);
            let mut next = x - r / slope;
            if !(slope > 0.0) || !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 4.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE) || hi - lo <= f64::EPSILON * hi {
                return next;
            }
            x = next;
        }
        x
    }

    /// `Ω(p)` on an arbitrary slice.
    pub fn value(&self, p: &[f64]) -> f64 {
        p.iter().map(|&x| self.f(x)).sum::<f64>() + self.constant()
    }

    /// `∇Ω(p)` on an arbitrary slice.
    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        p.iter().map(|&x| self.df(x)).collect()
    }

    /// `D_Ω(p ‖ q)` with cancellation-aware forms for Shannon and Tsallis.
    pub fn divergence(&self, p: &[f64], q: &[f64]) -> f64 {
        p.iter()
            .zip(q)
            .map(|(&x, &y)| match *self {
                Regularizer::Shannon => x * (x / y).ln() - x + y,
                Regularizer::Tsallis { q: qq, k } => {
                    let d = x - y;
                    k / (qq - 1.0) * (x.powf(qq) - y.powf(qq) - qq * y.powf(qq - 1.0) * d)
                }
                _ => self.f(x) - self.f(y) - self.df(y) * (x - y),
            })
            .sum()
    }
}

/// Root of `x tan(πx/2) = 4/π`, past which `x sin(πx/2)` is concave.
pub fn sin_convex_limit() -> f64 {
    static LIMIT: OnceLock<f64> = OnceLock::new();
    *LIMIT.get_or_init(|| {
        let h = |x: f64| Regularizer::Sin.d2f(x);
        let (mut lo, mut hi) = (0.5, 0.9);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    })
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularizer::Tsallis { q, k } => write!(f, "tsallis:q={q},k={k}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, args) = match s.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a)),
            None => (s, None),
        };
        let simple = |r: Regularizer| match args {
            Some(a) if !a.trim().is_empty() => Err(Error::ParseRegularizer(format!("{head} takes no parameters"))),
            _ => Ok(r),
        };
        match head.to_ascii_lowercase().as_str() {
            "shannon" => simple(Regularizer::Shannon),
            "exp" => simple(Regularizer::Exp),
            "cos" => simple(Regularizer::Cos),
            "sin" => simple(Regularizer::Sin),
            "tsallis" => {
                let (mut q, mut k) = (2.0, 1.0);
                for part in args.unwrap_or("").split(',').filter(|p| !p.trim().is_empty()) {
                    let (key, val) = part
                        .split_once('=')
                        .ok_or_else(|| Error::ParseRegularizer(format!("expected key=value, got `{part}`")))?;
                    let val: f64 = val
                        .trim()
                        .parse()
                        .map_err(|_| Error::ParseRegularizer(format!("bad number `{val}`")))?;
                    match key.trim() {
                        "q" => q = val,
                        "k" => k = val,
                        other => return Err(Error::ParseRegularizer(format!("unknown tsallis parameter `{other}`"))),
                    }
                }
                Regularizer::tsallis(q, k)
            }
            other => Err(Error::ParseRegularizer(format!("unknown regularizer `{other}`"))),
        }
    }
}

impl serde::Serialize for Regularizer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Regularizer {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parse_round_trip() {
        for s in ["shannon", "exp", "cos", "sin", "tsallis:q=1.5,k=2"] {
            let r: Regularizer = s.parse().unwrap();
            assert_eq!(r.to_string().parse::<Regularizer>().unwrap(), r);
        }
        assert_eq!(
            "tsallis".parse::<Regularizer>().unwrap(),
            Regularizer::Tsallis { q: 2.0, k: 1.0 }
        );
        assert!("tsallis:q=1".parse::<Regularizer>().is_err());
        assert!("tsallis:q=2,k=-1".parse::<Regularizer>().is_err());
        assert!("renyi".parse::<Regularizer>().is_err());
        assert!("shannon:q=2".parse::<Regularizer>().is_err());
    }

    #[test]
    fn sin_limit_root() {
        let x = sin_convex_limit();
        assert_relative_eq!(x * (FRAC_PI_2 * x).tan(), 4.0 / PI, max_relative = 1e-10);
        assert!(x > 0.68 && x < 0.69);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for reg in Regularizer::all_default() {
            for &x in &[0.05, 0.3, 0.6] {
                let fd = (reg.f(x + h) - reg.f(x - h)) / (2.0 * h);
                assert_relative_eq!(reg.df(x), fd, max_relative = 1e-7);
                let fd2 = (reg.df(x + h) - reg.df(x - h)) / (2.0 * h);
                assert_relative_eq!(reg.d2f(x), fd2, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn inverse_round_trips() {
        for reg in Regularizer::all_default() {
            for &x in &[1e-4, 0.1, 0.4, 0.65] {
                let v = reg.df(x);
                let back = reg.df_inverse(v);
                assert_relative_eq!(back, x, max_relative = 1e-6);
                assert!(
                    (reg.df(back) - v).abs() <= 16.0 * f64::EPSILON * v.abs().max(1.0),
                    "{reg} {x} {}",
                    reg.df(back) - v
                );
            }
        }
    }

    #[test]
    fn extension_is_monotone_through_zero() {
        for reg in Regularizer::all_default() {
            let a = reg.df_extended(-0.1);
            let b = reg.df_extended(1e-9);
            assert!(a <= b, "{reg}: {a} > {b}");
        }
    }

    #[test]
    fn tsallis_approaches_shannon() {
        let p = [0.2, 0.3, 0.5];
        let q = [0.4, 0.4, 0.2];
        let kl = Regularizer::Shannon.divergence(&p, &q);
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let t = Regularizer::Tsallis { q: 1.0 + eps, k: 1.0 };
            let gap = (t.divergence(&p, &q) - kl).abs();
            assert!(gap < 2.0 * eps, "gap {gap} at q-1={eps}");
            assert!(gap < prev);
            prev = gap;
        }
    }
}
