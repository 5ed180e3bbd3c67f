//! Noise distributions, reduced to the raw moments needed for expectation.

use num_traits::{One, Zero};
use thiserror::Error;

use crate::poly::{int, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NoiseError {
    #[error("uniform noise needs lo < hi (got [{lo}, {hi}])")]
    EmptyUniform { lo: String, hi: String },
    #[error("noise dimension {dim}: second moment {m2} is below the squared mean {m1_sq}")]
    InvalidSecondMoment {
        dim: usize,
        m2: String,
        m1_sq: String,
    },
    #[error("noise dimension {dim}: moment of order {needed} requested but only {available} supplied")]
    MomentOrder {
        dim: usize,
        needed: u32,
        available: usize,
    },
    #[error("noise dimension {0} does not exist")]
    NoSuchDim(usize),
    #[error("noise dimension {dim}: support box [{lo}, {hi}] does not contain the distribution's support")]
    SupportMismatch { dim: usize, lo: String, hi: String },
}

/// Distribution family of a single noise dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NoiseFamily {
    Uniform { lo: Rational, hi: Rational },
    PointMass(Rational),
    /// Raw moments `m_1 .. m_K`.
    Moments(Vec<Rational>),
}

/// Componentwise independent noise over `p` dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct NoiseSpec {
    families: Vec<NoiseFamily>,
    support: Vec<Option<(Rational, Rational)>>,
}

impl NoiseSpec {
    pub fn new(families: Vec<NoiseFamily>) -> Result<Self, NoiseError> {
        let support = vec![None; families.len()];
        Self::with_support(families, support)
    }

    /// Attach optional explicit support boxes (required for explicit-moment
    /// dimensions whenever a bounded support is needed).
    pub fn with_support(
        families: Vec<NoiseFamily>,
        support: Vec<Option<(Rational, Rational)>>,
    ) -> Result<Self, NoiseError> {
        for (dim, fam) in families.iter().enumerate() {
            match fam {
                NoiseFamily::Uniform { lo, hi } if lo >= hi => {
                    return Err(NoiseError::EmptyUniform {
                        lo: lo.to_string(),
                        hi: hi.to_string(),
                    })
                }
                NoiseFamily::Moments(ms) if ms.len() >= 2 => {
                    let m1_sq = &ms[0] * &ms[0];
                    if ms[1] < m1_sq {
                        return Err(NoiseError::InvalidSecondMoment {
                            dim,
                            m2: ms[1].to_string(),
                            m1_sq: m1_sq.to_string(),
                        });
                    }
                }
                _ => {}
            }
            if let Some(Some((lo, hi))) = support.get(dim) {
                let ok = match fam {
                    NoiseFamily::Uniform { lo: a, hi: b } => lo <= a && b <= hi,
                    NoiseFamily::PointMass(v) => lo <= v && v <= hi,
                    NoiseFamily::Moments(_) => lo <= hi,
                };
                if !ok {
                    return Err(NoiseError::SupportMismatch {
                        dim,
                        lo: lo.to_string(),
                        hi: hi.to_string(),
                    });
                }
            }
        }
        let mut support = support;
        support.resize(families.len(), None);
        Ok(NoiseSpec { families, support })
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn dims(&self) -> usize {
        self.families.len()
    }

    pub fn family(&self, dim: usize) -> Option<&NoiseFamily> {
        self.families.get(dim)
    }

    pub fn families(&self) -> &[NoiseFamily] {
        &self.families
    }

    pub fn explicit_support(&self, dim: usize) -> Option<&(Rational, Rational)> {
        self.support.get(dim).and_then(|s| s.as_ref())
    }

    /// Bounded support `[lo, hi]` of one dimension, if known.
    pub fn support_box(&self, dim: usize) -> Option<(Rational, Rational)> {
        if let Some(s) = self.explicit_support(dim) {
            return Some(s.clone());
        }
        match self.families.get(dim)? {
            NoiseFamily::Uniform { lo, hi } => Some((lo.clone(), hi.clone())),
            NoiseFamily::PointMass(v) => Some((v.clone(), v.clone())),
            NoiseFamily::Moments(_) => None,
        }
    }

    /// Support boxes for every dimension, or `None` if any is unbounded.
    pub fn bounded_support(&self) -> Option<Vec<(Rational, Rational)>> {
        (0..self.dims()).map(|d| self.support_box(d)).collect()
    }

    /// Number of moments available (unbounded families report `usize::MAX`).
    pub fn available_moments(&self, dim: usize) -> usize {
        match self.families.get(dim) {
            Some(NoiseFamily::Moments(ms)) => ms.len(),
            Some(_) => usize::MAX,
            None => 0,
        }
    }

    pub fn is_samplable(&self) -> bool {
        self.families
            .iter()
            .all(|f| !matches!(f, NoiseFamily::Moments(_)))
    }

    /// Raw moments `[m_1, ..., m_k]` of one dimension.
    pub fn raw_moments(&self, dim: usize, k: u32) -> Result<Vec<Rational>, NoiseError> {
        let fam = self.families.get(dim).ok_or(NoiseError::NoSuchDim(dim))?;
        let out = match fam {
            NoiseFamily::Uniform { lo, hi } => (1..=k)
                .map(|i| {
                    let e = i as usize + 1;
                    (pow(hi, e) - pow(lo, e)) / (int(e as i64) * (hi - lo))
                })
                .collect(),
            NoiseFamily::PointMass(v) => (1..=k).map(|i| pow(v, i as usize)).collect(),
            NoiseFamily::Moments(ms) => {
                if ms.len() < k as usize {
                    return Err(NoiseError::MomentOrder {
                        dim,
                        needed: k,
                        available: ms.len(),
                    });
                }
                ms[..k as usize].to_vec()
            }
        };
        Ok(out)
    }
}

fn pow(r: &Rational, e: usize) -> Rational {
    let mut acc = Rational::one();
    for _ in 0..e {
        acc *= r;
    }
    if e == 0 {
        return Rational::one();
    }
    if acc.is_zero() {
        Rational::zero()
    } else {
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{rat, to_f64};
    use proptest::prelude::*;

    fn uniform(lo: Rational, hi: Rational) -> NoiseSpec {
        NoiseSpec::new(vec![NoiseFamily::Uniform { lo, hi }]).unwrap()
    }

    #[test]
    fn uniform_random_walk_moments() {
        let m = uniform(int(-2), int(1)).raw_moments(0, 3).unwrap();
        assert_eq!(m, vec![rat(-1, 2), int(1), rat(-5, 4)]);
    }

    #[test]
    fn uniform_unit_interval_moments() {
        let m = uniform(int(0), int(1)).raw_moments(0, 2).unwrap();
        assert_eq!(m, vec![rat(1, 2), rat(1, 3)]);
    }

    #[test]
    fn point_mass_zero() {
        let spec = NoiseSpec::new(vec![NoiseFamily::PointMass(int(0))]).unwrap();
        assert_eq!(spec.raw_moments(0, 5).unwrap(), vec![int(0); 5]);
    }

    #[test]
    fn explicit_moments_order_error() {
        let spec = NoiseSpec::new(vec![NoiseFamily::Moments(vec![int(0), int(1)])]).unwrap();
        assert_eq!(
            spec.raw_moments(0, 3),
            Err(NoiseError::MomentOrder {
                dim: 0,
                needed: 3,
                available: 2
            })
        );
        assert!(spec.support_box(0).is_none());
        assert!(!spec.is_samplable());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(matches!(
            NoiseSpec::new(vec![NoiseFamily::Uniform { lo: int(1), hi: int(1) }]),
            Err(NoiseError::EmptyUniform { .. })
        ));
        assert!(matches!(
            NoiseSpec::new(vec![NoiseFamily::Moments(vec![int(2), int(3)])]),
            Err(NoiseError::InvalidSecondMoment { .. })
        ));
        assert!(matches!(
            NoiseSpec::with_support(
                vec![NoiseFamily::Uniform { lo: int(-2), hi: int(1) }],
                vec![Some((int(-1), int(1)))]
            ),
            Err(NoiseError::SupportMismatch { .. })
        ));
    }

    /// Composite Simpson's rule on [a, b] for x^i / (b - a).
    fn simpson_moment(a: f64, b: f64, i: i32, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let f = |x: f64| x.powi(i);
        let mut s = f(a) + f(b);
        for j in 1..n {
            let x = a + h * j as f64;
            s += if j % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
        }
        s * h / 3.0 / (b - a)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn uniform_moments_match_quadrature(
            a in -40i64..40, da in 1i64..40, den in 1i64..8,
        ) {
            let lo = rat(a, den);
            let hi = rat(a + da, den);
            let (fa, fb) = (to_f64(&lo), to_f64(&hi));
            let ms = uniform(lo, hi).raw_moments(0, 6).unwrap();
            for (i, m) in ms.iter().enumerate() {
                let q = simpson_moment(fa, fb, i as i32 + 1, 100_000);
                let exact = to_f64(m);
                let tol = 1e-12 * exact.abs().max(1.0);
                prop_assert!((q - exact).abs() <= tol, "order {}: {} vs {}", i + 1, q, exact);
            }
        }

        #[test]
        fn symmetric_uniform_has_zero_odd_moments(c in 1i64..1000, den in 1i64..50) {
            let ms = uniform(rat(-c, den), rat(c, den)).raw_moments(0, 7).unwrap();
            for k in [0usize, 2, 4, 6] {
                prop_assert!(ms[k].is_zero());
            }
        }
    }
}
