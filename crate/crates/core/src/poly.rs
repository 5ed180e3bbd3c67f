//! Exact multivariate polynomial arithmetic.
//!
//! A single generic sparse representation [`Poly<V, C>`] is used at two
//! levels: [`Coeff`] is a polynomial over template [`Unknown`]s with rational
//! coefficients, and [`ParamPoly`] is a polynomial over the system variables
//! ([`Var`]) whose coefficients are [`Coeff`]s. A `ParamPoly` with only
//! constant coefficients is an ordinary concrete polynomial.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::dists::NoiseSpec;

pub type Rational = BigRational;

/// Build a rational from two machine integers.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Exact conversion of a finite `f64` into a rational.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Very large numerators/denominators overflow `to_f64`; scale first.
        let n = r.numer().bits() as i64;
        let d = r.denom().bits() as i64;
        let shift = (n - d).clamp(-1000, 1000);
        let scaled = if shift >= 0 {
            r / Rational::from_integer(BigInt::one() << shift as usize)
        } else {
            r * Rational::from_integer(BigInt::one() << (-shift) as usize)
        };
        scaled.to_f64().unwrap_or(f64::NAN) * 2f64.powi(shift as i32)
    })
}

/// Render a rational as `n` or `n/d`.
pub fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("no value bound for variable `{0}`")]
    UnboundVariable(String),
    #[error("no value bound for unknown `{0}`")]
    UnboundUnknown(String),
    #[error("expectation needs raw moment of order {needed} for noise dimension {dim}, only {available} available")]
    MomentOrder {
        dim: usize,
        needed: u32,
        available: usize,
    },
}

/// A system variable: state, noise or input dimension (zero based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    State(u16),
    Noise(u16),
    Input(u16),
}

impl Var {
    pub fn is_noise(self) -> bool {
        matches!(self, Var::Noise(_))
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::State(i) => write!(f, "x{}", i + 1),
            Var::Noise(i) => write!(f, "w{}", i + 1),
            Var::Input(i) => write!(f, "u{}", i + 1),
        }
    }
}

/// An interned unknown coefficient. Ordering follows allocation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Unknown(pub u32);

/// Name table for unknowns; ids are dense and allocated in order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Symbols {
    names: Vec<String>,
}

impl Symbols {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh(&mut self, name: impl Into<String>) -> Unknown {
        let id = Unknown(self.names.len() as u32);
        self.names.push(name.into());
        id
    }

    pub fn name(&self, u: Unknown) -> &str {
        &self.names[u.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Unknown> + '_ {
        (0..self.names.len() as u32).map(Unknown)
    }

    pub fn lookup(&self, name: &str) -> Option<Unknown> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| Unknown(i as u32))
    }
}

/// Coefficient ring used by [`Poly`].
pub trait Ring: Clone + PartialEq + fmt::Debug {
    fn r_zero() -> Self;
    fn r_one() -> Self;
    fn is_zero(&self) -> bool;
    fn add_ref(&self, other: &Self) -> Self;
    fn mul_ref(&self, other: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    fn from_rational(r: Rational) -> Self;
}

impl Ring for Rational {
    fn r_zero() -> Self {
        Zero::zero()
    }
    fn r_one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn from_rational(r: Rational) -> Self {
        r
    }
}

/// A power product, kept sorted by variable with no zero exponents.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial<V>(Vec<(V, u32)>);

impl<V: Copy + Ord> Monomial<V> {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: V) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn from_powers(mut powers: Vec<(V, u32)>) -> Self {
        powers.retain(|&(_, e)| e > 0);
        powers.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(V, u32)> = Vec::with_capacity(powers.len());
        for (v, e) in powers {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += e,
                _ => out.push((v, e)),
            }
        }
        Monomial(out)
    }

    pub fn powers(&self) -> &[(V, u32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn degree_in(&self, v: V) -> u32 {
        self.0
            .iter()
            .find(|&&(w, _)| w == v)
            .map(|&(_, e)| e)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// Split into (part over variables satisfying `pred`, the rest).
    pub fn split(&self, pred: impl Fn(V) -> bool) -> (Self, Self) {
        let (a, b): (Vec<_>, Vec<_>) = self.0.iter().partition(|&&(v, _)| pred(v));
        (Monomial(a), Monomial(b))
    }
}

/// Sparse polynomial with variables `V` and coefficients in the ring `C`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Poly<V: Ord, C> {
    terms: BTreeMap<Monomial<V>, C>,
}

/// Polynomial over template unknowns (affine in verification mode).
pub type Coeff = Poly<Unknown, Rational>;

/// Polynomial over system variables with unknown-valued coefficients.
pub type ParamPoly = Poly<Var, Coeff>;

impl<V: Copy + Ord + fmt::Debug, C: Ring> Poly<V, C> {
    pub fn zero() -> Self {
        Poly {
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: C) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn rational(r: Rational) -> Self {
        Self::constant(C::from_rational(r))
    }

    pub fn int(n: i64) -> Self {
        Self::rational(int(n))
    }

    pub fn var(v: V) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::var(v), C::r_one());
        p
    }

    pub fn term(m: Monomial<V>, c: C) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn add_term(&mut self, m: Monomial<V>, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get().add_ref(&c);
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial<V>, &C)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial<V>) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::r_zero)
    }

    pub fn constant_term(&self) -> C {
        self.coeff(&Monomial::one())
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.is_one())
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn degree_in(&self, v: V) -> u32 {
        self.terms.keys().map(|m| m.degree_in(v)).max().unwrap_or(0)
    }

    /// Total degree restricted to variables satisfying `pred`.
    pub fn degree_by(&self, pred: impl Fn(V) -> bool + Copy) -> u32 {
        self.terms
            .keys()
            .map(|m| m.split(pred).0.degree())
            .max()
            .unwrap_or(0)
    }

    pub fn vars(&self) -> BTreeSet<V> {
        self.terms
            .keys()
            .flat_map(|m| m.powers().iter().map(|&(v, _)| v))
            .collect()
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        let mut out = Self::zero();
        for (m, k) in &self.terms {
            out.add_term(m.clone(), k.mul_ref(c));
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::constant(C::r_one());
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    pub fn map_coeffs<D: Ring>(&self, f: impl Fn(&C) -> D) -> Poly<V, D> {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    /// Replace variables by polynomials; unbound variables are kept.
    pub fn substitute(&self, bind: impl Fn(V) -> Option<Poly<V, C>>) -> Self {
        let mut cache: BTreeMap<(V, u32), Self> = BTreeMap::new();
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut acc = Self::constant(c.clone());
            let mut kept = Vec::new();
            for &(v, e) in m.powers() {
                match bind(v) {
                    Some(b) => {
                        let pw = cache.entry((v, e)).or_insert_with(|| b.pow(e)).clone();
                        acc = &acc * &pw;
                    }
                    None => kept.push((v, e)),
                }
            }
            if !kept.is_empty() {
                acc = &acc * &Self::term(Monomial::from_powers(kept), C::r_one());
            }
            out = &out + &acc;
        }
        out
    }

    /// Evaluate with values for variables and a coefficient evaluator.
    pub fn eval_with<T, E>(
        &self,
        var_value: impl Fn(V) -> Result<T, E>,
        coeff_value: impl Fn(&C) -> Result<T, E>,
    ) -> Result<T, E>
    where
        T: Clone + Zero + One + for<'a> Mul<&'a T, Output = T>,
    {
        let mut total = T::zero();
        for (m, c) in &self.terms {
            let mut t = coeff_value(c)?;
            for &(v, e) in m.powers() {
                let x = var_value(v)?;
                for _ in 0..e {
                    t = t * &x;
                }
            }
            total = total + t;
        }
        Ok(total)
    }
}

impl<V: Copy + Ord + fmt::Debug, C: Ring> Ring for Poly<V, C> {
    fn r_zero() -> Self {
        Poly::zero()
    }
    fn r_one() -> Self {
        Poly::constant(C::r_one())
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn from_rational(r: Rational) -> Self {
        Poly::constant(C::from_rational(r))
    }
}

impl<'a, V: Copy + Ord + fmt::Debug, C: Ring> Add for &'a Poly<V, C> {
    type Output = Poly<V, C>;
    fn add(self, rhs: Self) -> Poly<V, C> {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl<'a, V: Copy + Ord + fmt::Debug, C: Ring> Sub for &'a Poly<V, C> {
    type Output = Poly<V, C>;
    fn sub(self, rhs: Self) -> Poly<V, C> {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.neg_ref());
        }
        out
    }
}

impl<'a, V: Copy + Ord + fmt::Debug, C: Ring> Mul for &'a Poly<V, C> {
    type Output = Poly<V, C>;
    fn mul(self, rhs: Self) -> Poly<V, C> {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1.mul_ref(c2));
            }
        }
        out
    }
}

impl<'a, V: Copy + Ord + fmt::Debug, C: Ring> Neg for &'a Poly<V, C> {
    type Output = Poly<V, C>;
    fn neg(self) -> Poly<V, C> {
        self.map_coeffs(|c| c.neg_ref())
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl<V: Copy + Ord + fmt::Debug, C: Ring> $tr for Poly<V, C> {
            type Output = Poly<V, C>;
            fn $m(self, rhs: Self) -> Poly<V, C> {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl<V: Copy + Ord + fmt::Debug, C: Ring> Neg for Poly<V, C> {
    type Output = Poly<V, C>;
    fn neg(self) -> Poly<V, C> {
        -&self
    }
}

// ---------------------------------------------------------------------------
// Coefficients over unknowns.

impl Coeff {
    pub fn unknown(u: Unknown) -> Self {
        Poly::var(u)
    }

    /// The value if the coefficient contains no unknowns.
    pub fn as_constant(&self) -> Option<Rational> {
        if self.is_constant() {
            Some(self.constant_term())
        } else {
            None
        }
    }

    pub fn unknowns(&self) -> BTreeSet<Unknown> {
        self.vars()
    }

    pub fn is_affine(&self) -> bool {
        self.degree() <= 1
    }

    pub fn eval_unknowns(
        &self,
        assignment: &BTreeMap<Unknown, Rational>,
        symbols: Option<&Symbols>,
    ) -> Result<Rational, PolyError> {
        self.eval_with(
            |u| {
                assignment.get(&u).cloned().ok_or_else(|| {
                    PolyError::UnboundUnknown(
                        symbols
                            .map(|s| s.name(u).to_string())
                            .unwrap_or_else(|| format!("#{}", u.0)),
                    )
                })
            },
            |c| Ok(c.clone()),
        )
    }

    /// Render with unknown names, e.g. `2*a*b + -1/3`.
    pub fn render(&self, symbols: &Symbols) -> String {
        render_generic(self, |u| symbols.name(u).to_string(), fmt_rational)
    }
}

// ---------------------------------------------------------------------------
// Polynomials over system variables.

impl ParamPoly {
    pub fn from_rational_poly(p: &Poly<Var, Rational>) -> Self {
        p.map_coeffs(|c| Coeff::constant(c.clone()))
    }

    pub fn unknowns(&self) -> BTreeSet<Unknown> {
        self.terms()
            .flat_map(|(_, c)| c.unknowns().into_iter())
            .collect()
    }

    pub fn is_concrete(&self) -> bool {
        self.terms().all(|(_, c)| c.is_constant())
    }

    /// Concrete rational coefficients, if the polynomial has no unknowns.
    pub fn to_concrete(&self) -> Option<Poly<Var, Rational>> {
        if !self.is_concrete() {
            return None;
        }
        Some(self.map_coeffs(|c| c.constant_term()))
    }

    /// Replace all unknowns by values.
    pub fn assign(
        &self,
        assignment: &BTreeMap<Unknown, Rational>,
        symbols: Option<&Symbols>,
    ) -> Result<ParamPoly, PolyError> {
        let mut out = ParamPoly::zero();
        for (m, c) in self.terms() {
            out.add_term(
                m.clone(),
                Coeff::constant(c.eval_unknowns(assignment, symbols)?),
            );
        }
        Ok(out)
    }

    pub fn has_noise(&self) -> bool {
        self.vars().into_iter().any(Var::is_noise)
    }

    /// Exact value at a point under an assignment of the unknowns.
    pub fn eval(
        &self,
        point: &BTreeMap<Var, Rational>,
        assignment: &BTreeMap<Unknown, Rational>,
    ) -> Result<Rational, PolyError> {
        self.eval_with(
            |v| {
                point
                    .get(&v)
                    .cloned()
                    .ok_or_else(|| PolyError::UnboundVariable(v.to_string()))
            },
            |c| c.eval_unknowns(assignment, None),
        )
    }

    /// Substitute polynomials for variables (all others untouched).
    pub fn compose(&self, bindings: &BTreeMap<Var, ParamPoly>) -> ParamPoly {
        self.substitute(|v| bindings.get(&v).cloned())
    }

    /// Expectation over the noise variables using raw moments. Noise
    /// dimensions are independent, so `E[w1^a w2^b] = m_a(w1) m_b(w2)`.
    pub fn expect_over_noise(&self, noise: &NoiseSpec) -> Result<ParamPoly, PolyError> {
        let mut needed: BTreeMap<u16, u32> = BTreeMap::new();
        for (m, _) in self.terms() {
            for &(v, e) in m.powers() {
                if let Var::Noise(i) = v {
                    let slot = needed.entry(i).or_insert(0);
                    *slot = (*slot).max(e);
                }
            }
        }
        let mut moments: BTreeMap<u16, Vec<Rational>> = BTreeMap::new();
        for (&i, &k) in &needed {
            let ms = noise.raw_moments(i as usize, k).map_err(|_| PolyError::MomentOrder {
                dim: i as usize,
                needed: k,
                available: noise.available_moments(i as usize),
            })?;
            moments.insert(i, ms);
        }
        let mut out = ParamPoly::zero();
        for (m, c) in self.terms() {
            let (noise_part, rest) = m.split(Var::is_noise);
            let mut factor = Rational::one();
            for &(v, e) in noise_part.powers() {
                if let Var::Noise(i) = v {
                    factor *= &moments[&i][e as usize - 1];
                }
            }
            out.add_term(rest, c.scale(&factor));
        }
        Ok(out)
    }

    /// Render using a naming function for variables.
    pub fn render(&self, names: &dyn Fn(Var) -> String, symbols: Option<&Symbols>) -> String {
        render_generic(self, names, |c: &Coeff| match c.as_constant() {
            Some(r) => fmt_rational(&r),
            None => match symbols {
                Some(s) => format!("({})", c.render(s)),
                None => format!("({})", render_generic(c, |u| format!("#{}", u.0), fmt_rational)),
            },
        })
    }
}

/// Generic renderer: `c*m + c*m`, constant coefficients folded, `^` for powers.
fn render_generic<V: Copy + Ord + fmt::Debug, C: Ring>(
    p: &Poly<V, C>,
    names: impl Fn(V) -> String,
    coeff: impl Fn(&C) -> String,
) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut parts: Vec<String> = Vec::new();
    for (m, c) in p.terms() {
        let cs = coeff(c);
        let mono: Vec<String> = m
            .powers()
            .iter()
            .map(|&(v, e)| {
                if e == 1 {
                    names(v)
                } else {
                    format!("{}^{}", names(v), e)
                }
            })
            .collect();
        let piece = if mono.is_empty() {
            cs
        } else if cs == "1" {
            mono.join("*")
        } else if cs == "-1" {
            format!("-{}", mono.join("*"))
        } else {
            format!("{}*{}", cs, mono.join("*"))
        };
        parts.push(piece);
    }
    let mut out = String::new();
    for (i, part) in parts.iter().enumerate() {
        if i == 0 {
            out.push_str(part);
        } else if let Some(rest) = part.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(rest);
        } else {
            out.push_str(" + ");
            out.push_str(part);
        }
    }
    out
}

impl fmt::Display for Poly<Var, Rational> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_generic(self, |v| v.to_string(), fmt_rational))
    }
}

impl fmt::Display for ParamPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&|v| v.to_string(), None))
    }
}

/// Evaluation helper for the common all-rational case.
pub fn eval_concrete(p: &ParamPoly, point: &BTreeMap<Var, Rational>) -> Result<Rational, PolyError> {
    p.eval(point, &BTreeMap::new())
}

/// Sign of a rational as -1, 0, 1.
pub fn sign(r: &Rational) -> i32 {
    if r.is_positive() {
        1
    } else if r.is_negative() {
        -1
    } else {
        0
    }
}

/// Compiled floating-point evaluator for concrete polynomials, used by the
/// simulator and the sampling falsifier.
#[derive(Clone, Debug)]
pub struct FastPoly {
    terms: Vec<(f64, Vec<(usize, u32)>)>,
}

impl FastPoly {
    /// `slot` maps each variable to an index in the evaluation buffer.
    pub fn compile(p: &ParamPoly, slot: &dyn Fn(Var) -> usize) -> Option<Self> {
        let mut terms = Vec::new();
        for (m, c) in p.terms() {
            let k = to_f64(&c.as_constant()?);
            let powers = m.powers().iter().map(|&(v, e)| (slot(v), e)).collect();
            terms.push((k, powers));
        }
        Some(FastPoly { terms })
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        let mut total = 0.0;
        for (k, powers) in &self.terms {
            let mut t = *k;
            for &(i, e) in powers {
                t *= values[i].powi(e as i32);
            }
            total += t;
        }
        total
    }
}
