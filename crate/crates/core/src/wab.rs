//! The Lie algebra W(a,b) with basis `{L_m, I_m : m ∈ ℤ}` and brackets
//!
//! ```text
//! [L_m, L_n] = (m - n) L_{m+n}
//! [L_m, I_n] = -(n + a + b·m) I_{m+n}
//! [I_m, I_n] = 0
//! ```
//!
//! plus the degree-shift isomorphism `W(a,b) → W(a+k,b)`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adds two degrees, panicking on overflow.
pub(crate) fn deg_add(x: i64, y: i64) -> i64 {
    x.checked_add(y).expect("degree overflow")
}

/// Which half of the basis a vector belongs to. `L` sorts before `I`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tag {
    L,
    I,
}

impl Tag {
    pub const ALL: [Tag; 2] = [Tag::L, Tag::I];
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::L => "L",
            Tag::I => "I",
        })
    }
}

/// `L_m` or `I_m`. Ordered by `(tag, degree)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisVector {
    pub tag: Tag,
    pub degree: i64,
}

impl BasisVector {
    pub const fn new(tag: Tag, degree: i64) -> Self {
        BasisVector { tag, degree }
    }

    #[allow(non_snake_case)]
    pub const fn L(degree: i64) -> Self {
        BasisVector::new(Tag::L, degree)
    }

    #[allow(non_snake_case)]
    pub const fn I(degree: i64) -> Self {
        BasisVector::new(Tag::I, degree)
    }

    /// All basis vectors with `|degree| <= radius`, in basis order.
    pub fn window(radius: i64) -> impl Iterator<Item = BasisVector> + Clone {
        Tag::ALL
            .into_iter()
            .flat_map(move |tag| (-radius..=radius).map(move |m| BasisVector::new(tag, m)))
    }

    pub fn within(&self, radius: i64) -> bool {
        self.degree.abs() <= radius
    }
}

impl fmt::Display for BasisVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.tag, self.degree)
    }
}

impl FromStr for BasisVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("invalid basis vector `{s}`"));
        let tag = match s.chars().next() {
            Some('L') => Tag::L,
            Some('I') => Tag::I,
            _ => return Err(bad()),
        };
        let inner = s[1..]
            .trim()
            .strip_prefix('[')
            .and_then(|x| x.strip_suffix(']'))
            .ok_or_else(bad)?;
        let degree = inner.trim().parse().map_err(|_| bad())?;
        Ok(BasisVector::new(tag, degree))
    }
}

/// A finite linear combination of basis vectors. Zero coefficients are never
/// stored, so equality is map equality.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Element {
    terms: BTreeMap<BasisVector, Scalar>,
}

impl Element {
    pub fn zero() -> Self {
        Element::default()
    }

    pub fn basis(v: BasisVector) -> Self {
        Element::term(Scalar::one(), v)
    }

    pub fn term(coeff: Scalar, v: BasisVector) -> Self {
        let mut e = Element::zero();
        e.add_term(coeff, v);
        e
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Scalar, BasisVector)>) -> Self {
        let mut e = Element::zero();
        for (c, v) in terms {
            e.add_term(c, v);
        }
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, v: &BasisVector) -> Scalar {
        self.terms.get(v).cloned().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BasisVector, &Scalar)> {
        self.terms.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = BasisVector> + '_ {
        self.terms.keys().copied()
    }

    /// Adds `coeff · v` in place, dropping the entry if it cancels.
    pub fn add_term(&mut self, coeff: Scalar, v: BasisVector) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.get_mut(&v) {
            Some(c) => {
                *c += &coeff;
                if c.is_zero() {
                    self.terms.remove(&v);
                }
            }
            None => {
                self.terms.insert(v, coeff);
            }
        }
    }

    pub fn add_scaled(&mut self, coeff: &Scalar, other: &Element) {
        if coeff.is_zero() {
            return;
        }
        for (v, c) in &other.terms {
            self.add_term(coeff * c, *v);
        }
    }

    pub fn scale(&self, coeff: &Scalar) -> Element {
        if coeff.is_zero() {
            return Element::zero();
        }
        Element {
            terms: self.terms.iter().map(|(v, c)| (*v, coeff * c)).collect(),
        }
    }

    pub fn neg(&self) -> Element {
        self.scale(&Scalar::int(-1))
    }

    pub fn add(&self, other: &Element) -> Element {
        let mut out = self.clone();
        out.add_scaled(&Scalar::one(), other);
        out
    }

    pub fn sub(&self, other: &Element) -> Element {
        let mut out = self.clone();
        out.add_scaled(&Scalar::int(-1), other);
        out
    }

    /// Applies `f` to every basis vector and re-expands linearly.
    pub fn map_basis(&self, f: impl Fn(BasisVector) -> BasisVector) -> Element {
        Element::from_terms(self.terms.iter().map(|(v, c)| (c.clone(), f(*v))))
    }

    /// True when every term has the given degree.
    pub fn is_homogeneous_of_degree(&self, degree: i64) -> bool {
        self.terms.keys().all(|v| v.degree == degree)
    }
}

impl fmt::Display for Element {
    /// `3/2*L[-1] + (0+1/1i)*I[4]`; the zero element prints as `0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (idx, (v, c)) in self.terms.iter().enumerate() {
            if idx > 0 {
                f.write_str(" + ")?;
            }
            if c.is_real() {
                write!(f, "{c}*{v}")?;
            } else {
                write!(f, "({c})*{v}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Element {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "0" {
            return Ok(Element::zero());
        }
        // split on '+' outside parentheses; complex coefficients are parenthesised
        let mut pieces = Vec::new();
        let mut depth = 0i32;
        let mut start = 0;
        for (idx, ch) in s.char_indices() {
            match ch {
                '(' | '[' => depth += 1,
                ')' | ']' => depth -= 1,
                '+' if depth == 0 => {
                    pieces.push(&s[start..idx]);
                    start = idx + 1;
                }
                _ => {}
            }
        }
        pieces.push(&s[start..]);
        let mut out = Element::zero();
        for piece in pieces {
            let piece = piece.trim();
            let (coeff, vec) = match piece.rsplit_once('*') {
                Some((c, v)) => (c.trim().parse::<Scalar>()?, v.parse::<BasisVector>()?),
                None => match piece.strip_prefix('-') {
                    Some(v) => (Scalar::int(-1), v.parse()?),
                    None => (Scalar::one(), piece.parse()?),
                },
            };
            out.add_term(coeff, vec);
        }
        Ok(out)
    }
}

impl From<BasisVector> for Element {
    fn from(v: BasisVector) -> Self {
        Element::basis(v)
    }
}

/// The parameters `(a, b)` of W(a,b).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Params {
    pub a: Scalar,
    pub b: Scalar,
}

impl Params {
    pub fn new(a: Scalar, b: Scalar) -> Self {
        Params { a, b }
    }

    /// Shorthand for rational parameters `(an/ad, bn/bd)`.
    pub fn rational(an: i64, ad: i64, bn: i64, bd: i64) -> Self {
        Params::new(Scalar::frac(an, ad), Scalar::frac(bn, bd))
    }

    pub fn ints(a: i64, b: i64) -> Self {
        Params::new(Scalar::int(a), Scalar::int(b))
    }

    /// `a` as an integer, when it is one.
    pub fn a_integer(&self) -> Option<i64> {
        self.a.to_i64()
    }

    pub fn b_integer(&self) -> Option<i64> {
        self.b.to_i64()
    }

    pub fn b_is(&self, value: i64) -> bool {
        self.b == Scalar::int(value)
    }

    /// Parameters of the codomain of the shift isomorphism by `k`.
    pub fn shifted(&self, k: i64) -> Params {
        Params::new(&self.a + &Scalar::int(k), self.b.clone())
    }

    /// Integer `j` such that `a - j` has real part in `[0, 1)`.
    pub fn normalizing_shift(&self) -> i64 {
        self.a
            .re
            .floor()
            .to_i64()
            .expect("parameter a out of machine range")
    }

    /// The isomorphic algebra with `Re(a)` moved into `[0, 1)`.
    pub fn normalized(&self) -> Params {
        self.shifted(-self.normalizing_shift())
    }

    /// The thirteen parameter points covering every branch of the
    /// biderivation classification.
    pub fn standard_grid() -> Vec<Params> {
        vec![
            Params::ints(0, 0),
            Params::ints(1, 0),
            Params::rational(1, 2, 0, 1),
            Params::ints(0, 1),
            Params::ints(2, 1),
            Params::rational(1, 2, 1, 1),
            Params::ints(0, -1),
            Params::ints(2, -1),
            Params::rational(1, 2, -1, 1),
            Params::ints(0, 2),
            Params::ints(3, 2),
            Params::rational(1, 3, 5, 2),
            Params::rational(1, 2, 3, 1),
        ]
    }

    /// Bracket of two basis vectors: a single term or zero.
    pub fn bracket_basis(&self, x: BasisVector, y: BasisVector) -> Option<(Scalar, BasisVector)> {
        let (m, n) = (x.degree, y.degree);
        let degree = deg_add(m, n);
        let (coeff, tag) = match (x.tag, y.tag) {
            (Tag::L, Tag::L) => (Scalar::int(m - n), Tag::L),
            // -(n + a + b m)
            (Tag::L, Tag::I) => (
                (&Scalar::int(n) + &self.a + &self.b * &Scalar::int(m)).neg(),
                Tag::I,
            ),
            // antisymmetry: [I_m, L_n] = -[L_n, I_m] = (m + a + b n) I_{m+n}
            (Tag::I, Tag::L) => return self
                .bracket_basis(y, x)
                .map(|(c, v)| (c.neg(), v)),
            (Tag::I, Tag::I) => return None,
        };
        if coeff.is_zero() {
            None
        } else {
            Some((coeff, BasisVector::new(tag, degree)))
        }
    }

    pub fn bracket(&self, x: &Element, y: &Element) -> Element {
        let mut out = Element::zero();
        for (u, cu) in x.iter() {
            for (v, cv) in y.iter() {
                if let Some((c, w)) = self.bracket_basis(*u, *v) {
                    out.add_term(&(cu * cv) * &c, w);
                }
            }
        }
        out
    }

    /// Jacobi residual `[x,[y,z]] + [y,[z,x]] + [z,[x,y]]`.
    pub fn check_jacobi(&self, x: &Element, y: &Element, z: &Element) -> Element {
        let mut out = self.bracket(x, &self.bracket(y, z));
        out = out.add(&self.bracket(y, &self.bracket(z, x)));
        out.add(&self.bracket(z, &self.bracket(x, y)))
    }

    /// `σ([x,y]_{a,b}) - [σx, σy]_{a+k,b}`, zero when σ is a homomorphism.
    pub fn check_shift_homomorphism(&self, k: i64, x: &Element, y: &Element) -> Element {
        let target = self.shifted(k);
        let lhs = shift_iso(k, &self.bracket(x, y));
        let rhs = target.bracket(&shift_iso(k, x), &shift_iso(k, y));
        lhs.sub(&rhs)
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W({}, {})", self.a, self.b)
    }
}

/// `σ(L_m) = L_m`, `σ(I_m) = I_{m-k}` on a single basis vector.
pub fn shift_basis(k: i64, v: BasisVector) -> BasisVector {
    match v.tag {
        Tag::L => v,
        Tag::I => BasisVector::I(deg_add(v.degree, -k)),
    }
}

/// The isomorphism `W(a,b) → W(a+k,b)` extended linearly.
pub fn shift_iso(k: i64, x: &Element) -> Element {
    x.map_basis(|v| shift_basis(k, v))
}
