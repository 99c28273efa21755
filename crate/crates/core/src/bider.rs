//! Bilinear maps on windows of W(a,b), biderivations, the closed-form
//! biderivation families, and the per-degree biderivation solver.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::RangeInclusive;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{canonical_basis, span_mismatch, Echelon, SparseVec};
use crate::linmap::{check_window, derivation_kernel, derivation_rows, DerivationIndex, SymbolicElement};
use crate::scalar::Scalar;
use crate::wab::{deg_add, shift_basis, shift_iso, BasisVector, Element, Params, Tag};

/// A bilinear map tabulated on basis pairs with both degrees in `[-radius, radius]`.
///
/// Missing pairs map to zero. With `shift = Some(k)` the value at a pair of
/// degrees `(m, n)` is supported in degree `m + n + k`.
#[derive(Clone, PartialEq, Eq)]
pub struct WindowedBilinearMap {
    radius: i64,
    shift: Option<i64>,
    values: BTreeMap<(BasisVector, BasisVector), Element>,
}

impl WindowedBilinearMap {
    pub fn zero(radius: i64, shift: Option<i64>) -> Self {
        WindowedBilinearMap {
            radius,
            shift,
            values: BTreeMap::new(),
        }
    }

    pub fn from_fn(
        radius: i64,
        shift: Option<i64>,
        mut f: impl FnMut(BasisVector, BasisVector) -> Element,
    ) -> Result<Self> {
        let mut map = WindowedBilinearMap::zero(radius, shift);
        for x in BasisVector::window(radius) {
            for y in BasisVector::window(radius) {
                map.insert(x, y, f(x, y))?;
            }
        }
        Ok(map)
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn shift(&self) -> Option<i64> {
        self.shift
    }

    pub fn insert(&mut self, x: BasisVector, y: BasisVector, value: Element) -> Result<()> {
        if !x.within(self.radius) || !y.within(self.radius) {
            return Err(Error::InvalidMap(format!(
                "pair ({x}, {y}) outside radius {}",
                self.radius
            )));
        }
        if let Some(k) = self.shift {
            let target = deg_add(deg_add(x.degree, y.degree), k);
            if !value.is_homogeneous_of_degree(target) {
                return Err(Error::InvalidMap(format!(
                    "value {value} at ({x}, {y}) is not in degree {target}"
                )));
            }
        }
        if value.is_zero() {
            self.values.remove(&(x, y));
        } else {
            self.values.insert((x, y), value);
        }
        Ok(())
    }

    /// The value at `(x, y)`, or `None` outside the window.
    pub fn get(&self, x: BasisVector, y: BasisVector) -> Option<Element> {
        if x.within(self.radius) && y.within(self.radius) {
            Some(self.values.get(&(x, y)).cloned().unwrap_or_default())
        } else {
            None
        }
    }

    /// Bilinear extension; `None` if any term pair is outside the window.
    pub fn eval(&self, x: &Element, y: &Element) -> Option<Element> {
        let mut out = Element::zero();
        for (u, cu) in x.iter() {
            for (v, cv) in y.iter() {
                out.add_scaled(&(cu * cv), &self.get(*u, *v)?);
            }
        }
        Some(out)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(BasisVector, BasisVector), &Element)> {
        self.values.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    pub fn restrict(&self, radius: i64) -> WindowedBilinearMap {
        WindowedBilinearMap {
            radius: radius.min(self.radius),
            shift: self.shift,
            values: self
                .values
                .iter()
                .filter(|((x, y), _)| x.within(radius) && y.within(radius))
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
        }
    }

    /// `self + c·other` on the common window.
    pub fn add_scaled(&self, c: &Scalar, other: &WindowedBilinearMap) -> WindowedBilinearMap {
        let radius = self.radius.min(other.radius);
        let shift = if self.shift == other.shift { self.shift } else { None };
        let mut out = self.restrict(radius);
        out.shift = shift;
        for ((x, y), v) in other.restrict(radius).values {
            let slot = out.values.entry((x, y)).or_default();
            slot.add_scaled(c, &v);
            if slot.is_zero() {
                out.values.remove(&(x, y));
            }
        }
        out
    }

    pub fn scale(&self, c: &Scalar) -> WindowedBilinearMap {
        WindowedBilinearMap::zero(self.radius, self.shift).add_scaled(c, self)
    }

    pub fn is_symmetric(&self) -> bool {
        self.values
            .iter()
            .all(|((x, y), v)| self.values.get(&(*y, *x)) == Some(v))
    }

    pub fn is_skew(&self) -> bool {
        self.values
            .iter()
            .all(|((x, y), v)| self.values.get(&(*y, *x)) == Some(&v.neg()))
    }

    /// The common shift of all nonzero values, if there is one.
    pub fn inferred_shift(&self) -> Option<i64> {
        let mut shift = None;
        for ((x, y), v) in &self.values {
            for w in v.support() {
                let s = w.degree - x.degree - y.degree;
                match shift {
                    None => shift = Some(s),
                    Some(t) if t != s => return None,
                    _ => {}
                }
            }
        }
        shift.or(self.shift)
    }
}

impl fmt::Debug for WindowedBilinearMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WindowedBilinearMap")
            .field("radius", &self.radius)
            .field("shift", &self.shift)
            .field("values", &self.values)
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Inner,
    Psi,
    Upsilon,
    Theta,
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Inner => "Inner",
            FamilyKind::Psi => "Psi",
            FamilyKind::Upsilon => "Upsilon",
            FamilyKind::Theta => "Theta",
        }
    }
}

/// One member of a closed-form biderivation family.
///
/// `lambda` is used by `Inner`, `omega` (finitely supported `k ↦ μ_k`) by
/// `Psi` and `Upsilon`, `mu` by `Theta`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub lambda: Scalar,
    pub omega: BTreeMap<i64, Scalar>,
    pub mu: Scalar,
}

impl FamilySpec {
    fn with(kind: FamilyKind) -> Self {
        FamilySpec {
            kind,
            lambda: Scalar::zero(),
            omega: BTreeMap::new(),
            mu: Scalar::zero(),
        }
    }

    pub fn inner(lambda: Scalar) -> Self {
        FamilySpec {
            lambda,
            ..FamilySpec::with(FamilyKind::Inner)
        }
    }

    pub fn psi(omega: impl IntoIterator<Item = (i64, Scalar)>) -> Self {
        FamilySpec {
            omega: clean_omega(omega),
            ..FamilySpec::with(FamilyKind::Psi)
        }
    }

    pub fn upsilon(omega: impl IntoIterator<Item = (i64, Scalar)>) -> Self {
        FamilySpec {
            omega: clean_omega(omega),
            ..FamilySpec::with(FamilyKind::Upsilon)
        }
    }

    pub fn theta(mu: Scalar) -> Self {
        FamilySpec {
            mu,
            ..FamilySpec::with(FamilyKind::Theta)
        }
    }

    /// Checks that the family exists on W(a,b).
    pub fn validate(&self, params: &Params) -> Result<()> {
        let ok = match self.kind {
            FamilyKind::Inner => true,
            FamilyKind::Psi => params.b_is(0),
            FamilyKind::Upsilon => params.b_is(1),
            FamilyKind::Theta => params.b_is(-1) && params.a_integer().is_some(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::FamilyMismatch {
                family: self.kind.name(),
                a: params.a.to_string(),
                b: params.b.to_string(),
            })
        }
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FamilyKind::Inner => write!(f, "Inner(lambda={})", self.lambda),
            FamilyKind::Psi | FamilyKind::Upsilon => {
                write!(f, "{}(", self.kind.name())?;
                for (i, (k, mu)) in self.omega.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "mu_{k}={mu}")?;
                }
                write!(f, ")")
            }
            FamilyKind::Theta => write!(f, "Theta(mu={})", self.mu),
        }
    }
}

fn clean_omega(omega: impl IntoIterator<Item = (i64, Scalar)>) -> BTreeMap<i64, Scalar> {
    let mut out: BTreeMap<i64, Scalar> = BTreeMap::new();
    for (k, mu) in omega {
        *out.entry(k).or_default() += &mu;
    }
    out.retain(|_, mu| !mu.is_zero());
    out
}

/// Tabulates a family member on the window, after checking it exists on W(a,b).
pub fn family_map(params: &Params, spec: &FamilySpec, radius: i64) -> Result<WindowedBilinearMap> {
    spec.validate(params)?;
    family_map_unchecked(params, spec, radius)
}

/// Tabulates the family formula on W(a,b) without checking that it is a
/// biderivation there. `Theta` still needs an integer `a`.
pub fn family_map_unchecked(
    params: &Params,
    spec: &FamilySpec,
    radius: i64,
) -> Result<WindowedBilinearMap> {
    let single_shift = |omega: &BTreeMap<i64, Scalar>| match omega.len() {
        0 => Some(0),
        1 => omega.keys().next().copied(),
        _ => None,
    };
    let ll = |f: &dyn Fn(i64, i64) -> Element, shift| {
        WindowedBilinearMap::from_fn(radius, shift, |x, y| {
            if x.tag == Tag::L && y.tag == Tag::L {
                f(x.degree, y.degree)
            } else {
                Element::zero()
            }
        })
    };
    match spec.kind {
        FamilyKind::Inner => WindowedBilinearMap::from_fn(radius, Some(0), |x, y| {
            params
                .bracket(&x.into(), &y.into())
                .scale(&spec.lambda)
        }),
        FamilyKind::Psi => ll(
            &|m, n| {
                Element::from_terms(
                    spec.omega
                        .iter()
                        .map(|(k, mu)| (mu.clone(), BasisVector::I(m + n + k))),
                )
            },
            single_shift(&spec.omega),
        ),
        FamilyKind::Upsilon => ll(
            &|m, n| {
                Element::from_terms(spec.omega.iter().map(|(k, mu)| {
                    let c = &(&Scalar::int(m + n + k) + &params.a) * mu;
                    (c, BasisVector::I(m + n + k))
                }))
            },
            single_shift(&spec.omega),
        ),
        FamilyKind::Theta => {
            let a = params.a_integer().ok_or_else(|| Error::FamilyMismatch {
                family: "Theta",
                a: params.a.to_string(),
                b: params.b.to_string(),
            })?;
            ll(
                &|m, n| Element::term(&Scalar::int(m - n) * &spec.mu, BasisVector::I(m + n - a)),
                Some(-a),
            )
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    /// `f([x,y],z) = [x,f(y,z)] + [f(x,z),y]`
    First,
    /// `f(x,[y,z]) = [f(x,y),z] + [y,f(x,z)]`
    Second,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BiderivationViolation {
    pub x: BasisVector,
    pub y: BasisVector,
    pub z: BasisVector,
    pub side: Side,
    pub residual: Element,
}

/// Nonzero residuals of both biderivation identities over all basis triples
/// of the window whose inner bracket stays in the window.
pub fn is_biderivation(params: &Params, f: &WindowedBilinearMap) -> Vec<BiderivationViolation> {
    let window: Vec<BasisVector> = BasisVector::window(f.radius).collect();
    let val = |x: BasisVector, y: BasisVector| f.values.get(&(x, y)).cloned().unwrap_or_default();
    let mut out = Vec::new();
    for &x in &window {
        for &y in &window {
            let xy = params.bracket_basis(x, y);
            for &z in &window {
                if xy.as_ref().is_none_or(|(_, w)| w.within(f.radius)) {
                    let mut r = match &xy {
                        Some((c, w)) => val(*w, z).scale(c),
                        None => Element::zero(),
                    };
                    r = r.sub(&params.bracket(&x.into(), &val(y, z)));
                    r = r.sub(&params.bracket(&val(x, z), &y.into()));
                    if !r.is_zero() {
                        out.push(BiderivationViolation { x, y, z, side: Side::First, residual: r });
                    }
                }
                let yz = params.bracket_basis(y, z);
                if yz.as_ref().is_none_or(|(_, w)| w.within(f.radius)) {
                    let mut r = match &yz {
                        Some((c, w)) => val(x, *w).scale(c),
                        None => Element::zero(),
                    };
                    r = r.sub(&params.bracket(&val(x, y), &z.into()));
                    r = r.sub(&params.bracket(&y.into(), &val(x, z)));
                    if !r.is_zero() {
                        out.push(BiderivationViolation { x, y, z, side: Side::Second, residual: r });
                    }
                }
            }
        }
    }
    out
}

/// `(x, y) ↦ f(y, x)`.
pub fn op_map(f: &WindowedBilinearMap) -> WindowedBilinearMap {
    WindowedBilinearMap {
        radius: f.radius,
        shift: f.shift,
        values: f.values.iter().map(|((x, y), v)| ((*y, *x), v.clone())).collect(),
    }
}

/// Splits `f` into its skew-symmetric and symmetric parts.
pub fn decompose(f: &WindowedBilinearMap) -> (WindowedBilinearMap, WindowedBilinearMap) {
    let half = Scalar::frac(1, 2);
    let op = op_map(f);
    let minus = f.add_scaled(&Scalar::int(-1), &op).scale(&half);
    let plus = f.add_scaled(&Scalar::one(), &op).scale(&half);
    (minus, plus)
}

/// `f^σ(σx, σy) = σ(f(x, y))` for the shift isomorphism σ: W(a,b) → W(a+k,b).
///
/// The result is tabulated on the largest symmetric window whose σ-preimages
/// lie in the window of `f`, i.e. radius `R - |k|`.
pub fn transport(k: i64, f: &WindowedBilinearMap) -> WindowedBilinearMap {
    let radius = f.radius - k.abs();
    let pre = |v: BasisVector| shift_basis(-k, v);
    let mut out = WindowedBilinearMap::zero(radius, None);
    for u in BasisVector::window(radius) {
        for v in BasisVector::window(radius) {
            let value = f.get(pre(u), pre(v)).expect("preimage in window");
            if !value.is_zero() {
                out.values.insert((u, v), shift_iso(k, &value));
            }
        }
    }
    out.shift = out.inferred_shift().or(f.shift.map(|s| s - k));
    out
}

/// Splits `f` by the degree shift of each value term.
pub fn homogeneous_components(f: &WindowedBilinearMap) -> BTreeMap<i64, WindowedBilinearMap> {
    let mut out: BTreeMap<i64, WindowedBilinearMap> = BTreeMap::new();
    for ((x, y), v) in &f.values {
        for (w, c) in v.iter() {
            let s = w.degree - x.degree - y.degree;
            out.entry(s)
                .or_insert_with(|| WindowedBilinearMap::zero(f.radius, Some(s)))
                .values
                .entry((*x, *y))
                .or_default()
                .add_term(c.clone(), *w);
        }
    }
    out
}

/// Coordinates for bilinear maps of a fixed shift on a window: one unknown per
/// (first key, second key, output tag), in that lexicographic order with keys
/// ordered L before I and then by degree.
#[derive(Clone, Copy, Debug)]
pub struct BilinearIndex {
    pub radius: i64,
    pub shift: i64,
}

impl BilinearIndex {
    fn side(&self) -> usize {
        2 * (2 * self.radius as usize + 1)
    }

    fn key_index(&self, v: BasisVector) -> usize {
        let tag = if v.tag == Tag::L { 0 } else { 1 };
        tag * (2 * self.radius as usize + 1) + (v.degree + self.radius) as usize
    }

    fn key_at(&self, i: usize) -> BasisVector {
        let half = 2 * self.radius as usize + 1;
        let tag = if i < half { Tag::L } else { Tag::I };
        BasisVector::new(tag, (i % half) as i64 - self.radius)
    }

    pub fn len(&self) -> usize {
        2 * self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn unknown(&self, x: BasisVector, y: BasisVector, out: Tag) -> usize {
        let pair = self.key_index(x) * self.side() + self.key_index(y);
        2 * pair + if out == Tag::L { 0 } else { 1 }
    }

    /// `(x, y, output basis vector)` of an unknown.
    pub fn decode(&self, idx: usize) -> (BasisVector, BasisVector, BasisVector) {
        let pair = idx / 2;
        let x = self.key_at(pair / self.side());
        let y = self.key_at(pair % self.side());
        let tag = if idx.is_multiple_of(2) { Tag::L } else { Tag::I };
        let degree = deg_add(deg_add(x.degree, y.degree), self.shift);
        (x, y, BasisVector::new(tag, degree))
    }

    pub fn to_map(&self, v: &SparseVec) -> WindowedBilinearMap {
        let mut map = WindowedBilinearMap::zero(self.radius, Some(self.shift));
        for (idx, c) in v.iter() {
            let (x, y, w) = self.decode(idx);
            map.values.entry((x, y)).or_default().add_term(c.clone(), w);
        }
        map.values.retain(|_, e| !e.is_zero());
        map
    }

    /// Coordinates of `map` on this window; `None` if the map is not
    /// homogeneous of this shift or does not cover the window.
    pub fn to_vector(&self, map: &WindowedBilinearMap) -> Option<SparseVec> {
        if map.radius < self.radius {
            return None;
        }
        let mut entries = Vec::new();
        for ((x, y), v) in &map.values {
            if !x.within(self.radius) || !y.within(self.radius) {
                continue;
            }
            let target = deg_add(deg_add(x.degree, y.degree), self.shift);
            for (w, c) in v.iter() {
                if w.degree != target {
                    return None;
                }
                entries.push((self.unknown(*x, *y, w.tag), c.clone()));
            }
        }
        Some(SparseVec::from_entries(entries))
    }

    pub fn is_interior(&self, idx: usize, interior: i64) -> bool {
        let (x, y, _) = self.decode(idx);
        x.within(interior) && y.within(interior)
    }
}

#[derive(Clone, Debug)]
pub struct BiderSolveReport {
    pub params: Params,
    pub degree_shift: i64,
    pub radius: i64,
    pub interior_radius: i64,
    pub raw_dimension: usize,
    pub certified_dimension: usize,
    /// Basis of the raw solution space on the full window.
    pub basis: Vec<WindowedBilinearMap>,
    /// Basis of the solution space restricted to the interior window.
    pub certified_basis: Vec<WindowedBilinearMap>,
    /// Family generators the classification predicts at this shift.
    pub predicted: Vec<FamilySpec>,
    /// `2·dim(C + P) - dim C - dim P` for the certified space `C` and the span
    /// `P` of the predicted families on the interior; zero iff they coincide.
    pub family_residual: usize,
}

impl BiderSolveReport {
    fn index(&self) -> BilinearIndex {
        BilinearIndex {
            radius: self.radius,
            shift: self.degree_shift,
        }
    }

    /// Whether `map` lies in the raw solution space.
    pub fn contains(&self, map: &WindowedBilinearMap) -> bool {
        let index = self.index();
        let Some(target) = index.to_vector(map) else {
            return false;
        };
        let ech = Echelon::from_rows(self.basis.iter().filter_map(|b| index.to_vector(b)));
        ech.contains(&target)
    }

    /// Whether `map`, restricted to the interior window, lies in the
    /// certified space.
    pub fn certified_contains(&self, map: &WindowedBilinearMap) -> bool {
        let index = BilinearIndex {
            radius: self.interior_radius,
            shift: self.degree_shift,
        };
        let Some(target) = index.to_vector(map) else {
            return false;
        };
        let ech = Echelon::from_rows(self.certified_basis.iter().filter_map(|b| index.to_vector(b)));
        ech.contains(&target)
    }
}

/// Family generators spanning the shift-`k` biderivations of W(a,b) according
/// to the classification.
pub fn predicted_families(params: &Params, k: i64) -> Vec<FamilySpec> {
    let mut out = Vec::new();
    if k == 0 {
        out.push(FamilySpec::inner(Scalar::one()));
    }
    if params.b_is(0) {
        out.push(FamilySpec::psi([(k, Scalar::one())]));
    }
    if params.b_is(1) {
        out.push(FamilySpec::upsilon([(k, Scalar::one())]));
    }
    if params.b_is(-1) && params.a_integer() == Some(-k) {
        out.push(FamilySpec::theta(Scalar::one()));
    }
    out
}

/// Solves for all biderivations of shift `k` on the window of radius `radius`.
///
/// The first identity says that `x ↦ f(x, z)` is a derivation of shift
/// `deg z + k` for every `z`, so the solver first takes the raw derivation
/// kernels column by column and then imposes the second identity on the
/// combination coefficients. This is the same system as stacking both
/// identities over all unknowns.
pub fn solve_biderivations(
    params: &Params,
    k: i64,
    radius: i64,
    interior_margin: i64,
) -> Result<BiderSolveReport> {
    check_window(radius, interior_margin)?;
    let index = BilinearIndex { radius, shift: k };
    let window: Vec<BasisVector> = BasisVector::window(radius).collect();

    let mut kernels: HashMap<i64, Vec<SparseVec>> = HashMap::new();
    for z in &window {
        let s = deg_add(z.degree, k);
        if let Entry::Vacant(e) = kernels.entry(s) {
            e.insert(derivation_kernel(params, s, radius)?);
        }
    }

    // column (z, j) of the reduced system is the j-th kernel vector placed in column z
    let mut columns: Vec<SparseVec> = Vec::new();
    let mut first_column: Vec<usize> = Vec::new();
    for &z in &window {
        let s = deg_add(z.degree, k);
        let dindex = DerivationIndex { radius, shift: s };
        first_column.push(columns.len());
        for v in &kernels[&s] {
            columns.push(v.map_columns(|idx| {
                let (x, out) = dindex.decode(idx);
                index.unknown(x, z, out.tag)
            }));
        }
    }

    // f(x, y) as a symbolic element in the column coefficients
    let symbolic = |x: BasisVector, yi: usize| {
        let y = window[yi];
        let s = deg_add(y.degree, k);
        let dindex = DerivationIndex { radius, shift: s };
        let mut e = SymbolicElement::default();
        for (j, v) in kernels[&s].iter().enumerate() {
            for tag in Tag::ALL {
                let c = v.get(dindex.unknown(x, tag));
                e.add_form(
                    BasisVector::new(tag, deg_add(x.degree, s)),
                    &c,
                    &SparseVec::unit(first_column[yi] + j),
                );
            }
        }
        e
    };
    let position: BTreeMap<BasisVector, usize> =
        window.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut rows = Vec::new();
    for &x in &window {
        let eval = |y: BasisVector| symbolic(x, position[&y]);
        derivation_rows(params, radius, &eval, &mut rows);
    }
    let reduced = Echelon::from_rows(rows).nullspace(columns.len());

    let raw: Vec<SparseVec> = reduced
        .iter()
        .map(|c| {
            c.iter()
                .fold(SparseVec::new(), |acc, (col, coeff)| acc.axpy(coeff, &columns[col]))
        })
        .collect();
    let raw = canonical_basis(raw, index.len());

    let interior_radius = radius - interior_margin;
    let interior = BilinearIndex {
        radius: interior_radius,
        shift: k,
    };
    let restricted: Vec<SparseVec> = raw
        .iter()
        .map(|v| {
            let m = index.to_map(v).restrict(interior_radius);
            interior.to_vector(&m).expect("restriction keeps the shift")
        })
        .collect();
    let certified = canonical_basis(restricted, interior.len());

    let predicted = predicted_families(params, k);
    let generators: Vec<SparseVec> = predicted
        .iter()
        .map(|spec| {
            let m = family_map(params, spec, interior_radius).expect("predicted family is valid");
            interior.to_vector(&m).expect("family has the predicted shift")
        })
        .collect();
    let family_residual = span_mismatch(&certified, &generators);

    Ok(BiderSolveReport {
        params: params.clone(),
        degree_shift: k,
        radius,
        interior_radius,
        raw_dimension: raw.len(),
        certified_dimension: certified.len(),
        basis: raw.iter().map(|v| index.to_map(v)).collect(),
        certified_basis: certified.iter().map(|v| interior.to_map(v)).collect(),
        predicted,
        family_residual,
    })
}

#[derive(Clone, Debug)]
pub struct ClassificationRow {
    pub k: i64,
    pub predicted: Vec<FamilySpec>,
    pub raw_dimension: usize,
    pub certified_dimension: usize,
    pub family_residual: usize,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct ClassificationVerdict {
    pub params: Params,
    pub radius: i64,
    pub interior_margin: i64,
    pub rows: Vec<ClassificationRow>,
    pub pass: bool,
}

/// Solves every shift in `k_range` and compares with the predicted families.
/// Shifts are solved in parallel on the current rayon pool.
pub fn classify(
    params: &Params,
    k_range: RangeInclusive<i64>,
    radius: i64,
    interior_margin: i64,
) -> Result<ClassificationVerdict> {
    let (verdict, _) = classify_with_reports(params, k_range, radius, interior_margin)?;
    Ok(verdict)
}

/// [`classify`] together with the underlying solver reports.
pub fn classify_with_reports(
    params: &Params,
    k_range: RangeInclusive<i64>,
    radius: i64,
    interior_margin: i64,
) -> Result<(ClassificationVerdict, Vec<BiderSolveReport>)> {
    check_window(radius, interior_margin)?;
    let ks: Vec<i64> = k_range.collect();
    let reports = ks
        .par_iter()
        .map(|&k| solve_biderivations(params, k, radius, interior_margin))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<ClassificationRow> = reports
        .iter()
        .map(|r| ClassificationRow {
            k: r.degree_shift,
            predicted: r.predicted.clone(),
            raw_dimension: r.raw_dimension,
            certified_dimension: r.certified_dimension,
            family_residual: r.family_residual,
            pass: r.certified_dimension == r.predicted.len() && r.family_residual == 0,
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok((
        ClassificationVerdict {
            params: params.clone(),
            radius,
            interior_margin,
            rows,
            pass,
        },
        reports,
    ))
}

/// A solution of the delta system: `k[(i, n)] = k_i^{(n)}` and
/// `h[(i, m)] = h_i^{(m)}`, zero entries omitted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DeltaSolution {
    pub k: BTreeMap<(i64, i64), Scalar>,
    pub h: BTreeMap<(i64, i64), Scalar>,
}

impl DeltaSolution {
    /// `k_i^{(m)} = h_i^{(m)} = λ·δ_{m,i}` on `|i| <= radius`.
    pub fn delta(radius: i64, lambda: &Scalar) -> Self {
        let mut s = DeltaSolution::default();
        if !lambda.is_zero() {
            for i in -radius..=radius {
                s.k.insert((i, i), lambda.clone());
                s.h.insert((i, i), lambda.clone());
            }
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct NullspaceBasis {
    pub radius: i64,
    pub interior_radius: i64,
    pub raw_dimension: usize,
    pub certified_dimension: usize,
    pub basis: Vec<DeltaSolution>,
    pub certified_basis: Vec<DeltaSolution>,
}

#[derive(Clone, Copy)]
struct DeltaIndex {
    radius: i64,
}

impl DeltaIndex {
    fn side(&self) -> usize {
        2 * self.radius as usize + 1
    }

    fn len(&self) -> usize {
        2 * self.side() * self.side()
    }

    fn pos(&self, i: i64) -> usize {
        (i + self.radius) as usize
    }

    fn k(&self, i: i64, n: i64) -> usize {
        self.pos(i) * self.side() + self.pos(n)
    }

    fn h(&self, i: i64, m: i64) -> usize {
        self.side() * self.side() + self.k(i, m)
    }

    fn decode(&self, idx: usize) -> (bool, i64, i64) {
        let sq = self.side() * self.side();
        let is_h = idx >= sq;
        let r = idx % sq;
        let i = (r / self.side()) as i64 - self.radius;
        let sup = (r % self.side()) as i64 - self.radius;
        (is_h, i, sup)
    }

    fn within(&self, idx: usize, radius: i64) -> bool {
        let (_, i, sup) = self.decode(idx);
        i.abs() <= radius && sup.abs() <= radius
    }

    fn to_solution(self, v: &SparseVec) -> DeltaSolution {
        let mut s = DeltaSolution::default();
        for (idx, c) in v.iter() {
            let (is_h, i, sup) = self.decode(idx);
            let slot = if is_h { &mut s.h } else { &mut s.k };
            slot.insert((i, sup), c.clone());
        }
        s
    }

    fn to_vector(self, s: &DeltaSolution) -> SparseVec {
        let k = s.k.iter().map(|(&(i, n), c)| (self.k(i, n), c.clone()));
        let h = s.h.iter().map(|(&(i, m), c)| (self.h(i, m), c.clone()));
        SparseVec::from_entries(k.chain(h))
    }
}

/// Solves `(i - m)·k_i^{(n)} = (2n - m - i)·h_{m-n+i}^{(m)}` over all index
/// triples with every subscript and superscript in `[-radius, radius]`.
pub fn delta_system_solve(radius: i64, interior_margin: i64) -> Result<NullspaceBasis> {
    check_window(radius, interior_margin)?;
    let index = DeltaIndex { radius };
    let mut rows = Vec::new();
    for i in -radius..=radius {
        for m in -radius..=radius {
            for n in -radius..=radius {
                let j = m - n + i;
                if j.abs() > radius {
                    continue;
                }
                rows.push(SparseVec::from_entries([
                    (index.k(i, n), Scalar::int(i - m)),
                    (index.h(j, m), Scalar::int(-(2 * n - m - i))),
                ]));
            }
        }
    }
    let raw = Echelon::from_rows(rows).nullspace(index.len());
    let interior_radius = radius - interior_margin;
    let inner = DeltaIndex {
        radius: interior_radius,
    };
    let restricted: Vec<SparseVec> = raw
        .iter()
        .map(|v| {
            let s = index.to_solution(&v.restrict(|idx| index.within(idx, interior_radius)));
            inner.to_vector(&s)
        })
        .collect();
    let certified = canonical_basis(restricted, inner.len());
    Ok(NullspaceBasis {
        radius,
        interior_radius,
        raw_dimension: raw.len(),
        certified_dimension: certified.len(),
        basis: raw.iter().map(|v| index.to_solution(v)).collect(),
        certified_basis: certified.iter().map(|v| inner.to_solution(v)).collect(),
    })
}

impl NullspaceBasis {
    /// Whether `s`, restricted to the interior, lies in the certified space.
    pub fn certified_contains(&self, s: &DeltaSolution) -> bool {
        let inner = DeltaIndex {
            radius: self.interior_radius,
        };
        let r = self.interior_radius;
        let keep = |&(i, sup): &(i64, i64)| i.abs() <= r && sup.abs() <= r;
        let restricted = DeltaSolution {
            k: s.k.iter().filter(|(key, _)| keep(key)).map(|(a, b)| (*a, b.clone())).collect(),
            h: s.h.iter().filter(|(key, _)| keep(key)).map(|(a, b)| (*a, b.clone())).collect(),
        };
        let ech = Echelon::from_rows(self.certified_basis.iter().map(|b| inner.to_vector(b)));
        ech.contains(&inner.to_vector(&restricted))
    }

    /// Whether the certified space is exactly the line through `δ_{m,i}`.
    pub fn is_delta_line(&self) -> bool {
        self.certified_dimension == 1
            && self.certified_contains(&DeltaSolution::delta(self.interior_radius, &Scalar::one()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn el(s: &str) -> Element {
        s.parse().unwrap()
    }

    fn s(n: i64) -> Scalar {
        Scalar::int(n)
    }

    #[test]
    fn family_examples() {
        let th = family_map(&Params::ints(0, -1), &FamilySpec::theta(s(1)), 6).unwrap();
        assert_eq!(th.get(BasisVector::L(1), BasisVector::L(0)).unwrap(), el("I[1]"));
        assert_eq!(th.shift(), Some(0));

        let psi = family_map(&Params::ints(0, 0), &FamilySpec::psi([(2, s(5))]), 6).unwrap();
        assert_eq!(psi.get(BasisVector::L(1), BasisVector::L(1)).unwrap(), el("5*I[4]"));
        assert!(psi.get(BasisVector::L(0), BasisVector::I(3)).unwrap().is_zero());
        assert_eq!(psi.shift(), Some(2));

        let ups = family_map(&Params::ints(0, 1), &FamilySpec::upsilon([(0, s(1))]), 6).unwrap();
        assert!(ups.get(BasisVector::L(1), BasisVector::L(-1)).unwrap().is_zero());
        assert_eq!(ups.get(BasisVector::L(2), BasisVector::L(1)).unwrap(), el("3*I[3]"));
    }

    #[test]
    fn family_mismatch() {
        let p = Params::rational(1, 2, -1, 1);
        assert!(matches!(
            family_map(&p, &FamilySpec::theta(s(1)), 4),
            Err(Error::FamilyMismatch { family: "Theta", .. })
        ));
        assert!(family_map(&Params::ints(0, 1), &FamilySpec::psi([(0, s(1))]), 4).is_err());
        assert!(family_map(&Params::ints(0, 0), &FamilySpec::upsilon([(0, s(1))]), 4).is_err());
        assert!(family_map(&Params::ints(3, 2), &FamilySpec::inner(s(2)), 4).is_ok());
        // the unchecked form still needs an integer shift for Theta
        assert!(family_map_unchecked(&p, &FamilySpec::theta(s(1)), 4).is_err());
    }

    #[test]
    fn inner_is_biderivation_on_grid() {
        for p in Params::standard_grid() {
            let f = family_map(&p, &FamilySpec::inner(s(3)), 5).unwrap();
            assert!(is_biderivation(&p, &f).is_empty(), "{p}");
        }
    }

    #[test]
    fn theta_is_biderivation_only_where_defined() {
        let f = family_map(&Params::ints(0, -1), &FamilySpec::theta(s(1)), 6).unwrap();
        assert!(is_biderivation(&Params::ints(0, -1), &f).is_empty());
        let p = Params::ints(0, 0);
        let forced = family_map_unchecked(&p, &FamilySpec::theta(s(1)), 6).unwrap();
        let viol = is_biderivation(&p, &forced);
        assert!(!viol.is_empty());
        // f(L_1, [L_1, L_0]) = 0, while [L_1, f(L_1, L_0)] = [L_1, I_1] = -I_2
        let w = viol
            .iter()
            .find(|v| {
                v.side == Side::Second
                    && (v.x, v.y, v.z) == (BasisVector::L(1), BasisVector::L(1), BasisVector::L(0))
            })
            .expect("violation at (L_1, L_1, L_0)");
        assert_eq!(w.residual, el("I[2]"));
    }

    #[test]
    fn symmetric_and_skew_families() {
        let p = Params::ints(0, 0);
        let psi = family_map(&p, &FamilySpec::psi([(1, s(2)), (-3, s(1))]), 5).unwrap();
        assert!(psi.is_symmetric());
        assert_eq!(op_map(&psi), psi);
        let inner = family_map(&p, &FamilySpec::inner(s(1)), 5).unwrap();
        assert_eq!(op_map(&inner), family_map(&p, &FamilySpec::inner(s(-1)), 5).unwrap());
        let q = Params::ints(2, -1);
        let th = family_map(&q, &FamilySpec::theta(s(1)), 5).unwrap();
        assert!(th.is_skew());
        assert_eq!(op_map(&th), th.scale(&s(-1)));
        let ups = family_map(&Params::rational(1, 2, 1, 1), &FamilySpec::upsilon([(2, s(1))]), 5).unwrap();
        assert_eq!(op_map(&ups), ups);
    }

    #[test]
    fn decompose_examples() {
        let p = Params::ints(0, 0);
        let inner = family_map(&p, &FamilySpec::inner(Scalar::frac(2, 3)), 5).unwrap();
        let psi = family_map(&p, &FamilySpec::psi([(0, s(4))]), 5).unwrap();
        let f = inner.add_scaled(&Scalar::one(), &psi);
        let (minus, plus) = decompose(&f);
        assert_eq!(minus.iter().collect::<Vec<_>>(), inner.iter().collect::<Vec<_>>());
        assert_eq!(plus.iter().collect::<Vec<_>>(), psi.iter().collect::<Vec<_>>());
        assert!(is_biderivation(&p, &minus).is_empty());
        assert!(is_biderivation(&p, &plus).is_empty());

        let (m, pl) = decompose(&psi);
        assert!(m.is_zero());
        assert_eq!(pl, psi);
        let (m, pl) = decompose(&inner);
        assert_eq!(m, inner);
        assert!(pl.is_zero());
    }

    #[test]
    fn transport_examples() {
        let p = Params::ints(0, 0);
        let f = family_map(&p, &FamilySpec::inner(s(1)), 6).unwrap();
        assert_eq!(transport(0, &f), f);

        // Psi_Ω on W(0,0) goes to Psi_Ω' on W(k,0) with μ'_t = μ_{t+k}
        let psi = family_map(&p, &FamilySpec::psi([(1, s(2)), (3, s(-1))]), 8).unwrap();
        for k in [1, 2, -2] {
            let t = transport(k, &psi);
            let expected = family_map(
                &p.shifted(k),
                &FamilySpec::psi([(1 - k, s(2)), (3 - k, s(-1))]),
                8 - k.abs(),
            )
            .unwrap();
            assert_eq!(t.iter().collect::<Vec<_>>(), expected.iter().collect::<Vec<_>>());
            assert!(is_biderivation(&p.shifted(k), &t).is_empty());
        }

        let q = Params::ints(0, -1);
        let th = family_map(&q, &FamilySpec::theta(s(3)), 6).unwrap();
        for k in [1, 2] {
            let t = transport(k, &th);
            assert_eq!(t.shift(), Some(-k));
            let expected = family_map(&q.shifted(k), &FamilySpec::theta(s(3)), 6 - k).unwrap();
            assert_eq!(t, expected);
        }

        // inner goes to inner
        let t = transport(2, &f);
        assert_eq!(t, family_map(&p.shifted(2), &FamilySpec::inner(s(1)), 4).unwrap());
    }

    #[test]
    fn homogeneous_components_split_sums() {
        let p = Params::ints(0, 0);
        let psi = family_map(&p, &FamilySpec::psi([(1, s(2)), (-2, s(1))]), 4).unwrap();
        assert_eq!(psi.shift(), None);
        let parts = homogeneous_components(&psi);
        assert_eq!(parts.keys().copied().collect::<Vec<_>>(), vec![-2, 1]);
        assert_eq!(parts[&1], family_map(&p, &FamilySpec::psi([(1, s(2))]), 4).unwrap());
    }

    #[test]
    fn index_round_trip() {
        let idx = BilinearIndex { radius: 2, shift: 3 };
        for u in 0..idx.len() {
            let (x, y, w) = idx.decode(u);
            assert_eq!(idx.unknown(x, y, w.tag), u);
            assert_eq!(w.degree, x.degree + y.degree + 3);
        }
    }

    #[test]
    fn solver_examples() {
        let cases: &[(Params, i64, usize)] = &[
            (Params::rational(1, 3, 5, 2), 0, 1),
            (Params::rational(1, 3, 5, 2), 3, 0),
            (Params::rational(1, 2, 0, 1), 2, 1),
            (Params::rational(1, 2, 0, 1), 0, 2),
            (Params::ints(0, 1), 1, 1),
            (Params::ints(0, 1), 0, 2),
            (Params::ints(2, -1), -2, 1),
            (Params::ints(2, -1), 0, 1),
            (Params::ints(2, -1), 1, 0),
            (Params::ints(0, 2), 0, 1),
            (Params::ints(0, 2), -3, 0),
        ];
        for (p, k, dim) in cases {
            let r = solve_biderivations(p, *k, 6, 2).unwrap();
            assert_eq!(r.certified_dimension, *dim, "{p} k={k}");
            assert_eq!(r.family_residual, 0, "{p} k={k}");
            assert!(r.certified_dimension <= r.raw_dimension);
        }
    }

    #[test]
    fn solver_contains_families() {
        let p = Params::rational(1, 2, 0, 1);
        let r = solve_biderivations(&p, 2, 6, 2).unwrap();
        let psi = family_map(&p, &FamilySpec::psi([(2, Scalar::frac(-7, 3))]), 6).unwrap();
        assert!(r.contains(&psi));
        assert!(r.certified_contains(&psi));
        let wrong = family_map(&p, &FamilySpec::psi([(1, s(1))]), 6).unwrap();
        assert!(!r.contains(&wrong));
        for b in &r.basis {
            assert!(is_biderivation(&p, b).is_empty());
        }
    }

    #[test]
    fn upsilon_coefficient_from_solver() {
        // the certified generator at shift k has (L_m, L_n) ↦ c·(m + n + k + a) I_{m+n+k}
        let p = Params::rational(1, 2, 1, 1);
        for k in [-2, 1] {
            let r = solve_biderivations(&p, k, 6, 2).unwrap();
            assert_eq!(r.certified_dimension, 1);
            let g = &r.certified_basis[0];
            let base = g.get(BasisVector::L(0), BasisVector::L(0)).unwrap();
            let scale = &base.coeff(&BasisVector::I(k)) * &(&s(k) + &p.a).inv().unwrap();
            for m in -4..=4 {
                for n in -4..=4 {
                    let coeff = &(&s(m + n + k) + &p.a) * &scale;
                    let got = g.get(BasisVector::L(m), BasisVector::L(n)).unwrap();
                    assert_eq!(got, Element::term(coeff, BasisVector::I(m + n + k)));
                }
            }
        }
    }

    #[test]
    fn solver_window_too_small() {
        let p = Params::ints(0, 0);
        assert!(matches!(solve_biderivations(&p, 0, 3, 2), Err(Error::WindowTooSmall(_))));
        assert!(matches!(delta_system_solve(4, 3), Err(Error::WindowTooSmall(_))));
    }

    #[test]
    fn classify_examples() {
        let v = classify(&Params::ints(0, -1), -4..=4, 6, 2).unwrap();
        assert!(v.pass);
        for row in &v.rows {
            assert_eq!(row.certified_dimension, if row.k == 0 { 2 } else { 0 });
        }
        let v = classify(&Params::ints(0, 0), -4..=4, 6, 2).unwrap();
        assert!(v.pass);
        for row in &v.rows {
            assert_eq!(row.certified_dimension, if row.k == 0 { 2 } else { 1 });
        }
    }

    #[test]
    fn predicted_families_table() {
        let dims = |p: &Params| (-3..=3).map(|k| predicted_families(p, k).len()).collect::<Vec<_>>();
        assert_eq!(dims(&Params::ints(1, 0)), vec![1, 1, 1, 2, 1, 1, 1]);
        assert_eq!(dims(&Params::ints(2, -1)), vec![0, 1, 0, 1, 0, 0, 0]);
        assert_eq!(dims(&Params::ints(0, -1)), vec![0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(dims(&Params::rational(1, 2, -1, 1)), vec![0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(dims(&Params::ints(3, 2)), vec![0, 0, 0, 1, 0, 0, 0]);
    }

    #[test]
    fn delta_system() {
        let r = delta_system_solve(6, 2).unwrap();
        assert_eq!(r.certified_dimension, 1);
        assert!(r.is_delta_line());
        assert!(r.certified_contains(&DeltaSolution::delta(6, &Scalar::frac(-5, 7))));
        // no solution has k_3^{(5)} ≠ 0
        assert!(r.basis.iter().all(|b| !b.k.contains_key(&(3, 5))));
        let mut off = DeltaSolution::delta(6, &s(1));
        off.k.insert((3, 4), s(1));
        assert!(!r.certified_contains(&off));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn families_are_biderivations(
            omega in prop::collection::vec((-3i64..=3, -5i64..=5), 1..=3),
            pick in 0usize..4,
            lambda in -4i64..=4,
        ) {
            let omega: Vec<(i64, Scalar)> = omega.into_iter().map(|(k, c)| (k, s(c))).collect();
            let (p, spec) = match pick {
                0 => (Params::rational(1, 3, 5, 2), FamilySpec::inner(s(lambda))),
                1 => (Params::rational(1, 2, 0, 1), FamilySpec::psi(omega)),
                2 => (Params::ints(2, 1), FamilySpec::upsilon(omega)),
                _ => (Params::ints(2, -1), FamilySpec::theta(s(lambda))),
            };
            let f = family_map(&p, &spec, 4).unwrap();
            prop_assert!(is_biderivation(&p, &f).is_empty());
            let (minus, plus) = decompose(&f);
            let sum = minus.add_scaled(&Scalar::one(), &plus);
            prop_assert_eq!(sum.iter().collect::<Vec<_>>(), f.iter().collect::<Vec<_>>());
            prop_assert!(minus.is_skew() && plus.is_symmetric());
            prop_assert!(is_biderivation(&p, &minus).is_empty());
            prop_assert!(is_biderivation(&p, &plus).is_empty());
            let t = transport(1, &f);
            prop_assert!(is_biderivation(&p.shifted(1), &t).is_empty());
        }
    }
}
