//! Linear maps on windows of W(a,b), derivations, and the per-degree
//! derivation solver.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{rank, Echelon, SparseVec};
use crate::scalar::Scalar;
use crate::wab::{deg_add, BasisVector, Element, Params, Tag};

/// A linear map tabulated on basis vectors with `|degree| <= radius`.
///
/// Keys missing from `values` map to zero. With `shift = Some(k)` every value
/// at a key of degree `m` is supported in degree `m + k`.
#[derive(Clone, PartialEq, Eq)]
pub struct WindowedLinearMap {
    radius: i64,
    shift: Option<i64>,
    values: BTreeMap<BasisVector, Element>,
}

impl WindowedLinearMap {
    pub fn zero(radius: i64, shift: Option<i64>) -> Self {
        WindowedLinearMap {
            radius,
            shift,
            values: BTreeMap::new(),
        }
    }

    pub fn from_fn(
        radius: i64,
        shift: Option<i64>,
        mut f: impl FnMut(BasisVector) -> Element,
    ) -> Result<Self> {
        let mut map = WindowedLinearMap::zero(radius, shift);
        for v in BasisVector::window(radius) {
            map.insert(v, f(v))?;
        }
        Ok(map)
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn shift(&self) -> Option<i64> {
        self.shift
    }

    pub fn insert(&mut self, key: BasisVector, value: Element) -> Result<()> {
        if !key.within(self.radius) {
            return Err(Error::InvalidMap(format!(
                "key {key} outside radius {}",
                self.radius
            )));
        }
        if let Some(k) = self.shift {
            let target = deg_add(key.degree, k);
            if !value.is_homogeneous_of_degree(target) {
                return Err(Error::InvalidMap(format!(
                    "value {value} at {key} is not in degree {target}"
                )));
            }
        }
        if value.is_zero() {
            self.values.remove(&key);
        } else {
            self.values.insert(key, value);
        }
        Ok(())
    }

    /// The value at `v`, or `None` when `v` lies outside the window.
    pub fn get(&self, v: BasisVector) -> Option<Element> {
        if v.within(self.radius) {
            Some(self.values.get(&v).cloned().unwrap_or_default())
        } else {
            None
        }
    }

    /// Applies the map to an element; `None` if any term is outside the window.
    pub fn apply(&self, x: &Element) -> Option<Element> {
        let mut out = Element::zero();
        for (v, c) in x.iter() {
            out.add_scaled(c, &self.get(*v)?);
        }
        Some(out)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BasisVector, &Element)> {
        self.values.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    /// Same map on the smaller window `|degree| <= radius`.
    pub fn restrict(&self, radius: i64) -> WindowedLinearMap {
        WindowedLinearMap {
            radius: radius.min(self.radius),
            shift: self.shift,
            values: self
                .values
                .iter()
                .filter(|(k, _)| k.within(radius))
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
        }
    }

    pub fn add_scaled(&self, c: &Scalar, other: &WindowedLinearMap) -> WindowedLinearMap {
        let radius = self.radius.min(other.radius);
        let shift = if self.shift == other.shift { self.shift } else { None };
        let mut values = BTreeMap::new();
        for v in BasisVector::window(radius) {
            let mut e = self.get(v).unwrap_or_default();
            e.add_scaled(c, &other.get(v).unwrap_or_default());
            if !e.is_zero() {
                values.insert(v, e);
            }
        }
        WindowedLinearMap { radius, shift, values }
    }
}

impl fmt::Debug for WindowedLinearMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WindowedLinearMap")
            .field("radius", &self.radius)
            .field("shift", &self.shift)
            .field("values", &self.values)
            .finish()
    }
}

/// Coordinates for homogeneous linear maps of a fixed shift on a window:
/// one unknown per (key, output tag), ordered by key then tag.
#[derive(Clone, Copy, Debug)]
pub struct DerivationIndex {
    pub radius: i64,
    pub shift: i64,
}

impl DerivationIndex {
    pub fn len(&self) -> usize {
        4 * (2 * self.radius as usize + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn key_index(&self, key: BasisVector) -> usize {
        let tag = match key.tag {
            Tag::L => 0,
            Tag::I => 1,
        };
        tag * (2 * self.radius as usize + 1) + (key.degree + self.radius) as usize
    }

    pub fn unknown(&self, key: BasisVector, out: Tag) -> usize {
        2 * self.key_index(key) + if out == Tag::L { 0 } else { 1 }
    }

    pub fn decode(&self, idx: usize) -> (BasisVector, BasisVector) {
        let side = 2 * self.radius as usize + 1;
        let key_idx = idx / 2;
        let tag = if key_idx < side { Tag::L } else { Tag::I };
        let degree = (key_idx % side) as i64 - self.radius;
        let key = BasisVector::new(tag, degree);
        let out_tag = if idx.is_multiple_of(2) { Tag::L } else { Tag::I };
        (key, BasisVector::new(out_tag, deg_add(degree, self.shift)))
    }

    pub fn to_map(&self, v: &SparseVec) -> WindowedLinearMap {
        let mut map = WindowedLinearMap::zero(self.radius, Some(self.shift));
        let mut values: BTreeMap<BasisVector, Element> = BTreeMap::new();
        for (idx, c) in v.iter() {
            let (key, out) = self.decode(idx);
            values.entry(key).or_default().add_term(c.clone(), out);
        }
        for (k, e) in values {
            map.insert(k, e).expect("decoded value respects shift");
        }
        map
    }

    /// Coordinates of a map; `None` if it is not homogeneous of this shift
    /// or its window is smaller.
    pub fn to_vector(&self, map: &WindowedLinearMap) -> Option<SparseVec> {
        if map.radius() < self.radius {
            return None;
        }
        let mut entries = Vec::new();
        for key in BasisVector::window(self.radius) {
            let value = map.get(key)?;
            for (out, c) in value.iter() {
                if out.degree != deg_add(key.degree, self.shift) {
                    return None;
                }
                entries.push((self.unknown(key, out.tag), c.clone()));
            }
        }
        Some(SparseVec::from_entries(entries))
    }

    /// Whether the unknown belongs to a key inside `interior` radius.
    pub fn is_interior(&self, idx: usize, interior: i64) -> bool {
        self.decode(idx).0.within(interior)
    }
}

/// An element whose coefficients are linear forms in solver unknowns.
#[derive(Clone, Debug, Default)]
pub(crate) struct SymbolicElement {
    terms: BTreeMap<BasisVector, SparseVec>,
}

impl SymbolicElement {
    pub(crate) fn add_form(&mut self, v: BasisVector, c: &Scalar, form: &SparseVec) {
        if c.is_zero() || form.is_zero() {
            return;
        }
        let slot = self.terms.entry(v).or_default();
        *slot = slot.axpy(c, form);
        if slot.is_zero() {
            self.terms.remove(&v);
        }
    }

    pub(crate) fn add_scaled(&mut self, c: &Scalar, other: &SymbolicElement) {
        for (v, form) in &other.terms {
            self.add_form(*v, c, form);
        }
    }

    /// `[self, y]` for a basis vector `y` (or `[y, self]` when `left` is false).
    pub(crate) fn bracket_with(&self, params: &Params, y: BasisVector, left: bool) -> SymbolicElement {
        let mut out = SymbolicElement::default();
        for (v, form) in &self.terms {
            let br = if left {
                params.bracket_basis(*v, y)
            } else {
                params.bracket_basis(y, *v)
            };
            if let Some((c, w)) = br {
                out.add_form(w, &c, form);
            }
        }
        out
    }

    pub(crate) fn into_rows(self) -> impl Iterator<Item = SparseVec> {
        self.terms.into_values()
    }
}

/// Pushes one row per coefficient of `D([x,y]) - [D x, y] - [x, D y]` for all
/// basis pairs `x < y` of the window whose bracket is tabulated. `eval` gives
/// `D` on window keys as a symbolic element.
pub(crate) fn derivation_rows(
    params: &Params,
    radius: i64,
    eval: &dyn Fn(BasisVector) -> SymbolicElement,
    rows: &mut Vec<SparseVec>,
) {
    let window: Vec<BasisVector> = BasisVector::window(radius).collect();
    let values: Vec<SymbolicElement> = window.iter().map(|&v| eval(v)).collect();
    let minus_one = Scalar::int(-1);
    for (i, &x) in window.iter().enumerate() {
        for (j, &y) in window.iter().enumerate().skip(i + 1) {
            let mut residual = SymbolicElement::default();
            if let Some((c, w)) = params.bracket_basis(x, y) {
                if !w.within(radius) {
                    continue;
                }
                residual.add_scaled(&c, &eval(w));
            }
            residual.add_scaled(&minus_one, &values[i].bracket_with(params, y, true));
            residual.add_scaled(&minus_one, &values[j].bracket_with(params, x, false));
            rows.extend(residual.into_rows());
        }
    }
}

/// `y ↦ [x, y]` on the window `|degree| <= radius`.
pub fn inner_derivation(params: &Params, x: &Element, radius: i64) -> WindowedLinearMap {
    let mut degrees = x.support().map(|v| v.degree);
    let shift = match degrees.next() {
        Some(d) if degrees.all(|e| e == d) => Some(d),
        Some(_) => None,
        None => Some(0),
    };
    WindowedLinearMap::from_fn(radius, shift, |y| params.bracket(x, &y.into()))
        .expect("bracket respects the grading")
}

/// The outer derivations appearing in the classification of `Der W(a,b)`.
#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CanonicalDerivation {
    D1,
    D2_00,
    D2_01,
    D2_02,
    D3,
}

impl CanonicalDerivation {
    pub const ALL: [CanonicalDerivation; 5] = [
        CanonicalDerivation::D1,
        CanonicalDerivation::D2_00,
        CanonicalDerivation::D2_01,
        CanonicalDerivation::D2_02,
        CanonicalDerivation::D3,
    ];

    /// Whether this map is a derivation of W(a,b) according to the
    /// classification (D1 everywhere, the others at one point each).
    pub fn valid_at(&self, params: &Params) -> bool {
        let at = |a, b| *params == Params::ints(a, b);
        match self {
            CanonicalDerivation::D1 => true,
            CanonicalDerivation::D2_00 | CanonicalDerivation::D3 => at(0, 0),
            CanonicalDerivation::D2_01 => at(0, 1),
            CanonicalDerivation::D2_02 => at(0, 2),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CanonicalDerivation::D1 => "D1",
            CanonicalDerivation::D2_00 => "D2_00",
            CanonicalDerivation::D2_01 => "D2_01",
            CanonicalDerivation::D2_02 => "D2_02",
            CanonicalDerivation::D3 => "D3",
        }
    }
}

pub fn canonical_derivation(which: CanonicalDerivation, radius: i64) -> WindowedLinearMap {
    WindowedLinearMap::from_fn(radius, Some(0), |v| {
        let m = v.degree;
        match (which, v.tag) {
            (CanonicalDerivation::D1, Tag::I) => Element::basis(v),
            (CanonicalDerivation::D1, Tag::L) => Element::zero(),
            (_, Tag::I) => Element::zero(),
            (CanonicalDerivation::D2_00, Tag::L) => Element::term(Scalar::int(m - 1), BasisVector::I(m)),
            (CanonicalDerivation::D2_01, Tag::L) => Element::term(Scalar::int(m * m - m), BasisVector::I(m)),
            (CanonicalDerivation::D2_02, Tag::L) => Element::term(Scalar::int(m * m * m), BasisVector::I(m)),
            (CanonicalDerivation::D3, Tag::L) => Element::term(Scalar::int(m), BasisVector::I(m)),
        }
    })
    .expect("canonical derivations have shift 0")
}

/// A nonzero Leibniz residual `D([x,y]) - [D x, y] - [x, D y]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivationViolation {
    pub x: BasisVector,
    pub y: BasisVector,
    pub residual: Element,
}

/// All Leibniz violations over ordered basis pairs whose evaluations lie
/// inside the window of `d`.
pub fn is_derivation(params: &Params, d: &WindowedLinearMap) -> Vec<DerivationViolation> {
    let radius = d.radius();
    let mut out = Vec::new();
    for x in BasisVector::window(radius) {
        for y in BasisVector::window(radius) {
            let lhs = match params.bracket_basis(x, y) {
                Some((c, w)) => match d.get(w) {
                    Some(dw) => dw.scale(&c),
                    None => continue,
                },
                None => Element::zero(),
            };
            let dx = d.get(x).expect("inside window");
            let dy = d.get(y).expect("inside window");
            let rhs = params
                .bracket(&dx, &y.into())
                .add(&params.bracket(&x.into(), &dy));
            let residual = lhs.sub(&rhs);
            if !residual.is_zero() {
                out.push(DerivationViolation { x, y, residual });
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct DerivationSolveReport {
    pub params: Params,
    pub degree_shift: i64,
    pub radius: i64,
    pub raw_dimension: usize,
    pub certified_dimension: usize,
    pub basis: Vec<WindowedLinearMap>,
    pub interior_radius: i64,
}

pub(crate) fn check_window(radius: i64, margin: i64) -> Result<()> {
    if margin < 0 || radius < margin + 2 {
        return Err(Error::WindowTooSmall(format!(
            "radius {radius} must be at least interior margin {margin} + 2"
        )));
    }
    Ok(())
}

/// Raw kernel of the windowed Leibniz system for homogeneous maps of the
/// given shift, as coordinate vectors in [`DerivationIndex`] order.
pub(crate) fn derivation_kernel(params: &Params, shift: i64, radius: i64) -> Result<Vec<SparseVec>> {
    let index = DerivationIndex { radius, shift };
    let eval = |v: BasisVector| {
        let mut e = SymbolicElement::default();
        let target = deg_add(v.degree, shift);
        for tag in Tag::ALL {
            e.add_form(
                BasisVector::new(tag, target),
                &Scalar::one(),
                &SparseVec::unit(index.unknown(v, tag)),
            );
        }
        e
    };
    let mut rows = Vec::new();
    derivation_rows(params, radius, &eval, &mut rows);
    if rows.is_empty() {
        return Err(Error::WindowTooSmall(format!(
            "no Leibniz constraint fits in radius {radius}"
        )));
    }
    Ok(Echelon::from_rows(rows).nullspace(index.len()))
}

/// Solves for all derivations of shift `k` on the window of radius `radius`.
/// The certified dimension is the rank of the solutions restricted to keys
/// with `|degree| <= radius - interior_margin`.
pub fn solve_derivations(
    params: &Params,
    k: i64,
    radius: i64,
    interior_margin: i64,
) -> Result<DerivationSolveReport> {
    check_window(radius, interior_margin)?;
    let index = DerivationIndex { radius, shift: k };
    let kernel = derivation_kernel(params, k, radius)?;
    let interior_radius = radius - interior_margin;
    let certified_dimension = rank(
        kernel
            .iter()
            .map(|v| v.restrict(|idx| index.is_interior(idx, interior_radius))),
    );
    Ok(DerivationSolveReport {
        params: params.clone(),
        degree_shift: k,
        radius,
        raw_dimension: kernel.len(),
        certified_dimension,
        basis: kernel.iter().map(|v| index.to_map(v)).collect(),
        interior_radius,
    })
}

impl DerivationSolveReport {
    /// Whether a homogeneous map of this shift lies in the raw solution space.
    pub fn contains(&self, map: &WindowedLinearMap) -> bool {
        let index = DerivationIndex {
            radius: self.radius,
            shift: self.degree_shift,
        };
        let Some(target) = index.to_vector(map) else {
            return false;
        };
        let ech = Echelon::from_rows(self.basis.iter().filter_map(|b| index.to_vector(b)));
        ech.contains(&target)
    }
}

/// Dimension of the shift-`k` part of `Der W(a,b)` implied by the
/// classification of derivations, for `Re(a)` in `[0, 1)`. Returns `None`
/// for non-normalized parameters.
pub fn predicted_derivation_dimension(params: &Params, k: i64) -> Option<usize> {
    if params.normalizing_shift() != 0 {
        return None;
    }
    if k != 0 {
        // ad L_k and ad I_k; ad I_k vanishes only when b = 0 and a = -k
        return Some(2);
    }
    let special = [(0, 0), (0, 1), (0, 2)]
        .iter()
        .any(|&(a, b)| *params == Params::ints(a, b));
    Some(if special { 4 } else { 3 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn el(s: &str) -> Element {
        s.parse().unwrap()
    }

    #[test]
    fn inner_derivation_examples() {
        let p = Params::ints(0, 0);
        let d = inner_derivation(&p, &BasisVector::L(0).into(), 5);
        for m in -5..=5 {
            assert_eq!(d.get(BasisVector::L(m)).unwrap(), Element::term(Scalar::int(-m), BasisVector::L(m)));
            assert_eq!(d.get(BasisVector::I(m)).unwrap(), Element::term(Scalar::int(-m), BasisVector::I(m)));
        }
        assert!(inner_derivation(&p, &Element::zero(), 5).is_zero());
        // b = 0, a = -k: [I_k, L_n] = (k + a) I_{k+n} = 0
        let p = Params::ints(-3, 0);
        assert!(inner_derivation(&p, &BasisVector::I(3).into(), 6).is_zero());
        assert!(!inner_derivation(&p, &BasisVector::I(2).into(), 6).is_zero());
    }

    #[test]
    fn canonical_derivation_values() {
        let d1 = canonical_derivation(CanonicalDerivation::D1, 8);
        assert_eq!(d1.get(BasisVector::I(7)).unwrap(), el("I[7]"));
        assert!(d1.get(BasisVector::L(3)).unwrap().is_zero());
        let d = canonical_derivation(CanonicalDerivation::D2_01, 8);
        assert!(d.get(BasisVector::L(0)).unwrap().is_zero());
        assert!(d.get(BasisVector::L(1)).unwrap().is_zero());
        assert_eq!(d.get(BasisVector::L(2)).unwrap(), el("2*I[2]"));
        let d3 = canonical_derivation(CanonicalDerivation::D3, 8);
        assert!(d3.get(BasisVector::L(0)).unwrap().is_zero());
        assert_eq!(d3.get(BasisVector::L(-3)).unwrap(), el("-3*I[-3]"));
        assert!(d3.get(BasisVector::L(9)).is_none());
    }

    #[test]
    fn d3_on_w00_by_hand() {
        // D3([L_1, L_2]) = -D3(L_3) = -3 I_3; [I_1, L_2] + [L_1, 2 I_2] = I_3 - 4 I_3
        let p = Params::ints(0, 0);
        let d3 = canonical_derivation(CanonicalDerivation::D3, 8);
        let lhs = d3.apply(&p.bracket(&el("L[1]"), &el("L[2]"))).unwrap();
        assert_eq!(lhs, el("-3*I[3]"));
        let rhs = p
            .bracket(&el("I[1]"), &el("L[2]"))
            .add(&p.bracket(&el("L[1]"), &el("2*I[2]")));
        assert_eq!(lhs, rhs);
        assert!(is_derivation(&p, &d3).is_empty());
    }

    #[test]
    fn canonical_derivations_are_derivations_where_valid() {
        for p in Params::standard_grid() {
            for which in CanonicalDerivation::ALL {
                if which.valid_at(&p) {
                    assert!(is_derivation(&p, &canonical_derivation(which, 8)).is_empty());
                }
            }
        }
        let d2 = canonical_derivation(CanonicalDerivation::D2_01, 8);
        assert!(!is_derivation(&Params::ints(0, 2), &d2).is_empty());
        let d2 = canonical_derivation(CanonicalDerivation::D2_02, 8);
        assert!(!is_derivation(&Params::ints(0, 1), &d2).is_empty());
    }

    #[test]
    fn d3_is_inner_for_a_zero_b_nonzero() {
        // on W(0,b), ad I_0 (L_n) = b·n I_n, so D3 = ad I_0 / b whenever b ≠ 0
        let p = Params::ints(0, 1);
        let d3 = canonical_derivation(CanonicalDerivation::D3, 8);
        assert!(is_derivation(&p, &d3).is_empty());
        assert_eq!(d3, inner_derivation(&p, &el("I[0]"), 8));
    }

    #[test]
    fn d3_fails_off_a_zero() {
        // (m-n)(m+n) versus (m-n)(m+n+a): the residual at (L_1, L_2) is a·I_3
        let p = Params::rational(1, 2, 3, 1);
        let viol = is_derivation(&p, &canonical_derivation(CanonicalDerivation::D3, 8));
        let w = viol
            .iter()
            .find(|v| v.x == BasisVector::L(1) && v.y == BasisVector::L(2))
            .expect("(L_1, L_2) violates");
        assert_eq!(w.residual, el("1/2*I[3]"));
    }

    #[test]
    fn inner_derivations_pass_on_grid() {
        for p in Params::standard_grid() {
            for x in ["L[2]", "I[-1]", "L[0] + 3/2*I[1]"] {
                assert!(is_derivation(&p, &inner_derivation(&p, &el(x), 6)).is_empty());
            }
        }
    }

    #[test]
    fn solver_examples() {
        let r = solve_derivations(&Params::rational(1, 2, 3, 1), 2, 8, 3).unwrap();
        assert_eq!(r.certified_dimension, 2);
        let r = solve_derivations(&Params::ints(0, 0), 0, 8, 3).unwrap();
        assert_eq!(r.certified_dimension, 4);
        let r = solve_derivations(&Params::ints(0, 1), 0, 8, 3).unwrap();
        assert_eq!(r.certified_dimension, 4);
        assert!(r.certified_dimension <= r.raw_dimension);
        assert_eq!(r.basis.len(), r.raw_dimension);
    }

    #[test]
    fn solved_basis_members_are_derivations() {
        let p = Params::rational(1, 3, 5, 2);
        for k in [-2, 0, 3] {
            let r = solve_derivations(&p, k, 6, 2).unwrap();
            for b in &r.basis {
                assert!(is_derivation(&p, b).is_empty());
            }
        }
    }

    #[test]
    fn solver_contains_inner_and_canonical() {
        let p = Params::ints(0, 0);
        let r = solve_derivations(&p, 0, 6, 2).unwrap();
        assert!(r.contains(&inner_derivation(&p, &el("L[0]"), 6)));
        for which in [CanonicalDerivation::D1, CanonicalDerivation::D2_00, CanonicalDerivation::D3] {
            assert!(r.contains(&canonical_derivation(which, 6)));
        }
        let r = solve_derivations(&p, 2, 6, 2).unwrap();
        assert!(r.contains(&inner_derivation(&p, &el("I[2]"), 6)));
        assert!(!r.contains(&inner_derivation(&p, &el("I[1]"), 6)));
    }

    #[test]
    fn window_too_small() {
        let p = Params::ints(0, 0);
        assert!(matches!(solve_derivations(&p, 0, 3, 3), Err(Error::WindowTooSmall(_))));
        assert!(matches!(solve_derivations(&p, 0, 2, -1), Err(Error::WindowTooSmall(_))));
    }

    #[test]
    fn certified_dimension_is_monotone_in_margin() {
        let p = Params::ints(0, 2);
        let dims: Vec<usize> = (0..=4)
            .map(|m| solve_derivations(&p, 0, 8, m).unwrap().certified_dimension)
            .collect();
        assert!(dims.windows(2).all(|w| w[0] >= w[1]), "{dims:?}");
        assert_eq!(dims[3], dims[4]);
    }

    #[test]
    fn index_round_trip() {
        let idx = DerivationIndex { radius: 3, shift: -2 };
        for u in 0..idx.len() {
            let (key, out) = idx.decode(u);
            assert_eq!(idx.unknown(key, out.tag), u);
            assert_eq!(out.degree, key.degree - 2);
        }
    }

    #[test]
    fn shift_is_enforced() {
        let mut m = WindowedLinearMap::zero(3, Some(1));
        assert!(m.insert(BasisVector::L(0), el("I[1]")).is_ok());
        assert!(m.insert(BasisVector::L(0), el("I[2]")).is_err());
        assert!(m.insert(BasisVector::L(4), el("I[5]")).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn solved_spaces_are_sound_and_certified(i in 0usize..13, k in -4i64..=4) {
            let p = Params::standard_grid()[i].normalized();
            let r = solve_derivations(&p, k, 7, 3).unwrap();
            for b in &r.basis {
                prop_assert!(is_derivation(&p, b).is_empty());
            }
            prop_assert_eq!(Some(r.certified_dimension), predicted_derivation_dimension(&p, k));
            let looser = solve_derivations(&p, k, 7, 1).unwrap();
            prop_assert!(looser.certified_dimension >= r.certified_dimension);
            for which in CanonicalDerivation::ALL {
                if k == 0 && which.valid_at(&p) {
                    prop_assert!(r.contains(&canonical_derivation(which, 7)));
                }
            }
        }
    }
}
