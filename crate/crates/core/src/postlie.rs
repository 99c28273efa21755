//! Commutative post-Lie structures on W(a,b): axiom checking on windowed
//! products and the direction-by-direction triviality sweep over the solved
//! biderivation spaces.

use std::fmt;
use std::ops::RangeInclusive;

use crate::bider::{classify_with_reports, decompose, BilinearIndex, WindowedBilinearMap};
use crate::linalg::canonical_basis;
use crate::error::{Error, Result};
use crate::wab::{BasisVector, Element, Params, Tag};

/// Largest degree used when searching for witnesses.
pub const WITNESS_RANGE: i64 = 3;

#[derive(Clone, Debug)]
pub struct PostLieCandidate {
    pub params: Params,
    pub product: WindowedBilinearMap,
}

impl PostLieCandidate {
    pub fn new(params: Params, product: WindowedBilinearMap) -> Result<Self> {
        if product.radius() < 3 {
            return Err(Error::Validation(format!(
                "product radius {} is below 3",
                product.radius()
            )));
        }
        Ok(PostLieCandidate { params, product })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axiom {
    /// `x∘y = y∘x`
    Commutativity,
    /// `[x,y]∘z = x∘(y∘z) - y∘(x∘z)`
    LeibnizLike,
    /// `x∘[y,z] = [x∘y,z] + [y,x∘z]`
    DerivationInSecond,
}

impl Axiom {
    pub fn name(&self) -> &'static str {
        match self {
            Axiom::Commutativity => "commutativity",
            Axiom::LeibnizLike => "leibniz_like",
            Axiom::DerivationInSecond => "derivation_in_second",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub axiom: Axiom,
    /// the pair or triple of basis vectors
    pub indices: Vec<BasisVector>,
    pub residual: Element,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.indices.iter().map(|v| v.to_string()).collect();
        write!(f, "{} at ({}): {}", self.axiom.name(), args.join(", "), self.residual)
    }
}

/// Basis pairs with degrees in `[-r, r]`, lexicographic in the degrees and
/// then in the tags.
fn pairs(r: i64) -> impl Iterator<Item = (BasisVector, BasisVector)> {
    (-r..=r).flat_map(move |m| {
        (-r..=r).flat_map(move |n| {
            Tag::ALL.into_iter().flat_map(move |s| {
                Tag::ALL
                    .into_iter()
                    .map(move |t| (BasisVector::new(s, m), BasisVector::new(t, n)))
            })
        })
    })
}

/// Basis triples with degrees in `[-r, r]`, lexicographic in `(m, n, t)` and
/// then in the tags.
fn triples(r: i64) -> impl Iterator<Item = (BasisVector, BasisVector, BasisVector)> {
    let degrees = move || -r..=r;
    degrees().flat_map(move |m| {
        degrees().flat_map(move |n| {
            degrees().flat_map(move |t| {
                Tag::ALL.into_iter().flat_map(move |a| {
                    Tag::ALL.into_iter().flat_map(move |b| {
                        Tag::ALL.into_iter().map(move |c| {
                            (BasisVector::new(a, m), BasisVector::new(b, n), BasisVector::new(c, t))
                        })
                    })
                })
            })
        })
    })
}

fn commutativity_residual(p: &WindowedBilinearMap, x: BasisVector, y: BasisVector) -> Option<Element> {
    Some(p.get(x, y)?.sub(&p.get(y, x)?))
}

/// `[x,y]∘z - x∘(y∘z) + y∘(x∘z)`, or `None` if an evaluation leaves the window.
fn leibniz_residual(
    params: &Params,
    p: &WindowedBilinearMap,
    x: BasisVector,
    y: BasisVector,
    z: BasisVector,
) -> Option<Element> {
    let (xe, ye, ze) = (Element::from(x), Element::from(y), Element::from(z));
    let lhs = p.eval(&params.bracket(&xe, &ye), &ze)?;
    let yz = p.eval(&ye, &ze)?;
    let xz = p.eval(&xe, &ze)?;
    Some(lhs.sub(&p.eval(&xe, &yz)?).add(&p.eval(&ye, &xz)?))
}

/// `x∘[y,z] - [x∘y,z] - [y,x∘z]`, or `None` if an evaluation leaves the window.
fn derivation_residual(
    params: &Params,
    p: &WindowedBilinearMap,
    x: BasisVector,
    y: BasisVector,
    z: BasisVector,
) -> Option<Element> {
    let (xe, ye, ze) = (Element::from(x), Element::from(y), Element::from(z));
    let lhs = p.eval(&xe, &params.bracket(&ye, &ze))?;
    let r1 = params.bracket(&p.eval(&xe, &ye)?, &ze);
    let r2 = params.bracket(&ye, &p.eval(&xe, &ze)?);
    Some(lhs.sub(&r1).sub(&r2))
}

/// All violations of the commutative post-Lie axioms on the window, over
/// every pair and triple whose evaluations stay inside it.
pub fn check_postlie(c: &PostLieCandidate) -> Vec<Witness> {
    let r = c.product.radius();
    let mut out = Vec::new();
    for (x, y) in pairs(r) {
        if x < y {
            if let Some(res) = commutativity_residual(&c.product, x, y) {
                if !res.is_zero() {
                    out.push(Witness {
                        axiom: Axiom::Commutativity,
                        indices: vec![x, y],
                        residual: res,
                    });
                }
            }
        }
    }
    for (x, y, z) in triples(r) {
        for (axiom, res) in [
            (Axiom::LeibnizLike, leibniz_residual(&c.params, &c.product, x, y, z)),
            (Axiom::DerivationInSecond, derivation_residual(&c.params, &c.product, x, y, z)),
        ] {
            if let Some(res) = res {
                if !res.is_zero() {
                    out.push(Witness {
                        axiom,
                        indices: vec![x, y, z],
                        residual: res,
                    });
                }
            }
        }
    }
    out
}

/// Whether every value lies in the I-span and the map vanishes as soon as
/// one argument is some `I_n`. For such a product all terms `x∘(y∘z)` vanish.
pub fn annihilates_i(f: &WindowedBilinearMap) -> bool {
    f.iter().all(|((x, y), v)| {
        x.tag == Tag::L && y.tag == Tag::L && v.support().all(|w| w.tag == Tag::I)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectionKind {
    /// nonzero skew-symmetric part
    Skew,
    Symmetric,
}

#[derive(Clone, Debug)]
pub struct DirectionRow {
    pub k: i64,
    /// position among the directions at this shift, skew ones first
    pub index: usize,
    pub kind: DirectionKind,
    /// whether the quadratic terms of the post-Lie axioms vanish identically
    pub quadratic_vanishes: bool,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug)]
pub struct SweepVerdict {
    pub params: Params,
    pub radius: i64,
    pub interior_margin: i64,
    pub rows: Vec<DirectionRow>,
    /// the classification held at every shift
    pub classification_pass: bool,
    pub pass: bool,
}

/// First witness excluding `f` as a direction of a commutative post-Lie product.
fn direction_witness(params: &Params, f: &WindowedBilinearMap) -> (DirectionKind, bool, Option<Witness>) {
    let r = WITNESS_RANGE.min(f.radius());
    let (minus, _) = decompose(f);
    if !minus.is_zero() {
        let w = pairs(r).find_map(|(x, y)| {
            let res = commutativity_residual(f, x, y)?;
            (!res.is_zero()).then(|| Witness {
                axiom: Axiom::Commutativity,
                indices: vec![x, y],
                residual: res,
            })
        });
        return (DirectionKind::Skew, false, w);
    }
    let quadratic_vanishes = annihilates_i(f);
    let w = triples(r).find_map(|(x, y, z)| {
        let res = if quadratic_vanishes {
            // only the linear term [x,y]∘z survives
            f.eval(&params.bracket(&x.into(), &y.into()), &z.into())?
        } else {
            leibniz_residual(params, f, x, y, z)?
        };
        (!res.is_zero()).then(|| Witness {
            axiom: Axiom::LeibnizLike,
            indices: vec![x, y, z],
            residual: res,
        })
    });
    (DirectionKind::Symmetric, quadratic_vanishes, w)
}

/// Solves the biderivation spaces for every shift in `k_range`, splits each
/// certified space into skew and symmetric directions, and excludes each
/// direction as a commutative post-Lie product.
/// Passes iff the classification held and every direction has a witness.
pub fn triviality_sweep(
    params: &Params,
    k_range: RangeInclusive<i64>,
    radius: i64,
    interior_margin: i64,
) -> Result<SweepVerdict> {
    let (verdict, reports) = classify_with_reports(params, k_range, radius, interior_margin)?;
    let mut rows = Vec::new();
    for report in &reports {
        let index = BilinearIndex {
            radius: report.interior_radius,
            shift: report.degree_shift,
        };
        // the solution space is closed under swapping arguments, so it splits
        // into its skew and symmetric parts
        let (skew, sym): (Vec<_>, Vec<_>) = report.certified_basis.iter().map(decompose).unzip();
        let mut directions = Vec::new();
        for part in [skew, sym] {
            let vectors = part.iter().filter_map(|f| index.to_vector(f));
            directions.extend(canonical_basis(vectors, index.len()).iter().map(|v| index.to_map(v)));
        }
        for (i, f) in directions.iter().enumerate() {
            let (kind, quadratic_vanishes, witness) = direction_witness(params, f);
            rows.push(DirectionRow {
                k: report.degree_shift,
                index: i,
                kind,
                quadratic_vanishes,
                witness,
            });
        }
    }
    let pass = verdict.pass && rows.iter().all(|r| r.witness.is_some());
    Ok(SweepVerdict {
        params: params.clone(),
        radius,
        interior_margin,
        rows,
        classification_pass: verdict.pass,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bider::{family_map, FamilySpec};
    use crate::Scalar;
    use proptest::prelude::*;

    fn el(s: &str) -> Element {
        s.parse().unwrap()
    }

    #[test]
    fn zero_product_is_post_lie() {
        for p in Params::standard_grid() {
            let c = PostLieCandidate::new(p, WindowedBilinearMap::zero(4, Some(0))).unwrap();
            assert!(check_postlie(&c).is_empty());
        }
        assert!(PostLieCandidate::new(Params::ints(0, 0), WindowedBilinearMap::zero(2, None)).is_err());
    }

    #[test]
    fn inner_fails_commutativity() {
        let p = Params::ints(0, 0);
        let f = family_map(&p, &FamilySpec::inner(Scalar::one()), 4).unwrap();
        let w = check_postlie(&PostLieCandidate::new(p, f).unwrap());
        let hit = w
            .iter()
            .find(|w| w.axiom == Axiom::Commutativity && w.indices == [BasisVector::L(1), BasisVector::L(2)])
            .expect("(L_1, L_2) witness");
        // [L_1, L_2] - [L_2, L_1] = -2 L_3
        assert_eq!(hit.residual, el("-2*L[3]"));
    }

    #[test]
    fn psi_fails_leibniz_like() {
        let p = Params::ints(0, 0);
        let f = family_map(&p, &FamilySpec::psi([(2, Scalar::one())]), 6).unwrap();
        let w = check_postlie(&PostLieCandidate::new(p, f).unwrap());
        assert!(w.iter().all(|w| w.axiom != Axiom::Commutativity));
        let hit = w
            .iter()
            .find(|w| {
                w.axiom == Axiom::LeibnizLike
                    && w.indices == [BasisVector::L(1), BasisVector::L(0), BasisVector::L(0)]
            })
            .expect("(L_1, L_0, L_0) witness");
        assert_eq!(hit.residual, el("I[3]"));
    }

    #[test]
    fn witness_order_is_lexicographic() {
        let t: Vec<_> = triples(1).take(3).collect();
        assert_eq!(t[0], (BasisVector::L(-1), BasisVector::L(-1), BasisVector::L(-1)));
        assert_eq!(t[1], (BasisVector::L(-1), BasisVector::L(-1), BasisVector::I(-1)));
        assert_eq!(t[2], (BasisVector::L(-1), BasisVector::I(-1), BasisVector::L(-1)));
        assert_eq!(triples(3).count(), 7 * 7 * 7 * 8);
    }

    #[test]
    fn sweep_examples() {
        let v = triviality_sweep(&Params::ints(0, 0), -3..=3, 6, 2).unwrap();
        assert!(v.pass);
        assert_eq!(v.rows.len(), 8);
        let zero = v.rows.iter().filter(|r| r.k == 0).map(|r| r.kind).collect::<Vec<_>>();
        assert_eq!(zero, vec![DirectionKind::Skew, DirectionKind::Symmetric]);
        for row in &v.rows {
            let w = row.witness.as_ref().unwrap();
            assert!(w.indices.iter().all(|b| b.degree.abs() <= WITNESS_RANGE));
            if row.kind == DirectionKind::Symmetric {
                assert!(row.quadratic_vanishes);
                assert_eq!(w.axiom, Axiom::LeibnizLike);
            }
        }

        let v = triviality_sweep(&Params::rational(1, 3, 5, 2), -2..=2, 6, 2).unwrap();
        assert!(v.pass);
        assert_eq!(v.rows.len(), 1);
        assert_eq!(v.rows[0].witness.as_ref().unwrap().axiom, Axiom::Commutativity);

        let v = triviality_sweep(&Params::ints(2, -1), -3..=1, 6, 2).unwrap();
        assert!(v.pass);
        assert_eq!(v.rows.len(), 2);
        assert!(v.rows.iter().all(|r| r.kind == DirectionKind::Skew));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn zero_product_passes_everywhere(i in 0usize..13, radius in 3i64..=5, shift in -2i64..=2) {
            let p = Params::standard_grid()[i].clone();
            let c = PostLieCandidate::new(p, WindowedBilinearMap::zero(radius, Some(shift))).unwrap();
            prop_assert!(check_postlie(&c).is_empty());
        }
    }
}
