//! Combinatorial surface of a diagram.
//!
//! The over/under roles and the crossing signs determine the cyclic order of
//! the four arc-ends around every crossing, hence a closed oriented surface
//! in which the underlying 4-valent curve embeds. Its faces drive the
//! enumeration of two-strand pokes: a poke is possible exactly between two
//! arc occurrences on a common face, and the resulting crossing signs and
//! slot patterns are forced by the boundary orientations. Diagrams coming
//! from classical knots live on the sphere (genus 0) and stay there under
//! the moves enumerated this way.

use crate::diagram::{End, GaussDiagram};

/// A directed occurrence of an arc. `gap` is the arc between slot `gap - 1`
/// and slot `gap` of the (single) component; `forward` means the dart runs
/// in the knot direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dart {
    pub gap: usize,
    pub forward: bool,
}

/// One face of the combinatorial surface: the darts along its boundary.
#[derive(Clone, Debug)]
pub struct Face {
    pub boundary: Vec<Dart>,
}

/// Face decomposition of a single-component diagram.
#[derive(Clone, Debug)]
pub struct Surface {
    pub faces: Vec<Face>,
    pub genus: i64,
}

/// Traces the faces of the surface induced by the rotation system.
///
/// Only single-component diagrams are supported; the bare circle is handled
/// as the two-faced sphere.
pub fn surface(d: &GaussDiagram) -> Surface {
    assert!(d.is_knot(), "surface tracing expects a knot diagram");
    let n2 = d.slots().len();
    if n2 == 0 {
        return Surface {
            faces: vec![
                Face { boundary: vec![Dart { gap: 0, forward: true }] },
                Face { boundary: vec![Dart { gap: 0, forward: false }] },
            ],
            genus: 0,
        };
    }

    // next_left[dart] = the dart that follows `dart` on the boundary of the
    // face lying to its left. Entering a crossing along `dart`, the boundary
    // leaves along the away-dart immediately clockwise of the reversal of
    // `dart` in the counterclockwise rotation at that crossing.
    let dart_index = |dt: Dart| -> usize { dt.gap * 2 + usize::from(dt.forward) };
    let mut next_left: Vec<Option<Dart>> = vec![None; n2 * 2];

    for id in d.arrow_ids() {
        let over = d.pos_of(id, End::Tail).expect("tail").slot;
        let under = d.pos_of(id, End::Head).expect("head").slot;
        let sign = d.sign(id).expect("sign");
        // away-darts in counterclockwise order around the crossing
        let fwd_out = |s: usize| Dart { gap: (s + 1) % n2, forward: true };
        let bwd_in = |s: usize| Dart { gap: s, forward: false };
        let ccw: [Dart; 4] = match sign {
            crate::diagram::Sign::Plus => {
                [fwd_out(over), fwd_out(under), bwd_in(over), bwd_in(under)]
            }
            crate::diagram::Sign::Minus => {
                [fwd_out(over), bwd_in(under), bwd_in(over), fwd_out(under)]
            }
        };
        // reversal of an away-dart is an incoming dart; the left-face walk
        // maps each incoming dart to the away-dart one step clockwise.
        for (k, &away) in ccw.iter().enumerate() {
            let incoming = Dart { gap: away.gap, forward: !away.forward };
            let clockwise_next = ccw[(k + 3) % 4];
            next_left[dart_index(incoming)] = Some(clockwise_next);
        }
    }

    let mut seen = vec![false; n2 * 2];
    let mut faces = Vec::new();
    for gap in 0..n2 {
        for forward in [true, false] {
            let start = Dart { gap, forward };
            if seen[dart_index(start)] {
                continue;
            }
            let mut boundary = Vec::new();
            let mut cur = start;
            loop {
                seen[dart_index(cur)] = true;
                boundary.push(cur);
                cur = next_left[dart_index(cur)].expect("complete rotation system");
                if cur == start {
                    break;
                }
            }
            faces.push(Face { boundary });
        }
    }

    let v = d.n_arrows() as i64;
    let e = n2 as i64;
    let f = faces.len() as i64;
    let genus = (2 - (v - e + f)) / 2;
    Surface { faces, genus }
}

/// Genus of the induced surface; 0 exactly when the diagram embeds in the
/// sphere with the given crossing data.
pub fn genus(d: &GaussDiagram) -> i64 {
    surface(d).genus
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::fixtures::*;
    use crate::diagram::GaussDiagram;

    fn face_sizes(d: &GaussDiagram) -> Vec<usize> {
        let mut sizes: Vec<usize> = surface(d).faces.iter().map(|f| f.boundary.len()).collect();
        sizes.sort_unstable();
        sizes
    }

    #[test]
    fn unknot_sphere() {
        let s = surface(&GaussDiagram::unknot());
        assert_eq!(s.genus, 0);
        assert_eq!(s.faces.len(), 2);
    }

    #[test]
    fn curl_has_three_faces() {
        for code in ["O1+ U1+", "U1+ O1+", "O1- U1-", "U1- O1-"] {
            let d = GaussDiagram::parse_gauss_code(code).unwrap();
            assert_eq!(genus(&d), 0, "curl {code}");
            assert_eq!(face_sizes(&d), vec![1, 1, 2], "curl {code}");
        }
    }

    #[test]
    fn standard_knots_are_spherical() {
        assert_eq!(genus(&right_trefoil()), 0);
        assert_eq!(genus(&left_trefoil()), 0);
        assert_eq!(genus(&figure_eight()), 0);
        assert_eq!(genus(&granny()), 0);
        assert_eq!(surface(&right_trefoil()).faces.len(), 5);
        assert_eq!(surface(&figure_eight()).faces.len(), 6);
    }

    #[test]
    fn cyclic_triangle_is_not_spherical() {
        // pairwise-interleaved chords with cyclically ordered passages do not
        // close up in the plane
        let d = GaussDiagram::parse_gauss_code("O1+ O2+ O3- U1+ U2+ U3-").unwrap();
        assert_ne!(genus(&d), 0);
    }

    #[test]
    fn antiparallel_fold_is_spherical() {
        let d = GaussDiagram::parse_gauss_code("O1+ O2- U2- U1+").unwrap();
        assert_eq!(genus(&d), 0);
        // the parallel fold with the same signs is not realizable
        let bad = GaussDiagram::parse_gauss_code("O1+ O2- U1+ U2-").unwrap();
        assert_ne!(genus(&bad), 0);
    }

    #[test]
    fn every_dart_appears_once() {
        let d = figure_eight();
        let s = surface(&d);
        let total: usize = s.faces.iter().map(|f| f.boundary.len()).sum();
        assert_eq!(total, d.slots().len() * 2);
    }
}
