//! Label-space geometry of shuffles and associated octahedra.
//!
//! A shuffle is fixed by `x = (x₁,x₂,x₃)` and `t = (t₁,t₂)`, with `t₃ = t₁ + t₂`.
//! Part `i` is the coset `t_i + ⟨x⟩`; a point of part `i` is addressed by a
//! coefficient mask `b ∈ F_2^3` (bit `j` selects `x_{j+1}`), so it has label
//! `t_i + b·x`. Part indices here are 0-based.

use crate::gf2lin::{combine, is_independent, FieldElem};

/// `(part, mask)` address of a shuffle point.
pub type Slot = (usize, u32);

#[inline]
pub fn unit(i: usize) -> u32 {
    1 << i
}

/// `b ∈ {e_i, (1,1,1) − e_i}`: the points of part `i` that lie on the associated octahedron.
#[inline]
pub fn is_octahedron_slot(part: usize, b: u32) -> bool {
    b == unit(part) || b == 7 ^ unit(part)
}

/// Parts `{z_i, z_j + z_k}` of the associated octahedron.
pub fn octahedron_parts(z: [FieldElem; 3]) -> [[FieldElem; 2]; 3] {
    [[z[0], z[1] ^ z[2]], [z[1], z[0] ^ z[2]], [z[2], z[0] ^ z[1]]]
}

/// The 12 edges of the associated octahedron, as label pairs.
pub fn octahedron_label_edges(z: [FieldElem; 3]) -> Vec<(FieldElem, FieldElem)> {
    let parts = octahedron_parts(z);
    let mut out = Vec::with_capacity(12);
    for i in 0..3 {
        for j in i + 1..3 {
            for &u in &parts[i] {
                for &v in &parts[j] {
                    out.push((u, v));
                }
            }
        }
    }
    out
}

/// The four zero-sum triangles of the associated octahedron.
pub fn octahedron_template_triangles(z: [FieldElem; 3]) -> [[FieldElem; 3]; 4] {
    [
        [z[0], z[1], z[0] ^ z[1]],
        [z[0], z[2], z[0] ^ z[2]],
        [z[1], z[2], z[1] ^ z[2]],
        [z[1] ^ z[2], z[0] ^ z[2], z[0] ^ z[1]],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShuffleLabels {
    pub x: [FieldElem; 3],
    pub t: [FieldElem; 3],
}

impl ShuffleLabels {
    /// The shuffle with `t_i + x_i = z_i`.
    pub fn for_target(z: [FieldElem; 3], t1: FieldElem, t2: FieldElem) -> Self {
        let t = [t1, t2, t1 ^ t2];
        ShuffleLabels {
            x: [z[0] ^ t[0], z[1] ^ t[1], z[2] ^ t[2]],
            t,
        }
    }

    /// `{x₁, x₂, x₃, t₁, t₂}` linearly independent over F_2.
    pub fn is_independent(&self) -> bool {
        is_independent(&[self.x[0], self.x[1], self.x[2], self.t[0], self.t[1]])
    }

    #[inline]
    pub fn point(&self, (part, b): Slot) -> FieldElem {
        self.t[part] ^ combine(b, &self.x)
    }

    /// All 24 slots, part-major.
    pub fn slots() -> impl Iterator<Item = Slot> {
        (0..3).flat_map(|i| (0..8u32).map(move |b| (i, b)))
    }

    /// All 192 edges of the complete tripartite graph, as slot pairs.
    pub fn edge_slots() -> impl Iterator<Item = (Slot, Slot)> {
        [(0usize, 1usize), (0, 2), (1, 2)]
            .into_iter()
            .flat_map(|(i, j)| (0..8u32).flat_map(move |bi| (0..8u32).map(move |bj| ((i, bi), (j, bj)))))
    }

    pub fn is_octahedron_edge(((i, bi), (j, bj)): (Slot, Slot)) -> bool {
        is_octahedron_slot(i, bi) && is_octahedron_slot(j, bj)
    }

    /// Template-side decomposition: `b₃ = b₁ + b₂`.
    pub fn m3_slots() -> impl Iterator<Item = [Slot; 3]> {
        (0..8u32).flat_map(|b1| (0..8u32).map(move |b2| [(0, b1), (1, b2), (2, b1 ^ b2)]))
    }

    /// Translated decomposition: `b₃ = b₁ + b₂ + (1,1,1)`.
    pub fn m4_slots() -> impl Iterator<Item = [Slot; 3]> {
        (0..8u32).flat_map(|b1| (0..8u32).map(move |b2| [(0, b1), (1, b2), (2, b1 ^ b2 ^ 7)]))
    }

    pub fn target_slots() -> [Slot; 3] {
        [(0, unit(0)), (1, unit(1)), (2, unit(2))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn fe(v: u32) -> FieldElem {
        FieldElem(v)
    }

    fn sample_shuffle() -> ShuffleLabels {
        // x = e1, e2, e3 and t = e4, e5 in F_32
        let z = [fe(0b01001), fe(0b10010), fe(0b11100)];
        ShuffleLabels::for_target(z, fe(0b01000), fe(0b10000))
    }

    #[test]
    fn shuffle_counts() {
        let s = sample_shuffle();
        assert!(s.is_independent());
        let pts: HashSet<_> = ShuffleLabels::slots().map(|p| s.point(p)).collect();
        assert_eq!(pts.len(), 24);
        assert_eq!(ShuffleLabels::edge_slots().count(), 192);
        assert_eq!(
            ShuffleLabels::edge_slots()
                .filter(|e| ShuffleLabels::is_octahedron_edge(*e))
                .count(),
            12
        );
    }

    #[test]
    fn both_decompositions_partition_edges() {
        let s = sample_shuffle();
        for slots in [
            ShuffleLabels::m3_slots().collect::<Vec<_>>(),
            ShuffleLabels::m4_slots().collect(),
        ] {
            let mut seen = HashSet::new();
            for tri in &slots {
                for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                    assert!(seen.insert((tri[a], tri[b])));
                }
            }
            assert_eq!(seen.len(), 192);
            let _ = s;
        }
    }

    #[test]
    fn m3_is_zero_sum_and_m4_contains_target() {
        let s = sample_shuffle();
        for tri in ShuffleLabels::m3_slots() {
            assert!((s.point(tri[0]) ^ s.point(tri[1]) ^ s.point(tri[2])).is_zero());
        }
        let target = ShuffleLabels::target_slots();
        assert!(ShuffleLabels::m4_slots().any(|t| t == target));
        let z: Vec<_> = target.iter().map(|&p| s.point(p)).collect();
        assert_eq!(z, vec![fe(0b01001), fe(0b10010), fe(0b11100)]);
    }

    #[test]
    fn octahedron_slots_carry_octahedron_labels() {
        let s = sample_shuffle();
        let z = [fe(0b01001), fe(0b10010), fe(0b11100)];
        let parts = octahedron_parts(z);
        for i in 0..3 {
            let mut got: Vec<_> = (0..8u32)
                .filter(|&b| is_octahedron_slot(i, b))
                .map(|b| s.point((i, b)))
                .collect();
            got.sort();
            let mut want = parts[i].to_vec();
            want.sort();
            assert_eq!(got, want);
        }
        for tri in octahedron_template_triangles(z) {
            assert!((tri[0] ^ tri[1] ^ tri[2]).is_zero());
        }
        assert_eq!(octahedron_label_edges(z).len(), 12);
    }
}
