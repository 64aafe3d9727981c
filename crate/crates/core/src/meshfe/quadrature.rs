//! Fixed quadrature rules.
//!
//! Triangle rules are symmetric Dunavant rules on the reference triangle
//! `{ξ, η ≥ 0, ξ + η ≤ 1}` with weights normalised to sum to one (multiply by
//! the element area). A degree-`p` space uses the rule of exactness `2p + 2`:
//!
//! | p | exactness | points |
//! |---|-----------|--------|
//! | 1 | 4         | 6      |
//! | 2 | 6         | 12     |
//!
//! The extra two orders over what a mass matrix needs cover non-polynomial
//! coefficients and cutoff products.

/// Quadrature on the reference triangle: `(ξ, η, weight)` with weights summing to 1.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl TriangleRule {
    /// The rule used by a degree-`p` space.
    pub fn for_space_degree(p: usize) -> Self {
        if p <= 1 {
            Self::degree4()
        } else {
            Self::degree6()
        }
    }

    fn from_orbits(orbits: &[(f64, &[f64])], exactness: usize) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for &(w, bary) in orbits {
            match bary.len() {
                1 => {
                    points.push([1.0 / 3.0, 1.0 / 3.0]);
                    weights.push(w);
                }
                2 => {
                    // (a, b, b) and permutations
                    let (a, b) = (bary[0], bary[1]);
                    for l in [[a, b, b], [b, a, b], [b, b, a]] {
                        points.push([l[1], l[2]]);
                        weights.push(w);
                    }
                }
                3 => {
                    let (a, b, c) = (bary[0], bary[1], bary[2]);
                    for l in [
                        [a, b, c],
                        [a, c, b],
                        [b, a, c],
                        [b, c, a],
                        [c, a, b],
                        [c, b, a],
                    ] {
                        points.push([l[1], l[2]]);
                        weights.push(w);
                    }
                }
                _ => unreachable!("orbit with {} barycentric entries", bary.len()),
            }
        }
        Self {
            points,
            weights,
            exactness,
        }
    }

    fn degree4() -> Self {
        Self::from_orbits(
            &[
                (
                    0.223_381_589_678_011,
                    &[0.108_103_018_168_070, 0.445_948_490_915_965],
                ),
                (
                    0.109_951_743_655_322,
                    &[0.816_847_572_980_459, 0.091_576_213_509_771],
                ),
            ],
            4,
        )
    }

    fn degree6() -> Self {
        Self::from_orbits(
            &[
                (
                    0.116_786_275_726_379,
                    &[0.501_426_509_658_179, 0.249_286_745_170_910],
                ),
                (
                    0.050_844_906_370_207,
                    &[0.873_821_971_016_996, 0.063_089_014_491_502],
                ),
                (
                    0.082_851_075_618_374,
                    &[
                        0.053_145_049_844_817,
                        0.310_352_451_033_784,
                        0.636_502_499_121_399,
                    ],
                ),
            ],
            6,
        )
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Four-point Gauss–Legendre rule mapped to `[0, 1]` (exact to degree 7).
pub fn gauss_legendre_unit() -> [(f64, f64); 4] {
    let a = 0.339_981_043_584_856_3;
    let b = 0.861_136_311_594_052_6;
    let wa = 0.652_145_154_862_546_1;
    let wb = 0.347_854_845_137_453_9;
    [
        (0.5 * (1.0 - b), 0.5 * wb),
        (0.5 * (1.0 - a), 0.5 * wa),
        (0.5 * (1.0 + a), 0.5 * wa),
        (0.5 * (1.0 + b), 0.5 * wb),
    ]
}
