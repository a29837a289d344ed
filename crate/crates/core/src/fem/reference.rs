use alloc::vec::Vec;

/// Reference-square corners in counter-clockwise order.
pub const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Bilinear basis values `(1 + xi_a xi)(1 + eta_a eta) / 4`.
#[inline]
pub fn shape_values(xi: f64, eta: f64) -> [f64; 4] {
    CORNERS.map(|c| 0.25 * (1.0 + c[0] * xi) * (1.0 + c[1] * eta))
}

/// Reference gradients `(d/dxi, d/deta)` of the four basis functions.
#[inline]
pub fn shape_gradients(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    CORNERS.map(|c| {
        [
            0.25 * c[0] * (1.0 + c[1] * eta),
            0.25 * c[1] * (1.0 + c[0] * xi),
        ]
    })
}

/// Tensor Gauss–Legendre rule on `[-1, 1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// The default 2x2 rule: points at `+-1/sqrt(3)`, unit weights.
    pub fn gauss2x2() -> Self {
        Self::gauss(2)
    }

    /// `n` by `n` Gauss rule for `n` in `1..=5`.
    pub fn gauss(n: usize) -> Self {
        let (x, w): (&[f64], &[f64]) = match n {
            1 => (&[0.0], &[2.0]),
            2 => (
                &[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8],
                &[1.0, 1.0],
            ),
            3 => (
                &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
                &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0],
            ),
            4 => (
                &[
                    -0.861_136_311_594_052_6,
                    -0.339_981_043_584_856_3,
                    0.339_981_043_584_856_3,
                    0.861_136_311_594_052_6,
                ],
                &[
                    0.347_854_845_137_453_9,
                    0.652_145_154_862_546_1,
                    0.652_145_154_862_546_1,
                    0.347_854_845_137_453_9,
                ],
            ),
            5 => (
                &[
                    -0.906_179_845_938_664,
                    -0.538_469_310_105_683_1,
                    0.0,
                    0.538_469_310_105_683_1,
                    0.906_179_845_938_664,
                ],
                &[
                    0.236_926_885_056_189_1,
                    0.478_628_670_499_366_5,
                    0.568_888_888_888_888_9,
                    0.478_628_670_499_366_5,
                    0.236_926_885_056_189_1,
                ],
            ),
            _ => panic!("Gauss rule of order {n} is not tabulated"),
        };
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        // eta outer, xi inner
        for (yj, wj) in x.iter().zip(w) {
            for (xi, wi) in x.iter().zip(w) {
                points.push([*xi, *yj]);
                weights.push(wi * wj);
            }
        }
        QuadratureRule { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn centre_and_corner_values() {
        assert_eq!(shape_values(0.0, 0.0), [0.25; 4]);
        assert_eq!(shape_values(-1.0, -1.0), [1.0, 0.0, 0.0, 0.0]);
        for (a, c) in CORNERS.iter().enumerate() {
            let v = shape_values(c[0], c[1]);
            for (b, &vb) in v.iter().enumerate() {
                assert_eq!(vb, if a == b { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn closed_form_at_off_grid_point() {
        let (x, y) = (0.3, -0.7);
        let v = shape_values(x, y);
        let expect = [
            (1.0 - x) * (1.0 - y) / 4.0,
            (1.0 + x) * (1.0 - y) / 4.0,
            (1.0 + x) * (1.0 + y) / 4.0,
            (1.0 - x) * (1.0 + y) / 4.0,
        ];
        for a in 0..4 {
            assert_relative_eq!(v[a], expect[a], max_relative = 1e-15);
        }
        assert_relative_eq!(v.iter().sum::<f64>(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (x, y, h) = (0.21, -0.4, 1e-6);
        let g = shape_gradients(x, y);
        let (xp, xm) = (shape_values(x + h, y), shape_values(x - h, y));
        let (yp, ym) = (shape_values(x, y + h), shape_values(x, y - h));
        for a in 0..4 {
            assert!((g[a][0] - (xp[a] - xm[a]) / (2.0 * h)).abs() < 1e-9);
            assert!((g[a][1] - (yp[a] - ym[a]) / (2.0 * h)).abs() < 1e-9);
        }
    }

    #[test]
    fn rules_integrate_polynomials() {
        for n in 1..=5 {
            let rule = QuadratureRule::gauss(n);
            assert_relative_eq!(rule.weights.iter().sum::<f64>(), 4.0, max_relative = 1e-14);
            // x^(2n-2) y^2 is exact for n >= 2
            let deg = 2 * n - 2;
            let f: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(p, w)| w * p[0].powi(deg as i32))
                .sum();
            assert_relative_eq!(f, 2.0 * 2.0 / (deg as f64 + 1.0), max_relative = 1e-13);
        }
        let g = QuadratureRule::gauss2x2();
        assert!(g
            .points
            .iter()
            .all(|p| (p[0].abs() - 1.0 / 3f64.sqrt()).abs() < 1e-15));
        assert!(g.weights.iter().all(|&w| w == 1.0));
    }

    proptest::proptest! {
        #[test]
        fn partition_of_unity(x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let v = shape_values(x, y);
            let g = shape_gradients(x, y);
            proptest::prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            proptest::prop_assert!(g.iter().map(|d| d[0]).sum::<f64>().abs() < 1e-15);
            proptest::prop_assert!(g.iter().map(|d| d[1]).sum::<f64>().abs() < 1e-15);
        }
    }
}
