//! WENO5 reconstruction from double cell averages.
//!
//! One-dimensional kernels: the degree-4 central polynomial, the three
//! quadratic sub-stencil polynomials, Jiang-Shu smoothness indicators,
//! nonlinear weights with the split construction for evaluation points whose
//! linear weights are negative, and the scaling positivity limiter. The
//! two-dimensional line passes live in [`recon`].

pub mod recon;

use std::sync::LazyLock;

/// Regularizer in the nonlinear weights.
pub const WENO_EPS_DEFAULT: f64 = 1e-6;

/// Split parameter of the negative-weight construction.
const THETA_SPLIT: f64 = 3.0;

/// Weighting mode: `Linear` bypasses the smoothness sensors (omega = d),
/// which makes reconstruction exact on degree-4 data and is what order
/// verification and the force-term gradient use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WenoMode {
    Nonlinear,
    Linear,
}

/// Five consecutive double averages, indices i-2 .. i+2 along one direction.
#[derive(Debug, Clone, Copy)]
pub struct Stencil5(pub [f64; 5]);

/// Jiang-Shu smoothness measures of the three sub-stencils.
#[derive(Debug, Clone, Copy)]
pub struct SmoothnessIndicators(pub [f64; 3]);

/// Coefficients of the degree-4 polynomial `p(x) = sum c_l ((x - x_i)/dx)^l`
/// whose double averages over the five stencil cells equal the inputs.
pub fn central_poly_coeffs(s: &Stencil5) -> [f64; 5] {
    let [u0, u1, u2, u3, u4] = s.0;
    [
        (2.0 * u0 - 23.0 * u1 + 222.0 * u2 - 23.0 * u3 + 2.0 * u4) / 180.0,
        (u0 - 6.0 * u1 + 6.0 * u3 - u4) / 8.0,
        (-u0 + 10.0 * u1 - 18.0 * u2 + 10.0 * u3 - u4) / 12.0,
        (-u0 + 2.0 * u1 - 2.0 * u3 + u4) / 12.0,
        (u0 - 4.0 * u1 + 6.0 * u2 - 4.0 * u3 + u4) / 24.0,
    ]
}

/// Evaluate the central polynomial at offset `t` (units of the cell width).
pub fn central_eval(s: &Stencil5, t: f64) -> f64 {
    let c = central_poly_coeffs(s);
    c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * c[4])))
}

/// Value and d/dt of the central polynomial at offset `t`.
pub fn central_eval_with_deriv(s: &Stencil5, t: f64) -> (f64, f64) {
    let c = central_poly_coeffs(s);
    let v = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * c[4])));
    let dv = c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * 4.0 * c[4]));
    (v, dv)
}

/// Quadratic coefficients (constant, slope, curvature) of the three
/// sub-stencil polynomials, in the `(x - x_i)/dx` variable.
pub fn substencil_coeffs(s: &Stencil5) -> [[f64; 3]; 3] {
    let [u0, u1, u2, u3, u4] = s.0;
    [
        [
            (-u0 + 2.0 * u1 + 11.0 * u2) / 12.0,
            (u0 - 4.0 * u1 + 3.0 * u2) / 2.0,
            (u0 - 2.0 * u1 + u2) / 2.0,
        ],
        [
            (-u1 + 14.0 * u2 - u3) / 12.0,
            (u3 - u1) / 2.0,
            (u1 - 2.0 * u2 + u3) / 2.0,
        ],
        [
            (11.0 * u2 + 2.0 * u3 - u4) / 12.0,
            (-3.0 * u2 + 4.0 * u3 - u4) / 2.0,
            (u2 - 2.0 * u3 + u4) / 2.0,
        ],
    ]
}

/// The three sub-stencil polynomials evaluated at offset `t`.
pub fn substencil_values(s: &Stencil5, t: f64) -> [f64; 3] {
    let c = substencil_coeffs(s);
    [
        c[0][0] + t * (c[0][1] + t * c[0][2]),
        c[1][0] + t * (c[1][1] + t * c[1][2]),
        c[2][0] + t * (c[2][1] + t * c[2][2]),
    ]
}

/// Jiang-Shu indicators in the standard symmetric form, assembled from
/// first differences so constant stencils give exact zeros.
pub fn smoothness(s: &Stencil5) -> SmoothnessIndicators {
    let [u0, u1, u2, u3, u4] = s.0;
    let k = 13.0 / 12.0;
    let d01 = u0 - u1;
    let d21 = u2 - u1;
    let d12 = u1 - u2;
    let d32 = u3 - u2;
    let d23 = u2 - u3;
    let d43 = u4 - u3;
    SmoothnessIndicators([
        k * (d01 + d21).powi(2) + 0.25 * (d01 + 3.0 * d21).powi(2),
        k * (d12 + d32).powi(2) + 0.25 * (u1 - u3).powi(2),
        k * (d23 + d43).powi(2) + 0.25 * (3.0 * d23 + d43).powi(2),
    ])
}

/// Nonlinear weights. All-positive linear weights take the usual normalized
/// form; any negative weight triggers the split construction with theta = 3.
/// Either branch sums to 1.
pub fn nonlinear_weights(d: [f64; 3], beta: &SmoothnessIndicators, eps: f64) -> [f64; 3] {
    let inv = [
        1.0 / ((beta.0[0] + eps) * (beta.0[0] + eps)),
        1.0 / ((beta.0[1] + eps) * (beta.0[1] + eps)),
        1.0 / ((beta.0[2] + eps) * (beta.0[2] + eps)),
    ];
    if d[0] >= 0.0 && d[1] >= 0.0 && d[2] >= 0.0 {
        let w = [d[0] * inv[0], d[1] * inv[1], d[2] * inv[2]];
        let s = w[0] + w[1] + w[2];
        [w[0] / s, w[1] / s, w[2] / s]
    } else {
        split_weights(d, &inv)
    }
}

fn split_weights(d: [f64; 3], inv: &[f64; 3]) -> [f64; 3] {
    let mut gp = [0.0; 3];
    let mut gm = [0.0; 3];
    for m in 0..3 {
        gp[m] = 0.5 * (d[m] + THETA_SPLIT * d[m].abs());
        gm[m] = gp[m] - d[m];
    }
    let sp: f64 = gp.iter().sum();
    let sm: f64 = gm.iter().sum();
    let mut wp = [0.0; 3];
    let mut wm = [0.0; 3];
    for m in 0..3 {
        wp[m] = (gp[m] / sp) * inv[m];
        wm[m] = (gm[m] / sm) * inv[m];
    }
    let tp: f64 = wp.iter().sum();
    let tm: f64 = wm.iter().sum();
    let mut out = [0.0; 3];
    for m in 0..3 {
        out[m] = sp * wp[m] / tp - sm * wm[m] / tm;
    }
    out
}

/// The eleven evaluation points reconstruction is ever asked for, as offsets
/// from the cell center in units of the cell width: the three Gauss nodes
/// straddling each face, and the five interior tensor nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanonicalPoint {
    LeftOuter,
    LeftFace,
    LeftInner,
    RightInner,
    RightFace,
    RightOuter,
    /// Interior tensor node, index 0..5 left to right.
    Interior(u8),
}

pub const CANONICAL_POINTS: [CanonicalPoint; 11] = [
    CanonicalPoint::LeftOuter,
    CanonicalPoint::LeftFace,
    CanonicalPoint::LeftInner,
    CanonicalPoint::RightInner,
    CanonicalPoint::RightFace,
    CanonicalPoint::RightOuter,
    CanonicalPoint::Interior(0),
    CanonicalPoint::Interior(1),
    CanonicalPoint::Interior(2),
    CanonicalPoint::Interior(3),
    CanonicalPoint::Interior(4),
];

impl CanonicalPoint {
    /// Offset from the cell center in cell widths.
    pub fn offset(self) -> f64 {
        let s15 = 15.0_f64.sqrt();
        match self {
            CanonicalPoint::LeftOuter => -0.5 - s15 / 10.0,
            CanonicalPoint::LeftFace => -0.5,
            CanonicalPoint::LeftInner => -0.5 + s15 / 10.0,
            CanonicalPoint::RightInner => 0.5 - s15 / 10.0,
            CanonicalPoint::RightFace => 0.5,
            CanonicalPoint::RightOuter => 0.5 + s15 / 10.0,
            CanonicalPoint::Interior(k) => [-s15 / 5.0, -s15 / 10.0, 0.0, s15 / 10.0, s15 / 5.0][k as usize],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CanonicalPoint::LeftOuter => "x_{i-1/2} - sqrt(15)/10 dx",
            CanonicalPoint::LeftFace => "x_{i-1/2}",
            CanonicalPoint::LeftInner => "x_{i-1/2} + sqrt(15)/10 dx",
            CanonicalPoint::RightInner => "x_{i+1/2} - sqrt(15)/10 dx",
            CanonicalPoint::RightFace => "x_{i+1/2}",
            CanonicalPoint::RightOuter => "x_{i+1/2} + sqrt(15)/10 dx",
            CanonicalPoint::Interior(0) => "x_i - sqrt(15)/5 dx",
            CanonicalPoint::Interior(1) => "x_i - sqrt(15)/10 dx",
            CanonicalPoint::Interior(2) => "x_i",
            CanonicalPoint::Interior(3) => "x_i + sqrt(15)/10 dx",
            CanonicalPoint::Interior(_) => "x_i + sqrt(15)/5 dx",
        }
    }
}

/// Linear weights `d_m` at one canonical point plus a flag for the split
/// construction.
#[derive(Debug, Clone, Copy)]
pub struct PointWeights {
    pub point: CanonicalPoint,
    pub offset: f64,
    pub d: [f64; 3],
    pub any_negative: bool,
}

/// The stored table of linear weights at the eleven canonical points, in
/// closed form with the misprints of the source table corrected (see
/// [`table2_diff_report`]). Validated against [`solve_exactness_weights`] at
/// build time by the test suite.
#[derive(Debug, Clone)]
pub struct LinearWeightTable {
    points: [PointWeights; 11],
}

static TABLE: LazyLock<LinearWeightTable> = LazyLock::new(LinearWeightTable::build);

impl LinearWeightTable {
    pub fn get() -> &'static LinearWeightTable {
        &TABLE
    }

    pub fn all(&self) -> &[PointWeights; 11] {
        &self.points
    }

    pub fn weights(&self, p: CanonicalPoint) -> [f64; 3] {
        self.entry(p).d
    }

    pub fn entry(&self, p: CanonicalPoint) -> &PointWeights {
        self.points
            .iter()
            .find(|e| e.point == p)
            .expect("all canonical points are tabulated")
    }

    fn build() -> Self {
        let s15 = 15.0_f64.sqrt();
        let face_outer = [
            307.0 / 960.0 + 3.0 * s15 / 40.0,
            8377.0 / 6720.0 - 257.0 * s15 / 1120.0,
            -1903.0 / 3360.0 + 173.0 * s15 / 1120.0,
        ];
        let face = [341.0 / 1200.0, 337.0 / 600.0, 37.0 / 240.0];
        let face_inner = [
            307.0 / 960.0 - 3.0 * s15 / 40.0,
            8377.0 / 6720.0 + 257.0 * s15 / 1120.0,
            -1903.0 / 3360.0 - 173.0 * s15 / 1120.0,
        ];
        let t_outer = [
            427.0 / 1590.0 + 29.0 * s15 / 530.0,
            368.0 / 795.0,
            427.0 / 1590.0 - 29.0 * s15 / 530.0,
        ];
        let t_inner = [
            29147.0 / 129360.0 - 41.0 * s15 / 21560.0,
            35533.0 / 64680.0,
            29147.0 / 129360.0 + 41.0 * s15 / 21560.0,
        ];
        let center = [-2.0 / 15.0, 19.0 / 15.0, -2.0 / 15.0];

        let rev = |d: [f64; 3]| [d[2], d[1], d[0]];
        let mk = |point: CanonicalPoint, d: [f64; 3]| PointWeights {
            point,
            offset: point.offset(),
            d,
            any_negative: d.iter().any(|&v| v < 0.0),
        };
        LinearWeightTable {
            points: [
                mk(CanonicalPoint::LeftOuter, face_outer),
                mk(CanonicalPoint::LeftFace, face),
                mk(CanonicalPoint::LeftInner, face_inner),
                mk(CanonicalPoint::RightInner, rev(face_inner)),
                mk(CanonicalPoint::RightFace, rev(face)),
                mk(CanonicalPoint::RightOuter, rev(face_outer)),
                mk(CanonicalPoint::Interior(0), t_outer),
                mk(CanonicalPoint::Interior(1), t_inner),
                mk(CanonicalPoint::Interior(2), center),
                mk(CanonicalPoint::Interior(3), rev(t_inner)),
                mk(CanonicalPoint::Interior(4), rev(t_outer)),
            ],
        }
    }
}

/// Linear weights at one of the canonical points.
pub fn linear_weights(p: CanonicalPoint) -> [f64; 3] {
    LinearWeightTable::get().weights(p)
}

/// Solve the exactness system for the linear weights at offset `t`: the
/// combination `sum_m d_m p_m(t)` must reproduce the degree-4 central
/// polynomial for every stencil. Five equations (one per unit stencil) in
/// three unknowns, solved by normal equations; the returned residual is the
/// largest equation defect and is ~0 whenever the system is consistent.
pub fn solve_exactness_weights(t: f64) -> ([f64; 3], f64) {
    let mut a = [[0.0_f64; 3]; 5];
    let mut b = [0.0_f64; 5];
    for k in 0..5 {
        let mut unit = [0.0; 5];
        unit[k] = 1.0;
        let s = Stencil5(unit);
        let p = substencil_values(&s, t);
        a[k] = p;
        b[k] = central_eval(&s, t);
    }
    // normal equations A^T A d = A^T b
    let mut ata = [[0.0_f64; 3]; 3];
    let mut atb = [0.0_f64; 3];
    for r in 0..3 {
        for c in 0..3 {
            ata[r][c] = (0..5).map(|k| a[k][r] * a[k][c]).sum();
        }
        atb[r] = (0..5).map(|k| a[k][r] * b[k]).sum();
    }
    let d = solve3(&ata, &atb);
    let mut residual = 0.0_f64;
    for k in 0..5 {
        let lhs: f64 = (0..3).map(|m| a[k][m] * d[m]).sum();
        residual = residual.max((lhs - b[k]).abs());
    }
    (d, residual)
}

fn solve3(m: &[[f64; 3]; 3], rhs: &[f64; 3]) -> [f64; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut out = [0.0; 3];
    for c in 0..3 {
        let mut mm = *m;
        for r in 0..3 {
            mm[r][c] = rhs[r];
        }
        let dc = mm[0][0] * (mm[1][1] * mm[2][2] - mm[1][2] * mm[2][1])
            - mm[0][1] * (mm[1][0] * mm[2][2] - mm[1][2] * mm[2][0])
            + mm[0][2] * (mm[1][0] * mm[2][1] - mm[1][1] * mm[2][0]);
        out[c] = dc / det;
    }
    out
}

/// Reconstruct the point value at a canonical point from one stencil.
pub fn reconstruct_point(s: &Stencil5, p: CanonicalPoint, eps: f64, mode: WenoMode) -> f64 {
    let e = LinearWeightTable::get().entry(p);
    let vals = substencil_values(s, e.offset);
    let w = match mode {
        WenoMode::Linear => e.d,
        WenoMode::Nonlinear => nonlinear_weights(e.d, &smoothness(s), eps),
    };
    w[0] * vals[0] + w[1] * vals[1] + w[2] * vals[2]
}

/// Scaling limiter: pull the reconstructed point values of one cell toward
/// the (nonnegative) cell average until none is negative. The affine map
/// leaves any weighted average that equaled `cell_avg` unchanged.
pub fn positivity_limiter(cell_avg: f64, points: &mut [f64]) {
    let mut min = f64::INFINITY;
    for &p in points.iter() {
        min = min.min(p);
    }
    if !(min < 0.0) {
        return;
    }
    if cell_avg < 0.0 {
        // nothing to scale toward; negativity is reported upstream
        return;
    }
    let theta = (cell_avg / (cell_avg - min)).min(1.0);
    for p in points.iter_mut() {
        *p = cell_avg + theta * (*p - cell_avg);
    }
}

/// One discrepancy between the published weight table and the exactness
/// oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum Table2Misprint {
    Value {
        point: CanonicalPoint,
        /// 0-based weight column (the table prints them 1-based).
        column: usize,
        printed: f64,
        corrected: f64,
    },
    PointLabel {
        printed: &'static str,
        corrected: &'static str,
    },
}

/// Compare the published table, entered verbatim, against the exactness
/// oracle. The interior rows are compared at the canonical tensor nodes; the
/// published interior node radii themselves are checked against the
/// quadrature-rule offsets.
pub fn table2_diff_report() -> Vec<Table2Misprint> {
    let s15 = 15.0_f64.sqrt();
    let s10 = 10.0_f64.sqrt();
    // rows exactly as printed (d columns 1..3)
    let printed: [(CanonicalPoint, [f64; 3]); 11] = [
        (CanonicalPoint::LeftOuter, [
            (307.0 + 72.0 * s15) / 960.0,
            (8377.0 - 1542.0 * s15) / 6720.0,
            173.0 * (-11.0 + 3.0 * s15) / 3360.0,
        ]),
        (CanonicalPoint::LeftFace, [341.0 / 1200.0, 337.0 / 600.0, 37.0 / 240.0]),
        (CanonicalPoint::LeftInner, [
            (307.0 - 72.0 * s15) / 960.0,
            (8377.0 + 1542.0 * s15) / 6720.0,
            -173.0 * (11.0 + 3.0 * s15) / 3360.0,
        ]),
        (CanonicalPoint::RightInner, [
            -173.0 * (11.0 + 3.0 * s15) / 3360.0,
            (8377.0 + 1542.0 * s15) / 6720.0,
            (307.0 - 72.0 * s15) / 960.0,
        ]),
        (CanonicalPoint::RightFace, [37.0 / 240.0, 337.0 / 600.0, 341.0 / 1200.0]),
        (CanonicalPoint::RightOuter, [
            173.0 * (-11.0 + 3.0 * s15) / 3360.0,
            (8377.0 - 1542.0 * s15) / 6720.0,
            (307.0 + 72.0 * s15) / 960.0,
        ]),
        (CanonicalPoint::Interior(0), [
            (427.0 + 87.0 * s15) / 1590.0,
            368.0 / 795.0,
            (427.0 - 87.0 * s15) / 590.0, // printed denominator
        ]),
        (CanonicalPoint::Interior(1), [
            (29147.0 - 246.0 * s15) / 129360.0,
            35533.0 / 64680.0,
            (29147.0 + 246.0 * s15) / 129360.0,
        ]),
        (CanonicalPoint::Interior(2), [-2.0 / 15.0, 19.0 / 15.0, -2.0 / 15.0]),
        (CanonicalPoint::Interior(3), [
            (29147.0 + 246.0 * s15) / 129360.0,
            35533.0 / 64680.0,
            (29147.0 - 246.0 * s15) / 129360.0,
        ]),
        (CanonicalPoint::Interior(4), [
            (427.0 - 87.0 * s15) / 1590.0,
            368.0 / 795.0,
            (427.0 + 87.0 * s15) / 1590.0,
        ]),
    ];

    let mut diffs = Vec::new();
    for (point, row) in printed {
        let (oracle, _) = solve_exactness_weights(point.offset());
        for (column, (&p, &o)) in row.iter().zip(oracle.iter()).enumerate() {
            if (p - o).abs() > 1e-12 * o.abs().max(1.0) {
                diffs.push(Table2Misprint::Value {
                    point,
                    column,
                    printed: p,
                    corrected: o,
                });
            }
        }
    }
    // interior node radii as printed vs the tensor-rule offsets
    if (s10 / 5.0 - s15 / 5.0).abs() > 1e-13 {
        diffs.push(Table2Misprint::PointLabel {
            printed: "x_i +/- sqrt(10)/5 dx",
            corrected: "x_i +/- sqrt(15)/5 dx",
        });
    }
    if (s10 / 10.0 - s15 / 10.0).abs() > 1e-13 {
        diffs.push(Table2Misprint::PointLabel {
            printed: "x_i +/- sqrt(10)/10 dx",
            corrected: "x_i +/- sqrt(15)/10 dx",
        });
    }
    diffs
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn central_coeffs_constant_and_linear() {
        let c = central_poly_coeffs(&Stencil5([1.0; 5]));
        assert!((c[0] - 1.0).abs() < 1e-15);
        for &v in &c[1..] {
            assert!(v.abs() < 1e-15);
        }
        let c = central_poly_coeffs(&Stencil5([-2.0, -1.0, 0.0, 1.0, 2.0]));
        assert!(c[0].abs() < 1e-15);
        assert!((c[1] - 1.0).abs() < 1e-15);
        assert!(c[2].abs() < 1e-15 && c[3].abs() < 1e-15 && c[4].abs() < 1e-15);
    }

    /// Double average of t^l over the unit cell centered at integer k.
    fn da_monomial(l: u32, k: f64) -> f64 {
        match l {
            0 => 1.0,
            1 => k,
            2 => k * k + 1.0 / 6.0,
            3 => k * k * k + 0.5 * k,
            4 => k.powi(4) + k * k + 1.0 / 15.0,
            _ => unreachable!(),
        }
    }

    #[test]
    fn central_coeffs_solve_the_double_average_system() {
        // stencil of double averages of an arbitrary quartic
        let poly = [0.7, -1.3, 0.5, 0.21, -0.04];
        let mut s = [0.0; 5];
        for (idx, cell) in (-2..=2).enumerate() {
            s[idx] = (0..5).map(|l| poly[l] * da_monomial(l as u32, cell as f64)).sum();
        }
        let c = central_poly_coeffs(&Stencil5(s));
        for l in 0..5 {
            assert!(
                (c[l] - poly[l]).abs() < 1e-12,
                "coefficient {l}: got {}, want {}",
                c[l],
                poly[l]
            );
        }
        // x^2 data: unit cells, c2 = 1 and c0 = k^2 contribution at center
        let sq: Vec<f64> = (-2..=2).map(|k| da_monomial(2, k as f64)).collect();
        let c = central_poly_coeffs(&Stencil5([sq[0], sq[1], sq[2], sq[3], sq[4]]));
        assert!((c[2] - 1.0).abs() < 1e-13);
        assert!(c[0].abs() < 1e-13, "constant term of centered x^2 is 0, got {}", c[0]);
    }

    #[test]
    fn substencil_constant_linear_quadratic() {
        let v = substencil_values(&Stencil5([3.5; 5]), 0.3);
        for p in v {
            assert!((p - 3.5).abs() < 1e-15);
        }
        let v = substencil_values(&Stencil5([-2.0, -1.0, 0.0, 1.0, 2.0]), 0.5);
        for p in v {
            assert!((p - 0.5).abs() < 1e-14);
        }
        // each sub-stencil reproduces quadratics exactly
        let q = |t: f64| 0.4 + 1.1 * t - 0.8 * t * t;
        let s: Vec<f64> = (-2..=2)
            .map(|k| 0.4 + 1.1 * da_monomial(1, k as f64) - 0.8 * da_monomial(2, k as f64))
            .collect();
        let s = Stencil5([s[0], s[1], s[2], s[3], s[4]]);
        for t in [-0.7, -0.5, 0.0, 0.31, 0.5, 0.88] {
            let v = substencil_values(&s, t);
            for (m, p) in v.into_iter().enumerate() {
                assert!((p - q(t)).abs() < 1e-13, "sub-stencil {m} at t={t}");
            }
        }
    }

    #[test]
    fn smoothness_reference_cases() {
        let b = smoothness(&Stencil5([4.2; 5]));
        assert_eq!(b.0, [0.0, 0.0, 0.0]);
        let b = smoothness(&Stencil5([-2.0, -1.0, 0.0, 1.0, 2.0]));
        for v in b.0 {
            assert!((v - 1.0).abs() < 1e-15);
        }
        let b = smoothness(&Stencil5([0.0, 0.0, 0.0, 1.0, 1.0]));
        assert_eq!(b.0[0], 0.0);
        assert!(b.0[2] > b.0[0]);
    }

    #[test]
    fn nonlinear_weights_reference_cases() {
        // equal denominators: recover the linear weights
        let d = [0.1, 0.6, 0.3];
        let w = nonlinear_weights(d, &SmoothnessIndicators([0.0; 3]), 1e-6);
        for m in 0..3 {
            assert!((w[m] - d[m]).abs() < 1e-13);
        }
        // split construction reduces to linear weights on smooth data
        let d = [-2.0 / 15.0, 19.0 / 15.0, -2.0 / 15.0];
        let w = nonlinear_weights(d, &SmoothnessIndicators([0.0; 3]), 1e-6);
        for m in 0..3 {
            assert!((w[m] - d[m]).abs() < 1e-13, "split weights on smooth data: {w:?}");
        }
        // rough stencil suppressed
        let w = nonlinear_weights([0.3, 0.3, 0.4], &SmoothnessIndicators([1.0, 1.0, 1e6]), 1e-6);
        assert!(w[2] < 1e-9, "omega2 = {}", w[2]);
    }

    #[test]
    fn eno_suppresses_discontinuous_substencil() {
        // jump between the third and fourth cell: beta2 sees it, beta0 does not
        let s = Stencil5([0.0, 0.0, 0.0, 1.0, 1.0]);
        let e = LinearWeightTable::get().entry(CanonicalPoint::RightFace);
        let w = nonlinear_weights(e.d, &smoothness(&s), WENO_EPS_DEFAULT);
        assert!(w[2] < 1e-6, "discontinuous sub-stencil weight {}", w[2]);
    }

    #[test]
    fn table_reference_rows() {
        let t = LinearWeightTable::get();
        let d = t.weights(CanonicalPoint::Interior(2));
        assert_eq!(d, [-2.0 / 15.0, 19.0 / 15.0, -2.0 / 15.0]);
        let d = t.weights(CanonicalPoint::LeftFace);
        assert_eq!(d, [341.0 / 1200.0, 337.0 / 600.0, 37.0 / 240.0]);
        assert!((d[0] + d[1] + d[2] - 1.0).abs() < 1e-15);
        for e in t.all() {
            let s: f64 = e.d.iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "weights at {:?} sum to {s}", e.point);
        }
    }

    #[test]
    fn stored_table_matches_exactness_oracle() {
        for e in LinearWeightTable::get().all() {
            let (d, residual) = solve_exactness_weights(e.offset);
            assert!(residual < 1e-10, "inconsistent system at {:?}", e.point);
            for m in 0..3 {
                assert!(
                    (d[m] - e.d[m]).abs() <= 1e-12 * e.d[m].abs().max(1.0),
                    "{:?} d{m}: oracle {}, stored {}",
                    e.point,
                    d[m],
                    e.d[m]
                );
            }
        }
    }

    #[test]
    fn diff_report_lists_exactly_the_documented_misprints() {
        let diffs = table2_diff_report();
        assert_eq!(diffs.len(), 3, "{diffs:?}");
        match &diffs[0] {
            Table2Misprint::Value { point, column, printed, corrected } => {
                assert_eq!(*point, CanonicalPoint::Interior(0));
                assert_eq!(*column, 2);
                // printed denominator 590 instead of 1590
                let s15 = 15.0_f64.sqrt();
                assert!((printed - (427.0 - 87.0 * s15) / 590.0).abs() < 1e-15);
                assert!((corrected - (427.0 - 87.0 * s15) / 1590.0).abs() < 1e-12);
            }
            other => panic!("expected a value misprint first, got {other:?}"),
        }
        assert!(matches!(diffs[1], Table2Misprint::PointLabel { .. }));
        assert!(matches!(diffs[2], Table2Misprint::PointLabel { .. }));
    }

    #[test]
    fn reconstruct_point_constant_and_degree4() {
        for &p in &CANONICAL_POINTS {
            let v = reconstruct_point(&Stencil5([2.5; 5]), p, WENO_EPS_DEFAULT, WenoMode::Nonlinear);
            assert!((v - 2.5).abs() < 1e-13);
        }
        // degree-4 data, linear mode: exact point values
        let poly = [0.3, -0.9, 1.7, 0.4, -0.25];
        let eval = |t: f64| (0..5).map(|l| poly[l] * t.powi(l as i32)).sum::<f64>();
        let mut s = [0.0; 5];
        for (idx, cell) in (-2..=2).enumerate() {
            s[idx] = (0..5).map(|l| poly[l] * da_monomial(l as u32, cell as f64)).sum();
        }
        let s = Stencil5(s);
        for &p in &CANONICAL_POINTS {
            let v = reconstruct_point(&s, p, WENO_EPS_DEFAULT, WenoMode::Linear);
            let want = eval(p.offset());
            assert!(
                (v - want).abs() <= 1e-12 * want.abs().max(1.0),
                "{p:?}: got {v}, want {want}"
            );
        }
    }

    #[test]
    fn reconstruct_point_fifth_order_on_sine() {
        // max error over canonical points for u = sin(x), halving h
        let err_for = |h: f64| -> f64 {
            // double averages of sin over 5 cells of width h centered at x0
            let x0 = 0.37;
            let da_sin = |c: f64| -> f64 {
                // nested average of sin: (1/h^2) int int sin = sin(c) * (2 sin(h/2)/h)^2
                let s = (0.5 * h).sin() / (0.5 * h);
                s * s * c.sin()
            };
            let mut s = [0.0; 5];
            for (idx, k) in (-2..=2).enumerate() {
                s[idx] = da_sin(x0 + k as f64 * h);
            }
            let s = Stencil5(s);
            let mut e = 0.0_f64;
            for &p in &CANONICAL_POINTS {
                let v = reconstruct_point(&s, p, WENO_EPS_DEFAULT, WenoMode::Nonlinear);
                let want = (x0 + p.offset() * h).sin();
                e = e.max((v - want).abs());
            }
            e
        };
        let e1 = err_for(0.02);
        let e2 = err_for(0.01);
        let order = (e1 / e2).log2();
        assert!(order > 4.5, "observed order {order} (errors {e1}, {e2})");
    }

    #[test]
    fn limiter_reference_cases() {
        let mut pts = [3.0, -1.0];
        positivity_limiter(1.0, &mut pts);
        assert_eq!(pts, [2.0, 0.0]);

        let mut pts = [0.5, 1.5, 2.0];
        positivity_limiter(1.0, &mut pts);
        assert_eq!(pts, [0.5, 1.5, 2.0]);

        let mut pts = [0.4, -0.3, 1.1];
        positivity_limiter(0.0, &mut pts);
        for p in pts {
            assert!(p.abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn nonlinear_weights_always_sum_to_one(
            b0 in 0.0f64..1e4, b1 in 0.0f64..1e4, b2 in 0.0f64..1e4,
            pick in 0usize..11,
        ) {
            let e = &LinearWeightTable::get().all()[pick];
            let w = nonlinear_weights(e.d, &SmoothnessIndicators([b0, b1, b2]), 1e-6);
            let s: f64 = w.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-13, "sum {} at {:?}", s, e.point);
        }

        #[test]
        fn limiter_preserves_mean_and_nonnegativity(
            avg in 0.0f64..10.0,
            spread in proptest::collection::vec(-1.0f64..1.0, 2..12),
        ) {
            // points with exact mean `avg`
            let n = spread.len() as f64;
            let shift: f64 = spread.iter().sum::<f64>() / n;
            let mut pts: Vec<f64> = spread.iter().map(|s| avg + 5.0 * (s - shift)).collect();
            let before: f64 = pts.iter().sum::<f64>() / n;
            positivity_limiter(avg, &mut pts);
            let after: f64 = pts.iter().sum::<f64>() / n;
            prop_assert!((after - before).abs() < 1e-10 * avg.max(1.0));
            for p in pts {
                prop_assert!(p >= -1e-12);
            }
        }
    }
}
