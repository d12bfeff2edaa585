//! 19-cell hexagonal layout with wrap-around, user test grid, and the
//! grid-averaged coupling terms that enter the SINR coefficient.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent of the distance-dependent pathloss.
pub const PATHLOSS_EXPONENT: f64 = 3.76;
/// Pathloss intercept, 10^-3.53.
pub const PATHLOSS_INTERCEPT: f64 = 2.951_209_226_666_387e-4;

pub const CELL_COUNT: usize = 19;

pub type Point = [f64; 2];

/// Distance-dependent average channel gain `10^-3.53 / d^3.76`.
pub fn pathloss(distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::Domain(format!(
            "pathloss needs a positive finite distance, got {distance_m}"
        )));
    }
    Ok(PATHLOSS_INTERCEPT * distance_m.powf(-PATHLOSS_EXPONENT))
}

#[inline]
fn gain(distance_m: f64) -> f64 {
    PATHLOSS_INTERCEPT * distance_m.powf(-PATHLOSS_EXPONENT)
}

#[inline]
fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn rotate(p: Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    [p[0] * c - p[1] * s, p[0] * s + p[1] * c]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLayout {
    pub cell_centers: Vec<Point>,
    /// Hexagon circumradius `d_max`.
    pub cell_radius: f64,
    pub min_distance: f64,
    /// Lattice translations of the wrap-around torus (identity excluded).
    pub wrap_translations: Vec<Point>,
}

/// Builds the two-ring, 19-cell hexagonal cluster centred on the origin.
///
/// Cells are pointy-topped hexagons with circumradius `d_max`, so adjacent
/// centres sit `sqrt(3) * d_max` apart. The cluster tiles the plane under
/// the six rotations of the lattice vector `3u + 2v`, whose length is
/// `sqrt(19)` times the centre spacing.
pub fn build_layout(d_max: f64, d_min: f64) -> Result<CellLayout> {
    if !(d_min > 0.0) || !(d_min < d_max) || !d_max.is_finite() {
        return Err(Error::InvalidRadius { d_max, d_min });
    }
    let spacing = 3f64.sqrt() * d_max;
    let u = [spacing, 0.0];
    let v = rotate(u, PI / 3.0);

    let mut axial: Vec<(i32, i32)> = Vec::with_capacity(CELL_COUNT);
    for a in -2i32..=2 {
        for b in -2i32..=2 {
            if (a + b).abs() <= 2 {
                axial.push((a, b));
            }
        }
    }
    let ring = |&(a, b): &(i32, i32)| a.abs().max(b.abs()).max((a + b).abs());
    let mut centers: Vec<(i32, f64, Point)> = axial
        .iter()
        .map(|ab| {
            let p = [
                ab.0 as f64 * u[0] + ab.1 as f64 * v[0],
                ab.0 as f64 * u[1] + ab.1 as f64 * v[1],
            ];
            let angle = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
            (ring(ab), angle, p)
        })
        .collect();
    centers.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));

    let shift = [3.0 * u[0] + 2.0 * v[0], 3.0 * u[1] + 2.0 * v[1]];
    let wrap_translations = (0..6).map(|k| rotate(shift, k as f64 * PI / 3.0)).collect();

    Ok(CellLayout {
        cell_centers: centers.into_iter().map(|c| c.2).collect(),
        cell_radius: d_max,
        min_distance: d_min,
        wrap_translations,
    })
}

impl CellLayout {
    /// The central cell alone, with no interfering neighbours.
    pub fn isolated(&self) -> CellLayout {
        CellLayout {
            cell_centers: vec![self.cell_centers[0]],
            cell_radius: self.cell_radius,
            min_distance: self.min_distance,
            wrap_translations: Vec::new(),
        }
    }

    pub fn center_spacing(&self) -> f64 {
        3f64.sqrt() * self.cell_radius
    }

    /// Whether `p` (relative to a cell centre) lies in that cell's hexagon.
    pub fn in_hexagon(&self, p: Point) -> bool {
        let apothem = self.cell_radius * 3f64.sqrt() / 2.0;
        let tol = 1e-9 * self.cell_radius;
        (0..3).all(|k| {
            let (s, c) = (k as f64 * PI / 3.0).sin_cos();
            (p[0] * c + p[1] * s).abs() <= apothem + tol
        })
    }

    /// Minimum-image distance from `p` to `center` over the torus.
    pub fn wrapped_distance(&self, p: Point, center: Point) -> f64 {
        self.wrap_translations
            .iter()
            .map(|t| dist(p, [center[0] + t[0], center[1] + t[1]]))
            .fold(dist(p, center), f64::min)
    }

    /// Uniformly rescaled copy (all distances times `s`).
    pub fn scaled(&self, s: f64) -> CellLayout {
        let sc = |p: &Point| [p[0] * s, p[1] * s];
        CellLayout {
            cell_centers: self.cell_centers.iter().map(sc).collect(),
            cell_radius: self.cell_radius * s,
            min_distance: self.min_distance * s,
            wrap_translations: self.wrap_translations.iter().map(sc).collect(),
        }
    }
}

/// User test points in the central cell, relative to its centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestGrid {
    pub points: Vec<Point>,
}

impl TestGrid {
    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn scaled(&self, s: f64) -> TestGrid {
        TestGrid {
            points: self.points.iter().map(|p| [p[0] * s, p[1] * s]).collect(),
        }
    }
}

/// Radical inverse of `index` in `base` (van der Corput digit reversal).
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// Samples `count` points uniformly over the central hexagon with the inner
/// `d_min` disk removed.
///
/// The points come from a Halton(2, 3) sequence with a seeded random shift,
/// mapped area-uniformly onto the annulus `[d_min, d_max]` and rejected
/// outside the hexagon. The radial coordinate is stratified, which keeps the
/// grid averages of the steep pathloss terms stable at modest grid sizes.
pub fn sample_grid(layout: &CellLayout, count: usize, seed: u64) -> Result<TestGrid> {
    if count == 0 {
        return Err(Error::Domain("test grid needs at least one point".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: [f64; 2] = [rng.gen(), rng.gen()];
    let r2_min = layout.min_distance * layout.min_distance;
    let r2_span = layout.cell_radius * layout.cell_radius - r2_min;

    let mut points = Vec::with_capacity(count);
    let mut index = 1u64;
    while points.len() < count {
        let u = (radical_inverse(index, 2) + shift[0]).fract();
        let v = (radical_inverse(index, 3) + shift[1]).fract();
        index += 1;
        let r = (r2_min + u * r2_span).sqrt();
        let (s, c) = (2.0 * PI * v).sin_cos();
        let p = [r * c, r * s];
        if layout.in_hexagon(p) {
            points.push(p);
        }
    }
    Ok(TestGrid { points })
}

/// How the inter-cell coupling terms are normalized by the serving link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceNormalization {
    /// `E{lambda_d} / E{lambda_serving}`: average interference power over
    /// the average serving gain.
    #[default]
    MeanGain,
    /// `E{lambda_d / lambda_serving}`: grid mean of per-point gain ratios.
    PerPoint,
}

impl InterferenceNormalization {
    pub fn as_str(self) -> &'static str {
        match self {
            InterferenceNormalization::MeanGain => "mean-gain",
            InterferenceNormalization::PerPoint => "per-point",
        }
    }
}

impl std::str::FromStr for InterferenceNormalization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mean-gain" => Ok(Self::MeanGain),
            "per-point" => Ok(Self::PerPoint),
            other => Err(format!("unknown interference normalization `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingStats {
    /// `E{1 / lambda_serving}`, dimensionless.
    pub lambda_cc: f64,
    /// `sum_{d != c} Lambda_cd P_d`, watts.
    pub interference_sum: f64,
}

/// Per-point serving gain and interferer-to-serving gain ratio sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointGain {
    pub x_m: f64,
    pub y_m: f64,
    pub serving_gain: f64,
    pub interference_ratio_sum: f64,
}

/// Coupling averages for the central cell, every cell transmitting `per_cell_power`.
pub fn coupling_stats(
    layout: &CellLayout,
    grid: &TestGrid,
    per_cell_power: f64,
    normalization: InterferenceNormalization,
) -> Result<CouplingStats> {
    coupling_stats_at(layout, grid, per_cell_power, normalization, 0)
}

/// Same as [`coupling_stats`] with cell `serving` playing the central role.
pub fn coupling_stats_at(
    layout: &CellLayout,
    grid: &TestGrid,
    per_cell_power: f64,
    normalization: InterferenceNormalization,
    serving: usize,
) -> Result<CouplingStats> {
    if serving >= layout.cell_centers.len() {
        return Err(Error::Domain(format!("no cell with index {serving}")));
    }
    if grid.points.is_empty() {
        return Err(Error::Domain("empty test grid".into()));
    }
    if !(per_cell_power >= 0.0) {
        return Err(Error::Domain(format!(
            "per-cell power must be non-negative, got {per_cell_power}"
        )));
    }
    let n = grid.points.len() as f64;
    let mut inv_gain_sum = 0.0;
    let mut serving_gain_sum = 0.0;
    let mut interferer_gain_sum = 0.0;
    let mut ratio_sum = 0.0;
    for pg in point_gains_at(layout, grid, serving) {
        let interferer = pg.interference_ratio_sum * pg.serving_gain;
        inv_gain_sum += 1.0 / pg.serving_gain;
        serving_gain_sum += pg.serving_gain;
        interferer_gain_sum += interferer;
        ratio_sum += pg.interference_ratio_sum;
    }
    let coupling = match normalization {
        InterferenceNormalization::MeanGain => interferer_gain_sum / serving_gain_sum,
        InterferenceNormalization::PerPoint => ratio_sum / n,
    };
    Ok(CouplingStats {
        lambda_cc: inv_gain_sum / n,
        interference_sum: per_cell_power * coupling,
    })
}

/// Per-point gains for the central cell, in grid order.
pub fn point_gains(layout: &CellLayout, grid: &TestGrid) -> Vec<PointGain> {
    point_gains_at(layout, grid, 0).collect()
}

fn point_gains_at<'a>(
    layout: &'a CellLayout,
    grid: &'a TestGrid,
    serving: usize,
) -> impl Iterator<Item = PointGain> + 'a {
    let origin = layout.cell_centers[serving];
    grid.points.iter().map(move |p| {
        let x = [p[0] + origin[0], p[1] + origin[1]];
        let serving_gain = gain(dist(*p, [0.0, 0.0]));
        let interference: f64 = layout
            .cell_centers
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != serving)
            .map(|(_, c)| gain(layout.wrapped_distance(x, *c)))
            .sum();
        PointGain {
            x_m: x[0],
            y_m: x[1],
            serving_gain,
            interference_ratio_sum: interference / serving_gain,
        }
    })
}
