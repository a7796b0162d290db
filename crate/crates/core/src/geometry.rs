//! Array layout, scene placement and per-element propagation geometry.
//!
//! The RIS local frame has the array in the `z = 0` plane with boresight
//! along `+z`. Directions use azimuth `φ` (rotation about local `y`, toward
//! `+x`) and elevation `θ` (toward `+y`):
//!
//! ```text
//! x = r cos θ sin φ,   y = r sin θ,   z = r cos θ cos φ
//! ```

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Result, RisError};
use crate::SPEED_OF_LIGHT;

/// Cartesian 3-vector in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// One RIS element. `index` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementGeometry {
    pub index: usize,
    pub position: Vec3,
}

/// Planar RIS array with its electrical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RisArrayDoc")]
pub struct RisArray {
    elements: Vec<ElementGeometry>,
    spacing: f64,
    carrier_frequency: f64,
    element_gain: f64,
    element_area: f64,
    pattern_exponent: f64,
}

#[derive(Deserialize)]
struct RisArrayDoc {
    elements: Vec<ElementGeometry>,
    spacing: f64,
    carrier_frequency: f64,
    element_gain: f64,
    element_area: f64,
    pattern_exponent: f64,
}

impl TryFrom<RisArrayDoc> for RisArray {
    type Error = RisError;
    fn try_from(d: RisArrayDoc) -> Result<Self> {
        RisArray::from_elements(
            d.elements,
            d.spacing,
            d.carrier_frequency,
            d.element_gain,
            d.element_area,
            d.pattern_exponent,
        )
    }
}

/// Element spacing in wavelengths used by the reference hardware.
pub const DEFAULT_SPACING_WAVELENGTHS: f64 = 0.75;
/// Reference carrier frequency in Hz.
pub const DEFAULT_CARRIER_FREQUENCY: f64 = 26.0e9;
/// Number of hexagonal rings around the center element (37 elements).
pub const DEFAULT_RINGS: usize = 3;
/// Default cosine exponent of the element pattern.
pub const DEFAULT_PATTERN_EXPONENT: f64 = 1.0;

/// Area of one cell of a hexagonal lattice with the given spacing.
pub fn hex_cell_area(spacing: f64) -> f64 {
    spacing * spacing * 3f64.sqrt() / 2.0
}

/// Number of elements in a centered hexagonal lattice with `rings` rings.
pub fn hex_element_count(rings: usize) -> usize {
    1 + 3 * rings * (rings + 1)
}

/// Builds a centered hexagonal lattice. Element 1 sits at the origin; the
/// remaining elements follow ring by ring, each ring ordered by polar angle
/// ascending from local `+x`.
pub fn build_hex_array(
    rings: usize,
    spacing: f64,
    carrier_frequency: f64,
    element_gain: f64,
    element_area: f64,
    pattern_exponent: f64,
) -> Result<RisArray> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(RisError::invalid(format!("spacing must be > 0, got {spacing}")));
    }
    let half_sqrt3 = 3f64.sqrt() / 2.0;
    let mut positions = vec![Vec3::ZERO];
    let r = rings as i64;
    for ring in 1..=r {
        let mut ring_points: Vec<(f64, Vec3)> = Vec::with_capacity(6 * ring as usize);
        for a in -ring..=ring {
            for b in -ring..=ring {
                if (a.abs() + b.abs() + (a + b).abs()) / 2 != ring {
                    continue;
                }
                let x = (a as f64 + 0.5 * b as f64) * spacing;
                let y = b as f64 * half_sqrt3 * spacing;
                let angle = y.atan2(x).rem_euclid(std::f64::consts::TAU);
                ring_points.push((angle, Vec3::new(x, y, 0.0)));
            }
        }
        ring_points.sort_by(|p, q| p.0.total_cmp(&q.0));
        positions.extend(ring_points.into_iter().map(|(_, p)| p));
    }
    let elements = positions
        .into_iter()
        .enumerate()
        .map(|(i, position)| ElementGeometry {
            index: i + 1,
            position,
        })
        .collect();
    RisArray::from_elements(
        elements,
        spacing,
        carrier_frequency,
        element_gain,
        element_area,
        pattern_exponent,
    )
}

impl RisArray {
    /// Validates and assembles an array from explicit element positions.
    pub fn from_elements(
        elements: Vec<ElementGeometry>,
        spacing: f64,
        carrier_frequency: f64,
        element_gain: f64,
        element_area: f64,
        pattern_exponent: f64,
    ) -> Result<Self> {
        if elements.is_empty() {
            return Err(RisError::invalid("array needs at least one element"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(RisError::invalid(format!("spacing must be > 0, got {spacing}")));
        }
        if !(carrier_frequency > 0.0 && carrier_frequency.is_finite()) {
            return Err(RisError::invalid(format!(
                "carrier frequency must be > 0, got {carrier_frequency}"
            )));
        }
        if !(element_gain > 0.0 && element_area > 0.0) {
            return Err(RisError::invalid("element gain and area must be > 0"));
        }
        if !(pattern_exponent >= 0.0 && pattern_exponent.is_finite()) {
            return Err(RisError::invalid("pattern exponent must be >= 0"));
        }
        for (i, e) in elements.iter().enumerate() {
            if e.index != i + 1 {
                return Err(RisError::invalid(format!(
                    "element indices must be contiguous from 1, found {} at slot {}",
                    e.index,
                    i + 1
                )));
            }
            if e.position.z != 0.0 {
                return Err(RisError::invalid(format!(
                    "element {} is not in the array plane",
                    e.index
                )));
            }
        }
        for (i, a) in elements.iter().enumerate() {
            for b in &elements[i + 1..] {
                if a.position.distance(b.position) < spacing - 1e-9 {
                    return Err(RisError::invalid(format!(
                        "elements {} and {} closer than the spacing",
                        a.index, b.index
                    )));
                }
            }
        }
        Ok(RisArray {
            elements,
            spacing,
            carrier_frequency,
            element_gain,
            element_area,
            pattern_exponent,
        })
    }

    /// The 37-element, 0.75 λ array at 26 GHz.
    pub fn standard() -> Self {
        let spacing = DEFAULT_SPACING_WAVELENGTHS * SPEED_OF_LIGHT / DEFAULT_CARRIER_FREQUENCY;
        build_hex_array(
            DEFAULT_RINGS,
            spacing,
            DEFAULT_CARRIER_FREQUENCY,
            1.0,
            hex_cell_area(spacing),
            DEFAULT_PATTERN_EXPONENT,
        )
        .expect("defaults are valid")
    }

    /// Keeps only the first `k` elements.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() {
            return Err(RisError::invalid(format!(
                "cannot truncate {} elements to {k}",
                self.len()
            )));
        }
        let mut out = self.clone();
        out.elements.truncate(k);
        Ok(out)
    }

    pub fn with_pattern_exponent(mut self, q: f64) -> Result<Self> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(RisError::invalid("pattern exponent must be >= 0"));
        }
        self.pattern_exponent = q;
        Ok(self)
    }

    pub fn elements(&self) -> &[ElementGeometry] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn carrier_frequency(&self) -> f64 {
        self.carrier_frequency
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn element_gain(&self) -> f64 {
        self.element_gain
    }

    pub fn element_area(&self) -> f64 {
        self.element_area
    }

    pub fn pattern_exponent(&self) -> f64 {
        self.pattern_exponent
    }

    /// Largest distance of any element from the local origin.
    pub fn aperture_radius(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| e.position.norm())
            .fold(0.0, f64::max)
    }
}

/// Rigid placement of the RIS in the world frame: `world = R · local + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseDoc")]
pub struct Pose {
    /// Row-major rotation matrix.
    rotation: [[f64; 3]; 3],
    translation: Vec3,
}

#[derive(Deserialize)]
struct PoseDoc {
    rotation: [[f64; 3]; 3],
    translation: Vec3,
}

impl TryFrom<PoseDoc> for Pose {
    type Error = RisError;
    fn try_from(d: PoseDoc) -> Result<Self> {
        Pose::new(d.rotation, d.translation)
    }
}

const ORTHONORMAL_TOL: f64 = 1e-9;

impl Pose {
    pub fn new(rotation: [[f64; 3]; 3], translation: Vec3) -> Result<Self> {
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| rotation[k][i] * rotation[k][j]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if (dot - expected).abs() > ORTHONORMAL_TOL {
                    return Err(RisError::invalid("rotation is not orthonormal"));
                }
            }
        }
        let r = rotation;
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(RisError::invalid("rotation is improper (det != +1)"));
        }
        if ![translation.x, translation.y, translation.z]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(RisError::invalid("translation must be finite"));
        }
        Ok(Pose {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Pose {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: Vec3::ZERO,
        }
    }

    pub fn translation_only(t: Vec3) -> Self {
        Pose {
            translation: t,
            ..Pose::identity()
        }
    }

    /// Rotation by `angle` radians about `axis` (Rodrigues), then translation.
    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Result<Self> {
        let n = axis.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(RisError::invalid("rotation axis must be non-zero"));
        }
        let u = axis * (1.0 / n);
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        let rotation = [
            [c + u.x * u.x * t, u.x * u.y * t - u.z * s, u.x * u.z * t + u.y * s],
            [u.y * u.x * t + u.z * s, c + u.y * u.y * t, u.y * u.z * t - u.x * s],
            [u.z * u.x * t - u.y * s, u.z * u.y * t + u.x * s, c + u.z * u.z * t],
        ];
        Pose::new(rotation, translation)
    }

    pub fn rotation(&self) -> [[f64; 3]; 3] {
        self.rotation
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    fn rotate(&self, v: Vec3) -> Vec3 {
        let r = &self.rotation;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    fn rotate_inverse(&self, v: Vec3) -> Vec3 {
        let r = &self.rotation;
        Vec3::new(
            r[0][0] * v.x + r[1][0] * v.y + r[2][0] * v.z,
            r[0][1] * v.x + r[1][1] * v.y + r[2][1] * v.z,
            r[0][2] * v.x + r[1][2] * v.y + r[2][2] * v.z,
        )
    }

    pub fn local_to_world(&self, p: Vec3) -> Vec3 {
        self.rotate(p) + self.translation
    }

    pub fn world_to_local(&self, p: Vec3) -> Vec3 {
        self.rotate_inverse(p - self.translation)
    }

    /// Boresight (`+z` local) in world coordinates.
    pub fn boresight(&self) -> Vec3 {
        self.rotate(Vec3::new(0.0, 0.0, 1.0))
    }

    /// Returns `self ∘ inner`: applies `inner` first, then `self`.
    pub fn compose(&self, inner: &Pose) -> Pose {
        let mut rotation = [[0.0; 3]; 3];
        for (i, row) in rotation.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.rotation[i][k] * inner.rotation[k][j]).sum();
            }
        }
        Pose {
            rotation,
            translation: self.local_to_world(inner.translation),
        }
    }
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

/// TX/RX placement around a posed RIS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneDoc")]
pub struct Scene {
    ris_pose: Pose,
    tx_position: Vec3,
    rx_position: Vec3,
}

#[derive(Deserialize)]
struct SceneDoc {
    ris_pose: Pose,
    tx_position: Vec3,
    rx_position: Vec3,
}

impl TryFrom<SceneDoc> for Scene {
    type Error = RisError;
    fn try_from(d: SceneDoc) -> Result<Self> {
        Scene::new(d.ris_pose, d.tx_position, d.rx_position)
    }
}

impl Scene {
    /// Fails unless TX and RX lie strictly in front of the RIS plane.
    pub fn new(ris_pose: Pose, tx_position: Vec3, rx_position: Vec3) -> Result<Self> {
        for (name, p) in [("TX", tx_position), ("RX", rx_position)] {
            let local = ris_pose.world_to_local(p);
            if !(local.z > 0.0) {
                return Err(RisError::degenerate(format!(
                    "{name} at local z = {} is not in front of the RIS",
                    local.z
                )));
            }
        }
        Ok(Scene {
            ris_pose,
            tx_position,
            rx_position,
        })
    }

    /// Identity pose with TX and RX given by direction and range.
    pub fn from_directions(tx: Direction, tx_range: f64, rx: Direction, rx_range: f64) -> Result<Self> {
        Scene::new(
            Pose::identity(),
            direction_to_position(tx, tx_range)?,
            direction_to_position(rx, rx_range)?,
        )
    }

    pub fn ris_pose(&self) -> &Pose {
        &self.ris_pose
    }

    pub fn tx_position(&self) -> Vec3 {
        self.tx_position
    }

    pub fn rx_position(&self) -> Vec3 {
        self.rx_position
    }

    /// Same scene, RX moved to `range` meters along `d` in the RIS frame.
    pub fn with_rx_direction(&self, d: Direction, range: f64) -> Result<Self> {
        let local = direction_to_position(d, range)?;
        Scene::new(
            self.ris_pose,
            self.tx_position,
            self.ris_pose.local_to_world(local),
        )
    }

    pub fn with_rx_position(&self, rx: Vec3) -> Result<Self> {
        Scene::new(self.ris_pose, self.tx_position, rx)
    }

    pub fn swapped(&self) -> Self {
        Scene {
            ris_pose: self.ris_pose,
            tx_position: self.rx_position,
            rx_position: self.tx_position,
        }
    }

    /// Applies one rigid motion to the RIS, TX and RX together.
    pub fn transformed(&self, motion: &Pose) -> Self {
        Scene {
            ris_pose: motion.compose(&self.ris_pose),
            tx_position: motion.local_to_world(self.tx_position),
            rx_position: motion.local_to_world(self.rx_position),
        }
    }

    pub fn tx_local(&self) -> Vec3 {
        self.ris_pose.world_to_local(self.tx_position)
    }

    pub fn rx_local(&self) -> Vec3 {
        self.ris_pose.world_to_local(self.rx_position)
    }

    /// Direction of the TX as seen from the RIS origin.
    pub fn tx_direction(&self) -> Direction {
        position_to_direction(self.tx_local())
            .map(|(d, _)| d)
            .expect("TX is in front of the RIS")
    }

    pub fn rx_direction(&self) -> Direction {
        position_to_direction(self.rx_local())
            .map(|(d, _)| d)
            .expect("RX is in front of the RIS")
    }
}

/// Azimuth/elevation pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Direction {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        let d = Direction { azimuth, elevation };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.azimuth.abs() <= 90.0 && self.elevation.abs() <= 90.0) {
            return Err(RisError::invalid(format!(
                "direction ({}, {}) outside ±90°",
                self.azimuth, self.elevation
            )));
        }
        Ok(())
    }

    /// Unit vector in the RIS local frame.
    pub fn unit_vector(&self) -> Vec3 {
        let (sp, cp) = self.azimuth.to_radians().sin_cos();
        let (st, ct) = self.elevation.to_radians().sin_cos();
        Vec3::new(ct * sp, st, ct * cp)
    }

    /// Angle between two directions, degrees.
    pub fn separation(&self, other: &Direction) -> f64 {
        angle_between(self.unit_vector(), other.unit_vector()).to_degrees()
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(φ={}°, θ={}°)", self.azimuth, self.elevation)
    }
}

/// Angle between two vectors in radians, well conditioned near 0 and π.
pub fn angle_between(a: Vec3, b: Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

pub fn direction_to_position(d: Direction, range: f64) -> Result<Vec3> {
    if !(range > 0.0 && range.is_finite()) {
        return Err(RisError::invalid(format!("range must be > 0, got {range}")));
    }
    d.validate()?;
    Ok(d.unit_vector() * range)
}

/// Inverse of [`direction_to_position`]; returns the direction and range.
pub fn position_to_direction(p: Vec3) -> Result<(Direction, f64)> {
    let r = p.norm();
    if r == 0.0 {
        return Err(RisError::invalid("cannot take the direction of the origin"));
    }
    let elevation = (p.y / r).clamp(-1.0, 1.0).asin().to_degrees();
    let azimuth = p.x.atan2(p.z).to_degrees();
    Ok((Direction { azimuth, elevation }, r))
}

/// TX- and RX-side path length of one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLengths {
    pub tx: f64,
    pub rx: f64,
}

/// Distances from every element (in world coordinates) to TX and RX.
pub fn path_lengths(array: &RisArray, scene: &Scene) -> Result<Vec<PathLengths>> {
    array
        .elements()
        .iter()
        .map(|e| {
            let world = scene.ris_pose.local_to_world(e.position);
            let tx = world.distance(scene.tx_position);
            let rx = world.distance(scene.rx_position);
            if tx <= 0.0 || rx <= 0.0 {
                return Err(RisError::degenerate(format!(
                    "TX or RX coincides with element {}",
                    e.index
                )));
            }
            Ok(PathLengths { tx, rx })
        })
        .collect()
}

/// Off-boresight angles of TX and RX for one element, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidenceAngles {
    pub tx: f64,
    pub rx: f64,
}

/// Per-element angles between boresight and the element→TX / element→RX rays.
pub fn incidence_angles(array: &RisArray, scene: &Scene) -> Result<Vec<IncidenceAngles>> {
    let tx = scene.tx_local();
    let rx = scene.rx_local();
    let boresight = Vec3::new(0.0, 0.0, 1.0);
    array
        .elements()
        .iter()
        .map(|e| {
            let to_tx = tx - e.position;
            let to_rx = rx - e.position;
            if !(to_tx.z > 0.0 && to_rx.z > 0.0) {
                return Err(RisError::degenerate(format!(
                    "TX or RX is not in front of element {}",
                    e.index
                )));
            }
            Ok(IncidenceAngles {
                tx: angle_between(boresight, to_tx),
                rx: angle_between(boresight, to_rx),
            })
        })
        .collect()
}
