//! Rotation algebra: unit quaternions, the inner-product angular distance,
//! proper-Euler (Davenport) extrinsic chains, and subgoal planning.
//!
//! Conventions:
//! - Quaternions are Hamilton, stored as `(w, x, y, z)`.
//! - `a * b` means "apply `b`, then `a`", both about fixed world axes.
//! - An extrinsic chain `(a1, a2, a3)` with angles `(alpha, beta, gamma)`
//!   represents `R = R_a3(gamma) * R_a2(beta) * R_a1(alpha)`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::ops::Mul;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Success tolerance on the angular distance, in radians.
pub const DEFAULT_TOLERANCE: f64 = 0.1;

/// Middle angles within this of 0 or pi are treated as gimbal-degenerate.
pub const DEGENERATE_EPS: f64 = 1e-9;

const SIGN_EPS: f64 = 1e-12;

/// One of the fixed world-frame axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn unit(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.index()] = 1.0;
        v
    }

    pub fn letter(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// A unit quaternion in canonical sign (`w >= 0`, ties broken on the first
/// nonzero vector component).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes and canonicalizes arbitrary nonzero finite components.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let c = [w, x, y, z];
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite quaternion {c:?}")));
        }
        let n = norm4(c);
        if n < 1e-300 {
            return Err(Error::InvalidInput("zero quaternion".into()));
        }
        Ok(Self::from_raw(c))
    }

    /// Renormalizes and canonicalizes; caller guarantees a finite, nonzero input.
    /// Components already unit to rounding are kept bit-exact, so the
    /// operation is idempotent.
    fn from_raw(c: [f64; 4]) -> Self {
        let n = norm4(c);
        let c = if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            c
        } else {
            c.map(|v| v / n)
        };
        let [mut w, mut x, mut y, mut z] = c;
        let flip = if w.abs() > SIGN_EPS {
            w < 0.0
        } else {
            let first = [x, y, z].into_iter().find(|v| v.abs() > SIGN_EPS).unwrap_or(0.0);
            first < 0.0
        };
        if flip {
            w = -w;
            x = -x;
            y = -y;
            z = -z;
        }
        UnitQuaternion { w, x, y, z }
    }

    pub fn from_axis_angle(axis: Axis, angle: f64) -> Result<Self> {
        if !angle.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite angle {angle}")));
        }
        Ok(Self::axis_angle(axis, angle))
    }

    pub(crate) fn axis_angle(axis: Axis, angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        let mut v = [c, 0.0, 0.0, 0.0];
        v[1 + axis.index()] = s;
        Self::from_raw(v)
    }

    /// Rotation of `|v|` radians about `v / |v|`.
    pub fn from_rotation_vector(v: [f64; 3]) -> Self {
        let angle = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if angle < 1e-12 {
            return Self::from_raw([1.0, 0.5 * v[0], 0.5 * v[1], 0.5 * v[2]]);
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let k = s / angle;
        Self::from_raw([c, k * v[0], k * v[1], k * v[2]])
    }

    /// Shortest-path rotation vector (axis times angle, angle in `[0, pi]`).
    pub fn to_rotation_vector(&self) -> [f64; 3] {
        let vn = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        if vn < 1e-15 {
            return [2.0 * self.x, 2.0 * self.y, 2.0 * self.z];
        }
        // w >= 0 by canonicalization, so the angle is at most pi.
        let angle = 2.0 * vn.atan2(self.w);
        let k = angle / vn;
        [k * self.x, k * self.y, k * self.z]
    }

    /// Uniform sample over the rotation group.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random::<f64>() * TAU;
        let u3: f64 = rng.random::<f64>() * TAU;
        let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
        Self::from_raw([b * u3.cos(), a * u2.sin(), a * u2.cos(), b * u3.sin()])
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn inverse(&self) -> Self {
        Self::from_raw([self.w, -self.x, -self.y, -self.z])
    }

    pub fn dot(&self, other: &UnitQuaternion) -> f64 {
        dot4(self.to_array(), other.to_array())
    }

    pub fn norm(&self) -> f64 {
        norm4(self.to_array())
    }

    pub fn rotate_vector(&self, v: [f64; 3]) -> [f64; 3] {
        let m = self.to_matrix();
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// Row-major rotation matrix.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let UnitQuaternion { w, x, y, z } = *self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }
}

impl TryFrom<[f64; 4]> for UnitQuaternion {
    type Error = Error;

    fn try_from(c: [f64; 4]) -> Result<Self> {
        UnitQuaternion::new(c[0], c[1], c[2], c[3])
    }
}

impl From<UnitQuaternion> for [f64; 4] {
    fn from(q: UnitQuaternion) -> Self {
        q.to_array()
    }
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    fn mul(self, rhs: UnitQuaternion) -> UnitQuaternion {
        quat_mul(&self, &rhs)
    }
}

impl fmt::Display for UnitQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.w, self.x, self.y, self.z)
    }
}

fn dot4(a: [f64; 4], b: [f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

fn norm4(c: [f64; 4]) -> f64 {
    dot4(c, c).sqrt()
}

fn hamilton(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    let [aw, ax, ay, az] = a;
    let [bw, bx, by, bz] = b;
    [
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ]
}

/// Hamilton product: `b` applied first, then `a`.
pub fn quat_mul(a: &UnitQuaternion, b: &UnitQuaternion) -> UnitQuaternion {
    UnitQuaternion::from_raw(hamilton(a.to_array(), b.to_array()))
}

/// Angular distance `acos(2<q1,q2>^2 - 1)` on raw components. The argument is
/// clamped to `[-1, 1]`, so the result lies in `[0, pi]`.
pub fn inner_product_distance(q1: [f64; 4], q2: [f64; 4]) -> f64 {
    let d = dot4(q1, q2);
    (2.0 * d * d - 1.0).clamp(-1.0, 1.0).acos()
}

pub fn quat_distance(q1: &UnitQuaternion, q2: &UnitQuaternion) -> f64 {
    inner_product_distance(q1.to_array(), q2.to_array())
}

/// Same angle as [`quat_distance`], computed as `2 atan2(|v|, |w|)` of the
/// relative rotation. The arccos form cannot resolve angles below about
/// 2e-8; this one stays accurate down to rounding.
pub fn geodesic_distance(q1: &UnitQuaternion, q2: &UnitQuaternion) -> f64 {
    let r = hamilton(q2.to_array(), [q1.w, -q1.x, -q1.y, -q1.z]);
    let vn = (r[1] * r[1] + r[2] * r[2] + r[3] * r[3]).sqrt();
    2.0 * vn.atan2(r[0].abs())
}

/// Strict threshold test on an already computed distance.
pub fn within_tolerance(distance: f64, tol: f64) -> bool {
    distance < tol
}

pub fn is_success(achieved: &UnitQuaternion, desired: &UnitQuaternion, tol: f64) -> bool {
    within_tolerance(quat_distance(achieved, desired), tol)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// A proper-Euler chain of fixed axes: the outer axes coincide and the middle
/// one is orthogonal to them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Chain([Axis; 3]);

impl Chain {
    pub const ZXZ: Chain = Chain([Axis::Z, Axis::X, Axis::Z]);
    pub const XYX: Chain = Chain([Axis::X, Axis::Y, Axis::X]);
    pub const YZY: Chain = Chain([Axis::Y, Axis::Z, Axis::Y]);
    pub const ZYZ: Chain = Chain([Axis::Z, Axis::Y, Axis::Z]);
    pub const XZX: Chain = Chain([Axis::X, Axis::Z, Axis::X]);
    pub const YXY: Chain = Chain([Axis::Y, Axis::X, Axis::Y]);

    pub const ALL: [Chain; 6] = [Chain::ZXZ, Chain::XYX, Chain::YZY, Chain::ZYZ, Chain::XZX, Chain::YXY];

    /// The two chains used for evaluation (two z turns around one x or y turn).
    pub const EVALUATED: [Chain; 2] = [Chain::ZXZ, Chain::ZYZ];

    pub fn new(first: Axis, middle: Axis, last: Axis) -> Result<Self> {
        if first != last || middle == first {
            return Err(Error::InvalidInput(format!(
                "{first}-{middle}-{last} is not a proper-Euler chain"
            )));
        }
        Ok(Chain([first, middle, last]))
    }

    pub fn axes(&self) -> [Axis; 3] {
        self.0
    }

    pub fn outer(&self) -> Axis {
        self.0[0]
    }

    pub fn middle(&self) -> Axis {
        self.0[1]
    }
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.0;
        write!(f, "{a}-{b}-{c}")
    }
}

impl std::str::FromStr for Chain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters: Vec<char> = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .map(|c| c.to_ascii_lowercase())
            .collect();
        let axis = |c: char| match c {
            'x' => Ok(Axis::X),
            'y' => Ok(Axis::Y),
            'z' => Ok(Axis::Z),
            other => Err(Error::InvalidInput(format!("unknown axis '{other}'"))),
        };
        match letters.as_slice() {
            &[a, b, c] => Chain::new(axis(a)?, axis(b)?, axis(c)?),
            _ => Err(Error::InvalidInput(format!("bad chain '{s}'"))),
        }
    }
}

impl TryFrom<String> for Chain {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Chain> for String {
    fn from(c: Chain) -> Self {
        c.to_string()
    }
}

/// Angles of one extrinsic chain. `alpha` is applied first about the first axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DavenportTriple {
    pub chain: Chain,
    pub angles: [f64; 3],
}

impl DavenportTriple {
    pub fn alpha(&self) -> f64 {
        self.angles[0]
    }
    pub fn beta(&self) -> f64 {
        self.angles[1]
    }
    pub fn gamma(&self) -> f64 {
        self.angles[2]
    }

    /// Number of angles whose magnitude reaches `tol`.
    pub fn count_significant(&self, tol: f64) -> usize {
        self.angles.iter().filter(|a| a.abs() >= tol).count()
    }
}

impl fmt::Display for DavenportTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, g] = self.angles;
        write!(f, "({}, {}, {})", fmt_angle(a), fmt_angle(b), fmt_angle(g))
    }
}

/// Prints an angle rounded to 1e-9 rad, so that exact zeros read as `0`.
fn fmt_angle(a: f64) -> String {
    let r = (a * 1e9).round() / 1e9;
    if r == 0.0 {
        "0".to_string()
    } else {
        format!("{r}")
    }
}

/// Splits a rotation into angles about the chain's axes.
///
/// The quaternion is expressed in a frame where the outer axis is z and the
/// middle axis is x, where `Rz(g) Rx(b) Rz(a)` has components
/// `(cb cos((a+g)/2), sb cos((a-g)/2), sb sin((g-a)/2), cb sin((a+g)/2))`.
/// Of the two solutions `(a, b, g)` and `(a+pi, -b, g+pi)` the one with the
/// smaller outer angles wins; gimbal-degenerate rotations fold into `alpha`.
pub fn decompose(relative: &UnitQuaternion, chain: Chain) -> DavenportTriple {
    let outer = chain.outer();
    let middle = chain.middle();
    let e_outer = outer.unit();
    let e_middle = middle.unit();
    let e_third = cross(e_outer, e_middle);
    let v = [relative.x, relative.y, relative.z];
    let w = relative.w;
    let x = dot3(v, e_middle);
    let y = dot3(v, e_third);
    let z = dot3(v, e_outer);

    let beta = 2.0 * (x * x + y * y).sqrt().atan2((w * w + z * z).sqrt());
    let half_sum = z.atan2(w);
    let half_diff = y.atan2(x);

    let angles = if beta < DEGENERATE_EPS {
        [wrap_angle(2.0 * half_sum), beta, 0.0]
    } else if (PI - beta) < DEGENERATE_EPS {
        [wrap_angle(-2.0 * half_diff), beta, 0.0]
    } else {
        let a = wrap_angle(half_sum - half_diff);
        let g = wrap_angle(half_sum + half_diff);
        let a2 = wrap_angle(a + PI);
        let g2 = wrap_angle(g + PI);
        if a2.abs() + g2.abs() < a.abs() + g.abs() {
            [a2, -beta, g2]
        } else {
            [a, beta, g]
        }
    };
    DavenportTriple { chain, angles }
}

/// `R_a3(gamma) * R_a2(beta) * R_a1(alpha)`.
pub fn compose(triple: &DavenportTriple) -> UnitQuaternion {
    let [a1, a2, a3] = triple.chain.axes();
    let [alpha, beta, gamma] = triple.angles;
    UnitQuaternion::axis_angle(a3, gamma) * UnitQuaternion::axis_angle(a2, beta) * UnitQuaternion::axis_angle(a1, alpha)
}

/// Splits an angle larger than a quarter turn into a quarter turn plus the rest.
pub fn split_large(angle: f64) -> Result<Vec<f64>> {
    if !angle.is_finite() || angle.abs() > PI {
        return Err(Error::InvalidInput(format!(
            "split_large expects |angle| <= pi, got {angle}"
        )));
    }
    if angle.abs() <= FRAC_PI_2 {
        Ok(vec![angle])
    } else {
        let first = FRAC_PI_2.copysign(angle);
        Ok(vec![first, angle - first])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub axis: Axis,
    pub angle: f64,
    /// Target orientation after this step.
    pub subgoal: UnitQuaternion,
    /// Index of the chain angle (0..3) this step belongs to.
    pub parent: usize,
}

/// Ordered single-axis subgoals taking `initial` to the goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DavenportPlan {
    pub chain: Chain,
    pub initial: UnitQuaternion,
    pub triple: DavenportTriple,
    pub steps: Vec<PlanStep>,
}

impl DavenportPlan {
    pub fn final_subgoal(&self) -> UnitQuaternion {
        self.steps.last().map_or(self.initial, |s| s.subgoal)
    }

    /// Steps whose rotation is at least `tol` in magnitude.
    pub fn significant_steps(&self, tol: f64) -> impl Iterator<Item = &PlanStep> {
        self.steps.iter().filter(move |s| s.angle.abs() >= tol)
    }

    /// Number of parts each chain angle was split into.
    pub fn parts_per_parent(&self) -> [usize; 3] {
        let mut n = [0; 3];
        for s in &self.steps {
            n[s.parent] += 1;
        }
        n
    }
}

/// World-frame rotation taking `initial` to `goal`.
pub fn relative_rotation(initial: &UnitQuaternion, goal: &UnitQuaternion) -> UnitQuaternion {
    *goal * initial.inverse()
}

pub fn plan(initial: &UnitQuaternion, goal: &UnitQuaternion, chain: Chain, split: bool) -> DavenportPlan {
    let triple = decompose(&relative_rotation(initial, goal), chain);
    let mut steps = Vec::with_capacity(6);
    let mut current = *initial;
    for (parent, (&axis, &angle)) in chain.axes().iter().zip(&triple.angles).enumerate() {
        let angle = wrap_angle(angle);
        let parts = if split {
            split_large(angle).expect("wrapped angle lies in (-pi, pi]")
        } else {
            vec![angle]
        };
        for part in parts {
            current = UnitQuaternion::axis_angle(axis, part) * current;
            steps.push(PlanStep {
                axis,
                angle: part,
                subgoal: current,
                parent,
            });
        }
    }
    DavenportPlan {
        chain,
        initial: *initial,
        triple,
        steps,
    }
}

/// Fewest chain angles of magnitude `>= tol` over the evaluated chains.
pub fn count_required_rotations(initial: &UnitQuaternion, goal: &UnitQuaternion, tol: f64) -> usize {
    let r = relative_rotation(initial, goal);
    Chain::EVALUATED
        .iter()
        .map(|&c| decompose(&r, c).count_significant(tol))
        .min()
        .expect("two evaluated chains")
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rz(a: f64) -> UnitQuaternion {
        UnitQuaternion::axis_angle(Axis::Z, a)
    }
    fn rx(a: f64) -> UnitQuaternion {
        UnitQuaternion::axis_angle(Axis::X, a)
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    fn mat_mul(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        m
    }

    /// Textbook elementary rotation matrices, independent of the quaternion path.
    fn elementary(axis: Axis, t: f64) -> [[f64; 3]; 3] {
        let (s, c) = t.sin_cos();
        match axis {
            Axis::X => [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
            Axis::Y => [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
            Axis::Z => [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// Intrinsic a-b'-a'' composition: rotate about the body axes in turn.
    /// Matrix form is the product in application order.
    fn intrinsic_matrix(chain: Chain, first: f64, second: f64, third: f64) -> [[f64; 3]; 3] {
        let [a1, a2, a3] = chain.axes();
        mat_mul(
            mat_mul(elementary(a1, first), elementary(a2, second)),
            elementary(a3, third),
        )
    }

    #[test]
    fn mul_identity_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = UnitQuaternion::random(&mut rng);
        assert_eq!(UnitQuaternion::IDENTITY * q, q);
        let e = q * q.inverse();
        assert!(geodesic_distance(&e, &UnitQuaternion::IDENTITY) < 1e-15);
        assert_close(e.w(), 1.0, 1e-15);
    }

    #[test]
    fn coaxial_angles_add() {
        let q = rz(0.3) * rz(0.4);
        let expected = [(0.35f64).cos(), 0.0, 0.0, (0.35f64).sin()];
        for (a, b) in q.to_array().iter().zip(expected) {
            assert_close(*a, b, 1e-15);
        }
    }

    #[test]
    fn axis_angle_examples() {
        assert_eq!(
            UnitQuaternion::from_axis_angle(Axis::Z, 0.0).unwrap(),
            UnitQuaternion::IDENTITY
        );
        let half = UnitQuaternion::from_axis_angle(Axis::X, PI).unwrap();
        assert!(half.w().abs() < 1e-15);
        assert_close(half.x(), 1.0, 1e-15);
        let neg = UnitQuaternion::from_axis_angle(Axis::X, -PI).unwrap();
        assert!(neg.x() > 0.0, "canonical half-turn has x >= 0");
        let q = UnitQuaternion::from_axis_angle(Axis::Z, FRAC_PI_2).unwrap();
        let c = (PI / 4.0).cos();
        assert_close(q.w(), c, 1e-15);
        assert_close(q.z(), (PI / 4.0).sin(), 1e-15);
        assert!(UnitQuaternion::from_axis_angle(Axis::Y, f64::NAN).is_err());
        assert!(UnitQuaternion::from_axis_angle(Axis::Y, f64::INFINITY).is_err());
    }

    #[test]
    fn new_rejects_zero_and_nan() {
        assert!(UnitQuaternion::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(UnitQuaternion::new(f64::NAN, 0.0, 0.0, 1.0).is_err());
        let q = UnitQuaternion::new(-2.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(q, UnitQuaternion::IDENTITY);
    }

    #[test]
    fn distance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = UnitQuaternion::random(&mut rng);
        assert_eq!(quat_distance(&q, &q), 0.0);
        let neg = q.to_array().map(|c| -c);
        assert_eq!(inner_product_distance(q.to_array(), neg), 0.0);
        assert_close(quat_distance(&UnitQuaternion::IDENTITY, &rx(PI)), PI, 1e-12);
        assert_close(quat_distance(&UnitQuaternion::IDENTITY, &rz(0.2)), 0.2, 1e-12);
    }

    #[test]
    fn success_threshold_is_strict() {
        assert!(within_tolerance(0.05, 0.1));
        assert!(!within_tolerance(0.1, 0.1));
        assert!(!within_tolerance(0.5, 0.1));
        assert!(is_success(&rz(0.05), &UnitQuaternion::IDENTITY, 0.1));
        assert!(!is_success(&rz(0.5), &UnitQuaternion::IDENTITY, 0.1));
    }

    #[test]
    fn decompose_examples() {
        let d = decompose(&UnitQuaternion::IDENTITY, Chain::ZXZ);
        assert_eq!(d.angles, [0.0, 0.0, 0.0]);
        let d = decompose(&rz(0.7), Chain::ZXZ);
        assert_close(d.alpha(), 0.7, 1e-15);
        assert_eq!(d.gamma(), 0.0);
        assert!(d.beta().abs() < 1e-15);
        let d = decompose(&rx(1.1), Chain::ZXZ);
        assert_close(d.beta(), 1.1, 1e-15);
        assert_eq!([d.alpha(), d.gamma()], [0.0, 0.0]);
        let d = decompose(&rx(-1.1), Chain::ZXZ);
        assert_close(d.beta(), -1.1, 1e-15);
        assert!(d.alpha().abs() < 1e-15 && d.gamma().abs() < 1e-15);
    }

    #[test]
    fn decompose_degenerate_half_turn_middle() {
        // Rz(0.4) Rx(pi) Rz(0.3) == Rx(pi) Rz(0.3 - 0.4)
        let q = rz(0.4) * rx(PI) * rz(0.3);
        let d = decompose(&q, Chain::ZXZ);
        assert_close(d.beta(), PI, 1e-9);
        assert_eq!(d.gamma(), 0.0);
        assert_close(d.alpha(), -0.1, 1e-9);
        assert!(geodesic_distance(&compose(&d), &q) < 1e-9);
    }

    #[test]
    fn compose_examples() {
        let t = DavenportTriple {
            chain: Chain::ZXZ,
            angles: [0.0; 3],
        };
        assert_eq!(compose(&t), UnitQuaternion::IDENTITY);
        let t = DavenportTriple {
            chain: Chain::ZXZ,
            angles: [0.4, 0.0, 0.9],
        };
        assert!(quat_distance(&compose(&t), &rz(1.3)) < 1e-12);
    }

    #[test]
    fn round_trip_all_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let q = UnitQuaternion::random(&mut rng);
            for chain in Chain::ALL {
                let t = decompose(&q, chain);
                assert!(t.angles.iter().all(|a| a.abs() <= PI));
                assert!(geodesic_distance(&compose(&t), &q) < 1e-9, "{chain} {q}");
            }
        }
    }

    #[test]
    fn extrinsic_equals_reversed_intrinsic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let angles: [f64; 3] = std::array::from_fn(|_| rng.random_range(-PI..PI));
            for chain in Chain::ALL {
                let m = compose(&DavenportTriple { chain, angles }).to_matrix();
                let expected = intrinsic_matrix(chain, angles[2], angles[1], angles[0]);
                for i in 0..3 {
                    for j in 0..3 {
                        assert_close(m[i][j], expected[i][j], 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn chain_validation() {
        assert!(Chain::new(Axis::Z, Axis::Z, Axis::Z).is_err());
        assert!(Chain::new(Axis::X, Axis::Y, Axis::Z).is_err());
        for c in Chain::ALL {
            assert_eq!(c.to_string().parse::<Chain>().unwrap(), c);
        }
        assert_eq!("zyz".parse::<Chain>().unwrap(), Chain::ZYZ);
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_large(0.3).unwrap(), vec![0.3]);
        assert_eq!(split_large(FRAC_PI_2).unwrap(), vec![FRAC_PI_2]);
        assert_eq!(split_large(2.0).unwrap(), vec![FRAC_PI_2, 2.0 - FRAC_PI_2]);
        assert_eq!(split_large(-3.0).unwrap(), vec![-FRAC_PI_2, -3.0 + FRAC_PI_2]);
        assert!(split_large(3.2).is_err());
        assert!(split_large(f64::NAN).is_err());
    }

    #[test]
    fn plan_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let init = UnitQuaternion::random(&mut rng);
        let p = plan(&init, &init, Chain::ZXZ, false);
        assert_eq!(p.steps.len(), 3);
        assert!(p.steps.iter().all(|s| s.angle == 0.0));
        assert!(quat_distance(&p.final_subgoal(), &init) < 1e-12);

        let goal = rz(0.5) * init;
        let p = plan(&init, &goal, Chain::ZXZ, false);
        let axes: Vec<Axis> = p.steps.iter().map(|s| s.axis).collect();
        assert_eq!(axes, vec![Axis::Z, Axis::X, Axis::Z]);
        assert_close(p.steps[0].angle, 0.5, 1e-12);
        assert!(p.steps[1].angle.abs() < 1e-12 && p.steps[2].angle.abs() < 1e-12);
        for s in &p.steps {
            assert!(geodesic_distance(&s.subgoal, &goal) < 1e-9);
        }
        assert_eq!(p.significant_steps(0.1).count(), 1);
    }

    #[test]
    fn count_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let init = UnitQuaternion::random(&mut rng);
        assert_eq!(count_required_rotations(&init, &init, 0.1), 0);
        assert_eq!(count_required_rotations(&init, &(rz(1.0) * init), 0.1), 1);
        assert_eq!(count_required_rotations(&init, &(rx(1.0) * rz(1.0) * init), 0.1), 2);
        let t = decompose(&(rx(1.0) * rz(1.0)), Chain::ZXZ);
        assert_close(t.alpha(), 1.0, 1e-12);
        assert_close(t.beta(), 1.0, 1e-12);
        assert!(t.gamma().abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert_close(wrap_angle(3.0 * PI / 2.0), -FRAC_PI_2, 1e-15);
        assert_close(wrap_angle(-7.0), -7.0 + TAU, 1e-15);
    }

    #[test]
    fn triple_display_rounds_zero() {
        let d = decompose(&UnitQuaternion::IDENTITY, Chain::ZYZ);
        assert_eq!(d.to_string(), "(0, 0, 0)");
    }

    fn arb_quat() -> impl Strategy<Value = UnitQuaternion> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("nonzero", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-6)
            .prop_map(|(w, x, y, z)| UnitQuaternion::new(w, x, y, z).unwrap())
    }

    proptest! {
        #[test]
        fn products_stay_unit_and_canonical(a in arb_quat(), b in arb_quat()) {
            let q = a * b;
            prop_assert!((q.norm() - 1.0).abs() < 1e-9);
            prop_assert!(q.w() >= 0.0);
        }

        #[test]
        fn distance_is_a_metric_on_rotations(a in arb_quat(), b in arb_quat(), c in arb_quat()) {
            let d = quat_distance(&a, &b);
            prop_assert!((0.0..=PI).contains(&d));
            prop_assert!((d - quat_distance(&b, &a)).abs() < 1e-12);
            let left = quat_distance(&(c * a), &(c * b));
            prop_assert!((left - d).abs() < 1e-6);
            let neg = a.to_array().map(|v| -v);
            prop_assert_eq!(inner_product_distance(neg, b.to_array()), d);
            prop_assert!((geodesic_distance(&a, &b) - d).abs() < 1e-6);
        }

        #[test]
        fn split_parts_sum_and_bound(angle in -PI..=PI) {
            let parts = split_large(angle).unwrap();
            prop_assert!((parts.iter().sum::<f64>() - angle).abs() <= 1e-15);
            prop_assert!(parts.iter().all(|p| p.abs() <= FRAC_PI_2));
        }

        #[test]
        fn plans_chain_subgoals(init in arb_quat(), goal in arb_quat(), split in any::<bool>(), which in 0usize..6) {
            let p = plan(&init, &goal, Chain::ALL[which], split);
            let mut prev = init;
            for s in &p.steps {
                let expected = UnitQuaternion::axis_angle(s.axis, s.angle) * prev;
                prop_assert!(expected.to_array().iter().zip(s.subgoal.to_array()).all(|(a, b)| (a - b).abs() < 1e-12));
                if split {
                    prop_assert!(s.angle.abs() <= FRAC_PI_2 + 1e-9);
                }
                prev = s.subgoal;
            }
            prop_assert!(geodesic_distance(&p.final_subgoal(), &goal) < 1e-9);
        }

        #[test]
        fn compose_then_decompose_recomposes(a in -PI..PI, b in -PI..PI, g in -PI..PI, which in 0usize..6) {
            let t = DavenportTriple { chain: Chain::ALL[which], angles: [a, b, g] };
            let q = compose(&t);
            let back = decompose(&q, t.chain);
            prop_assert!(geodesic_distance(&compose(&back), &q) < 1e-9);
            if back.beta().abs() < DEGENERATE_EPS || (PI - back.beta().abs()) < DEGENERATE_EPS {
                prop_assert_eq!(back.gamma(), 0.0);
            }
        }
    }
}
