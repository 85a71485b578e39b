//! Stratified start/goal test set.
//!
//! Cases are built from Davenport triples with exactly the required number
//! of significant angles, so each bucket is filled exactly instead of by
//! rejection from uniform rotations. A case is parallel-comparable when its
//! middle (x or y) angle is a multiple of a quarter turn, which is the goal
//! family of the parallel-rotation task.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rotation::{
    compose, count_required_rotations, decompose, relative_rotation, Chain, DavenportTriple, UnitQuaternion,
    DEFAULT_TOLERANCE,
};

pub const FORMAT_HEADER: &str = "# chainrot-testset v1";
/// Parallel-comparable cases per required-rotation count (1, 2, 3).
pub const PARALLEL_COUNTS: [usize; 3] = [200, 1000, 2000];
/// All cases per required-rotation count (1, 2, 3).
pub const TOTAL_COUNTS: [usize; 3] = [600, 2000, 4000];
/// Quarter-turn set for the middle angle of parallel-comparable goals.
pub const QUANTIZED_ANGLES: [f64; 5] = [-PI, -FRAC_PI_2, 0.0, FRAC_PI_2, PI];
const QUANTIZED_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestCase {
    pub id: usize,
    pub initial: UnitQuaternion,
    pub goal: UnitQuaternion,
    pub required_rotations: usize,
    pub parallel_comparable: bool,
}

impl TestCase {
    /// Recomputes both labels from the poses.
    pub fn check(&self) -> Result<()> {
        let n = count_required_rotations(&self.initial, &self.goal, DEFAULT_TOLERANCE);
        let p = is_parallel_comparable(&self.initial, &self.goal);
        if n != self.required_rotations || p != self.parallel_comparable {
            return Err(Error::Load(format!(
                "case {}: labels ({}, {}) but poses give ({n}, {p})",
                self.id, self.required_rotations, self.parallel_comparable
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestSet {
    pub seed: u64,
    pub cases: Vec<TestCase>,
}

fn is_quantized(angle: f64) -> bool {
    QUANTIZED_ANGLES.iter().any(|q| (angle - q).abs() < QUANTIZED_EPS)
}

/// Whether the middle angle of the z-x-z decomposition (equal in magnitude
/// to the z-y-z one) lies in the quarter-turn set.
pub fn is_parallel_comparable(initial: &UnitQuaternion, goal: &UnitQuaternion) -> bool {
    let r = relative_rotation(initial, goal);
    is_quantized(decompose(&r, Chain::ZXZ).beta())
}

fn signed_magnitude<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let m = rng.random_range(lo..=hi);
    if rng.random::<bool>() {
        m
    } else {
        -m
    }
}

/// Relative rotation with `n` significant angles drawn on a random evaluated chain.
///
/// Two outer angles alone would merge into one z turn, and a lone z turn is
/// always parallel-comparable, so the middle angle is active whenever that
/// would otherwise happen. A half turn in the middle folds the outer angles
/// together, so three-rotation parallel cases use quarter turns only.
fn sample_relative<R: Rng + ?Sized>(rng: &mut R, n: usize, parallel: bool) -> UnitQuaternion {
    let chain = Chain::EVALUATED[rng.random_range(0..Chain::EVALUATED.len())];
    let active = match n {
        1 if parallel && rng.random::<bool>() => [true, false, false],
        1 => [false, true, false],
        2 if rng.random::<bool>() => [true, true, false],
        2 => [false, true, true],
        _ => [true, true, true],
    };
    let quarter = [-FRAC_PI_2, FRAC_PI_2];
    let mut angles = [0.0; 3];
    for (i, angle) in angles.iter_mut().enumerate() {
        if !active[i] {
            continue;
        }
        *angle = match (i, parallel) {
            (1, true) if n == 3 => quarter[rng.random_range(0..2)],
            (1, true) => [-FRAC_PI_2, FRAC_PI_2, PI][rng.random_range(0..3)],
            _ => signed_magnitude(rng, DEFAULT_TOLERANCE, PI),
        };
    }
    compose(&DavenportTriple { chain, angles })
}

fn bucket_plan() -> Vec<(usize, bool, usize)> {
    let mut plan = Vec::new();
    for n in 1..=3 {
        plan.push((n, true, PARALLEL_COUNTS[n - 1]));
        plan.push((n, false, TOTAL_COUNTS[n - 1] - PARALLEL_COUNTS[n - 1]));
    }
    plan
}

/// Deterministic stratified test set; every case is verified before inclusion.
pub fn gen_testset(seed: u64) -> TestSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(TOTAL_COUNTS.iter().sum());
    for (n, parallel, count) in bucket_plan() {
        let mut made = 0;
        while made < count {
            let initial = UnitQuaternion::random(&mut rng);
            let relative = sample_relative(&mut rng, n, parallel);
            let goal = relative * initial;
            let case = TestCase {
                id: cases.len(),
                initial,
                goal,
                required_rotations: n,
                parallel_comparable: parallel,
            };
            if case.check().is_ok() {
                cases.push(case);
                made += 1;
            }
        }
    }
    TestSet { seed, cases }
}

impl TestSet {
    /// (parallel-comparable, total) counts per required-rotation count.
    pub fn bucket_counts(&self) -> ([usize; 3], [usize; 3]) {
        let mut parallel = [0; 3];
        let mut total = [0; 3];
        for c in &self.cases {
            if (1..=3).contains(&c.required_rotations) {
                total[c.required_rotations - 1] += 1;
                if c.parallel_comparable {
                    parallel[c.required_rotations - 1] += 1;
                }
            }
        }
        (parallel, total)
    }

    /// Checks the stratification counts and every case's labels.
    pub fn validate(&self) -> Result<()> {
        let (parallel, total) = self.bucket_counts();
        if parallel != PARALLEL_COUNTS || total != TOTAL_COUNTS {
            return Err(Error::Load(format!(
                "bucket counts {parallel:?}/{total:?} differ from {PARALLEL_COUNTS:?}/{TOTAL_COUNTS:?}"
            )));
        }
        for (i, c) in self.cases.iter().enumerate() {
            if c.id != i {
                return Err(Error::Load(format!("case {i} has id {}", c.id)));
            }
            c.check()?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{FORMAT_HEADER}").unwrap();
        writeln!(s, "# seed = {}", self.seed).unwrap();
        writeln!(s, "id,iw,ix,iy,iz,gw,gx,gy,gz,rotations,parallel").unwrap();
        for c in &self.cases {
            let [a, b, cc, d] = c.initial.to_array();
            let [e, f, g, h] = c.goal.to_array();
            writeln!(
                s,
                "{},{a},{b},{cc},{d},{e},{f},{g},{h},{},{}",
                c.id,
                c.required_rotations,
                u8::from(c.parallel_comparable)
            )
            .unwrap();
        }
        s
    }

    /// Parses and validates a test set file's contents.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(FORMAT_HEADER) {
            return Err(Error::Load("missing or unsupported test set header".into()));
        }
        let seed = lines
            .next()
            .and_then(|l| l.strip_prefix("# seed = "))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Load("missing seed line".into()))?;
        if lines.next() != Some("id,iw,ix,iy,iz,gw,gx,gy,gz,rotations,parallel") {
            return Err(Error::Load("missing column header".into()));
        }
        let mut cases = Vec::new();
        for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::Load(format!("malformed case record {k}"));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 11 {
                return Err(bad());
            }
            let num = |i: usize| fields[i].parse::<f64>().map_err(|_| bad());
            let quat = |o: usize| -> Result<UnitQuaternion> {
                UnitQuaternion::new(num(o)?, num(o + 1)?, num(o + 2)?, num(o + 3)?).map_err(|_| bad())
            };
            cases.push(TestCase {
                id: fields[0].parse().map_err(|_| bad())?,
                initial: quat(1)?,
                goal: quat(5)?,
                required_rotations: fields[9].parse().map_err(|_| bad())?,
                parallel_comparable: match fields[10] {
                    "1" => true,
                    "0" => false,
                    _ => return Err(bad()),
                },
            });
        }
        let set = TestSet { seed, cases };
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Load(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }
}
