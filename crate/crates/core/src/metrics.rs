//! Facial landmarks, caliper-style constraints and eye-socket depth
//! measures.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::Mesh;

/// Landmark names understood by the measures and constraint builder.
pub const LANDMARK_NAMES: [&str; 18] = [
    "inner_eye_L",
    "inner_eye_R",
    "outer_eye_L",
    "outer_eye_R",
    "brow_mid_L",
    "brow_mid_R",
    "mouth_corner_L",
    "mouth_corner_R",
    "nose_tip",
    "nose_bridge",
    "chin_tip",
    "ear_base_L",
    "ear_base_R",
    "ear_notch_L",
    "ear_notch_R",
    "nostril_L",
    "nostril_R",
    "sternum_notch",
];

/// Named fiducials mapped to mesh vertex indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub landmarks: BTreeMap<String, usize>,
}

impl LandmarkSet {
    pub fn insert(&mut self, name: impl Into<String>, vertex: usize) {
        self.landmarks.insert(name.into(), vertex);
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.landmarks.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.landmarks.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &usize)> {
        self.landmarks.iter()
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn vertex(&self, name: &str) -> Result<usize> {
        self.get(name)
            .ok_or_else(|| Error::MissingLandmark(name.to_string()))
    }

    pub fn position(&self, m: &Mesh, name: &str) -> Result<Vec3> {
        Ok(m.vertices()[self.vertex(name)?])
    }

    /// Checks indices against the mesh and that left/right pairs differ.
    pub fn validate(&self, m: &Mesh) -> Result<()> {
        for (name, &v) in &self.landmarks {
            if v >= m.vertex_count() {
                return Err(Error::InvalidArgument(format!(
                    "landmark {name} refers to vertex {v} of {}",
                    m.vertex_count()
                )));
            }
            if let Some(base) = name.strip_suffix("_L") {
                if self.get(&format!("{base}_R")) == Some(v) {
                    return Err(Error::DegenerateLandmarks(format!(
                        "{base}_L and {base}_R share vertex {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanteriKind {
    AbsolutePosition,
    RelativePosition,
    RelativeDistance,
}

/// A soft constraint on one landmark (absolute) or a landmark pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanteriConstraint {
    pub kind: LanteriKind,
    pub landmarks: Vec<String>,
}

impl LanteriConstraint {
    pub fn absolute(a: &str) -> Self {
        LanteriConstraint {
            kind: LanteriKind::AbsolutePosition,
            landmarks: vec![a.to_string()],
        }
    }

    pub fn relative_distance(a: &str, b: &str) -> Self {
        LanteriConstraint {
            kind: LanteriKind::RelativeDistance,
            landmarks: vec![a.to_string(), b.to_string()],
        }
    }

    pub fn relative_position(a: &str, b: &str) -> Self {
        LanteriConstraint {
            kind: LanteriKind::RelativePosition,
            landmarks: vec![a.to_string(), b.to_string()],
        }
    }

    pub fn check(&self) -> Result<()> {
        let expected = match self.kind {
            LanteriKind::AbsolutePosition => 1,
            _ => 2,
        };
        if self.landmarks.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "{:?} constraint needs {expected} landmark(s), got {}",
                self.kind,
                self.landmarks.len()
            )));
        }
        if expected == 2 && self.landmarks[0] == self.landmarks[1] {
            return Err(Error::InvalidArgument(format!(
                "constraint relates {} to itself",
                self.landmarks[0]
            )));
        }
        Ok(())
    }
}

/// The seven caliper distances, then the two points pinned in place
/// because their partners (ears, sternum) lie outside the deformed area.
pub fn lanteri_table() -> Vec<LanteriConstraint> {
    vec![
        LanteriConstraint::relative_distance("mouth_corner_L", "mouth_corner_R"),
        LanteriConstraint::relative_distance("nose_bridge", "nose_tip"),
        LanteriConstraint::relative_distance("chin_tip", "brow_mid_L"),
        LanteriConstraint::relative_distance("chin_tip", "brow_mid_R"),
        LanteriConstraint::relative_distance("mouth_corner_L", "nostril_L"),
        LanteriConstraint::relative_distance("mouth_corner_R", "nostril_R"),
        LanteriConstraint::relative_distance("inner_eye_L", "inner_eye_R"),
        LanteriConstraint::absolute("chin_tip"),
        LanteriConstraint::absolute("nose_tip"),
    ]
}

/// Keeps the constraints whose landmarks are all present.
pub fn build_lanteri_constraints(lm: &LandmarkSet) -> Vec<LanteriConstraint> {
    lanteri_table()
        .into_iter()
        .filter(|c| {
            let missing: Vec<&String> = c.landmarks.iter().filter(|n| !lm.contains(n)).collect();
            if !missing.is_empty() && !lm.is_empty() {
                log::warn!("skipping {:?} constraint: missing {missing:?}", c.kind);
            }
            missing.is_empty()
        })
        .collect()
}

/// Eye-socket depth measures, each normalized by the ear-base span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl MeasureReport {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        MeasureReport { a, b, c, d }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        MeasureReport::new(v[0], v[1], v[2], v[3])
    }
}

fn plane_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3, what: &str) -> Result<f64> {
    let n = (b - a).cross(&(c - a));
    let scale = (b - a)
        .norm_squared()
        .max((c - a).norm_squared())
        .max((c - b).norm_squared());
    if n.norm() <= 1e-12 * scale || scale == 0.0 {
        return Err(Error::DegenerateLandmarks(format!("{what} landmarks are collinear")));
    }
    Ok((p - a).dot(&n).abs() / n.norm())
}

/// Computes the four measures from landmark vertices of `positions`.
pub fn eye_socket_measures(lm: &LandmarkSet, positions: &[Vec3]) -> Result<MeasureReport> {
    let at = |name: &str| -> Result<Vec3> {
        let v = lm.vertex(name)?;
        positions
            .get(v)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("landmark {name} vertex {v} out of range")))
    };
    let span = (at("ear_base_L")? - at("ear_base_R")?).norm();
    if span == 0.0 {
        return Err(Error::DegenerateLandmarks("ear-base points coincide".into()));
    }
    let inner = (at("inner_eye_L")? + at("inner_eye_R")?) * 0.5;
    let outer = (at("outer_eye_L")? + at("outer_eye_R")?) * 0.5;
    let brow = [at("brow_mid_L")?, at("brow_mid_R")?, at("chin_tip")?];
    let nose = [at("nose_bridge")?, at("mouth_corner_L")?, at("mouth_corner_R")?];
    let d = |p: &Vec3, q: &[Vec3; 3], what| plane_distance(p, &q[0], &q[1], &q[2], what).map(|x| x / span);
    Ok(MeasureReport {
        a: d(&inner, &brow, "brow/chin")?,
        b: d(&outer, &brow, "brow/chin")?,
        c: d(&inner, &nose, "nose/mouth")?,
        d: d(&outer, &nose, "nose/mouth")?,
    })
}

pub fn percent_increase(human: f64, sculpt: f64) -> f64 {
    100.0 * (sculpt - human) / human
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub human: MeasureReport,
    pub sculpt: MeasureReport,
    /// Percent increase from human to sculpt per measure.
    pub increase: [f64; 4],
}

impl GroupComparison {
    fn new(human: [f64; 4], sculpt: [f64; 4]) -> Self {
        GroupComparison {
            human: MeasureReport::from_array(human),
            sculpt: MeasureReport::from_array(sculpt),
            increase: std::array::from_fn(|k| percent_increase(human[k], sculpt[k])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub mean: GroupComparison,
    pub median: GroupComparison,
}

/// Mean and median of each measure per group, with percent increases.
pub fn aggregate_measures(human: &[MeasureReport], sculpt: &[MeasureReport]) -> Result<ComparisonTable> {
    if human.is_empty() || sculpt.is_empty() {
        return Err(Error::InvalidArgument("both groups need at least one report".into()));
    }
    let column = |group: &[MeasureReport], k: usize| -> Vec<f64> {
        group.iter().map(|r| r.as_array()[k]).collect()
    };
    let stat = |group: &[MeasureReport], f: fn(&[f64]) -> f64| -> [f64; 4] {
        std::array::from_fn(|k| f(&column(group, k)))
    };
    Ok(ComparisonTable {
        mean: GroupComparison::new(stat(human, mean), stat(sculpt, mean)),
        median: GroupComparison::new(stat(human, median), stat(sculpt, median)),
    })
}

impl ComparisonTable {
    fn rows(&self) -> Vec<(&'static str, &'static str, [f64; 4])> {
        let mut rows = Vec::new();
        for (stat, g) in [("mean", &self.mean), ("median", &self.median)] {
            rows.push((stat, "human", g.human.as_array()));
            rows.push((stat, "sculpt", g.sculpt.as_array()));
            rows.push((stat, "increase_pct", g.increase));
        }
        rows
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let to_err = |e: csv::Error| Error::InvalidArgument(format!("csv output failed: {e}"));
        out.write_record(["statistic", "group", "A", "B", "C", "D"])
            .map_err(to_err)?;
        for (stat, group, v) in self.rows() {
            let mut record = vec![stat.to_string(), group.to_string()];
            record.extend(v.iter().map(|x| format!("{x:.6}")));
            out.write_record(&record).map_err(to_err)?;
        }
        out.flush()
            .map_err(|e| Error::InvalidArgument(format!("csv output failed: {e}")))
    }
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:<12} {:>8} {:>8} {:>8} {:>8}", "", "", "A", "B", "C", "D")?;
        for (stat, group, v) in self.rows() {
            let label = match group {
                "human" => "Human",
                "sculpt" => "Sculpt",
                _ => "% Increase",
            };
            let first = if group == "human" { stat } else { "" };
            if group == "increase_pct" {
                writeln!(
                    f,
                    "{first:<8} {label:<12} {:>7.1}% {:>7.1}% {:>7.1}% {:>7.1}%",
                    v[0], v[1], v[2], v[3]
                )?;
            } else {
                writeln!(
                    f,
                    "{first:<8} {label:<12} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
                    v[0], v[1], v[2], v[3]
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn full_set() -> LandmarkSet {
        let mut lm = LandmarkSet::default();
        for (i, name) in LANDMARK_NAMES.iter().enumerate() {
            lm.insert(*name, i);
        }
        lm
    }

    /// A hand-built head: brow/chin plane is `z = 0`, the inner-corner
    /// midpoint sits 0.35 behind it and the ears are 5 apart.
    fn constructed_head() -> (LandmarkSet, Vec<Vec3>) {
        let lm = full_set();
        let mut pos = vec![Vec3::zeros(); LANDMARK_NAMES.len()];
        let mut put = |name: &str, p: Vec3| {
            pos[lm.get(name).unwrap()] = p;
        };
        put("brow_mid_L", Vec3::new(0.8, 1.0, 0.0));
        put("brow_mid_R", Vec3::new(-0.8, 1.0, 0.0));
        put("chin_tip", Vec3::new(0.0, -2.0, 0.0));
        put("inner_eye_L", Vec3::new(0.4, 0.6, -0.35));
        put("inner_eye_R", Vec3::new(-0.4, 0.6, -0.35));
        put("outer_eye_L", Vec3::new(1.2, 0.6, -0.5));
        put("outer_eye_R", Vec3::new(-1.2, 0.6, -0.5));
        put("nose_bridge", Vec3::new(0.0, 0.5, 0.1));
        put("mouth_corner_L", Vec3::new(0.6, -1.0, 0.1));
        put("mouth_corner_R", Vec3::new(-0.6, -1.0, 0.1));
        put("ear_base_L", Vec3::new(2.5, 0.0, -2.0));
        put("ear_base_R", Vec3::new(-2.5, 0.0, -2.0));
        (lm, pos)
    }

    #[test]
    fn hand_computed_measures() {
        let (lm, pos) = constructed_head();
        let m = eye_socket_measures(&lm, &pos).unwrap();
        assert!((m.a - 0.07).abs() < 1e-14);
        assert!((m.b - 0.1).abs() < 1e-14);
        assert!((m.c - 0.09).abs() < 1e-14);
        assert!((m.d - 0.12).abs() < 1e-14);
    }

    #[test]
    fn mirrored_landmarks_give_identical_measures() {
        let (lm, pos) = constructed_head();
        let mut mirrored = LandmarkSet::default();
        for (name, &v) in lm.iter() {
            let swapped = if let Some(b) = name.strip_suffix("_L") {
                format!("{b}_R")
            } else if let Some(b) = name.strip_suffix("_R") {
                format!("{b}_L")
            } else {
                name.clone()
            };
            mirrored.insert(swapped, v);
        }
        let flipped: Vec<Vec3> = pos.iter().map(|p| Vec3::new(-p.x, p.y, p.z)).collect();
        let a = eye_socket_measures(&lm, &pos).unwrap();
        let b = eye_socket_measures(&mirrored, &flipped).unwrap();
        for k in 0..4 {
            assert!((a.as_array()[k] - b.as_array()[k]).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn measures_ignore_rigid_motion_and_scale(
            s in 0.1f64..10.0,
            axis in prop::array::uniform3(-1.0f64..1.0),
            angle in -3.0f64..3.0,
            t in prop::array::uniform3(-5.0f64..5.0),
        ) {
            let axis = Vec3::from(axis);
            prop_assume!(axis.norm() > 1e-3);
            let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
            let (lm, pos) = constructed_head();
            let moved: Vec<Vec3> = pos.iter().map(|p| rot * p * s + Vec3::from(t)).collect();
            let a = eye_socket_measures(&lm, &pos).unwrap();
            let b = eye_socket_measures(&lm, &moved).unwrap();
            for k in 0..4 {
                prop_assert!((a.as_array()[k] - b.as_array()[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn collinear_plane_is_rejected() {
        let (lm, mut pos) = constructed_head();
        pos[lm.get("chin_tip").unwrap()] = Vec3::new(1.6, 1.0, 0.0);
        assert!(matches!(
            eye_socket_measures(&lm, &pos),
            Err(Error::DegenerateLandmarks(_))
        ));
    }

    #[test]
    fn missing_landmark_is_reported_by_name() {
        let (mut lm, pos) = constructed_head();
        lm.landmarks.remove("ear_base_R");
        match eye_socket_measures(&lm, &pos) {
            Err(Error::MissingLandmark(name)) => assert_eq!(name, "ear_base_R"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn full_set_gives_nine_constraints() {
        let cs = build_lanteri_constraints(&full_set());
        assert_eq!(cs.len(), 9);
        let rel = cs.iter().filter(|c| c.kind == LanteriKind::RelativeDistance).count();
        let abs = cs.iter().filter(|c| c.kind == LanteriKind::AbsolutePosition).count();
        assert_eq!((rel, abs), (7, 2));
        for c in &cs {
            c.check().unwrap();
        }
        assert_eq!(cs, build_lanteri_constraints(&full_set()));
    }

    #[test]
    fn ears_and_sternum_are_not_needed() {
        let mut lm = full_set();
        for name in ["ear_base_L", "ear_base_R", "ear_notch_L", "ear_notch_R", "sternum_notch"] {
            lm.landmarks.remove(name);
        }
        let cs = build_lanteri_constraints(&lm);
        assert_eq!(cs.len(), 9);
        assert!(cs.contains(&LanteriConstraint::absolute("chin_tip")));
        assert!(cs.contains(&LanteriConstraint::absolute("nose_tip")));
    }

    #[test]
    fn empty_set_gives_no_constraints() {
        assert!(build_lanteri_constraints(&LandmarkSet::default()).is_empty());
    }

    #[test]
    fn partial_set_drops_only_affected_constraints() {
        let mut lm = full_set();
        lm.landmarks.remove("nostril_L");
        assert_eq!(build_lanteri_constraints(&lm).len(), 8);
    }

    #[test]
    fn rounded_means_reproduce_published_increases() {
        let human = MeasureReport::new(0.069, 0.134, 0.094, 0.157);
        let sculpt = MeasureReport::new(0.112, 0.177, 0.131, 0.193);
        let t = aggregate_measures(&[human], &[sculpt]).unwrap();
        let published = [63.1, 32.5, 39.3, 23.1];
        for k in 0..4 {
            assert!((t.mean.increase[k] - published[k]).abs() <= 1.0, "{k}: {}", t.mean.increase[k]);
        }
        assert!((t.mean.increase[0] - 62.3188).abs() < 1e-3);
    }

    #[test]
    fn median_of_even_group_averages_the_middle() {
        let r = |x| MeasureReport::new(x, x, x, x);
        let t = aggregate_measures(&[r(1.0), r(4.0), r(2.0), r(3.0)], &[r(2.0)]).unwrap();
        assert_eq!(t.median.human.a, 2.5);
        assert_eq!(t.mean.human.a, 2.5);
        assert_eq!(t.median.increase[0], -20.0);
    }

    #[test]
    fn identical_groups_show_no_increase() {
        let (lm, pos) = constructed_head();
        let m = eye_socket_measures(&lm, &pos).unwrap();
        let t = aggregate_measures(&[m, m], &[m, m]).unwrap();
        assert!(t.mean.increase.iter().chain(&t.median.increase).all(|&x| x == 0.0));
    }

    #[test]
    fn empty_group_is_an_error() {
        assert!(aggregate_measures(&[], &[MeasureReport::new(1.0, 1.0, 1.0, 1.0)]).is_err());
    }

    #[test]
    fn table_renders_as_csv_and_text() {
        let t = aggregate_measures(
            &[MeasureReport::new(0.069, 0.134, 0.094, 0.157)],
            &[MeasureReport::new(0.112, 0.177, 0.131, 0.193)],
        )
        .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.starts_with("statistic,group,A,B,C,D\n"));
        assert!(text.contains("mean,increase_pct,62.318841"));
        let pretty = t.to_string();
        assert!(pretty.contains("% Increase"));
        assert!(pretty.contains("62.3%"));
    }
}
