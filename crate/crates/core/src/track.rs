//! Gates, racetracks and progress along them.
//!
//! A gate is a square opening of side `inner_side` surrounded by a solid
//! frame band of width `frame_width`. In the gate's local frame the opening
//! spans the x-z plane and the pass direction is +y.

use std::path::Path;

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadsim::symmetric;

/// Empirical smoothing factor of the continuous gate index.
pub const GATE_INDEX_SHARPNESS: f64 = 5.0;
/// Thickness of the frame band along the gate normal, m.
pub const FRAME_DEPTH: f64 = 0.05;
/// Default radius of the sphere standing in for the drone, m.
pub const DRONE_RADIUS: f64 = 0.15;

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub center: Vector3<f64>,
    /// World <- gate.
    pub rotation: Matrix3<f64>,
    pub inner_side: f64,
    pub frame_width: f64,
}

impl Gate {
    /// Gate whose pass direction has heading `yaw_deg` in the horizontal
    /// plane (0 = world +x, 90 = world +y).
    pub fn new(center: Vector3<f64>, yaw_deg: f64, inner_side: f64, frame_width: f64) -> Self {
        Self::with_attitude(center, yaw_deg, 0.0, 0.0, inner_side, frame_width)
    }

    pub fn with_attitude(
        center: Vector3<f64>,
        yaw_deg: f64,
        pitch_deg: f64,
        roll_deg: f64,
        inner_side: f64,
        frame_width: f64,
    ) -> Self {
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), (yaw_deg - 90.0).to_radians())
            * Rotation3::from_axis_angle(&Vector3::x_axis(), pitch_deg.to_radians())
            * Rotation3::from_axis_angle(&Vector3::y_axis(), roll_deg.to_radians());
        Self { center, rotation: rot.into_inner(), inner_side, frame_width }
    }

    /// Unit pass direction.
    pub fn forward(&self) -> Vector3<f64> {
        self.rotation.column(1).into_owned()
    }

    pub fn to_local(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.center)
    }

    /// Corners of the inner opening in world frame, in drawing order.
    pub fn inner_corners(&self) -> [Vector3<f64>; 4] {
        let h = 0.5 * self.inner_side;
        [(-h, -h), (h, -h), (h, h), (-h, h)].map(|(x, z)| self.center + self.rotation * Vector3::new(x, 0.0, z))
    }

    /// The four frame bars as local-frame boxes `(min, max)`.
    fn frame_boxes(&self) -> [(Vector3<f64>, Vector3<f64>); 4] {
        let h = 0.5 * self.inner_side;
        let o = h + self.frame_width;
        let t = 0.5 * FRAME_DEPTH;
        [
            (Vector3::new(-o, -t, h), Vector3::new(o, t, o)),
            (Vector3::new(-o, -t, -o), Vector3::new(o, t, -h)),
            (Vector3::new(-o, -t, -h), Vector3::new(-h, t, h)),
            (Vector3::new(h, -t, -h), Vector3::new(o, t, h)),
        ]
    }

    /// Distance from a world point to the solid frame band.
    pub fn distance_to_frame(&self, p: &Vector3<f64>) -> f64 {
        let local = self.to_local(p);
        self.frame_boxes()
            .iter()
            .map(|(lo, hi)| box_distance(&local, lo, hi))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest distance from the segment `a -> b` to the frame band.
    pub fn segment_distance_to_frame(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        let (la, lb) = (self.to_local(a), self.to_local(b));
        self.frame_boxes()
            .iter()
            .map(|(lo, hi)| {
                // Point-to-box distance is convex along a line.
                golden_min(|t| box_distance(&(la + (lb - la) * t), lo, hi))
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn bounding_radius(&self) -> f64 {
        (0.5 * self.inner_side + self.frame_width) * std::f64::consts::SQRT_2 + FRAME_DEPTH
    }
}

fn box_distance(p: &Vector3<f64>, lo: &Vector3<f64>, hi: &Vector3<f64>) -> f64 {
    let d = Vector3::from_fn(|i, _| (lo[i] - p[i]).max(0.0).max(p[i] - hi[i]));
    d.norm()
}

fn golden_min(f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..64 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    [f(0.0), f(1.0), fc, fd].into_iter().fold(f64::INFINITY, f64::min)
}

/// Where an episode starts when no previous gate exists.
#[derive(Clone, Debug, PartialEq)]
pub struct StartPose {
    pub position: Vector3<f64>,
    /// Heading of the vehicle, degrees.
    pub yaw_deg: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub name: String,
    pub gates: Vec<Gate>,
    pub cyclic: bool,
    pub start: StartPose,
}

impl Track {
    pub fn new(name: impl Into<String>, gates: Vec<Gate>, cyclic: bool, start: Option<StartPose>) -> Result<Self> {
        let first = gates.first().ok_or_else(|| Error::InvalidTrack("track has no gates".into()))?;
        let start = start.unwrap_or_else(|| {
            let fwd = first.forward();
            StartPose {
                position: first.center - 3.0 * fwd,
                yaw_deg: fwd.y.atan2(fwd.x).to_degrees(),
            }
        });
        let track = Self { name: name.into(), gates, cyclic, start };
        track.validate()?;
        Ok(track)
    }

    pub fn n_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.gates.is_empty() {
            return Err(Error::InvalidTrack("track has no gates".into()));
        }
        for (i, g) in self.gates.iter().enumerate() {
            if !(g.inner_side > 0.0 && g.frame_width > 0.0) {
                return Err(Error::InvalidTrack(format!("gate {i}: inner_side and frame_width must be positive")));
            }
            if !g.center.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidTrack(format!("gate {i}: non-finite position")));
            }
        }
        Ok(())
    }

    /// Index of the gate to pass after `passed` gates, or `None` once an
    /// acyclic track is complete.
    pub fn target_gate(&self, passed: u64) -> Option<usize> {
        let n = self.n_gates() as u64;
        if self.cyclic {
            Some((passed % n) as usize)
        } else if passed < n {
            Some(passed as usize)
        } else {
            None
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: TrackFile = toml::from_str(text).map_err(|e| Error::InvalidTrack(e.to_string()))?;
        file.into_track()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let file: TrackFile = toml::from_str(&text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        file.into_track()
    }

    pub fn to_toml_string(&self) -> String {
        let gates = self
            .gates
            .iter()
            .map(|g| {
                let fwd = g.forward();
                let pitch = fwd.z.asin().to_degrees();
                let yaw = fwd.y.atan2(fwd.x).to_degrees();
                // What remains after yaw and pitch is a rotation about local y.
                let base = Gate::with_attitude(g.center, yaw, pitch, 0.0, 1.0, 1.0);
                let rest = base.rotation.transpose() * g.rotation;
                let roll = rest[(0, 2)].atan2(rest[(0, 0)]).to_degrees();
                GateEntry {
                    position: [g.center.x, g.center.y, g.center.z],
                    yaw_deg: yaw,
                    pitch_deg: pitch,
                    roll_deg: roll,
                    inner_side: g.inner_side,
                    frame_width: g.frame_width,
                }
            })
            .collect();
        let file = TrackFile {
            name: self.name.clone(),
            cyclic: self.cyclic,
            start: Some(StartEntry {
                position: [self.start.position.x, self.start.position.y, self.start.position.z],
                yaw_deg: self.start.yaw_deg,
            }),
            gates,
        };
        toml::to_string(&file).expect("track serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackFile {
    #[serde(default)]
    name: String,
    #[serde(default = "default_cyclic")]
    cyclic: bool,
    #[serde(default)]
    start: Option<StartEntry>,
    gates: Vec<GateEntry>,
}

fn default_cyclic() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StartEntry {
    position: [f64; 3],
    #[serde(default)]
    yaw_deg: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateEntry {
    position: [f64; 3],
    #[serde(default)]
    yaw_deg: f64,
    #[serde(default)]
    pitch_deg: f64,
    #[serde(default)]
    roll_deg: f64,
    #[serde(default = "default_inner_side")]
    inner_side: f64,
    #[serde(default = "default_frame_width")]
    frame_width: f64,
}

fn default_inner_side() -> f64 {
    1.5
}

fn default_frame_width() -> f64 {
    0.2
}

impl TrackFile {
    fn into_track(self) -> Result<Track> {
        let gates = self
            .gates
            .iter()
            .map(|g| {
                Gate::with_attitude(
                    Vector3::from(g.position),
                    g.yaw_deg,
                    g.pitch_deg,
                    g.roll_deg,
                    g.inner_side,
                    g.frame_width,
                )
            })
            .collect();
        let start = self.start.map(|s| StartPose { position: Vector3::from(s.position), yaw_deg: s.yaw_deg });
        Track::new(self.name, gates, self.cyclic, start)
    }
}

/// Smooth progress scalar: gates passed plus a sigmoid of the distance to
/// the next gate center that reaches 1 at the gate.
pub fn continuous_gate_index(passed: u64, distance: f64, sharpness: f64) -> f64 {
    passed as f64 + 2.0 / (1.0 + (sharpness * distance).exp())
}

/// Periodic encoding of the continuous gate index with a decaying term that
/// separates the first lap from later ones.
pub fn encode_gate_index(index: f64, n_gates: usize) -> [f64; 2] {
    let freq = std::f64::consts::TAU / n_gates as f64;
    let decay = (-index).exp();
    [decay + (freq * index).cos(), decay + (freq * index).sin()]
}

/// Per-episode progress along a track.
#[derive(Clone, Debug, PartialEq)]
pub struct ProgressState {
    /// Gates passed so far, cumulative over laps.
    pub passed: u64,
    /// Vector from the drone to the next gate center, world frame.
    pub to_next: Vector3<f64>,
    /// `|to_next|`.
    pub distance: f64,
}

impl ProgressState {
    pub fn new(track: &Track, passed: u64, position: &Vector3<f64>) -> Self {
        let mut p = Self { passed, to_next: Vector3::zeros(), distance: 0.0 };
        p.refresh(track, position);
        p
    }

    /// Recomputes the vector to the next gate. Once an acyclic track is
    /// finished the last gate stays the reference.
    pub fn refresh(&mut self, track: &Track, position: &Vector3<f64>) {
        let target = track.target_gate(self.passed).unwrap_or(track.n_gates() - 1);
        self.to_next = track.gates[target].center - position;
        self.distance = self.to_next.norm();
    }

    pub fn gate_index(&self) -> f64 {
        continuous_gate_index(self.passed, self.distance, GATE_INDEX_SHARPNESS)
    }

    pub fn encoded(&self, n_gates: usize) -> [f64; 2] {
        encode_gate_index(self.gate_index(), n_gates)
    }
}

/// A crossing of the inner opening in the pass direction.
#[derive(Clone, Debug, PartialEq)]
pub struct GatePass {
    pub point: Vector3<f64>,
    /// Crossing point in the gate plane relative to the center (local x, z).
    pub in_plane: Vector2<f64>,
    /// Distance of the crossing from the gate center, m.
    pub offset: f64,
    /// Fraction of the step at which the plane was crossed.
    pub fraction: f64,
}

pub fn detect_gate_pass(prev: &Vector3<f64>, curr: &Vector3<f64>, gate: &Gate) -> Option<GatePass> {
    let n = gate.forward();
    let s0 = n.dot(&(prev - gate.center));
    let s1 = n.dot(&(curr - gate.center));
    if !(s0 < 0.0 && s1 >= 0.0) {
        return None;
    }
    let fraction = s0 / (s0 - s1);
    let point = prev + (curr - prev) * fraction;
    let local = gate.to_local(&point);
    let h = 0.5 * gate.inner_side;
    if local.x.abs() > h || local.z.abs() > h {
        return None;
    }
    let in_plane = Vector2::new(local.x, local.z);
    Some(GatePass { point, offset: in_plane.norm(), in_plane, fraction })
}

/// Whether a sphere of `radius` swept from `prev` to `curr` touches any
/// gate frame.
pub fn detect_gate_collision(prev: &Vector3<f64>, curr: &Vector3<f64>, radius: f64, gates: &[Gate]) -> bool {
    gates.iter().any(|g| {
        let reach = g.bounding_radius() + radius;
        if segment_point_distance(prev, curr, &g.center) > reach {
            return false;
        }
        g.segment_distance_to_frame(prev, curr) < radius
    })
}

fn segment_point_distance(a: &Vector3<f64>, b: &Vector3<f64>, p: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + ab * t - p).norm()
}

/// Copy of `track` with each gate center displaced by independent uniform
/// offsets in `[-offset, offset]` per axis.
pub fn randomize_gates<R: Rng + ?Sized>(track: &Track, offset: f64, rng: &mut R) -> Track {
    let mut out = track.clone();
    for g in &mut out.gates {
        g.center += Vector3::new(symmetric(rng, offset), symmetric(rng, offset), symmetric(rng, offset));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gate_x(x: f64) -> Gate {
        Gate::new(Vector3::new(x, 0.0, 2.0), 0.0, 1.5, 0.2)
    }

    fn two_gates() -> Track {
        Track::new("pair", vec![gate_x(0.0), gate_x(5.0)], false, None).unwrap()
    }

    #[test]
    fn gate_index_values() {
        assert_eq!(continuous_gate_index(4, 0.0, 5.0), 5.0);
        assert!((continuous_gate_index(3, 1e3, 5.0) - 3.0).abs() < 1e-12);
        let expected = 3.0 + 2.0 / (1.0 + 1f64.exp());
        assert!((continuous_gate_index(3, 0.2, 5.0) - expected).abs() < 1e-12);
        assert!((continuous_gate_index(3, 0.2, 5.0) - 3.5379).abs() < 1e-4);
    }

    #[test]
    fn encoding_values() {
        assert_eq!(encode_gate_index(0.0, 7), [2.0, 1.0]);
        let e = encode_gate_index(1.0, 4);
        assert!((e[0] - 0.3679).abs() < 1e-4 && (e[1] - 1.3679).abs() < 1e-4);
        for ic in [5.0, 7.3, 12.9] {
            let (a, b) = (encode_gate_index(ic, 4), encode_gate_index(ic + 4.0, 4));
            for k in 0..2 {
                assert!((a[k] - b[k]).abs() <= 2.0 * (-ic).exp());
            }
        }
    }

    #[test]
    fn gate_heading_convention() {
        let g = Gate::new(Vector3::zeros(), 90.0, 1.5, 0.2);
        assert!((g.forward() - Vector3::y()).norm() < 1e-12);
        let g = Gate::new(Vector3::zeros(), 0.0, 1.5, 0.2);
        assert!((g.forward() - Vector3::x()).norm() < 1e-12);
        // Local z stays up for a level gate.
        assert!((g.rotation.column(2) - Vector3::z()).norm() < 1e-12);
    }

    #[test]
    fn center_pass_detected() {
        let g = gate_x(0.0);
        let pass = detect_gate_pass(&Vector3::new(-0.1, 0.0, 2.0), &Vector3::new(0.1, 0.0, 2.0), &g).unwrap();
        assert!(pass.offset.abs() < 1e-12);
        assert!((pass.fraction - 0.5).abs() < 1e-12);
    }

    #[test]
    fn outside_crossing_is_not_a_pass() {
        let g = gate_x(0.0);
        let y = 0.75 + 0.05;
        assert!(detect_gate_pass(&Vector3::new(-0.1, y, 2.0), &Vector3::new(0.1, y, 2.0), &g).is_none());
    }

    #[test]
    fn backward_crossing_is_not_a_pass() {
        let g = gate_x(0.0);
        assert!(detect_gate_pass(&Vector3::new(0.1, 0.0, 2.0), &Vector3::new(-0.1, 0.0, 2.0), &g).is_none());
    }

    #[test]
    fn offset_is_in_plane_norm() {
        let g = gate_x(0.0);
        // Local x is world -y for a gate facing +x.
        let pass = detect_gate_pass(&Vector3::new(-0.1, -0.3, 2.1), &Vector3::new(0.1, -0.3, 2.1), &g).unwrap();
        assert!((pass.in_plane - Vector2::new(0.3, 0.1)).norm() < 1e-12);
        assert!((pass.offset - 0.1f64.hypot(0.3)).abs() < 1e-6);
        assert!((pass.offset - 0.3162).abs() < 1e-4);
    }

    #[test]
    fn collision_cases() {
        let gates = [Gate::new(Vector3::new(0.0, 0.0, 2.0), 0.0, 1.5, 0.2)];
        let seg = |y: f64| (Vector3::new(-0.2, y, 2.0), Vector3::new(0.2, y, 2.0));
        let (a, b) = seg(0.0);
        assert!(!detect_gate_collision(&a, &b, DRONE_RADIUS, &gates));
        let (a, b) = seg(0.75);
        assert!(detect_gate_collision(&a, &b, DRONE_RADIUS, &gates));
        let (a, b) = seg(0.75 - 0.14);
        assert!(detect_gate_collision(&a, &b, DRONE_RADIUS, &gates));
        let (a, b) = seg(0.75 - 0.16);
        assert!(!detect_gate_collision(&a, &b, DRONE_RADIUS, &gates));
        // Far away segments never collide.
        let (a, b) = (Vector3::new(10.0, 0.0, 2.0), Vector3::new(11.0, 0.0, 2.0));
        assert!(!detect_gate_collision(&a, &b, DRONE_RADIUS, &gates));
    }

    #[test]
    fn segment_distance_matches_dense_sampling() {
        let g = Gate::with_attitude(Vector3::new(1.0, -2.0, 3.0), 33.0, 10.0, 5.0, 1.5, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let a = g.center + Vector3::from_fn(|_, _| rng.random_range(-1.5..1.5));
            let b = g.center + Vector3::from_fn(|_, _| rng.random_range(-1.5..1.5));
            let sampled = (0..=4000)
                .map(|k| g.distance_to_frame(&(a + (b - a) * (k as f64 / 4000.0))))
                .fold(f64::INFINITY, f64::min);
            let exact = g.segment_distance_to_frame(&a, &b);
            assert!(exact <= sampled + 1e-12);
            assert!(sampled - exact < 2e-3, "{sampled} vs {exact}");
        }
    }

    #[test]
    fn index_is_smooth_on_center_line() {
        let track = two_gates();
        let dt = 0.02;
        let speed = 3.0;
        let mut p = Vector3::new(-3.0, 0.0, 2.0);
        let mut progress = ProgressState::new(&track, 0, &p);
        let mut last = progress.gate_index();
        let mut max_jump: f64 = 0.0;
        while p.x < 4.9 {
            let next = p + Vector3::new(speed * dt, 0.0, 0.0);
            if let Some(g) = track.target_gate(progress.passed) {
                if detect_gate_pass(&p, &next, &track.gates[g]).is_some() {
                    progress.passed += 1;
                }
            }
            progress.refresh(&track, &next);
            let ic = progress.gate_index();
            max_jump = max_jump.max((ic - last).abs());
            assert!(ic >= last - 1e-12, "index decreased at x = {}", next.x);
            last = ic;
            p = next;
        }
        assert_eq!(progress.passed, 1);
        assert!(max_jump < 0.2, "max jump {max_jump}");
    }

    #[test]
    fn target_gate_wraps_only_when_cyclic() {
        let mut track = two_gates();
        assert_eq!(track.target_gate(1), Some(1));
        assert_eq!(track.target_gate(2), None);
        track.cyclic = true;
        assert_eq!(track.target_gate(5), Some(1));
    }

    #[test]
    fn gate_randomization_bounds() {
        let track = two_gates();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(randomize_gates(&track, 0.0, &mut rng), track);
        for off in [0.05, 0.5] {
            let mut max: f64 = 0.0;
            for _ in 0..10_000 {
                let t = randomize_gates(&track, off, &mut rng);
                for (a, b) in t.gates.iter().zip(&track.gates) {
                    let d = (a.center - b.center).abs().max();
                    assert!(d <= off);
                    max = max.max(d);
                    assert_eq!(a.rotation, b.rotation);
                }
            }
            assert!(max > 0.95 * off);
        }
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            name = "demo"
            cyclic = true
            [[gates]]
            position = [0.0, 0.0, 2.0]
            yaw_deg = 0.0
            [[gates]]
            position = [5.0, 3.0, 2.5]
            yaw_deg = 120.0
            pitch_deg = 10.0
            roll_deg = 5.0
            inner_side = 1.4
        "#;
        let t = Track::from_toml_str(text).unwrap();
        assert_eq!(t.n_gates(), 2);
        assert_eq!(t.gates[1].inner_side, 1.4);
        let again = Track::from_toml_str(&t.to_toml_string()).unwrap();
        for (a, b) in t.gates.iter().zip(&again.gates) {
            assert!((a.rotation - b.rotation).abs().max() < 1e-9);
            assert!((a.center - b.center).norm() < 1e-12);
        }
    }

    #[test]
    fn invalid_tracks_rejected() {
        assert!(Track::from_toml_str("gates = []").is_err());
        assert!(Track::from_toml_str("[[gates]]\nposition = [0,0,1]\ninner_side = -1.0").is_err());
        assert!(Track::from_toml_str("[[gates]]\nposition = [0,0,1]\nbogus = 1").is_err());
    }
}
