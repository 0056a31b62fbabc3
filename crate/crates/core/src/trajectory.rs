//! Benchmark scenarios: ground-truth trajectories, anchor layouts and the
//! inter-vehicle graph.
//!
//! Three survey patterns are provided. All are sampled at `t = (k - 1) * dt`
//! for `k = 1..=steps`, so step 1 is the starting position.
//!
//! * **Lap** (2D): a team of vehicles in line-abreast formation drives a
//!   stadium-shaped lap (two straights joined by semicircles) with a
//!   slowdown window near a configurable point.
//! * **Spiral** (3D): a descending helix.
//! * **Lawn mower** (2D): a boustrophedon survey of parallel lanes joined by
//!   semicircular U-turns, with one anchor on the south-west corner flagged as
//!   the outlier target.
//!
//! Vehicles within a scenario are fully connected and see every anchor.

use std::borrow::Cow;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Positions};
use crate::network::{GraphConfig, NetworkGraph};

/// Ground truth plus network layout for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub graph: NetworkGraph,
    /// `truth[k - 1]` holds all node positions at step `k`.
    pub truth: Vec<Positions>,
    pub dt: f64,
    /// Anchor designated for outlier contamination, if any.
    pub outlier_anchor: Option<usize>,
    /// Optional per-step anchor positions (`[k - 1][anchor]`); static anchors
    /// from `graph` are used when absent.
    pub anchor_tracks: Option<Vec<Vec<Vec<f64>>>>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, graph: NetworkGraph, truth: Vec<Positions>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParams(format!(
                "sampling period must be positive, got {dt}"
            )));
        }
        if truth.is_empty() {
            return Err(Error::InvalidParams("scenario needs at least one step".into()));
        }
        for pos in &truth {
            pos.check_shape(graph.n_nodes(), graph.dim())?;
            if !pos.is_finite() {
                return Err(Error::InvalidParams("non-finite ground truth".into()));
            }
        }
        Ok(Scenario {
            name: name.into(),
            graph,
            truth,
            dt,
            outlier_anchor: None,
            anchor_tracks: None,
        })
    }

    pub fn steps(&self) -> usize {
        self.truth.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.graph.n_nodes()
    }

    pub fn dim(&self) -> usize {
        self.graph.dim()
    }

    /// Truth at step `k` (1-based).
    pub fn truth_at(&self, k: usize) -> Result<&Positions> {
        self.check_step(k)?;
        Ok(&self.truth[k - 1])
    }

    /// Position at which estimators are initialized (the first truth sample).
    pub fn start(&self) -> &Positions {
        &self.truth[0]
    }

    pub fn check_step(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.steps() {
            return Err(Error::StepOutOfRange { k, steps: self.steps() });
        }
        Ok(())
    }

    /// Graph with the anchor positions in effect at step `k`.
    pub fn graph_at(&self, k: usize) -> Result<Cow<'_, NetworkGraph>> {
        self.check_step(k)?;
        match &self.anchor_tracks {
            None => Ok(Cow::Borrowed(&self.graph)),
            Some(tracks) => Ok(Cow::Owned(self.graph.with_anchor_positions(tracks[k - 1].clone())?)),
        }
    }

    /// Box spanned by the anchors.
    pub fn anchor_box(&self) -> BoundingBox {
        BoundingBox::around(self.graph.anchors().iter().map(Vec::as_slice))
            .unwrap_or_else(|| BoundingBox::around(self.truth[0].nodes()).expect("scenario has nodes"))
    }

    /// Whether every truth point lies inside the anchors' convex hull. The
    /// generators place anchors on every corner of a box, so the hull is that box.
    pub fn truth_in_anchor_hull(&self) -> bool {
        let bb = self.anchor_box();
        let dim = self.dim();
        let corners = 1usize << dim;
        let has_corners = (0..corners).all(|mask| {
            let corner: Vec<f64> = (0..dim)
                .map(|d| if mask >> d & 1 == 1 { bb.max[d] } else { bb.min[d] })
                .collect();
            self.graph.anchors().iter().any(|a| a == &corner)
        });
        has_corners && self.truth.iter().all(|pos| pos.nodes().all(|pt| bb.contains(pt, 1e-9)))
    }

    fn finish(mut self, outlier_anchor: Option<usize>) -> Result<Self> {
        self.outlier_anchor = outlier_anchor;
        if !self.truth_in_anchor_hull() {
            return Err(Error::InvalidParams(
                "trajectory leaves the anchors' convex hull".into(),
            ));
        }
        Ok(self)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::InvalidParams(format!("{name} must be nonnegative, got {v}")));
    }
    Ok(())
}

/// Piecewise-constant speed along a closed or open path, indexed by arc length.
///
/// `breaks` are ascending arc lengths starting at 0; `speeds[i]` applies on
/// `[breaks[i], breaks[i + 1])`, the last segment ending at `length`.
struct SpeedProfile {
    breaks: Vec<f64>,
    speeds: Vec<f64>,
    length: f64,
    periodic: bool,
}

impl SpeedProfile {
    fn segment(&self, s: f64) -> usize {
        self.breaks.iter().rposition(|&b| b <= s).unwrap_or_default()
    }

    /// Arc length reached after traveling for `dt` seconds from `s`.
    fn advance(&self, mut s: f64, dt: f64) -> f64 {
        let mut remaining = dt;
        let mut lap_offset = 0.0;
        loop {
            let i = self.segment(s);
            let end = self.breaks.get(i + 1).copied().unwrap_or(self.length);
            let v = self.speeds[i];
            let t_seg = (end - s) / v;
            if remaining <= t_seg {
                return lap_offset + s + v * remaining;
            }
            remaining -= t_seg;
            if i + 1 < self.breaks.len() {
                s = end;
            } else if self.periodic {
                lap_offset += self.length;
                s = 0.0;
            } else {
                return lap_offset + self.length;
            }
        }
    }
}

/// Builds a speed profile over `[0, length)` with base speeds per geometric
/// segment and a multiplicative slowdown on `[w0, w1)` (may wrap if periodic).
fn build_profile(
    geom_breaks: &[f64],
    geom_speeds: &[f64],
    length: f64,
    slow: Option<(f64, f64, f64)>,
    periodic: bool,
) -> SpeedProfile {
    let mut cuts: Vec<f64> = geom_breaks.to_vec();
    let windows: Vec<(f64, f64)> = match slow {
        None => vec![],
        Some((w0, w1, _)) if w0 <= w1 => vec![(w0, w1)],
        Some((w0, w1, _)) => vec![(w0, length), (0.0, w1)],
    };
    for &(a, b) in &windows {
        cuts.push(a);
        cuts.push(b);
    }
    cuts.retain(|&c| c >= 0.0 && c < length);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let speeds = cuts
        .iter()
        .map(|&c| {
            let gi = geom_breaks.iter().rposition(|&b| b <= c).unwrap_or(0);
            let mut v = geom_speeds[gi];
            if let Some((_, _, factor)) = slow {
                if windows.iter().any(|&(a, b)| c >= a && c < b) {
                    v *= factor;
                }
            }
            v
        })
        .collect();
    SpeedProfile {
        breaks: cuts,
        speeds,
        length,
        periodic,
    }
}

/// Parameters of the stadium lap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LapParams {
    /// Half of the lap's overall width (x), meters.
    pub half_length_x: f64,
    /// Half of the lap's overall height (y); also the turn radius.
    pub half_length_y: f64,
    /// Lateral spacing between neighboring vehicles in the formation.
    pub spacing: f64,
    pub vehicles: usize,
    /// Nominal speed in m/s; no vehicle ever exceeds it.
    pub speed: f64,
    /// Speed multiplier inside the slowdown window (1 disables it).
    pub slowdown_factor: f64,
    /// Point the slowdown window is centered on (closest point of the path).
    pub slowdown_at: [f64; 2],
    /// Arc length of the slowdown window, meters.
    pub slowdown_length: f64,
    pub dt: f64,
    pub steps: usize,
    pub anchors: usize,
    /// Margin between the trajectories' bounding box and the anchor box.
    pub anchor_margin: f64,
}

impl Default for LapParams {
    fn default() -> Self {
        LapParams {
            half_length_x: 20.0,
            half_length_y: 10.0,
            spacing: 3.0,
            vehicles: 3,
            speed: 0.5,
            slowdown_factor: 0.3,
            slowdown_at: [-15.0, -5.0],
            slowdown_length: 10.0,
            dt: 1.0,
            steps: 260,
            anchors: 12,
            anchor_margin: 5.0,
        }
    }
}

/// Center line of the stadium: bottom straight heading +x from `(-a, -r)`,
/// counter-clockwise turns centered at `(+-a, 0)`.
struct Stadium {
    a: f64,
    r: f64,
}

impl Stadium {
    fn length(&self) -> f64 {
        4.0 * self.a + 2.0 * PI * self.r
    }

    /// Segment boundaries: straight, turn, straight, turn.
    fn breaks(&self) -> [f64; 4] {
        let (a2, pr) = (2.0 * self.a, PI * self.r);
        [0.0, a2, a2 + pr, 2.0 * a2 + pr]
    }

    /// Point and left normal at arc length `s` (taken modulo the length).
    fn frame(&self, s: f64) -> ([f64; 2], [f64; 2]) {
        let (a, r) = (self.a, self.r);
        let s = s.rem_euclid(self.length());
        let b = self.breaks();
        if s < b[1] {
            ([-a + s, -r], [0.0, 1.0])
        } else if s < b[2] {
            let th = -PI / 2.0 + (s - b[1]) / r;
            ([a + r * th.cos(), r * th.sin()], [-th.cos(), -th.sin()])
        } else if s < b[3] {
            ([a - (s - b[2]), r], [0.0, -1.0])
        } else {
            let th = PI / 2.0 + (s - b[3]) / r;
            ([-a + r * th.cos(), r * th.sin()], [-th.cos(), -th.sin()])
        }
    }

    fn closest_arclength(&self, target: [f64; 2]) -> f64 {
        // dense scan; the path is short and this runs once per scenario
        let n = 20_000;
        let len = self.length();
        (0..n)
            .map(|i| len * i as f64 / n as f64)
            .min_by(|&s1, &s2| {
                let d = |s: f64| {
                    let (p, _) = self.frame(s);
                    (p[0] - target[0]).powi(2) + (p[1] - target[1]).powi(2)
                };
                d(s1).partial_cmp(&d(s2)).unwrap()
            })
            .unwrap()
    }
}

fn lateral_offsets(vehicles: usize, spacing: f64) -> Vec<f64> {
    let mid = (vehicles as f64 - 1.0) / 2.0;
    (0..vehicles).map(|v| (v as f64 - mid) * spacing).collect()
}

pub fn gen_lap(params: &LapParams) -> Result<Scenario> {
    let p = params;
    check_positive("speed", p.speed)?;
    check_positive("dt", p.dt)?;
    check_positive("half_length_y", p.half_length_y)?;
    check_positive("slowdown_factor", p.slowdown_factor)?;
    check_nonneg("spacing", p.spacing)?;
    check_nonneg("slowdown_length", p.slowdown_length)?;
    check_nonneg("anchor_margin", p.anchor_margin)?;
    if p.steps == 0 || p.vehicles == 0 {
        return Err(Error::InvalidParams("steps and vehicles must be positive".into()));
    }
    if p.half_length_x < p.half_length_y {
        return Err(Error::InvalidParams(
            "half_length_x must be at least half_length_y".into(),
        ));
    }
    if p.slowdown_factor > 1.0 {
        return Err(Error::InvalidParams("slowdown_factor must not exceed 1".into()));
    }
    let offsets = lateral_offsets(p.vehicles, p.spacing);
    let max_off = offsets.iter().fold(0.0f64, |m, o| m.max(o.abs()));
    if max_off >= p.half_length_y {
        return Err(Error::InvalidParams("formation wider than the turn radius".into()));
    }

    let path = Stadium {
        a: p.half_length_x - p.half_length_y,
        r: p.half_length_y,
    };
    let len = path.length();
    // On turns the outermost vehicle moves at the nominal speed.
    let turn_speed = p.speed * path.r / (path.r + max_off);
    let geom = path.breaks();
    let geom_speeds = [p.speed, turn_speed, p.speed, turn_speed];
    let slow = if p.slowdown_factor < 1.0 && p.slowdown_length > 0.0 {
        let c = path.closest_arclength(p.slowdown_at);
        let half = 0.5 * p.slowdown_length.min(len);
        Some((
            (c - half).rem_euclid(len),
            (c + half).rem_euclid(len),
            p.slowdown_factor,
        ))
    } else {
        None
    };
    let profile = build_profile(&geom, &geom_speeds, len, slow, true);

    let mut s = 0.0f64;
    let mut truth = Vec::with_capacity(p.steps);
    for k in 0..p.steps {
        if k > 0 {
            s = profile.advance(s.rem_euclid(len), p.dt);
        }
        let (c, nrm) = path.frame(s);
        let mut pos = Positions::zeros(p.vehicles, 2);
        for (v, off) in offsets.iter().enumerate() {
            pos.node_mut(v)
                .copy_from_slice(&[c[0] + off * nrm[0], c[1] + off * nrm[1]]);
        }
        truth.push(pos);
    }
    assemble("lap", truth, 2, p.dt, p.anchors, p.anchor_margin, false)
}

/// Parameters of the descending helix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpiralParams {
    pub radius: f64,
    /// rad/s
    pub angular_rate: f64,
    /// m/s; the depth coordinate `z` decreases at this rate.
    pub descent_rate: f64,
    pub vehicles: usize,
    /// Phase lag (rad) between consecutive vehicles following the helix.
    pub phase_spacing: f64,
    pub dt: f64,
    pub steps: usize,
    pub anchors: usize,
    pub anchor_margin: f64,
}

impl Default for SpiralParams {
    fn default() -> Self {
        SpiralParams {
            radius: 10.0,
            angular_rate: 0.05,
            descent_rate: 0.1,
            vehicles: 1,
            phase_spacing: 0.3,
            dt: 1.0,
            steps: 200,
            anchors: 16,
            anchor_margin: 5.0,
        }
    }
}

impl SpiralParams {
    pub fn speed(&self) -> f64 {
        (self.radius * self.angular_rate).hypot(self.descent_rate)
    }
}

pub fn gen_spiral(params: &SpiralParams) -> Result<Scenario> {
    let p = params;
    check_positive("radius", p.radius)?;
    check_positive("dt", p.dt)?;
    check_nonneg("descent_rate", p.descent_rate)?;
    check_nonneg("anchor_margin", p.anchor_margin)?;
    check_nonneg("phase_spacing", p.phase_spacing)?;
    if !p.angular_rate.is_finite() || p.angular_rate == 0.0 {
        return Err(Error::InvalidParams("angular_rate must be nonzero".into()));
    }
    if p.steps == 0 || p.vehicles == 0 {
        return Err(Error::InvalidParams("steps and vehicles must be positive".into()));
    }
    let truth = (0..p.steps)
        .map(|k| {
            let t = k as f64 * p.dt;
            let mut pos = Positions::zeros(p.vehicles, 3);
            for v in 0..p.vehicles {
                // vehicles behind the leader hold the start point until their turn
                let lag = v as f64 * p.phase_spacing / p.angular_rate.abs();
                let tv = (t - lag).max(0.0);
                let th = p.angular_rate * tv;
                pos.node_mut(v)
                    .copy_from_slice(&[p.radius * th.cos(), p.radius * th.sin(), -p.descent_rate * tv]);
            }
            pos
        })
        .collect();
    assemble("spiral", truth, 3, p.dt, p.anchors, p.anchor_margin, false)
}

/// Parameters of the boustrophedon survey.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LawnmowerParams {
    pub swath_length: f64,
    pub lane_spacing: f64,
    pub lanes: usize,
    pub speed: f64,
    pub vehicles: usize,
    /// Along-track gap between consecutive vehicles, meters.
    pub vehicle_gap: f64,
    pub dt: f64,
    pub anchors: usize,
    pub anchor_margin: f64,
}

impl Default for LawnmowerParams {
    fn default() -> Self {
        LawnmowerParams {
            swath_length: 30.0,
            lane_spacing: 5.0,
            lanes: 5,
            speed: 0.5,
            vehicles: 1,
            vehicle_gap: 3.0,
            dt: 1.0,
            anchors: 6,
            anchor_margin: 5.0,
        }
    }
}

impl LawnmowerParams {
    /// Lanes plus semicircular U-turns.
    pub fn path_length(&self) -> f64 {
        self.lanes as f64 * self.swath_length + self.lanes.saturating_sub(1) as f64 * PI * self.lane_spacing / 2.0
    }

    /// Number of samples needed to cover the path at the nominal speed.
    pub fn steps(&self) -> usize {
        (self.path_length() / (self.speed * self.dt)).floor() as usize + 1
    }

    /// Point at arc length `s`. Negative `s` lies on the approach line west
    /// of the first lane; `s` past the end stays at the end point.
    pub fn point_at(&self, s: f64) -> [f64; 2] {
        if s < 0.0 {
            return [s, 0.0];
        }
        let s = s.min(self.path_length());
        let rho = self.lane_spacing / 2.0;
        let turn = PI * rho;
        let per = self.swath_length + turn;
        let mut lane = (s / per).floor() as usize;
        let mut rem = s - lane as f64 * per;
        if lane >= self.lanes {
            lane = self.lanes - 1;
            rem = self.swath_length;
        }
        let y0 = lane as f64 * self.lane_spacing;
        let eastbound = lane % 2 == 0;
        if rem <= self.swath_length || lane + 1 == self.lanes {
            let x = if eastbound { rem } else { self.swath_length - rem };
            return [x, y0];
        }
        // U-turn from the end of this lane to the start of the next
        let th = (rem - self.swath_length) / rho;
        let cy = y0 + rho;
        if eastbound {
            [self.swath_length + rho * th.sin(), cy - rho * th.cos()]
        } else {
            [-rho * th.sin(), cy - rho * th.cos()]
        }
    }
}

pub fn gen_lawnmower(params: &LawnmowerParams) -> Result<Scenario> {
    let p = params;
    check_positive("swath_length", p.swath_length)?;
    check_positive("lane_spacing", p.lane_spacing)?;
    check_positive("speed", p.speed)?;
    check_positive("dt", p.dt)?;
    check_nonneg("vehicle_gap", p.vehicle_gap)?;
    check_nonneg("anchor_margin", p.anchor_margin)?;
    if p.lanes == 0 || p.vehicles == 0 {
        return Err(Error::InvalidParams("lanes and vehicles must be positive".into()));
    }
    let steps = p.steps();
    let truth = (0..steps)
        .map(|k| {
            let s = k as f64 * p.speed * p.dt;
            let mut pos = Positions::zeros(p.vehicles, 2);
            for v in 0..p.vehicles {
                let pt = p.point_at(s - v as f64 * p.vehicle_gap);
                pos.node_mut(v).copy_from_slice(&pt);
            }
            pos
        })
        .collect();
    // south-west corner is the first anchor placed
    assemble("lawnmower", truth, 2, p.dt, p.anchors, p.anchor_margin, true)
}

fn assemble(
    name: &str,
    truth: Vec<Positions>,
    dim: usize,
    dt: f64,
    anchors: usize,
    margin: f64,
    sw_outlier: bool,
) -> Result<Scenario> {
    let bb = BoundingBox::around(truth.iter().flat_map(|pos| pos.nodes()))
        .expect("nonempty trajectory")
        .inflate(margin);
    let anchor_pos = place_anchors(&bb, anchors, dim)?;
    let n = truth[0].n_nodes();
    let graph = NetworkGraph::complete(n, dim, anchor_pos)?;
    let outlier = if sw_outlier { Some(0) } else { None };
    Scenario::new(name, graph, truth, dt)?.finish(outlier)
}

/// Deterministic anchor layout framing `bbox`.
///
/// With at least `2^p` anchors the box corners come first (south-west first,
/// counter-clockwise, bottom face before top face in 3D); the rest are spread
/// over the box edges, longest edges first, equally spaced along each edge.
/// With fewer anchors than corners, a simplex enclosing the box is used and
/// any leftover anchors take the remaining corners.
pub fn place_anchors(bbox: &BoundingBox, count: usize, dim: usize) -> Result<Vec<Vec<f64>>> {
    if dim != 2 && dim != 3 {
        return Err(Error::BadDimension(dim));
    }
    if bbox.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bbox.dim(),
        });
    }
    if count < dim + 1 {
        return Err(Error::TooFewAnchors {
            needed: dim + 1,
            got: count,
            p: dim,
        });
    }
    let corners = box_corners(bbox);
    if count < corners.len() {
        let total: f64 = (0..dim).map(|d| bbox.extent(d)).sum::<f64>().max(1e-9);
        let mut out = vec![bbox.min.clone()];
        for d in 0..dim {
            let mut v = bbox.min.clone();
            v[d] += total;
            out.push(v);
        }
        out.extend(corners.into_iter().skip(1).take(count - out.len()));
        return Ok(out);
    }

    let mut edges: Vec<(usize, usize)> = if dim == 2 {
        vec![(0, 1), (1, 2), (2, 3), (3, 0)]
    } else {
        vec![
            (0, 1),
            (1, 2),
            (2, 3),
            (3, 0),
            (4, 5),
            (5, 6),
            (6, 7),
            (7, 4),
            (0, 4),
            (1, 5),
            (2, 6),
            (3, 7),
        ]
    };
    let elen = |&(a, b): &(usize, usize)| crate::geometry::distance(&corners[a], &corners[b]);
    edges.sort_by(|e1, e2| elen(e2).partial_cmp(&elen(e1)).unwrap());

    let extras = count - corners.len();
    let mut per_edge = vec![0usize; edges.len()];
    for e in 0..extras {
        per_edge[e % edges.len()] += 1;
    }
    let mut out = corners.clone();
    for (edge, &q) in edges.iter().zip(&per_edge) {
        let (a, b) = (&corners[edge.0], &corners[edge.1]);
        for j in 1..=q {
            let f = j as f64 / (q + 1) as f64;
            out.push(a.iter().zip(b).map(|(x, y)| x + f * (y - x)).collect());
        }
    }
    Ok(out)
}

fn box_corners(bb: &BoundingBox) -> Vec<Vec<f64>> {
    let (lo, hi) = (&bb.min, &bb.max);
    let face = |z: Option<f64>| {
        let mut pts = vec![
            vec![lo[0], lo[1]],
            vec![hi[0], lo[1]],
            vec![hi[0], hi[1]],
            vec![lo[0], hi[1]],
        ];
        if let Some(z) = z {
            pts.iter_mut().for_each(|p| p.push(z));
        }
        pts
    };
    if bb.dim() == 2 {
        face(None)
    } else {
        let mut c = face(Some(lo[2]));
        c.extend(face(Some(hi[2])));
        c
    }
}

/// Scenario family selector used by configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Lap,
    Spiral,
    Lawnmower,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lap" => Ok(ScenarioKind::Lap),
            "spiral" => Ok(ScenarioKind::Spiral),
            "lawnmower" => Ok(ScenarioKind::Lawnmower),
            other => Err(Error::Parse(format!("unknown scenario kind '{other}'"))),
        }
    }
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Lap => "lap",
            ScenarioKind::Spiral => "spiral",
            ScenarioKind::Lawnmower => "lawnmower",
        }
    }

    pub fn generate_default(self) -> Result<Scenario> {
        match self {
            ScenarioKind::Lap => gen_lap(&LapParams::default()),
            ScenarioKind::Spiral => gen_spiral(&SpiralParams::default()),
            ScenarioKind::Lawnmower => gen_lawnmower(&LawnmowerParams::default()),
        }
    }

    /// Generates from a TOML parameter table (missing keys keep their
    /// defaults), then applies the vehicle and anchor count overrides.
    pub fn generate_with(self, params: &str, vehicles: Option<usize>, anchors: Option<usize>) -> Result<Scenario> {
        let mut table: toml::Table = toml::from_str(params).map_err(|e| Error::Parse(e.to_string()))?;
        if let Some(v) = vehicles {
            table.insert("vehicles".into(), toml::Value::Integer(v as i64));
        }
        if let Some(a) = anchors {
            table.insert("anchors".into(), toml::Value::Integer(a as i64));
        }
        let parse = |e: toml::de::Error| Error::Parse(e.to_string());
        match self {
            ScenarioKind::Lap => gen_lap(&table.try_into().map_err(parse)?),
            ScenarioKind::Spiral => gen_spiral(&table.try_into().map_err(parse)?),
            ScenarioKind::Lawnmower => gen_lawnmower(&table.try_into().map_err(parse)?),
        }
    }
}

/// Metadata file written next to `trajectory.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub name: String,
    pub dt: f64,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlier_anchor: Option<usize>,
    pub graph: GraphConfig,
}

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SCENARIO_META_FILE: &str = "scenario.toml";

impl Scenario {
    /// CSV with columns `step,node_id,x,y[,z]`.
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from(if self.dim() == 2 {
            "step,node_id,x,y\n"
        } else {
            "step,node_id,x,y,z\n"
        });
        for (k, pos) in self.truth.iter().enumerate() {
            for (i, pt) in pos.nodes().enumerate() {
                let _ = write!(out, "{},{}", k + 1, i);
                for v in pt {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn meta(&self) -> ScenarioMeta {
        ScenarioMeta {
            name: self.name.clone(),
            dt: self.dt,
            steps: self.steps(),
            outlier_anchor: self.outlier_anchor,
            graph: self.graph.to_config(),
        }
    }

    /// Writes `trajectory.csv` and `scenario.toml` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join(TRAJECTORY_FILE), self.trajectory_csv())?;
        let meta = toml::to_string(&self.meta()).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(dir.join(SCENARIO_META_FILE), meta)?;
        Ok(())
    }

    /// Loads a scenario from a directory or from its `scenario.toml`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (meta_path, dir): (PathBuf, PathBuf) = if path.is_dir() {
            (path.join(SCENARIO_META_FILE), path.to_path_buf())
        } else {
            (
                path.to_path_buf(),
                path.parent().map(Path::to_path_buf).unwrap_or_default(),
            )
        };
        let meta: ScenarioMeta =
            toml::from_str(&fs::read_to_string(&meta_path)?).map_err(|e| Error::Parse(e.to_string()))?;
        let graph = meta.graph.build()?;
        let csv = fs::read_to_string(dir.join(TRAJECTORY_FILE))?;
        let truth = parse_trajectory_csv(&csv, meta.steps, graph.n_nodes(), graph.dim())?;
        let mut sc = Scenario::new(meta.name, graph, truth, meta.dt)?;
        if let Some(a) = meta.outlier_anchor {
            if a >= sc.graph.n_anchors() {
                return Err(Error::AnchorOutOfRange {
                    index: a,
                    m: sc.graph.n_anchors(),
                });
            }
        }
        sc.outlier_anchor = meta.outlier_anchor;
        Ok(sc)
    }
}

fn parse_trajectory_csv(text: &str, steps: usize, n: usize, dim: usize) -> Result<Vec<Positions>> {
    let mut truth = vec![Positions::zeros(n, dim); steps];
    let mut seen = vec![false; steps * n];
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(format!("trajectory: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = || Error::Parse(format!("trajectory line {line}: {record:?}"));
        if record.len() != 2 + dim {
            return Err(bad());
        }
        let k: usize = record[0].parse().map_err(|_| bad())?;
        let i: usize = record[1].parse().map_err(|_| bad())?;
        if k == 0 || k > steps || i >= n {
            return Err(bad());
        }
        for d in 0..dim {
            truth[k - 1].node_mut(i)[d] = record[2 + d].parse().map_err(|_| bad())?;
        }
        seen[(k - 1) * n + i] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Parse(format!(
            "trajectory misses step {} node {}",
            missing / n + 1,
            missing % n
        )));
    }
    Ok(truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance;

    #[test]
    fn lap_defaults() {
        let sc = gen_lap(&LapParams::default()).unwrap();
        assert_eq!(sc.n_nodes(), 3);
        assert_eq!(sc.dim(), 2);
        assert_eq!(sc.steps(), 260);
        assert_eq!(sc.graph.n_anchors(), 12);
        assert!(sc.truth_in_anchor_hull());
        assert_eq!(sc.graph.edges().len(), 3);
    }

    #[test]
    fn lap_straight_spacing_equals_speed_dt() {
        let params = LapParams {
            slowdown_factor: 1.0,
            speed: 0.7,
            dt: 0.5,
            steps: 40,
            ..LapParams::default()
        };
        let sc = gen_lap(&params).unwrap();
        // the bottom straight is 20 m long; 0.35 m per step keeps steps 1..=57 on it
        for k in 0..39 {
            for v in 0..3 {
                let d = distance(sc.truth[k].node(v), sc.truth[k + 1].node(v));
                assert!((d - 0.35).abs() < 1e-9, "step {k} vehicle {v}: {d}");
            }
        }
    }

    #[test]
    fn lap_never_exceeds_nominal_speed() {
        let params = LapParams::default();
        let sc = gen_lap(&params).unwrap();
        for w in sc.truth.windows(2) {
            for v in 0..3 {
                let d = distance(w[0].node(v), w[1].node(v));
                assert!(d <= params.speed * params.dt + 1e-9);
            }
        }
    }

    #[test]
    fn lap_slowdown_reduces_speed_near_marker() {
        let sc = gen_lap(&LapParams::default()).unwrap();
        let mid = 1;
        let near = sc
            .truth
            .windows(2)
            .filter(|w| distance(w[0].node(mid), &[-17.07, -7.07]) < 2.0)
            .map(|w| distance(w[0].node(mid), w[1].node(mid)))
            .fold(0.0, f64::max);
        assert!(near > 0.0 && near < 0.5 * 0.3 + 1e-9, "{near}");
    }

    #[test]
    fn lap_rejects_bad_params() {
        for bad in [
            LapParams {
                speed: 0.0,
                ..Default::default()
            },
            LapParams {
                dt: -1.0,
                ..Default::default()
            },
            LapParams {
                steps: 0,
                ..Default::default()
            },
        ] {
            assert!(matches!(gen_lap(&bad), Err(Error::InvalidParams(_))));
        }
    }

    #[test]
    fn spiral_descends_on_helix() {
        let params = SpiralParams::default();
        let sc = gen_spiral(&params).unwrap();
        assert_eq!(sc.dim(), 3);
        assert_eq!(sc.graph.n_anchors(), 16);
        assert!(sc.truth_in_anchor_hull());
        for w in sc.truth.windows(2) {
            assert!(w[1].node(0)[2] < w[0].node(0)[2]);
        }
        for pos in &sc.truth {
            let pt = pos.node(0);
            assert!((pt[0].hypot(pt[1]) - params.radius).abs() < 1e-9);
        }
    }

    #[test]
    fn spiral_without_descent_is_a_circle() {
        let sc = gen_spiral(&SpiralParams {
            descent_rate: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert!(sc.truth.iter().all(|pos| pos.node(0)[2] == 0.0));
    }

    #[test]
    fn lawnmower_length_and_sw_anchor() {
        let params = LawnmowerParams {
            lanes: 4,
            ..Default::default()
        };
        let expected = 4.0 * 30.0 + 3.0 * PI * 2.5;
        assert!((params.path_length() - expected).abs() < 1e-6);
        // integrate the sampled path finely
        let n = 200_000;
        let len = params.path_length();
        let mut acc = 0.0;
        let mut prev = params.point_at(0.0);
        for i in 1..=n {
            let cur = params.point_at(len * i as f64 / n as f64);
            acc += distance(&prev, &cur);
            prev = cur;
        }
        assert!((acc - expected).abs() < 1e-6, "{acc} vs {expected}");

        let sc = gen_lawnmower(&LawnmowerParams::default()).unwrap();
        let sw = sc.outlier_anchor.unwrap();
        let bb = sc.anchor_box();
        assert_eq!(sc.graph.anchor(sw), bb.min.as_slice());
        assert_eq!(sc.graph.n_anchors(), 6);
    }

    #[test]
    fn single_lane_is_straight() {
        let sc = gen_lawnmower(&LawnmowerParams {
            lanes: 1,
            ..Default::default()
        })
        .unwrap();
        assert!(sc.truth.iter().all(|pos| pos.node(0)[1] == 0.0));
        let last = sc.truth.last().unwrap().node(0)[0];
        assert!((last - 30.0).abs() < 1e-9);
    }

    #[test]
    fn anchors_unit_square_and_counts() {
        let sq = BoundingBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(
            place_anchors(&sq, 4, 2).unwrap(),
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]
        );
        let wide = BoundingBox::new(vec![0.0, 0.0], vec![4.0, 2.0]).unwrap();
        let six = place_anchors(&wide, 6, 2).unwrap();
        assert_eq!(&six[4..], &[vec![2.0, 0.0], vec![2.0, 2.0]]);

        let cube = BoundingBox::new(vec![0.0; 3], vec![2.0, 2.0, 1.0]).unwrap();
        let sixteen = place_anchors(&cube, 16, 3).unwrap();
        assert_eq!(sixteen.len(), 16);
        // extras are midpoints of the 8 longest (horizontal) edges
        for pt in &sixteen[8..] {
            assert!(pt[2] == 0.0 || pt[2] == 1.0);
            assert!(pt[0] == 1.0 || pt[1] == 1.0);
        }
        assert!(matches!(place_anchors(&sq, 2, 2), Err(Error::TooFewAnchors { .. })));
    }

    #[test]
    fn few_anchors_enclose_the_box() {
        let bb = BoundingBox::new(vec![0.0, 0.0], vec![3.0, 1.0]).unwrap();
        let tri = place_anchors(&bb, 3, 2).unwrap();
        // the triangle x >= 0, y >= 0, x + y <= 4 contains the box
        assert_eq!(tri, vec![vec![0.0, 0.0], vec![4.0, 0.0], vec![0.0, 4.0]]);
    }

    #[test]
    fn save_and_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let sc = gen_lawnmower(&LawnmowerParams::default()).unwrap();
        sc.save(dir.path()).unwrap();
        let back = Scenario::load(dir.path()).unwrap();
        assert_eq!(back, sc);
        let via_file = Scenario::load(dir.path().join(SCENARIO_META_FILE)).unwrap();
        assert_eq!(via_file, sc);
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(
            gen_lap(&LapParams::default()).unwrap(),
            gen_lap(&LapParams::default()).unwrap()
        );
    }
}
