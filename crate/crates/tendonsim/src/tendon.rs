//! Tendon routing over the shoulder rig and arc-length evaluation.
//!
//! A tendon is an ordered chain of routing elements, each pinned to the torso or
//! to the humerus. At a given pose the world positions of the chain are computed
//! with the rigid shoulder kinematics and the cable length is the arc length of
//! the path threaded through them, under one of three path policies:
//!
//! * `Polyline` treats the chain as straight segments.
//! * `Spline` threads a natural cubic spline through the points (chord-length
//!   parameterization) and integrates its speed with adaptive, bisecting
//!   Simpson quadrature including the Richardson correction term.
//! * `SphereWrap` is the polyline with every segment that would cut through the
//!   joint sphere replaced by the tangent-arc-tangent detour around it.

use std::sync::OnceLock;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{transform_point, Frame, GeometryError, JointPose, ShoulderModel};

/// Canonical tendon order used across datasets, sensor frames and reports.
pub const TENDON_NAMES: [&str; 4] = ["F", "SF", "SR", "R"];

/// Default relative tolerance for spline arc-length refinement.
pub const DEFAULT_SPLINE_REL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum TendonError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("a path needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("tendon {tendon}: needs at least 2 routing elements, got {count}")]
    TooFewElements { tendon: String, count: usize },
    #[error("tendon {tendon}: duplicate element id {id}")]
    DuplicateElementId { tendon: String, id: String },
    #[error("tendon {tendon}: element {id} has a non-finite coordinate")]
    NonFinitePosition { tendon: String, id: String },
    #[error(
        "tendon {tendon}: humerus element {id} sits {distance_mm:.1} mm from the center, beyond the {arm_length_mm:.1} mm arm"
    )]
    HumerusElementBeyondArm {
        tendon: String,
        id: String,
        distance_mm: f64,
        arm_length_mm: f64,
    },
    #[error("layout must contain exactly the tendons F, SF, SR, R; found {found:?}")]
    WrongTendonNames { found: Vec<String> },
    #[error("unknown tendon {0}")]
    UnknownTendon(String),
    #[error("path has two coincident consecutive points (segment {segment})")]
    DegenerateSegment { segment: usize },
    #[error("path endpoint lies inside the joint sphere (distance {distance_mm:.3} mm < radius {radius_mm:.3} mm)")]
    EndpointInsideSphere { distance_mm: f64, radius_mm: f64 },
}

/// One guide, anchor or insertion point on a tendon's route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingElement {
    pub id: String,
    pub frame: Frame,
    pub local_position_mm: [f64; 3],
}

impl RoutingElement {
    pub fn position(&self) -> Point3<f64> {
        Point3::new(
            self.local_position_mm[0],
            self.local_position_mm[1],
            self.local_position_mm[2],
        )
    }
}

/// How the cable is threaded through the routed points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathPolicy {
    Polyline,
    #[default]
    Spline,
    SphereWrap,
}

/// A named tendon: its ordered routing chain and path policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TendonPath {
    pub name: String,
    pub elements: Vec<RoutingElement>,
    #[serde(default)]
    pub path_policy: PathPolicy,
}

/// The full rig: shoulder dimensions plus the four tendons F, SF, SR, R.
#[derive(Debug, Clone, PartialEq)]
pub struct TendonLayout {
    pub model: ShoulderModel,
    pub tendons: Vec<TendonPath>,
}

#[derive(Deserialize)]
struct LayoutFile {
    model: ShoulderModel,
    tendons: Vec<TendonPath>,
}

static DEFAULT_LAYOUT: OnceLock<TendonLayout> = OnceLock::new();

/// The built-in four-tendon routing, embedded as data.
pub fn default_layout() -> &'static TendonLayout {
    DEFAULT_LAYOUT.get_or_init(|| {
        let file: LayoutFile = toml::from_str(include_str!("../data/default_layout.toml"))
            .expect("embedded layout parses");
        TendonLayout::from_parts(file.model, file.tendons).expect("embedded layout is valid")
    })
}

impl TendonLayout {
    /// Builds and validates a layout.
    pub fn from_parts(model: ShoulderModel, tendons: Vec<TendonPath>) -> Result<Self, TendonError> {
        let layout = Self { model, tendons };
        layout.validate()?;
        Ok(layout)
    }

    /// The built-in four-tendon routing, embedded as data.
    pub fn default_layout() -> &'static TendonLayout {
        default_layout()
    }

    pub fn tendon(&self, name: &str) -> Option<&TendonPath> {
        self.tendons.iter().find(|t| t.name == name)
    }

    pub fn validate(&self) -> Result<(), TendonError> {
        self.model.validate()?;
        let found: Vec<String> = self.tendons.iter().map(|t| t.name.clone()).collect();
        let mut sorted: Vec<&str> = found.iter().map(String::as_str).collect();
        sorted.sort_unstable();
        let mut expect: Vec<&str> = TENDON_NAMES.to_vec();
        expect.sort_unstable();
        if sorted != expect {
            return Err(TendonError::WrongTendonNames { found });
        }
        for tendon in &self.tendons {
            if tendon.elements.len() < 2 {
                return Err(TendonError::TooFewElements {
                    tendon: tendon.name.clone(),
                    count: tendon.elements.len(),
                });
            }
            for (i, el) in tendon.elements.iter().enumerate() {
                if !el.local_position_mm.iter().all(|v| v.is_finite()) {
                    return Err(TendonError::NonFinitePosition {
                        tendon: tendon.name.clone(),
                        id: el.id.clone(),
                    });
                }
                if tendon.elements[..i].iter().any(|other| other.id == el.id) {
                    return Err(TendonError::DuplicateElementId {
                        tendon: tendon.name.clone(),
                        id: el.id.clone(),
                    });
                }
                if el.frame == Frame::Humerus {
                    let distance = (el.position() - self.model.center()).norm();
                    if distance > self.model.arm_length_mm {
                        return Err(TendonError::HumerusElementBeyondArm {
                            tendon: tendon.name.clone(),
                            id: el.id.clone(),
                            distance_mm: distance,
                            arm_length_mm: self.model.arm_length_mm,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// World positions of a tendon's routing chain at `pose`.
pub fn path_points(
    model: &ShoulderModel,
    tendon: &TendonPath,
    pose: &JointPose,
) -> Vec<Point3<f64>> {
    tendon
        .elements
        .iter()
        .map(|el| transform_point(model, pose, el.frame, &el.position()))
        .collect()
}

/// Sum of straight segment lengths.
pub fn polyline_length(points: &[Point3<f64>]) -> Result<f64, TendonError> {
    if points.len() < 2 {
        return Err(TendonError::TooFewPoints(points.len()));
    }
    Ok(points.windows(2).map(|w| (w[1] - w[0]).norm()).sum())
}

/// Natural cubic spline through the points (chord-length knots), integrated per
/// segment with adaptive Simpson bisection; recursion stops when the Richardson
/// error estimate drops under `rel_tol` scaled by the segment chord.
pub fn spline_arc_length(points: &[Point3<f64>], rel_tol: f64) -> Result<f64, TendonError> {
    let spline = NaturalSpline3::fit(points)?;
    let rel_tol = rel_tol.max(1e-14);
    let mut total = 0.0;
    for seg in 0..spline.segments() {
        let h = spline.h[seg];
        let f = |tau: f64| spline.speed(seg, tau);
        let fa = f(0.0);
        let fm = f(0.5 * h);
        let fb = f(h);
        let whole = h / 6.0 * (fa + 4.0 * fm + fb);
        let tol = rel_tol * spline.h[seg].max(1e-9);
        total += adaptive_simpson(&f, 0.0, h, fa, fm, fb, whole, tol, 40);
    }
    Ok(total)
}

/// Polyline length with segments that would cut through the sphere replaced by
/// the shortest tangent-arc-tangent detour in the segment's plane through the
/// center. Segments that merely touch or pass outside are left straight.
pub fn sphere_wrap_length(
    center: &Point3<f64>,
    radius: f64,
    points: &[Point3<f64>],
) -> Result<f64, TendonError> {
    if points.len() < 2 {
        return Err(TendonError::TooFewPoints(points.len()));
    }
    let mut total = 0.0;
    for w in points.windows(2) {
        total += wrap_segment(center, radius, &w[0], &w[1])?;
    }
    Ok(total)
}

fn wrap_segment(
    center: &Point3<f64>,
    radius: f64,
    a: &Point3<f64>,
    b: &Point3<f64>,
) -> Result<f64, TendonError> {
    let straight = (b - a).norm();
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((center - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let closest = a + t * ab;
    if (closest - center).norm() >= radius {
        return Ok(straight);
    }
    let va = a - center;
    let vb = b - center;
    let da = va.norm();
    let db = vb.norm();
    let slack = 1e-9 * radius.max(1.0);
    for d in [da, db] {
        if d < radius - slack {
            return Err(TendonError::EndpointInsideSphere {
                distance_mm: d,
                radius_mm: radius,
            });
        }
    }
    let da = da.max(radius);
    let db = db.max(radius);
    let gamma = (va.dot(&vb) / (da * db)).clamp(-1.0, 1.0).acos();
    let arc = gamma - (radius / da).clamp(-1.0, 1.0).acos() - (radius / db).clamp(-1.0, 1.0).acos();
    if arc <= 0.0 {
        Ok(straight)
    } else {
        Ok((da * da - radius * radius).sqrt() + radius * arc + (db * db - radius * radius).sqrt())
    }
}

/// Arc length of `points` under `policy`. The model supplies the wrap sphere.
pub fn arc_length(
    model: &ShoulderModel,
    points: &[Point3<f64>],
    policy: PathPolicy,
) -> Result<f64, TendonError> {
    match policy {
        PathPolicy::Polyline => polyline_length(points),
        PathPolicy::Spline => spline_arc_length(points, DEFAULT_SPLINE_REL_TOL),
        PathPolicy::SphereWrap => {
            sphere_wrap_length(&model.center(), model.sphere_radius_mm, points)
        }
    }
}

/// Cable length of a named tendon at `pose`.
pub fn tendon_length(
    layout: &TendonLayout,
    name: &str,
    pose: &JointPose,
) -> Result<f64, TendonError> {
    let tendon = layout
        .tendon(name)
        .ok_or_else(|| TendonError::UnknownTendon(name.to_string()))?;
    let points = path_points(&layout.model, tendon, pose);
    arc_length(&layout.model, &points, tendon.path_policy)
}

/// Cubic polynomials per segment for each coordinate, natural end conditions.
struct NaturalSpline3 {
    h: Vec<f64>,
    b: Vec<[f64; 3]>,
    c: Vec<[f64; 3]>,
    d: Vec<[f64; 3]>,
}

impl NaturalSpline3 {
    fn fit(points: &[Point3<f64>]) -> Result<Self, TendonError> {
        let n = points.len();
        if n < 2 {
            return Err(TendonError::TooFewPoints(n));
        }
        let mut h = Vec::with_capacity(n - 1);
        for (i, w) in points.windows(2).enumerate() {
            let chord = (w[1] - w[0]).norm();
            if chord <= 1e-12 {
                return Err(TendonError::DegenerateSegment { segment: i });
            }
            h.push(chord);
        }
        let y: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        // Second derivatives m[i] per coordinate; natural conditions pin the ends
        // to zero, the interior follows from a tridiagonal system (Thomas solve).
        let mut m = vec![[0.0; 3]; n];
        if n > 2 {
            let rows = n - 2;
            let mut diag = vec![0.0; rows];
            let mut rhs = vec![[0.0; 3]; rows];
            for i in 0..rows {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                for k in 0..3 {
                    rhs[i][k] = 6.0
                        * ((y[i + 2][k] - y[i + 1][k]) / h[i + 1] - (y[i + 1][k] - y[i][k]) / h[i]);
                }
            }
            // Forward elimination: sub-diagonal h[i], super-diagonal h[i+1].
            for i in 1..rows {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * h[i];
                for k in 0..3 {
                    rhs[i][k] -= w * rhs[i - 1][k];
                }
            }
            for k in 0..3 {
                m[rows][k] = rhs[rows - 1][k] / diag[rows - 1];
            }
            for i in (0..rows - 1).rev() {
                for k in 0..3 {
                    m[i + 1][k] = (rhs[i][k] - h[i + 1] * m[i + 2][k]) / diag[i];
                }
            }
        }
        let mut b = Vec::with_capacity(n - 1);
        let mut c = Vec::with_capacity(n - 1);
        let mut d = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let mut bi = [0.0; 3];
            let mut ci = [0.0; 3];
            let mut di = [0.0; 3];
            for k in 0..3 {
                bi[k] = (y[i + 1][k] - y[i][k]) / h[i] - h[i] * (2.0 * m[i][k] + m[i + 1][k]) / 6.0;
                ci[k] = m[i][k] / 2.0;
                di[k] = (m[i + 1][k] - m[i][k]) / (6.0 * h[i]);
            }
            b.push(bi);
            c.push(ci);
            d.push(di);
        }
        Ok(Self { h, b, c, d })
    }

    fn segments(&self) -> usize {
        self.h.len()
    }

    fn speed(&self, seg: usize, tau: f64) -> f64 {
        let b = &self.b[seg];
        let c = &self.c[seg];
        let d = &self.d[seg];
        let mut s = 0.0;
        for k in 0..3 {
            let v = b[k] + tau * (2.0 * c[k] + 3.0 * d[k] * tau);
            s += v * v;
        }
        s.sqrt()
    }
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let refined = left + right;
    let err = (refined - whole) / 15.0;
    if depth == 0 || err.abs() <= tol {
        refined + err
    } else {
        adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}
