//! Planar segment predicates: clipping, intersection, and the half-open box
//! membership rule shared by assumption checks and the coarse mesh.

/// Tolerance for near-zero cross products in the intersection predicates.
pub const COLLINEAR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Segment {
    pub fn length(&self) -> f64 {
        let dx = self.b[0] - self.a[0];
        let dy = self.b[1] - self.a[1];
        (dx * dx + dy * dy).sqrt()
    }

    pub fn point_at(&self, t: f64) -> [f64; 2] {
        [
            self.a[0] + t * (self.b[0] - self.a[0]),
            self.a[1] + t * (self.b[1] - self.a[1]),
        ]
    }
}

fn cross(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ax * by - ay * bx
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentRelation {
    Disjoint,
    /// Proper or touching intersection at parameters `(t, u)` on the two
    /// segments respectively.
    Crossing { t: f64, u: f64 },
    /// Collinear with overlapping extent (degenerate for random inputs).
    CollinearOverlap,
}

/// Classifies the relation between two segments. Parallel non-collinear
/// segments are disjoint; collinear segments overlapping by more than the
/// epsilon are reported so callers can reject them.
pub fn intersect(p: &Segment, q: &Segment) -> SegmentRelation {
    let rx = p.b[0] - p.a[0];
    let ry = p.b[1] - p.a[1];
    let sx = q.b[0] - q.a[0];
    let sy = q.b[1] - q.a[1];
    let denom = cross(rx, ry, sx, sy);
    let qpx = q.a[0] - p.a[0];
    let qpy = q.a[1] - p.a[1];
    let scale = (rx.abs() + ry.abs()).max(sx.abs() + sy.abs()).max(1e-300);

    if denom.abs() <= COLLINEAR_EPS * scale * scale {
        // Parallel. Collinear iff q.a lies on the line through p.
        if cross(qpx, qpy, rx, ry).abs() > COLLINEAR_EPS * scale * scale {
            return SegmentRelation::Disjoint;
        }
        let r2 = rx * rx + ry * ry;
        if r2 == 0.0 {
            return SegmentRelation::Disjoint;
        }
        let t0 = (qpx * rx + qpy * ry) / r2;
        let t1 = t0 + (sx * rx + sy * ry) / r2;
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        if hi < -COLLINEAR_EPS || lo > 1.0 + COLLINEAR_EPS {
            return SegmentRelation::Disjoint;
        }
        return SegmentRelation::CollinearOverlap;
    }

    let t = cross(qpx, qpy, sx, sy) / denom;
    let u = cross(qpx, qpy, rx, ry) / denom;
    if (-COLLINEAR_EPS..=1.0 + COLLINEAR_EPS).contains(&t)
        && (-COLLINEAR_EPS..=1.0 + COLLINEAR_EPS).contains(&u)
    {
        SegmentRelation::Crossing {
            t: t.clamp(0.0, 1.0),
            u: u.clamp(0.0, 1.0),
        }
    } else {
        SegmentRelation::Disjoint
    }
}

/// Clips a segment to the unit square (Liang–Barsky). Returns the surviving
/// part, or `None` if the segment lies entirely outside.
pub fn clip_to_unit_square(seg: &Segment) -> Option<Segment> {
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    let dx = seg.b[0] - seg.a[0];
    let dy = seg.b[1] - seg.a[1];
    let checks = [
        (-dx, seg.a[0]),        // x >= 0
        (dx, 1.0 - seg.a[0]),   // x <= 1
        (-dy, seg.a[1]),        // y >= 0
        (dy, 1.0 - seg.a[1]),   // y <= 1
    ];
    for (p, q) in checks {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
            continue;
        }
        let r = q / p;
        if p < 0.0 {
            if r > t1 {
                return None;
            }
            if r > t0 {
                t0 = r;
            }
        } else {
            if r < t0 {
                return None;
            }
            if r < t1 {
                t1 = r;
            }
        }
    }
    if t0 >= t1 {
        return None;
    }
    let clipped = Segment {
        a: snap_to_square(seg.point_at(t0)),
        b: snap_to_square(seg.point_at(t1)),
    };
    if clipped.length() <= 0.0 {
        None
    } else {
        Some(clipped)
    }
}

/// Places points computed on the square boundary exactly onto it so boundary
/// predicates like `x1 == 0` select them.
fn snap_to_square(p: [f64; 2]) -> [f64; 2] {
    let snap = |v: f64| {
        if v.abs() < 1e-12 {
            0.0
        } else if (v - 1.0).abs() < 1e-12 {
            1.0
        } else {
            v.clamp(0.0, 1.0)
        }
    };
    [snap(p[0]), snap(p[1])]
}

/// Membership in the box of half-width `radius` around `center`: half-open
/// per dimension, closed on upper faces that reach the domain boundary.
pub fn box_contains(center: &[f64], radius: f64, point: &[f64]) -> bool {
    for (c, p) in center.iter().zip(point) {
        let lo = c - radius;
        let hi = c + radius;
        if *p < lo {
            return false;
        }
        if *p >= hi && !(hi >= 1.0 && *p <= 1.0) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_segments_meet_at_parameters() {
        let p = Segment {
            a: [0.0, 0.0],
            b: [1.0, 1.0],
        };
        let q = Segment {
            a: [0.0, 1.0],
            b: [1.0, 0.0],
        };
        match intersect(&p, &q) {
            SegmentRelation::Crossing { t, u } => {
                assert!((t - 0.5).abs() < 1e-14);
                assert!((u - 0.5).abs() < 1e-14);
            }
            other => panic!("expected crossing, got {other:?}"),
        }
    }

    #[test]
    fn parallel_segments_are_disjoint() {
        let p = Segment {
            a: [0.0, 0.0],
            b: [1.0, 0.0],
        };
        let q = Segment {
            a: [0.0, 0.5],
            b: [1.0, 0.5],
        };
        assert_eq!(intersect(&p, &q), SegmentRelation::Disjoint);
    }

    #[test]
    fn collinear_overlap_is_detected() {
        let p = Segment {
            a: [0.0, 0.0],
            b: [1.0, 0.0],
        };
        let q = Segment {
            a: [0.5, 0.0],
            b: [1.5, 0.0],
        };
        assert_eq!(intersect(&p, &q), SegmentRelation::CollinearOverlap);
        let far = Segment {
            a: [2.0, 0.0],
            b: [3.0, 0.0],
        };
        assert_eq!(intersect(&p, &far), SegmentRelation::Disjoint);
    }

    #[test]
    fn touching_endpoint_counts_as_crossing() {
        let p = Segment {
            a: [0.0, 0.0],
            b: [1.0, 0.0],
        };
        let q = Segment {
            a: [0.5, 0.0],
            b: [0.5, 1.0],
        };
        match intersect(&p, &q) {
            SegmentRelation::Crossing { t, u } => {
                assert!((t - 0.5).abs() < 1e-14);
                assert!(u.abs() < 1e-14);
            }
            other => panic!("expected touching crossing, got {other:?}"),
        }
    }

    #[test]
    fn clip_keeps_interior_part() {
        let seg = Segment {
            a: [-0.5, 0.5],
            b: [0.5, 0.5],
        };
        let clipped = clip_to_unit_square(&seg).unwrap();
        assert_eq!(clipped.a, [0.0, 0.5]);
        assert_eq!(clipped.b, [0.5, 0.5]);
        assert!(clip_to_unit_square(&Segment {
            a: [-0.5, -0.5],
            b: [-0.1, -0.4],
        })
        .is_none());
    }

    #[test]
    fn half_open_box_rule() {
        // Interior upper face excluded, lower face included.
        assert!(box_contains(&[0.25, 0.25], 0.25, &[0.0, 0.0]));
        assert!(!box_contains(&[0.25, 0.25], 0.25, &[0.5, 0.25]));
        // Upper face on the domain boundary included.
        assert!(box_contains(&[0.75, 0.75], 0.25, &[1.0, 0.75]));
    }
}
