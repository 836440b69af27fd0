use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::Point;

/// Sector boresights of every site, counter-clockwise from +x.
pub const SECTOR_BORESIGHTS_DEG: [f64; 3] = [30.0, 150.0, 270.0];

/// Hexagonal site cluster tiled toroidally by two lattice vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub isd_m: f64,
    pub sites: Vec<Point>,
    /// Cluster translation vectors, 60° apart.
    pub lattice: [Point; 2],
}

impl Layout {
    /// Supports 1, 7 or 19 sites (0, 1 or 2 rings around the center).
    pub fn hexagonal(site_count: usize, isd_m: f64) -> Result<Self, SimError> {
        let (rings, (i, j)) = match site_count {
            1 => (0, (1.0, 0.0)),
            7 => (1, (2.0, 1.0)),
            19 => (2, (3.0, 2.0)),
            n => {
                return Err(SimError::Config(format!(
                    "wraparound layouts need 1, 7 or 19 sites, got {n}"
                )))
            }
        };
        if !(isd_m > 0.0) {
            return Err(SimError::Config("inter-site distance must be positive".into()));
        }
        let e1 = Point::new(isd_m, 0.0);
        let e2 = Point::new(isd_m * 0.5, isd_m * 3f64.sqrt() / 2.0);
        let axial = |q: i32, r: i32| Point::new(q as f64 * e1.x + r as f64 * e2.x, q as f64 * e1.y + r as f64 * e2.y);

        let mut sites = vec![Point::new(0.0, 0.0)];
        for ring in 1..=rings {
            // Walk the hexagonal ring starting due east, counter-clockwise.
            let dirs = [(-1, 1), (-1, 0), (0, -1), (1, -1), (1, 0), (0, 1)];
            let (mut q, mut r) = (ring, 0);
            for (dq, dr) in dirs {
                for _ in 0..ring {
                    sites.push(axial(q, r));
                    q += dq;
                    r += dr;
                }
            }
        }
        let t1 = Point::new(i * e1.x + j * e2.x, i * e1.y + j * e2.y);
        let (s, c) = 60f64.to_radians().sin_cos();
        let t2 = Point::new(t1.x * c - t1.y * s, t1.x * s + t1.y * c);
        Ok(Self {
            isd_m,
            sites,
            lattice: [t1, t2],
        })
    }

    fn images(&self) -> impl Iterator<Item = Point> + '_ {
        let [t1, t2] = self.lattice;
        (-1..=1).flat_map(move |a| {
            (-1..=1).map(move |b| Point::new(a as f64 * t1.x + b as f64 * t2.x, a as f64 * t1.y + b as f64 * t2.y))
        })
    }

    /// Shortest displacement from `site` to any lattice image of `p`.
    pub fn wrap_vector(&self, site: Point, p: Point) -> Point {
        let base = Point::new(p.x - site.x, p.y - site.y);
        let reduced = self.reduce(base);
        self.images()
            .map(|t| Point::new(reduced.x + t.x, reduced.y + t.y))
            .min_by(|a, b| (a.x.hypot(a.y)).total_cmp(&b.x.hypot(b.y)))
            .unwrap_or(reduced)
    }

    pub fn wrap_distance(&self, site: Point, p: Point) -> f64 {
        let v = self.wrap_vector(site, p);
        v.x.hypot(v.y)
    }

    /// Folds `v` to within about one cluster of the origin using lattice
    /// coordinates.
    fn reduce(&self, v: Point) -> Point {
        let [t1, t2] = self.lattice;
        let det = t1.x * t2.y - t1.y * t2.x;
        let a = ((v.x * t2.y - v.y * t2.x) / det).round();
        let b = ((t1.x * v.y - t1.y * v.x) / det).round();
        Point::new(v.x - a * t1.x - b * t2.x, v.y - a * t1.y - b * t2.y)
    }

    /// A point is inside the cluster when its nearest site over all images
    /// is an untranslated one.
    pub fn contains(&self, p: Point) -> bool {
        let direct = self.sites.iter().map(|s| s.distance(p)).fold(f64::INFINITY, f64::min);
        let wrapped = self
            .sites
            .iter()
            .map(|&s| self.wrap_distance(s, p))
            .fold(f64::INFINITY, f64::min);
        direct <= wrapped + 1e-9
    }

    /// Axis-aligned box enclosing the cluster.
    pub fn bounds(&self) -> (Point, Point) {
        let margin = self.isd_m / 3f64.sqrt();
        let (mut lo, mut hi) = (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for s in &self.sites {
            lo = Point::new(lo.x.min(s.x - margin), lo.y.min(s.y - margin));
            hi = Point::new(hi.x.max(s.x + margin), hi.y.max(s.y + margin));
        }
        (lo, hi)
    }

    /// Corner vectors of the rhombus served by a sector at `boresight_deg`.
    pub fn sector_corners(&self, boresight_deg: f64) -> (Point, Point) {
        let r = self.isd_m / 3f64.sqrt();
        let at = |deg: f64| {
            let (s, c) = deg.to_radians().sin_cos();
            Point::new(r * c, r * s)
        };
        (at(boresight_deg - 60.0), at(boresight_deg + 60.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_site_cluster() {
        let l = Layout::hexagonal(7, 500.0).unwrap();
        assert_eq!(l.sites.len(), 7);
        for s in &l.sites[1..] {
            assert!((s.distance(Point::new(0.0, 0.0)) - 500.0).abs() < 1e-9);
        }
        let t = l.lattice[0];
        assert!((t.x.hypot(t.y) - 500.0 * 7f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn nineteen_site_cluster_is_distinct() {
        let l = Layout::hexagonal(19, 500.0).unwrap();
        assert_eq!(l.sites.len(), 19);
        for (i, a) in l.sites.iter().enumerate() {
            for b in &l.sites[i + 1..] {
                assert!(a.distance(*b) > 499.0);
            }
        }
        assert!(Layout::hexagonal(5, 500.0).is_err());
    }

    #[test]
    fn wrap_distance_is_lattice_periodic() {
        let l = Layout::hexagonal(7, 500.0).unwrap();
        let p = Point::new(612.0, -180.0);
        for site in &l.sites {
            let d0 = l.wrap_distance(*site, p);
            for t in l.lattice {
                let q = Point::new(p.x + t.x, p.y + t.y);
                assert!((l.wrap_distance(*site, q) - d0).abs() < 1e-9);
            }
            assert!(d0 <= site.distance(p) + 1e-9);
        }
    }

    #[test]
    fn far_points_are_outside() {
        let l = Layout::hexagonal(7, 500.0).unwrap();
        assert!(l.contains(Point::new(10.0, 10.0)));
        assert!(!l.contains(Point::new(1400.0, 0.0)));
    }
}
