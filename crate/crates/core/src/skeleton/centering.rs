//! Ray-cast centering of a polyline inside a tubular surface.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::visibility::Bvh;

const RAYS: usize = 16;
const FIT_ROUNDS: usize = 3;
/// Ends stop once forward clearance exceeds radial clearance by less than
/// this fraction of the radial clearance.
const END_TOLERANCE: f64 = 0.003;
const MAX_END_STEPS: usize = 10_000;

fn plane_basis(d: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let e = if d.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let u = d.cross(&e).normalize();
    (u, d.cross(&u))
}

/// Hits of `RAYS` equally spaced rays in the plane through `p` normal to `d`,
/// in plane coordinates. `None` if any ray escapes.
fn plane_hits(
    bvh: &Bvh,
    p: &Point3<f64>,
    basis: &(Vector3<f64>, Vector3<f64>),
) -> Option<Vec<(f64, f64)>> {
    (0..RAYS)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / RAYS as f64;
            let (c, s) = (a.cos(), a.sin());
            let hit = bvh.raycast(p, &(c * basis.0 + s * basis.1))?;
            Some((hit.t * c, hit.t * s))
        })
        .collect()
}

/// Algebraic least-squares circle center of 2D points.
fn fit_circle(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let mut m = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (x, y) in pts {
        let (x, y) = (x - mx, y - my);
        let row = Vector3::new(x, y, 1.0);
        m += row * row.transpose();
        rhs += row * (x * x + y * y);
    }
    let sol = m.lu().solve(&rhs)?;
    let (cx, cy) = (sol.x / 2.0, sol.y / 2.0);
    let r2 = sol.z + cx * cx + cy * cy;
    (r2 > 0.0).then(|| (cx + mx, cy + my, r2.sqrt()))
}

/// Move `p` within the plane normal to `d` to the center of the fitted
/// cross-section. Returns the new point and the fitted radius.
pub fn center_in_plane(bvh: &Bvh, p: &Point3<f64>, d: &Vector3<f64>) -> Option<(Point3<f64>, f64)> {
    let basis = plane_basis(d);
    let mut q = *p;
    let mut radius = 0.0;
    for _ in 0..FIT_ROUNDS {
        let hits = plane_hits(bvh, &q, &basis)?;
        let (cx, cy, r) = fit_circle(&hits)?;
        q += cx * basis.0 + cy * basis.1;
        radius = r;
    }
    Some((q, radius))
}

fn tangent(points: &[Point3<f64>], i: usize) -> Option<Vector3<f64>> {
    let n = points.len();
    let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
    (points[b] - points[a]).try_normalize(1e-15)
}

/// Recenter every point in its normal plane. Points whose cross-section
/// cannot be measured are kept.
pub fn recenter_polyline(points: &[Point3<f64>], bvh: &Bvh) -> Vec<Point3<f64>> {
    (0..points.len())
        .map(|i| {
            tangent(points, i)
                .filter(|_| bvh.contains(&points[i]))
                .and_then(|d| center_in_plane(bvh, &points[i], &d))
                .map_or(points[i], |(q, _)| q)
        })
        .collect()
}

fn mean_radial(bvh: &Bvh, p: &Point3<f64>, d: &Vector3<f64>) -> Option<f64> {
    let hits = plane_hits(bvh, p, &plane_basis(d))?;
    Some(hits.iter().map(|(x, y)| x.hypot(*y)).sum::<f64>() / hits.len() as f64)
}

/// Stop recentered tracking this many radial clearances before the end, so
/// centering planes never reach into the end cap.
const TRACK_MARGIN: f64 = 0.5;
/// Arc length, in radial clearances, of the tail used to fit the end.
const TAIL_WINDOW: f64 = 1.5;
const EXTRAPOLATION_STEP: f64 = 0.05;

/// Smooth model of a polyline tail parameterized by arc length `u` from
/// its last point (`u ≤ 0` on the data): a least-squares circle, or a
/// quadratic when the tail is too straight for a stable circle.
#[derive(Debug, Clone, Copy)]
enum TailFit {
    Circle {
        center: Point3<f64>,
        e1: Vector3<f64>,
        e2: Vector3<f64>,
        rho: f64,
        theta0: f64,
        sign: f64,
    },
    Quadratic {
        a: Vector3<f64>,
        b: Vector3<f64>,
        c: Vector3<f64>,
    },
}

impl TailFit {
    fn fit(points: &[Point3<f64>], window: f64) -> Option<Self> {
        let n = points.len();
        if n < 2 {
            return None;
        }
        let mut u = vec![0.0; n];
        for i in (0..n - 1).rev() {
            u[i] = u[i + 1] - (points[i + 1] - points[i]).norm();
        }
        let mut first = n - 1;
        while first > 0 && (u[first] > -window || n - first < 4) {
            first -= 1;
        }
        let tail = &points[first..];
        let span = -u[first];
        if tail.len() < 3 {
            let b = (points[n - 1] - points[n - 2]).try_normalize(1e-15)?;
            return Some(Self::Quadratic {
                a: points[n - 1].coords,
                b,
                c: Vector3::zeros(),
            });
        }
        Self::fit_circle(tail, span).or_else(|| Self::fit_quadratic(tail, &u[first..]))
    }

    fn fit_circle(tail: &[Point3<f64>], span: f64) -> Option<Self> {
        if tail.len() < 4 {
            return None;
        }
        let k = tail.len() as f64;
        let mean = tail.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / k;
        let mut cov = Matrix3::zeros();
        for p in tail {
            let d = p.coords - mean;
            cov += d * d.transpose();
        }
        let eig = cov.symmetric_eigen();
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        // Too straight: the bending direction is lost in noise.
        if eig.eigenvalues[idx[1]] <= 1e-10 * eig.eigenvalues[idx[0]] {
            return None;
        }
        let e1: Vector3<f64> = eig.eigenvectors.column(idx[0]).into_owned();
        let e2: Vector3<f64> = eig.eigenvectors.column(idx[1]).into_owned();
        let planar: Vec<(f64, f64)> = tail
            .iter()
            .map(|p| ((p.coords - mean).dot(&e1), (p.coords - mean).dot(&e2)))
            .collect();
        let (cx, cy, rho) = fit_circle(&planar)?;
        if !(rho < 100.0 * span) {
            return None;
        }
        let center = Point3::from(mean + cx * e1 + cy * e2);
        let angle = |p: &Point3<f64>| (p - center).dot(&e2).atan2((p - center).dot(&e1));
        let last = tail.len() - 1;
        let (t0, t1) = (angle(&tail[last - 1]), angle(&tail[last]));
        let mut dt = t1 - t0;
        if dt > std::f64::consts::PI {
            dt -= std::f64::consts::TAU;
        } else if dt < -std::f64::consts::PI {
            dt += std::f64::consts::TAU;
        }
        let sign = if dt >= 0.0 { 1.0 } else { -1.0 };
        Some(Self::Circle {
            center,
            e1,
            e2,
            rho,
            theta0: t1,
            sign,
        })
    }

    fn fit_quadratic(tail: &[Point3<f64>], u: &[f64]) -> Option<Self> {
        let mut m = Matrix3::zeros();
        let mut rhs = Matrix3::<f64>::zeros();
        for (p, &ui) in tail.iter().zip(u) {
            let row = Vector3::new(1.0, ui, ui * ui);
            m += row * row.transpose();
            rhs += row * p.coords.transpose();
        }
        let sol = m.lu().solve(&rhs)?;
        let (a, b, c) = (
            sol.row(0).transpose(),
            sol.row(1).transpose(),
            sol.row(2).transpose(),
        );
        Some(Self::Quadratic { a, b, c })
    }

    fn at(&self, u: f64) -> Option<(Point3<f64>, Vector3<f64>)> {
        match *self {
            Self::Circle {
                center,
                e1,
                e2,
                rho,
                theta0,
                sign,
            } => {
                let th = theta0 + sign * u / rho;
                let p = center + rho * (th.cos() * e1 + th.sin() * e2);
                let t = sign * (-th.sin() * e1 + th.cos() * e2);
                Some((p, t))
            }
            Self::Quadratic { a, b, c } => {
                let t = (b + 2.0 * u * c).try_normalize(1e-15)?;
                Some((Point3::from(a + u * b + u * u * c), t))
            }
        }
    }
}

fn end_gap(bvh: &Bvh, p: &Point3<f64>, d: &Vector3<f64>) -> Option<(f64, f64)> {
    let forward = bvh.raycast(p, d)?.t;
    let radial = mean_radial(bvh, p, d)?;
    Some((forward - radial, radial))
}

fn track_end(points: &mut Vec<Point3<f64>>, bvh: &Bvh) {
    let Some(first) = points.last().and_then(|p| mean_radial_any(bvh, points, p)) else {
        return;
    };
    let window = TAIL_WINDOW * first;

    for _ in 0..MAX_END_STEPS {
        let Some(fit) = TailFit::fit(points, window) else {
            return;
        };
        let p = *points.last().unwrap();
        let Some((_, d)) = fit.at(0.0) else { return };
        let Some((gap, radial)) = end_gap(bvh, &p, &d) else {
            return;
        };
        if gap <= (TRACK_MARGIN + END_TOLERANCE) * radial {
            break;
        }
        let step = (gap - TRACK_MARGIN * radial).min(0.25 * radial);
        let Some((guess, nd)) = fit.at(step) else {
            return;
        };
        let Some((q, _)) = center_in_plane(bvh, &guess, &nd) else {
            return;
        };
        points.push(q);
    }

    // Final stretch: extrapolate the fitted tail and find where forward
    // clearance meets radial clearance.
    let Some(fit) = TailFit::fit(points, window) else {
        return;
    };
    let Some((c, d)) = fit.at(0.0) else { return };
    let Some((g0, r0)) = end_gap(bvh, &c, &d) else {
        return;
    };
    let tol = END_TOLERANCE * r0;
    if g0 <= tol {
        return;
    }
    let gap_at = |u: f64| {
        fit.at(u)
            .and_then(|(p, t)| end_gap(bvh, &p, &t).map(|(g, _)| g))
    };
    let (mut lo, mut hi) = (0.0, None);
    let mut u = 0.0;
    while u < g0 + r0 {
        u += EXTRAPOLATION_STEP * r0;
        match gap_at(u) {
            Some(g) if g > tol => lo = u,
            _ => {
                hi = Some(u);
                break;
            }
        }
    }
    let Some(mut hi) = hi else { return };
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        match gap_at(mid) {
            Some(g) if g > tol => lo = mid,
            _ => hi = mid,
        }
    }
    if let Some((end, _)) = fit.at(hi) {
        points.push(end);
    }
}

fn mean_radial_any(bvh: &Bvh, points: &[Point3<f64>], p: &Point3<f64>) -> Option<f64> {
    let n = points.len();
    let d = (points[n - 1] - points[n.saturating_sub(2)]).try_normalize(1e-15)?;
    mean_radial(bvh, p, &d)
}

/// Walk both ends outward along the tube, recentering as they go, until
/// the largest inscribed ball touches the end wall.
pub fn track_ends(points: &mut Vec<Point3<f64>>, bvh: &Bvh) {
    if points.len() < 2 {
        return;
    }
    track_end(points, bvh);
    points.reverse();
    track_end(points, bvh);
    points.reverse();
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_fit_extrapolates_a_parabola() {
        let pts: Vec<_> = (0..20)
            .map(|i| {
                let x = i as f64 * 0.01;
                Point3::new(x, 0.5 * x * x, 0.0)
            })
            .collect();
        let fit = TailFit::fit(&pts, 0.1).unwrap();
        let (p, _) = fit.at(0.0).unwrap();
        assert!((p - pts[19]).norm() < 1e-3);
    }

    #[test]
    fn tail_fit_continues_a_circle() {
        let on = |a: f64| Point3::new(0.15 * a.cos(), 0.15 * a.sin(), 0.2);
        let pts: Vec<_> = (0..12).map(|i| on(0.04 * i as f64)).collect();
        let fit = TailFit::fit(&pts, 1.0).unwrap();
        let (p, t) = fit.at(0.15 * 0.1).unwrap();
        assert!((p - on(0.54)).norm() < 1e-9);
        assert!((t - Vector3::new(-0.54f64.sin(), 0.54f64.cos(), 0.0)).norm() < 1e-9);
    }

    #[test]
    fn tail_fit_on_a_line_is_a_line() {
        let pts: Vec<_> = (0..6)
            .map(|i| Point3::new(0.0, 0.01 * i as f64, 0.0))
            .collect();
        let (p, t) = TailFit::fit(&pts, 1.0).unwrap().at(0.02).unwrap();
        assert!((p - Point3::new(0.0, 0.07, 0.0)).norm() < 1e-12);
        assert!((t - Vector3::y()).norm() < 1e-12);
    }

    #[test]
    fn circle_fit_recovers_partial_arc() {
        let pts: Vec<_> = (0..7)
            .map(|k| {
                let a = 0.3 * k as f64;
                (2.0 + 1.5 * a.cos(), -1.0 + 1.5 * a.sin())
            })
            .collect();
        let (cx, cy, r) = fit_circle(&pts).unwrap();
        assert!((cx - 2.0).abs() < 1e-12 && (cy + 1.0).abs() < 1e-12 && (r - 1.5).abs() < 1e-12);
    }
}
