//! Two-user rate regions: convex hull with free time sharing.

/// Convex hull (counter-clockwise, no collinear points) by monotone chain.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Hull of the points together with their axis projections and the origin,
/// i.e. everything reachable by time sharing and rate reduction.
pub fn region_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut all = vec![(0.0, 0.0)];
    for &(x, y) in points {
        all.push((x.max(0.0), y.max(0.0)));
        all.push((x.max(0.0), 0.0));
        all.push((0.0, y.max(0.0)));
    }
    convex_hull(&all)
}

/// Hull vertices other than the origin, from the user-2 axis to the user-1
/// axis.
pub fn upper_right_boundary(hull: &[(f64, f64)]) -> Vec<(f64, f64)> {
    hull.iter().rev().copied().filter(|p| !(p.0 == 0.0 && p.1 == 0.0)).collect()
}

/// Whether `p` lies in the convex polygon `hull` (counter-clockwise) grown
/// by `slack`.
pub fn hull_contains(hull: &[(f64, f64)], p: (f64, f64), slack: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => ((p.0 - hull[0].0).powi(2) + (p.1 - hull[0].1).powi(2)).sqrt() <= slack,
        2 => segment_distance(hull[0], hull[1], p) <= slack,
        n => (0..n).all(|i| {
            let a = hull[i];
            let b = hull[(i + 1) % n];
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            cross / len >= -slack
        }),
    }
}

fn segment_distance(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let l2 = dx * dx + dy * dy;
    let t = if l2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((a.0 + t * dx - p.0).powi(2) + (a.1 + t * dy - p.1).powi(2)).sqrt()
}

/// Largest distance by which a vertex of `inner` sticks out of `outer`.
pub fn max_excursion(outer: &[(f64, f64)], inner: &[(f64, f64)]) -> f64 {
    inner
        .iter()
        .map(|&p| {
            let n = outer.len();
            (0..n)
                .map(|i| {
                    let a = outer[i];
                    let b = outer[(i + 1) % n];
                    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
                    -((b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)) / len
                })
                .fold(0.0_f64, f64::max)
        })
        .fold(0.0, f64::max)
}
