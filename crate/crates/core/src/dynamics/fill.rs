//! Line-by-line polynomial extrapolation into masked grid points.

use crate::grid::{FieldValue, Grid};
use crate::scalar::{count, from_i64, Real};

/// Overwrites `values` wherever `known` is false. Axes are swept in order;
/// along each grid line an unknown point takes the polynomial of degree at
/// most `degree` (lower if fewer known points are available) through the
/// nearest run of known points, and counts as known for later axes.
/// `jumps[k]` is the offset gained per forward traversal of periodic axis `k`.
pub(crate) fn extrapolate<T: Real>(grid: &Grid<T>, values: &mut [T], known: &[bool], jumps: &[T], degree: usize) {
    let mut known = known.to_vec();
    if known.iter().all(|&k| k) || !known.iter().any(|&k| k) {
        return;
    }
    let mut line_vals = Vec::new();
    let mut line_known = Vec::new();
    for axis in 0..grid.dim() {
        let n = grid.shape()[axis];
        let stride = grid.strides()[axis];
        let periodic = grid.axis(axis).periodic;
        for start in 0..grid.len() {
            if grid.index_along(start, axis) != 0 {
                continue;
            }
            line_vals.clear();
            line_known.clear();
            for i in 0..n {
                line_vals.push(values[start + i * stride]);
                line_known.push(known[start + i * stride]);
            }
            if line_known.iter().all(|&k| k) || !line_known.iter().any(|&k| k) {
                continue;
            }
            let filled = fill_line(&line_vals, &line_known, periodic, jumps[axis], degree.min(2) + 1);
            for (i, v) in filled.into_iter().enumerate() {
                if let Some(v) = v {
                    values[start + i * stride] = v;
                    known[start + i * stride] = true;
                }
            }
        }
    }
}

/// Extrapolated values for the unknown points of one line.
fn fill_line<T: Real>(vals: &[T], known: &[bool], periodic: bool, jump: T, taps: usize) -> Vec<Option<T>> {
    let n = vals.len() as i64;
    let at = |p: i64| -> Option<T> {
        if periodic {
            let j = p.rem_euclid(n) as usize;
            known[j].then(|| vals[j].shift(jump, p.div_euclid(n)))
        } else if (0..n).contains(&p) && known[p as usize] {
            Some(vals[p as usize])
        } else {
            None
        }
    };
    let reach = if periodic { n } else { 0 };
    // Distance to the nearest known point on each side.
    let mut left = vec![None; n as usize];
    let mut last = None;
    for p in -reach..n {
        if at(p).is_some() {
            last = Some(p);
        }
        if p >= 0 {
            left[p as usize] = last.map(|q| p - q);
        }
    }
    let mut right = vec![None; n as usize];
    last = None;
    for p in (0..n + reach).rev() {
        if at(p).is_some() {
            last = Some(p);
        }
        if p < n {
            right[p as usize] = last.map(|q| q - p);
        }
    }
    let from_side = |target: i64, d: i64, dir: i64| -> T {
        let mut pts = Vec::with_capacity(taps);
        for k in 0..taps as i64 {
            if k >= n - 1 {
                break;
            }
            match at(target + dir * (d + k)) {
                Some(v) => pts.push(v),
                None => break,
            }
        }
        let d = from_i64::<T>(d);
        let one = T::one();
        let two = count::<T>(2);
        match pts.len() {
            1 => pts[0],
            2 => (d + one) * pts[0] - d * pts[1],
            _ => {
                (d + one) * (d + two) / two * pts[0] - d * (d + two) * pts[1] + d * (d + one) / two * pts[2]
            }
        }
    };
    (0..n)
        .map(|p| {
            if known[p as usize] {
                return None;
            }
            match (left[p as usize], right[p as usize]) {
                (Some(l), Some(r)) if l == r => {
                    Some((from_side(p, l, -1) + from_side(p, r, 1)) / count::<T>(2))
                }
                (Some(l), Some(r)) if l < r => Some(from_side(p, l, -1)),
                (_, Some(r)) => Some(from_side(p, r, 1)),
                (Some(l), None) => Some(from_side(p, l, -1)),
                (None, None) => None,
            }
        })
        .collect()
}
