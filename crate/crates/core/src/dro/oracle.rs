use super::{AmbiguitySet, MaxAffineLoss, SUPPORT_TOL};
use crate::error::{Error, Result};

/// Discrete worst-case expectation over transport plans onto a finite grid.
///
/// ```text
/// max  (1/N) Σᵢ Σⱼ qᵢⱼ ℓ(ζⱼ)
/// s.t. Σⱼ qᵢⱼ = 1,  qᵢⱼ >= 0,  (1/N) Σᵢⱼ qᵢⱼ ‖ζⱼ − ξ̂ᵢ‖₁ <= ε
/// ```
///
/// The atoms `ζ` are the grid points inside the support plus the samples
/// themselves. With a single coupling row the LP is a fractional knapsack:
/// each sample contributes the upper concave envelope of its
/// `(cost, loss)` cloud, and budget is spent greedily on the steepest
/// envelope segments. No LP solver is involved.
pub fn transport_lp_oracle(loss: &MaxAffineLoss, amb: &AmbiguitySet, grid: &[Vec<f64>]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Data("transport oracle needs a non-empty grid".into()));
    }
    if !loss.is_numeric() {
        return Err(Error::Construction("transport oracle needs a numeric loss".into()));
    }
    if loss.dim() != amb.dim() || grid.iter().any(|g| g.len() != amb.dim()) {
        return Err(Error::Dimension("grid, loss and ambiguity set must share one dimension".into()));
    }
    let data = amb.data();
    let atoms: Vec<&[f64]> = grid
        .iter()
        .map(Vec::as_slice)
        .filter(|z| amb.support().contains(z, SUPPORT_TOL))
        .chain(data.rows().iter().map(Vec::as_slice))
        .collect();
    let values: Vec<f64> = atoms.iter().map(|z| loss.eval(z, &[])).collect();
    let n = data.len() as f64;

    let mut base = 0.0;
    // (slope, cost length) of every envelope segment, all samples pooled
    let mut segments: Vec<(f64, f64)> = Vec::new();
    for xi in data.rows() {
        let start = loss.eval(xi, &[]);
        base += start;
        let mut cloud: Vec<(f64, f64)> = atoms
            .iter()
            .zip(&values)
            .map(|(z, &v)| (z.iter().zip(xi).map(|(a, b)| (a - b).abs()).sum::<f64>(), v))
            .collect();
        cloud.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));

        let mut hull: Vec<(f64, f64)> = vec![(0.0, start)];
        let mut best = start;
        for &(c, v) in &cloud {
            if v <= best {
                continue;
            }
            best = v;
            while hull.len() >= 2 {
                let (c1, v1) = hull[hull.len() - 2];
                let (c2, v2) = hull[hull.len() - 1];
                // drop the middle point when it lies on or below the chord
                if (v2 - v1) * (c - c1) <= (v - v1) * (c2 - c1) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push((c, v));
        }
        for w in hull.windows(2) {
            let (dc, dv) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            segments.push((dv / dc, dc));
        }
    }
    segments.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut budget = amb.radius();
    let mut gain = 0.0;
    for (slope, len) in segments {
        if budget <= 0.0 {
            break;
        }
        let spend = budget.min(len / n);
        gain += slope * spend;
        budget -= spend;
    }
    Ok(base / n + gain)
}

/// Regular grid over the box `[lo, hi]` with spacing `step` per axis.
/// Coordinates are `lo + k·step`, computed from the integer index so grids
/// with decimal steps hit decimal points as closely as floats allow.
pub fn box_grid(lo: &[f64], hi: &[f64], step: f64) -> Result<Vec<Vec<f64>>> {
    if !(step > 0.0) || lo.len() != hi.len() || lo.is_empty() {
        return Err(Error::Data("box grid needs matching bounds and a positive step".into()));
    }
    let counts: Vec<usize> = lo
        .iter()
        .zip(hi)
        .map(|(l, h)| if h >= l { ((h - l) / step + 1e-9).floor() as usize + 1 } else { 0 })
        .collect();
    let total: usize = counts.iter().product();
    if total == 0 {
        return Err(Error::Data("box grid bounds are inverted".into()));
    }
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; lo.len()];
    loop {
        out.push(idx.iter().zip(lo).map(|(&k, l)| l + k as f64 * step).collect());
        let mut axis = 0;
        loop {
            if axis == idx.len() {
                return Ok(out);
            }
            idx[axis] += 1;
            if idx[axis] < counts[axis] {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}
