//! Local extrema shared by the heuristic, the peak-min feature and the decoder.
//!
//! A sample is a local maximum when its left neighbour is strictly smaller
//! and the first differing sample to its right is strictly smaller too. Flat
//! runs (plateaus) report their first sample. The first and last samples are
//! never extrema.

use std::cmp::Ordering;

fn local_extrema(values: &[f64], want: Ordering) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    let mut i = 1;
    while i + 1 < n {
        if values[i].partial_cmp(&values[i - 1]) != Some(want) {
            i += 1;
            continue;
        }
        // walk the plateau
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        if j + 1 < n && values[i].partial_cmp(&values[j + 1]) == Some(want) {
            out.push(i);
        }
        i = j + 1;
    }
    out
}

/// Indices of local maxima (plateau-first rule).
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    local_extrema(values, Ordering::Greater)
}

/// Indices of local minima (plateau-first rule).
pub fn local_minima(values: &[f64]) -> Vec<usize> {
    local_extrema(values, Ordering::Less)
}

/// Keep the most prominent candidates so that no two kept indices are closer
/// than `min_distance`. Candidates are visited from the best value down
/// (`larger_is_better` selects maxima or minima); ties go to the earlier index.
/// The result is sorted by index.
pub fn enforce_spacing(
    values: &[f64],
    candidates: &[usize],
    min_distance: usize,
    larger_is_better: bool,
) -> Vec<usize> {
    let mut order: Vec<usize> = candidates.to_vec();
    order.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        let ord = if larger_is_better { ord.reverse() } else { ord };
        ord.then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::with_capacity(order.len());
    for c in order {
        if kept.iter().all(|&k| k.abs_diff(c) >= min_distance) {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    kept
}
