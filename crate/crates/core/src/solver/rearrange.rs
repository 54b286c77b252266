use serde::Serialize;

/// Decreasing rearrangement of `|x|` with its tail sums.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rearrangement {
    /// `|x|` sorted descending; ties keep ascending original index.
    pub r: Vec<f64>,
    /// Original index of each entry of `r`.
    pub order: Vec<usize>,
    tails: Vec<f64>,
}

impl Rearrangement {
    /// `sigma_j(x)_1 = sum_{i > j} r_i` (1-based `i`), for `0 <= j <= N`.
    pub fn sigma_tail(&self, j: usize) -> f64 {
        self.tails[j]
    }
}

pub fn rearrange(x: &[f64]) -> Rearrangement {
    let mut order: Vec<usize> = (0..x.len()).collect();
    // Stable sort keeps index order among equal magnitudes.
    order.sort_by(|&i, &j| x[j].abs().total_cmp(&x[i].abs()));
    let r: Vec<f64> = order.iter().map(|&i| x[i].abs()).collect();
    let mut tails = vec![0.0; r.len() + 1];
    for j in (0..r.len()).rev() {
        tails[j] = tails[j + 1] + r[j];
    }
    Rearrangement { r, order, tails }
}

/// `r(x)_{s+1}`, the `(s+1)`-th largest magnitude (zero when `s >= N`).
pub fn tail_magnitude(x: &[f64], s: usize) -> f64 {
    if s >= x.len() {
        return 0.0;
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let (_, kth, _) = mags.select_nth_unstable_by(s, |a, b| b.total_cmp(a));
    *kth
}
