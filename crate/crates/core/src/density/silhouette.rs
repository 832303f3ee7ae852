use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

pub(crate) fn pairwise_distances(data: ArrayView2<f64>) -> Array2<f64> {
    let n = data.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = data.row(i);
            (0..n)
                .map(|j| {
                    a.iter()
                        .zip(data.row(j))
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect();
    Array2::from_shape_vec((n, n), rows.concat()).expect("square")
}

/// Mean silhouette over all points given a precomputed distance matrix.
/// Points alone in their cluster contribute 0. `None` when fewer than two
/// clusters are populated.
pub(crate) fn silhouette_from_distances(dist: &Array2<f64>, labels: &[usize]) -> Option<f64> {
    let n = labels.len();
    let k = labels.iter().copied().max()? + 1;
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return None;
    }
    let per_point: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0f64; k];
            for (j, &l) in labels.iter().enumerate() {
                sums[l] += dist[[i, j]];
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .collect();
    Some(per_point.iter().sum::<f64>() / n as f64)
}

/// Mean Euclidean silhouette of a labelled point set.
pub fn silhouette_score(data: ArrayView2<f64>, labels: &[usize]) -> Option<f64> {
    assert_eq!(data.nrows(), labels.len(), "one label per row");
    silhouette_from_distances(&pairwise_distances(data), labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn hand_computed_four_points() {
        // clusters {0, 1} and {4, 6} on a line
        let data = array![[0.0], [1.0], [4.0], [6.0]];
        let labels = [0, 0, 1, 1];
        // point 0: a=1, b=(4+6)/2=5 -> 0.8
        // point 1: a=1, b=(3+5)/2=4 -> 0.75
        // point 4: a=2, b=(4+3)/2=3.5 -> 1.5/3.5
        // point 6: a=2, b=(6+5)/2=5.5 -> 3.5/5.5
        let expected = (0.8 + 0.75 + 1.5 / 3.5 + 3.5 / 5.5) / 4.0;
        let s = silhouette_score(data.view(), &labels).unwrap();
        assert!((s - expected).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_is_undefined() {
        let data = array![[0.0], [1.0]];
        assert_eq!(silhouette_score(data.view(), &[0, 0]), None);
    }

    #[test]
    fn singleton_cluster_contributes_zero() {
        let data = array![[0.0], [1.0], [10.0]];
        // point 0: a=1, b=10 -> 0.9; point 1: a=1, b=9 -> 8/9; point 10: 0
        let expected = (0.9 + 8.0 / 9.0) / 3.0;
        let s = silhouette_score(data.view(), &[0, 0, 1]).unwrap();
        assert!((s - expected).abs() < 1e-12);
    }
}
