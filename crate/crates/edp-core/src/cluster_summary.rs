//! Point summary of the posterior partition: co-clustering counts,
//! supremum-norm distances between count rows, Ward agglomeration and a
//! cut at the posterior median number of clusters.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Dense square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Copy> SquareMatrix<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

/// `M[i, j]` counts the snapshots in which subjects `i` and `j` share a
/// cluster label.
pub fn coclustering_matrix(partitions: &[Vec<usize>]) -> Result<SquareMatrix<u32>> {
    let n = partitions.first().map_or(0, |p| p.len());
    if let Some((s, p)) = partitions.iter().enumerate().find(|(_, p)| p.len() != n) {
        return Err(Error::LengthMismatch {
            subject: format!("snapshot {s}"),
            detail: format!("has {} labels, expected {n}", p.len()),
        });
    }
    let max_label = partitions.iter().flatten().copied().max().unwrap_or(0);
    Ok(if max_label < u16::MAX as usize {
        count_equal::<u16>(partitions, n)
    } else {
        count_equal::<u32>(partitions, n)
    })
}

// Transposes to one label column per subject so each pair is a straight
// element-wise comparison of two contiguous vectors.
fn count_equal<T>(partitions: &[Vec<usize>], n: usize) -> SquareMatrix<u32>
where
    T: Copy + PartialEq + Default + TryFrom<usize>,
{
    let s = partitions.len();
    let mut cols = vec![T::default(); n * s];
    for (k, p) in partitions.iter().enumerate() {
        for (i, &l) in p.iter().enumerate() {
            cols[i * s + k] = T::try_from(l).ok().expect("label fits the column type");
        }
    }
    let mut data = vec![0u32; n * n];
    for i in 0..n {
        data[i * n + i] = s as u32;
        let a = &cols[i * s..(i + 1) * s];
        for j in i + 1..n {
            let b = &cols[j * s..(j + 1) * s];
            let c = a.iter().zip(b).filter(|(x, y)| x == y).count() as u32;
            data[i * n + j] = c;
            data[j * n + i] = c;
        }
    }
    SquareMatrix { n, data }
}

/// `D[i, j] = max_l |M[i, l] − M[j, l]|`.
pub fn supremum_distance(m: &SquareMatrix<u32>) -> SquareMatrix<f64> {
    let n = m.n();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let a = m.row(i);
        for j in i + 1..n {
            let b = m.row(j);
            let d = a.iter().zip(b).map(|(&x, &y)| x.abs_diff(y)).max().unwrap_or(0) as f64;
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    SquareMatrix { n, data }
}

/// One agglomeration step. Clusters are named by their smallest member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

/// Ward linkage on unsquared input distances (the `ward.D2` variant): the
/// Lance–Williams recurrence runs on squared distances and merge heights
/// are reported on the input scale. Ties go to the pair whose smallest
/// members are lexicographically first.
pub fn ward_linkage(d: &SquareMatrix<f64>) -> Vec<Merge> {
    let n = d.n();
    let mut dist: Vec<f64> = d.as_slice().iter().map(|v| v * v).collect();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    // Best partner with a larger index for each active row.
    let mut nn = vec![usize::MAX; n];
    let row_best = |dist: &[f64], active: &[bool], i: usize| -> usize {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for j in i + 1..n {
            if active[j] && (best == usize::MAX || dist[i * n + j] < best_d) {
                best = j;
                best_d = dist[i * n + j];
            }
        }
        best
    };
    for i in 0..n {
        nn[i] = row_best(&dist, &active, i);
    }
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let mut bi = usize::MAX;
        let mut bd = f64::INFINITY;
        for i in 0..n {
            if active[i] && nn[i] != usize::MAX && (bi == usize::MAX || dist[i * n + nn[i]] < bd) {
                bi = i;
                bd = dist[i * n + nn[i]];
            }
        }
        let (i, j) = (bi, nn[bi]);
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        let dij = dist[i * n + j];
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let nk = size[k] as f64;
            let v = ((ni + nk) * dist[k * n + i] + (nj + nk) * dist[k * n + j] - nk * dij)
                / (ni + nj + nk);
            dist[k * n + i] = v;
            dist[i * n + k] = v;
        }
        active[j] = false;
        size[i] += size[j];
        merges.push(Merge {
            a: i,
            b: j,
            height: math::sqrt(dij.max(0.0)),
            size: size[i],
        });
        nn[i] = row_best(&dist, &active, i);
        nn[j] = usize::MAX;
        for k in 0..i {
            if !active[k] {
                continue;
            }
            if nn[k] == i || nn[k] == j {
                nn[k] = row_best(&dist, &active, k);
            } else if nn[k] != usize::MAX {
                let cur = dist[k * n + nn[k]];
                let new = dist[k * n + i];
                if new < cur || (new == cur && i < nn[k]) {
                    nn[k] = i;
                }
            }
        }
        for k in i + 1..j {
            if active[k] && nn[k] == j {
                nn[k] = row_best(&dist, &active, k);
            }
        }
    }
    merges
}

/// Cuts the Ward tree into `k` groups. Labels run from 1 in order of first
/// appearance.
pub fn ward_cluster(d: &SquareMatrix<f64>, k: usize) -> Result<Vec<usize>> {
    let n = d.n();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let merges = ward_linkage(d);
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for m in &merges[..n - k] {
        let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
        parent[rb] = ra;
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    Ok(first_appearance_labels(&roots))
}

fn first_appearance_labels(raw: &[usize]) -> Vec<usize> {
    let mut seen: Vec<(usize, usize)> = Vec::new();
    raw.iter()
        .map(|&r| match seen.iter().find(|(k, _)| *k == r) {
            Some(&(_, l)) => l,
            None => {
                let l = seen.len() + 1;
                seen.push((r, l));
                l
            }
        })
        .collect()
}

/// Lower median of the retained θ-cluster counts.
pub fn posterior_num_clusters(n_theta: &[usize]) -> Result<usize> {
    if n_theta.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut s = n_theta.to_vec();
    s.sort_unstable();
    Ok(s[(s.len() - 1) / 2])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    pub k: usize,
    pub labels: Vec<usize>,
}

/// Full pipeline from θ-label snapshots and the n_θ trace to labels.
pub fn summarize(partitions: &[Vec<usize>], n_theta: &[usize]) -> Result<ClusterSummary> {
    let k = posterior_num_clusters(n_theta)?;
    let m = coclustering_matrix(partitions)?;
    let d = supremum_distance(&m);
    let k = k.min(d.n().max(1));
    let labels = ward_cluster(&d, k)?;
    Ok(ClusterSummary { k, labels })
}

/// Adjusted Rand index between two labelings of the same subjects.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
    }
    let c2 = |v: u64| (v * v.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = table.iter().map(|&v| c2(v)).sum();
    let rows: f64 = (0..ka)
        .map(|i| c2(table[i * kb..(i + 1) * kb].iter().sum()))
        .sum();
    let cols: f64 = (0..kb)
        .map(|j| c2((0..ka).map(|i| table[i * kb + j]).sum()))
        .sum();
    let total = c2(n as u64);
    if total == 0.0 {
        return 1.0;
    }
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if max == expected {
        return 1.0;
    }
    (sum_cells - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn euclid(points: &[(f64, f64)]) -> SquareMatrix<f64> {
        SquareMatrix::from_fn(points.len(), |i, j| {
            let (dx, dy) = (points[i].0 - points[j].0, points[i].1 - points[j].1);
            libm::sqrt(dx * dx + dy * dy)
        })
    }

    #[test]
    fn single_snapshot_all_together() {
        let m = coclustering_matrix(&[vec![0, 0, 0]]).unwrap();
        assert!(m.as_slice().iter().all(|&v| v == 1));
    }

    #[test]
    fn never_coclustered() {
        let m = coclustering_matrix(&[vec![0, 1, 2], vec![2, 0, 1]]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), if i == j { 2 } else { 0 });
            }
        }
    }

    #[test]
    fn hand_counted_coclustering() {
        let parts = [vec![0, 0, 1, 1], vec![0, 1, 1, 0], vec![0, 0, 0, 1]];
        let m = coclustering_matrix(&parts).unwrap();
        // Pairs (0,1): snapshots 1, 3; (0,2): 3; (0,3): 2; (1,2): 2, 3;
        // (1,3): never; (2,3): 1.
        let expect = [[3, 2, 1, 1], [2, 3, 2, 0], [1, 2, 3, 1], [1, 0, 1, 3]];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.get(i, j), expect[i][j]);
            }
        }
    }

    #[test]
    fn coclustering_rejects_ragged_snapshots() {
        let err = coclustering_matrix(&[vec![0, 0], vec![0]]).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }));
    }

    #[test]
    fn supremum_examples() {
        let m = SquareMatrix::from_fn(3, |i, j| match (i, j) {
            (0, _) | (1, _) => 2,
            (2, 1) => 7,
            _ => 2,
        });
        let d = supremum_distance(&m);
        assert_eq!(d.get(0, 1), 0.0);
        assert_eq!(d.get(0, 2), 5.0);
        assert_eq!(d.get(2, 0), 5.0);
    }

    #[test]
    fn supremum_brute_force() {
        let m = SquareMatrix::from_fn(4, |i, j| ((i * 7 + j * 3) % 5) as u32);
        let d = supremum_distance(&m);
        for i in 0..4 {
            for j in 0..4 {
                let mut best = 0i64;
                for l in 0..4 {
                    best = best.max((m.get(i, l) as i64 - m.get(j, l) as i64).abs());
                }
                assert_eq!(d.get(i, j), best as f64);
            }
        }
    }

    #[test]
    fn ward_heights_match_reference() {
        // Reference dendrogram from an established ward.D2 implementation.
        let d = euclid(&[(0.0, 0.0), (1.0, 0.0), (0.0, 2.0), (5.0, 5.0), (6.0, 5.0), (5.0, 7.5)]);
        let merges = ward_linkage(&d);
        let expect = [
            (0, 1, 1.0),
            (3, 4, 1.0),
            (0, 2, 2.380_476_142_847_616_7),
            (3, 5, 2.943_920_288_775_948_4),
            (0, 3, 12.453_245_895_481_76),
        ];
        for (m, &(a, b, h)) in merges.iter().zip(&expect) {
            assert_eq!((m.a, m.b), (a, b));
            assert!((m.height - h).abs() < 1e-9, "{} vs {h}", m.height);
        }
        assert_eq!(ward_cluster(&d, 3).unwrap(), vec![1, 1, 1, 2, 2, 3]);
    }

    #[test]
    fn ward_cut_extremes() {
        let d = euclid(&[(0.0, 0.0), (0.1, 0.0), (9.0, 9.0), (9.1, 9.0), (4.0, 0.0)]);
        assert_eq!(ward_cluster(&d, 5).unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(ward_cluster(&d, 1).unwrap(), vec![1; 5]);
        let two = euclid(&[(0.0, 0.0), (0.2, 0.1), (0.1, 0.3), (10.0, 10.0), (10.2, 9.9)]);
        assert_eq!(ward_cluster(&two, 2).unwrap(), vec![1, 1, 1, 2, 2]);
        assert!(matches!(ward_cluster(&d, 0), Err(Error::InvalidK { .. })));
        assert!(matches!(ward_cluster(&d, 6), Err(Error::InvalidK { .. })));
    }

    #[test]
    fn median_rule() {
        assert_eq!(posterior_num_clusters(&[2, 2, 2]).unwrap(), 2);
        assert_eq!(posterior_num_clusters(&[3, 2, 3]).unwrap(), 3);
        assert_eq!(posterior_num_clusters(&[3, 2, 3, 2]).unwrap(), 2);
        assert_eq!(posterior_num_clusters(&[]), Err(Error::EmptyTrace));
    }

    #[test]
    fn ari_reference_values() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        // Standard textbook example: ARI = 0.24242424...
        let a = [0, 0, 0, 1, 1, 1];
        let b = [0, 0, 1, 1, 2, 2];
        assert!((adjusted_rand_index(&a, &b) - 0.242_424_242_424_242_4).abs() < 1e-12);
    }

    #[test]
    fn summarize_constant_partitions() {
        let parts = vec![vec![0; 5]; 4];
        let s = summarize(&parts, &[1, 1, 1, 1]).unwrap();
        assert_eq!(s.k, 1);
        assert_eq!(s.labels, vec![1; 5]);
    }

    fn points_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
        proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..7)
    }

    proptest! {
        #[test]
        fn coclustering_properties(parts in proptest::collection::vec(
            proptest::collection::vec(0usize..3, 6), 1..6)) {
            let m = coclustering_matrix(&parts).unwrap();
            let s = parts.len() as u32;
            for i in 0..6 {
                prop_assert_eq!(m.get(i, i), s);
                for j in 0..6 {
                    prop_assert_eq!(m.get(i, j), m.get(j, i));
                    prop_assert!(m.get(i, j) <= m.get(i, i));
                }
            }
        }

        #[test]
        fn supremum_triangle_inequality(vals in proptest::collection::vec(0u32..20, 36)) {
            let m = SquareMatrix::from_fn(6, |i, j| vals[i * 6 + j]);
            let d = supremum_distance(&m);
            for i in 0..6 { for j in 0..6 { for k in 0..6 {
                prop_assert!(d.get(i, k) <= d.get(i, j) + d.get(j, k));
            }}}
        }

        #[test]
        fn ward_permutation_invariance(pts in points_strategy(), k in 1usize..4, seed in 0u64..1000) {
            let n = pts.len();
            let k = k.min(n);
            let mut perm: Vec<usize> = (0..n).collect();
            // Fisher-Yates with a simple LCG keeps the test dependency-free.
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let permuted: Vec<(f64, f64)> = perm.iter().map(|&p| pts[p]).collect();
            let a = ward_cluster(&euclid(&pts), k).unwrap();
            let b = ward_cluster(&euclid(&permuted), k).unwrap();
            let a_perm: Vec<usize> = perm.iter().map(|&p| a[p]).collect();
            prop_assert!((adjusted_rand_index(&a_perm, &b) - 1.0).abs() < 1e-12);
        }
    }
}
