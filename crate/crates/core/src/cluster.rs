//! Lloyd k-means and a capacity-constrained (balanced) variant over 2-D
//! points.

use rand::Rng;

pub type Point = [f64; 2];

#[inline]
pub fn sq_dist(a: Point, b: Point) -> f64 {
    let (x, y) = (a[0] - b[0], a[1] - b[1]);
    x * x + y * y
}

fn nearest(p: Point, centers: &[Point]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, &c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// k-means++ seeding.
fn seed_centers<R: Rng>(points: &[Point], k: usize, rng: &mut R) -> Vec<Point> {
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|&p| sq_dist(p, centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if t < w {
                    pick = i;
                    break;
                }
                t -= w;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[idx];
        centers.push(c);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, c));
        }
    }
    centers
}

fn recenter(points: &[Point], assign: &[usize], centers: &mut [Point]) {
    let k = centers.len();
    let mut sum = vec![[0.0; 2]; k];
    let mut cnt = vec![0usize; k];
    for (&p, &a) in points.iter().zip(assign) {
        sum[a][0] += p[0];
        sum[a][1] += p[1];
        cnt[a] += 1;
    }
    for i in 0..k {
        if cnt[i] > 0 {
            centers[i] = [sum[i][0] / cnt[i] as f64, sum[i][1] / cnt[i] as f64];
        }
    }
}

#[derive(Clone, Debug)]
pub struct KMeans {
    pub centers: Vec<Point>,
    pub assign: Vec<usize>,
}

/// Lloyd iterations from k-means++ seeds; `k` is clamped to the point count.
pub fn kmeans<R: Rng>(points: &[Point], k: usize, max_iter: usize, rng: &mut R) -> KMeans {
    assert!(!points.is_empty(), "k-means over an empty point set");
    let k = k.clamp(1, points.len());
    let mut centers = seed_centers(points, k, rng);
    let mut assign: Vec<usize> = points.iter().map(|&p| nearest(p, &centers)).collect();
    for _ in 0..max_iter {
        recenter(points, &assign, &mut centers);
        let next: Vec<usize> = points.iter().map(|&p| nearest(p, &centers)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    KMeans { centers, assign }
}

/// k-means where every cluster holds at most `ceil(n / k)` points.
///
/// Assignment is greedy over (point, center) pairs in order of increasing
/// distance, which keeps clusters spatially compact while enforcing the
/// capacity. Every cluster is nonempty.
pub fn balanced_kmeans<R: Rng>(points: &[Point], k: usize, iters: usize, rng: &mut R) -> KMeans {
    assert!(!points.is_empty(), "k-means over an empty point set");
    let n = points.len();
    let k = k.clamp(1, n);
    if k == n {
        return KMeans {
            centers: points.to_vec(),
            assign: (0..n).collect(),
        };
    }
    let mut centers = kmeans(points, k, 20, rng).centers;
    let cap = n.div_ceil(k);
    let mut assign = vec![0; n];
    for _ in 0..iters.max(1) {
        let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(n * k);
        for (i, &p) in points.iter().enumerate() {
            for (j, &c) in centers.iter().enumerate() {
                cand.push((sq_dist(p, c), i, j));
            }
        }
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut load = vec![0usize; k];
        let mut done = vec![false; n];
        // reserve one slot per cluster for its closest unassigned point so
        // that no cluster ends up empty
        for j in 0..k {
            let best = (0..n)
                .filter(|&i| !done[i])
                .min_by(|&a, &b| sq_dist(points[a], centers[j]).total_cmp(&sq_dist(points[b], centers[j])));
            if let Some(i) = best {
                assign[i] = j;
                done[i] = true;
                load[j] += 1;
            }
        }
        for &(_, i, j) in &cand {
            if !done[i] && load[j] < cap {
                assign[i] = j;
                done[i] = true;
                load[j] += 1;
            }
        }
        let before = centers.clone();
        recenter(points, &assign, &mut centers);
        if before == centers {
            break;
        }
    }
    KMeans { centers, assign }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_blobs() -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        (0..40)
            .map(|i| {
                let off = if i < 20 { 0.0 } else { 10.0 };
                [off + rng.random::<f64>(), off + rng.random::<f64>()]
            })
            .collect()
    }

    #[test]
    fn separates_blobs() {
        let pts = two_blobs();
        let km = kmeans(&pts, 2, 50, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(km.assign[..20].iter().all(|&a| a == km.assign[0]));
        assert!(km.assign[20..].iter().all(|&a| a == km.assign[20]));
        assert_ne!(km.assign[0], km.assign[20]);
    }

    #[test]
    fn balanced_respects_capacity() {
        let pts = two_blobs();
        for k in [2, 3, 7, 40] {
            let km = balanced_kmeans(&pts, k, 5, &mut ChaCha8Rng::seed_from_u64(2));
            let mut load = vec![0; k];
            for &a in &km.assign {
                load[a] += 1;
            }
            let cap = pts.len().div_ceil(k);
            assert!(load.iter().all(|&l| l >= 1 && l <= cap), "k={k} load={load:?}");
        }
    }
}
