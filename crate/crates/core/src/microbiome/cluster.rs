//! Average-linkage clustering of taxa and choice of the genetically controlled set.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::io::CountMatrix;

/// Taxon-to-cluster assignment plus the clusters under genetic control.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaxaClustering {
    assignment: Vec<usize>,
    n_clusters: usize,
    genetic_clusters: Vec<usize>,
    genetic_taxa: Vec<usize>,
}

impl TaxaClustering {
    /// Labels must cover `0..v` with no gaps.
    pub fn from_assignment(assignment: Vec<usize>) -> Result<Self> {
        let n_clusters = assignment.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; n_clusters];
        for &c in &assignment {
            seen[c] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Data("cluster labels must be contiguous from 0".into()));
        }
        Ok(Self {
            assignment,
            n_clusters,
            genetic_clusters: Vec::new(),
            genetic_taxa: Vec::new(),
        })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn n_taxa(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    /// Taxa of cluster `c`, ascending.
    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&s| self.assignment[s] == c).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// Genetic clusters in the order they were chosen.
    pub fn genetic_clusters(&self) -> &[usize] {
        &self.genetic_clusters
    }

    /// Genetically controlled taxa, ascending.
    pub fn genetic_taxa(&self) -> &[usize] {
        &self.genetic_taxa
    }

    pub fn is_genetic(&self, taxon: usize) -> bool {
        self.genetic_taxa.binary_search(&taxon).is_ok()
    }

    /// Marks `clusters` as genetically controlled.
    pub fn with_genetic_clusters(mut self, clusters: Vec<usize>) -> Result<Self> {
        if let Some(&c) = clusters.iter().find(|&&c| c >= self.n_clusters) {
            return Err(Error::Data(format!("unknown cluster id {c}")));
        }
        let mut taxa: Vec<usize> = (0..self.assignment.len())
            .filter(|&s| clusters.contains(&self.assignment[s]))
            .collect();
        taxa.sort_unstable();
        self.genetic_clusters = clusters;
        self.genetic_taxa = taxa;
        Ok(self)
    }
}

/// Bray–Curtis dissimilarities between taxa rows of `counts`, as a full
/// row-major `n_b × n_b` matrix. Two all-zero rows are at distance 0, an
/// all-zero row and any other row at distance 1.
pub fn taxa_dissimilarities(counts: &CountMatrix) -> Vec<f64> {
    let n = counts.n_taxa();
    let rows: Vec<Vec<f64>> = (0..n).map(|s| counts.row(s).into_iter().map(|c| c as f64).collect()).collect();
    let totals: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let mut d = vec![0.0; n * n];
    for a in 0..n {
        for b in (a + 1)..n {
            let denom = totals[a] + totals[b];
            let v = if denom == 0.0 {
                0.0
            } else {
                let shared: f64 = rows[a].iter().zip(&rows[b]).map(|(x, y)| x.min(*y)).sum();
                1.0 - 2.0 * shared / denom
            };
            d[a * n + b] = v;
            d[b * n + a] = v;
        }
    }
    d
}

/// One merge of the dendrogram: the two merged clusters are named by any of
/// their member taxa.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Merge {
    height: f64,
    a: usize,
    b: usize,
}

/// Average-linkage (UPGMA) dendrogram via the nearest-neighbour chain
/// algorithm. Merges are returned in non-decreasing height order.
fn average_linkage(mut d: Vec<f64>, n: usize) -> Vec<Merge> {
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut remaining = n;
    while remaining > 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&x| x).expect("an active cluster"));
        }
        let (a, b) = loop {
            let a = *chain.last().expect("non-empty chain");
            let prev = if chain.len() >= 2 { Some(chain[chain.len() - 2]) } else { None };
            // the predecessor wins ties, otherwise the lowest index
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| d[a * n + p]);
            for k in 0..n {
                if active[k] && k != a && d[a * n + k] < best_d {
                    best_d = d[a * n + k];
                    best = Some(k);
                }
            }
            let b = best.expect("at least two active clusters");
            if Some(b) == prev {
                chain.pop();
                chain.pop();
                break (a, b);
            }
            chain.push(b);
        };
        let height = d[a * n + b];
        let (keep, drop) = (a.min(b), a.max(b));
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for k in 0..n {
            if active[k] && k != a && k != b {
                let v = (sa * d[a * n + k] + sb * d[b * n + k]) / (sa + sb);
                d[keep * n + k] = v;
                d[k * n + keep] = v;
            }
        }
        size[keep] += size[drop];
        active[drop] = false;
        merges.push(Merge { height, a, b });
        remaining -= 1;
    }
    merges.sort_by(|x, y| x.height.total_cmp(&y.height));
    merges
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Hierarchical clustering of taxa (Bray–Curtis, average linkage) cut into
/// `n_clusters` groups. Labels follow first appearance in taxon order. Ties
/// are broken by taxon index, so no randomness is involved.
pub fn cluster_taxa(counts: &CountMatrix, n_clusters: usize) -> Result<TaxaClustering> {
    let n = counts.n_taxa();
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::Config(format!("n_clusters must lie in [1, {n}], got {n_clusters}")));
    }
    cluster_from_dissimilarities(taxa_dissimilarities(counts), n, n_clusters)
}

/// Same as [`cluster_taxa`] on a precomputed row-major dissimilarity matrix.
pub fn cluster_from_dissimilarities(d: Vec<f64>, n: usize, n_clusters: usize) -> Result<TaxaClustering> {
    if d.len() != n * n {
        return Err(Error::Data("dissimilarity matrix has the wrong size".into()));
    }
    let merges = average_linkage(d, n);
    let mut parent: Vec<usize> = (0..n).collect();
    for m in merges.iter().take(n - n_clusters) {
        let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
        parent[ra.max(rb)] = ra.min(rb);
    }
    let mut label_of_root = vec![usize::MAX; n];
    let mut next = 0;
    let assignment = (0..n)
        .map(|s| {
            let r = find(&mut parent, s);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect();
    TaxaClustering::from_assignment(assignment)
}

const RELAX_STEP: usize = 5;
const MAX_RELAXATIONS: usize = 3;

/// Samples whole clusters with size in `[size_min, size_max]` uniformly
/// without replacement until at least `otu_g · n_b` taxa are covered. When the
/// eligible clusters cannot reach the threshold the bounds are widened by 5
/// on each side, at most three times.
pub fn select_genetic_clusters<R: Rng + ?Sized>(
    clustering: TaxaClustering,
    otu_g: f64,
    size_min: usize,
    size_max: usize,
    rng: &mut R,
) -> Result<TaxaClustering> {
    if !(otu_g > 0.0 && otu_g <= 1.0) {
        return Err(Error::Config(format!("otu_g must lie in (0, 1], got {otu_g}")));
    }
    let n_b = clustering.n_taxa();
    let target = ((otu_g * n_b as f64) - 1e-9).ceil().max(1.0) as usize;
    let sizes = clustering.sizes();
    let (mut lo, mut hi) = (size_min, size_max);
    for attempt in 0..=MAX_RELAXATIONS {
        let mut eligible: Vec<usize> = (0..sizes.len()).filter(|&c| sizes[c] >= lo && sizes[c] <= hi).collect();
        let available: usize = eligible.iter().map(|&c| sizes[c]).sum();
        if available >= target {
            eligible.shuffle(rng);
            let mut chosen = Vec::new();
            let mut covered = 0;
            for c in eligible {
                chosen.push(c);
                covered += sizes[c];
                if covered >= target {
                    break;
                }
            }
            if attempt > 0 {
                log::warn!("genetic cluster size bounds relaxed to [{lo}, {hi}]");
            }
            return clustering.with_genetic_clusters(chosen);
        }
        lo = lo.saturating_sub(RELAX_STEP).max(1);
        hi += RELAX_STEP;
    }
    Err(Error::Data(format!(
        "not enough clusters of size [{size_min}, {size_max}] (relaxed to [{lo}, {hi}]) to place {target} taxa under genetic control",
        lo = size_min.saturating_sub(RELAX_STEP * MAX_RELAXATIONS).max(1),
        hi = size_max + RELAX_STEP * MAX_RELAXATIONS,
    )))
}

/// TSV of `taxon\tcluster\tgenetic`.
pub fn format_clusters(taxon_ids: &[String], clustering: &TaxaClustering) -> String {
    let mut out = String::from("taxon\tcluster\tgenetic\n");
    for (s, id) in taxon_ids.iter().enumerate() {
        out.push_str(&format!(
            "{id}\t{}\t{}\n",
            clustering.assignment()[s],
            u8::from(clustering.is_genetic(s))
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn counts(rows: &[Vec<u64>]) -> CountMatrix {
        let n_ind = rows[0].len();
        CountMatrix::from_columns((0..n_ind).map(|i| rows.iter().map(|r| r[i]).collect()).collect()).unwrap()
    }

    /// Brute-force UPGMA: repeatedly merge the closest pair by average
    /// pairwise distance between original members.
    fn naive_average_linkage(d: &[f64], n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        while clusters.len() > k {
            let mut best = (f64::INFINITY, 0, 0);
            for i in 0..clusters.len() {
                for j in (i + 1)..clusters.len() {
                    let mut s = 0.0;
                    for &a in &clusters[i] {
                        for &b in &clusters[j] {
                            s += d[a * n + b];
                        }
                    }
                    let avg = s / (clusters[i].len() * clusters[j].len()) as f64;
                    if avg < best.0 {
                        best = (avg, i, j);
                    }
                }
            }
            let merged = clusters.remove(best.2);
            clusters[best.1].extend(merged);
            clusters[best.1].sort_unstable();
        }
        clusters.sort();
        clusters
    }

    fn partition(c: &TaxaClustering) -> Vec<Vec<usize>> {
        let mut p: Vec<Vec<usize>> = (0..c.n_clusters()).map(|k| c.members(k)).collect();
        p.sort();
        p
    }

    #[test]
    fn disjoint_blocks_are_recovered() {
        let m = counts(&[
            vec![5, 3, 0, 0],
            vec![4, 6, 0, 0],
            vec![7, 2, 0, 0],
            vec![0, 0, 3, 8],
            vec![0, 0, 5, 5],
        ]);
        let c = cluster_taxa(&m, 2).unwrap();
        assert_eq!(partition(&c), vec![vec![0, 1, 2], vec![3, 4]]);
        assert_eq!(c.assignment(), &[0, 0, 0, 1, 1]);
    }

    #[test]
    fn full_cut_gives_singletons() {
        let m = counts(&[vec![1, 2], vec![3, 1], vec![2, 2]]);
        let c = cluster_taxa(&m, 3).unwrap();
        assert_eq!(c.assignment(), &[0, 1, 2]);
        assert!(cluster_taxa(&m, 4).is_err());
    }

    #[test]
    fn matches_brute_force_upgma() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let rows: Vec<Vec<u64>> = (0..15).map(|_| (0..8).map(|_| rng.random_range(0..50)).collect()).collect();
            let m = counts(&rows);
            let d = taxa_dissimilarities(&m);
            for k in [1, 3, 6, 10] {
                let fast = partition(&cluster_taxa(&m, k).unwrap());
                assert_eq!(fast, naive_average_linkage(&d, 15, k));
            }
        }
    }

    #[test]
    fn zero_rows_are_handled() {
        let m = counts(&[vec![0, 0], vec![0, 0], vec![4, 1]]);
        let d = taxa_dissimilarities(&m);
        assert_eq!(d[1], 0.0);
        assert_eq!(d[2], 1.0);
        let c = cluster_taxa(&m, 2).unwrap();
        assert_eq!(c.assignment(), &[0, 0, 1]);
    }

    fn sized_clustering(sizes: &[usize]) -> TaxaClustering {
        let assignment = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
        TaxaClustering::from_assignment(assignment).unwrap()
    }

    #[test]
    fn one_cluster_can_meet_the_threshold() {
        // 100 taxa, the only eligible cluster has 12 taxa
        let c = sized_clustering(&[12, 30, 30, 28]);
        let g = select_genetic_clusters(c, 0.05, 10, 25, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(g.genetic_clusters(), &[0]);
        assert_eq!(g.genetic_taxa().len(), 12);
    }

    #[test]
    fn bounds_relax_when_needed() {
        let c = sized_clustering(&[30, 30, 30, 30]);
        let g = select_genetic_clusters(c, 0.05, 10, 25, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(g.genetic_taxa().len(), 30);
        let huge = sized_clustering(&[200, 200]);
        assert!(select_genetic_clusters(huge, 0.05, 10, 25, &mut ChaCha8Rng::seed_from_u64(2)).is_err());
    }

    #[test]
    fn cluster_export_lists_every_taxon() {
        let c = sized_clustering(&[2, 1]).with_genetic_clusters(vec![1]).unwrap();
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(format_clusters(&ids, &c), "taxon\tcluster\tgenetic\na\t0\t0\nb\t0\t0\nc\t1\t1\n");
    }

    proptest! {
        #[test]
        fn selection_reaches_threshold(sizes in prop::collection::vec(1usize..30, 5..40), otu_g in 0.01f64..0.3, seed in 0u64..100) {
            let c = sized_clustering(&sizes);
            let n_b = c.n_taxa();
            if let Ok(g) = select_genetic_clusters(c, otu_g, 10, 25, &mut ChaCha8Rng::seed_from_u64(seed)) {
                prop_assert!(g.genetic_taxa().len() as f64 >= (otu_g * n_b as f64).ceil() - 1e-9);
                for &k in g.genetic_clusters() {
                    prop_assert!((1..=40).contains(&g.sizes()[k]));
                }
            }
        }

        #[test]
        fn clustering_is_order_invariant(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<u64>> = (0..12).map(|_| (0..6).map(|_| rng.random_range(0..1000)).collect()).collect();
            let mut perm: Vec<usize> = (0..12).collect();
            perm.shuffle(&mut rng);
            let shuffled: Vec<Vec<u64>> = perm.iter().map(|&p| rows[p].clone()).collect();
            let a = cluster_taxa(&counts(&rows), 4).unwrap();
            let b = cluster_taxa(&counts(&shuffled), 4).unwrap();
            let mapped: Vec<Vec<usize>> = {
                let mut p: Vec<Vec<usize>> = (0..4).map(|k| {
                    let mut m: Vec<usize> = b.members(k).into_iter().map(|i| perm[i]).collect();
                    m.sort_unstable();
                    m
                }).collect();
                p.sort();
                p
            };
            prop_assert_eq!(partition(&a), mapped);
        }
    }
}
