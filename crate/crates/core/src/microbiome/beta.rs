//! Sparse QTL effects of host SNPs on taxa CLR abundances.

use rand::seq::index;
use rand::Rng;

use super::cluster::TaxaClustering;
use crate::error::{Error, Result};
use crate::io::DosageMatrix;
use crate::Scalar;

/// QTL shared by every taxon of one genetic cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSupport<T> {
    pub cluster: usize,
    /// SNP indices, ascending.
    pub snps: Vec<usize>,
    /// Cluster-level draw per QTL.
    pub cluster_effects: Vec<T>,
}

/// Nonzero part of one taxon row.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaRow<T> {
    pub taxon: usize,
    /// Index into [`BetaMatrix::supports`].
    pub support: usize,
    /// Taxon-level draw per QTL.
    pub taxon_effects: Vec<T>,
    /// `cluster_effects + taxon_effects`.
    pub values: Vec<T>,
}

/// `n_b × n_g` effect matrix, nonzero only on rows of genetic taxa.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaMatrix<T> {
    n_taxa: usize,
    n_snps: usize,
    supports: Vec<ClusterSupport<T>>,
    rows: Vec<BetaRow<T>>,
}

/// Default QTL count per genetic cluster: `round(0.2·n_g / v)`, at least 1.
pub fn default_qtl_per_cluster(n_g: usize, n_genetic_clusters: usize) -> usize {
    if n_genetic_clusters == 0 {
        return 1;
    }
    crate::genome::round_half_up(0.2 * n_g as f64 / n_genetic_clusters as f64).max(1)
}

impl<T: Scalar> BetaMatrix<T> {
    pub fn zeros(n_taxa: usize, n_snps: usize) -> Self {
        Self {
            n_taxa,
            n_snps,
            supports: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn n_taxa(&self) -> usize {
        self.n_taxa
    }

    pub fn n_snps(&self) -> usize {
        self.n_snps
    }

    pub fn supports(&self) -> &[ClusterSupport<T>] {
        &self.supports
    }

    /// Nonzero rows in ascending taxon order.
    pub fn rows(&self) -> &[BetaRow<T>] {
        &self.rows
    }

    /// Every entry multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        for s in &mut out.supports {
            s.cluster_effects.iter_mut().for_each(|v| *v = *v * factor);
        }
        for r in &mut out.rows {
            r.taxon_effects.iter_mut().for_each(|v| *v = *v * factor);
            r.values.iter_mut().for_each(|v| *v = *v * factor);
        }
        out
    }

    /// Dense `n_b × n_g` copy.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut m = vec![vec![T::zero(); self.n_snps]; self.n_taxa];
        for r in &self.rows {
            for (&g, &v) in self.supports[r.support].snps.iter().zip(&r.values) {
                m[r.taxon][g] = v;
            }
        }
        m
    }

    /// Uncentered `β·g` for one individual's dosages.
    pub fn effect_on(&self, dosages: &[u8]) -> Vec<T> {
        assert_eq!(dosages.len(), self.n_snps, "dosage vector length differs from β");
        let mut out = vec![T::zero(); self.n_taxa];
        for r in &self.rows {
            let snps = &self.supports[r.support].snps;
            out[r.taxon] = snps
                .iter()
                .zip(&r.values)
                .map(|(&g, &v)| v * T::lit(dosages[g] as f64))
                .sum();
        }
        out
    }

    /// Uncentered `βG`, one length-`n_b` vector per individual.
    pub fn genetic_terms(&self, g: &DosageMatrix) -> Vec<Vec<T>> {
        (0..g.n_ind()).map(|i| self.effect_on(g.column(i))).collect()
    }
}

/// Draws `qtl_o` QTL per genetic cluster (independently, so clusters may share
/// SNPs) and `β_sg = cluster draw + taxon draw`, both N(0, σ²).
pub fn build_beta<T: Scalar, R: Rng + ?Sized>(
    clustering: &TaxaClustering,
    n_g: usize,
    qtl_o: usize,
    sigma_beta: T,
    rng: &mut R,
) -> Result<BetaMatrix<T>> {
    if qtl_o == 0 || qtl_o > n_g {
        return Err(Error::Config(format!("QTL per cluster must lie in [1, {n_g}], got {qtl_o}")));
    }
    if sigma_beta < T::zero() {
        return Err(Error::Config("sigma_beta must be non-negative".into()));
    }
    let mut supports = Vec::new();
    let mut rows = Vec::new();
    for &cluster in clustering.genetic_clusters() {
        let mut snps = index::sample(rng, n_g, qtl_o).into_vec();
        snps.sort_unstable();
        let cluster_effects: Vec<T> = (0..qtl_o).map(|_| sigma_beta * T::standard_normal(rng)).collect();
        for taxon in clustering.members(cluster) {
            let taxon_effects: Vec<T> = (0..qtl_o).map(|_| sigma_beta * T::standard_normal(rng)).collect();
            let values = cluster_effects.iter().zip(&taxon_effects).map(|(&a, &b)| a + b).collect();
            rows.push(BetaRow {
                taxon,
                support: supports.len(),
                taxon_effects,
                values,
            });
        }
        supports.push(ClusterSupport {
            cluster,
            snps,
            cluster_effects,
        });
    }
    rows.sort_by_key(|r| r.taxon);
    Ok(BetaMatrix {
        n_taxa: clustering.n_taxa(),
        n_snps: n_g,
        supports,
        rows,
    })
}

/// `βG` with every taxon centred to mean zero across the individuals of `g`.
/// One length-`n_b` vector per individual.
pub fn centered_genetic_term<T: Scalar>(beta: &BetaMatrix<T>, g: &DosageMatrix) -> Vec<Vec<T>> {
    center_columns(beta.genetic_terms(g))
}

/// Subtracts, for each coordinate, its mean over the outer vectors.
pub(crate) fn center_columns<T: Scalar>(mut v: Vec<Vec<T>>) -> Vec<Vec<T>> {
    if v.is_empty() {
        return v;
    }
    let n = T::from_count(v.len());
    let width = v[0].len();
    for s in 0..width {
        let m = v.iter().map(|x| x[s]).sum::<T>() / n;
        v.iter_mut().for_each(|x| x[s] = x[s] - m);
    }
    v
}

/// TSV of the nonzero entries: `taxon\tcluster\tsnp\tcluster_effect\ttaxon_effect\tbeta`.
pub fn format_beta_support<T: Scalar>(taxon_ids: &[String], snp_ids: &[String], beta: &BetaMatrix<T>) -> String {
    let mut out = String::from("taxon\tcluster\tsnp\tcluster_effect\ttaxon_effect\tbeta\n");
    for r in beta.rows() {
        let sup = &beta.supports()[r.support];
        for (k, &g) in sup.snps.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                taxon_ids[r.taxon],
                sup.cluster,
                snp_ids[g],
                crate::io::format_real(sup.cluster_effects[k]),
                crate::io::format_real(r.taxon_effects[k]),
                crate::io::format_real(r.values[k]),
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn clustering() -> TaxaClustering {
        TaxaClustering::from_assignment(vec![0, 0, 1, 1, 1, 2])
            .unwrap()
            .with_genetic_clusters(vec![1, 0])
            .unwrap()
    }

    #[test]
    fn shared_support_within_cluster() {
        let b: BetaMatrix<f64> = build_beta(&clustering(), 50, 7, 0.1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let dense = b.to_dense();
        let support = |s: usize| -> Vec<usize> { (0..50).filter(|&g| dense[s][g] != 0.0).collect() };
        assert_eq!(support(0), support(1));
        assert_eq!(support(2), support(3));
        assert_eq!(support(2), support(4));
        assert_eq!(support(0).len(), 7);
        assert!(support(5).is_empty());
        assert!(build_beta::<f64, _>(&clustering(), 5, 7, 0.1, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn nonzero_entry_variance_is_twice_sigma_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut vals = Vec::new();
        for _ in 0..400 {
            let b: BetaMatrix<f64> = build_beta(&clustering(), 100, 20, 0.3, &mut rng).unwrap();
            vals.extend(b.rows().iter().flat_map(|r| r.values.clone()));
        }
        let v = stats::variance(&vals);
        assert!((v / (2.0 * 0.09) - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn same_cluster_rows_covary() {
        // cov of two same-cluster entries on a shared SNP = σ²
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for _ in 0..2000 {
            let b: BetaMatrix<f64> = build_beta(&clustering(), 30, 10, 1.0, &mut rng).unwrap();
            let r = b.rows();
            x.extend(r[0].values.clone());
            y.extend(r[1].values.clone());
        }
        let c = stats::covariance(&x, &y);
        assert!((c - 1.0).abs() < 0.06, "{c}");
    }

    #[test]
    fn centering_examples() {
        let g = DosageMatrix::from_columns(vec![vec![0, 1], vec![2, 1], vec![1, 0]]).unwrap();
        let zero = BetaMatrix::<f64>::zeros(3, 2);
        assert!(centered_genetic_term(&zero, &g).iter().flatten().all(|&v| v == 0.0));

        // single entry b at (taxon 1, snp 0)
        let c = TaxaClustering::from_assignment(vec![0, 1, 2]).unwrap().with_genetic_clusters(vec![1]).unwrap();
        let mut beta: BetaMatrix<f64> = build_beta(&c, 2, 1, 1.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        beta.supports[0].snps = vec![0];
        beta.rows[0].values = vec![0.7];
        let t = centered_genetic_term(&beta, &g);
        let expect = [0.7 * (0.0 - 1.0), 0.7 * (2.0 - 1.0), 0.7 * (1.0 - 1.0)];
        for i in 0..3 {
            assert!((t[i][1] - expect[i]).abs() < 1e-15);
            assert_eq!(t[i][0], 0.0);
        }
        for s in 0..3 {
            let m: f64 = t.iter().map(|x| x[s]).sum::<f64>() / 3.0;
            assert!(m.abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_is_linear() {
        let b: BetaMatrix<f64> = build_beta(&clustering(), 40, 5, 1.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let g: Vec<u8> = (0..40).map(|i| (i % 3) as u8).collect();
        let base = b.effect_on(&g);
        let half = b.scaled(0.5).effect_on(&g);
        for (a, h) in base.iter().zip(&half) {
            assert!((0.5 * a - h).abs() < 1e-12);
        }
    }

    #[test]
    fn default_qtl_count() {
        assert_eq!(default_qtl_per_cluster(1000, 2), 100);
        assert_eq!(default_qtl_per_cluster(3, 5), 1);
    }
}
