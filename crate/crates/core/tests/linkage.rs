//! Recombination keeps adjacent-SNP linkage when parental phase is known.

use holosim::genome::{self, GeneticMap, ParentPool, PhasedGenotype, Sex};
use holosim::io::DosageMatrix;
use holosim::stats;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N_SNPS: usize = 1000;
const N: usize = 300;

fn adjacent_r2(g: &DosageMatrix) -> f64 {
    let rows: Vec<Vec<f64>> = (0..g.n_snps()).map(|s| g.row(s).iter().map(|&d| f64::from(d)).collect()).collect();
    let r2: Vec<f64> = rows
        .windows(2)
        .filter(|w| stats::variance(&w[0]) > 0.0 && stats::variance(&w[1]) > 0.0)
        .map(|w| stats::correlation(&w[0], &w[1]).powi(2))
        .collect();
    stats::mean(&r2)
}

#[test]
fn phased_founder_mosaics_keep_their_linkage() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let founders: Vec<Vec<u8>> = (0..8).map(|_| (0..N_SNPS).map(|_| u8::from(rng.random::<bool>())).collect()).collect();
    let mut haplotype = || {
        let mut f = rng.random_range(0..founders.len());
        (0..N_SNPS)
            .map(|s| {
                if rng.random::<f64>() < 0.02 {
                    f = rng.random_range(0..founders.len());
                }
                founders[f][s]
            })
            .collect::<Vec<u8>>()
    };
    let pop: Vec<PhasedGenotype> = (0..N).map(|_| PhasedGenotype::new(haplotype(), haplotype())).collect();
    let g0 = genome::dosage_matrix(&pop);

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let ids: Vec<String> = (0..N).map(|i| format!("i{i}")).collect();
    let sexes = genome::assign_sexes(N, 0.5, &mut rng);
    let f: Vec<usize> = (0..N).filter(|&i| sexes[i] == Sex::Female).collect();
    let m: Vec<usize> = (0..N).filter(|&i| sexes[i] == Sex::Male).collect();
    let pool = ParentPool { genotypes: &pop, ids: &ids };
    let next = genome::build_generation(&pool, &f, &m, N, 0.5, 1, &GeneticMap::uniform(N_SNPS, 1.0), &mut rng).unwrap();
    let (r0, r1) = (adjacent_r2(&g0), adjacent_r2(&genome::dosage_matrix(&next.genotypes)));
    assert!(r0 > 0.1);
    assert!((r1 - r0).abs() < 0.1 * r0, "G0 {r0} G1 {r1}");
}
