//! Host genome: phased haplotypes under Haldane recombination, plus pedigree.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::io::DosageMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub fn code(self) -> &'static str {
        match self {
            Sex::Female => "F",
            Sex::Male => "M",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Two haplotypes of 0/1 alleles; dosage is their sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhasedGenotype {
    pub hap_a: Vec<u8>,
    pub hap_b: Vec<u8>,
}

impl PhasedGenotype {
    pub fn new(hap_a: Vec<u8>, hap_b: Vec<u8>) -> Self {
        assert_eq!(hap_a.len(), hap_b.len(), "haplotype lengths differ");
        Self { hap_a, hap_b }
    }

    pub fn n_snps(&self) -> usize {
        self.hap_a.len()
    }

    #[inline]
    pub fn dosage(&self, snp: usize) -> u8 {
        self.hap_a[snp] + self.hap_b[snp]
    }

    pub fn dosages(&self) -> Vec<u8> {
        self.hap_a.iter().zip(&self.hap_b).map(|(a, b)| a + b).collect()
    }
}

/// Dosage matrix of a list of phased genotypes.
pub fn dosage_matrix(genotypes: &[PhasedGenotype]) -> DosageMatrix {
    DosageMatrix::from_columns(genotypes.iter().map(PhasedGenotype::dosages).collect())
        .expect("phased genotypes always give valid dosages")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PedigreeEntry {
    pub id: String,
    pub generation: usize,
    pub sire: Option<String>,
    pub dam: Option<String>,
    /// Index of the sire within the previous generation.
    pub sire_index: Option<usize>,
    pub dam_index: Option<usize>,
    pub sex: Sex,
}

/// Per-SNP positions in Morgans, grouped into chromosomes.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneticMap {
    positions: Vec<f64>,
    /// Half-open SNP index ranges, one per chromosome.
    chromosomes: Vec<(usize, usize)>,
}

impl GeneticMap {
    /// `n_snps` equally spaced over one chromosome of `length` Morgans.
    pub fn uniform(n_snps: usize, length: f64) -> Self {
        let positions = if n_snps <= 1 {
            vec![0.0; n_snps]
        } else {
            (0..n_snps).map(|i| length * i as f64 / (n_snps - 1) as f64).collect()
        };
        Self {
            positions,
            chromosomes: vec![(0, n_snps)],
        }
    }

    /// Builds a map from (chromosome, position) pairs in SNP order.
    pub fn from_entries(entries: &[(String, f64)]) -> Result<Self> {
        let mut chromosomes = Vec::new();
        let mut seen = Vec::<&str>::new();
        let mut start = 0;
        for i in 0..entries.len() {
            let (chrom, pos) = (&entries[i].0, entries[i].1);
            if !pos.is_finite() || pos < 0.0 {
                return Err(Error::Data(format!("map position {pos} of SNP {i} is invalid")));
            }
            if i > start && entries[i - 1].0 == *chrom && pos < entries[i - 1].1 {
                return Err(Error::Data(format!("map positions decrease at SNP {i} on chromosome {chrom}")));
            }
            if i + 1 == entries.len() || entries[i + 1].0 != *chrom {
                if seen.contains(&chrom.as_str()) {
                    return Err(Error::Data(format!("chromosome {chrom} is not contiguous in the map")));
                }
                seen.push(chrom);
                chromosomes.push((start, i + 1));
                start = i + 1;
            }
        }
        Ok(Self {
            positions: entries.iter().map(|e| e.1).collect(),
            chromosomes,
        })
    }

    /// Reads `chromosome\tsnp_id\tposition_morgans` with a header row. SNP ids
    /// must match `snp_ids` in order.
    pub fn load(path: &Path, snp_ids: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').map(str::trim).collect();
            if f.len() != 3 {
                return Err(Error::Data(format!("{}: line {} needs 3 columns", path.display(), lineno + 1)));
            }
            let pos: f64 = f[2]
                .parse()
                .map_err(|_| Error::Data(format!("{}: bad position '{}' on line {}", path.display(), f[2], lineno + 1)))?;
            let k = entries.len();
            if snp_ids.get(k).map(String::as_str) != Some(f[1]) {
                return Err(Error::Data(format!(
                    "{}: map SNP '{}' does not match genotype SNP {}",
                    path.display(),
                    f[1],
                    snp_ids.get(k).map_or("<none>", String::as_str)
                )));
            }
            entries.push((f[0].to_string(), pos));
        }
        if entries.len() != snp_ids.len() {
            return Err(Error::Data(format!(
                "map has {} SNPs, genotypes have {}",
                entries.len(),
                snp_ids.len()
            )));
        }
        Self::from_entries(&entries)
    }

    pub fn n_snps(&self) -> usize {
        self.positions.len()
    }

    pub fn chromosomes(&self) -> &[(usize, usize)] {
        &self.chromosomes
    }
}

/// Phases dosages: homozygous sites are forced, heterozygous sites are
/// 0|1 or 1|0 with probability ½ each.
pub fn phase_base_population<R: Rng + ?Sized>(genotypes: &DosageMatrix, rng: &mut R) -> Vec<PhasedGenotype> {
    (0..genotypes.n_ind())
        .map(|i| {
            let col = genotypes.column(i);
            let mut a = Vec::with_capacity(col.len());
            let mut b = Vec::with_capacity(col.len());
            for &d in col {
                let (x, y) = match d {
                    0 => (0, 0),
                    2 => (1, 1),
                    _ => {
                        if rng.random::<bool>() {
                            (0, 1)
                        } else {
                            (1, 0)
                        }
                    }
                };
                a.push(x);
                b.push(y);
            }
            PhasedGenotype::new(a, b)
        })
        .collect()
}

/// One recombinant gamete under the Haldane model.
pub fn make_gamete<R: Rng + ?Sized>(parent: &PhasedGenotype, map: &GeneticMap, rng: &mut R) -> Vec<u8> {
    assert_eq!(parent.n_snps(), map.n_snps(), "genetic map does not match genotype length");
    let mut out = Vec::with_capacity(parent.n_snps());
    let mut crossovers = Vec::new();
    for &(lo, hi) in map.chromosomes() {
        if lo == hi {
            continue;
        }
        let start = map.positions[lo];
        let length = map.positions[hi - 1] - start;
        crossovers.clear();
        if length > 0.0 {
            let k = Poisson::new(length).expect("positive length").sample(rng) as usize;
            crossovers.extend((0..k).map(|_| start + length * rng.random::<f64>()));
            crossovers.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        }
        let mut from_a = rng.random::<bool>();
        let mut next = 0;
        for s in lo..hi {
            while next < crossovers.len() && crossovers[next] < map.positions[s] {
                from_a = !from_a;
                next += 1;
            }
            out.push(if from_a { parent.hap_a[s] } else { parent.hap_b[s] });
        }
    }
    out
}

/// Offspring with a maternal (`hap_a`) and paternal (`hap_b`) gamete.
pub fn mate<R: Rng + ?Sized>(sire: &PhasedGenotype, dam: &PhasedGenotype, map: &GeneticMap, rng: &mut R) -> PhasedGenotype {
    assert_eq!(sire.n_snps(), dam.n_snps(), "parents differ in genotype length");
    let hap_a = make_gamete(dam, map, rng);
    let hap_b = make_gamete(sire, map, rng);
    PhasedGenotype::new(hap_a, hap_b)
}

/// `round(x)` with halves rounded up.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Sex vector with `round_half_up(ratio·n)` females, in random order.
pub fn assign_sexes<R: Rng + ?Sized>(n: usize, female_ratio: f64, rng: &mut R) -> Vec<Sex> {
    let n_f = round_half_up(female_ratio * n as f64).min(n);
    let mut sexes: Vec<Sex> = (0..n).map(|i| if i < n_f { Sex::Female } else { Sex::Male }).collect();
    sexes.shuffle(rng);
    sexes
}

/// A freshly built offspring generation.
#[derive(Debug, Clone)]
pub struct Offspring {
    pub genotypes: Vec<PhasedGenotype>,
    pub pedigree: Vec<PedigreeEntry>,
}

/// Parent pool of the previous generation.
pub struct ParentPool<'a> {
    pub genotypes: &'a [PhasedGenotype],
    pub ids: &'a [String],
}

/// Produces exactly `n_ind` offspring. Each offspring draws its dam uniformly
/// (with replacement) from `selected_f` and its sire from `selected_m`;
/// both are indices into `parents`.
#[allow(clippy::too_many_arguments)]
pub fn build_generation<R: Rng + ?Sized>(
    parents: &ParentPool<'_>,
    selected_f: &[usize],
    selected_m: &[usize],
    n_ind: usize,
    sex_ratio: f64,
    generation: usize,
    map: &GeneticMap,
    rng: &mut R,
) -> Result<Offspring> {
    if selected_f.is_empty() || selected_m.is_empty() {
        return Err(Error::Data(format!(
            "cannot build generation {generation}: {} dams and {} sires selected",
            selected_f.len(),
            selected_m.len()
        )));
    }
    let sexes = assign_sexes(n_ind, sex_ratio, rng);
    let mut genotypes = Vec::with_capacity(n_ind);
    let mut pedigree = Vec::with_capacity(n_ind);
    for (i, sex) in sexes.into_iter().enumerate() {
        let dam = selected_f[rng.random_range(0..selected_f.len())];
        let sire = selected_m[rng.random_range(0..selected_m.len())];
        genotypes.push(mate(&parents.genotypes[sire], &parents.genotypes[dam], map, rng));
        pedigree.push(PedigreeEntry {
            id: offspring_id(generation, i),
            generation,
            sire: Some(parents.ids[sire].clone()),
            dam: Some(parents.ids[dam].clone()),
            sire_index: Some(sire),
            dam_index: Some(dam),
            sex,
        });
    }
    Ok(Offspring { genotypes, pedigree })
}

/// Identifier of offspring `i` (0-based) of generation `t`.
pub fn offspring_id(generation: usize, i: usize) -> String {
    format!("G{generation}_{:05}", i + 1)
}
