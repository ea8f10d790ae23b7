//! Base-population ingestion, TSV tables, and a synthetic base generator.
//!
//! Tables are UTF-8, tab-delimited, unquoted, with one header row holding
//! individual ids and one leading id column (marker or taxon). Lines starting
//! with `#` are ignored.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution};

use crate::composition::{multinomial_resample, Composition};
use crate::error::{Error, Result};
use crate::Scalar;

/// SNP dosages (0/1/2), stored individual-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DosageMatrix {
    n_snps: usize,
    n_ind: usize,
    data: Vec<u8>,
}

impl DosageMatrix {
    pub fn zeros(n_snps: usize, n_ind: usize) -> Self {
        Self {
            n_snps,
            n_ind,
            data: vec![0; n_snps * n_ind],
        }
    }

    /// Builds from per-individual dosage columns.
    pub fn from_columns(columns: Vec<Vec<u8>>) -> Result<Self> {
        let n_ind = columns.len();
        let n_snps = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_snps * n_ind);
        for (i, col) in columns.into_iter().enumerate() {
            if col.len() != n_snps {
                return Err(Error::Data(format!("dosage column {i} has {} SNPs, expected {n_snps}", col.len())));
            }
            if let Some(s) = col.iter().position(|&d| d > 2) {
                return Err(Error::Data(format!("dosage {} at SNP {s} of individual {i}", col[s])));
            }
            data.extend(col);
        }
        Ok(Self { n_snps, n_ind, data })
    }

    pub fn n_snps(&self) -> usize {
        self.n_snps
    }

    pub fn n_ind(&self) -> usize {
        self.n_ind
    }

    #[inline]
    pub fn get(&self, snp: usize, ind: usize) -> u8 {
        self.data[ind * self.n_snps + snp]
    }

    pub fn set(&mut self, snp: usize, ind: usize, value: u8) {
        assert!(value <= 2, "dosage must be 0, 1 or 2");
        self.data[ind * self.n_snps + snp] = value;
    }

    /// All dosages of one individual.
    pub fn column(&self, ind: usize) -> &[u8] {
        &self.data[ind * self.n_snps..(ind + 1) * self.n_snps]
    }

    pub fn row(&self, snp: usize) -> Vec<u8> {
        (0..self.n_ind).map(|i| self.get(snp, i)).collect()
    }

    pub fn select_columns(&self, order: &[usize]) -> Self {
        let mut data = Vec::with_capacity(order.len() * self.n_snps);
        for &i in order {
            data.extend_from_slice(self.column(i));
        }
        Self {
            n_snps: self.n_snps,
            n_ind: order.len(),
            data,
        }
    }
}

/// Non-negative taxa counts, stored sample-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    n_taxa: usize,
    n_ind: usize,
    data: Vec<u64>,
}

impl CountMatrix {
    pub fn from_columns(columns: Vec<Vec<u64>>) -> Result<Self> {
        let n_ind = columns.len();
        let n_taxa = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_taxa * n_ind);
        for (i, col) in columns.into_iter().enumerate() {
            if col.len() != n_taxa {
                return Err(Error::Data(format!("count column {i} has {} taxa, expected {n_taxa}", col.len())));
            }
            data.extend(col);
        }
        Ok(Self { n_taxa, n_ind, data })
    }

    pub fn n_taxa(&self) -> usize {
        self.n_taxa
    }

    pub fn n_ind(&self) -> usize {
        self.n_ind
    }

    #[inline]
    pub fn get(&self, taxon: usize, ind: usize) -> u64 {
        self.data[ind * self.n_taxa + taxon]
    }

    pub fn column(&self, ind: usize) -> &[u64] {
        &self.data[ind * self.n_taxa..(ind + 1) * self.n_taxa]
    }

    pub fn row(&self, taxon: usize) -> Vec<u64> {
        (0..self.n_ind).map(|i| self.get(taxon, i)).collect()
    }

    pub fn select_columns(&self, order: &[usize]) -> Self {
        let mut data = Vec::with_capacity(order.len() * self.n_taxa);
        for &i in order {
            data.extend_from_slice(self.column(i));
        }
        Self {
            n_taxa: self.n_taxa,
            n_ind: order.len(),
            data,
        }
    }
}

/// Paired base-population genotypes and taxa counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseInputs {
    pub individual_ids: Vec<String>,
    pub snp_ids: Vec<String>,
    pub taxon_ids: Vec<String>,
    /// n_g × N.
    pub genotypes: DosageMatrix,
    /// n_b × N.
    pub taxa_counts: CountMatrix,
}

impl BaseInputs {
    pub fn n_individuals(&self) -> usize {
        self.individual_ids.len()
    }

    pub fn n_snps(&self) -> usize {
        self.snp_ids.len()
    }

    pub fn n_taxa(&self) -> usize {
        self.taxon_ids.len()
    }

    /// Checks every invariant of a base population.
    pub fn validate(&self) -> Result<()> {
        let n = self.individual_ids.len();
        if n == 0 {
            return Err(Error::Data("base population has no individuals".into()));
        }
        if self.genotypes.n_ind() != n || self.taxa_counts.n_ind() != n {
            return Err(Error::Data("matrix column counts do not match the id list".into()));
        }
        if self.genotypes.n_snps() != self.snp_ids.len() || self.taxa_counts.n_taxa() != self.taxon_ids.len() {
            return Err(Error::Data("matrix row counts do not match the id lists".into()));
        }
        if self.snp_ids.is_empty() || self.taxon_ids.is_empty() {
            return Err(Error::Data("base population needs at least one SNP and one taxon".into()));
        }
        check_unique(&self.individual_ids, "individual")?;
        for i in 0..n {
            if let Some(s) = self.genotypes.column(i).iter().position(|&d| d > 2) {
                return Err(Error::Data(format!(
                    "genotype {} at ({}, {}) is not 0, 1 or 2",
                    self.genotypes.get(s, i),
                    self.snp_ids[s],
                    self.individual_ids[i]
                )));
            }
            if self.taxa_counts.column(i).iter().sum::<u64>() == 0 {
                return Err(Error::Data(format!(
                    "taxa counts of individual '{}' sum to zero",
                    self.individual_ids[i]
                )));
            }
        }
        Ok(())
    }
}

/// A parsed table: header ids, row ids and raw cells.
struct RawTable {
    columns: Vec<String>,
    rows: Vec<String>,
    cells: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<RawTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text, &path.display().to_string())
}

fn parse_table(text: &str, name: &str) -> Result<RawTable> {
    let mut lines = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{name}: empty table")))?;
    let columns: Vec<String> = header.split('\t').skip(1).map(|s| s.trim().to_string()).collect();
    if columns.is_empty() {
        return Err(Error::Data(format!("{name}: header has no individual ids")));
    }
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let mut parts = line.split('\t');
        let id = parts.next().unwrap_or("").trim().to_string();
        let values: Vec<String> = parts.map(|s| s.trim().to_string()).collect();
        if values.len() != columns.len() {
            return Err(Error::Data(format!(
                "{name}: row '{id}' (data line {}) has {} values, header has {} ids",
                lineno + 1,
                values.len(),
                columns.len()
            )));
        }
        rows.push(id);
        cells.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{name}: table has no data rows")));
    }
    Ok(RawTable { columns, rows, cells })
}

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::Data(format!("duplicate {what} id '{id}'")));
        }
    }
    Ok(())
}

/// Loads and validates the paired base-population tables.
///
/// Microbiota columns are reordered to follow the genotype table's id order.
pub fn load_base_inputs(genotype_path: &Path, microbiota_path: &Path) -> Result<BaseInputs> {
    let geno = read_table(genotype_path)?;
    let micro = read_table(microbiota_path)?;
    base_from_tables(geno, micro)
}

/// Same as [`load_base_inputs`] but from in-memory text.
pub fn parse_base_inputs(genotype_text: &str, microbiota_text: &str) -> Result<BaseInputs> {
    let geno = parse_table(genotype_text, "genotypes")?;
    let micro = parse_table(microbiota_text, "microbiota")?;
    base_from_tables(geno, micro)
}

fn base_from_tables(geno: RawTable, micro: RawTable) -> Result<BaseInputs> {
    check_unique(&geno.columns, "individual (genotype table)")?;
    check_unique(&micro.columns, "individual (microbiota table)")?;
    check_unique(&geno.rows, "SNP")?;
    check_unique(&micro.rows, "taxon")?;

    let g_ids: BTreeSet<&str> = geno.columns.iter().map(String::as_str).collect();
    let m_ids: BTreeSet<&str> = micro.columns.iter().map(String::as_str).collect();
    if g_ids != m_ids {
        let unmatched: Vec<&str> = g_ids.symmetric_difference(&m_ids).copied().collect();
        return Err(Error::Data(format!(
            "individual ids differ between genotype and microbiota tables: {}",
            unmatched.join(", ")
        )));
    }

    let n = geno.columns.len();
    let mut dosage_cols = vec![Vec::with_capacity(geno.rows.len()); n];
    for (r, row) in geno.cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let d = match cell.as_str() {
                "0" => 0u8,
                "1" => 1,
                "2" => 2,
                _ => {
                    return Err(Error::Data(format!(
                        "genotype '{cell}' at ({}, {}) is not 0, 1 or 2",
                        geno.rows[r], geno.columns[c]
                    )))
                }
            };
            dosage_cols[c].push(d);
        }
    }

    let position: HashMap<&str, usize> = micro.columns.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut count_cols_micro = vec![Vec::with_capacity(micro.rows.len()); n];
    for (r, row) in micro.cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let k: u64 = cell.parse().map_err(|_| {
                Error::Data(format!(
                    "count '{cell}' at ({}, {}) is not a non-negative integer",
                    micro.rows[r], micro.columns[c]
                ))
            })?;
            count_cols_micro[c].push(k);
        }
    }
    let count_cols: Vec<Vec<u64>> = geno
        .columns
        .iter()
        .map(|id| std::mem::take(&mut count_cols_micro[position[id.as_str()]]))
        .collect();

    let base = BaseInputs {
        individual_ids: geno.columns,
        snp_ids: geno.rows,
        taxon_ids: micro.rows,
        genotypes: DosageMatrix::from_columns(dosage_cols)?,
        taxa_counts: CountMatrix::from_columns(count_cols)?,
    };
    base.validate()?;
    Ok(base)
}

fn header(first: &str, ids: &[String]) -> String {
    let mut s = String::from(first);
    for id in ids {
        s.push('\t');
        s.push_str(id);
    }
    s.push('\n');
    s
}

/// Renders an n_g × N dosage table.
pub fn format_dosages(snp_ids: &[String], ind_ids: &[String], g: &DosageMatrix) -> String {
    let mut out = header("snp_id", ind_ids);
    for (s, id) in snp_ids.iter().enumerate() {
        out.push_str(id);
        for i in 0..g.n_ind() {
            out.push('\t');
            out.push((b'0' + g.get(s, i)) as char);
        }
        out.push('\n');
    }
    out
}

/// Renders an n_b × N integer count table.
pub fn format_counts<C: Copy + std::fmt::Display>(taxon_ids: &[String], ind_ids: &[String], columns: &[&[C]]) -> String {
    let mut out = header("taxon_id", ind_ids);
    for (t, id) in taxon_ids.iter().enumerate() {
        out.push_str(id);
        for col in columns {
            let _ = write!(out, "\t{}", col[t]);
        }
        out.push('\n');
    }
    out
}

/// Formats a real with 17 significant digits (exact round trip for `f64`).
pub fn format_real<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

/// Renders an n_b × N real-valued table, one column per individual.
pub fn format_reals<T: Scalar>(first: &str, row_ids: &[String], ind_ids: &[String], columns: &[&[T]]) -> String {
    let mut out = header(first, ind_ids);
    for (r, id) in row_ids.iter().enumerate() {
        out.push_str(id);
        for col in columns {
            out.push('\t');
            out.push_str(&format_real(col[r]));
        }
        out.push('\n');
    }
    out
}

/// Parses a real-valued table written by [`format_reals`] into columns.
pub fn parse_real_columns<T: Scalar>(text: &str) -> Result<(Vec<String>, Vec<String>, Vec<Vec<T>>)> {
    let t = parse_table(text, "real table")?;
    let mut cols = vec![Vec::with_capacity(t.rows.len()); t.columns.len()];
    for (r, row) in t.cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Data(format!("value '{cell}' at ({}, {}) is not a number", t.rows[r], t.columns[c])))?;
            cols[c].push(T::lit(v));
        }
    }
    Ok((t.columns, t.rows, cols))
}

/// Parses a dosage table without pairing it to a microbiota table.
pub fn parse_dosages(text: &str) -> Result<(Vec<String>, Vec<String>, DosageMatrix)> {
    let t = parse_table(text, "genotypes")?;
    let mut cols = vec![Vec::with_capacity(t.rows.len()); t.columns.len()];
    for (r, row) in t.cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let d: u8 = cell
                .parse()
                .ok()
                .filter(|d| *d <= 2)
                .ok_or_else(|| Error::Data(format!("genotype '{cell}' at ({}, {})", t.rows[r], t.columns[c])))?;
            cols[c].push(d);
        }
    }
    Ok((t.columns, t.rows, DosageMatrix::from_columns(cols)?))
}

/// Writes both base tables (`genotypes.tsv`, `microbiota.tsv`) into `dir`.
pub fn write_base_inputs(base: &BaseInputs, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let g = dir.join("genotypes.tsv");
    fs::write(&g, format_dosages(&base.snp_ids, &base.individual_ids, &base.genotypes)).map_err(|e| Error::io(&g, e))?;
    let cols: Vec<&[u64]> = (0..base.n_individuals()).map(|i| base.taxa_counts.column(i)).collect();
    let m = dir.join("microbiota.tsv");
    fs::write(&m, format_counts(&base.taxon_ids, &base.individual_ids, &cols)).map_err(|e| Error::io(&m, e))?;
    Ok(())
}

/// Knobs of the synthetic base generator. These are test plumbing, not a
/// model of any real population.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOptions {
    /// Beta(a, a) prior on per-SNP allele frequency.
    pub allele_freq_beta: f64,
    /// SD of the log-normal mean abundance profile.
    pub profile_sd: f64,
    /// SD of the per-individual log-abundance perturbation.
    pub individual_sd: f64,
    /// Sequencing depth per individual.
    pub depth: u32,
    /// Beta(a, b) prior on each taxon's prevalence; a taxon is absent from an
    /// individual with probability `1 − prevalence`. `None` keeps every taxon
    /// present everywhere.
    pub prevalence_beta: Option<(f64, f64)>,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            allele_freq_beta: 2.0,
            profile_sd: 1.5,
            individual_sd: 1.0,
            depth: 10_000,
            prevalence_beta: Some((2.0, 1.0)),
        }
    }
}

/// Synthetic base population with default [`SyntheticOptions`].
pub fn generate_synthetic_base<R: Rng + ?Sized>(n_g: usize, n_b: usize, n: usize, rng: &mut R) -> Result<BaseInputs> {
    generate_synthetic_base_with(n_g, n_b, n, &SyntheticOptions::default(), rng)
}

/// Genotypes are Binomial(2, f) with f ~ Beta(a, a) per SNP. Counts are
/// Multinomial(depth, p_i) where `ln p_i` is a shared log-normal profile plus
/// per-individual Gaussian noise, and each taxon is missing from an
/// individual with probability one minus its prevalence. Sparse tables like
/// this keep the base dispersion comparable to what the transmission model
/// produces in later generations.
pub fn generate_synthetic_base_with<R: Rng + ?Sized>(
    n_g: usize,
    n_b: usize,
    n: usize,
    opts: &SyntheticOptions,
    rng: &mut R,
) -> Result<BaseInputs> {
    if n_g < 2 || n_b < 2 || n < 2 {
        return Err(Error::Data("synthetic base needs at least 2 SNPs, taxa and individuals".into()));
    }
    let beta = Beta::new(opts.allele_freq_beta, opts.allele_freq_beta)
        .map_err(|e| Error::Data(format!("allele frequency prior: {e}")))?;
    let mut cols = vec![Vec::with_capacity(n_g); n];
    for _ in 0..n_g {
        let f: f64 = beta.sample(rng);
        let binom = Binomial::new(2, f).expect("frequency in [0, 1]");
        for col in cols.iter_mut() {
            col.push(binom.sample(rng) as u8);
        }
    }
    let genotypes = DosageMatrix::from_columns(cols)?;

    let profile: Vec<f64> = (0..n_b).map(|_| opts.profile_sd * f64::standard_normal(rng)).collect();
    let prevalence: Vec<f64> = match opts.prevalence_beta {
        Some((a, b)) => {
            let prior = Beta::new(a, b).map_err(|e| Error::Data(format!("prevalence prior: {e}")))?;
            (0..n_b).map(|_| prior.sample(rng)).collect()
        }
        None => vec![1.0; n_b],
    };
    let mut count_cols: Vec<Vec<u64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut present: Vec<usize> = Vec::with_capacity(n_b);
        let mut weights: Vec<f64> = Vec::with_capacity(n_b);
        for (s, (&l, &q)) in profile.iter().zip(&prevalence).enumerate() {
            let w = (l + opts.individual_sd * f64::standard_normal(rng)).exp();
            if q >= 1.0 || rng.random::<f64>() < q {
                present.push(s);
                weights.push(w);
            }
        }
        if present.is_empty() {
            present.push(rng.random_range(0..n_b));
            weights.push(1.0);
        }
        let p = Composition::from_weights(&weights)?;
        let mut col = vec![0u64; n_b];
        for (&s, k) in present.iter().zip(multinomial_resample(&p, opts.depth, rng)) {
            col[s] = u64::from(k);
        }
        count_cols.push(col);
    }
    // every taxon is observed at least once, as in a filtered abundance table
    for s in 0..n_b {
        if count_cols.iter().all(|c| c[s] == 0) {
            count_cols[rng.random_range(0..n)][s] = 1;
        }
    }

    let width = |m: usize| m.to_string().len();
    let base = BaseInputs {
        individual_ids: (1..=n).map(|i| format!("ind{:0w$}", i, w = width(n))).collect(),
        snp_ids: (1..=n_g).map(|i| format!("snp{:0w$}", i, w = width(n_g))).collect(),
        taxon_ids: (1..=n_b).map(|i| format!("otu{:0w$}", i, w = width(n_b))).collect(),
        genotypes,
        taxa_counts: CountMatrix::from_columns(count_cols)?,
    };
    base.validate()?;
    Ok(base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const GENO: &str = "snp\ta\tb\tc\nsnp1\t0\t1\t2\nsnp2\t2\t2\t0\n";
    const MICRO: &str = "taxon\tc\ta\tb\notu1\t5\t0\t3\notu2\t1\t4\t0\n";

    #[test]
    fn minimal_well_formed_input() {
        let base = parse_base_inputs(GENO, MICRO).unwrap();
        assert_eq!(base.n_individuals(), 3);
        assert_eq!(base.individual_ids, ["a", "b", "c"]);
        // microbiota columns realigned to genotype order a, b, c
        assert_eq!(base.taxa_counts.column(0), &[0, 4]);
        assert_eq!(base.taxa_counts.column(2), &[5, 1]);
        assert_eq!(base.genotypes.get(0, 2), 2);
    }

    #[test]
    fn bad_genotype_names_location() {
        let geno = "snp\ta\tb\tc\nsnp1\t0\t3\t2\nsnp2\t2\t2\t0\n";
        let err = parse_base_inputs(geno, MICRO).unwrap_err().to_string();
        assert!(err.contains("snp1") && err.contains("b"), "{err}");
    }

    #[test]
    fn unmatched_ids_listed() {
        let micro = "taxon\ta\tb\tc\notu1\t1\t1\t1\n";
        let geno = "snp\ta\tb\td\nsnp1\t0\t1\t2\n";
        let err = parse_base_inputs(geno, micro).unwrap_err().to_string();
        assert!(err.contains('c') && err.contains('d'), "{err}");
    }

    #[test]
    fn zero_count_column_rejected() {
        let micro = "taxon\ta\tb\tc\notu1\t1\t0\t1\notu2\t1\t0\t1\n";
        let err = parse_base_inputs(GENO, micro).unwrap_err().to_string();
        assert!(err.contains("'b'"), "{err}");
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let geno = "snp\ta\tb\tc\nsnp1\t0\t1\n";
        assert!(parse_base_inputs(geno, MICRO).is_err());
    }

    #[test]
    fn synthetic_is_deterministic_and_valid() {
        let a = generate_synthetic_base(10, 20, 5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = generate_synthetic_base(10, 20, 5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        let ga = format_dosages(&a.snp_ids, &a.individual_ids, &a.genotypes);
        let gb = format_dosages(&b.snp_ids, &b.individual_ids, &b.genotypes);
        assert_eq!(ga.as_bytes(), gb.as_bytes());
        for i in 0..5 {
            assert!(a.genotypes.column(i).iter().all(|&d| d <= 2));
        }
    }

    #[test]
    fn synthetic_counts_are_sparse_but_every_taxon_observed() {
        let b = generate_synthetic_base(10, 200, 100, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let zeros = (0..100).map(|i| b.taxa_counts.column(i).iter().filter(|&&k| k == 0).count()).sum::<usize>();
        // mean prevalence of Beta(2, 1) is 2/3
        let frac = zeros as f64 / 20_000.0;
        assert!(frac > 0.25 && frac < 0.5, "{frac}");
        assert!((0..200).all(|s| b.taxa_counts.row(s).iter().any(|&k| k > 0)));
        assert!((0..100).all(|i| b.taxa_counts.column(i).iter().sum::<u64>() >= 10_000));

        let dense = SyntheticOptions {
            prevalence_beta: None,
            ..SyntheticOptions::default()
        };
        let d = generate_synthetic_base_with(10, 20, 30, &dense, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!((0..30).all(|i| d.taxa_counts.column(i).iter().sum::<u64>() == 10_000));
    }

    #[test]
    fn binomial_dosage_mean_at_half() {
        // Direct simulation of Binomial(2, 0.5) dosages over N = 10000.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let binom = Binomial::new(2, 0.5).unwrap();
        let n = 10_000;
        let mean = (0..n).map(|_| binom.sample(&mut rng) as f64).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02);
    }

    #[test]
    fn base_round_trip_through_files() {
        let base = generate_synthetic_base(30, 15, 8, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_base_inputs(&base, dir.path()).unwrap();
        let back = load_base_inputs(&dir.path().join("genotypes.tsv"), &dir.path().join("microbiota.tsv")).unwrap();
        assert_eq!(base, back);
    }

    #[test]
    fn real_table_round_trip_is_exact() {
        let ids = vec!["x".to_string(), "y".to_string()];
        let rows = vec!["r1".to_string(), "r2".to_string()];
        let c1 = [0.1f64, 1.0 / 3.0];
        let c2 = [std::f64::consts::PI, 1e-300];
        let text = format_reals("taxon_id", &rows, &ids, &[&c1[..], &c2[..]]);
        let (cols, r, parsed) = parse_real_columns::<f64>(&text).unwrap();
        assert_eq!(cols, ids);
        assert_eq!(r, rows);
        assert_eq!(parsed[0], c1);
        assert_eq!(parsed[1], c2);
    }
}
