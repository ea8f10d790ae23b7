//! Host phenotype `y = αᵀG + ωᵀB + ε`, effect calibration and breeding values.

use rand::seq::index;
use rand::Rng;

use crate::composition::ClrVector;
use crate::error::{Error, Result};
use crate::io::DosageMatrix;
use crate::microbiome::BetaMatrix;
use crate::{stats, Scalar};

/// Shape and scale of the Gamma law of direct SNP effect magnitudes.
pub const ALPHA_GAMMA: (f64, f64) = (0.4, 5.0);
/// Shape and scale of the Gamma law of taxon effect magnitudes.
pub const OMEGA_GAMMA: (f64, f64) = (1.4, 3.8);

/// Relative tolerance of the calibration iteration.
pub const CALIBRATION_TOLERANCE: f64 = 1e-12;
pub const CALIBRATION_MAX_ITER: usize = 500;

/// Calibrated effects; the residual SD is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeModel<T> {
    /// Direct SNP effects, length n_g.
    pub alpha: Vec<T>,
    /// Taxon effects on the CLR scale, length n_b.
    pub omega: Vec<T>,
    pub scale_alpha: T,
    pub scale_omega: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreedingValues<T> {
    pub bv_d: Vec<T>,
    pub bv_m: Vec<T>,
    pub bv_t: Vec<T>,
}

/// Realized variance fractions of one generation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Components {
    pub h2_d: f64,
    pub b2: f64,
    pub h2_total: f64,
}

fn signed_gamma<T: Scalar, R: Rng + ?Sized>(rng: &mut R, (shape, scale): (f64, f64)) -> T {
    let m = T::gamma(rng, T::lit(shape), T::lit(scale));
    if rng.random::<bool>() {
        -m
    } else {
        m
    }
}

/// Unscaled effects: α̃ on `qtl_y` random SNPs and ω̃ on `causative_taxa`, with
/// Gamma magnitudes and a random sign each.
pub fn sample_effects<T: Scalar, R: Rng + ?Sized>(
    n_g: usize,
    qtl_y: usize,
    n_b: usize,
    causative_taxa: &[usize],
    rng: &mut R,
) -> Result<(Vec<T>, Vec<T>)> {
    if qtl_y > n_g {
        return Err(Error::Config(format!("qtl_y ({qtl_y}) exceeds the number of SNPs ({n_g})")));
    }
    if let Some(&s) = causative_taxa.iter().find(|&&s| s >= n_b) {
        return Err(Error::Data(format!("causative taxon {s} out of range")));
    }
    let mut alpha = vec![T::zero(); n_g];
    let mut snps = index::sample(rng, n_g, qtl_y).into_vec();
    snps.sort_unstable();
    for g in snps {
        alpha[g] = signed_gamma(rng, ALPHA_GAMMA);
    }
    let mut omega = vec![T::zero(); n_b];
    for &s in causative_taxa {
        omega[s] = signed_gamma(rng, OMEGA_GAMMA);
    }
    Ok((alpha, omega))
}

/// `αᵀg_i` for every individual.
pub fn direct_values<T: Scalar>(alpha: &[T], g: &DosageMatrix) -> Vec<T> {
    assert_eq!(alpha.len(), g.n_snps(), "α length differs from SNP count");
    let support: Vec<(usize, T)> = alpha.iter().enumerate().filter(|(_, a)| **a != T::zero()).map(|(i, &a)| (i, a)).collect();
    (0..g.n_ind())
        .map(|i| {
            let col = g.column(i);
            support.iter().map(|&(s, a)| a * T::lit(col[s] as f64)).sum()
        })
        .collect()
}

/// `ωᵀb_i` for every individual.
pub fn microbiota_values<T: Scalar>(omega: &[T], b: &[ClrVector<T>]) -> Vec<T> {
    b.iter()
        .map(|v| {
            assert_eq!(v.len(), omega.len(), "ω length differs from taxon count");
            v.values().iter().zip(omega).map(|(&x, &w)| x * w).sum()
        })
        .collect()
}

/// N(0, 1) residuals.
pub fn draw_residuals<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    (0..n).map(|_| T::standard_normal(rng)).collect()
}

/// Sample moments the calibration needs, in f64.
struct Moments {
    aa: f64,
    mm: f64,
    ee: f64,
    am: f64,
    ae: f64,
    me: f64,
}

impl Moments {
    fn new(a: &[f64], m: &[f64], e: Option<&[f64]>) -> Self {
        let zeros = vec![0.0; a.len()];
        let e = e.unwrap_or(&zeros);
        Self {
            aa: stats::variance(a),
            mm: stats::variance(m),
            ee: stats::variance(e),
            am: stats::covariance(a, m),
            ae: stats::covariance(a, e),
            me: stats::covariance(m, e),
        }
    }

    /// Phenotypic variance at scales (x, y).
    fn total(&self, x: f64, y: f64, nominal_residual: bool) -> f64 {
        let genetic = x * x * self.aa + y * y * self.mm + 2.0 * x * y * self.am;
        if nominal_residual {
            genetic + 1.0
        } else {
            genetic + self.ee + 2.0 * x * self.ae + 2.0 * y * self.me
        }
    }
}

/// Solves for scales `s_α, s_ω ≥ 0` such that on the base population
/// `var(s_α·α̃ᵀG)/V = h2_d` and `var(s_ω·ω̃ᵀB)/V = b2`.
///
/// With `residual` given, `V` is the variance of the full phenotype built with
/// those residuals, so the realized base components hit the targets exactly.
/// Without it, `V = var(s_α·α̃ᵀG + s_ω·ω̃ᵀB) + 1`.
///
/// The scales are found by fixed-point iteration on `V`
/// (`s_α = √(h2_d·V/var a)`, `s_ω = √(b2·V/var m)`), with Steffensen
/// extrapolation to speed up convergence when `h2_d + b2` is close to 1.
pub fn calibrate<T: Scalar>(
    alpha_raw: &[T],
    omega_raw: &[T],
    g0: &DosageMatrix,
    b0: &[ClrVector<T>],
    residual: Option<&[T]>,
    h2_d: f64,
    b2: f64,
) -> Result<PhenotypeModel<T>> {
    if !(0.0..1.0).contains(&h2_d) || !(0.0..1.0).contains(&b2) || h2_d + b2 >= 1.0 {
        return Err(Error::Config(format!("infeasible targets h2_d={h2_d}, b2={b2}")));
    }
    if g0.n_ind() != b0.len() {
        return Err(Error::Data("genotypes and microbiota cover different individuals".into()));
    }
    let to64 = |v: Vec<T>| -> Vec<f64> { v.into_iter().map(T::as_f64).collect() };
    let a = to64(direct_values(alpha_raw, g0));
    let m = to64(microbiota_values(omega_raw, b0));
    let e: Option<Vec<f64>> = residual.map(|r| {
        assert_eq!(r.len(), a.len(), "residual length differs from population size");
        r.iter().map(|x| x.as_f64()).collect()
    });
    let mom = Moments::new(&a, &m, e.as_deref());
    let nominal = e.is_none();
    if h2_d > 0.0 && !(mom.aa > 0.0) {
        return Err(Error::Numerical("direct genetic values have zero variance on the base population".into()));
    }
    if b2 > 0.0 && !(mom.mm > 0.0) {
        return Err(Error::Numerical("microbiota values have zero variance on the base population".into()));
    }

    let scales = |v: f64| -> (f64, f64) {
        let x = if h2_d > 0.0 { (h2_d * v / mom.aa).sqrt() } else { 0.0 };
        let y = if b2 > 0.0 { (b2 * v / mom.mm).sqrt() } else { 0.0 };
        (x, y)
    };
    let step = |v: f64| -> f64 {
        let (x, y) = scales(v);
        mom.total(x, y, nominal)
    };

    let tol = CALIBRATION_TOLERANCE.max(10.0 * f64::EPSILON);
    let mut v = if nominal { 1.0 } else { mom.ee.max(f64::MIN_POSITIVE) };
    let mut converged = false;
    let mut iterations = 0;
    while iterations < CALIBRATION_MAX_ITER {
        iterations += 1;
        let v1 = step(v);
        let v2 = step(v1);
        let denom = v2 - 2.0 * v1 + v;
        let mut next = v2;
        if denom.abs() > f64::EPSILON * v.abs() {
            let jump = v - (v1 - v).powi(2) / denom;
            // keep the extrapolation only when it improves on two plain steps
            if jump.is_finite() && jump > 0.0 && (step(jump) - jump).abs() < (step(v2) - v2).abs() {
                next = jump;
            }
        }
        if !(next.is_finite() && next > 0.0) {
            break;
        }
        let change = ((next - v) / next).abs();
        v = next;
        if change < tol {
            converged = true;
            break;
        }
    }
    let (x, y) = scales(v);
    let residual_gap = ((step(v) - v) / v).abs();
    if !converged && residual_gap > 1e-6 {
        return Err(Error::Calibration {
            iterations,
            scale_alpha: x,
            scale_omega: y,
        });
    }
    let (sx, sy) = (T::lit(x), T::lit(y));
    Ok(PhenotypeModel {
        alpha: alpha_raw.iter().map(|&a| a * sx).collect(),
        omega: omega_raw.iter().map(|&w| w * sy).collect(),
        scale_alpha: sx,
        scale_omega: sy,
    })
}

/// `y = αᵀG + ωᵀB + ε` with the given residuals.
pub fn phenotypes_with_residual<T: Scalar>(
    model: &PhenotypeModel<T>,
    g: &DosageMatrix,
    b: &[ClrVector<T>],
    residual: &[T],
) -> Vec<T> {
    let d = direct_values(&model.alpha, g);
    let m = microbiota_values(&model.omega, b);
    assert!(d.len() == m.len() && m.len() == residual.len(), "phenotype inputs cover different individuals");
    d.into_iter().zip(m).zip(residual).map(|((d, m), &e)| d + m + e).collect()
}

/// `y = αᵀG + ωᵀB + ε`, ε ~ N(0, 1).
pub fn compute_phenotypes<T: Scalar, R: Rng + ?Sized>(
    model: &PhenotypeModel<T>,
    g: &DosageMatrix,
    b: &[ClrVector<T>],
    rng: &mut R,
) -> Vec<T> {
    let e = draw_residuals(g.n_ind(), rng);
    phenotypes_with_residual(model, g, b, &e)
}

/// `BV_d = αᵀG`, `BV_m = ωᵀβG` (βG uncentered), `BV_t = BV_d + BV_m`.
pub fn breeding_values<T: Scalar>(model: &PhenotypeModel<T>, beta: &BetaMatrix<T>, g: &DosageMatrix) -> BreedingValues<T> {
    let bv_d = direct_values(&model.alpha, g);
    let bv_m: Vec<T> = (0..g.n_ind())
        .map(|i| {
            let e = beta.effect_on(g.column(i));
            e.iter().zip(&model.omega).map(|(&x, &w)| x * w).sum()
        })
        .collect();
    let bv_t = bv_d.iter().zip(&bv_m).map(|(&d, &m)| d + m).collect();
    BreedingValues { bv_d, bv_m, bv_t }
}

/// `var(αᵀG)/var(y)`, `var(ωᵀB)/var(y)`, `var(BV_t)/var(y)`.
pub fn realized_components<T: Scalar>(
    bv: &BreedingValues<T>,
    microbiota_effect: &[T],
    y: &[T],
) -> Result<Components> {
    let vy = stats::variance(y).as_f64();
    if !(vy > 0.0) {
        return Err(Error::Numerical("phenotype has zero variance".into()));
    }
    Ok(Components {
        h2_d: stats::variance(&bv.bv_d).as_f64() / vy,
        b2: stats::variance(microbiota_effect).as_f64() / vy,
        h2_total: stats::variance(&bv.bv_t).as_f64() / vy,
    })
}

/// TSV of `id\tvalue`.
pub fn format_effects<T: Scalar>(ids: &[String], values: &[T]) -> String {
    let mut out = String::from("id\tvalue\n");
    for (id, &v) in ids.iter().zip(values) {
        out.push_str(id);
        out.push('\t');
        out.push_str(&crate::io::format_real(v));
        out.push('\n');
    }
    out
}
