//! Normalized Gaussian fuzzy basis (singleton fuzzifier, product inference,
//! center-average defuzzification).
//!
//! Rule `j` fires with `zeta_j(Z) = exp(-|Z - l_j|^2 / |eta_j|^2)` and the
//! regressor is `xi_j = zeta_j / sum_k zeta_k`. Only the scalar `xi^T xi`
//! enters the adaptation laws.

use crate::error::{check_len, check_positive, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyBasis {
    dim: usize,
    centers: Vec<f64>,
    widths: Vec<f64>,
    width_sq: Vec<f64>,
}

/// Regressor vector and whether the one-hot underflow fallback was used.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub xi: Vec<f64>,
    pub fallback: bool,
}

impl Regressor {
    pub fn norm_sq(&self) -> f64 {
        regressor_norm(&self.xi)
    }
}

impl FuzzyBasis {
    /// `centers` and `widths` hold one length-`dim` row per rule.
    pub fn new(dim: usize, centers: Vec<Vec<f64>>, widths: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "input dimension must be at least 1"));
        }
        if centers.is_empty() {
            return Err(Error::invalid("rules", "at least one rule is required"));
        }
        check_len("width rows", centers.len(), widths.len())?;
        let mut flat_c = Vec::with_capacity(dim * centers.len());
        let mut flat_w = Vec::with_capacity(dim * centers.len());
        for (c, w) in centers.iter().zip(&widths) {
            check_len("center", dim, c.len())?;
            check_len("width", dim, w.len())?;
            check_positive("eta", w)?;
            flat_c.extend_from_slice(c);
            flat_w.extend_from_slice(w);
        }
        let width_sq = flat_w
            .chunks(dim)
            .map(|w| w.iter().map(|v| v * v).sum())
            .collect();
        Ok(Self {
            dim,
            centers: flat_c,
            widths: flat_w,
            width_sq,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rule_count(&self) -> usize {
        self.width_sq.len()
    }

    pub fn center(&self, j: usize) -> &[f64] {
        &self.centers[j * self.dim..(j + 1) * self.dim]
    }

    pub fn width(&self, j: usize) -> &[f64] {
        &self.widths[j * self.dim..(j + 1) * self.dim]
    }

    fn scaled_dist(&self, j: usize, z: &[f64]) -> f64 {
        let d: f64 = self
            .center(j)
            .iter()
            .zip(z)
            .map(|(c, zi)| (zi - c) * (zi - c))
            .sum();
        d / self.width_sq[j]
    }

    fn nearest(&self, z: &[f64]) -> usize {
        (0..self.rule_count())
            .map(|j| (j, self.scaled_dist(j, z)))
            .fold(
                (0, f64::INFINITY),
                |best, cur| if cur.1 < best.1 { cur } else { best },
            )
            .0
    }

    /// Full regressor `xi(Z)`.
    pub fn basis(&self, z: &[f64]) -> Result<Regressor> {
        check_len("fuzzy input", self.dim, z.len())?;
        let zeta: Vec<f64> = (0..self.rule_count())
            .map(|j| (-self.scaled_dist(j, z)).exp())
            .collect();
        let total: f64 = zeta.iter().sum();
        if total > 0.0 && total.is_finite() {
            return Ok(Regressor {
                xi: zeta.iter().map(|v| v / total).collect(),
                fallback: false,
            });
        }
        log::warn!("fuzzy basis underflow at {z:?}; using nearest-center rule");
        let mut xi = vec![0.0; self.rule_count()];
        xi[self.nearest(z)] = 1.0;
        Ok(Regressor { xi, fallback: true })
    }

    /// `xi(Z)^T xi(Z)` without materializing the regressor, plus the fallback flag.
    pub fn norm_sq(&self, z: &[f64]) -> Result<(f64, bool)> {
        check_len("fuzzy input", self.dim, z.len())?;
        let (mut s1, mut s2) = (0.0, 0.0);
        for j in 0..self.rule_count() {
            let zeta = (-self.scaled_dist(j, z)).exp();
            s1 += zeta;
            s2 += zeta * zeta;
        }
        if s1 > 0.0 && s1.is_finite() {
            Ok((s2 / (s1 * s1), false))
        } else {
            log::warn!("fuzzy basis underflow at {z:?}; using nearest-center rule");
            Ok((1.0, true))
        }
    }
}

/// Cartesian grid of evenly spaced centers; width per dimension is the grid
/// spacing, or `hi - lo` for a single center.
pub fn make_grid_basis(ranges: &[(f64, f64)], counts: &[usize]) -> Result<FuzzyBasis> {
    if ranges.is_empty() {
        return Err(Error::invalid(
            "ranges",
            "at least one input dimension is required",
        ));
    }
    check_len("rule counts", ranges.len(), counts.len())?;
    let mut axes = Vec::with_capacity(ranges.len());
    let mut spacing = Vec::with_capacity(ranges.len());
    for (d, (&(lo, hi), &count)) in ranges.iter().zip(counts).enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(
                format!("range[{}]", d + 1),
                format!("need finite lo < hi, got [{lo}, {hi}]"),
            ));
        }
        if count == 0 {
            return Err(Error::invalid(format!("count[{}]", d + 1), "must be >= 1"));
        }
        if count == 1 {
            axes.push(vec![0.5 * (lo + hi)]);
            spacing.push(hi - lo);
        } else {
            let step = (hi - lo) / (count - 1) as f64;
            axes.push((0..count).map(|k| lo + step * k as f64).collect());
            spacing.push(step);
        }
    }
    let total: usize = counts.iter().product();
    let mut centers = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut c = vec![0.0; ranges.len()];
        for d in (0..ranges.len()).rev() {
            c[d] = axes[d][rem % counts[d]];
            rem /= counts[d];
        }
        centers.push(c);
    }
    FuzzyBasis::new(ranges.len(), centers, vec![spacing; total])
}

/// `xi^T xi`.
pub fn regressor_norm(xi: &[f64]) -> f64 {
    xi.iter().map(|v| v * v).sum()
}
