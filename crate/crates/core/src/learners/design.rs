//! Design specifications: named covariates mapped to model matrix columns.

use crate::error::{Error, Result};

/// One term of a linear predictor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Intercept,
    /// Main effect of a named covariate.
    Main(String),
    /// Pairwise interaction of two named covariates.
    Interaction(String, String),
}

impl std::fmt::Display for Term {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Term::Intercept => write!(f, "1"),
            Term::Main(a) => write!(f, "{a}"),
            Term::Interaction(a, b) => write!(f, "{a}:{b}"),
        }
    }
}

/// An ordered list of terms; the intercept is always present and first.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    terms: Vec<Term>,
}

impl DesignSpec {
    /// Build a spec from terms, inserting the intercept if absent and
    /// rejecting duplicates.
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        let mut out = vec![Term::Intercept];
        for t in terms {
            if t == Term::Intercept {
                continue;
            }
            let canon = match t {
                Term::Interaction(a, b) if a > b => Term::Interaction(b, a),
                other => other,
            };
            if out.contains(&canon) {
                return Err(Error::Precondition(format!("duplicate term {canon}")));
            }
            out.push(canon);
        }
        Ok(Self { terms: out })
    }

    pub fn intercept_only() -> Self {
        Self { terms: vec![Term::Intercept] }
    }

    /// Intercept plus main effects of the given covariates.
    pub fn main_effects(names: &[&str]) -> Self {
        let mut terms = vec![Term::Intercept];
        terms.extend(names.iter().map(|n| Term::Main((*n).into())));
        Self { terms }
    }

    /// Intercept, main effects, and all pairwise interactions.
    pub fn with_pairwise(names: &[&str]) -> Self {
        let mut terms = vec![Term::Intercept];
        terms.extend(names.iter().map(|n| Term::Main((*n).into())));
        for i in 0..names.len() {
            for j in (i + 1)..names.len() {
                terms.push(Term::Interaction(names[i].into(), names[j].into()));
            }
        }
        Self { terms }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the intercept is always present
    }

    /// Human-readable formula, e.g. `1 + w1 + w2 + w1:w2`.
    pub fn formula(&self) -> String {
        self.terms.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" + ")
    }

    /// Covariate names used by this spec (deduplicated, in first-use order).
    pub fn covariate_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for t in &self.terms {
            match t {
                Term::Intercept => {}
                Term::Main(a) => {
                    if !names.contains(&a.as_str()) {
                        names.push(a);
                    }
                }
                Term::Interaction(a, b) => {
                    for n in [a.as_str(), b.as_str()] {
                        if !names.contains(&n) {
                            names.push(n);
                        }
                    }
                }
            }
        }
        names
    }

    /// Evaluate the model matrix for the given covariates (row-major, n×p).
    pub fn build_matrix(&self, covs: &CovariateSet) -> Result<Vec<f64>> {
        let col = |name: &str| -> Result<usize> {
            covs.col_index(name)
                .ok_or_else(|| Error::Precondition(format!("missing covariate '{name}'")))
        };
        enum Col {
            One,
            Single(usize),
            Product(usize, usize),
        }
        let mut cols = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            cols.push(match t {
                Term::Intercept => Col::One,
                Term::Main(a) => Col::Single(col(a)?),
                Term::Interaction(a, b) => Col::Product(col(a)?, col(b)?),
            });
        }
        let n = covs.n_rows();
        let p = cols.len();
        let mut x = vec![0.0; n * p];
        for i in 0..n {
            for (j, c) in cols.iter().enumerate() {
                x[i * p + j] = match *c {
                    Col::One => 1.0,
                    Col::Single(a) => covs.get(i, a),
                    Col::Product(a, b) => covs.get(i, a) * covs.get(i, b),
                };
            }
        }
        Ok(x)
    }
}

/// A named covariate table (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSet {
    names: Vec<String>,
    values: Vec<f64>,
    n_rows: usize,
}

impl CovariateSet {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let p = names.len();
        let n_rows = rows.len();
        let mut values = Vec::with_capacity(n_rows * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Precondition(format!(
                    "row {i} has {} values, expected {p}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(Self { names, values, n_rows })
    }

    /// Build from columns given as `(name, values)` pairs.
    pub fn from_columns(cols: &[(&str, &[f64])]) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::Precondition("at least one column required".into()));
        }
        let n_rows = cols[0].1.len();
        for (name, v) in cols {
            if v.len() != n_rows {
                return Err(Error::Precondition(format!(
                    "column '{name}' has length {}, expected {n_rows}",
                    v.len()
                )));
            }
        }
        let names = cols.iter().map(|(n, _)| (*n).to_string()).collect();
        let p = cols.len();
        let mut values = vec![0.0; n_rows * p];
        for (j, (_, v)) in cols.iter().enumerate() {
            for i in 0..n_rows {
                values[i * p + j] = v[i];
            }
        }
        Ok(Self { names, values, n_rows })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.names.len() + col]
    }

    pub fn col_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// New set containing the given rows (in the given order).
    pub fn subset(&self, rows: &[usize]) -> Self {
        let p = self.names.len();
        let mut values = Vec::with_capacity(rows.len() * p);
        for &r in rows {
            values.extend_from_slice(&self.values[r * p..(r + 1) * p]);
        }
        Self { names: self.names.clone(), values, n_rows: rows.len() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_spec_has_expected_terms() {
        let spec = DesignSpec::with_pairwise(&["w1", "w2", "w3"]);
        assert_eq!(spec.len(), 7); // 1 + 3 main + 3 pairwise
        assert_eq!(spec.terms()[0], Term::Intercept);
    }

    #[test]
    fn duplicate_terms_rejected() {
        let dup = DesignSpec::new(vec![
            Term::Main("w1".into()),
            Term::Main("w1".into()),
        ]);
        assert!(dup.is_err());
        // Interactions are order-insensitive.
        let dup2 = DesignSpec::new(vec![
            Term::Interaction("a".into(), "b".into()),
            Term::Interaction("b".into(), "a".into()),
        ]);
        assert!(dup2.is_err());
    }

    #[test]
    fn matrix_evaluation() {
        let covs =
            CovariateSet::from_columns(&[("w1", &[0.5, 1.0][..]), ("w2", &[1.0, 0.0][..])])
                .unwrap();
        let spec = DesignSpec::with_pairwise(&["w1", "w2"]);
        let x = spec.build_matrix(&covs).unwrap();
        // row 0: [1, 0.5, 1, 0.5]; row 1: [1, 1, 0, 0]
        assert_eq!(x, vec![1.0, 0.5, 1.0, 0.5, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn missing_covariate_is_named() {
        let covs = CovariateSet::from_columns(&[("w1", &[0.5][..])]).unwrap();
        let spec = DesignSpec::main_effects(&["w9"]);
        let err = spec.build_matrix(&covs).unwrap_err();
        assert!(err.to_string().contains("w9"));
    }
}
