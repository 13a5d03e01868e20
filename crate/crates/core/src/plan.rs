use nalgebra::DMatrix;
use serde_json::{json, Value};

/// Default tolerance on plan marginals.
pub const TOL_MARG: f64 = 1e-9;

/// A coupling between two discrete measures, with its cost and (for exact
/// solves) Kantorovich potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub matrix: DMatrix<f64>,
    pub source_weights: Vec<f64>,
    pub target_weights: Vec<f64>,
    /// `sum_ij C_ij P_ij` for the ground cost `||x - y||^p`.
    pub cost: f64,
    /// Exponent of the ground cost the plan was computed for.
    pub p: f64,
    pub dual_f: Option<Vec<f64>>,
    pub dual_g: Option<Vec<f64>>,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix.row_iter().map(|r| r.sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.matrix.column_iter().map(|c| c.sum()).collect()
    }

    /// Largest absolute deviation of a row or column sum from its marginal.
    pub fn marginal_residual(&self) -> f64 {
        let rows = self.row_sums().into_iter().zip(&self.source_weights);
        let cols = self.col_sums().into_iter().zip(&self.target_weights);
        rows.chain(cols).map(|(s, w)| (s - w).abs()).fold(0.0, f64::max)
    }

    /// Index pairs whose mass exceeds `threshold`, in row-major order.
    pub fn support(&self, threshold: f64) -> Vec<(usize, usize)> {
        let (n, m) = self.matrix.shape();
        (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .filter(|&(i, j)| self.matrix[(i, j)] > threshold)
            .collect()
    }

    /// Checks nonnegativity, marginals and (if present) dual feasibility and
    /// complementary slackness against `costs`. Returns the first failure.
    pub fn verify(&self, costs: &DMatrix<f64>, tol_marg: f64) -> Result<(), String> {
        if let Some(x) = self.matrix.iter().find(|x| **x < 0.0) {
            return Err(format!("negative plan entry {x}"));
        }
        let r = self.marginal_residual();
        if r > tol_marg {
            return Err(format!("marginal residual {r:e} exceeds {tol_marg:e}"));
        }
        if let (Some(f), Some(g)) = (&self.dual_f, &self.dual_g) {
            let (n, m) = costs.shape();
            for i in 0..n {
                for j in 0..m {
                    let slack = costs[(i, j)] - f[i] - g[j];
                    if slack < -1e-9 {
                        return Err(format!("dual infeasible at ({i},{j}): slack {slack:e}"));
                    }
                    if self.matrix[(i, j)] > 1e-12 && slack > 1e-9 {
                        return Err(format!("complementary slackness fails at ({i},{j}): slack {slack:e}"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dual_value(&self) -> Option<f64> {
        let f = self.dual_f.as_ref()?;
        let g = self.dual_g.as_ref()?;
        let a: f64 = f.iter().zip(&self.source_weights).map(|(x, w)| x * w).sum();
        let b: f64 = g.iter().zip(&self.target_weights).map(|(x, w)| x * w).sum();
        Some(a + b)
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Vec<f64>> = self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect();
        json!({
            "matrix": rows,
            "source_weights": self.source_weights,
            "target_weights": self.target_weights,
            "cost": self.cost,
            "p": self.p,
            "dual_f": self.dual_f,
            "dual_g": self.dual_g,
        })
    }
}
