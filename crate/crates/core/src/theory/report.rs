use serde::Serialize;

use super::OptimalT;
use crate::error::{invalid, Result};
use crate::numfmt::sig17;

pub const TERM_NAMES: [&str; 6] = [
    "path_term",
    "estimation_term",
    "confidence_term",
    "sample_term",
    "complexity_term",
    "tail_term",
];

/// Term-by-term evaluation of the generalization bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub eps0: f64,
    pub t: f64,
    pub n: f64,
    pub delta_avg: f64,
    pub coefficients: [f64; 6],
    /// Unscaled terms in the order of [`TERM_NAMES`].
    pub terms: [f64; 6],
    pub total: f64,
    pub comparison_exponential_total: f64,
    pub t_star: Option<OptimalT>,
}

impl BoundReport {
    pub fn recompute_total(&self) -> f64 {
        self.eps0 + self.coefficients.iter().zip(&self.terms).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn with_t_star(mut self, t_star: OptimalT) -> Self {
        self.t_star = Some(t_star);
        self
    }

    fn rows(&self) -> Vec<(String, String, String)> {
        let mut rows = vec![
            ("T".into(), String::new(), sig17(self.t)),
            ("n".into(), String::new(), sig17(self.n)),
            ("delta_avg".into(), String::new(), sig17(self.delta_avg)),
            ("eps0".into(), String::new(), sig17(self.eps0)),
        ];
        for ((name, c), v) in TERM_NAMES.iter().zip(&self.coefficients).zip(&self.terms) {
            rows.push((name.to_string(), sig17(*c), sig17(*v)));
        }
        rows.push(("total".into(), String::new(), sig17(self.total)));
        rows.push((
            "comparison_exponential_total".into(),
            String::new(),
            sig17(self.comparison_exponential_total),
        ));
        if let Some(ts) = &self.t_star {
            rows.push(("t_star_length_branch".into(), String::new(), sig17(ts.length_branch)));
            rows.push(("t_star_stationary_branch".into(), String::new(), sig17(ts.stationary_branch)));
            rows.push(("t_star".into(), String::new(), sig17(ts.t_star)));
            rows.push(("t_star_int".into(), String::new(), ts.t_star_int.to_string()));
        }
        rows
    }

    /// `quantity,coefficient,value` rows.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["quantity", "coefficient", "value"])?;
        for (a, b, c) in self.rows() {
            w.write_record([a, b, c])?;
        }
        let bytes = w.into_inner().map_err(|e| invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let rows = self.rows();
        let head = ("quantity".to_string(), "coefficient".to_string(), "value".to_string());
        let all: Vec<_> = std::iter::once(&head).chain(&rows).collect();
        let w0 = all.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let w1 = all.iter().map(|r| r.1.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (a, b, c) in all {
            out.push_str(&format!("{a:<w0$}  {b:>w1$}  {c}\n"));
        }
        out
    }
}
