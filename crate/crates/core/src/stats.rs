//! Three-way factorial ANOVA with one observation per cell.
//!
//! With a single observation per cell the full model has no degrees of
//! freedom left over, so the three-way interaction is used as the error
//! term: main effects and two-way interactions are tested against it.
//! For a 2 × 3 × 4 design that gives 6 denominator degrees of freedom.
//!
//! Effect sizes are classical eta squared, `SS_effect / SS_total`.

use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnovaError {
    #[error("design is incomplete: missing cell {0}")]
    IncompleteDesign(String),
    #[error("cell {0} appears more than once")]
    DuplicateCell(String),
    #[error("factor `{0}` needs at least two levels")]
    DegenerateFactor(String),
    #[error("{0}")]
    Malformed(String),
    /// Every cell is fit exactly by main effects and two-way interactions;
    /// F is undefined. The table carries the sums of squares with no F or p.
    #[error("residual sum of squares is zero; F statistics are undefined")]
    ZeroResidual(Box<AnovaTable>),
}

/// A complete crossed design of three factors with one value per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorialDesign {
    pub factor_names: [String; 3],
    pub levels: [Vec<String>; 3],
    /// Row-major: index `(i * n1 + j) * n2 + k` for levels `(i, j, k)`.
    values: Vec<f64>,
}

impl FactorialDesign {
    pub fn new(
        factor_names: [String; 3],
        levels: [Vec<String>; 3],
        values: Vec<f64>,
    ) -> Result<Self, AnovaError> {
        for (name, lv) in factor_names.iter().zip(&levels) {
            if lv.len() < 2 {
                return Err(AnovaError::DegenerateFactor(name.clone()));
            }
        }
        let n = levels.iter().map(Vec::len).product::<usize>();
        if values.len() != n {
            return Err(AnovaError::IncompleteDesign(format!(
                "expected {n} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            factor_names,
            levels,
            values,
        })
    }

    /// Builds a design from `(level_a, level_b, level_c, value)` records.
    /// Levels are ordered by first appearance.
    pub fn from_records<S: AsRef<str>>(
        factor_names: [&str; 3],
        records: &[(S, S, S, f64)],
    ) -> Result<Self, AnovaError> {
        let mut levels: [Vec<String>; 3] = Default::default();
        for (a, b, c, _) in records {
            for (lv, name) in levels.iter_mut().zip([a, b, c]) {
                if !lv.iter().any(|l| l == name.as_ref()) {
                    lv.push(name.as_ref().to_string());
                }
            }
        }
        for (name, lv) in factor_names.iter().zip(&levels) {
            if lv.len() < 2 {
                return Err(AnovaError::DegenerateFactor(name.to_string()));
            }
        }
        let dims = [levels[0].len(), levels[1].len(), levels[2].len()];
        let mut values = vec![None; dims.iter().product()];
        for (a, b, c, v) in records {
            let pos =
                |lv: &Vec<String>, name: &S| lv.iter().position(|l| l == name.as_ref()).unwrap();
            let idx =
                (pos(&levels[0], a) * dims[1] + pos(&levels[1], b)) * dims[2] + pos(&levels[2], c);
            if values[idx].replace(*v).is_some() {
                return Err(AnovaError::DuplicateCell(format!(
                    "({}, {}, {})",
                    a.as_ref(),
                    b.as_ref(),
                    c.as_ref()
                )));
            }
        }
        let mut flat = Vec::with_capacity(values.len());
        for (idx, v) in values.into_iter().enumerate() {
            match v {
                Some(v) => flat.push(v),
                None => {
                    let (i, rest) = (idx / (dims[1] * dims[2]), idx % (dims[1] * dims[2]));
                    let (j, k) = (rest / dims[2], rest % dims[2]);
                    return Err(AnovaError::IncompleteDesign(format!(
                        "({}, {}, {})",
                        levels[0][i], levels[1][j], levels[2][k]
                    )));
                }
            }
        }
        Self::new(factor_names.map(String::from), levels, flat)
    }

    pub fn dims(&self) -> [usize; 3] {
        [
            self.levels[0].len(),
            self.levels[1].len(),
            self.levels[2].len(),
        ]
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let [_, n1, n2] = self.dims();
        self.values[(i * n1 + j) * n2 + k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            factor_names: self.factor_names.clone(),
            levels: self.levels.clone(),
            values: self.values.iter().copied().map(f).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub name: String,
    pub df: usize,
    pub ss: f64,
    pub ms: f64,
    pub f: Option<f64>,
    pub p: Option<f64>,
    pub eta_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub df: usize,
    pub ss: f64,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    /// Three main effects, then the AB, AC and BC interactions.
    pub effects: Vec<EffectRow>,
    pub residual: ResidualRow,
    pub total_ss: f64,
    pub total_df: usize,
}

impl AnovaTable {
    pub fn effect(&self, name: &str) -> Option<&EffectRow> {
        self.effects.iter().find(|e| e.name == name)
    }
}

impl fmt::Display for AnovaTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<20} {:>3} {:>12} {:>12} {:>9} {:>8} {:>7}",
            "Effect", "df", "SS", "MS", "F", "p", "eta^2"
        );
        for e in &self.effects {
            let fstat =
                e.f.map(|v| format!("{v:.2}"))
                    .unwrap_or_else(|| "n/a".into());
            let p = e.p.map(format_p).unwrap_or_else(|| "n/a".into());
            let _ = writeln!(
                out,
                "{:<20} {:>3} {:>12.4} {:>12.4} {:>9} {:>8} {:>7.3}",
                e.name, e.df, e.ss, e.ms, fstat, p, e.eta_squared
            );
        }
        let _ = writeln!(
            out,
            "{:<20} {:>3} {:>12.4} {:>12.4}",
            "Residual", self.residual.df, self.residual.ss, self.residual.ms
        );
        let _ = write!(
            out,
            "{:<20} {:>3} {:>12.4}",
            "Total", self.total_df, self.total_ss
        );
        f.write_str(&out)
    }
}

fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

/// Sums of squares by marginal means, F tests against the three-way
/// interaction.
pub fn anova(design: &FactorialDesign) -> Result<AnovaTable, AnovaError> {
    let [na, nb, nc] = design.dims();
    let n = (na * nb * nc) as f64;
    let y = |i, j, k| design.get(i, j, k);

    let grand = design.values.iter().sum::<f64>() / n;
    let mut a = vec![0.0; na];
    let mut b = vec![0.0; nb];
    let mut c = vec![0.0; nc];
    let mut ab = vec![vec![0.0; nb]; na];
    let mut ac = vec![vec![0.0; nc]; na];
    let mut bc = vec![vec![0.0; nc]; nb];
    for i in 0..na {
        for j in 0..nb {
            for k in 0..nc {
                let v = y(i, j, k);
                a[i] += v / (nb * nc) as f64;
                b[j] += v / (na * nc) as f64;
                c[k] += v / (na * nb) as f64;
                ab[i][j] += v / nc as f64;
                ac[i][k] += v / nb as f64;
                bc[j][k] += v / na as f64;
            }
        }
    }

    let sq = |x: f64| x * x;
    let ss_a = (nb * nc) as f64 * a.iter().map(|m| sq(m - grand)).sum::<f64>();
    let ss_b = (na * nc) as f64 * b.iter().map(|m| sq(m - grand)).sum::<f64>();
    let ss_c = (na * nb) as f64 * c.iter().map(|m| sq(m - grand)).sum::<f64>();
    let mut ss_ab = 0.0;
    let mut ss_ac = 0.0;
    let mut ss_bc = 0.0;
    let mut ss_res = 0.0;
    let mut ss_total = 0.0;
    for i in 0..na {
        for j in 0..nb {
            ss_ab += nc as f64 * sq(ab[i][j] - a[i] - b[j] + grand);
        }
        for k in 0..nc {
            ss_ac += nb as f64 * sq(ac[i][k] - a[i] - c[k] + grand);
        }
    }
    for j in 0..nb {
        for k in 0..nc {
            ss_bc += na as f64 * sq(bc[j][k] - b[j] - c[k] + grand);
        }
    }
    for i in 0..na {
        for j in 0..nb {
            for k in 0..nc {
                let v = y(i, j, k);
                ss_total += sq(v - grand);
                ss_res += sq(v - ab[i][j] - ac[i][k] - bc[j][k] + a[i] + b[j] + c[k] - grand);
            }
        }
    }

    let names = &design.factor_names;
    let df_res = (na - 1) * (nb - 1) * (nc - 1);
    let ms_res = ss_res / df_res as f64;
    let zero_residual = ss_res == 0.0 || ss_res <= 1e-12 * ss_total;
    let rows = [
        (names[0].clone(), na - 1, ss_a),
        (names[1].clone(), nb - 1, ss_b),
        (names[2].clone(), nc - 1, ss_c),
        (
            format!("{} x {}", names[0], names[1]),
            (na - 1) * (nb - 1),
            ss_ab,
        ),
        (
            format!("{} x {}", names[0], names[2]),
            (na - 1) * (nc - 1),
            ss_ac,
        ),
        (
            format!("{} x {}", names[1], names[2]),
            (nb - 1) * (nc - 1),
            ss_bc,
        ),
    ];
    let effects = rows
        .into_iter()
        .map(|(name, df, ss)| {
            let ms = ss / df as f64;
            let (f, p) = if zero_residual {
                (None, None)
            } else {
                let f = ms / ms_res;
                (Some(f), Some(f_upper_tail(f, df as f64, df_res as f64)))
            };
            EffectRow {
                name,
                df,
                ss,
                ms,
                f,
                p,
                eta_squared: if ss_total > 0.0 { ss / ss_total } else { 0.0 },
            }
        })
        .collect();
    let table = AnovaTable {
        effects,
        residual: ResidualRow {
            df: df_res,
            ss: ss_res,
            ms: ms_res,
        },
        total_ss: ss_total,
        total_df: na * nb * nc - 1,
    };
    if zero_residual {
        return Err(AnovaError::ZeroResidual(Box::new(table)));
    }
    Ok(table)
}

/// Reads `method,model,dataset,score` CSV rows (header optional) into a
/// Method × Model × Dataset design.
pub fn design_from_csv(text: &str) -> Result<FactorialDesign, AnovaError> {
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(AnovaError::Malformed(format!(
                "line {}: expected 4 columns, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let score = match fields[3].parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ if records.is_empty() && lineno == 0 => continue, // header
            _ => {
                return Err(AnovaError::Malformed(format!(
                    "line {}: score `{}` is not a number",
                    lineno + 1,
                    fields[3]
                )))
            }
        };
        records.push((
            fields[0].to_string(),
            fields[1].to_string(),
            fields[2].to_string(),
            score,
        ));
    }
    FactorialDesign::from_records(["Method", "Model", "Dataset"], &records)
}

// ---------------------------------------------------------------------------
// F distribution tail

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the series in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = LANCZOS[0];
    for (i, coef) in LANCZOS.iter().enumerate().skip(1) {
        sum += coef / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for the incomplete beta function, modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 10_000;

    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    // The fraction converges fast only below the mean; use symmetry above.
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Upper tail `P(F' > f)` of the F distribution with `(d1, d2)` degrees of
/// freedom: `1 - I_x(d1/2, d2/2)` with `x = d1·f / (d1·f + d2)`, evaluated as
/// `I_{1-x}(d2/2, d1/2)` to avoid cancellation.
pub fn f_upper_tail(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    let one_minus_x = d2 / (d1 * f + d2);
    regularized_beta(one_minus_x, d2 / 2.0, d1 / 2.0).clamp(0.0, 1.0)
}
