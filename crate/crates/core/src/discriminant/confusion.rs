use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patching::{CONTROL, INFECTED};

/// How error percentages are reduced to one decimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    /// Drop digits beyond the first decimal; this is how the published
    /// tables were printed.
    #[default]
    Truncate,
    HalfUp,
}

impl Rounding {
    /// `100·num/den` in tenths of a percent, computed exactly.
    pub fn tenths(self, num: u64, den: u64) -> Option<u64> {
        if den == 0 {
            return None;
        }
        Some(match self {
            Rounding::Truncate => 1000 * num / den,
            Rounding::HalfUp => (2000 * num + den) / (2 * den),
        })
    }
}

/// Two-class confusion counts indexed `[predicted][actual]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

/// The five error figures of a confusion table, in tenths of a percent.
/// `None` marks an empty row or column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub row_infected: Option<u64>,
    pub row_control: Option<u64>,
    pub column_infected: Option<u64>,
    pub column_control: Option<u64>,
    pub overall: Option<u64>,
}

pub fn format_tenths(t: Option<u64>) -> String {
    match t {
        Some(t) => format!("{}.{}", t / 10, t % 10),
        None => "NA".to_string(),
    }
}

impl ConfusionReport {
    pub fn values(&self) -> [Option<u64>; 5] {
        [
            self.row_infected,
            self.row_control,
            self.column_infected,
            self.column_control,
            self.overall,
        ]
    }

    pub fn formatted(&self) -> [String; 5] {
        self.values().map(format_tenths)
    }
}

pub fn confusion(predicted: &[u8], actual: &[u8]) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    let mut m = ConfusionMatrix::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        if p > 1 || a > 1 {
            return Err(Error::InvalidArgument(format!(
                "label pair ({p}, {a}) outside {{0, 1}}"
            )));
        }
        m.counts[p as usize][a as usize] += 1;
    }
    Ok(m)
}

const I: usize = INFECTED as usize;
const C: usize = CONTROL as usize;

impl ConfusionMatrix {
    /// Counts in table order: predicted infected/actual infected, predicted
    /// infected/actual control, predicted control/actual infected, predicted
    /// control/actual control.
    pub fn from_table(ii: u64, ic: u64, ci: u64, cc: u64) -> Self {
        let mut counts = [[0; 2]; 2];
        counts[I][I] = ii;
        counts[I][C] = ic;
        counts[C][I] = ci;
        counts[C][C] = cc;
        Self { counts }
    }

    pub fn table(&self) -> [u64; 4] {
        [
            self.counts[I][I],
            self.counts[I][C],
            self.counts[C][I],
            self.counts[C][C],
        ]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn errors(&self) -> u64 {
        self.counts[I][C] + self.counts[C][I]
    }

    pub fn merge(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        let mut out = *self;
        for p in 0..2 {
            for a in 0..2 {
                out.counts[p][a] += other.counts[p][a];
            }
        }
        out
    }

    /// Overall error as a fraction.
    pub fn error_rate(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            f64::NAN
        } else {
            self.errors() as f64 / t as f64
        }
    }

    pub fn report(&self, rounding: Rounding) -> ConfusionReport {
        let row = |p: usize| {
            let wrong = self.counts[p][1 - p];
            rounding.tenths(wrong, self.counts[p][0] + self.counts[p][1])
        };
        let col = |a: usize| {
            let wrong = self.counts[1 - a][a];
            rounding.tenths(wrong, self.counts[0][a] + self.counts[1][a])
        };
        ConfusionReport {
            row_infected: row(I),
            row_control: row(C),
            column_infected: col(I),
            column_control: col(C),
            overall: rounding.tenths(self.errors(), self.total()),
        }
    }

    /// Table layout: rows are predicted classes, columns the actual classes
    /// followed by the row error, and a final row of column errors.
    pub fn to_csv_string(&self, rounding: Rounding) -> String {
        let r = self.report(rounding).formatted();
        let [ii, ic, ci, cc] = self.table();
        format!(
            "predicted,infected,control,error_pct\ninfected,{ii},{ic},{}\ncontrol,{ci},{cc},{}\nerror_pct,{},{},{}\n",
            r[0], r[1], r[2], r[3], r[4]
        )
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, rounding: Rounding) -> Result<()> {
        std::fs::write(path, self.to_csv_string(rounding))?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<ConfusionMatrix> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut cells = Vec::new();
        for rec in rdr.records().take(2) {
            let rec = rec?;
            for j in 1..3 {
                let v = rec
                    .get(j)
                    .ok_or_else(|| Error::Shape("confusion row is too short".into()))?;
                cells.push(
                    v.trim().parse::<u64>().map_err(|e| {
                        Error::InvalidArgument(format!("confusion count {v:?}: {e}"))
                    })?,
                );
            }
        }
        if cells.len() != 4 {
            return Err(Error::Shape("confusion table needs two count rows".into()));
        }
        Ok(ConfusionMatrix::from_table(
            cells[0], cells[1], cells[2], cells[3],
        ))
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.report(Rounding::Truncate).formatted();
        let [ii, ic, ci, cc] = self.table();
        writeln!(
            f,
            "{:>10} {:>9} {:>9} {:>7}",
            "pred\\act", "infected", "control", "error%"
        )?;
        writeln!(f, "{:>10} {ii:>9} {ic:>9} {:>7}", "infected", r[0])?;
        writeln!(f, "{:>10} {ci:>9} {cc:>9} {:>7}", "control", r[1])?;
        write!(f, "{:>10} {:>9} {:>9} {:>7}", "error%", r[2], r[3], r[4])
    }
}
