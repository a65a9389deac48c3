use std::collections::BTreeSet;

use super::AnalyticsError;

/// Label used for an absent categorical value.
pub const MISSING: &str = "missing";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Cat(String),
    Missing,
}

impl Value {
    /// Parse a raw cell for a column of `kind`. Empty, `?` and `NA` are missing.
    pub fn parse(raw: &str, kind: ColumnKind) -> Value {
        let raw = raw.trim();
        if raw.is_empty() || raw == "?" || raw.eq_ignore_ascii_case("na") {
            return Value::Missing;
        }
        match kind {
            ColumnKind::Numeric => raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map_or(Value::Missing, Value::Num),
            ColumnKind::Categorical => Value::Cat(raw.to_owned()),
        }
    }
}

/// Parsed patient records before encoding.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawTable {
    pub names: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    pub rows: Vec<Vec<Value>>,
}

impl RawTable {
    pub fn new(columns: Vec<(String, ColumnKind)>) -> Self {
        let (names, kinds) = columns.into_iter().unzip();
        Self {
            names,
            kinds,
            rows: Vec::new(),
        }
    }

    /// Panics if the row width differs from the column count.
    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.names.len(), "row width");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Keep only the named columns, in the given order.
    pub fn project(&self, names: &[&str]) -> Option<RawTable> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column_index(n))
            .collect::<Option<_>>()?;
        Some(RawTable {
            names: idx.iter().map(|&i| self.names[i].clone()).collect(),
            kinds: idx.iter().map(|&i| self.kinds[i]).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
                .collect(),
        })
    }
}

/// Per-column encoding learned from a table.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnEncoding {
    Numeric {
        name: String,
        min: f64,
        max: f64,
        median: f64,
    },
    Categorical {
        name: String,
        /// Sorted; one indicator feature each.
        categories: Vec<String>,
    },
}

impl ColumnEncoding {
    pub fn name(&self) -> &str {
        match self {
            ColumnEncoding::Numeric { name, .. } | ColumnEncoding::Categorical { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Encoder {
    /// Non-constant source columns only.
    pub columns: Vec<ColumnEncoding>,
}

pub fn indicator_name(column: &str, category: &str) -> String {
    format!("{column}={category}")
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

impl Encoder {
    pub fn fit(table: &RawTable) -> Result<Self, AnalyticsError> {
        if table.len() < 2 {
            return Err(AnalyticsError::EmptyTable(table.len()));
        }
        let mut columns = Vec::new();
        for (c, (name, kind)) in table.names.iter().zip(&table.kinds).enumerate() {
            let cells = table.rows.iter().map(|r| &r[c]);
            match kind {
                ColumnKind::Numeric => {
                    let mut present: Vec<f64> = cells
                        .filter_map(|v| match v {
                            Value::Num(x) => Some(*x),
                            _ => None,
                        })
                        .collect();
                    if present.is_empty() {
                        continue;
                    }
                    let med = median(&mut present);
                    // `present` is sorted by `median`.
                    let (min, max) = (present[0], present[present.len() - 1]);
                    if min == max {
                        continue;
                    }
                    columns.push(ColumnEncoding::Numeric {
                        name: name.clone(),
                        min,
                        max,
                        median: med,
                    });
                }
                ColumnKind::Categorical => {
                    let cats: BTreeSet<String> = cells
                        .map(|v| match v {
                            Value::Cat(s) => s.clone(),
                            Value::Num(x) => x.to_string(),
                            Value::Missing => MISSING.to_owned(),
                        })
                        .collect();
                    if cats.len() < 2 {
                        continue;
                    }
                    columns.push(ColumnEncoding::Categorical {
                        name: name.clone(),
                        categories: cats.into_iter().collect(),
                    });
                }
            }
        }
        if columns.is_empty() {
            return Err(AnalyticsError::AllConstant);
        }
        Ok(Self { columns })
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for col in &self.columns {
            match col {
                ColumnEncoding::Numeric { name, .. } => out.push(name.clone()),
                ColumnEncoding::Categorical { name, categories } => {
                    out.extend(categories.iter().map(|c| indicator_name(name, c)))
                }
            }
        }
        out
    }

    pub fn dims(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c {
                ColumnEncoding::Numeric { .. } => 1,
                ColumnEncoding::Categorical { categories, .. } => categories.len(),
            })
            .sum()
    }

    /// Encode one row laid out like `names`. Numerics are clamped into
    /// [0,1]; unseen categories encode as all zeros.
    pub fn encode(&self, names: &[String], row: &[Value]) -> Result<Vec<f64>, AnalyticsError> {
        let mut out = Vec::with_capacity(self.dims());
        for col in &self.columns {
            let i = names
                .iter()
                .position(|n| n == col.name())
                .ok_or_else(|| AnalyticsError::UnknownColumn(col.name().to_owned()))?;
            match col {
                ColumnEncoding::Numeric {
                    min, max, median, ..
                } => {
                    let x = match row[i] {
                        Value::Num(x) => x,
                        _ => *median,
                    };
                    out.push(((x - min) / (max - min)).clamp(0.0, 1.0));
                }
                ColumnEncoding::Categorical { categories, .. } => {
                    let label = match &row[i] {
                        Value::Cat(s) => s.clone(),
                        Value::Num(x) => x.to_string(),
                        Value::Missing => MISSING.to_owned(),
                    };
                    out.extend(
                        categories
                            .iter()
                            .map(|c| if *c == label { 1.0 } else { 0.0 }),
                    );
                }
            }
        }
        Ok(out)
    }

    pub fn transform(&self, table: &RawTable) -> Result<FeatureMatrix, AnalyticsError> {
        let rows = table
            .rows
            .iter()
            .map(|r| self.encode(&table.names, r))
            .collect::<Result<_, _>>()?;
        let normalization = self
            .columns
            .iter()
            .flat_map(|c| match c {
                ColumnEncoding::Numeric { min, max, .. } => vec![(*min, *max)],
                ColumnEncoding::Categorical { categories, .. } => {
                    vec![(0.0, 1.0); categories.len()]
                }
            })
            .collect();
        Ok(FeatureMatrix {
            rows,
            feature_names: self.feature_names(),
            normalization,
        })
    }
}

/// Normalized patient vectors, every value in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<Vec<f64>>,
    pub feature_names: Vec<String>,
    /// Source (min, max) of each feature.
    pub normalization: Vec<(f64, f64)>,
}

impl FeatureMatrix {
    /// Wrap already-normalized vectors. Features are named `f0, f1, ...`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, AnalyticsError> {
        let dims = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dims) {
            return Err(AnalyticsError::DimensionMismatch(dims, bad.len()));
        }
        Ok(Self {
            rows,
            feature_names: (0..dims).map(|i| format!("f{i}")).collect(),
            normalization: vec![(0.0, 1.0); dims],
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn dims(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Keep only the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            normalization: self.normalization.clone(),
        }
    }
}

/// Fit an encoder on `table` and apply it.
pub fn normalize(table: &RawTable) -> Result<FeatureMatrix, AnalyticsError> {
    Encoder::fit(table)?.transform(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(cols: &[(&str, ColumnKind)], rows: &[&[&str]]) -> RawTable {
        let mut t = RawTable::new(cols.iter().map(|(n, k)| (n.to_string(), *k)).collect());
        for r in rows {
            t.push(
                r.iter()
                    .zip(cols)
                    .map(|(c, (_, k))| Value::parse(c, *k))
                    .collect(),
            );
        }
        t
    }

    #[test]
    fn min_max_scaling() {
        let t = table(&[("x", ColumnKind::Numeric)], &[&["2"], &["4"], &["6"]]);
        let m = normalize(&t).unwrap();
        assert_eq!(m.rows, vec![vec![0.0], vec![0.5], vec![1.0]]);
        assert_eq!(m.normalization, [(2.0, 6.0)]);
    }

    #[test]
    fn one_hot_sorted() {
        let t = table(&[("g", ColumnKind::Categorical)], &[&["B"], &["A"], &["B"]]);
        let m = normalize(&t).unwrap();
        assert_eq!(m.feature_names, ["g=A", "g=B"]);
        assert_eq!(m.rows, vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn constant_columns_dropped() {
        let t = table(
            &[
                ("c", ColumnKind::Numeric),
                ("x", ColumnKind::Numeric),
                ("k", ColumnKind::Categorical),
            ],
            &[&["7", "1", "a"], &["7", "3", "a"]],
        );
        let m = normalize(&t).unwrap();
        assert_eq!(m.feature_names, ["x"]);
        let t = table(&[("c", ColumnKind::Numeric)], &[&["7"], &["7"]]);
        assert!(matches!(normalize(&t), Err(AnalyticsError::AllConstant)));
    }

    #[test]
    fn imputation() {
        let t = table(
            &[("x", ColumnKind::Numeric), ("k", ColumnKind::Categorical)],
            &[&["0", "a"], &["?", ""], &["10", "a"], &["4", "b"]],
        );
        let m = normalize(&t).unwrap();
        // median of {0, 4, 10} is 4.
        assert!((m.rows[1][0] - 0.4).abs() < 1e-15);
        assert_eq!(m.feature_names, ["x", "k=a", "k=b", "k=missing"]);
        assert_eq!(&m.rows[1][1..], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn too_few_rows() {
        let t = table(&[("x", ColumnKind::Numeric)], &[&["1"]]);
        assert!(matches!(normalize(&t), Err(AnalyticsError::EmptyTable(1))));
    }

    #[test]
    fn encoder_clamps_new_rows() {
        let t = table(&[("x", ColumnKind::Numeric)], &[&["0"], &["10"]]);
        let enc = Encoder::fit(&t).unwrap();
        assert_eq!(enc.encode(&t.names, &[Value::Num(20.0)]).unwrap(), [1.0]);
        assert_eq!(enc.encode(&t.names, &[Value::Num(-5.0)]).unwrap(), [0.0]);
    }

    proptest! {
        #[test]
        fn values_in_unit_interval(
            rows in prop::collection::vec((prop::option::of(-1e6f64..1e6), 0u8..4), 2..40)
        ) {
            let mut t = RawTable::new(vec![("x".into(), ColumnKind::Numeric), ("c".into(), ColumnKind::Categorical)]);
            for (x, c) in &rows {
                t.push(vec![x.map_or(Value::Missing, Value::Num), Value::Cat(format!("c{c}"))]);
            }
            if let Ok(m) = normalize(&t) {
                prop_assert_eq!(m.n(), rows.len());
                for r in &m.rows {
                    prop_assert_eq!(r.len(), m.dims());
                    prop_assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
                }
            }
        }
    }
}
