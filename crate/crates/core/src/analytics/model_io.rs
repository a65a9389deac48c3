//! Line-oriented text form of fitted models.
//!
//! ```text
//! lakelet-model  k=8  dims=41  seed=42  iterations=12  inertia=310.5
//! names  age  gender=Female  ...
//! c  0  0.41  0.0  ...            one line per centroid
//! w  0  1  0.93  -0.2  0.7 ...    cluster, certified, accuracy, bias, weights
//! e  num  age  20  90  55         optional encoder: min, max, median
//! e  cat  gender  Female  Male    optional encoder: categories
//! ```
//!
//! Fields are TAB-separated. Floats use the shortest exact decimal form, so
//! a load after a save reproduces every value bit for bit.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{AnalyticsError, ClusterModel, ColumnEncoding, Encoder, OutcomeModel};

const MAGIC: &str = "lakelet-model";

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    /// Assignments are not persisted and load empty.
    pub clusters: ClusterModel,
    pub feature_names: Vec<String>,
    pub outcomes: Vec<OutcomeModel>,
    pub encoder: Option<Encoder>,
}

fn bad(line: usize, msg: impl Into<String>) -> AnalyticsError {
    AnalyticsError::ModelFormat {
        line,
        message: msg.into(),
    }
}

fn num<T: FromStr>(s: &str, line: usize) -> Result<T, AnalyticsError> {
    s.parse()
        .map_err(|_| bad(line, format!("bad number `{s}`")))
}

fn check_name(s: &str) -> Result<(), AnalyticsError> {
    if s.contains(['\t', '\n', '\r']) {
        return Err(bad(
            0,
            format!("name `{}` contains a tab or newline", s.escape_debug()),
        ));
    }
    Ok(())
}

impl SavedModel {
    pub fn to_text(&self) -> Result<String, AnalyticsError> {
        let c = &self.clusters;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{MAGIC}\tk={}\tdims={}\tseed={}\titerations={}\tinertia={}",
            c.k,
            self.feature_names.len(),
            c.seed,
            c.iterations_run,
            c.inertia
        );
        out.push_str("names");
        for n in &self.feature_names {
            check_name(n)?;
            let _ = write!(out, "\t{n}");
        }
        out.push('\n');
        for (j, centroid) in c.centroids.iter().enumerate() {
            let _ = write!(out, "c\t{j}");
            for v in centroid {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        for m in &self.outcomes {
            let _ = write!(
                out,
                "w\t{}\t{}\t{}\t{}",
                m.cluster_index,
                u8::from(m.certified),
                m.holdout_accuracy,
                m.bias
            );
            for v in &m.weights {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        for col in self.encoder.iter().flat_map(|e| &e.columns) {
            check_name(col.name())?;
            match col {
                ColumnEncoding::Numeric {
                    name,
                    min,
                    max,
                    median,
                } => {
                    let _ = writeln!(out, "e\tnum\t{name}\t{min}\t{max}\t{median}");
                }
                ColumnEncoding::Categorical { name, categories } => {
                    let _ = write!(out, "e\tcat\t{name}");
                    for cat in categories {
                        check_name(cat)?;
                        let _ = write!(out, "\t{cat}");
                    }
                    out.push('\n');
                }
            }
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self, AnalyticsError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.is_empty());
        let (n, header) = lines.next().ok_or_else(|| bad(1, "empty model file"))?;
        let mut fields = header.split('\t');
        if fields.next() != Some(MAGIC) {
            return Err(bad(n, "missing model header"));
        }
        let mut head = std::collections::HashMap::new();
        for f in fields {
            let (k, v) = f
                .split_once('=')
                .ok_or_else(|| bad(n, format!("bad header field `{f}`")))?;
            head.insert(k, v);
        }
        let get = |k: &str| {
            head.get(k)
                .copied()
                .ok_or_else(|| bad(n, format!("header lacks `{k}`")))
        };
        let k: usize = num(get("k")?, n)?;
        let dims: usize = num(get("dims")?, n)?;
        let seed: u64 = num(get("seed")?, n)?;
        let iterations_run: usize = num(get("iterations")?, n)?;
        let inertia: f64 = num(get("inertia")?, n)?;

        let mut feature_names = None;
        let mut centroids = Vec::new();
        let mut outcomes = Vec::new();
        let mut encoder_cols = Vec::new();
        for (n, line) in lines {
            let parts: Vec<&str> = line.split('\t').collect();
            let floats = |s: &[&str]| -> Result<Vec<f64>, AnalyticsError> {
                let v: Vec<f64> = s.iter().map(|x| num(x, n)).collect::<Result<_, _>>()?;
                if v.len() != dims {
                    return Err(bad(n, format!("expected {dims} values, found {}", v.len())));
                }
                Ok(v)
            };
            match parts[0] {
                "names" => {
                    feature_names =
                        Some(parts[1..].iter().map(|s| s.to_string()).collect::<Vec<_>>())
                }
                "c" if parts.len() >= 2 => {
                    let j: usize = num(parts[1], n)?;
                    if j != centroids.len() {
                        return Err(bad(n, format!("centroid {j} out of order")));
                    }
                    centroids.push(floats(&parts[2..])?);
                }
                "w" if parts.len() >= 5 => {
                    let accuracy: f64 = num(parts[3], n)?;
                    let certified = match parts[2] {
                        "1" => true,
                        "0" => false,
                        other => return Err(bad(n, format!("bad certified flag `{other}`"))),
                    };
                    if certified != (accuracy >= super::CERTIFICATION_GATE) {
                        return Err(bad(n, "certified flag disagrees with accuracy"));
                    }
                    outcomes.push(OutcomeModel {
                        cluster_index: num(parts[1], n)?,
                        certified,
                        holdout_accuracy: accuracy,
                        bias: num(parts[4], n)?,
                        weights: floats(&parts[5..])?,
                    });
                }
                "e" if parts.len() >= 3 && parts[1] == "num" && parts.len() == 6 => encoder_cols
                    .push(ColumnEncoding::Numeric {
                        name: parts[2].to_owned(),
                        min: num(parts[3], n)?,
                        max: num(parts[4], n)?,
                        median: num(parts[5], n)?,
                    }),
                "e" if parts.len() >= 3 && parts[1] == "cat" => {
                    encoder_cols.push(ColumnEncoding::Categorical {
                        name: parts[2].to_owned(),
                        categories: parts[3..].iter().map(|s| s.to_string()).collect(),
                    })
                }
                _ => return Err(bad(n, format!("unrecognised line `{}`", parts[0]))),
            }
        }
        let feature_names = feature_names.ok_or_else(|| bad(0, "missing names line"))?;
        if feature_names.len() != dims {
            return Err(bad(
                0,
                format!("{} names for {dims} dims", feature_names.len()),
            ));
        }
        if centroids.len() != k {
            return Err(bad(0, format!("{} centroids for k={k}", centroids.len())));
        }
        let encoder = (!encoder_cols.is_empty()).then_some(Encoder {
            columns: encoder_cols,
        });
        if let Some(e) = &encoder {
            if e.feature_names() != feature_names {
                return Err(bad(0, "encoder does not produce the listed features"));
            }
        }
        Ok(Self {
            clusters: ClusterModel {
                k,
                centroids,
                assignments: Vec::new(),
                inertia,
                seed,
                iterations_run,
                inertia_history: Vec::new(),
            },
            feature_names,
            outcomes,
            encoder,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SavedModel {
        SavedModel {
            clusters: ClusterModel {
                k: 2,
                centroids: vec![vec![0.1, 1.0 / 3.0, 0.0], vec![0.9, 0.25, 1.0]],
                assignments: Vec::new(),
                inertia: 1.234_567_890_123,
                seed: 42,
                iterations_run: 7,
                inertia_history: Vec::new(),
            },
            feature_names: vec!["age".into(), "g=F".into(), "g=M".into()],
            outcomes: vec![OutcomeModel {
                cluster_index: 1,
                weights: vec![-0.5, 2.0e-17, 3.25],
                bias: -0.125,
                holdout_accuracy: 0.95,
                certified: true,
            }],
            encoder: Some(Encoder {
                columns: vec![
                    ColumnEncoding::Numeric {
                        name: "age".into(),
                        min: 18.0,
                        max: 90.0,
                        median: 51.5,
                    },
                    ColumnEncoding::Categorical {
                        name: "g".into(),
                        categories: vec!["F".into(), "M".into()],
                    },
                ],
            }),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let m = sample();
        let text = m.to_text().unwrap();
        assert!(text.starts_with("lakelet-model\tk=2\tdims=3\tseed=42"));
        assert_eq!(SavedModel::from_text(&text).unwrap(), m);
    }

    #[test]
    fn rejects_inconsistent_files() {
        let text = sample().to_text().unwrap();
        assert!(SavedModel::from_text("").is_err());
        assert!(SavedModel::from_text(&text.replace("k=2", "k=3")).is_err());
        assert!(SavedModel::from_text(&text.replace("w\t1\t1\t0.95", "w\t1\t1\t0.5")).is_err());
        let dropped: String = text
            .lines()
            .filter(|l| !l.starts_with("c\t1"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(SavedModel::from_text(&dropped).is_err());
    }
}
