//! Synthetic encounter corpus with planted patient groups, and a loader for
//! the real encounter file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::notes::{format_lab, render_note};
use super::uci::{
    complication_column, uci_header, warehouse_schema, COMPLICATIONS, ENCOUNTER_ID, LABEL,
    LAB_TESTS, MEDICATION, MEDICATIONS, MED_VALUES, SUCCESS, UCI_COLUMNS,
};
use crate::analytics::ColumnKind;
use crate::catalog::SourceKind;
use crate::ingest::IngestRecord;
use crate::store::FormatClass;
use crate::warehouse::{ColumnType, WarehouseSchema};

pub const MIN_RECORDS: usize = 100;
pub const DEFAULT_GROUPS: usize = 4;
pub const MAX_GROUPS: usize = 4;

pub const STRUCTURED_SOURCE: &str = "encounters.csv";
pub const SEMI_SOURCE: &str = "lab-results";
pub const NOTES_SOURCE: &str = "clinical-notes";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus needs at least {MIN_RECORDS} records, got {0}")]
    TooSmall(usize),
    #[error("invalid composition: {0}")]
    Composition(String),
    #[error("groups must be between 1 and {MAX_GROUPS}, got {0}")]
    Groups(usize),
    #[error("{path}: {message}")]
    Source { path: String, message: String },
}

/// Share of records in each format class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Composition {
    pub structured: f64,
    pub semi_structured: f64,
    pub unstructured: f64,
}

impl Composition {
    pub const DEFAULT: Composition = Composition {
        structured: 0.2,
        semi_structured: 0.5,
        unstructured: 0.3,
    };

    pub fn new(
        structured: f64,
        semi_structured: f64,
        unstructured: f64,
    ) -> Result<Self, CorpusError> {
        let parts = [structured, semi_structured, unstructured];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(CorpusError::Composition(format!(
                "shares must be non-negative, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::Composition(format!(
                "shares sum to {sum}, not 1"
            )));
        }
        Ok(Self {
            structured,
            semi_structured,
            unstructured,
        })
    }

    /// Record counts per class for `n` records; rounding error goes to the
    /// unstructured share.
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let s = ((n as f64) * self.structured).round() as usize;
        let e = (((n as f64) * self.semi_structured).round() as usize).min(n - s.min(n));
        let s = s.min(n);
        [s, e, n - s - e]
    }
}

impl Default for Composition {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{}",
            self.structured, self.semi_structured, self.unstructured
        )
    }
}

impl FromStr for Composition {
    type Err = CorpusError;

    /// `structured,semi,unstructured`, e.g. `0.2,0.5,0.3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CorpusError::Composition(format!("`{s}`: {e}")))?;
        let [a, b, c] = parts[..] else {
            return Err(CorpusError::Composition(format!(
                "`{s}` needs three shares"
            )));
        };
        Composition::new(a, b, c)
    }
}

/// Lab means per planted group, in [`LAB_TESTS`] order.
const LAB_MEANS: [[f64; 8]; MAX_GROUPS] = [
    [5.2, 105.0, 0.9, 100.0, 66.0, 110.0, 118.0, 22.5],
    [9.6, 255.0, 0.9, 115.0, 50.0, 200.0, 124.0, 33.0],
    [7.0, 175.0, 2.6, 150.0, 46.0, 290.0, 160.0, 27.5],
    [8.8, 190.0, 1.5, 190.0, 34.0, 100.0, 140.0, 38.0],
];
const LAB_SD: [f64; 8] = [0.3, 12.0, 0.12, 8.0, 3.0, 15.0, 5.0, 1.2];
/// Complication recorded for each group, kept with this probability.
const COMPLICATION_FIDELITY: f64 = 0.95;
/// Insulin regimen after which each group is not readmitted.
pub const BEST_INSULIN: [&str; MAX_GROUPS] = ["No", "Up", "Steady", "Down"];
/// Chance the outcome disagrees with the regimen rule.
const OUTCOME_NOISE: f64 = 0.03;

fn pick<'a, R: Rng>(rng: &mut R, weighted: &[(&'a str, f64)]) -> &'a str {
    let total: f64 = weighted.iter().map(|(_, w)| w).sum();
    let mut t = rng.random::<f64>() * total;
    for (v, w) in weighted {
        if t < *w {
            return v;
        }
        t -= w;
    }
    weighted.last().expect("non-empty weights").0
}

fn pick_count<R: Rng>(rng: &mut R, weights: &[f64], offset: usize) -> String {
    let labels: Vec<String> = (0..weights.len())
        .map(|i| (i + offset).to_string())
        .collect();
    let pairs: Vec<(&str, f64)> = labels
        .iter()
        .map(String::as_str)
        .zip(weights.iter().copied())
        .collect();
    pick(rng, &pairs).to_owned()
}

fn normal_int<R: Rng>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> String {
    let v: f64 = Normal::new(mean, sd).expect("finite sd").sample(rng);
    (v.round().clamp(lo, hi) as i64).to_string()
}

/// Marginal weights of the medication columns; unlisted ones are never taken.
fn medication_weights(name: &str) -> [f64; 4] {
    match name {
        "metformin" => [0.80, 0.18, 0.01, 0.01],
        "repaglinide" => [0.985, 0.013, 0.001, 0.001],
        "nateglinide" => [0.993, 0.007, 0.0, 0.0],
        "glimepiride" => [0.95, 0.046, 0.003, 0.002],
        "glipizide" => [0.875, 0.112, 0.008, 0.005],
        "glyburide" => [0.895, 0.091, 0.008, 0.006],
        "pioglitazone" => [0.928, 0.069, 0.002, 0.001],
        "rosiglitazone" => [0.937, 0.06, 0.002, 0.001],
        "acarbose" => [0.997, 0.003, 0.0, 0.0],
        "glyburide-metformin" => [0.993, 0.007, 0.0, 0.0],
        MEDICATION => [0.466, 0.303, 0.111, 0.12],
        _ => [1.0, 0.0, 0.0, 0.0],
    }
}

/// One generated encounter before it is rendered in a source format.
#[derive(Debug, Clone, PartialEq)]
pub struct Encounter {
    pub group: usize,
    values: Vec<Option<String>>,
    /// Rounded to two decimals, in [`LAB_TESTS`] order.
    pub labs: [f64; 8],
    pub complication: &'static str,
}

fn column_position(name: &str) -> Option<usize> {
    UCI_COLUMNS.iter().position(|c| c.name == name)
}

impl Encounter {
    pub fn get(&self, name: &str) -> Option<&str> {
        column_position(name).and_then(|i| self.values[i].as_deref())
    }

    /// Panics on a name outside the 50 source attributes.
    pub fn set(&mut self, name: &str, value: Option<String>) {
        let i = column_position(name).unwrap_or_else(|| panic!("unknown attribute `{name}`"));
        self.values[i] = value;
    }

    /// Every attribute the lake can read from this encounter, in lake
    /// column order.
    pub fn fields(&self) -> Vec<(String, Option<String>)> {
        let mut out: Vec<(String, Option<String>)> = UCI_COLUMNS
            .iter()
            .zip(&self.values)
            .map(|(c, v)| (c.name.to_owned(), v.clone()))
            .collect();
        for (t, &v) in LAB_TESTS.iter().zip(&self.labs) {
            out.push((t.value_column(), Some(format_lab(v))));
            out.push((t.flag_column(), Some(t.flag(v).to_owned())));
        }
        out.push((complication_column(), Some(self.complication.to_owned())));
        out
    }

    pub fn generate<R: Rng>(rng: &mut R, encounter_id: u64, group: usize) -> Self {
        let mut labs = [0.0; 8];
        for (i, lab) in labs.iter_mut().enumerate() {
            let v: f64 = Normal::new(LAB_MEANS[group][i], LAB_SD[i])
                .expect("finite sd")
                .sample(rng);
            *lab = (v.max(0.01) * 100.0).round() / 100.0;
        }
        let complication = if rng.random::<f64>() < COMPLICATION_FIDELITY {
            COMPLICATIONS[group]
        } else {
            COMPLICATIONS[rng.random_range(0..COMPLICATIONS.len())]
        };

        let mut v: BTreeMap<&str, Option<String>> = BTreeMap::new();
        let mut put = |k: &'static str, s: &str| {
            v.insert(k, (s != "?").then(|| s.to_owned()));
        };
        put(ENCOUNTER_ID, &encounter_id.to_string());
        put(
            "patient_nbr",
            &rng.random_range(100_000u64..200_000_000).to_string(),
        );
        put(
            "race",
            pick(
                rng,
                &[
                    ("Caucasian", 0.75),
                    ("AfricanAmerican", 0.19),
                    ("Hispanic", 0.02),
                    ("Asian", 0.01),
                    ("Other", 0.015),
                    ("?", 0.025),
                ],
            ),
        );
        put("gender", pick(rng, &[("Female", 0.54), ("Male", 0.46)]));
        let age_w = [
            0.002, 0.007, 0.016, 0.037, 0.095, 0.17, 0.22, 0.256, 0.169, 0.028,
        ];
        let ages = UCI_COLUMNS[column_position("age").expect("age")].vocab;
        let age_pairs: Vec<(&str, f64)> = ages.iter().copied().zip(age_w).collect();
        put("age", pick(rng, &age_pairs));
        put(
            "weight",
            pick(
                rng,
                &[
                    ("?", 0.97),
                    ("[75-100)", 0.013),
                    ("[50-75)", 0.009),
                    ("[100-125)", 0.006),
                    ("[125-150)", 0.002),
                ],
            ),
        );
        put(
            "admission_type_id",
            pick(
                rng,
                &[
                    ("1", 0.53),
                    ("3", 0.185),
                    ("2", 0.18),
                    ("6", 0.05),
                    ("5", 0.047),
                    ("8", 0.003),
                    ("7", 0.002),
                    ("4", 0.003),
                ],
            ),
        );
        put(
            "discharge_disposition_id",
            pick(
                rng,
                &[
                    ("1", 0.59),
                    ("3", 0.137),
                    ("6", 0.127),
                    ("18", 0.036),
                    ("2", 0.021),
                    ("22", 0.02),
                    ("11", 0.016),
                    ("5", 0.012),
                    ("25", 0.01),
                    ("4", 0.008),
                    ("7", 0.006),
                ],
            ),
        );
        put(
            "admission_source_id",
            pick(
                rng,
                &[
                    ("7", 0.565),
                    ("1", 0.29),
                    ("17", 0.067),
                    ("4", 0.031),
                    ("6", 0.022),
                    ("2", 0.011),
                ],
            ),
        );
        let mut stay: u32 = pick_count(
            rng,
            &[
                13.9, 16.9, 17.4, 13.7, 9.8, 7.4, 5.8, 4.3, 3.0, 2.3, 1.8, 1.4, 1.2, 1.0,
            ],
            1,
        )
        .parse()
        .expect("count");
        if group == 2 && rng.random::<f64>() < 0.3 {
            stay = (stay + 1).min(14);
        }
        put("time_in_hospital", &stay.to_string());
        put(
            "payer_code",
            pick(
                rng,
                &[
                    ("?", 0.396),
                    ("MC", 0.32),
                    ("HM", 0.062),
                    ("SP", 0.049),
                    ("BC", 0.046),
                    ("MD", 0.035),
                    ("CP", 0.025),
                    ("UN", 0.024),
                ],
            ),
        );
        put(
            "medical_specialty",
            pick(
                rng,
                &[
                    ("?", 0.49),
                    ("InternalMedicine", 0.144),
                    ("Emergency/Trauma", 0.074),
                    ("Family/GeneralPractice", 0.073),
                    ("Cardiology", 0.053),
                    ("Surgery-General", 0.03),
                    ("Nephrology", 0.016),
                    ("Orthopedics", 0.014),
                ],
            ),
        );
        put(
            "num_lab_procedures",
            &normal_int(rng, 43.0, 19.7, 1.0, 132.0),
        );
        put(
            "num_procedures",
            &pick_count(rng, &[0.46, 0.2, 0.125, 0.093, 0.041, 0.03, 0.049], 0),
        );
        put("num_medications", &normal_int(rng, 16.0, 8.0, 1.0, 81.0));
        put(
            "number_outpatient",
            &pick_count(rng, &[0.835, 0.084, 0.035, 0.02, 0.011, 0.005], 0),
        );
        put(
            "number_emergency",
            &pick_count(rng, &[0.888, 0.077, 0.02, 0.007, 0.004], 0),
        );
        put(
            "number_inpatient",
            &pick_count(rng, &[0.664, 0.193, 0.074, 0.034, 0.016, 0.008], 0),
        );
        let diagnoses = UCI_COLUMNS[column_position("diag_1").expect("diag_1")].vocab;
        let general: Vec<(&str, f64)> = diagnoses
            .iter()
            .filter(|d| !d.starts_with("250.") || **d == "250.8")
            .map(|d| (*d, 1.0))
            .collect();
        // Complication-specific diabetes codes show up occasionally.
        let specific = ["250.8", "250.5", "250.4", "250.6"][group];
        for key in ["diag_1", "diag_2", "diag_3"] {
            let code = if rng.random::<f64>() < 0.1 {
                specific
            } else {
                pick(rng, &general)
            };
            put(key, code);
        }
        put(
            "number_diagnoses",
            &pick_count(
                rng,
                &[0.002, 0.01, 0.028, 0.055, 0.11, 0.1, 0.1, 0.1, 0.49],
                1,
            ),
        );
        put(
            "max_glu_serum",
            pick(
                rng,
                &[
                    ("None", 0.947),
                    ("Norm", 0.026),
                    (">200", 0.015),
                    (">300", 0.012),
                ],
            ),
        );
        let a1c = if rng.random::<f64>() < 0.83 {
            "None"
        } else if labs[0] >= 8.0 {
            ">8"
        } else if labs[0] >= 7.0 {
            ">7"
        } else {
            "Norm"
        };
        put("A1Cresult", a1c);
        let mut adjusted = false;
        let mut any_med = false;
        for m in MEDICATIONS {
            let w = medication_weights(m);
            let pairs: Vec<(&str, f64)> = MED_VALUES.iter().copied().zip(w).collect();
            let value = pick(rng, &pairs);
            adjusted |= value == "Up" || value == "Down";
            any_med |= value != "No";
            put(m, value);
        }
        let change = if adjusted || rng.random::<f64>() < 0.15 {
            "Ch"
        } else {
            "No"
        };
        put("change", change);
        put("diabetesMed", if any_med { "Yes" } else { "No" });
        let insulin = v[MEDICATION].clone().expect("insulin is always set");
        let good = (insulin == BEST_INSULIN[group]) != (rng.random::<f64>() < OUTCOME_NOISE);
        let label = if good {
            SUCCESS
        } else if rng.random::<f64>() < 0.5 {
            "<30"
        } else {
            ">30"
        };
        v.insert(LABEL, Some(label.to_owned()));

        let values = UCI_COLUMNS
            .iter()
            .map(|c| v.remove(c.name).expect("every attribute generated"))
            .collect();
        Encounter {
            group,
            values,
            labs,
            complication,
        }
    }

    /// One CSV data row over the 50 source attributes; missing is `?`.
    pub fn to_csv_row(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(self.values.iter().map(|v| v.as_deref().unwrap_or("?")))
            .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 input")
    }

    /// JSON document with the source attributes at top level and the lab
    /// detail nested under `lab_detail`.
    pub fn to_json(&self) -> String {
        let mut doc = serde_json::Map::new();
        for (c, v) in UCI_COLUMNS.iter().zip(&self.values) {
            let value = match (v, c.kind) {
                (None, _) => serde_json::Value::Null,
                (Some(s), ColumnKind::Numeric) => s
                    .parse::<i64>()
                    .map(serde_json::Value::from)
                    .unwrap_or_else(|_| serde_json::Value::from(s.clone())),
                (Some(s), ColumnKind::Categorical) => serde_json::Value::from(s.clone()),
            };
            doc.insert(c.name.to_owned(), value);
        }
        let mut lab = serde_json::Map::new();
        for (t, &v) in LAB_TESTS.iter().zip(&self.labs) {
            lab.insert(t.key.to_owned(), serde_json::Value::from(v));
            let flag_key = t.flag_column();
            lab.insert(
                flag_key
                    .trim_start_matches(super::uci::LAB_PREFIX)
                    .to_owned(),
                serde_json::Value::from(t.flag(v)),
            );
        }
        lab.insert(
            "complication".to_owned(),
            serde_json::Value::from(self.complication),
        );
        doc.insert("lab_detail".to_owned(), serde_json::Value::Object(lab));
        serde_json::Value::Object(doc).to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRecord {
    pub encounter_id: u64,
    /// Planted group; `None` for loaded records.
    pub group: Option<usize>,
    pub format: FormatClass,
    pub record: IngestRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub records: Vec<CorpusRecord>,
    /// Observed categories per column, for loaded files whose values go
    /// beyond the generator's vocabulary.
    vocab: Option<BTreeMap<String, BTreeSet<String>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSpec {
    pub n: usize,
    pub seed: u64,
    pub composition: Composition,
    pub groups: usize,
}

impl CorpusSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            composition: Composition::DEFAULT,
            groups: DEFAULT_GROUPS,
        }
    }

    pub fn composition(mut self, c: Composition) -> Self {
        self.composition = c;
        self
    }
}

/// Generate a mixed-format corpus. The same spec always yields the same
/// bytes. Encounter contents do not depend on the composition; only the
/// format each one is rendered in does.
pub fn gen_corpus(spec: &CorpusSpec) -> Result<Corpus, CorpusError> {
    if spec.n < MIN_RECORDS {
        return Err(CorpusError::TooSmall(spec.n));
    }
    if spec.groups == 0 || spec.groups > MAX_GROUPS {
        return Err(CorpusError::Groups(spec.groups));
    }
    let [s, e, u] = spec.composition.counts(spec.n);
    let mut formats: Vec<FormatClass> = std::iter::repeat_n(FormatClass::Structured, s)
        .chain(std::iter::repeat_n(FormatClass::SemiStructured, e))
        .chain(std::iter::repeat_n(FormatClass::Unstructured, u))
        .collect();
    let mut format_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    format_rng.set_stream(1);
    formats.shuffle(&mut format_rng);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let header = uci_header();
    let records = formats
        .into_iter()
        .enumerate()
        .map(|(i, format)| {
            let encounter_id = 100_000 + i as u64;
            let group = rng.random_range(0..spec.groups);
            let enc = Encounter::generate(&mut rng, encounter_id, group);
            let record = match format {
                FormatClass::Structured => {
                    let mut r = IngestRecord::new(
                        enc.to_csv_row().into_bytes(),
                        SourceKind::Bulk,
                        STRUCTURED_SOURCE,
                        0,
                    );
                    r.schema_hint = Some(header.clone());
                    r
                }
                FormatClass::SemiStructured => IngestRecord::new(
                    enc.to_json().into_bytes(),
                    SourceKind::Event,
                    SEMI_SOURCE,
                    0,
                ),
                FormatClass::Unstructured => IngestRecord::new(
                    render_note(&enc).into_bytes(),
                    SourceKind::Stream,
                    NOTES_SOURCE,
                    0,
                ),
            };
            CorpusRecord {
                encounter_id,
                group: Some(group),
                format,
                record,
            }
        })
        .collect();
    Ok(Corpus {
        records,
        vocab: None,
    })
}

/// Load the 50-column encounter CSV as structured records, one per row.
/// `limit` keeps only the first rows.
pub fn load_uci_csv(path: &Path, limit: Option<usize>) -> Result<Corpus, CorpusError> {
    let fail = |message: String| CorpusError::Source {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| fail(e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| fail(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    for c in &UCI_COLUMNS {
        if !header.iter().any(|h| h == c.name) {
            return Err(fail(format!("missing column `{}`", c.name)));
        }
    }
    let id_col = header
        .iter()
        .position(|h| h == ENCOUNTER_ID)
        .expect("checked above");
    let mut vocab: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        if limit.is_some_and(|l| records.len() >= l) {
            break;
        }
        let row = row.map_err(|e| fail(format!("row {}: {e}", line + 2)))?;
        if row.len() != header.len() {
            return Err(fail(format!(
                "row {} has {} fields, header has {}",
                line + 2,
                row.len(),
                header.len()
            )));
        }
        let encounter_id = row[id_col]
            .trim()
            .parse::<u64>()
            .map_err(|e| fail(format!("row {}: encounter_id: {e}", line + 2)))?;
        for (h, cell) in header.iter().zip(row.iter()) {
            let cell = cell.trim();
            let categorical = UCI_COLUMNS
                .iter()
                .any(|c| c.name == h && c.kind == ColumnKind::Categorical);
            if categorical && cell != "?" && !cell.is_empty() {
                vocab.entry(h.clone()).or_default().insert(cell.to_owned());
            }
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&row).map_err(|e| fail(e.to_string()))?;
        let payload = w.into_inner().map_err(|e| fail(e.to_string()))?;
        let mut record = IngestRecord::new(payload, SourceKind::Bulk, STRUCTURED_SOURCE, 0);
        record.schema_hint = Some(header.clone());
        records.push(CorpusRecord {
            encounter_id,
            group: None,
            format: FormatClass::Structured,
            record,
        });
    }
    Ok(Corpus {
        records,
        vocab: Some(vocab),
    })
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, format: FormatClass) -> usize {
        self.records.iter().filter(|r| r.format == format).count()
    }

    /// Planted group per encounter id, when known.
    pub fn groups(&self) -> BTreeMap<u64, usize> {
        self.records
            .iter()
            .filter_map(|r| r.group.map(|g| (r.encounter_id, g)))
            .collect()
    }

    /// The warehouse table for this corpus. Loaded files declare the
    /// categories they were seen to contain.
    pub fn warehouse_schema(&self, full_coverage: bool) -> WarehouseSchema {
        let mut schema = warehouse_schema(full_coverage);
        if let Some(vocab) = &self.vocab {
            for (name, ty) in &mut schema.columns {
                if let (ColumnType::Categorical(values), Some(seen)) = (&mut *ty, vocab.get(name)) {
                    *values = seen.iter().cloned().collect();
                }
            }
        }
        schema
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::classify_format;

    #[test]
    fn composition_counts_and_parse() {
        assert_eq!(Composition::DEFAULT.counts(1000), [200, 500, 300]);
        assert_eq!(
            Composition::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
                .unwrap()
                .counts(100),
            [33, 33, 34]
        );
        assert_eq!(
            "0.2, 0.5, 0.3".parse::<Composition>().unwrap(),
            Composition::DEFAULT
        );
        assert!("0.5,0.5,0.5".parse::<Composition>().is_err());
        assert!("1,0".parse::<Composition>().is_err());
        assert!(Composition::new(-0.1, 0.6, 0.5).is_err());
    }

    #[test]
    fn rejects_small_or_bad_specs() {
        assert!(matches!(
            gen_corpus(&CorpusSpec::new(99, 1)),
            Err(CorpusError::TooSmall(99))
        ));
        let mut spec = CorpusSpec::new(100, 1);
        spec.groups = 5;
        assert!(matches!(gen_corpus(&spec), Err(CorpusError::Groups(5))));
    }

    #[test]
    fn byte_identical_for_same_seed() {
        let a = gen_corpus(&CorpusSpec::new(300, 42)).unwrap();
        let b = gen_corpus(&CorpusSpec::new(300, 42)).unwrap();
        assert_eq!(a, b);
        let c = gen_corpus(&CorpusSpec::new(300, 43)).unwrap();
        assert_ne!(a.records[0].record.payload, c.records[0].record.payload);
    }

    #[test]
    fn formats_match_composition_and_classifier() {
        let corpus = gen_corpus(&CorpusSpec::new(500, 7)).unwrap();
        assert_eq!(corpus.count(FormatClass::Structured), 100);
        assert_eq!(corpus.count(FormatClass::SemiStructured), 250);
        assert_eq!(corpus.count(FormatClass::Unstructured), 150);
        for r in &corpus.records {
            assert_eq!(
                classify_format(&r.record.payload),
                r.format,
                "record {}",
                r.encounter_id
            );
        }
    }

    #[test]
    fn contents_do_not_depend_on_composition() {
        let a = gen_corpus(&CorpusSpec::new(200, 5)).unwrap();
        let b = gen_corpus(
            &CorpusSpec::new(200, 5).composition(Composition::new(1.0, 0.0, 0.0).unwrap()),
        )
        .unwrap();
        assert_eq!(a.groups(), b.groups());
        let first = &b.records[0];
        assert_eq!(first.format, FormatClass::Structured);
    }

    #[test]
    fn outcome_follows_best_regimen() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut agree = 0;
        for i in 0..400 {
            let g = i % 4;
            let e = Encounter::generate(&mut rng, i as u64, g);
            let good = e.get(LABEL) == Some(SUCCESS);
            let best = e.get(MEDICATION) == Some(BEST_INSULIN[g]);
            agree += usize::from(good == best);
        }
        assert!(agree >= 370, "{agree}");
    }

    #[test]
    fn csv_row_has_fifty_fields() {
        let e = Encounter::generate(&mut ChaCha8Rng::seed_from_u64(9), 1, 2);
        let row = e.to_csv_row();
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(row.as_bytes());
        let rec = r.records().next().unwrap().unwrap();
        assert_eq!(rec.len(), 50);
        assert_eq!(&rec[0], "1");
    }

    #[test]
    fn loads_encounter_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("diabetic_data.csv");
        let mut text = uci_header().join(",") + "\n";
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in 0..5 {
            let mut e = Encounter::generate(&mut rng, 10 + i, 0);
            e.set("medical_specialty", Some("Pediatrics".into()));
            text.push_str(&e.to_csv_row());
        }
        std::fs::write(&path, text).unwrap();
        let corpus = load_uci_csv(&path, Some(3)).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.records[2].encounter_id, 12);
        let schema = corpus.warehouse_schema(false);
        let idx = schema.column_index("medical_specialty").unwrap();
        assert_eq!(
            schema.columns[idx].1,
            ColumnType::Categorical(vec!["Pediatrics".into()])
        );

        std::fs::write(&path, "encounter_id,race\n1,x\n").unwrap();
        assert!(matches!(
            load_uci_csv(&path, None),
            Err(CorpusError::Source { .. })
        ));
    }
}
