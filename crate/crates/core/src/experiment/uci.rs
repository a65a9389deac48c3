//! The diabetes encounter attribute set (130 US hospitals, 1999-2008) plus
//! the nested lab detail only the semi-structured and note sources carry.

use crate::analytics::ColumnKind;
use crate::warehouse::{ColumnType, WarehouseSchema};

pub const ENCOUNTER_ID: &str = "encounter_id";
pub const PATIENT_NBR: &str = "patient_nbr";
pub const LABEL: &str = "readmitted";
/// Label value counted as a good outcome.
pub const SUCCESS: &str = "NO";
pub const MEDICATION: &str = "insulin";
pub const MED_VALUES: [&str; 4] = ["No", "Steady", "Up", "Down"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UciColumn {
    pub name: &'static str,
    pub kind: ColumnKind,
    /// Values the generator draws from; empty for numeric columns.
    pub vocab: &'static [&'static str],
}

const fn num(name: &'static str) -> UciColumn {
    UciColumn {
        name,
        kind: ColumnKind::Numeric,
        vocab: &[],
    }
}

const fn cat(name: &'static str, vocab: &'static [&'static str]) -> UciColumn {
    UciColumn {
        name,
        kind: ColumnKind::Categorical,
        vocab,
    }
}

pub const MEDICATIONS: [&str; 23] = [
    "metformin",
    "repaglinide",
    "nateglinide",
    "chlorpropamide",
    "glimepiride",
    "acetohexamide",
    "glipizide",
    "glyburide",
    "tolbutamide",
    "pioglitazone",
    "rosiglitazone",
    "acarbose",
    "miglitol",
    "troglitazone",
    "tolazamide",
    "examide",
    "citoglipton",
    "insulin",
    "glyburide-metformin",
    "glipizide-metformin",
    "glimepiride-pioglitazone",
    "metformin-rosiglitazone",
    "metformin-pioglitazone",
];

const AGES: &[&str] = &[
    "[0-10)", "[10-20)", "[20-30)", "[30-40)", "[40-50)", "[50-60)", "[60-70)", "[70-80)",
    "[80-90)", "[90-100)",
];
const DIAGNOSES: &[&str] = &[
    "250.4", "250.5", "250.6", "250.8", "276", "401", "403", "410", "414", "427", "428", "434",
    "486", "491", "584", "599", "682", "715", "780", "786", "996", "V57",
];

/// The 50 source attributes, in file order.
pub const UCI_COLUMNS: [UciColumn; 50] = {
    const MED: &[&str] = &MED_VALUES;
    [
        num(ENCOUNTER_ID),
        num(PATIENT_NBR),
        cat(
            "race",
            &["AfricanAmerican", "Asian", "Caucasian", "Hispanic", "Other"],
        ),
        cat("gender", &["Female", "Male"]),
        cat("age", AGES),
        cat("weight", &["[50-75)", "[75-100)", "[100-125)", "[125-150)"]),
        cat(
            "admission_type_id",
            &["1", "2", "3", "4", "5", "6", "7", "8"],
        ),
        cat(
            "discharge_disposition_id",
            &["1", "2", "3", "4", "5", "6", "7", "11", "18", "22", "25"],
        ),
        cat("admission_source_id", &["1", "2", "4", "6", "7", "17"]),
        num("time_in_hospital"),
        cat("payer_code", &["BC", "CP", "HM", "MC", "MD", "SP", "UN"]),
        cat(
            "medical_specialty",
            &[
                "Cardiology",
                "Emergency/Trauma",
                "Family/GeneralPractice",
                "InternalMedicine",
                "Nephrology",
                "Orthopedics",
                "Surgery-General",
            ],
        ),
        num("num_lab_procedures"),
        num("num_procedures"),
        num("num_medications"),
        num("number_outpatient"),
        num("number_emergency"),
        num("number_inpatient"),
        cat("diag_1", DIAGNOSES),
        cat("diag_2", DIAGNOSES),
        cat("diag_3", DIAGNOSES),
        num("number_diagnoses"),
        cat("max_glu_serum", &["None", "Norm", ">200", ">300"]),
        cat("A1Cresult", &["None", "Norm", ">7", ">8"]),
        cat(MEDICATIONS[0], MED),
        cat(MEDICATIONS[1], MED),
        cat(MEDICATIONS[2], MED),
        cat(MEDICATIONS[3], MED),
        cat(MEDICATIONS[4], MED),
        cat(MEDICATIONS[5], MED),
        cat(MEDICATIONS[6], MED),
        cat(MEDICATIONS[7], MED),
        cat(MEDICATIONS[8], MED),
        cat(MEDICATIONS[9], MED),
        cat(MEDICATIONS[10], MED),
        cat(MEDICATIONS[11], MED),
        cat(MEDICATIONS[12], MED),
        cat(MEDICATIONS[13], MED),
        cat(MEDICATIONS[14], MED),
        cat(MEDICATIONS[15], MED),
        cat(MEDICATIONS[16], MED),
        cat(MEDICATIONS[17], MED),
        cat(MEDICATIONS[18], MED),
        cat(MEDICATIONS[19], MED),
        cat(MEDICATIONS[20], MED),
        cat(MEDICATIONS[21], MED),
        cat(MEDICATIONS[22], MED),
        cat("change", &["Ch", "No"]),
        cat("diabetesMed", &["No", "Yes"]),
        cat(LABEL, &["<30", ">30", "NO"]),
    ]
};

/// A nested lab measurement: numeric value plus a band flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabTest {
    pub key: &'static str,
    /// Label used in clinical notes.
    pub label: &'static str,
    pub unit: &'static str,
    /// Upper bounds of the `L`, `N` and `H` bands; above the last is `HH`.
    pub bands: [f64; 3],
}

pub const FLAGS: [&str; 4] = ["L", "N", "H", "HH"];

pub const LAB_TESTS: [LabTest; 8] = [
    LabTest {
        key: "hba1c_value",
        label: "HbA1c",
        unit: "%",
        bands: [4.0, 6.0, 8.0],
    },
    LabTest {
        key: "glucose_mg_dl",
        label: "glucose",
        unit: "mg/dL",
        bands: [70.0, 140.0, 220.0],
    },
    LabTest {
        key: "creatinine_mg_dl",
        label: "creatinine",
        unit: "mg/dL",
        bands: [0.6, 1.2, 2.0],
    },
    LabTest {
        key: "ldl_mg_dl",
        label: "LDL",
        unit: "mg/dL",
        bands: [70.0, 130.0, 170.0],
    },
    LabTest {
        key: "hdl_mg_dl",
        label: "HDL",
        unit: "mg/dL",
        bands: [40.0, 60.0, 80.0],
    },
    LabTest {
        key: "triglycerides_mg_dl",
        label: "triglycerides",
        unit: "mg/dL",
        bands: [60.0, 150.0, 250.0],
    },
    LabTest {
        key: "systolic_bp",
        label: "systolic BP",
        unit: "mmHg",
        bands: [100.0, 130.0, 150.0],
    },
    LabTest {
        key: "bmi",
        label: "BMI",
        unit: "kg/m2",
        bands: [18.5, 25.0, 30.0],
    },
];

impl LabTest {
    pub fn flag(&self, value: f64) -> &'static str {
        let band = self.bands.iter().position(|&b| value < b).unwrap_or(3);
        FLAGS[band]
    }

    pub fn value_column(&self) -> String {
        format!("{LAB_PREFIX}{}", self.key)
    }

    pub fn flag_column(&self) -> String {
        format!(
            "{LAB_PREFIX}{}",
            self.key.replace("_value", "").replace("_mg_dl", "") + "_flag"
        )
    }
}

pub const LAB_PREFIX: &str = "lab_detail.";
pub const COMPLICATIONS: [&str; 4] = ["none", "retinopathy", "nephropathy", "neuropathy"];

pub fn complication_column() -> String {
    format!("{LAB_PREFIX}complication")
}

/// Lab-detail columns, in the order the lake table lists them.
pub fn lab_columns() -> Vec<(String, ColumnKind)> {
    let mut out: Vec<(String, ColumnKind)> = LAB_TESTS
        .iter()
        .flat_map(|t| {
            [
                (t.value_column(), ColumnKind::Numeric),
                (t.flag_column(), ColumnKind::Categorical),
            ]
        })
        .collect();
    out.push((complication_column(), ColumnKind::Categorical));
    out
}

/// Every attribute the lake can read: the 50 source columns then the lab
/// detail.
pub fn lake_columns() -> Vec<(String, ColumnKind)> {
    UCI_COLUMNS
        .iter()
        .map(|c| (c.name.to_owned(), c.kind))
        .chain(lab_columns())
        .collect()
}

/// Columns used as clustering features: everything except identifiers and
/// the outcome label.
pub fn is_feature(name: &str) -> bool {
    !matches!(name, ENCOUNTER_ID | PATIENT_NBR | LABEL)
}

pub fn uci_header() -> Vec<String> {
    UCI_COLUMNS.iter().map(|c| c.name.to_owned()).collect()
}

/// The warehouse table for the benchmark. The default covers the 50 source
/// columns only, so nested lab detail and note text cannot be loaded. With
/// `full_coverage` the lab detail columns are declared as well.
pub fn warehouse_schema(full_coverage: bool) -> WarehouseSchema {
    let mut columns: Vec<(String, ColumnType)> = UCI_COLUMNS
        .iter()
        .map(|c| {
            let ty = match c.kind {
                ColumnKind::Numeric => ColumnType::Integer,
                ColumnKind::Categorical => {
                    ColumnType::Categorical(c.vocab.iter().map(|s| s.to_string()).collect())
                }
            };
            (c.name.to_owned(), ty)
        })
        .collect();
    if full_coverage {
        for test in &LAB_TESTS {
            columns.push((test.value_column(), ColumnType::Real));
            columns.push((
                test.flag_column(),
                ColumnType::Categorical(FLAGS.iter().map(|s| s.to_string()).collect()),
            ));
        }
        columns.push((
            complication_column(),
            ColumnType::Categorical(COMPLICATIONS.iter().map(|s| s.to_string()).collect()),
        ));
    }
    WarehouseSchema::new("encounters", columns, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn fifty_unique_attributes() {
        let names: HashSet<&str> = UCI_COLUMNS.iter().map(|c| c.name).collect();
        assert_eq!(names.len(), 50);
        assert_eq!(
            UCI_COLUMNS
                .iter()
                .filter(|c| MEDICATIONS.contains(&c.name))
                .count(),
            23
        );
        assert!(UCI_COLUMNS
            .iter()
            .all(|c| (c.kind == ColumnKind::Numeric) == c.vocab.is_empty()));
    }

    #[test]
    fn lab_columns_are_distinct() {
        let cols = lab_columns();
        let names: HashSet<&String> = cols.iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), 17);
        assert!(names.contains(&"lab_detail.hba1c_flag".to_owned()));
        assert!(names.contains(&"lab_detail.glucose_flag".to_owned()));
    }

    #[test]
    fn flag_bands() {
        let t = &LAB_TESTS[0];
        assert_eq!(
            [3.9, 4.0, 7.9, 8.0, 12.0].map(|v| t.flag(v)),
            ["L", "N", "H", "HH", "HH"]
        );
    }

    #[test]
    fn default_schema_omits_lab_detail() {
        let s = warehouse_schema(false);
        assert_eq!(s.columns.len(), 50);
        assert_eq!(warehouse_schema(true).columns.len(), 67);
    }
}
