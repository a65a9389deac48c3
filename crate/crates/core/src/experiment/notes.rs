//! Clinical-note rendering and the pattern extractor the lake applies when
//! it reads notes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;

use super::corpus::Encounter;
use super::uci::{complication_column, LAB_TESTS, MEDICATIONS, MED_VALUES};

/// Rendered in place of an absent value.
const UNKNOWN: &str = "unknown";

/// Free-text note for one encounter. Medications not taken are omitted.
pub fn render_note(e: &Encounter) -> String {
    let f = |name: &str| e.get(name).unwrap_or(UNKNOWN);
    let mut s = String::new();
    let _ = write!(
        s,
        "Encounter {} for patient {}. {} patient aged {}, race {}, weight {}. \
         Admission type {} from source {}, discharged to disposition {}. \
         Stayed {} days under {} with payer {}. \
         Had {} lab procedures, {} procedures and {} medications. \
         Prior year visits: {} outpatient, {} emergency, {} inpatient. \
         Diagnoses {}, {}, {} of {} recorded. \
         Max glucose serum {}, A1C result {}.\n",
        f("encounter_id"),
        f("patient_nbr"),
        f("gender"),
        f("age"),
        f("race"),
        f("weight"),
        f("admission_type_id"),
        f("admission_source_id"),
        f("discharge_disposition_id"),
        f("time_in_hospital"),
        f("medical_specialty"),
        f("payer_code"),
        f("num_lab_procedures"),
        f("num_procedures"),
        f("num_medications"),
        f("number_outpatient"),
        f("number_emergency"),
        f("number_inpatient"),
        f("diag_1"),
        f("diag_2"),
        f("diag_3"),
        f("number_diagnoses"),
        f("max_glu_serum"),
        f("A1Cresult"),
    );
    let labs: Vec<String> = LAB_TESTS
        .iter()
        .zip(&e.labs)
        .map(|(t, &v)| format!("{} {} {} ({})", t.label, format_lab(v), t.unit, t.flag(v)))
        .collect();
    let _ = writeln!(
        s,
        "Labs: {}. Complication: {}.",
        labs.join(", "),
        e.complication
    );
    let meds: Vec<String> = MEDICATIONS
        .iter()
        .filter_map(|m| {
            e.get(m)
                .filter(|v| *v != MED_VALUES[0])
                .map(|v| format!("{m} {v}"))
        })
        .collect();
    let meds = if meds.is_empty() {
        "none".to_owned()
    } else {
        meds.join(", ")
    };
    let _ = write!(
        s,
        "Medications: {meds}. Medication change {}, diabetes medication {}. Readmission {}.",
        f("change"),
        f("diabetesMed"),
        f("readmitted"),
    );
    s
}

/// Lab values are carried with two decimals in every source format.
pub fn format_lab(v: f64) -> String {
    format!("{v:.2}")
}

struct Patterns {
    single: Vec<(Vec<&'static str>, Regex)>,
    labs: Vec<Regex>,
    complication: Regex,
    medications: Regex,
}

static PATTERNS: LazyLock<Patterns> = LazyLock::new(|| {
    let single: Vec<(Vec<&'static str>, &str)> = vec![
        (
            vec!["encounter_id", "patient_nbr"],
            r"Encounter (\S+) for patient (\S+?)\.",
        ),
        (
            vec!["gender", "age", "race", "weight"],
            r"\. (\S+) patient aged (\S+), race (\S+), weight (\S+?)\. Admission",
        ),
        (
            vec![
                "admission_type_id",
                "admission_source_id",
                "discharge_disposition_id",
            ],
            r"Admission type (\S+) from source (\S+), discharged to disposition (\S+?)\. Stayed",
        ),
        (
            vec!["time_in_hospital", "medical_specialty", "payer_code"],
            r"Stayed (\S+) days under (\S+) with payer (\S+?)\. Had",
        ),
        (
            vec!["num_lab_procedures", "num_procedures", "num_medications"],
            r"Had (\S+) lab procedures, (\S+) procedures and (\S+) medications\.",
        ),
        (
            vec!["number_outpatient", "number_emergency", "number_inpatient"],
            r"visits: (\S+) outpatient, (\S+) emergency, (\S+) inpatient\.",
        ),
        (
            vec!["diag_1", "diag_2", "diag_3", "number_diagnoses"],
            r"Diagnoses (\S+), (\S+), (\S+) of (\S+) recorded\.",
        ),
        (
            vec!["max_glu_serum", "A1Cresult"],
            r"Max glucose serum (\S+), A1C result (\S+?)\.(?:\s|$)",
        ),
        (
            vec!["change", "diabetesMed"],
            r"Medication change (\S+), diabetes medication (\S+?)\.(?:\s|$)",
        ),
        (vec!["readmitted"], r"Readmission (\S+?)\.(?:\s|$)"),
    ];
    Patterns {
        single: single
            .into_iter()
            .map(|(names, p)| (names, Regex::new(p).expect("static pattern")))
            .collect(),
        labs: LAB_TESTS
            .iter()
            .map(|t| {
                Regex::new(&format!(
                    r"{} (\S+) {} \((\S+)\)",
                    regex::escape(t.label),
                    regex::escape(t.unit)
                ))
                .expect("lab pattern")
            })
            .collect(),
        complication: Regex::new(r"Complication: (\S+?)\.(?:\s|$)").expect("static pattern"),
        medications: Regex::new(r"Medications: ([^.]*)\.").expect("static pattern"),
    }
});

/// Pull encounter attributes out of a note. Attributes that are absent or
/// written as `unknown` are left out; a readable medication list fills in
/// `No` for every medication it does not name.
pub fn extract_note(text: &str) -> BTreeMap<String, String> {
    let p = &*PATTERNS;
    let mut out = BTreeMap::new();
    let mut put = |name: String, value: &str| {
        if value != UNKNOWN {
            out.insert(name, value.to_owned());
        }
    };
    for (names, re) in &p.single {
        if let Some(c) = re.captures(text) {
            for (i, name) in names.iter().enumerate() {
                put((*name).to_owned(), &c[i + 1]);
            }
        }
    }
    for (t, re) in LAB_TESTS.iter().zip(&p.labs) {
        if let Some(c) = re.captures(text) {
            put(t.value_column(), &c[1]);
            put(t.flag_column(), &c[2]);
        }
    }
    if let Some(c) = p.complication.captures(text) {
        put(complication_column(), &c[1]);
    }
    if let Some(c) = p.medications.captures(text) {
        let listed: BTreeMap<&str, &str> = c[1]
            .split(", ")
            .filter_map(|item| item.trim().split_once(' '))
            .collect();
        for m in MEDICATIONS {
            put(
                m.to_owned(),
                listed.get(m).copied().unwrap_or(MED_VALUES[0]),
            );
        }
    }
    out
}
