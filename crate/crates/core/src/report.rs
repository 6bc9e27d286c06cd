//! Certification records shared by the pipeline and the scenario runner.

use serde::Serialize;

/// One checked inequality: `observed` against `bound`, with the worst
/// witness point when available.
#[derive(Debug, Clone, Serialize)]
pub struct Certification {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub note: String,
}

impl Certification {
    pub fn check(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            passed: observed <= bound,
            observed,
            bound,
            witness: None,
            note: String::new(),
        }
    }

    pub fn with_witness(mut self, w: [f64; 4]) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

/// Append-only collection of certifications.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CertificationSet {
    pub entries: Vec<Certification>,
}

impl CertificationSet {
    pub fn push(&mut self, c: Certification) {
        self.entries.push(c);
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Certification> {
        self.entries.iter().filter(|c| !c.passed)
    }
}
