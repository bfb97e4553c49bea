//! `composition.json` and `result.json`.

use std::path::Path;

use modsynth_core::composition::{Genome, GENOME_LENGTH};
use modsynth_core::synthesis::{ConstraintReport, GaSettings, GenerationStats, SynthesisResult, Verification};
use modsynth_core::{Composition, LibraryConfig, ModularUnit};
use serde::{Deserialize, Serialize};

use crate::error::{check_version, from_json, read, FileError};
use crate::library_file::LibraryDocument;
use crate::task_file::{LoadedTask, TaskDocument};

/// A unit sequence, e.g.
/// `{"format_version": 1, "units": [{"variant": "H", "kind": 1, "twist_deg": 0, "link": null}, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionDocument {
    pub format_version: u32,
    /// Informational, e.g. `H1-H4(-45,S2)-H3(45,C2)`; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notation: Option<String>,
    pub units: Vec<ModularUnit>,
}

impl CompositionDocument {
    pub fn new(composition: &Composition) -> Self {
        CompositionDocument {
            format_version: crate::FORMAT_VERSION,
            notation: Some(composition.notation()),
            units: composition.units.clone(),
        }
    }

    pub fn composition(&self) -> Composition {
        Composition::new(self.units.clone())
    }
}

pub fn load_composition(path: &Path) -> Result<Composition, FileError> {
    let doc: CompositionDocument = from_json(path, &read(path)?)?;
    check_version(path, doc.format_version)?;
    if !(modsynth_core::MIN_DOF..=modsynth_core::MAX_DOF).contains(&doc.units.len()) {
        return Err(FileError::schema(path, "units", "needs between 2 and 6 units"));
    }
    for (i, u) in doc.units.iter().enumerate() {
        if u.kind.has_link() != u.link.is_some() {
            return Err(FileError::schema(
                path,
                format!("units[{i}].link"),
                "required for kinds 3 and 4, forbidden for kinds 1 and 2",
            ));
        }
    }
    Ok(doc.composition())
}

/// Everything needed to reproduce, inspect and post-process a synthesis run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultDocument {
    pub format_version: u32,
    pub task: TaskDocument,
    pub library: LibraryDocument,
    pub settings: GaSettings,
    pub composition: CompositionDocument,
    pub genome: Vec<u8>,
    /// Synthesis found it feasible and the independent check agreed.
    pub feasible: bool,
    pub fitness: f64,
    pub objective_value: f64,
    pub ik_solutions: Vec<Vec<f64>>,
    pub constraint_report: ConstraintReport,
    pub torques: Vec<Vec<f64>>,
    pub verification: Verification,
    pub history: Vec<GenerationStats>,
    pub evaluations: usize,
}

impl ResultDocument {
    pub fn new(
        loaded: &LoadedTask,
        library: &LibraryConfig,
        settings: &GaSettings,
        result: &SynthesisResult,
        verification: Verification,
    ) -> Self {
        ResultDocument {
            format_version: crate::FORMAT_VERSION,
            task: loaded.document.clone(),
            library: LibraryDocument::from_config(library),
            settings: *settings,
            composition: CompositionDocument::new(&result.composition),
            genome: result.genome.to_genes().to_vec(),
            feasible: result.feasible && verification.feasible,
            fitness: result.fitness,
            objective_value: result.objective_value,
            ik_solutions: result.ik_solutions.clone(),
            constraint_report: result.constraint_report.clone(),
            torques: result.torques.clone(),
            verification,
            history: result.history.clone(),
            evaluations: result.evaluations,
        }
    }

    pub fn genome(&self) -> Option<Genome> {
        let genes: [u8; GENOME_LENGTH] = self.genome.as_slice().try_into().ok()?;
        Some(Genome::from_genes(&genes))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }
}

pub fn load_result(path: &Path) -> Result<ResultDocument, FileError> {
    let doc: ResultDocument = from_json(path, &read(path)?)?;
    check_version(path, doc.format_version)?;
    if doc.ik_solutions.len() != doc.task.tsls.len() {
        return Err(FileError::schema(path, "ik_solutions", "needs one joint vector per TSL"));
    }
    Ok(doc)
}
