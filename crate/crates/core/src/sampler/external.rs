//! Out-of-process sampling through the model export file.
//!
//! The program is invoked as `program [args..] <model.json> <samples.json>`;
//! it reads the exported model and writes a sample-set document. Every
//! returned energy is checked against the model on import.

use std::path::PathBuf;
use std::process::Command;

use super::{Budget, Sampler, SampleSet, SampleSetDocument, SamplerError};
use crate::qubo::QuboModel;

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSampler {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl ExternalSampler {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self { program: program.into(), args: Vec::new() }
    }
}

impl Sampler for ExternalSampler {
    fn name(&self) -> &str {
        "external"
    }

    fn solve(&self, model: &QuboModel, budget: &Budget) -> Result<SampleSet, SamplerError> {
        super::check_size(model, budget)?;
        let dir = tempfile::tempdir()?;
        let model_path = dir.path().join("model.json");
        let out_path = dir.path().join("samples.json");
        std::fs::write(&model_path, serde_json::to_string(&model.to_document())?)?;
        let status = Command::new(&self.program)
            .args(&self.args)
            .arg(&model_path)
            .arg(&out_path)
            .status()
            .map_err(|e| SamplerError::External(format!("{}: {e}", self.program.display())))?;
        if !status.success() {
            return Err(SamplerError::External(format!("{} exited with {status}", self.program.display())));
        }
        let text = std::fs::read_to_string(&out_path)
            .map_err(|e| SamplerError::External(format!("no sample file written: {e}")))?;
        let doc: SampleSetDocument = serde_json::from_str(&text)?;
        let mut set = SampleSet::import(&doc, model)?;
        if set.metadata.sampler.is_empty() {
            set.metadata.sampler = format!("external:{}", self.program.display());
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn script(body: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sampler.sh");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "#!/bin/sh\n{body}").unwrap();
        (dir, path)
    }

    #[test]
    fn energies_are_reverified_on_import() {
        let m = QuboModel::from_terms(2, 0.0, &[(0, -1.0), (1, 1.0)], &[]).unwrap();
        let (_dir, path) = script(
            r#"test -s "$1" || exit 7
cat > "$2" <<'JSON'
{"records": [{"bits": "10", "energy": -1.0, "multiplicity": 2}, {"bits": "01", "energy": -5.0, "multiplicity": 1}]}
JSON"#,
        );
        let sampler = ExternalSampler { program: "sh".into(), args: vec![path.display().to_string()] };
        let s = sampler.solve(&m, &Budget::default()).unwrap();
        assert_eq!(s.records.len(), 1);
        assert_eq!(s.records[0].bits, vec![true, false]);
        assert_eq!(s.records[0].multiplicity, 2);
        assert_eq!(s.metadata.rejected, 1);
        s.verify(&m).unwrap();
    }

    #[test]
    fn failing_program_is_reported() {
        let m = QuboModel::from_terms(1, 0.0, &[], &[]).unwrap();
        let (_dir, path) = script("exit 3");
        let sampler = ExternalSampler { program: "sh".into(), args: vec![path.display().to_string()] };
        assert!(matches!(sampler.solve(&m, &Budget::default()), Err(SamplerError::External(_))));
    }
}
