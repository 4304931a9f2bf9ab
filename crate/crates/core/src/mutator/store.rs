use std::io;
use std::path::Path;

use super::{AttemptRecord, DiscardLedger, SynthesisOutcome, Variant};
use crate::patch::Patch;

const VARIANT_JSON: &str = "variant.json";
const PATCH_FILE: &str = "mutation.patch";
const LOG_FILE: &str = "error.log";

fn invalid(e: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e.to_string())
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// One directory per variant: `variant.json`, `mutation.patch`, `error.log`.
pub fn write_variants(dir: &Path, variants: &[Variant]) -> io::Result<()> {
    for v in variants {
        let d = dir.join(&v.id);
        std::fs::create_dir_all(&d)?;
        std::fs::write(d.join(VARIANT_JSON), to_json(v))?;
        std::fs::write(d.join(PATCH_FILE), &v.mutation_patch.text)?;
        std::fs::write(d.join(LOG_FILE), &v.error_log)?;
    }
    Ok(())
}

/// Variants under `dir`, ordered by id.
pub fn read_variants(dir: &Path) -> io::Result<Vec<Variant>> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Ok(out);
    }
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let d = e.path();
        if !d.join(VARIANT_JSON).is_file() {
            continue;
        }
        let mut v: Variant = serde_json::from_str(&std::fs::read_to_string(d.join(VARIANT_JSON))?).map_err(invalid)?;
        v.mutation_patch = Patch::from_text(std::fs::read_to_string(d.join(PATCH_FILE))?).map_err(invalid)?;
        v.error_log = std::fs::read_to_string(d.join(LOG_FILE))?;
        out.push(v);
    }
    Ok(out)
}

impl SynthesisOutcome {
    /// Variants under `dir/variants`, plus `ledger.json` and `attempts.jsonl`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        write_variants(&dir.join("variants"), &self.variants)?;
        std::fs::write(dir.join("ledger.json"), to_json(&self.ledger))?;
        let mut lines = String::new();
        for a in &self.attempts {
            lines.push_str(&serde_json::to_string(a).expect("serializable"));
            lines.push('\n');
        }
        std::fs::write(dir.join("attempts.jsonl"), lines)
    }

    pub fn read(dir: &Path) -> io::Result<Self> {
        let ledger: DiscardLedger =
            serde_json::from_str(&std::fs::read_to_string(dir.join("ledger.json"))?).map_err(invalid)?;
        let attempts = std::fs::read_to_string(dir.join("attempts.jsonl"))?
            .lines()
            .map(serde_json::from_str::<AttemptRecord>)
            .collect::<Result<_, _>>()
            .map_err(invalid)?;
        let mut variants = read_variants(&dir.join("variants"))?;
        variants.sort_by_key(|v| v.attempt);
        Ok(SynthesisOutcome { variants, ledger, attempts })
    }
}
