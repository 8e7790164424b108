//! R: consistent renaming of every renameable binding.

use std::collections::HashMap;

use ctfam_syntax::{BindingTable, SourceUnit};

use crate::config::{InsertionReport, PassConfig, TransformTag};
use crate::error::TransformError;
use crate::names::NameGen;
use crate::rng::Stream;

use super::{finish, non_utf8_source, PassOutput};

pub fn rename_identifiers(
    unit: &SourceUnit,
    bindings: &BindingTable,
    cfg: &PassConfig,
) -> Result<PassOutput, TransformError> {
    cfg.validate()?;
    let mut rng = Stream::derive(cfg.seed, &[TransformTag::R.as_str(), &unit.path]);
    let mut reserved = cfg.reserved_names.clone();
    reserved.extend(bindings.facts.identifiers.iter().cloned());
    let mut gen = NameGen::new(&reserved).ascii_only(non_utf8_source(unit));
    let mut names = HashMap::new();
    for (i, _) in bindings.renameable() {
        names.insert(i, gen.fresh(&mut rng, cfg)?);
    }
    let mut report = InsertionReport::default();
    if names.is_empty() {
        return Ok((unit.clone(), report));
    }
    report.renamed = names.len();
    let map = bindings.rename_map(&names);
    let mut out = unit.clone();
    out.edit(|m| m.rename_tokens(&map));
    Ok((finish(&out)?, report))
}
