use std::collections::BTreeSet;

use crate::error::ParseError;
use crate::locations::EligibleLocation;
use crate::scope::BindingTable;
use crate::tree::Module;

/// One parsed source file.
#[derive(Debug, Clone)]
pub struct SourceUnit {
    /// Path relative to the challenge directory.
    pub path: String,
    module: Module,
    original: String,
}

impl SourceUnit {
    pub fn parse(path: impl Into<String>, src: &str) -> Result<Self, ParseError> {
        let mut module = crate::parser::build(src)?;
        crate::grammar::module_events(&module)?;
        module.renumber();
        Ok(SourceUnit {
            path: path.into(),
            module,
            original: src.to_string(),
        })
    }

    pub fn module(&self) -> &Module {
        &self.module
    }

    /// Source text the unit was parsed from.
    pub fn original(&self) -> &str {
        &self.original
    }

    pub fn render(&self) -> String {
        self.module.render()
    }

    /// Applies an in-place edit and renumbers tokens afterwards. Callers
    /// are responsible for keeping the tree valid; [`SourceUnit::reparse`]
    /// checks that.
    pub fn edit<R>(&mut self, f: impl FnOnce(&mut Module) -> R) -> R {
        let r = f(&mut self.module);
        self.module.renumber();
        r
    }

    /// Renders and parses the result, yielding a fresh unit whose original
    /// text is the rendered output.
    pub fn reparse(&self) -> Result<SourceUnit, ParseError> {
        SourceUnit::parse(self.path.clone(), &self.render())
    }

    pub fn analyze_bindings(&self) -> BindingTable {
        self.analyze_bindings_with(&BTreeSet::new())
    }

    /// Binding analysis with extra names that must not be renamed, such as
    /// names other files of the same program import or access as
    /// attributes.
    pub fn analyze_bindings_with(&self, protected: &BTreeSet<String>) -> BindingTable {
        crate::scope::analyze(&self.module, protected)
    }

    pub fn eligible_locations(&self) -> Vec<EligibleLocation> {
        crate::locations::eligible_locations(&self.module)
    }
}

/// Parses source text with an empty path.
pub fn parse(src: &str) -> Result<SourceUnit, ParseError> {
    SourceUnit::parse("", src)
}

pub fn render(unit: &SourceUnit) -> String {
    unit.render()
}
