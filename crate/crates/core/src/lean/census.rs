//! Declaration / `sorry` / axiom inventory of Lean source files.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::decls::{scan, DeclKind};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub file: String,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedLocation {
    pub name: String,
    #[serde(flatten)]
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnsoundnessCensus {
    pub sorry_count: usize,
    pub sorry_locations: Vec<Location>,
    pub axiom_names: Vec<NamedLocation>,
    pub declaration_counts: BTreeMap<DeclKind, usize>,
    pub total_lines: usize,
}

impl Default for UnsoundnessCensus {
    fn default() -> Self {
        UnsoundnessCensus {
            sorry_count: 0,
            sorry_locations: Vec::new(),
            axiom_names: Vec::new(),
            declaration_counts: DeclKind::ALL.into_iter().map(|k| (k, 0)).collect(),
            total_lines: 0,
        }
    }
}

impl UnsoundnessCensus {
    /// Adds one source file to the census.
    pub fn add_file(&mut self, file: &str, src: &str) {
        let scan = scan(src);
        for (line, column) in scan.sorry_locations {
            self.sorry_locations.push(Location { file: file.to_string(), line, column });
        }
        self.sorry_count = self.sorry_locations.len();
        for d in &scan.decls {
            *self.declaration_counts.entry(d.kind).or_insert(0) += 1;
            if d.kind == DeclKind::Axiom {
                self.axiom_names.push(NamedLocation {
                    name: d.name.clone(),
                    location: Location { file: file.to_string(), line: d.name_line, column: d.name_column },
                });
            }
        }
        self.total_lines += physical_lines(src);
    }

    pub fn of_source(file: &str, src: &str) -> UnsoundnessCensus {
        let mut c = UnsoundnessCensus::default();
        c.add_file(file, src);
        c
    }

    pub fn total_declarations(&self) -> usize {
        self.declaration_counts.values().sum()
    }

    pub fn count(&self, kind: DeclKind) -> usize {
        self.declaration_counts.get(&kind).copied().unwrap_or(0)
    }

    pub fn axiom_name_list(&self) -> Vec<&str> {
        self.axiom_names.iter().map(|a| a.name.as_str()).collect()
    }
}

/// Physical line count: a trailing newline does not open a new line.
pub fn physical_lines(src: &str) -> usize {
    src.lines().count()
}
