//! Class to super-class hierarchy.
//!
//! The on-disk form is either a bare list of entries or an object with an
//! optional explicit `superclasses` list:
//!
//! ```json
//! {
//!   "superclasses": ["vehicle", "street sign"],
//!   "classes": [
//!     {"class_id": 1, "class_name": "car", "superclass_name": "vehicle"},
//!     {"class_id": 9, "class_name": "unknown", "superclass_name": "unknown"}
//!   ]
//! }
//! ```
//!
//! An entry named `unknown` declares the reserved unknown label and is kept
//! out of the hierarchy.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ClassId;

pub const UNKNOWN_LABEL: &str = "unknown";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyEntry {
    pub class_id: ClassId,
    pub class_name: String,
    pub superclass_name: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TaxonomyDoc {
    Entries(Vec<TaxonomyEntry>),
    Full {
        #[serde(default)]
        superclasses: Option<Vec<String>>,
        classes: Vec<TaxonomyEntry>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaxonomyClass {
    pub name: String,
    pub superclass: usize,
}

/// Total mapping from class ids to super-classes `0..=L`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Taxonomy {
    superclasses: Vec<String>,
    classes: BTreeMap<ClassId, TaxonomyClass>,
    unknown_id: Option<ClassId>,
}

fn normalize(name: &str) -> String {
    name.trim().to_lowercase()
}

impl Taxonomy {
    /// Builds a taxonomy from entries. When `declared` is given, every entry
    /// must reference one of its names and super-class ids follow its order;
    /// otherwise ids follow first appearance.
    pub fn from_entries(entries: &[TaxonomyEntry], declared: Option<&[String]>) -> Result<Self> {
        let mut tax = Taxonomy::default();
        if let Some(names) = declared {
            for n in names {
                if tax.superclass_id(n).is_some() {
                    return Err(Error::InvalidInput(format!("super-class {n:?} declared twice")));
                }
                tax.superclasses.push(n.clone());
            }
        }
        for e in entries {
            if normalize(&e.class_name) == UNKNOWN_LABEL {
                if tax.unknown_id.is_some_and(|u| u != e.class_id) {
                    return Err(Error::InvalidInput("reserved unknown label declared twice".into()));
                }
                tax.unknown_id = Some(e.class_id);
                continue;
            }
            let sc = match tax.superclass_id(&e.superclass_name) {
                Some(id) => id,
                None if declared.is_some() => {
                    return Err(Error::InvalidInput(format!(
                        "class {} ({}) references undeclared super-class {:?}",
                        e.class_id, e.class_name, e.superclass_name
                    )))
                }
                None => {
                    tax.superclasses.push(e.superclass_name.clone());
                    tax.superclasses.len() - 1
                }
            };
            match tax.classes.get(&e.class_id) {
                Some(existing) if existing.superclass != sc => {
                    return Err(Error::InvalidInput(format!(
                        "class {} mapped to both {:?} and {:?}",
                        e.class_id, tax.superclasses[existing.superclass], e.superclass_name
                    )))
                }
                Some(_) => {}
                None => {
                    tax.classes.insert(
                        e.class_id,
                        TaxonomyClass {
                            name: e.class_name.clone(),
                            superclass: sc,
                        },
                    );
                }
            }
        }
        if let Some(u) = tax.unknown_id {
            if tax.classes.contains_key(&u) {
                return Err(Error::InvalidInput(format!(
                    "reserved unknown id {u} is also a regular class"
                )));
            }
        }
        Ok(tax)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TaxonomyDoc = serde_json::from_str(text).map_err(|e| Error::parse("taxonomy document", e))?;
        match doc {
            TaxonomyDoc::Entries(entries) => Self::from_entries(&entries, None),
            TaxonomyDoc::Full { superclasses, classes } => Self::from_entries(&classes, superclasses.as_deref()),
        }
    }

    pub fn entries(&self) -> Vec<TaxonomyEntry> {
        let mut out: Vec<_> = self
            .classes
            .iter()
            .map(|(&id, c)| TaxonomyEntry {
                class_id: id,
                class_name: c.name.clone(),
                superclass_name: self.superclasses[c.superclass].clone(),
            })
            .collect();
        if let Some(u) = self.unknown_id {
            out.push(TaxonomyEntry {
                class_id: u,
                class_name: UNKNOWN_LABEL.into(),
                superclass_name: UNKNOWN_LABEL.into(),
            });
        }
        out
    }

    pub fn superclasses(&self) -> &[String] {
        &self.superclasses
    }

    pub fn classes(&self) -> &BTreeMap<ClassId, TaxonomyClass> {
        &self.classes
    }

    pub fn unknown_id(&self) -> Option<ClassId> {
        self.unknown_id
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn superclass_of(&self, class: ClassId) -> Option<usize> {
        self.classes.get(&class).map(|c| c.superclass)
    }

    /// Case-insensitive lookup of a super-class by name.
    pub fn superclass_id(&self, name: &str) -> Option<usize> {
        let n = normalize(name);
        self.superclasses.iter().position(|s| normalize(s) == n)
    }

    pub fn class_by_name(&self, name: &str) -> Option<ClassId> {
        let n = normalize(name);
        self.classes
            .iter()
            .find(|(_, c)| normalize(&c.name) == n)
            .map(|(&id, _)| id)
    }

    pub fn classes_in(&self, superclass: usize) -> impl Iterator<Item = ClassId> + '_ {
        self.classes
            .iter()
            .filter(move |(_, c)| c.superclass == superclass)
            .map(|(&id, _)| id)
    }

    /// Resolves a name to class ids: a super-class name yields all of its
    /// classes, a class name yields that class.
    pub fn resolve_name(&self, name: &str) -> Option<Vec<ClassId>> {
        if let Some(sc) = self.superclass_id(name) {
            return Some(self.classes_in(sc).collect());
        }
        self.class_by_name(name).map(|c| vec![c])
    }
}

pub fn parse_taxonomy(path: impl AsRef<Path>) -> Result<Taxonomy> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Taxonomy::from_json(&text)
}
