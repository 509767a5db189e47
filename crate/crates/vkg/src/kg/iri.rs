//! Identifiers for graph nodes, predicates, and classes.

use std::fmt;

use super::KgError;

/// A prefixed identifier. Corpus-derived entities carry the empty prefix and
/// render as `<local>`; everything else renders as `prefix:local`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Iri {
    prefix: String,
    local: String,
}

impl Iri {
    /// Build a prefixed identifier such as `uco:Product`.
    pub fn new(prefix: &str, local: &str) -> Result<Self, KgError> {
        if !prefix.is_empty() && !is_valid_prefix(prefix) {
            return Err(KgError::InvalidIri {
                text: format!("{prefix}:{local}"),
                reason: "prefix must start with a letter and contain only [A-Za-z0-9_-]".into(),
            });
        }
        if local.is_empty() {
            return Err(KgError::InvalidIri {
                text: format!("{prefix}:"),
                reason: "local name must be non-empty".into(),
            });
        }
        if local.chars().any(|c| c.is_whitespace() || matches!(c, '<' | '>' | '"' | '{' | '}')) {
            return Err(KgError::InvalidIri {
                text: format!("{prefix}:{local}"),
                reason: "local name must not contain whitespace or <>\"{}".into(),
            });
        }
        Ok(Self { prefix: prefix.to_string(), local: local.to_string() })
    }

    /// Build a corpus-derived entity identifier, rendered `<local>`.
    pub fn entity(local: &str) -> Result<Self, KgError> {
        Self::new("", local)
    }

    /// Parse either `prefix:local` or `<local>` text.
    pub fn parse(text: &str) -> Result<Self, KgError> {
        let text = text.trim();
        if let Some(inner) = text.strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
            return Self::entity(inner);
        }
        match text.split_once(':') {
            Some((prefix, local)) if !prefix.is_empty() => Self::new(prefix, local),
            _ => Err(KgError::InvalidIri {
                text: text.to_string(),
                reason: "expected prefix:local or <local>".into(),
            }),
        }
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn local(&self) -> &str {
        &self.local
    }

    /// True for corpus-derived entities (`<local>` form).
    pub fn is_corpus_entity(&self) -> bool {
        self.prefix.is_empty()
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.prefix.is_empty() {
            write!(f, "<{}>", self.local)
        } else {
            write!(f, "{}:{}", self.prefix, self.local)
        }
    }
}

fn is_valid_prefix(prefix: &str) -> bool {
    let mut chars = prefix.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Normalize an entity local name to its vector-vocabulary token:
/// lowercased, spaces replaced by underscores.
pub fn normalize_token(name: &str) -> String {
    name.trim().to_lowercase().replace(' ', "_")
}

/// Well-known identifiers used throughout the store.
pub mod terms {
    use super::Iri;

    fn iri(prefix: &str, local: &str) -> Iri {
        Iri::new(prefix, local).expect("well-known iri")
    }

    pub fn rdf_type() -> Iri {
        iri("rdf", "type")
    }

    pub fn rdfs_subclass_of() -> Iri {
        iri("rdfs", "subClassOf")
    }

    pub fn rdfs_class() -> Iri {
        iri("rdfs", "Class")
    }

    pub fn owl_same_as() -> Iri {
        iri("owl", "sameAs")
    }

    pub fn has_vector() -> Iri {
        iri("vkg", "hasVector")
    }

    pub fn proposed_triple() -> Iri {
        iri("vkg", "ProposedTriple")
    }

    pub fn intelligence_class() -> Iri {
        iri("intel", "Intelligence")
    }

    pub fn intel_has_vulnerability() -> Iri {
        iri("intel", "hasVulnerability")
    }

    pub fn intel_timestamp() -> Iri {
        iri("intel", "timestamp")
    }

    pub fn uco_has_dependency() -> Iri {
        iri("uco", "hasDependency")
    }

    pub fn uco_product() -> Iri {
        iri("uco", "Product")
    }

    pub fn uco_vulnerability() -> Iri {
        iri("uco", "Vulnerability")
    }
}
